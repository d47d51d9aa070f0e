"""Run configuration, learner/environment loops, traces, metrics and reports."""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .comparator import (
    ComparatorResult,
    HindsightAccumulator,
    bandit_problem,
    best_feasible,
)
from .core import InputError, InvariantViolation, OcpBounds, Simplex, as_generator, make_mirror_map
from .environments import EnvSpec, Prop1Adversary
from .exp4pr import theorem3_params
from .exp4r import theorem2_params
from .ocp import ConstrainedOMD, LinearRound, default_bounds, theorem1_params

ALGORITHMS = ("ocp-euclidean", "ocp-entropy", "exp4r", "exp4pr")
CSV_HEADER = "t,action,inst_cost,inst_risk,cum_cost,cum_violation,lambda"
COLUMNS = ("inst_cost", "inst_risk", "cum_cost", "cum_violation", "lambda")


class ConfigError(InputError):
    """Run configuration rejected before any round is played."""


def fmt(v: float) -> str:
    return format(float(v), ".17g")


# --------------------------------------------------------------------------
# Configuration

_CONFIG_FIELDS = {"algorithm", "environment", "horizon", "seeds", "mu", "delta", "kappa", "epsilon", "nu", "bounds", "output"}
_ENV_FIELDS = {"kind", "arms", "beta", "params", "policies"}


@dataclass
class RunConfig:
    """Everything needed to replay a run.

    ``horizon`` may hold several checkpoints; each is an independent run
    with its own schedule.
    """

    algorithm: str
    environment: EnvSpec
    horizon: list[int]
    seeds: list[int] = field(default_factory=lambda: [0])
    mu: float | None = None
    delta: float | None = None
    kappa: float | None = None
    epsilon: float | None = None
    nu: float | None = None
    bounds: dict | None = None
    output: str | None = None
    env_dict: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - _CONFIG_FIELDS
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        for key in ("algorithm", "environment", "horizon"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        env = d["environment"]
        if not isinstance(env, dict) or set(env) - _ENV_FIELDS:
            raise ConfigError(f"unknown environment fields {sorted(set(env) - _ENV_FIELDS) if isinstance(env, dict) else env}")
        horizon = d["horizon"]
        horizon = [horizon] if not isinstance(horizon, list) else horizon
        seeds = d.get("seeds", [0])
        seeds = [seeds] if not isinstance(seeds, list) else seeds
        try:
            spec = EnvSpec(
                kind=env.get("kind"),
                horizon=max(int(h) for h in horizon) if horizon else 0,
                arms=env.get("arms"),
                beta=env.get("beta"),
                params=dict(env.get("params", {})),
                policies=env.get("policies"),
                base_dir=base_dir,
            )
            cfg = cls(
                algorithm=d["algorithm"],
                environment=spec,
                horizon=[_as_int(h, "horizon") for h in horizon],
                seeds=[_as_int(s, "seed") for s in seeds],
                mu=d.get("mu"),
                delta=d.get("delta"),
                kappa=d.get("kappa"),
                epsilon=d.get("epsilon"),
                nu=d.get("nu"),
                bounds=d.get("bounds"),
                output=d.get("output"),
                env_dict=dict(env),
            )
        except InputError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = {
            "algorithm": self.algorithm,
            "environment": self.env_dict,
            "horizon": list(self.horizon),
            "seeds": list(self.seeds),
        }
        for key in ("mu", "delta", "kappa", "epsilon", "nu", "bounds"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d

    def key(self) -> str:
        """Fingerprint shared by runs that only differ in seed or horizon."""
        d = self.to_dict()
        d.pop("seeds")
        d.pop("horizon")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def is_bandit(self) -> bool:
        return self.algorithm in ("exp4r", "exp4pr")

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.horizon or any(h < 0 for h in self.horizon):
            raise ConfigError("horizons must be non-negative integers")
        if not self.seeds or any(s < 0 or s >= 2**64 for s in self.seeds):
            raise ConfigError("seeds must be unsigned 64-bit integers")
        for key in ("mu", "delta", "kappa", "epsilon", "nu"):
            v = getattr(self, key)
            if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0 or key == "kappa" and v == 0):
                raise ConfigError(f"{key} must be a positive number")
        if self.bounds is not None:
            if not isinstance(self.bounds, dict) or set(self.bounds) - {"B", "X", "F", "D", "G"}:
                raise ConfigError("bounds accepts the keys B, X, F, D, G")
        if self.is_bandit != self.environment.is_bandit:
            raise ConfigError(f"algorithm {self.algorithm} cannot run on a {self.environment.kind} environment")
        if self.algorithm != "exp4pr" and any(getattr(self, k) is not None for k in ("kappa", "epsilon", "nu")):
            raise ConfigError("kappa, epsilon and nu only apply to exp4pr")
        try:
            env = self.environment.build()
            for T in self.horizon:
                self.schedule(T, env)
        except ConfigError:
            raise
        except InputError as exc:
            raise ConfigError(str(exc)) from None

    def schedule(self, T: int, env=None) -> dict:
        """Resolved step sizes for horizon ``T`` (validated)."""
        T1 = max(T, 1)
        env = env if env is not None else self.environment.build()
        if self.is_bandit:
            table = env.policies
            K = table.n_arms
            if self.algorithm == "exp4r":
                N = table.n_experts
                if self.mu is None or self.delta is None:
                    mu, delta = theorem2_params(T1, K, N)
                mu = self.mu if self.mu is not None else mu
                delta = self.delta if self.delta is not None else delta
                return {"mu": float(mu), "delta": float(delta)}
            _, added = table.with_uniform()
            N = table.n_experts + int(added)
            cfg = theorem3_params(
                T1, K, N,
                self.epsilon if self.epsilon is not None else 1 / 3,
                self.nu if self.nu is not None else 0.05,
                env.beta - 1.0,
                mu=self.mu, kappa=self.kappa, delta=self.delta,
            )
            return {"mu": cfg.mu, "delta": cfg.delta, "kappa": cfg.kappa, "epsilon": cfg.epsilon, "nu": cfg.nu, "lambda_max": cfg.lambda_max}
        fset = Simplex(env.dim)
        mmap = make_mirror_map(self.algorithm.split("-")[1])
        if self.mu is not None and self.delta is not None:
            return {"mu": float(self.mu), "delta": float(self.delta)}
        base = default_bounds(mmap, fset)
        if self.bounds:
            base = OcpBounds(**{**vars(base), **{k: float(v) for k, v in self.bounds.items()}})
        mu, delta = theorem1_params(T1, base)
        return {"mu": float(self.mu if self.mu is not None else mu), "delta": float(self.delta if self.delta is not None else delta)}


def _as_int(v, name) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    return int(v)


def load_config(path, **overrides) -> RunConfig:
    """Read a strict JSON config; ``overrides`` replace top-level fields."""
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    d.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(d, base_dir=path.parent)


# --------------------------------------------------------------------------
# Traces


@dataclass
class RunTrace:
    """Per-round record of one run (or the mean of several).

    ``actions`` holds arm indices (bandit), decision vectors (OCP), or
    ``None`` for aggregates.
    """

    columns: dict[str, np.ndarray]
    actions: np.ndarray | None
    footer: dict
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return int(self.columns["inst_cost"].shape[0])

    def _action_strings(self) -> list[str]:
        if self.actions is None:
            return [""] * self.T
        if self.actions.ndim == 1:
            return [str(int(a)) for a in self.actions]
        return [";".join(fmt(v) for v in row) for row in self.actions]

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        acts = self._action_strings()
        cols = [self.columns[c] for c in COLUMNS]
        for t in range(self.T):
            buf.write(f"{t + 1},{acts[t]}," + ",".join(fmt(c[t]) for c in cols) + "\n")
        return buf.getvalue()

    def write(self, stem: Path) -> tuple[Path, Path]:
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        csv_path = stem.with_suffix(".csv")
        json_path = stem.with_suffix(".json")
        csv_path.write_text(self.csv_text())
        json_path.write_text(json.dumps({"meta": self.meta, "footer": self.footer}, indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def read_trace(csv_path) -> RunTrace:
    """Load a trace written by :meth:`RunTrace.write` (footer from the sibling JSON)."""
    csv_path = Path(csv_path)
    lines = csv_path.read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise InputError(f"{csv_path} is not a trace file")
    rows = [ln.split(",") for ln in lines[1:]]
    cols = {c: np.array([float(r[i + 2]) for r in rows]) for i, c in enumerate(COLUMNS)}
    acts = [r[1] for r in rows]
    if not acts or acts[0] == "":
        actions = None
    elif ";" in acts[0]:
        actions = np.array([[float(v) for v in a.split(";")] for a in acts])
    else:
        actions = np.array([int(a) for a in acts])
    meta, footer = {}, {}
    json_path = csv_path.with_suffix(".json")
    if json_path.exists():
        blob = json.loads(json_path.read_text())
        meta, footer = blob.get("meta", {}), blob.get("footer", {})
    return RunTrace(cols, actions, footer, meta)


def _metrics(cum_cost: float, cum_violation: float, T: int, comp: ComparatorResult, prefix: str = "") -> dict:
    out = {
        f"{prefix}comparator_feasible": comp.feasible,
        f"{prefix}comparator_value": comp.value,
    }
    if comp.feasible:
        regret = cum_cost - comp.value
        out[f"{prefix}regret"] = regret
        out[f"{prefix}avg_regret"] = regret / T if T else 0.0
    else:
        out[f"{prefix}regret"] = "undefined (comparator set empty)"
        out[f"{prefix}avg_regret"] = "undefined (comparator set empty)"
    return out


def _finish(inst_cost, inst_risk, viol, lam, actions, comp: dict[str, ComparatorResult], meta, extra=None) -> RunTrace:
    T = inst_cost.shape[0]
    cum_cost = np.cumsum(inst_cost)
    cum_violation = np.cumsum(viol)
    cols = {
        "inst_cost": inst_cost,
        "inst_risk": inst_risk,
        "cum_cost": cum_cost,
        "cum_violation": cum_violation,
        "lambda": lam,
    }
    cc = float(cum_cost[-1]) if T else 0.0
    cv = float(cum_violation[-1]) if T else 0.0
    footer = {
        "T": T,
        "cum_cost": cc,
        "cum_violation": cv,
        "avg_violation": cv / T if T else 0.0,
        "final_lambda": float(lam[-1]) if T else 0.0,
        "max_lambda": float(lam.max()) if T else 0.0,
    }
    footer.update(_metrics(cc, cv, T, comp["every_round"]))
    if "on_average" in comp:
        footer.update(_metrics(cc, cv, T, comp["on_average"], prefix="on_average_"))
    if extra:
        footer.update(extra)
    return RunTrace(cols, actions, footer, meta)


# --------------------------------------------------------------------------
# Engines


def run_ocp(config: RunConfig, T: int) -> RunTrace:
    """Propose, receive the round, record, update; one deterministic run."""
    env = config.environment.build()
    sched = config.schedule(T, env)
    d = env.dim
    learner = ConstrainedOMD(config.algorithm.split("-")[1], Simplex(d), mu=sched["mu"], delta=sched["delta"])
    X = np.zeros((T, d))
    lam = np.zeros(T)
    if getattr(env, "adaptive", False):
        G, A, b = np.zeros((T, d)), np.zeros((T, d)), np.zeros(T)
        x_prev = None
        for t in range(T):
            x = learner.predict()
            rnd = env.next_round(x_prev)
            X[t], lam[t] = x, learner.lambda_
            G[t], A[t], b[t] = rnd.g, rnd.a, rnd.b
            learner.partial_fit(rnd)
            x_prev = x
        h = np.zeros(T)
    else:
        G, A, b = env.arrays(T)
        h = getattr(env, "h", np.zeros(T))[:T]
        for t in range(T):
            X[t] = learner.predict()
            lam[t] = learner.lambda_
            learner.partial_fit(LinearRound(G[t], A[t], b[t], h[t]))
    inst_cost = np.einsum("td,td->t", G, X) + h
    inst_risk = np.einsum("td,td->t", A, X) - b
    acc = HindsightAccumulator(d)
    acc.add_batch(G, A, b, h)
    comp = {m: best_feasible(acc.problem(Simplex(d), m)) for m in ("every_round", "on_average")}
    extra = {"mu": sched["mu"], "delta": sched["delta"]}
    if isinstance(env, Prop1Adversary):
        extra["phase_two_entries"] = env.phase_two_entries
    meta = {"algorithm": config.algorithm, "config_key": config.key(), "horizon": T, "seed": None}
    return _finish(inst_cost, inst_risk, inst_risk, lam, X, comp, meta, extra)


def _uniform_draws(seed, T: int) -> np.ndarray:
    """The ``T`` uniforms a single-seed learner would draw, one per round."""
    return as_generator(seed).random(T)


def bandit_engine(table, ctx, C, R, beta: float, mu: float, delta: float, seeds: Sequence[int], *, kappa=None, lambda_max=None, signed=False):
    """Vectorised EXP4.R / EXP4.P.R over seeds sharing one environment.

    Seed ``s`` draws its arms from its own generator with one uniform per
    round, so each row reproduces the single-seed learner. ``kappa`` enables
    the confidence bonus; ``signed`` shifts costs, risks and ``beta`` by -1.

    Returns arms (S, T), the pre-update dual variables (S, T) and each
    seed's largest dual variable including the one after the last round.
    """
    table = np.asarray(table, dtype=float)
    S, T = len(seeds), ctx.shape[0]
    N, K = table.shape[1:]
    U = np.array([_uniform_draws(s, T) for s in seeds]).reshape(S, T)
    log_w = np.full((S, N), -math.log(N))
    lam = np.zeros(S)
    arms = np.zeros((S, T), dtype=np.intp)
    lams = np.zeros((S, T))
    rows = np.arange(S)
    shift = 1.0 if signed else 0.0
    b = beta - shift
    peak = np.zeros(S)
    for t in range(T):
        adv = table[ctx[t]]
        w = np.exp(log_w - log_w.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        p = np.einsum("sn,nk->sk", w, adv)
        cdf = np.cumsum(p, axis=1)
        a = (cdf <= U[:, t, None]).sum(axis=1)
        over = a >= K
        if over.any():
            last = K - 1 - np.argmax(p[:, ::-1] > 0.0, axis=1)
            a = np.where(over, last, a)
        pa = p[rows, a]
        if np.any(pa <= 0.0):
            raise InvariantViolation(f"pulled an arm with zero probability at round {t}")
        c_obs = C[t, a] - shift
        r_obs = R[t, a] - shift
        col = adv[:, a].T
        y_hat = col * (c_obs / pa)[:, None]
        z_hat = col * (r_obs / pa)[:, None]
        losses = y_hat + lam[:, None] * z_hat
        if kappa is not None:
            losses = losses - kappa * np.einsum("nk,sk->sn", adv, 1.0 / p)
        wz = np.einsum("sn,sn->s", w, z_hat)
        arms[:, t] = a
        lams[:, t] = lam
        log_w = log_w - mu * losses
        log_w = log_w - logsumexp(log_w, axis=1, keepdims=True)
        lam = np.maximum(0.0, lam + mu * (wz - b - delta * mu * lam))
        peak = np.maximum(peak, lam)
        if lambda_max is not None and np.any(lam > lambda_max):
            raise InvariantViolation(f"dual variable {lam.max()!r} exceeds cap {lambda_max!r} at round {t + 1}")
    return arms, lams, peak


def run_bandit(config: RunConfig, T: int) -> list[RunTrace]:
    """Context, mix, sample, observe the pulled arm, update; all seeds at once."""
    env = config.environment.build()
    sched = config.schedule(T, env)
    table = env.policies
    if config.algorithm == "exp4pr":
        table, _ = table.with_uniform()
    ctx, C, R = env.arrays(T)
    beta = env.beta
    arms, lams, peak = bandit_engine(
        table.table, ctx, C, R, beta, sched["mu"], sched["delta"], config.seeds,
        kappa=sched.get("kappa"), lambda_max=sched.get("lambda_max"), signed=config.algorithm == "exp4pr",
    )
    # comparator from ground-truth vectors, in the original [0, 1] convention
    comp = {m: best_feasible(bandit_problem(table.table, ctx, C, R, beta, m)) for m in ("every_round", "on_average")}
    traces = []
    steps = np.arange(T)
    for i, seed in enumerate(config.seeds):
        inst_cost = C[steps, arms[i]]
        inst_risk = R[steps, arms[i]]
        extra = dict(sched)
        if config.algorithm == "exp4pr":
            extra["max_lambda_ratio"] = float(peak[i]) / sched["lambda_max"]
        meta = {"algorithm": config.algorithm, "config_key": config.key(), "horizon": T, "seed": seed}
        traces.append(_finish(inst_cost, inst_risk, inst_risk - beta, lams[i], arms[i], comp, meta, extra))
    return traces


def aggregate(traces: Sequence[RunTrace]) -> RunTrace:
    """Columnwise arithmetic mean of traces sharing config and horizon."""
    if not traces:
        raise InputError("nothing to aggregate")
    _check_compatible(traces)
    if len({tr.T for tr in traces}) != 1:
        raise InputError("traces have different horizons")
    M = len(traces)
    cols = {}
    for c in COLUMNS:
        acc = np.zeros(traces[0].T)
        for tr in traces:
            acc = acc + tr.columns[c]
        cols[c] = acc / M
    footer = {}
    for key, v in traces[0].footer.items():
        vals = [tr.footer.get(key) for tr in traces]
        if all(x == v and type(x) is type(v) for x in vals):
            footer[key] = v
        elif all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in vals):
            s = 0.0
            for x in vals:
                s = s + x
            footer[key] = s / M
        else:
            footer[key] = v
    meta = dict(traces[0].meta, seed="mean", seeds=[tr.meta.get("seed") for tr in traces])
    return RunTrace(cols, None, footer, meta)


def _check_compatible(traces: Iterable[RunTrace]) -> None:
    keys = {(tr.meta.get("algorithm"), tr.meta.get("config_key")) for tr in traces}
    if len(keys) > 1:
        raise InputError(f"traces come from different configurations: {sorted(map(str, keys))}")


@dataclass
class RunResult:
    config: RunConfig
    traces: dict[int, list[RunTrace]]
    aggregates: dict[int, RunTrace]
    files: list[Path] = field(default_factory=list)

    def summary(self) -> dict:
        return {str(T): agg.footer for T, agg in self.aggregates.items()}


def run(config: RunConfig, out: str | Path | None = None) -> RunResult:
    """Execute every horizon of ``config`` and optionally write the traces.

    Files: ``<algorithm>_T<T>_seed<s>.csv/.json`` per seed and
    ``<algorithm>_T<T>_mean.csv/.json`` for the seed average.
    """
    config.validate()
    out = out if out is not None else config.output
    traces, aggs = {}, {}
    for T in config.horizon:
        if config.is_bandit:
            trs = run_bandit(config, T)
        else:
            tr = run_ocp(config, T)
            trs = []
            for s in config.seeds:
                tr_s = RunTrace(tr.columns, tr.actions, tr.footer, dict(tr.meta, seed=s))
                trs.append(tr_s)
        traces[T] = trs
        aggs[T] = aggregate(trs)
    res = RunResult(config, traces, aggs)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
        for T in config.horizon:
            for tr in traces[T]:
                res.files.extend(tr.write(out / f"{config.algorithm}_T{T}_seed{tr.meta['seed']}"))
            res.files.extend(aggs[T].write(out / f"{config.algorithm}_T{T}_mean"))
    return res


# --------------------------------------------------------------------------
# Rates and reports


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2}


def fit_rate(horizons, values) -> RateFit:
    """Least-squares slope of log(max(value, 1)) against log(T)."""
    T = np.asarray(horizons, dtype=float)
    v = np.asarray(values, dtype=float)
    if T.ndim != 1 or T.shape != v.shape:
        raise InputError("horizons and values must be 1-d and of equal length")
    if T.shape[0] < 3:
        raise InputError("rate fitting needs at least three checkpoints")
    if np.any(T <= 0) or np.any(np.diff(T) <= 0):
        raise InputError("checkpoints must be positive and strictly increasing")
    if not np.all(np.isfinite(v)):
        raise InputError("values must be finite")
    x = np.log(T)
    y = np.log(np.maximum(v, 1.0))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2)


_REPORT_FIELDS = ("T", "regret", "avg_regret", "cum_violation", "avg_violation", "final_lambda")


def report(traces: Sequence[RunTrace], out: str | Path | None = None) -> dict:
    """Summary table, seed means, fitted slopes and gnuplot data files.

    Traces must come from one configuration (horizons and seeds may differ).
    """
    if not traces:
        raise InputError("no traces to report")
    _check_compatible(traces)
    rows = []
    for tr in traces:
        row = {"seed": tr.meta.get("seed")}
        row.update({k: tr.footer.get(k) for k in _REPORT_FIELDS})
        rows.append(row)
    by_T: dict[int, list[RunTrace]] = {}
    for tr in traces:
        if tr.meta.get("seed") != "mean":
            by_T.setdefault(tr.T, []).append(tr)
    means = {}
    for T, trs in sorted(by_T.items()):
        agg = aggregate(trs)
        means[T] = {k: agg.footer.get(k) for k in _REPORT_FIELDS}
    if not by_T:
        # only pre-averaged traces supplied
        for tr in traces:
            means[tr.T] = {k: tr.footer.get(k) for k in _REPORT_FIELDS}
    slopes = {}
    Ts = sorted(means)
    if len(Ts) >= 3:
        for metric in ("regret", "cum_violation"):
            vals = [means[T][metric] for T in Ts]
            if all(isinstance(v, (int, float)) for v in vals):
                slopes[metric] = fit_rate(Ts, vals).to_dict()
    summary = {"rows": rows, "means": {str(T): m for T, m in means.items()}, "slopes": slopes}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        (out / "summary.md").write_text(_markdown(summary))
        for tr in traces:
            name = f"{tr.meta.get('algorithm', 'run')}_T{tr.T}_seed{tr.meta.get('seed')}.dat"
            _write_dat(out / name, tr)
        for T, trs in sorted(by_T.items()):
            _write_dat(out / f"{trs[0].meta.get('algorithm', 'run')}_T{T}_mean.dat", aggregate(trs))
    return summary


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _markdown(summary: dict) -> str:
    head = ("seed",) + _REPORT_FIELDS
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for row in summary["rows"]:
        lines.append("| " + " | ".join(_cell(row[k]) for k in head) + " |")
    lines += ["", "| mean over seeds | " + " | ".join(_REPORT_FIELDS[1:]) + " |", "|" + "---|" * len(_REPORT_FIELDS)]
    for T, m in summary["means"].items():
        lines.append(f"| T={T} | " + " | ".join(_cell(m[k]) for k in _REPORT_FIELDS[1:]) + " |")
    if summary["slopes"]:
        lines += ["", "| metric | slope | intercept | R^2 |", "|---|---|---|---|"]
        for k, f in summary["slopes"].items():
            lines.append(f"| {k} | {f['slope']:.4f} | {f['intercept']:.4f} | {f['r2']:.4f} |")
    return "\n".join(lines) + "\n"


def _write_dat(path: Path, tr: RunTrace) -> None:
    with open(path, "w") as fh:
        fh.write("# t cum_cost cum_violation lambda\n")
        for t in range(tr.T):
            fh.write(f"{t + 1} {fmt(tr.columns['cum_cost'][t])} {fmt(tr.columns['cum_violation'][t])} {fmt(tr.columns['lambda'][t])}\n")


def load_traces(paths: Iterable[str | Path]) -> list[RunTrace]:
    """Collect traces from CSV files or directories of them."""
    out = []
    for p in paths:
        p = Path(p)
        files = sorted(p.glob("*.csv")) if p.is_dir() else [p]
        out.extend(read_trace(f) for f in files)
    if not out:
        raise InputError("no trace files found")
    return out
