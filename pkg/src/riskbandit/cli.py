"""Command-line entry point.

Exit codes: 0 success, 2 rejected configuration or input, 3 invariant
violation during a run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .comparator import HindsightAccumulator, HindsightProblem, audit_feasibility, bandit_problem, best_feasible
from .core import Box, InputError, InvariantViolation, Simplex
from .harness import ConfigError, fit_rate, load_config, load_traces, report, run

log = logging.getLogger("riskbandit")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3

_RUN_ALGOS = {
    "run-ocp": ("ocp-euclidean", "ocp-entropy"),
    "run-exp4r": ("exp4r",),
    "run-exp4pr": ("exp4pr",),
}


def _u64(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _csv_floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riskbandit", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    for name in _RUN_ALGOS:
        p = sub.add_parser(name, help=f"run {'/'.join(_RUN_ALGOS[name])} from a JSON config")
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=_u64, help="run a single seed instead of the config's list")
        p.add_argument("--horizon", type=int, help="single horizon T, replacing the config's")
        p.add_argument("--out", type=Path, help="output directory for traces")
        p.add_argument("--override-mu", type=float, dest="mu")
        p.add_argument("--override-delta", type=float, dest="delta")
        if name == "run-ocp":
            p.add_argument("--map", choices=("euclidean", "entropy"), help="mirror map when the config names none")
        if name == "run-exp4pr":
            p.add_argument("--epsilon", type=float)
            p.add_argument("--override-kappa", type=float, dest="kappa")

    p = sub.add_parser("fit-rate", help="log-log slope of cumulative values against T")
    p.add_argument("paths", nargs="*", type=Path, help="trace files or run directories")
    p.add_argument("--horizons", type=_csv_floats, help="comma-separated checkpoints")
    p.add_argument("--values", type=_csv_floats, help="comma-separated cumulative values")
    p.add_argument("--metric", default="regret", choices=("regret", "cum_violation", "cum_cost"))

    p = sub.add_parser("comparator", help="best fixed decision in hindsight")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="oblivious environment config")
    src.add_argument("--problem", type=Path, help="explicit LP in JSON")
    p.add_argument("--horizon", type=int)
    p.add_argument("--mode", default="every_round", choices=("every_round", "on_average"))
    p.add_argument("--out", type=Path)

    p = sub.add_parser("report", help="summarise run traces")
    p.add_argument("paths", nargs="+", type=Path)
    p.add_argument("--out", type=Path)
    return ap


def _emit(obj, out: Path | None = None, name: str = "result.json") -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable)
    print(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o)}")


def _cmd_run(args) -> int:
    overrides = {k: getattr(args, k, None) for k in ("mu", "delta", "kappa", "epsilon")}
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.horizon is not None:
        overrides["horizon"] = [args.horizon]
    raw = json.loads(args.config.read_text()) if args.config.exists() else None
    allowed = _RUN_ALGOS[args.command]
    if isinstance(raw, dict) and "algorithm" not in raw:
        overrides["algorithm"] = f"ocp-{args.map or 'entropy'}" if args.command == "run-ocp" else allowed[0]
    elif getattr(args, "map", None):
        overrides["algorithm"] = f"ocp-{args.map}"
    cfg = load_config(args.config, **overrides)
    if cfg.algorithm not in allowed:
        raise ConfigError(f"{args.command} runs {allowed}, config names {cfg.algorithm!r}")
    res = run(cfg, out=args.out)
    if res.files:
        log.info("wrote %d files to %s", len(res.files), args.out)
    _emit(res.summary())
    return EXIT_OK


def _cmd_fit_rate(args) -> int:
    if args.paths:
        traces = [tr for tr in load_traces(args.paths) if tr.meta.get("seed") == "mean"] or load_traces(args.paths)
        by_T = {}
        for tr in traces:
            by_T.setdefault(tr.T, []).append(tr.footer[args.metric])
        Ts = sorted(by_T)
        vals = [float(np.mean(by_T[T])) for T in Ts]
    elif args.horizons is not None and args.values is not None:
        Ts, vals = args.horizons, args.values
    else:
        raise InputError("give trace paths or both --horizons and --values")
    fit = fit_rate(Ts, vals)
    _emit({"horizons": list(Ts), "values": vals, **fit.to_dict()})
    return EXIT_OK


def _problem_from_json(path: Path) -> HindsightProblem:
    try:
        d = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read problem {path}: {exc}") from None
    unknown = set(d) - {"objective", "base", "rows", "bounds", "offset", "mode"}
    if unknown:
        raise InputError(f"unknown problem fields {sorted(unknown)}")
    base = d.get("base", {"simplex": len(d["objective"])})
    if "simplex" in base:
        fset = Simplex(int(base["simplex"]))
    elif "box" in base:
        fset = Box(*base["box"])
    else:
        raise InputError("base must be {'simplex': n} or {'box': [lower, upper]}")
    return HindsightProblem(
        d["objective"], fset, d.get("rows", []), d.get("bounds", []), d.get("offset", 0.0), d.get("mode", "every_round")
    )


def _cmd_comparator(args) -> int:
    if args.problem is not None:
        prob = _problem_from_json(args.problem)
    else:
        overrides = {"horizon": [args.horizon]} if args.horizon is not None else {}
        cfg = load_config(args.config, **overrides)
        env = cfg.environment.build()
        T = cfg.horizon[-1]
        if getattr(env, "adaptive", False):
            raise InputError("adaptive environments depend on the learner; run them and read the trace footer")
        if cfg.is_bandit:
            ctx, C, R = env.arrays(T)
            prob = bandit_problem(env.policies.table, ctx, C, R, env.beta, args.mode)
        else:
            G, A, b = env.arrays(T)
            acc = HindsightAccumulator(env.dim)
            acc.add_batch(G, A, b)
            prob = acc.problem(Simplex(env.dim), args.mode)
    res = best_feasible(prob)
    ok, witness = audit_feasibility(prob)
    _emit({**res.to_dict(), "audit_feasible": ok, "witness": witness, "n_rows": int(prob.rows.shape[0])}, args.out, "comparator.json")
    return EXIT_OK


def _cmd_report(args) -> int:
    summary = report(load_traces(args.paths), out=args.out)
    _emit(summary)
    return EXIT_OK


_COMMANDS = {
    "run-ocp": _cmd_run,
    "run-exp4r": _cmd_run,
    "run-exp4pr": _cmd_run,
    "fit-rate": _cmd_fit_rate,
    "comparator": _cmd_comparator,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        return _COMMANDS[args.command](args)
    except InvariantViolation as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InputError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
