"""Round generators for the full-information and bandit settings.

Full information:
    * :class:`Prop1Adversary` - adaptive two-phase adversary that defeats any
      learner competing with decisions feasible only on average.
    * :class:`LinearOcpEnvironment` - oblivious seeded linear losses with
      constraints drawn from a small bank that shares a feasible point.

Bandit (all emit :class:`~riskbandit.exp4r.BanditRound`):
    * :class:`IidBanditEnvironment` - i.i.d. per-arm marginals.
    * :class:`DriftBanditEnvironment` - deterministic rotation of which arm
      is cheap and risky.
    * :class:`ScriptedBanditEnvironment` - rounds read from a JSON file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .comparator import HindsightProblem, audit_feasibility
from .core import InputError, Simplex, as_generator
from .exp4r import BanditRound, PolicyTable, check_advice
from .ocp import LinearRound

# --------------------------------------------------------------------------
# Full information


LOSS_1 = np.array([-1.0, 0.0])
LOSS_2 = np.array([-1.0, 1.0])
CONS_1 = np.array([-1.0, -1.0])
CONS_2 = np.array([1.0, -1.0])


@dataclass
class Prop1AdversaryState:
    phase: int = 1
    k: int = 0
    remaining: int = 0
    sum_x1: float = 0.0
    t: int = 0
    phase_two_entries: int = 0

    def __post_init__(self):
        if self.k < 0 or not 0 <= self.remaining <= max(self.k, 0):
            raise InputError("inconsistent adversary counters")


def prop1_next(state: Prop1AdversaryState, x_prev) -> tuple[LinearRound, Prop1AdversaryState]:
    """Emit the next (loss, constraint) pair given the learner's previous decision.

    Phase one repeats (loss 2, constraint 2) while the counter is zero or the
    running average of the first coordinate exceeds 3/4; phase two then plays
    (loss 1, constraint 1) for as many rounds as phase one lasted.
    ``x_prev`` is ignored on the very first round.
    """
    s = Prop1AdversaryState(**vars(state))
    if s.t > 0:
        if x_prev is None:
            raise InputError("the adversary needs the learner's previous decision")
        s.sum_x1 += float(np.asarray(x_prev, dtype=float)[0])
    s.t += 1
    if s.phase == 1:
        avg = s.sum_x1 / (s.t - 1) if s.t > 1 else 0.0
        if s.k == 0 or avg > 0.75:
            s.k += 1
            return LinearRound(LOSS_2, CONS_2), s
        s.phase, s.remaining = 2, s.k
        s.phase_two_entries += 1
    s.remaining -= 1
    if s.remaining == 0:
        s.phase, s.k = 1, 0
    return LinearRound(LOSS_1, CONS_1), s


class Prop1Adversary:
    """Stateful wrapper around :func:`prop1_next`."""

    dim = 2
    adaptive = True

    def __init__(self):
        self.state = Prop1AdversaryState()

    def next_round(self, x_prev=None) -> LinearRound:
        rnd, self.state = prop1_next(self.state, x_prev)
        return rnd

    @property
    def phase_two_entries(self) -> int:
        return self.state.phase_two_entries


# positive rescalings of one half-space, so every-round and on-average
# feasibility coincide and the comparator is not artificially loose
DEFAULT_CONSTRAINT_BANK = (
    ((1.0, 0.0, 0.0), 0.4),
    ((0.5, 0.0, 0.0), 0.2),
    ((0.8, 0.0, 0.0), 0.32),
)


class LinearOcpEnvironment:
    """Oblivious linear losses and constraints on a simplex.

    Loss gradients are ``center + scale * U[-1, 1]^d`` per round; each
    round's constraint is drawn uniformly from ``bank``. Construction checks
    that the bank has a common feasible point, so the every-round feasible
    set is non-empty for any draw.
    """

    adaptive = False

    def __init__(self, dim=3, center=(-1.0, -0.6, 0.0), scale=0.5, bank=DEFAULT_CONSTRAINT_BANK, seed=0):
        self.dim = int(dim)
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.bank_a = np.array([a for a, _ in bank], dtype=float)
        self.bank_b = np.array([b for _, b in bank], dtype=float)
        self.seed = seed
        if self.center.shape != (self.dim,) or self.bank_a.shape[1:] != (self.dim,):
            raise InputError("environment dimensions disagree")
        ok, _ = audit_feasibility(HindsightProblem(np.zeros(self.dim), Simplex(self.dim), self.bank_a, self.bank_b))
        if not ok:
            raise InputError("constraint bank has no common feasible point")

    def arrays(self, T: int):
        """Loss gradients (T, d), constraint rows (T, d) and bounds (T,)."""
        rng = as_generator(self.seed)
        G = self.center + self.scale * rng.uniform(-1.0, 1.0, size=(T, self.dim))
        idx = rng.integers(0, self.bank_a.shape[0], size=T)
        return G, self.bank_a[idx], self.bank_b[idx]

    def rounds(self, T: int) -> Iterator[LinearRound]:
        G, A, b = self.arrays(T)
        for t in range(T):
            yield LinearRound(G[t], A[t], b[t])


class ScriptedOcpEnvironment:
    adaptive = False

    def __init__(self, rounds: list[dict]):
        if not rounds:
            raise InputError("scripted environment has no rounds")
        self.G = np.array([r["g"] for r in rounds], dtype=float)
        self.A = np.array([r["a"] for r in rounds], dtype=float)
        self.b = np.array([r.get("b", 0.0) for r in rounds], dtype=float)
        self.h = np.array([r.get("h", 0.0) for r in rounds], dtype=float)
        self.dim = self.G.shape[1]

    def arrays(self, T: int):
        if T > self.G.shape[0]:
            raise InputError(f"script holds {self.G.shape[0]} rounds, {T} requested")
        return self.G[:T], self.A[:T], self.b[:T]

    def rounds(self, T: int) -> Iterator[LinearRound]:
        G, A, b = self.arrays(T)
        for t in range(T):
            yield LinearRound(G[t], A[t], b[t], self.h[t])


# --------------------------------------------------------------------------
# Bandit environments


def make_policy_table(n_contexts: int, n_arms: int, n_experts: int, seed=0, kind="deterministic") -> PolicyTable:
    """Random expert class whose first expert is the uniform policy.

    ``deterministic`` experts map every context to a single arm; ``dirichlet``
    experts output Dirichlet(1) distributions.
    """
    if n_experts < 2:
        raise InputError("need at least two experts")
    rng = as_generator(seed)
    table = np.empty((n_contexts, n_experts, n_arms))
    table[:, 0, :] = 1.0 / n_arms
    if kind == "deterministic":
        arms = rng.integers(0, n_arms, size=(n_contexts, n_experts - 1))
        table[:, 1:, :] = np.eye(n_arms)[arms]
    elif kind == "dirichlet":
        table[:, 1:, :] = rng.dirichlet(np.ones(n_arms), size=(n_contexts, n_experts - 1))
    else:
        raise InputError(f"unknown policy kind {kind!r}")
    return PolicyTable(table)


def _check_feasible_table(policies: PolicyTable, risk_envelope: np.ndarray, beta: float) -> None:
    """Raise unless some mixture keeps every context's worst-case risk <= beta.

    ``risk_envelope[c]`` upper-bounds the risk vector of context ``c``.
    """
    rows = np.einsum("cnk,ck->cn", policies.table, risk_envelope)
    ok, _ = audit_feasibility(HindsightProblem(np.zeros(policies.n_experts), Simplex(policies.n_experts), rows, np.full(rows.shape[0], beta)))
    if not ok:
        raise InputError("no mixture of the policy class satisfies the risk threshold in every round")


class BanditEnvironment:
    """Shared interface: ``arrays(T)`` returns context indices, costs and risks."""

    policies: PolicyTable
    beta: float
    n_arms: int
    adaptive = False

    def arrays(self, T: int):
        raise NotImplementedError

    def rounds(self, T: int) -> Iterator[BanditRound]:
        ctx, C, R = self.arrays(T)
        contexts = self.policies.contexts
        for t in range(T):
            yield BanditRound(contexts[ctx[t]], C[t], R[t], self.beta)


_MARGINALS = ("bernoulli", "uniform", "constant")


def _parse_marginal(spec) -> tuple[str, tuple[float, ...]]:
    if isinstance(spec, (int, float)):
        return "constant", (float(spec),)
    if not isinstance(spec, dict) or len(spec) != 1:
        raise InputError(f"marginal must be a number or a one-key dict, got {spec!r}")
    (kind, val), = spec.items()
    if kind not in _MARGINALS:
        raise InputError(f"unknown marginal {kind!r}")
    vals = tuple(float(v) for v in np.atleast_1d(val))
    if kind == "uniform":
        if len(vals) != 2 or not 0 <= vals[0] <= vals[1] <= 1:
            raise InputError("uniform marginal needs 0 <= lo <= hi <= 1")
    elif len(vals) != 1 or not 0 <= vals[0] <= 1:
        raise InputError(f"{kind} parameter must lie in [0, 1]")
    return kind, vals


def _marginal_sup(kind, vals) -> float:
    if kind == "bernoulli":
        return 1.0 if vals[0] > 0 else 0.0
    return vals[-1]


def _draw(rng, kind, vals, size):
    if kind == "bernoulli":
        return (rng.random(size) < vals[0]).astype(float)
    if kind == "uniform":
        return rng.uniform(vals[0], vals[1], size)
    return np.full(size, vals[0])


class IidBanditEnvironment(BanditEnvironment):
    """Contexts uniform over the table's contexts; per-arm i.i.d. costs and risks.

    Marginals are ``{"bernoulli": p}``, ``{"uniform": [lo, hi]}`` or a
    constant. Construction requires a mixture of experts whose risk stays
    below ``beta`` for every realisable risk vector.
    """

    def __init__(self, policies: PolicyTable, cost, risk, beta: float, seed=0):
        self.policies = policies
        self.n_arms = policies.n_arms
        if len(cost) != self.n_arms or len(risk) != self.n_arms:
            raise InputError("one cost and one risk marginal per arm is required")
        self.cost = [_parse_marginal(m) for m in cost]
        self.risk = [_parse_marginal(m) for m in risk]
        self.beta = float(beta)
        self.seed = seed
        env = np.array([_marginal_sup(*m) for m in self.risk])
        _check_feasible_table(policies, np.tile(env, (len(policies.contexts), 1)), self.beta)

    def arrays(self, T: int):
        rng = as_generator(self.seed)
        ctx = rng.integers(0, len(self.policies.contexts), size=T)
        C = np.column_stack([_draw(rng, k, v, T) for k, v in self.cost]) if T else np.zeros((0, self.n_arms))
        R = np.column_stack([_draw(rng, k, v, T) for k, v in self.risk]) if T else np.zeros((0, self.n_arms))
        return ctx, C, R


def iid_bandit_rounds(spec: "EnvSpec", rng=None) -> Iterator[BanditRound]:
    env = spec.build()
    if rng is not None:
        env.seed = rng
    return env.rounds(spec.horizon)


class DriftBanditEnvironment(BanditEnvironment):
    """Costs and risks rotate by one arm every ``period`` rounds.

    Round ``t`` uses ``roll(base_cost, s)`` and ``roll(base_risk, s)`` with
    ``s = (t // period) mod K``; the context id is ``s``. Requiring
    ``beta >= mean(base_risk)`` makes the uniform policy feasible in every
    round.
    """

    def __init__(self, policies: PolicyTable, base_cost, base_risk, beta: float, period: int = 1):
        self.policies = policies
        self.n_arms = policies.n_arms
        self.base_cost = np.asarray(base_cost, dtype=float)
        self.base_risk = np.asarray(base_risk, dtype=float)
        self.beta = float(beta)
        self.period = int(period)
        if self.period < 1:
            raise InputError("period must be >= 1")
        if self.base_cost.shape != (self.n_arms,) or self.base_risk.shape != (self.n_arms,):
            raise InputError("base vectors need one entry per arm")
        for v in (self.base_cost, self.base_risk):
            if np.any(v < 0) or np.any(v > 1):
                raise InputError("base costs and risks must lie in [0, 1]")
        if len(policies.contexts) != self.n_arms:
            raise InputError("drift environment needs one context per arm rotation")
        if self.base_risk.mean() > self.beta + 1e-12:
            raise InputError("beta must be at least the mean base risk so the uniform policy is feasible")
        shifts = np.arange(self.n_arms)
        env = np.array([np.roll(self.base_risk, s) for s in shifts])
        _check_feasible_table(policies, env, self.beta)

    def arrays(self, T: int):
        s = (np.arange(T) // self.period) % self.n_arms
        K = self.n_arms
        cols = (np.arange(K)[None, :] - s[:, None]) % K
        return s, self.base_cost[cols], self.base_risk[cols]


def drift_bandit_rounds(spec: "EnvSpec") -> Iterator[BanditRound]:
    return spec.build().rounds(spec.horizon)


class ScriptedBanditEnvironment(BanditEnvironment):
    def __init__(self, policies: PolicyTable, rounds: list[dict], beta: float):
        self.policies = policies
        self.n_arms = policies.n_arms
        self.beta = float(beta)
        if not rounds:
            raise InputError("scripted environment has no rounds")
        self.ctx = np.array([policies.index(r["context"]) for r in rounds])
        self.C = np.array([r["cost"] for r in rounds], dtype=float)
        self.R = np.array([r["risk"] for r in rounds], dtype=float)
        if self.C.shape[1] != self.n_arms or self.R.shape != self.C.shape:
            raise InputError("scripted cost/risk vectors need one entry per arm")
        if np.any((self.C < 0) | (self.C > 1) | (self.R < 0) | (self.R > 1)):
            raise InputError("scripted costs and risks must lie in [0, 1]")

    def arrays(self, T: int):
        if T > self.ctx.shape[0]:
            raise InputError(f"script holds {self.ctx.shape[0]} rounds, {T} requested")
        return self.ctx[:T], self.C[:T], self.R[:T]


# --------------------------------------------------------------------------
# Specs


ENV_KINDS = ("prop1", "linear", "iid", "drift", "scripted")


@dataclass
class EnvSpec:
    """Declarative environment description, as found in run configs.

    ``params`` holds the kind-specific fields; ``policies`` is either an
    explicit table (``{"table": ..., "contexts": ...}``) or a generator
    request (``{"random": {"n_experts": ..., "seed": ..., "kind": ...}}``).
    """

    kind: str
    horizon: int = 1
    arms: int | None = None
    beta: float | None = None
    params: dict = field(default_factory=dict)
    policies: dict | None = None
    base_dir: Path | None = None

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise InputError(f"unknown environment kind {self.kind!r}")
        if self.horizon < 0:
            raise InputError("horizon must be non-negative")

    @property
    def is_bandit(self) -> bool:
        return self.kind in ("iid", "drift") or (self.kind == "scripted" and self.beta is not None)

    def _script(self) -> dict:
        path = Path(self.params["file"])
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        try:
            return json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read scripted rounds from {path}: {exc}") from exc

    def policy_table(self, n_contexts: int | None = None) -> PolicyTable:
        pol = self.policies
        if pol is None:
            raise InputError("bandit environments need a policy table")
        if "table" in pol:
            return PolicyTable(pol["table"], pol.get("contexts"))
        if "random" in pol:
            r = dict(pol["random"])
            unknown = set(r) - {"n_experts", "seed", "kind", "n_contexts"}
            if unknown:
                raise InputError(f"unknown random policy fields {sorted(unknown)}")
            if self.arms is None:
                raise InputError("arms is required to generate a policy table")
            n_ctx = r.get("n_contexts", n_contexts)
            if n_ctx is None:
                raise InputError("n_contexts is required")
            return make_policy_table(int(n_ctx), int(self.arms), int(r["n_experts"]), r.get("seed", 0), r.get("kind", "deterministic"))
        raise InputError("policies must contain 'table' or 'random'")

    def build(self):
        p = dict(self.params)
        try:
            if self.kind == "prop1":
                return Prop1Adversary()
            if self.kind == "linear":
                return LinearOcpEnvironment(**p)
            if self.kind == "drift":
                if self.beta is None:
                    raise InputError("drift environment needs beta")
                return DriftBanditEnvironment(self.policy_table(self.arms), p["base_cost"], p["base_risk"], self.beta, p.get("period", 1))
            if self.kind == "iid":
                if self.beta is None:
                    raise InputError("iid environment needs beta")
                n_ctx = p.pop("n_contexts", 1)
                return IidBanditEnvironment(self.policy_table(n_ctx), p["cost"], p["risk"], self.beta, p.get("seed", 0))
            script = self._script()
            if self.beta is not None:
                return ScriptedBanditEnvironment(self.policy_table(), script["rounds"], self.beta)
            return ScriptedOcpEnvironment(script["rounds"])
        except KeyError as exc:
            raise InputError(f"environment {self.kind!r} is missing field {exc}") from None
        except TypeError as exc:
            raise InputError(f"bad parameters for environment {self.kind!r}: {exc}") from None
