"""EXP4 with risk constraints.

Each round the learner mixes expert advice into an arm distribution, pulls
one arm, sees only that arm's cost and risk, builds importance-weighted
estimates for every expert and takes a multiplicative-weights step on the
Lagrangian ``cost + lam * risk`` together with a regularised ascent step on
``lam``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable, Mapping

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from .core import (
    SIMPLEX_ATOL,
    InputError,
    InvariantViolation,
    as_generator,
    categorical_from_uniform,
    check_vector,
)


def check_advice(advice, atol: float = SIMPLEX_ATOL) -> np.ndarray:
    """Validate an (N experts x K arms) advice matrix with simplex rows."""
    a = np.asarray(advice, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InputError(f"advice must be a non-empty N x K matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < -atol):
        raise InputError("advice rows must be finite and non-negative")
    if np.any(np.abs(a.sum(axis=1) - 1.0) > atol):
        raise InputError("every advice row must sum to one")
    return a


class PolicyTable:
    """Finite expert class stored as a lookup table keyed by opaque context ids.

    ``table[c]`` is the N x K advice matrix for the c-th context in
    ``contexts``.
    """

    def __init__(self, table, contexts: Iterable[Hashable] | None = None):
        arr = np.asarray(table, dtype=np.float64)
        if arr.ndim != 3:
            raise InputError("policy table must have shape (contexts, experts, arms)")
        for mat in arr:
            check_advice(mat)
        self.table = arr
        self.contexts = list(range(arr.shape[0])) if contexts is None else list(contexts)
        if len(self.contexts) != arr.shape[0]:
            raise InputError("one context id per table slice is required")
        self._index = {c: i for i, c in enumerate(self.contexts)}

    @property
    def n_experts(self) -> int:
        return self.table.shape[1]

    @property
    def n_arms(self) -> int:
        return self.table.shape[2]

    def index(self, context) -> int:
        try:
            return self._index[context]
        except KeyError:
            raise InputError(f"unknown context {context!r}") from None

    def advice(self, context) -> np.ndarray:
        return self.table[self.index(context)]

    def uniform_rows(self) -> np.ndarray:
        """Boolean mask of experts that are uniform in every context."""
        K = self.n_arms
        return np.all(np.abs(self.table - 1.0 / K) <= 1e-12, axis=(0, 2))

    def with_uniform(self) -> tuple["PolicyTable", bool]:
        """Return a table guaranteed to contain the uniform policy, and whether one was added."""
        if self.uniform_rows().any():
            return self, False
        C, _, K = self.table.shape
        uni = np.full((C, 1, K), 1.0 / K)
        return PolicyTable(np.concatenate([self.table, uni], axis=1), self.contexts), True

    def to_dict(self) -> dict:
        return {"contexts": self.contexts, "table": self.table.tolist()}


@dataclass(frozen=True)
class BanditRound:
    """Full environment round; the learner only ever sees one arm of it."""

    context: Hashable
    cost: np.ndarray
    risk: np.ndarray
    beta: float

    def __post_init__(self):
        c = check_vector(self.cost, "cost")
        r = check_vector(self.risk, "risk")
        if c.shape != r.shape:
            raise InputError("cost and risk vectors must have equal length")
        if np.any(c < 0) or np.any(c > 1) or np.any(r < 0) or np.any(r > 1):
            raise InputError("cost and risk entries must lie in [0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise InputError("threshold beta must lie in [0, 1]")
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "risk", r)


class BanditFeedback:
    """Read-only view of a round that reveals only the pulled arm."""

    __slots__ = ("_round", "_arm")

    def __init__(self, rnd, arm: int):
        self._round = rnd
        self._arm = int(arm)

    @property
    def arm(self) -> int:
        return self._arm

    @property
    def context(self):
        return self._round.context

    @property
    def beta(self) -> float:
        return self._round.beta

    def cost(self, arm: int | None = None) -> float:
        self._guard(arm)
        return float(self._round.cost[self._arm])

    def risk(self, arm: int | None = None) -> float:
        self._guard(arm)
        return float(self._round.risk[self._arm])

    def _guard(self, arm):
        if arm is not None and int(arm) != self._arm:
            raise PermissionError(f"arm {arm} was not pulled; only arm {self._arm} is observable")


@dataclass(frozen=True)
class Exp4rState:
    """Weights over experts (stored as log-weights) and the dual variable."""

    log_w: np.ndarray
    lam: float
    mu: float
    delta: float
    t: int = 0

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise InputError("dual variable must be non-negative")

    @classmethod
    def initial(cls, n_experts: int, mu: float, delta: float) -> "Exp4rState":
        return cls(np.full(n_experts, -math.log(n_experts)), 0.0, mu, delta)

    @classmethod
    def from_weights(cls, w, lam: float, mu: float, delta: float, t: int = 0) -> "Exp4rState":
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore"):
            return cls(np.log(w), float(lam), mu, delta, t)

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_w - self.log_w.max())
        return w / w.sum()


@dataclass(frozen=True)
class RoundRecord:
    t: int
    action: int
    cost: float
    risk: float
    lam: float
    p: np.ndarray = field(repr=False)


def mix_experts(w, advice) -> np.ndarray:
    """Arm distribution p[k] = sum_i w[i] * advice[i, k]."""
    w = np.asarray(w, dtype=float)
    advice = np.asarray(advice, dtype=float)
    if advice.ndim != 2 or w.shape != (advice.shape[0],):
        raise InputError(f"weights of shape {w.shape} do not match advice of shape {advice.shape}")
    return w @ advice


def importance_weighted(c_obs: float, r_obs: float, a: int, p) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-propensity cost and risk estimates for the pulled arm ``a``."""
    p = np.asarray(p, dtype=float)
    if not p[a] > 0.0:
        raise InvariantViolation(f"pulled arm {a} had probability {p[a]}")
    c_hat = np.zeros_like(p)
    r_hat = np.zeros_like(p)
    c_hat[a] = c_obs / p[a]
    r_hat[a] = r_obs / p[a]
    return c_hat, r_hat


def expert_estimates(advice, c_hat, r_hat) -> tuple[np.ndarray, np.ndarray]:
    advice = np.asarray(advice, dtype=float)
    c_hat = np.asarray(c_hat, dtype=float)
    r_hat = np.asarray(r_hat, dtype=float)
    if advice.ndim != 2 or c_hat.shape != (advice.shape[1],) or r_hat.shape != c_hat.shape:
        raise InputError("estimate vectors must have one entry per arm")
    return advice @ c_hat, advice @ r_hat


def _mw_dual_update(state: Exp4rState, losses, z_hat, beta: float) -> Exp4rState:
    """MW step on ``losses`` and dual ascent using the pre-step weights."""
    mu, lam = state.mu, state.lam
    w = state.weights
    log_w = state.log_w - mu * losses
    log_w = log_w - logsumexp(log_w)
    lam_next = max(0.0, lam + mu * (float(w @ z_hat) - beta - state.delta * mu * lam))
    return replace(state, log_w=log_w, lam=lam_next, t=state.t + 1)


def exp4r_update(state: Exp4rState, y_hat, z_hat, beta: float) -> Exp4rState:
    y_hat = np.asarray(y_hat, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    return _mw_dual_update(state, y_hat + state.lam * z_hat, z_hat, beta)


def theorem2_params(T: int, K: int, N: int) -> tuple[float, float]:
    """mu = sqrt(ln N / (T (K + 4))), delta = 3K."""
    if T < 1 or K < 1 or N < 1:
        raise InputError("T, K and N must be >= 1")
    if N == 1:
        raise InputError("a single expert gives mu = 0; the policy class is degenerate")
    if T < 18 * math.log(N):
        warnings.warn(f"T={T} < 18 ln N; the schedule's analysis assumes larger T", RuntimeWarning, stacklevel=2)
    return math.sqrt(math.log(N) / (T * (K + 4))), 3.0 * K


def exp4r_round(
    state: Exp4rState, advice, env_round, rng, *, beta: float | None = None
) -> tuple[Exp4rState, RoundRecord]:
    """Mix, sample, observe the pulled arm only, estimate and update."""
    advice = np.asarray(advice, dtype=float)
    p = mix_experts(state.weights, advice)
    u = as_generator(rng).random()
    a = categorical_from_uniform(p, u)
    view = BanditFeedback(env_round, a)
    return _observe_and_update(state, advice, p, view, beta)


def _observe_and_update(state, advice, p, view: BanditFeedback, beta, bonus=None):
    c_obs, r_obs = view.cost(), view.risk()
    beta = view.beta if beta is None else beta
    c_hat, r_hat = importance_weighted(c_obs, r_obs, view.arm, p)
    y_hat, z_hat = expert_estimates(advice, c_hat, r_hat)
    losses = y_hat + state.lam * z_hat
    if bonus is not None:
        losses = losses - bonus
    new = _mw_dual_update(state, losses, z_hat, beta)
    return new, RoundRecord(state.t, view.arm, c_obs, r_obs, state.lam, p)


class EXP4R(BaseEstimator):
    """Contextual bandit learner with a long-term risk constraint.

    Parameters
    ----------
    horizon : int, optional
        Number of rounds; used to derive ``mu``/``delta`` when not given.
    mu, delta : float, optional
        Schedule overrides.
    random_state : int or Generator, optional
        Source of action draws.

    The learner is driven either one round at a time through
    :meth:`predict_proba`/:meth:`predict` and :meth:`partial_fit`, or for a
    whole stream with :meth:`fit`.
    """

    def __init__(self, horizon=None, mu=None, delta=None, random_state=None):
        self.horizon = horizon
        self.mu = mu
        self.delta = delta
        self.random_state = random_state

    def _schedule(self, n_experts: int, n_arms: int) -> tuple[float, float]:
        mu, delta = self.mu, self.delta
        if mu is None or delta is None:
            if self.horizon is None:
                raise InputError("horizon is required to derive mu/delta")
            mu0, delta0 = theorem2_params(int(self.horizon), n_arms, n_experts)
            mu = mu0 if mu is None else mu
            delta = delta0 if delta is None else delta
        return float(mu), float(delta)

    def _init_state(self, n_experts: int, n_arms: int):
        self.mu_, self.delta_ = self._schedule(n_experts, n_arms)
        self.state_ = Exp4rState.initial(n_experts, self.mu_, self.delta_)
        self.rng_ = as_generator(self.random_state)
        self.n_arms_ = n_arms

    def _ensure_state(self, advice):
        if not hasattr(self, "state_"):
            self._init_state(*advice.shape)
        elif advice.shape[0] != self.state_.log_w.shape[0]:
            raise InputError("number of experts changed between rounds")

    @property
    def weights_(self):
        return self.state_.weights

    @property
    def lambda_(self):
        return self.state_.lam

    def predict_proba(self, advice) -> np.ndarray:
        advice = check_advice(advice)
        self._ensure_state(advice)
        return mix_experts(self.state_.weights, advice)

    def predict(self, advice) -> int:
        p = self.predict_proba(advice)
        return categorical_from_uniform(p, self.rng_.random())

    def _bonus(self, advice, p):
        return None

    def partial_fit(self, advice, feedback: BanditFeedback, beta: float | None = None):
        """Update from one round given the feedback view of the pulled arm."""
        advice = check_advice(advice)
        self._ensure_state(advice)
        p = mix_experts(self.state_.weights, advice)
        self.state_, self.last_record_ = _observe_and_update(
            self.state_, advice, p, feedback, beta, self._bonus(advice, p)
        )
        return self

    def step(self, advice, env_round) -> RoundRecord:
        """Play one full round against ``env_round`` and return its record."""
        arm = self.predict(advice)
        self.partial_fit(advice, BanditFeedback(env_round, arm))
        return self.last_record_

    def fit(self, rounds: Iterable, policies: PolicyTable | Mapping):
        """Run the protocol over a stream of :class:`BanditRound`."""
        lookup = policies.advice if isinstance(policies, PolicyTable) else policies.__getitem__
        if hasattr(self, "state_"):
            del self.state_
        self.records_ = [self.step(lookup(rnd.context), rnd) for rnd in rounds]
        return self
