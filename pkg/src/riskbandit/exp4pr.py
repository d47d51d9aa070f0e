"""High-probability variant of EXP4 with risk constraints.

Costs and risks live in [-1, 0] here. The weight update subtracts a
confidence bonus ``kappa * sum_k advice[i, k] / p[k]`` from each expert's
estimated Lagrangian loss; the dual step is the same as in EXP4.R.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

import numpy as np

from .core import (
    InputError,
    InvariantViolation,
    as_generator,
    categorical_from_uniform,
    check_vector,
)
from .exp4r import (
    EXP4R,
    BanditFeedback,
    BanditRound,
    Exp4rState,
    PolicyTable,
    RoundRecord,
    _mw_dual_update,
    _observe_and_update,
    check_advice,
)


@dataclass(frozen=True)
class SignedBanditRound:
    context: Hashable
    cost: np.ndarray
    risk: np.ndarray
    beta: float

    def __post_init__(self):
        c = check_vector(self.cost, "cost")
        r = check_vector(self.risk, "risk")
        if c.shape != r.shape:
            raise InputError("cost and risk vectors must have equal length")
        if np.any(c < -1) or np.any(c > 0) or np.any(r < -1) or np.any(r > 0):
            raise InputError("signed cost and risk entries must lie in [-1, 0]")
        if not -1.0 <= self.beta <= 0.0:
            raise InputError("signed threshold must lie in [-1, 0]")
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "risk", r)


def to_signed(rnd: BanditRound) -> SignedBanditRound:
    """Shift a [0, 1] round into the [-1, 0] convention (gaps r - beta are unchanged)."""
    return SignedBanditRound(rnd.context, rnd.cost - 1.0, rnd.risk - 1.0, rnd.beta - 1.0)


@dataclass(frozen=True)
class Exp4prConfig:
    epsilon: float
    nu: float
    mu: float
    kappa: float
    delta: float
    lambda_max: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 0.5:
            raise InputError("epsilon must lie in (0, 1/2)")
        if not 0.0 < self.nu < 1.0:
            raise InputError("nu must lie in (0, 1)")
        if not (self.mu > 0 and self.delta > 0):
            raise InputError("mu and delta must be positive")
        if not 0.0 <= self.kappa <= 1.0:
            raise InputError(f"kappa must lie in [0, 1], got {self.kappa}")
        if self.delta * self.mu * self.mu > 1.0:
            raise InputError(
                f"delta={self.delta} exceeds 1/mu^2={1 / self.mu ** 2}; the dual cap does not hold"
            )


def theorem3_params(
    T: int,
    K: int,
    N: int,
    epsilon: float = 1 / 3,
    nu: float = 0.05,
    beta: float = -1.0,
    *,
    mu: float | None = None,
    kappa: float | None = None,
    delta: float | None = None,
) -> Exp4prConfig:
    """Schedule trading regret order T^{(1+eps)/2} against violation T^{1-eps/2}.

    mu = sqrt(ln N / ((3K + 4) T)), kappa = sqrt((1 + T^eps) ln(N / nu) / (T K)),
    delta = K T^(1/2 - eps). ``beta`` is the signed threshold, used for the
    dual cap |beta| / (delta mu). Explicit ``mu``/``kappa``/``delta`` override
    the formulas but still pass validation.
    """
    if not 0.0 < epsilon < 0.5:
        raise InputError("epsilon must lie in (0, 1/2)")
    if not 0.0 < nu < 1.0:
        raise InputError("nu must lie in (0, 1)")
    if T < 1 or K < 1 or N < 2:
        raise InputError("need T >= 1, K >= 1 and at least two experts")
    if mu is None:
        mu = math.sqrt(math.log(N) / ((3 * K + 4) * T))
    if kappa is None:
        kappa = math.sqrt((1 + T**epsilon) * math.log(N / nu) / (T * K))
    if delta is None:
        delta = K * T ** (0.5 - epsilon)
    cfg = Exp4prConfig(epsilon, nu, mu, kappa, delta, abs(beta) / (delta * mu))
    denom = 2.0 / K - mu - kappa * mu
    if denom <= 0 or delta < abs(beta) / denom:
        warnings.warn(
            f"delta={delta:.4g} < |beta|/(2/K - mu - kappa mu); T may be too small for the analysis",
            RuntimeWarning,
            stacklevel=2,
        )
    return cfg


def confidence_bonus(advice, p, kappa: float) -> np.ndarray:
    """bonus[i] = kappa * sum_k advice[i, k] / p[k]."""
    advice = np.asarray(advice, dtype=float)
    p = np.asarray(p, dtype=float)
    mass = advice > 0
    if np.any(mass & (p <= 0)[None, :]):
        bad = np.flatnonzero(np.any(mass, axis=0) & (p <= 0))
        raise InvariantViolation(f"arms {bad.tolist()} have zero probability but carry expert mass")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mass, advice / p, 0.0)
    return kappa * ratio.sum(axis=1)


def exp4pr_update(state: Exp4rState, y_hat, z_hat, bonus, beta: float) -> Exp4rState:
    y_hat = np.asarray(y_hat, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    losses = y_hat + state.lam * z_hat - np.asarray(bonus, dtype=float)
    return _mw_dual_update(state, losses, z_hat, beta)


class EXP4PR(EXP4R):
    """EXP4.R with a confidence bonus, run in the [-1, 0] convention.

    Parameters
    ----------
    horizon : int
        Number of rounds.
    epsilon : float, default=1/3
        Trade-off exponent in (0, 1/2).
    nu : float, default=0.05
        Failure probability.
    mu, delta, kappa : float, optional
        Schedule overrides.
    random_state : int or Generator, optional

    A uniform expert is appended to the advice when the first advice matrix
    contains none (``uniform_added_``). Every update asserts the dual cap
    ``lambda <= |beta| / (delta mu)``.
    """

    def __init__(
        self,
        horizon=None,
        epsilon=1 / 3,
        nu=0.05,
        mu=None,
        delta=None,
        kappa=None,
        random_state=None,
    ):
        super().__init__(horizon=horizon, mu=mu, delta=delta, random_state=random_state)
        self.epsilon = epsilon
        self.nu = nu
        self.kappa = kappa

    def _configure(self, n_experts: int, n_arms: int, beta: float) -> Exp4prConfig:
        if self.horizon is None:
            raise InputError("horizon is required")
        return theorem3_params(
            int(self.horizon), n_arms, n_experts, self.epsilon, self.nu, beta,
            mu=self.mu, kappa=self.kappa, delta=self.delta,
        )

    def _augment(self, advice):
        if not hasattr(self, "uniform_added_"):
            K = advice.shape[1]
            self.uniform_added_ = not np.any(np.all(np.abs(advice - 1.0 / K) <= 1e-12, axis=1))
        if self.uniform_added_:
            K = advice.shape[1]
            advice = np.vstack([advice, np.full((1, K), 1.0 / K)])
        return advice

    def _ensure_state(self, advice, beta=None):
        if not hasattr(self, "state_"):
            if beta is None:
                raise InputError("the threshold is needed before the first round")
            N, K = advice.shape
            self.config_ = self._configure(N, K, beta)
            self.beta_ = float(beta)
            self.mu_, self.delta_ = self.config_.mu, self.config_.delta
            self.state_ = Exp4rState.initial(N, self.mu_, self.delta_)
            self.rng_ = as_generator(self.random_state)
            self.n_arms_ = K
        elif advice.shape[0] != self.state_.log_w.shape[0]:
            raise InputError("number of experts changed between rounds")

    def predict_proba(self, advice, beta=None) -> np.ndarray:
        advice = self._augment(check_advice(advice))
        self._ensure_state(advice, beta if beta is not None else getattr(self, "beta_", None))
        return self.state_.weights @ advice

    def predict(self, advice, beta=None) -> int:
        p = self.predict_proba(advice, beta)
        return categorical_from_uniform(p, self.rng_.random())

    def _bonus(self, advice, p):
        return confidence_bonus(advice, p, self.config_.kappa)

    def partial_fit(self, advice, feedback: BanditFeedback, beta: float | None = None):
        advice = self._augment(check_advice(advice))
        beta = feedback.beta if beta is None else beta
        self._ensure_state(advice, beta)
        p = self.state_.weights @ advice
        self.state_, self.last_record_ = _observe_and_update(
            self.state_, advice, p, feedback, beta, self._bonus(advice, p)
        )
        if self.state_.lam > self.config_.lambda_max:
            raise InvariantViolation(
                f"dual variable {self.state_.lam!r} exceeds cap {self.config_.lambda_max!r} "
                f"at round {self.state_.t}"
            )
        return self

    def step(self, advice, env_round) -> RoundRecord:
        arm = self.predict(advice, env_round.beta)
        self.partial_fit(advice, BanditFeedback(env_round, arm))
        return self.last_record_

    def fit(self, rounds: Iterable, policies: PolicyTable | Mapping):
        """Run over [0, 1] rounds, shifting each into the signed convention."""
        lookup = policies.advice if isinstance(policies, PolicyTable) else policies.__getitem__
        for attr in ("state_", "uniform_added_"):
            if hasattr(self, attr):
                delattr(self, attr)
        self.records_ = []
        for rnd in rounds:
            signed = to_signed(rnd) if isinstance(rnd, BanditRound) else rnd
            self.records_.append(self.step(lookup(rnd.context), signed))
        return self
