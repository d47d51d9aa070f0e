"""Online convex programming with adversarial long-term constraints.

Saddle-point scheme on the composite loss

    L_t(x, lam) = loss_t(x) + lam * f_t(x) - (delta * mu / 2) * lam**2

with online mirror descent on ``x`` and projected gradient ascent on ``lam``.
Both updates read the pre-step pair (x_t, lam_t).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np
from sklearn.base import BaseEstimator

from .core import (
    EntropyMap,
    FeasibleSet,
    InputError,
    InvariantViolation,
    MirrorMap,
    OcpBounds,
    Simplex,
    check_simplex,
    make_mirror_map,
)


class ConstrainedRound:
    """One full-information round: loss and constraint oracles with gradients."""

    def __init__(
        self,
        loss: Callable[[np.ndarray], float],
        loss_grad: Callable[[np.ndarray], np.ndarray],
        constraint: Callable[[np.ndarray], float],
        constraint_grad: Callable[[np.ndarray], np.ndarray],
    ):
        self._loss = loss
        self._loss_grad = loss_grad
        self._constraint = constraint
        self._constraint_grad = constraint_grad

    def loss(self, x) -> float:
        return float(self._loss(x))

    def loss_grad(self, x) -> np.ndarray:
        return np.asarray(self._loss_grad(x), dtype=float)

    def constraint(self, x) -> float:
        return float(self._constraint(x))

    def constraint_grad(self, x) -> np.ndarray:
        return np.asarray(self._constraint_grad(x), dtype=float)


class LinearRound(ConstrainedRound):
    """Round with loss ``g.x + h`` and constraint ``a.x - b <= 0``.

    Linear rounds expose their coefficients so hindsight comparators can be
    solved exactly.
    """

    def __init__(self, g, a, b: float = 0.0, h: float = 0.0):
        self.g = np.asarray(g, dtype=float)
        self.a = np.asarray(a, dtype=float)
        self.b = float(b)
        self.h = float(h)

    def loss(self, x):
        return float(self.g @ x) + self.h

    def loss_grad(self, x):
        return self.g

    def constraint(self, x):
        return float(self.a @ x) - self.b

    def constraint_grad(self, x):
        return self.a

    def __repr__(self):
        return f"LinearRound(g={self.g.tolist()}, h={self.h}, a={self.a.tolist()}, b={self.b})"


@dataclass(frozen=True)
class PrimalDualState:
    x: np.ndarray
    lam: float
    mu: float
    delta: float
    t: int = 0

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise InputError(f"dual variable must be non-negative, got {self.lam}")
        if not (self.mu > 0 and self.delta > 0):
            raise InputError("mu and delta must be strictly positive")


def composite_loss(rnd: ConstrainedRound, x, lam: float, mu: float, delta: float) -> float:
    if lam < 0:
        raise InputError("lam must be non-negative")
    return rnd.loss(x) + lam * rnd.constraint(x) - 0.5 * delta * mu * lam * lam


def primal_grad(rnd: ConstrainedRound, x, lam: float) -> np.ndarray:
    if lam < 0:
        raise InputError("lam must be non-negative")
    return rnd.loss_grad(x) + lam * rnd.constraint_grad(x)


def dual_grad(rnd: ConstrainedRound, x, lam: float, mu: float, delta: float) -> float:
    if lam < 0:
        raise InputError("lam must be non-negative")
    return rnd.constraint(x) - delta * mu * lam


def omd_step(
    mirror_map: MirrorMap, fset: FeasibleSet, state: PrimalDualState, rnd: ConstrainedRound
) -> PrimalDualState:
    """One simultaneous primal (mirror descent) and dual (ascent) step."""
    x, lam, mu = state.x, state.lam, state.mu
    g = primal_grad(rnd, x, lam)
    dg = dual_grad(rnd, x, lam, mu, state.delta)
    if not (np.all(np.isfinite(g)) and math.isfinite(dg)):
        raise InvariantViolation(f"non-finite gradient at round {state.t}: g={g}, dual={dg}")
    x_tilde = mirror_map.grad_inverse(mirror_map.grad(x) - mu * g)
    x_next = mirror_map.project(fset, x_tilde)
    lam_next = max(0.0, lam + mu * dg)
    return replace(state, x=x_next, lam=lam_next, t=state.t + 1)


def entropy_mw_step(x, grad, mu: float) -> np.ndarray:
    """Closed-form multiplicative-weights step, evaluated in log space."""
    x = check_simplex(x, "x")
    logits = np.log(np.maximum(x, 1e-300)) - mu * np.asarray(grad, dtype=float)
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def theorem1_params(T: int, bounds: OcpBounds) -> tuple[float, float]:
    """Step size ``mu`` and dual regulariser ``delta`` for a known horizon.

    mu = sqrt(B / (T (D^2 + G^2/alpha))), delta = 2 G^2 / alpha.
    Warns when T < 4B, below which the schedule's validity argument fails.
    """
    if T < 1:
        raise InputError("horizon T must be >= 1")
    if not isinstance(bounds, OcpBounds):
        raise InputError("bounds must be an OcpBounds")
    B, D, G, alpha = bounds.B, bounds.D, bounds.G, bounds.alpha
    mu = math.sqrt(B / (T * (D * D + G * G / alpha)))
    delta = 2.0 * G * G / alpha
    if T < 4 * B:
        warnings.warn(
            f"T={T} < 4B={4 * B}: delta >= delta^2 mu^2 + G^2/alpha may not hold",
            RuntimeWarning,
            stacklevel=2,
        )
    return mu, delta


def default_bounds(mirror_map: MirrorMap, fset: FeasibleSet, F=1.0, D=1.0, G=1.0) -> OcpBounds:
    """Bregman diameter and norm bound for the built-in map/set pairs."""
    if isinstance(fset, Simplex):
        if isinstance(mirror_map, EntropyMap):
            B = math.log(fset.dim) if fset.dim > 1 else 1.0
            X = 1.0
        else:
            B, X = 1.0, 1.0
    else:
        width = fset.upper - fset.lower
        if isinstance(mirror_map, EntropyMap):
            raise InputError("default bounds for the entropy map need a simplex")
        B = max(0.5 * float(width @ width), 1e-12)
        X = float(np.linalg.norm(np.maximum(np.abs(fset.lower), np.abs(fset.upper))))
        X = max(X, 1e-12)
    return OcpBounds(B=B, X=X, F=F, D=D, G=G, alpha=mirror_map.alpha)


class ConstrainedOMD(BaseEstimator):
    """Online learner for losses with adversarial long-term constraints.

    Parameters
    ----------
    mirror_map : {"euclidean", "entropy"} or MirrorMap
        Regulariser defining the primal geometry.
    feasible_set : FeasibleSet
        Decision set; the learner starts at its barycenter.
    horizon : int, optional
        Number of rounds, required when ``mu``/``delta`` are not given.
    bounds : OcpBounds, optional
        Constants for the step-size schedule.
    mu, delta : float, optional
        Explicit schedule overrides.

    Attributes
    ----------
    x_ : ndarray
        Decision the learner proposes for the next round.
    lambda_ : float
        Current dual variable.
    mu_, delta_ : float
        Resolved schedule.
    """

    def __init__(
        self,
        mirror_map="entropy",
        feasible_set=None,
        horizon=None,
        bounds=None,
        mu=None,
        delta=None,
    ):
        self.mirror_map = mirror_map
        self.feasible_set = feasible_set
        self.horizon = horizon
        self.bounds = bounds
        self.mu = mu
        self.delta = delta

    def _initialize(self):
        if self.feasible_set is None:
            raise InputError("feasible_set is required")
        self.map_ = make_mirror_map(self.mirror_map)
        mu, delta = self.mu, self.delta
        if mu is None or delta is None:
            if self.horizon is None:
                raise InputError("horizon is required to derive mu/delta")
            bounds = self.bounds or default_bounds(self.map_, self.feasible_set)
            mu0, delta0 = theorem1_params(int(self.horizon), bounds)
            mu = mu0 if mu is None else mu
            delta = delta0 if delta is None else delta
        self.mu_, self.delta_ = float(mu), float(delta)
        self.state_ = PrimalDualState(
            x=self.feasible_set.barycenter(), lam=0.0, mu=self.mu_, delta=self.delta_
        )

    @property
    def x_(self):
        return self.state_.x

    @property
    def lambda_(self):
        return self.state_.lam

    @property
    def t_(self):
        return self.state_.t

    def predict(self, X=None):
        """Return the decision proposed for the upcoming round."""
        if not hasattr(self, "state_"):
            self._initialize()
        return self.state_.x.copy()

    def partial_fit(self, rnd: ConstrainedRound):
        if not hasattr(self, "state_"):
            self._initialize()
        self.state_ = omd_step(self.map_, self.feasible_set, self.state_, rnd)
        return self

    def fit(self, rounds: Iterable[ConstrainedRound]):
        self._initialize()
        for rnd in rounds:
            self.partial_fit(rnd)
        return self
