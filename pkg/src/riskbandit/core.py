"""Shared numerics: simplex vectors, feasible sets, mirror maps and sampling.

Everything here is dense float64. The two mirror maps are the squared
Euclidean norm (paired with the l2 norm, modulus 1) and the negative entropy
(paired with the l1 norm on the simplex, modulus 1).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

# Entries below this are lifted before taking logarithms.
LOG_FLOOR = 1e-300
SIMPLEX_ATOL = 1e-9


class InputError(ValueError):
    """Raised when an input violates a documented precondition."""


class InvariantViolation(RuntimeError):
    """Raised when a run reaches a state the algorithm guarantees cannot occur."""


def check_vector(x, name="x", ndim=1) -> np.ndarray:
    """Return ``x`` as a finite float64 array or raise :class:`InputError`."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != ndim:
        raise InputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def check_simplex(p, name="p", atol=SIMPLEX_ATOL) -> np.ndarray:
    """Validate that ``p`` lies on the probability simplex (up to ``atol``)."""
    arr = check_vector(p, name)
    if np.any(arr < -atol):
        raise InputError(f"{name} has negative entries: {arr}")
    if abs(arr.sum() - 1.0) > atol:
        raise InputError(f"{name} sums to {arr.sum()!r}, expected 1")
    return arr


class SimplexVector:
    """Non-negative weights renormalised to sum to one.

    Construction clips tiny negative round-off, rejects real negatives and
    renormalises. The underlying array is read-only.
    """

    __slots__ = ("_w",)

    def __init__(self, weights, atol: float = SIMPLEX_ATOL):
        w = check_vector(weights, "weights")
        if np.any(w < -atol):
            raise InputError(f"simplex weights must be non-negative, got {w}")
        w = np.clip(w, 0.0, None)
        total = w.sum()
        if total <= 0.0:
            raise InputError("simplex weights sum to zero")
        w = w / total
        w.setflags(write=False)
        self._w = w

    @classmethod
    def uniform(cls, n: int) -> "SimplexVector":
        if n < 1:
            raise InputError("n must be >= 1")
        return cls(np.full(n, 1.0 / n))

    @property
    def weights(self) -> np.ndarray:
        return self._w

    def __array__(self, dtype=None, copy=None):
        return self._w if dtype is None else self._w.astype(dtype)

    def __len__(self):
        return self._w.shape[0]

    def __getitem__(self, i):
        return self._w[i]

    def __repr__(self):
        return f"SimplexVector({self._w.tolist()})"


@dataclass(frozen=True)
class OcpBounds:
    """Problem constants used by the full-information step-size schedule.

    ``B`` bounds the Bregman diameter of the decision set, ``X`` the decision
    norm, ``F`` the loss magnitude, ``D`` the constraint magnitude, ``G`` the
    dual norm of loss and constraint gradients and ``alpha`` the strong
    convexity modulus of the mirror map.
    """

    B: float
    X: float
    F: float
    D: float
    G: float
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("B", "X", "F", "D", "G", "alpha"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"bound {name} must be strictly positive, got {v!r}")


# --------------------------------------------------------------------------
# Feasible sets


class FeasibleSet(ABC):
    """A non-empty convex decision set supporting membership and barycenter."""

    dim: int

    @abstractmethod
    def contains(self, x, atol: float = SIMPLEX_ATOL) -> bool: ...

    @abstractmethod
    def barycenter(self) -> np.ndarray: ...


class Simplex(FeasibleSet):
    def __init__(self, n: int):
        if int(n) < 1:
            raise InputError("simplex dimension must be >= 1")
        self.dim = int(n)

    def contains(self, x, atol=SIMPLEX_ATOL):
        x = np.asarray(x, dtype=float)
        return (
            x.shape == (self.dim,)
            and bool(np.all(x >= -atol))
            and abs(float(x.sum()) - 1.0) <= atol
        )

    def barycenter(self):
        return np.full(self.dim, 1.0 / self.dim)

    def __repr__(self):
        return f"Simplex({self.dim})"

    def __eq__(self, other):
        return isinstance(other, Simplex) and other.dim == self.dim

    def __hash__(self):
        return hash(("simplex", self.dim))


class Box(FeasibleSet):
    def __init__(self, lower, upper, n: int | None = None):
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if n is not None:
            lo = np.broadcast_to(lo, (n,)).copy()
            hi = np.broadcast_to(hi, (n,)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InputError("box bounds must be 1-d with matching shapes")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InputError("box bounds must be finite")
        if np.any(lo > hi):
            raise InputError("box is empty: some lower bound exceeds its upper bound")
        self.lower, self.upper = lo, hi
        self.dim = lo.shape[0]

    def contains(self, x, atol=SIMPLEX_ATOL):
        x = np.asarray(x, dtype=float)
        return (
            x.shape == (self.dim,)
            and bool(np.all(x >= self.lower - atol))
            and bool(np.all(x <= self.upper + atol))
        )

    def barycenter(self):
        return 0.5 * (self.lower + self.upper)

    def __repr__(self):
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


def project_simplex(y) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based, exact)."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, n + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(y - theta, 0.0)


# --------------------------------------------------------------------------
# Mirror maps


class MirrorMap(ABC):
    """Strongly convex regulariser with its gradient and Bregman projection."""

    alpha: float = 1.0

    @abstractmethod
    def value(self, x) -> float: ...

    @abstractmethod
    def grad(self, x) -> np.ndarray: ...

    @abstractmethod
    def grad_inverse(self, y) -> np.ndarray: ...

    @abstractmethod
    def project(self, fset: FeasibleSet, y) -> np.ndarray: ...

    @abstractmethod
    def norm(self, x) -> float:
        """Primal norm the modulus ``alpha`` refers to."""

    @abstractmethod
    def dual_norm(self, g) -> float: ...

    def check_domain(self, x) -> np.ndarray:
        return check_vector(x)

    def divergence(self, x, y) -> float:
        x = self.check_domain(x)
        y = self.check_domain(y)
        if x.shape != y.shape:
            raise InputError("divergence arguments differ in shape")
        d = self.value(x) - self.value(y) - float(self.grad(y) @ (x - y))
        return max(d, 0.0)


class EuclideanMap(MirrorMap):
    """R(x) = ||x||^2 / 2, 1-strongly convex w.r.t. the l2 norm."""

    name = "euclidean"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ x)

    def grad(self, x):
        return np.array(x, dtype=float)

    def grad_inverse(self, y):
        return np.array(y, dtype=float)

    def divergence(self, x, y):
        diff = self.check_domain(x) - self.check_domain(y)
        return 0.5 * float(diff @ diff)

    def norm(self, x):
        return float(np.linalg.norm(x, 2))

    def dual_norm(self, g):
        return float(np.linalg.norm(g, 2))

    def project(self, fset, y):
        y = check_vector(y, "y")
        if isinstance(fset, Simplex):
            if fset.contains(y, atol=0.0):
                return y.copy()
            return project_simplex(y)
        if isinstance(fset, Box):
            return np.clip(y, fset.lower, fset.upper)
        raise InputError(f"unsupported feasible set {fset!r}")


class EntropyMap(MirrorMap):
    """R(x) = sum_i x_i log x_i, 1-strongly convex w.r.t. l1 on the simplex."""

    name = "entropy"

    def check_domain(self, x):
        x = check_vector(x)
        if np.any(x <= 0.0):
            raise InputError("negative-entropy map needs strictly positive entries")
        return x

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ np.log(np.maximum(x, LOG_FLOOR)))

    def grad(self, x):
        return 1.0 + np.log(np.maximum(np.asarray(x, dtype=float), LOG_FLOOR))

    def grad_inverse(self, y):
        return np.exp(np.asarray(y, dtype=float) - 1.0)

    def divergence(self, x, y):
        # Generalised KL; equals KL(x||y) when both sum to one.
        x = self.check_domain(x)
        y = self.check_domain(y)
        if x.shape != y.shape:
            raise InputError("divergence arguments differ in shape")
        return max(float(x @ np.log(x / y) - x.sum() + y.sum()), 0.0)

    def norm(self, x):
        return float(np.abs(x).sum())

    def dual_norm(self, g):
        return float(np.abs(g).max())

    def project(self, fset, y):
        y = check_vector(y, "y")
        if isinstance(fset, Simplex):
            if np.any(y <= 0.0):
                raise InputError("entropy projection needs a strictly positive point")
            return y / y.sum()
        if isinstance(fset, Box):
            # Separable regulariser: the projection clips coordinatewise.
            return np.clip(y, fset.lower, fset.upper)
        raise InputError(f"unsupported feasible set {fset!r}")


MIRROR_MAPS = {"euclidean": EuclideanMap, "entropy": EntropyMap}


def make_mirror_map(name: str | MirrorMap) -> MirrorMap:
    if isinstance(name, MirrorMap):
        return name
    try:
        return MIRROR_MAPS[name]()
    except KeyError:
        raise InputError(f"unknown mirror map {name!r}") from None


def bregman_divergence(mirror_map: MirrorMap, x, y) -> float:
    """D_R(x, y) = R(x) - R(y) - <grad R(y), x - y>."""
    return mirror_map.divergence(x, y)


def bregman_project(mirror_map: MirrorMap, fset: FeasibleSet, y) -> np.ndarray:
    """argmin over ``fset`` of D_R(x, y)."""
    return mirror_map.project(fset, y)


# --------------------------------------------------------------------------
# Sampling


def categorical_from_uniform(p: np.ndarray, u: float) -> int:
    """Inverse-CDF lookup scanning indices in ascending order."""
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, u, side="right"))
    if i >= p.shape[0] or p[i] <= 0.0:
        # u landed past a cdf that rounded below one: take the last
        # index carrying mass.
        i = int(np.flatnonzero(p > 0.0)[-1])
    return i


def sample_categorical(p, rng: np.random.Generator) -> int:
    """Draw index ``i`` with probability ``p[i]`` using one uniform from ``rng``."""
    p = np.asarray(p, dtype=float)
    return categorical_from_uniform(p, rng.random())


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
