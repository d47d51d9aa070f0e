"""Hindsight comparators for regret baselines.

Every supported instance is linear, so the best fixed decision in hindsight is
an LP: minimise ``c.x`` over a simplex or box intersected with ``A x <= b``.
The LP is solved by a dense two-phase tableau simplex with Bland's rule.
Large row sets are handled by constraint generation, and ties among optimal
vertices are broken towards the lexicographically smallest one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import Box, FeasibleSet, InputError, Simplex

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    status: LPStatus
    x: np.ndarray | None = None
    value: float | None = None

    @property
    def success(self) -> bool:
        return self.status is LPStatus.OPTIMAL


# --------------------------------------------------------------------------
# Dense tableau simplex on  min c.x  s.t.  A x = b, x >= 0


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, tab[row])


def _run_simplex(tab: np.ndarray, basis: list[int], n_cols: int, max_iter: int) -> bool:
    """Iterate Bland's rule on ``tab`` in place; last row holds reduced costs.

    Returns False if the problem is unbounded along some entering column.
    """
    m = len(basis)
    for _ in range(max_iter):
        red = tab[-1, :n_cols]
        entering = np.flatnonzero(red < -PIVOT_TOL)
        if entering.size == 0:
            return True
        j = int(entering[0])
        colj = tab[:m, j]
        pos = np.flatnonzero(colj > PIVOT_TOL)
        if pos.size == 0:
            return False
        ratios = tab[pos, -1] / colj[pos]
        best = ratios.min()
        ties = pos[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        # Bland: among tied rows leave the smallest basic variable index.
        i = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, i, j)
        basis[i] = j
    raise RuntimeError("simplex iteration limit reached")


def simplex_standard(c, A_eq, b_eq, max_iter: int = 50_000) -> LPResult:
    """Solve ``min c.x`` subject to ``A_eq x = b_eq``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    A = np.array(A_eq, dtype=float).reshape(-1, c.shape[0])
    b = np.array(b_eq, dtype=float).reshape(-1)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # Phase one with one artificial per row.
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run_simplex(tab, basis, n + m, max_iter)
    if -tab[-1, -1] > FEAS_TOL * max(1.0, float(b.sum())):
        return LPResult(LPStatus.INFEASIBLE)

    # Drive remaining artificials out of the basis; drop redundant rows.
    keep = []
    for i in range(m):
        if basis[i] >= n:
            cand = np.flatnonzero(np.abs(tab[i, :n]) > PIVOT_TOL)
            if cand.size:
                _pivot(tab, i, int(cand[0]))
                basis[i] = int(cand[0])
                keep.append(i)
        else:
            keep.append(i)
    tab = np.vstack([tab[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[i] for i in keep]

    # Phase two.
    tab[-1, :n] = c
    for i, bi in enumerate(basis):
        if c[bi] != 0.0:
            tab[-1] -= c[bi] * tab[i]
    if not _run_simplex(tab, basis, n, max_iter):
        return LPResult(LPStatus.UNBOUNDED)
    x = np.zeros(n)
    for i, bi in enumerate(basis):
        x[bi] = tab[i, -1]
    x = np.maximum(x, 0.0)
    return LPResult(LPStatus.OPTIMAL, x, float(c @ x))


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None) -> LPResult:
    """``min c.x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
    k = A_ub.shape[0]
    A = np.block([[A_ub, np.eye(k)], [A_eq, np.zeros((A_eq.shape[0], k))]])
    res = simplex_standard(np.concatenate([c, np.zeros(k)]), A, np.concatenate([b_ub, b_eq]))
    if res.success:
        res.x = res.x[:n]
        res.value = float(c @ res.x)
    return res


# --------------------------------------------------------------------------
# Hindsight problems


@dataclass
class HindsightProblem:
    """minimise ``objective.x + offset`` over ``base`` with ``rows x <= bounds``.

    ``mode`` is ``"every_round"`` (one row per distinct round constraint) or
    ``"on_average"`` (the single averaged row).
    """

    objective: np.ndarray
    base: FeasibleSet
    rows: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    bounds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    offset: float = 0.0
    mode: str = "every_round"

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        d = self.objective.shape[0]
        if self.base.dim != d:
            raise InputError("objective and base set dimensions differ")
        self.rows = np.asarray(self.rows, dtype=float).reshape(-1, d)
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1)
        if self.rows.shape[0] != self.bounds.shape[0]:
            raise InputError("one bound per constraint row is required")
        if not (np.all(np.isfinite(self.rows)) and np.all(np.isfinite(self.bounds))):
            raise InputError("constraint rows must be finite")
        if self.mode not in ("every_round", "on_average"):
            raise InputError(f"unknown constraint mode {self.mode!r}")

    @property
    def dim(self) -> int:
        return self.objective.shape[0]

    def violation(self, x) -> float:
        if self.rows.shape[0] == 0:
            return 0.0
        return float(np.max(self.rows @ x - self.bounds))


class HindsightAccumulator:
    """Streams linear rounds into the data needed for both comparator modes.

    Each round contributes objective coefficients ``g`` (plus constant ``h``)
    and one constraint ``a.x <= b``. Rows are deduplicated exactly.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.objective = np.zeros(dim)
        self.offset = 0.0
        self.row_sum = np.zeros(dim)
        self.bound_sum = 0.0
        self.count = 0
        self._rows: dict[bytes, tuple[np.ndarray, float]] = {}

    def add(self, g, a, b: float, h: float = 0.0) -> None:
        g = np.asarray(g, dtype=float)
        a = np.asarray(a, dtype=float) + 0.0  # folds -0.0 into 0.0 for dedup
        b = float(b) + 0.0
        self.objective += g
        self.offset += h
        self.row_sum += a
        self.bound_sum += b
        self.count += 1
        key = a.tobytes() + np.float64(b).tobytes()
        if key not in self._rows:
            self._rows[key] = (a.copy(), float(b))

    def add_batch(self, G, A, b, h=None) -> None:
        G = np.asarray(G, dtype=float).reshape(-1, self.dim)
        A = np.asarray(A, dtype=float).reshape(-1, self.dim) + 0.0
        b = np.broadcast_to(np.asarray(b, dtype=float), (A.shape[0],)) + 0.0
        self.objective += G.sum(axis=0)
        if h is not None:
            self.offset += float(np.sum(h))
        self.row_sum += A.sum(axis=0)
        self.bound_sum += float(b.sum())
        self.count += A.shape[0]
        _, idx = np.unique(np.column_stack([A, b]), axis=0, return_index=True)
        for i in np.sort(idx):
            key = A[i].tobytes() + np.float64(b[i]).tobytes()
            if key not in self._rows:
                self._rows[key] = (A[i].copy(), float(b[i]))

    @property
    def n_distinct(self) -> int:
        return len(self._rows)

    def problem(self, base: FeasibleSet, mode: str = "every_round") -> HindsightProblem:
        if mode == "every_round":
            if self._rows:
                rows = np.array([r for r, _ in self._rows.values()])
                bounds = np.array([b for _, b in self._rows.values()])
            else:
                rows, bounds = np.zeros((0, self.dim)), np.zeros(0)
        elif mode == "on_average":
            if self.count:
                rows = (self.row_sum / self.count)[None, :]
                bounds = np.array([self.bound_sum / self.count])
            else:
                rows, bounds = np.zeros((0, self.dim)), np.zeros(0)
        else:
            raise InputError(f"unknown constraint mode {mode!r}")
        return HindsightProblem(self.objective.copy(), base, rows, bounds, self.offset, mode)


@dataclass
class ComparatorResult:
    feasible: bool
    x: np.ndarray | None
    value: float | None
    status: str

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "status": self.status,
            "value": self.value,
            "x": None if self.x is None else self.x.tolist(),
        }


def _solve_on_base(c, base: FeasibleSet, rows, bounds, extra_rows=(), extra_bounds=()) -> LPResult:
    """LP over ``base`` in original coordinates."""
    d = c.shape[0]
    A = np.vstack([rows.reshape(-1, d)] + [np.asarray(r, float).reshape(1, d) for r in extra_rows])
    bnd = np.concatenate([bounds.reshape(-1), np.asarray(extra_bounds, dtype=float)])
    if isinstance(base, Simplex):
        res = linprog(c, A, bnd, np.ones((1, d)), [1.0])
        return res
    if isinstance(base, Box):
        # x = lower + y,  0 <= y <= upper - lower
        lo, width = base.lower, base.upper - base.lower
        A_ub = np.vstack([A, np.eye(d)])
        b_ub = np.concatenate([bnd - A @ lo, width])
        res = linprog(c, A_ub, b_ub)
        if res.success:
            res.x = res.x + lo
            res.value = float(c @ res.x)
        return res
    raise InputError(f"unsupported base set {base!r}")


def _generate(c, base, rows, bounds, extra_rows=(), extra_bounds=(), batch: int = 8) -> tuple[LPResult, np.ndarray]:
    """Constraint generation: solve on a growing subset of ``rows``."""
    active = np.zeros(rows.shape[0], dtype=bool)
    while True:
        res = _solve_on_base(c, base, rows[active], bounds[active], extra_rows, extra_bounds)
        if not res.success or rows.shape[0] == 0:
            return res, active
        slack = rows @ res.x - bounds
        slack[active] = -np.inf
        viol = np.flatnonzero(slack > FEAS_TOL)
        if viol.size == 0:
            return res, active
        worst = viol[np.argsort(-slack[viol], kind="stable")[:batch]]
        active[worst] = True


def best_feasible(problem: HindsightProblem, lexicographic: bool = True) -> ComparatorResult:
    """Best decision in hindsight over the problem's feasible region.

    Infeasibility is reported through ``feasible=False`` rather than raised.
    With ``lexicographic`` the lexicographically smallest optimal vertex is
    returned.
    """
    c = problem.objective
    rows, bounds = problem.rows, problem.bounds
    res, active = _generate(c, problem.base, rows, bounds)
    if res.status is LPStatus.INFEASIBLE:
        return ComparatorResult(False, None, None, "infeasible")
    if res.status is LPStatus.UNBOUNDED:
        raise RuntimeError("hindsight LP over a bounded set reported unbounded")
    value = res.value
    x = res.x
    if lexicographic and problem.dim > 1:
        x = _lexicographic_min(c, value, problem, x)
    return ComparatorResult(True, x, value + problem.offset, "optimal")


def _lexicographic_min(c, value, problem, x0):
    d = problem.dim
    extra_rows = [c]
    extra_bounds = [value + FEAS_TOL * max(1.0, abs(value))]
    x = x0
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        res, _ = _generate(e, problem.base, problem.rows, problem.bounds, extra_rows, extra_bounds)
        if not res.success:
            break
        x = res.x
        extra_rows.append(e)
        extra_bounds.append(x[k] + FEAS_TOL)
    return x


def audit_feasibility(problem: HindsightProblem) -> tuple[bool, np.ndarray | None]:
    """Return ``(True, witness)`` if the region is non-empty, else ``(False, None)``.

    The barycenter of the base set is tried first; otherwise a phase-one LP
    supplies a vertex witness.
    """
    center = problem.base.barycenter()
    if problem.violation(center) <= FEAS_TOL:
        return True, center
    res, _ = _generate(np.zeros(problem.dim), problem.base, problem.rows, problem.bounds)
    if res.status is LPStatus.INFEASIBLE:
        return False, None
    return True, res.x


def on_average_value_closed_form(q_hat: float) -> float:
    """Per-round optimum over the average-constraint set of the two-loss adversary.

    ``q_hat`` is the fraction of rounds using the second loss/constraint pair.
    """
    if not 0.0 <= q_hat <= 1.0:
        raise InputError("q_hat must lie in [0, 1]")
    if q_hat <= 0.5:
        return -1.0
    return -0.5 - 1.0 / (2.0 * q_hat) + q_hat


def bandit_problem(table, ctx, C, R, beta: float, mode: str = "every_round") -> HindsightProblem:
    """Hindsight problem over mixtures of experts from ground-truth rounds.

    ``table`` has shape (contexts, N, K); ``ctx`` indexes its first axis per
    round and ``C``, ``R`` hold the full cost and risk vectors. The objective
    is ``sum_t y_t`` with ``y_t = advice_t @ c_t``; every distinct
    ``z_t = advice_t @ r_t`` gives one row ``z_t . w <= beta``.
    """
    table = np.asarray(table, dtype=float)
    ctx = np.asarray(ctx, dtype=np.intp)
    C = np.asarray(C, dtype=float)
    R = np.asarray(R, dtype=float)
    n_ctx, N, K = table.shape
    if C.shape != (ctx.shape[0], K) or R.shape != C.shape:
        raise InputError("cost and risk arrays must be (T, K) and match the contexts")
    cost_by_ctx = np.zeros((n_ctx, K))
    np.add.at(cost_by_ctx, ctx, C)
    objective = np.einsum("cnk,ck->n", table, cost_by_ctx)
    if ctx.shape[0] == 0:
        return HindsightProblem(objective, Simplex(N), np.zeros((0, N)), np.zeros(0), 0.0, mode)
    if mode == "every_round":
        keys = np.unique(np.column_stack([ctx, R + 0.0]), axis=0)
        rows = np.einsum("tnk,tk->tn", table[keys[:, 0].astype(np.intp)], keys[:, 1:])
        rows = np.unique(rows + 0.0, axis=0)
        bounds = np.full(rows.shape[0], float(beta))
    elif mode == "on_average":
        risk_by_ctx = np.zeros((n_ctx, K))
        np.add.at(risk_by_ctx, ctx, R)
        rows = (np.einsum("cnk,ck->n", table, risk_by_ctx) / ctx.shape[0])[None, :]
        bounds = np.array([float(beta)])
    else:
        raise InputError(f"unknown constraint mode {mode!r}")
    return HindsightProblem(objective, Simplex(N), rows, bounds, 0.0, mode)
