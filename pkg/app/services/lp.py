"""
Estimation linear programs for MaxCut and correlation clustering, a dense
two-phase simplex (float or exact rational), the MaxCut dual and the
rounding procedures that turn fractional solutions into cuts / clusterings
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from app.config import settings
from app.errors import InputValidationError, SolverError
from app.models import LpStatus
from app.services.graph import Graph, SignedGraph

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-7
PIVOT_TOLERANCE = 1e-9
MAX_PIVOTS = 100_000
LP_PRECISION = 12

SENSES = ("<=", ">=", "=")


@dataclass
class LpModel:
    """max (or min) c.x  s.t.  A x (sense) b,  lower <= x <= upper"""

    names: List[str]
    lower: np.ndarray
    upper: np.ndarray
    objective: np.ndarray
    A: sparse.csr_matrix
    senses: List[str]
    rhs: np.ndarray
    sense: str = "max"
    constant: float = 0.0
    row_names: Optional[List[str]] = None

    def __post_init__(self):
        nv = len(self.names)
        if not (len(self.lower) == len(self.upper) == len(self.objective) == nv):
            raise InputValidationError("variable arrays differ in length")
        if self.A.shape != (len(self.rhs), nv):
            raise InputValidationError(f"constraint matrix shape {self.A.shape} does not match model")
        if len(self.senses) != len(self.rhs) or any(s not in SENSES for s in self.senses):
            raise InputValidationError("every constraint needs a sense in <=, >=, =")
        if self.sense not in ("max", "min"):
            raise InputValidationError("objective sense must be max or min")
        if np.any(self.lower > self.upper):
            raise InputValidationError("lower bound above upper bound")
        if self.row_names is None:
            self.row_names = [f"c{i}" for i in range(len(self.rhs))]

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.objective @ x) + self.constant

    def violation(self, x: np.ndarray) -> float:
        """Largest bound or constraint violation at x"""
        worst = 0.0
        if self.n_vars:
            worst = max(worst, float(np.max(self.lower - x, initial=0.0)), float(np.max(x - self.upper, initial=0.0)))
        if self.n_rows:
            ax = self.A @ x
            for sense, lhs, b in zip(self.senses, ax, self.rhs):
                if sense == "<=":
                    worst = max(worst, lhs - b)
                elif sense == ">=":
                    worst = max(worst, b - lhs)
                else:
                    worst = max(worst, abs(lhs - b))
        return float(worst)

    def to_lp_format(self) -> str:
        """CPLEX-LP style text dump with fixed precision"""

        def num(x: float) -> str:
            return f"{abs(float(x)):.{LP_PRECISION}f}"

        def linear(coeffs, columns) -> str:
            terms = []
            for c, j in zip(coeffs, columns):
                if c == 0:
                    continue
                sign = "-" if c < 0 else "+"
                terms.append(f"{sign} {num(c)} {self.names[j]}")
            if not terms:
                return "0"
            text = " ".join(terms)
            return text[2:] if text.startswith("+ ") else text

        lines = ["Maximize" if self.sense == "max" else "Minimize"]
        lines.append(" obj: " + linear(self.objective, range(self.n_vars)))
        lines.append("Subject To")
        for i in range(self.n_rows):
            start, end = self.A.indptr[i], self.A.indptr[i + 1]
            body = linear(self.A.data[start:end], self.A.indices[start:end])
            b = self.rhs[i]
            rhs = f"-{num(b)}" if b < 0 else num(b)
            lines.append(f" {self.row_names[i]}: {body} {self.senses[i]} {rhs}")
        lines.append("Bounds")
        for j, name in enumerate(self.names):
            lo, hi = self.lower[j], self.upper[j]
            if np.isinf(lo) and np.isinf(hi):
                lines.append(f" {name} free")
                continue
            lo_text = "-inf" if np.isinf(lo) else (f"-{num(lo)}" if lo < 0 else num(lo))
            hi_text = "+inf" if np.isinf(hi) else (f"-{num(hi)}" if hi < 0 else num(hi))
            lines.append(f" {lo_text} <= {name} <= {hi_text}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    values: np.ndarray
    objective: float
    status: LpStatus
    pivots: int = 0
    exact_objective: Optional[Fraction] = None

    @property
    def optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


@dataclass
class EstimationLpMaxcut:
    view: Graph
    rho: np.ndarray
    model: LpModel

    @property
    def n(self) -> int:
        return self.view.n


@dataclass
class EstimationLpCC:
    view: SignedGraph
    k: int
    rho: np.ndarray
    model: LpModel = field(repr=False)

    @property
    def n(self) -> int:
        return self.view.n


# Model construction
def _model_from_coo(names, lower, upper, objective, rows, cols, data, senses, rhs, **kw) -> LpModel:
    A = sparse.csr_matrix((data, (rows, cols)), shape=(len(rhs), len(names)))
    A.sum_duplicates()
    A.sort_indices()
    return LpModel(
        names=names,
        lower=np.asarray(lower, dtype=float),
        upper=np.asarray(upper, dtype=float),
        objective=np.asarray(objective, dtype=float),
        A=A,
        senses=list(senses),
        rhs=np.asarray(rhs, dtype=float),
        **kw,
    )


def build_maxcut_lp(view: Graph, rho) -> EstimationLpMaxcut:
    """Variables x (box [0,1]), s, t >= 0; rho_i - t_i <= sum_j w_ij x_j <= rho_i + s_i"""
    rho = np.asarray(rho, dtype=float).reshape(-1)
    n = view.n
    if len(rho) != n:
        raise InputValidationError(f"rho has {len(rho)} entries, view has {n} vertices")
    adj = view.adjacency.tocoo()
    names = [f"x{i}" for i in range(n)] + [f"s{i}" for i in range(n)] + [f"t{i}" for i in range(n)]
    lower = np.zeros(3 * n)
    upper = np.concatenate([np.ones(n), np.full(2 * n, np.inf)])
    objective = np.concatenate([view.degrees - rho, -np.ones(2 * n)])
    idx = np.arange(n)
    # row i:      sum_j w_ij x_j - s_i <= rho_i
    # row n + i:  sum_j w_ij x_j + t_i >= rho_i
    rows = np.concatenate([adj.row, idx, n + adj.row, n + idx])
    cols = np.concatenate([adj.col, n + idx, adj.col, 2 * n + idx])
    data = np.concatenate([adj.data, -np.ones(n), adj.data, np.ones(n)])
    model = _model_from_coo(
        names, lower, upper, objective, rows, cols, data,
        ["<="] * n + [">="] * n, np.concatenate([rho, rho]),
        row_names=[f"upper{i}" for i in range(n)] + [f"lower{i}" for i in range(n)],
    )
    return EstimationLpMaxcut(view=view, rho=rho, model=model)


def build_cc_lp(view: SignedGraph, k: int, rho) -> EstimationLpCC:
    """Variables x_il, s_il, t_il with sum_l x_il = 1; objective halved so each edge counts once"""
    if k < 1:
        raise InputValidationError(f"k must be at least 1, got {k}")
    n = view.n
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (n, k):
        raise InputValidationError(f"rho must be {n}x{k}, got {rho.shape}")
    nk = n * k
    adj = view.adjacency.tocoo()
    names = (
        [f"x{i}_{l}" for i in range(n) for l in range(k)]
        + [f"s{i}_{l}" for i in range(n) for l in range(k)]
        + [f"t{i}_{l}" for i in range(n) for l in range(k)]
    )
    lower = np.zeros(3 * nk)
    upper = np.concatenate([np.ones(nk), np.full(2 * nk, np.inf)])
    objective = 0.5 * np.concatenate([(rho + view.d_minus[:, None]).reshape(-1), -np.ones(2 * nk)])

    labels = np.arange(k)
    # row (i, l):      sum_j eta_ij x_jl - s_il <= rho_il
    # row nk + (i, l): sum_j eta_ij x_jl + t_il >= rho_il
    edge_rows = (adj.row[:, None] * k + labels[None, :]).reshape(-1)
    edge_cols = (adj.col[:, None] * k + labels[None, :]).reshape(-1)
    edge_data = np.repeat(adj.data, k)
    flat = np.arange(nk)
    simplex_rows = 2 * nk + np.repeat(np.arange(n), k)
    rows = np.concatenate([edge_rows, flat, nk + edge_rows, nk + flat, simplex_rows])
    cols = np.concatenate([edge_cols, nk + flat, edge_cols, 2 * nk + flat, flat])
    data = np.concatenate([edge_data, -np.ones(nk), edge_data, np.ones(nk), np.ones(nk)])
    rhs = np.concatenate([rho.reshape(-1), rho.reshape(-1), np.ones(n)])
    model = _model_from_coo(
        names, lower, upper, objective, rows, cols, data,
        ["<="] * nk + [">="] * nk + ["="] * n, rhs,
        row_names=(
            [f"upper{i}_{l}" for i in range(n) for l in range(k)]
            + [f"lower{i}_{l}" for i in range(n) for l in range(k)]
            + [f"simplex{i}" for i in range(n)]
        ),
    )
    return EstimationLpCC(view=view, k=k, rho=rho, model=model)


def build_dual_maxcut(view: Graph, rho) -> LpModel:
    """min sum_i u_i + rho_i z_i  s.t.  u_i + sum_j w_ij z_j >= d_i - rho_i, u >= 0, -1 <= z <= 1"""
    rho = np.asarray(rho, dtype=float).reshape(-1)
    n = view.n
    if len(rho) != n:
        raise InputValidationError(f"rho has {len(rho)} entries, view has {n} vertices")
    adj = view.adjacency.tocoo()
    idx = np.arange(n)
    names = [f"u{i}" for i in range(n)] + [f"z{i}" for i in range(n)]
    lower = np.concatenate([np.zeros(n), -np.ones(n)])
    upper = np.concatenate([np.full(n, np.inf), np.ones(n)])
    objective = np.concatenate([np.ones(n), rho])
    rows = np.concatenate([idx, adj.row])
    cols = np.concatenate([idx, n + adj.col])
    data = np.concatenate([np.ones(n), adj.data])
    return _model_from_coo(
        names, lower, upper, objective, rows, cols, data,
        [">="] * n, view.degrees - rho, sense="min",
        row_names=[f"dual{i}" for i in range(n)],
    )


def optimal_u(view: Graph, rho, z) -> np.ndarray:
    """Best u for a fixed z in the MaxCut dual"""
    return np.maximum(0.0, view.degrees - np.asarray(rho, dtype=float) - view.adjacency @ np.asarray(z, dtype=float))


# Dense two-phase simplex
class _StandardForm:
    """x = offset + M y with y >= 0; bound rows appended to the constraints"""

    def __init__(self, model: LpModel, exact: bool):
        self.exact = exact
        nv = model.n_vars
        cols = []
        offset = np.zeros(nv)
        extra_rows = []
        for j in range(nv):
            lo, hi = model.lower[j], model.upper[j]
            if np.isfinite(lo):
                offset[j] = lo
                cols.append((j, 1.0))
                if np.isfinite(hi):
                    extra_rows.append((len(cols) - 1, hi - lo))
            elif np.isfinite(hi):
                offset[j] = hi
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        self.offset = offset
        self.M = np.zeros((nv, len(cols)))
        for c, (j, sign) in enumerate(cols):
            self.M[j, c] = sign

        A = model.A.toarray() @ self.M if model.n_rows else np.zeros((0, len(cols)))
        b = model.rhs - (model.A @ offset if model.n_rows else 0.0)
        senses = list(model.senses)
        bound_rows = np.zeros((len(extra_rows), len(cols)))
        for r, (c, width) in enumerate(extra_rows):
            bound_rows[r, c] = 1.0
        self.A = np.vstack([A, bound_rows])
        self.b = np.concatenate([np.asarray(b, dtype=float).reshape(-1), [w for _, w in extra_rows]])
        self.senses = senses + ["<="] * len(extra_rows)
        sign = -1.0 if model.sense == "min" else 1.0
        self.c = sign * (model.objective @ self.M)
        self.c0 = sign * float(model.objective @ offset)


def _convert(array: np.ndarray, exact: bool) -> np.ndarray:
    if not exact:
        return np.asarray(array, dtype=float)
    out = np.empty(array.shape, dtype=object)
    flat_in = np.asarray(array, dtype=float).reshape(-1)
    flat_out = out.reshape(-1)
    for i, value in enumerate(flat_in):
        flat_out[i] = Fraction(value)
    return out


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    pivot_row = T[row] / T[row, col]
    T -= np.outer(T[:, col], pivot_row)
    T[row] = pivot_row


def _iterate(T: np.ndarray, basis: List[int], n_cols: int, tol, phase: str) -> Tuple[str, int]:
    """Bland's rule pivots on rows 1.. of T until optimal or unbounded"""
    pivots = 0
    while True:
        candidates = np.flatnonzero(T[0, :n_cols] < -tol)
        if len(candidates) == 0:
            return "optimal", pivots
        col = int(candidates[0])
        best_row, best_ratio = None, None
        for i in range(1, T.shape[0]):
            a = T[i, col]
            if a > tol:
                ratio = T[i, -1] / a
                if (
                    best_row is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[i - 1] < basis[best_row - 1])
                ):
                    best_row, best_ratio = i, ratio
        if best_row is None:
            return "unbounded", pivots
        _pivot(T, best_row, col)
        basis[best_row - 1] = col
        pivots += 1
        if pivots > MAX_PIVOTS:
            raise SolverError(f"simplex exceeded {MAX_PIVOTS} pivots in {phase}")


def solve_lp(model: LpModel, tol: Optional[float] = None, exact: bool = False) -> LpSolution:
    """Solve with a dense tableau; exact mode runs the same pivots over Fractions"""
    tol = settings.lp_tolerance if tol is None else tol
    pivot_tol = 0 if exact else PIVOT_TOLERANCE
    std = _StandardForm(model, exact)
    m, n_std = std.A.shape

    A = std.A.copy()
    b = std.b.copy()
    senses = list(std.senses)
    slack_cols = []
    n_slack = sum(1 for s in senses if s != "=")
    S = np.zeros((m, n_slack))
    k = 0
    for i, s in enumerate(senses):
        if s == "=":
            slack_cols.append(None)
            continue
        S[i, k] = 1.0 if s == "<=" else -1.0
        slack_cols.append(n_std + k)
        k += 1
    full = np.hstack([A, S])
    flip = b < 0
    full[flip] *= -1
    b[flip] *= -1

    basis: List[int] = [-1] * m
    art_rows = []
    for i in range(m):
        sc = slack_cols[i]
        if sc is not None and full[i, sc] > 0:
            basis[i] = sc
        else:
            art_rows.append(i)
    n_real = n_std + n_slack
    n_art = len(art_rows)
    Art = np.zeros((m, n_art))
    for a, i in enumerate(art_rows):
        Art[i, a] = 1.0
        basis[i] = n_real + a

    T = np.zeros((m + 1, n_real + n_art + 1))
    T[1:, :n_real] = full
    T[1:, n_real:n_real + n_art] = Art
    T[1:, -1] = b
    T = _convert(T, exact)
    zero = Fraction(0) if exact else 0.0

    pivots = 0
    if n_art:
        for i in art_rows:
            T[0, :n_real] -= T[i + 1, :n_real]
            T[0, -1] -= T[i + 1, -1]
        state, count = _iterate(T, basis, n_real + n_art, pivot_tol, "phase 1")
        pivots += count
        if T[0, -1] < -(tol if not exact else 0):
            logger.debug("phase 1 ended with infeasibility %s", T[0, -1])
            return LpSolution(np.full(model.n_vars, np.nan), float("nan"), LpStatus.INFEASIBLE, pivots)
        # drive artificials out of the basis, dropping redundant rows
        keep_rows = []
        for r in range(m):
            if basis[r] >= n_real:
                nonzero = [j for j in range(n_real) if abs(T[r + 1, j]) > pivot_tol]
                if nonzero:
                    _pivot(T, r + 1, nonzero[0])
                    basis[r] = nonzero[0]
                    pivots += 1
                    keep_rows.append(r)
            else:
                keep_rows.append(r)
        T = T[[0] + [r + 1 for r in keep_rows]][:, list(range(n_real)) + [T.shape[1] - 1]]
        basis = [basis[r] for r in keep_rows]

    # phase 2 objective row: z - c.y = c0
    T[0, :] = zero
    c = _convert(std.c, exact)
    T[0, :n_std] = -c
    T[0, -1] = _convert(np.array([std.c0]), exact)[0]
    for r, col in enumerate(basis):
        if T[0, col] != 0:
            T[0] -= T[0, col] * T[r + 1]
    state, count = _iterate(T, basis, n_real, pivot_tol, "phase 2")
    pivots += count
    logger.debug("simplex finished after %d pivots (%s)", pivots, state)
    if state == "unbounded":
        return LpSolution(np.full(model.n_vars, np.nan), float("inf"), LpStatus.UNBOUNDED, pivots)

    y = [zero] * n_real
    for r, col in enumerate(basis):
        y[col] = T[r + 1, -1]
    y_std = y[:n_std]
    if exact:
        x_exact = [
            Fraction(std.offset[j])
            + sum((Fraction(std.M[j, c]) * y_std[c] for c in range(n_std) if std.M[j, c]), Fraction(0))
            for j in range(model.n_vars)
        ]
        values = np.array([float(v) for v in x_exact])
        objective_exact = Fraction(model.constant) + sum(
            (Fraction(model.objective[j]) * x_exact[j] for j in range(model.n_vars)), Fraction(0)
        )
        objective = float(objective_exact)
    else:
        values = std.offset + std.M @ np.array(y_std, dtype=float)
        objective_exact = None
        objective = model.evaluate(values)

    violation = model.violation(values)
    if violation > tol * (1 + float(np.max(np.abs(model.rhs), initial=0.0))):
        raise SolverError(f"simplex returned a point violating the model by {violation:.3g}")
    return LpSolution(values, objective, LpStatus.OPTIMAL, pivots, objective_exact)


def solve_or_raise(model: LpModel, tol: Optional[float] = None, exact: bool = False) -> LpSolution:
    """solve_lp for models that are feasible and bounded by construction"""
    solution = solve_lp(model, tol=tol, exact=exact)
    if not solution.optimal:
        raise SolverError(f"estimation LP reported {solution.status.value}")
    return solution


# Direct evaluators
def lp_objective_at(lp, x) -> float:
    """LP objective at x with the optimal s, t substituted"""
    if isinstance(lp, EstimationLpMaxcut):
        x = np.asarray(x, dtype=float).reshape(-1)
        inflow = lp.view.adjacency @ x
        return float(np.sum(x * (lp.view.degrees - lp.rho) - np.abs(lp.rho - inflow)))
    x = np.asarray(x, dtype=float).reshape(lp.n, lp.k)
    inflow = lp.view.adjacency @ x
    body = x * (lp.rho + lp.view.d_minus[:, None]) - np.abs(lp.rho - inflow)
    return 0.5 * float(body.sum())


def quadratic_value(view: Graph, x) -> float:
    """Q(x) = sum_i x_i (d_i - sum_j w_ij x_j); the cut value on integral points"""
    x = np.asarray(x, dtype=float).reshape(-1)
    return float(x @ view.degrees - x @ (view.adjacency @ x))


def cc_form_value(view: SignedGraph, x) -> float:
    """C^- + sum over edges of eta_ij <x_i, x_j>"""
    x = np.asarray(x, dtype=float).reshape(view.n, -1)
    return view.C_minus + 0.5 * float(np.sum(x * (view.adjacency @ x)))


# Rounding
def round_to_cut(view: Graph, x) -> Tuple[np.ndarray, float]:
    """Fix coordinates one at a time to the 0/1 value maximizing Q

    On indifference an integral coordinate keeps its value and a fractional one goes to 0.
    """
    y = np.array(x, dtype=float).reshape(-1)
    if len(y) != view.n:
        raise InputValidationError(f"x has {len(y)} entries, view has {view.n} vertices")
    adj = view.adjacency
    inflow = adj @ y
    for i in range(view.n):
        gain = view.degrees[i] - 2 * inflow[i]
        if gain > 0:
            new = 1.0
        elif gain < 0:
            new = 0.0
        else:
            new = y[i] if y[i] in (0.0, 1.0) else 0.0
        if new != y[i]:
            start, end = adj.indptr[i], adj.indptr[i + 1]
            inflow[adj.indices[start:end]] += (new - y[i]) * adj.data[start:end]
            y[i] = new
    assignment = y.astype(np.int64)
    return assignment, quadratic_value(view, y)


def round_to_clustering(view: SignedGraph, k: int, x) -> Tuple[np.ndarray, float]:
    """Move each row of x to the best vertex of the simplex, smallest label on ties"""
    x = np.array(x, dtype=float)
    if x.shape != (view.n, k):
        raise InputValidationError(f"x must be {view.n}x{k}, got {x.shape}")
    sums = x.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1) > ROW_SUM_TOLERANCE)
    if len(bad):
        raise InputValidationError(f"row {int(bad[0])} of x sums to {sums[bad[0]]:.9g}, not 1")
    adj = view.adjacency
    pull = adj @ x
    for i in range(view.n):
        scores = pull[i]
        best = int(np.argmax(scores))
        current = np.flatnonzero(x[i] == 1.0)
        if len(current) == 1 and scores[current[0]] == scores[best]:
            best = int(current[0])
        row = np.zeros(k)
        row[best] = 1.0
        delta = row - x[i]
        if np.any(delta):
            start, end = adj.indptr[i], adj.indptr[i + 1]
            pull[adj.indices[start:end]] += adj.data[start:end, None] * delta[None, :]
            x[i] = row
    labels = np.argmax(x, axis=1).astype(np.int64)
    return labels, cc_form_value(view, x)
