"""Solver-agnostic LMI problem representation and the conic-solver bridge.

Decision vector layout
----------------------
Variables are packed into one real vector in declaration order:

* a scalar variable occupies one slot;
* a ``d x d`` symmetric variable occupies ``d (d + 1) / 2`` slots holding
  the raw upper-triangular entries in column order, i.e. ``(0,0), (0,1),
  (1,1), (0,2), (1,2), (2,2), ...``;
* a general ``r x c`` variable occupies ``r c`` slots in row-major order.

Each LMI ``F(x) = F0 + sum_j x_j F_j >= 0`` is passed to the solver as the
scaled vectorization ``svec(F(x))`` using the same upper-triangular column
order, off-diagonal entries multiplied by ``sqrt(2)`` so that
``svec(A) . svec(B) = trace(A B)``.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import matops
from .errors import MalformedProblem, SolverUnavailable

SOLVER_ENV = "QMI_SDP_SOLVER"
VIOLATION_TOL = 1e-6


@dataclass(frozen=True)
class SolverSettings:
    tol_feas: float = 1e-8
    tol_gap_rel: float = 1e-8
    tol_gap_abs: float = 1e-8
    max_iter: int = 200
    solver: str | None = None  # falls back to $QMI_SDP_SOLVER, then "clarabel"
    verbose: bool = False


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_TROUBLE = "numerical_trouble"


class Affine:
    """Affine matrix expression ``const + sum_k x_k coef[k]`` in the decision variables."""

    __array_ufunc__ = None  # make ndarray @ Affine dispatch to __rmatmul__

    def __init__(self, const, coefs: dict | None = None):
        self.const = matops.as_matrix(const).copy()
        self.coefs = coefs if coefs is not None else {}

    @property
    def shape(self) -> tuple:
        return self.const.shape

    @property
    def T(self) -> "Affine":
        return Affine(self.const.T, {k: c.T for k, c in self.coefs.items()})

    @staticmethod
    def lift(x) -> "Affine":
        return x if isinstance(x, Affine) else Affine(x)

    def _combine(self, other, sign: float) -> "Affine":
        other = Affine.lift(other)
        if other.shape != self.shape:
            if other.shape == (1, 1) and not other.coefs:
                other = Affine(np.full(self.shape, other.const[0, 0]))
            else:
                raise MalformedProblem(f"shape mismatch {self.shape} vs {other.shape}")
        coefs = dict(self.coefs)
        for k, c in other.coefs.items():
            coefs[k] = coefs[k] + sign * c if k in coefs else sign * c
        return Affine(self.const + sign * other.const, coefs)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __radd__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        if np.isscalar(other):
            return Affine(self.const * other, {k: c * other for k, c in self.coefs.items()})
        M = matops.as_matrix(other)
        if self.shape != (1, 1):
            raise MalformedProblem("only 1x1 expressions may scale a matrix")
        return Affine(self.const[0, 0] * M, {k: c[0, 0] * M for k, c in self.coefs.items()})

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Affine):
            raise MalformedProblem("product of two affine expressions is not affine")
        M = matops.as_matrix(other)
        return Affine(self.const @ M, {k: c @ M for k, c in self.coefs.items()})

    def __rmatmul__(self, other):
        M = matops.as_matrix(other)
        return Affine(M @ self.const, {k: M @ c for k, c in self.coefs.items()})

    def __getitem__(self, idx):
        """Sub-block selection; ``idx`` must be a pair of slices."""
        rs, cs = idx
        return Affine(self.const[rs, cs], {k: c[rs, cs] for k, c in self.coefs.items()})

    def value(self, x: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        for k, c in self.coefs.items():
            out += x[k] * c
        return out


def bmat(blocks: Sequence[Sequence]) -> Affine:
    """Block matrix assembly; ``None`` entries are zero blocks sized from their row/column."""
    rows = len(blocks)
    cols = len(blocks[0])
    heights = [None] * rows
    widths = [None] * cols
    for i, row in enumerate(blocks):
        if len(row) != cols:
            raise MalformedProblem("ragged block matrix")
        for j, b in enumerate(row):
            if b is None:
                continue
            shape = b.shape if isinstance(b, Affine) else matops.as_matrix(b).shape
            if heights[i] is None:
                heights[i] = shape[0]
            if widths[j] is None:
                widths[j] = shape[1]
            if (heights[i], widths[j]) != shape:
                raise MalformedProblem(f"block ({i},{j}) has shape {shape}")
    if None in heights or None in widths:
        raise MalformedProblem("every block row and column needs at least one sized block")
    r_off = np.r_[0, np.cumsum(heights)]
    c_off = np.r_[0, np.cumsum(widths)]
    const = np.zeros((r_off[-1], c_off[-1]))
    coefs: dict = {}
    for i, row in enumerate(blocks):
        for j, b in enumerate(row):
            if b is None:
                continue
            rs = slice(r_off[i], r_off[i + 1])
            cs = slice(c_off[j], c_off[j + 1])
            b = Affine.lift(b)
            const[rs, cs] = b.const
            for k, c in b.coefs.items():
                if k not in coefs:
                    coefs[k] = np.zeros_like(const)
                coefs[k][rs, cs] = c
    return Affine(const, coefs)


def sym(expr: Affine) -> Affine:
    return 0.5 * (expr + expr.T)


@dataclass
class _VarInfo:
    name: str
    kind: str  # "scalar" | "sym" | "mat"
    shape: tuple
    offset: int
    size: int


@dataclass
class LmiProblem:
    """Container of variables, LMI constraints ``F(x) >= 0`` and a linear objective."""

    variables: list = field(default_factory=list)
    lower_bounds: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    constraint_names: list = field(default_factory=list)
    objective: Affine | None = None
    _nvar: int = 0

    def _new(self, name: str, kind: str, shape: tuple, size: int) -> _VarInfo:
        if any(v.name == name for v in self.variables):
            raise MalformedProblem(f"duplicate variable {name!r}")
        info = _VarInfo(name, kind, shape, self._nvar, size)
        self.variables.append(info)
        self._nvar += size
        return info

    @property
    def num_vars(self) -> int:
        return self._nvar

    def scalar(self, name: str, lower: float | None = None) -> Affine:
        info = self._new(name, "scalar", (1, 1), 1)
        if lower is not None:
            self.lower_bounds[info.offset] = float(lower)
        return Affine(np.zeros((1, 1)), {info.offset: np.ones((1, 1))})

    def symmetric(self, name: str, dim: int, psd: bool = False) -> Affine:
        info = self._new(name, "sym", (dim, dim), dim * (dim + 1) // 2)
        coefs = {}
        k = info.offset
        for j in range(dim):
            for i in range(j + 1):
                E = np.zeros((dim, dim))
                E[i, j] = E[j, i] = 1.0
                coefs[k] = E
                k += 1
        expr = Affine(np.zeros((dim, dim)), coefs)
        if psd:
            self.add_lmi(expr, f"{name} >= 0")
        return expr

    def matrix(self, name: str, rows: int, cols: int) -> Affine:
        info = self._new(name, "mat", (rows, cols), rows * cols)
        coefs = {}
        for i in range(rows):
            for j in range(cols):
                E = np.zeros((rows, cols))
                E[i, j] = 1.0
                coefs[info.offset + i * cols + j] = E
        return Affine(np.zeros((rows, cols)), coefs)

    def add_lmi(self, expr: Affine, name: str | None = None) -> None:
        expr = Affine.lift(expr)
        r, c = expr.shape
        if r != c:
            raise MalformedProblem(f"LMI must be square, got {expr.shape}")
        scale = max(1.0, np.max(np.abs(expr.const)), *(np.max(np.abs(v)) for v in expr.coefs.values()))
        asym = max([np.max(np.abs(expr.const - expr.const.T))] + [np.max(np.abs(v - v.T)) for v in expr.coefs.values()])
        if asym > 1e-9 * scale:
            raise MalformedProblem(f"LMI {name!r} is not symmetric (asymmetry {asym:.2e})")
        self.constraints.append(sym(expr))
        self.constraint_names.append(name or f"lmi{len(self.constraints) - 1}")

    def minimize(self, expr) -> None:
        expr = Affine.lift(expr)
        if expr.shape != (1, 1):
            raise MalformedProblem("objective must be scalar")
        self.objective = expr

    def unpack(self, x: np.ndarray) -> dict:
        """Map a flat decision vector to ``{name: value}``."""
        out = {}
        for v in self.variables:
            seg = x[v.offset:v.offset + v.size]
            if v.kind == "scalar":
                out[v.name] = float(seg[0])
            elif v.kind == "sym":
                d = v.shape[0]
                M = np.zeros((d, d))
                k = 0
                for j in range(d):
                    for i in range(j + 1):
                        M[i, j] = M[j, i] = seg[k]
                        k += 1
                out[v.name] = M
            else:
                out[v.name] = seg.reshape(v.shape).copy()
        return out

    def pack(self, assignment: dict) -> np.ndarray:
        x = np.zeros(self._nvar)
        for v in self.variables:
            if v.name not in assignment:
                raise MalformedProblem(f"assignment misses variable {v.name!r}")
            val = np.asarray(assignment[v.name], dtype=float)
            if v.kind == "scalar":
                x[v.offset] = float(val.reshape(-1)[0])
            elif v.kind == "sym":
                d = v.shape[0]
                val = val.reshape(d, d)
                k = v.offset
                for j in range(d):
                    for i in range(j + 1):
                        x[k] = 0.5 * (val[i, j] + val[j, i])
                        k += 1
            else:
                x[v.offset:v.offset + v.size] = val.reshape(-1)
        return x


@dataclass
class SdpSolution:
    status: Status
    values: dict
    objective_value: float
    max_constraint_violation: float
    x: np.ndarray
    solver: str = ""
    raw_status: str = ""
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL

    def value(self, expr: Affine) -> np.ndarray:
        return Affine.lift(expr).value(self.x)


def svec(M: np.ndarray) -> np.ndarray:
    d = M.shape[0]
    iu, ju = _triu_colmajor(d)
    scale = np.where(iu == ju, 1.0, np.sqrt(2.0))
    return M[iu, ju] * scale


_TRIU_CACHE: dict = {}


def _triu_colmajor(d: int):
    if d not in _TRIU_CACHE:
        ii, jj = [], []
        for j in range(d):
            for i in range(j + 1):
                ii.append(i)
                jj.append(j)
        _TRIU_CACHE[d] = (np.array(ii, dtype=int), np.array(jj, dtype=int))
    return _TRIU_CACHE[d]


def _constraint_margins(problem: LmiProblem, x: np.ndarray) -> list:
    margins = [matops.min_eig(F.value(x)) for F in problem.constraints]
    margins += [x[k] - lb for k, lb in problem.lower_bounds.items()]
    return margins


def _constraint_scales(problem: LmiProblem, x: np.ndarray) -> list:
    """Magnitude of each constraint's terms at ``x``: ``|F0| + sum_k |x_k| |F_k|`` (max-abs norms)."""
    scales = []
    for F in problem.constraints:
        s = float(np.max(np.abs(F.const))) if F.const.size else 0.0
        s += sum(abs(x[k]) * float(np.max(np.abs(c))) for k, c in F.coefs.items())
        scales.append(s)
    scales += [max(abs(x[k]), abs(lb)) for k, lb in problem.lower_bounds.items()]
    return scales


def relative_violation(problem: LmiProblem, x: np.ndarray) -> float:
    """Largest constraint violation, each divided by ``max(1, scale)`` of its own terms."""
    margins = _constraint_margins(problem, x)
    scales = _constraint_scales(problem, x)
    return max((max(0.0, -m) / max(1.0, s) for m, s in zip(margins, scales)), default=0.0)


def feasibility_margin(problem: LmiProblem, assignment) -> float:
    """Smallest eigenvalue over all constraints at ``assignment`` (dict or flat vector)."""
    x = assignment if isinstance(assignment, np.ndarray) else problem.pack(assignment)
    if x.shape != (problem.num_vars,):
        raise MalformedProblem("assignment has the wrong length")
    margins = _constraint_margins(problem, x)
    return float(min(margins)) if margins else float("inf")


def lmi_margin(problem: LmiProblem, assignment) -> float:
    """Smallest eigenvalue over the LMI constraints only (simple bounds excluded)."""
    x = assignment if isinstance(assignment, np.ndarray) else problem.pack(assignment)
    return float(min((matops.min_eig(F.value(x)) for F in problem.constraints), default=np.inf))


SOLVERS = ("clarabel", "cvxopt")


def selected_solver(settings: SolverSettings) -> str:
    return (settings.solver or os.environ.get(SOLVER_ENV) or "clarabel").lower()


def solve(problem: LmiProblem, settings: SolverSettings | None = None) -> SdpSolution:
    settings = settings or SolverSettings()
    if problem.num_vars == 0:
        raise MalformedProblem("problem has no variables")
    name = selected_solver(settings)
    if name == "clarabel":
        x, raw, iters, status = _solve_clarabel(problem, settings)
    elif name == "cvxopt":
        x, raw, iters, status = _solve_cvxopt(problem, settings)
    else:
        raise SolverUnavailable(f"unknown solver {name!r}")
    if x is None or not np.all(np.isfinite(x)):
        x = np.zeros(problem.num_vars)
        violation = float("inf")
    else:
        # interior-point iterates may sit a rounding error below a simple bound
        for k, lb in problem.lower_bounds.items():
            x[k] = max(x[k], lb)
        violation = max(0.0, -feasibility_margin(problem, x))
    # solvers stop on relative residuals; judge the returned point the same way
    if status is Status.OPTIMAL and relative_violation(problem, x) > VIOLATION_TOL:
        status = Status.NUMERICAL_TROUBLE
    obj = float(problem.objective.value(x)[0, 0]) if problem.objective is not None else 0.0
    return SdpSolution(status, problem.unpack(x), obj, violation, x, name, raw, iters)


def _objective_vector(problem: LmiProblem) -> np.ndarray:
    q = np.zeros(problem.num_vars)
    if problem.objective is not None:
        for k, c in problem.objective.coefs.items():
            q[k] = c[0, 0]
    return q


def _solve_clarabel(problem: LmiProblem, settings: SolverSettings):
    try:
        import clarabel
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise SolverUnavailable("clarabel is not installed") from exc

    nv = problem.num_vars
    rows, cols, vals, b, cones = [], [], [], [], []
    r0 = 0
    if problem.lower_bounds:
        # -x_k + s = -lb, s >= 0
        for i, (k, lb) in enumerate(sorted(problem.lower_bounds.items())):
            rows.append(r0 + i)
            cols.append(k)
            vals.append(-1.0)
            b.append(-lb)
        r0 += len(problem.lower_bounds)
        cones.append(clarabel.NonnegativeConeT(len(problem.lower_bounds)))
    for F in problem.constraints:
        d = F.shape[0]
        m = d * (d + 1) // 2
        b.extend(svec(F.const))
        for k, c in F.coefs.items():
            v = svec(c)
            nz = np.nonzero(v)[0]
            rows.extend(r0 + nz)
            cols.extend([k] * len(nz))
            vals.extend(-v[nz])
        r0 += m
        cones.append(clarabel.PSDTriangleConeT(d))
    A = sp.csc_matrix((vals, (rows, cols)), shape=(r0, nv))
    P = sp.csc_matrix((nv, nv))
    s = clarabel.DefaultSettings()
    s.verbose = settings.verbose
    s.tol_feas = settings.tol_feas
    s.tol_gap_rel = settings.tol_gap_rel
    s.tol_gap_abs = settings.tol_gap_abs
    s.max_iter = settings.max_iter
    s.max_threads = 1
    sol = clarabel.DefaultSolver(P, _objective_vector(problem), A, np.asarray(b, dtype=float), cones, s).solve()
    raw = str(sol.status)
    if sol.status == clarabel.SolverStatus.Solved or sol.status == clarabel.SolverStatus.AlmostSolved:
        status = Status.OPTIMAL
    elif sol.status in (clarabel.SolverStatus.PrimalInfeasible, clarabel.SolverStatus.AlmostPrimalInfeasible):
        status = Status.INFEASIBLE
    else:
        status = Status.NUMERICAL_TROUBLE
    return np.asarray(sol.x, dtype=float), raw, int(sol.iterations), status


def _solve_cvxopt(problem: LmiProblem, settings: SolverSettings):
    try:
        import cvxopt
        from cvxopt import solvers
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise SolverUnavailable("cvxopt is not installed") from exc

    nv = problem.num_vars
    c = cvxopt.matrix(_objective_vector(problem))
    Gl = hl = None
    if problem.lower_bounds:
        items = sorted(problem.lower_bounds.items())
        G = np.zeros((len(items), nv))
        for i, (k, _) in enumerate(items):
            G[i, k] = -1.0
        Gl = cvxopt.matrix(G)
        hl = cvxopt.matrix(np.array([-lb for _, lb in items]))
    Gs, hs = [], []
    for F in problem.constraints:
        d = F.shape[0]
        G = np.zeros((d * d, nv))
        for k, coef in F.coefs.items():
            G[:, k] = -coef.reshape(-1, order="F")
        Gs.append(cvxopt.matrix(G))
        hs.append(cvxopt.matrix(F.const))
    opts = {
        "show_progress": settings.verbose,
        "abstol": settings.tol_gap_abs,
        "reltol": settings.tol_gap_rel,
        "feastol": settings.tol_feas,
        "maxiters": settings.max_iter,
    }
    try:
        res = solvers.sdp(c, Gl=Gl, hl=hl, Gs=Gs, hs=hs, options=opts)
    except ValueError as exc:
        raise MalformedProblem(f"cvxopt rejected the problem: {exc}") from exc
    raw = res["status"]
    x = np.array(res["x"]).reshape(-1) if res["x"] is not None else None
    if raw == "optimal":
        status = Status.OPTIMAL
    elif raw == "primal infeasible":
        status = Status.INFEASIBLE
    else:
        status = Status.NUMERICAL_TROUBLE
    return x, raw, int(res.get("iterations", 0)), status
