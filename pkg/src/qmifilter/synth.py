"""Robust H-infinity estimator synthesis for plants known only through QMIs.

The unknown plant ``Delta = [[A, B_p], [C_y, D_yp]]`` is pulled out as a
static uncertainty ``w = Delta z`` with ``z = [x; w_p]``. Each QMI on a row
block of ``Delta`` adds a term ``tau_i T_i^T pi_i T_i`` to a multiplier ``P``
with ``[Delta; I]^T P [Delta; I] >= 0`` on the uncertainty set. Estimator,
Lyapunov matrix, multipliers and ``gamma^2`` enter one SDP: the bounded-real
inequality with an S-procedure term for the uncertainty channel, made affine
by the usual change of estimator variables.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import analysis, matops, sdp
from .analysis import Estimator
from .errors import (
    DimensionMismatch,
    Infeasible,
    MalformedProblem,
    NegativeMultiplier,
    SolverFailure,
    SolverUnavailable,
    Unbounded,
    Unstable,
)
from .qmi import MultiplierVector, Orientation, Qmi, bounded_center, center_and_radius


class Block(enum.Enum):
    """Row block of ``Delta`` a QMI constrains."""

    AB = "ab"
    CD = "cd"


@dataclass(frozen=True)
class UncertainPlant:
    """Known output map ``(C_p, D_p)`` plus QMIs on ``[A, B_p]`` and ``[C_y, D_yp]``.

    ``extra_qmis`` holds ``(Block, Qmi)`` pairs. ``output_map_known=False`` is
    reserved for plants whose ``C_p, D_p`` are also uncertain; synthesis
    rejects it.
    """

    C_p: np.ndarray
    D_p: np.ndarray
    qmi_ab: Qmi
    qmi_cd: Qmi
    extra_qmis: tuple = ()
    output_map_known: bool = True

    def __post_init__(self):
        C_p = matops.as_matrix(self.C_p)
        D_p = matops.as_matrix(self.D_p)
        if D_p.shape[0] != C_p.shape[0]:
            raise DimensionMismatch(f"C_p {C_p.shape} and D_p {D_p.shape} disagree on output size")
        object.__setattr__(self, "C_p", C_p)
        object.__setattr__(self, "D_p", D_p)
        extras = tuple((Block(b), q) for b, q in self.extra_qmis)
        object.__setattr__(self, "extra_qmis", extras)
        n_x, m_p = C_p.shape[1], D_p.shape[1]
        p_y = self.qmi_cd.p
        for b, q in self.qmis:
            if q.orientation is not Orientation.PRIMAL:
                raise DimensionMismatch("plant QMIs must be primal")
            rows = n_x if b is Block.AB else p_y
            if (q.p, q.n) != (rows, n_x + m_p):
                raise DimensionMismatch(f"{b.value} QMI is {q.p}x{q.n}, expected {rows}x{n_x + m_p}")

    @property
    def qmis(self) -> list:
        return [(Block.AB, self.qmi_ab), (Block.CD, self.qmi_cd), *self.extra_qmis]

    @property
    def n_x(self) -> int:
        return self.C_p.shape[1]

    @property
    def m_p(self) -> int:
        return self.D_p.shape[1]

    @property
    def p_y(self) -> int:
        return self.qmi_cd.p

    @property
    def p_p(self) -> int:
        return self.C_p.shape[0]

    def with_extra(self, more: Sequence) -> "UncertainPlant":
        return UncertainPlant(self.C_p, self.D_p, self.qmi_ab, self.qmi_cd, self.extra_qmis + tuple(more), self.output_map_known)


@dataclass(frozen=True)
class Interconnection:
    """Constant part of the uncertain plant.

    ``matrix`` maps ``[x; w; w_p]`` to ``[x_next; z; z_p; y]``:
    ``x_next = A0 x + B_w w + B_xp w_p``, ``z = C_z x + D_zp w_p``,
    ``z_p = C_p x + D_p w_p`` and ``y = C_y0 x + C_yw w + D_y0 w_p``. For
    the plain interconnection of :func:`assemble_lft` only ``B_w``, ``C_z``,
    ``D_zp``, ``C_p``, ``D_p`` and ``C_yw`` are nonzero.
    """

    n_x: int
    m_p: int
    p_y: int
    p_p: int
    matrix: np.ndarray

    @property
    def n_w(self) -> int:
        return self.n_x + self.p_y

    @property
    def n_z(self) -> int:
        return self.n_x + self.m_p

    def _block(self, row: int, col: int) -> np.ndarray:
        r = np.r_[0, np.cumsum([self.n_x, self.n_z, self.p_p, self.p_y])]
        c = np.r_[0, np.cumsum([self.n_x, self.n_w, self.m_p])]
        return self.matrix[r[row]:r[row + 1], c[col]:c[col + 1]]

    A0 = property(lambda self: self._block(0, 0))
    B_w = property(lambda self: self._block(0, 1))
    B_xp = property(lambda self: self._block(0, 2))
    C_z = property(lambda self: self._block(1, 0))
    D_zp = property(lambda self: self._block(1, 2))
    C_p = property(lambda self: self._block(2, 0))
    D_p = property(lambda self: self._block(2, 2))
    C_y0 = property(lambda self: self._block(3, 0))
    C_yw = property(lambda self: self._block(3, 1))
    D_y0 = property(lambda self: self._block(3, 2))

    def close(self, Delta) -> tuple:
        """Substitute ``w = Delta z``; returns ``(A, B_p, C_y, D_yp)``."""
        Dl = matops.as_matrix(Delta)
        if Dl.shape != (self.n_w, self.n_z):
            raise DimensionMismatch(f"Delta is {Dl.shape}, expected {(self.n_w, self.n_z)}")
        A = self.A0 + self.B_w @ Dl @ self.C_z
        B_p = self.B_xp + self.B_w @ Dl @ self.D_zp
        C_y = self.C_y0 + self.C_yw @ Dl @ self.C_z
        D_yp = self.D_y0 + self.C_yw @ Dl @ self.D_zp
        return A, B_p, C_y, D_yp


def assemble_lft(C_p, D_p, p_y: int) -> Interconnection:
    """Interconnection with ``w = Delta z`` carrying the whole plant."""
    C_p = matops.as_matrix(C_p)
    D_p = matops.as_matrix(D_p)
    n_x = C_p.shape[1]
    m_p = D_p.shape[1]
    return recentered_lft(C_p, D_p, np.zeros((n_x, n_x + m_p)), np.zeros((p_y, n_x + m_p)), 1.0, 1.0)


def recentered_lft(C_p, D_p, center_ab, center_cd, rho_ab: float, rho_cd: float) -> Interconnection:
    """Interconnection for ``Delta = Delta_c + diag(rho_ab I, rho_cd I) Delta_hat``.

    The nominal plant ``Delta_c`` moves into the constant part and the
    uncertainty channel carries ``Delta_hat``; ``rho = 1`` and zero centers
    give the plain interconnection.
    """
    C_p = matops.as_matrix(C_p)
    D_p = matops.as_matrix(D_p)
    p_p, n_x = C_p.shape
    if D_p.shape[0] != p_p:
        raise DimensionMismatch(f"C_p {C_p.shape} and D_p {D_p.shape} disagree on output size")
    m_p = D_p.shape[1]
    c_ab = matops.as_matrix(center_ab)
    c_cd = matops.as_matrix(center_cd)
    p_y = c_cd.shape[0]
    if c_ab.shape != (n_x, n_x + m_p) or c_cd.shape[1] != n_x + m_p:
        raise DimensionMismatch("centers do not match the plant dimensions")
    n_w, n_z = n_x + p_y, n_x + m_p
    Z = np.zeros
    read_x = np.hstack([rho_ab * np.eye(n_x), Z((n_x, p_y))])
    read_y = np.hstack([Z((p_y, n_x)), rho_cd * np.eye(p_y)])
    M = np.block([
        [c_ab[:, :n_x], read_x, c_ab[:, n_x:]],
        [np.vstack([np.eye(n_x), Z((m_p, n_x))]), Z((n_z, n_w)), np.vstack([Z((n_x, m_p)), np.eye(m_p)])],
        [C_p, Z((p_p, n_w)), D_p],
        [c_cd[:, :n_x], read_y, c_cd[:, n_x:]],
    ])
    return Interconnection(n_x, m_p, p_y, p_p, M)


def block_selector(block: Block, n_x: int, m_p: int, p_y: int) -> np.ndarray:
    """``T`` with ``T [w; z] = [row block of w; z]``."""
    n_z = n_x + m_p
    if block is Block.AB:
        top = np.hstack([np.eye(n_x), np.zeros((n_x, p_y + n_z))])
    else:
        top = np.hstack([np.zeros((p_y, n_x)), np.eye(p_y), np.zeros((p_y, n_z))])
    bottom = np.hstack([np.zeros((n_z, n_x + p_y)), np.eye(n_z)])
    return np.vstack([top, bottom])


def multiplier_p(mult: MultiplierVector, plant: UncertainPlant) -> np.ndarray:
    """``P = sum_i m_i T_i^T pi_i T_i`` over the plant QMIs in order (taus then lambdas)."""
    weights = mult.all()
    qmis = plant.qmis
    if len(weights) != len(qmis):
        raise DimensionMismatch(f"{len(weights)} multipliers for {len(qmis)} QMIs")
    if any(w < 0 for w in weights):
        raise NegativeMultiplier("multipliers must be nonnegative")
    d = plant.n_x + plant.p_y + plant.n_x + plant.m_p
    P = np.zeros((d, d))
    for w, (b, q) in zip(weights, qmis):
        T = block_selector(b, plant.n_x, plant.m_p, plant.p_y)
        P += w * (T.T @ q.pi @ T)
    return 0.5 * (P + P.T)


def _block_center_radius(plant: UncertainPlant, block: Block) -> tuple[np.ndarray, float]:
    """Center and spectral-norm radius bound of the block's first bounded QMI (or of their sum)."""
    qs = [q for b, q in plant.qmis if b is block]
    candidates = [qs[0], Qmi(qs[0].p, qs[0].n, sum(q.normalized().pi for q in qs))]
    for q in candidates:
        cr = center_and_radius(q)
        if cr is None:
            continue
        c, K, S = cr
        rho = np.sqrt(max(matops.max_eig(S), 0.0) / matops.min_eig(K))
        return c, max(rho, 1e-12 * (1.0 + float(np.linalg.norm(c))))
    return np.zeros((qs[0].p, qs[0].n)), 1.0


@dataclass(frozen=True)
class _ScaledModel:
    """Recentred interconnection and the matching normalized multiplier terms.

    ``terms[i]`` is ``T_i^T pi_hat_i T_i / scales[i]`` with ``pi_hat_i`` the
    QMI rewritten for the scaled deviation; a weight ``tau`` on it equals the
    weight ``tau / scales[i]`` on the original ``pi_i``.
    """

    lft: Interconnection
    terms: list
    scales: list


def _scaled_model(plant: UncertainPlant) -> _ScaledModel:
    c_ab, r_ab = _block_center_radius(plant, Block.AB)
    c_cd, r_cd = _block_center_radius(plant, Block.CD)
    lft = recentered_lft(plant.C_p, plant.D_p, c_ab, c_cd, r_ab, r_cd)
    nz = plant.n_x + plant.m_p
    maps = {}
    for b, c, r in ((Block.AB, c_ab, r_ab), (Block.CD, c_cd, r_cd)):
        rows = c.shape[0]
        maps[b] = np.block([[r * np.eye(rows), c], [np.zeros((nz, rows)), np.eye(nz)]])
    terms, scales = [], []
    for b, q in plant.qmis:
        pi_hat = maps[b].T @ q.pi @ maps[b]
        s = float(np.linalg.norm(pi_hat, 2)) or 1.0
        T = block_selector(b, plant.n_x, plant.m_p, plant.p_y)
        terms.append(T.T @ (pi_hat / s) @ T)
        scales.append(s)
    return _ScaledModel(lft, terms, scales)


def _performance_lmi(lft: Interconnection, P, X, H, E, gamma_sq) -> sdp.Affine:
    """``[[Z0, H^T, E^T], [H, -X, 0], [E, 0, -I]]`` whose negative semidefiniteness certifies the bound.

    ``Z0 = diag(-X, 0, -gamma^2 I) + M^T P M`` with ``M`` mapping ``[chi; w; w_p]``
    to ``[w; z]``; ``H = X G`` for the closed-loop update ``chi+ = G [chi; w; w_p]``.
    """
    n2, nw, mp = 2 * lft.n_x, lft.n_w, lft.m_p
    M = np.block([
        [np.zeros((nw, n2)), np.eye(nw), np.zeros((nw, mp))],
        [np.hstack([lft.C_z, np.zeros((lft.n_z, lft.n_x))]), np.zeros((lft.n_z, nw)), lft.D_zp],
    ])
    Z0 = sdp.bmat([
        [-X, None, None],
        [None, np.zeros((nw, nw)), None],
        [None, None, -(gamma_sq * np.eye(mp))],
    ]) + M.T @ P @ M
    pp = lft.p_p
    return sdp.bmat([
        [Z0, H.T, E.T],
        [H, -X, None],
        [E, None, -np.eye(pp)],
    ])


@dataclass(frozen=True)
class SynthesisOptions:
    backoff: float = 1e-5
    max_backoff: float = 1e-2
    settings: sdp.SolverSettings | None = None


@dataclass(frozen=True)
class SynthesisResult:
    estimator: Estimator
    gamma: float
    multipliers: MultiplierVector
    lyapunov_certificate: np.ndarray
    solver_report: sdp.SdpSolution
    gamma_opt: float = float("nan")
    certificate_margin: float = float("nan")


def _synthesis_problem(plant: UncertainPlant, model: _ScaledModel, gamma_sq_fixed: float | None):
    n, py, pp = plant.n_x, plant.p_y, plant.p_p
    lft, terms = model.lft, model.terms
    prob = sdp.LmiProblem()
    Y = prob.symmetric("Y", n)
    Zs = prob.symmetric("Z", n)
    Ahat = prob.matrix("Ahat", n, n)
    Bhat = prob.matrix("Bhat", n, py)
    Chat = prob.matrix("Chat", pp, n)
    Dhat = prob.matrix("Dhat", pp, py)
    taus = [prob.scalar(f"tau{i}", lower=0.0) for i in range(len(terms))]
    if gamma_sq_fixed is None:
        g2 = prob.scalar("gamma_sq", lower=0.0)
    else:
        g2 = float(gamma_sq_fixed)
    P = taus[0] * terms[0]
    for t_, T in zip(taus[1:], terms[1:]):
        P = P + t_ * T
    Xb = sdp.bmat([[Y, Zs], [Zs, Zs]])
    # X times the closed-loop update, with A_hat = Z A_E and B_hat = Z B_E
    H = sdp.bmat([
        [Y @ lft.A0 + Bhat @ lft.C_y0, Ahat, Y @ lft.B_w + Bhat @ lft.C_yw, Y @ lft.B_xp + Bhat @ lft.D_y0],
        [Zs @ lft.A0 + Bhat @ lft.C_y0, Ahat, Zs @ lft.B_w + Bhat @ lft.C_yw, Zs @ lft.B_xp + Bhat @ lft.D_y0],
    ])
    E = sdp.bmat([[lft.C_p - Dhat @ lft.C_y0, -Chat, -(Dhat @ lft.C_yw), lft.D_p - Dhat @ lft.D_y0]])
    L = _performance_lmi(lft, P, Xb, H, E, g2)
    return prob, L, Xb, g2


def _scaled_output(plant: UncertainPlant, s: float) -> UncertainPlant:
    return UncertainPlant(plant.C_p / s, plant.D_p / s, plant.qmi_ab, plant.qmi_cd, plant.extra_qmis, plant.output_map_known)


def _output_scale(gamma: float, plant: UncertainPlant) -> float:
    """Factor that lifts a small bound ``gamma`` to about one; 1 when it is not small.

    Large bounds are left alone: the level then dominates solver precision anyway.
    """
    if gamma >= 0.1:
        return 1.0
    floor = 1e-9 * max(1.0, float(np.max(np.abs(np.hstack([plant.C_p, plant.D_p])), initial=0.0)))
    return max(gamma, floor)


def _minimize_level(plant: UncertainPlant, model: _ScaledModel, settings) -> float:
    prob, L, Xb, g2 = _synthesis_problem(plant, model, None)
    prob.add_lmi(-L, "performance")
    prob.add_lmi(Xb, "lyapunov")
    prob.minimize(g2)
    settings = settings or sdp.SolverSettings()
    sol = sdp.solve(prob, settings)
    if sol.status is sdp.Status.NUMERICAL_TROUBLE:
        # near-infeasible instances can stall one backend; let another one decide
        for other in sdp.SOLVERS:
            if other == sdp.selected_solver(settings):
                continue
            try:
                retry = sdp.solve(prob, dataclasses.replace(settings, solver=other))
            except SolverUnavailable:
                continue
            if retry.status is not sdp.Status.NUMERICAL_TROUBLE:
                sol = retry
                break
    if sol.status is sdp.Status.INFEASIBLE:
        raise Infeasible("no estimator certifies a finite bound for this uncertainty set")
    if sol.status is not sdp.Status.OPTIMAL:
        raise SolverFailure(f"synthesis SDP ended with {sol.raw_status}")
    return max(float(sol.values["gamma_sq"]), 0.0)


def synthesize(plant: UncertainPlant, options: SynthesisOptions = SynthesisOptions()) -> SynthesisResult:
    """Full-order estimator minimizing the certified H-infinity bound over the uncertainty set.

    Two solves: the first minimizes ``gamma^2``; the second fixes ``gamma^2``
    slightly above that optimum and maximizes a uniform margin so the
    returned estimator and certificate are strictly feasible. The reported
    ``gamma`` is the level of the second solve. Small bounds are re-solved
    with the performance output divided by the first optimum, which keeps
    the margin test above solver precision.
    """
    if not plant.output_map_known:
        raise MalformedProblem("uncertain C_p, D_p are not supported")
    model = _scaled_model(plant)
    settings = options.settings
    g2_opt = _minimize_level(plant, model, settings)
    s = _output_scale(np.sqrt(g2_opt), plant)
    work = plant
    if s != 1.0:
        try:
            scaled = _scaled_output(plant, s)
            scaled_model = _scaled_model(scaled)
            g2_opt, work, model = _minimize_level(scaled, scaled_model, settings), scaled, scaled_model
        except SolverFailure:
            s = 1.0

    backoff = options.backoff
    while True:
        level = g2_opt * (1.0 + backoff) + backoff**2
        prob2, L2, Xb2, _ = _synthesis_problem(work, model, level)
        t = prob2.scalar("margin")
        d = L2.shape[0]
        prob2.add_lmi(-L2 - t * np.eye(d), "performance")
        prob2.add_lmi(Xb2 - t * np.eye(Xb2.shape[0]), "lyapunov")
        prob2.minimize(-t)
        sol2 = sdp.solve(prob2, settings)
        if sol2.ok and sol2.values["margin"] > 0:
            # margin of the unshifted LMIs, measured outside the solver
            vals = dict(sol2.values, margin=0.0)
            fm = sdp.lmi_margin(prob2, vals)
            if fm > 0:
                break
        if backoff >= options.max_backoff:
            raise SolverFailure(f"no strictly feasible estimator near gamma^2 = {g2_opt * s * s:.6g}")
        backoff *= 10.0

    v = sol2.values
    Zv = v["Z"]
    est = Estimator(np.linalg.solve(Zv, v["Ahat"]), np.linalg.solve(Zv, v["Bhat"]), s * v["Chat"], s * v["Dhat"])
    # a dissipation certificate for the output scaled by 1/s scales by s^2
    s2 = s * s
    taus_raw = tuple(s2 * max(0.0, float(v[f"tau{i}"])) / sc for i, sc in enumerate(model.scales))
    X = s2 * np.block([[v["Y"], Zv], [Zv, Zv]])
    return SynthesisResult(
        estimator=est,
        gamma=float(s * np.sqrt(level)),
        multipliers=MultiplierVector(taus_raw),
        lyapunov_certificate=0.5 * (X + X.T),
        solver_report=sol2,
        gamma_opt=float(s * np.sqrt(g2_opt)),
        certificate_margin=s2 * fm,
    )


@dataclass(frozen=True)
class VerificationReport:
    certified: bool
    gamma: float
    margin: float
    lyapunov: np.ndarray | None = None
    multipliers: MultiplierVector | None = None
    message: str = ""


def _analysis_pieces(lft: Interconnection, est: Estimator):
    """Closed-loop update ``G`` (on ``[chi; w; w_p]``) and error map ``E`` for a fixed estimator."""
    n = lft.n_x
    A_cl = np.block([[lft.A0, np.zeros((n, n))], [est.B_E @ lft.C_y0, est.A_E]])
    B_w = np.vstack([lft.B_w, est.B_E @ lft.C_yw])
    B_p = np.vstack([lft.B_xp, est.B_E @ lft.D_y0])
    G = np.hstack([A_cl, B_w, B_p])
    E = np.hstack([lft.C_p - est.D_E @ lft.C_y0, -est.C_E, -est.D_E @ lft.C_yw, lft.D_p - est.D_E @ lft.D_y0])
    return G, E


def verify_robust_bound(
    plant: UncertainPlant,
    estimator: Estimator,
    gamma: float,
    rel: float = 1e-6,
    settings: sdp.SolverSettings | None = None,
) -> VerificationReport:
    """Analysis-only check of a fixed estimator at level ``gamma (1 + rel)``.

    Searches a Lyapunov matrix and multipliers maximizing a uniform margin;
    certifies only when the margin recomputed outside the solver is positive.
    """
    n = plant.n_x
    if estimator.A_E.shape != (n, n) or estimator.B_E.shape != (n, plant.p_y) or estimator.C_E.shape != (plant.p_p, n):
        raise DimensionMismatch("estimator dimensions do not match the plant")
    if not gamma > 0:
        return VerificationReport(False, gamma, -np.inf, message="gamma must be positive")
    # check the equivalent problem with the output divided by gamma, so the level is near one
    s = _output_scale(gamma, plant)
    if s != 1.0:
        plant = _scaled_output(plant, s)
        estimator = Estimator(estimator.A_E, estimator.B_E, estimator.C_E / s, estimator.D_E / s)
    model = _scaled_model(plant)
    lft, terms, scales = model.lft, model.terms, model.scales
    G, E = _analysis_pieces(lft, estimator)
    level = (gamma / s * (1.0 + rel)) ** 2
    prob = sdp.LmiProblem()
    X = prob.symmetric("X", 2 * n)
    taus = [prob.scalar(f"tau{i}", lower=0.0) for i in range(len(terms))]
    t = prob.scalar("margin")
    P = taus[0] * terms[0]
    for t_, T in zip(taus[1:], terms[1:]):
        P = P + t_ * T
    L = _performance_lmi(lft, P, X, X @ G, E, level)
    prob.add_lmi(-L - t * np.eye(L.shape[0]), "performance")
    prob.add_lmi(X - t * np.eye(2 * n), "lyapunov")
    prob.minimize(-t)
    sol = sdp.solve(prob, settings)
    if sol.status is sdp.Status.INFEASIBLE or sol.x is None:
        return VerificationReport(False, gamma, -np.inf, message=f"analysis SDP: {sol.raw_status}")
    v = sol.values
    Xv = 0.5 * (v["X"] + v["X"].T)
    tau_vals = [max(0.0, float(v[f"tau{i}"])) for i in range(len(terms))]
    Pv = sum(tv * T for tv, T in zip(tau_vals, terms))
    Lv = _performance_lmi(lft, sdp.Affine.lift(Pv), sdp.Affine.lift(Xv), sdp.Affine.lift(Xv @ G), sdp.Affine.lift(E), level).const
    margin = min(-matops.max_eig(0.5 * (Lv + Lv.T)), matops.min_eig(Xv))
    s2 = s * s
    mult = MultiplierVector(tuple(s2 * tv / sc for tv, sc in zip(tau_vals, scales)))
    Xv = s2 * Xv
    if margin > 0:
        return VerificationReport(True, gamma, margin, Xv, mult, "certified")
    return VerificationReport(False, gamma, margin, Xv, mult, f"no certificate at gamma = {gamma:.6g} (margin {margin:.3e})")


def _block_set(plant: UncertainPlant, block: Block, weights: Sequence[float]) -> Qmi:
    """Multiplier-weighted sum of one row block's QMIs; unit weights on normalized QMIs if all weights vanish."""
    pairs = [(w, q) for w, (b, q) in zip(weights, plant.qmis) if b is block]
    pi = sum(w * q.pi for w, q in pairs)
    q0 = pairs[0][1]
    combined = Qmi(q0.p, q0.n, pi)
    if bounded_center(combined) is None:
        combined = Qmi(q0.p, q0.n, sum(q.normalized().pi for _, q in pairs))
    return combined


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    count: int
    gamma: float
    max_ratio: float
    unstable: int
    norms: tuple = field(default=(), repr=False)


def validate_by_sampling(
    plant: UncertainPlant,
    result: SynthesisResult,
    count: int = 100,
    seed: int = 0,
    hinf_method: str = "grid",
    rel_tol: float = 1e-3,
) -> ValidationReport:
    """Sample plants from the multiplier-combined uncertainty set and measure the error-system norm.

    Each row block is sampled from the sum of its QMIs weighted by the
    certificate's multipliers, so every sample satisfies ``[Delta; I]^T P
    [Delta; I] >= 0``. Passes iff no sample is unstable and every norm is at
    most ``gamma (1 + rel_tol)``.
    """
    weights = result.multipliers.all()
    sets = {b: _block_set(plant, b, weights) for b in Block}
    if any(bounded_center(q) is None for q in sets.values()):
        raise Unbounded("uncertainty set is unbounded in some row block")
    ss = np.random.SeedSequence(seed).generate_state(2)
    ab = analysis.sample_members(sets[Block.AB], count, int(ss[0]))
    cd = analysis.sample_members(sets[Block.CD], count, int(ss[1]))
    norms, unstable = [], 0
    for th_ab, th_cd in zip(ab, cd):
        A, B_p = th_ab[:, : plant.n_x], th_ab[:, plant.n_x:]
        C_y, D_yp = th_cd[:, : plant.n_x], th_cd[:, plant.n_x:]
        err = analysis.closed_loop_error_system(A, B_p, C_y, D_yp, plant.C_p, plant.D_p, result.estimator)
        try:
            norms.append(analysis.hinf_norm(err, method=hinf_method))
        except Unstable:
            unstable += 1
            norms.append(np.inf)
    max_ratio = max(norms) / result.gamma if result.gamma > 0 else (0.0 if max(norms) == 0 else np.inf)
    passed = unstable == 0 and all(g <= result.gamma * (1 + rel_tol) + 1e-12 for g in norms)
    return ValidationReport(passed, count, result.gamma, float(max_ratio), unstable, tuple(norms))
