"""Seeded data generation, uncertainty-set construction and the prior x constraint-set table.

Columns of the table are the priors on the plant matrices:

* ``Sigma0_D`` stacked data bound, dualized
* ``Sigma0_L`` spectral-norm ball around a scaled true plant
* ``Sigma0_I`` equal-weight combination of per-sample dual bounds, dualized
* ``Sigma0_C`` all three together

Rows add per-prior reparameterized QMIs on top of the prior: none, one per
data sample (``Sigma_D``), the structural knowledge (``Sigma_P``) or both
(``Sigma_C``).
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import matops, prior, reparam, sdp, synth
from .errors import Infeasible, QmiError, RankDeficient, SolverFailure
from .qmi import ball_prior, bounded_center, contains
from .reparam import Objective, QhatCache, RegressionSample, ReparamConfig
from .synth import Block, UncertainPlant

log = logging.getLogger(__name__)

PRIORS = ("Sigma0_D", "Sigma0_L", "Sigma0_I", "Sigma0_C")
ROWS = ("none", "Sigma_D", "Sigma_P", "Sigma_C")
SINGLE_PRIORS = PRIORS[:3]
# descriptive names accepted wherever a table column label is expected
PRIOR_NAMES = {
    "PriorStacked": "Sigma0_D",
    "PriorBall": "Sigma0_L",
    "PriorInformativity": "Sigma0_I",
    "PriorCombined": "Sigma0_C",
}


def prior_label(name: str) -> str:
    """Table column label for a column label or a descriptive prior name."""
    label = PRIOR_NAMES.get(name, name)
    if label not in PRIORS:
        raise ValueError(f"unknown prior {name!r}")
    return label


@dataclass(frozen=True)
class StructuralConstraint:
    """``sigma_max(E theta F + G) <= eps`` on one row block of the plant."""

    block: Block
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    eps: float

    def residual(self, theta) -> float:
        return float(np.linalg.norm(self.E @ theta @ self.F + self.G, 2))


def entry_constraint(block: Block, shape: tuple, i: int, j: int, value: float, eps: float) -> StructuralConstraint:
    E, F = reparam.entry_selector(shape, i, j)
    return StructuralConstraint(block, E, F, np.array([[-value]]), eps)


def sum_constraint(block: Block, shape: tuple, rows, cols, value: float, eps: float) -> StructuralConstraint:
    """Sum of ``theta[rows, cols]`` (one of the two index lists has length one) within ``eps`` of ``value``."""
    p, n = shape
    E = np.zeros((1, p))
    E[0, list(rows)] = 1.0
    F = np.zeros((n, 1))
    F[list(cols), 0] = 1.0
    return StructuralConstraint(block, E, F, np.array([[-value]]), eps)


@dataclass(frozen=True)
class ScenarioConfig:
    A: np.ndarray
    B_p: np.ndarray
    C_y: np.ndarray
    D_yp: np.ndarray
    C_p: np.ndarray
    D_p: np.ndarray
    N: int
    alpha: float
    beta: float
    epsilon: float = 0.1
    x0_range: tuple = (-1.0, 1.0)
    wp_range: tuple = (-1.0, 1.0)
    structural: tuple = ()
    priors: tuple = PRIORS
    rows: tuple = ROWS
    seed: int = 0
    ball_scale: float = 1.04
    ball_exponent: int = 1  # the ball prior has radius beta**ball_exponent
    theta_bar_true: tuple = ("Sigma0_I",)
    validate_samples: int = 20
    combined_union: bool = True
    objective: Objective = Objective.TRACE
    name: str = "custom"

    def __post_init__(self):
        for f in ("A", "B_p", "C_y", "D_yp", "C_p", "D_p"):
            object.__setattr__(self, f, matops.as_matrix(getattr(self, f)))
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not self.alpha >= 0:
            raise ValueError("alpha must be nonnegative")
        for r in (self.x0_range, self.wp_range):
            if len(r) != 2 or not r[0] <= r[1]:
                raise ValueError(f"empty range {r}")
        if self.ball_exponent not in (1, 2):
            raise ValueError("ball_exponent must be 1 or 2")
        object.__setattr__(self, "priors", tuple(prior_label(p) for p in self.priors))
        bad = set(self.rows) - set(ROWS)
        if bad:
            raise ValueError(f"unknown table labels {sorted(bad)}")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def m_p(self) -> int:
        return self.B_p.shape[1]

    @property
    def p_y(self) -> int:
        return self.C_y.shape[0]

    def theta_true(self, block: Block) -> np.ndarray:
        if block is Block.AB:
            return np.hstack([self.A, self.B_p])
        return np.hstack([self.C_y, self.D_yp])

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)


def example_config(which: int, sum_reading: str = "A_column") -> ScenarioConfig:
    """Defaults for the two demonstration systems.

    ``sum_reading`` picks what "the first column" refers to in the first
    system's unit-sum knowledge: ``"A_column"`` (first column of ``A``) or
    ``"Bp_column"`` (first column of ``B_p``).
    """
    if which == 1:
        A = np.array([[0.7, 0.0], [0.3, 0.7]])
        B_p = np.array([[1.0, 0.0], [0.0, 0.0]])
        C_y = np.array([[0.0, 1.0]])
        D_yp = np.array([[0.0, 1.0]])
        ab, cd = (2, 4), (1, 4)
        tol = 0.01
        st = [
            entry_constraint(Block.AB, ab, 0, 1, 0.0, tol),  # A[0,1]
            entry_constraint(Block.AB, ab, 0, 3, 0.0, tol),  # B_p[0,1]
            entry_constraint(Block.AB, ab, 1, 3, 0.0, tol),  # B_p[1,1]
            entry_constraint(Block.CD, cd, 0, 0, 0.0, tol),  # C_y[0,0]
            entry_constraint(Block.CD, cd, 0, 2, 0.0, tol),  # D_yp[0,0]
            sum_constraint(Block.AB, ab, [1], [0, 1], 1.0, tol),
        ]
        if sum_reading == "A_column":
            st.append(sum_constraint(Block.AB, ab, [0, 1], [0], 1.0, tol))
        elif sum_reading == "Bp_column":
            st.append(sum_constraint(Block.AB, ab, [0, 1], [2], 1.0, tol))
        else:
            raise ValueError(f"unknown sum_reading {sum_reading!r}")
        st.append(entry_constraint(Block.AB, ab, 1, 0, 0.3, 0.003))
        return ScenarioConfig(
            A, B_p, C_y, D_yp, np.eye(2), np.zeros((2, 2)),
            N=50, alpha=0.0005, beta=0.15, x0_range=(-2.0, 2.0), wp_range=(-2.0, 2.0),
            structural=tuple(st), name="example1",
        )
    if which == 2:
        return ScenarioConfig(
            [[0.8]], [[1.0]], [[1.0]], [[0.1]], np.eye(1), np.zeros((1, 1)),
            N=10, alpha=0.6, beta=0.1, x0_range=(-10.0, 10.0), wp_range=(-4.0, 6.0),
            structural=(entry_constraint(Block.AB, (1, 2), 0, 1, 1.0, 0.01),),
            name="example2",
        )
    raise ValueError(f"unknown example {which}")


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray  # n_x x N, states x_k
    x_next: np.ndarray  # n_x x N
    y: np.ndarray  # p_y x N
    wp: np.ndarray  # m_p x N
    w: np.ndarray = field(repr=False, default=None)  # process noise, kept for checks
    v: np.ndarray = field(repr=False, default=None)  # measurement noise

    @property
    def N(self) -> int:
        return self.x.shape[1]


def _ball_noise(rng: np.random.Generator, dim: int, radius: float) -> np.ndarray:
    d = rng.standard_normal(dim)
    nrm = np.linalg.norm(d)
    u = rng.uniform()
    if nrm == 0.0:
        return np.zeros(dim)
    return d / nrm * radius * u ** (1.0 / dim)


def generate_data(cfg: ScenarioConfig, seed: int | None = None) -> Dataset:
    """Simulate ``N`` steps with noise drawn uniformly in balls of radius ``alpha``."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    n, m, p = cfg.n_x, cfg.m_p, cfg.p_y
    N = cfg.N
    X = np.zeros((n, N + 1))
    Wp = np.zeros((m, N))
    Y = np.zeros((p, N))
    W = np.zeros((n, N))
    V = np.zeros((p, N))
    X[:, 0] = rng.uniform(*cfg.x0_range, size=n)
    for k in range(N):
        Wp[:, k] = rng.uniform(*cfg.wp_range, size=m)
        W[:, k] = _ball_noise(rng, n, cfg.alpha)
        V[:, k] = _ball_noise(rng, p, cfg.alpha)
        X[:, k + 1] = cfg.A @ X[:, k] + cfg.B_p @ Wp[:, k] + W[:, k]
        Y[:, k] = cfg.C_y @ X[:, k] + cfg.D_yp @ Wp[:, k] + V[:, k]
    return Dataset(X[:, :N], X[:, 1:], Y, Wp, W, V)


def regression_samples(cfg: ScenarioConfig, data: Dataset, block: Block) -> list:
    """One regression sample per time step: regressor ``[x_k; w_p,k]``, regressand the next state or the output."""
    R = np.array([[cfg.alpha**2]])
    target = data.x_next if block is Block.AB else data.y
    Q = np.eye(target.shape[0])
    out = []
    for k in range(data.N):
        Xk = np.r_[data.x[:, k], data.wp[:, k]][:, None]
        if not np.any(Xk):
            raise RankDeficient(f"sample {k} has a zero regressor")
        out.append(RegressionSample(Xk, target[:, k][:, None], Q, R))
    return out


@dataclass
class SetBundle:
    """Uncertainty sets per table column; every entry maps ``Block`` to a list of primal QMIs."""

    priors: dict = field(default_factory=dict)
    sigma_d: dict = field(default_factory=dict)
    sigma_p: dict = field(default_factory=dict)
    theta_bar: dict = field(default_factory=dict)

    def plant(self, cfg: ScenarioConfig, prior_label: str, row: str) -> UncertainPlant:
        extra = {b: list(self.priors[prior_label][b][1:]) for b in Block}
        if row in ("Sigma_D", "Sigma_C"):
            for b in Block:
                extra[b] += self.sigma_d[prior_label][b]
        if row in ("Sigma_P", "Sigma_C"):
            for b in Block:
                extra[b] += self.sigma_p[prior_label][b]
        pairs = [(b, q) for b in Block for q in extra[b]]
        return UncertainPlant(
            cfg.C_p, cfg.D_p,
            self.priors[prior_label][Block.AB][0],
            self.priors[prior_label][Block.CD][0],
            tuple(pairs),
        )


def build_priors(cfg: ScenarioConfig, data: Dataset) -> dict:
    out = {b: {} for b in Block}
    for b in Block:
        samples = regression_samples(cfg, data, b)
        out[b]["Sigma0_D"] = prior.prior_from_data(samples)
        center = cfg.theta_true(b) * (cfg.ball_scale if b is Block.AB else 1.0)
        out[b]["Sigma0_L"] = ball_prior(center, cfg.beta**cfg.ball_exponent)
        out[b]["Sigma0_I"] = prior.informativity_prior(samples)
    return {label: {b: [out[b][label]] for b in Block} for label in SINGLE_PRIORS} | {
        "Sigma0_C": {b: [out[b][label] for label in SINGLE_PRIORS] for b in Block}
    }


def build_sets(
    cfg: ScenarioConfig,
    data: Dataset,
    priors: tuple | None = None,
    cache: QhatCache | None = None,
    settings: sdp.SolverSettings | None = None,
) -> SetBundle:
    """Priors plus, for each requested prior, per-sample and structural reparameterized QMIs.

    With ``cfg.combined_union`` the combined column also receives the QMIs
    derived from each single prior. They remain valid there because the
    combined prior lies inside every single prior, and they make the
    combined column at least as good as any other column.
    """
    priors = tuple(cfg.priors if priors is None else priors)
    cache = QhatCache() if cache is None else cache
    all_priors = build_priors(cfg, data)
    bundle = SetBundle()
    samples = {b: regression_samples(cfg, data, b) for b in Block}
    labels = list(priors)
    if "Sigma0_C" in priors and cfg.combined_union:
        labels = [lb for lb in PRIORS if lb in priors or lb in SINGLE_PRIORS]
    own = {}
    for label in labels:
        pr = all_priors[label]
        own[label] = {}
        bundle.theta_bar[label] = {}
        for b in Block:
            tb = cfg.theta_true(b) if label in cfg.theta_bar_true else bounded_center(pr[b][0])
            bundle.theta_bar[label][b] = tb
            rc = ReparamConfig(cfg.epsilon, tb, cfg.objective)
            sd = [reparam.reparameterize(s, pr[b], rc, cache, settings).sigma_hat for s in samples[b]]
            sp = [
                reparam.structural_constraint_qmi(c.E, c.F, c.G, c.eps, pr[b], rc, cache, settings)
                for c in cfg.structural
                if c.block is b
            ]
            own[label][b] = (sd, sp)
    for label in priors:
        bundle.priors[label] = all_priors[label]
        sources = [label]
        if label == "Sigma0_C" and cfg.combined_union:
            sources += list(SINGLE_PRIORS)
        bundle.sigma_d[label] = {b: [q for src in sources for q in own[src][b][0]] for b in Block}
        bundle.sigma_p[label] = {b: [q for src in sources for q in own[src][b][1]] for b in Block}
    return bundle


@dataclass(frozen=True)
class CellResult:
    prior: str
    row: str
    gamma: float | None
    status: str
    certified: bool = False
    validated: bool = False
    max_ratio: float = float("nan")
    result: synth.SynthesisResult | None = field(default=None, repr=False, compare=False)


@dataclass
class ResultTable:
    rows: tuple
    cols: tuple
    cells: dict = field(default_factory=dict)

    def gamma(self, row: str, col: str):
        return self.cells[(row, col)].gamma

    def to_csv(self) -> str:
        lines = ["constraints," + ",".join(self.cols)]
        for r in self.rows:
            vals = []
            for c in self.cols:
                g = self.cells[(r, c)].gamma
                vals.append(self.cells[(r, c)].status if g is None else f"{g:.10g}")
            lines.append(r + "," + ",".join(vals))
        return "\n".join(lines) + "\n"

    def to_markdown(self, digits: int = 4) -> str:
        head = ["constraints", *self.cols]
        body = []
        for r in self.rows:
            row = [r]
            for c in self.cols:
                g = self.cells[(r, c)].gamma
                row.append(self.cells[(r, c)].status if g is None else f"{g:.{digits}f}")
            body.append(row)
        widths = [max(len(x[i]) for x in [head, *body]) for i in range(len(head))]
        fmt = lambda cells: "| " + " | ".join(s.ljust(w) for s, w in zip(cells, widths)) + " |"
        sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
        return "\n".join([fmt(head), sep, *map(fmt, body)]) + "\n"

    def sound(self) -> bool:
        """Every finite entry certified and validated."""
        return all(c.certified and c.validated for c in self.cells.values() if c.gamma is not None)


def run_cell(
    cfg: ScenarioConfig,
    bundle: SetBundle,
    prior_label: str,
    row: str,
    validate_samples: int | None = None,
    options: synth.SynthesisOptions = synth.SynthesisOptions(),
) -> CellResult:
    plant = bundle.plant(cfg, prior_label, row)
    try:
        res = synth.synthesize(plant, options)
    except Infeasible:
        return CellResult(prior_label, row, None, "infeasible")
    except SolverFailure as exc:
        log.warning("cell %s/%s: %s", row, prior_label, exc)
        return CellResult(prior_label, row, None, "solver_failure")
    ver = synth.verify_robust_bound(plant, res.estimator, res.gamma, settings=options.settings)
    count = cfg.validate_samples if validate_samples is None else validate_samples
    val = synth.validate_by_sampling(plant, res, count, cfg.seed)
    return CellResult(prior_label, row, res.gamma, "ok", ver.certified, val.passed, val.max_ratio, res)


def run_scenario(
    cfg: ScenarioConfig,
    data: Dataset | None = None,
    workers: int = 1,
    validate_samples: int | None = None,
    options: synth.SynthesisOptions = synth.SynthesisOptions(),
) -> ResultTable:
    """Build every set once and fill the table; cells run in a thread pool but are stored by key."""
    data = generate_data(cfg) if data is None else data
    bundle = build_sets(cfg, data)
    cells = [(r, c) for r in cfg.rows for c in cfg.priors]
    table = ResultTable(tuple(cfg.rows), tuple(cfg.priors))

    def work(rc):
        r, c = rc
        try:
            return rc, run_cell(cfg, bundle, c, r, validate_samples, options)
        except QmiError as exc:
            return rc, CellResult(c, r, None, type(exc).__name__)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(rc) for rc in cells]
    for rc, cell in results:
        table.cells[rc] = cell
    return table


def true_system_containment(cfg: ScenarioConfig, bundle: SetBundle, tol: float = 1e-9) -> list:
    """Names of every constructed set that excludes the true plant (empty when all contain it)."""
    bad = []
    for label, pr in bundle.priors.items():
        for b in Block:
            th = cfg.theta_true(b)
            groups = (("prior", pr[b]), ("Sigma_D", bundle.sigma_d[label][b]), ("Sigma_P", bundle.sigma_p[label][b]))
            for kind, qs in groups:
                for i, q in enumerate(qs):
                    if not contains(q, th, tol * max(1.0, float(np.max(np.abs(q.pi))))):
                        bad.append(f"{label}/{b.value}/{kind}[{i}]")
    return bad



_MATRIX_KEYS = {
    "system.A": "A",
    "system.B_p": "B_p",
    "system.C_y": "C_y",
    "system.D_yp": "D_yp",
    "system.C_p": "C_p",
    "system.D_p": "D_p",
}
_SCALAR_KEYS = {
    "data.N": ("N", int),
    "data.alpha": ("alpha", float),
    "data.seed": ("seed", int),
    "data.x0_range": ("x0_range", lambda v: tuple(float(x) for x in v)),
    "data.wp_range": ("wp_range", lambda v: tuple(float(x) for x in v)),
    "prior.beta": ("beta", float),
    "prior.ball_scale": ("ball_scale", float),
    "prior.ball_exponent": ("ball_exponent", int),
    "prior.theta_bar_true": ("theta_bar_true", lambda v: tuple(str(x) for x in v)),
    "reparam.epsilon": ("epsilon", float),
    "reparam.objective": ("objective", lambda v: Objective(str(v))),
    "table.priors": ("priors", lambda v: tuple(str(x) for x in v)),
    "table.rows": ("rows", lambda v: tuple(str(x) for x in v)),
    "table.validate_samples": ("validate_samples", int),
    "table.combined_union": ("combined_union", bool),
    "name": ("name", str),
}


def _constraint_from_entry(d: dict) -> StructuralConstraint:
    try:
        return StructuralConstraint(
            Block(d["block"]),
            matops.as_matrix(d["E"]),
            matops.as_matrix(d["F"]),
            matops.as_matrix(d["G"]),
            float(d["eps"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad structural constraint {d!r}: {exc}") from exc


def scenario_from_entries(entries: dict, example: int | None = None) -> ScenarioConfig:
    """Build a scenario from parsed config entries; ``example`` (or key ``example``) picks the base."""
    entries = dict(entries)
    base_id = entries.pop("example", example)
    sum_reading = entries.pop("structural.sum_reading", "A_column")
    if base_id is not None:
        cfg = example_config(int(base_id), str(sum_reading))
        kw = {}
    else:
        missing = [k for k in _MATRIX_KEYS if k not in entries] + [
            k for k in ("data.N", "data.alpha", "prior.beta") if k not in entries
        ]
        if missing:
            raise ValueError(f"config without 'example' needs keys {missing}")
        cfg = None
        kw = {}
    for key, value in entries.items():
        if key in _MATRIX_KEYS:
            kw[_MATRIX_KEYS[key]] = matops.as_matrix(value)
        elif key in _SCALAR_KEYS:
            name, conv = _SCALAR_KEYS[key]
            kw[name] = conv(value)
        elif key == "structural.list":
            kw["structural"] = tuple(_constraint_from_entry(d) for d in value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if cfg is None:
        return ScenarioConfig(**kw)
    return cfg.replace(**kw)


def scenario_to_entries(cfg: ScenarioConfig) -> dict:
    """Inverse of :func:`scenario_from_entries` (without an ``example`` base)."""
    out = {"name": cfg.name}
    for key, attr in _MATRIX_KEYS.items():
        out[key] = getattr(cfg, attr).tolist()
    for key, (attr, _) in _SCALAR_KEYS.items():
        if key == "name":
            continue
        v = getattr(cfg, attr)
        out[key] = v.value if isinstance(v, Objective) else (list(v) if isinstance(v, tuple) else v)
    out["structural.list"] = [
        {"block": c.block.value, "E": c.E.tolist(), "F": c.F.tolist(), "G": c.G.tolist(), "eps": c.eps}
        for c in cfg.structural
    ]
    return out
