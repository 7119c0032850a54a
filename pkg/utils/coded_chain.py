"""
Coded-channel Markov chain of a configuration

A chain state Z = (S, U, X, Y, St, Ut, Wt) per terminal pair. The tilde
coordinates of the next state are copies of the current (S, U, (X, Y)), so the
chain is iterated on the lumped "carried" coordinates (St1, St2, Ut1, Ut2,
Wt1, Wt2) and the full joint over Z is rebuilt on demand.

Packing: Wt_j = x_j * |Y_j| + y_j. Encoder tables f_j are indexed
(s_j, u_j, st_j, ut_j, wt_j) -> x_j. Decoder tables g_j reconstruct St_j' and are
indexed (ut_j', s_j, u_j, st_j, ut_j, wt_j, y_j).
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from .channels import TwcChannel
from .errors import ConfigurationError, ConvergenceError, DimensionCapError, ValidationError
from .prob import Alphabet, CondPmf, JointPmf, mutual_information
from .rate_distortion import DistortionMatrix
from .settings import SETTINGS

logger = logging.getLogger(__name__)

Z_LABELS = ("S1", "S2", "U1", "U2", "X1", "X2", "Y1", "Y2", "St1", "St2", "Ut1", "Ut2", "Wt1", "Wt2")
CARRIED_LABELS = ("St1", "St2", "Ut1", "Ut2", "Wt1", "Wt2")
DECLARED_TOL = 1e-10
REPORT_EPS = 1e-9
DENSE_CAP = 4096
STALL_WINDOW = 500


@dataclass
class Configuration:
    """
    Coding kernels P(U_j|S_j), prior-block joint P_tilde, encoders f_j, decoders g_j

    Args:
        p_u1_given_s1, p_u2_given_s2: (|S_j|, |U_j|) conditionals
        p_tilde: joint over (St1, St2, Ut1, Ut2, Wt1, Wt2)
        f1, f2: integer encoder tables, see module docstring
        g1, g2: integer decoder tables, see module docstring
        x_sizes, y_sizes: channel alphabets, fixing the Wt packing
        shat_sizes: reconstruction alphabet sizes (|Shat_1|, |Shat_2|)
    """

    p_u1_given_s1: CondPmf
    p_u2_given_s2: CondPmf
    p_tilde: JointPmf
    f1: np.ndarray
    f2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    x_sizes: Tuple[int, int]
    y_sizes: Tuple[int, int]
    shat_sizes: Tuple[int, int]
    name: str = "custom"

    def __post_init__(self):
        s1, u1 = self.p_u1_given_s1.probs.shape
        s2, u2 = self.p_u2_given_s2.probs.shape
        w1 = self.x_sizes[0] * self.y_sizes[0]
        w2 = self.x_sizes[1] * self.y_sizes[1]
        expected = {
            "p_tilde": ((s1, s2, u1, u2, w1, w2), self.p_tilde.shape),
            "f1": ((s1, u1, s1, u1, w1), np.shape(self.f1)),
            "f2": ((s2, u2, s2, u2, w2), np.shape(self.f2)),
            "g1": ((u2, s1, u1, s1, u1, w1, self.y_sizes[0]), np.shape(self.g1)),
            "g2": ((u1, s2, u2, s2, u2, w2, self.y_sizes[1]), np.shape(self.g2)),
        }
        for name, (want, got) in expected.items():
            if tuple(want) != tuple(got):
                raise ValidationError(f"configuration {name} has shape {got}, expected {want}")
        self.f1 = _lookup(self.f1, self.x_sizes[0], "f1")
        self.f2 = _lookup(self.f2, self.x_sizes[1], "f2")
        self.g1 = _lookup(self.g1, self.shat_sizes[1], "g1")
        self.g2 = _lookup(self.g2, self.shat_sizes[0], "g2")

    @property
    def s_sizes(self) -> Tuple[int, int]:
        return self.p_u1_given_s1.probs.shape[0], self.p_u2_given_s2.probs.shape[0]

    @property
    def u_sizes(self) -> Tuple[int, int]:
        return self.p_u1_given_s1.probs.shape[1], self.p_u2_given_s2.probs.shape[1]

    def is_pi_prime(self) -> bool:
        """Encoders read only (St_j, Ut_j); decoders only (Ut_j', St_j, Ut_j, Y_j)"""
        f_ok = all(np.all(f == f[:1, :1, :, :, :1]) for f in (self.f1, self.f2))
        g_ok = all(np.all(g == g[:, :1, :1, :, :, :1, :]) for g in (self.g1, self.g2))
        return bool(f_ok and g_ok)


def _lookup(table, size: int, name: str) -> np.ndarray:
    arr = np.asarray(table)
    if not np.issubdtype(arr.dtype, np.integer):
        if np.any(arr != np.round(arr)):
            raise ValidationError(f"{name} must be an integer lookup table")
        arr = arr.astype(np.int64)
    if np.any(arr < 0) or np.any(arr >= size):
        raise ValidationError(f"{name} maps outside its output alphabet of size {size}")
    return arr.astype(np.int64)


@dataclass(frozen=True)
class ChainState:
    """Shape of the carried block (St1, St2, Ut1, Ut2, Wt1, Wt2); states are numbered row-major"""

    shape: Tuple[int, ...]
    labels: Tuple[str, ...] = CARRIED_LABELS

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


def _one_hot(table: np.ndarray, size: int) -> np.ndarray:
    return (table[..., None] == np.arange(size)).astype(float)


class CodedKernel:
    """
    Lumped transition kernel of the coded channel

    K(c | t) = P(s1,s2) P(u1|s1) P(u2|s2) 1{x_j = f_j(s_j, u_j, t_j)} P(y1,y2|x1,x2)
    where t are the previous carried coordinates and c = (s, u, (x, y)).
    """

    def __init__(self, cfg: Configuration, ch: TwcChannel, source: JointPmf):
        if source.ndim != 2 or tuple(source.shape) != tuple(cfg.s_sizes):
            raise ValidationError(f"source shape {source.shape} does not match configuration {cfg.s_sizes}")
        if (ch.x1.size, ch.x2.size) != tuple(cfg.x_sizes) or (ch.y1.size, ch.y2.size) != tuple(cfg.y_sizes):
            raise ValidationError("channel alphabets do not match the configuration")
        self.cfg = cfg
        self.channel = ch
        self.source = source
        self.ps = source.probs
        self.pu1 = cfg.p_u1_given_s1.probs
        self.pu2 = cfg.p_u2_given_s2.probs
        self.ch = ch.table
        (s1, s2), (u1, u2) = cfg.s_sizes, cfg.u_sizes
        (x1, x2), (y1, y2) = cfg.x_sizes, cfg.y_sizes
        self.carried_shape = (s1, s2, u1, u2, x1 * y1, x2 * y2)
        self.state = ChainState(self.carried_shape)
        # (s, u, st, ut, wt, x) one-hot encoders
        self.e1 = _one_hot(cfg.f1, x1)
        self.e2 = _one_hot(cfg.f2, x2)

    @property
    def n_states(self) -> int:
        return self.state.size

    def default_init(self) -> np.ndarray:
        return self.cfg.p_tilde.probs

    def apply(self, p: np.ndarray) -> np.ndarray:
        """One step p -> pK on carried coordinates; leading batch axes allowed"""
        p = np.asarray(p, dtype=float)
        batch = p.shape[:-6]
        s1, s2, u1, u2 = self.carried_shape[:4]
        x1, x2 = self.cfg.x_sizes
        y1, y2 = self.cfg.y_sizes
        table = np.einsum("...abcdef,ABaceX,CDbdfY,AC,AB,CD,XYuv->...ACBDXuYv",
                          p, self.e1, self.e2, self.ps, self.pu1, self.pu2, self.ch, optimize=True)
        return table.reshape(batch + (s1, s2, u1, u2, x1 * y1, x2 * y2))

    def dense(self) -> np.ndarray:
        """Row-stochastic matrix over packed carried states"""
        n = self.n_states
        if n > DENSE_CAP:
            raise DimensionCapError(f"dense coded kernel needs {n} states, cap is {DENSE_CAP}")
        eye = np.eye(n).reshape((n,) + self.carried_shape)
        return self.apply(eye).reshape(n, n)

    def full_joint(self, p: np.ndarray) -> JointPmf:
        """P_Z(c, t) = p(t) K(c | t) over Z_LABELS"""
        s1, s2, u1, u2, w1, w2 = self.carried_shape
        x1, x2 = self.cfg.x_sizes
        y1, y2 = self.cfg.y_sizes
        shape = (s1, s2, u1, u2, x1, x2, y1, y2, s1, s2, u1, u2, w1, w2)
        if np.prod(shape, dtype=np.int64) > SETTINGS.max_cells:
            raise DimensionCapError(f"full chain joint {shape} exceeds {SETTINGS.max_cells} cells")
        table = np.einsum("abcdef,ABaceX,CDbdfY,AC,AB,CD,XYuv->ACBDXYuvabcdef",
                          np.asarray(p, dtype=float).reshape(self.carried_shape),
                          self.e1, self.e2, self.ps, self.pu1, self.pu2, self.ch, optimize=True)
        axes = [Alphabet(n, lab) for n, lab in zip(shape, Z_LABELS)]
        return JointPmf.derived(axes, table)

    def extend(self, p: np.ndarray) -> JointPmf:
        return self.full_joint(p)


class MatrixKernel:
    """Plain row-stochastic matrix, for chains given directly"""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("transition matrix must be square")
        if np.any(m < 0) or np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-12:
            raise ValidationError("transition matrix rows must be pmfs")
        self.matrix = m
        self.carried_shape = (m.shape[0],)

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def default_init(self) -> np.ndarray:
        return np.full(self.n_states, 1.0 / self.n_states)

    def apply(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(p, dtype=float) @ self.matrix

    def dense(self) -> np.ndarray:
        return self.matrix

    def extend(self, p: np.ndarray) -> JointPmf:
        return JointPmf.derived([Alphabet(self.n_states, "Z")], p)


def build_kernel(cfg: Configuration, ch: TwcChannel, source: JointPmf) -> CodedKernel:
    return CodedKernel(cfg, ch, source)


@dataclass
class StationaryResult:
    p: np.ndarray
    residual: float
    sweeps: int
    method: str
    ambiguous: bool = False


def l1_residual(kernel, p: np.ndarray) -> float:
    return float(np.abs(kernel.apply(p) - p).sum())


def _direct_solve(kernel, init: np.ndarray) -> Tuple[np.ndarray, bool]:
    m = kernel.dense()
    n = m.shape[0]
    basis = null_space(m.T - np.eye(n), rcond=1e-10)
    if basis.shape[1] == 0:
        raise ConvergenceError("no stationary vector found by the direct solve")
    ambiguous = basis.shape[1] > 1
    if ambiguous:
        # reducible chain: keep the stationary law closest to the initialization
        coef, *_ = np.linalg.lstsq(basis, init.ravel(), rcond=None)
        vec = basis @ coef
        logger.warning(f"chain has {basis.shape[1]} stationary laws; reporting the one nearest the initialization")
    else:
        vec = basis[:, 0]
    vec = vec * np.sign(vec.sum()) if vec.sum() != 0 else np.abs(vec)
    vec = np.clip(vec, 0.0, None)
    if vec.sum() <= 0:
        raise ConvergenceError("direct solve produced no non-negative stationary vector")
    return (vec / vec.sum()).reshape(kernel.carried_shape), ambiguous


def solve_stationary(kernel, init: Optional[np.ndarray] = None, tol: Optional[float] = None,
                     max_sweeps: Optional[int] = None) -> StationaryResult:
    """Power iteration from init; on a stall or at the sweep cap, a direct null-space solve"""
    tol = SETTINGS.power_tol if tol is None else tol
    max_sweeps = SETTINGS.power_max_sweeps if max_sweeps is None else max_sweeps
    p = np.asarray(kernel.default_init() if init is None else init, dtype=float).reshape(kernel.carried_shape)
    p = p / p.sum()
    start = p
    checkpoint = np.inf
    for sweep in range(1, max_sweeps + 1):
        nxt = kernel.apply(p)
        residual = float(np.abs(nxt - p).sum())
        p = nxt / nxt.sum()
        if residual < tol:
            residual = l1_residual(kernel, p)
            logger.debug(f"power iteration converged after {sweep} sweeps, residual {residual:.2e}")
            return StationaryResult(p, residual, sweep, "power")
        if sweep % STALL_WINDOW == 0:
            if residual > 0.5 * checkpoint:
                logger.info(f"power iteration stalled at residual {residual:.2e}; trying direct solve")
                break
            checkpoint = residual
    try:
        vec, ambiguous = _direct_solve(kernel, start)
    except DimensionCapError:
        raise ConvergenceError(f"power iteration did not reach {tol} and the chain is too large to solve directly")
    residual = l1_residual(kernel, vec)
    if residual > max(tol, 1e-10):
        raise ConvergenceError(f"stationary residual {residual:.2e} above tolerance after direct solve")
    return StationaryResult(vec, residual, sweep, "direct", ambiguous)


def stationary_distribution(kernel, init: Optional[JointPmf] = None) -> JointPmf:
    """Stationary law of the chain, extended to full Z coordinates for coded kernels"""
    start = None if init is None else (init.probs if isinstance(init, JointPmf) else np.asarray(init))
    result = solve_stationary(kernel, start)
    logger.info(f"stationary law via {result.method}, residual {result.residual:.2e}")
    return kernel.extend(result.p)


# ---------------------------------------------------------------------------
# conditions and margins
# ---------------------------------------------------------------------------

def _table(pz: JointPmf, labels: Sequence[str]) -> np.ndarray:
    idx = [pz.axis_index(l) for l in labels]
    drop = tuple(i for i in range(pz.ndim) if i not in idx)
    table = pz.probs.sum(axis=drop) if drop else pz.probs
    kept = sorted(idx)
    return np.transpose(table, [kept.index(i) for i in idx])


def _conditionals_match(joint_a: np.ndarray, joint_b: np.ndarray, tol: float) -> bool:
    ma, mb = joint_a.sum(axis=1), joint_b.sum(axis=1)
    both = (ma > 0) & (mb > 0)
    ca = joint_a[both] / ma[both, None]
    cb = joint_b[both] / mb[both, None]
    return bool(np.all(np.abs(ca - cb) <= tol))


def check_stationarity_conditions(cfg: Configuration, pz: JointPmf, tol: float = 1e-9) -> Tuple[bool, bool]:
    """(P_S1S2 == P_St1St2, P_Uj|Sj == P_Utj|Stj for both j)"""
    cond1 = bool(np.max(np.abs(_table(pz, ["S1", "S2"]) - _table(pz, ["St1", "St2"]))) <= tol)
    cond2 = all(_conditionals_match(_table(pz, [s, u]), _table(pz, [st, ut]), tol)
                for s, u, st, ut in (("S1", "U1", "St1", "Ut1"), ("S2", "U2", "St2", "Ut2")))
    return cond1, cond2


class Margins(NamedTuple):
    lhs1: float
    rhs1: float
    lhs2: float
    rhs2: float

    @property
    def slack1(self) -> float:
        return self.rhs1 - self.lhs1

    @property
    def slack2(self) -> float:
        return self.rhs2 - self.lhs2


@dataclass
class StationaryReport:
    pz: JointPmf = field(repr=False)
    residual: float
    cond1_ok: bool
    cond2_ok: bool
    margins: Margins
    distortions: Tuple[float, float]
    satisfied: Tuple[bool, bool]
    vacuous: Tuple[bool, bool]
    source: str = "declared"
    ambiguous: bool = False

    def to_dict(self) -> dict:
        return {
            "residual": self.residual, "cond1_ok": self.cond1_ok, "cond2_ok": self.cond2_ok,
            "margins": dict(self.margins._asdict()),
            "distortions": list(self.distortions), "satisfied": list(self.satisfied),
            "vacuous": list(self.vacuous), "source": self.source, "ambiguous": self.ambiguous,
        }


def _hamming_default(d: Optional[DistortionMatrix], n: int, m: int) -> DistortionMatrix:
    return d if d is not None else DistortionMatrix.hamming(n, m)


def configuration_distortions(cfg: Configuration, pz: JointPmf, d1: Optional[DistortionMatrix] = None,
                              d2: Optional[DistortionMatrix] = None) -> Tuple[float, float]:
    """E d_j(St_j, reconstruction of St_j at the other terminal) under P_Z"""
    s1, s2 = cfg.s_sizes
    d1 = _hamming_default(d1, s1, cfg.shat_sizes[0])
    d2 = _hamming_default(d2, s2, cfg.shat_sizes[1])
    # terminal 2 reconstructs St1 with g2(Ut1, S2, U2, St2, Ut2, Wt2, Y2)
    t1 = _table(pz, ["Ut1", "S2", "U2", "St2", "Ut2", "Wt2", "Y2", "St1"])
    t2 = _table(pz, ["Ut2", "S1", "U1", "St1", "Ut1", "Wt1", "Y1", "St2"])
    cost1 = d1.d.T[cfg.g2]  # (..., st1)
    cost2 = d2.d.T[cfg.g1]
    return float((t1 * cost1).sum()), float((t2 * cost2).sum())


def _stationary_for(cfg: Configuration, kernel: CodedKernel) -> Tuple[np.ndarray, float, str, bool]:
    declared = cfg.p_tilde.probs
    residual = l1_residual(kernel, declared)
    if residual < DECLARED_TOL:
        return declared, residual, "declared", False
    logger.info(f"declared prior-block law has residual {residual:.2e}; iterating")
    result = solve_stationary(kernel, declared)
    return result.p, result.residual, "iterated", result.ambiguous


def theorem1_margins(cfg: Configuration, ch: TwcChannel, source: JointPmf,
                     d1: Optional[DistortionMatrix] = None, d2: Optional[DistortionMatrix] = None) -> StationaryReport:
    """
    lhs_j = I(St_j; Ut_j), rhs_j = I(Ut_j; S_j', U_j', St_j', Ut_j', Wt_j', X_j', Y_j') under P_Z

    A direction is satisfied when rhs - lhs > 1e-9, or vacuously when U_j is constant.
    """
    kernel = build_kernel(cfg, ch, source)
    p, residual, origin, ambiguous = _stationary_for(cfg, kernel)
    pz = kernel.full_joint(p)
    cond1, cond2 = check_stationarity_conditions(cfg, pz)
    margins = Margins(
        mutual_information(pz, ["St1"], ["Ut1"]),
        mutual_information(pz, ["Ut1"], ["S2", "U2", "St2", "Ut2", "Wt2", "X2", "Y2"]),
        mutual_information(pz, ["St2"], ["Ut2"]),
        mutual_information(pz, ["Ut2"], ["S1", "U1", "St1", "Ut1", "Wt1", "X1", "Y1"]),
    )
    vacuous = tuple(n == 1 for n in cfg.u_sizes)
    satisfied = (vacuous[0] or margins.slack1 > REPORT_EPS, vacuous[1] or margins.slack2 > REPORT_EPS)
    distortions = configuration_distortions(cfg, pz, d1, d2)
    if not (cond1 and cond2):
        logger.warning(f"configuration {cfg.name} violates the stationarity conditions")
    return StationaryReport(pz, residual, cond1, cond2, margins, distortions, satisfied, vacuous, origin, ambiguous)


def corollary1_margins(cfg: Configuration, ch: TwcChannel, source: JointPmf) -> Margins:
    """(I(St1;Ut1|St2,Ut2), I(Ut1;Y2|St2,Ut2), mirrored) for non-adaptive configurations"""
    if not cfg.is_pi_prime():
        raise ConfigurationError("corollary margins need encoders of (St, Ut) and decoders of (Ut', St, Ut, Y) only")
    kernel = build_kernel(cfg, ch, source)
    p, _, _, _ = _stationary_for(cfg, kernel)
    pz = kernel.full_joint(p)
    return Margins(
        mutual_information(pz, ["St1"], ["Ut1"], ["St2", "Ut2"]),
        mutual_information(pz, ["Ut1"], ["Y2"], ["St2", "Ut2"]),
        mutual_information(pz, ["St2"], ["Ut2"], ["St1", "Ut1"]),
        mutual_information(pz, ["Ut2"], ["Y1"], ["St1", "Ut1"]),
    )
