"""
Rate-distortion solvers: standard, Wyner-Ziv and conditional

Each solver sweeps a Lagrange multiplier by bisection to hit the distortion
target and runs Blahut-style alternating minimization at every multiplier.
A brute-force grid oracle checks the solvers on small instances.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr, logsumexp

from .errors import DimensionCapError, InfeasibleTargetError, ValidationError
from .prob import (LN2, Alphabet, CondPmf, JointPmf, binary_entropy,
                   mutual_information_from_channel)
from .settings import SETTINGS

logger = logging.getLogger(__name__)

ORACLE_CAP = 10 ** 8
BISECTION_STEPS = 60
CONVERGENCE_RTOL = 1e-9
CONVERGENCE_RUN = 5
KINDS = ("standard", "wz", "conditional")


@dataclass(frozen=True)
class DistortionMatrix:
    """d(s, s_hat) >= 0, rows indexed by source symbol"""

    d: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.d, dtype=float)
        if table.ndim != 2:
            raise ValidationError("distortion matrix must be two-dimensional")
        if np.any(np.isnan(table)) or np.any(table < 0):
            raise ValidationError("distortion entries must be non-negative")
        if not np.all(np.isfinite(table).any(axis=1)):
            raise ValidationError("every source symbol needs a reconstruction with finite distortion")
        table = table.copy()
        table.setflags(write=False)
        object.__setattr__(self, "d", table)

    @classmethod
    def hamming(cls, n: int, m: Optional[int] = None) -> "DistortionMatrix":
        m = n if m is None else m
        return cls(1.0 - np.eye(n, m))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.d.shape


@dataclass(frozen=True)
class RdQuery:
    target_distortion: float
    tolerance: float = SETTINGS.rd_tol
    max_iters: int = SETTINGS.rd_max_iters
    restarts: int = SETTINGS.rd_restarts
    seed: int = SETTINGS.seed

    def __post_init__(self):
        if not self.target_distortion >= 0:
            raise ValidationError("target distortion must be >= 0")
        if not self.tolerance > 0 or self.max_iters < 1 or self.restarts < 1:
            raise ValidationError("tolerance, max_iters and restarts must be positive")


@dataclass
class RdResult:
    rate: float
    achieving_kernel: CondPmf
    distortion: float
    decoder: Optional[np.ndarray] = None
    converged: bool = True
    iterations: int = 0
    multiplier: float = 0.0
    kind: str = "standard"
    resolution_bound: float = 0.0
    # (weight on the lower-D witness, its D, the other D) when the point is a time-shared mixture
    time_share: Optional[Tuple[float, float, float]] = None


@dataclass(frozen=True)
class RdProblem:
    """Source (one axis for standard RD, (S, S') otherwise) plus its distortion measure"""

    source: JointPmf
    distortion: DistortionMatrix
    aux_card: Optional[int] = None


class _ConvergenceMonitor:
    """Relative objective change below rtol for `run` consecutive iterations"""

    def __init__(self, rtol: float = CONVERGENCE_RTOL, run: int = CONVERGENCE_RUN):
        self.rtol = rtol
        self.run = run
        self.previous = None
        self.streak = 0

    def update(self, value: float) -> bool:
        if self.previous is not None:
            scale = max(abs(self.previous), 1e-12)
            if abs(value - self.previous) / scale < self.rtol:
                self.streak += 1
            else:
                self.streak = 0
        self.previous = value
        return self.streak >= self.run


def _safe_log(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, 1e-300))


def _rate_bits(p: np.ndarray, kernel: np.ndarray) -> float:
    return float(mutual_information_from_channel(p, kernel))


def _finite_d(d: np.ndarray) -> np.ndarray:
    # infinite distortion behaves like an unreachable reconstruction
    return np.where(np.isfinite(d), d, 1e300)


# ---------------------------------------------------------------------------
# standard and conditional RD: weighted families of independent cells
# ---------------------------------------------------------------------------

@dataclass
class _Cell:
    weight: float
    support: np.ndarray
    p: np.ndarray
    log_q: np.ndarray = None


@dataclass
class _FamilyPoint:
    kernels: List[np.ndarray]
    rate: float
    distortion: float
    iterations: int
    converged: bool
    multiplier: float


def _blahut_cell(cell: _Cell, d: np.ndarray, beta: float, max_iters: int):
    dd = _finite_d(d[cell.support])
    m = d.shape[1]
    if cell.log_q is None:
        log_q = np.full(m, -math.log(m))
    else:
        # warm start, kept off the simplex boundary so collapsed symbols can return
        log_q = np.log(0.999 * np.exp(cell.log_q) + 0.001 / m)
    monitor = _ConvergenceMonitor()
    kernel = None
    for it in range(1, max_iters + 1):
        logits = log_q[None, :] - beta * dd
        kernel = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        q = cell.p @ kernel
        log_q = _safe_log(q)
        rate = _rate_bits(cell.p, kernel)
        dist = float(cell.p @ (kernel * dd).sum(axis=1))
        if monitor.update(rate + beta * dist / LN2):
            cell.log_q = log_q
            return kernel, rate, dist, it, True
    cell.log_q = log_q
    return kernel, _rate_bits(cell.p, kernel), float(cell.p @ (kernel * dd).sum(axis=1)), max_iters, False


def _solve_family(cells: Sequence[_Cell], d: np.ndarray, beta: float, max_iters: int) -> _FamilyPoint:
    kernels, rate, dist, iters, ok = [], 0.0, 0.0, 0, True
    for cell in cells:
        k, r, dc, it, conv = _blahut_cell(cell, d, beta, max_iters)
        kernels.append(k)
        rate += cell.weight * r
        dist += cell.weight * dc
        iters = max(iters, it)
        ok = ok and conv
    return _FamilyPoint(kernels, rate, dist, iters, ok, beta)


def _family_eval(cells: Sequence[_Cell], d: np.ndarray, kernels: Sequence[np.ndarray]) -> Tuple[float, float]:
    rate = sum(c.weight * _rate_bits(c.p, k) for c, k in zip(cells, kernels))
    dist = sum(c.weight * float(c.p @ (k * _finite_d(d[c.support])).sum(axis=1)) for c, k in zip(cells, kernels))
    return float(rate), float(dist)


def _initial_multiplier(d: np.ndarray, p_min: float) -> float:
    return max(2.0 * float(np.max(d[np.isfinite(d)])) / p_min, 1.0)


def _sweep_family(cells: List[_Cell], d: np.ndarray, q: RdQuery) -> _FamilyPoint:
    """Bisection on the multiplier; returns the lowest-rate family meeting the target"""
    target = q.target_distortion
    p_min = min(float(c.p.min()) for c in cells)
    hi = _initial_multiplier(d, p_min)
    point_hi = _solve_family(cells, d, hi, q.max_iters)
    expansions = 0
    while point_hi.distortion > target + q.tolerance:
        expansions += 1
        if expansions > 60:
            raise InfeasibleTargetError(f"distortion {target} not reached even at multiplier {hi:.3g}")
        hi *= 2.0
        point_hi = _solve_family(cells, d, hi, q.max_iters)
    lo, point_lo = 0.0, None
    for _ in range(BISECTION_STEPS):
        if hi - lo <= 1e-12 * max(hi, 1.0):
            break
        mid = 0.5 * (lo + hi)
        point = _solve_family(cells, d, mid, q.max_iters)
        if point.distortion <= target + q.tolerance:
            hi, point_hi = mid, point
        else:
            lo, point_lo = mid, point
        if target - q.tolerance <= point_hi.distortion <= target + q.tolerance:
            break
    logger.debug(f"multiplier bracket [{lo:.6g}, {hi:.6g}], D_hi={point_hi.distortion:.6g}")
    if point_lo is not None and point_hi.distortion < target < point_lo.distortion:
        # time-sharing between the two bracketing solutions lands on the target exactly
        t = (target - point_hi.distortion) / (point_lo.distortion - point_hi.distortion)
        mixed = [t * a + (1.0 - t) * b for a, b in zip(point_lo.kernels, point_hi.kernels)]
        rate, dist = _family_eval(cells, d, mixed)
        if rate < point_hi.rate and dist <= target + q.tolerance:
            return _FamilyPoint(mixed, rate, dist, point_hi.iterations, point_hi.converged, point_hi.multiplier)
    return point_hi


def _min_distortion(p_joint: np.ndarray, d: np.ndarray) -> float:
    """Distortion when the encoder describes S exactly: sum p(s) min d(s, .)"""
    p_s = p_joint.reshape(d.shape[0], -1).sum(axis=1)
    return float(p_s @ np.min(d, axis=1))


def _zero_rate_decoder(p_cond_mass: np.ndarray, d: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Best reconstruction per side-information cell without any description

    p_cond_mass: (|S|, |S'|) joint mass. Returns (argmin per s', distortion)
    """
    expected = _finite_d(d).T @ p_cond_mass
    best = np.argmin(expected, axis=0)
    return best, float(expected[best, np.arange(expected.shape[1])].sum())


def _check_source(source: JointPmf, ndim: int, d: DistortionMatrix) -> None:
    if source.ndim != ndim:
        raise ValidationError(f"source must have {ndim} axis(es), got {source.ndim}")
    if source.shape[0] != d.shape[0]:
        raise ValidationError(f"distortion rows {d.shape[0]} do not match |S|={source.shape[0]}")


def _assemble_kernel(n_s: int, d: np.ndarray, cells: Sequence[_Cell], kernels: Sequence[np.ndarray]) -> np.ndarray:
    rows = np.zeros((n_s, d.shape[1]))
    rows[np.arange(n_s), np.argmin(_finite_d(d), axis=1)] = 1.0
    out = []
    for cell, k in zip(cells, kernels):
        table = rows.copy()
        table[cell.support] = k
        out.append(table)
    return np.stack(out)


def standard_rd(source: JointPmf, d: DistortionMatrix, q: RdQuery) -> RdResult:
    """min I(S; S_hat) subject to E d(S, S_hat) <= D"""
    _check_source(source, 1, d)
    p = source.probs
    dd = d.d
    target = q.target_distortion
    d_min = _min_distortion(p, dd)
    if target < d_min - q.tolerance:
        raise InfeasibleTargetError(f"target {target} is below the minimum distortion {d_min:.6g}")
    support = np.flatnonzero(p > 0)
    expected = p @ _finite_d(dd)
    d_max = float(expected.min())
    if target >= d_max:
        kernel = np.zeros(dd.shape)
        kernel[:, int(np.argmin(expected))] = 1.0
        return _standard_result(source, d, kernel, 0, True, 0.0)
    cells = [_Cell(1.0, support, p[support] / p[support].sum())]
    point = _sweep_family(cells, dd, q)
    kernel = _assemble_kernel(p.size, dd, cells, point.kernels)[0]
    if not point.converged:
        logger.warning(f"standard RD at D={target} stopped at max_iters={q.max_iters}")
    return _standard_result(source, d, kernel, point.iterations, point.converged, point.multiplier)


def _standard_result(source, d, kernel, iterations, converged, beta) -> RdResult:
    rate, dist = evaluate_standard(source, d, kernel)
    cond = CondPmf([Alphabet(source.shape[0], "S")], [Alphabet(d.shape[1], "S_hat")], kernel)
    return RdResult(rate, cond, dist, None, converged, iterations, beta, "standard")


def evaluate_standard(source: JointPmf, d: DistortionMatrix, kernel: np.ndarray) -> Tuple[float, float]:
    p = source.probs
    return _rate_bits(p, kernel), float(p @ (kernel * _finite_d(d.d)).sum(axis=1))


def conditional_rd(joint_source: JointPmf, d: DistortionMatrix, q: RdQuery) -> RdResult:
    """min I(S; S_hat | S') subject to E d(S, S_hat) <= D, side information at both ends"""
    _check_source(joint_source, 2, d)
    pj = joint_source.probs
    dd = d.d
    target = q.target_distortion
    d_min = _min_distortion(pj, dd)
    if target < d_min - q.tolerance:
        raise InfeasibleTargetError(f"target {target} is below the minimum distortion {d_min:.6g}")
    n_s, n_side = pj.shape
    best, d_max = _zero_rate_decoder(pj, dd)
    if target >= d_max:
        kernel = np.zeros((n_s, n_side, dd.shape[1]))
        kernel[:, np.arange(n_side), best] = 1.0
        return _conditional_result(joint_source, d, kernel, 0, True, 0.0)
    cells, sides = [], []
    for s2 in range(n_side):
        col = pj[:, s2]
        mass = col.sum()
        if mass <= 0:
            continue
        support = np.flatnonzero(col > 0)
        cells.append(_Cell(float(mass), support, col[support] / mass))
        sides.append(s2)
    point = _sweep_family(cells, dd, q)
    per_cell = _assemble_kernel(n_s, dd, cells, point.kernels)
    kernel = np.zeros((n_s, n_side, dd.shape[1]))
    kernel[:, :, :] = per_cell[0][:, None, :]
    for s2, table in zip(sides, per_cell):
        kernel[:, s2, :] = table
    if not point.converged:
        logger.warning(f"conditional RD at D={target} stopped at max_iters={q.max_iters}")
    return _conditional_result(joint_source, d, kernel, point.iterations, point.converged, point.multiplier)


def evaluate_conditional(joint_source: JointPmf, d: DistortionMatrix, kernel: np.ndarray) -> Tuple[float, float]:
    pj = joint_source.probs
    rate, dist = 0.0, 0.0
    dd = _finite_d(d.d)
    for s2 in range(pj.shape[1]):
        mass = pj[:, s2].sum()
        if mass <= 0:
            continue
        p = pj[:, s2] / mass
        rate += mass * _rate_bits(p, kernel[:, s2, :])
        dist += mass * float(p @ (kernel[:, s2, :] * dd).sum(axis=1))
    return float(rate), float(dist)


def _conditional_result(joint_source, d, kernel, iterations, converged, beta) -> RdResult:
    rate, dist = evaluate_conditional(joint_source, d, kernel)
    cond = CondPmf([Alphabet(joint_source.shape[0], "S"), Alphabet(joint_source.shape[1], "S_side")],
                   [Alphabet(d.shape[1], "S_hat")], kernel)
    return RdResult(rate, cond, dist, None, converged, iterations, beta, "conditional")


# ---------------------------------------------------------------------------
# Wyner-Ziv
# ---------------------------------------------------------------------------

def evaluate_wz(joint_source: JointPmf, d: DistortionMatrix, kernel: np.ndarray,
                decoder: np.ndarray) -> Tuple[float, float]:
    """(I(S;T|S'), E d(S, h(T,S'))) for P(T|S) = kernel and h = decoder[t, s']"""
    pj = joint_source.probs
    full = pj[:, :, None] * kernel[:, None, :]  # (s, s', t)
    rate = (entr(full.sum(axis=0)).sum() + entr(pj).sum()
            - entr(full).sum() - entr(pj.sum(axis=0)).sum()) / LN2
    dd = _finite_d(d.d)
    n_t, n_side = decoder.shape
    cost = dd[:, decoder]  # (s, t, s')
    dist = float(np.einsum("abt,atb->", full, cost))
    return max(0.0, float(rate)), dist


class _WzState:
    """Alternating minimization of I(S;T|S') + beta*E d at a fixed multiplier"""

    def __init__(self, pj: np.ndarray, d: np.ndarray, n_t: int):
        self.pj = pj
        self.d = d
        self.n_t = n_t
        self.p_s = pj.sum(axis=1)
        self.p_side = pj.sum(axis=0)
        self.p_side_given_s = pj / self.p_s[:, None]
        self.p_s_given_side = pj / np.where(self.p_side > 0, self.p_side, 1.0)[None, :]

    def decoder_for(self, kernel: np.ndarray) -> np.ndarray:
        # cost[s_hat, t, s'] = sum_s p(s, s') P(t|s) d(s, s_hat)
        weights = self.pj[:, None, :] * kernel[:, :, None]  # (s, t, s')
        cost = np.einsum("ah,atb->htb", self.d, weights)
        return np.argmin(cost, axis=0)

    def kernel_step(self, kernel: np.ndarray, decoder: np.ndarray, beta: float) -> np.ndarray:
        p_t_given_side = self.p_s_given_side.T @ kernel  # (s', t)
        log_side = _safe_log(p_t_given_side)
        memory = self.p_side_given_s @ log_side  # (s, t)
        c = np.einsum("ab,atb->at", self.p_side_given_s, self.d[:, decoder])
        logits = memory - beta * c
        return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))

    def objective(self, kernel: np.ndarray, decoder: np.ndarray, beta: float, problem) -> Tuple[float, float, float]:
        rate, dist = evaluate_wz(problem.source, problem.distortion, kernel, decoder)
        return rate + beta * dist / LN2, rate, dist


@dataclass
class _WzPoint:
    kernel: np.ndarray
    decoder: np.ndarray
    rate: float
    distortion: float
    objective: float
    iterations: int
    converged: bool
    multiplier: float


def _wz_solve_at(state: _WzState, problem: RdProblem, support_problem: RdProblem, beta: float,
                 starts: Sequence[np.ndarray], max_iters: int) -> _WzPoint:
    best = None
    for start in starts:
        kernel = start.copy()
        decoder = state.decoder_for(kernel)
        monitor = _ConvergenceMonitor()
        converged = False
        it = 0
        for it in range(1, max_iters + 1):
            kernel = state.kernel_step(kernel, decoder, beta)
            decoder = state.decoder_for(kernel)
            obj, _, _ = state.objective(kernel, decoder, beta, support_problem)
            if monitor.update(obj):
                converged = True
                break
        obj, rate, dist = state.objective(kernel, decoder, beta, support_problem)
        if best is None or obj < best.objective - 1e-12:
            best = _WzPoint(kernel, decoder, rate, dist, obj, it, converged, beta)
    return best


def _wz_starts(n_s: int, n_t: int, restarts: int, seed: int) -> List[np.ndarray]:
    starts = []
    if n_t >= n_s:
        ident = np.full((n_s, n_t), 1e-3)
        ident[np.arange(n_s), np.arange(n_s)] = 1.0
        starts.append(ident / ident.sum(axis=1, keepdims=True))
    children = np.random.SeedSequence(seed).spawn(max(restarts - len(starts), 1))
    for child in children:
        rng = np.random.default_rng(child)
        starts.append(rng.dirichlet(np.ones(n_t), size=n_s))
    return starts[:max(restarts, 1)]


def _wz_mixture(lo: _WzPoint, hi: _WzPoint, target: float, n_t: int, problem: RdProblem,
                tol: float) -> Optional[_WzPoint]:
    """Time-share two solutions on disjoint auxiliary symbols when they fit in n_t"""
    p_s = problem.source.probs.sum(axis=1)
    used_lo = np.flatnonzero(p_s @ lo.kernel > 0)
    used_hi = np.flatnonzero(p_s @ hi.kernel > 0)
    if len(used_lo) + len(used_hi) > n_t:
        return None
    t = (target - hi.distortion) / (lo.distortion - hi.distortion)
    n_s, n_side = problem.source.shape
    kernel = np.zeros((n_s, n_t))
    decoder = np.zeros((n_t, n_side), dtype=int)
    kernel[:, :len(used_lo)] = t * lo.kernel[:, used_lo]
    decoder[:len(used_lo)] = lo.decoder[used_lo]
    stop = len(used_lo) + len(used_hi)
    kernel[:, len(used_lo):stop] = (1.0 - t) * hi.kernel[:, used_hi]
    decoder[len(used_lo):stop] = hi.decoder[used_hi]
    # rows with all mass on unused symbols (zero-probability s) stay normalized
    leftover = 1.0 - kernel.sum(axis=1)
    kernel[:, 0] += np.clip(leftover, 0.0, None)
    rate, dist = evaluate_wz(problem.source, problem.distortion, kernel, decoder)
    if dist > target + tol or rate >= hi.rate:
        return None
    return _WzPoint(kernel, decoder, rate, dist, rate, hi.iterations, hi.converged, hi.multiplier)


def wz_rd(joint_source: JointPmf, d: DistortionMatrix, aux_card: Optional[int], q: RdQuery) -> RdResult:
    """
    Wyner-Ziv RD: min I(S;T|S') over P(T|S) and decoders h(T, S') with E d(S, h(T,S')) <= D

    T - S - S' holds by construction since only P(T|S) is optimized.
    """
    _check_source(joint_source, 2, d)
    n_s, n_side = joint_source.shape
    n_t = n_s + 1 if aux_card is None else int(aux_card)
    if n_t < 1:
        raise ValidationError("aux_card must be positive")
    if n_t > n_s + 1:
        raise ValidationError(f"aux_card {n_t} exceeds the cardinality bound |S|+1={n_s + 1}")
    pj = joint_source.probs
    dd = d.d
    target = q.target_distortion
    d_min = _min_distortion(pj, dd)
    if target < d_min - q.tolerance:
        raise InfeasibleTargetError(f"target {target} is below the minimum distortion {d_min:.6g}")
    problem = RdProblem(joint_source, d, n_t)
    best_zero, d_max = _zero_rate_decoder(pj, dd)
    if target >= d_max:
        kernel = np.zeros((n_s, n_t))
        kernel[:, 0] = 1.0
        decoder = np.tile(best_zero, (n_t, 1))
        return _wz_result(problem, kernel, decoder, 0, True, 0.0)

    live = np.flatnonzero(pj.sum(axis=1) > 0)
    sub = JointPmf.derived([Alphabet(len(live), "S"), Alphabet(n_side, "S_side")], pj[live])
    sub_problem = RdProblem(sub, DistortionMatrix(dd[live]), n_t)
    state = _WzState(sub.probs, _finite_d(dd[live]), n_t)
    starts = _wz_starts(len(live), n_t, q.restarts, q.seed)

    p_min = float(sub.probs.sum(axis=1).min())
    hi = _initial_multiplier(dd, p_min)
    point_hi = _wz_solve_at(state, problem, sub_problem, hi, starts, q.max_iters)
    expansions = 0
    while point_hi.distortion > target + q.tolerance:
        expansions += 1
        if expansions > 40:
            raise InfeasibleTargetError(
                f"WZ target {target} not reached with aux_card={n_t} (best D={point_hi.distortion:.6g})")
        hi *= 2.0
        point_hi = _wz_solve_at(state, problem, sub_problem, hi, starts, q.max_iters)
    lo, point_lo = 0.0, None
    for _ in range(BISECTION_STEPS // 2):
        if hi - lo <= 1e-9 * max(hi, 1.0):
            break
        mid = 0.5 * (lo + hi)
        point = _wz_solve_at(state, problem, sub_problem, mid, starts, q.max_iters)
        if point.distortion <= target + q.tolerance:
            hi, point_hi = mid, point
        else:
            lo, point_lo = mid, point
        if target - q.tolerance <= point_hi.distortion <= target + q.tolerance:
            break
    chosen = point_hi
    if point_lo is not None and point_hi.distortion < target < point_lo.distortion:
        mixed = _wz_mixture(point_lo, point_hi, target, n_t, sub_problem, q.tolerance)
        if mixed is not None:
            chosen = mixed
    kernel = np.zeros((n_s, n_t))
    kernel[:, 0] = 1.0
    kernel[live] = chosen.kernel
    if not chosen.converged:
        logger.warning(f"WZ RD at D={target} stopped at max_iters={q.max_iters} on the best restart")
    return _wz_result(problem, kernel, chosen.decoder, chosen.iterations, chosen.converged, chosen.multiplier)


def _wz_result(problem: RdProblem, kernel, decoder, iterations, converged, beta) -> RdResult:
    rate, dist = evaluate_wz(problem.source, problem.distortion, kernel, decoder)
    n_s = problem.source.shape[0]
    cond = CondPmf([Alphabet(n_s, "S")], [Alphabet(kernel.shape[1], "T")], kernel)
    return RdResult(rate, cond, dist, np.asarray(decoder, dtype=int), converged, iterations, beta, "wz")


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def simplex_grid(parts: int, steps: int) -> np.ndarray:
    """All pmfs over `parts` symbols whose entries are multiples of 1/steps"""
    if parts == 1:
        return np.ones((1, 1))
    rows = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            rows.append(prefix + [remaining])
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], steps, parts)
    return np.asarray(rows, dtype=float) / steps


def _oracle_combinations(n_rows: int, row_grid: np.ndarray, chunk: int = 200_000):
    n = row_grid.shape[0]
    total = n ** n_rows
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.unravel_index(flat, (n,) * n_rows)
        yield np.stack([row_grid[i] for i in idx], axis=1)  # (chunk, rows, m)


def rd_brute_oracle(kind: str, problem: RdProblem, grid_steps: int, q: RdQuery) -> RdResult:
    """
    Exhaustive grid search over kernel simplices; grid_steps**dim must stay below 1e8

    For WZ the decoder is chosen per cell as the distortion-minimizing map, which
    is the best of all deterministic decoders because the rate does not depend on h.
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown RD kind {kind!r}")
    pj = problem.source.probs
    dd = _finite_d(problem.distortion.d)
    target = q.target_distortion + q.tolerance
    n_s = pj.shape[0]
    if kind == "standard":
        rows, m = n_s, dd.shape[1]
    elif kind == "conditional":
        rows, m = n_s * pj.shape[1], dd.shape[1]
    else:
        m = problem.aux_card or n_s + 1
        rows = n_s
    dim = rows * (m - 1)
    if float(grid_steps) ** dim > ORACLE_CAP:
        raise DimensionCapError(f"oracle grid {grid_steps}^{dim} exceeds {ORACLE_CAP:.0e}")
    row_grid = simplex_grid(m, grid_steps)
    best_rate, best_kernel, best_decoder, best_dist = math.inf, None, None, math.inf
    for batch in _oracle_combinations(rows, row_grid):
        if kind == "standard":
            p = pj
            joint = p[None, :, None] * batch
            q_out = joint.sum(axis=1)
            rate = (entr(q_out).sum(axis=1) + entr(p).sum() - entr(joint).sum(axis=(1, 2))) / LN2
            dist = (joint * dd[None]).sum(axis=(1, 2))
            decoders = None
        elif kind == "conditional":
            kern = batch.reshape(-1, n_s, pj.shape[1], m)
            joint = pj[None, :, :, None] * kern  # (b, s, s', s_hat)
            h_side_hat = entr(joint.sum(axis=1)).sum(axis=(1, 2))
            rate = (entr(joint.sum(axis=3)).sum(axis=(1, 2)) + h_side_hat
                    - entr(joint).sum(axis=(1, 2, 3)) - entr(pj.sum(axis=0)).sum()) / LN2
            dist = (joint * dd[None, :, None, :]).sum(axis=(1, 2, 3))
            decoders = None
        else:
            joint = pj[None, :, :, None] * batch[:, :, None, :]  # (b, s, s', t)
            rate = (entr(joint.sum(axis=1)).sum(axis=(1, 2)) + entr(pj).sum()
                    - entr(joint).sum(axis=(1, 2, 3)) - entr(pj.sum(axis=0)).sum()) / LN2
            cost = np.einsum("bsut,sh->bhtu", joint, dd)  # (b, s_hat, t, s')
            decoders = np.argmin(cost, axis=1)
            dist = cost.min(axis=1).sum(axis=(1, 2))
        rate = np.clip(rate, 0.0, None)
        feasible = dist <= target
        if not np.any(feasible):
            continue
        cand = np.where(feasible, rate, np.inf)
        i = int(np.argmin(cand))
        if cand[i] < best_rate:
            best_rate, best_dist = float(cand[i]), float(dist[i])
            best_kernel = batch[i].copy()
            best_decoder = None if decoders is None else decoders[i].copy()
    if best_kernel is None:
        raise InfeasibleTargetError(f"no grid point meets distortion {q.target_distortion}")
    # rounding each kernel row to the 1/grid_steps lattice moves it by <= (m-1)/grid_steps in L1, so the
    # joint by eps <= rows*(m-1)/grid_steps; entropy continuity |dH| <= eps*log2(K) + h_b(eps) <= eps*log2(e*K/eps)
    # is of order eps*log2(m*grid_steps), and the rows factor in eps covers the e and the two entropy terms of I
    bound = rows * (m - 1) / grid_steps * math.log2(max(m, 2) * grid_steps)
    if kind == "standard":
        res = _standard_result(problem.source, problem.distortion, best_kernel, 0, True, 0.0)
    elif kind == "conditional":
        res = _conditional_result(problem.source, problem.distortion,
                                  best_kernel.reshape(n_s, pj.shape[1], m), 0, True, 0.0)
    else:
        res = _wz_result(problem, best_kernel, best_decoder, 0, True, 0.0)
    res.resolution_bound = bound
    logger.info(f"oracle {kind}: rate {res.rate:.6f} at D={res.distortion:.6f} (bound {bound:.3g})")
    return res


# ---------------------------------------------------------------------------
# curves and closed forms
# ---------------------------------------------------------------------------

def solve(kind: str, problem: RdProblem, q: RdQuery) -> RdResult:
    if kind == "standard":
        return standard_rd(problem.source, problem.distortion, q)
    if kind == "wz":
        return wz_rd(problem.source, problem.distortion, problem.aux_card, q)
    if kind == "conditional":
        return conditional_rd(problem.source, problem.distortion, q)
    raise ValidationError(f"unknown RD kind {kind!r}")


def rd_curve(kind: str, problem: RdProblem, d_grid: Sequence[float], q: Optional[RdQuery] = None,
             threads: int = 1) -> List[Tuple[float, float]]:
    """Rate at every grid point: running minimum over the grid, then the lower convex envelope"""
    grid = [float(x) for x in d_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValidationError("d_grid must be sorted ascending")
    base = q or RdQuery(0.0)
    queries = [replace(base, target_distortion=x) for x in grid]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda qq: solve(kind, problem, qq), queries))
    else:
        results = [solve(kind, problem, qq) for qq in queries]
    return [(x, r.rate) for x, r in zip(grid, _time_share(grid, results))]


def curve_results(kind: str, problem: RdProblem, d_grid: Sequence[float], q: Optional[RdQuery] = None) -> List[RdResult]:
    """Per-point results with the same witness reuse and time-sharing as rd_curve"""
    grid = [float(x) for x in d_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValidationError("d_grid must be sorted ascending")
    base = q or RdQuery(0.0)
    results = [solve(kind, problem, replace(base, target_distortion=x)) for x in grid]
    return _time_share(grid, results)


def _lower_hull(xs: np.ndarray, ys: np.ndarray) -> List[int]:
    """Indices of the lower convex boundary of the points (xs ascending)"""
    hull: List[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross <= 1e-15:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def _time_share(grid: List[float], results: List[RdResult]) -> List[RdResult]:
    """Running minimum over the grid, then the lower convex envelope of (D, rate).

    A point under a hull chord is reached by time-sharing the two hull witnesses
    at its ends; it keeps the lower-D witness and records the mixture in time_share.
    """
    out: List[RdResult] = []
    for res in results:
        out.append(out[-1] if out and out[-1].rate < res.rate else res)
    if len(out) < 3:
        return out
    xs = np.asarray(grid)
    ys = np.array([r.rate for r in out])
    hull = _lower_hull(xs, ys)
    for a, b in zip(hull, hull[1:]):
        span = xs[b] - xs[a]
        for i in range(a + 1, b):
            lam = float((xs[b] - xs[i]) / span) if span > 0 else 1.0
            rate = lam * ys[a] + (1.0 - lam) * ys[b]
            if rate < ys[i] - 1e-12:
                dist = lam * out[a].distortion + (1.0 - lam) * out[b].distortion
                out[i] = replace(out[a], rate=float(rate), distortion=float(dist),
                                 time_share=(lam, float(xs[a]), float(xs[b])))
    return out


def uniform_binary_rd(D) -> np.ndarray:
    """1 - H_b(D) on [0, 1/2], zero beyond"""
    D = np.minimum(np.asarray(D, dtype=float), 0.5)
    return 1.0 - binary_entropy(D)


def z_source_joint(q1: float, alpha1: float) -> JointPmf:
    """(S1, S2) with S2 obtained from S1 through a Z-channel: 1 -> 0 with probability alpha1"""
    if not (0.0 <= q1 <= 1.0 and 0.0 <= alpha1 <= 1.0):
        raise ValidationError("q1 and alpha1 must lie in [0, 1]")
    table = np.array([[1.0 - q1, 0.0], [q1 * alpha1, q1 * (1.0 - alpha1)]])
    return JointPmf.from_table(table, ["S1", "S2"])


def z_source_reverse_params(q1: float, alpha1: float) -> Tuple[float, float]:
    """Parameters (q, alpha) of the same closed form in the S2-given-S1 direction"""
    mass0 = 1.0 - q1 + q1 * alpha1
    return mass0, q1 * alpha1 / mass0


def z_source_conditional_rd(q: float, alpha: float, D) -> np.ndarray:
    """(1-q+q*a) [H_b(q*a/(1-q+q*a)) - H_b(D/(1-q+q*a))], clipped at zero"""
    mass = 1.0 - q + q * alpha
    x = q * alpha / mass
    cap = min(x, 1.0 - x)
    ratio = np.minimum(np.asarray(D, dtype=float) / mass, cap)
    return np.clip(mass * (binary_entropy(x) - binary_entropy(ratio)), 0.0, None)
