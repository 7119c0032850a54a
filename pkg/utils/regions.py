"""
Distortion-region feasibility: outer bounds, complete theorems and separate-coding corollaries

Every check reduces to one question: does the required channel-rate pair
(K/N * R_1, K/N * R_2) fit inside a channel-rate region? Outer bounds compare
against the joint-input (outer) frontier, achievability results against the
product-input (inner) frontier.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .capacity import (FrontierOptions, FrontierPoint, RatePair, RegionFrontier, SymmetryReport, _upper_hull,
                       convexify, han_rate_eval, numerical_symmetry, shannon_inner_frontier,
                       shannon_outer_frontier)
from .channels import TwcChannel
from .errors import CommonPartError, ValidationError
from .prob import Alphabet, FinitePmf, JointPmf, conditional_entropy, marginalize, mutual_information
from .rate_distortion import DistortionMatrix, RdQuery, conditional_rd, standard_rd, wz_rd

logger = logging.getLogger(__name__)

BOUNDARY_EPS = 1e-9
WZ_HYPOTHESIS_TOL = 2e-3
THEOREMS = ("thm1_indep", "thm2_lossless", "thm3_eqwz", "thm4_common")
COROLLARIES = ("cor3_sscc_han", "cor4_sscc_shannon")


@dataclass(frozen=True)
class DistortionPair:
    d1: float
    d2: float

    def __post_init__(self):
        for v in (self.d1, self.d2):
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"distortions must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class RateSpec:
    k: int = 1
    n: int = 1

    def __post_init__(self):
        if int(self.k) != self.k or int(self.n) != self.n or self.k < 1 or self.n < 1:
            raise ValidationError(f"rate K/N needs positive integers, got {self.k}/{self.n}")

    @property
    def rate(self) -> float:
        return self.k / self.n


@dataclass
class FeasibilityVerdict:
    """
    status is "feasible", "infeasible" or "boundary" (strict achievability inequality met with equality)

    slack[name] = N * (channel rate available) - K * (source rate required), per direction
    """

    status: str
    binding_constraints: List[str]
    slack: Dict[str, float]
    witness: Optional[np.ndarray] = None
    witness_rates: Optional[RatePair] = None
    required: Tuple[float, float] = (0.0, 0.0)
    notes: List[str] = field(default_factory=list)
    hypothesis_ok: Optional[bool] = None

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def to_dict(self) -> dict:
        return {
            "status": self.status, "feasible": self.feasible,
            "binding_constraints": list(self.binding_constraints),
            "slack": dict(self.slack),
            "witness": None if self.witness is None else [float(v) for v in self.witness],
            "witness_rates": None if self.witness_rates is None else [self.witness_rates.r1, self.witness_rates.r2],
            "required": list(self.required), "notes": list(self.notes), "hypothesis_ok": self.hypothesis_ok,
        }


class RegionEngine:
    """
    Shared caches for one problem setting

    RD values are memoized per (kind, direction, D, tolerance) and the channel
    frontiers are computed once and reused by every distortion target.
    """

    def __init__(self, source: JointPmf, d1: DistortionMatrix, d2: DistortionMatrix, channel: TwcChannel,
                 options: Optional[FrontierOptions] = None, query: Optional[RdQuery] = None,
                 aux_cards: Tuple[Optional[int], Optional[int]] = (None, None)):
        if source.ndim != 2:
            raise ValidationError("source must be a joint pmf over (S1, S2)")
        if d1.shape[0] != source.shape[0] or d2.shape[0] != source.shape[1]:
            raise ValidationError("distortion matrices do not match the source alphabets")
        self.source = source
        self.d = (d1, d2)
        self.channel = channel
        self.options = options or FrontierOptions()
        self.query = query or RdQuery(0.0)
        self.aux_cards = aux_cards
        self._rd: Dict[tuple, float] = {}
        self._inner: Optional[RegionFrontier] = None
        self._outer: Optional[RegionFrontier] = None
        self._symmetry: Optional[SymmetryReport] = None

    # source side -----------------------------------------------------------

    def _pair_joint(self, j: int) -> JointPmf:
        """(S_j, S_j') joint"""
        return self.source if j == 0 else self.source.transpose([1, 0])

    def rd(self, kind: str, j: int, D: float) -> float:
        key = (kind, j, round(float(D), 12), self.query.tolerance)
        if key not in self._rd:
            q = RdQuery(float(D), self.query.tolerance, self.query.max_iters, self.query.restarts, self.query.seed)
            if kind == "standard":
                marg = marginalize(self.source, [j]).probs
                res = standard_rd(FinitePmf(marg / marg.sum()), self.d[j], q)
            elif kind == "conditional":
                res = conditional_rd(self._pair_joint(j), self.d[j], q)
            elif kind == "wz":
                res = wz_rd(self._pair_joint(j), self.d[j], self.aux_cards[j], q)
            else:
                raise ValidationError(f"unknown RD kind {kind!r}")
            if not res.converged:
                logger.warning(f"{kind} RD of S{j + 1} at D={D} did not converge")
            self._rd[key] = res.rate
        return self._rd[key]

    def mutual_information(self) -> float:
        return mutual_information(self.source, [0], [1])

    def conditional_entropy(self, j: int) -> float:
        return conditional_entropy(self.source, [j], [1 - j])

    def is_independent(self, tol: float = 1e-12) -> bool:
        p = self.source.probs
        return bool(np.max(np.abs(p - np.outer(p.sum(axis=1), p.sum(axis=0)))) <= tol)

    # channel side ----------------------------------------------------------

    def inner(self) -> RegionFrontier:
        if self._inner is None:
            self._inner = shannon_inner_frontier(self.channel, self.options)
        return self._inner

    def outer(self) -> RegionFrontier:
        if self._outer is None:
            self._outer = shannon_outer_frontier(self.channel, self.options, inner=self.inner())
        return self._outer

    def symmetry(self) -> SymmetryReport:
        if self._symmetry is None:
            self._symmetry = numerical_symmetry(self.channel, self.options)
            self._inner = self._inner or self._symmetry.inner
            self._outer = self._outer or self._symmetry.outer
        return self._symmetry


def _max_other(hull: np.ndarray, j: int, floor: float) -> float:
    """Largest coordinate j over the hull polyline subject to coordinate 1-j >= floor"""
    other = 1 - j
    if floor <= 0:
        return float(hull[:, j].max())
    if floor > hull[:, other].max() + 1e-15:
        return -math.inf
    # the polyline is monotone: coordinate j decreases while coordinate 1-j increases
    order = np.argsort(hull[:, other])
    xs, ys = hull[order, other], hull[order, j]
    return float(np.interp(floor, xs, ys))


def compare_to_region(frontier: RegionFrontier, required: Tuple[float, float], rate: RateSpec,
                      strict: bool) -> FeasibilityVerdict:
    """
    Does (required_1, required_2), in source bits per source symbol, fit N * region / K?

    The region is the convex, downward-closed hull of the frontier points.
    strict=True treats equality as "boundary" (achievability), otherwise equality is feasible.
    """
    xy = frontier.coords()
    a = (rate.rate * required[0], rate.rate * required[1])
    hull = _upper_hull(xy) if xy.size else np.zeros((1, 2))
    slack = {}
    for j, name in enumerate(("direction_1", "direction_2")):
        best = _max_other(hull, j, a[1 - j])
        if best == -math.inf:
            # the other direction is out of reach; report how far
            slack[name] = rate.n * (float(hull[:, 1 - j].max()) - a[1 - j])
        else:
            slack[name] = rate.n * (best - a[j])
    worst = min(slack.values())
    if strict:
        status = "feasible" if worst > BOUNDARY_EPS else ("boundary" if worst >= -BOUNDARY_EPS else "infeasible")
    else:
        status = "feasible" if worst >= -BOUNDARY_EPS else "infeasible"
    binding = [k for k, v in slack.items() if v <= worst + BOUNDARY_EPS]
    witness, witness_rates = None, None
    if frontier.points:
        point = max(frontier.points, key=lambda p: min(p.pair.r1 - a[0], p.pair.r2 - a[1]))
        witness, witness_rates = point.witness, point.pair
    return FeasibilityVerdict(status, binding, slack, witness, witness_rates, (float(required[0]), float(required[1])))


def _engine(src, d1, d2, ch, engine: Optional[RegionEngine]) -> RegionEngine:
    if engine is not None:
        return engine
    return RegionEngine(src, d1, d2, ch)


def lemma1_check(src: JointPmf, d1: DistortionMatrix, d2: DistortionMatrix, ch: TwcChannel, rate: RateSpec,
                 target: DistortionPair, engine: Optional[RegionEngine] = None) -> FeasibilityVerdict:
    """K*R_j(D_j) <= K*I(S1;S2) + N*I(X_j;Y_j'|X_j') for some joint input law"""
    eng = _engine(src, d1, d2, ch, engine)
    mi = eng.mutual_information()
    required = (eng.rd("standard", 0, target.d1) - mi, eng.rd("standard", 1, target.d2) - mi)
    return compare_to_region(eng.outer(), required, rate, strict=False)


def lemma2_check(src: JointPmf, d1: DistortionMatrix, d2: DistortionMatrix, ch: TwcChannel, rate: RateSpec,
                 target: DistortionPair, engine: Optional[RegionEngine] = None) -> FeasibilityVerdict:
    """Genie-aided bound: K*R_{Sj|Sj'}(D_j) <= N*I(X_j;Y_j'|X_j') for some joint input law"""
    eng = _engine(src, d1, d2, ch, engine)
    required = (eng.rd("conditional", 0, target.d1), eng.rd("conditional", 1, target.d2))
    return compare_to_region(eng.outer(), required, rate, strict=False)


def proposition1_check(src: JointPmf, d1: DistortionMatrix, d2: DistortionMatrix, ch: TwcChannel,
                       target: DistortionPair, engine: Optional[RegionEngine] = None) -> FeasibilityVerdict:
    """
    Converse for non-adaptive encoders, independent sources, rate one:
    R_j(D_j) must fit the time-shared product-input region
    """
    eng = _engine(src, d1, d2, ch, engine)
    if not eng.is_independent():
        raise ValidationError("the non-adaptive converse is stated for independent sources")
    required = (eng.rd("standard", 0, target.d1), eng.rd("standard", 1, target.d2))
    return compare_to_region(convexify(eng.inner()), required, RateSpec(1, 1), strict=False)


@dataclass
class TheoremInputs:
    """
    Extra inputs of the complete theorems and corollaries

    Args:
        declared_symmetric: skip the numerical symmetry surrogate (True) or force it (None)
        common_maps: (c1, c2) with c_j[s_j] -> s0, for thm4_common
        han_joint: joint over the ten Han axes, for cor3_sscc_han
        verify_wz_hypothesis: check |R_WZ - R_cond| < 2e-3 at the target, for thm3_eqwz
    """

    declared_symmetric: Optional[bool] = None
    common_maps: Optional[Tuple[Sequence[int], Sequence[int]]] = None
    han_joint: Optional[JointPmf] = None
    verify_wz_hypothesis: bool = True


def common_part_joint(src: JointPmf, c1: Sequence[int], c2: Sequence[int]) -> Tuple[JointPmf, JointPmf]:
    """
    Validate a declared common part and return the (S_j, S0) joints

    The maps must agree on the support of P(S1, S2) and S1 - S0 - S2 must hold within 1e-12.
    """
    p = src.probs
    c1 = np.asarray(c1, dtype=np.int64).ravel()
    c2 = np.asarray(c2, dtype=np.int64).ravel()
    if c1.size != p.shape[0] or c2.size != p.shape[1]:
        raise CommonPartError("common-part maps must be indexed by source symbols")
    support = p > 0
    if np.any(c1[:, None][support.any(axis=1)] < 0):
        raise CommonPartError("common-part maps must be non-negative")
    agree = c1[:, None] == c2[None, :]
    if np.any(support & ~agree):
        raise CommonPartError("declared common part differs between the terminals on the source support")
    n0 = int(max(c1.max(), c2.max())) + 1
    p0 = np.array([p[c1 == k].sum() for k in range(n0)])
    for k in range(n0):
        if p0[k] <= 0:
            continue
        block = np.where((c1[:, None] == k) & (c2[None, :] == k), p, 0.0) / p0[k]
        if np.max(np.abs(block - np.outer(block.sum(axis=1), block.sum(axis=0)))) > 1e-12:
            raise CommonPartError(f"S1 and S2 are not independent given S0={k}")
    j1 = np.zeros((p.shape[0], n0))
    j1[np.arange(p.shape[0]), c1] = p.sum(axis=1)
    j2 = np.zeros((p.shape[1], n0))
    j2[np.arange(p.shape[1]), c2] = p.sum(axis=0)
    return (JointPmf.derived([Alphabet(p.shape[0], "S1"), Alphabet(n0, "S0")], j1),
            JointPmf.derived([Alphabet(p.shape[1], "S2"), Alphabet(n0, "S0")], j2))


def theorem_region(which: str, src: JointPmf, d1: DistortionMatrix, d2: DistortionMatrix, ch: TwcChannel,
                   rate: RateSpec, target: DistortionPair, inputs: Optional[TheoremInputs] = None,
                   engine: Optional[RegionEngine] = None) -> FeasibilityVerdict:
    """
    Complete theorems on symmetric channels: the requirement pair against the product-input region

    thm1_indep: R_j(D_j) for independent sources.
    thm2_lossless: H(S_j|S_j') (almost lossless; the target is not used).
    thm3_eqwz: R_{Sj|Sj'}(D_j), with the WZ-equals-conditional hypothesis checked.
    thm4_common: R_{Sj|S0}(D_j) for a declared common part S0.
    """
    if which not in THEOREMS:
        raise ValidationError(f"unknown theorem {which!r}; expected one of {THEOREMS}")
    inputs = inputs or TheoremInputs()
    eng = _engine(src, d1, d2, ch, engine)
    notes: List[str] = []
    hypothesis = None
    if which == "thm1_indep":
        if not eng.is_independent():
            raise ValidationError("thm1_indep needs independent sources")
        required = (eng.rd("standard", 0, target.d1), eng.rd("standard", 1, target.d2))
    elif which == "thm2_lossless":
        required = (eng.conditional_entropy(0), eng.conditional_entropy(1))
    elif which == "thm3_eqwz":
        required = (eng.rd("conditional", 0, target.d1), eng.rd("conditional", 1, target.d2))
        if inputs.verify_wz_hypothesis:
            wz = (eng.rd("wz", 0, target.d1), eng.rd("wz", 1, target.d2))
            hypothesis = all(abs(w - c) < WZ_HYPOTHESIS_TOL for w, c in zip(wz, required))
            if not hypothesis:
                notes.append(f"hypothesis failed: WZ rates {wz[0]:.4f}, {wz[1]:.4f} differ from conditional")
                logger.warning(notes[-1])
    else:
        if inputs.common_maps is None:
            raise CommonPartError("thm4_common needs the declared common-part maps")
        j1, j2 = common_part_joint(src, *inputs.common_maps)
        q = RdQuery(target.d1, eng.query.tolerance, eng.query.max_iters, eng.query.restarts, eng.query.seed)
        r1 = conditional_rd(j1, d1, q).rate
        q = RdQuery(target.d2, eng.query.tolerance, eng.query.max_iters, eng.query.restarts, eng.query.seed)
        r2 = conditional_rd(j2, d2, q).rate
        required = (r1, r2)
    if inputs.declared_symmetric is None:
        sym = eng.symmetry()
        if not sym.symmetric:
            notes.append(f"outer-bound only: inner and outer frontiers differ by {sym.distance:.3g}")
    elif not inputs.declared_symmetric:
        notes.append("outer-bound only: channel declared non-symmetric")
    verdict = compare_to_region(convexify(eng.inner()), required, rate, strict=False)
    verdict.notes.extend(notes)
    verdict.hypothesis_ok = hypothesis
    return verdict


def corollary_feasible(which: str, src: JointPmf, d1: DistortionMatrix, d2: DistortionMatrix, ch: TwcChannel,
                       rate: RateSpec, target: DistortionPair, inputs: Optional[TheoremInputs] = None,
                       engine: Optional[RegionEngine] = None) -> FeasibilityVerdict:
    """
    Separate-coding achievability with WZ source rates and strict inequalities

    cor3_sscc_han: against the rate pair of a caller-supplied Han joint (rate one gives the plain Han version).
    cor4_sscc_shannon: against the product-input region.
    """
    if which not in COROLLARIES:
        raise ValidationError(f"unknown corollary {which!r}; expected one of {COROLLARIES}")
    inputs = inputs or TheoremInputs()
    eng = _engine(src, d1, d2, ch, engine)
    required = (eng.rd("wz", 0, target.d1), eng.rd("wz", 1, target.d2))
    if which == "cor4_sscc_shannon":
        return compare_to_region(convexify(eng.inner()), required, rate, strict=True)
    if inputs.han_joint is None:
        raise ValidationError("cor3_sscc_han needs a Han joint distribution")
    pair = han_rate_eval(inputs.han_joint, ch)
    han_point = RegionFrontier([FrontierPoint(0.5, pair, inputs.han_joint.flat())], False, "han")
    return compare_to_region(han_point, required, rate, strict=True)


# ---------------------------------------------------------------------------
# distortion frontier
# ---------------------------------------------------------------------------

def _lower_hull(points: np.ndarray) -> np.ndarray:
    pts = points[np.lexsort((points[:, 1], points[:, 0]))]
    hull: List[np.ndarray] = []
    for p in pts:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) <= 1e-15:
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array(hull)


def distortion_frontier(checker: Callable[[DistortionPair], FeasibilityVerdict], d1_grid: Sequence[float],
                        d2_max: float, tol: float = 1e-5, convexify_result: bool = False) -> RegionFrontier:
    """
    Smallest feasible d2 for each d1 by bisection; columns infeasible even at d2_max are left out

    Feasibility is monotone in d2, and the d2 column is made non-increasing in d1.
    """
    grid = [float(x) for x in d1_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValidationError("d1 grid must be sorted ascending")
    points: List[FrontierPoint] = []
    best_d2 = math.inf
    for d1 in grid:
        top = checker(DistortionPair(d1, d2_max))
        if not top.feasible:
            logger.debug(f"d1={d1}: infeasible even at d2={d2_max}")
            continue
        low = checker(DistortionPair(d1, 0.0))
        if low.feasible:
            d2, verdict = 0.0, low
        else:
            lo, hi, verdict = 0.0, d2_max, top
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                v = checker(DistortionPair(d1, mid))
                if v.feasible:
                    hi, verdict = mid, v
                else:
                    lo = mid
            d2 = hi
        best_d2 = min(best_d2, d2)
        rates = verdict.witness_rates
        witness = np.array([rates.r1, rates.r2]) if rates is not None else None
        points.append(FrontierPoint(d1, DistortionPair(d1, best_d2), witness))
    frontier = RegionFrontier(points, False, "distortion")
    logger.info(f"distortion frontier with {len(points)} of {len(grid)} columns feasible")
    if convexify_result and len(points) > 1:
        hull = _lower_hull(frontier.coords())
        kept = [p for p in points if np.any(np.all(np.abs(hull - [p.pair.d1, p.pair.d2]) <= 1e-12, axis=1))]
        return RegionFrontier(kept, True, "distortion")
    return frontier


def make_checker(kind: str, engine: RegionEngine, rate: RateSpec,
                 inputs: Optional[TheoremInputs] = None) -> Callable[[DistortionPair], FeasibilityVerdict]:
    """Bind a feasibility operation to an engine so distortion_frontier can sweep it"""
    src, (d1, d2), ch = engine.source, engine.d, engine.channel
    if kind == "lemma1":
        return lambda t: lemma1_check(src, d1, d2, ch, rate, t, engine)
    if kind == "lemma2":
        return lambda t: lemma2_check(src, d1, d2, ch, rate, t, engine)
    if kind == "prop1":
        return lambda t: proposition1_check(src, d1, d2, ch, t, engine)
    if kind in THEOREMS:
        return lambda t: theorem_region(kind, src, d1, d2, ch, rate, t, inputs, engine)
    if kind in COROLLARIES:
        return lambda t: corollary_feasible(kind, src, d1, d2, ch, rate, t, inputs, engine)
    raise ValidationError(f"unknown feasibility check {kind!r}")
