"""
Capacity-bound frontiers of two-way channels

Inner frontier: product input laws P(x1)P(x2). Outer frontier: joint input
laws P(x1, x2). Both trace the pair (I(X1;Y2|X2), I(X2;Y1|X1)) by weighted-sum
maximization over a weight sweep.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import rel_entr, softmax

from .channels import TwcChannel
from .errors import ValidationError
from .prob import LN2, Alphabet, JointPmf, mutual_information, mutual_information_from_channel
from .rate_distortion import simplex_grid
from .settings import SETTINGS

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-3
WITNESS_TOL = 1e-9


@dataclass(frozen=True)
class RatePair:
    r1: float
    r2: float

    def __post_init__(self):
        for v in (self.r1, self.r2):
            if not (math.isfinite(v) and v >= -1e-12):
                raise ValidationError(f"rates must be finite and non-negative, got {v}")
        object.__setattr__(self, "r1", max(0.0, float(self.r1)))
        object.__setattr__(self, "r2", max(0.0, float(self.r2)))


@dataclass
class FrontierPoint:
    weight: float
    pair: object  # RatePair or regions.DistortionPair
    witness: Optional[np.ndarray] = None


@dataclass
class RegionFrontier:
    """Pareto-sorted frontier points (first coordinate ascending) with witnesses"""

    points: List[FrontierPoint]
    convexified: bool = False
    kind: str = "inner"

    def coords(self) -> np.ndarray:
        return np.array([_xy(p.pair) for p in self.points]).reshape(-1, 2)

    def support(self, weight: float) -> float:
        """max over frontier points of weight*r1 + (1-weight)*r2"""
        xy = self.coords()
        if xy.size == 0:
            return 0.0
        return float(np.max(weight * xy[:, 0] + (1.0 - weight) * xy[:, 1]))

    def symmetric_rate(self) -> float:
        return symmetric_rate(self)


@dataclass(frozen=True)
class FrontierOptions:
    grid_step: float = SETTINGS.grid_step
    weights: Tuple[float, ...] = tuple(np.round(np.linspace(0.0, 1.0, 51), 10))
    refine_rounds: int = SETTINGS.refine_rounds
    multistart: int = SETTINGS.multistart
    seed: int = SETTINGS.seed
    convexify: bool = False

    @property
    def grid_steps(self) -> int:
        return max(1, int(round(1.0 / self.grid_step)))


def _xy(pair) -> Tuple[float, float]:
    if isinstance(pair, RatePair):
        return pair.r1, pair.r2
    return float(pair.d1), float(pair.d2)


# ---------------------------------------------------------------------------
# rate evaluation
# ---------------------------------------------------------------------------

def product_rates(ch: TwcChannel, p1: np.ndarray, p2: np.ndarray) -> Tuple[float, float]:
    """(I(X1;Y2|X2), I(X2;Y1|X1)) under P(x1)P(x2)"""
    w2 = ch.to_terminal2()  # (x1, x2, y2)
    w1 = ch.to_terminal1()  # (x1, x2, y1)
    r1 = sum(p2[b] * float(mutual_information_from_channel(p1, w2[:, b, :])) for b in range(w2.shape[1]))
    r2 = sum(p1[a] * float(mutual_information_from_channel(p2, w1[a, :, :])) for a in range(w1.shape[0]))
    return float(r1), float(r2)


def joint_rates(ch: TwcChannel, p_joint: np.ndarray) -> Tuple[float, float]:
    """(I(X1;Y2|X2), I(X2;Y1|X1)) under a joint input law of shape (|X1|, |X2|)"""
    full = ch.joint_with_inputs(p_joint)
    return (mutual_information(full, [0], [3], [1]), mutual_information(full, [1], [2], [0]))


def _grid_rate_tables(ch: TwcChannel, g1: np.ndarray, g2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    w2 = ch.to_terminal2()
    w1 = ch.to_terminal1()
    a = np.stack([mutual_information_from_channel(g1, w2[:, b, :]) for b in range(w2.shape[1])], axis=1)
    bb = np.stack([mutual_information_from_channel(g2, w1[x, :, :]) for x in range(w1.shape[0])], axis=1)
    return a @ g2.T, g1 @ bb.T


def _pareto(points: List[FrontierPoint]) -> List[FrontierPoint]:
    ordered = sorted(points, key=lambda p: (-_xy(p.pair)[0], -_xy(p.pair)[1]))
    kept, best_second = [], -math.inf
    for p in ordered:
        x, y = _xy(p.pair)
        if y > best_second + 1e-12:
            kept.append(p)
            best_second = y
    return sorted(kept, key=lambda p: _xy(p.pair)[0])


# ---------------------------------------------------------------------------
# inner frontier
# ---------------------------------------------------------------------------

def _refine_product(ch: TwcChannel, weight: float, p1: np.ndarray, p2: np.ndarray,
                    rounds: int) -> Tuple[np.ndarray, np.ndarray]:
    n1 = p1.size

    def unpack(z):
        return softmax(z[:n1]), softmax(z[n1:])

    def neg(z):
        a, b = unpack(z)
        r1, r2 = product_rates(ch, a, b)
        return -(weight * r1 + (1.0 - weight) * r2)

    z0 = np.concatenate([np.log(p1 + 1e-9), np.log(p2 + 1e-9)])
    res = minimize(neg, z0, method="Powell", options={"maxiter": rounds, "xtol": 1e-7, "ftol": 1e-12})
    a, b = unpack(res.x)
    if -res.fun + 1e-15 < -neg(z0):
        return p1, p2
    return a, b


def shannon_inner_frontier(ch: TwcChannel, opts: Optional[FrontierOptions] = None) -> RegionFrontier:
    """
    Pareto frontier of (I(X1;Y2|X2), I(X2;Y1|X1)) over independent inputs

    Every weight picks its best simplex-grid starts, which are then refined
    with Powell's method on a softmax parametrization of (P_X1, P_X2).
    """
    opts = opts or FrontierOptions()
    g1 = simplex_grid(ch.x1.size, opts.grid_steps)
    g2 = simplex_grid(ch.x2.size, opts.grid_steps)
    r1_tab, r2_tab = _grid_rate_tables(ch, g1, g2)
    starts_per_weight = max(1, opts.multistart // 8)
    points = []
    for w in opts.weights:
        score = (w * r1_tab + (1.0 - w) * r2_tab).ravel()
        k = min(starts_per_weight, score.size)
        top = np.argpartition(-score, k - 1)[:k]
        best = None
        for flat in top[np.argsort(-score[top], kind="stable")]:
            i, j = np.unravel_index(flat, r1_tab.shape)
            p1, p2 = _refine_product(ch, w, g1[i], g2[j], opts.refine_rounds)
            r1, r2 = product_rates(ch, p1, p2)
            value = w * r1 + (1.0 - w) * r2
            if best is None or value > best[0] + 1e-15:
                best = (value, r1, r2, p1, p2)
        _, r1, r2, p1, p2 = best
        points.append(FrontierPoint(float(w), RatePair(r1, r2), np.concatenate([p1, p2])))
    frontier = RegionFrontier(_pareto(points), False, "inner")
    logger.info(f"inner frontier of {ch.name}: {len(frontier.points)} Pareto points")
    if opts.convexify:
        return convexify(frontier)
    return frontier


# ---------------------------------------------------------------------------
# outer frontier
# ---------------------------------------------------------------------------

def _joint_gradient(ch: TwcChannel, p: np.ndarray, weight: float) -> np.ndarray:
    """
    Gradient of weight*r1 + (1-weight)*r2 in the joint law, in bits

    d I(X1;Y2|X2) / d P(x1,x2) = D(W2(.|x1,x2) || q2(.|x2)), up to a constant
    removed by the simplex constraint.
    """
    w2 = ch.to_terminal2()
    w1 = ch.to_terminal1()
    pf = np.maximum(p, 1e-15)
    q2 = np.einsum("ab,aby->by", pf, w2) / pf.sum(axis=0)[:, None]
    q1 = np.einsum("ab,aby->ay", pf, w1) / pf.sum(axis=1)[:, None]
    g1 = rel_entr(w2, q2[None, :, :]).sum(axis=2)
    g2 = rel_entr(w1, q1[:, None, :]).sum(axis=2)
    return (weight * g1 + (1.0 - weight) * g2) / LN2


def _maximize_joint(ch: TwcChannel, weight: float, start: np.ndarray, rounds: int) -> np.ndarray:
    shape = (ch.x1.size, ch.x2.size)

    def neg(x):
        r1, r2 = joint_rates(ch, _project(x).reshape(shape))
        return -(weight * r1 + (1.0 - weight) * r2)

    def neg_grad(x):
        return -_joint_gradient(ch, _project(x).reshape(shape), weight).ravel()

    x0 = start.ravel()
    res = minimize(neg, x0, jac=neg_grad, method="SLSQP", bounds=[(0.0, 1.0)] * x0.size,
                   constraints=[{"type": "eq", "fun": lambda x: x.sum() - 1.0}],
                   options={"maxiter": rounds, "ftol": 1e-12})
    candidate = _project(res.x)
    if neg(candidate) <= neg(x0):
        return candidate.reshape(shape)
    return _project(x0).reshape(shape)


def _project(x: np.ndarray) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=float), 0.0, None)
    total = x.sum()
    return x / total if total > 0 else np.full(x.size, 1.0 / x.size)


def shannon_outer_frontier(ch: TwcChannel, opts: Optional[FrontierOptions] = None,
                           inner: Optional[RegionFrontier] = None) -> RegionFrontier:
    """
    Pareto frontier of the same rate pair over the full joint input simplex

    Each rate is concave in the joint law, so a weighted-sum ascent from the
    inner witness, the uniform law and a few random laws reaches the optimum.
    """
    opts = opts or FrontierOptions()
    inner = inner or shannon_inner_frontier(ch, replace(opts, convexify=False))
    n1, n2 = ch.x1.size, ch.x2.size
    rng = np.random.default_rng(opts.seed)
    extra = [np.full((n1, n2), 1.0 / (n1 * n2))]
    extra += [rng.dirichlet(np.ones(n1 * n2)).reshape(n1, n2) for _ in range(max(0, opts.multistart // 16))]
    points = []
    for w in opts.weights:
        seed_point = max(inner.points, key=lambda p: w * p.pair.r1 + (1.0 - w) * p.pair.r2)
        wit = seed_point.witness
        starts = [np.outer(wit[:n1], wit[n1:])] + extra
        best = None
        for s in starts:
            p = _maximize_joint(ch, w, s, opts.refine_rounds)
            r1, r2 = joint_rates(ch, p)
            value = w * r1 + (1.0 - w) * r2
            if best is None or value > best[0] + 1e-15:
                best = (value, r1, r2, p)
        _, r1, r2, p = best
        points.append(FrontierPoint(float(w), RatePair(r1, r2), p.ravel()))
    # the product witnesses are joint laws too
    for p in inner.points:
        points.append(FrontierPoint(p.weight, p.pair, np.outer(p.witness[:n1], p.witness[n1:]).ravel()))
    frontier = RegionFrontier(_pareto(points), False, "outer")
    logger.info(f"outer frontier of {ch.name}: {len(frontier.points)} Pareto points")
    return frontier


# ---------------------------------------------------------------------------
# convexification and the symmetric rate
# ---------------------------------------------------------------------------

def _upper_hull(xy: np.ndarray) -> np.ndarray:
    """Upper-right concave boundary of the downward closure of the points"""
    xmax, ymax = xy[:, 0].max(), xy[:, 1].max()
    pts = np.vstack([xy, [[0.0, ymax], [xmax, 0.0]]])
    pts = pts[np.lexsort((-pts[:, 1], pts[:, 0]))]
    hull: List[np.ndarray] = []
    for p in pts:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
            if cross >= -1e-15:
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array(hull)


def convexify(frontier: RegionFrontier) -> RegionFrontier:
    """Upper concave envelope of the frontier; vertices keep their witnesses"""
    if not frontier.points:
        return replace(frontier, convexified=True)
    xy = frontier.coords()
    hull = _upper_hull(xy)
    kept = []
    for p in frontier.points:
        x, y = _xy(p.pair)
        if np.any(np.all(np.abs(hull - [x, y]) <= 1e-12, axis=1)):
            kept.append(p)
    return RegionFrontier(kept, True, frontier.kind)


def symmetric_rate(frontier: RegionFrontier) -> float:
    """Largest r with (r, r) inside the convex hull of the frontier's downward closure"""
    xy = frontier.coords()
    if xy.size == 0:
        return 0.0
    hull = _upper_hull(xy)
    diff = hull[:, 0] - hull[:, 1]
    for k in range(len(hull) - 1):
        if diff[k] <= 0.0 <= diff[k + 1]:
            span = diff[k + 1] - diff[k]
            t = 0.0 if span == 0 else -diff[k] / span
            return float(hull[k, 0] + t * (hull[k + 1, 0] - hull[k, 0]))
    return float(min(xy[:, 0].max(), xy[:, 1].max()))


def proposition1_frontier(ch: TwcChannel, opts: Optional[FrontierOptions] = None,
                          inner: Optional[RegionFrontier] = None) -> RegionFrontier:
    """Time-sharing hull of the inner frontier (rate region of non-adaptive coding)"""
    opts = opts or FrontierOptions()
    inner = inner or shannon_inner_frontier(ch, replace(opts, convexify=False))
    hull = convexify(inner)
    logger.info(f"non-adaptive region of {ch.name}: symmetric rate {symmetric_rate(hull):.6f}")
    return hull


def hausdorff_distance(a: RegionFrontier, b: RegionFrontier, directions: int = 721) -> float:
    """Hausdorff distance of the two convexified downward-closed regions via support functions"""
    theta = np.linspace(0.0, 0.5 * math.pi, directions)
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    ha = (a.coords() @ dirs.T).max(axis=0)
    hb = (b.coords() @ dirs.T).max(axis=0)
    return float(np.max(np.abs(ha - hb)))


@dataclass
class SymmetryReport:
    distance: float
    symmetric: bool
    inner: RegionFrontier = field(repr=False, default=None)
    outer: RegionFrontier = field(repr=False, default=None)


def numerical_symmetry(ch: TwcChannel, opts: Optional[FrontierOptions] = None) -> SymmetryReport:
    """
    Inner and outer frontiers coincide within 1e-3

    Numerical surrogate for the channel-symmetry premise of the complete
    two-way theorems; it says nothing about the analytic conditions.
    """
    opts = opts or FrontierOptions()
    inner = shannon_inner_frontier(ch, replace(opts, convexify=False))
    outer = shannon_outer_frontier(ch, opts, inner=inner)
    dist = hausdorff_distance(convexify(inner), outer)
    ok = dist < SYMMETRY_TOL
    if not ok:
        logger.warning(f"{ch.name}: inner/outer frontiers differ by {dist:.3g}; results are outer-bound only")
    return SymmetryReport(dist, ok, inner, outer)


def verify_witnesses(ch: TwcChannel, frontier: RegionFrontier) -> float:
    """Largest gap between a recorded rate pair and its witness re-evaluated"""
    n1 = ch.x1.size
    worst = 0.0
    for p in frontier.points:
        if p.witness.size == n1 + ch.x2.size and frontier.kind == "inner":
            r1, r2 = product_rates(ch, p.witness[:n1], p.witness[n1:])
        else:
            r1, r2 = joint_rates(ch, p.witness.reshape(n1, ch.x2.size))
        worst = max(worst, abs(r1 - p.pair.r1), abs(r2 - p.pair.r2))
    return worst


# ---------------------------------------------------------------------------
# Han-type rate evaluation
# ---------------------------------------------------------------------------

HAN_AXES = ("V1", "V2", "Vt1", "Vt2", "Wt1", "Wt2", "X1", "X2", "Y1", "Y2")


def han_rate_eval(joint: JointPmf, ch: Optional[TwcChannel] = None) -> RatePair:
    """
    (I(Vt1; X2,Y2,Vt2,Wt2), I(Vt2; X1,Y1,Vt1,Wt1)) from a caller-supplied joint

    Only the checkable parts of the factorization are verified: P_Vtj = P_Vj and,
    when a channel is given, that P(y1,y2|x1,x2) matches it on the input support.
    The remaining Markov structure is the caller's obligation.
    """
    if joint.ndim != len(HAN_AXES):
        raise ValidationError(f"Han joint needs {len(HAN_AXES)} axes ordered {HAN_AXES}")
    probs = joint.probs
    for v, vt in ((0, 2), (1, 3)):
        if joint.shape[v] != joint.shape[vt]:
            raise ValidationError(f"axes {HAN_AXES[v]} and {HAN_AXES[vt]} must share an alphabet")
        pv = probs.sum(axis=tuple(i for i in range(10) if i != v))
        pvt = probs.sum(axis=tuple(i for i in range(10) if i != vt))
        if np.max(np.abs(pv - pvt)) > 1e-9:
            raise ValidationError(f"marginal of {HAN_AXES[vt]} does not match {HAN_AXES[v]}")
    if ch is not None:
        if joint.shape[6:] != tuple(ch.sizes):
            raise ValidationError("Han joint (X, Y) block does not match the channel alphabets")
        block = probs.sum(axis=tuple(range(6)))
        p_in = block.sum(axis=(2, 3))
        expected = p_in[:, :, None, None] * ch.table
        if np.max(np.abs(block - expected)) > 1e-9:
            raise ValidationError("Han joint is inconsistent with the channel law")
    r1 = mutual_information(joint, [2], [7, 9, 3, 5])
    r2 = mutual_information(joint, [3], [6, 8, 2, 4])
    return RatePair(r1, r2)


def han_joint_from_product(ch: TwcChannel, p1, p2) -> JointPmf:
    """Degenerate Han joint: Vj = Vtj = Xj, constant Wt, independent inputs"""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    n1, n2 = p1.size, p2.size
    xy = p1[:, None, None, None] * p2[None, :, None, None] * ch.table
    table = np.zeros((n1, n2, n1, n2, 1, 1) + ch.table.shape)
    i1, i2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    table[i1, i2, i1, i2, 0, 0, i1, i2] = xy[i1, i2]
    axes = [Alphabet(n, lab) for n, lab in zip(table.shape, HAN_AXES)]
    return JointPmf.derived(axes, table)
