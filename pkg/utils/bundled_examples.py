"""
Bundled worked examples: each runner returns summary rows (quantity, value, expected, tolerance, ok)
"""

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .capacity import FrontierOptions, convexify, proposition1_frontier, shannon_inner_frontier, symmetric_rate
from .channels import binary_additive, binary_multiplying, dueck_correlated, dueck_independent, mixed
from .errors import ValidationError
from .prob import JointPmf, binary_entropy, conditional_entropy
from .rate_distortion import (DistortionMatrix, RdQuery, conditional_rd, wz_rd, z_source_conditional_rd,
                              z_source_joint, z_source_reverse_params)
from .regions import (DistortionPair, RateSpec, RegionEngine, TheoremInputs, common_part_joint, compare_to_region,
                      corollary_feasible, distortion_frontier, make_checker, proposition1_check, theorem_region)
from .schemes import scheme_example4_dueck, scheme_uncoded_map
from .settings import SETTINGS
from .simulation import run_trials, within_stderr

logger = logging.getLogger(__name__)

EXAMPLES = ("example1", "example2", "example3", "example4", "example5", "example7")


@dataclass
class ExampleRow:
    example: str
    quantity: str
    value: float
    expected: Optional[float] = None
    tolerance: Optional[float] = None
    ok: Optional[bool] = None
    note: str = ""


def _row(example: str, quantity: str, value: float, expected: Optional[float] = None,
         tolerance: Optional[float] = None, note: str = "") -> ExampleRow:
    ok = None if expected is None else bool(abs(value - expected) <= tolerance)
    return ExampleRow(example, quantity, float(value), expected, tolerance, ok, note)


# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------

def independent_bernoulli(p1: float, p2: Optional[float] = None) -> JointPmf:
    """Independent S_j ~ Ber(p_j) with P(S_j = 1) = p_j"""
    p2 = p1 if p2 is None else p2
    table = np.outer([1.0 - p1, p1], [1.0 - p2, p2])
    return JointPmf.from_table(table, ["S1", "S2"])


def example2_source() -> JointPmf:
    """P(0, 0) = 0, 1/3 elsewhere"""
    return JointPmf.from_table(np.array([[0.0, 1.0], [1.0, 1.0]]) / 3.0, ["S1", "S2"])


def example3_source() -> JointPmf:
    """P(1, 0) = 0, 1/3 elsewhere"""
    return JointPmf.from_table(np.array([[1.0, 1.0], [0.0, 1.0]]) / 3.0, ["S1", "S2"])


def example7_source() -> JointPmf:
    """Quaternary pair with common part: 1/8 on {A,B}x{A,B} and {C,D}x{C,D}"""
    block = np.ones((2, 2))
    table = np.kron(np.eye(2), block) / 8.0
    return JointPmf.from_table(table, ["S1", "S2"])


EXAMPLE7_COMMON_MAPS = ([0, 0, 1, 1], [0, 0, 1, 1])

SOURCES: Dict[str, Callable[[], JointPmf]] = {
    "example1": lambda: independent_bernoulli(0.89),
    "example2": example2_source,
    "example3": example3_source,
    "example4": lambda: independent_bernoulli(0.5),
    "example5": lambda: z_source_joint(0.5, 0.1),
    "example7": example7_source,
}


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExampleOptions:
    seed: int = SETTINGS.seed
    threads: int = SETTINGS.threads
    frontier: FrontierOptions = FrontierOptions()
    trials: int = 10_000
    example3_trials: int = 100_000
    k: int = 32
    grid_points: int = 20


def run_example1(opts: ExampleOptions) -> List[ExampleRow]:
    src = SOURCES["example1"]()
    ch = dueck_independent()
    inner = shannon_inner_frontier(ch, opts.frontier)
    h = float(binary_entropy(0.89))
    verdict = proposition1_check(src, DistortionMatrix.hamming(2), DistortionMatrix.hamming(2), ch,
                                 DistortionPair(0.0, 0.0), RegionEngine(src, DistortionMatrix.hamming(2),
                                                                        DistortionMatrix.hamming(2), ch,
                                                                        opts.frontier))
    return [
        _row("example1", "H(S_j)", h, 0.5, 1e-3),
        _row("example1", "inner symmetric rate", symmetric_rate(inner),
             note="compare with H(S_j); the non-adaptive converse holds when this is below it"),
        _row("example1", "non-adaptive converse at (0,0) feasible", float(verdict.feasible)),
    ]


def run_example2(opts: ExampleOptions) -> List[ExampleRow]:
    src = example2_source()
    ch = binary_multiplying()
    d = DistortionMatrix.hamming(2)
    h12 = conditional_entropy(src, [0], [1])
    wz = wz_rd(src, d, None, RdQuery(0.0, seed=opts.seed)).rate
    engine = RegionEngine(src, d, d, ch, opts.frontier, RdQuery(0.0, seed=opts.seed))
    cor4 = corollary_feasible("cor4_sscc_shannon", src, d, d, ch, RateSpec(1, 1), DistortionPair(0.0, 0.0),
                              engine=engine)
    stats = run_trials(scheme_uncoded_map(src, ch), src, ch, d, d, opts.k, opts.trials, opts.seed,
                       threads=opts.threads)
    return [
        _row("example2", "H(S1|S2)", h12, 2.0 / 3.0, 1e-9),
        _row("example2", "R_WZ(0)", wz, 2.0 / 3.0, 2e-3),
        _row("example2", "cor4 feasible at (0,0)", float(cor4.feasible), 0.0, 0.0, note=cor4.status),
        _row("example2", "uncoded D1", stats.mean_d1, 0.0, 0.0),
        _row("example2", "uncoded D2", stats.mean_d2, 0.0, 0.0),
    ]


def run_example3(opts: ExampleOptions) -> List[ExampleRow]:
    src = example3_source()
    ch = mixed(0.05)
    d = DistortionMatrix.hamming(2)
    stats = run_trials(scheme_uncoded_map(src, ch), src, ch, d, d, opts.k, opts.example3_trials, opts.seed,
                       threads=opts.threads)
    engine = RegionEngine(src, d, d, ch, opts.frontier)
    required = (conditional_entropy(src, [0], [1]), conditional_entropy(src, [1], [0]))
    sscc = compare_to_region(convexify(engine.inner()), required, RateSpec(1, 1), strict=True)
    d2_ok = within_stderr(stats.mean_d2, stats.stderr_d2, 1.0 / 30.0)
    return [
        _row("example3", "uncoded D1", stats.mean_d1, 0.0, 0.0),
        ExampleRow("example3", "uncoded D2", stats.mean_d2, 1.0 / 30.0, 3 * stats.stderr_d2, d2_ok,
                   "tolerance is three standard errors"),
        _row("example3", "separate coding feasible at (0,0)", float(sscc.feasible), 0.0, 0.0, note=sscc.status),
    ]


def run_example4(opts: ExampleOptions) -> List[ExampleRow]:
    src = SOURCES["example4"]()
    ch = dueck_correlated()
    hull = proposition1_frontier(ch, opts.frontier)
    stats = run_trials(scheme_example4_dueck(), src, ch, None, None, opts.k, opts.trials, opts.seed,
                       threads=opts.threads)
    control = run_trials(scheme_example4_dueck(), src, dueck_independent(), None, None, opts.k,
                         max(opts.trials // 10, 1), opts.seed, threads=opts.threads)
    return [
        _row("example4", "non-adaptive symmetric rate", symmetric_rate(hull), 0.9503, 1e-3),
        _row("example4", "adaptive scheme block errors", float(stats.block_errors), 0.0, 0.0),
        _row("example4", "block error rate with independent noise", control.block_error_rate,
             note="negative control"),
    ]


def example5_closed_form_d2(q1: float, alpha1: float, eps1: float, eps2: float, rate: RateSpec,
                            d1: float) -> Optional[float]:
    """Smallest D2 of the Z-source region at a given D1, or None when D1 is infeasible"""
    c1 = 1.0 - float(binary_entropy(eps1))
    c2 = 1.0 - float(binary_entropy(eps2))
    if rate.k * float(z_source_conditional_rd(q1, alpha1, d1)) > rate.n * c2 + 1e-12:
        return None
    q2, alpha2 = z_source_reverse_params(q1, alpha1)

    def excess(x: float) -> float:
        return rate.k * float(z_source_conditional_rd(q2, alpha2, x)) - rate.n * c1

    if excess(0.0) <= 0:
        return 0.0
    return float(brentq(excess, 0.0, 0.5, xtol=1e-10))


def example5_frontier(q1: float, alpha1: float, eps1: float, eps2: float, rate: RateSpec,
                      d1_grid: Sequence[float], opts: ExampleOptions):
    src = z_source_joint(q1, alpha1)
    ch = binary_additive(eps1, eps2)
    d = DistortionMatrix.hamming(2)
    engine = RegionEngine(src, d, d, ch, opts.frontier, RdQuery(0.0, seed=opts.seed))
    inputs = TheoremInputs(declared_symmetric=True, verify_wz_hypothesis=False)
    return distortion_frontier(make_checker("thm3_eqwz", engine, rate, inputs), d1_grid, 0.5, tol=1e-5)


def run_example5(opts: ExampleOptions) -> List[ExampleRow]:
    q1, alpha1, eps = 0.5, 0.1, 0.05
    rate = RateSpec(4, 1)
    grid = np.linspace(0.0, 0.1, opts.grid_points)
    frontier = example5_frontier(q1, alpha1, eps, eps, rate, grid, opts)
    worst = 0.0
    for p in frontier.points:
        expected = example5_closed_form_d2(q1, alpha1, eps, eps, rate, p.pair.d1)
        if expected is not None:
            worst = max(worst, abs(p.pair.d2 - expected))
    expected_cols = sum(example5_closed_form_d2(q1, alpha1, eps, eps, rate, x) is not None for x in grid)
    return [
        _row("example5", "max |d2 - closed form|", worst, 0.0, 2e-3),
        _row("example5", "feasible columns", float(len(frontier.points)), float(expected_cols), 1.0),
    ]


def run_example7(opts: ExampleOptions) -> List[ExampleRow]:
    src = example7_source()
    d = DistortionMatrix.hamming(4)
    j1, _ = common_part_joint(src, *EXAMPLE7_COMMON_MAPS)
    worst = 0.0
    for x in np.linspace(0.0, 0.5, 10):
        rate = conditional_rd(j1, d, RdQuery(float(x), seed=opts.seed)).rate
        worst = max(worst, abs(rate - (1.0 - float(binary_entropy(x)))))
    ch = binary_additive(0.05, 0.05)
    target = DistortionPair(0.2, 0.2)
    engine = RegionEngine(src, d, d, ch, opts.frontier)
    verdict = theorem_region("thm4_common", src, d, d, ch, RateSpec(1, 1), target,
                             TheoremInputs(declared_symmetric=True, common_maps=EXAMPLE7_COMMON_MAPS), engine)
    slack = 1.0 - float(binary_entropy(0.05)) - (1.0 - float(binary_entropy(0.2)))
    return [
        _row("example7", "max |R_{S'|S0}(D) - (1 - H_b(D))|", worst, 0.0, 2e-3),
        _row("example7", "thm4 slack at D=(0.2,0.2)", min(verdict.slack.values()), slack, 2e-3),
    ]


RUNNERS: Dict[str, Callable[[ExampleOptions], List[ExampleRow]]] = {
    "example1": run_example1,
    "example2": run_example2,
    "example3": run_example3,
    "example4": run_example4,
    "example5": run_example5,
    "example7": run_example7,
}


def run_examples(only: Optional[Sequence[str]] = None, opts: Optional[ExampleOptions] = None) -> pd.DataFrame:
    """Run the bundled examples in a fixed order and return the summary table"""
    opts = opts or ExampleOptions()
    names = list(only) if only else list(EXAMPLES)
    unknown = [n for n in names if n not in RUNNERS]
    if unknown:
        raise ValidationError(f"unknown example(s) {unknown}; expected some of {EXAMPLES}")
    rows: List[ExampleRow] = []
    for name in EXAMPLES:
        if name in names:
            logger.info(f"running {name}")
            rows.extend(RUNNERS[name](opts))
    return pd.DataFrame([asdict(r) for r in rows],
                        columns=["example", "quantity", "value", "expected", "tolerance", "ok", "note"])
