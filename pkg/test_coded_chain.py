#!/usr/bin/env python3
"""
Tests for configurations, the coded-channel chain and the Theorem-1 / Corollary-1 margins
"""

import os
import sys
from dataclasses import replace

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from utils.capacity import product_rates
from utils.channels import binary_additive, binary_multiplying, mixed, raw_channel
from utils.coded_chain import (MatrixKernel, build_kernel, check_stationarity_conditions, corollary1_margins,
                               l1_residual, solve_stationary, stationary_distribution, theorem1_margins)
from utils.errors import ConfigurationError, ValidationError
from utils.prob import FinitePmf, JointPmf
from utils.rate_distortion import DistortionMatrix, RdQuery, standard_rd
from utils.special_configs import Ingredients, build_special_config, solved_ingredients

UNIFORM = (np.array([0.5, 0.5]), np.array([0.5, 0.5]))


def _independent(p1, p2):
    return JointPmf.from_table(np.outer([1 - p1, p1], [1 - p2, p2]), ["S1", "S2"])


def _example3_source():
    return JointPmf.from_table(np.array([[1.0, 1.0], [0.0, 1.0]]) / 3.0, ["S1", "S2"])


def _example2_source():
    return JointPmf.from_table(np.array([[0.0, 1.0], [1.0, 1.0]]) / 3.0, ["S1", "S2"])


# ---------------------------------------------------------------------------
# stationary distributions
# ---------------------------------------------------------------------------

def test_two_state_chain():
    result = solve_stationary(MatrixKernel([[0.9, 0.1], [0.5, 0.5]]))
    np.testing.assert_allclose(result.p, [5 / 6, 1 / 6], atol=1e-10)
    assert result.method == "power"


def test_periodic_chain_falls_back_to_direct_solve():
    result = solve_stationary(MatrixKernel([[0.0, 1.0], [1.0, 0.0]]), init=np.array([1.0, 0.0]))
    assert result.method == "direct"
    np.testing.assert_allclose(result.p, [0.5, 0.5], atol=1e-10)
    assert not result.ambiguous


def test_reducible_chain_is_flagged():
    cycle = np.array([[0.0, 1.0], [1.0, 0.0]])
    matrix = np.block([[cycle, np.zeros((2, 2))], [np.zeros((2, 2)), cycle]])
    result = solve_stationary(MatrixKernel(matrix), init=np.array([1.0, 0.0, 0.0, 0.0]))
    assert result.ambiguous
    np.testing.assert_allclose(result.p, [0.5, 0.5, 0.0, 0.0], atol=1e-9)


def test_matrix_kernel_validation():
    with pytest.raises(ValidationError):
        MatrixKernel([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(ValidationError):
        MatrixKernel([[1.0, 0.0, 0.0]])


# ---------------------------------------------------------------------------
# special configurations
# ---------------------------------------------------------------------------

def _special_cases():
    ind = _independent(0.3, 0.6)
    ex3 = _example3_source()
    additive = binary_additive(0.1, 0.1)
    return [
        ("uncoded", ex3, mixed(0.05),
         Ingredients(ex3, mixed(0.05), uncoded_maps=([0, 1], [0, 1]))),
        ("sscc_independent", ind, additive,
         solved_ingredients("sscc_independent", ind, additive, (0.1, 0.2), UNIFORM)),
        ("sscc_wz", ex3, additive,
         solved_ingredients("sscc_wz", ex3, additive, (0.1, 0.1), UNIFORM, query=RdQuery(0.0, seed=5))),
        ("lossless_cpc", ex3, additive,
         solved_ingredients("lossless_cpc", ex3, additive, (0.0, 0.0), UNIFORM)),
    ]


@pytest.mark.parametrize("case", range(4))
def test_special_configurations_are_fixed_points(case):
    kind, src, ch, ing = _special_cases()[case]
    cfg = build_special_config(kind, ing)
    assert cfg.is_pi_prime()
    kernel = build_kernel(cfg, ch, src)
    assert l1_residual(kernel, cfg.p_tilde.probs) < 1e-10
    report = theorem1_margins(cfg, ch, src)
    assert report.source == "declared"
    assert report.cond1_ok and report.cond2_ok


@pytest.mark.parametrize("case", range(4))
def test_perturbed_prior_fails_stationarity(case):
    kind, src, ch, ing = _special_cases()[case]
    cfg = build_special_config(kind, ing)
    kernel = build_kernel(cfg, ch, src)
    prior = cfg.p_tilde.probs
    bumped = np.zeros_like(prior)
    # all prior mass on the first source pair
    bumped[0, 0] = prior.sum(axis=(0, 1))
    perturbed = 0.5 * prior + 0.5 * bumped
    assert l1_residual(kernel, perturbed) > 1e-6
    cond1, _ = check_stationarity_conditions(cfg, kernel.full_joint(perturbed))
    assert not cond1


def test_stationary_distribution_extends_to_full_coordinates():
    np.testing.assert_allclose(stationary_distribution(MatrixKernel([[0.9, 0.1], [0.5, 0.5]])).probs,
                               [5 / 6, 1 / 6], atol=1e-10)
    kind, src, ch, ing = _special_cases()[0]
    cfg = build_special_config(kind, ing)
    pz = stationary_distribution(build_kernel(cfg, ch, src), cfg.p_tilde)
    assert pz.ndim == 14
    assert check_stationarity_conditions(cfg, pz) == (True, True)


def test_unknown_special_kind():
    src = _example3_source()
    with pytest.raises(ValidationError):
        build_special_config("telepathy", Ingredients(src, mixed(0.05)))
    with pytest.raises(ConfigurationError):
        build_special_config("uncoded", Ingredients(src, mixed(0.05)))


def test_uncoded_example3_distortions():
    src = _example3_source()
    ch = mixed(0.05)
    cfg = build_special_config("uncoded", Ingredients(src, ch, uncoded_maps=([0, 1], [0, 1])))
    report = theorem1_margins(cfg, ch, src)
    assert report.distortions[0] == pytest.approx(0.0, abs=1e-12)
    assert report.distortions[1] == pytest.approx(1.0 / 30.0, abs=1e-12)
    assert report.vacuous == (True, True)
    assert report.satisfied == (True, True)


def test_uncoded_example2_is_lossless():
    src = _example2_source()
    ch = binary_multiplying()
    cfg = build_special_config("uncoded", Ingredients(src, ch, uncoded_maps=([0, 1], [0, 1])))
    report = theorem1_margins(cfg, ch, src)
    assert report.distortions == pytest.approx((0.0, 0.0), abs=1e-12)


def test_adaptive_configuration_has_no_corollary_margins():
    src = _independent(0.5, 0.5)
    ch = binary_additive(0.1, 0.1)
    cfg = build_special_config("uncoded", Ingredients(src, ch, uncoded_maps=([0, 1], [0, 1])))
    f1 = cfg.f1.copy()
    # x1 now flips with the previous channel output
    f1[..., 1] = 1 - f1[..., 1]
    adaptive = replace(cfg, f1=f1)
    assert not adaptive.is_pi_prime()
    with pytest.raises(ConfigurationError):
        corollary1_margins(adaptive, ch, src)
    report = theorem1_margins(adaptive, ch, src)
    assert report.residual < 1e-10


def test_configuration_shape_checks():
    src = _independent(0.5, 0.5)
    ch = binary_additive(0.1, 0.1)
    cfg = build_special_config("uncoded", Ingredients(src, ch, uncoded_maps=([0, 1], [0, 1])))
    with pytest.raises(ValidationError):
        replace(cfg, f1=cfg.f1[..., :1])
    with pytest.raises(ValidationError):
        replace(cfg, f1=np.full(cfg.f1.shape, 2))
    with pytest.raises(ValidationError):
        build_kernel(cfg, binary_additive(0.1, 0.1), JointPmf.from_table(np.full((2, 3), 1 / 6)))


# ---------------------------------------------------------------------------
# separate coding reduces to rate-distortion and channel rates
# ---------------------------------------------------------------------------

def _separate_coding_instance(seed):
    rng = np.random.default_rng(seed)
    p1, p2 = rng.uniform(0.1, 0.9, size=2)
    src = _independent(p1, p2)
    if seed % 2:
        ch = binary_additive(*rng.uniform(0.0, 0.3, size=2))
    else:
        ch = raw_channel(2, 2, 2, 2, rng.dirichlet(np.ones(4), size=4).ravel())
    v1, v2 = (np.array([1 - v, v]) for v in rng.uniform(0.2, 0.8, size=2))
    targets = tuple(float(x) for x in rng.uniform(0.0, 0.5, size=2) * np.minimum([p1, p2], [1 - p1, 1 - p2]))
    return src, ch, (v1, v2), targets, (p1, p2)


def _check_separate_coding(seed):
    src, ch, laws, targets, (p1, p2) = _separate_coding_instance(seed)
    ing = solved_ingredients("sscc_independent", src, ch, targets, laws)
    cfg = build_special_config("sscc_independent", ing)
    report = theorem1_margins(cfg, ch, src)
    rate1 = standard_rd(FinitePmf([1 - p1, p1]), DistortionMatrix.hamming(2), RdQuery(targets[0])).rate
    rate2 = standard_rd(FinitePmf([1 - p2, p2]), DistortionMatrix.hamming(2), RdQuery(targets[1])).rate
    r1, r2 = product_rates(ch, *laws)
    assert report.margins.lhs1 == pytest.approx(rate1, abs=2e-3)
    assert report.margins.rhs1 == pytest.approx(r1, abs=2e-3)
    assert report.margins.lhs2 == pytest.approx(rate2, abs=2e-3)
    assert report.margins.rhs2 == pytest.approx(r2, abs=2e-3)
    # the non-adaptive margins coincide for independent sources
    cor = corollary1_margins(cfg, ch, src)
    assert cor.slack1 == pytest.approx(report.margins.slack1, abs=1e-9)
    assert cor.slack2 == pytest.approx(report.margins.slack2, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_separate_coding_margins(seed):
    _check_separate_coding(seed)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(3, 23))
def test_separate_coding_margins_randomized(seed):
    _check_separate_coding(seed)
