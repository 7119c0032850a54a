#!/usr/bin/env python3
"""
Tests for the rate-distortion solvers, closed forms and the brute-force oracle
"""

import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from utils import rate_distortion
from utils.errors import DimensionCapError, InfeasibleTargetError, ValidationError
from utils.prob import FinitePmf, JointPmf, binary_entropy, conditional_entropy
from utils.rate_distortion import (DistortionMatrix, RdProblem, RdQuery, RdResult, conditional_rd, curve_results,
                                   evaluate_wz, rd_brute_oracle, rd_curve, simplex_grid, standard_rd, uniform_binary_rd, wz_rd,
                                   z_source_conditional_rd, z_source_joint, z_source_reverse_params)

HAMMING2 = DistortionMatrix.hamming(2)


def _q(D, **kw):
    return RdQuery(float(D), **kw)


@pytest.mark.parametrize("D", [0.0, 0.05, 0.11, 0.25, 0.4])
def test_uniform_binary_closed_form(D):
    res = standard_rd(FinitePmf([0.5, 0.5]), HAMMING2, _q(D))
    assert res.converged
    assert res.rate == pytest.approx(float(uniform_binary_rd(D)), abs=1e-4)
    assert res.distortion <= D + 1e-6


@pytest.mark.parametrize("p,D", [(0.2, 0.05), (0.11, 0.02), (0.3, 0.1)])
def test_bernoulli_closed_form(p, D):
    res = standard_rd(FinitePmf([1 - p, p]), HAMMING2, _q(D))
    assert res.rate == pytest.approx(float(binary_entropy(p) - binary_entropy(D)), abs=1e-4)


def test_zero_rate_beyond_dmax():
    res = standard_rd(FinitePmf([0.8, 0.2]), HAMMING2, _q(0.3))
    assert res.rate == pytest.approx(0.0, abs=1e-12)
    assert res.achieving_kernel.is_deterministic()


def test_infeasible_target():
    d = DistortionMatrix(np.array([[0.5, 1.0], [1.0, 0.5]]))
    with pytest.raises(InfeasibleTargetError):
        standard_rd(FinitePmf([0.5, 0.5]), d, _q(0.1))


def test_rejects_bad_distortion():
    with pytest.raises(ValidationError):
        DistortionMatrix(np.array([[0.0, -1.0], [1.0, 0.0]]))
    with pytest.raises(ValidationError):
        DistortionMatrix(np.array([[np.inf, np.inf], [1.0, 0.0]]))
    with pytest.raises(ValidationError):
        RdQuery(-0.1)


def test_z_source_parameters():
    joint = z_source_joint(0.5, 0.1)
    np.testing.assert_allclose(joint.probs, [[0.5, 0.0], [0.05, 0.45]])
    q2, alpha2 = z_source_reverse_params(0.5, 0.1)
    assert q2 == pytest.approx(0.55)
    assert alpha2 == pytest.approx(0.05 / 0.55)


@pytest.mark.parametrize("D", [0.0, 0.01, 0.02, 0.04])
def test_conditional_matches_z_source_closed_form(D):
    # S1 is recovered from S2 through the reversed Z-channel
    joint = z_source_joint(0.5, 0.1)
    res = conditional_rd(joint, HAMMING2, _q(D))
    assert res.rate == pytest.approx(float(z_source_conditional_rd(0.5, 0.1, D)), abs=2e-3)
    reverse = conditional_rd(joint.transpose([1, 0]), HAMMING2, _q(D))
    q2, alpha2 = z_source_reverse_params(0.5, 0.1)
    assert reverse.rate == pytest.approx(float(z_source_conditional_rd(q2, alpha2, D)), abs=2e-3)


def test_conditional_at_zero_is_conditional_entropy():
    joint = JointPmf.from_table(np.array([[0.0, 1.0], [1.0, 1.0]]) / 3.0)
    res = conditional_rd(joint, HAMMING2, _q(0.0))
    assert res.rate == pytest.approx(conditional_entropy(joint, [0], [1]), abs=1e-6)


def test_wz_example_pair_at_zero():
    joint = JointPmf.from_table(np.array([[0.0, 1.0], [1.0, 1.0]]) / 3.0)
    assert conditional_entropy(joint, [0], [1]) == pytest.approx(2.0 / 3.0, abs=1e-9)
    res = wz_rd(joint, HAMMING2, None, _q(0.0, seed=3))
    assert res.rate == pytest.approx(2.0 / 3.0, abs=2e-3)
    assert res.decoder.shape == (3, 2)


@pytest.mark.parametrize("D", [0.02, 0.08, 0.15])
def test_wz_between_conditional_and_standard(D):
    rho = 0.15
    joint = JointPmf.from_table(np.array([[1 - rho, rho], [rho, 1 - rho]]) / 2.0)
    cond = conditional_rd(joint, HAMMING2, _q(D)).rate
    wz = wz_rd(joint, HAMMING2, None, _q(D, seed=11))
    std = standard_rd(FinitePmf([0.5, 0.5]), HAMMING2, _q(D)).rate
    assert cond - 1e-6 <= wz.rate <= std + 2e-3
    rate, dist = evaluate_wz(joint, HAMMING2, wz.achieving_kernel.probs, wz.decoder)
    assert rate == pytest.approx(wz.rate, abs=1e-9)
    assert dist <= D + 1e-5


def test_wz_aux_card_bound():
    joint = JointPmf.from_table(np.full((2, 2), 0.25))
    with pytest.raises(ValidationError):
        wz_rd(joint, HAMMING2, 4, _q(0.1))


def test_rd_curve_is_nonincreasing():
    problem = RdProblem(FinitePmf([0.6, 0.3, 0.1]), DistortionMatrix.hamming(3))
    curve = rd_curve("standard", problem, np.linspace(0.0, 0.5, 8))
    rates = [r for _, r in curve]
    assert all(b <= a + 1e-12 for a, b in zip(rates, rates[1:]))
    with pytest.raises(ValidationError):
        rd_curve("standard", problem, [0.2, 0.1])


def _midpoint_excess(curve):
    """Largest height of an interior point above the chord of its two neighbours"""
    worst = 0.0
    for (x0, r0), (x1, r1), (x2, r2) in zip(curve, curve[1:], curve[2:]):
        lam = (x2 - x1) / (x2 - x0)
        worst = max(worst, r1 - (lam * r0 + (1 - lam) * r2))
    return worst


def test_rd_curve_is_convex():
    std = RdProblem(FinitePmf([0.7, 0.3]), HAMMING2)
    curve = rd_curve("standard", std, np.linspace(0.0, 0.3, 9))
    assert _midpoint_excess(curve) <= 1e-4
    rho = 0.15
    dsbs = RdProblem(JointPmf.from_table(np.array([[1 - rho, rho], [rho, 1 - rho]]) / 2.0), HAMMING2)
    curve = rd_curve("wz", dsbs, np.linspace(0.0, 0.2, 9), _q(0.0, seed=4))
    assert _midpoint_excess(curve) <= 1e-4
    rates = [r for _, r in curve]
    assert all(b <= a + 1e-12 for a, b in zip(rates, rates[1:]))


def test_curve_results_time_shares_a_bump(monkeypatch):
    rates = {0.0: 1.0, 0.1: 0.9, 0.2: 0.2, 0.3: 0.0}

    def fake_solve(kind, problem, q):
        D = q.target_distortion
        return RdResult(rate=rates[D], achieving_kernel=None, distortion=D, kind=kind)

    monkeypatch.setattr(rate_distortion, "solve", fake_solve)
    out = curve_results("standard", None, [0.0, 0.1, 0.2, 0.3])
    assert [r.rate for r in out] == pytest.approx([1.0, 0.6, 0.2, 0.0])
    assert out[1].time_share == pytest.approx((0.5, 0.0, 0.2))
    assert out[1].distortion == pytest.approx(0.1)
    assert out[0].time_share is None and out[2].time_share is None
    curve = rd_curve("standard", None, [0.0, 0.1, 0.2, 0.3])
    assert _midpoint_excess(curve) <= 1e-12


def test_oracle_bound_shrinks_with_grid():
    problem = RdProblem(FinitePmf([0.7, 0.3]), HAMMING2)
    exact = float(binary_entropy(0.3) - binary_entropy(0.1))
    coarse = rd_brute_oracle("standard", problem, 20, _q(0.1))
    fine = rd_brute_oracle("standard", problem, 200, _q(0.1))
    assert fine.resolution_bound < coarse.resolution_bound
    for res in (coarse, fine):
        assert exact - 1e-9 <= res.rate <= exact + res.resolution_bound


def test_simplex_grid_rows_are_pmfs():
    grid = simplex_grid(3, 4)
    assert grid.shape == (15, 3)
    np.testing.assert_allclose(grid.sum(axis=1), 1.0)


def test_oracle_dimension_cap():
    problem = RdProblem(FinitePmf(np.full(4, 0.25)), DistortionMatrix.hamming(4))
    with pytest.raises(DimensionCapError):
        rd_brute_oracle("standard", problem, 100, _q(0.1))


def _random_instance(rng, kind):
    n = int(rng.integers(2, 4)) if kind == "standard" else 2
    if kind == "standard":
        source = FinitePmf(rng.dirichlet(np.ones(n)))
    else:
        source = JointPmf.from_table(rng.dirichlet(np.ones(4)).reshape(2, 2))
    D = float(rng.uniform(0.03, 0.3))
    return RdProblem(source, DistortionMatrix.hamming(n), 3 if kind == "wz" else None), D


def _oracle_agrees(kind, seed):
    rng = np.random.default_rng(seed)
    problem, D = _random_instance(rng, kind)
    steps = {"standard": 10 if problem.source.shape[0] == 3 else 200, "conditional": 30, "wz": 30}[kind]
    solver = {"standard": lambda q: standard_rd(problem.source, problem.distortion, q),
              "conditional": lambda q: conditional_rd(problem.source, problem.distortion, q),
              "wz": lambda q: wz_rd(problem.source, problem.distortion, 3, q)}[kind]
    res = solver(_q(D, seed=seed))
    oracle = rd_brute_oracle(kind, problem, steps, _q(D))
    # the oracle is feasible on a grid, so it can only be worse than the optimum
    assert res.rate <= oracle.rate + 2e-3
    assert oracle.rate <= res.rate + oracle.resolution_bound + 1e-9


@pytest.mark.parametrize("kind", ["standard", "conditional", "wz"])
@pytest.mark.parametrize("seed", [1, 2])
def test_oracle_agreement(kind, seed):
    _oracle_agrees(kind, seed)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_oracle_agreement_randomized(seed):
    _oracle_agrees(("standard", "conditional", "wz")[seed % 3], 100 + seed)
