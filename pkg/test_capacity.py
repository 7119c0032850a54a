#!/usr/bin/env python3
"""
Tests for two-way channels, capacity frontiers and Han-type rate evaluation
"""

import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from utils.capacity import (FrontierOptions, convexify, han_joint_from_product, han_rate_eval, hausdorff_distance,
                            numerical_symmetry, product_rates, proposition1_frontier, shannon_inner_frontier,
                            shannon_outer_frontier, symmetric_rate, verify_witnesses)
from utils.channels import (binary_additive, binary_multiplying, build_channel, dueck, dueck_correlated, mixed,
                            raw_channel)
from utils.errors import ValidationError
from utils.prob import binary_entropy

FAST = FrontierOptions(grid_step=0.1, weights=tuple(np.linspace(0.0, 1.0, 21)), refine_rounds=100, multistart=8)


def test_additive_region_is_a_square():
    ch = binary_additive(0.05, 0.05)
    inner = shannon_inner_frontier(ch, FAST)
    cap = 1.0 - float(binary_entropy(0.05))
    assert symmetric_rate(inner) == pytest.approx(cap, abs=1e-6)
    assert inner.coords()[:, 0].max() == pytest.approx(cap, abs=1e-6)
    assert verify_witnesses(ch, inner) < 1e-9


def test_multiplying_inner_and_outer_symmetric_rates():
    ch = binary_multiplying()
    inner = shannon_inner_frontier(ch, FAST)
    outer = shannon_outer_frontier(ch, FAST, inner=inner)
    assert symmetric_rate(inner) == pytest.approx(0.6169, abs=2e-3)
    assert symmetric_rate(outer) == pytest.approx(0.6942, abs=3e-3)
    assert not numerical_symmetry(ch, FAST).symmetric


def test_additive_channel_passes_symmetry_surrogate():
    report = numerical_symmetry(binary_additive(0.1, 0.1), FAST)
    assert report.symmetric
    assert report.distance < 1e-3


def test_product_rates_of_mixed_channel():
    ch = mixed(0.05)
    r1, r2 = product_rates(ch, np.array([0.5, 0.5]), np.array([0.5, 0.5]))
    # X1 reaches terminal 2 through the multiplying link, X2 reaches terminal 1 through a BSC
    assert r1 == pytest.approx(0.5, abs=1e-12)
    assert r2 == pytest.approx(1.0 - float(binary_entropy(0.05)), abs=1e-12)


def test_han_degenerate_joint_matches_product_rates():
    ch = binary_multiplying()
    p1, p2 = np.array([0.3, 0.7]), np.array([0.4, 0.6])
    pair = han_rate_eval(han_joint_from_product(ch, p1, p2), ch)
    r1, r2 = product_rates(ch, p1, p2)
    assert pair.r1 == pytest.approx(r1, abs=1e-12)
    assert pair.r2 == pytest.approx(r2, abs=1e-12)


def test_han_joint_must_match_channel():
    joint = han_joint_from_product(binary_multiplying(), [0.5, 0.5], [0.5, 0.5])
    with pytest.raises(ValidationError):
        han_rate_eval(joint, binary_additive(0.1, 0.1))


def test_convexify_keeps_support_and_hausdorff():
    inner = shannon_inner_frontier(binary_multiplying(), FAST)
    hull = convexify(inner)
    assert hull.convexified
    for w in (0.0, 0.25, 0.5, 0.75, 1.0):
        assert hull.support(w) == pytest.approx(inner.support(w), abs=1e-12)
    assert hausdorff_distance(hull, hull) == 0.0


def test_channel_builders():
    ch = dueck_correlated()
    assert ch.sizes == (4, 4, 8, 8)
    np.testing.assert_allclose(ch.table.sum(axis=(2, 3)), 1.0)
    assert build_channel({"name": "dueck", "noise": {"joint": [0.0, 1 / 3, 1 / 3, 1 / 3]}}).sizes == (4, 4, 8, 8)
    spec = binary_additive(0.1, 0.2).to_dict()
    rebuilt = build_channel(spec)
    np.testing.assert_allclose(rebuilt.table, binary_additive(0.1, 0.2).table)
    with pytest.raises(ValidationError):
        binary_additive(1.5, 0.0)
    with pytest.raises(ValidationError):
        dueck([0.5, 0.5, 0.5, 0.5])
    with pytest.raises(ValidationError):
        raw_channel(2, 2, 2, 2, np.full(15, 0.25))
    with pytest.raises(ValidationError):
        build_channel({"name": "teleporter"})


def test_dueck_output_packing():
    # x1 = (1, 0), x2 = (1, 1), noise (N1, N2) = (1, 0) with certainty
    ch = dueck([0.0, 0.0, 1.0, 0.0])
    y1 = 4 * 1 + 2 * (1 ^ 1) + 0
    y2 = 4 * 1 + 2 * (0 ^ 0) + 1
    assert ch.table[2, 3, y1, y2] == 1.0


@pytest.mark.parametrize("seed", range(6))
def test_inner_inside_outer_on_random_channels(seed):
    rng = np.random.default_rng(seed)
    kernel = rng.dirichlet(np.ones(4), size=4).ravel()
    ch = raw_channel(2, 2, 2, 2, kernel)
    inner = shannon_inner_frontier(ch, FAST)
    outer = shannon_outer_frontier(ch, FAST, inner=inner)
    for w in np.linspace(0.0, 1.0, 11):
        assert inner.support(w) <= outer.support(w) + 1e-6


@pytest.mark.slow
def test_dueck_correlated_nonadaptive_symmetric_rate():
    hull = proposition1_frontier(dueck_correlated())
    assert symmetric_rate(hull) == pytest.approx(0.9503, abs=1e-3)
