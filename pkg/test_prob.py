#!/usr/bin/env python3
"""
Tests for finite pmfs and information measures
"""

import math
import os
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from utils.errors import DimensionCapError, ValidationError
from utils.prob import (Alphabet, CondPmf, FinitePmf, JointPmf, binary_entropy, condition, conditional_entropy,
                        entropy, joint_from_conditional, kl_divergence, marginalize, mutual_information,
                        mutual_information_from_channel, product)


def _tables(shape):
    weights = arrays(np.float64, shape, elements=st.floats(0.0, 1.0, allow_nan=False, allow_subnormal=False))
    return weights.filter(lambda w: w.sum() > 1e-3).map(lambda w: w / w.sum())


joints3 = st.tuples(st.integers(2, 3), st.integers(2, 3), st.integers(2, 3)).flatmap(_tables)


@given(joints3)
@settings(max_examples=60, deadline=None)
def test_chain_rule(table):
    joint = JointPmf.from_table(table, ["A", "B", "C"])
    h_abc = entropy(joint)
    h_a = entropy(marginalize(joint, ["A"]))
    h_b_a = conditional_entropy(joint, ["B"], ["A"])
    h_c_ab = conditional_entropy(joint, ["C"], ["A", "B"])
    assert h_abc == pytest.approx(h_a + h_b_a + h_c_ab, abs=1e-9)


@given(joints3)
@settings(max_examples=60, deadline=None)
def test_information_is_nonnegative_and_symmetric(table):
    joint = JointPmf.from_table(table, ["A", "B", "C"])
    i_ab = mutual_information(joint, ["A"], ["B"])
    assert i_ab >= 0.0
    assert i_ab == pytest.approx(mutual_information(joint, ["B"], ["A"]), abs=1e-12)
    assert mutual_information(joint, ["A"], ["B"], ["C"]) >= 0.0
    assert i_ab <= min(entropy(marginalize(joint, ["A"])), entropy(marginalize(joint, ["B"]))) + 1e-9


@given(st.tuples(st.integers(2, 3), st.integers(2, 3)).flatmap(_tables),
       st.integers(2, 4).flatmap(lambda m: arrays(np.float64, (3, m), elements=st.floats(0.01, 1.0))))
@settings(max_examples=60, deadline=None)
def test_data_processing(pxy, kernel):
    kernel = kernel[: pxy.shape[1]]
    kernel = kernel / kernel.sum(axis=1, keepdims=True)
    # X - Y - Z
    table = pxy[:, :, None] * kernel[None, :, :]
    joint = JointPmf.from_table(table / table.sum(), ["X", "Y", "Z"])
    assert mutual_information(joint, ["X"], ["Z"]) <= mutual_information(joint, ["X"], ["Y"]) + 1e-9
    assert mutual_information(joint, ["X"], ["Z"], ["Y"]) == pytest.approx(0.0, abs=1e-9)


@given(joints3)
@settings(max_examples=40, deadline=None)
def test_marginalization_composes(table):
    joint = JointPmf.from_table(table, ["A", "B", "C"])
    twice = marginalize(marginalize(joint, ["A", "C"]), ["C"])
    once = marginalize(joint, ["C"])
    np.testing.assert_allclose(twice.probs, once.probs, atol=1e-12)
    assert twice.labels == ("C",)


def test_marginalize_keeps_axis_order():
    joint = JointPmf.from_table(np.full((2, 3, 4), 1.0 / 24), ["A", "B", "C"])
    kept = marginalize(joint, ["C", "A"])
    assert kept.labels == ("A", "C")
    assert kept.shape == (2, 4)


def test_condition_and_rebuild():
    table = np.array([[0.1, 0.2], [0.0, 0.0], [0.3, 0.4]])
    joint = JointPmf.from_table(table, ["X", "Y"])
    cond = condition(joint, ["X"])
    assert list(cond.defined) == [True, False, True]
    np.testing.assert_allclose(cond.probs[1], 0.0)
    rebuilt = joint_from_conditional(marginalize(joint, ["X"]), cond)
    np.testing.assert_allclose(rebuilt.probs, table, atol=1e-15)


def test_product_is_independent():
    joint = product(FinitePmf([0.3, 0.7], "A"), FinitePmf([0.2, 0.5, 0.3], "B"))
    assert joint.shape == (2, 3)
    assert mutual_information(joint, ["A"], ["B"]) == 0.0


def test_binary_entropy_values():
    assert float(binary_entropy(0.5)) == pytest.approx(1.0)
    assert float(binary_entropy(0.0)) == 0.0
    assert float(binary_entropy(0.11)) == pytest.approx(0.4999, abs=1e-3)


def test_kl_divergence():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(1.0)


def test_channel_information_batch():
    bsc = np.array([[0.9, 0.1], [0.1, 0.9]])
    values = mutual_information_from_channel(np.array([[0.5, 0.5], [1.0, 0.0]]), bsc)
    assert values[0] == pytest.approx(1.0 - float(binary_entropy(0.1)))
    assert values[1] == pytest.approx(0.0, abs=1e-12)


def test_rejects_bad_tables():
    with pytest.raises(ValidationError):
        JointPmf.from_table([[0.5, 0.6], [0.0, 0.0]])
    with pytest.raises(ValidationError):
        JointPmf.from_table([[0.5, 0.6], [-0.1, 0.0]])
    with pytest.raises(ValidationError):
        FinitePmf([0.5, float("nan"), 0.5])
    with pytest.raises(ValidationError):
        Alphabet(0)
    with pytest.raises(ValidationError):
        CondPmf([Alphabet(2)], [Alphabet(2)], [[0.5, 0.5], [0.7, 0.7]])


def test_normalize_rescales():
    pmf = FinitePmf([1.0, 3.0], normalize=True)
    np.testing.assert_allclose(pmf.probs, [0.25, 0.75])


def test_overlapping_groups_rejected():
    joint = JointPmf.from_table(np.full((2, 2), 0.25), ["A", "B"])
    with pytest.raises(ValidationError):
        mutual_information(joint, ["A"], ["A", "B"])
    with pytest.raises(ValidationError):
        conditional_entropy(joint, ["A"], ["A"])
    with pytest.raises(ValidationError):
        marginalize(joint, ["C"])


def test_dimension_cap(monkeypatch):
    import utils.prob as prob

    monkeypatch.setattr(prob, "SETTINGS", prob.SETTINGS.with_overrides(max_cells=16))
    with pytest.raises(DimensionCapError):
        JointPmf([Alphabet(4), Alphabet(5)], np.full(20, 0.05))
