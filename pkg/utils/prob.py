"""
Finite probability tables and information measures

All tables are dense numpy arrays over indexed alphabets (symbols 0..size-1).
Flattened tables are row-major (C order): the last axis varies fastest.
Logarithms are base 2 everywhere, with 0*log0 = 0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import entr, rel_entr

from .errors import DimensionCapError, ValidationError
from .settings import SETTINGS

logger = logging.getLogger(__name__)

PMF_TOL = 1e-12
LN2 = math.log(2.0)

AxisRef = Union[int, str]


@dataclass(frozen=True)
class Alphabet:
    """Indexed finite alphabet; symbols are 0..size-1"""

    size: int
    label: Optional[str] = None

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValidationError(f"alphabet size must be a positive integer, got {self.size}")


def _check_cells(shape: Tuple[int, ...]) -> None:
    cells = int(np.prod(shape, dtype=np.int64)) if shape else 1
    if cells > SETTINGS.max_cells:
        raise DimensionCapError(
            f"table with {cells} cells exceeds the cap of {SETTINGS.max_cells} (TWC_MAX_CELLS)"
        )


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=float)
    array.setflags(write=False)
    return array


class JointPmf:
    """
    Joint pmf over an ordered list of alphabets

    Args:
        axes: alphabets, in table axis order
        probs: table of shape (a.size for a in axes); flat row-major input accepted
        normalize: rescale instead of rejecting a table whose mass is not 1
    """

    def __init__(self, axes: Sequence[Alphabet], probs, normalize: bool = False):
        self.axes = tuple(axes)
        shape = tuple(a.size for a in self.axes)
        _check_cells(shape)
        table = np.asarray(probs, dtype=float)
        if table.size != int(np.prod(shape, dtype=np.int64)):
            raise ValidationError(f"table has {table.size} entries, axes need shape {shape}")
        table = table.reshape(shape)
        if not np.all(np.isfinite(table)):
            raise ValidationError("pmf entries must be finite")
        if np.any(table < -PMF_TOL):
            raise ValidationError("pmf entries must be non-negative")
        table = np.clip(table, 0.0, None)
        total = table.sum()
        if normalize:
            if total <= 0:
                raise ValidationError("cannot normalize a table with zero mass")
            table = table / total
        elif abs(total - 1.0) > PMF_TOL:
            raise ValidationError(f"pmf mass is {total!r}, expected 1 within {PMF_TOL}")
        self.probs = _frozen(table)

    @classmethod
    def derived(cls, axes: Sequence[Alphabet], table) -> "JointPmf":
        """Build from a table computed out of valid pmfs; rounding drift up to 1e-9 is rescaled"""
        table = np.clip(np.asarray(table, dtype=float), 0.0, None)
        total = table.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"derived table has mass {total!r}")
        return cls(axes, table / total)

    @classmethod
    def from_table(cls, probs, labels: Optional[Sequence[str]] = None, normalize: bool = False) -> "JointPmf":
        table = np.asarray(probs, dtype=float)
        labels = list(labels) if labels is not None else [None] * table.ndim
        if len(labels) != table.ndim:
            raise ValidationError("one label per table axis is required")
        axes = [Alphabet(n, lab) for n, lab in zip(table.shape, labels)]
        return cls(axes, table, normalize=normalize)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.probs.shape

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def labels(self) -> Tuple[Optional[str], ...]:
        return tuple(a.label for a in self.axes)

    def axis_index(self, ref: AxisRef) -> int:
        """Resolve an axis given by position or label"""
        if isinstance(ref, (int, np.integer)):
            if not 0 <= ref < self.ndim:
                raise ValidationError(f"axis {ref} out of range for a {self.ndim}-axis joint")
            return int(ref)
        for i, a in enumerate(self.axes):
            if a.label == ref:
                return i
        raise ValidationError(f"no axis labelled {ref!r} in {self.labels}")

    def axis_set(self, refs: Iterable[AxisRef]) -> Tuple[int, ...]:
        idx = [self.axis_index(r) for r in refs]
        if len(set(idx)) != len(idx):
            raise ValidationError(f"repeated axes in {list(refs)}")
        return tuple(sorted(idx))

    def transpose(self, order: Sequence[AxisRef]) -> "JointPmf":
        idx = [self.axis_index(r) for r in order]
        if sorted(idx) != list(range(self.ndim)):
            raise ValidationError("transpose needs a permutation of all axes")
        return JointPmf([self.axes[i] for i in idx], np.transpose(self.probs, idx))

    def flat(self) -> np.ndarray:
        return self.probs.ravel(order="C")

    def __eq__(self, other) -> bool:
        if not isinstance(other, JointPmf):
            return NotImplemented
        return self.axes == other.axes and np.array_equal(self.probs, other.probs)

    def __repr__(self) -> str:
        return f"JointPmf(axes={[(a.label, a.size) for a in self.axes]})"


class FinitePmf(JointPmf):
    """Pmf over a single alphabet"""

    def __init__(self, probs, label: Optional[str] = None, normalize: bool = False):
        vec = np.asarray(probs, dtype=float).ravel()
        super().__init__([Alphabet(vec.size, label)], vec, normalize=normalize)

    @property
    def alphabet(self) -> Alphabet:
        return self.axes[0]


class CondPmf:
    """
    Conditional pmf P(out | given) stored as a table of shape given_shape + out_shape

    Conditioning cells with zero mass are carried in `defined` (False) with an
    all-zero slice; they are never NaN.
    """

    def __init__(self, given_axes: Sequence[Alphabet], out_axes: Sequence[Alphabet], probs,
                 defined=None, normalize: bool = False):
        self.given_axes = tuple(given_axes)
        self.out_axes = tuple(out_axes)
        gshape = tuple(a.size for a in self.given_axes)
        oshape = tuple(a.size for a in self.out_axes)
        _check_cells(gshape + oshape)
        table = np.asarray(probs, dtype=float).reshape(gshape + oshape)
        if np.any(table < -PMF_TOL) or not np.all(np.isfinite(table)):
            raise ValidationError("conditional pmf entries must be finite and non-negative")
        table = np.clip(table, 0.0, None)
        out_dims = tuple(range(len(gshape), len(gshape) + len(oshape)))
        sums = table.sum(axis=out_dims) if out_dims else np.ones(gshape)
        mask = np.ones(gshape, dtype=bool) if defined is None else np.asarray(defined, dtype=bool).reshape(gshape)
        if normalize:
            safe = np.where(sums > 0, sums, 1.0)
            table = table / safe.reshape(gshape + (1,) * len(oshape))
            mask = mask & (sums > 0)
            sums = np.where(mask, 1.0, 0.0)
        bad = mask & (np.abs(sums - 1.0) > PMF_TOL)
        if np.any(bad):
            cell = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ValidationError(f"conditional slice at {cell} sums to {sums[cell]!r}, expected 1")
        table = np.where(mask.reshape(gshape + (1,) * len(oshape)), table, 0.0)
        self.probs = _frozen(table)
        self.defined = mask.copy()
        self.defined.setflags(write=False)

    @classmethod
    def from_table(cls, probs, given_ndim: int, given_labels=None, out_labels=None,
                   normalize: bool = False) -> "CondPmf":
        table = np.asarray(probs, dtype=float)
        gl = list(given_labels) if given_labels else [None] * given_ndim
        ol = list(out_labels) if out_labels else [None] * (table.ndim - given_ndim)
        given = [Alphabet(n, lab) for n, lab in zip(table.shape[:given_ndim], gl)]
        out = [Alphabet(n, lab) for n, lab in zip(table.shape[given_ndim:], ol)]
        return cls(given, out, table, normalize=normalize)

    @property
    def given_shape(self) -> Tuple[int, ...]:
        return tuple(a.size for a in self.given_axes)

    @property
    def out_shape(self) -> Tuple[int, ...]:
        return tuple(a.size for a in self.out_axes)

    def slice(self, *given_index) -> np.ndarray:
        return self.probs[tuple(given_index)]

    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0) | (self.probs == 1)))

    def __repr__(self) -> str:
        return (f"CondPmf(given={[(a.label, a.size) for a in self.given_axes]}, "
                f"out={[(a.label, a.size) for a in self.out_axes]})")


def marginalize(joint: JointPmf, keep_axes: Iterable[AxisRef]) -> JointPmf:
    """Sum out every axis not in keep_axes; kept axes stay in their original order"""
    keep = joint.axis_set(keep_axes)
    if not keep:
        raise ValidationError("marginalize needs at least one kept axis")
    drop = tuple(i for i in range(joint.ndim) if i not in keep)
    table = joint.probs.sum(axis=drop) if drop else joint.probs
    return JointPmf.derived([joint.axes[i] for i in keep], table)


def condition(joint: JointPmf, given_axes: Iterable[AxisRef]) -> CondPmf:
    """
    Bayes-rule conditional of the remaining axes given `given_axes`

    Given axes come first in the result, both groups keep the joint's order.
    """
    given = joint.axis_set(given_axes)
    if not given or len(given) == joint.ndim:
        raise ValidationError("condition needs a proper, nonempty set of given axes")
    out = tuple(i for i in range(joint.ndim) if i not in given)
    table = np.transpose(joint.probs, given + out)
    gshape = table.shape[:len(given)]
    mass = table.sum(axis=tuple(range(len(given), table.ndim)))
    defined = mass > 0
    if not np.any(defined):
        raise ValidationError("every conditioning cell has zero mass")
    safe = np.where(defined, mass, 1.0).reshape(gshape + (1,) * len(out))
    cond = table / safe
    return CondPmf([joint.axes[i] for i in given], [joint.axes[i] for i in out], cond, defined=defined)


def joint_from_conditional(marginal: JointPmf, cond: CondPmf) -> JointPmf:
    """P(given, out) = P(given) * P(out | given), axes ordered given + out"""
    if marginal.shape != cond.given_shape:
        raise ValidationError(f"marginal shape {marginal.shape} does not match conditional {cond.given_shape}")
    live = marginal.probs > 0
    if np.any(live & ~cond.defined):
        raise ValidationError("conditional is undefined on a cell with positive mass")
    table = marginal.probs.reshape(marginal.shape + (1,) * len(cond.out_shape)) * cond.probs
    return JointPmf.derived(list(marginal.axes) + list(cond.out_axes), table)


def product(*pmfs: JointPmf) -> JointPmf:
    """Independent product of joints, axes concatenated in argument order"""
    table = np.ones(())
    axes = []
    for p in pmfs:
        table = np.multiply.outer(table, p.probs)
        axes.extend(p.axes)
    return JointPmf.derived(axes, table)


def entropy_of_table(probs: np.ndarray) -> float:
    """Entropy in bits of any non-negative table that sums to one"""
    return float(entr(np.asarray(probs, dtype=float)).sum() / LN2)


def entropy(joint: JointPmf) -> float:
    return max(0.0, entropy_of_table(joint.probs))


def _group_entropy(joint: JointPmf, axes: Tuple[int, ...]) -> float:
    if not axes:
        return 0.0
    drop = tuple(i for i in range(joint.ndim) if i not in axes)
    table = joint.probs.sum(axis=drop) if drop else joint.probs
    return entropy_of_table(table)


def mutual_information(joint: JointPmf, group_a: Iterable[AxisRef], group_b: Iterable[AxisRef],
                       group_cond: Iterable[AxisRef] = ()) -> float:
    """I(A;B|C) in bits from entropies of marginals"""
    a = joint.axis_set(group_a)
    b = joint.axis_set(group_b)
    c = joint.axis_set(group_cond)
    if not a or not b:
        raise ValidationError("mutual information needs two nonempty groups")
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValidationError("mutual information groups must be disjoint")
    ac = tuple(sorted(a + c))
    bc = tuple(sorted(b + c))
    abc = tuple(sorted(a + b + c))
    value = (_group_entropy(joint, ac) + _group_entropy(joint, bc)
             - _group_entropy(joint, abc) - _group_entropy(joint, c))
    if value < PMF_TOL:
        return 0.0
    return float(value)


def conditional_entropy(joint: JointPmf, group_a: Iterable[AxisRef], group_cond: Iterable[AxisRef] = ()) -> float:
    """H(A|C) in bits"""
    a = joint.axis_set(group_a)
    c = joint.axis_set(group_cond)
    if set(a) & set(c):
        raise ValidationError("conditional entropy groups must be disjoint")
    value = _group_entropy(joint, tuple(sorted(a + c))) - _group_entropy(joint, c)
    return max(0.0, float(value))


def kl_divergence(p, q) -> float:
    """D(p||q) in bits; math.inf when p puts mass where q has none"""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError("divergence needs tables of equal shape")
    terms = rel_entr(p, q)
    if np.any(np.isinf(terms)):
        return math.inf
    return float(terms.sum() / LN2)


def binary_entropy(p) -> np.ndarray:
    """H_b(p) in bits, elementwise"""
    p = np.asarray(p, dtype=float)
    return (entr(p) + entr(1.0 - p)) / LN2


def mutual_information_from_channel(p_in: np.ndarray, channel: np.ndarray) -> np.ndarray:
    """
    I(X;Y) for a batch of input laws through one channel matrix

    Args:
        p_in: (..., |X|) input laws
        channel: (|X|, |Y|) row-stochastic matrix
    """
    p_in = np.asarray(p_in, dtype=float)
    p_out = p_in @ channel
    h_out = entr(p_out).sum(axis=-1)
    h_cond = p_in @ entr(channel).sum(axis=-1)
    return np.clip((h_out - h_cond) / LN2, 0.0, None)
