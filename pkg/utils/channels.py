"""
Discrete memoryless two-way channels P(y1, y2 | x1, x2) and named builders

Composite symbols are packed row-major: a Dueck input (x_{j,1}, x_{j,2}) is
2*x_{j,1} + x_{j,2}, a Dueck output (y_{j,1}, y_{j,2}, y_{j,3}) is
4*y_{j,1} + 2*y_{j,2} + y_{j,3}.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import ValidationError
from .prob import Alphabet, CondPmf, JointPmf

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TwcChannel:
    """Two-way channel; kernel is a CondPmf given (X1, X2) over (Y1, Y2)"""

    kernel: CondPmf
    name: str = "raw"
    params: Dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.kernel.given_axes) != 2 or len(self.kernel.out_axes) != 2:
            raise ValidationError("channel kernel must be given (X1, X2) over (Y1, Y2)")
        if not np.all(self.kernel.defined):
            raise ValidationError("channel kernel must be defined for every input pair")

    @property
    def x1(self) -> Alphabet:
        return self.kernel.given_axes[0]

    @property
    def x2(self) -> Alphabet:
        return self.kernel.given_axes[1]

    @property
    def y1(self) -> Alphabet:
        return self.kernel.out_axes[0]

    @property
    def y2(self) -> Alphabet:
        return self.kernel.out_axes[1]

    @property
    def table(self) -> np.ndarray:
        """Kernel as an array of shape (|X1|, |X2|, |Y1|, |Y2|)"""
        return self.kernel.probs

    @property
    def sizes(self):
        return self.x1.size, self.x2.size, self.y1.size, self.y2.size

    def to_terminal2(self) -> np.ndarray:
        """P(y2 | x1, x2), shape (|X1|, |X2|, |Y2|)"""
        return self.table.sum(axis=2)

    def to_terminal1(self) -> np.ndarray:
        """P(y1 | x1, x2), shape (|X1|, |X2|, |Y1|)"""
        return self.table.sum(axis=3)

    def joint_with_inputs(self, p_inputs: np.ndarray) -> JointPmf:
        """Joint over (X1, X2, Y1, Y2) for an input law of shape (|X1|, |X2|)"""
        p_inputs = np.asarray(p_inputs, dtype=float).reshape(self.x1.size, self.x2.size)
        table = p_inputs[:, :, None, None] * self.table
        return JointPmf.derived([Alphabet(self.x1.size, "X1"), Alphabet(self.x2.size, "X2"),
                                 Alphabet(self.y1.size, "Y1"), Alphabet(self.y2.size, "Y2")], table)

    def is_deterministic(self) -> bool:
        return self.kernel.is_deterministic()

    def to_dict(self) -> Dict:
        out = {
            "x1": self.x1.size, "x2": self.x2.size, "y1": self.y1.size, "y2": self.y2.size,
            "kernel": [float(v) for v in self.table.ravel()],
        }
        if self.name != "raw":
            out["name"] = self.name
            out["params"] = dict(self.params)
        return out


def _make(table: np.ndarray, name: str, params: Optional[Dict] = None) -> TwcChannel:
    x1, x2, y1, y2 = table.shape
    kernel = CondPmf([Alphabet(x1, "X1"), Alphabet(x2, "X2")], [Alphabet(y1, "Y1"), Alphabet(y2, "Y2")], table)
    return TwcChannel(kernel=kernel, name=name, params=params or {})


def _check_crossover(eps: float, label: str) -> float:
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise ValidationError(f"{label} must lie in [0, 1], got {eps}")
    return eps


def raw_channel(x1: int, x2: int, y1: int, y2: int, kernel) -> TwcChannel:
    """Validate a flat row-major kernel over (x1, x2, y1, y2)"""
    table = np.asarray(kernel, dtype=float)
    expected = x1 * x2 * y1 * y2
    if table.size != expected:
        raise ValidationError(f"kernel has {table.size} entries, expected {expected}")
    return _make(table.reshape(x1, x2, y1, y2), "raw")


def binary_additive(eps1: float, eps2: float) -> TwcChannel:
    """Y_j = X1 xor X2 xor N_j with independent N_j ~ Ber(eps_j)"""
    eps1 = _check_crossover(eps1, "eps1")
    eps2 = _check_crossover(eps2, "eps2")
    table = np.zeros((2, 2, 2, 2))
    noise1 = (1.0 - eps1, eps1)
    noise2 = (1.0 - eps2, eps2)
    for a in range(2):
        for b in range(2):
            for n1 in range(2):
                for n2 in range(2):
                    table[a, b, a ^ b ^ n1, a ^ b ^ n2] += noise1[n1] * noise2[n2]
    return _make(table, "additive", {"eps1": eps1, "eps2": eps2})


def binary_multiplying() -> TwcChannel:
    """Y1 = Y2 = X1 * X2"""
    table = np.zeros((2, 2, 2, 2))
    for a in range(2):
        for b in range(2):
            table[a, b, a * b, a * b] = 1.0
    return _make(table, "multiplying")


def dueck(noise_joint) -> TwcChannel:
    """
    Dueck's channel: X_j = (X_j1, X_j2), Y_j = (X11*X21, N_j xor X_j'2, N_j')

    Args:
        noise_joint: 2x2 table P(N1, N2), flat row-major accepted
    """
    noise = np.asarray(noise_joint, dtype=float).reshape(2, 2)
    if np.any(noise < 0) or abs(noise.sum() - 1.0) > 1e-12:
        raise ValidationError("Dueck noise joint must be a pmf over {0,1}^2")
    table = np.zeros((4, 4, 8, 8))
    for x1 in range(4):
        x11, x12 = divmod(x1, 2)
        for x2 in range(4):
            x21, x22 = divmod(x2, 2)
            common = x11 * x21
            for n1 in range(2):
                for n2 in range(2):
                    y1 = 4 * common + 2 * (n1 ^ x22) + n2
                    y2 = 4 * common + 2 * (n2 ^ x12) + n1
                    table[x1, x2, y1, y2] += noise[n1, n2]
    return _make(table, "dueck", {"noise": [float(v) for v in noise.ravel()]})


def dueck_independent() -> TwcChannel:
    """Dueck's channel with independent Ber(0.5) noises"""
    return dueck(np.full((2, 2), 0.25))


def dueck_correlated() -> TwcChannel:
    """Dueck's channel with P(N1=0, N2=0) = 0 and 1/3 on the other cells"""
    return dueck(np.array([[0.0, 1.0], [1.0, 1.0]]) / 3.0)


def mixed(eps1: float) -> TwcChannel:
    """Y1 = X1 xor X2 xor N1 with N1 ~ Ber(eps1), Y2 = X1 * X2"""
    eps1 = _check_crossover(eps1, "eps1")
    table = np.zeros((2, 2, 2, 2))
    for a in range(2):
        for b in range(2):
            table[a, b, a ^ b, a * b] += 1.0 - eps1
            table[a, b, a ^ b ^ 1, a * b] += eps1
    return _make(table, "mixed", {"eps1": eps1})


def build_channel(spec) -> TwcChannel:
    """
    Build a channel from a named-builder spec or a raw kernel spec

    Accepted forms:
        {"name": "additive", "eps1": .05, "eps2": .05}
        {"name": "multiplying"}
        {"name": "dueck", "noise": {"joint": [0, 1/3, 1/3, 1/3]}}
        {"name": "mixed", "eps1": .05}
        {"x1": 2, "x2": 2, "y1": 2, "y2": 2, "kernel": [...]}
    """
    if isinstance(spec, TwcChannel):
        return spec
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict):
        raise ValidationError("channel spec must be an object")
    if "kernel" in spec and spec.get("name", "raw") == "raw":
        try:
            return raw_channel(int(spec["x1"]), int(spec["x2"]), int(spec["y1"]), int(spec["y2"]), spec["kernel"])
        except KeyError as e:
            raise ValidationError(f"raw channel spec is missing {e}") from None
    name = spec.get("name")
    params = spec.get("params", spec)
    if name == "additive":
        return binary_additive(params.get("eps1", 0.0), params.get("eps2", 0.0))
    if name == "multiplying":
        return binary_multiplying()
    if name == "mixed":
        return mixed(params.get("eps1", 0.0))
    if name in ("dueck", "dueck_correlated", "dueck_independent"):
        if name == "dueck_correlated":
            return dueck_correlated()
        if name == "dueck_independent":
            return dueck_independent()
        noise = params.get("noise")
        if isinstance(noise, dict):
            noise = noise.get("joint")
        if noise is None:
            raise ValidationError("dueck builder needs a noise joint")
        return dueck(noise)
    raise ValidationError(f"unknown channel builder {name!r}")
