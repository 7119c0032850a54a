"""
Built-in two-way schemes: symbol-wise uncoded with MAP decoding, the zero-error
adaptive scheme for Dueck's channel with correlated noise, and symbol-wise
compilation of non-adaptive configurations
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .channels import TwcChannel
from .coded_chain import Configuration
from .errors import ConfigurationError, ValidationError
from .prob import JointPmf
from .rate_distortion import DistortionMatrix
from .simulation import CausalHistory, Scheme
from .special_configs import min_distortion_decoders

logger = logging.getLogger(__name__)


def _embedding(embed: Optional[Sequence[int]], n_s: int, n_x: int, j: int) -> np.ndarray:
    if embed is None:
        if n_x < n_s:
            raise ValidationError(f"|X{j}| = {n_x} cannot carry |S{j}| = {n_s} symbols; supply an embedding")
        return np.arange(n_s)
    table = np.asarray(embed, dtype=np.int64).ravel()
    if table.size != n_s or np.any(table < 0) or np.any(table >= n_x):
        raise ValidationError(f"embedding {j} must map {n_s} source symbols into X{j}")
    return table


def scheme_uncoded_map(src: JointPmf, ch: TwcChannel, d1: Optional[DistortionMatrix] = None,
                       d2: Optional[DistortionMatrix] = None,
                       embed: Tuple[Optional[Sequence[int]], Optional[Sequence[int]]] = (None, None)) -> Scheme:
    """
    X_{j,n} = embed_j(S_{j,n}); each terminal decodes S_{j',n} from (S_{j,n}, Y_{j,n})

    The decoders minimize the conditional expected distortion under the induced
    single-letter joint (MAP for Hamming), ties to the lowest index.
    """
    e1 = _embedding(embed[0], src.shape[0], ch.x1.size, 1)
    e2 = _embedding(embed[1], src.shape[1], ch.x2.size, 2)
    g1, g2 = min_distortion_decoders(src, ch, e1, e2, d1, d2)

    def validate(source: JointPmf, channel: TwcChannel) -> None:
        if source.shape != src.shape or channel.sizes != ch.sizes:
            raise ValidationError("uncoded scheme was built for different source or channel alphabets")

    return Scheme(
        name="uncoded_map",
        encoders=(lambda n, s, hist, state: e1[s[:, n]], lambda n, s, hist, state: e2[s[:, n]]),
        decoders=(lambda s, y, state: g1[s, y], lambda s, y, state: g2[s, y]),
        uses=lambda k: k,
        validate=validate,
    )


# Dueck input x_j = 2*x_{j,1} + x_{j,2}; output y_j = 4*y_{j,1} + 2*y_{j,2} + y_{j,3}

def _dueck_input(first, second) -> np.ndarray:
    return 2 * np.asarray(first, dtype=np.int64) + np.asarray(second, dtype=np.int64)


def _dueck_parts(y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return y // 4, (y // 2) % 2, y % 2


def _example4_encoder(n: int, s: np.ndarray, hist: CausalHistory, state: Dict) -> np.ndarray:
    k = s.shape[1]
    if n == 0:
        return _dueck_input(np.ones(s.shape[0], dtype=np.int64), s[:, 0])
    _, _, y3_prev = _dueck_parts(hist[n - 1])
    if n < k:
        return _dueck_input(y3_prev, s[:, n])
    return _dueck_input(y3_prev, np.ones(s.shape[0], dtype=np.int64))


def _example4_decoder(s: np.ndarray, y: np.ndarray, state: Dict) -> np.ndarray:
    """
    Block b is decoded from uses b and b+1: Y_{j,1} at b+1 equals N_1 * N_2 of block b.
    If the partner's noise (own Y_{j,3}) is 0 the own noise must be 1, else it is the product.
    """
    k = s.shape[1]
    product, _, _ = _dueck_parts(y[:, 1:k + 1])
    _, y2, y3 = _dueck_parts(y[:, :k])
    own_noise = np.where(y3 == 0, 1, product)
    return own_noise ^ y2


def _validate_dueck(src: JointPmf, ch: TwcChannel) -> None:
    if ch.name != "dueck" or ch.sizes != (4, 4, 8, 8):
        raise ValidationError(f"the adaptive Dueck scheme needs a Dueck channel, got {ch.name}")
    if src.shape != (2, 2):
        raise ValidationError("the adaptive Dueck scheme carries binary sources")
    noise = np.asarray(ch.params.get("noise", []), dtype=float).reshape(2, 2)
    if noise[0, 0] > 0:
        logger.warning("Dueck noise has P(N1=0, N2=0) > 0; zero-error decoding is not guaranteed")


def scheme_example4_dueck() -> Scheme:
    """
    Zero-error adaptive scheme for Dueck's channel, K source pairs in K+1 uses

    Use 1 sends (1, S^(1)); use b sends (Y3^(b-1), S^(b)); use K+1 sends (Y3^(K), 1).
    Feeding back the partner's noise through the multiplying link lets each
    terminal learn its own noise one use later.
    """
    return Scheme(
        name="example4_dueck",
        encoders=(_example4_encoder, _example4_encoder),
        decoders=(_example4_decoder, _example4_decoder),
        uses=lambda k: k + 1,
        validate=_validate_dueck,
    )


def _draw_aux(rng: np.random.Generator, s: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    cum = np.cumsum(kernel, axis=1)
    u = rng.random(s.shape)
    cell = (u[..., None] >= cum[s]).sum(axis=-1)
    return np.minimum(cell, kernel.shape[1] - 1)


def compile_configuration_scheme(cfg: Configuration) -> Scheme:
    """
    Symbol-wise scheme of a non-adaptive configuration, one channel use per source pair

    Use n sends f_j(S_{j,n}, U_{j,n}) with U_{j,n} ~ P(U_j|S_j) and terminal j
    reconstructs with g_j(U_{j',n}, S_{j,n}, U_{j,n}, Y_{j,n}). The partner's U is
    read from the shared state, so the simulated distortions are the
    single-letter reference values of the configuration.
    """
    if not cfg.is_pi_prime():
        raise ConfigurationError("only non-adaptive configurations compile to symbol-wise schemes")
    f1 = cfg.f1[0, 0, :, :, 0]
    f2 = cfg.f2[0, 0, :, :, 0]
    g1 = cfg.g1[:, 0, 0, :, :, 0, :]  # (ut2, st1, ut1, y1)
    g2 = cfg.g2[:, 0, 0, :, :, 0, :]
    k1, k2 = cfg.p_u1_given_s1.probs, cfg.p_u2_given_s2.probs

    def prepare(rng: np.random.Generator, s1: np.ndarray, s2: np.ndarray) -> Dict:
        return {"u1": _draw_aux(rng, s1, k1), "u2": _draw_aux(rng, s2, k2)}

    def validate(src: JointPmf, ch: TwcChannel) -> None:
        if src.shape != cfg.s_sizes:
            raise ValidationError("source alphabets differ from the configuration")
        if (ch.x1.size, ch.x2.size) != tuple(cfg.x_sizes) or (ch.y1.size, ch.y2.size) != tuple(cfg.y_sizes):
            raise ValidationError("channel alphabets differ from the configuration")

    return Scheme(
        name=f"compiled_{cfg.name}",
        encoders=(lambda n, s, hist, st: f1[s[:, n], st["u1"][:, n]],
                  lambda n, s, hist, st: f2[s[:, n], st["u2"][:, n]]),
        decoders=(lambda s, y, st: g1[st["u2"], s, st["u1"], y],
                  lambda s, y, st: g2[st["u1"], s, st["u2"], y]),
        uses=lambda k: k,
        prepare=prepare,
        validate=validate,
        genie_aided=bool(max(cfg.u_sizes) > 1),
    )


SCHEMES = ("uncoded_map", "example4_dueck")
