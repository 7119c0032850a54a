"""
Non-adaptive configurations: uncoded, separate coding and lossless special cases

All of them share the same shape: encoders read only (St_j, Ut_j), decoders only
(Ut_j', St_j, Ut_j, Y_j), and the prior-block channel pair Wt is independent of
everything else with the law of one channel use driven by the encoders.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .channels import TwcChannel
from .coded_chain import Configuration
from .errors import ConfigurationError, ValidationError
from .prob import Alphabet, CondPmf, FinitePmf, JointPmf, marginalize
from .rate_distortion import DistortionMatrix, RdQuery, standard_rd, wz_rd

logger = logging.getLogger(__name__)

KINDS = ("uncoded", "sscc_independent", "sscc_wz", "lossless_cpc")


@dataclass
class Ingredients:
    """
    Inputs of build_special_config; which fields are needed depends on the kind

    Args:
        source: joint pmf of (S1, S2)
        channel: the two-way channel
        input_laws: (P_V1, P_V2) product channel-input law (coded kinds)
        source_kernels: (P(Shat_j|S_j) or P(T_j|S_j)) for j = 1, 2 (coded kinds)
        wz_decoders: (h_1, h_2) with h_j[t, s_j'] reconstructing S_j (sscc_wz)
        uncoded_maps: (f_1, f_2) with f_j[s] -> x (uncoded)
        uncoded_decoders: (g_1, g_2) with g_j[s_j, y_j] -> reconstruction of S_j' (uncoded);
            per-symbol minimum-distortion decoders are used when omitted
        d1, d2: distortion measures, Hamming when omitted
    """

    source: JointPmf
    channel: TwcChannel
    input_laws: Optional[Tuple[np.ndarray, np.ndarray]] = None
    source_kernels: Optional[Tuple[np.ndarray, np.ndarray]] = None
    wz_decoders: Optional[Tuple[np.ndarray, np.ndarray]] = None
    uncoded_maps: Optional[Tuple[np.ndarray, np.ndarray]] = None
    uncoded_decoders: Optional[Tuple[np.ndarray, np.ndarray]] = None
    d1: Optional[DistortionMatrix] = None
    d2: Optional[DistortionMatrix] = None


def prior_channel_law(source: JointPmf, channel: TwcChannel, pu1: np.ndarray, pu2: np.ndarray,
                      f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    """
    Law of one channel use (x1, y1, x2, y2) driven by x_j = f_j(s_j, u_j)

    Returned with shape (|X1|*|Y1|, |X2|*|Y2|), i.e. over (Wt1, Wt2).
    """
    x1, x2, y1, y2 = channel.sizes
    e1 = (f1[..., None] == np.arange(x1)).astype(float)
    e2 = (f2[..., None] == np.arange(x2)).astype(float)
    table = np.einsum("ab,ac,bd,acX,bdY,XYuv->XuYv", source.probs, pu1, pu2, e1, e2, channel.table)
    return table.reshape(x1 * y1, x2 * y2)


def pi_prime_configuration(source: JointPmf, channel: TwcChannel, pu1: np.ndarray, pu2: np.ndarray,
                           f1: np.ndarray, f2: np.ndarray, g1: np.ndarray, g2: np.ndarray,
                           shat_sizes: Tuple[int, int], name: str = "pi_prime") -> Configuration:
    """
    Expand small non-adaptive maps into a full configuration

    Args:
        pu1, pu2: (|S_j|, |U_j|) coding kernels
        f1, f2: f_j[st_j, ut_j] -> x_j
        g1, g2: g_j[ut_j', st_j, ut_j, y_j] -> reconstruction of St_j'
    """
    x1, x2, y1, y2 = channel.sizes
    s1, s2 = source.shape
    u1, u2 = pu1.shape[1], pu2.shape[1]
    if pu1.shape[0] != s1 or pu2.shape[0] != s2:
        raise ValidationError("coding kernels do not match the source alphabets")
    f1 = np.asarray(f1, dtype=np.int64)
    f2 = np.asarray(f2, dtype=np.int64)
    g1 = np.asarray(g1, dtype=np.int64)
    g2 = np.asarray(g2, dtype=np.int64)
    if f1.shape != (s1, u1) or f2.shape != (s2, u2):
        raise ValidationError("encoder maps must be indexed (st_j, ut_j)")
    if g1.shape != (u2, s1, u1, y1) or g2.shape != (u1, s2, u2, y2):
        raise ValidationError("decoder maps must be indexed (ut_j', st_j, ut_j, y_j)")
    w_law = prior_channel_law(source, channel, pu1, pu2, f1, f2)
    su = np.einsum("ab,ac,bd->abcd", source.probs, pu1, pu2)
    p_tilde = JointPmf.derived(
        [Alphabet(s1, "St1"), Alphabet(s2, "St2"), Alphabet(u1, "Ut1"), Alphabet(u2, "Ut2"),
         Alphabet(x1 * y1, "Wt1"), Alphabet(x2 * y2, "Wt2")],
        su[:, :, :, :, None, None] * w_law[None, None, None, None, :, :])
    full_f1 = np.broadcast_to(f1[None, None, :, :, None], (s1, u1, s1, u1, x1 * y1)).copy()
    full_f2 = np.broadcast_to(f2[None, None, :, :, None], (s2, u2, s2, u2, x2 * y2)).copy()
    full_g1 = np.broadcast_to(g1[:, None, None, :, :, None, :], (u2, s1, u1, s1, u1, x1 * y1, y1)).copy()
    full_g2 = np.broadcast_to(g2[:, None, None, :, :, None, :], (u1, s2, u2, s2, u2, x2 * y2, y2)).copy()
    return Configuration(
        p_u1_given_s1=CondPmf([Alphabet(s1, "S1")], [Alphabet(u1, "U1")], pu1),
        p_u2_given_s2=CondPmf([Alphabet(s2, "S2")], [Alphabet(u2, "U2")], pu2),
        p_tilde=p_tilde, f1=full_f1, f2=full_f2, g1=full_g1, g2=full_g2,
        x_sizes=(x1, x2), y_sizes=(y1, y2), shat_sizes=tuple(shat_sizes), name=name,
    )


def min_distortion_decoders(source: JointPmf, channel: TwcChannel, f1: np.ndarray, f2: np.ndarray,
                            d1: Optional[DistortionMatrix] = None,
                            d2: Optional[DistortionMatrix] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Symbol-wise decoders of uncoded transmission x_j = f_j(s_j)

    g_1[s1, y1] minimizes E[d2(S2, .) | s1, y1]; ties go to the lowest index,
    and zero-mass cells decode to index 0. Under Hamming distortion this is MAP.
    """
    s1, s2 = source.shape
    d1 = d1 if d1 is not None else DistortionMatrix.hamming(s1)
    d2 = d2 if d2 is not None else DistortionMatrix.hamming(s2)
    w1 = channel.to_terminal1()  # (x1, x2, y1)
    w2 = channel.to_terminal2()
    f1 = np.asarray(f1, dtype=np.int64)
    f2 = np.asarray(f2, dtype=np.int64)
    # joint (s1, s2, y1) and (s1, s2, y2)
    j1 = source.probs[:, :, None] * w1[f1[:, None], f2[None, :]]
    j2 = source.probs[:, :, None] * w2[f1[:, None], f2[None, :]]
    cost1 = np.einsum("aby,bh->ayh", j1, d2.d)  # terminal 1 estimating S2
    cost2 = np.einsum("aby,ah->byh", j2, d1.d)  # terminal 2 estimating S1
    return np.argmin(cost1, axis=2), np.argmin(cost2, axis=2)


def _check_kernel(kernel: np.ndarray, rows: int, label: str) -> np.ndarray:
    k = np.asarray(kernel, dtype=float)
    if k.ndim != 2 or k.shape[0] != rows:
        raise ValidationError(f"{label} must have {rows} rows")
    if np.any(k < 0) or np.max(np.abs(k.sum(axis=1) - 1.0)) > 1e-9:
        raise ValidationError(f"{label} rows must be pmfs")
    return k / k.sum(axis=1, keepdims=True)


def _coded_parts(ing: Ingredients):
    if ing.input_laws is None or ing.source_kernels is None:
        raise ConfigurationError("coded special configurations need input_laws and source_kernels")
    s1, s2 = ing.source.shape
    x1, x2 = ing.channel.x1.size, ing.channel.x2.size
    v1, v2 = (np.asarray(v, dtype=float).ravel() for v in ing.input_laws)
    if v1.size != x1 or v2.size != x2:
        raise ValidationError("input laws do not match the channel input alphabets")
    k1 = _check_kernel(ing.source_kernels[0], s1, "source kernel 1")
    k2 = _check_kernel(ing.source_kernels[1], s2, "source kernel 2")
    # U_j = (V_j, A_j) packed v * |A_j| + a, with V_j independent of S_j
    pu1 = (v1[None, :, None] * k1[:, None, :]).reshape(s1, -1)
    pu2 = (v2[None, :, None] * k2[:, None, :]).reshape(s2, -1)
    a1, a2 = k1.shape[1], k2.shape[1]
    f1 = np.broadcast_to((np.arange(pu1.shape[1]) // a1)[None, :], pu1.shape)
    f2 = np.broadcast_to((np.arange(pu2.shape[1]) // a2)[None, :], pu2.shape)
    return pu1, pu2, f1, f2, a1, a2


def build_special_config(kind: str, ing: Ingredients) -> Configuration:
    """
    Configurations of the four special cases

    uncoded: U constant, x_j = f_j(st_j), reconstruction from (st_j, y_j).
    sscc_independent / lossless_cpc: U_j = (V_j, Shat_j), x_j = v_j, the other
    terminal outputs the Shat part of Ut_j.
    sscc_wz: U_j = (V_j, T_j), x_j = v_j, the other terminal outputs h_j(t_j, st_j').
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown special configuration {kind!r}; expected one of {KINDS}")
    src, ch = ing.source, ing.channel
    s1, s2 = src.shape
    y1, y2 = ch.y1.size, ch.y2.size
    if kind == "uncoded":
        if ing.uncoded_maps is None:
            raise ConfigurationError("uncoded configuration needs uncoded_maps")
        m1, m2 = (np.asarray(m, dtype=np.int64).ravel() for m in ing.uncoded_maps)
        if m1.size != s1 or m2.size != s2:
            raise ValidationError("uncoded maps must be indexed by source symbols")
        if ing.uncoded_decoders is None:
            dec1, dec2 = min_distortion_decoders(src, ch, m1, m2, ing.d1, ing.d2)
        else:
            dec1, dec2 = (np.asarray(g, dtype=np.int64) for g in ing.uncoded_decoders)
        if dec1.shape != (s1, y1) or dec2.shape != (s2, y2):
            raise ValidationError("uncoded decoders must be indexed (s_j, y_j)")
        shat = (ing.d1.shape[1] if ing.d1 is not None else s1, ing.d2.shape[1] if ing.d2 is not None else s2)
        return pi_prime_configuration(
            src, ch, np.ones((s1, 1)), np.ones((s2, 1)), m1[:, None], m2[:, None],
            dec1[None, :, None, :], dec2[None, :, None, :], shat, name="uncoded")

    pu1, pu2, f1, f2, a1, a2 = _coded_parts(ing)
    u1, u2 = pu1.shape[1], pu2.shape[1]
    if kind in ("sscc_independent", "lossless_cpc"):
        if kind == "sscc_independent" and np.max(np.abs(src.probs - np.outer(src.probs.sum(1), src.probs.sum(0)))) > 1e-12:
            logger.warning("sscc_independent built for dependent sources; stationarity still holds, margins lose their meaning")
        if kind == "lossless_cpc":
            for k, n in zip(ing.source_kernels, (s1, s2)):
                if np.asarray(k).shape != (n, n) or not np.allclose(k, np.eye(n)):
                    raise ConfigurationError("lossless_cpc needs identity reconstruction kernels")
        # terminal j outputs the reconstruction part of Ut_j'
        g1 = np.broadcast_to((np.arange(u2) % a2)[:, None, None, None], (u2, s1, u1, y1))
        g2 = np.broadcast_to((np.arange(u1) % a1)[:, None, None, None], (u1, s2, u2, y2))
        shat = (a1, a2)
    else:
        if ing.wz_decoders is None:
            raise ConfigurationError("sscc_wz needs the WZ decoders h_1, h_2")
        h1, h2 = (np.asarray(h, dtype=np.int64) for h in ing.wz_decoders)
        if h1.shape != (a1, s2) or h2.shape != (a2, s1):
            raise ValidationError("WZ decoders must be indexed (t_j, s_j')")
        # terminal 1 reconstructs St2 from (T part of Ut2, St1)
        g1 = h2[np.arange(u2) % a2][:, :, None, None]
        g1 = np.broadcast_to(g1, (u2, s1, u1, y1))
        g2 = h1[np.arange(u1) % a1][:, :, None, None]
        g2 = np.broadcast_to(g2, (u1, s2, u2, y2))
        shat = (ing.d1.shape[1] if ing.d1 is not None else s1, ing.d2.shape[1] if ing.d2 is not None else s2)
    return pi_prime_configuration(src, ch, pu1, pu2, f1, f2, g1, g2, shat, name=kind)


def solved_ingredients(kind: str, source: JointPmf, channel: TwcChannel, targets: Tuple[float, float],
                       input_laws: Tuple[np.ndarray, np.ndarray], d1: Optional[DistortionMatrix] = None,
                       d2: Optional[DistortionMatrix] = None, aux_card: Optional[int] = None,
                       query: Optional[RdQuery] = None) -> Ingredients:
    """
    Ingredients of a coded special case with the source kernels taken from the RD solvers

    sscc_independent uses the standard RD kernels P(Shat_j|S_j) at D_j, sscc_wz the
    WZ kernels P(T_j|S_j) and decoders h_j, lossless_cpc identity kernels.
    """
    s1, s2 = source.shape
    d1 = d1 if d1 is not None else DistortionMatrix.hamming(s1)
    d2 = d2 if d2 is not None else DistortionMatrix.hamming(s2)
    query = query or RdQuery(0.0)
    ing = Ingredients(source, channel, input_laws=input_laws, d1=d1, d2=d2)
    if kind == "lossless_cpc":
        ing.source_kernels = (np.eye(s1), np.eye(s2))
        return ing
    pairs = (source, source.transpose([1, 0]))
    kernels, decoders = [], []
    for j, (dj, target) in enumerate(zip((d1, d2), targets)):
        q = replace(query, target_distortion=float(target))
        if kind == "sscc_independent":
            marg = marginalize(source, [j]).probs
            res = standard_rd(FinitePmf(marg / marg.sum()), dj, q)
        elif kind == "sscc_wz":
            res = wz_rd(pairs[j], dj, aux_card, q)
            decoders.append(res.decoder)
        else:
            raise ValidationError(f"no solver ingredients for {kind!r}")
        logger.info(f"{kind} source kernel {j + 1}: rate {res.rate:.4f} at D={res.distortion:.4f}")
        kernels.append(res.achieving_kernel.probs)
    ing.source_kernels = tuple(kernels)
    if decoders:
        ing.wz_decoders = tuple(decoders)
    return ing
