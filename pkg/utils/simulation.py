"""
Monte Carlo block transmission over a two-way channel

A Scheme supplies adaptive encoders x_{j,n} = f_{j,n}(S_j^K, Y_j^{n-1}) and
block decoders g_j(S_j^K, Y_j^N) -> reconstruction of S_j'^K. Trials run
vectorized in fixed-size chunks; chunk c draws from the c-th child of
SeedSequence(seed), so results do not depend on the thread count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .channels import TwcChannel
from .errors import CausalityError, RateMismatchError, ValidationError
from .prob import JointPmf
from .rate_distortion import DistortionMatrix
from .settings import SETTINGS

logger = logging.getLogger(__name__)

CHUNK_TRIALS = 2048


class CausalHistory:
    """
    Read-only view of one terminal's channel outputs as seen by its encoder at time n

    Columns 0..n-1 may be read; any other column raises CausalityError. Every
    access is logged in `reads` so tests can audit the information flow.
    """

    def __init__(self, outputs: np.ndarray, now: int, terminal: int):
        self._outputs = outputs
        self.now = now
        self.terminal = terminal
        self.reads: List[int] = []

    def __len__(self) -> int:
        return self.now

    def _columns(self, key) -> List[int]:
        total = self._outputs.shape[1]
        if isinstance(key, slice):
            return list(range(total))[key]
        if isinstance(key, (int, np.integer)):
            k = int(key)
            return [k + total if k < 0 else k]
        raise ValidationError(f"unsupported history index {key!r}")

    def __getitem__(self, key) -> np.ndarray:
        cols = self._columns(key)
        late = [c for c in cols if c >= self.now]
        if late:
            raise CausalityError(f"encoder {self.terminal} read Y[{late[0]}] at time {self.now}")
        self.reads.extend(cols)
        return self._outputs[:, key].copy()

    def past(self) -> np.ndarray:
        return self[: self.now]


Encoder = Callable[[int, np.ndarray, CausalHistory, Dict], np.ndarray]
Decoder = Callable[[np.ndarray, np.ndarray, Dict], np.ndarray]


@dataclass
class Scheme:
    """
    Two-way transmission scheme

    Args:
        name: label used in reports
        encoders: (f_1, f_2); f_j(n, s_j, history, state) returns the inputs of use n for every trial
        decoders: (g_1, g_2); g_j(s_j, y_j, state) returns the reconstruction of S_j' with shape (trials, K)
        uses: block length N as a function of K
        prepare: optional per-chunk state (e.g. private randomness) from (rng, s1, s2)
        validate: optional check of (source, channel) compatibility
        genie_aided: decoders read partner state from `state`; distortions are single-letter references
    """

    name: str
    encoders: Tuple[Encoder, Encoder]
    decoders: Tuple[Decoder, Decoder]
    uses: Callable[[int], int] = lambda k: k
    prepare: Optional[Callable[[np.random.Generator, np.ndarray, np.ndarray], Dict]] = None
    validate: Optional[Callable[[JointPmf, TwcChannel], None]] = None
    genie_aided: bool = False


@dataclass
class TrialStats:
    trials: int
    mean_d1: float
    mean_d2: float
    stderr_d1: float
    stderr_d2: float
    block_error_rate: float
    seed: int
    k: int = 0
    n: int = 0
    scheme: str = ""
    block_errors: int = 0
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme, "K": self.k, "N": self.n, "trials": self.trials, "seed": self.seed,
            "mean_d1": self.mean_d1, "mean_d2": self.mean_d2,
            "stderr_d1": self.stderr_d1, "stderr_d2": self.stderr_d2,
            "block_error_rate": self.block_error_rate, "block_errors": self.block_errors,
            "notes": list(self.notes),
        }


def sample_sources(rng: np.random.Generator, src: JointPmf, trials: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """i.i.d. pairs (S1, S2) with shape (trials, K) each"""
    n2 = src.shape[1]
    cells = rng.choice(src.probs.size, size=(trials, k), p=src.flat())
    return cells // n2, cells % n2


def sample_channel(rng: np.random.Generator, ch: TwcChannel, x1: np.ndarray, x2: np.ndarray):
    """One memoryless channel use for every trial"""
    cum = np.cumsum(ch.table.reshape(ch.x1.size, ch.x2.size, -1), axis=2)
    u = rng.random(x1.shape[0])
    cell = (u[:, None] >= cum[x1, x2]).sum(axis=1)
    cell = np.minimum(cell, cum.shape[2] - 1)
    return cell // ch.y2.size, cell % ch.y2.size


def _check_inputs(x: np.ndarray, size: int, trials: int, j: int, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    if x.size == 1:
        x = np.full(trials, x[0], dtype=np.int64)
    if x.size != trials or np.any(x < 0) or np.any(x >= size):
        raise ValidationError(f"encoder {j} produced inputs outside X{j} at use {n}")
    return x


def _run_chunk(scheme: Scheme, src: JointPmf, ch: TwcChannel, d1: DistortionMatrix, d2: DistortionMatrix,
               k: int, n_uses: int, trials: int, seq: np.random.SeedSequence):
    rng = np.random.default_rng(seq)
    s1, s2 = sample_sources(rng, src, trials, k)
    state = scheme.prepare(rng, s1, s2) if scheme.prepare else {}
    y1 = np.zeros((trials, n_uses), dtype=np.int64)
    y2 = np.zeros((trials, n_uses), dtype=np.int64)
    f1, f2 = scheme.encoders
    for n in range(n_uses):
        x1 = _check_inputs(f1(n, s1, CausalHistory(y1, n, 1), state), ch.x1.size, trials, 1, n)
        x2 = _check_inputs(f2(n, s2, CausalHistory(y2, n, 2), state), ch.x2.size, trials, 2, n)
        y1[:, n], y2[:, n] = sample_channel(rng, ch, x1, x2)
    g1, g2 = scheme.decoders
    s2_hat = np.asarray(g1(s1, y1, state), dtype=np.int64).reshape(trials, k)
    s1_hat = np.asarray(g2(s2, y2, state), dtype=np.int64).reshape(trials, k)
    if np.any(s1_hat < 0) or np.any(s1_hat >= d1.shape[1]) or np.any(s2_hat < 0) or np.any(s2_hat >= d2.shape[1]):
        raise ValidationError(f"scheme {scheme.name} decoded outside the reconstruction alphabets")
    dist1 = d1.d[s1, s1_hat].mean(axis=1)
    dist2 = d2.d[s2, s2_hat].mean(axis=1)
    errors = np.any(s1_hat != s1, axis=1) | np.any(s2_hat != s2, axis=1)
    return dist1, dist2, errors


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(values.size))


def run_trials(scheme: Scheme, src: JointPmf, ch: TwcChannel, d1: Optional[DistortionMatrix] = None,
               d2: Optional[DistortionMatrix] = None, k: int = 32, trials: int = 10_000,
               seed: Optional[int] = None, n: Optional[int] = None, threads: Optional[int] = None) -> TrialStats:
    """
    Estimate (D1, D2) and the block error rate of a scheme

    Args:
        n: expected block length; RateMismatchError when it differs from scheme.uses(k)
        threads: worker threads for the chunks (results are identical for any value)
    """
    if src.ndim != 2:
        raise ValidationError("source must be a joint pmf over (S1, S2)")
    if k < 1 or trials < 1:
        raise ValidationError("K and trials must be positive")
    seed = SETTINGS.seed if seed is None else int(seed)
    d1 = d1 if d1 is not None else DistortionMatrix.hamming(src.shape[0])
    d2 = d2 if d2 is not None else DistortionMatrix.hamming(src.shape[1])
    if d1.shape[0] != src.shape[0] or d2.shape[0] != src.shape[1]:
        raise ValidationError("distortion matrices do not match the source alphabets")
    n_uses = scheme.uses(k)
    if n is not None and n != n_uses:
        raise RateMismatchError(f"scheme {scheme.name} uses {n_uses} channel uses for K={k}, not {n}")
    if scheme.validate is not None:
        scheme.validate(src, ch)

    sizes = [CHUNK_TRIALS] * (trials // CHUNK_TRIALS)
    if trials % CHUNK_TRIALS:
        sizes.append(trials % CHUNK_TRIALS)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    workers = max(1, min(threads or SETTINGS.threads, len(sizes)))
    logger.info(f"simulating {scheme.name}: K={k}, N={n_uses}, {trials} trials in {len(sizes)} chunks")

    def job(args):
        size, seq = args
        return _run_chunk(scheme, src, ch, d1, d2, k, n_uses, size, seq)

    if workers == 1:
        parts = [job(a) for a in zip(sizes, seqs)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, zip(sizes, seqs)))

    dist1 = np.concatenate([p[0] for p in parts])
    dist2 = np.concatenate([p[1] for p in parts])
    errors = np.concatenate([p[2] for p in parts])
    stats = TrialStats(
        trials=trials, mean_d1=float(dist1.mean()), mean_d2=float(dist2.mean()),
        stderr_d1=_stderr(dist1), stderr_d2=_stderr(dist2),
        block_error_rate=float(errors.mean()), seed=seed, k=k, n=n_uses, scheme=scheme.name,
        block_errors=int(errors.sum()),
    )
    if scheme.genie_aided:
        stats.notes.append("decoders read the partner's auxiliary draw")
    logger.info(f"{scheme.name}: D=({stats.mean_d1:.5f}, {stats.mean_d2:.5f}), "
                f"block errors {stats.block_errors}/{trials}")
    return stats


def within_stderr(estimate: float, stderr: float, target: float, k: float = 3.0) -> bool:
    """|estimate - target| <= k standard errors (exact match when stderr is 0)"""
    return abs(estimate - target) <= k * stderr + 1e-12
