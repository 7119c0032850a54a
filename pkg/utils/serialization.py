"""
JSON codecs for pmfs, distortions, channels and configurations, and table export

Pmf JSON: {"axes": [{"size": n, "label": "S1"}, ...], "probs": [flat row-major]}.
Channel JSON: {"x1": 2, "x2": 2, "y1": 2, "y2": 2, "kernel": [flat row-major]} or a
named-builder spec. Tables are pandas DataFrames written as CSV ('.' decimal, no
index) or as an openpyxl workbook.
"""

import json
import logging
import os
from fractions import Fraction
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from .capacity import RegionFrontier
from .channels import TwcChannel, build_channel
from .coded_chain import Configuration
from .errors import ValidationError
from .prob import Alphabet, CondPmf, JointPmf
from .rate_distortion import DistortionMatrix, RdResult
from .simulation import TrialStats

logger = logging.getLogger(__name__)

FRONTIER_COLUMNS = ["weight", "r1", "r2"]
DISTORTION_FRONTIER_COLUMNS = ["d1", "d2", "feasible_rate_r1", "r2"]
STATS_COLUMNS = ["scheme", "K", "trials", "seed", "mean_d1", "stderr_d1", "mean_d2", "stderr_d2", "block_error_rate"]


def load_json(path: str) -> Any:
    """Parse a JSON file; syntax errors become line-anchored ValidationErrors"""
    if not os.path.exists(path):
        raise ValidationError(f"input file {path} does not exist")
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: {e.msg}", line=e.lineno) from None


def dump_json(payload: Any, path: Optional[str] = None) -> str:
    text = json.dumps(payload, indent=2, sort_keys=False, default=_json_default)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _number(value) -> float:
    """Floats, ints and rational strings such as "1/3" """
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"not a number: {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"not a number: {value!r}")
    return float(value)


def _numbers(values) -> np.ndarray:
    arr = np.asarray(values, dtype=object)
    return np.vectorize(_number, otypes=[float])(arr) if arr.size else np.zeros(arr.shape)


# ---------------------------------------------------------------------------
# pmfs
# ---------------------------------------------------------------------------

def pmf_to_dict(joint: JointPmf) -> Dict:
    return {
        "axes": [{"size": a.size, "label": a.label} if a.label else {"size": a.size} for a in joint.axes],
        "probs": [float(v) for v in joint.flat()],
    }


def pmf_from_dict(spec: Dict, normalize: bool = False) -> JointPmf:
    """Pmf from {"axes": [...], "probs": [...]}; a nested "table" with optional "labels" is also accepted"""
    if not isinstance(spec, dict):
        raise ValidationError("pmf must be an object")
    if "table" in spec:
        return JointPmf.from_table(_numbers(spec["table"]), spec.get("labels"), normalize=normalize)
    try:
        axes = [Alphabet(int(a["size"]), a.get("label")) for a in spec["axes"]]
        probs = _numbers(spec["probs"])
    except (KeyError, TypeError) as e:
        raise ValidationError(f"pmf spec is missing {e}") from None
    shape = tuple(a.size for a in axes)
    if probs.size != int(np.prod(shape)):
        raise ValidationError(f"pmf has {probs.size} entries, axes need {int(np.prod(shape))}")
    return JointPmf(axes, probs.reshape(shape), normalize=normalize)


# ---------------------------------------------------------------------------
# distortions and channels
# ---------------------------------------------------------------------------

def distortion_from_spec(spec, n: int, m: Optional[int] = None) -> DistortionMatrix:
    """None or "hamming" gives Hamming on n symbols; otherwise a matrix or {"d": matrix}"""
    if spec is None or spec == "hamming":
        return DistortionMatrix.hamming(n, m)
    if isinstance(spec, dict):
        if spec.get("name") == "hamming":
            return DistortionMatrix.hamming(n, spec.get("m", m))
        spec = spec.get("d")
    d = DistortionMatrix(_numbers(spec))
    if d.shape[0] != n:
        raise ValidationError(f"distortion matrix has {d.shape[0]} rows, source has {n} symbols")
    return d


def channel_from_spec(spec) -> TwcChannel:
    if isinstance(spec, dict) and "noise" in spec and isinstance(spec["noise"], dict):
        noise = spec["noise"]
        if "joint" in noise:
            spec = dict(spec, noise={"joint": _numbers(noise["joint"]).tolist()})
    return build_channel(spec)


# ---------------------------------------------------------------------------
# configurations and reports
# ---------------------------------------------------------------------------

def configuration_to_dict(cfg: Configuration) -> Dict:
    """F/G tables flattened row-major over their documented index order"""
    return {
        "name": cfg.name,
        "p_u1_given_s1": cfg.p_u1_given_s1.probs.tolist(),
        "p_u2_given_s2": cfg.p_u2_given_s2.probs.tolist(),
        "p_tilde": pmf_to_dict(cfg.p_tilde),
        "f1": cfg.f1.ravel().tolist(), "f2": cfg.f2.ravel().tolist(),
        "g1": cfg.g1.ravel().tolist(), "g2": cfg.g2.ravel().tolist(),
        "x_sizes": list(cfg.x_sizes), "y_sizes": list(cfg.y_sizes), "shat_sizes": list(cfg.shat_sizes),
    }


def configuration_from_dict(spec: Dict) -> Configuration:
    try:
        pu1 = _numbers(spec["p_u1_given_s1"])
        pu2 = _numbers(spec["p_u2_given_s2"])
        p_tilde = pmf_from_dict(spec["p_tilde"])
        x_sizes = tuple(int(v) for v in spec["x_sizes"])
        y_sizes = tuple(int(v) for v in spec["y_sizes"])
        shat_sizes = tuple(int(v) for v in spec.get("shat_sizes", pu1.shape[:1] + pu2.shape[:1]))
    except (KeyError, TypeError) as e:
        raise ValidationError(f"configuration spec is missing {e}") from None
    (s1, u1), (s2, u2) = pu1.shape, pu2.shape
    w1, w2 = x_sizes[0] * y_sizes[0], x_sizes[1] * y_sizes[1]
    shapes = {
        "f1": (s1, u1, s1, u1, w1), "f2": (s2, u2, s2, u2, w2),
        "g1": (u2, s1, u1, s1, u1, w1, y_sizes[0]), "g2": (u1, s2, u2, s2, u2, w2, y_sizes[1]),
    }
    tables = {}
    for name, shape in shapes.items():
        flat = np.asarray(spec[name], dtype=np.int64).ravel()
        if flat.size != int(np.prod(shape)):
            raise ValidationError(f"{name} has {flat.size} entries, expected {int(np.prod(shape))}")
        tables[name] = flat.reshape(shape)
    return Configuration(
        CondPmf([Alphabet(s1, "S1")], [Alphabet(u1, "U1")], pu1),
        CondPmf([Alphabet(s2, "S2")], [Alphabet(u2, "U2")], pu2),
        p_tilde, tables["f1"], tables["f2"], tables["g1"], tables["g2"],
        x_sizes, y_sizes, shat_sizes, spec.get("name", "custom"),
    )


def rd_result_to_dict(res: RdResult, tol: float) -> Dict:
    return {
        "kind": res.kind, "rate": res.rate, "distortion": res.distortion,
        "converged": res.converged, "iterations": res.iterations, "multiplier": res.multiplier,
        "kernel": res.achieving_kernel.probs.tolist(),
        "decoder": None if res.decoder is None else np.asarray(res.decoder).tolist(),
        "tolerance": tol,
        "time_share": None if res.time_share is None else list(res.time_share),
    }


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def frontier_frame(frontier: RegionFrontier) -> pd.DataFrame:
    """weight, r1, r2, then the witness law flattened into witness_0, witness_1, ..."""
    rows = []
    width = max((p.witness.size for p in frontier.points if p.witness is not None), default=0)
    for p in frontier.points:
        row = {"weight": p.weight, "r1": p.pair.r1, "r2": p.pair.r2}
        w = np.zeros(width) if p.witness is None else np.pad(p.witness, (0, width - p.witness.size))
        row.update({f"witness_{i}": float(v) for i, v in enumerate(w)})
        rows.append(row)
    return pd.DataFrame(rows, columns=FRONTIER_COLUMNS + [f"witness_{i}" for i in range(width)])


def distortion_frontier_frame(frontier: RegionFrontier) -> pd.DataFrame:
    rows = []
    for p in frontier.points:
        r1, r2 = (float("nan"), float("nan")) if p.witness is None else (float(p.witness[0]), float(p.witness[1]))
        rows.append({"d1": p.pair.d1, "d2": p.pair.d2, "feasible_rate_r1": r1, "r2": r2})
    return pd.DataFrame(rows, columns=DISTORTION_FRONTIER_COLUMNS)


def curve_frame(points: Sequence) -> pd.DataFrame:
    return pd.DataFrame([{"D": float(d), "rate": float(r)} for d, r in points], columns=["D", "rate"])


def stats_frame(rows: Sequence[TrialStats]) -> pd.DataFrame:
    records = []
    for s in rows:
        records.append({"scheme": s.scheme, "K": s.k, "trials": s.trials, "seed": s.seed,
                        "mean_d1": s.mean_d1, "stderr_d1": s.stderr_d1,
                        "mean_d2": s.mean_d2, "stderr_d2": s.stderr_d2,
                        "block_error_rate": s.block_error_rate})
    return pd.DataFrame(records, columns=STATS_COLUMNS)


def write_table(df: pd.DataFrame, path: Optional[str], sheet_name: str = "results", append: bool = False) -> str:
    """CSV (or .xlsx by extension); returns the CSV text when no path is given"""
    if not path:
        return df.to_csv(index=False)
    if path.endswith(".xlsx"):
        with pd.ExcelWriter(path, engine="openpyxl") as writer:
            df.to_excel(writer, sheet_name=sheet_name[:31], index=False)
        return path
    header = not (append and os.path.exists(path))
    df.to_csv(path, index=False, mode="a" if append else "w", header=header)
    return path


def write_workbook(frames: Dict[str, pd.DataFrame], path: str) -> str:
    with pd.ExcelWriter(path, engine="openpyxl") as writer:
        for name, df in frames.items():
            df.to_excel(writer, sheet_name=name[:31], index=False)
    logger.info(f"wrote {len(frames)} sheets to {path}")
    return path
