#!/usr/bin/env python3
"""
Two-way lossy source-channel coding toolkit: command-line entry point

    python app.py rd --source fixtures/sources/ber50.json --D 0.25
    python app.py capacity --channel fixtures/channels/additive_05.json --format csv
    python app.py examples --only example4

Every input file is parsed and validated before any computation starts.
Exit status: 0 success, 2 validation error, 3 non-convergence.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from utils.bundled_examples import EXAMPLES, ExampleOptions, run_examples
from utils.capacity import (FrontierOptions, proposition1_frontier, shannon_inner_frontier, shannon_outer_frontier,
                            symmetric_rate)
from utils.coded_chain import corollary1_margins, theorem1_margins
from utils.errors import ConvergenceError, TwcError, ValidationError
from utils.prob import FinitePmf, JointPmf, marginalize
from utils.rate_distortion import RdProblem, RdQuery, curve_results
from utils.regions import (COROLLARIES, THEOREMS, DistortionPair, RateSpec, RegionEngine, TheoremInputs,
                           distortion_frontier, make_checker)
from utils.schemes import SCHEMES, compile_configuration_scheme, scheme_example4_dueck, scheme_uncoded_map
from utils.serialization import (channel_from_spec, configuration_from_dict, configuration_to_dict, curve_frame,
                                 distortion_frontier_frame, distortion_from_spec, dump_json, frontier_frame,
                                 load_json, pmf_from_dict, rd_result_to_dict, stats_frame, write_table, write_workbook)
from utils.settings import SETTINGS
from utils.simulation import run_trials
from utils.special_configs import Ingredients, build_special_config, solved_ingredients

logger = logging.getLogger("twc")

SUBCOMMANDS = ("rd", "wz-rd", "cond-rd", "capacity", "prop1", "config-check", "region", "frontier",
               "simulate", "examples")
REGION_CHECKS = ("lemma1", "lemma2", "prop1") + THEOREMS + COROLLARIES


@dataclass
class RunManifest:
    """One invocation: subcommand, referenced files, output target and overrides"""

    subcommand: str
    inputs: Dict[str, str] = field(default_factory=dict)
    output: Optional[str] = None
    seed: int = SETTINGS.seed
    tol: float = SETTINGS.rd_tol
    threads: int = SETTINGS.threads
    fmt: str = "json"
    overrides: Dict[str, Any] = field(default_factory=dict)

    def load(self) -> Dict[str, Any]:
        """Parse every referenced file and merge the shortcut files into one problem spec"""
        for role, path in self.inputs.items():
            if not os.path.exists(path):
                raise ValidationError(f"{role} file {path} does not exist")
        spec: Dict[str, Any] = {}
        if "input" in self.inputs:
            spec = load_json(self.inputs["input"])
            if not isinstance(spec, dict):
                raise ValidationError(f"{self.inputs['input']}: top level must be an object", line=1)
        for role, path in self.inputs.items():
            if role != "input":
                spec[role] = load_json(path)
        for key, value in self.overrides.items():
            if value is not None:
                spec[key] = value
        if "seed" in spec:
            self.seed = int(spec["seed"])
        return spec

    @property
    def query(self) -> RdQuery:
        return RdQuery(0.0, tolerance=self.tol, seed=self.seed)


# ---------------------------------------------------------------------------
# spec helpers
# ---------------------------------------------------------------------------

def _require(spec: Dict, key: str):
    if key not in spec:
        raise ValidationError(f"missing required field {key!r}")
    return spec[key]


def _source(spec: Dict) -> JointPmf:
    return pmf_from_dict(_require(spec, "source"))


def _distortions(spec: Dict, src: JointPmf):
    if src.ndim == 1:
        return distortion_from_spec(spec.get("distortion"), src.shape[0]), None
    d1 = distortion_from_spec(spec.get("distortion1", spec.get("distortion")), src.shape[0])
    d2 = distortion_from_spec(spec.get("distortion2", spec.get("distortion")), src.shape[1])
    return d1, d2


def _frontier_options(spec: Dict, manifest: RunManifest) -> FrontierOptions:
    opts = spec.get("options", {}) or {}
    base = FrontierOptions(seed=manifest.seed)
    changes = {k: opts[k] for k in ("grid_step", "refine_rounds", "multistart", "convexify") if k in opts}
    if "weights" in opts:
        changes["weights"] = tuple(float(w) for w in opts["weights"])
    return replace(base, **changes)


def _grid(spec: Dict) -> List[float]:
    if "d_grid" in spec:
        return [float(x) for x in spec["d_grid"]]
    if "D" in spec:
        return [float(spec["D"])]
    raise ValidationError("RD runs need 'D' or 'd_grid'")


def _emit(manifest: RunManifest, payload: Dict, frame: Optional[pd.DataFrame]) -> None:
    payload = dict(payload, tolerance=manifest.tol, seed=manifest.seed)
    if manifest.fmt == "csv" and frame is not None:
        text = write_table(frame, manifest.output)
        if manifest.output:
            dump_json({"subcommand": manifest.subcommand, "tolerance": manifest.tol, "seed": manifest.seed},
                      manifest.output + ".meta.json")
            print(f"✅ Wrote {manifest.output}")
        else:
            print(text, end="")
        return
    text = dump_json(payload, manifest.output)
    if manifest.output:
        print(f"✅ Wrote {manifest.output}")
    else:
        print(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_rd(manifest: RunManifest, spec: Dict) -> int:
    kind = {"rd": "standard", "wz-rd": "wz", "cond-rd": "conditional"}[manifest.subcommand]
    src = _source(spec)
    if kind == "standard" and src.ndim > 1:
        marg = marginalize(src, [int(spec.get("axis", 0))]).probs
        src = FinitePmf(marg / marg.sum())
    if kind != "standard" and src.ndim != 2:
        raise ValidationError(f"{manifest.subcommand} needs a joint source over (S, S')")
    d = distortion_from_spec(spec.get("distortion"), src.shape[0])
    problem = RdProblem(src, d, spec.get("aux_card"))
    grid = _grid(spec)
    results = curve_results(kind, problem, grid, manifest.query)
    rows = [dict(rd_result_to_dict(r, manifest.tol), D=x) for x, r in zip(grid, results)]
    _emit(manifest, {"kind": kind, "results": rows}, curve_frame([(x, r.rate) for x, r in zip(grid, results)]))
    for x, r in zip(grid, results):
        print(f"📊 {kind} R({x:g}) = {r.rate:.6f}", file=sys.stderr)
    if not all(r.converged for r in results):
        print("⚠️  Some points did not converge", file=sys.stderr)
        return ConvergenceError.exit_code
    return 0


def cmd_capacity(manifest: RunManifest, spec: Dict) -> int:
    ch = channel_from_spec(_require(spec, "channel"))
    opts = _frontier_options(spec, manifest)
    inner = shannon_inner_frontier(ch, opts)
    outer = shannon_outer_frontier(ch, opts, inner=inner)
    payload = {
        "channel": ch.name,
        "inner": frontier_frame(inner).to_dict(orient="records"),
        "outer": frontier_frame(outer).to_dict(orient="records"),
        "inner_symmetric_rate": symmetric_rate(inner),
        "outer_symmetric_rate": symmetric_rate(outer),
    }
    bound = spec.get("bound", "inner")
    _emit(manifest, payload, frontier_frame(outer if bound == "outer" else inner))
    print(f"📊 {ch.name}: inner symmetric rate {payload['inner_symmetric_rate']:.4f}, "
          f"outer {payload['outer_symmetric_rate']:.4f}", file=sys.stderr)
    return 0


def cmd_prop1(manifest: RunManifest, spec: Dict) -> int:
    ch = channel_from_spec(_require(spec, "channel"))
    hull = proposition1_frontier(ch, _frontier_options(spec, manifest))
    rate = symmetric_rate(hull)
    _emit(manifest, {"channel": ch.name, "symmetric_rate": rate,
                     "frontier": frontier_frame(hull).to_dict(orient="records")}, frontier_frame(hull))
    print(f"📊 {ch.name}: non-adaptive symmetric rate {rate:.4f}", file=sys.stderr)
    return 0


def _configuration(spec: Dict, src: JointPmf, ch, manifest: RunManifest):
    if "config" in spec:
        return configuration_from_dict(spec["config"])
    special = _require(spec, "special")
    kind = _require(special, "kind")
    d1, d2 = _distortions(spec, src)
    if kind == "uncoded":
        ing = Ingredients(src, ch, uncoded_maps=_require(special, "uncoded_maps"),
                          uncoded_decoders=special.get("uncoded_decoders"), d1=d1, d2=d2)
    elif "source_kernels" in special:
        ing = Ingredients(src, ch, input_laws=_require(special, "input_laws"),
                          source_kernels=special["source_kernels"], wz_decoders=special.get("wz_decoders"),
                          d1=d1, d2=d2)
    else:
        targets = tuple(float(x) for x in special.get("D", (0.0, 0.0)))
        ing = solved_ingredients(kind, src, ch, targets, _require(special, "input_laws"), d1, d2,
                                 special.get("aux_card"), manifest.query)
    return build_special_config(kind, ing)


def cmd_config_check(manifest: RunManifest, spec: Dict) -> int:
    src = _source(spec)
    ch = channel_from_spec(_require(spec, "channel"))
    cfg = _configuration(spec, src, ch, manifest)
    d1, d2 = _distortions(spec, src)
    report = theorem1_margins(cfg, ch, src, d1, d2)
    payload = {"configuration": cfg.name, "report": report.to_dict()}
    if cfg.is_pi_prime():
        payload["corollary_margins"] = list(corollary1_margins(cfg, ch, src))
    if spec.get("simulate"):
        sim = spec["simulate"]
        stats = run_trials(compile_configuration_scheme(cfg), src, ch, d1, d2, int(sim.get("K", 32)),
                           int(sim.get("trials", 10_000)), manifest.seed, threads=manifest.threads)
        payload["simulation"] = stats.to_dict()
    if spec.get("include_config"):
        payload["config"] = configuration_to_dict(cfg)
    frame = pd.DataFrame([{"lhs1": report.margins.lhs1, "rhs1": report.margins.rhs1,
                           "lhs2": report.margins.lhs2, "rhs2": report.margins.rhs2,
                           "D1": report.distortions[0], "D2": report.distortions[1],
                           "residual": report.residual}])
    _emit(manifest, payload, frame)
    ok = report.cond1_ok and report.cond2_ok
    print(f"{'✅' if ok else '❌'} stationarity conditions {report.cond1_ok}/{report.cond2_ok}, "
          f"residual {report.residual:.2e}", file=sys.stderr)
    return 0


def _region_setup(spec: Dict, manifest: RunManifest):
    src = _source(spec)
    if src.ndim != 2:
        raise ValidationError("region checks need a joint source over (S1, S2)")
    ch = channel_from_spec(_require(spec, "channel"))
    d1, d2 = _distortions(spec, src)
    check = spec.get("check", "lemma1")
    if check not in REGION_CHECKS:
        raise ValidationError(f"unknown check {check!r}; expected one of {REGION_CHECKS}")
    rate = RateSpec(int(spec.get("K", 1)), int(spec.get("N", 1)))
    inputs = TheoremInputs(
        declared_symmetric=spec.get("declared_symmetric"),
        common_maps=spec.get("common_maps"),
        han_joint=pmf_from_dict(spec["han_joint"]) if "han_joint" in spec else None,
        verify_wz_hypothesis=bool(spec.get("verify_wz_hypothesis", True)),
    )
    engine = RegionEngine(src, d1, d2, ch, _frontier_options(spec, manifest), manifest.query)
    return make_checker(check, engine, rate, inputs), check


def cmd_region(manifest: RunManifest, spec: Dict) -> int:
    checker, check = _region_setup(spec, manifest)
    target = DistortionPair(*[float(x) for x in _require(spec, "target")])
    verdict = checker(target)
    frame = pd.DataFrame([{"check": check, "d1": target.d1, "d2": target.d2, "status": verdict.status,
                           **{f"slack_{k}": v for k, v in verdict.slack.items()}}])
    _emit(manifest, {"check": check, "target": [target.d1, target.d2], "verdict": verdict.to_dict()}, frame)
    icon = {"feasible": "✅", "infeasible": "❌"}.get(verdict.status, "⚠️ ")
    print(f"{icon} {check} at ({target.d1:g}, {target.d2:g}): {verdict.status}", file=sys.stderr)
    for note in verdict.notes:
        print(f"⚠️  {note}", file=sys.stderr)
    return 0


def cmd_frontier(manifest: RunManifest, spec: Dict) -> int:
    checker, check = _region_setup(spec, manifest)
    grid = [float(x) for x in _require(spec, "d1_grid")]
    frontier = distortion_frontier(checker, grid, float(spec.get("d2_max", 1.0)),
                                   convexify_result=bool(spec.get("convexify", False)))
    frame = distortion_frontier_frame(frontier)
    _emit(manifest, {"check": check, "frontier": frame.to_dict(orient="records")}, frame)
    print(f"📊 {check}: {len(frontier.points)} of {len(grid)} columns feasible", file=sys.stderr)
    return 0


def cmd_simulate(manifest: RunManifest, spec: Dict) -> int:
    name = spec.get("scheme", "example4_dueck")
    k = int(spec.get("K", 32))
    trials = int(spec.get("trials", 10_000))
    if name not in SCHEMES:
        raise ValidationError(f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}")
    if name == "example4_dueck":
        src = _source(spec) if "source" in spec else pmf_from_dict({"table": [[0.25, 0.25], [0.25, 0.25]]})
        ch = channel_from_spec(spec.get("channel", "dueck_correlated"))
        scheme = scheme_example4_dueck()
    else:
        src = _source(spec)
        ch = channel_from_spec(_require(spec, "channel"))
        scheme = scheme_uncoded_map(src, ch, *_distortions(spec, src), tuple(spec.get("embed", (None, None))))
    d1, d2 = _distortions(spec, src)
    stats = run_trials(scheme, src, ch, d1, d2, k, trials, manifest.seed, n=spec.get("N"), threads=manifest.threads)
    frame = stats_frame([stats])
    if manifest.fmt == "csv" and manifest.output:
        write_table(frame, manifest.output, append=True)
        print(f"✅ Appended to {manifest.output}")
    else:
        _emit(manifest, {"stats": stats.to_dict()}, frame)
    print(f"📊 {name}: D=({stats.mean_d1:.5f}, {stats.mean_d2:.5f}), block errors {stats.block_errors}",
          file=sys.stderr)
    return 0


def cmd_examples(manifest: RunManifest, spec: Dict) -> int:
    only = spec.get("only")
    if isinstance(only, str):
        only = [n.strip() for n in only.split(",") if n.strip()]
    opts = ExampleOptions(seed=manifest.seed, threads=manifest.threads)
    if "trials" in spec:
        opts = replace(opts, trials=int(spec["trials"]))
    table = run_examples(only, opts)
    if manifest.output and manifest.output.endswith(".xlsx"):
        # one sheet per example
        write_workbook({name: rows.reset_index(drop=True) for name, rows in table.groupby("example", sort=False)},
                       manifest.output)
        print(f"✅ Wrote {manifest.output}")
    else:
        _emit(manifest, {"examples": table.to_dict(orient="records")}, table)
    for _, row in table.iterrows():
        icon = "📊" if row["ok"] is None else ("✅" if row["ok"] else "❌")
        print(f"{icon} {row['example']}: {row['quantity']} = {row['value']:.6g}", file=sys.stderr)
    return 0


COMMANDS = {
    "rd": cmd_rd, "wz-rd": cmd_rd, "cond-rd": cmd_rd,
    "capacity": cmd_capacity, "prop1": cmd_prop1, "config-check": cmd_config_check,
    "region": cmd_region, "frontier": cmd_frontier, "simulate": cmd_simulate, "examples": cmd_examples,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="app.py", description="Two-way lossy source-channel coding toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", help="JSON problem or run spec")
        p.add_argument("--output", help="output file (stdout when omitted)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--format", choices=("json", "csv"), default="json", dest="fmt")
        if name in ("rd", "wz-rd", "cond-rd", "config-check", "region", "frontier", "simulate"):
            p.add_argument("--source", help="pmf JSON file")
        if name in ("capacity", "prop1", "config-check", "region", "frontier", "simulate"):
            p.add_argument("--channel", help="channel JSON file")
        if name in ("rd", "wz-rd", "cond-rd"):
            p.add_argument("--D", type=float, dest="D", default=None, help="target distortion")
        if name == "examples":
            p.add_argument("--only", action="append", choices=EXAMPLES, help="run only these examples")
    return parser


def manifest_from_args(args: argparse.Namespace) -> RunManifest:
    inputs = {}
    for role in ("input", "source", "channel"):
        path = getattr(args, role, None)
        if path:
            inputs[role] = path
    overrides = {"D": getattr(args, "D", None), "only": getattr(args, "only", None), "seed": args.seed}
    return RunManifest(
        subcommand=args.subcommand,
        inputs=inputs,
        output=args.output,
        seed=SETTINGS.seed if args.seed is None else args.seed,
        tol=SETTINGS.rd_tol if args.tol is None else args.tol,
        threads=SETTINGS.threads if args.threads is None else max(1, args.threads),
        fmt=args.fmt,
        overrides=overrides,
    )


def dispatch(manifest: RunManifest) -> int:
    if manifest.subcommand not in COMMANDS:
        raise ValidationError(f"unknown subcommand {manifest.subcommand!r}")
    spec = manifest.load()
    logger.info(f"{manifest.subcommand}: inputs {sorted(manifest.inputs)}, seed {manifest.seed}, tol {manifest.tol}")
    return COMMANDS[manifest.subcommand](manifest, spec)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=getattr(logging, SETTINGS.log_level.upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return dispatch(manifest_from_args(args))
    except TwcError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
