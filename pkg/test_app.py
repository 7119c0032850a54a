#!/usr/bin/env python3
"""
Command-line tests: subcommand dispatch, exit codes, output formats and the JSON codecs
"""

import json
import os
import sys
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import app
from utils.bundled_examples import example3_source, independent_bernoulli
from utils.channels import binary_additive
from utils.errors import ValidationError
from utils.prob import binary_entropy
from utils.schemes import SCHEMES
from utils.serialization import (configuration_from_dict, configuration_to_dict, load_json, pmf_from_dict,
                                 write_workbook)
from utils.special_configs import Ingredients, build_special_config

ROOT = os.path.dirname(os.path.abspath(__file__))


def fixture(*parts):
    return os.path.join(ROOT, "fixtures", *parts)


def _run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = app.main(list(argv) + ["--output", str(out)])
    return code, out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def test_rd_from_source_file(tmp_path):
    code, out = _run(["rd", "--source", fixture("sources", "ber50.json"), "--D", "0.25"], tmp_path)
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["kind"] == "standard"
    assert payload["seed"] == app.SETTINGS.seed
    rate = payload["results"][0]["rate"]
    assert rate == pytest.approx(1.0 - float(binary_entropy(0.25)), abs=1e-4)


def test_rd_grid_as_csv_with_sidecar(tmp_path):
    code, out = _run(["rd", "--input", fixture("runs", "rd_ber_grid.json"), "--format", "csv", "--tol", "1e-7"],
                     tmp_path, "curve.csv")
    assert code == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["D", "rate"]
    assert len(frame) == 6
    assert frame["rate"].iloc[-1] == pytest.approx(0.0, abs=1e-9)
    assert (frame["rate"].diff().dropna() <= 1e-12).all()
    meta = json.loads((tmp_path / "curve.csv.meta.json").read_text())
    assert meta["tolerance"] == 1e-7
    assert meta["subcommand"] == "rd"


def test_wz_rd_example_pair(tmp_path):
    code, out = _run(["wz-rd", "--input", fixture("runs", "example2_wz.json"), "--seed", "3"], tmp_path)
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["seed"] == 3
    assert payload["results"][0]["rate"] == pytest.approx(2.0 / 3.0, abs=2e-3)


def test_nonconvergence_exit_code(tmp_path, monkeypatch):
    real = app.curve_results

    def stalled(*args, **kwargs):
        return [replace(r, converged=False) for r in real(*args, **kwargs)]

    monkeypatch.setattr(app, "curve_results", stalled)
    code, out = _run(["rd", "--source", fixture("sources", "ber50.json"), "--D", "0.1"], tmp_path)
    assert code == 3
    assert out.exists()


def test_region_cor4_is_infeasible(tmp_path):
    code, out = _run(["region", "--input", fixture("runs", "example2_cor4.json")], tmp_path)
    assert code == 0
    verdict = json.loads(out.read_text())["verdict"]
    assert verdict["status"] == "infeasible"


def test_config_check_uncoded_example2(tmp_path):
    code, out = _run(["config-check", "--input", fixture("runs", "example2_config_check.json")], tmp_path)
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["report"]["cond1_ok"] and payload["report"]["cond2_ok"]
    assert payload["simulation"]["block_errors"] == 0
    assert "corollary_margins" in payload


def test_simulate_appends_csv_rows(tmp_path):
    spec = load_json(fixture("runs", "example3_simulate.json"))
    spec.update(K=8, trials=500)
    run = tmp_path / "sim.json"
    run.write_text(json.dumps(spec))
    table = tmp_path / "sims.csv"
    for seed in ("1", "2"):
        code = app.main(["simulate", "--input", str(run), "--format", "csv", "--output", str(table), "--seed", seed])
        assert code == 0
    frame = pd.read_csv(table)
    assert list(frame["seed"]) == [1, 2]
    assert (frame["mean_d1"] == 0.0).all()


def test_simulate_source_and_channel_shortcuts(tmp_path):
    spec = tmp_path / "run.json"
    spec.write_text(json.dumps({"scheme": "uncoded_map", "K": 4, "trials": 200}))
    code, out = _run(["simulate", "--input", str(spec), "--source", fixture("sources", "example3.json"),
                      "--channel", fixture("channels", "mixed_05.json")], tmp_path)
    assert code == 0
    stats = json.loads(out.read_text())["stats"]
    assert stats["K"] == 4 and stats["trials"] == 200


# ---------------------------------------------------------------------------
# validation failures exit with status 2
# ---------------------------------------------------------------------------

def test_missing_file_exits_2(tmp_path, capsys):
    code = app.main(["rd", "--source", str(tmp_path / "nope.json"), "--D", "0.1"])
    assert code == 2
    assert "does not exist" in capsys.readouterr().err


def test_bad_json_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "D": 0.1,\n  "source": [1, 2,\n}\n')
    code = app.main(["rd", "--input", str(bad)])
    assert code == 2
    assert "line 4" in capsys.readouterr().err


def test_invalid_pmf_exits_2(tmp_path):
    bad = tmp_path / "src.json"
    bad.write_text(json.dumps({"axes": [{"size": 2}], "probs": [0.7, 0.7]}))
    assert app.main(["rd", "--source", str(bad), "--D", "0.1"]) == 2


def test_unknown_check_and_scheme_exit_2(tmp_path, capsys):
    region = load_json(fixture("runs", "example2_cor4.json"))
    region["check"] = "thm9"
    path = tmp_path / "region.json"
    path.write_text(json.dumps(region))
    assert app.main(["region", "--input", str(path)]) == 2
    path.write_text(json.dumps({"scheme": "telepathy"}))
    assert app.main(["simulate", "--input", str(path)]) == 2
    err = capsys.readouterr().err
    assert "telepathy" in err
    assert all(name in err for name in SCHEMES)


def test_validation_error_line_prefix():
    err = ValidationError("trailing comma", line=7)
    assert err.line == 7
    assert str(err).startswith("line 7:")
    assert err.exit_code == 2


# ---------------------------------------------------------------------------
# codecs
# ---------------------------------------------------------------------------

def test_pmf_codec_accepts_rationals_and_tables():
    flat = pmf_from_dict(load_json(fixture("sources", "example2.json")))
    np.testing.assert_allclose(flat.probs, [[0.0, 1 / 3], [1 / 3, 1 / 3]])
    table = pmf_from_dict(load_json(fixture("sources", "example7.json")))
    assert table.shape == (4, 4)
    assert table.probs.sum() == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        pmf_from_dict({"axes": [{"size": 2}], "probs": ["1/0", 1]})
    with pytest.raises(ValidationError):
        pmf_from_dict({"axes": [{"size": 3}], "probs": [0.5, 0.5]})


def test_configuration_codec_preserves_tables():
    src = independent_bernoulli(0.5)
    cfg = build_special_config("uncoded", Ingredients(src, binary_additive(0.1, 0.1), uncoded_maps=([0, 1], [0, 1])))
    rebuilt = configuration_from_dict(json.loads(json.dumps(configuration_to_dict(cfg))))
    for name in ("f1", "f2", "g1", "g2"):
        np.testing.assert_array_equal(getattr(rebuilt, name), getattr(cfg, name))
    np.testing.assert_allclose(rebuilt.p_tilde.probs, cfg.p_tilde.probs)
    broken = configuration_to_dict(cfg)
    broken["g1"] = broken["g1"][:-1]
    with pytest.raises(ValidationError):
        configuration_from_dict(broken)


def test_example3_fixture_matches_builder():
    loaded = pmf_from_dict(load_json(fixture("sources", "example3.json")))
    np.testing.assert_allclose(loaded.probs, example3_source().probs)


@pytest.mark.slow
def test_examples_subcommand(tmp_path):
    code, out = _run(["examples", "--only", "example2", "--only", "example3"], tmp_path)
    assert code == 0
    rows = json.loads(out.read_text())["examples"]
    assert {r["example"] for r in rows} == {"example2", "example3"}
    assert all(r["ok"] is not False for r in rows)


def test_workbook_has_one_sheet_per_frame(tmp_path):
    path = str(tmp_path / "summary.xlsx")
    frames = {"example2": pd.DataFrame({"quantity": ["H(S1|S2)"], "value": [2 / 3]}),
              "example3": pd.DataFrame({"quantity": ["uncoded D2"], "value": [1 / 30]})}
    write_workbook(frames, path)
    sheets = pd.read_excel(path, sheet_name=None)
    assert list(sheets) == ["example2", "example3"]
    assert sheets["example3"]["value"].iloc[0] == pytest.approx(1 / 30)
