import json
import math
from pathlib import Path

import numpy as np
import pytest

from vanishdist.xp import (
    ConfigError,
    ExperimentConfig,
    RefusedWithoutDisplacement,
    RunReport,
    displacement_energy_bound,
    find_j0,
    load_config,
    make_probes,
    parse_config,
    run_cli,
    sweep,
    verify_displacement,
)

GOLDEN = Path(__file__).parent / "golden"
FAST = dict(probe_count=100, C_a=1.8, C_b=1.8)


def test_defaults_and_empty_config():
    cfg = parse_config("")
    assert cfg == ExperimentConfig()
    assert cfg.to_dict()["k"] == [1, 2, 3]


def test_config_sections_parse():
    cfg = parse_config('seed = 4\n[params]\nk = 2\nbeta = 0.2\n[constants]\nC_a = 1.0\nC_b = 2.0\n')
    assert cfg.seed == 4 and cfg.k == (2,) and cfg.beta == 0.2 and cfg.C_b == 2.0


@pytest.mark.parametrize("text", [
    "probe_count = 10",
    "probe_margin = 0",
    "bogus = 1",
    "[params]\nbeta = 0.5",
    "[nope]\na = 1",
    "norm_method = 'l2'",
    "[constants]\nC_a = 1.0",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        cfg = parse_config(text)
        cfg.construction(1)


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError) as err:
        parse_config("seed = 1\nprobe_count = = 3\n")
    assert "probe_count = = 3" in str(err.value)


def test_probe_schemes_respect_margin():
    for scheme in ("grid", "low-discrepancy"):
        cfg = ExperimentConfig(probe_count=400, probe_scheme=scheme)
        p = make_probes(cfg)
        assert p.shape[0] >= 400 and p.shape[1] == 2
        assert p.min() >= 1e-3 and p.max() <= 1 - 1e-3
    assert np.array_equal(make_probes(ExperimentConfig(seed=3)), make_probes(ExperimentConfig(seed=3)))


def test_verify_passes_and_negative_controls_fail():
    cfg = ExperimentConfig(k=(1,), **FAST)
    rep = verify_displacement(cfg)
    assert rep.passed and rep.displacement["1"]["min_final_x"] > 1
    for ctrl in ("disable_transport", "disable_stages"):
        bad = verify_displacement(cfg.replace(**{ctrl: True}))
        assert not bad.passed and bad.displacement["1"]["min_final_x"] < 1
        assert bad.displacement["1"]["violation_count"] == 100
    with pytest.raises(RefusedWithoutDisplacement):
        displacement_energy_bound(cfg, 1, report=bad)


def test_energy_bound_equals_ledger_total():
    from vanishdist.construction import ConstructionParams, cost_ledger
    from vanishdist.flows import ledger_total
    from vanishdist.norms import SobolevParams
    cfg = ExperimentConfig(k=(3,), **FAST)
    rep = verify_displacement(cfg)
    b = displacement_energy_bound(cfg, 3, report=rep)
    want = ledger_total(cost_ledger(ConstructionParams(SobolevParams(2, 3.0), 3, 0.25), 1.8, 1.8))
    assert b == want and math.isfinite(b)


def test_report_roundtrip():
    rep = verify_displacement(ExperimentConfig(k=(1,), **FAST))
    back = RunReport.from_dict(json.loads(rep.to_json()))
    assert back.to_json() == rep.to_json()
    with pytest.raises(ValueError):
        RunReport.from_dict({"schema_version": 99})


def test_find_j0():
    assert find_j0([1, 2, 3, 4], [5.0, 6.0, 4.0, 3.0]) == 2
    assert find_j0([1, 2, 3], [3.0, 2.0, 1.0]) == 1
    assert find_j0([1, 2, 3], [1.0, 2.0, 3.0]) == 3
    assert find_j0([], []) is None


def test_sweep_rows_and_decay_check():
    cfg = ExperimentConfig(k=(1,), j_min=20, j_max=40, **FAST)
    rep, table = sweep(cfg)
    rows = table.strip().splitlines()
    assert rows[0] == "k,log_cost_squeeze1,log_cost_squeeze2,log_cost_transport,log_total,displacement_pass"
    assert len(rows) == 1 + 1 + 21
    assert rows[1].endswith(",pass") and rows[2].endswith(",skipped")
    decay = rep.norm_checks[0]
    assert decay["j0"] == 22


def test_sweep_is_deterministic():
    cfg = ExperimentConfig(k=(1,), j_min=3, j_max=6, **FAST)
    a, ta = sweep(cfg)
    b, tb = sweep(cfg)
    assert ta == tb and a.to_json(timing=False) == b.to_json(timing=False)


def test_cli_help_and_errors(tmp_path, capsys):
    assert run_cli(["--help"]) == 0
    bad = tmp_path / "bad.toml"
    bad.write_text("probe_count = [\n")
    assert run_cli(["verify", "--config", str(bad)]) == 2
    assert "probe_count = [" in capsys.readouterr().err
    assert run_cli(["verify", "--config", str(tmp_path / "missing.toml")]) == 2
    assert run_cli(["frobnicate"]) == 2


def test_cli_verify_and_report(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("probe_count = 100\n[params]\nk = 1\n")
    out = tmp_path / "r.json"
    assert run_cli(["verify", "--config", str(cfg), "--out", str(out)]) == 0
    assert run_cli(["report", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["seed"] == 0 and data["passed"] and "timing" in data
    assert run_cli(["verify", "--config", str(cfg), "--seed", "5", "--clamp", "-3", "--k", "2",
                    "--out", str(out)]) == 0
    assert json.loads(out.read_text())["config"]["lambda_mode"] == "floor"


def test_cli_norm(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[sampler]\nn_samples = 20000\n[constants]\nC_a = 1.8\nC_b = 1.8\n")
    for method in ("mc", "gn-a", "gn-b"):
        assert run_cli(["norm", "bump", "--config", str(cfg), "--norm-method", method]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["value"] > 0
    assert run_cli(["norm", "transport", "--config", str(cfg), "--norm-method", "gn-b", "--k", "2"]) == 0


def test_golden_sweep_byte_for_byte(tmp_path):
    out = tmp_path / "sweep.csv"
    code = run_cli(["sweep", "--config", str(GOLDEN / "sweep.toml"), "--out", str(out)])
    assert code in (0, 1)
    assert out.read_bytes() == (GOLDEN / "sweep.csv").read_bytes()
    assert out.with_suffix(".json").read_bytes() == (GOLDEN / "sweep.json").read_bytes()
