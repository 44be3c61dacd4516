import csv
import json
import subprocess
import sys

import pytest

from twinris.channel import channel_from_json
from twinris.cli import FIGURE_TRIALS, build_parser, main
from twinris.experiments import CSV_HEADER

SMALL = {"nt_w": 4, "nt_h": 2, "nr_w": 2, "nr_h": 1, "nris_w": 4, "nris_h": 2, "n_rf": 2}


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(SMALL))
    return str(p)


@pytest.fixture
def spec_file(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps({"axis": "PT_DBM", "values": [10, 20], "methods": ["TWIN", "LOW"]}))
    return str(p)


def test_single_json(small_cfg, capsys):
    assert main(["single", "--config", small_cfg, "--method", "TWIN"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == "TWIN"
    assert out["rate_bps_hz"] <= out["shannon_limit_bps_hz"] + 1e-6
    assert set(out) >= {"rate_bps_hz", "rx_snr_db", "total_power_w", "ee", "shannon_limit_bps_hz",
                        "rank_deficient_flag"}


def test_single_trace_and_dumps(small_cfg, tmp_path, capsys):
    trace, chan, bf = tmp_path / "t.csv", tmp_path / "c.json", tmp_path / "b.json"
    rc = main(["single", "--config", small_cfg, "--trace", str(trace),
               "--dump-channel", str(chan), "--dump-beamformer", str(bf)])
    assert rc == 0
    rows = list(csv.DictReader(trace.open()))
    assert list(rows[0]) == ["subarray", "iter", "objective", "step", "grad_norm", "accepted"]
    assert {r["subarray"] for r in rows} == {"1", "2"}
    for j in ("1", "2"):
        vals = [float(r["objective"]) for r in rows if r["subarray"] == j and r["accepted"] == "1"]
        assert vals == sorted(vals)
    assert channel_from_json(chan.read_text()).m_matrix.shape == (8, 8)
    assert json.loads(bf.read_text())["f_rf"]["shape"] == [8, 2]


def test_single_same_with_and_without_trace(small_cfg, tmp_path, capsys):
    main(["single", "--config", small_cfg, "--method", "TWIN_DISCRETE(2)"])
    a = capsys.readouterr().out
    main(["single", "--config", small_cfg, "--method", "TWIN_DISCRETE(2)", "--trace", str(tmp_path / "t.csv")])
    assert capsys.readouterr().out == a


def test_bad_method_exit_code(small_cfg, capsys):
    assert main(["single", "--config", small_cfg, "--method", "NOPE"]) == 1
    assert "unsupported method" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"n_rf": 3}))
    assert main(["single", "--config", str(p)]) == 2
    assert "rf_divisibility" in capsys.readouterr().err
    p.write_text(json.dumps({"mystery": 1}))
    assert main(["single", "--config", str(p)]) == 2


def test_missing_file_exit_code(capsys):
    assert main(["single", "--config", "/nonexistent/cfg.json"]) != 0


def test_sweep_writes_csv(small_cfg, spec_file, tmp_path):
    out = tmp_path / "out.csv"
    assert main(["sweep", "--config", small_cfg, "--spec", spec_file, "--out", str(out), "--trials", "2"]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == CSV_HEADER
    assert [(r[0], r[1], r[2]) for r in rows[1:]] == [("10", "TWIN", "2"), ("10", "LOW", "2"),
                                                      ("20", "TWIN", "2"), ("20", "LOW", "2")]


def test_sweep_seed_flag_and_env(small_cfg, spec_file, tmp_path, monkeypatch, capsys):
    main(["sweep", "--config", small_cfg, "--spec", spec_file, "--trials", "2", "--seed", "3"])
    flag = capsys.readouterr().out
    monkeypatch.setenv("TWINRIS_SEED", "3")
    main(["sweep", "--config", small_cfg, "--spec", spec_file, "--trials", "2"])
    env = capsys.readouterr().out
    monkeypatch.delenv("TWINRIS_SEED")
    main(["sweep", "--config", small_cfg, "--spec", spec_file, "--trials", "2"])
    default = capsys.readouterr().out
    assert flag == env != default


def test_sweep_bad_spec(small_cfg, tmp_path, capsys):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps({"axis": "PT_DBM", "values": [10, 5, 20], "methods": ["TWIN"]}))
    assert main(["sweep", "--config", small_cfg, "--spec", str(p)]) == 1
    assert "monotone" in capsys.readouterr().err


def test_figure_scale_flag():
    args = build_parser().parse_args(["sweep", "--spec", "x", "--figure-scale"])
    assert args.figure_scale and FIGURE_TRIALS == 500


def test_oracle_command(capsys):
    assert main(["oracle", "--m", "2", "--seed", "4"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["greedy_rate"] <= out["oracle_rate"] + 1e-12
    assert sorted(out["oracle_mask"]) == [0, 1]


def test_module_entry_point(small_cfg):
    res = subprocess.run([sys.executable, "-m", "twinris", "single", "--config", small_cfg],
                         capture_output=True, text=True, check=True)
    assert "rate_bps_hz" in json.loads(res.stdout)
