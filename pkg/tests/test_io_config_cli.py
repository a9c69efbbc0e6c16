import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gyrocal.config import Config, dump_config, load_config
from gyrocal.exceptions import MalformedStreamError
from gyrocal.io import read_stream_csv, write_stream_csv
from gyrocal.metrics import (
    AVAILABILITY_HEADER,
    CONVERGENCE_HEADER,
    SUMMARY_HEADER,
    emit_plot_data,
)
from gyrocal.pipeline import run_pipeline
from gyrocal.simulator import simulate_scenario


def test_stream_csv_roundtrip(tmp_path):
    cfg = Config(duration_s=5.0, tail_s=1.0, seed=2)
    _, stream = simulate_scenario(cfg.scenario())
    path = tmp_path / "s.csv"
    write_stream_csv(path, stream)
    back = read_stream_csv(path)
    assert_allclose(back.t, stream.t, rtol=1e-9)
    assert_allclose(back.gyro, stream.gyro, rtol=1e-9, atol=1e-12)
    assert_allclose(back.mag, stream.mag, rtol=1e-9, atol=1e-12)


def test_stream_csv_without_mag(tmp_path):
    cfg = Config(duration_s=3.0, tail_s=1.0)
    _, stream = simulate_scenario(cfg.scenario(), with_mag=False)
    path = tmp_path / "s.csv"
    write_stream_csv(path, stream)
    back = read_stream_csv(path)
    assert back.mag is None


def test_stream_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,a,b\n0,1,2\n")
    with pytest.raises(MalformedStreamError):
        read_stream_csv(path)


def test_stream_csv_rejects_nonmonotonic(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,-9.8\n0,0,0,0,0,0,-9.8\n"
    )
    with pytest.raises(MalformedStreamError):
        read_stream_csv(path)


def test_config_roundtrip(tmp_path):
    cfg = Config(seed=9, motion="pocket", qsmf_threshold_ut=2.0, mag_update_enabled=False)
    path = tmp_path / "cfg.txt"
    path.write_text(dump_config(cfg))
    back = load_config(path)
    assert back == cfg


def test_config_partial_override(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("# comment\nseed = 5\ninject_gyro_bias_dps = 1, -2, 0.5\nqsau_enabled = false\n")
    cfg = load_config(path)
    assert cfg.seed == 5
    assert cfg.inject_gyro_bias_dps == (1.0, -2.0, 0.5)
    assert cfg.qsau_enabled is False
    assert cfg.motion == "handheld"  # untouched default


def test_config_unknown_key(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("no_such_key = 1\n")
    with pytest.raises(ValueError):
        load_config(path)


def test_emit_plot_data_roundtrip(tmp_path):
    cfg = Config(duration_s=20.0, tail_s=8.0, reference_window_s=8.0, seed=4)
    report = run_pipeline(cfg)
    paths = emit_plot_data(report, tmp_path)

    conv = (tmp_path / "convergence.csv").read_text().splitlines()
    assert conv[0] == CONVERGENCE_HEADER
    assert len(conv) - 1 == len(report.t)  # one row per feedback epoch
    # fixed 6-decimal format: reading back reproduces the rounded series
    data = np.loadtxt(paths["convergence"], delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1:4], np.round(report.bias_dps, 6))

    avail = (tmp_path / "availability.csv").read_text().splitlines()
    assert avail[0] == AVAILABILITY_HEADER
    assert len(avail) - 1 == len(report.t)

    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == SUMMARY_HEADER
    assert len(summary) == 4  # header + one row per axis
    for row, m in zip(summary[1:], report.metrics):
        fields = row.split(",")
        assert float(fields[2]) == pytest.approx(m.rms_error_dps, abs=1e-6)


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "gyrocal.cli", *args], capture_output=True, text=True
    )


class TestCli:
    def test_simulate_then_calibrate(self, tmp_path):
        out = run_cli(
            "simulate", "--motion", "belt", "--env", "outdoor", "--seed", "3",
            "--out-dir", str(tmp_path),
        )
        assert out.returncode == 0, out.stderr
        csv = next(tmp_path.glob("scenario_*.csv"))

        out = run_cli("calibrate", "--in", str(csv), "--out-dir", str(tmp_path / "rep"))
        assert out.returncode == 0, out.stderr
        assert "reference_available = true" in out.stdout
        assert (tmp_path / "rep" / "report.txt").exists()
        assert (tmp_path / "rep" / "convergence.csv").exists()
        assert (tmp_path / "rep" / "availability.csv").exists()
        assert (tmp_path / "rep" / "summary.csv").exists()

    def test_calibrate_inline_simulation_with_config(self, tmp_path):
        cfgfile = tmp_path / "c.txt"
        cfgfile.write_text("duration_s = 20\ntail_s = 8\nreference_window_s = 8\nseed = 1\n")
        out = run_cli("calibrate", "--config", str(cfgfile), "--out-dir", str(tmp_path))
        assert out.returncode == 0, out.stderr
        assert "bias_final_dps.x" in out.stdout

    def test_no_mag_flag(self, tmp_path):
        cfgfile = tmp_path / "c.txt"
        cfgfile.write_text("duration_s = 15\ntail_s = 8\nreference_window_s = 8\n")
        out = run_cli("calibrate", "--config", str(cfgfile), "--no-mag", "--out-dir", str(tmp_path))
        assert out.returncode == 0, out.stderr
        assert "mag_available = false" in out.stdout

    def test_malformed_input_fails(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,gx,gy,gz,ax,ay,az\n0,0,0,0,0,0,-9.8\n")
        out = run_cli("calibrate", "--in", str(bad), "--out-dir", str(tmp_path))
        assert out.returncode != 0

    def test_selftest(self):
        out = run_cli("selftest")
        assert out.returncode == 0, out.stdout + out.stderr
        assert "PASS" in out.stdout
