import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from phonon_laser import preset
from phonon_laser.cli import ConfigError, RecordWriter, emit, main, parse_config, read_records, run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def data_lines(text):
    return [line for line in text.splitlines() if not line.startswith("#") and not line.startswith('{"meta"')]


def run_text(cfg):
    buf = io.StringIO()
    status = run(cfg, buf)
    return status, buf.getvalue()


def test_parse_minimal():
    cfg = parse_config("preset = model-section\nmode = steady")
    assert cfg.mode == "steady" and cfg.params == preset("model-section")


def test_parse_overrides_and_comments():
    text = "# header\nmode = dynamics  # trailing\npreset = results-phonon\nT_H = 350\nE_M = 0, 2, 27, 29\n\n"
    cfg = parse_config(text)
    assert cfg.params.T_H == 350.0 and cfg.params.E_M == (0, 2, 27, 29)
    assert cfg.params.lambda_MT == 0.08


@pytest.mark.parametrize("text,line,fragment", [
    ("", 0, "mode"),
    ("mode = steady\ndt = -1", 2, "dt"),
    ("mode = steady\n\nwhatever = 3", 3, "unknown key"),
    ("mode = steady\nthis line is wrong", 2, "key = value"),
    ("mode = sideways", 1, "mode"),
    ("mode = steady\nT_C = -4", 2, "T_C"),
    ("mode = steady\ngamma_H = abc", 2, "gamma_H"),
    ("mode = steady\nmode = sweep", 2, "duplicate"),
    ("mode = steady\npreset = nothing", 2, "preset"),
    ("mode = sweep\nsweep = temperature", 2, "sweep"),
    ("mode = steady\nformat = xml", 2, "format"),
])
def test_parse_errors_are_line_precise(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert fragment in str(exc.value)


def test_mode_override():
    assert parse_config("preset = model-section", mode="sweep").mode == "sweep"


def test_emit_single_record():
    buf = io.StringIO()
    n = emit([{"a": 1.0, "b": 2}], "csv", buf)
    lines = buf.getvalue().splitlines()
    assert lines == ["a,b", "1,2"] and n == len(buf.getvalue())


def test_emit_round_trip_is_bit_exact(rng):
    values = list(rng.normal(size=50) * 10.0 ** rng.integers(-300, 300, size=50)) + [1 / 3, math.pi, 0.1, -0.0]
    recs = [{"x": float(v), "y": float(v) * 7} for v in values]
    buf = io.StringIO()
    emit(recs, "csv", buf)
    _, rows = read_records(buf.getvalue())
    for rec, row in zip(recs, rows):
        assert row["x"] == rec["x"] and row["y"] == rec["y"]


def test_json_and_csv_share_fields():
    cfg = parse_config("mode = dynamics\npreset = model-section\nt_end = 0.01\nsample_every = 5")
    _, csv_text = run_text(cfg)
    cfg.format = "json-lines"
    _, json_text = run_text(cfg)
    _, csv_rows = read_records(csv_text)
    meta, json_rows = read_records(json_text)
    assert list(csv_rows[0]) == list(json_rows[0])
    assert len(csv_rows) == len(json_rows) == 3
    for a, b in zip(csv_rows, json_rows):
        for k in a:
            assert a[k] == b[k] or (math.isnan(a[k]) and math.isnan(b[k]))
    assert meta["preset"] == "model-section" and meta["reconstructions"]


def test_dynamics_columns():
    cfg = parse_config("mode = dynamics\npreset = results-phonon\nt_end = 0.02\nsample_every = 10")
    status, text = run_text(cfg)
    assert status == 0
    header = data_lines(text)[0].split(",")
    for col in ("t_ps", "rhoT_11", "rhoT_22", "rhoM_44", "rhoB_22", "inversion", "B1_re", "B1_im", "B2_re",
                "B2_im", "u1_pm", "u2_pm", "J_L_12_per_ps", "J_H_1to4_per_ps", "J_Ph_43_per_ps",
                "Qdot_H_meV_per_ps", "Sdot_meV_per_ps_K", "eta_ideal", "deltaT_threshold_K"):
        assert col in header
    assert any(line.startswith("# reconstructions:") for line in text.splitlines())
    assert any(line.startswith("# conventions:") for line in text.splitlines())


def test_phonon_free_amplitudes_only_decay():
    cfg = parse_config("mode = dynamics\npreset = model-section\ng = 0\nt_end = 2\nsample_every = 500")
    _, text = run_text(cfg)
    _, rows = read_records(text)
    for row in rows:
        mag = math.hypot(row["B1_re"], row["B1_im"])
        assert mag == pytest.approx(1e-3 * math.exp(-2.0 * row["t_ps"]), rel=1e-8)


def test_drive_off_uses_zero_coupling():
    a = run_text(parse_config("mode = dynamics\npreset = results-phonon\ndrive = false\nt_end = 0.5"))[1]
    b = run_text(parse_config("mode = dynamics\npreset = results-phonon\ng = 0\nt_end = 0.5"))[1]
    assert data_lines(a) == data_lines(b)


def test_steady_row_reports_relations():
    cfg = parse_config((CONFIGS / "steady_model.cfg").read_text())
    status, text = run_text(cfg)
    _, rows = read_records(text)
    assert status == 0 and len(rows) == 1
    row = rows[0]
    for i in range(1, 6):
        assert row[f"relation{i}_residual_per_ps"] <= 1e-8
    assert row["relations_pass"] == 1


def test_sweep_rows_and_threshold():
    cfg = parse_config((CONFIGS / "threshold_sweep.cfg").read_text())
    status, text = run_text(cfg)
    _, rows = read_records(text)
    assert status == 0 and len(rows) == 31
    for row in rows:
        assert row["deltaT_threshold_K"] == 20.0
        if row["deltaT"] < row["deltaT_threshold_K"]:
            assert row["J_per_ps"] <= 1e-10
        assert row["Sdot_meV_per_ps_K"] >= -1e-10


@pytest.mark.parametrize("var,key", [("lambda", "lambda_MT"), ("gamma_sys", "gamma_sys34"), ("g", "g")])
def test_other_sweep_variables(var, key):
    cfg = parse_config(f"mode = sweep\nsweep = {var}\nsweep_start = 0.01\nsweep_stop = 0.05\nsweep_points = 3")
    _, rows = read_records(run_text(cfg)[1])
    assert [r[var] for r in rows] == pytest.approx([0.01, 0.03, 0.05])


def test_parallel_sweep_matches_serial():
    text = (CONFIGS / "threshold_sweep.cfg").read_text().replace("sweep_points = 31", "sweep_points = 6")
    serial = run_text(parse_config(text))[1]
    parallel = run_text(parse_config(text + "workers = 2\n"))[1]
    assert data_lines(serial) == data_lines(parallel)


def test_failed_sentinel_on_invariant_violation(monkeypatch):
    import phonon_laser.cli as cli

    def bad_iter(*args, **kwargs):
        from phonon_laser.dynamics import initial_state
        from phonon_laser.errors import InvariantViolation
        yield initial_state(preset("model-section"))
        raise InvariantViolation("unit-trace", 0.5, 1e-3)

    monkeypatch.setattr(cli, "iter_simulation", bad_iter)
    status, text = run_text(parse_config("mode = dynamics\nt_end = 1"))
    lines = data_lines(text)
    assert status == 2
    assert len(lines) == 3 and lines[-1].startswith("FAILED,") and "unit-trace" in lines[-1]


def test_main_exit_codes(tmp_path):
    good = tmp_path / "good.cfg"
    good.write_text("mode = steady\npreset = model-section\n")
    out = tmp_path / "out.csv"
    assert main(["--config", str(good), "--out", str(out)]) == 0
    assert len(data_lines(out.read_text())) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("mode = steady\nnope = 1\n")
    assert main(["--config", str(bad)]) == 1
    assert main(["--config", str(tmp_path / "missing.cfg")]) == 3
    assert main(["--config", str(good), "--out", str(tmp_path / "no" / "dir.csv")]) == 3
    assert main(["--config", str(good), "--workers", "0"]) == 1


def test_main_format_flag(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("mode = steady\n")
    out = tmp_path / "o.jsonl"
    assert main(["--config", str(cfg), "--format", "json-lines", "--out", str(out)]) == 0
    first, row = out.read_text().splitlines()
    assert "meta" in json.loads(first) and "J_uniform_per_ps" in json.loads(row)


def test_console_script_entry(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("mode = steady\n")
    out = subprocess.run([sys.executable, "-m", "phonon_laser.cli", "--config", str(cfg)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "J_uniform_per_ps" in out.stdout


def test_record_writer_rejects_changing_fields():
    w = RecordWriter(io.StringIO(), "csv", {})
    w.write({"a": 1.0})
    with pytest.raises(ValueError):
        w.write({"b": 1.0})


def test_dynamics_rows_satisfy_balances():
    cfg = parse_config("mode = dynamics\npreset = results-phonon\nt_end = 1\nsample_every = 250")
    _, rows = read_records(run_text(cfg)[1])
    for row in rows:
        assert abs(sum(row[f"rhoM_{i}{i}"] for i in range(1, 5)) - 1) < 1e-10
    assert np.isfinite([r["J_uniform_per_ps"] for r in rows]).all()
