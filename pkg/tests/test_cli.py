"""End-to-end tests of the command line interface: each subcommand's
outputs, determinism of the written files, and error handling."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from gaitforge.cli import main
from gaitforge.policy import PolicyArch, save_checkpoint, zero_params
from gaitforge.sim import TRACE_COLUMNS
from gaitforge.trainer import TRAIN_CSV_COLUMNS


def write_config(tmp_path, name="cfg.json", **sections):
    p = tmp_path / name
    p.write_text(json.dumps(sections))
    return str(p)


def small_experiment_config(tmp_path):
    return write_config(
        tmp_path,
        experiment={"speed_grid": [0.5], "hold_s": 1.0,
                    "baseline_gaits": ["slow_trot"]},
    )


def train_config(tmp_path):
    return write_config(
        tmp_path,
        env={"episode_steps": 40},
        es={"population": 4, "iterations": 2, "workers": 1, "seed": 3,
            "diagonal_covariance": True},
        experiment={"speed_grid": [0.5], "hold_s": 1.0},
    )


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------------

def test_baseline_writes_deterministic_csv(tmp_path, jit_warm):
    cfg = small_experiment_config(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["baseline", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["baseline", "--config", cfg, "--out", str(out_b)]) == 0
    csv_a = (out_a / "baseline_cot.csv").read_bytes()
    csv_b = (out_b / "baseline_cot.csv").read_bytes()
    assert csv_a == csv_b
    rows = read_rows(out_a / "baseline_cot.csv")
    assert rows[0] == ["gait", "speed", "mean_speed", "cot", "speed_err",
                       "fell"]
    assert len(rows) == 2
    assert rows[1][0] == "Slow Trot"
    assert (out_a / "effective_config.json").exists()


def test_baseline_float_cells_round_trip_exactly(tmp_path, jit_warm):
    cfg = small_experiment_config(tmp_path)
    out = tmp_path / "o"
    assert main(["baseline", "--config", cfg, "--out", str(out)]) == 0
    header, *rows = read_rows(out / "baseline_cot.csv")
    for row in rows:
        for col in ("speed", "mean_speed", "cot", "speed_err"):
            cell = row[header.index(col)]
            if cell:
                assert repr(float(cell)) == cell


def test_baseline_rejects_unknown_gait(tmp_path, capsys):
    code = main(["baseline", "--out", str(tmp_path / "o"),
                 "--gaits", "gallop"])
    assert code == 2
    assert "unknown gait" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def test_train_writes_curves_and_checkpoints(tmp_path, jit_warm):
    cfg = train_config(tmp_path)
    out = tmp_path / "run"
    assert main(["train", "--config", cfg, "--out", str(out)]) == 0
    curve = out / "curve_seed3.csv"
    rows = read_rows(curve)
    assert rows[0] == list(TRAIN_CSV_COLUMNS)
    assert len(rows) == 3
    assert [r[0] for r in rows[1:]] == ["1", "2"]
    assert (out / "checkpoints_seed3" / "iter_00001.bin").exists()
    assert (out / "checkpoints_seed3" / "iter_00002.bin").exists()
    assert (out / "best_seed3.bin").exists()
    assert (out / "effective_config.json").exists()
    # Same config, same seed: the learning curve is byte-identical.
    out2 = tmp_path / "run2"
    assert main(["train", "--config", cfg, "--out", str(out2)]) == 0
    assert curve.read_bytes() == (out2 / "curve_seed3.csv").read_bytes()


def test_train_resume_continues_the_iteration_counter(tmp_path, jit_warm):
    cfg = train_config(tmp_path)
    first = tmp_path / "first"
    assert main(["train", "--config", cfg, "--out", str(first)]) == 0
    second = tmp_path / "second"
    assert main(["train", "--config", cfg, "--out", str(second),
                 "--resume", str(first / "best_seed3.bin")]) == 0
    rows = read_rows(second / "curve_seed3.csv")
    assert [r[0] for r in rows[1:]] == ["3", "4"]
    assert (second / "checkpoints_seed3" / "iter_00003.bin").exists()
    assert (second / "checkpoints_seed3" / "iter_00004.bin").exists()


def test_train_seed_flag_overrides_the_config(tmp_path, jit_warm):
    cfg = train_config(tmp_path)
    out = tmp_path / "seeded"
    assert main(["train", "--config", cfg, "--out", str(out),
                 "--seed", "9", "--iterations", "1"]) == 0
    assert (out / "curve_seed9.csv").exists()
    assert (out / "best_seed9.bin").exists()


def test_train_rejects_mismatched_resume_checkpoint(tmp_path, capsys,
                                                    jit_warm):
    tiny = PolicyArch(2, 4, 5)
    ckpt = tmp_path / "tiny.bin"
    save_checkpoint(ckpt, zero_params(tiny), tiny, meta={"iteration": 5})
    cfg = train_config(tmp_path)
    code = main(["train", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--resume", str(ckpt)])
    assert code == 2
    assert "architecture" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def test_eval_writes_trace_regimes_and_cot(tmp_path, jit_warm):
    cfg = small_experiment_config(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    args = ["eval", "--config", cfg, "--duration", "0.8"]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    trace_rows = read_rows(out_a / "trace.csv")
    assert trace_rows[0] == list(TRACE_COLUMNS)
    assert len(trace_rows) > 1
    assert (out_a / "regimes.csv").exists()
    cot_rows = read_rows(out_a / "learned_cot.csv")
    assert cot_rows[0] == ["gait", "speed", "mean_speed", "cot",
                           "speed_err", "fell"]
    for name in ("trace.csv", "regimes.csv", "learned_cot.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_eval_zero_duration_gives_an_empty_trace(tmp_path, jit_warm):
    out = tmp_path / "o"
    assert main(["eval", "--out", str(out), "--duration", "0"]) == 0
    trace_rows = read_rows(out / "trace.csv")
    assert trace_rows == [list(TRACE_COLUMNS)]
    assert not (out / "learned_cot.csv").exists()


def test_eval_rejects_mismatched_checkpoint(tmp_path, capsys, jit_warm):
    tiny = PolicyArch(2, 4, 5)
    ckpt = tmp_path / "tiny.bin"
    save_checkpoint(ckpt, zero_params(tiny), tiny)
    code = main(["eval", "--out", str(tmp_path / "o"),
                 "--checkpoint", str(ckpt), "--duration", "0.5"])
    assert code == 2
    assert "architecture" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cot_csv(tmp_path, name="cot.csv"):
    p = tmp_path / name
    p.write_text(
        "gait,speed,mean_speed,cot,speed_err,fell\n"
        "Walk,0.5,0.48,1.7,0.05,false\n"
        "Slow Trot,0.5,0.49,1.3,0.04,false\n"
        "Walk,2.0,,,,true\n"
    )
    return p


def curve_csv(tmp_path, name="curve.csv"):
    p = tmp_path / name
    rows = ["iteration,evaluations,env_steps,best_return,mean_return,"
            "best_return_ever,best_cot,best_speed_error,sigma,checkpoint"]
    for i in range(1, 4):
        rows.append(f"{i},{8*i},{1000*i},{10+i},{8+i},{10+i},1.2,0.05,"
                    f"0.03,iter_{i:05d}.bin")
    p.write_text("\n".join(rows) + "\n")
    return p


def trace_csv(tmp_path, name="trace.csv"):
    p = tmp_path / name
    header = ",".join(TRACE_COLUMNS)
    lines = [header]
    for k in range(1, 51):
        row = [0.0] * len(TRACE_COLUMNS)
        row[TRACE_COLUMNS.index("time_s")] = 0.002 * k
        row[TRACE_COLUMNS.index("vx")] = 0.01 * k
        for leg in range(4):
            row[TRACE_COLUMNS.index("stance_fr") + leg] = float(
                (k // 5 + leg) % 2)
        lines.append(",".join(repr(v) for v in row))
    p.write_text("\n".join(lines) + "\n")
    return p


def test_report_renders_deterministic_svgs(tmp_path):
    cot = cot_csv(tmp_path)
    curve = curve_csv(tmp_path)
    trace = trace_csv(tmp_path)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    args = ["report", "--cot", str(cot), "--curves", str(curve),
            "--trace", str(trace)]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    for name in ("cot_vs_speed.svg", "learning_curves.svg",
                 "contact_raster.svg"):
        data = (out_a / name).read_bytes()
        assert data.startswith(b"<?xml")
        assert len(data) > 1000
        assert data == (out_b / name).read_bytes()


def test_report_names_the_bad_cell_in_a_malformed_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "gait,speed,cot,fell\n"
        "Walk,0.5,1.7,false\n"
        "Walk,abc,1.9,false\n"
    )
    code = main(["report", "--out", str(tmp_path / "o"),
                 "--cot", str(bad)])
    assert code == 2
    err = capsys.readouterr().err
    assert "row 3" in err and "speed" in err


def test_report_rejects_short_rows(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("gait,speed,cot,fell\nWalk,0.5\n")
    assert main(["report", "--out", str(tmp_path / "o"),
                 "--cot", str(bad)]) == 2
    assert "row 2" in capsys.readouterr().err


def test_report_requires_at_least_one_input(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path / "o")]) == 2
    assert "nothing to render" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# argument and config errors
# ---------------------------------------------------------------------------

def test_missing_required_arguments_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["baseline"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["unknown-command"])
    assert exc.value.code == 2


def test_unknown_config_key_exits_nonzero(tmp_path, capsys):
    cfg = write_config(tmp_path, env={"vmax": 2.0})
    code = main(["baseline", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == 1
    assert "error" in capsys.readouterr().err
