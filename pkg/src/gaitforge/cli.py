"""Command line interface.

    gaitforge baseline  --out DIR [--config JSON] [--seed N] [--gaits ...]
    gaitforge train     --out DIR [--config JSON] [--seed N] [--resume CKPT]
    gaitforge eval      --checkpoint CKPT --out DIR [--duration S]
    gaitforge report    --out DIR [--cot CSV...] [--curves CSV...] [--trace CSV]

All numeric CSV cells are written with repr-exact formatting, so a rerun
with the same seed and config produces byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from gaitforge import experiments, report
from gaitforge.config import FullConfig, dump_config, load_config
from gaitforge.policy import load_checkpoint, save_checkpoint, zero_params
from gaitforge.sim import LocomotionEnv, TRACE_COLUMNS
from gaitforge.trainer import TRAIN_CSV_COLUMNS, train


def _fmt(x) -> str:
    """Shortest exact decimal for floats; empty for None."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(c) for c in row])


def _load_full_config(args) -> FullConfig:
    cfg = load_config(args.config) if args.config else FullConfig()
    if args.seed is not None:
        cfg = replace(cfg, env=replace(cfg.env, seed=args.seed),
                      es=replace(cfg.es, seed=args.seed))
    return cfg


def _make_env(cfg: FullConfig, record: bool = False) -> LocomotionEnv:
    return LocomotionEnv(cfg.robot, cfg.mpc, cfg.env, cfg.gains,
                         cfg.z_clearance, record=record)


# ---------------------------------------------------------------------------


def cmd_baseline(args) -> int:
    cfg = _load_full_config(args)
    out = Path(args.out)
    gait_keys = args.gaits or list(cfg.experiment.baseline_gaits)
    unknown = [g for g in gait_keys if g not in experiments.BASELINE_GAITS]
    if unknown:
        print(f"error: unknown gait(s) {unknown}; choose from "
              f"{sorted(experiments.BASELINE_GAITS)}", file=sys.stderr)
        return 2
    speeds = args.speeds or list(cfg.experiment.speed_grid)
    env = _make_env(cfg)
    points = experiments.baseline_sweep(env, gait_keys, speeds,
                                        cfg.env.seed,
                                        cfg.experiment.hold_s)
    rows = [(p.gait, p.speed, p.mean_speed, p.cot, p.speed_error, p.fell)
            for p in points]
    _write_csv(out / "baseline_cot.csv",
               ("gait", "speed", "mean_speed", "cot", "speed_err", "fell"),
               rows)
    dump_config(cfg, out / "effective_config.json")
    print(f"wrote {out / 'baseline_cot.csv'} ({len(rows)} rows)")
    return 0


def cmd_train(args) -> int:
    cfg = _load_full_config(args)
    es_cfg = cfg.es
    if args.algo:
        es_cfg = replace(es_cfg, algorithm=args.algo)
    if args.iterations:
        es_cfg = replace(es_cfg, iterations=args.iterations)
    if args.population:
        es_cfg = replace(es_cfg, population=args.population)
    if args.workers:
        es_cfg = replace(es_cfg, workers=args.workers)
    if args.budget:
        es_cfg = replace(es_cfg, env_step_budget=args.budget)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    setup = cfg.rollout_setup()

    start_iteration = 0
    initial = None
    if args.resume:
        initial, arch, meta = load_checkpoint(args.resume)
        if arch != setup.arch:
            print("error: checkpoint architecture does not match config",
                  file=sys.stderr)
            return 2
        start_iteration = int(meta.get("iteration", 0))
        print(f"resuming from {args.resume} at iteration {start_iteration}")

    n_seeds = args.n_seeds or cfg.experiment.n_seeds
    for k in range(n_seeds):
        seed = es_cfg.seed + k
        run_cfg = replace(es_cfg, seed=seed)
        curve_path = out / f"curve_seed{seed}.csv"
        ckpt_dir = out / f"checkpoints_seed{seed}"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        rows = []

        def on_iteration(rec, best_params, _seed=seed, _rows=rows,
                         _dir=ckpt_dir, _start=start_iteration):
            it = rec.iteration + _start
            ck = _dir / f"iter_{it:05d}.bin"
            save_checkpoint(ck, best_params, setup.arch,
                            meta={"iteration": it,
                                  "env_steps": rec.env_steps,
                                  "seed": _seed,
                                  "best_return_ever": rec.best_return_ever})
            rec.iteration = it
            rec.checkpoint = ck.name
            _rows.append(tuple(getattr(rec, c) for c in TRAIN_CSV_COLUMNS))
            print(f"seed {_seed} iter {it}: best {rec.best_return:.3f} "
                  f"ever {rec.best_return_ever:.3f} "
                  f"steps {rec.env_steps}")

        best, _records = train(run_cfg, setup, initial, on_iteration)
        _write_csv(curve_path, TRAIN_CSV_COLUMNS, rows)
        final = out / f"best_seed{seed}.bin"
        last_iter = rows[-1][0] if rows else start_iteration
        save_checkpoint(final, best, setup.arch,
                        meta={"iteration": int(last_iter), "seed": seed})
        print(f"wrote {curve_path} and {final}")
    dump_config(cfg, out / "effective_config.json")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_full_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.checkpoint:
        params, arch, _meta = load_checkpoint(args.checkpoint)
        if arch != cfg.rollout_setup().arch:
            print("error: checkpoint architecture does not match config",
                  file=sys.stderr)
            return 2
    else:
        params = zero_params()
    env = _make_env(cfg)
    duration = args.duration
    if duration is None:
        duration = cfg.experiment.eval_duration_s
    trace = experiments.ramp_trace(env, params, cfg.env.seed, duration)
    _write_csv(out / "trace.csv", TRACE_COLUMNS,
               [tuple(row) for row in trace])
    regimes = experiments.detect_regimes(trace)
    _write_csv(out / "regimes.csv",
               ("start_time", "end_time", "start_speed", "end_speed",
                "label", "theta2", "theta3", "theta4", "swing_ratio",
                "frequency_hz"),
               [(r.start_time, r.end_time, r.start_speed, r.end_speed,
                 r.label, *r.mean_offsets, r.mean_swing_ratio,
                 r.mean_frequency) for r in regimes])
    if trace.shape[0] and not args.skip_cot:
        points = experiments.policy_speed_sweep(
            env, params, cfg.experiment.speed_grid, cfg.env.seed,
            cfg.experiment.hold_s)
        _write_csv(out / "learned_cot.csv",
                   ("gait", "speed", "mean_speed", "cot", "speed_err",
                    "fell"),
                   [(p.gait, p.speed, p.mean_speed, p.cot, p.speed_error,
                     p.fell) for p in points])
    print(f"wrote {out / 'trace.csv'} ({trace.shape[0]} substeps, "
          f"{len(regimes)} regimes)")
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    made = []
    try:
        if args.cot:
            made.append(report.render_cot_vs_speed(args.cot,
                                                   out / "cot_vs_speed.svg"))
        if args.curves:
            made.append(report.render_learning_curves(
                args.curves, out / "learning_curves.svg"))
        if args.trace:
            made.append(report.render_contact_raster(
                args.trace, out / "contact_raster.svg",
                max_seconds=args.raster_seconds))
    except report.CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not made:
        print("error: nothing to render; pass --cot/--curves/--trace",
              file=sys.stderr)
        return 2
    for p in made:
        print(f"wrote {p}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gaitforge",
        description="Quadruped gait search: baselines, training, "
                    "evaluation, reports.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override seed")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("baseline", help="sweep hand-tuned gaits over speeds")
    common(p)
    p.add_argument("--gaits", nargs="*",
                   help="subset of baseline gait keys (default: all)")
    p.add_argument("--speeds", nargs="*", type=float,
                   help="speed grid override [m/s]")
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("train", help="run evolution-strategy training")
    common(p)
    p.add_argument("--algo", choices=("cmaes", "ars"))
    p.add_argument("--iterations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--budget", type=int, help="max environment steps")
    p.add_argument("--n-seeds", type=int, dest="n_seeds",
                   help="train this many seeds (seed, seed+1, ...)")
    p.add_argument("--resume", help="checkpoint to warm-restart from")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="trace a policy on the speed ramp")
    common(p)
    p.add_argument("--checkpoint", help="policy checkpoint (default: zeros)")
    p.add_argument("--duration", type=float,
                   help="profile length in seconds (0 = empty trace)")
    p.add_argument("--skip-cot", action="store_true", dest="skip_cot",
                   help="skip the per-speed CoT sweep")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="render SVG figures from CSV outputs")
    p.add_argument("--out", required=True)
    p.add_argument("--cot", nargs="*", help="CoT CSV files")
    p.add_argument("--curves", nargs="*", help="learning-curve CSV files")
    p.add_argument("--trace", help="eval trace CSV")
    p.add_argument("--raster-seconds", type=float, default=None)
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
