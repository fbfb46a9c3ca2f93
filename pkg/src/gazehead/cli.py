"""Command-line entry point.

Subcommands: generate, train, rollout, evaluate, exosim, report. Every
subcommand is reproducible: the same flags and seed produce byte-identical
artifacts. All randomness derives from the global --seed combined with
stable job identifiers (participant, task index, trial index), so the
--jobs level never changes results. Logs go to stderr, artifacts only to
the declared output paths.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import dataset as ds
from .controllers import load_controller, save_controller
from .exosim import ExoLimits, ExoSim
from .rollout import EvalRow, EvalTable, RolloutConfig, evaluate_suite, rollout, trajectory_label
from .training import TrainConfig, fit

TASK_CHOICES = [t.value for t in ds.Task] + ["all"]


def log(message):
    print(message, file=sys.stderr)


def _load_dir(path):
    """All trajectories under a .jsonl file or a directory of them,
    blink-repaired, in sorted file order."""
    if os.path.isdir(path):
        files = sorted(
            os.path.join(path, f) for f in os.listdir(path) if f.endswith(".jsonl")
        )
    else:
        files = [path]
    if not files:
        raise FileNotFoundError(f"no .jsonl trajectories under {path}")
    trajs = []
    for f in files:
        for traj in ds.load_trajectories(f):
            trajs.append(ds.repair_blinks(traj))
    if not trajs:
        raise ValueError(f"no samples found under {path}")
    return trajs


def _selected_tasks(name):
    if name == "all":
        return list(ds.Task)
    return [ds.Task(name)]


def cmd_generate(args):
    tasks = _selected_tasks(args.task)
    trials = args.trials_per_task or max(1, 12 // len(tasks))
    config = ds.TaskConfig(duration=args.duration, rate_hz=args.rate)
    os.makedirs(args.out, exist_ok=True)
    count = 0
    for pid in range(args.participants):
        trajs = ds.generate_participant(pid, tasks, trials, config, seed=args.seed)
        trial_index = 0
        for traj in trajs:
            name = f"p{pid:03d}_{traj.task.value}_t{trial_index % trials:02d}.jsonl"
            ds.save_trajectories(traj, os.path.join(args.out, name))
            trial_index += 1
            count += 1
    log(f"generate: wrote {count} trajectories to {args.out}")
    return 0


def _split_ids(args, trajs):
    ids = sorted({t.participant_id for t in trajs})
    if args.split:
        with open(args.split, encoding="utf-8") as f:
            return ds.SplitSpec.from_json(json.load(f))
    if args.train_ids or args.test_ids:
        train = [int(i) for i in args.train_ids.split(",")] if args.train_ids else []
        test = [int(i) for i in args.test_ids.split(",")] if args.test_ids else []
        if not train:
            train = [i for i in ids if i not in set(test)]
        if not test:
            test = [i for i in ids if i not in set(train)]
        return ds.SplitSpec(frozenset(train), frozenset(test))
    # default 18/25 proportion: first 72% of participants train, rest test
    cut = max(1, round(len(ids) * 18 / 25))
    if cut == len(ids):
        cut = len(ids) - 1 if len(ids) > 1 else len(ids)
    return ds.SplitSpec(frozenset(ids[:cut]), frozenset(ids[cut:]))


def cmd_train(args):
    trajs = _load_dir(args.data)
    spec = _split_ids(args, trajs)
    train, test = ds.split(trajs, spec)
    hidden = tuple(int(h) for h in args.hidden.split(",")) if args.hidden else (8,)
    config = TrainConfig(
        family=args.family,
        hidden=hidden,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        lstm_input=args.lstm_input,
        vector_iterations=args.vector_iterations,
        vector_learning_rate=args.vector_lr,
        name=args.name,
    )
    controller, report = fit(config, train, test)
    save_controller(controller, args.out, extra_config=asdict(config))
    payload = report.to_json()
    payload["split"] = spec.to_json()
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    else:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    log(
        f"train: {controller.name} train_mse={report.train_mse[-1]:.3e}"
        + (f" test_mse={report.test_mse:.3e}" if report.test_mse is not None else "")
    )
    return 0


def _write_rows_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["controller", "task", "trajectory", "mse", "steps", "faulted"])
        for r in rows:
            writer.writerow([r.controller, r.task, r.trajectory, repr(r.mse), r.steps, int(r.faulted)])


def cmd_rollout(args):
    controller = load_controller(args.controller)
    trajs = _load_dir(args.data)
    config = RolloutConfig(
        noise_sigma_deg=args.noise, seed=args.seed, duration_cap_s=args.duration_cap
    )
    rows = []
    steps_rows = []
    for index, traj in enumerate(trajs):
        result = rollout(controller, traj, config)
        label = trajectory_label(traj, index)
        rows.append(
            EvalRow(controller.name, result.task, label, result.mse, len(result.step_errors), result.faulted)
        )
        if args.steps_csv:
            for step, err in enumerate(result.step_errors):
                steps_rows.append((controller.name, result.task, label, step, err))
    table = EvalTable(rows=rows, noise_sigma_deg=config.noise_sigma_deg, seed=config.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(table.to_json(), f, indent=2)
        f.write("\n")
    if args.steps_csv:
        with open(args.steps_csv, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["controller", "task", "trajectory", "step", "squared_error"])
            for row in steps_rows:
                writer.writerow([*row[:4], repr(float(row[4]))])
    overall = table.aggregate()[controller.name]["overall"]["mse"]
    log(f"rollout: {controller.name} over {len(trajs)} trajectories, overall mse={overall:.4f}")
    return 0


def _rollout_job(job):
    name, controller, traj, config, index = job
    result = rollout(controller, traj, config)
    return EvalRow(
        name, result.task, trajectory_label(traj, index), result.mse,
        len(result.step_errors), result.faulted,
    )


def cmd_evaluate(args):
    controllers = {}
    for path in args.controllers:
        controller = load_controller(path)
        if controller.name in controllers:
            raise ValueError(f"duplicate controller name {controller.name!r}")
        controllers[controller.name] = controller
    trajs = _load_dir(args.data)
    config = RolloutConfig(noise_sigma_deg=args.noise, seed=args.seed)
    if args.jobs > 1:
        jobs = [
            (name, controller, traj, config, index)
            for name, controller in controllers.items()
            for index, traj in enumerate(trajs)
        ]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_rollout_job, jobs))
        table = EvalTable(rows=rows, noise_sigma_deg=config.noise_sigma_deg, seed=config.seed)
    else:
        table = evaluate_suite(controllers, trajs, config)
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(table.to_json(), f, indent=2)
        f.write("\n")
    if args.csv:
        _write_rows_csv(args.csv, table.rows)
    for name, cells in table.aggregate().items():
        log(f"evaluate: {name} overall mse={cells['overall']['mse']:.4f}")
    return 0


def _synthetic_gaze(n, seed, rate_hz=200.0):
    """Seeded fixate-and-jump gaze pattern with sensor jitter, degrees."""
    rng = np.random.default_rng([int(seed), 424242])
    out = np.empty((n, 2))
    target = np.zeros(2)
    hold = 0
    for i in range(n):
        if hold == 0:
            target = rng.uniform((-20, -35), (20, 35))
            hold = rng.integers(int(0.3 * rate_hz), int(2.0 * rate_hz))
        out[i] = target + rng.normal(0, 0.8, 2)
        hold -= 1
    return out


def cmd_exosim(args):
    controller = load_controller(args.controller)
    limits = ExoLimits(
        flexion_max=args.flexion_max,
        extension_max=args.extension_max,
        yaw_limit=args.yaw_limit,
        max_speed=args.max_speed,
    )
    if args.gaze:
        stream = []
        with open(args.gaze, newline="", encoding="utf-8") as f:
            for row in csv.reader(f):
                if not row or row[0].startswith("t"):
                    continue
                vals = [float(v) for v in row]
                stream.append((vals[-2], vals[-1]))
    else:
        stream = [(float(p), float(y)) for p, y in _synthetic_gaze(args.ticks * 4, args.seed)]
    sim = ExoSim(controller, limits=limits, alpha=args.alpha)
    pose_log = sim.run(stream)
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "pitch_deg", "yaw_deg", "pitch_saturated", "yaw_saturated"])
        for t, pitch, yaw, psat, ysat in pose_log:
            writer.writerow([repr(t), repr(pitch), repr(yaw), int(psat), int(ysat)])
    log(f"exosim: {len(pose_log)} ticks, final pose=({pose_log[-1][1]:.2f}, {pose_log[-1][2]:.2f}) deg")
    return 0


def cmd_report(args):
    rows = []
    bad = []
    for path in args.results:
        try:
            with open(path, encoding="utf-8") as f:
                payload = json.load(f)
            for r in payload["trajectories"]:
                rows.append(
                    EvalRow(r["controller"], r["task"], r["trajectory"], r["mse"], r["steps"], r.get("faulted", False))
                )
        except (OSError, ValueError, KeyError) as exc:
            bad.append((path, str(exc)))
    for path, reason in bad:
        log(f"report: skipping {path}: {reason}")
    if not rows:
        log("report: no usable results")
        return 1
    os.makedirs(args.out, exist_ok=True)
    table = EvalTable(rows=rows)
    summary_path = os.path.join(args.out, "summary.csv")
    with open(summary_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["controller", "task", "mse", "steps"])
        for controller, cells in table.aggregate().items():
            for task, cell in cells.items():
                writer.writerow([controller, task, repr(cell["mse"]), cell["steps"]])
    _write_rows_csv(os.path.join(args.out, "distribution.csv"), rows)
    log(f"report: wrote summary.csv and distribution.csv to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gazehead",
        description="Gaze-driven head-movement controllers: data, training, rollout evaluation, robot-loop simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize task trajectories")
    p.add_argument("--task", choices=TASK_CHOICES, default="all")
    p.add_argument("--participants", type=int, required=True)
    p.add_argument("--trials-per-task", type=int, default=0,
                   help="default keeps 12 trials per participant split across the selected tasks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=90.0, help="seconds per trial (default 90)")
    p.add_argument("--rate", type=float, default=90.0, help="samples per second (default 90)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a controller on trajectory data")
    p.add_argument("--family", choices=["quadrant", "vector", "mlp", "lstm"], required=True)
    p.add_argument("--hidden", default="", help="comma-separated hidden sizes (mlp) or H (lstm); default 8")
    p.add_argument("--data", required=True)
    p.add_argument("--split", help="JSON file with train/test participant ids")
    p.add_argument("--train-ids", default="", help="comma-separated participant ids")
    p.add_argument("--test-ids", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lstm-input", type=int, default=9, choices=[6, 9])
    p.add_argument("--vector-iterations", type=int, default=3000)
    p.add_argument("--vector-lr", type=float, default=0.05)
    p.add_argument("--name", default=None)
    p.add_argument("--out", required=True, help="controller config JSON path")
    p.add_argument("--report", help="write the training report JSON here instead of stdout")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rollout", help="closed-loop evaluation of one controller")
    p.add_argument("--controller", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.5, help="gaze noise sigma in degrees")
    p.add_argument("--duration-cap", type=float, default=None)
    p.add_argument("--out", required=True, help="result JSON path")
    p.add_argument("--steps-csv", help="optional per-step squared-error CSV")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("evaluate", help="closed-loop MSE table for several controllers")
    p.add_argument("--controllers", nargs="+", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="table JSON path")
    p.add_argument("--csv", help="optional per-trajectory CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("exosim", help="run a controller through the robot control loop")
    p.add_argument("--controller", required=True)
    p.add_argument("--gaze", help="CSV of gaze angles at 200 Hz; default: synthetic stream")
    p.add_argument("--ticks", type=int, default=500, help="synthetic stream length in 50 Hz ticks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flexion-max", type=float, default=25.0, help="forward pitch limit, deg")
    p.add_argument("--extension-max", type=float, default=-3.0, help="backward pitch limit, deg")
    p.add_argument("--yaw-limit", type=float, default=30.0, help="side-to-side limit, deg")
    p.add_argument("--max-speed", type=float, default=1.0, help="rad/s")
    p.add_argument("--alpha", type=float, default=0.1, help="EMA smoothing factor")
    p.add_argument("--out", required=True, help="pose log CSV path")
    p.set_defaults(func=cmd_exosim)

    p = sub.add_parser("report", help="summarize evaluation results")
    p.add_argument("--results", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # runtime failure -> exit 1 with diagnostic
        log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
