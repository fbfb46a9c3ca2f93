"""Autoregressive (closed-loop) evaluation of a controller on a recorded
trajectory.

The recorded binocular gaze is first reduced to one focal point per
sample. During the rollout a virtual head starts at the recorded initial
orientation and is rotated only by the controller; each step the virtual
eyes are aimed at the recorded focal point (plus angular noise), the gaze
is expressed in the virtual head's frame, and the controller's command is
applied. The error at each step is the squared Euclidean distance between
the virtual and recorded head direction vectors, so per-step error lies in
[0, 4].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controllers import Controller
from .dataset import TASK_ORDER, Trajectory
from .geometry import HeadOrientation, Ray, focal_point, rotate_head, vec3


@dataclass
class RolloutConfig:
    noise_sigma_deg: float = 0.5  # angular std of per-eye gaze perturbation
    seed: int = 0
    stateful_every: int = 2  # tick divisor for half-rate (LSTM) controllers
    duration_cap_s: float | None = None
    eye_offset: float = 0.03  # m, half interpupillary distance

    def __post_init__(self):
        if self.noise_sigma_deg < 0:
            raise ValueError("noise sigma must be nonnegative")


@dataclass
class RolloutResult:
    imputed: np.ndarray  # (T, 3) virtual head directions
    truth: np.ndarray  # (T, 3) recorded head directions
    step_errors: np.ndarray  # (T,)
    mse: float
    task: str
    faulted: bool = False


def precompute_focal_points(traj: Trajectory) -> np.ndarray:
    """One focal point per sample from the recorded world-frame eye rays.

    Samples with parallel gaze inherit the previous focal point; a
    degenerate first sample is an error. Expects a blink-repaired
    trajectory.
    """
    points = np.empty((len(traj.samples), 3))
    for i, s in enumerate(traj.samples):
        fp = focal_point(Ray(s.left_origin, s.left_dir), Ray(s.right_origin, s.right_dir))
        if fp.degenerate:
            if i == 0:
                raise ValueError("first sample has parallel gaze; no focal point")
            points[i] = points[i - 1]
        else:
            points[i] = fp.point
    return points


def _perturb(direction, sigma_rad, rng):
    """Rotate by |N(0, sigma)| about a random axis perpendicular to the
    direction (Rodrigues, with the parallel term dropped)."""
    angle = abs(rng.normal(0.0, sigma_rad))
    while True:
        raw = rng.normal(size=3)
        axis = np.cross(direction, raw)
        n = np.linalg.norm(axis)
        if n > 1e-9:
            axis /= n
            break
    return direction * math.cos(angle) + np.cross(axis, direction) * math.sin(angle)


def _rollout_rng(config: RolloutConfig, traj: Trajectory):
    return np.random.default_rng(
        [int(config.seed), int(traj.participant_id), TASK_ORDER.index(traj.task)]
    )


def rollout(controller: Controller, traj: Trajectory, config: RolloutConfig) -> RolloutResult:
    """Closed-loop simulation of one trial; deterministic for a given seed."""
    focal = precompute_focal_points(traj)
    rng = _rollout_rng(config, traj)
    sigma = math.radians(config.noise_sigma_deg)
    dt = 1.0 / traj.rate_hz
    every = config.stateful_every if controller.stateful else 1
    n = len(traj.samples)
    if config.duration_cap_s is not None:
        n = min(n, int(config.duration_cap_s * traj.rate_hz))

    controller.reset()
    head = HeadOrientation.from_forward(traj.samples[0].head_dir)
    left_local = vec3(-config.eye_offset, 0.0, 0.0)
    right_local = vec3(config.eye_offset, 0.0, 0.0)
    imputed = np.empty((n, 3))
    truth = np.empty((n, 3))
    errors = np.empty(n)
    faulted = False
    for t in range(n):
        forward = head.forward
        imputed[t] = forward
        truth[t] = traj.samples[t].head_dir
        diff = forward - traj.samples[t].head_dir
        errors[t] = float(diff @ diff)
        if t == n - 1:
            break
        rot = head.rotation()
        head_pos = traj.samples[t].head_pos
        dpitch, dyaw = 0.0, 0.0
        if t % every == 0:
            left_origin = head_pos + rot @ left_local
            right_origin = head_pos + rot @ right_local
            left_dir = focal[t] - left_origin
            right_dir = focal[t] - right_origin
            left_dir = left_dir / np.linalg.norm(left_dir)
            right_dir = right_dir / np.linalg.norm(right_dir)
            if sigma > 0.0:
                left_dir = _perturb(left_dir, sigma, rng)
                right_dir = _perturb(right_dir, sigma, rng)
            dpitch, dyaw = controller.step(rot.T @ left_dir, rot.T @ right_dir, forward, dt * every)
            if controller.faulted:
                faulted = True
        head = rotate_head(head, dpitch, dyaw)
    return RolloutResult(
        imputed=imputed,
        truth=truth,
        step_errors=errors,
        mse=float(np.mean(errors)),
        task=traj.task.value,
        faulted=faulted,
    )


@dataclass
class EvalRow:
    controller: str
    task: str
    trajectory: str
    mse: float
    steps: int
    faulted: bool


@dataclass
class EvalTable:
    """Per-(controller, task) aggregate MSE plus the per-trajectory rows.

    Aggregates average the per-step errors over all steps of all
    trajectories in the cell.
    """

    rows: list = field(default_factory=list)
    noise_sigma_deg: float = 0.5
    seed: int = 0

    def aggregate(self):
        cells = {}
        for row in self.rows:
            for key in ((row.controller, row.task), (row.controller, "overall")):
                total, steps = cells.get(key, (0.0, 0))
                cells[key] = (total + row.mse * row.steps, steps + row.steps)
        out = {}
        for (controller, task), (total, steps) in sorted(cells.items()):
            out.setdefault(controller, {})[task] = {"mse": total / steps, "steps": steps}
        return out

    def to_json(self):
        return {
            "noise_sigma_deg": self.noise_sigma_deg,
            "seed": self.seed,
            "aggregate": self.aggregate(),
            "trajectories": [
                {
                    "controller": r.controller,
                    "task": r.task,
                    "trajectory": r.trajectory,
                    "mse": r.mse,
                    "steps": r.steps,
                    "faulted": r.faulted,
                }
                for r in self.rows
            ],
        }


def trajectory_label(traj: Trajectory, index: int) -> str:
    return f"p{traj.participant_id:03d}-{traj.task.value}-{index:02d}"


def evaluate_suite(controllers, trajs, config: RolloutConfig) -> EvalTable:
    """Roll every controller over every trajectory.

    ``controllers`` maps name -> Controller. Controller state is reset per
    rollout; the noise stream depends only on (seed, trajectory), not on
    the controller order.
    """
    if not controllers or not trajs:
        raise ValueError("need at least one controller and one trajectory")
    table = EvalTable(noise_sigma_deg=config.noise_sigma_deg, seed=config.seed)
    for name, controller in controllers.items():
        for index, traj in enumerate(trajs):
            result = rollout(controller, traj, config)
            table.rows.append(
                EvalRow(
                    controller=name,
                    task=result.task,
                    trajectory=trajectory_label(traj, index),
                    mse=result.mse,
                    steps=len(result.step_errors),
                    faulted=result.faulted,
                )
            )
    return table
