"""Teacher-forced fitting of the vector, MLP, and LSTM controllers.

Targets are the per-step head angle deltas (radians) extracted from
consecutive head directions. The loss everywhere is the mean over steps
and both components of the squared residual, so a residual (p, q) counts
(p^2 + q^2) / 2. Inputs are always ground truth; predictions never feed
back into the input stream.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .controllers import (
    Controller,
    LstmController,
    MlpController,
    QuadrantController,
    VectorAxisParams,
    VectorController,
    VectorParams,
    control_law,
    quadrant_step,
    symmetric_control_law,
)
from .dataset import Trajectory, downsample
from .nn import AdamState, DenseNet, LstmNet, adam_step


def _angles_of(dirs):
    """Vectorized dir_to_pitch_yaw over an (N, 3) array, in radians."""
    pitch = np.arcsin(np.clip(dirs[:, 1], -1.0, 1.0))
    yaw = np.arctan2(dirs[:, 0], dirs[:, 2])
    return pitch, yaw


def head_deltas(traj: Trajectory):
    """(T-1, 2) per-step (dpitch, dyaw) in radians from head directions."""
    dirs = np.array([s.head_dir for s in traj.samples])
    pitch, yaw = _angles_of(dirs)
    return np.column_stack([np.diff(pitch), np.diff(yaw)])


def _to_head_frame(dirs, sp, cp, sy, cy):
    """Apply the transpose of the roll-free head rotation, vectorized."""
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    return np.column_stack(
        [
            cy * dx - sy * dz,
            -sy * sp * dx + cp * dy - cy * sp * dz,
            sy * cp * dx + sp * dy + cy * cp * dz,
        ]
    )


def net_inputs(traj: Trajectory):
    """(T-1, 9) network inputs: head-relative left/right gaze directions
    plus the world-frame head direction."""
    head = np.array([s.head_dir for s in traj.samples[:-1]])
    left = np.array([s.left_dir for s in traj.samples[:-1]])
    right = np.array([s.right_dir for s in traj.samples[:-1]])
    pitch = np.arcsin(np.clip(head[:, 1], -1.0, 1.0))
    yaw = np.arctan2(head[:, 0], head[:, 2])
    sp, cp = np.sin(pitch), np.cos(pitch)
    sy, cy = np.sin(yaw), np.cos(yaw)
    return np.concatenate(
        [_to_head_frame(left, sp, cp, sy, cy), _to_head_frame(right, sp, cp, sy, cy), head],
        axis=1,
    )


def _combined_inputs(x9):
    """Collapse a 9-vector input batch to (combined gaze, head) 6-vectors."""
    combined = x9[:, 0:3] + x9[:, 3:6]
    combined /= np.linalg.norm(combined, axis=1, keepdims=True)
    return np.concatenate([combined, x9[:, 6:9]], axis=1)


def gaze_angle_inputs(traj: Trajectory):
    """(T-1, 2) head-relative combined-gaze (pitch, yaw) in degrees."""
    x = net_inputs(traj)
    combined = x[:, 0:3] + x[:, 3:6]
    combined /= np.linalg.norm(combined, axis=1, keepdims=True)
    pitch, yaw = _angles_of(combined)
    return np.degrees(np.column_stack([pitch, yaw]))


class ZeroController(Controller):
    """Baseline that never moves the head."""

    family = "zero"

    def step(self, left_dir, right_dir, head_dir, dt):
        return 0.0, 0.0


def predicted_deltas(controller: Controller, traj: Trajectory):
    """(T-1, 2) teacher-forced per-step commands in radians.

    Inputs come solely from the trajectory (precomputed before stepping),
    so a prediction can never leak into the next input.
    """
    dt = 1.0 / traj.rate_hz
    if isinstance(controller, ZeroController):
        return np.zeros((len(traj.samples) - 1, 2))
    if isinstance(controller, QuadrantController):
        angles = gaze_angle_inputs(traj)
        out = np.array(
            [quadrant_step(controller.params, p, y, dt) for p, y in angles]
        )
        return np.radians(out)
    if isinstance(controller, VectorController):
        angles = gaze_angle_inputs(traj)
        law = symmetric_control_law if controller.params.symmetric else control_law
        pred = np.empty_like(angles)
        for i, (p, y) in enumerate(angles):
            pred[i, 0] = law(controller.params.pitch, p)
            pred[i, 1] = law(controller.params.yaw, y)
        return np.radians(pred * dt)
    if isinstance(controller, MlpController):
        x = net_inputs(traj)
        return controller.net.forward_batch(x) * (dt * controller.train_rate_hz)
    if isinstance(controller, LstmController):
        x = net_inputs(traj)
        if controller.net.input_size == 6:
            x = _combined_inputs(x)
        controller.reset()
        scale = dt * controller.train_rate_hz
        pred = np.empty((x.shape[0], 2))
        state = controller.state
        for i in range(x.shape[0]):
            y, state = controller.net.step(state, x[i])
            pred[i] = y * scale
        return pred
    raise TypeError(f"cannot evaluate controller {type(controller).__name__}")


def teacher_forced_loss(controller: Controller, traj: Trajectory) -> float:
    """Teacher-forced MSE (radians^2) of a controller on one trajectory."""
    if len(traj.samples) < 2:
        raise ValueError("trajectory shorter than 2 samples")
    pred = predicted_deltas(controller, traj)
    return float(np.mean((pred - head_deltas(traj)) ** 2))


def dataset_loss(controller: Controller, trajs) -> float:
    """Step-weighted mean teacher-forced MSE over a trajectory list."""
    total = 0.0
    steps = 0
    for traj in trajs:
        pred = predicted_deltas(controller, traj)
        resid = pred - head_deltas(traj)
        total += float(np.sum(resid**2))
        steps += resid.size
    return total / steps


@dataclass
class TrainConfig:
    family: str = "mlp"  # quadrant | vector | mlp | lstm
    hidden: tuple = (8,)  # mlp hidden sizes, or (H,) for lstm
    learning_rate: float = 1e-3
    epochs: int = 50
    seed: int = 0
    lstm_downsample: int = 2
    lstm_input: int = 9
    vector_iterations: int = 3000
    vector_learning_rate: float = 0.05
    name: str | None = None

    def resolved_name(self):
        if self.name:
            return self.name
        if self.family == "mlp":
            return "mlp-" + "_".join(str(h) for h in self.hidden)
        if self.family == "lstm":
            return f"lstm-h{self.hidden[0]}"
        return self.family


@dataclass
class TrainReport:
    config: dict
    train_mse: list = field(default_factory=list)
    test_mse: float | None = None
    zero_baseline_test_mse: float | None = None
    wall_time_s: float = 0.0
    epochs_run: int = 0
    trajectory_lengths: list = field(default_factory=list)

    def to_json(self):
        return asdict(self)


def _early_stop(history, window=5, threshold=1e-8):
    """True when the best epoch loss has not improved by at least
    ``threshold`` over the last ``window`` epochs."""
    if len(history) <= window:
        return False
    return min(history[:-window]) - min(history[-window:]) < threshold


def _fit_net(config: TrainConfig, trajs, build_net, prep):
    """Adam over full-trajectory batches on RMS-normalized targets.

    Training on targets scaled to unit RMS keeps the residuals on the same
    footing as the freshly initialized outputs; afterwards the scale is
    folded back into the linear output head, so the returned net emits raw
    per-tick deltas. Reported losses are converted back to radians^2.
    """
    net = build_net()
    params = net.params()
    state = AdamState(learning_rate=config.learning_rate)
    prepared = [prep(t) for t in trajs]
    lengths = [x.shape[0] + 1 for x, _ in prepared]
    rms = math.sqrt(float(np.mean(np.concatenate([d for _, d in prepared]) ** 2)))
    scale = 1.0 / rms if rms > 0 else 1.0
    report_losses = []
    for _ in range(config.epochs):
        epoch_losses = []
        for x, d in prepared:
            loss, grads = net.sequence_loss_grads(x, d * scale)
            epoch_losses.append(loss)
            params, state = adam_step(params, grads, state)
            net.set_params(params)
        report_losses.append(float(np.mean(epoch_losses)) / scale**2)
        if _early_stop(report_losses):
            break
    if net.kind == "dense":
        net.weights[-1] = net.weights[-1] / scale
        net.biases[-1] = net.biases[-1] / scale
    else:
        net.w_out = net.w_out / scale
        net.b_out = net.b_out / scale
    return net, report_losses, lengths


def fit_vector_axis(x_deg, target_rad, dt, iterations=3000, learning_rate=0.05):
    """Fit one (v, a, b, c) quadruple by full-batch Adam on the symmetric
    law. ``a`` is optimized as exp(alpha) so it stays positive.

    The analytic gradient treats u = |x - c| with sign s: for
    h = s*v*u / D, D = 1 + exp(a*(b - u)),
      dh/dv = s*u/D
      dh/da = -s*v*u*E*(b-u)/D^2
      dh/db = -s*v*u*E*a/D^2
      dh/dc = -v*(1/D + u*a*E/D^2)
    with E = exp(a*(b - u)).
    """
    x = np.asarray(x_deg, dtype=float)
    d = np.asarray(target_rad, dtype=float)
    k = dt * math.pi / 180.0  # deg/s -> radians per step
    params = {
        "v": np.array([1.0]),
        "alpha": np.array([math.log(0.5)]),
        "b": np.array([8.0]),
        "c": np.array([0.0]),
    }
    state = AdamState(learning_rate=learning_rate)
    for _ in range(iterations):
        v = params["v"][0]
        a = math.exp(params["alpha"][0])
        b = params["b"][0]
        c = params["c"][0]
        u = np.abs(x - c)
        s = np.sign(x - c)
        t = np.clip(a * (b - u), -700.0, 700.0)
        e = np.exp(t)
        dd = 1.0 + e
        h = s * v * u / dd
        resid = k * h - d
        coeff = 2.0 * k * resid / resid.size
        dh_dv = s * u / dd
        dh_da = -s * v * u * e * (b - u) / dd**2
        dh_db = -s * v * u * e * a / dd**2
        dh_dc = -v * (1.0 / dd + u * a * e / dd**2)
        grads = {
            "v": np.array([float(np.sum(coeff * dh_dv))]),
            "alpha": np.array([float(np.sum(coeff * dh_da)) * a]),
            "b": np.array([float(np.sum(coeff * dh_db))]),
            "c": np.array([float(np.sum(coeff * dh_dc))]),
        }
        params, state = adam_step(params, grads, state)
    return VectorAxisParams(
        v=float(params["v"][0]),
        a=float(math.exp(params["alpha"][0])),
        b=float(params["b"][0]),
        c=float(params["c"][0]),
    )


def fit_vector_params(trajs, iterations=3000, learning_rate=0.05) -> VectorParams:
    """Fit independent pitch/yaw quadruples on pooled trajectory data."""
    xs = []
    ds = []
    dt = 1.0 / trajs[0].rate_hz
    for traj in trajs:
        xs.append(gaze_angle_inputs(traj))
        ds.append(head_deltas(traj))
    x = np.concatenate(xs)
    d = np.concatenate(ds)
    pitch = fit_vector_axis(x[:, 0], d[:, 0], dt, iterations, learning_rate)
    yaw = fit_vector_axis(x[:, 1], d[:, 1], dt, iterations, learning_rate)
    return VectorParams(pitch=pitch, yaw=yaw, symmetric=True)


def fit(config: TrainConfig, train_trajs, test_trajs=()):
    """Train one controller; returns (controller, TrainReport).

    Deterministic for a given config seed. LSTM training consumes the
    trajectories downsampled by config.lstm_downsample.
    """
    if not train_trajs:
        raise ValueError("empty training set")
    t0 = time.perf_counter()
    name = config.resolved_name()
    report = TrainReport(config=asdict(config))

    if config.family == "quadrant":
        # nothing to optimize; the report still carries its teacher-forced loss
        controller = QuadrantController(name=name)
        report.train_mse = [dataset_loss(controller, train_trajs)]
        report.trajectory_lengths = [len(t) for t in train_trajs]
    elif config.family == "vector":
        params = fit_vector_params(
            train_trajs, config.vector_iterations, config.vector_learning_rate
        )
        controller = VectorController(params, name=name)
        report.train_mse = [dataset_loss(controller, train_trajs)]
        report.trajectory_lengths = [len(t) for t in train_trajs]
    elif config.family == "mlp":
        # network output is the per-tick delta at the data rate, so the
        # targets are the raw per-step deltas
        def prep(traj):
            return net_inputs(traj), head_deltas(traj)

        net, losses, lengths = _fit_net(
            config,
            train_trajs,
            lambda: DenseNet([9, *config.hidden, 2], seed=config.seed),
            prep,
        )
        controller = MlpController(net, train_rate_hz=train_trajs[0].rate_hz, name=name)
        report.train_mse = losses
        report.trajectory_lengths = lengths
    elif config.family == "lstm":
        slow = [downsample(t, config.lstm_downsample) for t in train_trajs]
        rate = slow[0].rate_hz

        def prep(traj):
            x = net_inputs(traj)
            if config.lstm_input == 6:
                x = _combined_inputs(x)
            return x, head_deltas(traj)

        hidden = config.hidden[0]
        net, losses, lengths = _fit_net(
            config,
            slow,
            lambda: LstmNet(config.lstm_input, hidden, seed=config.seed),
            prep,
        )
        controller = LstmController(net, train_rate_hz=rate, name=name)
        report.train_mse = losses
        report.trajectory_lengths = lengths
    else:
        raise ValueError(f"unknown family {config.family!r}")

    report.epochs_run = len(report.train_mse)
    if not all(np.isfinite(report.train_mse)):
        bad = next(i for i, v in enumerate(report.train_mse) if not np.isfinite(v))
        raise FloatingPointError(f"training diverged at epoch {bad}")
    if test_trajs:
        eval_set = (
            [downsample(t, config.lstm_downsample) for t in test_trajs]
            if config.family == "lstm"
            else list(test_trajs)
        )
        report.test_mse = dataset_loss(controller, eval_set)
        report.zero_baseline_test_mse = dataset_loss(ZeroController(), eval_set)
    report.wall_time_s = time.perf_counter() - t0
    return controller, report
