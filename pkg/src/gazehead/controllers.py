"""Gaze-to-head-motion controllers behind one stepping interface.

Every controller maps head-relative gaze (left/right eye unit directions)
plus the world-frame head direction to a per-tick (delta pitch, delta yaw)
command in radians. Four families:

- quadrant: axis-aligned constant-speed motion outside a circular deadzone.
- vector: a per-axis sigmoid-gated velocity law with a soft deadzone.
- mlp: dense network emitting per-tick angle deltas.
- lstm: recurrent network, stateful across a rollout, run at half rate.

The angle-level laws (quadrant_step, vector_step, control_law) work in
degrees and degrees/second; the Controller classes convert to radians.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .geometry import dir_to_pitch_yaw, normalize
from .nn import DenseNet, LstmNet, LstmState, dense_forward, load_checkpoint, lstm_step, save_checkpoint

_EXP_MAX = 700.0  # exp() overflow guard; beyond this the law is exactly 0


@dataclass
class QuadrantParams:
    deadzone_diameter: float = 10.0  # degrees
    speed: float = 20.0  # degrees/second

    def __post_init__(self):
        if self.deadzone_diameter <= 0 or self.speed <= 0:
            raise ValueError("quadrant parameters must be positive")


@dataclass
class VectorAxisParams:
    """One (v, a, b, c) quadruple of the sigmoid-gated velocity law."""

    v: float  # linear asymptote slope, (deg/s) per deg
    a: float  # inflection sharpness, 1/deg; must be > 0
    b: float  # inflection offset from c, deg
    c: float  # shift of the whole law, deg

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("sharpness a must be positive")


@dataclass
class VectorParams:
    pitch: VectorAxisParams
    yaw: VectorAxisParams
    symmetric: bool = True


def control_law(p: VectorAxisParams, x: float) -> float:
    """Velocity (deg/s) at gaze angle x (deg): v*(x-c) gated by a sigmoid.

    The sigmoid switches on around x = c + b with sharpness a, which makes
    a soft deadzone near c and a linear asymptote v*(x-c) far from it.
    """
    u = x - p.c
    t = p.a * (-u + p.b)
    if t > _EXP_MAX:
        return 0.0
    return p.v * u / (1.0 + math.exp(t))


def symmetric_control_law(p: VectorAxisParams, x: float) -> float:
    """control_law applied to |x-c| with the sign of x-c restored, so one
    quadruple covers both gaze directions."""
    u = x - p.c
    if u == 0.0:
        return 0.0
    return math.copysign(1.0, u) * control_law(p, p.c + abs(u))


def vector_step(params: VectorParams, gaze_pitch: float, gaze_yaw: float, dt: float):
    """Per-axis law outputs times dt; angles in degrees, returns degrees."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    law = symmetric_control_law if params.symmetric else control_law
    return law(params.pitch, gaze_pitch) * dt, law(params.yaw, gaze_yaw) * dt


def quadrant_step(params: QuadrantParams, gaze_pitch: float, gaze_yaw: float, dt: float):
    """Constant-speed motion along the dominant gaze axis, in degrees.

    Inside the circular deadzone the command is exactly (0, 0); outside it
    only one axis moves (ties go to yaw), so diagonal targets are reached
    in a zig-zag.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    radius = params.deadzone_diameter / 2.0
    if math.hypot(gaze_pitch, gaze_yaw) <= radius:
        return 0.0, 0.0
    step = params.speed * dt
    if abs(gaze_pitch) > abs(gaze_yaw):
        return math.copysign(step, gaze_pitch), 0.0
    return 0.0, math.copysign(step, gaze_yaw)


def combined_gaze_angles(left_dir, right_dir):
    """Head-relative (pitch, yaw) in degrees of the mean gaze direction."""
    pitch, yaw = dir_to_pitch_yaw(normalize(left_dir + right_dir))
    return math.degrees(pitch), math.degrees(yaw)


class Controller:
    """Stepping interface shared by all families.

    step() takes head-relative left/right gaze unit vectors, the world
    head direction, and the tick duration; it returns (dpitch, dyaw) in
    radians. ``faulted`` latches when a non-finite command was replaced by
    (0, 0).
    """

    family = "base"
    stateful = False

    def __init__(self, name=None):
        self.name = name or self.family
        self.faulted = False

    def reset(self):
        self.faulted = False

    def step(self, left_dir, right_dir, head_dir, dt):
        raise NotImplementedError

    def _guard(self, dpitch, dyaw):
        if not (math.isfinite(dpitch) and math.isfinite(dyaw)):
            self.faulted = True
            return 0.0, 0.0
        return dpitch, dyaw


class QuadrantController(Controller):
    family = "quadrant"

    def __init__(self, params: QuadrantParams | None = None, name=None):
        super().__init__(name)
        self.params = params or QuadrantParams()

    def step(self, left_dir, right_dir, head_dir, dt):
        gp, gy = combined_gaze_angles(left_dir, right_dir)
        dp, dy = quadrant_step(self.params, gp, gy, dt)
        return self._guard(math.radians(dp), math.radians(dy))


class VectorController(Controller):
    family = "vector"

    def __init__(self, params: VectorParams, name=None):
        super().__init__(name)
        self.params = params

    def step(self, left_dir, right_dir, head_dir, dt):
        gp, gy = combined_gaze_angles(left_dir, right_dir)
        dp, dy = vector_step(self.params, gp, gy, dt)
        return self._guard(math.radians(dp), math.radians(dy))


class MlpController(Controller):
    """Dense net over the 9-vector (left, right, head directions).

    The network output is the per-tick delta at ``train_rate_hz``; at other
    tick lengths the delta scales by dt * train_rate_hz.
    """

    family = "mlp"

    def __init__(self, net: DenseNet, train_rate_hz=90.0, name=None):
        super().__init__(name)
        self.net = net
        self.train_rate_hz = float(train_rate_hz)

    def step(self, left_dir, right_dir, head_dir, dt):
        x = np.concatenate([left_dir, right_dir, head_dir])
        out = dense_forward(self.net, x) * (dt * self.train_rate_hz)
        return self._guard(float(out[0]), float(out[1]))


class LstmController(Controller):
    """Recurrent controller; holds hidden/cell state across a rollout.

    Native tick rate is the downsampled 45 Hz; callers run it every second
    sample of a 90 Hz stream.
    """

    family = "lstm"
    stateful = True

    def __init__(self, net: LstmNet, train_rate_hz=45.0, name=None):
        super().__init__(name)
        self.net = net
        self.train_rate_hz = float(train_rate_hz)
        self.state = LstmState.zeros(net.hidden_size)

    def reset(self):
        super().reset()
        self.state = LstmState.zeros(self.net.hidden_size)

    def step(self, left_dir, right_dir, head_dir, dt):
        x = np.concatenate([left_dir, right_dir, head_dir])
        if self.net.input_size == 6:
            x = np.concatenate([normalize(left_dir + right_dir), head_dir])
        out, state = lstm_step(self.net, self.state, x)
        out = out * (dt * self.train_rate_hz)
        dp, dy = self._guard(float(out[0]), float(out[1]))
        if not self.faulted:
            self.state = state
        return dp, dy


def _axis_to_dict(p: VectorAxisParams):
    return {"v": p.v, "a": p.a, "b": p.b, "c": p.c}


def save_controller(controller: Controller, path, checkpoint_path=None, extra_config=None):
    """Write the controller config JSON; net-backed families also write a
    checkpoint next to it (referenced by relative path)."""
    path = os.fspath(path)
    config = {"family": controller.family, "name": controller.name}
    if controller.family == "quadrant":
        config["tick_rate_hz"] = 90.0
        config["params"] = {
            "deadzone_diameter": controller.params.deadzone_diameter,
            "speed": controller.params.speed,
        }
    elif controller.family == "vector":
        config["tick_rate_hz"] = 90.0
        config["params"] = {
            "pitch": _axis_to_dict(controller.params.pitch),
            "yaw": _axis_to_dict(controller.params.yaw),
            "symmetric": controller.params.symmetric,
        }
    elif controller.family in ("mlp", "lstm"):
        if checkpoint_path is None:
            checkpoint_path = os.path.splitext(path)[0] + ".ckpt.json"
        save_checkpoint(controller.net, checkpoint_path, train_config=extra_config)
        config["tick_rate_hz"] = controller.train_rate_hz
        config["params"] = {
            "checkpoint": os.path.relpath(checkpoint_path, os.path.dirname(path) or ".")
        }
    else:
        raise ValueError(f"cannot save family {controller.family!r}")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


def load_controller(path) -> Controller:
    """Build a controller from its config JSON."""
    path = os.fspath(path)
    with open(path, encoding="utf-8") as f:
        config = json.load(f)
    family = config["family"]
    name = config.get("name")
    params = config.get("params", {})
    if family == "quadrant":
        return QuadrantController(QuadrantParams(**params), name=name)
    if family == "vector":
        vp = VectorParams(
            pitch=VectorAxisParams(**params["pitch"]),
            yaw=VectorAxisParams(**params["yaw"]),
            symmetric=params.get("symmetric", True),
        )
        return VectorController(vp, name=name)
    if family in ("mlp", "lstm"):
        ckpt = params["checkpoint"]
        if not os.path.isabs(ckpt):
            ckpt = os.path.join(os.path.dirname(path), ckpt)
        net, _ = load_checkpoint(ckpt)
        rate = config.get("tick_rate_hz", 90.0 if family == "mlp" else 45.0)
        if family == "mlp":
            return MlpController(net, train_rate_hz=rate, name=name)
        return LstmController(net, train_rate_hz=rate, name=name)
    raise ValueError(f"unknown controller family {family!r}")
