"""Gaze-driven head-movement control: controllers, training, rollout
evaluation, synthetic eye-head task data, and a neck-robot loop simulator."""

__version__ = "0.1.0"
