"""Dense and LSTM primitives with exact analytic gradients, plus Adam.

Small networks, float64 throughout, numpy only. Gradients are for the
sequence objective used everywhere in this package: the mean over all time
steps and both output components of the squared residual, i.e. a residual
vector (p, q) contributes (p^2 + q^2) / 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _init_uniform(rng, shape, fan_in):
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


class DenseNet:
    """Fully connected net, tanh hidden layers, identity output."""

    kind = "dense"

    def __init__(self, sizes, seed=0):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = sizes
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.weights.append(_init_uniform(rng, (fan_out, fan_in), fan_in))
            self.biases.append(_init_uniform(rng, fan_out, fan_in))

    @property
    def input_size(self):
        return self.sizes[0]

    def params(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w
            out[f"b{i}"] = b
        return out

    def set_params(self, params):
        for i in range(len(self.weights)):
            self.weights[i] = np.asarray(params[f"w{i}"], dtype=float).reshape(self.weights[i].shape)
            self.biases[i] = np.asarray(params[f"b{i}"], dtype=float).reshape(self.biases[i].shape)

    def forward_batch(self, x):
        """x: (T, in) -> (T, out)."""
        a = np.asarray(x, dtype=float)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w.T + b
            if i != last:
                a = np.tanh(a)
        return a

    def sequence_loss_grads(self, inputs, targets):
        """Mean-squared-error loss and exact gradients over a sequence.

        inputs: (T, in), targets: (T, out). Returns (loss, grads dict).
        """
        x = np.asarray(inputs, dtype=float)
        d = np.asarray(targets, dtype=float)
        acts = [x]
        last = len(self.weights) - 1
        a = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w.T + b
            if i != last:
                a = np.tanh(a)
            acts.append(a)
        resid = acts[-1] - d
        loss = float(np.mean(resid**2))
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite loss in dense sequence")
        grads = {}
        # d(loss)/d(output) for mean over T steps and `out` components
        dz = resid * (2.0 / resid.size)
        for i in range(last, -1, -1):
            grads[f"w{i}"] = dz.T @ acts[i]
            grads[f"b{i}"] = dz.sum(axis=0)
            if i > 0:
                da = dz @ self.weights[i]
                dz = da * (1.0 - acts[i] ** 2)
        return loss, grads


def dense_forward(net: DenseNet, x) -> np.ndarray:
    """Forward pass for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_size,):
        raise ValueError(f"expected input of shape ({net.input_size},), got {x.shape}")
    return net.forward_batch(x[None, :])[0]


@dataclass
class LstmState:
    hidden: np.ndarray
    cell: np.ndarray

    @classmethod
    def zeros(cls, hidden_size):
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


class LstmNet:
    """Single-layer LSTM with a linear output projection.

    Gate layout in the stacked weight matrix is [input, forget, candidate,
    output]; the candidate uses tanh, the gates sigmoid.
    """

    kind = "lstm"

    def __init__(self, input_size, hidden_size, output_size=2, seed=0):
        self.input_size = int(input_size)
        self.hidden_size = int(hidden_size)
        self.output_size = int(output_size)
        rng = np.random.default_rng(seed)
        fan_in = self.input_size + self.hidden_size
        self.w = _init_uniform(rng, (4 * self.hidden_size, fan_in), fan_in)
        self.b = _init_uniform(rng, 4 * self.hidden_size, fan_in)
        self.w_out = _init_uniform(rng, (self.output_size, self.hidden_size), self.hidden_size)
        self.b_out = _init_uniform(rng, self.output_size, self.hidden_size)

    def params(self):
        return {"w": self.w, "b": self.b, "w_out": self.w_out, "b_out": self.b_out}

    def set_params(self, params):
        self.w = np.asarray(params["w"], dtype=float).reshape(self.w.shape)
        self.b = np.asarray(params["b"], dtype=float).reshape(self.b.shape)
        self.w_out = np.asarray(params["w_out"], dtype=float).reshape(self.w_out.shape)
        self.b_out = np.asarray(params["b_out"], dtype=float).reshape(self.b_out.shape)

    def _gates(self, x, h):
        z = self.w @ np.concatenate([x, h]) + self.b
        hs = self.hidden_size
        i = _sigmoid(z[:hs])
        f = _sigmoid(z[hs : 2 * hs])
        g = np.tanh(z[2 * hs : 3 * hs])
        o = _sigmoid(z[3 * hs :])
        return i, f, g, o

    def step(self, state: LstmState, x):
        x = np.asarray(x, dtype=float)
        i, f, g, o = self._gates(x, state.hidden)
        cell = f * state.cell + i * g
        hidden = o * np.tanh(cell)
        y = self.w_out @ hidden + self.b_out
        return y, LstmState(hidden, cell)

    def sequence_loss_grads(self, inputs, targets):
        """Full-sequence backprop through time from zero initial state.

        The input half of the gate preactivations, the output projection,
        and the weight-gradient accumulation are batched over the whole
        sequence; only the recurrent half runs step by step.
        """
        x = np.asarray(inputs, dtype=float)
        d = np.asarray(targets, dtype=float)
        t_steps = x.shape[0]
        hs = self.hidden_size
        w_x = self.w[:, : self.input_size]
        w_h = self.w[:, self.input_size :]
        zx = x @ w_x.T + self.b  # (T, 4H) input-side preactivations

        gates_i = np.empty((t_steps, hs))
        gates_f = np.empty((t_steps, hs))
        gates_g = np.empty((t_steps, hs))
        gates_o = np.empty((t_steps, hs))
        tanh_cs = np.empty((t_steps, hs))
        hiddens = np.empty((t_steps, hs))
        h_prevs = np.empty((t_steps, hs))
        c_prevs = np.empty((t_steps, hs))
        h = np.zeros(hs)
        c = np.zeros(hs)
        for t in range(t_steps):
            h_prevs[t] = h
            c_prevs[t] = c
            z = zx[t] + w_h @ h
            i = _sigmoid(z[:hs])
            f = _sigmoid(z[hs : 2 * hs])
            g = np.tanh(z[2 * hs : 3 * hs])
            o = _sigmoid(z[3 * hs :])
            c = f * c + i * g
            tanh_c = np.tanh(c)
            h = o * tanh_c
            gates_i[t] = i
            gates_f[t] = f
            gates_g[t] = g
            gates_o[t] = o
            tanh_cs[t] = tanh_c
            hiddens[t] = h
        ys = hiddens @ self.w_out.T + self.b_out
        resid = ys - d
        loss = float(np.mean(resid**2))
        if not np.isfinite(loss):
            raise FloatingPointError("non-finite loss in LSTM sequence")
        dy = resid * (2.0 / resid.size)
        dh_from_y = dy @ self.w_out  # (T, H)

        dz_all = np.empty((t_steps, 4 * hs))
        dh_next = np.zeros(hs)
        dc_next = np.zeros(hs)
        w_h_t = w_h.T
        for t in range(t_steps - 1, -1, -1):
            i, f, g, o = gates_i[t], gates_f[t], gates_g[t], gates_o[t]
            tanh_c = tanh_cs[t]
            dh = dh_from_y[t] + dh_next
            do = dh * tanh_c
            dc = dh * o * (1.0 - tanh_c**2) + dc_next
            dz = dz_all[t]
            dz[:hs] = dc * g * i * (1.0 - i)
            dz[hs : 2 * hs] = dc * c_prevs[t] * f * (1.0 - f)
            dz[2 * hs : 3 * hs] = dc * i * (1.0 - g**2)
            dz[3 * hs :] = do * o * (1.0 - o)
            dc_next = dc * f
            dh_next = w_h_t @ dz
        dw = np.concatenate([dz_all.T @ x, dz_all.T @ h_prevs], axis=1)
        db = dz_all.sum(axis=0)
        dw_out = dy.T @ hiddens
        db_out = dy.sum(axis=0)
        return loss, {"w": dw, "b": db, "w_out": dw_out, "b_out": db_out}


def lstm_step(net: LstmNet, state: LstmState, x):
    """One LSTM cell step; returns (output, new state)."""
    return net.step(state, x)


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators and step counter."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState):
    """Standard Adam update with bias correction.

    Returns (new params dict, state). The state accumulators are updated in
    place; parameter arrays are fresh copies.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    out = {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=float)
        if k not in state.m:
            state.m[k] = np.zeros_like(g)
            state.v[k] = np.zeros_like(g)
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[k] / bc1
        v_hat = state.v[k] / bc2
        out[k] = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return out, state


def gradient_check(net, inputs, targets, h=1e-5):
    """Max relative error of analytic vs central-difference gradients."""
    _, grads = net.sequence_loss_grads(inputs, targets)
    params = net.params()
    worst = 0.0
    for name, arr in params.items():
        flat = arr.ravel()
        gflat = np.asarray(grads[name]).ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up, _ = net.sequence_loss_grads(inputs, targets)
            flat[idx] = orig - h
            down, _ = net.sequence_loss_grads(inputs, targets)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * h)
            denom = max(abs(gflat[idx]) + abs(numeric), 1e-8)
            worst = max(worst, abs(gflat[idx] - numeric) / denom)
    return worst


def save_checkpoint(net, path, train_config=None):
    """JSON checkpoint: architecture, flat row-major parameters, config."""
    if net.kind == "dense":
        arch = {"kind": "dense", "sizes": net.sizes}
    else:
        arch = {
            "kind": "lstm",
            "input_size": net.input_size,
            "hidden_size": net.hidden_size,
            "output_size": net.output_size,
        }
    payload = {
        "architecture": arch,
        "params": {k: np.asarray(v).ravel().tolist() for k, v in net.params().items()},
        "train_config": train_config or {},
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
        f.write("\n")


def load_checkpoint(path):
    """Rebuild a network from a checkpoint file; returns (net, train_config)."""
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    arch = payload["architecture"]
    if arch["kind"] == "dense":
        net = DenseNet(arch["sizes"])
    elif arch["kind"] == "lstm":
        net = LstmNet(arch["input_size"], arch["hidden_size"], arch.get("output_size", 2))
    else:
        raise ValueError(f"unknown checkpoint kind {arch['kind']!r}")
    net.set_params(payload["params"])
    return net, payload.get("train_config", {})
