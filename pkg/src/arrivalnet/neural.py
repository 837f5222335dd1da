"""Two stacked LSTM layers plus a dense head, with exact BPTT gradients.

Shapes follow ``[batch, steps, channels]``. Gate blocks in every LSTM kernel
are ordered (input, forget, candidate, output), each `hidden` columns wide.
All math is float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

LAYER_NAMES = (
    "lstm1.kernel",
    "lstm1.recurrent",
    "lstm1.bias",
    "lstm2.kernel",
    "lstm2.recurrent",
    "lstm2.bias",
    "dense.kernel",
    "dense.bias",
)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_lstm(n_in: int, hidden: int, rng: np.random.Generator, forget_bias=1.0):
    lim_k = 1.0 / np.sqrt(n_in)
    lim_r = 1.0 / np.sqrt(hidden)
    kernel = rng.uniform(-lim_k, lim_k, size=(n_in, 4 * hidden))
    recurrent = rng.uniform(-lim_r, lim_r, size=(hidden, 4 * hidden))
    bias = np.zeros(4 * hidden)
    bias[hidden : 2 * hidden] = forget_bias
    return kernel, recurrent, bias


def init_params(n_inputs: int, hidden: int, n_outputs: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    k1, r1, b1 = init_lstm(n_inputs, hidden, rng)
    k2, r2, b2 = init_lstm(hidden, hidden, rng)
    lim = 1.0 / np.sqrt(hidden)
    dk = rng.uniform(-lim, lim, size=(hidden, n_outputs))
    values = (k1, r1, b1, k2, r2, b2, dk, np.zeros(n_outputs))
    return dict(zip(LAYER_NAMES, values))


def lstm_step(x, h_prev, c_prev, kernel, recurrent, bias):
    """One LSTM cell update; returns ``(h, c)``."""
    hidden = recurrent.shape[0]
    if kernel.shape[1] != 4 * hidden or x.shape[-1] != kernel.shape[0]:
        raise ValueError("LSTM weight shapes do not match input / hidden size")
    z = x @ kernel + h_prev @ recurrent + bias
    i = sigmoid(z[..., :hidden])
    f = sigmoid(z[..., hidden : 2 * hidden])
    g = np.tanh(z[..., 2 * hidden : 3 * hidden])
    o = sigmoid(z[..., 3 * hidden :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def lstm_forward(x, kernel, recurrent, bias):
    batch, steps, n_in = x.shape
    hidden = recurrent.shape[0]
    if kernel.shape != (n_in, 4 * hidden):
        raise ValueError(f"kernel shape {kernel.shape} does not match input width {n_in}")
    gates = np.empty((steps, batch, 4 * hidden))
    cells = np.empty((steps + 1, batch, hidden))
    hs = np.empty((steps + 1, batch, hidden))
    cells[0] = 0.0
    hs[0] = 0.0
    xt = np.ascontiguousarray(x.transpose(1, 0, 2))
    xz = (xt.reshape(-1, n_in) @ kernel).reshape(steps, batch, -1) + bias
    for t in range(steps):
        z = xz[t] + hs[t] @ recurrent
        a = np.empty_like(z)
        a[:, : 2 * hidden] = sigmoid(z[:, : 2 * hidden])
        a[:, 2 * hidden : 3 * hidden] = np.tanh(z[:, 2 * hidden : 3 * hidden])
        a[:, 3 * hidden :] = sigmoid(z[:, 3 * hidden :])
        gates[t] = a
        cells[t + 1] = a[:, hidden : 2 * hidden] * cells[t] + a[:, :hidden] * a[:, 2 * hidden : 3 * hidden]
        hs[t + 1] = a[:, 3 * hidden :] * np.tanh(cells[t + 1])
    out = hs[1:].transpose(1, 0, 2)
    cache = (xt, kernel, recurrent, gates, cells, hs)
    return out, cache


def lstm_backward(d_out, cache):
    xt, kernel, recurrent, gates, cells, hs = cache
    steps, batch, n_in = xt.shape
    hidden = recurrent.shape[0]
    dz = np.empty((steps, batch, 4 * hidden))
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    d_out = d_out.transpose(1, 0, 2)
    for t in reversed(range(steps)):
        a = gates[t]
        i, f = a[:, :hidden], a[:, hidden : 2 * hidden]
        g, o = a[:, 2 * hidden : 3 * hidden], a[:, 3 * hidden :]
        tc = np.tanh(cells[t + 1])
        dh = d_out[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc**2)
        dz[t, :, :hidden] = dc * g * i * (1.0 - i)
        dz[t, :, hidden : 2 * hidden] = dc * cells[t] * f * (1.0 - f)
        dz[t, :, 2 * hidden : 3 * hidden] = dc * i * (1.0 - g**2)
        dz[t, :, 3 * hidden :] = dh * tc * o * (1.0 - o)
        dh_next = dz[t] @ recurrent.T
        dc_next = dc * f
    dz2 = dz.reshape(steps * batch, -1)
    d_kernel = xt.reshape(-1, n_in).T @ dz2
    d_recurrent = hs[:-1].reshape(-1, hidden).T @ dz2
    d_bias = dz2.sum(axis=0)
    dx = (dz2 @ kernel.T).reshape(steps, batch, n_in).transpose(1, 0, 2)
    return dx, d_kernel, d_recurrent, d_bias


def forward(params, x):
    """Raw network outputs ``[batch, steps, n_outputs]`` and a backward cache."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ValueError(f"expected [batch, steps, features], got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in network input")
    h1, c1 = lstm_forward(x, params["lstm1.kernel"], params["lstm1.recurrent"], params["lstm1.bias"])
    h2, c2 = lstm_forward(h1, params["lstm2.kernel"], params["lstm2.recurrent"], params["lstm2.bias"])
    out = h2 @ params["dense.kernel"] + params["dense.bias"]
    return out, (c1, c2, h2)


def backward(params, cache, d_out):
    """Gradients of ``sum(d_out * out)`` with respect to every weight."""
    if cache is None:
        raise ValueError("backward needs the cache from a forward pass")
    c1, c2, h2 = cache
    grads = {
        "dense.kernel": h2.reshape(-1, h2.shape[-1]).T @ d_out.reshape(-1, d_out.shape[-1]),
        "dense.bias": d_out.sum(axis=(0, 1)),
    }
    dh2 = d_out @ params["dense.kernel"].T
    dh1, grads["lstm2.kernel"], grads["lstm2.recurrent"], grads["lstm2.bias"] = lstm_backward(dh2, c2)
    _, grads["lstm1.kernel"], grads["lstm1.recurrent"], grads["lstm1.bias"] = lstm_backward(dh1, c1)
    return grads


def clip_gradients(grads, threshold: float):
    """Clamp every gradient component to ``[-threshold, threshold]``."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return {k: np.clip(g, -threshold, threshold) for k, g in grads.items()}


@dataclass
class NetworkState:
    params: dict[str, np.ndarray]
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        for k, w in self.params.items():
            self.m.setdefault(k, np.zeros_like(w))
            self.v.setdefault(k, np.zeros_like(w))

    def copy(self) -> "NetworkState":
        dup = lambda d: {k: w.copy() for k, w in d.items()}
        return NetworkState(dup(self.params), dup(self.m), dup(self.v), self.step)


def adam_update(state: NetworkState, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8) -> NetworkState:
    """Bias-corrected Adam step, applied in place."""
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for k, g in grads.items():
        if g.shape != state.params[k].shape:
            raise ValueError(f"gradient shape {g.shape} != weight shape for {k}")
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        state.params[k] = state.params[k] - lr * (state.m[k] / c1) / (np.sqrt(state.v[k] / c2) + eps)
    return state


# Checkpoint layout:
#   line 1: b"ARRIVALNET-CKPT 1\n"
#   line 2: JSON header {"meta": ..., "step": n, "tensors": [[name, [shape...]], ...]}
#   rest:   float64 little-endian values, tensors in header order (params, then m, then v)
MAGIC = b"ARRIVALNET-CKPT 1\n"


def save_checkpoint(path, state: NetworkState, meta: dict):
    names = list(state.params)
    table = [[n, list(state.params[n].shape)] for n in names]
    header = json.dumps({"meta": meta, "step": state.step, "tensors": table}, sort_keys=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.encode("utf-8") + b"\n")
        for group in (state.params, state.m, state.v):
            for n in names:
                fh.write(np.ascontiguousarray(group[n], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns ``(NetworkState, meta)``."""
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ValueError(f"{path}: not a checkpoint or unsupported version")
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    groups = [{}, {}, {}]
    offset = 0
    for group in groups:
        for name, shape in header["tensors"]:
            n = int(np.prod(shape)) if shape else 1
            nbytes = 8 * n
            if offset + nbytes > len(payload):
                raise ValueError(f"{path}: truncated tensor data")
            group[name] = np.frombuffer(payload, dtype="<f8", count=n, offset=offset).reshape(shape).astype(float)
            offset += nbytes
    if offset != len(payload):
        raise ValueError(f"{path}: {len(payload) - offset} trailing bytes")
    state = NetworkState(groups[0], groups[1], groups[2], int(header["step"]))
    return state, header["meta"]
