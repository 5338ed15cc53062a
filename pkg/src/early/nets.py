"""From-scratch MLP function approximators: analytic backprop and Adam.

Parameters of a net live in one flat float64 vector; per-layer weight and
bias views are slices into it, so an optimizer step is a handful of
whole-vector operations.  Hidden activations are rectifiers, the output is
linear.  All arithmetic is 64-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

CHECKPOINT_VERSION = 1


def param_count(sizes: Sequence[int]) -> int:
    return sum(sizes[i + 1] * sizes[i] + sizes[i + 1] for i in range(len(sizes) - 1))


def _layer_views(sizes, theta):
    views = []
    off = 0
    for i in range(len(sizes) - 1):
        n_in, n_out = sizes[i], sizes[i + 1]
        w = theta[off:off + n_out * n_in].reshape(n_out, n_in)
        off += n_out * n_in
        b = theta[off:off + n_out]
        off += n_out
        views.append((w, b))
    return views


class Mlp:
    """An MLP bound to a flat parameter vector.

    `layers` exposes (weight, bias) views into `theta`; rebinding parameters
    goes through `with_theta` so views never go stale.
    """

    __slots__ = ("sizes", "theta", "layers")

    def __init__(self, sizes: Sequence[int], theta: np.ndarray):
        sizes = tuple(int(s) for s in sizes)
        if theta.shape != (param_count(sizes),):
            raise ValueError(f"theta has {theta.shape}, sizes {sizes} need "
                             f"({param_count(sizes)},)")
        self.sizes = sizes
        self.theta = theta
        self.layers = _layer_views(sizes, theta)

    def with_theta(self, theta: np.ndarray) -> "Mlp":
        return Mlp(self.sizes, theta)

    def copy(self) -> "Mlp":
        return Mlp(self.sizes, self.theta.copy())


def mlp_init(sizes: Sequence[int], rng, out_scale: float = 1.0) -> Mlp:
    """Uniform fan-in init: every layer's weights and biases drawn from
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)); the output layer optionally scaled."""
    sizes = tuple(int(s) for s in sizes)
    theta = np.empty(param_count(sizes), dtype=np.float64)
    off = 0
    n_layers = len(sizes) - 1
    for i in range(n_layers):
        n_in, n_out = sizes[i], sizes[i + 1]
        limit = 1.0 / np.sqrt(n_in)
        if i == n_layers - 1:
            limit *= out_scale
        n = n_out * n_in + n_out
        theta[off:off + n] = rng.uniform(-limit, limit, size=n)
        off += n
    return Mlp(sizes, theta)


def mlp_forward(mlp: Mlp, x: np.ndarray):
    """Evaluate the net.  `x` is a single input vector or an (n, d) batch.
    Returns (output, cache); the cache feeds mlp_backward."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != mlp.sizes[0]:
        raise ValueError(f"input width {a.shape[1]} != expected {mlp.sizes[0]}")
    inputs = []
    last = len(mlp.layers) - 1
    for i, (w, b) in enumerate(mlp.layers):
        inputs.append(a)
        z = a @ w.T + b
        a = z if i == last else np.maximum(z, 0.0)
    cache = (inputs, a, single)
    return (a[0] if single else a), cache


def mlp_backward(mlp: Mlp, cache, output_gradient: np.ndarray):
    """Exact reverse-mode gradients of sum(output * output_gradient) w.r.t.
    the flat parameter vector and the input.  Batched `output_gradient`
    accumulates over the batch."""
    inputs, _, single = cache
    g = np.asarray(output_gradient, dtype=np.float64)
    if single:
        g = g[None, :]
    if g.shape != (inputs[0].shape[0], mlp.sizes[-1]):
        raise ValueError(f"output_gradient has shape {g.shape}, expected "
                         f"({inputs[0].shape[0]}, {mlp.sizes[-1]})")
    grad = np.empty_like(mlp.theta)
    gviews = _layer_views(mlp.sizes, grad)
    for i in range(len(mlp.layers) - 1, -1, -1):
        w, _ = mlp.layers[i]
        gw, gb = gviews[i]
        a_in = inputs[i]
        np.matmul(g.T, a_in, out=gw)
        np.sum(g, axis=0, out=gb)
        g = g @ w
        if i > 0:
            # rectifier mask: the stored input of layer i is its activation
            g = np.where(a_in > 0.0, g, 0.0)
    return grad, (g[0] if single else g)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n_params: int, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    return AdamState(m=np.zeros(n_params), v=np.zeros(n_params),
                     beta1=beta1, beta2=beta2, eps=eps)


def adam_step(theta: np.ndarray, grad: np.ndarray, state: AdamState, lr: float):
    """One bias-corrected Adam update.  Returns (new_theta, new_state)."""
    if lr <= 0.0:
        raise ValueError("lr must be positive")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_theta = theta - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_theta, AdamState(m=m, v=v, t=t, beta1=state.beta1,
                                beta2=state.beta2, eps=state.eps)


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst_index: int
    analytic_at_worst: float
    numeric_at_worst: float
    tolerance: float
    n_coords: int

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def grad_check(f: Callable[[np.ndarray], tuple], theta: np.ndarray,
               tolerance: float = 1e-4, h: float = 1e-5,
               max_coords: Optional[int] = None, rng=None) -> GradCheckReport:
    """Compare f's analytic gradient against central finite differences.

    `f(theta) -> (value, grad)`.  The error is the largest absolute
    analytic/numeric difference normalized by the largest gradient magnitude,
    so a single wrong partial derivative is caught while benign rounding in
    near-zero entries is not blown up.
    """
    theta = np.asarray(theta, dtype=np.float64)
    _, analytic = f(theta)
    analytic = np.asarray(analytic, dtype=np.float64)
    coords = np.arange(theta.size)
    if max_coords is not None and max_coords < theta.size:
        gen = rng if rng is not None else np.random.default_rng(0)
        coords = gen.choice(theta.size, size=max_coords, replace=False)
    numeric = np.zeros(coords.size)
    work = theta.copy()
    for j, i in enumerate(coords):
        orig = work[i]
        work[i] = orig + h
        f_plus, _ = f(work)
        work[i] = orig - h
        f_minus, _ = f(work)
        work[i] = orig
        numeric[j] = (f_plus - f_minus) / (2.0 * h)
    sub_analytic = analytic[coords]
    denom = max(np.max(np.abs(sub_analytic)), np.max(np.abs(numeric)), 1e-12)
    abs_err = np.abs(sub_analytic - numeric)
    worst = int(np.argmax(abs_err))
    return GradCheckReport(
        max_rel_err=float(abs_err[worst] / denom),
        worst_index=int(coords[worst]),
        analytic_at_worst=float(sub_analytic[worst]),
        numeric_at_worst=float(numeric[worst]),
        tolerance=tolerance,
        n_coords=int(coords.size),
    )


# ---------------------------------------------------------------------------
# Checkpoint format: one .npz document, versioned header, per-net flat arrays.


def save_checkpoint(path, nets: dict, adam: Optional[dict] = None,
                    meta: Optional[dict] = None) -> None:
    """Write named nets (+ optional optimizer states and JSON-able metadata)
    to a single versioned binary document."""
    payload = {"version": np.array(CHECKPOINT_VERSION),
               "net_names": np.array(sorted(nets.keys()))}
    for name, mlp in nets.items():
        payload[f"{name}.sizes"] = np.array(mlp.sizes, dtype=np.int64)
        payload[f"{name}.theta"] = mlp.theta
        if adam and name in adam:
            st = adam[name]
            payload[f"{name}.adam_m"] = st.m
            payload[f"{name}.adam_v"] = st.v
            payload[f"{name}.adam_cfg"] = np.array(
                [st.t, st.beta1, st.beta2, st.eps], dtype=np.float64)
    payload["meta"] = np.array(json.dumps(meta or {}))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path):
    """Read a checkpoint back: (nets, adam_states, meta)."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        nets, adam = {}, {}
        for name in data["net_names"]:
            name = str(name)
            nets[name] = Mlp(tuple(int(s) for s in data[f"{name}.sizes"]),
                             data[f"{name}.theta"].astype(np.float64))
            if f"{name}.adam_m" in data:
                t, b1, b2, eps = data[f"{name}.adam_cfg"]
                adam[name] = AdamState(m=data[f"{name}.adam_m"].astype(np.float64),
                                       v=data[f"{name}.adam_v"].astype(np.float64),
                                       t=int(t), beta1=float(b1), beta2=float(b2),
                                       eps=float(eps))
        meta = json.loads(str(data["meta"]))
    return nets, adam, meta
