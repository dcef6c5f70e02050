"""Gated recurrent unit with hand-written backpropagation through time.

Shapes follow the row-vector convention: an input step is ``(d_in,)`` or a
batch ``(B, d_in)``, a state is ``(h,)`` or ``(B, h)``, and pre-activations
are ``x @ W.T + h @ U.T + b`` so weight matrices keep the ``(h, d_in)`` /
``(h, h)`` layout. Parameter gradients are summed over the batch.
"""

from dataclasses import dataclass, fields

import numpy as np

from .errors import EmptySequenceError, ShapeError

GRU_PARAM_NAMES = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")


def sigmoid(a):
    """Logistic function, evaluated without overflow for any finite input."""
    a = np.asarray(a, dtype=np.float64)
    e = np.exp(-np.abs(a))
    return np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def log_sigmoid(a):
    """``log(sigmoid(a))`` computed stably."""
    return -np.logaddexp(0.0, -np.asarray(a, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class GruParams:
    W_z: np.ndarray
    U_z: np.ndarray
    b_z: np.ndarray
    W_r: np.ndarray
    U_r: np.ndarray
    b_r: np.ndarray
    W_h: np.ndarray
    U_h: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, np.asarray(getattr(self, f.name), dtype=np.float64))
        h, d_in = self.W_z.shape if self.W_z.ndim == 2 else (None, None)
        if h is None:
            raise ShapeError("W_z must be a matrix")
        for g in "zrh":
            W, U, b = getattr(self, "W_" + g), getattr(self, "U_" + g), getattr(self, "b_" + g)
            if W.shape != (h, d_in) or U.shape != (h, h) or b.shape != (h,):
                raise ShapeError(
                    f"inconsistent shapes for gate {g}: W{W.shape} U{U.shape} b{b.shape}, "
                    f"expected W({h}, {d_in}) U({h}, {h}) b({h},)")
        for f in fields(self):
            if not np.all(np.isfinite(getattr(self, f.name))):
                raise ValueError(f"non-finite entries in {f.name}")

    @property
    def hidden_size(self):
        return self.b_z.shape[0]

    @property
    def input_size(self):
        return self.W_z.shape[1]

    @classmethod
    def zeros(cls, hidden_size, input_size):
        h, d = hidden_size, input_size
        return cls(**{name: np.zeros((h, d) if name[0] == "W" else (h, h) if name[0] == "U" else h)
                      for name in GRU_PARAM_NAMES})

    def as_dict(self):
        return {name: getattr(self, name) for name in GRU_PARAM_NAMES}


@dataclass(frozen=True, eq=False)
class GruTrace:
    """Cached forward values, one leading time axis of length T.

    Every array is ``(T, B, .)``; unbatched calls use ``B = 1`` and set
    ``batched`` to False so gradients are returned without the batch axis.
    """
    x: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    h_cand: np.ndarray
    h: np.ndarray
    batched: bool

    def __len__(self):
        return self.x.shape[0]


def _check_step_shapes(params, x_t, h_prev):
    if x_t.shape[-1] != params.input_size:
        raise ShapeError(f"input has {x_t.shape[-1]} entries, GRU expects {params.input_size}")
    if h_prev.shape[-1] != params.hidden_size:
        raise ShapeError(f"state has {h_prev.shape[-1]} entries, GRU expects {params.hidden_size}")
    if x_t.ndim == 2 and h_prev.ndim == 2 and x_t.shape[0] != h_prev.shape[0]:
        raise ShapeError(f"batch sizes differ: inputs {x_t.shape[0]}, states {h_prev.shape[0]}")


def _step(p, x_t, h_prev):
    z = sigmoid(x_t @ p.W_z.T + h_prev @ p.U_z.T + p.b_z)
    r = sigmoid(x_t @ p.W_r.T + h_prev @ p.U_r.T + p.b_r)
    h_cand = np.tanh(x_t @ p.W_h.T + (r * h_prev) @ p.U_h.T + p.b_h)
    h = (1.0 - z) * h_cand + z * h_prev
    return h, z, r, h_cand


def gru_step(params, x_t, h_prev):
    """One GRU update.

    Returns ``(h_t, step)`` where ``step`` maps ``x, h_prev, z, r, h_cand, h``
    to the values computed on the way.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    _check_step_shapes(params, x_t, h_prev)
    h, z, r, h_cand = _step(params, x_t, h_prev)
    return h, {"x": x_t, "h_prev": h_prev, "z": z, "r": r, "h_cand": h_cand, "h": h}


def gru_forward(params, inputs, h0):
    """Unroll the GRU over ``inputs`` starting from ``h0``.

    ``inputs`` is ``(T, d_in)`` or ``(T, B, d_in)``; ``h0`` is ``(h,)`` or
    ``(B, h)``. Returns the stacked outputs ``(T, [B,] h)`` and a trace for
    :func:`gru_backward`.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    h0 = np.asarray(h0, dtype=np.float64)
    if inputs.ndim == 0 or inputs.shape[0] == 0:
        raise EmptySequenceError("GRU input sequence is empty")
    if (inputs.ndim, h0.ndim) not in ((2, 1), (3, 2)):
        raise ShapeError(
            f"inputs {inputs.shape} and h0 {h0.shape} must be (T, d_in)/(h,) "
            "or (T, B, d_in)/(B, h)")
    batched = inputs.ndim == 3
    xs = inputs if batched else inputs[:, None, :]
    h = h0 if batched else h0[None, :]
    _check_step_shapes(params, xs[0], h)

    T = xs.shape[0]
    cache = {k: [] for k in ("h_prev", "z", "r", "h_cand", "h")}
    for t in range(T):
        cache["h_prev"].append(h)
        h, z, r, h_cand = _step(params, xs[t], h)
        cache["z"].append(z)
        cache["r"].append(r)
        cache["h_cand"].append(h_cand)
        cache["h"].append(h)
    trace = GruTrace(x=np.ascontiguousarray(xs), batched=batched,
                     **{k: np.stack(v) for k, v in cache.items()})
    outputs = trace.h if batched else trace.h[:, 0, :]
    return outputs, trace


def gru_backward(params, trace, grad_outputs):
    """Reverse-mode gradients of ``sum_t <grad_outputs[t], h_t>``.

    Returns ``(param_grads, input_grads, h0_grad)``; ``param_grads`` is a dict
    keyed by :data:`GRU_PARAM_NAMES`, summed over the batch.
    """
    g_out = np.asarray(grad_outputs, dtype=np.float64)
    if not trace.batched:
        g_out = g_out[:, None, :] if g_out.ndim == 2 else g_out
    if g_out.shape != trace.h.shape:
        expected = trace.h.shape if trace.batched else (trace.h.shape[0], trace.h.shape[2])
        raise ShapeError(f"grad_outputs shape {np.shape(grad_outputs)} != outputs shape {expected}")

    p = params
    grads = {name: np.zeros_like(getattr(p, name)) for name in GRU_PARAM_NAMES}
    dx = np.zeros_like(trace.x)
    dh_next = np.zeros_like(trace.h[0])
    for t in range(len(trace) - 1, -1, -1):
        x, h_prev = trace.x[t], trace.h_prev[t]
        z, r, h_cand = trace.z[t], trace.r[t], trace.h_cand[t]

        dh = g_out[t] + dh_next
        dz = dh * (h_prev - h_cand)
        da_h = dh * (1.0 - z) * (1.0 - h_cand * h_cand)
        dh_prev = dh * z

        rh = r * h_prev
        grads["W_h"] += da_h.T @ x
        grads["U_h"] += da_h.T @ rh
        grads["b_h"] += da_h.sum(axis=0)
        d_rh = da_h @ p.U_h
        dh_prev += d_rh * r

        da_z = dz * z * (1.0 - z)
        da_r = d_rh * h_prev * r * (1.0 - r)
        grads["W_z"] += da_z.T @ x
        grads["U_z"] += da_z.T @ h_prev
        grads["b_z"] += da_z.sum(axis=0)
        grads["W_r"] += da_r.T @ x
        grads["U_r"] += da_r.T @ h_prev
        grads["b_r"] += da_r.sum(axis=0)

        dx[t] = da_z @ p.W_z + da_r @ p.W_r + da_h @ p.W_h
        dh_next = dh_prev + da_z @ p.U_z + da_r @ p.U_r

    if not trace.batched:
        return grads, dx[:, 0, :], dh_next[0]
    return grads, dx, dh_next
