"""Network building blocks on top of the tensor engine.

Two LSTM entry points exist on purpose.  :func:`lstm_step` is composed from
tensor primitives, so anything built from it supports double backprop; it is
the route taken when a gradient must stay differentiable (the critic's input
gradient).  :func:`lstm_seq` runs a whole sequence with a hand-written
backward pass over raw arrays, roughly an order of magnitude faster, but its
gradients are first-order only.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .tensor import (
    ShapeError,
    Tensor,
    add,
    broadcast_to,
    concat,
    div,
    getitem,
    is_grad_enabled,
    leaky_relu,
    matmul,
    mul,
    relu,
    reshape,
    sigmoid,
    sqrt,
    sub,
    tanh,
    tmean,
    transpose,
    unfold1d,
)

ACTIVATIONS = {
    "identity": lambda t: t,
    "relu": relu,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "leaky_relu": leaky_relu,
}


def _activate(t: Tensor, activation: str) -> Tensor:
    try:
        return ACTIVATIONS[activation](t)
    except KeyError:
        raise ValueError(f"unknown activation {activation!r}") from None


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# affine
# ---------------------------------------------------------------------------


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Dense layer ``x @ weight + bias`` for x of shape [N, p]."""
    if x.ndim != 2 or weight.ndim != 2:
        raise ShapeError(
            f"affine expects 2-D input and weight, got {x.shape} and {weight.shape}"
        )
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(
            f"affine: input width {x.shape[1]} does not match weight rows {weight.shape[0]}"
        )
    if bias.shape != (weight.shape[1],):
        raise ShapeError(
            f"affine: bias shape {bias.shape} does not match output width {weight.shape[1]}"
        )
    return add(matmul(x, weight), broadcast_to(reshape(bias, (1, -1)), (x.shape[0], weight.shape[1])))


# ---------------------------------------------------------------------------
# 1-D convolution (unit stride)
# ---------------------------------------------------------------------------


def conv1d(x: Tensor, filters: Tensor, bias: Tensor, activation: str = "identity") -> Tensor:
    """Correlate ``filters`` [f, C, m] across ``x`` [C, L] or [N, C, L].

    Unit stride; output length is exactly L - m + 1.  Raises if the filter
    is wider than the signal (empty output).
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 3 or filters.ndim != 3:
        raise ShapeError(
            f"conv1d expects [N, C, L] input and [f, C, m] filters, got {x.shape} and {filters.shape}"
        )
    n, c, length = x.shape
    nf, fc, width = filters.shape
    if fc != c:
        raise ShapeError(f"conv1d: {c} input channels but filters expect {fc}")
    if width > length:
        raise ShapeError(
            f"conv1d: filter width {width} exceeds signal length {length}; output would be empty"
        )
    if bias.shape != (nf,):
        raise ShapeError(f"conv1d: bias shape {bias.shape} != ({nf},)")
    nwin = length - width + 1
    windows = reshape(unfold1d(x, width), (n * nwin, c * width))
    w2 = reshape(filters, (nf, c * width))
    out = matmul(windows, transpose(w2, None))  # [N*nwin, f]
    out = transpose(reshape(out, (n, nwin, nf)), (0, 2, 1))  # [N, f, nwin]
    out = add(out, broadcast_to(reshape(bias, (1, nf, 1)), (n, nf, nwin)))
    out = _activate(out, activation)
    if squeeze:
        out = reshape(out, (nf, nwin))
    return out


# ---------------------------------------------------------------------------
# max pooling (non-overlapping windows, stride = pool length)
# ---------------------------------------------------------------------------


def maxpool1d(x: Tensor, pool: int) -> Tensor:
    """Max over non-overlapping windows of ``pool`` values.

    Output length is (L - pool)//pool + 1; a trailing remainder shorter than
    ``pool`` is dropped.  Backward routes the gradient to the first maximal
    index of each window.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    n, c, length = x.shape
    if pool < 1:
        raise ShapeError(f"maxpool1d: pool length must be >= 1, got {pool}")
    if pool > length:
        raise ShapeError(
            f"maxpool1d: pool length {pool} exceeds signal length {length}; output would be empty"
        )
    nout = (length - pool) // pool + 1
    trimmed = x.data[:, :, : nout * pool].reshape(n, c, nout, pool)
    arg = trimmed.argmax(axis=3)  # first maximal index on ties
    flat_pos = (np.arange(nout) * pool)[None, None, :] + arg  # [N, C, nout]
    out = _pool_gather(x, flat_pos)
    if squeeze:
        out = reshape(out, (c, nout))
    return out


def _pool_gather(x: Tensor, pos: np.ndarray) -> Tensor:
    n, c, _ = x.shape
    idx = (
        np.arange(n)[:, None, None],
        np.arange(c)[None, :, None],
        pos,
    )
    data = x.data[idx]
    length = x.shape[2]
    return Tensor._result(
        data, (x,), lambda g: (_pool_scatter(g, pos, length),), "maxpool"
    )


def _pool_scatter(g: Tensor, pos: np.ndarray, length: int) -> Tensor:
    n, c, nout = g.shape
    idx = (
        np.arange(n)[:, None, None],
        np.arange(c)[None, :, None],
        pos,
    )
    data = np.zeros((n, c, length), dtype=np.float64)
    data[idx] = g.data  # one argmax per window: no collisions
    return Tensor._result(
        data, (g,), lambda gg: (_pool_gather(gg, pos),), "maxpool_scatter"
    )


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------


@dataclass
class BatchNormState:
    """Exponentially averaged statistics collected in train mode."""

    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None
    momentum: float = 0.1

    def update(self, mean: np.ndarray, var: np.ndarray) -> None:
        if self.running_mean is None:
            self.running_mean = mean.copy()
            self.running_var = var.copy()
        else:
            m = self.momentum
            self.running_mean = (1.0 - m) * self.running_mean + m * mean
            self.running_var = (1.0 - m) * self.running_var + m * var


def batchnorm(
    x: Tensor,
    scale: Tensor,
    shift: Tensor,
    state: BatchNormState,
    eps: float = 1e-8,
    training: bool = True,
) -> Tensor:
    """Normalize each feature column to zero mean and unit variance, then
    apply the learnable scale and shift.

    Train mode uses batch statistics (biased variance) and refreshes the
    running averages; eval mode requires previously collected statistics.
    """
    if x.ndim != 2:
        raise ShapeError(f"batchnorm expects [batch, features], got {x.shape}")
    if eps <= 0:
        raise ValueError("batchnorm: eps must be positive")
    n = x.shape[0]
    if training:
        if n == 1:
            warnings.warn(
                "batchnorm: batch of size 1 has degenerate variance; "
                "falling back to the eps-stabilized denominator",
                RuntimeWarning,
                stacklevel=2,
            )
        mu = tmean(x, axis=0, keepdims=True)
        centered = sub(x, broadcast_to(mu, x.shape))
        var = tmean(mul(centered, centered), axis=0, keepdims=True)
        state.update(mu.data.reshape(-1), var.data.reshape(-1))
    else:
        if state.running_mean is None:
            raise ValueError("batchnorm: eval mode requires running statistics")
        mu = Tensor(state.running_mean.reshape(1, -1))
        centered = sub(x, broadcast_to(mu, x.shape))
        var = Tensor(state.running_var.reshape(1, -1))
    denom = sqrt(add(var, Tensor(eps)))
    xhat = div(centered, broadcast_to(denom, x.shape))
    out = add(
        mul(xhat, broadcast_to(reshape(scale, (1, -1)), x.shape)),
        broadcast_to(reshape(shift, (1, -1)), x.shape),
    )
    return out


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------


@dataclass
class LstmWeights:
    """Gate parameters; gate order along the last axis is i, f, g, o."""

    wx: Tensor  # [input, 4*hidden]
    wh: Tensor  # [hidden, 4*hidden]
    bias: Tensor  # [4*hidden]

    @property
    def hidden(self) -> int:
        return self.wh.shape[0]

    def params(self) -> list[Tensor]:
        return [self.wx, self.wh, self.bias]


def init_lstm(rng: np.random.Generator, n_in: int, hidden: int) -> LstmWeights:
    return LstmWeights(
        wx=Tensor(glorot_uniform(rng, n_in, hidden, (n_in, 4 * hidden)), requires_grad=True),
        wh=Tensor(glorot_uniform(rng, hidden, hidden, (hidden, 4 * hidden)), requires_grad=True),
        bias=Tensor(np.zeros(4 * hidden), requires_grad=True),
    )


def lstm_step(
    x_t: Tensor, h: Tensor, c: Tensor, weights: LstmWeights
) -> tuple[Tensor, Tensor]:
    """One forget/input/output-gate update with sigmoid gates and tanh
    candidate.  Composed from primitives, so it supports double backprop."""
    hid = weights.hidden
    if x_t.ndim != 2 or h.shape != (x_t.shape[0], hid) or c.shape != h.shape:
        raise ShapeError(
            f"lstm_step: inconsistent shapes x={x_t.shape} h={h.shape} c={c.shape} hidden={hid}"
        )
    z = add(
        add(matmul(x_t, weights.wx), matmul(h, weights.wh)),
        broadcast_to(reshape(weights.bias, (1, -1)), (x_t.shape[0], 4 * hid)),
    )
    i = sigmoid(getitem(z, (slice(None), slice(0, hid))))
    f = sigmoid(getitem(z, (slice(None), slice(hid, 2 * hid))))
    g = tanh(getitem(z, (slice(None), slice(2 * hid, 3 * hid))))
    o = sigmoid(getitem(z, (slice(None), slice(3 * hid, 4 * hid))))
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def lstm_seq_composed(x: Tensor, weights: LstmWeights) -> Tensor:
    """Run :func:`lstm_step` over the columns of x [N, C, T]; returns the
    hidden sequence [N, H, T].  Slow but differentiable to any order."""
    n, _, steps = x.shape
    hid = weights.hidden
    h = Tensor(np.zeros((n, hid)))
    c = Tensor(np.zeros((n, hid)))
    outs = []
    for t in range(steps):
        x_t = getitem(x, (slice(None), slice(None), t))
        h, c = lstm_step(x_t, h, c, weights)
        outs.append(reshape(h, (n, hid, 1)))
    return concat(outs, axis=2)


def lstm_seq(x: Tensor, weights: LstmWeights) -> Tensor:
    """Fused LSTM over x [N, C, T] -> hidden sequence [N, H, T].

    Forward and backward are raw-array loops (backprop through time); the
    backward is first-order only and refuses to run under create_graph.
    """
    n, c_in, steps = x.shape
    hid = weights.hidden
    wx, wh, b = weights.wx, weights.wh, weights.bias
    if wx.shape[0] != c_in:
        raise ShapeError(
            f"lstm_seq: input has {c_in} channels but wx expects {wx.shape[0]}"
        )
    xt = x.data.transpose(2, 0, 1)  # [T, N, C]
    pre = xt.reshape(steps * n, c_in) @ wx.data
    pre = pre.reshape(steps, n, 4 * hid) + b.data

    hs = np.empty((steps, n, hid))
    cs = np.empty((steps, n, hid))
    gates = np.empty((steps, n, 4 * hid))
    h = np.zeros((n, hid))
    c = np.zeros((n, hid))
    for t in range(steps):
        z = pre[t] + h @ wh.data
        zi, zf, zg, zo = z[:, :hid], z[:, hid : 2 * hid], z[:, 2 * hid : 3 * hid], z[:, 3 * hid :]
        i = _sig(zi)
        f = _sig(zf)
        g = np.tanh(zg)
        o = _sig(zo)
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :, :hid] = i
        gates[t, :, hid : 2 * hid] = f
        gates[t, :, 2 * hid : 3 * hid] = g
        gates[t, :, 3 * hid :] = o
        hs[t] = h
        cs[t] = c

    def vjp(grad_out: Tensor):
        if is_grad_enabled():
            raise RuntimeError(
                "lstm_seq backward is first-order only; build the graph with "
                "lstm_seq_composed when higher-order gradients are required"
            )
        go = grad_out.data.transpose(2, 0, 1)  # [T, N, H]
        dwx = np.zeros_like(wx.data)
        dwh = np.zeros_like(wh.data)
        db = np.zeros_like(b.data)
        dx = np.empty((steps, n, c_in))
        dh_next = np.zeros((n, hid))
        dc_next = np.zeros((n, hid))
        for t in range(steps - 1, -1, -1):
            i = gates[t, :, :hid]
            f = gates[t, :, hid : 2 * hid]
            g = gates[t, :, 2 * hid : 3 * hid]
            o = gates[t, :, 3 * hid :]
            c_t = cs[t]
            c_prev = cs[t - 1] if t > 0 else np.zeros((n, hid))
            h_prev = hs[t - 1] if t > 0 else np.zeros((n, hid))
            tc = np.tanh(c_t)
            dh = go[t] + dh_next
            do = dh * tc
            dct = dh * o * (1.0 - tc * tc) + dc_next
            df = dct * c_prev
            di = dct * g
            dg = dct * i
            dc_next = dct * f
            dz = np.empty((n, 4 * hid))
            dz[:, :hid] = di * i * (1.0 - i)
            dz[:, hid : 2 * hid] = df * f * (1.0 - f)
            dz[:, 2 * hid : 3 * hid] = dg * (1.0 - g * g)
            dz[:, 3 * hid :] = do * o * (1.0 - o)
            dx[t] = dz @ wx.data.T
            dh_next = dz @ wh.data.T
            dwx += xt[t].T @ dz
            dwh += h_prev.T @ dz
            db += dz.sum(axis=0)
        return (
            Tensor(dx.transpose(1, 2, 0)),
            Tensor(dwx),
            Tensor(dwh),
            Tensor(db),
        )

    return Tensor._result(hs.transpose(1, 2, 0), (x, wx, wh, b), vjp, "lstm_seq")


def _sig(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
