"""Shared test oracles: central finite differences and naive references."""

import numpy as np

from fddlab.autodiff import Tensor, backward


def fd_gradient(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of one array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        plus = x.copy()
        plus[idx] += h
        minus = x.copy()
        minus[idx] -= h
        grad[idx] = (fn(plus) - fn(minus)) / (2.0 * h)
    return grad


def rel_err(approx: np.ndarray, exact: np.ndarray) -> float:
    scale = max(1e-6, float(np.max(np.abs(exact))))
    return float(np.max(np.abs(approx - exact))) / scale


def gradcheck(build_loss, arrays: list[np.ndarray], h: float = 1e-5, tol: float = 1e-4) -> float:
    """Compare reverse-mode gradients of ``build_loss(*tensors)`` against
    central differences for every input array; returns the worst error."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    loss = build_loss(*tensors)
    grads = backward(loss, tensors)
    worst = 0.0
    for k, (arr, g) in enumerate(zip(arrays, grads)):

        def value_at(x, k=k):
            probe = [a.copy() for a in arrays]
            probe[k] = x
            return float(build_loss(*[Tensor(a) for a in probe]).data)

        fd = fd_gradient(value_at, arr, h)
        err = rel_err(g.data, fd)
        worst = max(worst, err)
        assert err < tol, f"input {k}: analytic vs finite-difference rel err {err:.3e}"
    return worst


def naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n, p = a.shape
    p2, q = b.shape
    assert p == p2
    out = np.zeros((n, q))
    for i in range(n):
        for j in range(q):
            acc = 0.0
            for k in range(p):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def naive_conv1d(x: np.ndarray, filters: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Direct sliding-window dot products; x [C, L], filters [f, C, m]."""
    c, length = x.shape
    nf, _, m = filters.shape
    out = np.zeros((nf, length - m + 1))
    for f in range(nf):
        for i in range(length - m + 1):
            out[f, i] = np.sum(x[:, i : i + m] * filters[f]) + bias[f]
    return out


def naive_dft(x: np.ndarray) -> np.ndarray:
    n = len(x)
    k = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * kk * k / n)) for kk in range(n)])
