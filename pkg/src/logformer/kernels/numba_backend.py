"""Numba-compiled kernels, one fused loop per operation.

Same contracts as numpy_backend; row loops avoid the temporaries the
vectorized fallback allocates. cache=True persists compilation to disk so
only the first process ever pays the JIT cost.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def masked_softmax_fwd(scores, mask):
    rows, n = scores.shape
    out = np.zeros_like(scores)
    any_real = False
    for j in range(n):
        if mask[j] > 0:
            any_real = True
            break
    if not any_real:
        return out
    for i in range(rows):
        hi = -np.inf
        for j in range(n):
            if mask[j] > 0 and scores[i, j] > hi:
                hi = scores[i, j]
        total = 0.0
        for j in range(n):
            if mask[j] > 0:
                e = math.exp(scores[i, j] - hi)
                out[i, j] = e
                total += e
        for j in range(n):
            out[i, j] /= total
    return out


@njit(cache=True)
def masked_softmax_bwd(probs, grad):
    rows, n = probs.shape
    ds = np.empty_like(probs)
    for i in range(rows):
        dot = 0.0
        for j in range(n):
            dot += grad[i, j] * probs[i, j]
        for j in range(n):
            ds[i, j] = probs[i, j] * (grad[i, j] - dot)
    return ds


@njit(cache=True)
def layer_norm_fwd(x, gain, bias, eps):
    rows, d = x.shape
    y = np.empty_like(x)
    xhat = np.empty_like(x)
    inv_std = np.empty(rows, dtype=x.dtype)
    for i in range(rows):
        mu = 0.0
        for k in range(d):
            mu += x[i, k]
        mu /= d
        var = 0.0
        for k in range(d):
            diff = x[i, k] - mu
            var += diff * diff
        var /= d
        istd = 1.0 / math.sqrt(var + eps)
        inv_std[i] = istd
        for k in range(d):
            xh = (x[i, k] - mu) * istd
            xhat[i, k] = xh
            y[i, k] = xh * gain[k] + bias[k]
    return y, xhat, inv_std


@njit(cache=True)
def layer_norm_bwd(grad, xhat, inv_std, gain):
    rows, d = xhat.shape
    dx = np.empty_like(xhat)
    dgain = np.zeros(d, dtype=xhat.dtype)
    dbias = np.zeros(d, dtype=xhat.dtype)
    for i in range(rows):
        sum_gg = 0.0
        sum_ggx = 0.0
        for k in range(d):
            gg = grad[i, k] * gain[k]
            sum_gg += gg
            sum_ggx += gg * xhat[i, k]
        for k in range(d):
            gg = grad[i, k] * gain[k]
            dx[i, k] = inv_std[i] * (gg - sum_gg / d - xhat[i, k] * sum_ggx / d)
            dgain[k] += grad[i, k] * xhat[i, k]
            dbias[k] += grad[i, k]
    return dx, dgain, dbias


@njit(cache=True)
def adam_update(param, grad, m, v, lr, beta1, beta2, eps, bc1, bc2):
    for i in range(param.size):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        param[i] -= lr * (m[i] / bc1) / (math.sqrt(v[i] / bc2) + eps)


@njit(cache=True)
def bce_logits_fwd(z, y):
    total = 0.0
    for i in range(z.size):
        zi = z[i]
        total += max(zi, 0.0) - zi * y[i] + math.log1p(math.exp(-abs(zi)))
    return total / z.size


@njit(cache=True)
def bce_logits_bwd(z, y, gscale):
    dz = np.empty_like(z)
    for i in range(z.size):
        sig = 1.0 / (1.0 + math.exp(-z[i]))
        dz[i] = (sig - y[i]) * gscale
    return dz
