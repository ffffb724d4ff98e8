"""Pure-numpy reference implementations of the hot kernels.

Shapes are pre-flattened by the callers: softmax and layer norm take 2-D
(rows, width) arrays, Adam takes 1-D views. Masks are float 0/1 vectors;
a zero mask entry excludes that column entirely.
"""

import numpy as np


def masked_softmax_fwd(scores: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row-wise softmax over unmasked columns; fully-masked rows yield zeros."""
    if not mask.any():
        return np.zeros_like(scores)
    neg = np.finfo(scores.dtype).min
    shifted = np.where(mask > 0, scores, neg)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    e = np.exp(shifted) * (mask > 0)
    denom = e.sum(axis=1, keepdims=True)
    return (e / denom).astype(scores.dtype, copy=False)


def masked_softmax_bwd(probs: np.ndarray, grad: np.ndarray) -> np.ndarray:
    dot = (grad * probs).sum(axis=1, keepdims=True)
    return probs * (grad - dot)


def layer_norm_fwd(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    y = xhat * gain + bias
    return y, xhat, inv_std[:, 0]


def layer_norm_bwd(grad: np.ndarray, xhat: np.ndarray, inv_std: np.ndarray,
                   gain: np.ndarray):
    d = xhat.shape[1]
    gg = grad * gain
    sum_gg = gg.sum(axis=1, keepdims=True)
    sum_ggx = (gg * xhat).sum(axis=1, keepdims=True)
    dx = inv_std[:, None] * (gg - sum_gg / d - xhat * sum_ggx / d)
    dgain = (grad * xhat).sum(axis=0)
    dbias = grad.sum(axis=0)
    return dx, dgain, dbias


def adam_update(param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray,
                lr: float, beta1: float, beta2: float, eps: float,
                bc1: float, bc2: float) -> None:
    """In-place bias-corrected Adam step on flat views."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def bce_logits_fwd(z: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy from logits, stable log-sum-exp form."""
    losses = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(losses.mean())


def bce_logits_bwd(z: np.ndarray, y: np.ndarray, gscale: float) -> np.ndarray:
    sig = 1.0 / (1.0 + np.exp(-z))
    return (sig - y) * gscale
