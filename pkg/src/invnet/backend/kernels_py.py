"""Pure numpy implementations of the hot kernels.

Same call signatures as the compiled module ``invnet.backend._kernels``;
the package selects one of the two at import time.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # exp of a non-positive argument only: no overflow for any input
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def silu(x):
    x = np.asarray(x, dtype=np.float64)
    return x * sigmoid(x)


def silu_vjp(x, g):
    s = sigmoid(x)
    return g * (s * (1.0 + x * (1.0 - s)))


def relu(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0)


def relu_vjp(x, g):
    return np.where(x > 0.0, g, 0.0)


def adam_update(p, g, m, v, step, lr, beta1, beta2, eps, weight_decay):
    """One fused Adam step, in place on p, m, v.

    Bias-corrected moments; weight decay is decoupled (applied directly to p,
    not mixed into the gradient).
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    mhat = m / (1.0 - beta1**step)
    vhat = v / (1.0 - beta2**step)
    if weight_decay != 0.0:
        p *= 1.0 - lr * weight_decay
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def _laplacian(u, inv_h2):
    # zero-flux boundary: ghost cells mirror the adjacent interior cell
    pad = [(0, 0)] * (u.ndim - 2) + [(1, 1), (1, 1)]
    q = np.pad(u, pad, mode="edge")
    return (
        q[..., :-2, 1:-1]
        + q[..., 2:, 1:-1]
        + q[..., 1:-1, :-2]
        + q[..., 1:-1, 2:]
        - 4.0 * u
    ) * inv_h2


def rd_rhs(c, d1, d2, kappa, inv_h2):
    """Two-species reaction-diffusion right-hand side on a square grid.

    c: (B, 2, G, G) or (2, G, G); d1, d2, kappa: scalars or (B,) arrays.
    Reaction: [c1 - c1^3 - kappa - c2, c1 - c2].
    """
    c = np.asarray(c, dtype=np.float64)
    squeeze = c.ndim == 3
    if squeeze:
        c = c[None]
    if c.ndim != 4 or c.shape[1] != 2:
        raise ValueError("rd_rhs expects state shaped (B, 2, G, G) or (2, G, G)")
    nb = c.shape[0]
    d1 = np.broadcast_to(np.asarray(d1, dtype=np.float64), (nb,))[:, None, None]
    d2 = np.broadcast_to(np.asarray(d2, dtype=np.float64), (nb,))[:, None, None]
    kappa = np.broadcast_to(np.asarray(kappa, dtype=np.float64), (nb,))[:, None, None]
    c1 = c[:, 0]
    c2 = c[:, 1]
    out = np.empty_like(c)
    out[:, 0] = d1 * _laplacian(c1, inv_h2) + (c1 - c1**3 - kappa - c2)
    out[:, 1] = d2 * _laplacian(c2, inv_h2) + (c1 - c2)
    return out[0] if squeeze else out
