"""Training objectives and their analytic gradients.

Loss functions act on embedding matrices and, when asked, return the gradient
with respect to each embedding block.  ``batch_objective`` and
``population_objective`` chain those through an ``Encoder`` to produce a
gradient over the flat parameter vector.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import AugmentationMatrix, marginals

METHODS = ("aca_full", "aca_pc", "spectral", "infonce")


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    align: float
    uniformity: float
    projection: float


def mf_loss(ahat: np.ndarray, f: np.ndarray, grad: bool = False):
    """Frobenius matrix-factorization loss ``|Ahat^T Ahat - F F^T|^2``."""
    resid = ahat.T @ ahat - f @ f.T
    val = float(np.sum(resid**2))
    if not grad:
        return val
    return val, -4.0 * resid @ f


def _check_batch(z1, z2):
    if z1.shape != z2.shape:
        raise LossError("both views must have the same shape")
    if z1.shape[0] < 2:
        raise LossError("batch size must be at least 2")


def batch_aca_loss(z1: np.ndarray, z2: np.ndarray, z_nat: np.ndarray | None = None,
                   K: float = 2.0, alpha: float = 1.0, grad: bool = False):
    """Minibatch ACA loss on embedded views ``z1``, ``z2`` and naturals ``z_nat``.

    The uniformity term pairs view 1 of sample i with view 2 of sample j for
    i != j.  The projection term reuses the two views as the estimate of the
    augmentation mean.  With ``grad`` the result is ``(breakdown, (g1, g2, gn))``.
    """
    _check_batch(z1, z2)
    b = z1.shape[0]
    align = -2.0 / b * float(np.sum(z1 * z2))
    s = z1 @ z2.T
    np.fill_diagonal(s, 0.0)
    uni_w = K / (b * (b - 1))
    uniformity = uni_w * float(np.sum(s**2))
    if z_nat is None:
        projection, r = 0.0, None
    else:
        r = z_nat - 0.5 * (z1 + z2)
        projection = float(np.sum(r**2)) / b
    total = align + uniformity + alpha * projection
    out = LossBreakdown(total, align, uniformity, projection)
    if not grad:
        return out
    ds = 2.0 * uni_w * s
    g1 = -2.0 / b * z2 + ds @ z2
    g2 = -2.0 / b * z1 + ds.T @ z1
    gn = None
    if r is not None:
        gn = 2.0 * alpha / b * r
        g1 = g1 - alpha / b * r
        g2 = g2 - alpha / b * r
    return out, (g1, g2, gn)


def spectral_batch_loss(z1: np.ndarray, z2: np.ndarray, grad: bool = False):
    """Spectral contrastive baseline: the ACA batch loss at ``K=1``, no projection."""
    res = batch_aca_loss(z1, z2, None, K=1.0, alpha=0.0, grad=grad)
    if not grad:
        return res.total
    return res[0].total, res[1][:2]


def infonce_batch_loss(z1: np.ndarray, z2: np.ndarray, temperature: float = 0.5, grad: bool = False):
    """NT-Xent over the 2B views; each view's positive is its sibling view."""
    if temperature <= 0:
        raise LossError("temperature must be positive")
    _check_batch(z1, z2)
    b = z1.shape[0]
    z = np.concatenate([z1, z2])
    logits = z @ z.T / temperature
    np.fill_diagonal(logits, -np.inf)
    logits -= logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.sum(np.exp(logits), axis=1, keepdims=True))
    pos = np.concatenate([np.arange(b, 2 * b), np.arange(b)])
    rows = np.arange(2 * b)
    val = -float(np.mean(logp[rows, pos]))
    if not grad:
        return val
    dl = np.exp(logp)
    dl[rows, pos] -= 1.0
    dl /= 2 * b
    gz = (dl + dl.T) @ z / temperature
    return val, (gz[:b], gz[b:])


def aca_pc_population_loss(a: AugmentationMatrix, emb: np.ndarray, K: float | None = None,
                           grad: bool = False):
    """Exact ACA-PC objective by enumeration over the whole domain.

    ``emb`` holds one row per augmented sample.  ``K`` defaults to ``N``.
    """
    n = a.n
    K = float(n) if K is None else float(K)
    pa = marginals(a).marginal
    ae = a.probs @ emb
    align = -2.0 / n * float(np.sum(ae**2))
    c = emb.T @ (pa[:, None] * emb)
    uniformity = K * float(np.sum(c**2))
    val = align + uniformity
    if not grad:
        return val
    g = -4.0 / n * (a.probs.T @ ae) + 4.0 * K * (pa[:, None] * emb) @ c
    return val, g


def projection_population_loss(a: AugmentationMatrix, nat: np.ndarray, emb: np.ndarray,
                               grad: bool = False):
    """Mean squared gap between each natural embedding and its augmentation mean."""
    r = nat - a.probs @ emb
    val = float(np.sum(r**2)) / a.n
    if not grad:
        return val
    return val, (2.0 / a.n * r, -2.0 / a.n * (a.probs.T @ r))


# -- chaining through an encoder ---------------------------------------------

def batch_objective(method: str, encoder, params: np.ndarray, naturals, view1, view2,
                    K: float = 2.0, alpha: float = 1.0, temperature: float = 0.5):
    """Evaluate a method's minibatch loss and its gradient over ``params``.

    Returns ``(LossBreakdown, grad)``.  For ``spectral`` and ``infonce`` the
    breakdown's ``total`` carries the baseline loss; the ACA terms are still
    reported for telemetry.
    """
    if method not in METHODS:
        raise LossError(f"unknown method {method!r}")
    b = len(view1)
    use_nat = method == "aca_full"
    stacked = np.concatenate([view1, view2, naturals]) if use_nat else np.concatenate([view1, view2])
    z, cache = encoder.forward(params, stacked)
    z1, z2 = z[:b], z[b:2 * b]
    zn = z[2 * b:] if use_nat else None
    if method in ("aca_full", "aca_pc"):
        parts, (g1, g2, gn) = batch_aca_loss(z1, z2, zn, K=K, alpha=alpha if use_nat else 0.0, grad=True)
    elif method == "spectral":
        parts, (g1, g2, gn) = batch_aca_loss(z1, z2, None, K=1.0, alpha=0.0, grad=True)
    else:
        val, (g1, g2) = infonce_batch_loss(z1, z2, temperature, grad=True)
        gn = None
        ref = batch_aca_loss(z1, z2, None, K=K, alpha=0.0)
        parts = LossBreakdown(val, ref.align, ref.uniformity, 0.0)
    gz = np.concatenate([g1, g2, gn]) if use_nat else np.concatenate([g1, g2])
    return parts, encoder.backward(params, cache, gz)


def population_objective(a: AugmentationMatrix, encoder, params: np.ndarray, aug_inputs,
                         nat_inputs=None, K: float | None = None, alpha: float = 0.0):
    """Exact ACA-PC (+ ``alpha`` times the exact projection loss) and its gradient."""
    l = a.l
    stacked = aug_inputs if nat_inputs is None else np.concatenate([aug_inputs, nat_inputs])
    z, cache = encoder.forward(params, stacked)
    emb = z[:l]
    pc, g_emb = aca_pc_population_loss(a, emb, K=K, grad=True)
    if nat_inputs is None or alpha == 0.0:
        proj = projection_population_loss(a, z[l:], emb) if nat_inputs is not None else 0.0
        gz = g_emb if nat_inputs is None else np.concatenate([g_emb, np.zeros_like(z[l:])])
        return LossBreakdown(pc, *_pc_split(a, emb, K), proj), encoder.backward(params, cache, gz)
    proj, (g_nat, g_aug) = projection_population_loss(a, z[l:], emb, grad=True)
    gz = np.concatenate([g_emb + alpha * g_aug, alpha * g_nat])
    total = pc + alpha * proj
    return LossBreakdown(total, *_pc_split(a, emb, K), proj), encoder.backward(params, cache, gz)


def _pc_split(a, emb, K):
    n = a.n
    K = float(n) if K is None else float(K)
    pa = marginals(a).marginal
    align = -2.0 / n * float(np.sum((a.probs @ emb) ** 2))
    c = emb.T @ (pa[:, None] * emb)
    return align, K * float(np.sum(c**2))
