"""Reconstruction and regularization objectives.

``udf_loss`` is a squared error weighted by how close each pixel is to the
path outlines; ``xing_loss`` penalizes control quadruples whose first and
last handles point into each other, which is what self-crossing cubics look
like.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .geometry import ClosedBezierPath, segment_indices

logger = logging.getLogger(__name__)

DEFAULT_TAU = 10.0
DEFAULT_LAMBDA = 0.01
_MIN_HANDLE = 1e-12


@dataclass
class UdfWeights:
    weights: np.ndarray
    tau: float
    degenerate: list = field(default_factory=list)

    @property
    def shape(self):
        return self.weights.shape


@dataclass
class LossReport:
    udf: float
    xing: float
    total: float
    lam: float
    mse: float = float("nan")
    image_grad: Optional[np.ndarray] = field(default=None, repr=False)
    point_grads: Optional[list] = field(default=None, repr=False)
    degenerate_paths: list = field(default_factory=list)
    degenerate_segments: int = 0


def _check_pair(target, rendered):
    target = np.asarray(target, dtype=np.float64)
    rendered = np.asarray(rendered, dtype=np.float64)
    if target.shape != rendered.shape:
        raise ValueError(f"shape mismatch: {target.shape} vs {rendered.shape}")
    return target, rendered


def udf_weights(dmaps, tau: float = DEFAULT_TAU) -> UdfWeights:
    """Thresholded, flipped and normalized distance maps, averaged over paths.

    ``dmaps`` holds full ``H x W`` arrays or windowed
    :class:`~layervec.render.DistanceMap` objects (computed at least up to
    ``tau``).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    dmaps = list(dmaps)
    if not dmaps:
        raise ValueError("need at least one distance map")
    first = dmaps[0]
    shape = (first.height, first.width) if hasattr(first, "window") else np.shape(first)
    total = np.zeros(shape)
    degenerate = []
    for i, d in enumerate(dmaps):
        if hasattr(d, "window"):
            window, vals = d.window, d.values
        else:
            window, vals = (slice(None), slice(None)), np.asarray(d, dtype=np.float64)
        w = np.maximum(tau - np.abs(vals), 0.0)
        s = w.sum()
        if s > 0:
            total[window] += w / s
        else:
            degenerate.append(i)
    if degenerate:
        logger.debug("paths %s have no pixel within tau of their outline", degenerate)
    return UdfWeights(total / len(dmaps), float(tau), degenerate)


@numba.njit(cache=True)
def _weighted_sq(target, rendered, w):
    h, wd, nc = target.shape
    grad = np.empty_like(target)
    loss = 0.0
    for i in range(h):
        for j in range(wd):
            wij = w[i, j]
            for c in range(nc):
                d = target[i, j, c] - rendered[i, j, c]
                loss += wij * d * d
                grad[i, j, c] = -(2.0 / 3.0) * wij * d
    return loss / 3.0, grad


def udf_loss(target, rendered, weights):
    """Return ``(loss, dL/drendered)``; the weights are held constant."""
    target, rendered = _check_pair(target, rendered)
    w = weights.weights if isinstance(weights, UdfWeights) else np.asarray(weights, dtype=np.float64)
    if w.shape != target.shape[:2]:
        raise ValueError(f"weight shape {w.shape} does not match image {target.shape[:2]}")
    loss, grad = _weighted_sq(np.ascontiguousarray(target), np.ascontiguousarray(rendered), np.ascontiguousarray(w))
    return float(loss), grad


def mse(target, rendered) -> float:
    target, rendered = _check_pair(target, rendered)
    return float(np.mean((target - rendered) ** 2))


def mse_loss(target, rendered):
    """Plain MSE with its gradient, as a baseline training objective."""
    target, rendered = _check_pair(target, rendered)
    diff = target - rendered
    return float(np.mean(diff * diff)), -2.0 * diff / diff.size


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def xing_terms(points: np.ndarray):
    """Per-segment self-crossing penalty and its gradient for one path.

    Returns ``(terms, grad, n_degenerate)`` with ``grad`` of ``terms.sum()``
    with respect to ``points``.
    """
    idx = segment_indices(len(points))
    q = points[idx]
    A, B, C, D = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    ab = B - A
    bc = C - B
    cd = D - C
    nab = np.hypot(ab[:, 0], ab[:, 1])
    ncd = np.hypot(cd[:, 0], cd[:, 1])
    # handles shorter than this count as zero length (their product would underflow)
    ok = (nab > _MIN_HANDLE) & (ncd > _MIN_HANDLE)
    gate = (_cross(ab, bc) > 0).astype(np.float64)
    denom = np.where(ok, nab * ncd, 1.0)
    d2 = np.where(ok, _cross(ab, cd) / denom, 0.0)
    terms = gate * np.maximum(-d2, 0.0) + (1.0 - gate) * np.maximum(d2, 0.0)
    # d(term)/d(d2); relu subgradient at 0 is 0
    slope = np.where(gate > 0, -1.0 * (d2 < 0), 1.0 * (d2 > 0)) * ok

    nab2 = np.where(ok, nab * nab, 1.0)
    ncd2 = np.where(ok, ncd * ncd, 1.0)
    perp_cd = np.stack([cd[:, 1], -cd[:, 0]], axis=1)
    perp_ab = np.stack([-ab[:, 1], ab[:, 0]], axis=1)
    g_ab = perp_cd / denom[:, None] - (d2 / nab2)[:, None] * ab
    g_cd = perp_ab / denom[:, None] - (d2 / ncd2)[:, None] * cd
    g_ab *= slope[:, None]
    g_cd *= slope[:, None]
    grad = np.zeros_like(points)
    np.add.at(grad, idx[:, 0], -g_ab)
    np.add.at(grad, idx[:, 1], g_ab)
    np.add.at(grad, idx[:, 2], -g_cd)
    np.add.at(grad, idx[:, 3], g_cd)
    return terms, grad, int((~ok).sum())


def xing_loss(paths):
    """Mean self-crossing penalty over all segments of all paths.

    Returns ``(loss, point_grads, n_degenerate)``.
    """
    pts = [p.points if isinstance(p, ClosedBezierPath) else np.asarray(p, dtype=np.float64) for p in paths]
    if not pts:
        return 0.0, [], 0
    results = [xing_terms(p) for p in pts]
    n_seg = sum(len(r[0]) for r in results)
    loss = float(sum(r[0].sum() for r in results) / n_seg)
    grads = [r[1] / n_seg for r in results]
    n_deg = sum(r[2] for r in results)
    if n_deg:
        logger.debug("%d segments with a zero-length handle skipped in xing loss", n_deg)
    return loss, grads, n_deg


def total_loss(target, rendered, weights, paths, lam: float = DEFAULT_LAMBDA, with_mse: bool = True) -> LossReport:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    udf, image_grad = udf_loss(target, rendered, weights)
    xing, xgrads, n_deg = xing_loss(paths)
    return LossReport(
        udf=udf,
        xing=xing,
        total=udf + lam * xing,
        lam=lam,
        mse=mse(target, rendered) if with_mse else float("nan"),
        image_grad=image_grad,
        point_grads=[lam * g for g in xgrads],
        degenerate_paths=list(weights.degenerate) if isinstance(weights, UdfWeights) else [],
        degenerate_segments=n_deg,
    )
