"""Differentiable rasterizer for ordered, flat-filled closed Bezier paths.

Each path is flattened, its nonzero winding gives the inside/outside sign,
and the distance to the outline turns into a soft coverage ramp of
half-width ``sigma``. Paths are composited source-over in list order
(index 0 at the bottom) over an opaque background.

Only a window around each path (its bounding box padded by the largest
distance we care about) is touched, which keeps both the forward pass and
the tape proportional to the pixels a path can influence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .geometry import (
    DEFAULT_TOL,
    ClosedBezierPath,
    bernstein,
    distance_band,
    flatten_params,
    segment_indices,
    vertices_at,
    winding_grid,
)

WHITE = np.array([1.0, 1.0, 1.0, 1.0])
DEFAULT_SIGMA = 1.0
EXPORT_SIGMA = 0.5


def soft_coverage(sd, sigma: float):
    """Smoothstep coverage: 1 deep inside (``sd <= -sigma``), 0 outside."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    u = np.clip(np.asarray(sd, dtype=np.float64) / sigma, -1.0, 1.0)
    return 0.5 - (3.0 * u - u**3) / 4.0


def soft_coverage_grad(sd, sigma: float):
    """Derivative of :func:`soft_coverage` with respect to ``sd``."""
    sd = np.asarray(sd, dtype=np.float64)
    u = sd / sigma
    g = -(3.0 - 3.0 * u * u) / (4.0 * sigma)
    return np.where(np.abs(u) < 1.0, g, 0.0)


def as_color(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64).ravel()
    if c.size == 3:
        c = np.append(c, 1.0)
    if c.size != 4:
        raise ValueError(f"expected an RGB or RGBA color, got {c.size} values")
    return c


@dataclass
class DistanceMap:
    """Distances of one path, stored for a window of a ``width x height`` canvas.

    Pixels outside the window, and ``inf`` entries inside it, are farther
    from the outline than the distance the map was computed for.
    """

    width: int
    height: int
    x0: int
    y0: int
    values: np.ndarray

    @property
    def window(self):
        h, w = self.values.shape
        return slice(self.y0, self.y0 + h), slice(self.x0, self.x0 + w)

    def full(self) -> np.ndarray:
        d = np.full((self.height, self.width), np.inf)
        d[self.window] = self.values
        return d


@numba.njit(cache=True)
def _blend(out, x0, y0, alpha, color):
    h, w = alpha.shape
    for i in range(h):
        for j in range(w):
            a = alpha[i, j]
            for c in range(3):
                out[y0 + i, x0 + j, c] = out[y0 + i, x0 + j, c] * (1.0 - a) + color[c] * a


@numba.njit(cache=True)
def _coverage_alpha(inside, dist, sigma, opacity):
    h, w = dist.shape
    cov = np.empty((h, w))
    alpha = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            u = dist[i, j] / sigma
            if inside[i, j]:
                u = -u
            if u > 1.0:
                u = 1.0
            elif u < -1.0:
                u = -1.0
            c = 0.5 - (3.0 * u - u * u * u) / 4.0
            cov[i, j] = c
            alpha[i, j] = opacity * c
    return cov, alpha


@numba.njit(cache=True)
def _backprop_path(g, x0, y0, inside, dist, edge, upar, cov, alpha, below, verts, color, sigma):
    h, w = dist.shape
    nv = verts.shape[0]
    gvert = np.zeros((nv, 2))
    gcol = np.zeros(4)
    opacity = color[3]
    for i in range(h):
        py = y0 + i + 0.5
        for j in range(w):
            al = alpha[i, j]
            dal = 0.0
            for c in range(3):
                gc = g[y0 + i, x0 + j, c]
                dal += gc * (color[c] - below[i, j, c])
                gcol[c] += gc * al
                g[y0 + i, x0 + j, c] = gc * (1.0 - al)
            gcol[3] += dal * cov[i, j]
            d = dist[i, j]
            if not (0.0 < d < sigma):
                continue
            u = d / sigma
            if inside[i, j]:
                u = -u
            dsd = dal * opacity * (-(3.0 - 3.0 * u * u) / (4.0 * sigma))
            ddist = -dsd if inside[i, j] else dsd
            e0 = edge[i, j]
            e1 = e0 + 1
            if e1 == nv:
                e1 = 0
            t = upar[i, j]
            qx = verts[e0, 0] + t * (verts[e1, 0] - verts[e0, 0])
            qy = verts[e0, 1] + t * (verts[e1, 1] - verts[e0, 1])
            px = x0 + j + 0.5
            nx = ddist * (qx - px) / d
            ny = ddist * (qy - py) / d
            gvert[e0, 0] += (1.0 - t) * nx
            gvert[e0, 1] += (1.0 - t) * ny
            gvert[e1, 0] += t * nx
            gvert[e1, 1] += t * ny
    return gvert, gcol


@dataclass
class PathRecord:
    """What the backward pass needs to know about one composited path."""

    index: int
    x0: int
    y0: int
    seg: np.ndarray
    t: np.ndarray
    vertices: np.ndarray
    dist: np.ndarray
    edge: np.ndarray
    u: np.ndarray
    inside: np.ndarray
    coverage: np.ndarray
    alpha: np.ndarray
    below: np.ndarray

    @property
    def window(self):
        h, w = self.dist.shape
        return slice(self.y0, self.y0 + h), slice(self.x0, self.x0 + w)

    @property
    def signed_distance(self) -> np.ndarray:
        return np.where(self.inside, -self.dist, self.dist)


@dataclass
class RenderTape:
    width: int
    height: int
    background: np.ndarray
    sigma: float
    cutoff: float
    points: list
    colors: np.ndarray
    records: list = field(default_factory=list)

    def replay(self) -> np.ndarray:
        out = np.empty((self.height, self.width, 3))
        out[:] = self.background[:3]
        for rec in self.records:
            if rec is not None:
                _blend(out, rec.x0, rec.y0, rec.alpha, self.colors[rec.index])
        return out

    @property
    def n_records(self) -> int:
        """Number of per-pixel path entries held by the tape."""
        return sum(r.dist.size for r in self.records if r is not None)

    def distance_maps(self) -> list:
        """Windowed distance map per path, exact up to ``self.cutoff``."""
        maps = []
        for rec in self.records:
            if rec is None:
                maps.append(DistanceMap(self.width, self.height, 0, 0, np.full((0, 0), np.inf)))
            else:
                maps.append(DistanceMap(self.width, self.height, rec.x0, rec.y0, rec.dist))
        return maps


def _window(vertices, width, height, pad):
    lo = vertices.min(axis=0) - pad - 0.5
    hi = vertices.max(axis=0) + pad - 0.5
    c0 = max(int(np.floor(lo[0])), 0)
    r0 = max(int(np.floor(lo[1])), 0)
    c1 = min(int(np.ceil(hi[0])), width - 1)
    r1 = min(int(np.ceil(hi[1])), height - 1)
    if c1 < c0 or r1 < r0:
        return None
    return c0, r0, c1 - c0 + 1, r1 - r0 + 1


def render_with_tape(
    paths,
    colors,
    width: int,
    height: int,
    background=WHITE,
    sigma: float = DEFAULT_SIGMA,
    tol: float = DEFAULT_TOL,
    band: float = 0.0,
    params=None,
):
    """Render ``paths`` and keep a tape for :func:`backprop`.

    ``band`` widens the distance computation beyond ``sigma`` so the tape
    also carries the distance maps the UDF weights need. ``params`` fixes
    the flattening ``(segment, t)`` per path instead of recomputing it.
    """
    if len(paths) != len(colors):
        raise ValueError(f"{len(paths)} paths but {len(colors)} colors")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    width, height = int(width), int(height)
    bg = as_color(background)
    cols = np.array([as_color(c) for c in colors]).reshape(-1, 4)
    pts = [p.points if isinstance(p, ClosedBezierPath) else np.asarray(p, dtype=np.float64) for p in paths]
    cutoff = max(float(sigma), float(band))
    tape = RenderTape(width, height, bg, float(sigma), cutoff, pts, cols)

    out = np.empty((height, width, 3))
    out[:] = bg[:3]
    for k, p in enumerate(pts):
        seg, t = flatten_params(p, tol) if params is None else params[k]
        verts = vertices_at(p, seg, t)
        win = _window(verts, width, height, cutoff + 1.0)
        if win is None:
            tape.records.append(None)
            continue
        x0, y0, w, h = win
        inside = winding_grid(verts, x0, y0, w, h) != 0
        dist, edge, u = distance_band(verts, x0, y0, w, h, cutoff)
        cov, alpha = _coverage_alpha(inside, dist, float(sigma), cols[k, 3])
        below = out[y0:y0 + h, x0:x0 + w].copy()
        _blend(out, x0, y0, alpha, cols[k])
        tape.records.append(PathRecord(k, x0, y0, seg, t, verts, dist, edge, u, inside, cov, alpha, below))
    return out, tape


def render(paths, colors, width, height, background=WHITE, sigma=DEFAULT_SIGMA, tol=DEFAULT_TOL):
    image, _ = render_with_tape(paths, colors, width, height, background, sigma, tol)
    return image


def backprop(tape: RenderTape, dL_dimage):
    """Gradients of a pixel-wise loss with respect to control points and colors.

    The chain rule runs exactly through compositing, the coverage ramp and
    the point-to-edge distance. Polyline vertices map back to control points
    through the Bernstein basis at their recorded ``t``, which is held fixed.

    Returns ``(point_grads, color_grads)``: one ``(3s, 2)`` array per path and
    an ``(n, 4)`` array.
    """
    g = np.array(dL_dimage, dtype=np.float64, copy=True)
    if g.shape != (tape.height, tape.width, 3):
        raise ValueError(f"gradient shape {g.shape} does not match image {(tape.height, tape.width, 3)}")
    n = len(tape.points)
    point_grads = [np.zeros_like(p) for p in tape.points]
    color_grads = np.zeros((n, 4))
    for rec in reversed(tape.records):
        if rec is None:
            continue
        k = rec.index
        gvert, color_grads[k] = _backprop_path(
            g, rec.x0, rec.y0, rec.inside, rec.dist, rec.edge, rec.u, rec.coverage,
            rec.alpha, rec.below, rec.vertices, tape.colors[k], tape.sigma,
        )
        pts = tape.points[k]
        idx = segment_indices(len(pts))[rec.seg].ravel()
        basis = bernstein(rec.t)
        for d in range(2):
            point_grads[k][:, d] = np.bincount(idx, (basis * gvert[:, d][:, None]).ravel(), len(pts))
    return point_grads, color_grads
