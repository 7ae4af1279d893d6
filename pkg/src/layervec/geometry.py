"""Closed cubic Bezier paths, flattening, winding numbers and distance fields.

Coordinates are in pixels with the origin at the top-left corner of the
canvas; x grows to the right and y grows downwards. Pixel ``(row, col)`` is
sampled at its center ``(col + 0.5, row + 0.5)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

DEFAULT_TOL = 0.25
DEFAULT_SEGMENTS = 4
_MAX_DEPTH = 12


class ClosedBezierPath:
    """A closed chain of ``s`` cubic segments stored as ``3s`` control points.

    Segment ``k`` uses ``points[3k], points[3k+1], points[3k+2]`` and the
    first point of the next segment, so the outline is closed by construction.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.array(points, dtype=np.float64).reshape(-1, 2)
        if len(pts) == 0 or len(pts) % 3:
            raise ValueError(f"closed path needs 3s control points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("control points must be finite")
        pts.flags.writeable = False
        self.points = pts

    @property
    def segments(self) -> int:
        return len(self.points) // 3

    def quads(self) -> np.ndarray:
        """Control quadruples as an ``(s, 4, 2)`` array."""
        return _quads(self.points)

    def transformed(self, matrix, offset=(0.0, 0.0)) -> "ClosedBezierPath":
        m = np.asarray(matrix, dtype=np.float64)
        return ClosedBezierPath(self.points @ m.T + np.asarray(offset, dtype=np.float64))

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return isinstance(other, ClosedBezierPath) and np.array_equal(self.points, other.points)

    def __repr__(self):
        return f"ClosedBezierPath(segments={self.segments})"


def _quads(points: np.ndarray) -> np.ndarray:
    n = len(points)
    idx = np.arange(n // 3)[:, None] * 3 + np.arange(4)[None, :]
    return points[idx % n]


def segment_indices(n_points: int) -> np.ndarray:
    """``(s, 4)`` control point indices per segment of a closed chain."""
    idx = np.arange(n_points // 3)[:, None] * 3 + np.arange(4)[None, :]
    return idx % n_points


@dataclass(frozen=True)
class Polyline:
    vertices: np.ndarray
    segment: np.ndarray
    t: np.ndarray
    closed: bool = True
    source_params: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "source_params", list(zip(self.segment.tolist(), self.t.tolist())))

    def edges(self) -> np.ndarray:
        """``(E, 4)`` array of ``x0, y0, x1, y1`` rows."""
        v = self.vertices
        nxt = np.roll(v, -1, axis=0) if self.closed else v[1:]
        start = v if self.closed else v[:-1]
        return np.hstack([start, nxt])

    def __len__(self):
        return len(self.vertices)


def eval_cubic(quad, t: float) -> np.ndarray:
    assert 0.0 <= t <= 1.0, t
    q = np.asarray(quad, dtype=np.float64)
    mt = 1.0 - t
    return mt**3 * q[0] + 3 * mt * mt * t * q[1] + 3 * mt * t * t * q[2] + t**3 * q[3]


def bernstein(t) -> np.ndarray:
    """Cubic Bernstein basis, shape ``t.shape + (4,)``."""
    t = np.asarray(t, dtype=np.float64)
    mt = 1.0 - t
    return np.stack([mt**3, 3 * mt * mt * t, 3 * mt * t * t, t**3], axis=-1)


@numba.njit(cache=True)
def _point_segment_dist(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    ll = dx * dx + dy * dy
    u = 0.0
    if ll > 0.0:
        u = ((px - ax) * dx + (py - ay) * dy) / ll
        if u < 0.0:
            u = 0.0
        elif u > 1.0:
            u = 1.0
    qx = ax + u * dx - px
    qy = ay + u * dy - py
    return math.sqrt(qx * qx + qy * qy), u


@numba.njit(cache=True)
def _flatten_kernel(points, tol, max_depth):
    n = points.shape[0]
    s = n // 3
    cap = s * (1 << max_depth)
    out_seg = np.empty(cap, dtype=np.int64)
    out_t = np.empty(cap, dtype=np.float64)
    count = 0
    stack = np.empty((max_depth * 2 + 2, 10), dtype=np.float64)
    for k in range(s):
        i3 = (3 * k + 3) % n
        stack[0, 0] = points[3 * k, 0]
        stack[0, 1] = points[3 * k, 1]
        stack[0, 2] = points[3 * k + 1, 0]
        stack[0, 3] = points[3 * k + 1, 1]
        stack[0, 4] = points[3 * k + 2, 0]
        stack[0, 5] = points[3 * k + 2, 1]
        stack[0, 6] = points[i3, 0]
        stack[0, 7] = points[i3, 1]
        stack[0, 8] = 0.0
        stack[0, 9] = 0.0
        top = 1
        while top > 0:
            top -= 1
            x0 = stack[top, 0]
            y0 = stack[top, 1]
            x1 = stack[top, 2]
            y1 = stack[top, 3]
            x2 = stack[top, 4]
            y2 = stack[top, 5]
            x3 = stack[top, 6]
            y3 = stack[top, 7]
            t0 = stack[top, 8]
            # the t-span of a piece is 0.5**depth
            depth = int(stack[top, 9])
            d1, _ = _point_segment_dist(x1, y1, x0, y0, x3, y3)
            d2, _ = _point_segment_dist(x2, y2, x0, y0, x3, y3)
            if (d1 <= tol and d2 <= tol) or depth >= max_depth:
                out_seg[count] = k
                out_t[count] = t0
                count += 1
                continue
            # de Casteljau split at the middle
            ax = 0.5 * (x0 + x1)
            ay = 0.5 * (y0 + y1)
            bx = 0.5 * (x1 + x2)
            by = 0.5 * (y1 + y2)
            cx = 0.5 * (x2 + x3)
            cy = 0.5 * (y2 + y3)
            abx = 0.5 * (ax + bx)
            aby = 0.5 * (ay + by)
            bcx = 0.5 * (bx + cx)
            bcy = 0.5 * (by + cy)
            mx = 0.5 * (abx + bcx)
            my = 0.5 * (aby + bcy)
            half = 0.5 ** (depth + 1)
            # right half first so the left half is popped first
            stack[top, 0] = mx
            stack[top, 1] = my
            stack[top, 2] = bcx
            stack[top, 3] = bcy
            stack[top, 4] = cx
            stack[top, 5] = cy
            stack[top, 6] = x3
            stack[top, 7] = y3
            stack[top, 8] = t0 + half
            stack[top, 9] = depth + 1
            top += 1
            stack[top, 0] = x0
            stack[top, 1] = y0
            stack[top, 2] = ax
            stack[top, 3] = ay
            stack[top, 4] = abx
            stack[top, 5] = aby
            stack[top, 6] = mx
            stack[top, 7] = my
            stack[top, 8] = t0
            stack[top, 9] = depth + 1
            top += 1
    return out_seg[:count].copy(), out_t[:count].copy()


def flatten_params(points: np.ndarray, tol: float = DEFAULT_TOL):
    """Adaptive subdivision parameters ``(segment, t)`` for a closed chain."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _flatten_kernel(np.ascontiguousarray(points, dtype=np.float64), float(tol), _MAX_DEPTH)


def vertices_at(points: np.ndarray, seg: np.ndarray, t: np.ndarray) -> np.ndarray:
    idx = segment_indices(len(points))[seg]
    basis = bernstein(t)
    return np.einsum("vk,vkd->vd", basis, points[idx])


def flatten(path: ClosedBezierPath, tol: float = DEFAULT_TOL) -> Polyline:
    """Flatten a closed path so the polyline deviates at most ``tol`` pixels.

    A piece is accepted once both inner control points lie within ``tol`` of
    its chord; the curve stays in the convex hull of its control points, so
    that bounds the deviation as well.
    """
    seg, t = flatten_params(path.points, tol)
    return Polyline(vertices_at(path.points, seg, t), seg, t, closed=True)


def winding_number(poly: Polyline, point) -> int:
    """Signed number of turns of ``poly`` around ``point`` (ray towards +x)."""
    if not poly.closed:
        raise ValueError("winding number needs a closed polyline")
    px, py = float(point[0]), float(point[1])
    e = poly.edges()
    ya, yb = e[:, 1], e[:, 3]
    crosses = (ya <= py) != (yb <= py)
    if not crosses.any():
        return 0
    e = e[crosses]
    ya, yb = e[:, 1], e[:, 3]
    xc = e[:, 0] + (py - ya) * (e[:, 2] - e[:, 0]) / (yb - ya)
    direction = np.where(yb > ya, 1, -1)
    return int(direction[xc > px].sum())


@numba.njit(cache=True)
def _winding_grid(verts, x0, y0, w, h):
    acc = np.zeros((h, w + 1), dtype=np.int32)
    n = verts.shape[0]
    for i in range(n):
        ax = verts[i, 0]
        ay = verts[i, 1]
        j = i + 1
        if j == n:
            j = 0
        bx = verts[j, 0]
        by = verts[j, 1]
        if ay == by:
            continue
        direction = 1 if by > ay else -1
        lo = min(ay, by)
        hi = max(ay, by)
        # rows whose center c satisfies lo <= c < hi
        r0 = int(math.ceil(lo - y0 - 0.5))
        r1 = int(math.ceil(hi - y0 - 0.5))
        if r0 < 0:
            r0 = 0
        if r1 > h:
            r1 = h
        slope = (bx - ax) / (by - ay)
        for r in range(r0, r1):
            cy = y0 + r + 0.5
            xc = ax + (cy - ay) * slope
            c = int(math.ceil(xc - x0 - 0.5))
            if c < 0:
                c = 0
            elif c > w:
                c = w
            acc[r, 0] += direction
            acc[r, c] -= direction
    out = np.empty((h, w), dtype=np.int32)
    for r in range(h):
        run = 0
        for c in range(w):
            run += acc[r, c]
            out[r, c] = run
    return out


def winding_grid(vertices: np.ndarray, x0: int, y0: int, width: int, height: int) -> np.ndarray:
    """Winding number at every pixel center of a ``height x width`` window."""
    return _winding_grid(np.ascontiguousarray(vertices, dtype=np.float64), int(x0), int(y0), int(width), int(height))


@numba.njit(cache=True)
def _distance_band(verts, x0, y0, w, h, cutoff):
    dist = np.full((h, w), np.inf)
    edge = np.full((h, w), -1, dtype=np.int64)
    upar = np.zeros((h, w))
    n = verts.shape[0]
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        ax = verts[i, 0]
        ay = verts[i, 1]
        bx = verts[j, 0]
        by = verts[j, 1]
        c0 = int(math.floor(min(ax, bx) - cutoff - x0 - 0.5))
        c1 = int(math.ceil(max(ax, bx) + cutoff - x0 - 0.5))
        r0 = int(math.floor(min(ay, by) - cutoff - y0 - 0.5))
        r1 = int(math.ceil(max(ay, by) + cutoff - y0 - 0.5))
        if c0 < 0:
            c0 = 0
        if r0 < 0:
            r0 = 0
        if c1 > w - 1:
            c1 = w - 1
        if r1 > h - 1:
            r1 = h - 1
        for r in range(r0, r1 + 1):
            py = y0 + r + 0.5
            for c in range(c0, c1 + 1):
                px = x0 + c + 0.5
                d, u = _point_segment_dist(px, py, ax, ay, bx, by)
                if d < dist[r, c] and d <= cutoff:
                    dist[r, c] = d
                    edge[r, c] = i
                    upar[r, c] = u
    return dist, edge, upar


def distance_band(vertices, x0, y0, width, height, cutoff):
    """Distance to the closed polyline for pixels within ``cutoff``.

    Returns ``(dist, edge, u)``; pixels farther than ``cutoff`` get
    ``inf`` and edge ``-1``. ``u`` is the position of the closest point
    along its edge.
    """
    return _distance_band(
        np.ascontiguousarray(vertices, dtype=np.float64),
        int(x0), int(y0), int(width), int(height), float(cutoff),
    )


@numba.njit(cache=True)
def _distance_grid(verts, w, h, cell):
    n = verts.shape[0]
    gx0 = min(0.0, verts[:, 0].min())
    gy0 = min(0.0, verts[:, 1].min())
    gx1 = max(float(w), verts[:, 0].max())
    gy1 = max(float(h), verts[:, 1].max())
    nx = int((gx1 - gx0) / cell) + 1
    ny = int((gy1 - gy0) / cell) + 1
    # bin edges by bounding box (CSR layout)
    counts = np.zeros(nx * ny + 1, dtype=np.int64)
    for i in range(n):
        j = (i + 1) % n
        cx0 = int((min(verts[i, 0], verts[j, 0]) - gx0) / cell)
        cx1 = int((max(verts[i, 0], verts[j, 0]) - gx0) / cell)
        cy0 = int((min(verts[i, 1], verts[j, 1]) - gy0) / cell)
        cy1 = int((max(verts[i, 1], verts[j, 1]) - gy0) / cell)
        for cy in range(cy0, cy1 + 1):
            for cx in range(cx0, cx1 + 1):
                counts[cy * nx + cx + 1] += 1
    for k in range(nx * ny):
        counts[k + 1] += counts[k]
    fill = counts[:-1].copy()
    items = np.empty(counts[-1], dtype=np.int64)
    for i in range(n):
        j = (i + 1) % n
        cx0 = int((min(verts[i, 0], verts[j, 0]) - gx0) / cell)
        cx1 = int((max(verts[i, 0], verts[j, 0]) - gx0) / cell)
        cy0 = int((min(verts[i, 1], verts[j, 1]) - gy0) / cell)
        cy1 = int((max(verts[i, 1], verts[j, 1]) - gy0) / cell)
        for cy in range(cy0, cy1 + 1):
            for cx in range(cx0, cx1 + 1):
                items[fill[cy * nx + cx]] = i
                fill[cy * nx + cx] += 1
    out = np.empty((h, w))
    rmax = max(nx, ny)
    for r in range(h):
        py = r + 0.5
        pcy = int((py - gy0) / cell)
        for c in range(w):
            px = c + 0.5
            pcx = int((px - gx0) / cell)
            best = np.inf
            for ring in range(rmax + 1):
                for cy in range(pcy - ring, pcy + ring + 1):
                    if cy < 0 or cy >= ny:
                        continue
                    edge_row = cy == pcy - ring or cy == pcy + ring
                    step = 1 if edge_row else 2 * ring
                    if step == 0:
                        step = 1
                    cx = pcx - ring
                    while cx <= pcx + ring:
                        if 0 <= cx < nx:
                            b = cy * nx + cx
                            for q in range(counts[b], counts[b + 1]):
                                i = items[q]
                                j = (i + 1) % n
                                d, _ = _point_segment_dist(px, py, verts[i, 0], verts[i, 1], verts[j, 0], verts[j, 1])
                                if d < best:
                                    best = d
                        cx += step
                # anything in a farther ring is at least ring * cell away
                if best <= ring * cell:
                    break
            out[r, c] = best
    return out


def unsigned_distance_map(path: ClosedBezierPath, width: int, height: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Distance from every pixel center to the flattened outline of ``path``.

    Edges are binned into a uniform grid (cell ``max(4, mean edge length)``)
    and searched in expanding rings, so the cost stays close to linear in
    pixels plus edges.
    """
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    poly = flatten(path, tol)
    e = poly.edges()
    mean_len = float(np.hypot(e[:, 2] - e[:, 0], e[:, 3] - e[:, 1]).mean())
    cell = max(4.0, mean_len)
    return _distance_grid(np.ascontiguousarray(poly.vertices), int(width), int(height), cell)


@numba.njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@numba.njit(cache=True)
def _count_crossings(verts):
    n = verts.shape[0]
    total = 0
    for i in range(n):
        i1 = (i + 1) % n
        ax, ay = verts[i, 0], verts[i, 1]
        bx, by = verts[i1, 0], verts[i1, 1]
        for j in range(i + 2, n):
            j1 = (j + 1) % n
            if j1 == i:
                continue
            cx, cy = verts[j, 0], verts[j, 1]
            dx, dy = verts[j1, 0], verts[j1, 1]
            o1 = _orient(ax, ay, bx, by, cx, cy)
            o2 = _orient(ax, ay, bx, by, dx, dy)
            o3 = _orient(cx, cy, dx, dy, ax, ay)
            o4 = _orient(cx, cy, dx, dy, bx, by)
            if o1 * o2 < 0.0 and o3 * o4 < 0.0:
                total += 1
    return total


def count_self_intersections(path: ClosedBezierPath, tol: float = DEFAULT_TOL) -> int:
    """Transversal crossings between non-adjacent edges of the flattened outline."""
    poly = flatten(path, tol)
    return int(_count_crossings(np.ascontiguousarray(poly.vertices)))


def make_circle_path(center, radius: float = 5.0, segments: int = DEFAULT_SEGMENTS) -> ClosedBezierPath:
    if radius <= 0 or segments < 1:
        raise ValueError("radius must be positive and segments >= 1")
    n = 3 * segments
    ang = 2 * np.pi * np.arange(n) / n
    cx, cy = float(center[0]), float(center[1])
    pts = np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)], axis=1)
    return ClosedBezierPath(pts)
