"""Deterministic synthetic corpus of flat-color compositions.

Every shape is a closed cubic Bezier path; images are produced by
:func:`rasterize_supersampled`, a hard-fill winding rasterizer averaged over
16 x 16 samples per pixel. It shares no code with the soft renderer, so it
doubles as a reference for it.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .geometry import ClosedBezierPath, bernstein, segment_indices
from .initialize import label_components

SIZE = 240
WHITE = (255, 255, 255)


def _arc_quads(center, radius, a0, a1):
    """Cubic pieces approximating a circular arc from angle ``a0`` to ``a1``."""
    cx, cy = center
    n = max(1, math.ceil(abs(a1 - a0) / (math.pi / 2) - 1e-9))
    quads = []
    for i in range(n):
        s = a0 + (a1 - a0) * i / n
        e = a0 + (a1 - a0) * (i + 1) / n
        k = 4.0 / 3.0 * math.tan((e - s) / 4.0) * radius
        p0 = (cx + radius * math.cos(s), cy + radius * math.sin(s))
        p3 = (cx + radius * math.cos(e), cy + radius * math.sin(e))
        p1 = (p0[0] - k * math.sin(s), p0[1] + k * math.cos(s))
        p2 = (p3[0] + k * math.sin(e), p3[1] - k * math.cos(e))
        quads.append((p0, p1, p2, p3))
    return quads


def _line_quad(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return (tuple(a), tuple(a + (b - a) / 3), tuple(a + 2 * (b - a) / 3), tuple(b))


def _chain(quads) -> ClosedBezierPath:
    return ClosedBezierPath([pt for q in quads for pt in q[:3]])


def ellipse(cx, cy, rx, ry, rotation=0.0) -> ClosedBezierPath:
    quads = _arc_quads((0.0, 0.0), 1.0, 0.0, 2 * math.pi)
    base = _chain(quads).points * [rx, ry]
    c, s = math.cos(rotation), math.sin(rotation)
    return ClosedBezierPath(base @ np.array([[c, s], [-s, c]]) + [cx, cy])


def disc(cx, cy, r) -> ClosedBezierPath:
    return ellipse(cx, cy, r, r)


def rounded_square(cx, cy, half, corner) -> ClosedBezierPath:
    h, r = half, corner
    quads = []
    # corners clockwise on screen starting at the right side
    centers = [(cx + h - r, cy + h - r), (cx - h + r, cy + h - r), (cx - h + r, cy - h + r), (cx + h - r, cy - h + r)]
    for i, (ox, oy) in enumerate(centers):
        a0 = i * math.pi / 2
        quads += _arc_quads((ox, oy), r, a0, a0 + math.pi / 2)
        nxt = centers[(i + 1) % 4]
        a1 = a0 + math.pi / 2
        start = (ox + r * math.cos(a1), oy + r * math.sin(a1))
        end = (nxt[0] + r * math.cos(a1), nxt[1] + r * math.sin(a1))
        quads.append(_line_quad(start, end))
    return _chain(quads)


def crescent(cx, cy, r_outer, r_inner, offset, angle=0.0) -> ClosedBezierPath:
    """Outer disc minus an inner disc shifted by ``offset`` along ``angle``."""
    d = offset
    xi = (r_outer**2 - r_inner**2 + d * d) / (2 * d)
    yi = math.sqrt(r_outer**2 - xi * xi)
    a = math.atan2(yi, xi)
    b = math.atan2(yi, xi - d)
    # outer arc away from the inner disc, then the inner arc back through angle pi
    outer = _arc_quads((0.0, 0.0), r_outer, a, 2 * math.pi - a)
    inner = _arc_quads((d, 0.0), r_inner, -b, b - 2 * math.pi)
    pts = _chain(outer + inner).points
    c, s = math.cos(angle), math.sin(angle)
    return ClosedBezierPath(pts @ np.array([[c, s], [-s, c]]) + [cx, cy])


def dense_polyline(points: np.ndarray, per_segment: int = 64) -> np.ndarray:
    idx = segment_indices(len(points))
    t = np.arange(per_segment) / per_segment
    basis = bernstein(t)
    return np.concatenate([basis @ points[i] for i in idx])


def _winding_rows(poly, ys, xs):
    """Winding number of every ``(x, y)`` sample on a grid, ray towards +x."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    ya, yb = a[:, 1][None, :], b[:, 1][None, :]
    y = ys[:, None]
    hit = (ya <= y) != (yb <= y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = a[:, 0][None, :] + (y - ya) * (b[:, 0] - a[:, 0])[None, :] / (yb - ya)
    direction = np.where(yb > ya, 1, -1) * np.ones_like(xc, dtype=np.int64)
    rows, cols = np.nonzero(hit)
    # samples strictly left of the crossing see it
    pos = np.searchsorted(xs, xc[rows, cols], side="left")
    acc = np.zeros((len(ys), len(xs) + 1), dtype=np.int32)
    np.add.at(acc, (rows, np.zeros_like(rows)), direction[rows, cols])
    np.add.at(acc, (rows, pos), -direction[rows, cols])
    return np.cumsum(acc[:, :-1], axis=1)


def rasterize_supersampled(paths, colors, width, height, background=(1.0, 1.0, 1.0), ss=16, owners=False):
    """Hard-fill nonzero rasterization averaged over ``ss x ss`` samples per pixel.

    With ``owners=True`` also returns, per pixel, the index of the topmost
    path covering all of its samples (``-1`` for mixed or background pixels).
    """
    polys = [dense_polyline(p.points if isinstance(p, ClosedBezierPath) else np.asarray(p)) for p in paths]
    cols = [np.asarray(c, dtype=np.float64) for c in colors]
    cols = [np.append(c, 1.0) if c.size == 3 else c for c in cols]
    offs = (np.arange(ss) + 0.5) / ss
    xs = (np.arange(width)[:, None] + offs[None, :]).ravel()
    out = np.empty((height, width, 3))
    own = np.full((height, width), -1, dtype=np.int64)
    chunk = 16
    bg = np.asarray(background, dtype=np.float64)[:3]
    for r0 in range(0, height, chunk):
        r1 = min(r0 + chunk, height)
        ys = (np.arange(r0, r1)[:, None] + offs[None, :]).ravel()
        acc = np.empty((len(ys), len(xs), 3))
        acc[:] = bg
        top = np.full((len(ys), len(xs)), -1, dtype=np.int64)
        for k, (poly, c) in enumerate(zip(polys, cols)):
            lo, hi = poly[:, 1].min(), poly[:, 1].max()
            if hi < ys[0] or lo > ys[-1]:
                continue
            inside = _winding_rows(poly, ys, xs) != 0
            acc[inside] = acc[inside] * (1 - c[3]) + c[:3] * c[3]
            top[inside] = k
        out[r0:r1] = acc.reshape(r1 - r0, ss, width, ss, 3).mean(axis=(1, 3))
        t = top.reshape(r1 - r0, ss, width, ss)
        first = t[:, :1, :, :1]
        pure = (t == first).all(axis=(1, 3))
        own[r0:r1] = np.where(pure, first[:, 0, :, 0], -1)
    return (out, own) if owners else out


def _rgb(c):
    return tuple(v / 255.0 for v in c)


FACE = (255, 204, 51)
EYE = (250, 250, 250)
PUPIL = (26, 26, 38)
MOUTH = (191, 51, 51)
NOSE = (230, 128, 26)
CHEEK = (255, 140, 153)

FACE_FEATURES = {
    2: ["mouth"],
    3: ["eye_l", "eye_r"],
    4: ["eye_l", "eye_r", "mouth"],
    5: ["eye_l", "eye_r", "mouth", "nose"],
    6: ["eye_l", "eye_r", "mouth", "cheek_l", "cheek_r"],
    7: ["eye_l", "eye_r", "pupil_l", "pupil_r", "mouth", "nose"],
    8: ["eye_l", "eye_r", "pupil_l", "pupil_r", "mouth", "cheek_l", "cheek_r"],
}


def face(k: int, rng):
    """Flat-color face with ``k`` components (face disc plus ``k - 1`` features)."""
    jx, jy = rng.uniform(-6, 6, size=2)
    cx, cy = 120 + jx, 120 + jy
    shapes = {
        "face": (disc(cx, cy, 100 + rng.uniform(-4, 4)), FACE),
        "eye_l": (ellipse(cx - 36, cy - 25, 17, 21), EYE),
        "eye_r": (ellipse(cx + 36, cy - 25, 17, 21), EYE),
        "pupil_l": (disc(cx - 34, cy - 22, 8), PUPIL),
        "pupil_r": (disc(cx + 38, cy - 22, 8), PUPIL),
        "mouth": (ellipse(cx, cy + 45, 40 + rng.uniform(-4, 4), 14), MOUTH),
        "nose": (disc(cx, cy + 10, 10), NOSE),
        "cheek_l": (ellipse(cx - 52, cy + 20, 14, 9), CHEEK),
        "cheek_r": (ellipse(cx + 52, cy + 20, 14, 9), CHEEK),
    }
    names = ["face"] + FACE_FEATURES[k]
    return [(n, *shapes[n]) for n in names]


def _palette(rng, n):
    table = [(220, 40, 40), (40, 90, 210), (30, 160, 70), (240, 170, 20), (140, 60, 180), (20, 170, 190)]
    idx = rng.permutation(len(table))[:n]
    return [table[i] for i in idx]


def corpus_specs(count: int = 20, seed: int = 0):
    """Scene list ``[(name, [(component, path, rgb255), ...]), ...]``; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    scenes = []
    kinds = ["disc"] * 3 + ["square"] * 3 + ["crescent"] * 3 + [f"face{k}" for k in range(2, 9)] + ["mix"] * 4
    while len(kinds) < count:
        kinds.append(kinds[len(kinds) % 20])
    counters = {}
    for kind in kinds[:count]:
        counters[kind] = counters.get(kind, 0) + 1
        name = f"{kind}_{counters[kind]:02d}" if not kind.startswith("face") else f"{kind[:4]}_k{kind[4:]}_{counters[kind]:02d}"
        if kind == "disc":
            (col,) = _palette(rng, 1)
            r = rng.uniform(40, 90)
            cx, cy = rng.uniform(r + 10, SIZE - r - 10, size=2)
            shapes = [("disc", disc(cx, cy, r), col)]
        elif kind == "square":
            (col,) = _palette(rng, 1)
            half = rng.uniform(40, 80)
            cx, cy = rng.uniform(half + 10, SIZE - half - 10, size=2)
            shapes = [("square", rounded_square(cx, cy, half, rng.uniform(12, 30)), col)]
        elif kind == "crescent":
            (col,) = _palette(rng, 1)
            R = rng.uniform(60, 85)
            shapes = [("crescent", crescent(120, 120, R, R * 0.8, R * 0.45, rng.uniform(0, 2 * np.pi)), col)]
        elif kind.startswith("face"):
            shapes = face(int(kind[4:]), rng)
        else:
            n = int(rng.integers(2, 5))
            cols = _palette(rng, n)
            cells = rng.permutation(4)[:n]
            shapes = []
            for i, (cell, col) in enumerate(zip(cells, cols)):
                ox, oy = 60 + 120 * (cell % 2), 60 + 120 * (cell // 2)
                if i % 2 == 0:
                    shapes.append((f"disc{i}", disc(ox, oy, rng.uniform(30, 45)), col))
                else:
                    shapes.append((f"square{i}", rounded_square(ox, oy, rng.uniform(28, 42), 10.0), col))
        scenes.append((name, shapes))
    return scenes


def render_scene(shapes, size=SIZE):
    paths = [s[1] for s in shapes]
    colors = [_rgb(s[2]) for s in shapes]
    img, owners = rasterize_supersampled(paths, colors, size, size, owners=True)
    img8 = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    return img8, owners


def component_stats(img8, shapes, owners):
    """Area and anchor pixel of each component as it appears in the 8-bit image.

    A component is the 4-connected set of pixels holding exactly the shape's
    color that contains the shape's interior.
    """
    stats = []
    for k, (name, _, col) in enumerate(shapes):
        mask = np.all(img8 == np.array(col, dtype=np.uint8), axis=2)
        rows, cols_ = np.nonzero((owners == k) & mask)
        if len(rows) == 0:
            stats.append({"name": name, "color": list(col), "area": 0, "anchor": None})
            continue
        anchor = (int(rows[0]), int(cols_[0]))
        labels, _ = label_components(np.where(mask, 0, -1))
        area = int((labels == labels[anchor]).sum())
        stats.append({"name": name, "color": list(col), "area": area, "anchor": list(anchor)})
    return stats


def generate(out_dir, count: int = 20, seed: int = 0) -> list:
    """Write ``<name>.png``, ``<name>.json`` and ``<name>.truth.svg`` per scene."""
    from PIL import Image

    from .svgio import to_svg

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, shapes in corpus_specs(count, seed):
        img8, owners = render_scene(shapes)
        png = out / f"{name}.png"
        Image.fromarray(img8, "RGB").save(png, optimize=False)
        sidecar = {
            "name": name,
            "width": SIZE,
            "height": SIZE,
            "seed": seed,
            "component_count": len(shapes),
            "components": component_stats(img8, shapes, owners),
            "paths": [np.round(s[1].points, 6).tolist() for s in shapes],
        }
        (out / f"{name}.json").write_text(json.dumps(sidecar, indent=2) + "\n")
        svg = to_svg([s[1] for s in shapes], [_rgb(s[2]) for s in shapes], SIZE, SIZE, background=(1, 1, 1))
        (out / f"{name}.truth.svg").write_text(svg)
        written.append(png)
    return written
