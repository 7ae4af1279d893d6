"""Choose where new paths start: large, uniformly wrong regions of the canvas."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .geometry import DEFAULT_SEGMENTS, make_circle_path

DEFAULT_C_ALPHA = 0.1
DEFAULT_BINS = 200
DEFAULT_RADIUS = 5.0


@dataclass(frozen=True)
class ComponentSeed:
    center: tuple
    area: int
    mean_color: tuple
    bin_index: int
    label: int = -1


def difference_map(target, rendered) -> np.ndarray:
    """Per-pixel l1 color difference, averaged over channels (values in [0, 1])."""
    target = np.asarray(target, dtype=np.float64)
    rendered = np.asarray(rendered, dtype=np.float64)
    if rendered.ndim == 1:
        rendered = np.broadcast_to(rendered[:3], target.shape)
    if target.shape != rendered.shape:
        raise ValueError(f"shape mismatch: {target.shape} vs {rendered.shape}")
    return np.abs(target - rendered).mean(axis=2)


def quantize(diff, c_alpha: float = DEFAULT_C_ALPHA, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Bin label per pixel, ``-1`` where the difference is below ``c_alpha``.

    Surviving values are spread over ``bins`` equal-width bins on
    ``[c_alpha, max(diff)]``; the maximum falls into the last bin.
    """
    diff = np.asarray(diff, dtype=np.float64)
    keep = diff >= c_alpha
    labels = np.full(diff.shape, -1, dtype=np.int64)
    if not keep.any():
        return labels
    top = diff[keep].max()
    span = top - c_alpha
    if span <= 0:
        labels[keep] = 0
        return labels
    b = np.floor((diff[keep] - c_alpha) / span * bins).astype(np.int64)
    labels[keep] = np.clip(b, 0, bins - 1)
    return labels


@numba.njit(cache=True)
def _label_equal_regions(binmap):
    """4-connected components of pixels that share the same non-negative bin."""
    h, w = binmap.shape
    labels = np.full((h, w), -1, dtype=np.int64)
    queue = np.empty(h * w, dtype=np.int64)
    n = 0
    for r0 in range(h):
        for c0 in range(w):
            b = binmap[r0, c0]
            if b < 0 or labels[r0, c0] >= 0:
                continue
            labels[r0, c0] = n
            head = 0
            tail = 1
            queue[0] = r0 * w + c0
            while head < tail:
                q = queue[head]
                head += 1
                r = q // w
                c = q % w
                for k in range(4):
                    rr = r
                    cc = c
                    if k == 0:
                        rr = r - 1
                    elif k == 1:
                        rr = r + 1
                    elif k == 2:
                        cc = c - 1
                    else:
                        cc = c + 1
                    if rr < 0 or rr >= h or cc < 0 or cc >= w:
                        continue
                    if labels[rr, cc] >= 0 or binmap[rr, cc] != b:
                        continue
                    labels[rr, cc] = n
                    queue[tail] = rr * w + cc
                    tail += 1
            n += 1
    return labels, n


def label_components(binmap):
    """Label map and component count; labels follow raster order of each component's first pixel."""
    return _label_equal_regions(np.ascontiguousarray(binmap, dtype=np.int64))


def select_components(diff, target, k: int, c_alpha: float = DEFAULT_C_ALPHA, bins: int = DEFAULT_BINS):
    """Up to ``k`` seeds on the largest color-homogeneous wrong regions.

    Components are ordered by area (largest first), ties going to the one
    whose first pixel comes earlier in raster order. Each seed sits at the
    component's center of mass, or at the component pixel closest to it when
    the center of mass falls outside the component.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < c_alpha < 1:
        raise ValueError("c_alpha must lie in (0, 1)")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    diff = np.asarray(diff, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    binmap = quantize(diff, c_alpha, bins)
    labels, n = label_components(binmap)
    if n == 0:
        return []
    flat = labels.ravel()
    valid = flat >= 0
    areas = np.bincount(flat[valid], minlength=n)
    # stable sort keeps raster order among equal areas
    order = np.argsort(-areas, kind="stable")[:k]
    h, w = labels.shape
    seeds = []
    for lab in order:
        rows, cols = np.nonzero(labels == lab)
        cy = rows.mean() + 0.5
        cx = cols.mean() + 0.5
        r, c = int(np.floor(cy)), int(np.floor(cx))
        if not (0 <= r < h and 0 <= c < w and labels[r, c] == lab):
            d2 = (cols + 0.5 - cx) ** 2 + (rows + 0.5 - cy) ** 2
            j = int(np.argmin(d2))
            cx, cy = cols[j] + 0.5, rows[j] + 0.5
            r, c = rows[j], cols[j]
        color = target[rows, cols, :3].mean(axis=0)
        seeds.append(ComponentSeed(
            center=(float(cx), float(cy)),
            area=int(areas[lab]),
            mean_color=tuple(float(v) for v in color),
            bin_index=int(binmap[r, c]),
            label=int(lab),
        ))
    return seeds


def init_paths(seeds, radius: float = DEFAULT_RADIUS, segments: int = DEFAULT_SEGMENTS, target=None):
    """A circle path per seed, colored with the target's mean inside the circle."""
    target = np.asarray(target, dtype=np.float64)
    h, w = target.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    paths, colors = [], []
    for seed in seeds:
        cx, cy = seed.center
        paths.append(make_circle_path((cx, cy), radius, segments))
        inside = (xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2 <= radius * radius
        if inside.any():
            rgb = target[inside][:, :3].mean(axis=0)
        else:
            r = min(max(int(cy), 0), h - 1)
            c = min(max(int(cx), 0), w - 1)
            rgb = target[r, c, :3]
        colors.append(np.append(np.clip(rgb, 0.0, 1.0), 1.0))
    return paths, colors
