"""Read and write the SVG subset produced by the vectorizer.

Documents contain an optional full-canvas background ``rect`` followed by
one ``path`` per shape, bottom-most first. Each ``d`` attribute is a closed
cubic chain ``M x,y C x,y x,y x,y ... Z`` in absolute coordinates.
"""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import ClosedBezierPath
from .render import as_color

SVG_NS = "http://www.w3.org/2000/svg"
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_TOKEN = re.compile(rf"([A-Za-z])|({_NUM})")
_RGB = re.compile(rf"rgb\(\s*({_NUM})(%?)\s*,\s*({_NUM})(%?)\s*,\s*({_NUM})(%?)\s*\)")
_FORBIDDEN_ATTRS = ("transform", "clip-path", "mask", "filter", "style")


class SvgFormatError(ValueError):
    """Raised for SVG input outside the supported subset."""


class IncompatibleDocuments(ValueError):
    """Raised when two documents cannot be interpolated path by path."""


@dataclass
class SvgDocument:
    width: float
    height: float
    paths: list = field(default_factory=list)
    colors: list = field(default_factory=list)
    background: Optional[np.ndarray] = None

    def to_svg(self) -> str:
        return to_svg(self.paths, self.colors, self.width, self.height, self.background)

    @property
    def structure(self) -> tuple:
        return tuple(p.segments for p in self.paths)


def _fmt(v: float) -> str:
    s = f"{v:.4f}"
    return "0.0000" if s == "-0.0000" else s


def _fill(color) -> str:
    r, g, b = (100.0 * np.asarray(color[:3]))
    return f"rgb({_fmt(r)}%,{_fmt(g)}%,{_fmt(b)}%)"


def path_data(path: ClosedBezierPath) -> str:
    pts = path.points
    n = len(pts)
    parts = [f"M {_fmt(pts[0, 0])},{_fmt(pts[0, 1])}"]
    for k in range(path.segments):
        ctrl = [pts[(3 * k + i) % n] for i in (1, 2, 3)]
        parts.append("C " + " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in ctrl))
    parts.append("Z")
    return " ".join(parts)


def to_svg(paths, colors, width, height, background=None) -> str:
    if len(paths) != len(colors):
        raise ValueError(f"{len(paths)} paths but {len(colors)} colors")
    w, h = float(width), float(height)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="{SVG_NS}" version="1.1" width="{w:g}" height="{h:g}" viewBox="0 0 {w:g} {h:g}">',
    ]
    if background is not None:
        bg = as_color(background)
        lines.append(f'<rect x="0" y="0" width="{w:g}" height="{h:g}" fill="{_fill(bg)}" fill-opacity="{_fmt(bg[3])}"/>')
    for p, c in zip(paths, colors):
        p = p if isinstance(p, ClosedBezierPath) else ClosedBezierPath(p)
        c = as_color(c)
        lines.append(
            f'<path d="{path_data(p)}" fill="{_fill(c)}" fill-opacity="{_fmt(c[3])}" fill-rule="nonzero"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_fill(el) -> np.ndarray:
    fill = el.get("fill", "")
    m = _RGB.fullmatch(fill.strip())
    if not m:
        raise SvgFormatError(f"unsupported fill {fill!r}; expected rgb(...)")
    vals = []
    for i in range(3):
        v, pct = float(m.group(2 * i + 1)), m.group(2 * i + 2)
        vals.append(v / 100.0 if pct else v / 255.0)
    alpha = float(el.get("fill-opacity", "1"))
    return np.array(vals + [alpha])


def parse_path_data(d: str) -> ClosedBezierPath:
    tokens = _TOKEN.findall(d)
    if not tokens:
        raise SvgFormatError("empty path data")
    cmds = [(c, n) for c, n in tokens]
    pos = 0

    def numbers(count):
        nonlocal pos
        out = []
        for _ in range(count):
            if pos >= len(cmds) or cmds[pos][0]:
                raise SvgFormatError(f"truncated path data in {d!r}")
            out.append(float(cmds[pos][1]))
            pos += 1
        return out

    if cmds[0][0] != "M":
        raise SvgFormatError("path data must start with an absolute M")
    pos = 1
    start = numbers(2)
    points = [start]
    closed = False
    while pos < len(cmds):
        cmd = cmds[pos][0]
        pos += 1
        if cmd == "C":
            points.extend(np.array(numbers(6)).reshape(3, 2).tolist())
            # implicit repeats of C
            while pos < len(cmds) and not cmds[pos][0]:
                points.extend(np.array(numbers(6)).reshape(3, 2).tolist())
        elif cmd in "Zz":
            closed = True
            if pos != len(cmds):
                raise SvgFormatError("only one closed subpath per path is supported")
        elif cmd:
            raise SvgFormatError(f"unsupported path command {cmd!r}; only M, C and Z are accepted")
        else:
            raise SvgFormatError(f"unexpected number in path data {d!r}")
    if not closed:
        raise SvgFormatError("path must be closed with Z")
    if len(points) < 4 or (len(points) - 1) % 3:
        raise SvgFormatError("path must consist of whole cubic segments")
    pts = np.array(points)
    if not np.allclose(pts[-1], pts[0], atol=1e-3):
        raise SvgFormatError("cubic chain must end at its starting point")
    return ClosedBezierPath(pts[:-1])


def from_svg(text: str) -> SvgDocument:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise SvgFormatError(f"not well-formed XML: {exc}") from exc
    if _local(root.tag) != "svg":
        raise SvgFormatError("root element must be <svg>")
    vb = root.get("viewBox")
    if vb:
        x, y, w, h = (float(v) for v in vb.replace(",", " ").split())
        if x != 0 or y != 0:
            raise SvgFormatError("viewBox must start at 0 0")
    else:
        w, h = float(root.get("width")), float(root.get("height"))
    doc = SvgDocument(w, h)
    for el in root:
        tag = _local(el.tag)
        for attr in _FORBIDDEN_ATTRS:
            if el.get(attr) is not None:
                raise SvgFormatError(f"attribute {attr!r} on <{tag}> is not supported")
        stroke = el.get("stroke")
        if stroke not in (None, "none"):
            raise SvgFormatError("strokes are not supported")
        if tag == "rect":
            if doc.paths or doc.background is not None:
                raise SvgFormatError("only a single background rect before all paths is supported")
            doc.background = _parse_fill(el)
        elif tag == "path":
            if el.get("fill-rule", "nonzero") != "nonzero":
                raise SvgFormatError("only the nonzero fill rule is supported")
            doc.paths.append(parse_path_data(el.get("d", "")))
            doc.colors.append(_parse_fill(el))
        elif tag in ("title", "desc", "metadata"):
            continue
        else:
            raise SvgFormatError(f"unsupported element <{tag}>")
    return doc


def interpolate(a: SvgDocument, b: SvgDocument, t: float) -> SvgDocument:
    """Blend two documents path by path: ``(1 - t) * a + t * b``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if a.structure != b.structure:
        raise IncompatibleDocuments(
            f"documents are not interpolation-compatible: segment counts per path {a.structure} vs {b.structure}"
        )
    if (a.width, a.height) != (b.width, b.height):
        raise IncompatibleDocuments("documents have different canvas sizes")

    def mix(x, y):
        return (1.0 - t) * np.asarray(x) + t * np.asarray(y)

    paths = [ClosedBezierPath(mix(p.points, q.points)) for p, q in zip(a.paths, b.paths)]
    colors = [mix(c, d) for c, d in zip(a.colors, b.colors)]
    if (a.background is None) != (b.background is None):
        raise IncompatibleDocuments("only one of the documents has a background rect")
    bg = None if a.background is None else mix(a.background, b.background)
    return SvgDocument(a.width, a.height, paths, colors, bg)
