import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layervec.geometry import ClosedBezierPath, make_circle_path
from layervec.render import render
from layervec.svgio import (
    IncompatibleDocuments,
    SvgDocument,
    SvgFormatError,
    from_svg,
    interpolate,
    parse_path_data,
    to_svg,
)

WHITE = (1.0, 1.0, 1.0, 1.0)


def random_doc(seed, n=3, size=64):
    rng = np.random.default_rng(seed)
    paths = [ClosedBezierPath(make_circle_path(rng.uniform(10, 54, 2), rng.uniform(4, 15), 4).points
                              + rng.normal(0, 2, (12, 2))) for _ in range(n)]
    colors = [np.array([*rng.uniform(0, 1, 3), rng.uniform(0.3, 1)]) for _ in range(n)]
    return SvgDocument(size, size, paths, colors, np.array(WHITE))


class TestWrite:
    def test_empty(self):
        text = to_svg([], [], 10, 20, background=WHITE)
        assert text.count("<rect") == 1 and "<path" not in text
        assert 'viewBox="0 0 10 20"' in text

    def test_commands(self):
        text = to_svg([make_circle_path((5, 5), 2, 4)], [(1, 0, 0, 1)], 10, 10)
        d = re.search(r' d="([^"]*)"', text).group(1)
        cmds = re.findall(r"[A-Za-z]", d)
        assert cmds.count("M") == 1 and cmds.count("C") == 4 and cmds.count("Z") == 1
        assert 'fill-rule="nonzero"' in text
        assert re.search(r"\d\.\d{4},", d)

    def test_layer_order(self):
        doc = random_doc(0)
        back = from_svg(doc.to_svg())
        for p, q in zip(doc.paths, back.paths):
            assert np.abs(p.points - q.points).max() <= 5e-5

    def test_background_first(self):
        text = random_doc(1).to_svg()
        assert text.index("<rect") < text.index("<path")

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            to_svg([make_circle_path((0, 0))], [], 5, 5)


class TestRead:
    def test_round_trip_precision(self):
        doc = random_doc(2)
        back = from_svg(doc.to_svg())
        assert (back.width, back.height) == (64, 64)
        for p, q in zip(doc.paths, back.paths):
            assert np.abs(p.points - q.points).max() <= 5e-5 + 1e-12
        for c, d in zip(doc.colors, back.colors):
            # rgb percentages keep 4 decimals, opacity keeps 4 decimals of [0, 1]
            assert np.abs(c[:3] - d[:3]).max() <= 5e-7 + 1e-12
            assert abs(c[3] - d[3]) <= 5e-5 + 1e-12
        assert np.allclose(back.background, WHITE)

    def test_empty_document(self):
        back = from_svg(to_svg([], [], 8, 8, background=(0.2, 0.4, 0.6)))
        assert back.paths == [] and np.allclose(back.background, [0.2, 0.4, 0.6, 1.0])

    @pytest.mark.parametrize("d", [
        "M 0,0 A 5 5 0 0 1 10,10 Z",
        "M 0,0 L 10,10 L 0,10 Z",
        "M 0,0 C 1,0 2,0 3,3",
        "M 0,0 C 1,0 2,0 3,3 Z",
        "m 0,0 c 1,0 2,0 0,0 z",
        "",
    ])
    def test_rejects_path_data(self, d):
        with pytest.raises(SvgFormatError):
            parse_path_data(d)

    def test_implicit_repeat(self):
        p = parse_path_data("M 0,0 C 1,0 2,1 2,2 1,3 0,2 0,0 Z")
        assert p.segments == 2

    @pytest.mark.parametrize("attr", [
        'stroke="rgb(0,0,0)"', 'transform="scale(2)"', 'fill-rule="evenodd"', 'style="fill:red"',
    ])
    def test_rejects_features(self, attr):
        text = to_svg([make_circle_path((5, 5), 2)], [(1, 0, 0, 1)], 10, 10).replace("<path ", f"<path {attr} ")
        with pytest.raises(SvgFormatError):
            from_svg(text)

    def test_rejects_other_elements(self):
        text = to_svg([], [], 10, 10).replace("</svg>", '<circle cx="1" cy="1" r="1"/></svg>')
        with pytest.raises(SvgFormatError, match="circle"):
            from_svg(text)

    def test_rejects_bad_xml(self):
        with pytest.raises(SvgFormatError):
            from_svg("<svg")

    def test_render_round_trip(self):
        doc = random_doc(3, n=5)
        back = from_svg(doc.to_svg())
        a = render(doc.paths, doc.colors, 64, 64, WHITE, 0.5)
        b = render(back.paths, back.colors, 64, 64, back.background, 0.5)
        assert np.abs(a - b).mean() < 0.01


class TestInterpolate:
    def test_endpoints(self):
        a, b = random_doc(4), random_doc(5)
        for t, ref in ((0.0, a), (1.0, b)):
            m = interpolate(a, b, t)
            assert all(np.array_equal(p.points, q.points) for p, q in zip(m.paths, ref.paths))
            assert all(np.array_equal(c, d) for c, d in zip(m.colors, ref.colors))

    def test_translation(self):
        p = make_circle_path((20, 20), 6)
        a = SvgDocument(64, 64, [p], [np.array([1.0, 0, 0, 1])])
        b = SvgDocument(64, 64, [p.transformed(np.eye(2), (10, -4))], [np.array([0.0, 0, 1, 1])])
        m = interpolate(a, b, 0.5)
        assert np.allclose(m.paths[0].points, p.points + [5, -2])
        assert np.allclose(m.colors[0], [0.5, 0, 0.5, 1])

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 1), st.integers(0, 100))
    def test_self_interpolation(self, t, seed):
        a = random_doc(seed)
        m = interpolate(a, a, t)
        assert all(np.allclose(p.points, q.points, rtol=0, atol=1e-12) for p, q in zip(m.paths, a.paths))

    def test_incompatible(self):
        a = random_doc(6, n=3)
        b = random_doc(7, n=2)
        with pytest.raises(IncompatibleDocuments, match="not interpolation-compatible"):
            interpolate(a, b, 0.5)
        c = SvgDocument(64, 64, [make_circle_path((5, 5), 2, 3)] + b.paths, [np.ones(4)] + b.colors, b.background)
        with pytest.raises(IncompatibleDocuments):
            interpolate(a, c, 0.5)

    def test_t_range(self):
        a = random_doc(8)
        with pytest.raises(ValueError):
            interpolate(a, a, 1.5)
