import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layervec.geometry import (
    ClosedBezierPath,
    Polyline,
    count_self_intersections,
    eval_cubic,
    flatten,
    make_circle_path,
    unsigned_distance_map,
    winding_number,
)


def point_polyline_distance(points, verts):
    """Brute force distance from each point to a closed polyline."""
    a = verts
    b = np.roll(verts, -1, axis=0)
    ab = b - a
    ap = points[:, None, :] - a[None, :, :]
    denom = np.maximum((ab * ab).sum(axis=1), 1e-300)
    t = np.clip((ap * ab[None]).sum(axis=2) / denom[None], 0.0, 1.0)
    q = a[None] + t[..., None] * ab[None]
    return np.sqrt(((points[:, None, :] - q) ** 2).sum(axis=2)).min(axis=1)


def dense_curve(path, n=1000):
    t = np.linspace(0.0, 1.0, n)
    return np.concatenate([np.array([eval_cubic(q, ti) for ti in t]) for q in path.quads()])


def angle_winding(verts, p):
    """Winding number by summing signed angles, independent of ray casting."""
    d = verts - p
    a = np.arctan2(d[:, 1], d[:, 0])
    da = np.diff(np.append(a, a[0]))
    da = (da + np.pi) % (2 * np.pi) - np.pi
    return int(np.rint(da.sum() / (2 * np.pi)))


def straight_path(corners):
    """Closed chain whose segments are straight lines through ``corners``."""
    pts = []
    n = len(corners)
    for i in range(n):
        a, b = np.asarray(corners[i], float), np.asarray(corners[(i + 1) % n], float)
        pts += [a, a + (b - a) / 3, a + 2 * (b - a) / 3]
    return ClosedBezierPath(np.array(pts))


QUAD = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float)


class TestEvalCubic:
    def test_endpoints(self):
        assert np.array_equal(eval_cubic(QUAD, 0.0), [0, 0])
        assert np.array_equal(eval_cubic(QUAD, 1.0), [1, 0])

    def test_midpoint(self):
        assert np.allclose(eval_cubic(QUAD, 0.5), [0.5, 0.75])
        assert np.allclose(eval_cubic(QUAD, 0.5), (QUAD[0] + 3 * QUAD[1] + 3 * QUAD[2] + QUAD[3]) / 8)

    def test_t_outside_unit_interval_is_a_bug(self):
        with pytest.raises(AssertionError):
            eval_cubic(QUAD, 1.5)


class TestPath:
    def test_requires_whole_segments(self):
        with pytest.raises(ValueError):
            ClosedBezierPath(np.zeros((5, 2)))

    def test_rejects_non_finite(self):
        pts = make_circle_path((0, 0)).points.copy()
        pts[0, 0] = np.nan
        with pytest.raises(ValueError):
            ClosedBezierPath(pts)

    def test_closure_is_structural(self):
        p = make_circle_path((10, 10), 3, 4)
        q = p.quads()
        assert q.shape == (4, 4, 2)
        assert np.array_equal(q[-1, 3], q[0, 0])
        for k in range(3):
            assert np.array_equal(q[k, 3], q[k + 1, 0])

    def test_immutable(self):
        p = make_circle_path((10, 10))
        with pytest.raises(ValueError):
            p.points[0, 0] = 1.0


class TestFlatten:
    def test_straight_segments_need_no_splits(self):
        poly = flatten(straight_path([(0, 0), (10, 0), (10, 10), (0, 10)]), 0.25)
        assert len(poly) == 4
        assert np.array_equal(poly.segment, [0, 1, 2, 3])
        assert np.array_equal(poly.t, [0, 0, 0, 0])

    def test_quarter_circle_deviation(self):
        k = 0.5523
        r = 50.0
        quarter = [(r, 0), (r, k * r), (k * r, r), (0, r)]
        path = ClosedBezierPath(np.array(quarter[:3] + [(0, r), (0, 2 * r / 3), (0, r / 3),
                                                         (0, 0), (r / 3, 0), (2 * r / 3, 0)], dtype=float))
        poly = flatten(path, 0.1)
        t = np.linspace(0, 1, 1000)
        curve = np.array([eval_cubic(path.quads()[0], ti) for ti in t])
        assert point_polyline_distance(curve, poly.vertices).max() <= 0.1

    def test_deviation_random_cubics(self):
        rng = np.random.default_rng(1)
        tol = 0.25
        worst = 0.0
        for _ in range(1000):
            a, b, c, d = rng.uniform(0, 100, size=(4, 2))
            pts = np.array([a, b, c, d, d + (a - d) / 3, d + 2 * (a - d) / 3])
            path = ClosedBezierPath(pts)
            poly = flatten(path, tol)
            t = np.linspace(0, 1, 200)
            curve = np.array([eval_cubic(path.quads()[0], ti) for ti in t])
            worst = max(worst, point_polyline_distance(curve, poly.vertices).max())
        assert worst <= tol

    def test_finer_tolerance_gives_more_vertices(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = ClosedBezierPath(make_circle_path((50, 50), 20, 4).points + rng.normal(0, 8, (12, 2)))
            assert len(flatten(p, 0.01)) >= len(flatten(p, 1.0))

    def test_source_params_reproduce_vertices(self):
        p = make_circle_path((30, 30), 12, 3)
        poly = flatten(p, 0.1)
        quads = p.quads()
        for v, s, t in zip(poly.vertices, poly.segment, poly.t):
            assert np.allclose(v, eval_cubic(quads[s], t))
        assert all(0 <= t < 1 for t in poly.t)

    def test_tol_must_be_positive(self):
        with pytest.raises(ValueError):
            flatten(make_circle_path((0, 0)), 0.0)


def _poly(verts):
    verts = np.asarray(verts, dtype=float)
    n = len(verts)
    return Polyline(verts, np.zeros(n, dtype=np.int64), np.zeros(n))


class TestWinding:
    SQUARE = _poly([(0, 0), (1, 0), (1, 1), (0, 1)])

    def test_square(self):
        assert winding_number(self.SQUARE, (0.5, 0.5)) == 1
        assert winding_number(self.SQUARE, (2, 2)) == 0

    def test_figure_eight(self):
        fig8 = _poly([(-1, -1), (-1, 1), (1, -1), (1, 1)])
        assert winding_number(fig8, (-0.5, 0.0)) == angle_winding(fig8.vertices, np.array([-0.5, 0.0])) == -1
        assert winding_number(fig8, (0.5, 0.0)) == angle_winding(fig8.vertices, np.array([0.5, 0.0])) == 1

    def test_against_parity_oracle_on_convex_polygons(self):
        from scipy.spatial import ConvexHull

        rng = np.random.default_rng(3)
        checked = 0
        for _ in range(20):
            cloud = rng.uniform(0, 10, size=(12, 2))
            hull = cloud[ConvexHull(cloud).vertices]
            poly = _poly(hull)
            pts = rng.uniform(-1, 11, size=(500, 2))
            for p in pts:
                inside = False
                for i in range(len(hull)):
                    (x1, y1), (x2, y2) = hull[i], hull[(i + 1) % len(hull)]
                    if (y1 > p[1]) != (y2 > p[1]) and p[0] < x1 + (p[1] - y1) * (x2 - x1) / (y2 - y1):
                        inside = not inside
                assert (winding_number(poly, p) != 0) == inside
                checked += 1
        assert checked == 10_000


class TestDistanceMap:
    def test_zero_on_vertex(self):
        p = make_circle_path((20.5, 20.5), 5.0, 4)
        d = unsigned_distance_map(p, 40, 40)
        assert d[20, 25] == pytest.approx(0.0, abs=1e-12)

    def test_circle_center(self):
        p = make_circle_path((20.5, 20.5), 5.0, 4)
        d = unsigned_distance_map(p, 40, 40, tol=0.05)
        oracle = point_polyline_distance(np.array([[20.5, 20.5]]), dense_curve(p, 2000))[0]
        assert d[20, 20] == pytest.approx(oracle, abs=0.05)
        # control points sit on the circle, the curve dips to ~0.9 r between them
        assert 0.89 * 5.0 < d[20, 20] <= 5.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        p = ClosedBezierPath(make_circle_path((30, 25), 15, 4).points + rng.normal(0, 4, (12, 2)))
        d = unsigned_distance_map(p, 64, 48)
        yy, xx = np.mgrid[0:48, 0:64]
        centers = np.stack([xx.ravel() + 0.5, yy.ravel() + 0.5], axis=1)
        exact = point_polyline_distance(centers, flatten(p).vertices).reshape(48, 64)
        assert np.allclose(d, exact, atol=1e-9)
        dense = point_polyline_distance(centers, dense_curve(p, 400)).reshape(48, 64)
        assert np.abs(d - dense).max() <= 0.25 + 0.05

    def test_lipschitz_and_bounded(self):
        p = make_circle_path((10, 60), 30, 5)
        d = unsigned_distance_map(p, 80, 70)
        assert np.abs(np.diff(d, axis=0)).max() <= 1.0 + 1e-9
        assert np.abs(np.diff(d, axis=1)).max() <= 1.0 + 1e-9
        assert d.max() <= np.hypot(80, 70)

    def test_size_validation(self):
        with pytest.raises(ValueError):
            unsigned_distance_map(make_circle_path((0, 0)), 0, 5)


class TestSelfIntersections:
    @pytest.mark.parametrize("s", range(2, 9))
    def test_circle_has_none(self, s):
        assert count_self_intersections(make_circle_path((40, 40), 10, s)) == 0

    def test_bowtie(self):
        bowtie = straight_path([(0, 0), (1, 1), (1, 0), (0, 1)])
        assert count_self_intersections(bowtie) == 1

    def test_mirror(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = ClosedBezierPath(make_circle_path((0, 0), 10, 4).points + rng.normal(0, 6, (12, 2)))
            m = p.transformed(np.array([[-1.0, 0.0], [0.0, 1.0]]))
            assert count_self_intersections(p) == count_self_intersections(m)

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(min_value=0, max_value=10_000),
        st.floats(min_value=0, max_value=2 * np.pi),
        st.tuples(st.floats(-100, 100), st.floats(-100, 100)),
    )
    def test_rigid_invariance(self, seed, theta, offset):
        rng = np.random.default_rng(seed)
        p = ClosedBezierPath(make_circle_path((0, 0), 10, 4).points + rng.normal(0, 7, (12, 2)))
        c, s = np.cos(theta), np.sin(theta)
        q = p.transformed(np.array([[c, -s], [s, c]]), offset)
        # flattening is rotation covariant, so the polylines are congruent
        assert count_self_intersections(p, 0.05) == count_self_intersections(q, 0.05)


class TestCirclePath:
    def test_example(self):
        p = make_circle_path((50, 50), 5, 4)
        assert p.points.shape == (12, 2)
        assert np.allclose(np.hypot(*(p.points - 50).T), 5.0)
        assert np.allclose(p.points.mean(axis=0), [50, 50])

    def test_default_segments(self):
        assert make_circle_path((0, 0)).segments == 4

    def test_angles(self):
        p = make_circle_path((0, 0), 2, 3)
        ang = np.arctan2(p.points[:, 1], p.points[:, 0]) % (2 * np.pi)
        assert np.allclose(ang, 2 * np.pi * np.arange(9) / 9)

    @pytest.mark.parametrize("radius,s", [(0, 4), (-1, 4), (5, 0)])
    def test_invalid(self, radius, s):
        with pytest.raises(ValueError):
            make_circle_path((0, 0), radius, s)
