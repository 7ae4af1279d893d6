import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from layervec.initialize import (
    difference_map,
    init_paths,
    label_components,
    quantize,
    select_components,
)

WHITE = np.ones(3)


def canvas(h=80, w=80):
    return np.ones((h, w, 3))


def paint_disc(img, cx, cy, r, color):
    yy, xx = np.mgrid[0:img.shape[0], 0:img.shape[1]]
    mask = (xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2 <= r * r
    img[mask] = color
    return mask


class TestDifferenceMap:
    def test_examples(self):
        img = np.random.default_rng(0).uniform(size=(4, 4, 3))
        assert not difference_map(img, img).any()
        assert np.array_equal(difference_map(np.zeros((2, 2, 3)), np.ones((2, 2, 3))), np.ones((2, 2)))
        d = difference_map(np.array([[[1.0, 0.5, 0.0]]]), np.array([[[0.0, 0.5, 0.0]]]))
        assert d[0, 0] == pytest.approx(1 / 3)

    def test_background_color(self):
        t = np.random.default_rng(1).uniform(size=(3, 5, 3))
        assert np.array_equal(difference_map(t, WHITE), difference_map(t, canvas(3, 5)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            difference_map(np.zeros((2, 2, 3)), np.zeros((3, 2, 3)))


class TestQuantize:
    def test_threshold_and_bins(self):
        diff = np.array([[0.05, 0.1, 0.55, 1.0]])
        q = quantize(diff, 0.1, 10)
        assert q.tolist() == [[-1, 0, 5, 9]]

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 1000), st.floats(0.01, 0.5), st.floats(0.01, 0.5))
    def test_threshold_monotone(self, seed, c1, c2):
        diff = np.random.default_rng(seed).uniform(size=(20, 20))
        lo, hi = sorted((c1, c2))
        assert (quantize(diff, hi) >= 0).sum() <= (quantize(diff, lo) >= 0).sum()

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 1000), st.integers(1, 300))
    def test_every_survivor_gets_one_uniform_bin(self, seed, bins):
        diff = np.random.default_rng(seed).uniform(size=(16, 16))
        q = quantize(diff, 0.1, bins)
        keep = diff >= 0.1
        assert np.all((q >= 0) == keep)
        assert q.max() < bins
        top = diff[keep].max()
        edges = 0.1 + (top - 0.1) * np.arange(bins + 1) / bins
        v = diff[keep]
        b = q[keep]
        assert np.all(v >= edges[b] - 1e-12)
        assert np.all((v < edges[b + 1] + 1e-12) | (b == bins - 1))


class TestLabeling:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000))
    def test_matches_scipy(self, seed):
        rng = np.random.default_rng(seed)
        binmap = rng.integers(-1, 3, size=(15, 17))
        labels, n = label_components(binmap)
        total = 0
        for b in range(3):
            ref, m = ndimage.label(binmap == b)
            total += m
            for k in range(1, m + 1):
                ours = np.unique(labels[ref == k])
                assert len(ours) == 1
                assert np.array_equal(labels == ours[0], ref == k)
        assert n == total
        assert np.all(labels[binmap < 0] == -1)

    def test_raster_order(self):
        binmap = np.array([[1, -1, 0], [1, -1, 0]])
        labels, n = label_components(binmap)
        assert n == 2 and labels[0, 0] == 0 and labels[0, 2] == 1


class TestSelectComponents:
    def test_all_correct(self):
        t = canvas()
        assert select_components(difference_map(t, t), t, 3) == []

    def test_disc_then_square(self):
        t = np.ones((100, 100, 3))
        disc = paint_disc(t, 35, 40, np.sqrt(1200 / np.pi), (1.0, 0.0, 0.0))
        t[70:85, 70:90] = (0.0, 0.0, 1.0)
        seeds = select_components(difference_map(t, WHITE), t, 2)
        assert len(seeds) == 2
        assert disc[int(seeds[0].center[1]), int(seeds[0].center[0])]
        c = seeds[1].center
        assert 70 <= c[0] < 90 and 70 <= c[1] < 85
        assert seeds[0].area == disc.sum() and seeds[1].area == 300
        assert seeds[0].mean_color == (1.0, 0.0, 0.0)

    def test_c_shape_center_on_component(self):
        t = canvas()
        t[10:70, 10:20] = 0.0
        t[10:20, 10:70] = 0.0
        t[60:70, 10:70] = 0.0
        (seed,) = select_components(difference_map(t, WHITE), t, 1)
        x, y = seed.center
        assert t[int(y), int(x)].sum() == 0.0

    def test_areas_non_increasing_and_deterministic(self):
        rng = np.random.default_rng(2)
        t = canvas(120, 120)
        for _ in range(8):
            paint_disc(t, *rng.uniform(10, 110, 2), rng.uniform(3, 15), rng.uniform(0, 0.6, 3))
        diff = difference_map(t, WHITE)
        a = select_components(diff, t, 20)
        b = select_components(diff, t, 20)
        assert a == b
        areas = [s.area for s in a]
        assert areas == sorted(areas, reverse=True)

    def test_tie_break_by_raster_order(self):
        t = canvas(40, 40)
        t[30:35, 5:10] = (0, 0, 0)
        t[5:10, 25:30] = (0, 0, 0)
        seeds = select_components(difference_map(t, WHITE), t, 2)
        assert seeds[0].center == (27.5, 7.5)
        assert seeds[1].center == (7.5, 32.5)

    @pytest.mark.parametrize("kw", [{"k": 0}, {"k": 1, "c_alpha": 0.0}, {"k": 1, "c_alpha": 1.0}, {"k": 1, "bins": 0}])
    def test_validation(self, kw):
        t = canvas(5, 5)
        with pytest.raises(ValueError):
            select_components(difference_map(t, WHITE), t, **kw)


class TestInitPaths:
    def test_uniform_red(self):
        t = np.zeros((100, 100, 3))
        t[..., 0] = 1.0
        seeds = select_components(difference_map(t, WHITE), t, 1)
        paths, colors = init_paths(seeds, 5.0, 4, t)
        assert np.array_equal(colors[0], [1.0, 0.0, 0.0, 1.0])
        assert paths[0].points.shape == (12, 2)

    def test_seed_order_is_layer_order(self):
        t = np.ones((100, 100, 3))
        paint_disc(t, 35, 40, 20, (1.0, 0.0, 0.0))
        t[70:85, 70:90] = (0.0, 0.0, 1.0)
        seeds = select_components(difference_map(t, WHITE), t, 2)
        paths, colors = init_paths(seeds, 5.0, 4, t)
        assert np.allclose(paths[0].points.mean(axis=0), seeds[0].center)
        assert np.allclose(paths[1].points.mean(axis=0), seeds[1].center)
        assert np.array_equal(colors[1], [0.0, 0.0, 1.0, 1.0])

    def test_near_edge(self):
        t = np.zeros((20, 20, 3))
        t[0:3, 0:3] = 1.0
        seeds = select_components(difference_map(t, np.zeros(3)), t, 1)
        paths, colors = init_paths(seeds, 5.0, 4, t)
        assert paths[0].points.min() < 0
        assert 0.0 <= colors[0].min() and colors[0].max() <= 1.0
