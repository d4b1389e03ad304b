from collections import deque

import numpy as np
import pytest

from cpbinit.errors import BoundsError, ParamError
from cpbinit.superpixel import (
    SlicParams, _seed_centers, enforce_connectivity, regions_touching, segment,
)


def flood_fill_connected(labels):
    """True when every label's pixel set is one 4-connected piece (BFS oracle)."""
    h, w = labels.shape
    for lab in np.unique(labels):
        ys, xs = np.nonzero(labels == lab)
        seen = {(ys[0], xs[0])}
        q = deque(seen)
        while q:
            y, x = q.popleft()
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] == lab and (ny, nx) not in seen:
                    seen.add((ny, nx))
                    q.append((ny, nx))
        if len(seen) != len(ys):
            return False
    return True


def naive_kmeans(gray, k, compactness, iters):
    """Full-search Lloyd iterations in (intensity, x, y) space from the same grid seeds."""
    h, w = gray.shape
    step, centers, _ = _seed_centers(gray, k)
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.stack([xs.ravel(), ys.ravel(), gray.ravel()], axis=1).astype(float)
    wsp = (compactness / step) ** 2
    for _ in range(iters):
        d = ((pts[:, None, 2] - centers[None, :, 2]) ** 2
             + ((pts[:, None, 0] - centers[None, :, 0]) ** 2
                + (pts[:, None, 1] - centers[None, :, 1]) ** 2) * wsp)
        lab = np.argmin(d, axis=1)
        for c in range(len(centers)):
            if np.any(lab == c):
                centers[c] = pts[lab == c].mean(axis=0)
    return lab.reshape(h, w)


def same_partition(a, b):
    pairs = set(zip(a.ravel().tolist(), b.ravel().tolist()))
    return len(pairs) == len(np.unique(a)) == len(np.unique(b))


def test_uniform_frame_tiles_grid():
    gray = np.full((64, 64), 90, np.uint8)
    lab = segment(gray, SlicParams(region_count=16))
    assert lab.n_regions == 16
    assert np.all(np.abs(lab.counts - 256) <= 128)
    oracle = naive_kmeans(gray, 16, 10.0, 10)
    assert same_partition(lab.labels, oracle)


def test_single_region():
    rng = np.random.default_rng(3)
    lab = segment(rng.integers(0, 256, (20, 30)).astype(np.uint8), SlicParams(region_count=1))
    assert lab.n_regions == 1
    assert np.all(lab.labels == 0)


def test_boundary_adherence_half_split():
    gray = np.zeros((64, 64), np.uint8)
    gray[:, 32:] = 255
    lab = segment(gray, SlicParams(region_count=16, compactness=10))
    xs = np.broadcast_to(np.arange(64), (64, 64))
    for r in range(lab.n_regions):
        sel = lab.labels == r
        left = sel & (gray == 0)
        right = sel & (gray == 255)
        if left.any() and right.any():
            minority = left if left.sum() < right.sum() else right
            assert np.all(np.abs(xs[minority] - 31.5) <= 2.5)


def test_too_many_regions():
    with pytest.raises(ParamError):
        segment(np.zeros((4, 4), np.uint8), SlicParams(region_count=17))


def test_params_validation():
    for bad in (dict(region_count=0), dict(compactness=0), dict(max_iters=0),
                dict(min_region_frac=1.0)):
        with pytest.raises(ParamError):
            SlicParams(**bad)


@pytest.mark.parametrize("seed", range(5))
def test_random_frame_properties(seed):
    rng = np.random.default_rng(seed)
    gray = rng.integers(0, 256, (64, 64)).astype(np.uint8)
    lab = segment(gray, SlicParams())
    labels = lab.labels
    assert lab.counts.sum() == 64 * 64
    assert set(np.unique(labels).tolist()) == set(range(lab.n_regions))
    assert flood_fill_connected(labels)
    h = np.asarray(lab.energy_history)
    assert np.all(np.diff(h) <= 1e-9 * h[0])
    assert np.allclose(lab.mean_intensity,
                       [gray[labels == r].mean() for r in range(lab.n_regions)])


def test_default_region_count_tracks_block_scale():
    rng = np.random.default_rng(0)
    base = rng.normal(size=(120, 160))
    from scipy import ndimage
    g = ndimage.gaussian_filter(base, 3)
    gray = (40 + (g - g.min()) / (g.max() - g.min()) * 150).astype(np.uint8)
    lab = segment(gray)
    assert 0.5 * 300 <= lab.n_regions <= 1.5 * 300


def test_deterministic():
    rng = np.random.default_rng(9)
    gray = rng.integers(0, 256, (40, 50)).astype(np.uint8)
    a = segment(gray, SlicParams(region_count=20))
    b = segment(gray, SlicParams(region_count=20))
    assert np.array_equal(a.labels, b.labels)
    assert a.energy_history == b.energy_history


def test_enforce_connectivity_merges_orphans():
    labels = np.zeros((6, 6), int)
    labels[:, 3:] = 1
    labels[2, 1] = 1          # stray single pixel of label 1 inside label 0
    out = enforce_connectivity(labels, min_size=4)
    assert len(np.unique(out)) == 2
    assert out[2, 1] == out[0, 0]
    assert flood_fill_connected(out)


def test_enforce_connectivity_splits_large_pieces():
    labels = np.zeros((4, 9), int)
    labels[:, 3:6] = 1        # label 0 appears as two separate 12-pixel pieces
    out = enforce_connectivity(labels, min_size=4)
    assert len(np.unique(out)) == 3
    assert flood_fill_connected(out)


def test_regions_touching():
    rng = np.random.default_rng(4)
    lab = segment(rng.integers(0, 256, (30, 30)).astype(np.uint8), SlicParams(region_count=9))
    assert regions_touching(lab, []) == set()
    r0 = lab.labels[0, 0]
    ys, xs = np.nonzero(lab.labels == r0)
    assert regions_touching(lab, list(zip(xs[:5], ys[:5]))) == {int(r0)}
    pts = [(int(x), int(y)) for x, y in rng.integers(0, 30, (40, 2))]
    brute = set()
    for x, y in pts:
        brute.add(int(lab.labels[y, x]))
    assert regions_touching(lab, pts) == brute
    with pytest.raises(BoundsError):
        regions_touching(lab, [(30, 0)])
