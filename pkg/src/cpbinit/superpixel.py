"""Intensity-only SLIC superpixels with connectivity enforcement.

Centers are seeded on a regular grid with step ``S = sqrt(N / k)``. Each
iteration assigns every pixel to the nearest center whose
``2S x 2S`` search window contains it, using

    D**2 = (I - I_c)**2 + (d_xy / S)**2 * compactness**2,

then moves each center to the mean intensity and position of its pixels.
A pixel may always keep its current center even when that center has
drifted away, which keeps the k-means energy (sum of ``D**2``)
non-increasing. Equal distances go to the lower center id.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import BoundsError, ParamError
from .media_io import Frame

DEFAULT_REGION_SIZE = 64


@dataclass(frozen=True)
class SlicParams:
    region_count: Optional[int] = None  # None: ceil(N / region_size)
    region_size: int = DEFAULT_REGION_SIZE
    compactness: float = 10.0
    max_iters: int = 10
    min_region_frac: float = 0.25

    def __post_init__(self):
        if self.region_count is not None and self.region_count < 1:
            raise ParamError("region_count must be >= 1")
        if self.region_size < 1:
            raise ParamError("region_size must be >= 1")
        if not self.compactness > 0:
            raise ParamError("compactness must be > 0")
        if self.max_iters < 1:
            raise ParamError("max_iters must be >= 1")
        if not 0 < self.min_region_frac < 1:
            raise ParamError("min_region_frac must lie in (0, 1)")

    def resolve_count(self, n_pixels) -> int:
        if self.region_count is None:
            return max(1, math.ceil(n_pixels / self.region_size))
        return self.region_count


@dataclass(frozen=True)
class SuperpixelLabeling:
    labels: np.ndarray          # (H, W) int32, dense ids 0..R-1
    counts: np.ndarray          # (R,)
    centroids: np.ndarray       # (R, 2) as (x, y)
    mean_intensity: np.ndarray  # (R,)
    energy_history: tuple = ()  # k-means energy after every assign and update step

    @property
    def n_regions(self) -> int:
        return len(self.counts)

    @property
    def shape(self):
        return self.labels.shape


def _seed_centers(gray, k):
    height, width = gray.shape
    step = math.sqrt(height * width / k)
    nx = max(1, min(width, round(width / step)))
    ny = max(1, min(height, round(height / step)))
    xs = (np.arange(nx) + 0.5) * width / nx - 0.5
    ys = (np.arange(ny) + 0.5) * height / ny - 0.5
    cy, cx = np.meshgrid(ys, xs, indexing="ij")
    cx = cx.ravel()
    cy = cy.ravel()
    ix = np.clip(np.round(cx).astype(int), 0, width - 1)
    iy = np.clip(np.round(cy).astype(int), 0, height - 1)
    ci = gray[iy, ix].astype(np.float64)
    # initial labels: the grid cell each pixel falls in
    row = (np.arange(height) * ny) // height
    col = (np.arange(width) * nx) // width
    labels0 = (row[:, None] * nx + col[None, :]).ravel()
    return step, np.stack([cx, cy, ci], axis=1), labels0


def _distance2(inten, px, py, centers, cid, spatial_w):
    dc = inten - centers[cid, 2]
    dx = px - centers[cid, 0]
    dy = py - centers[cid, 1]
    return dc * dc + (dx * dx + dy * dy) * spatial_w


def _assign(gray_f, xs, ys, centers, labels, step, spatial_w):
    height, width = gray_f.shape
    n = height * width
    r = int(math.ceil(step))
    off = np.arange(-r, r + 1)
    rcx = np.round(centers[:, 0]).astype(np.int64)
    rcy = np.round(centers[:, 1]).astype(np.int64)
    # per-center (2r+1)^2 windows cut from a padded copy of the image
    padded = np.pad(gray_f, r, mode="edge")
    views = np.lib.stride_tricks.sliding_window_view(padded, (2 * r + 1, 2 * r + 1))
    win = views[np.clip(rcy, 0, height - 1), np.clip(rcx, 0, width - 1)]
    dxs = (rcx[:, None] + off[None, :]) - centers[:, 0:1]
    dys = (rcy[:, None] + off[None, :]) - centers[:, 1:2]
    wx = rcx[:, None] + off[None, :]
    wy = rcy[:, None] + off[None, :]
    okx = (wx >= 0) & (wx < width) & (np.abs(dxs) <= step)
    oky = (wy >= 0) & (wy < height) & (np.abs(dys) <= step)
    dc = win - centers[:, 2, None, None]
    d2 = dc * dc + (dys[:, :, None] ** 2 + dxs[:, None, :] ** 2) * spatial_w
    inside = oky[:, :, None] & okx[:, None, :]
    pix = (wy[:, :, None] * width + wx[:, None, :])[inside]
    cid = np.broadcast_to(np.arange(len(centers))[:, None, None], inside.shape)[inside]
    d2 = d2[inside]
    # the current assignment is always a candidate
    pix = np.concatenate([pix, np.arange(n)])
    cid = np.concatenate([cid, labels])
    d2 = np.concatenate([d2, _distance2(gray_f.ravel(), xs, ys, centers, labels, spatial_w)])
    best = np.full(n, np.inf)
    np.minimum.at(best, pix, d2)
    hit = d2 == best[pix]
    new = np.full(n, np.iinfo(np.int64).max)
    np.minimum.at(new, pix[hit], cid[hit])
    return new, best


def _update(gray_f, xs, ys, centers, labels):
    nc = len(centers)
    cnt = np.bincount(labels, minlength=nc).astype(np.float64)
    sx = np.bincount(labels, weights=xs, minlength=nc)
    sy = np.bincount(labels, weights=ys, minlength=nc)
    si = np.bincount(labels, weights=gray_f.ravel(), minlength=nc)
    new = centers.copy()
    has = cnt > 0
    new[has, 0] = sx[has] / cnt[has]
    new[has, 1] = sy[has] / cnt[has]
    new[has, 2] = si[has] / cnt[has]
    return new


def _energy(gray_f, xs, ys, centers, labels, spatial_w):
    return float(np.sum(_distance2(gray_f.ravel(), xs, ys, centers, labels, spatial_w)))


def _components(labels2d):
    """4-connected components of equal label; returns (n_comp, comp id per pixel, edges)."""
    height, width = labels2d.shape
    idx = np.arange(height * width).reshape(height, width)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    flat = labels2d.ravel()
    same = flat[a] == flat[b]
    n = height * width
    g = sparse.coo_matrix((np.ones(same.sum(), dtype=np.int8), (a[same], b[same])), shape=(n, n))
    n_comp, comp = connected_components(g, directed=False)
    return n_comp, comp, a[~same], b[~same]


def enforce_connectivity(labels2d, min_size) -> np.ndarray:
    """Split labels into 4-connected components and merge every component
    smaller than ``min_size`` into its largest neighbor.

    Merging runs in rounds. In each round every undersized component points
    at its neighbor with the largest (size, -id) key, provided that key beats
    its own; all pointers are then resolved at once. The component with the
    smallest key always has a larger neighbor, so each round makes progress.
    Returns dense labels numbered in raster order of first appearance.
    """
    n_comp, comp, ea, eb = _components(labels2d)
    ca, cb = comp[ea], comp[eb]
    ids = np.arange(n_comp, dtype=np.int64)
    while True:
        size = np.bincount(comp, minlength=n_comp).astype(np.int64)
        key = size * (n_comp + 1) + (n_comp - ids)
        key[size == 0] = -1
        cross = ca != cb
        ca, cb = ca[cross], cb[cross]
        if ca.size == 0:
            break
        best = np.full(n_comp, -1, dtype=np.int64)
        np.maximum.at(best, ca, key[cb])
        np.maximum.at(best, cb, key[ca])
        point = (size > 0) & (size < min_size) & (best > key)
        if not point.any():
            break
        parent = ids.copy()
        parent[point] = n_comp - best[point] % (n_comp + 1)
        while True:
            nxt = parent[parent]
            if np.array_equal(nxt, parent):
                break
            parent = nxt
        comp = parent[comp]
        ca, cb = parent[ca], parent[cb]

    uniq, first = np.unique(comp, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(n_comp, dtype=np.int32)
    remap[uniq[order]] = np.arange(len(uniq), dtype=np.int32)
    return remap[comp].reshape(labels2d.shape)


def region_stats(labels2d, gray):
    flat = labels2d.ravel()
    r = int(flat.max()) + 1
    height, width = labels2d.shape
    ys, xs = np.divmod(np.arange(height * width), width)
    counts = np.bincount(flat, minlength=r)
    cx = np.bincount(flat, weights=xs, minlength=r) / counts
    cy = np.bincount(flat, weights=ys, minlength=r) / counts
    mi = np.bincount(flat, weights=np.asarray(gray, dtype=np.float64).ravel(), minlength=r) / counts
    return counts, np.stack([cx, cy], axis=1), mi


def segment(frame, params: SlicParams = SlicParams()) -> SuperpixelLabeling:
    """SLIC over the grayscale plane of ``frame`` (a Frame or 2-D array)."""
    gray = frame.gray if isinstance(frame, Frame) else np.asarray(frame)
    if gray.ndim != 2 or gray.size == 0:
        raise ParamError("frame must be a non-empty 2-D image")
    height, width = gray.shape
    n = height * width
    k = params.resolve_count(n)
    if k > n:
        raise ParamError(f"region_count {k} exceeds pixel count {n}")
    gray_f = gray.astype(np.float64)
    ys, xs = np.divmod(np.arange(n), width)
    xs = xs.astype(np.float64)
    ys = ys.astype(np.float64)

    step, centers, labels = _seed_centers(gray, k)
    spatial_w = (params.compactness / step) ** 2
    history = []
    for _ in range(params.max_iters):
        labels, best = _assign(gray_f, xs, ys, centers, labels, step, spatial_w)
        history.append(float(best.sum()))
        new = _update(gray_f, xs, ys, centers, labels)
        history.append(_energy(gray_f, xs, ys, new, labels, spatial_w))
        moved = float(np.sum(np.hypot(new[:, 0] - centers[:, 0], new[:, 1] - centers[:, 1])))
        centers = new
        if moved < 0.5:
            break

    n_used = len(np.unique(labels))
    min_size = params.min_region_frac * n / n_used
    dense = enforce_connectivity(labels.reshape(height, width), min_size)
    counts, centroids, mi = region_stats(dense, gray)
    dense.setflags(write=False)
    return SuperpixelLabeling(dense, counts, centroids, mi, tuple(history))


def regions_touching(labeling: SuperpixelLabeling, pixels) -> set:
    """Region ids containing any of the ``(x, y)`` coordinates in ``pixels``."""
    pts = np.asarray(list(pixels), dtype=np.int64).reshape(-1, 2)
    if pts.size == 0:
        return set()
    height, width = labeling.labels.shape
    x, y = pts[:, 0], pts[:, 1]
    bad = (x < 0) | (x >= width) | (y < 0) | (y >= height)
    if bad.any():
        i = int(np.argmax(bad))
        raise BoundsError(f"pixel ({x[i]}, {y[i]}) outside {width}x{height} labeling")
    return set(np.unique(labeling.labels[y, x]).tolist())


def boundary_map(labels2d) -> np.ndarray:
    """Boolean map, True on pixels whose right or lower neighbor has another label."""
    b = np.zeros(labels2d.shape, dtype=bool)
    b[:, :-1] |= labels2d[:, :-1] != labels2d[:, 1:]
    b[:-1, :] |= labels2d[:-1, :] != labels2d[1:, :]
    return b


def false_color(labels2d, seed=0) -> np.ndarray:
    """(H, W, 3) uint8 rendering with a fixed random color per region."""
    rng = np.random.default_rng(seed)
    palette = rng.integers(0, 256, size=(int(labels2d.max()) + 1, 3), dtype=np.uint8)
    return palette[labels2d]


def boundary_overlay(gray, labels2d, color=(255, 0, 0)) -> np.ndarray:
    rgb = np.repeat(np.asarray(gray, dtype=np.uint8)[:, :, None], 3, axis=2)
    rgb[boundary_map(labels2d)] = color
    return rgb
