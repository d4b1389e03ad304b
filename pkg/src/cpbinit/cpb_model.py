"""Co-occurrence pixel-block (CPB) background model.

Every pixel is paired with the K image blocks whose mean-intensity time
series correlate best with the pixel's own series over the training
window. For each pair the difference ``pixel - block_mean`` is modeled as
a Gaussian ``N(bias, sigma**2)``. At detection time a pair votes
"consistent" when the observed difference stays inside ``eta`` standard
deviations of its bias; a pixel is background when the fraction of
consistent votes reaches ``lam``.

Training is vectorized over chunks of pixels. Chunk boundaries are fixed
independently of the worker count, so threaded training is bit-identical
to the serial path.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from .errors import GeometryError, InsufficientTraining, ParamError
from .media_io import Frame, FrameSequence, round_half_up

BACKGROUND = 0
FOREGROUND = 1

MODEL_FORMAT = "cpb-model"
MODEL_VERSION = 1

_CHUNK = 2048
# rank key for constant block series: below every defined correlation
_CONSTANT_KEY = -2.0
_EXCLUDED_KEY = -np.inf
_CONST_EPS = 1e-9


@dataclass(frozen=True)
class CpbParams:
    k: int = 20
    eta: float = 2.5
    lam: float = 0.5
    block_w: int = 8
    block_h: int = 8
    train_frames: int = 100
    sigma_floor: float = 1.0
    # None: every block is a candidate; r: only blocks within r block steps
    search_radius: Optional[int] = None

    def __post_init__(self):
        if self.k < 1:
            raise ParamError("k must be >= 1")
        if not self.eta > 0:
            raise ParamError("eta must be > 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ParamError("lam must lie in [0, 1]")
        if self.block_w < 1 or self.block_h < 1:
            raise ParamError("block dimensions must be >= 1")
        if self.train_frames < 2:
            raise InsufficientTraining("train_frames must be >= 2")
        if self.sigma_floor < 0:
            raise ParamError("sigma_floor must be >= 0")
        if self.search_radius is not None and self.search_radius < 0:
            raise ParamError("search_radius must be >= 0")


@dataclass(frozen=True)
class BlockGrid:
    """Per-frame block means, ``means[t, row, col]``.

    Residual columns/rows that do not fill a whole block are folded into
    the last block of their axis.
    """

    block_w: int
    block_h: int
    cols: int
    rows: int
    means: np.ndarray

    @property
    def n_blocks(self) -> int:
        return self.cols * self.rows

    @property
    def series(self) -> np.ndarray:
        """(T, n_blocks) block-mean time series, blocks in raster order v*cols+u."""
        return self.means.reshape(self.means.shape[0], -1)

    def block_of_pixel(self, height, width) -> np.ndarray:
        ys = np.minimum(np.arange(height) // self.block_h, self.rows - 1)
        xs = np.minimum(np.arange(width) // self.block_w, self.cols - 1)
        return ys[:, None] * self.cols + xs[None, :]


@dataclass(frozen=True)
class SupportEntry:
    u: int
    v: int
    bias: float
    sigma: float
    corr: float


@dataclass(frozen=True)
class PixelModel:
    mean_intensity: float
    supports: Tuple[SupportEntry, ...]
    mean_rgb: Optional[Tuple[float, float, float]] = None


def _grid_shape(height, width, block_w, block_h):
    if block_w > width or block_h > height:
        raise GeometryError(
            f"block {block_w}x{block_h} larger than frame {width}x{height}"
        )
    return width // block_w, height // block_h


def block_means(gray, block_w, block_h) -> BlockGrid:
    """Block means of a (H, W) image or a (T, H, W) stack."""
    stack = np.asarray(gray, dtype=np.float64)
    if stack.ndim == 2:
        stack = stack[None]
    _, height, width = stack.shape
    cols, rows = _grid_shape(height, width, block_w, block_h)
    col_sums = np.add.reduceat(stack, np.arange(cols) * block_w, axis=2)
    sums = np.add.reduceat(col_sums, np.arange(rows) * block_h, axis=1)
    widths = np.full(cols, block_w)
    widths[-1] = width - block_w * (cols - 1)
    heights = np.full(rows, block_h)
    heights[-1] = height - block_h * (rows - 1)
    means = sums / (heights[:, None] * widths[None, :])
    return BlockGrid(block_w, block_h, cols, rows, means)


def compute_block_means(seq, block_w, block_h) -> BlockGrid:
    if isinstance(seq, FrameSequence):
        return block_means(seq.gray_stack(), block_w, block_h)
    if isinstance(seq, Frame):
        return block_means(seq.gray, block_w, block_h)
    return block_means(seq, block_w, block_h)


def pearson_correlation(xs, ys) -> float:
    """Pearson correlation with population moments; 0.0 when either series is constant."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be 1-D and of equal length")
    if x.size < 2:
        raise ValueError("need at least two samples")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(np.mean(xc * xc))
    sy = np.sqrt(np.mean(yc * yc))
    if sx < _CONST_EPS or sy < _CONST_EPS:
        return 0.0
    r = np.mean(xc * yc) / (sx * sy)
    return float(min(1.0, max(-1.0, r)))


def _correlations(pix, blocks):
    """Correlations and ranking keys between (n, T) pixel series and (T, nb) block series."""
    T = pix.shape[1]
    pc = pix - pix.mean(axis=1, keepdims=True)
    bc = blocks - blocks.mean(axis=0, keepdims=True)
    sp = np.sqrt(np.einsum("ij,ij->i", pc, pc) / T)
    sb = np.sqrt(np.einsum("ij,ij->j", bc, bc) / T)
    cov = pc @ bc / T
    pix_ok = sp >= _CONST_EPS
    blk_ok = sb >= _CONST_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = cov / (sp[:, None] * sb[None, :])
    ok = pix_ok[:, None] & blk_ok[None, :]
    corr = np.where(ok, np.clip(corr, -1.0, 1.0), 0.0)
    keys = np.where(blk_ok[None, :], corr, _CONSTANT_KEY)
    # constant pixel: every correlation is defined as 0, ties broken by index
    keys[~pix_ok] = 0.0
    return corr, keys


def _top_k(keys, k):
    """Indices of the k largest keys per row, ordered by (key desc, index asc)."""
    n, nb = keys.shape
    k = min(k, nb)
    kth = -np.partition(-keys, k - 1, axis=1)[:, k - 1]
    greater = keys > kth[:, None]
    need = k - greater.sum(axis=1)
    tied = keys == kth[:, None]
    take = tied & (np.cumsum(tied, axis=1) <= need[:, None])
    sel = greater | take
    idx = np.nonzero(sel)[1].reshape(n, k)
    order = np.argsort(-np.take_along_axis(keys, idx, axis=1), axis=1, kind="stable")
    return np.take_along_axis(idx, order, axis=1)


def _window_mask(pixel_blocks, cols, rows, radius):
    """(n, nb) bool: candidate blocks within ``radius`` block steps of each pixel's block."""
    pu = pixel_blocks % cols
    pv = pixel_blocks // cols
    bu = np.arange(cols * rows) % cols
    bv = np.arange(cols * rows) // cols
    return (np.abs(pu[:, None] - bu[None, :]) <= radius) & (np.abs(pv[:, None] - bv[None, :]) <= radius)


def select_supporting_blocks(pixel_series, grid: BlockGrid, k) -> List[Tuple[int, int, float]]:
    """The k blocks best correlated with one pixel series, as (u, v, corr)."""
    pix = np.asarray(pixel_series, dtype=np.float64)[None, :]
    corr, keys = _correlations(pix, grid.series)
    idx = _top_k(keys, k)[0]
    return [(int(i % grid.cols), int(i // grid.cols), float(corr[0, i])) for i in idx]


def fit_pair_gaussians(pixel_series, grid: BlockGrid, chosen) -> List[SupportEntry]:
    """Population mean and standard deviation of pixel-minus-block differences."""
    pix = np.asarray(pixel_series, dtype=np.float64)
    out = []
    for u, v, corr in chosen:
        if not (0 <= u < grid.cols and 0 <= v < grid.rows):
            raise GeometryError(f"block ({u}, {v}) outside {grid.cols}x{grid.rows} grid")
        delta = pix - grid.means[:, v, u]
        out.append(SupportEntry(int(u), int(v), float(delta.mean()), float(delta.std()), float(corr)))
    return out


class CpbModel:
    """Trained per-pixel model stored as dense arrays.

    ``support`` holds flat block indices (v * cols + u), shape (H, W, K);
    slots beyond ``n_support`` are -1 and only occur with a restricted
    search window.
    """

    def __init__(self, params, width, height, cols, rows, mean, support, bias, sigma, corr,
                 n_support, mean_rgb=None):
        self.params = params
        self.width = int(width)
        self.height = int(height)
        self.cols = int(cols)
        self.rows = int(rows)
        self.mean = mean
        self.mean_rgb = mean_rgb
        self.support = support
        self.bias = bias
        self.sigma = sigma
        self.corr = corr
        self.n_support = n_support
        for a in (mean, mean_rgb, support, bias, sigma, corr, n_support):
            if a is not None:
                a.setflags(write=False)

    @property
    def k(self) -> int:
        return self.support.shape[2]

    def with_params(self, **changes) -> "CpbModel":
        """Same trained arrays, different detection thresholds (eta, lam, sigma_floor)."""
        bad = set(changes) - {"eta", "lam", "sigma_floor"}
        if bad:
            raise ParamError(f"only detection parameters can change after training: {sorted(bad)}")
        return CpbModel(replace(self.params, **changes), self.width, self.height, self.cols,
                        self.rows, self.mean, self.support, self.bias, self.sigma, self.corr,
                        self.n_support, self.mean_rgb)

    def pixel_model(self, x, y) -> PixelModel:
        n = int(self.n_support[y, x])
        sup = tuple(
            SupportEntry(int(i % self.cols), int(i // self.cols), float(b), float(s), float(c))
            for i, b, s, c in zip(self.support[y, x, :n], self.bias[y, x, :n],
                                  self.sigma[y, x, :n], self.corr[y, x, :n])
        )
        rgb = None if self.mean_rgb is None else tuple(float(c) for c in self.mean_rgb[y, x])
        return PixelModel(float(self.mean[y, x]), sup, rgb)

    def mean_image(self) -> np.ndarray:
        return round_half_up(self.mean).astype(np.uint8)

    def mean_color_image(self) -> Optional[np.ndarray]:
        if self.mean_rgb is None:
            return None
        return np.clip(round_half_up(self.mean_rgb), 0, 255).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, CpbModel):
            return NotImplemented
        if (self.params, self.width, self.height, self.cols, self.rows) != (
                other.params, other.width, other.height, other.cols, other.rows):
            return False
        if (self.mean_rgb is None) != (other.mean_rgb is None):
            return False
        pairs = [(self.mean, other.mean), (self.support, other.support), (self.bias, other.bias),
                 (self.sigma, other.sigma), (self.corr, other.corr),
                 (self.n_support, other.n_support)]
        if self.mean_rgb is not None:
            pairs.append((self.mean_rgb, other.mean_rgb))
        return all(np.array_equal(a, b) for a, b in pairs)

    __hash__ = None


def _train_chunk(pix, blocks, pixel_blocks, k, grid, radius):
    corr, keys = _correlations(pix, blocks)
    k_eff = min(k, blocks.shape[1])
    if radius is not None:
        inside = _window_mask(pixel_blocks, grid.cols, grid.rows, radius)
        keys = np.where(inside, keys, _EXCLUDED_KEY)
    idx = _top_k(keys, k_eff)
    valid = np.isfinite(np.take_along_axis(keys, idx, axis=1))
    sel_corr = np.where(valid, np.take_along_axis(corr, idx, axis=1), 0.0)
    delta = pix[:, None, :] - blocks.T[idx]
    bias = np.where(valid, delta.mean(axis=2), 0.0)
    sigma = np.where(valid, delta.std(axis=2), 0.0)
    idx = np.where(valid, idx, -1)
    # valid slots are a prefix: excluded keys sort last
    return idx.astype(np.int32), bias, sigma, sel_corr, valid.sum(axis=1).astype(np.int32)


def train(seq: FrameSequence, params: CpbParams = CpbParams(), workers: int = 1) -> CpbModel:
    """Fit the CPB model on the first ``params.train_frames`` frames of ``seq``."""
    T = params.train_frames
    if len(seq) < T:
        raise InsufficientTraining(f"need {T} training frames, sequence has {len(seq)}")
    stack = seq.gray_stack(T).astype(np.float64)
    _, height, width = stack.shape
    grid = block_means(stack, params.block_w, params.block_h)
    blocks = grid.series
    pix_all = stack.reshape(T, -1).T.copy()
    pixel_blocks = grid.block_of_pixel(height, width).ravel()
    n = pix_all.shape[0]
    starts = list(range(0, n, _CHUNK))

    def work(s):
        e = min(s + _CHUNK, n)
        return _train_chunk(pix_all[s:e], blocks, pixel_blocks[s:e], params.k, grid,
                            params.search_radius)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]

    k_eff = min(params.k, grid.n_blocks)
    shape3 = (height, width, k_eff)
    support = np.concatenate([p[0] for p in parts]).reshape(shape3)
    bias = np.concatenate([p[1] for p in parts]).reshape(shape3)
    sigma = np.concatenate([p[2] for p in parts]).reshape(shape3)
    corr = np.concatenate([p[3] for p in parts]).reshape(shape3)
    n_support = np.concatenate([p[4] for p in parts]).reshape(height, width)
    mean = stack.mean(axis=0)
    rgb = seq.color_stack(T)
    mean_rgb = None if rgb is None else rgb.astype(np.float64).mean(axis=0)
    return CpbModel(params, width, height, grid.cols, grid.rows, mean, support, bias, sigma,
                    corr, n_support, mean_rgb)


def classify_pixel(model_entry: PixelModel, current_block_means, current_intensity,
                   params: CpbParams) -> int:
    """FOREGROUND or BACKGROUND for one pixel; ``current_block_means`` is (rows, cols)."""
    means = np.asarray(current_block_means, dtype=np.float64)
    sups = model_entry.supports
    if not sups:
        return BACKGROUND
    votes = 0
    for s in sups:
        delta = float(current_intensity) - means[s.v, s.u]
        if abs(delta - s.bias) <= params.eta * max(s.sigma, params.sigma_floor):
            votes += 1
    return BACKGROUND if votes / len(sups) >= params.lam else FOREGROUND


def consistent_fraction(model: CpbModel, frame) -> np.ndarray:
    """Per-pixel fraction of supports whose gate accepts the current frame."""
    gray = frame.gray if isinstance(frame, Frame) else np.asarray(frame)
    if gray.shape != (model.height, model.width):
        raise GeometryError(
            f"frame {gray.shape[1]}x{gray.shape[0]} does not match model {model.width}x{model.height}"
        )
    p = model.params
    cur = block_means(gray, p.block_w, p.block_h).means[0].ravel()
    valid = model.support >= 0
    delta = gray.astype(np.float64)[:, :, None] - cur[np.where(valid, model.support, 0)]
    gate = p.eta * np.maximum(model.sigma, p.sigma_floor)
    ok = (np.abs(delta - model.bias) <= gate) & valid
    n = np.maximum(model.n_support, 1)
    return ok.sum(axis=2) / n


def detect_frame(model: CpbModel, frame) -> np.ndarray:
    """Binary (H, W) uint8 map, 1 where the pixel is foreground."""
    frac = consistent_fraction(model, frame)
    fg = (frac < model.params.lam) & (model.n_support > 0)
    return fg.astype(np.uint8)


def save_model(model: CpbModel, path) -> None:
    """Write a model as an ``.npz`` archive (see README for the layout)."""
    k = model.k
    support_t = np.dtype([("u", "<i4"), ("v", "<i4"), ("bias", "<f8"), ("sigma", "<f8"),
                          ("corr", "<f8")])
    rec_t = np.dtype([("mean", "<f8"), ("n_support", "<i4"), ("support", support_t, (k,))])
    rec = np.zeros((model.height, model.width), dtype=rec_t)
    rec["mean"] = model.mean
    rec["n_support"] = model.n_support
    valid = model.support >= 0
    rec["support"]["u"] = np.where(valid, model.support % model.cols, -1)
    rec["support"]["v"] = np.where(valid, model.support // model.cols, -1)
    rec["support"]["bias"] = model.bias
    rec["support"]["sigma"] = model.sigma
    rec["support"]["corr"] = model.corr
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "width": model.width,
        "height": model.height,
        "cols": model.cols,
        "rows": model.rows,
        "k": k,
        "params": asdict(model.params),
        "has_rgb": model.mean_rgb is not None,
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
              "records": rec}
    if model.mean_rgb is not None:
        arrays["mean_rgb"] = model.mean_rgb
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> CpbModel:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(z["header"].tobytes().decode())
        if header.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path} is not a CPB model file")
        if header.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {header.get('version')}")
        rec = z["records"]
        mean_rgb = z["mean_rgb"].copy() if header["has_rgb"] else None
    params = CpbParams(**header["params"])
    cols = header["cols"]
    sup = rec["support"]
    u = sup["u"].astype(np.int64)
    v = sup["v"].astype(np.int64)
    support = np.where(u >= 0, v * cols + u, -1).astype(np.int32)
    return CpbModel(params, header["width"], header["height"], cols, header["rows"],
                    rec["mean"].copy(), support, sup["bias"].copy(), sup["sigma"].copy(),
                    sup["corr"].copy(), rec["n_support"].astype(np.int32), mean_rgb)
