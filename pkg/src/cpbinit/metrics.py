"""Background-estimate quality metrics: AGE, pEPs, pCEPs, PSNR, MS-SSIM, CQM.

Grayscale metrics run on the luma plane. CQM needs color; on grayscale
input it degrades to the luma PSNR and the report says so.

Fixed constants
---------------
* error threshold ``tau = 20`` gray levels, strict ``>``
* PSNR peak 255, capped at 100 dB when MSE is 0
* MS-SSIM: 11x11 Gaussian window, sigma 1.5, ``C1 = (0.01*255)**2``,
  ``C2 = (0.03*255)**2``, scale weights
  ``(0.0448, 0.2856, 0.3001, 0.2363, 0.1333)``, 2x2 mean + decimation
  between scales, "valid" filtering
* CQM: ``PSNR_Y * 0.9449 + (PSNR_U + PSNR_V) / 2 * 0.0551`` on BT.601 YUV
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from .errors import GeometryError
from .media_io import Frame, to_grayscale

TAU = 20
PSNR_CAP = 100.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

# rod / cone weights of the YUV color quality measure
CQM_ROD_WEIGHT = 0.9449
CQM_CONE_WEIGHT = 0.0551

RGB_TO_YUV = np.array([
    [0.299, 0.587, 0.114],
    [-0.14713, -0.28886, 0.436],
    [0.615, -0.51499, -0.10001],
])

REPORT_COLUMNS = ("AGE", "pEPs", "pCEPs", "PSNR", "MS-SSIM", "CQM")


@dataclass(frozen=True)
class MetricReport:
    age: float
    peps: float
    pceps: float
    psnr: float
    ms_ssim: float
    cqm: float
    cqm_gray_fallback: bool = False

    def as_row(self) -> dict:
        return dict(zip(REPORT_COLUMNS, (self.age, self.peps, self.pceps, self.psnr,
                                         self.ms_ssim, self.cqm)))

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.age, self.peps, self.pceps, self.psnr, self.ms_ssim, self.cqm)


def _gray(img) -> np.ndarray:
    if isinstance(img, Frame):
        return img.gray.astype(np.float64)
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 3:
        a = to_grayscale(a).astype(np.float64)
    return a


def _pair(gt, bi):
    a, b = _gray(gt), _gray(bi)
    if a.shape != b.shape:
        raise GeometryError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def age(gt, bi) -> float:
    a, b = _pair(gt, bi)
    return float(np.mean(np.abs(a - b)))


def error_map(gt, bi, tau=TAU) -> np.ndarray:
    a, b = _pair(gt, bi)
    return np.abs(a - b) > tau


def peps(gt, bi, tau=TAU) -> float:
    return float(np.mean(error_map(gt, bi, tau)))


def clustered_errors(err) -> np.ndarray:
    """Error pixels whose in-bounds 4-neighbors are all errors too."""
    # out-of-bounds neighbors count as errors so they never disqualify a pixel
    p = np.pad(err, 1, constant_values=True)
    return err & p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]


def pceps(gt, bi, tau=TAU) -> float:
    return float(np.mean(clustered_errors(error_map(gt, bi, tau))))


def _psnr_from_mse(mse) -> float:
    if mse == 0:
        return PSNR_CAP
    return 10.0 * math.log10(255.0 ** 2 / mse)


def psnr(gt, bi) -> float:
    a, b = _pair(gt, bi)
    return _psnr_from_mse(float(np.mean((a - b) ** 2)))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img, g):
    h = len(g) // 2
    out = ndimage.correlate1d(img, g, axis=0, mode="constant")
    out = ndimage.correlate1d(out, g, axis=1, mode="constant")
    return out[h:-h, h:-h]


def ssim_components(x, y) -> Tuple[float, float]:
    """Mean SSIM map and mean contrast-structure map at one scale."""
    g = gaussian_window()
    c1 = (SSIM_K1 * 255) ** 2
    c2 = (SSIM_K2 * 255) ** 2
    mu1 = _filter_valid(x, g)
    mu2 = _filter_valid(y, g)
    s11 = _filter_valid(x * x, g) - mu1 * mu1
    s22 = _filter_valid(y * y, g) - mu2 * mu2
    s12 = _filter_valid(x * y, g) - mu1 * mu2
    lum = (2 * mu1 * mu2 + c1) / (mu1 * mu1 + mu2 * mu2 + c1)
    cs = (2 * s12 + c2) / (s11 + s22 + c2)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def downsample(img) -> np.ndarray:
    """2x2 mean filter followed by decimation; odd edges are mirrored."""
    h, w = img.shape
    img = np.pad(img, ((0, h % 2), (0, w % 2)), mode="symmetric")
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def n_scales(shape, max_scales=len(MS_SSIM_WEIGHTS)) -> int:
    """Scale s (1-based) is used when the shorter side is at least 11 * 2**(s-1)."""
    side = min(shape)
    s = 0
    while s < max_scales and side >= SSIM_WINDOW * 2 ** s:
        s += 1
    return s


def ms_ssim_scales(gt, bi) -> List[Tuple[float, float]]:
    """(mean SSIM, mean CS) at each usable scale, finest first."""
    a, b = _pair(gt, bi)
    s = n_scales(a.shape)
    if s == 0:
        raise GeometryError(f"images smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    out = []
    for i in range(s):
        out.append(ssim_components(a, b))
        if i + 1 < s:
            a, b = downsample(a), downsample(b)
    return out


def _signed_pow(x, p):
    return math.copysign(abs(x) ** p, x)


def ms_ssim(gt, bi) -> float:
    comps = ms_ssim_scales(gt, bi)
    w = np.asarray(MS_SSIM_WEIGHTS[:len(comps)])
    w = w / w.sum()
    value = _signed_pow(comps[-1][0], w[-1])
    for (_, cs), wi in zip(comps[:-1], w[:-1]):
        value *= _signed_pow(cs, wi)
    return float(value)


def rgb_to_yuv(rgb) -> np.ndarray:
    return np.asarray(rgb, dtype=np.float64) @ RGB_TO_YUV.T


def cqm_yuv(gt_yuv, bi_yuv) -> float:
    """CQM from two (H, W, 3) YUV images."""
    a = np.asarray(gt_yuv, dtype=np.float64)
    b = np.asarray(bi_yuv, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 3 or a.shape[2] != 3:
        raise GeometryError("CQM needs two equally sized 3-channel images")
    p = [_psnr_from_mse(float(np.mean((a[..., c] - b[..., c]) ** 2))) for c in range(3)]
    return p[0] * CQM_ROD_WEIGHT + (p[1] + p[2]) / 2.0 * CQM_CONE_WEIGHT


def cqm(gt, bi) -> float:
    """CQM on RGB inputs; grayscale inputs fall back to the luma PSNR."""
    ca = gt.color if isinstance(gt, Frame) else np.asarray(gt)
    cb = bi.color if isinstance(bi, Frame) else np.asarray(bi)
    if ca is None or cb is None or np.ndim(ca) != 3 or np.ndim(cb) != 3:
        return psnr(gt, bi) * (CQM_ROD_WEIGHT + CQM_CONE_WEIGHT)
    return cqm_yuv(rgb_to_yuv(ca), rgb_to_yuv(cb))


def _has_color(img):
    if isinstance(img, Frame):
        return img.color is not None
    return np.ndim(img) == 3


def evaluate(gt, bi, tau=TAU) -> MetricReport:
    err = error_map(gt, bi, tau)
    fallback = not (_has_color(gt) and _has_color(bi))
    return MetricReport(
        age=age(gt, bi),
        peps=float(err.mean()),
        pceps=float(clustered_errors(err).mean()),
        psnr=psnr(gt, bi),
        ms_ssim=ms_ssim(gt, bi),
        cqm=cqm(gt, bi),
        cqm_gray_fallback=fallback,
    )


def write_csv(rows, path) -> None:
    """``rows``: iterable of (sequence, method, MetricReport)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("sequence", "method") + REPORT_COLUMNS)
        for seq, method, rep in rows:
            w.writerow([seq, method] + [repr(v) for v in rep.as_tuple()])


def write_json(rows, path) -> None:
    doc = {
        "columns": list(REPORT_COLUMNS),
        "results": [
            {"sequence": seq, "method": method, **rep.as_row(),
             "cqm_gray_fallback": rep.cqm_gray_fallback}
            for seq, method, rep in rows
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def report_dict(rep: MetricReport) -> dict:
    return asdict(rep)
