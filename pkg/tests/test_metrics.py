import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cpbinit import metrics as mt
from cpbinit.errors import GeometryError
from cpbinit.media_io import Frame


# -- naive oracles ------------------------------------------------------------

def naive_age(a, b):
    h, w = a.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            total += abs(float(a[y, x]) - float(b[y, x]))
    return total / (h * w)


def naive_error(a, b, tau=20):
    h, w = a.shape
    return [[abs(int(a[y, x]) - int(b[y, x])) > tau for x in range(w)] for y in range(h)]


def naive_peps(a, b, tau=20):
    e = naive_error(a, b, tau)
    return sum(map(sum, e)) / (a.shape[0] * a.shape[1])


def naive_pceps(a, b, tau=20):
    e = naive_error(a, b, tau)
    h, w = a.shape
    n = 0
    for y in range(h):
        for x in range(w):
            if not e[y][x]:
                continue
            ok = True
            for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and not e[ny][nx]:
                    ok = False
            n += ok
    return n / (h * w)


def naive_psnr(a, b):
    h, w = a.shape
    se = 0.0
    for y in range(h):
        for x in range(w):
            se += (float(a[y, x]) - float(b[y, x])) ** 2
    mse = se / (h * w)
    return 100.0 if mse == 0 else 10 * math.log10(255 * 255 / mse)


def naive_ssim_scale1(a, b):
    """Windowed SSIM and CS means by explicit loops over every valid 11x11 window."""
    half = 5
    xs = np.arange(-half, half + 1)
    g1 = np.exp(-xs ** 2 / (2 * 1.5 ** 2))
    win = np.outer(g1, g1)
    win /= win.sum()
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    h, w = a.shape
    ssim_vals, cs_vals = [], []
    for y in range(half, h - half):
        for x in range(half, w - half):
            pa = a[y - half:y + half + 1, x - half:x + half + 1].astype(float)
            pb = b[y - half:y + half + 1, x - half:x + half + 1].astype(float)
            ma = (win * pa).sum()
            mb = (win * pb).sum()
            va = (win * (pa - ma) ** 2).sum()
            vb = (win * (pb - mb) ** 2).sum()
            cov = (win * (pa - ma) * (pb - mb)).sum()
            lum = (2 * ma * mb + c1) / (ma ** 2 + mb ** 2 + c1)
            cs = (2 * cov + c2) / (va + vb + c2)
            ssim_vals.append(lum * cs)
            cs_vals.append(cs)
    return np.mean(ssim_vals), np.mean(cs_vals)


def naive_cqm(rgb_a, rgb_b):
    def yuv(p):
        r, g, b = (float(c) for c in p)
        return (0.299 * r + 0.587 * g + 0.114 * b,
                -0.14713 * r - 0.28886 * g + 0.436 * b,
                0.615 * r - 0.51499 * g - 0.10001 * b)
    h, w, _ = rgb_a.shape
    se = [0.0, 0.0, 0.0]
    for y in range(h):
        for x in range(w):
            ya, yb = yuv(rgb_a[y, x]), yuv(rgb_b[y, x])
            for c in range(3):
                se[c] += (ya[c] - yb[c]) ** 2
    ps = [100.0 if s == 0 else 10 * math.log10(255 ** 2 / (s / (h * w))) for s in se]
    return ps[0] * 0.9449 + (ps[1] + ps[2]) / 2 * 0.0551


# -- AGE / pEPs / pCEPs / PSNR --------------------------------------------------

def test_age_examples():
    a = np.zeros((10, 10), np.uint8)
    assert mt.age(a, a) == 0
    b = a.copy()
    b[3, 4] = 255
    assert mt.age(a, b) == pytest.approx(2.55, abs=1e-12)


def test_peps_threshold_is_strict():
    a = np.full((5, 5), 100, np.uint8)
    assert mt.peps(a, a + 20) == 0.0
    assert mt.peps(a, a + 21) == 1.0


def test_pceps_examples():
    a = np.zeros((7, 7), np.uint8)
    assert mt.pceps(a, a + 100) == 1.0
    b = a.copy()
    b[3, 3] = 200
    assert mt.pceps(a, b) == 0.0


def test_pceps_border_rule():
    a = np.zeros((4, 4), np.uint8)
    b = a.copy()
    b[0, :2] = 200
    b[1, 0] = 200
    # corner (0,0): in-bounds neighbors (0,1) and (1,0) are both errors
    assert mt.clustered_errors(mt.error_map(a, b)).tolist()[0][:2] == [True, False]


def test_psnr_examples():
    a = np.zeros((8, 8), np.uint8)
    assert mt.psnr(a, a) == 100.0
    assert mt.psnr(a, a + 255) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_against_naive_oracles(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (24, 20)).astype(np.uint8)
    b = np.clip(a.astype(int) + rng.integers(-40, 41, a.shape), 0, 255).astype(np.uint8)
    assert mt.age(a, b) == pytest.approx(naive_age(a, b), abs=1e-9)
    assert mt.peps(a, b) == naive_peps(a, b)
    assert mt.pceps(a, b) == naive_pceps(a, b)
    assert mt.psnr(a, b) == pytest.approx(naive_psnr(a, b), abs=1e-9)


def test_shape_mismatch():
    with pytest.raises(GeometryError):
        mt.age(np.zeros((3, 3)), np.zeros((3, 4)))


pair = st.integers(8, 16).flatmap(lambda n: st.tuples(
    arrays(np.uint8, (n, n), elements=st.integers(0, 200)),
    arrays(np.uint8, (n, n), elements=st.integers(0, 200))))


@settings(max_examples=40, deadline=None)
@given(pair, st.integers(0, 55))
def test_metric_invariants(ab, shift):
    a, b = ab
    assert mt.age(a, b) == mt.age(b, a)
    assert mt.peps(a, b) == mt.peps(b, a)
    assert mt.pceps(a, b) == mt.pceps(b, a)
    assert mt.psnr(a, b) == mt.psnr(b, a)
    assert mt.pceps(a, b) <= mt.peps(a, b)
    zero = mt.age(a, b) == 0
    assert zero == (mt.peps(a, b) == 0 and np.array_equal(a, b))
    assert zero == (mt.psnr(a, b) == mt.PSNR_CAP)
    sa, sb = a + np.uint8(shift), b + np.uint8(shift)
    assert mt.age(sa, sb) == mt.age(a, b)
    assert mt.peps(sa, sb) == mt.peps(a, b)
    assert mt.pceps(sa, sb) == mt.pceps(a, b)


# -- MS-SSIM --------------------------------------------------------------------

def test_ms_ssim_identical():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 256, (200, 200)).astype(np.uint8)
    assert mt.ms_ssim(a, a) == 1.0


def test_ms_ssim_black_vs_white():
    a = np.zeros((16, 16), np.uint8)
    assert mt.ms_ssim(a, a + 255) < 0.05


def test_ms_ssim_scale_count():
    assert mt.n_scales((176, 176)) == 5
    assert mt.n_scales((240, 320)) == 5
    assert mt.n_scales((175, 300)) == 4
    assert mt.n_scales((88, 88)) == 4
    assert mt.n_scales((87, 400)) == 3
    assert mt.n_scales((21, 21)) == 1
    assert mt.n_scales((22, 22)) == 2
    assert mt.n_scales((16, 16)) == 1
    assert mt.n_scales((10, 40)) == 0
    with pytest.raises(GeometryError):
        mt.ms_ssim(np.zeros((8, 8)), np.zeros((8, 8)))


@pytest.mark.parametrize("seed", range(3))
def test_scale_one_matches_naive_ssim(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (26, 23)).astype(np.uint8)
    b = np.clip(a.astype(int) + rng.integers(-60, 61, a.shape), 0, 255).astype(np.uint8)
    got = mt.ms_ssim_scales(a, b)[0]
    want = naive_ssim_scale1(a, b)
    assert got[0] == pytest.approx(want[0], abs=1e-6)
    assert got[1] == pytest.approx(want[1], abs=1e-6)


def test_ms_ssim_combination():
    rng = np.random.default_rng(7)
    a = rng.integers(0, 256, (64, 64)).astype(np.uint8)
    b = np.clip(a.astype(int) + rng.integers(-30, 31, a.shape), 0, 255).astype(np.uint8)
    comps = mt.ms_ssim_scales(a, b)
    assert len(comps) == 3
    w = np.array(mt.MS_SSIM_WEIGHTS[:3]) / sum(mt.MS_SSIM_WEIGHTS[:3])
    expected = comps[0][1] ** w[0] * comps[1][1] ** w[1] * comps[2][0] ** w[2]
    assert mt.ms_ssim(a, b) == pytest.approx(expected, rel=1e-12)
    assert mt.ms_ssim(a, b) <= 1.0


def test_downsample_mean_of_pairs():
    img = np.arange(15, dtype=float).reshape(3, 5)
    d = mt.downsample(img)
    assert d.shape == (2, 3)
    assert d[0, 0] == np.mean([0, 1, 5, 6])
    assert d[1, 2] == np.mean([14, 14, 14, 14])


# -- CQM ------------------------------------------------------------------------

def test_cqm_identical():
    rng = np.random.default_rng(0)
    rgb = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
    assert mt.cqm(rgb, rgb) == pytest.approx(100.0, abs=1e-12)


def test_cqm_chroma_only_difference():
    yuv = np.zeros((8, 8, 3))
    other = yuv.copy()
    other[..., 1:] += 255
    assert mt.cqm_yuv(yuv, other) == pytest.approx(0.9449 * 100 + 0.0551 * 0.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_cqm_against_scratch_formula(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, (12, 14, 3)).astype(np.uint8)
    b = np.clip(a.astype(int) + rng.integers(-25, 26, a.shape), 0, 255).astype(np.uint8)
    assert mt.cqm(a, b) == pytest.approx(naive_cqm(a, b), abs=1e-6)


def test_cqm_gray_fallback():
    a = np.zeros((16, 16), np.uint8)
    b = a + 10
    assert mt.cqm(a, b) == pytest.approx(mt.psnr(a, b))
    assert mt.evaluate(a, b).cqm_gray_fallback


# -- evaluate + reports ------------------------------------------------------------

def test_evaluate_identity():
    rng = np.random.default_rng(1)
    f = Frame.from_color(rng.integers(0, 256, (32, 32, 3)).astype(np.uint8))
    rep = mt.evaluate(f, f)
    assert rep.as_tuple() == pytest.approx((0, 0, 0, 100, 1.0, 100), abs=1e-12)
    assert not rep.cqm_gray_fallback


def test_report_writers(tmp_path):
    rng = np.random.default_rng(2)
    a = Frame.from_color(rng.integers(0, 256, (20, 20, 3)).astype(np.uint8))
    b = Frame.from_color(rng.integers(0, 256, (20, 20, 3)).astype(np.uint8))
    rep = mt.evaluate(a, b)
    rows = [("seqA", "cpb", rep)]
    mt.write_csv(rows, tmp_path / "r.csv")
    with open(tmp_path / "r.csv") as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["sequence", "method", "AGE", "pEPs", "pCEPs", "PSNR", "MS-SSIM", "CQM"]
    assert float(got[1][2]) == rep.age and float(got[1][7]) == rep.cqm
    mt.write_json(rows, tmp_path / "r.json")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["columns"] == list(mt.REPORT_COLUMNS)
    assert doc["results"][0]["MS-SSIM"] == rep.ms_ssim
