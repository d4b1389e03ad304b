"""Synthetic color sequences with a known clean background."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .errors import SpecError
from .media_io import Frame, FrameSequence, round_half_up, save_image

BACKGROUNDS = ("gradient", "textured-noise", "checker")

# background intensities stay in this band so a +120 object and a 1.3x gain fit in 8 bits
_LO, _HI = 16.0, 128.0


@dataclass(frozen=True)
class ObjectSpec:
    width: int = 40
    height: int = 40
    offset: int = 120
    start: Tuple[int, int] = (0, 0)            # top-left (x, y) at the first active frame
    velocity: Tuple[int, int] = (2, 0)         # px per frame
    active: Tuple[int, int] = (0, 0)           # [first, last) active frames


@dataclass(frozen=True)
class SynthSpec:
    width: int = 320
    height: int = 240
    frames: int = 120
    background: str = "textured-noise"
    object: Optional[ObjectSpec] = None
    gain: float = 0.0       # per-frame gain slope a in g(t) = 1 + a*t
    jitter: int = 0         # max integer translation per frame, px
    noise: float = 0.0      # std of additive Gaussian sensor noise, gray levels
    seed: int = 0

    def validate(self):
        if self.width < 1 or self.height < 1 or self.frames < 1:
            raise SpecError("width, height and frames must be positive")
        if self.background not in BACKGROUNDS:
            raise SpecError(f"background must be one of {BACKGROUNDS}")
        if self.jitter < 0 or self.noise < 0:
            raise SpecError("jitter and noise must be >= 0")
        g_end = 1.0 + self.gain * (self.frames - 1)
        if g_end <= 0:
            raise SpecError("gain drives intensities negative")
        ob = self.object
        if ob is not None:
            if ob.width < 1 or ob.height < 1:
                raise SpecError("object size must be positive")
            a, b = ob.active
            if not 0 <= a <= b <= self.frames:
                raise SpecError("object active range outside the sequence")
            for t in (a, b - 1) if b > a else ():
                x, y = self._object_origin(t)
                if x < 0 or y < 0 or x + ob.width > self.width or y + ob.height > self.height:
                    raise SpecError(f"object leaves the frame at t={t}")

    def _object_origin(self, t):
        ob = self.object
        dt = t - ob.active[0]
        return ob.start[0] + ob.velocity[0] * dt, ob.start[1] + ob.velocity[1] * dt


def _make_background(spec: SynthSpec, rng) -> np.ndarray:
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    if spec.background == "gradient":
        base = [xx / max(w - 1, 1), yy / max(h - 1, 1), (xx + yy) / max(w + h - 2, 1)]
    elif spec.background == "checker":
        cell = 16
        c = ((xx // cell + yy // cell) % 2).astype(np.float64)
        base = [c, 1.0 - c, 0.5 + 0.5 * c]
    else:
        base = []
        for _ in range(3):
            n = ndimage.gaussian_filter(rng.normal(size=(h, w)), 2.0)
            n = n + 0.15 * rng.normal(size=(h, w))
            base.append((n - n.min()) / max(n.max() - n.min(), 1e-12))
    rgb = np.stack(base, axis=2)
    return round_half_up(_LO + rgb * (_HI - _LO)).astype(np.uint8)


def make_sequence(spec: SynthSpec) -> Tuple[FrameSequence, Frame]:
    """Generate frames in memory; returns (sequence, clean background)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    bg = _make_background(spec, rng)
    gt = Frame.from_color(bg)
    frames = []
    for t in range(spec.frames):
        img = bg.astype(np.float64)
        if spec.jitter:
            dx, dy = rng.integers(-spec.jitter, spec.jitter + 1, size=2)
            img = ndimage.shift(img, (dy, dx, 0), order=0, mode="nearest")
        ob = spec.object
        if ob is not None and ob.active[0] <= t < ob.active[1]:
            x, y = spec._object_origin(t)
            img[y:y + ob.height, x:x + ob.width] += ob.offset
        if spec.gain:
            img = img * (1.0 + spec.gain * t)
        if spec.noise:
            img = img + rng.normal(0.0, spec.noise, size=img.shape)
        img = np.clip(round_half_up(img), 0, 255).astype(np.uint8)
        frames.append(Frame.from_color(img, t))
    return FrameSequence(frames, names=[f"in{t:06d}.png" for t in range(spec.frames)]), gt


def synth(spec: SynthSpec, out_dir) -> Tuple[FrameSequence, Frame]:
    """Write ``in%06d.png`` frames and ``gt.png`` to ``out_dir/`` (gt beside the frames dir)."""
    seq, gt = make_sequence(spec)
    frames_dir = os.path.join(out_dir, "input")
    os.makedirs(frames_dir, exist_ok=True)
    for f, name in zip(seq, seq.names):
        save_image(f, os.path.join(frames_dir, name), "color")
    save_image(gt, os.path.join(out_dir, "gt.png"), "color")
    return seq, gt
