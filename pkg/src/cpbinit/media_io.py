"""Loading and saving of 8-bit image sequences (PGM, PPM, PNG).

Frames carry a grayscale plane for every image and keep the RGB planes
when the source file is color. Grayscale is BT.601 luma rounded half up.
"""
from __future__ import annotations

import glob
import os
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, ModeError, NoFrames, WriteError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Pillow reports both P5 and P6 as "PPM"
_ACCEPTED_FORMATS = {"PNG", "PPM"}
_EXTENSIONS = {".png": "PNG", ".pgm": "PPM", ".ppm": "PPM", ".pnm": "PPM"}


def round_half_up(x):
    """Round to nearest integer, halves away from zero for non-negative input."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def to_grayscale(rgb):
    """BT.601 luma of an RGB triple or an ``(..., 3)`` array.

    Returns an ``int`` for a single triple, a ``uint8`` array otherwise.
    """
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.shape[-1] != 3:
        raise ValueError("last axis must hold R, G, B")
    y = arr[..., 0] * LUMA_WEIGHTS[0] + arr[..., 1] * LUMA_WEIGHTS[1] + arr[..., 2] * LUMA_WEIGHTS[2]
    y = np.clip(round_half_up(y), 0, 255)
    if arr.ndim == 1:
        return int(y)
    return y.astype(np.uint8)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Frame:
    """A single raster: ``gray`` is (height, width) uint8, ``color`` (height, width, 3)."""

    gray: np.ndarray
    color: Optional[np.ndarray] = None
    index: int = 0

    def __post_init__(self):
        gray = np.asarray(self.gray)
        if gray.ndim != 2:
            raise DimensionMismatch(f"gray plane must be 2-D, got shape {gray.shape}")
        if gray.dtype != np.uint8:
            if gray.size and (gray.min() < 0 or gray.max() > 255):
                raise ValueError("intensities must lie in [0, 255]")
            gray = gray.astype(np.uint8)
        object.__setattr__(self, "gray", _readonly(gray))
        if self.color is not None:
            color = np.asarray(self.color)
            if color.shape != gray.shape + (3,):
                raise DimensionMismatch(
                    f"color plane shape {color.shape} does not match gray {gray.shape}"
                )
            if color.dtype != np.uint8:
                if color.size and (color.min() < 0 or color.max() > 255):
                    raise ValueError("intensities must lie in [0, 255]")
                color = color.astype(np.uint8)
            object.__setattr__(self, "color", _readonly(color))

    @classmethod
    def from_color(cls, rgb, index=0):
        rgb = np.asarray(rgb, dtype=np.uint8)
        return cls(gray=to_grayscale(rgb), color=rgb, index=index)

    @property
    def width(self) -> int:
        return self.gray.shape[1]

    @property
    def height(self) -> int:
        return self.gray.shape[0]

    @property
    def shape(self):
        return self.gray.shape

    @property
    def is_color(self) -> bool:
        return self.color is not None

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        if self.index != other.index or not np.array_equal(self.gray, other.gray):
            return False
        if (self.color is None) != (other.color is None):
            return False
        return self.color is None or np.array_equal(self.color, other.color)

    __hash__ = None


@dataclass(frozen=True)
class FrameSequence:
    """Ordered, non-empty list of equally sized frames indexed 0..N-1."""

    frames: Sequence[Frame]
    names: Sequence[str] = field(default=(), compare=False)

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise NoFrames("sequence has no frames")
        shape = frames[0].shape
        for i, f in enumerate(frames):
            if f.shape != shape:
                raise DimensionMismatch(
                    f"frame {i} is {f.width}x{f.height}, expected {shape[1]}x{shape[0]}"
                )
            if f.index != i:
                raise ValueError(f"frame indices must be consecutive from 0, got {f.index} at {i}")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "names", tuple(self.names))

    @classmethod
    def from_arrays(cls, arrays):
        """Build from 2-D gray or 3-D RGB arrays, re-indexing from 0."""
        frames = []
        for i, a in enumerate(arrays):
            a = np.asarray(a)
            frames.append(Frame.from_color(a, i) if a.ndim == 3 else Frame(a, index=i))
        return cls(frames)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def is_color(self) -> bool:
        return all(f.is_color for f in self.frames)

    def gray_stack(self, count=None) -> np.ndarray:
        """(T, height, width) uint8 stack of the first ``count`` frames."""
        frames = self.frames if count is None else self.frames[:count]
        return np.stack([f.gray for f in frames])

    def color_stack(self, count=None) -> Optional[np.ndarray]:
        frames = self.frames if count is None else self.frames[:count]
        if not all(f.is_color for f in frames):
            return None
        return np.stack([f.color for f in frames])


def read_image(path, index=0) -> Frame:
    """Decode one PGM/PPM/PNG file into a Frame."""
    name = os.path.basename(path)
    try:
        with Image.open(path) as im:
            if im.format not in _ACCEPTED_FORMATS:
                raise DecodeError(name, f"unsupported format {im.format}")
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise DecodeError(name, f"only 8-bit images are supported (mode {mode})")
            if mode in ("1", "L", "LA"):
                gray = np.array(im.convert("L"))
                return Frame(gray, index=index)
            rgb = np.array(im.convert("RGB"))
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as exc:
        raise DecodeError(name, str(exc)) from exc
    return Frame.from_color(rgb, index)


def load_sequence(dir_path, pattern="*") -> FrameSequence:
    """Load every file in ``dir_path`` matching ``pattern``, sorted by filename."""
    if not os.path.isdir(dir_path):
        raise NoFrames(f"{dir_path} is not a directory")
    paths = sorted(
        p for p in glob.glob(os.path.join(glob.escape(str(dir_path)), pattern)) if os.path.isfile(p)
    )
    if not paths:
        raise NoFrames(f"no files match {pattern!r} in {dir_path}")
    frames = [read_image(p, i) for i, p in enumerate(paths)]
    return FrameSequence(frames, names=[os.path.basename(p) for p in paths])


def save_image(frame: Frame, path, mode="gray") -> None:
    """Write ``frame`` losslessly; the format follows the file extension."""
    ext = os.path.splitext(str(path))[1].lower()
    fmt = _EXTENSIONS.get(ext)
    if fmt is None:
        raise WriteError(f"unsupported output extension {ext!r} (use .png, .pgm or .ppm)")
    if mode == "gray":
        im = Image.fromarray(np.asarray(frame.gray))
    elif mode == "color":
        if frame.color is None:
            raise ModeError("frame has no color planes")
        if ext == ".pgm":
            raise WriteError("PGM cannot hold color; use .ppm or .png")
        im = Image.fromarray(np.asarray(frame.color))
    else:
        raise ValueError(f"mode must be 'gray' or 'color', got {mode!r}")
    try:
        im.save(path, format=fmt)
    except (OSError, ValueError) as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc
