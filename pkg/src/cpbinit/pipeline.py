"""Train, detect, lift detections to superpixels, replace, aggregate."""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple

import numpy as np

from . import cpb_model
from .cpb_model import CpbModel, CpbParams
from .errors import GeometryError, ModeError, ParamError
from .media_io import Frame, FrameSequence, round_half_up, save_image
from .superpixel import SlicParams, SuperpixelLabeling, boundary_overlay, false_color, segment

AGGREGATES = ("last", "mean", "median")


@dataclass(frozen=True)
class MotionMask:
    mask: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 2:
            raise GeometryError("mask must be 2-D")
        if m.size and not np.isin(m, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        m = m.astype(np.uint8)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)


@dataclass(frozen=True)
class PipelineConfig:
    cpb: CpbParams = field(default_factory=CpbParams)
    slic: SlicParams = field(default_factory=SlicParams)
    overlap_frac: float = 0.1
    aggregate: str = "median"
    mode: str = "auto"  # gray, color, or auto (color when every frame has color)

    def __post_init__(self):
        if not 0 < self.overlap_frac <= 1:
            raise ParamError("overlap_frac must lie in (0, 1]")
        if self.aggregate not in AGGREGATES:
            raise ParamError(f"aggregate must be one of {AGGREGATES}")
        if self.mode not in ("auto", "gray", "color"):
            raise ParamError("mode must be auto, gray or color")

    def to_dict(self):
        return asdict(self)


class FrameResult(NamedTuple):
    fg_map: np.ndarray
    labeling: SuperpixelLabeling
    mask: MotionMask
    background: Frame


class PipelineResult(NamedTuple):
    background: Frame
    per_frame: List[FrameResult]
    model: CpbModel


def build_motion_mask(fg_map, labeling: SuperpixelLabeling, overlap_frac, frame_index=0) -> MotionMask:
    """Mask every region whose foreground share reaches ``overlap_frac``."""
    fg = np.asarray(fg_map)
    labels = labeling.labels
    if fg.shape != labels.shape:
        raise GeometryError(f"foreground map {fg.shape} vs labeling {labels.shape}")
    n = labeling.n_regions
    hits = np.bincount(labels.ravel(), weights=(fg.ravel() != 0), minlength=n)
    sizes = np.bincount(labels.ravel(), minlength=n)
    selected = hits / sizes >= overlap_frac
    return MotionMask(selected[labels].astype(np.uint8), frame_index)


def generate_background(model: CpbModel, frame: Frame, mask: MotionMask, mode="gray") -> Frame:
    """Replace masked pixels by the rounded model mean, pass the rest through."""
    m = np.asarray(mask.mask if isinstance(mask, MotionMask) else mask).astype(bool)
    if frame.shape != (model.height, model.width) or m.shape != frame.shape:
        raise GeometryError("frame, mask and model dimensions differ")
    gray = np.where(m, model.mean_image(), frame.gray)
    if mode == "gray":
        return Frame(gray, index=frame.index)
    if mode != "color":
        raise ValueError(f"mode must be 'gray' or 'color', got {mode!r}")
    if model.mean_rgb is None:
        raise ModeError("model was trained without color planes")
    if frame.color is None:
        raise ModeError("frame has no color planes")
    color = np.where(m[:, :, None], model.mean_color_image(), frame.color)
    return Frame(gray, color, index=frame.index)


def _resolve_mode(cfg, seq):
    if cfg.mode == "auto":
        return "color" if seq.is_color else "gray"
    return cfg.mode


def process_frame(model: CpbModel, frame: Frame, cfg: PipelineConfig, mode="gray") -> FrameResult:
    fg = cpb_model.detect_frame(model, frame)
    labeling = segment(frame, cfg.slic)
    mask = build_motion_mask(fg, labeling, cfg.overlap_frac, frame.index)
    return FrameResult(fg, labeling, mask, generate_background(model, frame, mask, mode))


def aggregate(backgrounds, how="median") -> Frame:
    """Pixelwise combination of per-frame backgrounds (per channel for color)."""
    if how == "last":
        return backgrounds[-1]
    reduce = {"mean": np.mean, "median": np.median}[how]
    gray = reduce(np.stack([b.gray for b in backgrounds]).astype(np.float64), axis=0)
    gray = np.clip(round_half_up(gray), 0, 255).astype(np.uint8)
    color = None
    if all(b.color is not None for b in backgrounds):
        c = reduce(np.stack([b.color for b in backgrounds]).astype(np.float64), axis=0)
        color = np.clip(round_half_up(c), 0, 255).astype(np.uint8)
    return Frame(gray, color, index=backgrounds[-1].index)


def detection_frames(seq: FrameSequence, train_frames: int):
    """Frames after the training window, or the window itself when nothing follows."""
    rest = seq.frames[train_frames:]
    return list(rest) if rest else list(seq.frames[:train_frames])


def run(seq: FrameSequence, cfg: PipelineConfig = PipelineConfig(), workers: int = 1,
        model: CpbModel = None) -> PipelineResult:
    mode = _resolve_mode(cfg, seq)
    if model is None:
        model = cpb_model.train(seq, cfg.cpb, workers=workers)
    frames = detection_frames(seq, cfg.cpb.train_frames)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            per_frame = list(ex.map(lambda f: process_frame(model, f, cfg, mode), frames))
    else:
        per_frame = [process_frame(model, f, cfg, mode) for f in frames]
    background = aggregate([r.background for r in per_frame], cfg.aggregate)
    return PipelineResult(background, per_frame, model)


def _mask_image(a):
    return Frame((np.asarray(a) != 0).astype(np.uint8) * 255)


def write_outputs(result: PipelineResult, out_dir, cfg: PipelineConfig, inputs=(),
                  emit_intermediates=False, wall_time=None, extra=None) -> dict:
    """Write the final background (and optionally every intermediate) plus manifest.json."""
    os.makedirs(out_dir, exist_ok=True)
    mode = "color" if result.background.color is not None else "gray"
    outputs = {"background": "background.png"}
    save_image(result.background, os.path.join(out_dir, "background.png"), mode)
    if emit_intermediates:
        per = []
        for r in result.per_frame:
            t = r.mask.frame_index
            names = {
                "fg_map": f"fg_{t:06d}.png",
                "mask": f"mask_{t:06d}.png",
                "labels": f"labels_{t:06d}.png",
                "boundaries": f"boundaries_{t:06d}.png",
                "background": f"bg_{t:06d}.png",
            }
            save_image(_mask_image(r.fg_map), os.path.join(out_dir, names["fg_map"]))
            save_image(_mask_image(r.mask.mask), os.path.join(out_dir, names["mask"]))
            save_image(Frame.from_color(false_color(r.labeling.labels)),
                       os.path.join(out_dir, names["labels"]), "color")
            save_image(Frame.from_color(boundary_overlay(r.background.gray, r.labeling.labels)),
                       os.path.join(out_dir, names["boundaries"]), "color")
            save_image(r.background, os.path.join(out_dir, names["background"]), mode)
            per.append({"frame_index": t, **names})
        outputs["per_frame"] = per
    manifest = {
        "inputs": list(inputs),
        "params": cfg.to_dict(),
        "outputs": outputs,
        "wall_time_s": wall_time,
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def initialize(seq: FrameSequence, cfg: PipelineConfig = PipelineConfig(), out_dir=None,
               emit_intermediates=False, workers=1) -> PipelineResult:
    """``run`` plus optional output directory with manifest."""
    t0 = time.perf_counter()
    result = run(seq, cfg, workers=workers)
    if out_dir is not None:
        write_outputs(result, out_dir, cfg, inputs=seq.names,
                      emit_intermediates=emit_intermediates,
                      wall_time=time.perf_counter() - t0)
    return result
