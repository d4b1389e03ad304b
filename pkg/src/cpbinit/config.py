"""Key/value configuration files.

One ``key = value`` per line; ``#`` starts a comment; blank lines and
``[section]`` headers are ignored. Recognized keys::

    train_frames    = 100
    blocks          = 8x8        # block width x height
    k               = 20
    eta             = 2.5
    lambda          = 0.5
    sigma_floor     = 1.0
    search_radius   = none       # blocks, or none for the whole frame
    superpixel_size = 64         # average region area in pixels
    region_count    = none       # overrides superpixel_size when set
    compactness     = 10
    max_iters       = 10
    min_region_frac = 0.25
    overlap_frac    = 0.1
    aggregate       = median     # last | mean | median
    mode            = auto       # auto | gray | color
"""
from __future__ import annotations

from dataclasses import replace

from .cpb_model import CpbParams
from .errors import ParamError
from .pipeline import PipelineConfig
from .superpixel import SlicParams


def parse_blocks(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise ParamError(f"blocks must look like WxH, got {text!r}") from None


def _optional_int(text):
    return None if str(text).lower() in ("none", "") else int(text)


# key -> (section, field, converter)
_KEYS = {
    "train_frames": ("cpb", "train_frames", int),
    "k": ("cpb", "k", int),
    "eta": ("cpb", "eta", float),
    "lambda": ("cpb", "lam", float),
    "sigma_floor": ("cpb", "sigma_floor", float),
    "search_radius": ("cpb", "search_radius", _optional_int),
    "superpixel_size": ("slic", "region_size", int),
    "region_count": ("slic", "region_count", _optional_int),
    "compactness": ("slic", "compactness", float),
    "max_iters": ("slic", "max_iters", int),
    "min_region_frac": ("slic", "min_region_frac", float),
    "overlap_frac": ("top", "overlap_frac", float),
    "aggregate": ("top", "aggregate", str),
    "mode": ("top", "mode", str),
}


def read_config(path) -> dict:
    """Raw key -> string mapping from a config file."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line or (line.startswith("[") and line.endswith("]")):
                continue
            if "=" not in line:
                raise ParamError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_").lower()
            if key not in _KEYS and key != "blocks":
                raise ParamError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def build_config(values: dict, base: PipelineConfig = None) -> PipelineConfig:
    """Apply raw or typed ``values`` on top of ``base`` (defaults when None)."""
    base = base or PipelineConfig()
    changes = {"cpb": {}, "slic": {}, "top": {}}
    for key, value in values.items():
        if value is None:
            continue
        if key == "blocks":
            w, h = parse_blocks(value) if isinstance(value, str) else value
            changes["cpb"].update(block_w=w, block_h=h)
            continue
        section, name, conv = _KEYS[key]
        try:
            changes[section][name] = conv(value) if isinstance(value, str) else value
        except ValueError:
            raise ParamError(f"bad value for {key}: {value!r}") from None
    cpb = replace(base.cpb, **changes["cpb"])
    slic = replace(base.slic, **changes["slic"])
    return replace(base, cpb=cpb, slic=slic, **changes["top"])


def default_config_text() -> str:
    cfg = PipelineConfig()
    c, s = cfg.cpb, cfg.slic
    return "\n".join([
        f"train_frames = {c.train_frames}",
        f"blocks = {c.block_w}x{c.block_h}",
        f"k = {c.k}",
        f"eta = {c.eta}",
        f"lambda = {c.lam}",
        f"sigma_floor = {c.sigma_floor}",
        f"search_radius = {c.search_radius if c.search_radius is not None else 'none'}",
        f"superpixel_size = {s.region_size}",
        f"compactness = {s.compactness}",
        f"max_iters = {s.max_iters}",
        f"min_region_frac = {s.min_region_frac}",
        f"overlap_frac = {cfg.overlap_frac}",
        f"aggregate = {cfg.aggregate}",
        f"mode = {cfg.mode}",
        "",
    ])


__all__ = ["read_config", "build_config", "parse_blocks", "default_config_text",
           "CpbParams", "SlicParams", "PipelineConfig"]
