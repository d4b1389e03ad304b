"""Scene background initialization with co-occurrence pixel-block pairs and superpixels."""
from .cpb_model import (
    BACKGROUND,
    FOREGROUND,
    BlockGrid,
    CpbModel,
    CpbParams,
    PixelModel,
    SupportEntry,
    classify_pixel,
    compute_block_means,
    detect_frame,
    fit_pair_gaussians,
    load_model,
    pearson_correlation,
    save_model,
    select_supporting_blocks,
    train,
)
from .errors import (
    BoundsError,
    CpbError,
    DecodeError,
    DimensionMismatch,
    GeometryError,
    InsufficientTraining,
    ModeError,
    NoFrames,
    ParamError,
    SpecError,
    WriteError,
)
from .media_io import Frame, FrameSequence, load_sequence, read_image, save_image, to_grayscale
from .metrics import MetricReport, age, cqm, evaluate, ms_ssim, pceps, peps, psnr
from .pipeline import (
    MotionMask,
    PipelineConfig,
    build_motion_mask,
    generate_background,
    run,
)
from .superpixel import SlicParams, SuperpixelLabeling, regions_touching, segment
from .synth import ObjectSpec, SynthSpec, make_sequence, synth

__version__ = "0.1.0"
