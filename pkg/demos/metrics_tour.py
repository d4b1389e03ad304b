"""How the six quality scores react to different kinds of damage."""
import numpy as np
from scipy import ndimage

from cpbinit import Frame, metrics
from cpbinit.synth import SynthSpec, make_sequence

_, gt = make_sequence(SynthSpec(192, 192, 1, "textured-noise", seed=3))
rng = np.random.default_rng(0)
ref = gt.color.astype(float)


def as_frame(rgb):
    return Frame.from_color(np.clip(np.round(rgb), 0, 255).astype(np.uint8))


damaged = {
    "identical": ref,
    "noise sd 5": ref + rng.normal(0, 5, ref.shape),
    "noise sd 25": ref + rng.normal(0, 25, ref.shape),
    "blur sigma 2": ndimage.gaussian_filter(ref, (2, 2, 0)),
    "brighter +15": ref + 15,
    "ghost square": np.where(np.arange(192)[:, None, None] // 48 == 1, ref + 60, ref),
    "chroma shift": ref + np.array([12.0, -6.0, 0.0]),
}

print(f"{'':14s}" + "".join(f"{c:>10s}" for c in metrics.REPORT_COLUMNS))
for name, img in damaged.items():
    rep = metrics.evaluate(gt, as_frame(img))
    print(f"{name:14s}" + "".join(f"{v:10.4f}" for v in rep.as_tuple()))

# MS-SSIM scale count follows the image size.
for side in (16, 48, 96, 176):
    print(f"{side:3d}x{side:<3d} -> {metrics.n_scales((side, side))} scales")
