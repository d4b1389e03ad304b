"""Inside the pixel-block model: what a pixel keeps, and how it votes."""
import numpy as np

from cpbinit import CpbParams, FrameSequence, Frame
from cpbinit import cpb_model

rng = np.random.default_rng(0)

# A 64x48 scene whose brightness breathes slowly, plus sensor noise.
base = rng.integers(30, 200, (48, 64)).astype(float)
frames = []
for t in range(80):
    gain = 1.0 + 0.1 * np.sin(t / 7)
    frames.append(np.clip(np.round(base * gain + rng.normal(0, 2, base.shape)), 0, 255))
seq = FrameSequence.from_arrays([f.astype(np.uint8) for f in frames])

params = CpbParams(k=20, train_frames=80)
model = cpb_model.train(seq, params)
print(f"model: {model.width}x{model.height}, {model.cols}x{model.rows} blocks, K={model.k}")

# Each pixel keeps the blocks whose mean tracks it best over time, with the
# usual offset and spread of (pixel - block mean).
pm = model.pixel_model(10, 20)
print(f"\npixel (10, 20): mean {pm.mean_intensity:.1f}")
for s in pm.supports[:5]:
    print(f"  block ({s.u:2d},{s.v:2d})  corr {s.corr:+.3f}  offset {s.bias:+7.2f}  spread {s.sigma:5.2f}")

# A new frame: same scene at a brightness inside the trained range, with a
# dark patch pasted in.
test = np.clip(np.round(base * 1.05), 0, 255)
test[10:26, 30:46] = 5
frame = Frame(test.astype(np.uint8))
fg = cpb_model.detect_frame(model, frame)
print(f"\nforeground pixels: {fg.sum()} (patch has {16 * 16})")
print(f"inside patch flagged: {fg[10:26, 30:46].mean():.3f}")
print(f"outside patch flagged: {(fg.sum() - fg[10:26, 30:46].sum()) / (fg.size - 256):.4f}")

# Tighter gates and stricter votes both flag more pixels.
for eta in (1.0, 2.5, 5.0):
    n = cpb_model.detect_frame(model.with_params(eta=eta), frame).sum()
    print(f"eta={eta:3.1f}: {n:5d} foreground pixels")
for lam in (0.3, 0.5, 0.9):
    n = cpb_model.detect_frame(model.with_params(lam=lam), frame).sum()
    print(f"lam={lam:3.1f}: {n:5d} foreground pixels")
