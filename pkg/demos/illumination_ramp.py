"""Global brightness ramps: what the model absorbs and where it stops.

The pixel and its supporting blocks brighten together, so correlations stay
near 1. The stored offsets, however, are fixed at training time. A frame
far brighter than anything seen in training moves the offsets by the gain
factor and eventually leaves the gate.
"""
from cpbinit import CpbParams, cpb_model
from cpbinit.synth import SynthSpec, make_sequence

for background in ("checker", "textured-noise", "gradient"):
    seq, _ = make_sequence(SynthSpec(160, 120, 150, background, gain=0.002, seed=6))
    print(f"\n{background}: gain 1.000 -> {1 + 0.002 * 149:.3f}")
    for T in (50, 100, 150):
        model = cpb_model.train(seq, CpbParams(train_frames=T))
        worst = min(1 - cpb_model.detect_frame(model, seq[t]).mean() for t in range(150))
        last = 1 - cpb_model.detect_frame(model, seq[149]).mean()
        print(f"  trained on frames 0-{T - 1:3d}: worst background fraction {worst:.3f}, "
              f"last frame {last:.3f}")
