"""Command-line interface: ``cpbinit {train,detect,initialize,evaluate,synth}``.

Exit codes: 0 success, 2 usage, 3 data error, 4 internal error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback

from . import cpb_model, metrics, pipeline
from .config import build_config, read_config
from .errors import CpbError
from .media_io import Frame, load_sequence, read_image, save_image
from .synth import ObjectSpec, SynthSpec, synth

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _pair(text, sep=","):
    a, b = text.replace("x", sep).split(sep)
    return int(a), int(b)


def _add_params(p):
    g = p.add_argument_group("model parameters (override --config)")
    g.add_argument("--config", help="key = value configuration file")
    g.add_argument("--train-frames", type=int)
    g.add_argument("--blocks", help="block size WxH, e.g. 8x8")
    g.add_argument("--k", type=int, help="supporting blocks per pixel")
    g.add_argument("--eta", type=float, help="Gaussian gate multiplier")
    g.add_argument("--lambda", dest="lam", type=float, help="decision threshold in [0, 1]")
    g.add_argument("--superpixel-size", type=int, help="average superpixel area, px")
    g.add_argument("--compactness", type=float)
    g.add_argument("--overlap-frac", type=float)
    g.add_argument("--aggregate", choices=pipeline.AGGREGATES)
    g.add_argument("--seed", type=int, default=0, help="recorded in the manifest")
    g.add_argument("--workers", type=int, default=1)


def _effective_config(args):
    values = read_config(args.config) if getattr(args, "config", None) else {}
    flags = {
        "train_frames": args.train_frames,
        "blocks": args.blocks,
        "k": args.k,
        "eta": args.eta,
        "lambda": args.lam,
        "superpixel_size": args.superpixel_size,
        "compactness": args.compactness,
        "overlap_frac": args.overlap_frac,
        "aggregate": args.aggregate,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    return build_config(values)


def _load_input(args):
    if not args.input:
        raise UsageError("--input is required")
    return load_sequence(args.input, args.pattern)


def _write_manifest(path, inputs, cfg, outputs, t0, seed, extra=None):
    doc = {
        "inputs": list(inputs),
        "params": cfg.to_dict(),
        "seed": seed,
        "outputs": outputs,
        "wall_time_s": time.perf_counter() - t0,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def _manifest_path(out):
    base = out[:-4] if out.endswith(".npz") else os.path.splitext(out)[0]
    return base + ".manifest.json" if not os.path.isdir(out) else os.path.join(out, "manifest.json")


def cmd_train(args):
    t0 = time.perf_counter()
    cfg = _effective_config(args)
    seq = _load_input(args)
    model = cpb_model.train(seq, cfg.cpb, workers=args.workers)
    cpb_model.save_model(model, args.out)
    _write_manifest(_manifest_path(args.out), seq.names, cfg, {"model": args.out}, t0, args.seed)
    print(f"trained {model.width}x{model.height} model on {cfg.cpb.train_frames} frames -> {args.out}")


def cmd_detect(args):
    t0 = time.perf_counter()
    cfg = _effective_config(args)
    seq = _load_input(args)
    if args.model:
        model = cpb_model.load_model(args.model)
        cfg = build_config({}, pipeline.PipelineConfig(
            cpb=model.params, slic=cfg.slic, overlap_frac=cfg.overlap_frac,
            aggregate=cfg.aggregate, mode=cfg.mode))
    else:
        model = cpb_model.train(seq, cfg.cpb, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    written = []
    for frame in pipeline.detection_frames(seq, cfg.cpb.train_frames):
        res = pipeline.process_frame(model, frame, cfg, "gray")
        t = frame.index
        fg_name, mask_name = f"fg_{t:06d}.png", f"mask_{t:06d}.png"
        save_image(Frame(res.fg_map * 255), os.path.join(args.out, fg_name))
        save_image(Frame(res.mask.mask * 255), os.path.join(args.out, mask_name))
        written.append({"frame_index": t, "fg_map": fg_name, "mask": mask_name,
                        "fg_fraction": float(res.fg_map.mean())})
    _write_manifest(os.path.join(args.out, "manifest.json"), seq.names, cfg,
                    {"per_frame": written}, t0, args.seed)
    print(f"wrote {len(written)} foreground maps and masks to {args.out}")


def cmd_initialize(args):
    t0 = time.perf_counter()
    cfg = _effective_config(args)
    seq = _load_input(args)
    result = pipeline.run(seq, cfg, workers=args.workers)
    bg = result.background
    save_image(bg, args.out, "color" if bg.color is not None and not args.out.endswith(".pgm") else "gray")
    outputs = {"background": args.out}
    if args.emit_intermediates:
        pipeline.write_outputs(result, args.emit_intermediates, cfg, inputs=seq.names,
                               emit_intermediates=True, wall_time=time.perf_counter() - t0)
        outputs["intermediates"] = args.emit_intermediates
    _write_manifest(_manifest_path(args.out), seq.names, cfg, outputs, t0, args.seed)
    print(f"background -> {args.out}")


def cmd_evaluate(args):
    if not args.gt or not args.bi:
        raise UsageError("--gt and --bi are required")
    gt, bi = read_image(args.gt), read_image(args.bi)
    rep = metrics.evaluate(gt, bi)
    rows = [(args.sequence, args.method, rep)]
    if args.out:
        if args.out.endswith(".csv"):
            metrics.write_csv(rows, args.out)
        else:
            metrics.write_json(rows, args.out)
    for name, value in rep.as_row().items():
        print(f"{name:8s} {value:.4f}")
    if rep.cqm_gray_fallback:
        print("note: grayscale input, CQM is the luma PSNR")


def cmd_synth(args):
    obj = None
    if args.object:
        ow, oh = _pair(args.object, "x")
        a, b = (int(v) for v in args.active.split(":")) if args.active else (0, args.frames)
        obj = ObjectSpec(ow, oh, args.offset, _pair(args.start), _pair(args.velocity), (a, b))
    spec = SynthSpec(args.width, args.height, args.frames, args.background, obj, args.gain,
                     args.jitter, args.noise, args.seed)
    synth(spec, args.out)
    print(f"wrote {args.frames} frames to {os.path.join(args.out, 'input')} and gt.png")


def build_parser():
    ap = argparse.ArgumentParser(prog="cpbinit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a CPB model and save it")
    p.add_argument("--input", required=True)
    p.add_argument("--pattern", default="*")
    p.add_argument("--out", required=True, help="model file (.npz)")
    _add_params(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="write foreground maps and motion masks")
    p.add_argument("--input", required=True)
    p.add_argument("--pattern", default="*")
    p.add_argument("--model", help="trained model; trains from --input when absent")
    p.add_argument("--out", required=True, help="output directory")
    _add_params(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("initialize", help="run the full pipeline and write the background")
    p.add_argument("--input", required=True)
    p.add_argument("--pattern", default="*")
    p.add_argument("--out", required=True, help="background image (.png/.ppm/.pgm)")
    p.add_argument("--emit-intermediates", metavar="DIR",
                   help="also write per-frame maps, masks, labelings and backgrounds to DIR")
    _add_params(p)
    p.set_defaults(func=cmd_initialize)

    p = sub.add_parser("evaluate", help="compare a background against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--bi", required=True)
    p.add_argument("--out", help="report file (.json or .csv)")
    p.add_argument("--sequence", default="")
    p.add_argument("--method", default="cpb-superpixel")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic sequence with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--frames", type=int, default=120)
    p.add_argument("--background", default="textured-noise")
    p.add_argument("--object", help="object size WxH")
    p.add_argument("--offset", type=int, default=120)
    p.add_argument("--start", default="0,0", help="object top-left X,Y")
    p.add_argument("--velocity", default="2,0", help="px per frame VX,VY")
    p.add_argument("--active", help="active frames A:B (half-open)")
    p.add_argument("--gain", type=float, default=0.0)
    p.add_argument("--jitter", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CpbError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
