"""Command-line interface: synth, encode, decode, decode-features, eval."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .container import CODEC_ENV_VAR, LOSSLESS_SPEC
from .errors import CodecError, InvalidInputError
from .featstream import (
    BACKEND_RAW,
    decode_feature_stream,
    encode_feature_stream,
)
from .imageio import read_image, write_image
from .motion import SynthesisConfig
from .nnet import WeightBundle
from .pipeline import (
    EncodeSettings,
    decode_clip,
    decode_feature_layer,
    decode_features,
    encode_clip,
    evaluate,
)
from .synthetic import generate_clip

SIDECAR_NAME = "keypoints.vcmf"


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.handler(args)
    except CodecError as exc:
        print(f"error code={exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error code=IO_ERROR: {exc}", file=sys.stderr)
        return 1
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vcmcodec",
        description=(
            "Two-layer clip codec: a keypoint feature layer decodable on its "
            "own, plus a key-frame layer for full video reconstruction."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic clip with keypoint ground truth")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--shape", choices=("disk", "rect"), default="disk")
    synth.add_argument("--dims", default="64x64", help="HxW, e.g. 64x64")
    synth.add_argument("--frames", type=int, default=32)
    synth.add_argument("--start", default="16,16", help="x,y center in frame 0")
    synth.add_argument("--velocity", default="1,0", help="vx,vy pixels per frame")
    synth.add_argument("--size", type=float, default=8.0, help="radius / half-extent")
    synth.add_argument("--fps", type=float, default=30.0)
    synth.add_argument("--points", type=int, default=16, help="keypoints per frame (L)")
    synth.add_argument("--noise", type=float, default=0.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(handler=_cmd_synth)

    encode = sub.add_parser("encode", help="encode a frame directory into a layered container")
    encode.add_argument("frames", help="directory of .pgm/.ppm frames")
    encode.add_argument("--keypoints", default=None,
                        help=f"keypoint sidecar (default: <frames>/{SIDECAR_NAME})")
    encode.add_argument("--out", required=True)
    encode.add_argument("--fps", type=float, default=None, help="override sidecar fps")
    encode.add_argument("--pos-step", type=float, default=2.0)
    encode.add_argument("--cov-step", type=float, default=64.0)
    encode.add_argument("--keyframe-codec", default=LOSSLESS_SPEC,
                        help="'lossless' or 'ENCODE_CMD :: DECODE_CMD' with {input}/{output}")
    encode.add_argument("--clip-id", type=int, default=0)
    encode.set_defaults(handler=_cmd_encode)

    decode = sub.add_parser("decode", help="reconstruct all frames from a container")
    decode.add_argument("container")
    decode.add_argument("--out", required=True, help="output directory")
    decode.add_argument("--backend", default="analytic",
                        help="analytic | learned | path to a weight bundle")
    decode.add_argument("--weights", default=None, help="weight bundle for the learned backend")
    decode.add_argument("--sigma-interp", type=float, default=None)
    decode.set_defaults(handler=_cmd_decode)

    feats = sub.add_parser("decode-features",
                           help="decode keypoint trajectories without any video data")
    feats.add_argument("container")
    feats.add_argument("--out", default=None, help="output JSON (default: stdout)")
    feats.set_defaults(handler=_cmd_decode_features)

    ev = sub.add_parser("eval", help="decode and score a container against ground truth")
    ev.add_argument("container")
    ev.add_argument("--truth", required=True, help="directory of ground-truth frames")
    ev.add_argument("--backend", default="analytic")
    ev.add_argument("--weights", default=None)
    ev.add_argument("--sigma-interp", type=float, default=None)
    ev.add_argument("--fps", type=float, default=None)
    ev.add_argument("--out", default=None, help="report JSON path (default: stdout)")
    ev.set_defaults(handler=_cmd_eval)
    return parser


def _parse_pair(text: str, caster, what: str):
    for sep in (",", "x"):
        if sep in text:
            a, b = text.split(sep, 1)
            try:
                return caster(a), caster(b)
            except ValueError:
                break
    raise InvalidInputError(f"cannot parse {what} from {text!r}")


def _frame_paths(directory: str) -> list[Path]:
    root = Path(directory)
    if not root.is_dir():
        raise InvalidInputError(f"frame directory not found: {directory}")
    paths = sorted(p for p in root.iterdir() if p.suffix in (".pgm", ".ppm"))
    if not paths:
        raise InvalidInputError(f"no .pgm/.ppm frames in {directory}")
    return paths


def _synthesis_config(args) -> SynthesisConfig:
    backend = args.backend
    weights = None
    if backend not in ("analytic", "learned"):
        weights = WeightBundle.load(backend)
        backend = "learned"
    elif backend == "learned":
        if not args.weights:
            raise InvalidInputError(
                "learned backend needs --weights or a bundle path as --backend"
            )
        weights = WeightBundle.load(args.weights)
    return SynthesisConfig(
        variant=backend, sigma_interp=args.sigma_interp, weights=weights
    )


def _write_frames(directory: str, frames: np.ndarray) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    suffix = ".pgm" if frames.ndim == 3 or frames.shape[-1] == 1 else ".ppm"
    for i, frame in enumerate(frames):
        write_image(out / f"frame_{i:05d}{suffix}", frame)


def _cmd_synth(args) -> None:
    height, width = _parse_pair(args.dims, int, "dims")
    start = _parse_pair(args.start, float, "start")
    velocity = _parse_pair(args.velocity, float, "velocity")
    frames, stream = generate_clip(
        kind=args.shape,
        dims=(height, width),
        n_frames=args.frames,
        start=start,
        velocity=velocity,
        size=args.size,
        fps=args.fps,
        n_points=args.points,
        noise_sigma=args.noise,
        seed=args.seed,
    )
    _write_frames(args.out, frames)
    # Sidecar uses the feature-layer format with the raw (uncompressed) backend.
    sidecar = encode_feature_stream(stream, backend=BACKEND_RAW)
    (Path(args.out) / SIDECAR_NAME).write_bytes(sidecar)
    print(f"wrote {len(frames)} frames and {SIDECAR_NAME} to {args.out}")


def _cmd_encode(args) -> None:
    paths = [p for p in _frame_paths(args.frames)]
    frames = np.stack([read_image(p) for p in paths])
    sidecar_path = args.keypoints or str(Path(args.frames) / SIDECAR_NAME)
    try:
        sidecar = Path(sidecar_path).read_bytes()
    except FileNotFoundError:
        raise InvalidInputError(f"keypoint sidecar not found: {sidecar_path}") from None
    stream = decode_feature_stream(sidecar)
    if args.fps is not None:
        stream = dataclasses.replace(stream, fps=args.fps)
    codec = os.environ.get(CODEC_ENV_VAR, args.keyframe_codec)
    settings = EncodeSettings(
        pos_step=args.pos_step,
        cov_step=args.cov_step,
        keyframe_codec=codec,
        clip_id=args.clip_id,
    )
    data = encode_clip(frames, stream, settings)
    Path(args.out).write_bytes(data)
    print(f"wrote {len(data)} bytes to {args.out}")


def _cmd_decode(args) -> None:
    data = Path(args.container).read_bytes()
    codec_override = os.environ.get(CODEC_ENV_VAR)
    frames = decode_clip(data, _synthesis_config(args), codec_override)
    _write_frames(args.out, frames)
    print(f"wrote {len(frames)} frames to {args.out}")


def _cmd_decode_features(args) -> None:
    data = Path(args.container).read_bytes()
    positions = decode_features(data)
    stream = decode_feature_layer(data)
    doc = {
        "n_frames": int(positions.shape[0]),
        "n_points": int(positions.shape[1]),
        "height": stream.height,
        "width": stream.width,
        "fps": stream.fps,
        "positions": positions.tolist(),
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote trajectories to {args.out}")
    else:
        print(text)


def _cmd_eval(args) -> None:
    data = Path(args.container).read_bytes()
    codec_override = os.environ.get(CODEC_ENV_VAR)
    recon = decode_clip(data, _synthesis_config(args), codec_override)
    truth = np.stack([read_image(p) for p in _frame_paths(args.truth)])
    report = evaluate(recon, truth, data, fps=args.fps)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text)
        print(f"mean_ssim={report.mean_ssim:.4f} total_kbps={report.total_kbps:.3f} "
              f"report={args.out}")
    else:
        print(text)


if __name__ == "__main__":
    sys.exit(main())
