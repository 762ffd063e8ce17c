"""End-to-end clip encoding, decoding, and evaluation.

Encode: frame 0 of the clip is the key frame, coded by the configured
key-frame codec into layer 1; the keypoint stream is coded into layer 0,
which decodes on its own for machine analysis. Decode: the key frame is
reconstructed, and every other frame is synthesized from it under the
guidance of that frame's decoded keypoints.
"""

from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from .container import (
    LAYER_FEATURE,
    LAYER_KEYFRAME,
    LOSSLESS_SPEC,
    decode_keyframe_layer,
    encode_keyframe_layer,
    read_container,
    write_container,
)
from .errors import CorruptStreamError, DecodeError, InvalidInputError
from .featstream import (
    BACKEND_LZMA,
    FEATURE_HEADER_SIZE,
    FeatureStream,
    bitrate_kbps,
    decode_feature_stream,
    encode_feature_stream,
    trajectories,
)
from .metrics import ssim
from .motion import SynthesisConfig, synthesize_frame
from .quantize import COVARIANCE_STEP, POSITION_STEP
from .validation import check_image


@dataclasses.dataclass(frozen=True)
class EncodeSettings:
    pos_step: float = POSITION_STEP
    cov_step: float = COVARIANCE_STEP
    feature_backend: int = BACKEND_LZMA
    keyframe_codec: str = LOSSLESS_SPEC
    clip_id: int = 0
    # single key frame per clip; longer material must be split upstream
    max_frames: int = 32


@dataclasses.dataclass(frozen=True)
class EvalReport:
    """Quality and rate summary for one decoded clip."""

    per_frame_ssim: tuple[float, ...]
    mean_ssim: float
    feature_kbps: float
    video_kbps: float
    total_kbps: float
    feature_payload_kbps: float
    config: dict

    def to_dict(self) -> dict:
        return {
            "mean_ssim": self.mean_ssim,
            "per_frame_ssim": list(self.per_frame_ssim),
            "feature_kbps": self.feature_kbps,
            "video_kbps": self.video_kbps,
            "total_kbps": self.total_kbps,
            "feature_payload_kbps": self.feature_payload_kbps,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _check_frames(frames) -> np.ndarray:
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim not in (3, 4) or arr.shape[0] < 1:
        raise InvalidInputError(
            f"frames must have shape (N, H, W) or (N, H, W, C), got {arr.shape}"
        )
    for i in range(arr.shape[0]):
        check_image(arr[i], f"frame {i}")
    return arr


def encode_clip(frames, stream: FeatureStream, settings: EncodeSettings = EncodeSettings()) -> bytes:
    """Assemble the layered bitstream for a clip.

    ``frames`` must match the keypoint stream in frame count and dims. With
    the built-in lossless key-frame codec the output is deterministic.
    """
    arr = _check_frames(frames)
    if arr.shape[0] != stream.n_frames:
        raise InvalidInputError(
            f"{arr.shape[0]} frames but keypoint stream has {stream.n_frames}"
        )
    if arr.shape[0] > settings.max_frames:
        raise InvalidInputError(
            f"clip of {arr.shape[0]} frames exceeds max_frames={settings.max_frames}; "
            "split the clip or raise the limit"
        )
    if arr.shape[1] != stream.height or arr.shape[2] != stream.width:
        raise InvalidInputError(
            f"frame dims {arr.shape[1:3]} do not match stream dims "
            f"{(stream.height, stream.width)}"
        )
    feature_layer = encode_feature_stream(
        stream, settings.pos_step, settings.cov_step, settings.feature_backend
    )
    keyframe_layer = encode_keyframe_layer(arr[0], 0, settings.keyframe_codec)
    return write_container(
        [(LAYER_FEATURE, feature_layer), (LAYER_KEYFRAME, keyframe_layer)],
        clip_id=settings.clip_id,
    )


def decode_features(data: bytes) -> np.ndarray:
    """Positions-only trajectories (N, L, 2) from the feature layer alone.

    Succeeds even when the key-frame layer is absent or truncated away.
    """
    container = read_container(data)
    feature_layer = container.layer(LAYER_FEATURE)
    if feature_layer is None:
        raise CorruptStreamError("container has no complete feature layer")
    return trajectories(decode_feature_stream(feature_layer))


def decode_feature_layer(data: bytes) -> FeatureStream:
    """Full dequantized keypoint stream from the feature layer alone."""
    container = read_container(data)
    feature_layer = container.layer(LAYER_FEATURE)
    if feature_layer is None:
        raise CorruptStreamError("container has no complete feature layer")
    return decode_feature_stream(feature_layer)


def decode_clip(
    data: bytes,
    synthesis: SynthesisConfig = SynthesisConfig(),
    codec_override: str | None = None,
) -> np.ndarray:
    """Reconstruct all N frames of a clip from its layered bitstream."""
    container = read_container(data)
    feature_layer = container.layer(LAYER_FEATURE)
    if feature_layer is None:
        raise CorruptStreamError("container has no complete feature layer")
    keyframe_layer = container.layer(LAYER_KEYFRAME)
    if keyframe_layer is None:
        raise DecodeError("key-frame layer is absent; cannot reconstruct video")
    stream = decode_feature_stream(feature_layer)
    key_frame, key_index, _params = decode_keyframe_layer(keyframe_layer, codec_override)
    if key_frame.shape[:2] != (stream.height, stream.width):
        raise DecodeError(
            f"key frame dims {key_frame.shape[:2]} do not match feature dims "
            f"{(stream.height, stream.width)}"
        )
    if not 0 <= key_index < stream.n_frames:
        raise DecodeError(f"key-frame index {key_index} outside clip of {stream.n_frames}")
    key_pos, key_cov = stream.frame(key_index)
    out = np.empty((stream.n_frames,) + key_frame.shape)
    for t in range(stream.n_frames):
        if t == key_index:
            out[t] = key_frame
        else:
            tgt_pos, tgt_cov = stream.frame(t)
            out[t] = synthesize_frame(
                key_frame, key_pos, key_cov, tgt_pos, tgt_cov, synthesis
            )
    return out


def evaluate(recon, truth, data: bytes, fps: float | None = None) -> EvalReport:
    """Per-frame SSIM against ground truth plus per-layer bitrates."""
    recon_arr = _check_frames(recon)
    truth_arr = _check_frames(truth)
    if recon_arr.shape != truth_arr.shape:
        raise InvalidInputError(
            f"reconstruction shape {recon_arr.shape} != truth shape {truth_arr.shape}"
        )
    container = read_container(data)
    feature_layer = container.layer(LAYER_FEATURE)
    if feature_layer is None:
        raise CorruptStreamError("container has no complete feature layer")
    stream = decode_feature_stream(feature_layer)
    if fps is None:
        fps = stream.fps
    n = stream.n_frames
    if recon_arr.shape[0] != n:
        raise InvalidInputError(
            f"{recon_arr.shape[0]} frames to evaluate but stream has {n}"
        )

    per_frame = tuple(float(ssim(recon_arr[i], truth_arr[i])) for i in range(n))
    mean = float(np.mean(per_frame))
    feature_kbps = bitrate_kbps(len(feature_layer), n, fps)
    payload_kbps = bitrate_kbps(len(feature_layer) - FEATURE_HEADER_SIZE, n, fps)
    keyframe_layer = container.layer(LAYER_KEYFRAME)
    video_kbps = bitrate_kbps(len(keyframe_layer), n, fps) if keyframe_layer else 0.0
    codec_params = _keyframe_params(keyframe_layer) if keyframe_layer else ""
    return EvalReport(
        per_frame_ssim=per_frame,
        mean_ssim=mean,
        feature_kbps=feature_kbps,
        video_kbps=video_kbps,
        total_kbps=feature_kbps + video_kbps,
        feature_payload_kbps=payload_kbps,
        config={
            "fps": fps,
            "n_frames": n,
            "n_points": stream.n_points,
            "height": stream.height,
            "width": stream.width,
            "keyframe_codec": codec_params or LOSSLESS_SPEC,
        },
    )


def _keyframe_params(layer: bytes) -> str:
    _codec_id, _index, params_len = struct.unpack_from("<BIH", layer)
    return layer[7:7 + params_len].decode("utf-8")
