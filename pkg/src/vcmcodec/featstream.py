"""Keypoint feature streams and the feature-layer bitstream.

The feature layer is a self-describing binary stream that decodes with no
access to any video data. Layout (all integers little-endian):

    magic  b"VCMF"      4 bytes
    version             u8 (currently 1)
    backend id          u8 (0 = raw, 1 = LZMA)
    fps                 u16, fixed-point x100
    frame count N       u32
    point count L       u16
    height, width       u16 each
    pos_step, cov_step  u16 each, fixed-point x16
    payload length      u64
    payload             zigzag varints in (frame, point, field) order,
                        fields (qx, qy, ic_xx, ic_xy, ic_yx, ic_yy),
                        optionally LZMA-compressed

Encoding is deterministic: equal streams and configuration produce
byte-identical output.
"""

from __future__ import annotations

import dataclasses
import lzma
import struct

import numpy as np

from .errors import CorruptStreamError, InvalidInputError
from .quantize import (
    COVARIANCE_STEP,
    POSITION_STEP,
    dequantize_covariances,
    dequantize_positions,
    quantize_covariances,
    quantize_positions,
)
from .validation import as_finite_array

STREAM_MAGIC = b"VCMF"
STREAM_VERSION = 1
BACKEND_RAW = 0
BACKEND_LZMA = 1

_HEADER = struct.Struct("<4sBBHIHHHHHQ")
FEATURE_HEADER_SIZE = _HEADER.size

_FPS_SCALE = 100.0
_STEP_SCALE = 16.0
DEFAULT_FPS = 30.0


@dataclasses.dataclass(frozen=True)
class FeatureStream:
    """Keypoint descriptors for a clip: N frames of L points each.

    ``positions`` has shape (N, L, 2) in (x, y) pixels; ``covariances`` has
    shape (N, L, 2, 2) in pixels^2. Point identity is the index l, stable
    across frames. Instances are immutable and safe to share across threads.
    """

    positions: np.ndarray
    covariances: np.ndarray
    height: int
    width: int
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        pos = as_finite_array(self.positions, "positions").copy()
        cov = as_finite_array(self.covariances, "covariances").copy()
        if pos.ndim != 3 or pos.shape[-1] != 2:
            raise InvalidInputError(f"positions must have shape (N, L, 2), got {pos.shape}")
        if cov.shape != pos.shape[:2] + (2, 2):
            raise InvalidInputError(
                f"covariances shape {cov.shape} does not match positions {pos.shape}"
            )
        if pos.shape[0] < 1:
            raise InvalidInputError("a stream needs at least one frame")
        if self.height < 1 or self.width < 1:
            raise InvalidInputError(f"bad dims {self.height}x{self.width}")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise InvalidInputError(f"fps must be positive, got {self.fps!r}")
        pos.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "covariances", cov)

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def n_points(self) -> int:
        return self.positions.shape[1]

    def frame(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        return self.positions[index], self.covariances[index]


@dataclasses.dataclass(frozen=True)
class QuantizedStream:
    """Quantized form of a FeatureStream; the exact payload of the bitstream."""

    qpos: np.ndarray   # (N, L, 2) int64
    qicov: np.ndarray  # (N, L, 2, 2) int64
    height: int
    width: int
    fps: float
    pos_step: float
    cov_step: float

    @property
    def n_frames(self) -> int:
        return self.qpos.shape[0]

    @property
    def n_points(self) -> int:
        return self.qpos.shape[1]


def pack_descriptors(positions, covariances) -> np.ndarray:
    """Pack positions and covariances into 6-scalar descriptors
    (x, y, c_xx, c_xy, c_yx, c_yy)."""
    pos = as_finite_array(positions, "positions")
    cov = as_finite_array(covariances, "covariances")
    if pos.shape[-1] != 2 or cov.shape != pos.shape[:-1] + (2, 2):
        raise InvalidInputError(
            f"cannot pack positions {pos.shape} with covariances {cov.shape}"
        )
    return np.concatenate([pos, cov.reshape(cov.shape[:-2] + (4,))], axis=-1)


def unpack_descriptors(packed) -> tuple[np.ndarray, np.ndarray]:
    arr = as_finite_array(packed, "descriptors")
    if arr.shape[-1] != 6:
        raise InvalidInputError(f"descriptors must end in axis of 6, got {arr.shape}")
    pos = arr[..., :2].copy()
    cov = arr[..., 2:].reshape(arr.shape[:-1] + (2, 2)).copy()
    return pos, cov


def quantize_stream(
    stream: FeatureStream,
    pos_step: float = POSITION_STEP,
    cov_step: float = COVARIANCE_STEP,
) -> QuantizedStream:
    return QuantizedStream(
        qpos=quantize_positions(stream.positions, pos_step),
        qicov=quantize_covariances(stream.covariances, cov_step),
        height=stream.height,
        width=stream.width,
        fps=stream.fps,
        pos_step=pos_step,
        cov_step=cov_step,
    )


def dequantize_stream(q: QuantizedStream) -> FeatureStream:
    return FeatureStream(
        positions=dequantize_positions(q.qpos, q.pos_step),
        covariances=dequantize_covariances(q.qicov, q.cov_step),
        height=q.height,
        width=q.width,
        fps=q.fps,
    )


def trajectories(stream: FeatureStream) -> np.ndarray:
    """Positions-only view (N, L, 2) for downstream analysis consumers."""
    return np.array(stream.positions)


# ---------------------------------------------------------------------------
# zigzag varint serialization
# ---------------------------------------------------------------------------

def write_varints(values) -> bytes:
    out = bytearray()
    for v in values:
        u = (int(v) << 1) ^ (int(v) >> 63)
        while True:
            byte = u & 0x7F
            u >>= 7
            if u:
                out.append(byte | 0x80)
            else:
                out.append(byte)
                break
    return bytes(out)


def read_varints(buf: bytes, count: int) -> list[int]:
    """Decode exactly ``count`` zigzag varints; the buffer must end there."""
    values = []
    pos = 0
    n = len(buf)
    for _ in range(count):
        shift = 0
        u = 0
        while True:
            if pos >= n:
                raise CorruptStreamError(f"varint payload truncated at byte {pos}")
            byte = buf[pos]
            pos += 1
            u |= (byte & 0x7F) << shift
            if not byte & 0x80:
                break
            shift += 7
            if shift > 63:
                raise CorruptStreamError(f"overlong varint at byte {pos}")
        if u >> 64:
            raise CorruptStreamError(f"varint around byte {pos} exceeds 64-bit range")
        values.append((u >> 1) ^ -(u & 1))
    if pos != n:
        raise CorruptStreamError(f"{n - pos} trailing bytes after varint payload")
    return values


# ---------------------------------------------------------------------------
# bitstream encode / decode
# ---------------------------------------------------------------------------

def snap_step(step: float) -> float:
    """Snap a quantization step to the nearest header-representable value."""
    ticks = round(float(step) * _STEP_SCALE)
    if not 1 <= ticks <= 0xFFFF:
        raise InvalidInputError(f"step {step!r} outside representable range")
    return ticks / _STEP_SCALE


def snap_fps(fps: float) -> float:
    ticks = round(float(fps) * _FPS_SCALE)
    if not 1 <= ticks <= 0xFFFF:
        raise InvalidInputError(f"fps {fps!r} outside representable range")
    return ticks / _FPS_SCALE


def encode_feature_stream(
    stream: FeatureStream,
    pos_step: float = POSITION_STEP,
    cov_step: float = COVARIANCE_STEP,
    backend: int = BACKEND_LZMA,
) -> bytes:
    """Quantize, serialize, and losslessly compress a feature stream.

    Steps and fps are snapped to their fixed-point header encodings before
    quantization so a decoder recovers exactly the values the encoder used.
    """
    if backend not in (BACKEND_RAW, BACKEND_LZMA):
        raise InvalidInputError(f"unknown backend id {backend!r}")
    if stream.height > 0xFFFF or stream.width > 0xFFFF or stream.n_points > 0xFFFF:
        raise InvalidInputError("dims and point count must fit in 16 bits")
    if stream.n_frames > 0xFFFFFFFF:
        raise InvalidInputError("frame count must fit in 32 bits")
    pos_step = snap_step(pos_step)
    cov_step = snap_step(cov_step)
    fps = snap_fps(stream.fps)
    q = quantize_stream(stream, pos_step, cov_step)
    fields = np.concatenate(
        [q.qpos, q.qicov.reshape(q.n_frames, q.n_points, 4)], axis=2
    )
    raw = write_varints(fields.ravel())
    payload = lzma.compress(raw) if backend == BACKEND_LZMA else raw
    header = _HEADER.pack(
        STREAM_MAGIC,
        STREAM_VERSION,
        backend,
        round(fps * _FPS_SCALE),
        q.n_frames,
        q.n_points,
        stream.height,
        stream.width,
        round(pos_step * _STEP_SCALE),
        round(cov_step * _STEP_SCALE),
        len(payload),
    )
    return header + payload


def decode_feature_stream_quantized(data: bytes) -> QuantizedStream:
    """Parse and validate a feature bitstream down to its quantized integers.

    Any structural defect (bad magic, wrong version, truncation, payload
    mismatch, out-of-band positions) raises CorruptStreamError; there is no
    partial decode.
    """
    if len(data) < _HEADER.size:
        raise CorruptStreamError(
            f"stream too short: {len(data)} bytes, header needs {_HEADER.size}"
        )
    (magic, version, backend, fps_ticks, n_frames, n_points,
     height, width, pos_ticks, cov_ticks, payload_len) = _HEADER.unpack_from(data)
    if magic != STREAM_MAGIC:
        raise CorruptStreamError(f"bad magic {magic!r} at offset 0")
    if version != STREAM_VERSION:
        raise CorruptStreamError(f"unsupported version {version} at offset 4")
    if backend not in (BACKEND_RAW, BACKEND_LZMA):
        raise CorruptStreamError(f"unknown backend id {backend} at offset 5")
    if n_frames < 1 or height < 1 or width < 1 or fps_ticks < 1 or pos_ticks < 1 or cov_ticks < 1:
        raise CorruptStreamError("invalid header field values")
    payload = data[_HEADER.size:]
    if len(payload) != payload_len:
        raise CorruptStreamError(
            f"payload length {len(payload)} != declared {payload_len} at offset {_HEADER.size}"
        )
    if backend == BACKEND_LZMA:
        try:
            raw = lzma.decompress(payload)
        except lzma.LZMAError as exc:
            raise CorruptStreamError(f"lossless backend rejected payload: {exc}") from exc
    else:
        raw = payload
    values = read_varints(raw, n_frames * n_points * 6)
    fields = np.array(values, dtype=np.int64).reshape(n_frames, n_points, 6)
    qpos = fields[:, :, :2].copy()
    qicov = fields[:, :, 2:].reshape(n_frames, n_points, 2, 2).copy()
    pos_step = pos_ticks / _STEP_SCALE
    cov_step = cov_ticks / _STEP_SCALE
    _check_guard_band(qpos[..., 0] * pos_step, width, pos_step)
    _check_guard_band(qpos[..., 1] * pos_step, height, pos_step)
    return QuantizedStream(
        qpos=qpos,
        qicov=qicov,
        height=height,
        width=width,
        fps=fps_ticks / _FPS_SCALE,
        pos_step=pos_step,
        cov_step=cov_step,
    )


def decode_feature_stream(data: bytes) -> FeatureStream:
    """Decode a feature bitstream back to dequantized descriptors."""
    return dequantize_stream(decode_feature_stream_quantized(data))


def _check_guard_band(coords: np.ndarray, dim: int, step: float) -> None:
    if coords.size and (coords.min() < -step or coords.max() > dim + step):
        raise CorruptStreamError("decoded position outside the frame guard band")


def bitrate_kbps(byte_count: int, frame_count: int, fps: float) -> float:
    """Kilobits per second for ``byte_count`` bytes spanning ``frame_count`` frames."""
    if frame_count < 1:
        raise InvalidInputError(f"frame_count must be >= 1, got {frame_count}")
    if not (np.isfinite(fps) and fps > 0):
        raise InvalidInputError(f"fps must be positive, got {fps!r}")
    if byte_count < 0:
        raise InvalidInputError(f"byte_count must be nonnegative, got {byte_count}")
    return byte_count * 8.0 * fps / (frame_count * 1000.0)
