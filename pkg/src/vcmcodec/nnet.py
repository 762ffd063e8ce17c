"""Minimal convolution engine and the weight-bundle file format.

The learned synthesis backends run a small encoder-decoder network built
from exactly four primitives: 3x3 convolution (stride 1, zero padding 1),
max(0, x), 2x average downsampling, and 2x nearest-neighbor upsampling with
channel-concatenation skip connections. Everything is plain float64 numpy,
so a forward pass is pure and bit-reproducible.

Weight bundle file layout (little-endian):

    magic b"VCMW", version u8, tensor count u16, then per tensor:
    name length u8, UTF-8 name, rank u8, dims u16 each,
    float32 values in row-major order; trailing CRC-32 of all prior bytes.
"""

from __future__ import annotations

import struct
import zlib
from typing import Iterator, Mapping

import numpy as np

from .errors import InvalidInputError, InvalidWeightsError

WEIGHT_MAGIC = b"VCMW"
WEIGHT_VERSION = 1

# Layer names of the fixed depth-2 architecture, in forward order.
UNET_LAYERS = ("enc1", "enc2", "bottleneck", "dec2", "dec1", "out")
UNET_DEPTH = 2


class WeightBundle(Mapping):
    """Immutable named collection of float32 parameter tensors."""

    def __init__(self, tensors: Mapping[str, np.ndarray]):
        converted = {}
        for name, values in tensors.items():
            arr = np.asarray(values, dtype=np.float32).copy()
            if not np.all(np.isfinite(arr)):
                raise InvalidWeightsError(f"tensor {name!r} contains NaN or Inf")
            arr.setflags(write=False)
            converted[str(name)] = arr
        self._tensors = converted

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def subset(self, prefix: str) -> "WeightBundle":
        """Tensors under ``prefix.`` with the prefix stripped."""
        head = prefix + "."
        return WeightBundle(
            {name[len(head):]: arr for name, arr in self._tensors.items()
             if name.startswith(head)}
        )

    def has_prefix(self, prefix: str) -> bool:
        head = prefix + "."
        return any(name.startswith(head) for name in self._tensors)

    def to_bytes(self) -> bytes:
        out = bytearray()
        out += WEIGHT_MAGIC
        out += struct.pack("<BH", WEIGHT_VERSION, len(self._tensors))
        for name in sorted(self._tensors):
            arr = self._tensors[name]
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFF:
                raise InvalidWeightsError(f"tensor name too long: {name!r}")
            if arr.ndim > 0xFF or any(d > 0xFFFF for d in arr.shape):
                raise InvalidWeightsError(f"tensor {name!r} shape {arr.shape} not representable")
            out += struct.pack("<B", len(encoded))
            out += encoded
            out += struct.pack("<B", arr.ndim)
            out += struct.pack(f"<{arr.ndim}H", *arr.shape)
            out += arr.astype("<f4").tobytes()
        out += struct.pack("<I", zlib.crc32(bytes(out)))
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WeightBundle":
        if len(data) < 11:
            raise InvalidWeightsError("weight bundle too short")
        body, (stored_crc,) = data[:-4], struct.unpack("<I", data[-4:])
        if zlib.crc32(body) != stored_crc:
            raise InvalidWeightsError("weight bundle checksum mismatch")
        if body[:4] != WEIGHT_MAGIC:
            raise InvalidWeightsError(f"bad weight magic {body[:4]!r}")
        version, count = struct.unpack_from("<BH", body, 4)
        if version != WEIGHT_VERSION:
            raise InvalidWeightsError(f"unsupported weight version {version}")
        pos = 7
        tensors = {}
        for _ in range(count):
            try:
                (name_len,) = struct.unpack_from("<B", body, pos)
                pos += 1
                name = body[pos:pos + name_len].decode("utf-8")
                pos += name_len
                (rank,) = struct.unpack_from("<B", body, pos)
                pos += 1
                dims = struct.unpack_from(f"<{rank}H", body, pos)
                pos += 2 * rank
                n_values = int(np.prod(dims, dtype=np.int64)) if rank else 1
                raw = body[pos:pos + 4 * n_values]
                if len(raw) != 4 * n_values:
                    raise struct.error("tensor data truncated")
                pos += 4 * n_values
            except (struct.error, UnicodeDecodeError) as exc:
                raise InvalidWeightsError(f"malformed weight bundle: {exc}") from exc
            tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims)
        if pos != len(body):
            raise InvalidWeightsError(f"{len(body) - pos} trailing bytes in weight bundle")
        return cls(tensors)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "WeightBundle":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def conv3x3(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """3x3 convolution, stride 1, zero padding 1. x is (H, W, Cin),
    weight (Cout, Cin, 3, 3), bias (Cout,)."""
    height, width, c_in = x.shape
    if weight.ndim != 4 or weight.shape[1:] != (c_in, 3, 3):
        raise InvalidWeightsError(
            f"conv weight shape {weight.shape} incompatible with input channels {c_in}"
        )
    c_out = weight.shape[0]
    if bias.shape != (c_out,):
        raise InvalidWeightsError(f"bias shape {bias.shape} != ({c_out},)")
    w64 = weight.astype(np.float64)
    padded = np.zeros((height + 2, width + 2, c_in))
    padded[1:-1, 1:-1] = x
    out = np.broadcast_to(bias.astype(np.float64), (height, width, c_out)).copy()
    for dy in range(3):
        for dx in range(3):
            out += padded[dy:dy + height, dx:dx + width] @ w64[:, :, dy, dx].T
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def avgpool2(x: np.ndarray) -> np.ndarray:
    height, width, channels = x.shape
    return x.reshape(height // 2, 2, width // 2, 2, channels).mean(axis=(1, 3))


def upsample2(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


# ---------------------------------------------------------------------------
# forward pass
# ---------------------------------------------------------------------------

def _layer(weights: WeightBundle, name: str) -> tuple[np.ndarray, np.ndarray]:
    try:
        return weights[f"{name}.weight"], weights[f"{name}.bias"]
    except KeyError:
        raise InvalidWeightsError(f"weight bundle is missing layer {name!r}") from None


def unet_forward(weights: WeightBundle, x) -> np.ndarray:
    """Deterministic forward pass of the depth-2 encoder-decoder.

    ``x`` is (H, W, C) with H and W divisible by 4; the output keeps the
    input spatial dims, with channel count set by the ``out`` layer. The
    final convolution is linear (no nonlinearity).
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise InvalidInputError(f"input must be (H, W, C), got shape {arr.shape}")
    scale = 2 ** UNET_DEPTH
    if arr.shape[0] % scale or arr.shape[1] % scale:
        raise InvalidInputError(
            f"spatial dims {arr.shape[:2]} must be divisible by {scale}"
        )
    e1 = relu(conv3x3(arr, *_layer(weights, "enc1")))
    e2 = relu(conv3x3(avgpool2(e1), *_layer(weights, "enc2")))
    mid = relu(conv3x3(avgpool2(e2), *_layer(weights, "bottleneck")))
    d2 = relu(conv3x3(np.concatenate([upsample2(mid), e2], axis=2), *_layer(weights, "dec2")))
    d1 = relu(conv3x3(np.concatenate([upsample2(d2), e1], axis=2), *_layer(weights, "dec1")))
    return conv3x3(d1, *_layer(weights, "out"))


def random_unet_weights(
    in_channels: int,
    out_channels: int,
    base_channels: int = 8,
    seed: int = 0,
) -> WeightBundle:
    """He-initialized random weights for the fixed architecture (test fixture
    and demo backend; nothing here is trained)."""
    rng = np.random.default_rng(seed)
    c1, c2, c3 = base_channels, 2 * base_channels, 4 * base_channels
    plan = {
        "enc1": (in_channels, c1),
        "enc2": (c1, c2),
        "bottleneck": (c2, c3),
        "dec2": (c3 + c2, c2),
        "dec1": (c2 + c1, c1),
        "out": (c1, out_channels),
    }
    tensors = {}
    for name in UNET_LAYERS:
        fan_in, fan_out = plan[name]
        std = np.sqrt(2.0 / (fan_in * 9))
        tensors[f"{name}.weight"] = rng.normal(0.0, std, size=(fan_out, fan_in, 3, 3))
        tensors[f"{name}.bias"] = rng.normal(0.0, 0.01, size=(fan_out,))
    return WeightBundle(tensors)


def random_synthesis_weights(
    image_channels: int,
    n_points: int,
    base_channels: int = 8,
    seed: int = 0,
    with_refinement: bool = True,
) -> WeightBundle:
    """Bundle holding a flow estimator (``flow.*``) and optionally a
    refinement decoder (``refine.*``) for the learned synthesis backend."""
    side_channels = image_channels + n_points
    flow = random_unet_weights(side_channels, 2, base_channels, seed)
    tensors = {f"flow.{name}": arr for name, arr in flow.items()}
    if with_refinement:
        refine = random_unet_weights(side_channels, image_channels, base_channels, seed + 1)
        tensors.update({f"refine.{name}": arr for name, arr in refine.items()})
    return WeightBundle(tensors)
