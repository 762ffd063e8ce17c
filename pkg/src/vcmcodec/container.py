"""Layered container with an independently decodable feature layer.

Container layout (little-endian):

    magic b"VCMC", version u8, clip id u64, layer count u8, then per layer:
    layer type u8 (0 = feature, 1 = key frame), payload length u64, payload.

Layers are parsed sequentially; a file truncated after the feature layer
still yields that layer, which is what makes the feature stream decodable
without any video bytes.

Key-frame layer payload:

    codec id u8 (0 = built-in lossless image, 1 = external command),
    key-frame index u32, parameter string (u16 length + UTF-8, records the
    external command template), then the coded image bytes.
"""

from __future__ import annotations

import dataclasses
import os
import shlex
import struct
import subprocess
import tempfile

import numpy as np

from .errors import CorruptStreamError, DecodeError, EncodeError, InvalidInputError
from .imageio import image_from_bytes, image_to_bytes

CONTAINER_MAGIC = b"VCMC"
CONTAINER_VERSION = 1

LAYER_FEATURE = 0
LAYER_KEYFRAME = 1

KEYFRAME_CODEC_LOSSLESS = 0
KEYFRAME_CODEC_EXTERNAL = 1

LOSSLESS_SPEC = "lossless"
CODEC_ENV_VAR = "VCM_KEYFRAME_CODEC"
_TEMPLATE_SEPARATOR = "::"

_CONTAINER_HEADER = struct.Struct("<4sBQB")
_LAYER_HEADER = struct.Struct("<BQ")
_KEYFRAME_HEADER = struct.Struct("<BIH")


@dataclasses.dataclass(frozen=True)
class Container:
    clip_id: int
    layers: tuple[tuple[int, bytes], ...]
    truncated: bool

    def layer(self, layer_type: int) -> bytes | None:
        for kind, payload in self.layers:
            if kind == layer_type:
                return payload
        return None


def write_container(layers, clip_id: int = 0) -> bytes:
    if not layers:
        raise InvalidInputError("container needs at least one layer")
    if len(layers) > 0xFF:
        raise InvalidInputError(f"too many layers: {len(layers)}")
    out = bytearray()
    out += _CONTAINER_HEADER.pack(CONTAINER_MAGIC, CONTAINER_VERSION, clip_id, len(layers))
    for layer_type, payload in layers:
        out += _LAYER_HEADER.pack(layer_type, len(payload))
        out += payload
    return bytes(out)


def read_container(data: bytes) -> Container:
    """Parse a container, keeping every complete layer.

    Truncation after a complete layer is tolerated (``truncated`` is set);
    a malformed header or trailing garbage raises CorruptStreamError.
    """
    if len(data) < _CONTAINER_HEADER.size:
        raise CorruptStreamError(f"container too short: {len(data)} bytes")
    magic, version, clip_id, layer_count = _CONTAINER_HEADER.unpack_from(data)
    if magic != CONTAINER_MAGIC:
        raise CorruptStreamError(f"bad container magic {magic!r}")
    if version != CONTAINER_VERSION:
        raise CorruptStreamError(f"unsupported container version {version}")
    layers = []
    pos = _CONTAINER_HEADER.size
    truncated = False
    for _ in range(layer_count):
        if pos == len(data) or pos + _LAYER_HEADER.size > len(data):
            truncated = True
            break
        layer_type, length = _LAYER_HEADER.unpack_from(data, pos)
        pos += _LAYER_HEADER.size
        if pos + length > len(data):
            truncated = True
            break
        layers.append((layer_type, data[pos:pos + length]))
        pos += length
    if not truncated and pos != len(data):
        raise CorruptStreamError(f"{len(data) - pos} trailing bytes after last layer")
    return Container(clip_id=clip_id, layers=tuple(layers), truncated=truncated)


# ---------------------------------------------------------------------------
# key-frame codec backends
# ---------------------------------------------------------------------------

def split_codec_templates(spec: str) -> tuple[str, str | None]:
    """Split an external codec spec into (encode, decode) command templates."""
    if _TEMPLATE_SEPARATOR in spec:
        enc, dec = spec.split(_TEMPLATE_SEPARATOR, 1)
        return enc.strip(), dec.strip() or None
    return spec.strip(), None


def _run_template(template: str, input_path: str, output_path: str, action: str) -> None:
    command = template.replace("{input}", input_path).replace("{output}", output_path)
    argv = shlex.split(command)
    if not argv:
        raise InvalidInputError(f"empty codec command template {template!r}")
    result = subprocess.run(argv, capture_output=True, text=True)
    if result.returncode != 0:
        err = EncodeError if action == "encode" else DecodeError
        raise err(
            f"key-frame codec {action} command failed "
            f"(exit {result.returncode}): {result.stderr.strip()}"
        )


def _run_external(template: str, payload: bytes, action: str) -> bytes:
    with tempfile.TemporaryDirectory(prefix="vcmcodec-") as workdir:
        input_path = os.path.join(workdir, "input.bin")
        output_path = os.path.join(workdir, "output.bin")
        with open(input_path, "wb") as fh:
            fh.write(payload)
        _run_template(template, input_path, output_path, action)
        try:
            with open(output_path, "rb") as fh:
                return fh.read()
        except FileNotFoundError:
            err = EncodeError if action == "encode" else DecodeError
            raise err(
                f"key-frame codec {action} command produced no output file"
            ) from None


def encode_keyframe_layer(frame: np.ndarray, index: int = 0, codec_spec: str = LOSSLESS_SPEC) -> bytes:
    """Code one key frame into a layer payload.

    ``codec_spec`` is either "lossless" (built-in 8-bit image payload) or an
    external command template "ENCODE_CMD :: DECODE_CMD" with ``{input}`` and
    ``{output}`` placeholders; the template is recorded in the layer header
    for provenance and later decode.
    """
    image_bytes = image_to_bytes(frame)
    if codec_spec == LOSSLESS_SPEC:
        codec_id, params, payload = KEYFRAME_CODEC_LOSSLESS, "", image_bytes
    else:
        encode_template, _ = split_codec_templates(codec_spec)
        payload = _run_external(encode_template, image_bytes, "encode")
        codec_id, params = KEYFRAME_CODEC_EXTERNAL, codec_spec
    raw_params = params.encode("utf-8")
    if len(raw_params) > 0xFFFF:
        raise InvalidInputError("codec parameter string too long")
    header = _KEYFRAME_HEADER.pack(codec_id, index, len(raw_params))
    return header + raw_params + payload


def decode_keyframe_layer(
    layer: bytes, codec_override: str | None = None
) -> tuple[np.ndarray, int, str]:
    """Decode a key-frame layer payload to (image, key-frame index, params).

    For external payloads the decode command comes from ``codec_override``
    when given, otherwise from the recorded template.
    """
    if len(layer) < _KEYFRAME_HEADER.size:
        raise CorruptStreamError(f"key-frame layer too short: {len(layer)} bytes")
    codec_id, index, params_len = _KEYFRAME_HEADER.unpack_from(layer)
    pos = _KEYFRAME_HEADER.size
    if pos + params_len > len(layer):
        raise CorruptStreamError("key-frame layer parameter string truncated")
    params = layer[pos:pos + params_len].decode("utf-8")
    payload = layer[pos + params_len:]
    if codec_id == KEYFRAME_CODEC_LOSSLESS:
        return image_from_bytes(payload), index, params
    if codec_id != KEYFRAME_CODEC_EXTERNAL:
        raise CorruptStreamError(f"unknown key-frame codec id {codec_id}")
    spec = codec_override if codec_override is not None else params
    _, decode_template = split_codec_templates(spec)
    if decode_template is None:
        raise DecodeError(
            "external key-frame payload has no decode command; pass a "
            f"'ENCODE {_TEMPLATE_SEPARATOR} DECODE' template"
        )
    image_bytes = _run_external(decode_template, payload, "decode")
    return image_from_bytes(image_bytes), index, params
