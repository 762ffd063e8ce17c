"""Binary PGM (P5) / PPM (P6) image I/O with exact 8-bit round-trips."""

from __future__ import annotations

import numpy as np

from .errors import CorruptStreamError, InvalidInputError
from .validation import check_image

MAXVAL = 255


def to_uint8(image) -> np.ndarray:
    img = check_image(image)
    return np.round(img * MAXVAL).astype(np.uint8)


def from_uint8(samples) -> np.ndarray:
    arr = np.asarray(samples)
    if arr.dtype != np.uint8:
        raise InvalidInputError(f"expected uint8 samples, got {arr.dtype}")
    return arr.astype(np.float64) / MAXVAL


def image_to_bytes(image) -> bytes:
    """Serialize to binary P5 (grayscale) or P6 (3-channel) bytes."""
    img = check_image(image)
    samples = to_uint8(img)
    if samples.ndim == 3 and samples.shape[2] == 1:
        samples = samples[:, :, 0]
    height, width = samples.shape[:2]
    if samples.ndim == 2:
        header = f"P5\n{width} {height}\n{MAXVAL}\n"
    else:
        header = f"P6\n{width} {height}\n{MAXVAL}\n"
    return header.encode("ascii") + samples.tobytes()


def image_from_bytes(data: bytes) -> np.ndarray:
    """Parse binary P5/P6 bytes to a float image in [0, 1]."""
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise CorruptStreamError(f"not a binary P5/P6 image (magic {magic!r})")
    width, pos = _read_int(data, pos)
    height, pos = _read_int(data, pos)
    maxval, pos = _read_int(data, pos)
    if maxval != MAXVAL:
        raise CorruptStreamError(f"unsupported maxval {maxval}, expected {MAXVAL}")
    channels = 1 if magic == b"P5" else 3
    n = height * width * channels
    raw = data[pos:pos + n]
    if len(raw) != n or len(data) > pos + n:
        raise CorruptStreamError(
            f"pixel data length {len(data) - pos} != expected {n}"
        )
    samples = np.frombuffer(raw, dtype=np.uint8)
    if channels == 1:
        samples = samples.reshape(height, width)
    else:
        samples = samples.reshape(height, width, 3)
    return from_uint8(samples)


def write_image(path, image) -> None:
    with open(path, "wb") as fh:
        fh.write(image_to_bytes(image))


def read_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return image_from_bytes(fh.read())


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # whitespace and '#' comments per the netpbm header grammar
    n = len(data)
    while pos < n:
        byte = data[pos]
        if byte in b" \t\r\n":
            pos += 1
        elif byte in b"#":
            while pos < n and data[pos] not in b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in b" \t\r\n":
        pos += 1
    if start == pos:
        raise CorruptStreamError("truncated image header")
    return data[start:pos], pos + 1  # consume the single separator byte


def _read_int(data: bytes, pos: int) -> tuple[int, int]:
    token, pos = _read_token(data, pos)
    try:
        return int(token), pos
    except ValueError:
        raise CorruptStreamError(f"bad integer {token!r} in image header") from None
