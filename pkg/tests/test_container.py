import struct
import sys

import numpy as np
import pytest

from vcmcodec.container import (
    LAYER_FEATURE,
    LAYER_KEYFRAME,
    decode_keyframe_layer,
    encode_keyframe_layer,
    read_container,
    split_codec_templates,
    write_container,
)
from vcmcodec.errors import CorruptStreamError, DecodeError, EncodeError, InvalidInputError
from vcmcodec.imageio import from_uint8, to_uint8

COPY_CODEC = f"{sys.executable} -c \"import shutil,sys; shutil.copy(sys.argv[1], sys.argv[2])\" {{input}} {{output}}"


def media(img):
    return from_uint8(to_uint8(img))


def test_container_layout_is_bit_exact():
    data = write_container([(LAYER_FEATURE, b"abc"), (LAYER_KEYFRAME, b"defgh")], clip_id=7)
    magic, version, clip_id, count = struct.unpack_from("<4sBQB", data)
    assert (magic, version, clip_id, count) == (b"VCMC", 1, 7, 2)
    t0, len0 = struct.unpack_from("<BQ", data, 14)
    assert (t0, len0) == (LAYER_FEATURE, 3)
    assert data[23:26] == b"abc"
    t1, len1 = struct.unpack_from("<BQ", data, 26)
    assert (t1, len1) == (LAYER_KEYFRAME, 5)
    assert data[35:] == b"defgh"


def test_container_roundtrip():
    data = write_container([(LAYER_FEATURE, b"xy"), (LAYER_KEYFRAME, b"z" * 100)], clip_id=3)
    parsed = read_container(data)
    assert parsed.clip_id == 3
    assert not parsed.truncated
    assert parsed.layer(LAYER_FEATURE) == b"xy"
    assert parsed.layer(LAYER_KEYFRAME) == b"z" * 100


def test_truncation_after_first_layer_keeps_it():
    data = write_container([(LAYER_FEATURE, b"feature!"), (LAYER_KEYFRAME, b"video")], clip_id=1)
    end_of_layer0 = 14 + 9 + 8
    for cut in (end_of_layer0, end_of_layer0 + 4, len(data) - 1):
        parsed = read_container(data[:cut])
        assert parsed.truncated
        assert parsed.layer(LAYER_FEATURE) == b"feature!"
        assert parsed.layer(LAYER_KEYFRAME) is None


def test_bad_magic_and_version_rejected():
    data = bytearray(write_container([(LAYER_FEATURE, b"a")]))
    bad_magic = bytes(b"XVCM") + bytes(data[4:])
    with pytest.raises(CorruptStreamError):
        read_container(bad_magic)
    data[4] = 9
    with pytest.raises(CorruptStreamError):
        read_container(bytes(data))


def test_trailing_garbage_rejected():
    data = write_container([(LAYER_FEATURE, b"a")])
    with pytest.raises(CorruptStreamError):
        read_container(data + b"junk")


def test_empty_container_rejected():
    with pytest.raises(InvalidInputError):
        write_container([])


class TestKeyframeLayer:
    def test_lossless_roundtrip_bit_exact(self, rng):
        frame = media(rng.uniform(0.0, 1.0, size=(24, 16)))
        layer = encode_keyframe_layer(frame, index=0)
        decoded, index, params = decode_keyframe_layer(layer)
        assert np.array_equal(decoded, frame)
        assert index == 0 and params == ""

    def test_lossless_roundtrip_color(self, rng):
        frame = media(rng.uniform(0.0, 1.0, size=(8, 8, 3)))
        decoded, _, _ = decode_keyframe_layer(encode_keyframe_layer(frame))
        assert np.array_equal(decoded, frame)

    def test_external_codec_roundtrip_and_provenance(self, rng):
        frame = media(rng.uniform(0.0, 1.0, size=(12, 12)))
        spec = f"{COPY_CODEC} :: {COPY_CODEC}"
        layer = encode_keyframe_layer(frame, index=0, codec_spec=spec)
        decoded, _, params = decode_keyframe_layer(layer)
        assert params == spec  # full template recorded for provenance
        assert np.array_equal(decoded, frame)

    def test_external_codec_decode_override(self, rng):
        frame = media(rng.uniform(0.0, 1.0, size=(12, 12)))
        spec = f"{COPY_CODEC} :: {COPY_CODEC}"
        layer = encode_keyframe_layer(frame, codec_spec=spec)
        decoded, _, _ = decode_keyframe_layer(layer, codec_override=spec)
        assert np.array_equal(decoded, frame)

    def test_external_encode_failure_carries_stderr(self, rng):
        frame = media(rng.uniform(0.0, 1.0, size=(8, 8)))
        failing = (
            f"{sys.executable} -c \"import sys; sys.stderr.write('boom'); sys.exit(3)\""
            " {input} {output}"
        )
        with pytest.raises(EncodeError, match="boom"):
            encode_keyframe_layer(frame, codec_spec=failing)

    def test_external_encode_no_output_detected(self, rng):
        frame = media(rng.uniform(0.0, 1.0, size=(8, 8)))
        noop = f"{sys.executable} -c pass {{input}} {{output}}"
        with pytest.raises(EncodeError, match="no output"):
            encode_keyframe_layer(frame, codec_spec=noop)

    def test_external_without_decode_half_errors(self, rng):
        frame = media(rng.uniform(0.0, 1.0, size=(8, 8)))
        layer = encode_keyframe_layer(frame, codec_spec=COPY_CODEC)
        with pytest.raises(DecodeError, match="no decode command"):
            decode_keyframe_layer(layer)

    def test_truncated_layer_rejected(self, rng):
        frame = media(rng.uniform(0.0, 1.0, size=(8, 8)))
        layer = encode_keyframe_layer(frame)
        with pytest.raises(CorruptStreamError):
            decode_keyframe_layer(layer[:4])


def test_split_codec_templates():
    enc, dec = split_codec_templates("a {input} {output} :: b {input} {output}")
    assert enc.startswith("a ") and dec.startswith("b ")
    enc_only, missing = split_codec_templates("solo {input} {output}")
    assert missing is None and enc_only.startswith("solo")
