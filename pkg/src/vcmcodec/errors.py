"""Exception hierarchy with stable machine-readable codes for the CLI."""


class CodecError(Exception):
    """Base class for all library errors; ``code`` is emitted on stderr."""

    code = "ERROR"


class InvalidInputError(CodecError):
    """An argument violates a documented precondition."""

    code = "INVALID_INPUT"


class CorruptStreamError(CodecError):
    """A bitstream failed structural validation; nothing was decoded."""

    code = "CORRUPT_STREAM"


class EncodeError(CodecError):
    """Encoding failed, typically in an external codec backend."""

    code = "ENCODE_FAILED"


class DecodeError(CodecError):
    """Decoding failed, e.g. a required layer is absent."""

    code = "DECODE_FAILED"


class InvalidWeightsError(CodecError):
    """A weight bundle is malformed or inconsistent with the network."""

    code = "INVALID_WEIGHTS"


class InvalidClipSpecError(CodecError):
    """A synthetic clip specification cannot be rendered."""

    code = "INVALID_CLIP_SPEC"


class PreconditionError(CodecError):
    """A numerical routine was evaluated where its preconditions fail."""

    code = "PRECONDITION"
