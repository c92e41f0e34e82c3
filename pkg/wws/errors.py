from __future__ import annotations


class WWSError(Exception):
    """Base for every error the engine raises on purpose."""
    exit_code = 2


class UsageError(WWSError):
    exit_code = 1


class DataError(WWSError, ValueError):
    exit_code = 2


class NumericError(WWSError, ArithmeticError):
    exit_code = 3


# corpus

class ManifestParseError(DataError):
    def __init__(self, path: str, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


class DuplicateUtteranceError(DataError):
    def __init__(self, utt_id: str, line_no: int | None = None):
        self.utt_id = utt_id
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"Duplicate utt_id {utt_id!r}{where}")


class UnknownSubsetError(DataError):
    def __init__(self, label: str, line_no: int | None = None):
        self.label = label
        where = f" on line {line_no}" if line_no is not None else ""
        super().__init__(f"Unknown subset label {label!r}{where}")


class InsufficientDataError(DataError):
    def __init__(self, speaker: str, side: str, needed_s: float, available_s: float):
        self.speaker = speaker
        self.side = side
        self.needed_s = needed_s
        self.available_s = available_s
        super().__init__(
            f"Speaker {speaker!r} is short on {side} enrollment data: "
            f"needs {needed_s:.2f} s, has {available_s:.2f} s"
        )


class EmptyReferenceError(DataError):
    pass


class EmptyInputError(DataError):
    pass


# dsp

class WrongSampleRateError(DataError):
    pass


class WrongChannelCountError(DataError):
    pass


class UnsupportedEncodingError(DataError):
    pass


class ClipTooShortError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class NotEnoughFramesError(DataError):
    pass


# augment

class MaskTooWideError(DataError):
    pass


class RatioOutOfRangeError(DataError):
    pass


class ZeroPowerError(DataError):
    pass


# checkpoint

class BadMagicError(DataError):
    pass


class VersionMismatchError(DataError):
    pass


class TruncatedCheckpointError(DataError):
    pass


# train / eval / cli

class LabelOutOfRangeError(DataError):
    pass


class MissingCheckpointError(DataError):
    pass


class ConfigMismatchError(DataError):
    pass


class MissingPathError(DataError):
    pass


class EmptyPoolError(DataError):
    pass


class ZeroVarianceError(NumericError):
    pass


class NonFiniteError(NumericError):
    pass
