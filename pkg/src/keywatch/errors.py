"""Error taxonomy shared by all pipeline stages.

Every error belongs to one of four families that map directly onto CLI
exit codes: configuration (1), data (2), provider (3), and degenerate
math (4).
"""

from __future__ import annotations


class KeywatchError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 2

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.stage: str | None = None


class ConfigError(KeywatchError):
    """Invalid or unresolvable configuration; nothing was executed."""

    exit_code = 1


class DataError(KeywatchError):
    """Malformed or missing input data or artifacts."""

    exit_code = 2


class ProviderError(KeywatchError):
    """The description provider failed or misbehaved."""

    exit_code = 3


class DegenerateError(KeywatchError):
    """Inputs made the requested computation mathematically meaningless."""

    exit_code = 4


# --- dataset ------------------------------------------------------------


class MissingFile(DataError):
    def __init__(self, path):
        super().__init__(f"file not found: {path}")
        self.path = path


class MalformedRecord(DataError):
    def __init__(self, path, line_number: int, reason: str):
        super().__init__(f"{path}:{line_number}: {reason}")
        self.line_number = line_number


class DuplicateFrameId(DataError):
    def __init__(self, frame_id: str):
        super().__init__(f"duplicate frame_id {frame_id!r}")
        self.frame_id = frame_id


class InsufficientFrames(DataError):
    def __init__(self, label: str, have: int, need: int):
        super().__init__(f"need {need} {label} frames, manifest has {have}")
        self.label = label
        self.have = have
        self.need = need


class UnknownExcludedId(DataError):
    def __init__(self, frame_id: str):
        super().__init__(f"excluded frame_id {frame_id!r} not in manifest")
        self.frame_id = frame_id


# --- describer ----------------------------------------------------------


class ImageReadError(DataError):
    def __init__(self, path, reason: str):
        super().__init__(f"cannot read image {path}: {reason}")
        self.path = path


class ProviderUnreachable(ProviderError):
    def __init__(self, attempts: int, last_error: str):
        super().__init__(f"provider unreachable after {attempts} attempts: {last_error}")
        self.attempts = attempts


class ProviderRejected(ProviderError):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider rejected request: HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class EmptyResponse(ProviderError):
    def __init__(self, frame_id: str):
        super().__init__(f"provider returned an empty description for frame {frame_id!r}")
        self.frame_id = frame_id


class AllFailed(ProviderError):
    def __init__(self, n: int, first: "KeywatchError | None" = None):
        super().__init__(f"all {n} description requests failed")
        self.n = n
        self.first = first


# --- induction ----------------------------------------------------------


class EmptyDescriptionSet(DataError):
    def __init__(self, side: str):
        super().__init__(f"no descriptions on the {side} side")
        self.side = side


class EmptyVocabulary(DegenerateError):
    def __init__(self):
        super().__init__("no terms survived stop-word and document-frequency filtering")


class EmptyDocument(DegenerateError):
    def __init__(self):
        super().__init__("document has no countable tokens")


class DivisionByZeroDocFreq(DegenerateError):
    def __init__(self, term: str):
        super().__init__(f"term {term!r} appears in no document")
        self.term = term


class ZeroDifferenceVector(DegenerateError):
    def __init__(self):
        super().__init__(
            "identical score rows for both corpora; keyword weights are undefined"
        )


# --- classifier ---------------------------------------------------------


class DimensionMismatch(DataError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected input of length {expected}, got {got}")
        self.expected = expected
        self.got = got


class DomainError(DegenerateError):
    def __init__(self, value: float):
        super().__init__(f"prediction {value!r} outside [0, 1]")
        self.value = value


class DegenerateLabels(DegenerateError):
    def __init__(self, present: int):
        super().__init__(f"labels contain only class {present}; need both classes")
        self.present = present


class InsufficientSamples(DegenerateError):
    def __init__(self, label: int, have: int, need: int):
        super().__init__(f"class {label} has {have} samples, need at least {need}")
        self.label = label


class ModelEncodingMismatch(DataError):
    def __init__(self, model_hash: str, encoding_hash: str):
        super().__init__(
            "encoding was produced by a different keyword model "
            f"({encoding_hash[:12]}... vs {model_hash[:12]}...)"
        )


# --- metrics ------------------------------------------------------------


class SingleClassError(DegenerateError):
    def __init__(self):
        super().__init__("both classes are required to compute a ranking score")


class NoEligibleVideos(DegenerateError):
    def __init__(self):
        super().__init__("no video contains both normal and anomalous frames")
