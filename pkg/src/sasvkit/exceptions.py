"""Error types raised by the toolkit.

Every data or validation failure raises a subclass of :class:`SasvError`
so the CLI can map them onto a single exit code. Numeric failures during
training raise :class:`NonFiniteLossError`, which the CLI reports
separately.
"""


class SasvError(Exception):
    """Base class for all toolkit errors."""


class ZeroVectorError(SasvError):
    """A vector with (near-)zero L2 norm where a direction is required."""


class DimMismatchError(SasvError):
    """Vectors or stores with inconsistent dimensionality."""


class DuplicateIdError(SasvError):
    def __init__(self, entry_id):
        super().__init__(f"duplicate id {entry_id!r}")
        self.entry_id = entry_id


class BadMagicError(SasvError):
    """Binary embedding file does not start with the expected magic."""


class TruncatedRecordError(SasvError):
    """Binary embedding file ended in the middle of a record."""


class MalformedLineError(SasvError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnknownLabelError(SasvError):
    def __init__(self, line_no, label):
        super().__init__(f"line {line_no}: unknown trial label {label!r}")
        self.line_no = line_no
        self.label = label


class MissingUtteranceError(SasvError):
    def __init__(self, model, utt, where="enrollment map"):
        super().__init__(f"{where} for model {model!r} references missing utterance {utt!r}")
        self.model = model
        self.utt = utt


class ConfigInvalidError(SasvError):
    def __init__(self, field, message):
        super().__init__(f"invalid config field {field!r}: {message}")
        self.field = field


class DomainError(SasvError):
    """Scalar input outside its mathematical domain."""


class ShapeMismatchError(SasvError):
    """Parameter or feature arrays with incompatible shapes."""


class KeyMismatchError(SasvError):
    """Score sets to fuse do not cover the same (enroll, test) pairs."""


class LengthMismatchError(SasvError):
    """Fusion weights and score sets differ in count."""


class EmptyClassError(SasvError):
    """A training set or score partition is missing one class entirely."""


class EmptySideError(EmptyClassError):
    """An EER computation received an empty positive or negative side."""


class MissingScoreError(SasvError):
    def __init__(self, enroll, test):
        super().__init__(f"no score for trial ({enroll!r}, {test!r})")
        self.enroll = enroll
        self.test = test


class OrphanScoreError(SasvError):
    def __init__(self, enroll, test):
        super().__init__(f"score for unknown trial ({enroll!r}, {test!r})")
        self.enroll = enroll
        self.test = test


class DegenerateCostError(SasvError):
    """Tandem cost weights are not both positive at the fixed operating point."""


class UnknownKeyError(SasvError):
    def __init__(self, key):
        super().__init__(f"unknown config key {key!r}")
        self.key = key


class UnsupportedStrategyError(SasvError):
    """Strategy name or parameter set does not match a known scoring head."""


class NonFiniteLossError(SasvError):
    """Training loss became NaN or infinite (diverged)."""

    def __init__(self, epoch, value):
        super().__init__(f"non-finite loss {value!r} at epoch {epoch}")
        self.epoch = epoch
