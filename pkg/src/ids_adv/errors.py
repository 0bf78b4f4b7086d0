"""Exception types shared across the toolkit."""


class IdsAdvError(Exception):
    """Base class for every error raised by this package."""


class IoFailure(IdsAdvError):
    """A file could not be read or written."""


class MissingLabelColumn(IdsAdvError):
    """The requested label column is not in the CSV header."""


class RaggedRow(IdsAdvError):
    """A CSV row has a different cell count than the header."""


class EmptyDataset(IdsAdvError):
    """No usable rows remain."""


class ShapeMismatch(IdsAdvError):
    """Array shapes are inconsistent with the model or with each other."""


class EmptySplit(IdsAdvError):
    """A requested partition would receive zero rows."""


class BadShape(IdsAdvError):
    """Invalid layer dimensions for a model."""


class Diverged(IdsAdvError):
    """Training produced a non-finite loss or non-finite parameters."""


class LengthMismatch(IdsAdvError):
    """Two vectors that must align have different lengths."""


class NonBinaryLabel(IdsAdvError):
    """A label vector contains values outside {0, 1}."""


class EmptyEvaluation(IdsAdvError):
    """Metrics were requested over zero samples."""


class DegenerateLabels(IdsAdvError):
    """ROC/AUC is undefined because only one class is present."""


class EmptyConfigSet(IdsAdvError):
    """An operation over attack configs received an empty list."""


class MissingArtifact(IdsAdvError):
    """A pipeline stage needs an artifact that has not been produced."""


class InvalidReport(IdsAdvError):
    """A report document does not match the expected schema."""


class InvalidConfig(IdsAdvError):
    """An experiment configuration failed validation."""
