"""Exception types shared across the evaluation engine."""


class EvalError(Exception):
    """Base class for all engine errors."""


class TensorFormatError(EvalError):
    """File does not carry the expected container magic."""


class TensorLengthError(EvalError):
    """Payload length disagrees with the dims declared in the header."""


class TensorVersionError(EvalError):
    """Unknown container version or dtype code."""


class TensorValidationError(EvalError):
    """A tensor record violates a container invariant."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ManifestError(EvalError):
    """A video manifest is malformed or violates its invariants."""


class ShapeMismatchError(EvalError):
    """An artifact's shape disagrees with the manifest (hard error)."""


class ArtifactMissingError(EvalError):
    """A metric's prerequisite artifact is absent (soft, per-metric)."""

    def __init__(self, metric_id: str, artifacts):
        self.metric_id = metric_id
        self.artifacts = tuple(artifacts)
        super().__init__(f"{metric_id}: missing {', '.join(self.artifacts)}")


class DegenerateInputError(EvalError):
    """Input has no usable signal (zero norm, zero variance, empty set)."""


class SampleSizeError(EvalError):
    """Too few samples for the requested estimator."""


class IncompleteVectorError(EvalError):
    """A metric vector is missing one or more of the 16 metrics."""

    def __init__(self, missing):
        self.missing = tuple(missing)
        super().__init__(f"missing metrics: {', '.join(self.missing)}")


class JudgeParseError(EvalError):
    """No parseable verdict found in a judge response."""


class JudgeSchemaError(EvalError):
    """Judge response parsed but does not match the verdict schema."""


class JudgeRangeError(EvalError):
    """Judge verdict carries a score outside its legal range."""


class TransportError(EvalError):
    """Judge endpoint unreachable after bounded retries."""


class ProtocolError(EvalError):
    """Judge endpoint rejected the request (HTTP 4xx)."""


class BoundsVersionError(EvalError):
    """Mixing normalization-bounds versions is not allowed."""
