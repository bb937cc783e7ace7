"""Exception hierarchy.

Every error carries an ``error_class`` slug; the CLI prints it on a single
line so callers can dispatch on it without parsing prose.
"""


class ThrombolrError(Exception):
    error_class = "internal"


class InputMissingError(ThrombolrError, FileNotFoundError):
    error_class = "input-missing"


class ConfigError(ThrombolrError, ValueError):
    error_class = "config-invalid"


class DataError(ThrombolrError, ValueError):
    error_class = "data-invalid"


class DegenerateDataError(DataError):
    """Single-class labels, constant columns, folds without positives."""

    error_class = "degenerate-data"


class ConvergenceError(ThrombolrError, RuntimeError):
    error_class = "convergence-failure"

    def __init__(self, message, grad_norm=None, n_iter=None):
        super().__init__(message)
        self.grad_norm = grad_norm
        self.n_iter = n_iter


class FeatureDomainError(DataError):
    """A materialized feature is non-finite (e.g. log of a nonpositive argument)."""

    error_class = "feature-domain"

    def __init__(self, message, counts=None):
        super().__init__(message)
        self.counts = dict(counts or {})


class ArtifactError(ThrombolrError, ValueError):
    error_class = "artifact-malformed"


class VersionMismatchError(ArtifactError):
    error_class = "artifact-version"


class ChecksumError(ArtifactError):
    error_class = "artifact-checksum"


class ExpressionError(ThrombolrError, ValueError):
    error_class = "expression-invalid"


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnboundVariableError(ExpressionError):
    error_class = "expression-unbound"


class ExpressionDomainError(ExpressionError):
    error_class = "expression-domain"


class SplitGuardError(ThrombolrError, RuntimeError):
    """Raised when a stage other than evaluation touches held-out test rows."""

    error_class = "test-set-guard"
