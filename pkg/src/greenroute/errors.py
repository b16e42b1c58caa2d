"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when user-supplied values violate a documented precondition."""


class SchemaError(ValidationError):
    """Column names/kinds do not match what an operation expects."""


class RankDeficiencyError(ValidationError):
    """Design matrix is rank deficient; carries the offending column names."""

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; dependent columns: {self.columns}")


class ConvergenceError(RuntimeError):
    """An iterative fit diverged (e.g. NaN loss)."""


class DegenerateCurveError(ValidationError):
    """A selection curve carries no usable signal (e.g. all-zero inertia)."""


class UnsupportedFamilyError(ValidationError):
    """Operation asked of a model family that does not support it."""


class BundleIntegrityError(RuntimeError):
    """Bundle file is truncated, corrupted, or fails its checksum."""


class BundleVersionError(RuntimeError):
    """Bundle was written with a version this loader does not understand."""
