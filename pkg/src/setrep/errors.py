"""Exception hierarchy shared across the package.

Every error the library raises derives from :class:`SetrepError` and carries
an ``exit_code`` so the command-line layer can map failure classes to
distinct process exit codes (config=2, I/O=3, format=4, solver divergence=5).
"""


class SetrepError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(SetrepError):
    """Invalid parameter value, option combination, or experiment config."""

    exit_code = 2


class ValidationError(ConfigError):
    """Input data violates a structural invariant (shape, finiteness, labels)."""


class DimensionMismatchError(ValidationError):
    """Operands have incompatible dimensions."""


class MissingWeightsError(ConfigError):
    """Fusion was requested but no scale weights were supplied."""


class SingularSystemError(SetrepError):
    """The regularized normal system is singular.

    Usually means both regularizers are zero (or tiny) on rank-deficient
    data; increasing lambda1/lambda2 makes the system positive definite.
    """

    exit_code = 2


class DegenerateConstraintError(SetrepError):
    """The affine constraint direction is numerically unreachable."""

    exit_code = 2


class NoRepresentableClassError(SetrepError):
    """Every class received the +inf residual sentinel; no decision possible."""

    exit_code = 2


class DataIOError(SetrepError):
    """Filesystem-level failure while reading or writing artifacts."""

    exit_code = 3


class FormatError(SetrepError):
    """A file exists and is readable but its contents are malformed."""

    exit_code = 4


class FsetMagicError(FormatError):
    """File does not start with the FSET magic bytes."""


class FsetVersionError(FormatError):
    """FSET header declares an unsupported format version."""


class FsetDtypeError(FormatError):
    """FSET header declares an unknown element dtype code."""


class FsetHeaderError(FormatError):
    """FSET header is truncated or its reserved bytes are nonzero."""


class FsetDimensionError(FormatError):
    """FSET header declares a zero dimension (p, q, or n)."""


class FsetLengthError(FormatError):
    """FSET payload is shorter or longer than the header promises."""


class ManifestError(FormatError):
    """Manifest document is malformed or references inconsistent data."""


class SolverDivergenceError(SetrepError):
    """An iterate became non-finite.

    Try a smaller penalty step (mu) or stronger regularization (lambda).
    """

    exit_code = 5
