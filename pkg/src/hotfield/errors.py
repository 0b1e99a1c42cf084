"""Exception types shared across the package.

Validation problems (bad orders, mismatched tensors, malformed files, queries
outside the interpolation domain) derive from ``ValueError``.  Numerical
breakdowns (failed factorizations, rank-deficient designs) derive from
``NumericalError`` so callers can distinguish "fix your input" from "the
linear algebra gave up".  The command line maps the former to exit code 1 and
the latter to exit code 2.
"""


class InvalidOrderError(ValueError):
    """Tensor order is odd, non-positive, or outside the supported set."""


class TensorMismatchError(ValueError):
    """Operands have incompatible orders, shapes, or site layouts."""


class NormalizationError(ValueError):
    """A direction vector is not unit length within tolerance."""


class AsymmetryError(ValueError):
    """A full tensor array deviates from exact symmetry beyond tolerance."""


class OutOfDomainError(ValueError):
    """Query point lies outside the convex hull of the training grid."""


class FieldFormatError(ValueError):
    """A field, signal, or sites file does not parse against its schema."""


class NumericalError(ArithmeticError):
    """Base class for numerical failures (exit code 2 in the CLI)."""


class FactorizationError(NumericalError):
    """Cholesky factorization failed even after jitter escalation."""


class DegenerateDesignError(NumericalError):
    """Least-squares design matrix is rank deficient."""
