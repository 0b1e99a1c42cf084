"""Higher-order tensor field interpolation.

Symmetric tensor fields of even order (2, 4, 6) over a planar grid, a
Tucker-decomposition stochastic process with Gaussian-process factor entries
for probabilistic interpolation, MCMC inference, direct and log-Euclidean
baselines, Stejskal-Tanner signal fitting, and a benchmarking harness.
"""

from .errors import (
    AsymmetryError,
    DegenerateDesignError,
    FactorizationError,
    FieldFormatError,
    InvalidOrderError,
    NormalizationError,
    NumericalError,
    OutOfDomainError,
    TensorMismatchError,
)
from .tensors import (
    SUPPORTED_ORDERS,
    SymmetricTensor,
    TensorField,
    evaluate_diffusivity,
    frobenius_distance,
    frobenius_norm,
    mode_product,
    multiplicities,
    multiplicity,
    tucker_reconstruct,
    unique_count,
    unique_exponents,
)

__version__ = "0.1.0"
