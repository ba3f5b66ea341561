"""CRF mean-field, MIL and self-training kernels over float32 arrays."""

from ._core import (
    BoundsError,
    DegenerateBoxError,
    DimensionMismatch,
    DTypeError,
    Error,
    InvalidArgument,
    LayoutError,
    NoNegativeBagsError,
    NonFiniteError,
    NormalizationError,
    PairwiseKernel,
    UndefinedDiceError,
    build_kernel,
    crf_self_training_loss,
    mean_field,
    mil_loss,
    total_loss,
)

__all__ = [
    "BoundsError",
    "DegenerateBoxError",
    "DimensionMismatch",
    "DTypeError",
    "Error",
    "InvalidArgument",
    "LayoutError",
    "NoNegativeBagsError",
    "NonFiniteError",
    "NormalizationError",
    "PairwiseKernel",
    "UndefinedDiceError",
    "build_kernel",
    "crf_self_training_loss",
    "mean_field",
    "mil_loss",
    "total_loss",
]
