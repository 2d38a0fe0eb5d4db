"""Extended Kalman filters on matrix Lie groups with an INS/GNSS test bed."""

__version__ = "0.1.0"

from .ekf import (
    VARIANTS,
    FilterConfig,
    FilterState,
    LieEKF,
    NumericalFailure,
    SystemModel,
    reset_matrix,
)
from .gaussian import ExtendedConcentratedGaussian, convert_frame, reset_body, reset_spatial, sample
from .groups import SE23, SO3, ProductGroup, VectorGroup, ins_group, product
from .ins import InitialCovariance, InsFilter, InsModel, InsNoiseParams
from .lie import MatrixLieGroup

__all__ = [
    "__version__",
    "MatrixLieGroup",
    "SO3",
    "SE23",
    "VectorGroup",
    "ProductGroup",
    "product",
    "ins_group",
    "ExtendedConcentratedGaussian",
    "convert_frame",
    "reset_body",
    "reset_spatial",
    "sample",
    "SystemModel",
    "FilterConfig",
    "FilterState",
    "LieEKF",
    "NumericalFailure",
    "reset_matrix",
    "VARIANTS",
    "InsModel",
    "InsNoiseParams",
    "InitialCovariance",
    "InsFilter",
]
