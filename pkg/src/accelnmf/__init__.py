"""Accelerated multiplicative updates, HALS and projected gradient for NMF."""
from .accel import (
    AccelConfig, CostModel, FactorPair, RunTrace, calibrate_rho, cost_model,
    inner_budget, inner_loop, preset, run_nmf,
)
from .exceptions import (
    DegenerateInitError, DimensionError, NnlsCyclingError, PreconditionError,
)
from .linalg import ProductCounter, frob_error, gram, left_product, right_product
from .nnls import inner_error_curve, nnls, nnls_factor
from .updates import PgParams, Safeguards, hals_update, mu_update, pg_update

__version__ = "0.1.0"

__all__ = [
    "AccelConfig", "CostModel", "FactorPair", "RunTrace", "calibrate_rho",
    "cost_model", "inner_budget", "inner_loop", "preset", "run_nmf",
    "DegenerateInitError", "DimensionError", "NnlsCyclingError", "PreconditionError",
    "ProductCounter", "frob_error", "gram", "left_product", "right_product",
    "inner_error_curve", "nnls", "nnls_factor",
    "PgParams", "Safeguards", "hals_update", "mu_update", "pg_update",
]
