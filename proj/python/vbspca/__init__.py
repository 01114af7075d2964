"""Spike-and-slab Bayesian sparse PCA.

Thin wrapper around the C++ core. The solvers take an (n, p) numpy array
and return a dict with loadings, inclusion probabilities, the 1-based
support, sigma2, iteration count, convergence flag, and the per-iteration
trace.
"""

from ._vbspca import (
    __version__,
    column_overlaps,
    fit_batch_px_cavi,
    fit_px_cavi,
    fit_px_em,
    folded_normal_mean,
    folded_normal_mean_grad,
    normal_cdf,
    orthonormalize_loadings,
    projection_frobenius,
    simulate,
)

__all__ = [
    "__version__",
    "column_overlaps",
    "fit_batch_px_cavi",
    "fit_px_cavi",
    "fit_px_em",
    "folded_normal_mean",
    "folded_normal_mean_grad",
    "normal_cdf",
    "orthonormalize_loadings",
    "projection_frobenius",
    "simulate",
]
