"""Empirical-kernel Gram matrices and their spectra.

The Gram matrix over a sample set collects gradient inner products
J(x_i) J(x_j)^T. "blocked" keeps the C x C block per pair; "traced"
sums the diagonal of each block, giving an n x n matrix, and is the
default scoring matrix for acquisition. Jacobians are computed once per
sample and combined by matrix products, accumulated layer by layer so
wide networks never materialize an (n, C, P) array.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .eigen import symmetric_eigh, symmetric_eigvals
from .errors import EigenError
from .nets import NetworkSpec, ParamVector, jacobian_layer_blocks

DEFAULT_POSITIVITY_THRESHOLD = 1e-8
_SYMMETRY_TOL = 1e-10
_RESIDUAL_TOL = 1e-8


@dataclass
class GramMatrix:
    """Symmetric PSD kernel matrix over a sample set."""

    values: np.ndarray
    n: int
    block_dim: int
    scope: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        dim = self.n * self.block_dim
        if self.values.shape != (dim, dim):
            raise ValueError(
                f"expected a {dim}x{dim} matrix for n={self.n}, "
                f"block_dim={self.block_dim}, got {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("gram matrix has non-finite entries")
        scale = np.abs(self.values).max() if self.values.size else 0.0
        asym = np.abs(self.values - self.values.T).max() if self.values.size else 0.0
        if asym > _SYMMETRY_TOL * max(scale, 1.0):
            raise ValueError(f"gram matrix asymmetric beyond tolerance: {asym:.3e}")
        self.values = 0.5 * (self.values + self.values.T)


@dataclass
class Spectrum:
    """Descending eigenvalues plus the smallest one above the threshold."""

    eigenvalues: np.ndarray
    min_positive: float | None
    tolerance_used: float

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        if np.any(np.diff(self.eigenvalues) > 0):
            raise ValueError("eigenvalues must be nonincreasing")


def gram_values(params: ParamVector, spec: NetworkSpec, X, scope="full",
                reduction="traced") -> np.ndarray:
    """Raw kernel matrix as an ndarray, accumulated one layer at a time."""
    if reduction not in ("blocked", "traced"):
        raise ValueError(f"unknown reduction {reduction!r}")
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one sample")
    c = spec.num_classes
    dim = n * c if reduction == "blocked" else n
    K = np.zeros((dim, dim))
    for _, block in jacobian_layer_blocks(params, spec, X, scope):
        if not np.all(np.isfinite(block)):
            raise ValueError("non-finite gradients in kernel assembly")
        if reduction == "traced":
            flat = block.reshape(n, -1)
        else:
            flat = block.reshape(n * c, -1)
        K += flat @ flat.T
    return 0.5 * (K + K.T)


def empirical_ntk(params: ParamVector, spec: NetworkSpec, X, scope="full",
                  reduction="traced") -> GramMatrix:
    """Gram matrix of gradient inner products over the given samples."""
    X = np.asarray(X, dtype=np.float64)
    values = gram_values(params, spec, X, scope, reduction)
    block_dim = spec.num_classes if reduction == "blocked" else 1
    return GramMatrix(values, n=X.shape[0], block_dim=block_dim, scope=scope)


def _as_matrix(G):
    return G.values if isinstance(G, GramMatrix) else np.asarray(G, dtype=np.float64)


def _min_positive(eigenvalues, threshold):
    lam_max = eigenvalues[0] if eigenvalues.size else 0.0
    cut = threshold * lam_max
    qualifying = eigenvalues[eigenvalues > cut]
    return float(qualifying[-1]) if qualifying.size else None


def eigen_spectrum(G, positivity_threshold: float = DEFAULT_POSITIVITY_THRESHOLD) -> Spectrum:
    """Full spectrum, descending, with a per-pair residual check."""
    if not positivity_threshold > 0:
        raise ValueError("positivity_threshold must be positive")
    m = _as_matrix(G)
    eigenvalues, vectors = symmetric_eigh(m)
    norm = np.linalg.norm(m)  # Frobenius; the residual bound is relative to it
    residual = np.linalg.norm(m @ vectors - vectors * eigenvalues[None, :], axis=0)
    worst = residual.max() if residual.size else 0.0
    if worst > _RESIDUAL_TOL * max(norm, 1e-300):
        raise EigenError(f"eigenpair residual {worst:.3e} exceeds {_RESIDUAL_TOL}*||G||")
    return Spectrum(
        eigenvalues=eigenvalues,
        min_positive=_min_positive(eigenvalues, positivity_threshold),
        tolerance_used=positivity_threshold,
    )


def min_positive_eigenvalue(G, positivity_threshold: float = DEFAULT_POSITIVITY_THRESHOLD):
    """Smallest eigenvalue strictly above threshold*lambda_max, or None."""
    if not positivity_threshold > 0:
        raise ValueError("positivity_threshold must be positive")
    return _min_positive(symmetric_eigvals(_as_matrix(G)), positivity_threshold)


def spectrum_to_csv(spectrum: Spectrum, path):
    """One eigenvalue per row, descending."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eigenvalue"])
        for lam in spectrum.eigenvalues:
            writer.writerow([repr(float(lam))])
