"""Dense matrix helpers and the symmetric eigendecomposition.

Matrices are plain 2-D float64 numpy arrays, rows as samples. The
eigensolver is a cyclic Jacobi iteration (see ``_accel``): simple,
robust, and accurate at the <=1024-dim scales this package targets.
"""

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import ConvergenceError, InsufficientDataError, ShapeError

# Convergence rule for the Jacobi sweeps: off-diagonal Frobenius norm
# relative to the input Frobenius norm, bounded sweep count.
JACOBI_REL_TOL = 1e-11
JACOBI_MAX_SWEEPS = 100

# Rows whose L2 norm falls below this are treated as degenerate.
DEGENERATE_ROW_NORM = 1e-12

# Input must be symmetric to within this before decomposition.
SYMMETRY_TOL = 1e-9


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} contains non-finite entries")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} x {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def covariance(z: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Population covariance (1/N)(Z-mean)^T (Z-mean) around a given mean.

    The result is symmetrized exactly so downstream eigensolves never see
    rounding-level asymmetry.
    """
    z = np.asarray(z, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeError(f"covariance expects a 2-D batch, got shape {z.shape}")
    if z.shape[0] < 2:
        raise InsufficientDataError(
            f"covariance needs at least 2 rows, got {z.shape[0]}"
        )
    if mean.shape != (z.shape[1],):
        raise ShapeError(
            f"mean length {mean.shape} does not match {z.shape[1]} columns"
        )
    centered = z - mean
    cov = centered.T @ centered / z.shape[0]
    return (cov + cov.T) / 2.0


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order; eigenvectors as matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(a: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.

    The input is symmetrized as (A + A^T)/2 before iterating, but must
    already be symmetric to within 1e-9. Raises ConvergenceError (with the
    residual) if the off-diagonal mass has not dropped below
    ``JACOBI_REL_TOL * ||A||_F`` after ``JACOBI_MAX_SWEEPS`` sweeps.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"sym_eig expects a square matrix, got shape {a.shape}")
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
        raise ShapeError("sym_eig input is not symmetric to within 1e-9")
    work = np.ascontiguousarray((a + a.T) / 2.0)
    vals, vecs, off, _sweeps, converged = _accel.jacobi_eigh(
        work, JACOBI_MAX_SWEEPS, JACOBI_REL_TOL
    )
    if not converged:
        raise ConvergenceError(
            f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps "
            f"(off-diagonal residual {off:.3e})",
            off_diagonal=float(off),
        )
    order = np.argsort(-vals, kind="stable")
    return EigenDecomposition(
        eigenvalues=vals[order], eigenvectors=np.ascontiguousarray(vecs[:, order])
    )


def l2_normalize_rows(z: np.ndarray, return_flags: bool = False):
    """Scale every row to unit L2 norm.

    Rows with norm below 1e-12 are returned unchanged; with
    ``return_flags=True`` the boolean mask of those degenerate rows is
    returned alongside the matrix.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeError(f"l2_normalize_rows expects 2-D input, got {z.shape}")
    norms = np.sqrt(np.sum(z * z, axis=1))
    degenerate = norms < DEGENERATE_ROW_NORM
    safe = np.where(degenerate, 1.0, norms)
    out = z / safe[:, None]
    if return_flags:
        return out, degenerate
    return out
