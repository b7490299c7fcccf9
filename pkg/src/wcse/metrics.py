"""Representation-quality measures: alignment, uniformity, Spearman.

Alignment and uniformity are hypersphere quantities; callers must pass
L2-normalized vectors (asserted to 1e-6 rather than silently fixed).
Lower is better for both. Uniformity is estimated over all unordered
distinct pairs, which is deterministic and unbiased for the pairwise
expectation excluding self-pairs.
"""

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError, ShapeError

UNIT_NORM_TOL = 1e-6


def _as_unit_rows(vectors, what: str) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ShapeError(f"{what} must be vectors, got shape {x.shape}")
    norms = np.linalg.norm(x, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        worst = float(np.abs(norms - 1.0).max())
        raise DegenerateInputError(
            f"{what} must be L2-normalized (worst norm deviation {worst:.3e})"
        )
    return x


def alignment_loss(pairs) -> float:
    """Mean squared distance between the two sides of each positive pair."""
    pairs = list(pairs)
    if not pairs:
        raise InsufficientDataError("alignment_loss needs at least one pair")
    lhs = _as_unit_rows([a for a, _ in pairs], "alignment pairs")
    rhs = _as_unit_rows([b for _, b in pairs], "alignment pairs")
    if lhs.shape != rhs.shape:
        raise ShapeError("alignment pairs have mismatched shapes")
    diff = lhs - rhs
    return float(np.mean(np.sum(diff * diff, axis=1)))


def uniformity_loss(points) -> float:
    """Log mean Gaussian-kernel value over all unordered distinct pairs.

    In [-8, 0] for unit vectors: 0 means total collapse, more negative
    means better spread on the sphere.
    """
    x = _as_unit_rows(points, "uniformity points")
    n = x.shape[0]
    if n < 2:
        raise InsufficientDataError(f"uniformity_loss needs >= 2 points, got {n}")
    sq_norms = np.sum(x * x, axis=1)
    d2 = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (x @ x.T)
    iu = np.triu_indices(n, k=1)
    return float(np.log(np.mean(np.exp(-2.0 * d2[iu]))))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks starting at 1, ties replaced by their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise ShapeError(f"spearman expects equal-length 1-D inputs, got {x.shape}, {y.shape}")
    if len(x) < 2:
        raise InsufficientDataError(f"spearman needs >= 2 observations, got {len(x)}")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInputError("correlation is undefined for a constant input")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float(np.dot(rx, ry) / np.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
