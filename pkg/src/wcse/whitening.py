"""PCA/ZCA whitening, group whitening, and shuffled group whitening.

Conventions fixed package-wide: rows are samples, whitening is applied
as ``H = (Z - mu) @ W.T``, and data is always centered by the stats mean
before the transform. Group whitening permutes channels by a plan,
whitens each contiguous group of the permuted layout independently, and
un-permutes, so channel ``i`` of the output corresponds to channel ``i``
of the input.

Running statistics use the momentum recurrence
``mu_n = beta*mu_{n-1} + (1-beta)*xbar`` (same for the covariance); the
first update adopts the batch statistics directly.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ShapeError, SingularCovarianceError
from .linalg import covariance, sym_eig

PCA = "pca"
ZCA = "zca"

# Eigenvalues of (cov + ridge*I) in [-EIG_CLAMP, 0) are treated as rounding
# noise and clamped to zero; anything below EIG_FLOOR afterwards means the
# covariance is not invertible at working precision.
EIG_CLAMP = 1e-9
EIG_FLOOR = 1e-10

# Relative ridge factor applied when a batch cannot determine a full-rank
# group covariance (fewer rows than channels).
DEFAULT_RIDGE_EPSILON = 1e-5

DEFAULT_MOMENTUM = 0.95


@dataclass(frozen=True)
class WhiteningStats:
    """Running mean/covariance for one channel group."""

    mean: np.ndarray
    cov: np.ndarray
    momentum: float
    update_count: int = 0

    @classmethod
    def empty(cls, dim: int, momentum: float = DEFAULT_MOMENTUM) -> "WhiteningStats":
        if not 0.0 <= momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {momentum}")
        return cls(
            mean=np.zeros(dim),
            cov=np.zeros((dim, dim)),
            momentum=momentum,
            update_count=0,
        )

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class WhiteningMatrix:
    """A derived whitening transform: ``kind`` is "pca" or "zca"."""

    kind: str
    w: np.ndarray
    ridge: float


@dataclass(frozen=True)
class GroupPlan:
    """A channel permutation plus the group size it is split into."""

    dim: int
    group_size: int
    permutation: np.ndarray
    seed: int

    @property
    def num_groups(self) -> int:
        return self.dim // self.group_size

    def inverse_permutation(self) -> np.ndarray:
        inv = np.empty(self.dim, dtype=np.int64)
        inv[self.permutation] = np.arange(self.dim, dtype=np.int64)
        return inv


def update_stats(stats: WhiteningStats, batch: np.ndarray) -> WhiteningStats:
    """Fold one batch into the running mean/covariance.

    On the first update the batch statistics are adopted directly
    (momentum treated as zero); afterwards the momentum recurrence applies.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != stats.dim:
        raise ShapeError(
            f"batch shape {batch.shape} does not match stats dim {stats.dim}"
        )
    if batch.shape[0] < 2:
        raise ShapeError(f"stats update needs >= 2 rows, got {batch.shape[0]}")
    xbar = batch.mean(axis=0)
    sigma = covariance(batch, xbar)
    if stats.update_count == 0:
        mean, cov = xbar, sigma
    else:
        beta = stats.momentum
        mean = beta * stats.mean + (1.0 - beta) * xbar
        cov = beta * stats.cov + (1.0 - beta) * sigma
    return replace(
        stats, mean=mean, cov=cov, update_count=stats.update_count + 1
    )


def stats_from_batch(batch: np.ndarray, momentum: float = 0.0) -> WhiteningStats:
    """Single-shot statistics of one batch (training-time group whitening)."""
    batch = np.asarray(batch, dtype=np.float64)
    return update_stats(WhiteningStats.empty(batch.shape[1], momentum), batch)


def auto_ridge(stats: WhiteningStats, n_rows: int, epsilon: float) -> float:
    """Absolute ridge for a batch-derived covariance.

    A batch of N rows determines at most rank N-1; when that cannot cover
    the group dimension the covariance is singular, and we shift the
    spectrum by ``epsilon * tr(cov)/dim`` (a fraction of the mean
    eigenvalue). Full-rank cases get no ridge.
    """
    if n_rows - 1 >= stats.dim:
        return 0.0
    return epsilon * float(np.trace(stats.cov)) / stats.dim


def derive_whitening(
    stats: WhiteningStats, kind: str = ZCA, ridge: float = 0.0
) -> WhiteningMatrix:
    """Whitening matrix from running stats: eigendecompose cov + ridge*I.

    PCA: ``W = diag(lambda^-1/2) U^T``; ZCA: ``W = U diag(lambda^-1/2) U^T``
    (symmetric, axis-preserving). Eigenvalues in [-1e-9, 0) are clamped to
    zero before the inverse square root; anything below the 1e-10 floor
    raises SingularCovarianceError naming the offending eigenvalue.
    """
    if kind not in (PCA, ZCA):
        raise ConfigError(f"unknown whitening kind {kind!r}")
    if ridge < 0.0:
        raise ConfigError(f"ridge must be >= 0, got {ridge}")
    if stats.update_count < 1:
        raise ConfigError("whitening stats have never been updated")
    d = stats.dim
    shifted = (stats.cov + stats.cov.T) / 2.0 + ridge * np.eye(d)
    decomp = sym_eig(shifted)
    lam = decomp.eigenvalues.copy()
    lam[(lam >= -EIG_CLAMP) & (lam < 0.0)] = 0.0
    if np.any(lam < EIG_FLOOR):
        worst = float(lam.min())
        raise SingularCovarianceError(
            f"covariance is singular at working precision: eigenvalue "
            f"{worst:.6e} below floor {EIG_FLOOR:g} (ridge {ridge:g})",
            eigenvalue=worst,
        )
    inv_sqrt = 1.0 / np.sqrt(lam)
    u = decomp.eigenvectors
    if kind == PCA:
        w = inv_sqrt[:, None] * u.T
    else:
        w = (u * inv_sqrt) @ u.T
    return WhiteningMatrix(kind=kind, w=w, ridge=float(ridge))


def apply_whitening(
    batch: np.ndarray, stats: WhiteningStats, w: WhiteningMatrix
) -> np.ndarray:
    """Center by the stats mean and apply the transform: (Z - mu) @ W.T."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != stats.dim:
        raise ShapeError(
            f"batch shape {batch.shape} does not match stats dim {stats.dim}"
        )
    if w.w.shape != (stats.dim, stats.dim):
        raise ShapeError(
            f"whitening matrix shape {w.w.shape} does not match dim {stats.dim}"
        )
    return (batch - stats.mean) @ w.w.T


def make_group_plan(
    dim: int, group_size: int, shuffled: bool, seed: int = 0
) -> GroupPlan:
    """Build a grouping plan over ``dim`` channels.

    ``shuffled=False`` yields the identity permutation (plain group
    whitening over contiguous channel blocks); ``shuffled=True`` draws a
    uniformly random permutation, deterministic in ``seed``. A single
    group always gets the identity plan: whitening is equivariant under
    in-group permutations, so shuffling one group changes nothing.
    """
    if group_size < 1 or dim < 1:
        raise ConfigError(f"dim and group_size must be >= 1, got {dim}, {group_size}")
    if dim % group_size != 0:
        raise ConfigError(f"group_size {group_size} does not divide dim {dim}")
    if shuffled and group_size != dim:
        perm = np.random.default_rng(seed).permutation(dim).astype(np.int64)
    else:
        perm = np.arange(dim, dtype=np.int64)
    return GroupPlan(dim=dim, group_size=group_size, permutation=perm, seed=int(seed))


def group_stats_from_batch(
    batch: np.ndarray, plan: GroupPlan, momentum: float = 0.0
) -> list:
    """Per-group batch statistics in the plan's permuted channel order."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[1] != plan.dim:
        raise ShapeError(
            f"batch has {batch.shape[1]} channels, plan expects {plan.dim}"
        )
    permuted = batch[:, plan.permutation]
    g = plan.group_size
    return [
        stats_from_batch(permuted[:, i * g : (i + 1) * g], momentum)
        for i in range(plan.num_groups)
    ]


def group_whiten(
    batch: np.ndarray,
    plan: GroupPlan,
    group_stats: list,
    kind: str = ZCA,
    ridge: float = 0.0,
) -> np.ndarray:
    """Shuffle channels, whiten each group independently, un-shuffle.

    ``group_stats[i]`` holds the statistics for group ``i`` of the
    permuted layout (see ``group_stats_from_batch``). ``ridge`` is an
    absolute diagonal shift passed to every per-group derivation.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[1] != plan.dim:
        raise ShapeError(
            f"batch has {batch.shape[1]} channels, plan expects {plan.dim}"
        )
    if len(group_stats) != plan.num_groups:
        raise ShapeError(
            f"expected {plan.num_groups} stats objects, got {len(group_stats)}"
        )
    g = plan.group_size
    permuted = batch[:, plan.permutation]
    whitened = np.empty_like(permuted)
    for i, stats in enumerate(group_stats):
        if stats.dim != g:
            raise ShapeError(f"group {i} stats dim {stats.dim} != group size {g}")
        w = derive_whitening(stats, kind, ridge)
        whitened[:, i * g : (i + 1) * g] = apply_whitening(
            permuted[:, i * g : (i + 1) * g], stats, w
        )
    out = np.empty_like(whitened)
    out[:, plan.permutation] = whitened
    return out


def view_seed(base_seed: int, index: int) -> int:
    """Deterministic child seed for the ``index``-th augmentation draw."""
    return int(np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1)[0])


def sgw_augment(
    batch: np.ndarray,
    dim: int,
    group_size: int,
    num_views: int,
    base_seed: int,
    ridge_epsilon: float = DEFAULT_RIDGE_EPSILON,
) -> list:
    """Multiple whitened views of one batch under independent shuffles.

    View ``j`` draws its own random grouping plan (seeded from
    ``(base_seed, j)``), estimates per-group statistics from the batch
    itself, and ZCA-whitens each group. Repeated calls with the same
    ``base_seed`` reproduce the same views bit for bit.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if num_views < 1:
        raise ConfigError(f"num_views must be >= 1, got {num_views}")
    if batch.shape[1] != dim:
        raise ShapeError(f"batch has {batch.shape[1]} channels, expected {dim}")
    views = []
    for j in range(num_views):
        plan = make_group_plan(dim, group_size, shuffled=True, seed=view_seed(base_seed, j))
        stats = group_stats_from_batch(batch, plan)
        ridge = max(auto_ridge(s, batch.shape[0], ridge_epsilon) for s in stats)
        views.append(group_whiten(batch, plan, stats, ZCA, ridge))
    return views
