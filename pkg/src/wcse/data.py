"""Synthetic clustered data plus the graded pair-similarity harness.

Cluster centers are drawn uniformly on the unit sphere; samples are the
center plus isotropic Gaussian noise (``noise_scale`` is the
per-coordinate standard deviation). The harness labels index pairs with
the cosine of their cluster centers, mirroring a graded similarity
protocol: predicted scores are embedding cosines, gold scores are center
cosines, and rank correlation between them measures how much cluster
geometry the embedding preserves. Same-cluster consecutive pairs double
as positive pairs for the alignment measure.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class SyntheticDataset:
    x: np.ndarray  # (n, dim)
    labels: np.ndarray  # (n,) cluster ids, cluster-major order
    centers: np.ndarray  # (num_clusters, dim), unit rows


@dataclass
class PairHarness:
    idx_a: np.ndarray
    idx_b: np.ndarray
    gold: np.ndarray  # center cosine per pair
    align_a: np.ndarray  # same-cluster pair indices for alignment
    align_b: np.ndarray


def generate_synthetic(
    num_clusters: int,
    per_cluster: int,
    dim: int,
    noise_scale: float,
    seed: int,
) -> SyntheticDataset:
    """Deterministic clustered samples: center + Gaussian noise."""
    if num_clusters < 1 or per_cluster < 1 or dim < 1:
        raise ConfigError("num_clusters, per_cluster, dim must all be >= 1")
    if noise_scale < 0.0:
        raise ConfigError(f"noise_scale must be >= 0, got {noise_scale}")
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(num_clusters, dim))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    centers = raw / norms
    labels = np.repeat(np.arange(num_clusters), per_cluster)
    noise = rng.normal(size=(num_clusters * per_cluster, dim))
    x = centers[labels] + noise_scale * noise
    return SyntheticDataset(x=x, labels=labels, centers=centers)


def make_pair_harness(ds: SyntheticDataset, num_pairs: int, seed: int) -> PairHarness:
    """Graded similarity pairs plus alignment (same-cluster) pairs.

    Graded pairs span distinct clusters only: same-cluster pairs all
    carry the degenerate gold score 1.0 and are covered by the alignment
    pairs instead.
    """
    n = ds.x.shape[0]
    if n < 2:
        raise ConfigError("need at least 2 samples to build pairs")
    if num_pairs < 1:
        raise ConfigError(f"num_pairs must be >= 1, got {num_pairs}")
    if ds.centers.shape[0] < 2:
        raise ConfigError("graded pairs need at least 2 clusters")
    rng = np.random.default_rng(seed)
    idx_a = np.empty(num_pairs, dtype=np.int64)
    idx_b = np.empty(num_pairs, dtype=np.int64)
    filled = 0
    while filled < num_pairs:
        a = rng.integers(0, n, size=num_pairs - filled)
        b = rng.integers(0, n, size=num_pairs - filled)
        keep = ds.labels[a] != ds.labels[b]
        kept = int(keep.sum())
        idx_a[filled : filled + kept] = a[keep]
        idx_b[filled : filled + kept] = b[keep]
        filled += kept
    gold = np.sum(
        ds.centers[ds.labels[idx_a]] * ds.centers[ds.labels[idx_b]], axis=1
    )
    align_a = []
    align_b = []
    for cluster in range(ds.centers.shape[0]):
        members = np.flatnonzero(ds.labels == cluster)
        for i in range(0, len(members) - 1, 2):
            align_a.append(members[i])
            align_b.append(members[i + 1])
    return PairHarness(
        idx_a=idx_a,
        idx_b=idx_b,
        gold=gold,
        align_a=np.asarray(align_a, dtype=np.int64),
        align_b=np.asarray(align_b, dtype=np.int64),
    )


def pair_cosines(embeddings: np.ndarray, idx_a: np.ndarray, idx_b: np.ndarray) -> np.ndarray:
    """Row-wise cosine similarity between indexed embedding pairs."""
    a = embeddings[idx_a]
    b = embeddings[idx_b]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    return np.sum(a * b, axis=1) / (na * nb)
