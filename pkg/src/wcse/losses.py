"""Cosine-similarity contrastive losses with analytic gradients.

Three objectives share one engine:

* ``info_nce``: the classic single-positive softmax loss with in-batch
  negatives.
* ``multi_pos_loss_sum_out``: one softmax term per positive view, summed
  outside the log and weighted by ``lambda_m``.
* ``multi_pos_loss_sum_in``: the weighted sum of per-view terms moved
  inside the log, with the negated similarity in the numerator (kept
  exactly as formulated; its literal minimization rewards dissimilar
  positives, which the ablation switch exists to demonstrate).

Each positive view supplies its own in-batch negative pool, so every
term is an exact softmax over one view and the multi-view losses reduce
bit-for-bit to ``info_nce`` at a single view with unit weight.

All losses are means over anchors. Gradients are with respect to the raw
(unnormalized) embedding matrices.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, InsufficientDataError, ShapeError
from .linalg import DEGENERATE_ROW_NORM

DEFAULT_TEMPERATURE = 0.05


@dataclass
class ContrastiveBatch:
    """Anchors plus one or more positive views, row-aligned.

    ``lambda_m=None`` resolves to ``1/m`` so the total positive weight
    stays constant as the view count varies.
    """

    anchors: np.ndarray
    positives: list = field(default_factory=list)
    temperature: float = DEFAULT_TEMPERATURE
    lambda_m: float | None = None

    def __post_init__(self):
        self.anchors = np.asarray(self.anchors, dtype=np.float64)
        self.positives = [np.asarray(p, dtype=np.float64) for p in self.positives]
        if self.anchors.ndim != 2:
            raise ShapeError(f"anchors must be 2-D, got shape {self.anchors.shape}")
        if not self.positives:
            raise ShapeError("at least one positive view is required")
        for i, p in enumerate(self.positives):
            if p.shape != self.anchors.shape:
                raise ShapeError(
                    f"positive view {i} has shape {p.shape}, "
                    f"anchors have {self.anchors.shape}"
                )
        if not self.temperature > 0.0:
            raise ShapeError(f"temperature must be > 0, got {self.temperature}")

    @property
    def num_views(self) -> int:
        return len(self.positives)

    @property
    def weight(self) -> float:
        return self.lambda_m if self.lambda_m is not None else 1.0 / self.num_views


@dataclass(frozen=True)
class LossValue:
    """Loss plus gradients mirroring the input shapes."""

    value: float
    grad_anchors: np.ndarray
    grad_positives: list


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"cosine_sim expects equal-length vectors, got {a.shape}, {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < DEGENERATE_ROW_NORM or nb < DEGENERATE_ROW_NORM:
        raise DegenerateInputError("cosine similarity of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


def _normalize_rows_strict(x: np.ndarray, what: str):
    norms = np.sqrt(np.sum(x * x, axis=1))
    if np.any(norms < DEGENERATE_ROW_NORM):
        raise DegenerateInputError(f"{what} contains a zero row")
    return x / norms[:, None], norms


def _grad_through_normalization(g_hat, x_hat, norms):
    # y = x/|x|  =>  dL/dx = (g - y (y.g)) / |x| rowwise
    inner = np.sum(x_hat * g_hat, axis=1, keepdims=True)
    return (g_hat - x_hat * inner) / norms[:, None]


def _scaled_sims(batch: ContrastiveBatch):
    """Normalized embeddings and the per-view matrices S = sim/tau."""
    a_hat, a_norms = _normalize_rows_strict(batch.anchors, "anchors")
    views = []
    for i, p in enumerate(batch.positives):
        p_hat, p_norms = _normalize_rows_strict(p, f"positive view {i}")
        s = (a_hat @ p_hat.T) / batch.temperature
        views.append((p_hat, p_norms, s))
    return a_hat, a_norms, views


def _sum_out_core(s_list, lam):
    """Sum-outside-the-log engine on pre-scaled similarity matrices.

    Returns the loss value (mean over anchors) and, per view, the
    gradient of the value with respect to that view's S matrix.
    """
    n = s_list[0].shape[0]
    value = 0.0
    ds_list = []
    for s in s_list:
        m = s.max(axis=1, keepdims=True)
        exp_s = np.exp(s - m)
        z = exp_s.sum(axis=1, keepdims=True)
        log_z = np.log(z)[:, 0] + m[:, 0]
        losses = log_z - np.diag(s)
        value = value + lam * (float(np.sum(losses)) / n)
        ds = exp_s / z
        ds[np.arange(n), np.arange(n)] -= 1.0
        ds_list.append(ds * (lam / n))
    return value, ds_list


def _sum_in_core(s_list, lam):
    """Sum-inside-the-log engine (negated similarity in the numerator)."""
    n = s_list[0].shape[0]
    log_terms = np.empty((len(s_list), n))
    softmaxes = []
    for v, s in enumerate(s_list):
        m = s.max(axis=1, keepdims=True)
        exp_s = np.exp(s - m)
        z = exp_s.sum(axis=1, keepdims=True)
        log_d = np.log(z)[:, 0] + m[:, 0]
        log_terms[v] = np.log(lam) - np.diag(s) - log_d
        softmaxes.append(exp_s / z)
    top = log_terms.max(axis=0)
    log_total = np.log(np.sum(np.exp(log_terms - top), axis=0)) + top
    losses = -log_total
    weights = np.exp(log_terms - log_total)  # softmax over views, sums to 1
    value = float(np.sum(losses)) / n
    ds_list = []
    for v, p in enumerate(softmaxes):
        ds = weights[v][:, None] * p
        ds[np.arange(n), np.arange(n)] += weights[v]
        ds_list.append(ds / n)
    return value, ds_list


def _finish(batch: ContrastiveBatch, core):
    n = batch.anchors.shape[0]
    if n < 2:
        raise InsufficientDataError(f"contrastive loss needs >= 2 rows, got {n}")
    a_hat, a_norms, views = _scaled_sims(batch)
    value, ds_list = core([s for (_, _, s) in views], batch.weight)
    tau = batch.temperature
    grad_a_hat = np.zeros_like(a_hat)
    grad_positives = []
    for (p_hat, p_norms, _), ds in zip(views, ds_list):
        dc = ds / tau
        grad_a_hat += dc @ p_hat
        gp_hat = dc.T @ a_hat
        grad_positives.append(_grad_through_normalization(gp_hat, p_hat, p_norms))
    grad_anchors = _grad_through_normalization(grad_a_hat, a_hat, a_norms)
    if not np.isfinite(value):
        raise DegenerateInputError(f"loss is non-finite: {value}")
    return LossValue(value=value, grad_anchors=grad_anchors, grad_positives=grad_positives)


def info_nce(batch: ContrastiveBatch) -> LossValue:
    """Single-positive contrastive loss with in-batch negatives."""
    if batch.num_views != 1:
        raise ShapeError(f"info_nce expects exactly one positive view, got {batch.num_views}")
    return _finish(
        ContrastiveBatch(batch.anchors, batch.positives, batch.temperature, lambda_m=1.0),
        _sum_out_core,
    )


def multi_pos_loss_sum_out(batch: ContrastiveBatch) -> LossValue:
    """Multi-positive loss: per-view softmax terms summed outside the log."""
    return _finish(batch, _sum_out_core)


def multi_pos_loss_sum_in(batch: ContrastiveBatch) -> LossValue:
    """Multi-positive loss with the view sum inside the log."""
    return _finish(batch, _sum_in_core)
