"""Toy differentiable encoder: 2-layer tanh MLP with inverted dropout.

Stands in for a large pretrained backbone at desk scale. Positive views
come from two augmentation sources: distinct dropout masks
(``dropout_only``), or dropout plus shuffled-group-whitening of the
encoder output followed by row normalization (``sgw``).

Whitening transforms are constants of the forward pass: gradients flow
through the whitened features linearly (per-group ``@ W``), never
through the eigendecomposition that produced ``W``. ``build_views_traced``
records everything needed to backpropagate under that convention, and
accepts pre-frozen transforms so the same objective can be evaluated at
perturbed parameters (finite-difference checks, line searches).
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateInputError, ShapeError
from .whitening import (
    DEFAULT_RIDGE_EPSILON,
    ZCA,
    GroupPlan,
    auto_ridge,
    derive_whitening,
    group_stats_from_batch,
    make_group_plan,
)

DROPOUT_ONLY = "dropout_only"
SGW = "sgw"

DEFAULT_DIM_IN = 32
DEFAULT_DIM_HIDDEN = 64
DEFAULT_DIM_OUT = 16


@dataclass(frozen=True)
class EncoderState:
    """MLP parameters. Activation is fixed to tanh."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    dropout_rate: float
    seed: int = 0

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigError(f"encoder parameter {name} is non-finite")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @classmethod
    def initialize(
        cls,
        dim_in: int = DEFAULT_DIM_IN,
        dim_hidden: int = DEFAULT_DIM_HIDDEN,
        dim_out: int = DEFAULT_DIM_OUT,
        dropout_rate: float = 0.1,
        seed: int = 0,
    ) -> "EncoderState":
        # The unit-scale output bias collapses fresh embeddings into a
        # narrow cone, so training starts from an anisotropic space the
        # way large pretrained encoders do.
        rng = np.random.default_rng(seed)
        return cls(
            w1=rng.normal(0.0, 1.0 / np.sqrt(dim_in), size=(dim_in, dim_hidden)),
            b1=np.zeros(dim_hidden),
            w2=rng.normal(0.0, 1.0 / np.sqrt(dim_hidden), size=(dim_hidden, dim_out)),
            b2=rng.normal(0.0, 1.0, size=dim_out),
            dropout_rate=dropout_rate,
            seed=int(seed),
        )

    @property
    def dim_in(self) -> int:
        return self.w1.shape[0]

    @property
    def dim_hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def dim_out(self) -> int:
        return self.w2.shape[1]


@dataclass
class ForwardTrace:
    """Intermediates of one forward pass, for exact backprop."""

    inputs: np.ndarray
    hidden: np.ndarray  # tanh activations, pre-dropout
    mask: np.ndarray | None  # inverted-dropout mask, None when rate is 0
    dropped: np.ndarray
    outputs: np.ndarray


@dataclass
class ParamGrads:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def zeros_like(cls, state: EncoderState) -> "ParamGrads":
        return cls(
            np.zeros_like(state.w1),
            np.zeros_like(state.b1),
            np.zeros_like(state.w2),
            np.zeros_like(state.b2),
        )

    def __iadd__(self, other: "ParamGrads") -> "ParamGrads":
        self.w1 += other.w1
        self.b1 += other.b1
        self.w2 += other.w2
        self.b2 += other.b2
        return self


def forward(state: EncoderState, x: np.ndarray, mask_seed: int = 0):
    """Run the MLP with an inverted-dropout mask drawn from ``mask_seed``.

    Deterministic in (state, x, mask_seed). With dropout_rate 0 no RNG is
    consumed at all, so the output is independent of the seed.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != state.dim_in:
        raise ShapeError(f"input shape {x.shape} does not match dim_in {state.dim_in}")
    hidden = np.tanh(x @ state.w1 + state.b1)
    rate = state.dropout_rate
    if rate > 0.0:
        rng = np.random.default_rng(mask_seed)
        mask = (rng.random(hidden.shape) >= rate) / (1.0 - rate)
        dropped = hidden * mask
    else:
        mask = None
        dropped = hidden
    outputs = dropped @ state.w2 + state.b2
    return outputs, ForwardTrace(x, hidden, mask, dropped, outputs)


def forward_eval(state: EncoderState, x: np.ndarray) -> np.ndarray:
    """Forward pass with dropout disabled (inverted dropout: no rescale)."""
    eval_state = replace(state, dropout_rate=0.0)
    out, _ = forward(eval_state, x)
    return out


def backward(trace: ForwardTrace, state: EncoderState, grad_out: np.ndarray) -> ParamGrads:
    """Exact parameter gradients of the traced pass, mask reused as traced."""
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != trace.outputs.shape:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match outputs {trace.outputs.shape}"
        )
    if trace.dropped.shape[1] != state.dim_hidden or trace.inputs.shape[1] != state.dim_in:
        raise ShapeError("trace does not belong to this encoder state")
    g_w2 = trace.dropped.T @ grad_out
    g_b2 = grad_out.sum(axis=0)
    g_dropped = grad_out @ state.w2.T
    g_hidden = g_dropped if trace.mask is None else g_dropped * trace.mask
    g_pre = g_hidden * (1.0 - trace.hidden * trace.hidden)
    g_w1 = trace.inputs.T @ g_pre
    g_b1 = g_pre.sum(axis=0)
    return ParamGrads(g_w1, g_b1, g_w2, g_b2)


def sgd_step(state: EncoderState, grads: ParamGrads, lr: float) -> EncoderState:
    """Plain gradient descent: theta <- theta - lr * grad."""
    if not lr > 0.0:
        raise ConfigError(f"learning rate must be > 0, got {lr}")
    return replace(
        state,
        w1=state.w1 - lr * grads.w1,
        b1=state.b1 - lr * grads.b1,
        w2=state.w2 - lr * grads.w2,
        b2=state.b2 - lr * grads.b2,
    )


@dataclass
class ViewTransform:
    """Frozen per-view whitening: plan plus per-group (mean, W)."""

    plan: GroupPlan
    means: list
    mats: list


@dataclass
class ViewTrace:
    forward_trace: ForwardTrace
    transform: ViewTransform | None
    view_hat: np.ndarray | None  # normalized rows (sgw only)
    row_norms: np.ndarray | None


def view_seeds(base_seed: int, index: int):
    """(mask_seed, plan_seed) for the ``index``-th view, stable in base_seed."""
    state = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(2)
    return int(state[0]), int(state[1])


def _freeze_transform(
    z: np.ndarray, plan: GroupPlan, ridge_epsilon: float
) -> ViewTransform:
    stats = group_stats_from_batch(z, plan)
    ridge = max(auto_ridge(s, z.shape[0], ridge_epsilon) for s in stats)
    return ViewTransform(
        plan=plan,
        means=[s.mean for s in stats],
        mats=[derive_whitening(s, ZCA, ridge).w for s in stats],
    )


def apply_view_transform(z: np.ndarray, vt: ViewTransform) -> np.ndarray:
    """Whiten with frozen per-group transforms (no re-estimation)."""
    plan = vt.plan
    g = plan.group_size
    permuted = z[:, plan.permutation]
    out_permuted = np.empty_like(permuted)
    for i in range(plan.num_groups):
        block = permuted[:, i * g : (i + 1) * g]
        out_permuted[:, i * g : (i + 1) * g] = (block - vt.means[i]) @ vt.mats[i].T
    out = np.empty_like(out_permuted)
    out[:, plan.permutation] = out_permuted
    return out


def _view_transform_backward(grad_out: np.ndarray, vt: ViewTransform) -> np.ndarray:
    plan = vt.plan
    g = plan.group_size
    gh = grad_out[:, plan.permutation]
    gz_permuted = np.empty_like(gh)
    for i in range(plan.num_groups):
        gz_permuted[:, i * g : (i + 1) * g] = gh[:, i * g : (i + 1) * g] @ vt.mats[i]
    gz = np.empty_like(gz_permuted)
    gz[:, plan.permutation] = gz_permuted
    return gz


def build_views_traced(
    state: EncoderState,
    x: np.ndarray,
    m: int,
    aug: str = SGW,
    group_size: int | None = None,
    seed: int = 0,
    ridge_epsilon: float = DEFAULT_RIDGE_EPSILON,
    transforms: list | None = None,
):
    """Produce ``m`` positive views plus the traces needed for backprop.

    ``transforms`` injects frozen whitening transforms (one per view, or
    None entries for dropout views); when omitted they are estimated from
    each view's own batch. Returns (views, traces, transforms).
    """
    if m < 1:
        raise ConfigError(f"need at least one view, got m={m}")
    if aug not in (DROPOUT_ONLY, SGW):
        raise ConfigError(f"unknown augmentation kind {aug!r}")
    if aug == SGW:
        if group_size is None:
            raise ConfigError("sgw augmentation requires a group size")
        if state.dim_out % group_size != 0:
            raise ConfigError(
                f"group_size {group_size} does not divide encoder output dim "
                f"{state.dim_out}"
            )
    views = []
    traces = []
    frozen = []
    for j in range(m):
        mask_seed, plan_seed = view_seeds(seed, j)
        z, ftrace = forward(state, x, mask_seed)
        if aug == DROPOUT_ONLY:
            views.append(z)
            traces.append(ViewTrace(ftrace, None, None, None))
            frozen.append(None)
            continue
        if transforms is not None:
            vt = transforms[j]
        else:
            plan = make_group_plan(state.dim_out, group_size, shuffled=True, seed=plan_seed)
            vt = _freeze_transform(z, plan, ridge_epsilon)
        h = apply_view_transform(z, vt)
        norms = np.sqrt(np.sum(h * h, axis=1))
        if np.any(norms < 1e-12):
            raise DegenerateInputError("whitened view contains a zero row")
        v_hat = h / norms[:, None]
        views.append(v_hat)
        traces.append(ViewTrace(ftrace, vt, v_hat, norms))
        frozen.append(vt)
    return views, traces, frozen


def build_views(
    state: EncoderState,
    x: np.ndarray,
    m: int,
    aug: str = SGW,
    group_size: int | None = None,
    seed: int = 0,
    ridge_epsilon: float = DEFAULT_RIDGE_EPSILON,
) -> list:
    """The views alone (see ``build_views_traced``)."""
    views, _, _ = build_views_traced(state, x, m, aug, group_size, seed, ridge_epsilon)
    return views


def views_backward(state: EncoderState, traces: list, view_grads: list) -> ParamGrads:
    """Accumulate parameter gradients from per-view gradients.

    Whitening transforms are constants: each view's gradient is mapped
    back through row normalization (if any), the fixed per-group linear
    maps, and the encoder trace.
    """
    if len(traces) != len(view_grads):
        raise ShapeError(f"{len(traces)} traces but {len(view_grads)} gradients")
    total = ParamGrads.zeros_like(state)
    for trace, grad in zip(traces, view_grads):
        grad = np.asarray(grad, dtype=np.float64)
        if trace.transform is not None:
            inner = np.sum(trace.view_hat * grad, axis=1, keepdims=True)
            grad = (grad - trace.view_hat * inner) / trace.row_norms[:, None]
            grad = _view_transform_backward(grad, trace.transform)
        total += backward(trace.forward_trace, state, grad)
    return total
