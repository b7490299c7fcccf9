"""Training and evaluation loops, report files, whiten/ablate commands.

Reports are line-delimited records of comma-separated ``key=value``
pairs: one record per evaluation (step, train loss, alignment,
uniformity, Spearman) followed by a single summary record. Floats are
serialized with ``repr`` so identical runs produce byte-identical files.

Every stochastic choice is drawn from a seed derived statelessly from
(master seed, channel, step), so runs are reproducible and the sequence
of draws cannot shift when the loop structure changes.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .checkpoint import EvalWhitening, checkpoint_to_bytes
from .config import TrainConfig
from .data import SyntheticDataset, generate_synthetic, make_pair_harness, pair_cosines
from .embfile import read_embeddings, write_embeddings
from .encoder import EncoderState, build_views_traced, forward_eval, sgd_step, views_backward
from .errors import ConfigError, DegenerateInputError, NumericError, ShapeError
from .linalg import l2_normalize_rows
from .losses import ContrastiveBatch, multi_pos_loss_sum_in, multi_pos_loss_sum_out
from .metrics import alignment_loss, spearman, uniformity_loss
from .whitening import (
    PCA,
    ZCA,
    WhiteningStats,
    auto_ridge,
    derive_whitening,
    apply_whitening,
    group_stats_from_batch,
    group_whiten,
    make_group_plan,
    stats_from_batch,
    update_stats,
)

# Seed channels, combined as SeedSequence([seed, channel, ...]).
_CH_INIT = 0
_CH_BATCH = 1
_CH_VIEWS = 2
_CH_TRAIN_DATA = 0
_CH_DEV_DATA = 1
_CH_PAIRS = 2

WHITEN_KINDS = ("pca", "zca", "group", "sgw")
SWEEPABLE = ("group_size", "num_positives", "loss_kind", "aug_kind")


def derive_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# report records


def format_record(pairs) -> str:
    out = []
    for key, value in pairs:
        if isinstance(value, float):
            out.append(f"{key}={value!r}")
        else:
            out.append(f"{key}={value}")
    return ",".join(out)


def parse_record(line: str) -> dict:
    record = {}
    for part in line.strip().split(","):
        if "=" not in part:
            raise ConfigError(f"malformed report field {part!r}")
        key, value = part.split("=", 1)
        record[key] = value
    return record


def parse_report_text(text: str) -> list:
    """All records, validated: eval steps must be strictly increasing."""
    records = [parse_record(line) for line in text.splitlines() if line.strip()]
    last_step = -1
    for rec in records:
        if "step" in rec:
            step = int(rec["step"])
            if step <= last_step:
                raise ConfigError(f"report steps not increasing at step {step}")
            last_step = step
    return records


@dataclass
class EvalRecord:
    step: int
    train_loss: float
    alignment: float
    uniformity: float
    spearman: float

    def to_line(self) -> str:
        return format_record(
            [
                ("step", self.step),
                ("train_loss", self.train_loss),
                ("alignment", self.alignment),
                ("uniformity", self.uniformity),
                ("spearman", self.spearman),
            ]
        )


@dataclass
class TrainResult:
    records: list
    best_step: int
    best_spearman: float
    checkpoint_bytes: bytes
    report_text: str


# ---------------------------------------------------------------------------
# data plumbing


def build_datasets(cfg: TrainConfig, train_x: np.ndarray | None = None):
    """(train inputs, dev dataset, pair harness) for a config.

    Training inputs may come from an embedding file; the dev split and its
    graded-pair harness are always synthesized from the config so labels
    and centers are known.
    """
    if train_x is None:
        train_x = generate_synthetic(
            cfg.data_clusters,
            cfg.data_per_cluster,
            cfg.encoder_dim_in,
            cfg.data_noise,
            derive_seed(cfg.data_seed, _CH_TRAIN_DATA),
        ).x
    else:
        train_x = np.asarray(train_x, dtype=np.float64)
        if train_x.ndim != 2 or train_x.shape[1] != cfg.encoder_dim_in:
            raise ShapeError(
                f"training data shape {train_x.shape} does not match "
                f"encoder_dim_in {cfg.encoder_dim_in}"
            )
        if train_x.shape[0] < cfg.batch_size:
            raise ConfigError(
                f"training data has {train_x.shape[0]} rows, "
                f"batch_size is {cfg.batch_size}"
            )
    dev = generate_synthetic(
        cfg.data_clusters,
        cfg.dev_per_cluster,
        cfg.encoder_dim_in,
        cfg.data_noise,
        derive_seed(cfg.data_seed, _CH_DEV_DATA),
    )
    harness = make_pair_harness(dev, cfg.num_eval_pairs, derive_seed(cfg.data_seed, _CH_PAIRS))
    return train_x, dev, harness


# ---------------------------------------------------------------------------
# evaluation


def eval_embeddings(state: EncoderState, whit: EvalWhitening | None, x: np.ndarray) -> np.ndarray:
    """Eval-time embeddings: dropout off, fixed identity-plan whitening
    with running stats (when trained with sgw), rows L2-normalized."""
    raw = forward_eval(state, x)
    if whit is not None:
        plan = make_group_plan(state.dim_out, whit.group_size, shuffled=False)
        raw = group_whiten(raw, plan, whit.stats, ZCA, ridge=0.0)
    emb, degenerate = l2_normalize_rows(raw, return_flags=True)
    if np.any(degenerate):
        raise DegenerateInputError(
            f"{int(degenerate.sum())} embedding rows collapsed to zero norm"
        )
    return emb


def evaluate(
    state: EncoderState,
    whit: EvalWhitening | None,
    dev: SyntheticDataset,
    harness,
):
    """(alignment, uniformity, spearman) of the encoder on the dev split."""
    emb = eval_embeddings(state, whit, dev.x)
    align = alignment_loss(
        [(emb[a], emb[b]) for a, b in zip(harness.align_a, harness.align_b)]
    )
    unif = uniformity_loss(emb)
    rho = spearman(harness.gold, pair_cosines(emb, harness.idx_a, harness.idx_b))
    return align, unif, rho


# ---------------------------------------------------------------------------
# training


def _loss_fn(cfg: TrainConfig):
    return multi_pos_loss_sum_out if cfg.loss_kind == "sum_out" else multi_pos_loss_sum_in


def step_loss_and_grads(cfg: TrainConfig, state: EncoderState, x_batch, step_seed, transforms=None):
    """One training objective evaluation: views -> multi-positive loss ->
    parameter gradients (whitening transforms held fixed)."""
    views, traces, frozen = build_views_traced(
        state,
        x_batch,
        cfg.num_positives,
        cfg.aug_kind,
        cfg.group_size,
        seed=step_seed,
        ridge_epsilon=cfg.ridge,
        transforms=transforms,
    )
    batch = ContrastiveBatch(
        anchors=views[0],
        positives=views[1:],
        temperature=cfg.temperature,
        lambda_m=cfg.lambda_m,
    )
    lv = _loss_fn(cfg)(batch)
    grads = views_backward(state, traces, [lv.grad_anchors] + lv.grad_positives)
    return lv.value, grads, traces, frozen


def train_run(cfg: TrainConfig, train_x: np.ndarray | None = None) -> TrainResult:
    """Full training loop; returns records, report text, best checkpoint."""
    cfg.validate()
    train_x, dev, harness = build_datasets(cfg, train_x)
    n = train_x.shape[0]
    state = EncoderState.initialize(
        cfg.encoder_dim_in,
        cfg.encoder_dim_hidden,
        cfg.encoder_dim_out,
        cfg.dropout_rate,
        derive_seed(cfg.seed, _CH_INIT),
    )
    whit = None
    if cfg.aug_kind == "sgw":
        whit = EvalWhitening(
            group_size=cfg.group_size,
            momentum=cfg.momentum,
            ridge_epsilon=cfg.ridge,
            stats=[],
        )

    def batch_at(step: int) -> np.ndarray:
        rng = np.random.default_rng(derive_seed(cfg.seed, _CH_BATCH, step))
        return train_x[rng.choice(n, size=cfg.batch_size, replace=False)]

    def fold_stats(raw_z: np.ndarray) -> None:
        g = cfg.group_size
        groups = [raw_z[:, i * g : (i + 1) * g] for i in range(state.dim_out // g)]
        if not whit.stats:
            whit.stats = [WhiteningStats.empty(g, cfg.momentum) for _ in groups]
        whit.stats = [update_stats(s, gz) for s, gz in zip(whit.stats, groups)]

    records = []
    best = None  # (spearman, step, checkpoint bytes)

    def run_eval(step: int, train_loss: float) -> None:
        nonlocal best
        align, unif, rho = evaluate(state, whit, dev, harness)
        records.append(EvalRecord(step, float(train_loss), align, unif, rho))
        if best is None or rho > best[0]:
            best = (rho, step, checkpoint_to_bytes(state, whit))

    # Step-0 probe: loss of the first batch without touching parameters;
    # for sgw it also primes the running stats so the initial evaluation
    # can whiten.
    probe_value, _, probe_traces, _ = step_loss_and_grads(
        cfg, state, batch_at(0), derive_seed(cfg.seed, _CH_VIEWS, 0)
    )
    if whit is not None:
        fold_stats(probe_traces[0].forward_trace.outputs)
    run_eval(0, probe_value)

    for step in range(1, cfg.steps + 1):
        value, grads, traces, _ = step_loss_and_grads(
            cfg, state, batch_at(step), derive_seed(cfg.seed, _CH_VIEWS, step)
        )
        if not np.isfinite(value):
            raise NumericError(f"training loss became non-finite at step {step}")
        if whit is not None:
            fold_stats(traces[0].forward_trace.outputs)
        state = sgd_step(state, grads, cfg.learning_rate)
        if step % cfg.eval_every == 0 or step == cfg.steps:
            run_eval(step, value)

    lines = [rec.to_line() for rec in records]
    lines.append(
        format_record(
            [
                ("best_step", best[1]),
                ("best_spearman", best[0]),
                ("final_step", cfg.steps),
            ]
        )
    )
    return TrainResult(
        records=records,
        best_step=best[1],
        best_spearman=best[0],
        checkpoint_bytes=best[2],
        report_text="\n".join(lines) + "\n",
    )


# ---------------------------------------------------------------------------
# whiten command core


def whiten_embeddings(x: np.ndarray, kind: str, group_size: int, ridge_epsilon: float, seed: int):
    """Whiten a whole embedding matrix with its own statistics.

    Returns (whitened matrix, uniformity before, uniformity after);
    uniformity is measured on row-normalized copies.
    """
    if kind not in WHITEN_KINDS:
        raise ConfigError(f"kind must be one of {WHITEN_KINDS}, got {kind!r}")
    x = np.asarray(x, dtype=np.float64)
    normed, degenerate = l2_normalize_rows(x, return_flags=True)
    if np.any(degenerate):
        raise DegenerateInputError("input embeddings contain zero rows")
    before = uniformity_loss(normed)
    if kind in (PCA, ZCA):
        stats = stats_from_batch(x)
        ridge = auto_ridge(stats, x.shape[0], ridge_epsilon)
        out = apply_whitening(x, stats, derive_whitening(stats, kind, ridge))
    else:
        if group_size < 1 or x.shape[1] % group_size != 0:
            raise ConfigError(
                f"group_size {group_size} does not divide embedding dim {x.shape[1]}"
            )
        plan = make_group_plan(x.shape[1], group_size, shuffled=(kind == "sgw"), seed=seed)
        stats = group_stats_from_batch(x, plan)
        ridge = max(auto_ridge(s, x.shape[0], ridge_epsilon) for s in stats)
        out = group_whiten(x, plan, stats, ZCA, ridge)
    out_normed, degenerate = l2_normalize_rows(out, return_flags=True)
    if np.any(degenerate):
        raise DegenerateInputError("whitened embeddings contain zero rows")
    after = uniformity_loss(out_normed)
    return out, before, after


def run_whiten_command(input_path, output_path, kind, group_size, ridge_epsilon, seed):
    x = read_embeddings(input_path)
    out, before, after = whiten_embeddings(x, kind, group_size, ridge_epsilon, seed)
    write_embeddings(output_path, out)
    return before, after


# ---------------------------------------------------------------------------
# ablation sweeps


def sweep_configs(cfg: TrainConfig, key: str, raw_values: list):
    if key not in SWEEPABLE:
        raise ConfigError(f"sweep key must be one of {SWEEPABLE}, got {key!r}")
    out = []
    for raw in raw_values:
        value = int(raw) if key in ("group_size", "num_positives") else str(raw)
        out.append((value, dataclasses.replace(cfg, **{key: value}).validate()))
    return out


def ablate_line(key: str, value, result: TrainResult) -> str:
    final = result.records[-1]
    return format_record(
        [
            (key, value),
            ("final_step", final.step),
            ("train_loss", final.train_loss),
            ("alignment", final.alignment),
            ("uniformity", final.uniformity),
            ("spearman", final.spearman),
            ("best_step", result.best_step),
            ("best_spearman", result.best_spearman),
        ]
    )
