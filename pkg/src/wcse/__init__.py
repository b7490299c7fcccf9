"""Shuffled group whitening fused with multi-positive contrastive learning.

A desk-scale numerical library: dense linear algebra with a Jacobi
eigensolver, PCA/ZCA/group/shuffled-group whitening with momentum
statistics, multi-positive contrastive losses with analytic gradients,
alignment/uniformity/Spearman diagnostics, a toy MLP encoder, and a CLI
that ties them into reproducible training and ablation runs.
"""

from ._accel import backend_name
from .config import TrainConfig, config_from_text, config_to_text, load_config, save_config
from .data import PairHarness, SyntheticDataset, generate_synthetic, make_pair_harness
from .embfile import read_embeddings, write_embeddings
from .encoder import (
    EncoderState,
    ForwardTrace,
    ParamGrads,
    backward,
    build_views,
    build_views_traced,
    forward,
    forward_eval,
    sgd_step,
    views_backward,
)
from .checkpoint import EvalWhitening, load_checkpoint, save_checkpoint
from .linalg import (
    EigenDecomposition,
    covariance,
    l2_normalize_rows,
    matmul,
    sym_eig,
)
from .losses import (
    ContrastiveBatch,
    LossValue,
    cosine_sim,
    info_nce,
    multi_pos_loss_sum_in,
    multi_pos_loss_sum_out,
)
from .metrics import alignment_loss, spearman, uniformity_loss
from .pipeline import TrainResult, evaluate, train_run, whiten_embeddings
from .whitening import (
    GroupPlan,
    WhiteningMatrix,
    WhiteningStats,
    apply_whitening,
    derive_whitening,
    group_whiten,
    make_group_plan,
    sgw_augment,
    update_stats,
)

__version__ = "0.1.0"
