"""Denoising and class-conditional gated autoencoders as generative models.

Train with the denoising/walkback criterion (hand-derived gradients, Nesterov
momentum), then sample by running a Markov chain that alternates the learned
reconstruction with the corruption process, conditioned on a one-hot label.
"""

import os as _os

# CCGAE_THREADS caps worker parallelism; the numeric kernels parallelize via
# BLAS, whose thread pools read these variables at first import.
if "CCGAE_THREADS" in _os.environ and _os.environ["CCGAE_THREADS"].isdigit():
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["CCGAE_THREADS"])

from .core import EPS_CLIP, Activation, LossKind, activate, hadamard, loss_value, matvec
from .corruption import CorruptionKind, CorruptionSpec, corrupt
from .data import (
    Dataset,
    binarize,
    load_idx_images,
    load_idx_labels,
    load_raw_dataset,
    minibatches,
    one_hot,
    save_raw_dataset,
    write_idx_images,
    write_idx_labels,
)
from .errors import ConfigError, DivergenceError, FormatError
from .gradients import (
    DaeGradients,
    GaeGradients,
    dae_backward,
    dae_finite_diff_errors,
    finite_diff_check,
    gae_backward,
    gae_finite_diff_errors,
)
from .models import (
    DaeParams,
    GaeParams,
    NaiveGatedParams,
    dae_decode,
    dae_encode,
    dae_reconstruct,
    gae_decode_x,
    gae_encode,
    gae_reconstruct,
    init_dae,
    init_gae,
    load_checkpoint,
    load_dae,
    load_gae,
    naive_gated_encode,
    naive_gated_weights,
    save_dae,
    save_gae,
)
from .rng import RngStream
from .sampling import (
    ChainConfig,
    ChainInit,
    ChainTrace,
    OutputMode,
    chain_step,
    load_trace_expected,
    run_chain,
    save_trace,
)
from .training import (
    EpochStats,
    Hyperparams,
    OptimizerState,
    anneal_lr,
    dae_walkback_losses,
    fit,
    nesterov_step,
    walkback_losses,
)

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "ChainConfig",
    "ChainInit",
    "ChainTrace",
    "ConfigError",
    "CorruptionKind",
    "CorruptionSpec",
    "DaeGradients",
    "DaeParams",
    "Dataset",
    "DivergenceError",
    "EPS_CLIP",
    "EpochStats",
    "FormatError",
    "GaeGradients",
    "GaeParams",
    "Hyperparams",
    "LossKind",
    "NaiveGatedParams",
    "OptimizerState",
    "OutputMode",
    "RngStream",
    "activate",
    "anneal_lr",
    "binarize",
    "chain_step",
    "corrupt",
    "dae_backward",
    "dae_decode",
    "dae_encode",
    "dae_finite_diff_errors",
    "dae_reconstruct",
    "dae_walkback_losses",
    "finite_diff_check",
    "fit",
    "gae_backward",
    "gae_decode_x",
    "gae_encode",
    "gae_finite_diff_errors",
    "gae_reconstruct",
    "hadamard",
    "init_dae",
    "init_gae",
    "load_checkpoint",
    "load_dae",
    "load_gae",
    "load_idx_images",
    "load_idx_labels",
    "load_raw_dataset",
    "load_trace_expected",
    "loss_value",
    "matvec",
    "minibatches",
    "naive_gated_encode",
    "naive_gated_weights",
    "nesterov_step",
    "one_hot",
    "run_chain",
    "save_dae",
    "save_gae",
    "save_raw_dataset",
    "save_trace",
    "walkback_losses",
    "write_idx_images",
    "write_idx_labels",
]
