"""Minibatch training: walkback losses, Nesterov momentum, annealed rates.

Walkback computes the loss of a k-step corrupt/reconstruct random walk that
starts at a training example; every step reconstructs the original clean
example, and losses/gradients are averaged over the k steps.  Batch gradients
average walkback over the examples of a shuffled minibatch and feed a Nesterov
update (velocity from the gradient at the lookahead point).

Everything derives its randomness from the run seed through named stream
splits, keyed per (epoch, batch, example), so runs reproduce bit-for-bit.
The fit loop drives the row-stacked kernels for speed; `walkback_losses` and
`dae_walkback_losses` are the single-example reference forms, and the test
suite holds the two routes together.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import LossKind, as_vector
from .corruption import CorruptionSpec, corrupt
from .data import Dataset, minibatches
from .errors import DivergenceError
from .gradients import (
    DaeGradients,
    GaeGradients,
    dae_forward_backward,
    dae_forward_backward_batch,
    gae_forward_backward,
    gae_forward_backward_batch,
)
from .models import DaeParams, GaeParams
from .rng import RngStream


@dataclass
class Hyperparams:
    corruption: CorruptionSpec
    walkback_k: int
    lr0: float
    anneal: float
    momentum: float
    batch_size: int
    epochs: int
    loss: LossKind
    seed: int
    resample_reconstructions: bool

    def __post_init__(self):
        if self.walkback_k < 1:
            raise ValueError(f"walkback_k must be >= 1, got {self.walkback_k}")
        if self.lr0 <= 0.0:
            raise ValueError(f"lr0 must be > 0, got {self.lr0}")
        if not 0.0 < self.anneal <= 1.0:
            raise ValueError(f"anneal must be in (0, 1], got {self.anneal}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass
class OptimizerState:
    """One velocity buffer per parameter block; lr is lr0 * anneal^epoch."""

    velocity: dict[str, np.ndarray]
    epoch: int = 0
    lr: float = 0.0


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    lr: float
    wall_seconds: float


def anneal_lr(lr0: float, anneal: float, epoch: int) -> float:
    """Recomputed as a power each epoch so repeated products cannot drift."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return lr0 * anneal**epoch


def nesterov_step(
    blocks: dict[str, np.ndarray],
    velocity: dict[str, np.ndarray],
    grad_at,
    lr: float,
    momentum: float,
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """v <- mu v - lr grad(theta + mu v);  theta <- theta + v.

    `grad_at` maps a block dict (the lookahead point) to a gradient block dict.
    """
    lookahead = {name: blocks[name] + momentum * velocity[name] for name in blocks}
    grads = grad_at(lookahead)
    new_velocity = {}
    new_blocks = {}
    for name in blocks:
        g = np.asarray(grads[name], dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in block {name!r}")
        v = momentum * velocity[name] - lr * g
        new_velocity[name] = v
        new_blocks[name] = blocks[name] + v
    return new_blocks, new_velocity


def walkback_losses(
    p: GaeParams,
    x: np.ndarray,
    y: np.ndarray,
    hp: Hyperparams,
    rng: RngStream,
) -> tuple[float, GaeGradients]:
    """Mean loss and mean gradients over a k-step walkback from clean x.

    Each step corrupts the current state and reconstructs the original x;
    the next state is the reconstruction, Bernoulli-sampled when
    `resample_reconstructions` is set.  No gradient flows through sampling.
    """
    x = as_vector(x, "x")
    state = x
    k = hp.walkback_k
    loss_sum = 0.0
    acc: dict[str, np.ndarray] | None = None
    for step in range(k):
        x_tilde = corrupt(hp.corruption, state, rng)
        step_loss, xhat, grads = gae_forward_backward(p, x_tilde, y, x, hp.loss)
        loss_sum += step_loss
        if acc is None:
            acc = grads.blocks()
        else:
            for name, g in grads.blocks().items():
                acc[name] += g
        if step + 1 < k:
            state = rng.bernoulli(xhat) if hp.resample_reconstructions else xhat
    return loss_sum / k, GaeGradients(
        dwx=acc["wx"] / k,
        dwy=acc["wy"] / k,
        dwh=acc["wh"] / k,
        db_h=acc["b_h"] / k,
        db_x=acc["b_x"] / k,
    )


def dae_walkback_losses(
    p: DaeParams,
    x: np.ndarray,
    hp: Hyperparams,
    rng: RngStream,
) -> tuple[float, DaeGradients]:
    """Unconditional counterpart of walkback_losses."""
    x = as_vector(x, "x")
    state = x
    k = hp.walkback_k
    loss_sum = 0.0
    acc: dict[str, np.ndarray] | None = None
    for step in range(k):
        x_tilde = corrupt(hp.corruption, state, rng)
        step_loss, xhat, grads = dae_forward_backward(p, x_tilde, x, hp.loss)
        loss_sum += step_loss
        if acc is None:
            acc = grads.blocks()
        else:
            for name, g in grads.blocks().items():
                acc[name] += g
        if step + 1 < k:
            state = rng.bernoulli(xhat) if hp.resample_reconstructions else xhat
    return loss_sum / k, DaeGradients(
        dw=acc["w"] / k,
        db_h=acc["b_h"] / k,
        db_out=acc["b_out"] / k,
        dw_out=None if p.tied else acc["w_out"] / k,
    )


def walkback_batch(
    params: GaeParams | DaeParams,
    x_rows: np.ndarray,
    y_rows: np.ndarray | None,
    hp: Hyperparams,
    streams: list[RngStream],
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Walkback over a whole batch at once.

    Returns per-example walkback losses and the batch-mean gradient blocks.
    Each row draws corruption and resampling from its own stream, in row
    order, exactly as the single-example forms do.
    """
    b = x_rows.shape[0]
    k = hp.walkback_k
    states = x_rows
    loss_rows = np.zeros(b)
    acc: dict[str, np.ndarray] | None = None
    x_tilde = np.empty_like(x_rows)
    for step in range(k):
        for i in range(b):
            x_tilde[i] = corrupt(hp.corruption, states[i], streams[i])
        if y_rows is None:
            losses, xhat, grads = dae_forward_backward_batch(params, x_tilde, x_rows, hp.loss)
        else:
            losses, xhat, grads = gae_forward_backward_batch(params, x_tilde, y_rows, x_rows, hp.loss)
        loss_rows += losses
        if acc is None:
            acc = grads
        else:
            for name, g in grads.items():
                acc[name] += g
        if step + 1 < k:
            if hp.resample_reconstructions:
                states = np.stack([streams[i].bernoulli(xhat[i]) for i in range(b)])
            else:
                states = xhat
    return loss_rows / k, {name: g / (k * b) for name, g in acc.items()}


def fit(
    params: GaeParams | DaeParams,
    dataset: Dataset,
    hp: Hyperparams,
    on_epoch=None,
) -> list[EpochStats]:
    """Train in place; returns per-epoch stats (mean loss, lr, wall time).

    Deterministic given hp.seed.
    """
    is_gae = isinstance(params, GaeParams)
    if dataset.n_x != params.n_x:
        raise ValueError(f"dataset has n_x={dataset.n_x}, model expects {params.n_x}")
    if is_gae and dataset.n_classes != params.n_y:
        raise ValueError(
            f"dataset has {dataset.n_classes} classes, model conditions on {params.n_y}"
        )
    if dataset.n_examples == 0:
        raise ValueError("cannot fit an empty dataset")

    root = RngStream.from_seed(hp.seed)
    labels_onehot = np.eye(params.n_y)[dataset.labels] if is_gae else None
    names = params.block_names()
    state = OptimizerState(velocity={n: np.zeros_like(b) for n, b in params.blocks().items()})
    log: list[EpochStats] = []

    for epoch in range(hp.epochs):
        t0 = time.perf_counter()
        lr = anneal_lr(hp.lr0, hp.anneal, epoch)
        state.epoch, state.lr = epoch, lr
        slices = minibatches(dataset, hp.batch_size, root.split("shuffle", epoch))
        loss_sum = 0.0
        for b_idx, idx in enumerate(slices):
            streams = [root.split("walkback", epoch, b_idx, i) for i in range(len(idx))]
            x_rows = dataset.examples[idx]
            y_rows = labels_onehot[idx] if is_gae else None
            batch_losses = np.zeros(len(idx))

            def grad_at(lookahead: dict[str, np.ndarray]):
                lp = params.with_blocks(lookahead)
                losses, grads = walkback_batch(lp, x_rows, y_rows, hp, streams)
                batch_losses[:] = losses
                return grads

            try:
                new_blocks, state.velocity = nesterov_step(
                    params.blocks(), state.velocity, grad_at, lr, hp.momentum
                )
            except DivergenceError as err:
                raise DivergenceError(f"epoch {epoch}, batch {b_idx}: {err}") from err
            loss_sum += float(batch_losses.sum())
            for name in names:
                setattr(params, name, new_blocks[name])
        stats = EpochStats(
            epoch=epoch,
            mean_loss=loss_sum / dataset.n_examples,
            lr=lr,
            wall_seconds=time.perf_counter() - t0,
        )
        log.append(stats)
        if on_epoch is not None:
            on_epoch(stats)
    return log
