"""Loss, optimizer, learning-rate schedule, training loop, grid search.

Every stochastic step is driven by a named seed, so the whole loop is a
deterministic function of (train set, config, seeds): shuffling uses
(shuffle_seed, epoch), dropout masks use (dropout_seed, epoch, batch).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import evaluation
from .corpus import Corpus, FeatureStore
from .dataset import TrainSet, build_train_set, make_dev_split
from .model import (
    ElvisModel,
    ModelConfig,
    backward_batch,
    check_finite,
    forward_batch,
    init_model,
    predict_scores,
)

DEFAULT_LR_GRID = (5e-3, 1e-3, 5e-4, 1e-4, 5e-5)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 1024
    base_lr: float = 1e-3
    lr_grid: tuple = DEFAULT_LR_GRID
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    num_periods: float = 0.5
    sched_alpha: float = 0.0
    sched_beta: float = 0.001
    shuffle_seed: int = 0
    dropout_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.base_lr <= 0 or any(lr <= 0 for lr in self.lr_grid):
            raise ValueError("learning rates must be positive")


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0


def bce_loss(p: float, label: int) -> float:
    """Binary cross-entropy of one probability strictly inside (0, 1)."""
    if label == 1:
        return -math.log(p)
    return -math.log(1.0 - p)


def bce_loss_mean(p, labels) -> float:
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def lr_at(t: int, total_steps: int, base_lr: float, num_periods: float = 0.5,
          alpha: float = 0.0, beta: float = 0.001) -> float:
    """Linear cosine decay of the learning rate.

    lr(t) = base_lr * ((alpha + linear) * cosine + beta) with
    linear = (T - t)/T and cosine = 0.5*(1 + cos(pi * 2*num_periods * t/T)),
    t clamped to [0, T].
    """
    if total_steps < 1:
        raise ValueError("total_steps must be >= 1")
    t = min(max(t, 0), total_steps)
    linear = (total_steps - t) / total_steps
    cosine = 0.5 * (1.0 + math.cos(math.pi * 2.0 * num_periods * t / total_steps))
    return base_lr * ((alpha + linear) * cosine + beta)


def init_adam_state(params: dict) -> AdamState:
    return AdamState(
        m={name: np.zeros_like(arr) for name, arr in params.items()},
        v={name: np.zeros_like(arr) for name, arr in params.items()},
        t=0,
    )


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update, in place.  Fails fast on non-finite gradients."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name!r}")
    state.t += 1
    t = state.t
    bias1 = 1.0 - beta1 ** t
    bias2 = 1.0 - beta2 ** t
    for name, theta in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        m_hat = m / bias1
        v_hat = v / bias2
        theta -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params, state


@dataclass
class _IndexedPairs:
    user_indices: np.ndarray
    photo_rows: np.ndarray
    labels: np.ndarray
    features: np.ndarray


def _index_pairs(model: ElvisModel, train_set: TrainSet, store: FeatureStore) -> _IndexedPairs:
    photo_ids = sorted({pair.photo_id for pair in train_set.pairs})
    row_of = {pid: i for i, pid in enumerate(photo_ids)}
    features = np.stack([store[pid] for pid in photo_ids]).astype(model.dtype)
    user_indices = np.fromiter(
        (model.user_index(pair.user_id) for pair in train_set.pairs),
        dtype=np.int64, count=len(train_set.pairs),
    )
    photo_rows = np.fromiter(
        (row_of[pair.photo_id] for pair in train_set.pairs),
        dtype=np.int64, count=len(train_set.pairs),
    )
    labels = np.fromiter(
        (pair.label for pair in train_set.pairs), dtype=np.float64, count=len(train_set.pairs)
    )
    return _IndexedPairs(user_indices, photo_rows, labels, features)


def train(model: ElvisModel, train_set: TrainSet, store: FeatureStore,
          config: TrainConfig):
    """Run the full training loop; returns (model, per-epoch history).

    The model is updated in place.  History rows are dicts with keys
    epoch, mean_loss, lr_at_epoch_start.
    """
    if not train_set.pairs:
        raise ValueError("empty train set")
    data = _index_pairs(model, train_set, store)
    n = len(train_set.pairs)
    batches_per_epoch = (n + config.batch_size - 1) // config.batch_size
    total_steps = config.epochs * batches_per_epoch

    params = model.params()
    state = init_adam_state(params)
    history = []
    step = 0
    for epoch in range(config.epochs):
        lr_start = lr_at(step, total_steps, config.base_lr, config.num_periods,
                         config.sched_alpha, config.sched_beta)
        perm = np.random.default_rng([config.shuffle_seed, epoch]).permutation(n)
        loss_sum = 0.0
        for b in range(batches_per_epoch):
            sel = perm[b * config.batch_size: (b + 1) * config.batch_size]
            x = data.features[data.photo_rows[sel]]
            y = data.labels[sel]
            lr = lr_at(step, total_steps, config.base_lr, config.num_periods,
                       config.sched_alpha, config.sched_beta)
            dropout_rng = np.random.default_rng([config.dropout_seed, epoch, b])
            p, cache = forward_batch(model, data.user_indices[sel], x,
                                     mode="train", dropout_rng=dropout_rng)
            batch_loss = bce_loss_mean(p, y)
            if not math.isfinite(batch_loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch} batch {b}")
            loss_sum += batch_loss * len(sel)
            grads = backward_batch(model, cache, y)
            adam_step(params, grads, state, lr, config.beta1, config.beta2, config.eps)
            check_finite(model)
            step += 1
        history.append(
            {"epoch": epoch, "mean_loss": loss_sum / n, "lr_at_epoch_start": lr_start,
             "steps": step}
        )
    return model, history


def write_history(history: list, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss,lr_at_epoch_start\n")
        for row in history:
            fh.write(f"{row['epoch']},{row['mean_loss']!r},{row['lr_at_epoch_start']!r}\n")


def _dev_median_percentile(model: ElvisModel, dev_cases, store: FeatureStore) -> tuple:
    percentiles = []
    for case in dev_cases:
        scorer_pairs = [(model.user_index(case.user_id), pid)
                        for pid in case.candidate_photo_ids]
        scores = predict_scores(model, scorer_pairs, store)
        ranking = evaluation.rank_candidates(
            dict(zip(case.candidate_photo_ids, scores)), case.positive_photo_id
        )
        percentiles.append(evaluation.percentile(ranking.index_of_positive, ranking.size))
    return float(np.median(percentiles)), float(np.mean(percentiles))


def grid_search(train_corpus: Corpus, store: FeatureStore, model_config: ModelConfig,
                train_config: TrainConfig, split_seed: int = 0, sample_seed: int = 0):
    """Pick the best learning rate on a development split of the training data.

    For every lr in the grid, a model is trained on the reduced training
    corpus and scored on the held-out development cases; the lr with the
    lowest median percentile wins (first in grid order on ties).  Runs
    that diverge are kept in the report with an infinite metric.  The
    caller retrains on the full training corpus with the winner.
    """
    if not train_config.lr_grid:
        raise ValueError("empty learning-rate grid")
    subtrain, dev_cases = make_dev_split(train_corpus, split_seed)
    if not dev_cases:
        raise ValueError("development split yields no test cases")
    dev_train_set = build_train_set(subtrain, sample_seed)
    user_ids = tuple(sorted(subtrain.users))

    rows = []
    best_lr = None
    best_key = None
    for pos, lr in enumerate(train_config.lr_grid):
        cfg = replace(train_config, base_lr=lr)
        model = init_model(replace(model_config, num_users=len(user_ids)), user_ids=user_ids)
        try:
            # divergence is an anticipated outcome here, not a numerics bug
            with np.errstate(over="ignore", invalid="ignore"):
                train(model, dev_train_set, store, cfg)
            median, mean = _dev_median_percentile(model, dev_cases, store)
            status = "ok"
        except FloatingPointError:
            median, mean = math.inf, math.inf
            status = "diverged"
        rows.append(
            {"lr": lr, "median_percentile": median, "mean_percentile": mean,
             "cases": len(dev_cases), "status": status}
        )
        key = (median, pos)
        if best_key is None or key < best_key:
            best_key = key
            best_lr = lr
    return best_lr, rows


def write_grid_report(rows: list, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lr,median_percentile,mean_percentile,cases,status\n")
        for row in rows:
            fh.write(
                f"{row['lr']!r},{row['median_percentile']!r},"
                f"{row['mean_percentile']!r},{row['cases']},{row['status']}\n"
            )
