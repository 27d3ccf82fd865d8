"""Authorship probability network with hand-written forward and backward.

Topology per example: a learned user embedding is concatenated to a
linear projection of the photo feature vector, fed through one hidden
block (fully connected, ReLU, inverted dropout) and a final linear layer,
then squashed with a sigmoid into the authorship probability.

Parameters live in float32.  The pre-sigmoid value is clamped to +-30 and
the sigmoid itself is evaluated in float64, so the returned probability
is always strictly inside (0, 1).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CHECKPOINT_MAGIC = b"ELVM"
CHECKPOINT_VERSION = 1
LOGIT_CLAMP = 30.0

PARAM_NAMES = ("user_embeddings", "proj_w", "proj_b", "head1_w", "head1_b", "out_w", "out_b")


@dataclass(frozen=True)
class ModelConfig:
    num_users: int
    feature_dim: int = 1536
    embed_dim: int = 256
    hidden_dim: int = 512
    dropout_rate: float = 0.2
    embed_init_scale: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.num_users <= 0:
            raise ValueError("num_users must be positive")
        if min(self.feature_dim, self.embed_dim, self.hidden_dim) <= 0:
            raise ValueError("all dimensions must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass
class ElvisModel:
    config: ModelConfig
    user_embeddings: np.ndarray
    proj_w: np.ndarray
    proj_b: np.ndarray
    head1_w: np.ndarray
    head1_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray
    user_ids: Optional[tuple[str, ...]] = None
    _user_index: Optional[dict] = field(default=None, repr=False)

    def params(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @property
    def dtype(self):
        return self.user_embeddings.dtype

    def astype(self, dtype) -> "ElvisModel":
        kwargs = {name: getattr(self, name).astype(dtype) for name in PARAM_NAMES}
        return ElvisModel(config=self.config, user_ids=self.user_ids, **kwargs)

    def user_index(self, user_id: str) -> int:
        if self.user_ids is None:
            raise ValueError("model carries no user id table")
        if self._user_index is None:
            object.__setattr__(
                self, "_user_index", {u: i for i, u in enumerate(self.user_ids)}
            )
        try:
            return self._user_index[user_id]
        except KeyError:
            raise KeyError(f"user {user_id!r} unknown to the model") from None


@dataclass
class ForwardCache:
    """Intermediate activations kept for the backward pass (train mode only)."""

    user_index: int
    x: np.ndarray
    z: np.ndarray
    hidden_pre: np.ndarray
    hidden_dropped: np.ndarray
    dropout_mask: Optional[np.ndarray]
    dropout_scale: float
    p: float


def _glorot(rng, fan_in, fan_out, shape, dtype):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_model(config: ModelConfig, user_ids=None) -> ElvisModel:
    """Seeded initialization: uniform weights, zero biases."""
    if user_ids is not None:
        user_ids = tuple(user_ids)
        if len(user_ids) != config.num_users:
            raise ValueError(
                f"user id table has {len(user_ids)} entries, config says {config.num_users}"
            )
    rng = np.random.default_rng(config.seed)
    dtype = np.float32
    emb = rng.uniform(
        -config.embed_init_scale,
        config.embed_init_scale,
        size=(config.num_users, config.embed_dim),
    ).astype(dtype)
    proj_w = _glorot(rng, config.feature_dim, config.embed_dim,
                     (config.feature_dim, config.embed_dim), dtype)
    head1_w = _glorot(rng, 2 * config.embed_dim, config.hidden_dim,
                      (2 * config.embed_dim, config.hidden_dim), dtype)
    out_w = _glorot(rng, config.hidden_dim, 1, (config.hidden_dim, 1), dtype)
    return ElvisModel(
        config=config,
        user_embeddings=emb,
        proj_w=proj_w,
        proj_b=np.zeros(config.embed_dim, dtype=dtype),
        head1_w=head1_w,
        head1_b=np.zeros(config.hidden_dim, dtype=dtype),
        out_w=out_w,
        out_b=np.zeros(1, dtype=dtype),
        user_ids=user_ids,
    )


def _sigmoid64(logits):
    z = np.asarray(logits, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(model: ElvisModel, user_index: int, feature_vec, mode: str = "eval",
            dropout_seed: int = 0):
    """Single-pair forward pass.

    Returns (p, cache); cache is None in eval mode.  Eval mode skips the
    dropout mask entirely (inverted dropout needs no rescale there), so
    it is fully deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    cfg = model.config
    if not 0 <= user_index < cfg.num_users:
        raise ValueError(f"user index {user_index} out of range [0, {cfg.num_users})")
    x = np.asarray(feature_vec, dtype=model.dtype)
    if x.shape != (cfg.feature_dim,):
        raise ValueError(f"feature vector has shape {x.shape}, expected ({cfg.feature_dim},)")

    e = model.user_embeddings[user_index]
    q = x @ model.proj_w + model.proj_b
    z = np.concatenate([e, q])
    a = z @ model.head1_w + model.head1_b
    h = np.maximum(a, 0)

    mask = None
    scale = 1.0
    if mode == "train" and cfg.dropout_rate > 0.0:
        rng = np.random.default_rng(dropout_seed)
        mask = (rng.random(h.shape) >= cfg.dropout_rate).astype(model.dtype)
        scale = 1.0 / (1.0 - cfg.dropout_rate)
        hd = h * mask * model.dtype.type(scale)
    else:
        hd = h

    logit = float(hd @ model.out_w[:, 0] + model.out_b[0])
    logit = min(max(logit, -LOGIT_CLAMP), LOGIT_CLAMP)
    p = float(_sigmoid64(logit))

    if mode == "eval":
        return p, None
    cache = ForwardCache(
        user_index=user_index, x=x, z=z, hidden_pre=a, hidden_dropped=hd,
        dropout_mask=mask, dropout_scale=scale, p=p,
    )
    return p, cache


def backward(model: ElvisModel, cache: ForwardCache, label: int) -> dict:
    """Gradients of the binary cross-entropy loss for one cached pair.

    The gradient with respect to the pre-sigmoid value is p - label; the
    clamp is treated as the identity.  Only the embedding row of the
    cached user is nonzero.
    """
    dtype = model.dtype
    cfg = model.config
    g_logit = dtype.type(cache.p - label)

    d_out_w = (cache.hidden_dropped * g_logit)[:, None]
    d_out_b = np.array([g_logit], dtype=dtype)

    g_hd = g_logit * model.out_w[:, 0]
    if cache.dropout_mask is not None:
        g_h = g_hd * cache.dropout_mask * dtype.type(cache.dropout_scale)
    else:
        g_h = g_hd
    g_a = g_h * (cache.hidden_pre > 0)

    d_head1_w = np.outer(cache.z, g_a)
    d_head1_b = g_a.copy()

    g_z = model.head1_w @ g_a
    g_e = g_z[: cfg.embed_dim]
    g_q = g_z[cfg.embed_dim:]

    d_proj_w = np.outer(cache.x, g_q)
    d_proj_b = g_q.copy()

    d_emb = np.zeros_like(model.user_embeddings)
    d_emb[cache.user_index] = g_e

    return {
        "user_embeddings": d_emb,
        "proj_w": d_proj_w,
        "proj_b": d_proj_b,
        "head1_w": d_head1_w,
        "head1_b": d_head1_b,
        "out_w": d_out_w,
        "out_b": d_out_b,
    }


@dataclass
class BatchCache:
    user_indices: np.ndarray
    x: np.ndarray
    z: np.ndarray
    hidden_pre: np.ndarray
    hidden_dropped: np.ndarray
    dropout_mask: Optional[np.ndarray]
    dropout_scale: float
    p: np.ndarray


def forward_batch(model: ElvisModel, user_indices, x, mode: str = "eval",
                  dropout_rng=None):
    """Vectorized forward over a batch; semantics match `forward` per row.

    x is (batch, feature_dim); returns (p float64 (batch,), cache or None).
    """
    cfg = model.config
    user_indices = np.asarray(user_indices)
    x = np.asarray(x, dtype=model.dtype)
    e = model.user_embeddings[user_indices]
    q = x @ model.proj_w + model.proj_b
    z = np.concatenate([e, q], axis=1)
    a = z @ model.head1_w + model.head1_b
    h = np.maximum(a, 0)

    mask = None
    scale = 1.0
    if mode == "train" and cfg.dropout_rate > 0.0:
        if dropout_rng is None:
            raise ValueError("train-mode batch forward needs a dropout rng")
        mask = (dropout_rng.random(h.shape) >= cfg.dropout_rate).astype(model.dtype)
        scale = 1.0 / (1.0 - cfg.dropout_rate)
        hd = h * mask * model.dtype.type(scale)
    else:
        hd = h

    logits = hd @ model.out_w[:, 0] + model.out_b[0]
    logits = np.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP)
    p = _sigmoid64(logits)
    if mode == "eval":
        return p, None
    return p, BatchCache(user_indices, x, z, a, hd, mask, scale, p)


def backward_batch(model: ElvisModel, cache: BatchCache, labels) -> dict:
    """Mean-loss gradients over a batch (scatter-add on embedding rows)."""
    dtype = model.dtype
    cfg = model.config
    batch = cache.p.shape[0]
    g_logit = ((cache.p - np.asarray(labels, dtype=np.float64)) / batch).astype(dtype)

    d_out_w = (cache.hidden_dropped.T @ g_logit)[:, None]
    d_out_b = np.array([g_logit.sum()], dtype=dtype)

    g_hd = g_logit[:, None] * model.out_w[:, 0][None, :]
    if cache.dropout_mask is not None:
        g_h = g_hd * cache.dropout_mask * dtype.type(cache.dropout_scale)
    else:
        g_h = g_hd
    g_a = g_h * (cache.hidden_pre > 0)

    d_head1_w = cache.z.T @ g_a
    d_head1_b = g_a.sum(axis=0)

    g_z = g_a @ model.head1_w.T
    g_e = g_z[:, : cfg.embed_dim]
    g_q = g_z[:, cfg.embed_dim:]

    d_proj_w = cache.x.T @ g_q
    d_proj_b = g_q.sum(axis=0)

    d_emb = np.zeros_like(model.user_embeddings)
    np.add.at(d_emb, cache.user_indices, g_e)

    return {
        "user_embeddings": d_emb,
        "proj_w": d_proj_w,
        "proj_b": d_proj_b,
        "head1_w": d_head1_w,
        "head1_b": d_head1_b,
        "out_w": d_out_w,
        "out_b": d_out_b,
    }


def predict_scores(model: ElvisModel, pairs, store) -> np.ndarray:
    """Eval-mode probability per (user_index, photo_id) pair, order preserved.

    Runs one pair at a time so results match single-pair `forward` bit
    for bit regardless of batching.
    """
    scores = np.empty(len(pairs), dtype=np.float64)
    for i, (user_index, photo_id) in enumerate(pairs):
        p, _ = forward(model, user_index, store[photo_id], mode="eval")
        scores[i] = p
    return scores


def check_finite(model: ElvisModel) -> None:
    for name, arr in model.params().items():
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite values in parameter {name!r}")


def _config_to_json(config: ModelConfig, user_ids) -> bytes:
    doc = {
        "num_users": config.num_users,
        "feature_dim": config.feature_dim,
        "embed_dim": config.embed_dim,
        "hidden_dim": config.hidden_dim,
        "dropout_rate": config.dropout_rate,
        "embed_init_scale": config.embed_init_scale,
        "seed": config.seed,
        "user_ids": list(user_ids) if user_ids is not None else None,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(model: ElvisModel, path) -> None:
    """Binary checkpoint: magic, version, JSON config block, raw tensors."""
    config_blob = _config_to_json(model.config, model.user_ids)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(config_blob)))
        fh.write(config_blob)
        for name, arr in model.params().items():
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _expected_shapes(cfg: ModelConfig) -> dict:
    return {
        "user_embeddings": (cfg.num_users, cfg.embed_dim),
        "proj_w": (cfg.feature_dim, cfg.embed_dim),
        "proj_b": (cfg.embed_dim,),
        "head1_w": (2 * cfg.embed_dim, cfg.hidden_dim),
        "head1_b": (cfg.hidden_dim,),
        "out_w": (cfg.hidden_dim, 1),
        "out_b": (1,),
    }


def load_checkpoint(path) -> ElvisModel:
    def read_exact(fh, n, what):
        data = fh.read(n)
        if len(data) < n:
            raise ValueError(f"{path}: truncated checkpoint ({what})")
        return data

    with open(path, "rb") as fh:
        if read_exact(fh, 4, "magic") != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint (bad magic)")
        (version,) = struct.unpack("<I", read_exact(fh, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (config_len,) = struct.unpack("<I", read_exact(fh, 4, "config length"))
        doc = json.loads(read_exact(fh, config_len, "config block").decode("utf-8"))
        user_ids = doc.pop("user_ids", None)
        config = ModelConfig(**doc)
        expected = _expected_shapes(config)

        tensors = {}
        for wanted in PARAM_NAMES:
            (name_len,) = struct.unpack("<H", read_exact(fh, 2, "tensor name length"))
            name = read_exact(fh, name_len, "tensor name").decode("utf-8")
            if name != wanted:
                raise ValueError(f"{path}: expected tensor {wanted!r}, found {name!r}")
            (rank,) = struct.unpack("<I", read_exact(fh, 4, "tensor rank"))
            shape = tuple(
                struct.unpack("<I", read_exact(fh, 4, "tensor dim"))[0] for _ in range(rank)
            )
            if shape != expected[name]:
                raise ValueError(
                    f"{path}: tensor {name!r} has shape {shape}, config implies {expected[name]}"
                )
            count = int(np.prod(shape)) if shape else 1
            raw = read_exact(fh, 4 * count, f"tensor {name!r} data")
            tensors[name] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after last tensor")

    return ElvisModel(
        config=config,
        user_ids=tuple(user_ids) if user_ids is not None else None,
        **tensors,
    )
