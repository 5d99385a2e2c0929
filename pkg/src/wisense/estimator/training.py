"""Training, evaluation and dataset assembly for the toy estimator."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .data import WalkConfig, encode_blocks, segment_blocks, simulate_walk, peak_coords, BLOCK_LEN
from .losses import c_schedule
from .model import EstimatorConfig, Model, loss_and_grads, forward_batch, make_targets

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# datasets

@dataclass
class Dataset:
    train: list
    val: list
    test: list
    room_seed: int


def build_dataset(seed: int, n_train: int = 48, n_val: int = 8, n_test: int = 8,
                  walk: WalkConfig = WalkConfig(), block_len: int = BLOCK_LEN) -> Dataset:
    """Walks in one room (walls drawn from ``seed``), split by sequence."""
    splits = []
    sid = 0
    for count in (n_train, n_val, n_test):
        samples = []
        for _ in range(count):
            s, _, _ = simulate_walk(seed, sid, walk, sequence_id=sid)
            samples += s
            sid += 1
        splits.append(segment_blocks(samples, block_len))
    return Dataset(*splits, room_seed=seed)


# --------------------------------------------------------------------------
# optimisation

@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict):
        self.t += 1
        for k, g in grads.items():
            m = self.m.get(k, 0.0) * self.beta1 + (1 - self.beta1) * g
            v = self.v.get(k, 0.0) * self.beta2 + (1 - self.beta2) * g * g
            self.m[k], self.v[k] = m, v
            mhat = m / (1 - self.beta1 ** self.t)
            vhat = v / (1 - self.beta2 ** self.t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class History:
    epoch: list = field(default_factory=list)
    c: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.epoch, self.c, self.train_loss, self.val_loss))


@dataclass
class Features:
    """Blocks with their encoded features and targets, built once."""

    blocks: list
    X: np.ndarray

    @classmethod
    def of(cls, blocks):
        if not blocks:
            raise ValueError("empty block list")
        return cls(list(blocks), encode_blocks(blocks))


def _as_features(blocks) -> Features:
    return blocks if isinstance(blocks, Features) else Features.of(blocks)


def batch_loss(model: Model, feats: Features, c: float) -> float:
    tg = make_targets(feats.blocks, model.cfg)
    return float(loss_and_grads(model, feats.X, tg, c, need_grad=False)[0])


def train(cfg: EstimatorConfig, train_blocks, val_blocks=None, init: Optional[Model] = None,
          max_grad_norm: float = 5.0) -> tuple[Model, History]:
    """Adam on the total loss with soft peaks; ``c`` ramps per step.

    ``init`` continues from existing weights (its feature scaling is kept)
    under ``cfg``; otherwise weights are drawn from ``cfg.seed``. Epoch 0 in
    the history is the loss before any update.
    """
    tr = _as_features(train_blocks)
    va = _as_features(val_blocks) if val_blocks else None
    model = init.with_config(cfg) if init is not None else Model.fresh(cfg, tr.X)
    targets = make_targets(tr.blocks, cfg)
    rng = np.random.default_rng([cfg.seed, 0x7A1])
    n = len(tr.blocks)
    per_epoch = -(-n // cfg.batch_blocks)
    total = per_epoch * cfg.epochs
    opt = Adam(cfg.learning_rate)
    hist = History()

    def record(epoch, c):
        hist.epoch.append(epoch)
        hist.c.append(c)
        hist.train_loss.append(batch_loss(model, tr, c))
        hist.val_loss.append(batch_loss(model, va, c) if va else float("nan"))

    record(0, c_schedule(0, total, cfg.c_start, cfg.c_end))
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_blocks):
            idx = order[lo:lo + cfg.batch_blocks]
            c = c_schedule(step, total, cfg.c_start, cfg.c_end)
            opt.lr = cfg.learning_rate * c_schedule(step, total, 1.0, cfg.lr_final_frac)
            sub = _subset(targets, idx)
            loss, _, grads = loss_and_grads(model, tr.X[idx], sub, c)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}, step {step}")
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if norm > max_grad_norm:
                grads = {k: g * (max_grad_norm / norm) for k, g in grads.items()}
            opt.step(model.params, grads)
            step += 1
        record(epoch, c_schedule(max(step - 1, 0), total, cfg.c_start, cfg.c_end))
        log.debug("epoch %d train %.4f val %.4f", epoch, hist.train_loss[-1], hist.val_loss[-1])
        if not np.isfinite(hist.train_loss[-1]):
            raise TrainingDivergedError(f"non-finite loss after epoch {epoch}")
    return model, hist


def _subset(tg, idx):
    return type(tg)(*(getattr(tg, f)[idx] for f in ("loc", "pose", "depth", "loc_xy", "pose_xy",
                                                    "depth_bin")))


def train_two_stage(cfg: EstimatorConfig, train_blocks, val_blocks=None,
                    stage1_epochs: Optional[int] = None, stage2_epochs: Optional[int] = None):
    """Memoryless pretraining, then temporal fine-tuning from those weights."""
    tr = _as_features(train_blocks)
    va = _as_features(val_blocks) if val_blocks else None
    c1 = replace(cfg, temporal=False, epochs=stage1_epochs if stage1_epochs is not None else cfg.epochs)
    m1, h1 = train(c1, tr, va)
    c2 = replace(cfg, temporal=True,
                 epochs=stage2_epochs if stage2_epochs is not None else cfg.finetune_epochs)
    m2, h2 = train(c2, tr, va, init=m1)
    return m2, h1, h2


# --------------------------------------------------------------------------
# evaluation

@dataclass
class ErrorTable:
    timestamp_index: np.ndarray
    loc_err: np.ndarray        # mean per timestamp index (m)
    pose_err: np.ndarray
    per_sample_loc: np.ndarray  # (B, T)
    per_sample_pose: np.ndarray

    @property
    def mean_loc(self) -> float:
        return float(self.per_sample_loc.mean())

    @property
    def mean_pose(self) -> float:
        return float(self.per_sample_pose.mean())

    def quartile_means(self, which: str = "loc") -> tuple[float, float]:
        e = self.loc_err if which == "loc" else self.pose_err
        q = max(1, len(e) // 4)
        return float(e[:q].mean()), float(e[-q:].mean())


def predict_blocks(model: Model, blocks) -> dict:
    feats = _as_features(blocks)
    out, _ = forward_batch(model, feats.X)
    return out


def evaluate(model, blocks) -> ErrorTable:
    """Hard-argmax errors per position within the block.

    ``model`` is a :class:`Model` or any object with a ``predict(blocks)``
    method returning the same dict of head values.
    """
    if not blocks or (isinstance(blocks, Features) and not blocks.blocks):
        raise ValueError("empty test set")
    feats_blocks = blocks.blocks if isinstance(blocks, Features) else blocks
    if isinstance(model, Model):
        out = predict_blocks(model, blocks)
        cfg = model.cfg
    else:
        out = model.predict(feats_blocks)
        cfg = model.cfg
    tg = make_targets(feats_blocks, cfg)
    loc_hat = peak_coords(out["loc"], "hard", grid=cfg.loc_grid)
    pose_hat = peak_coords(out["pose"], "hard", grid=cfg.pose_grid)
    loc_err = np.linalg.norm(loc_hat - tg.loc_xy, axis=-1)
    pose_err = np.linalg.norm(pose_hat - tg.pose_xy, axis=-1).mean(axis=-1)
    T = loc_err.shape[1]
    return ErrorTable(np.arange(T), loc_err.mean(axis=0), pose_err.mean(axis=0), loc_err, pose_err)
