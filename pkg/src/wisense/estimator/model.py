"""Small recurrent heatmap estimator with hand-written backprop.

features -> dense tanh trunk -> GRU cell -> three linear heads
(location grid, K pose-offset grids, depth strip). The memoryless
configuration runs the same cell from a zero state at every step; the
temporal one threads the state through a block, truncated to the last
``max_seq_len`` steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .data import GridSpec, ToySample, encode_window, heatmap_values
from .losses import head_loss, total_loss_weights


class SequenceIntegrityError(RuntimeError):
    pass


@dataclass
class EstimatorConfig:
    temporal: bool = False
    max_seq_len: int = 17
    hidden: int = 32
    gru_hidden: int = 32
    a: float = 0.5
    b: float = 0.5
    c_start: float = 0.1
    c_end: float = 0.9
    learning_rate: float = 3e-3
    lr_final_frac: float = 0.1
    epochs: int = 20
    finetune_epochs: int = 10
    batch_blocks: int = 16
    seed: int = 0
    temperature: float = 0.05
    sigma_cells: float = 1.0
    n_keypoints: int = 4
    loc_grid: GridSpec = GridSpec((1.25, 1.25), 0.5, (8, 10))
    pose_grid: GridSpec = GridSpec((-0.5, -0.5), 0.1, (11, 11))
    depth_bins: int = 8

    def __post_init__(self):
        if not (0 <= self.a <= 1 and 0 <= self.b <= 1):
            raise ValueError("a and b must lie in [0, 1]")
        if not (0 <= self.c_start <= 1 and 0 <= self.c_end <= 1):
            raise ValueError("c must lie in [0, 1]")
        if self.max_seq_len < 1:
            raise ValueError("max_seq_len must be >= 1")
        if self.batch_blocks < 1 or self.epochs < 0:
            raise ValueError("batch_blocks >= 1 and epochs >= 0 required")

    @property
    def depth_grid(self) -> GridSpec:
        return GridSpec((0.0, 0.0), 1.0, (2, self.depth_bins))

    @property
    def memory(self) -> int:
        return self.max_seq_len if self.temporal else 1

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("loc_grid", "pose_grid"):
            g = getattr(self, k)
            d[k] = {"origin": list(g.origin), "cell": g.cell, "shape": list(g.shape)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorConfig":
        d = dict(d)
        for k in ("loc_grid", "pose_grid"):
            if isinstance(d.get(k), dict):
                g = d[k]
                d[k] = GridSpec(tuple(g["origin"]), float(g["cell"]), tuple(g["shape"]))
        return cls(**d)


PARAM_ORDER = ("W1", "b1", "Wz", "Uz", "bz", "Wr", "Ur", "br", "Wh", "Uh", "bh",
               "Wl", "bl", "Wp", "bp", "Wd", "bd")


def _sigmoid(x):
    return 0.5 * (1 + np.tanh(0.5 * x))


def init_params(cfg: EstimatorConfig, n_features: int, rng: np.random.Generator) -> dict:
    H1, H = cfg.hidden, cfg.gru_hidden
    n_loc = cfg.loc_grid.size
    n_pose = cfg.n_keypoints * cfg.pose_grid.size
    n_depth = cfg.depth_grid.size

    def glorot(i, o):
        return rng.normal(0, np.sqrt(2.0 / (i + o)), (i, o))

    p = {"W1": glorot(n_features, H1), "b1": np.zeros(H1)}
    for g in "zrh":
        p["W" + g] = glorot(H1, H)
        p["U" + g] = glorot(H, H) * 0.5
        p["b" + g] = np.zeros(H)
    p["bz"] += 1.0  # lean towards the candidate state early on
    p["Wl"], p["bl"] = glorot(H, n_loc) * 0.1, np.zeros(n_loc)
    p["Wp"], p["bp"] = glorot(H, n_pose) * 0.1, np.zeros(n_pose)
    p["Wd"], p["bd"] = glorot(H, n_depth) * 0.1, np.zeros(n_depth)
    return p


@dataclass
class Model:
    cfg: EstimatorConfig
    params: dict
    feat_mean: np.ndarray
    feat_std: np.ndarray

    @classmethod
    def fresh(cls, cfg: EstimatorConfig, features: np.ndarray) -> "Model":
        """New weights; feature scaling from ``features`` (..., F)."""
        flat = features.reshape(-1, features.shape[-1])
        mean, std = flat.mean(axis=0), flat.std(axis=0)
        std = np.where(std > 1e-12, std, 1.0)
        rng = np.random.default_rng([cfg.seed, 0x1417])
        return cls(cfg, init_params(cfg, flat.shape[1], rng), mean, std)

    def with_config(self, cfg: EstimatorConfig) -> "Model":
        return Model(cfg, {k: v.copy() for k, v in self.params.items()},
                     self.feat_mean.copy(), self.feat_std.copy())

    def copy(self) -> "Model":
        return self.with_config(self.cfg)

    def scale(self, feats: np.ndarray) -> np.ndarray:
        return (feats - self.feat_mean) / self.feat_std

    @property
    def n_features(self) -> int:
        return self.feat_mean.size


# --------------------------------------------------------------------------
# GRU over a window

def _gru_run(p, A, h0=None):
    """Run the cell over A (N, L, H1) from h0 (default zero); returns hs (N, L, H), cache."""
    N, L, _ = A.shape
    H = p["Uz"].shape[0]
    h = np.zeros((N, H)) if h0 is None else h0
    hs = np.empty((N, L, H))
    steps = []
    for t in range(L):
        a = A[:, t]
        z = _sigmoid(a @ p["Wz"] + h @ p["Uz"] + p["bz"])
        r = _sigmoid(a @ p["Wr"] + h @ p["Ur"] + p["br"])
        rh = r * h
        n = np.tanh(a @ p["Wh"] + rh @ p["Uh"] + p["bh"])
        h_new = (1 - z) * h + z * n
        steps.append((a, h, z, r, rh, n))
        hs[:, t] = h = h_new
    return hs, steps


def _gru_back(p, steps, dhs, grads):
    """Backprop dL/dhs (N, L, H) through a run; accumulates into ``grads``; returns dA."""
    N, L, H = dhs.shape
    dA = np.empty((N, L, p["Wz"].shape[0]))
    dh = np.zeros((N, H))
    for t in range(L - 1, -1, -1):
        a, h, z, r, rh, n = steps[t]
        dh = dh + dhs[:, t]
        dn = dh * z * (1 - n ** 2)
        dz = dh * (n - h) * z * (1 - z)
        dh_prev = dh * (1 - z)
        grads["Wh"] += a.T @ dn
        grads["Uh"] += rh.T @ dn
        grads["bh"] += dn.sum(0)
        drh = dn @ p["Uh"].T
        dr = drh * h * r * (1 - r)
        dh_prev += drh * r
        grads["Wz"] += a.T @ dz
        grads["Uz"] += h.T @ dz
        grads["bz"] += dz.sum(0)
        grads["Wr"] += a.T @ dr
        grads["Ur"] += h.T @ dr
        grads["br"] += dr.sum(0)
        dh_prev += dz @ p["Uz"].T + dr @ p["Ur"].T
        dA[:, t] = dn @ p["Wh"].T + dz @ p["Wz"].T + dr @ p["Wr"].T
        dh = dh_prev
    return dA


def _recurrent(p, A, memory):
    """Hidden states (B, T, H) with influence truncated to ``memory`` steps."""
    B, T, H1 = A.shape
    if memory >= T:
        hs, steps = _gru_run(p, A)
        return hs, ("full", steps)
    if memory == 1:
        hs, steps = _gru_run(p, A.reshape(B * T, 1, H1))
        return hs.reshape(B, T, -1), ("single", steps)
    runs, out = [], []
    for t in range(T):
        s = max(0, t - memory + 1)
        hs, steps = _gru_run(p, A[:, s:t + 1])
        out.append(hs[:, -1])
        runs.append((s, t, steps))
    return np.stack(out, axis=1), ("sliding", runs)


def _recurrent_back(p, cache, dH, grads, shape):
    kind, data = cache
    B, T, H1 = shape
    if kind == "full":
        return _gru_back(p, data, dH, grads)
    if kind == "single":
        dA = _gru_back(p, data, dH.reshape(B * T, 1, -1), grads)
        return dA.reshape(B, T, H1)
    dA = np.zeros(shape)
    for s, t, steps in data:
        d = np.zeros((B, t - s + 1, dH.shape[-1]))
        d[:, -1] = dH[:, t]
        dA[:, s:t + 1] += _gru_back(p, steps, d, grads)
    return dA


# --------------------------------------------------------------------------
# batched forward / backward

def forward_batch(model: Model, X: np.ndarray, memory: Optional[int] = None):
    """X (B, T, F) raw features -> dict of head values and a cache.

    loc (B, T, H, W); pose (B, T, K, h, w); depth (B, T, 2, n_bins).
    """
    cfg, p = model.cfg, model.params
    memory = cfg.memory if memory is None else memory
    B, T, _ = X.shape
    Xs = model.scale(X)
    A = np.tanh(Xs @ p["W1"] + p["b1"])
    Hs, rcache = _recurrent(p, A, memory)
    lg, pg, dg = cfg.loc_grid, cfg.pose_grid, cfg.depth_grid
    out = {
        "loc": (Hs @ p["Wl"] + p["bl"]).reshape(B, T, *lg.shape),
        "pose": (Hs @ p["Wp"] + p["bp"]).reshape(B, T, cfg.n_keypoints, *pg.shape),
        "depth": (Hs @ p["Wd"] + p["bd"]).reshape(B, T, *dg.shape),
    }
    return out, (Xs, A, Hs, rcache)


def backward_batch(model: Model, cache, d_out: dict) -> dict:
    p = model.params
    Xs, A, Hs, rcache = cache
    B, T, _ = Xs.shape
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    dH = np.zeros_like(Hs)
    for head, (W, b) in {"loc": ("Wl", "bl"), "pose": ("Wp", "bp"), "depth": ("Wd", "bd")}.items():
        d = d_out[head].reshape(B, T, -1)
        grads[W] += np.einsum("bth,bto->ho", Hs, d)
        grads[b] += d.sum(axis=(0, 1))
        dH += d @ p[W].T
    dA = _recurrent_back(p, rcache, dH, grads, A.shape)
    dpre = dA * (1 - A ** 2)
    grads["W1"] += np.einsum("btf,bth->fh", Xs, dpre)
    grads["b1"] += dpre.sum(axis=(0, 1))
    return grads


# --------------------------------------------------------------------------
# targets and loss

@dataclass
class Targets:
    loc: np.ndarray       # (B, T, H, W)
    pose: np.ndarray      # (B, T, K, h, w)
    depth: np.ndarray     # (B, T, 2, n_bins)
    loc_xy: np.ndarray    # (B, T, 2)
    pose_xy: np.ndarray   # (B, T, K, 2)
    depth_bin: np.ndarray  # (B, T)


def depth_point(bins, cfg: EstimatorConfig) -> np.ndarray:
    g = cfg.depth_grid
    bins = np.asarray(bins, dtype=float)
    return np.stack([g.origin[0] + g.cell * bins, np.full(bins.shape, g.origin[1])], axis=-1)


def make_targets(blocks, cfg: EstimatorConfig) -> Targets:
    loc = np.array([[s.truth_location for s in b.samples] for b in blocks], dtype=float)
    pose = np.array([[s.truth_pose for s in b.samples] for b in blocks], dtype=float)
    depth = np.array([[s.truth_depth for s in b.samples] for b in blocks], dtype=float)
    lg, pg, dg = cfg.loc_grid, cfg.pose_grid, cfg.depth_grid
    loc_c = np.clip(loc, [lg.xs[0], lg.ys[0]], [lg.xs[-1], lg.ys[-1]])
    pose_c = np.clip(pose, [pg.xs[0], pg.ys[0]], [pg.xs[-1], pg.ys[-1]])
    return Targets(heatmap_values(loc_c, lg, cfg.sigma_cells * lg.cell),
                   heatmap_values(pose_c, pg, cfg.sigma_cells * pg.cell),
                   heatmap_values(depth_point(depth, cfg), dg, cfg.sigma_cells * dg.cell),
                   loc, pose, depth.astype(int))


def _flat_heads(arr, lead):
    return arr.reshape((-1,) + arr.shape[lead:])


def loss_and_grads(model: Model, X: np.ndarray, tg: Targets, c: float, need_grad: bool = True):
    """Total loss on a batch and (optionally) parameter gradients."""
    cfg = model.cfg
    out, cache = forward_batch(model, X)
    wd, wh, wl = total_loss_weights(cfg.a, cfg.b)
    parts, d_out = {}, {}
    for head, grid, tgt in (("depth", cfg.depth_grid, tg.depth), ("pose", cfg.pose_grid, tg.pose),
                            ("loc", cfg.loc_grid, tg.loc)):
        pred = _flat_heads(out[head], 2)
        res = head_loss(pred, _flat_heads(tgt, 2), c, cfg.temperature, grid, return_grad=need_grad)
        if need_grad:
            parts[head], g = res
            d_out[head] = g.reshape(out[head].shape)
        else:
            parts[head] = res
    total = wd * parts["depth"] + wh * parts["pose"] + wl * parts["loc"]
    if not need_grad:
        return total, parts, None
    for head, w in (("depth", wd), ("pose", wh), ("loc", wl)):
        d_out[head] *= w
    return total, parts, backward_batch(model, cache, d_out)


# --------------------------------------------------------------------------
# per-sample interface

@dataclass
class RecurrentState:
    block_id: Optional[int]
    sequence_id: int
    last_index: int
    inputs: list = field(default_factory=list)   # trunk activations, newest last


def forward(model: Model, sample: ToySample, state: Optional[RecurrentState] = None):
    """One step: (loc, pose, depth, new_state) heatmap values for ``sample``.

    Memoryless configs ignore ``state``. Temporal configs recompute the cell
    over the last ``max_seq_len`` trunk activations, so the output matches the
    batched path exactly. A state from another block is rejected.
    """
    cfg, p = model.cfg, model.params
    if state is not None and cfg.temporal:
        if state.block_id != sample.block_id or state.sequence_id != sample.sequence_id:
            raise SequenceIntegrityError(
                f"state from block {state.block_id} used on block {sample.block_id}")
        if sample.timestamp_index <= state.last_index:
            raise SequenceIntegrityError("samples must advance in time within a block")
    x = model.scale(encode_window(sample.csi_window))
    a = np.tanh(x @ p["W1"] + p["b1"])
    history = list(state.inputs) if (state is not None and cfg.temporal) else []
    history = (history + [a])[-cfg.memory:]
    hs, _ = _gru_run(p, np.array(history)[None])
    h = hs[0, -1]
    loc = (h @ p["Wl"] + p["bl"]).reshape(cfg.loc_grid.shape)
    pose = (h @ p["Wp"] + p["bp"]).reshape(cfg.n_keypoints, *cfg.pose_grid.shape)
    depth = (h @ p["Wd"] + p["bd"]).reshape(cfg.depth_grid.shape)
    new_state = RecurrentState(sample.block_id, sample.sequence_id, sample.timestamp_index, history)
    return loc, pose, depth, new_state
