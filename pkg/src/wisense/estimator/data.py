"""Synthetic supervision for the toy estimator.

A walker (centroid on a Lissajous path) carries K scatterers at body-frame
offsets that turn with its heading. Location is the centroid, "pose" the K
world-frame offsets, depth the range bin of the centroid seen from the
receiver. CSI is simulated at the packet rate, preprocessed into dynamic
tensors and windowed around each ground-truth instant.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .. import chansim
from ..preprocess import preprocess_sequence

WINDOW = 32
BLOCK_LEN = 17


class WindowingWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# grids and heatmaps

@dataclass(frozen=True)
class GridSpec:
    """Cell (i, j) has its centre at (x0 + j*cell, y0 + i*cell)."""

    origin: tuple
    cell: float
    shape: tuple  # (H, W)

    def __post_init__(self):
        h, w = self.shape
        if h < 2 or w < 2:
            raise ValueError("grid must be at least 2x2")
        if not self.cell > 0:
            raise ValueError("cell size must be positive")

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.cell * np.arange(self.shape[1])

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.cell * np.arange(self.shape[0])

    @property
    def coords(self) -> np.ndarray:
        """(H*W, 2) cell centres in row-major order."""
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def contains(self, point) -> bool:
        x, y = point[0], point[1]
        half = self.cell / 2
        return bool(self.xs[0] - half <= x <= self.xs[-1] + half
                    and self.ys[0] - half <= y <= self.ys[-1] + half)

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]


@dataclass
class Heatmap:
    values: np.ndarray  # (..., H, W)
    grid: GridSpec

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-2:] != tuple(self.grid.shape):
            raise ValueError(f"heatmap {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("heatmap has non-finite entries")


def heatmap_values(points: np.ndarray, grid: GridSpec, sigma: float) -> np.ndarray:
    """Gaussian bumps with peak 1 around ``points`` (..., 2) -> (..., H, W)."""
    points = np.asarray(points, dtype=float)
    dx = grid.xs - points[..., 0, None]
    dy = grid.ys - points[..., 1, None]
    if sigma == 0:
        out = np.zeros(points.shape[:-1] + tuple(grid.shape))
        j = np.argmin(np.abs(dx), axis=-1)
        i = np.argmin(np.abs(dy), axis=-1)
        flat = out.reshape(-1, grid.size)
        flat[np.arange(flat.shape[0]), (np.ravel(i) * grid.shape[1] + np.ravel(j))] = 1.0
        return flat.reshape(out.shape)
    gx = np.exp(-dx ** 2 / (2 * sigma ** 2))
    gy = np.exp(-dy ** 2 / (2 * sigma ** 2))
    return gy[..., :, None] * gx[..., None, :]


def heatmap_from_point(point, grid: GridSpec, sigma: float) -> Heatmap:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if not grid.contains(point):
        raise ValueError(f"point {tuple(point)} lies outside the grid")
    return Heatmap(heatmap_values(np.asarray(point, float)[:2], grid, sigma), grid)


def soft_weights(values: np.ndarray, temperature: float) -> np.ndarray:
    """Softmax over the flattened last two axes -> (..., H*W)."""
    flat = values.reshape(values.shape[:-2] + (-1,)) / temperature
    flat = flat - flat.max(axis=-1, keepdims=True)
    e = np.exp(flat)
    return e / e.sum(axis=-1, keepdims=True)


def peak_coords(hm, mode: str = "hard", temperature: float = 0.02, grid: Optional[GridSpec] = None):
    """World coordinates of the heatmap peak(s), shape (..., 2).

    ``hard`` takes the argmax (first in row-major order on ties); ``soft``
    takes the softmax(values / temperature)-weighted mean of cell centres.
    """
    if isinstance(hm, Heatmap):
        values, grid = hm.values, hm.grid
    else:
        values = np.asarray(hm, dtype=float)
    coords = grid.coords
    if mode == "hard":
        flat = values.reshape(values.shape[:-2] + (-1,))
        return coords[np.argmax(flat, axis=-1)]
    if mode == "soft":
        return soft_weights(values, temperature) @ coords
    raise ValueError(f"unknown peak mode {mode!r}")


# --------------------------------------------------------------------------
# samples, blocks, windowing

@dataclass
class TruthTrack:
    timestamps: np.ndarray  # (T,)
    location: np.ndarray    # (T, 2)
    pose: np.ndarray        # (T, K, 2) offsets from location
    depth: np.ndarray       # (T,) int bins


@dataclass
class ToySample:
    csi_window: np.ndarray      # (32, 2, K_el, N_sub)
    truth_location: np.ndarray  # (2,)
    truth_pose: np.ndarray      # (K, 2)
    truth_depth: int
    timestamp_index: int
    sequence_id: int = 0
    timestamp: float = 0.0
    block_id: Optional[int] = None


@dataclass
class Block:
    samples: list
    sequence_id: int
    block_id: int = 0

    def __len__(self):
        return len(self.samples)


def nearest_indices(csi_times: np.ndarray, t: float, count: int, max_offset: float) -> Optional[np.ndarray]:
    """Indices of the ``count`` packets nearest to ``t`` in time order, or
    None when fewer than ``count`` lie within ``max_offset`` seconds.

    Equal distances prefer the earlier packet.
    """
    lo = np.searchsorted(csi_times, t - max_offset - 1e-12, side="left")
    hi = np.searchsorted(csi_times, t + max_offset + 1e-12, side="right")
    if hi - lo < count:
        return None
    cand = np.arange(lo, hi)
    order = np.argsort(np.abs(csi_times[cand] - t), kind="stable")
    return np.sort(cand[order[:count]])


def window_csi(tensors: np.ndarray, csi_times: np.ndarray, truth: TruthTrack,
               window: int = WINDOW, sequence_id: int = 0,
               max_offset: Optional[float] = None) -> list:
    """One :class:`ToySample` per truth instant from the ``window`` nearest packets.

    Packets further than ``max_offset`` seconds (default: ``window`` packet
    periods) are not eligible; instants without enough eligible packets are
    skipped with a warning.
    """
    csi_times = np.asarray(csi_times, dtype=float)
    if csi_times.size > 1 and np.any(np.diff(csi_times) < 0):
        raise ValueError("CSI timestamps must be non-decreasing")
    if max_offset is None:
        period = np.median(np.diff(csi_times)) if csi_times.size > 1 else 0.0
        max_offset = window * period
    out, skipped = [], 0
    for k, t in enumerate(truth.timestamps):
        idx = nearest_indices(csi_times, float(t), window, max_offset)
        if idx is None:
            skipped += 1
            continue
        out.append(ToySample(np.asarray(tensors[idx], dtype=np.float32), np.asarray(truth.location[k], float),
                             np.asarray(truth.pose[k], float), int(truth.depth[k]), k,
                             sequence_id, float(t)))
    if skipped:
        warnings.warn(f"sequence {sequence_id}: skipped {skipped} truth instants with fewer "
                      f"than {window} packets in range", WindowingWarning, stacklevel=2)
    return out


def segment_blocks(samples: Sequence[ToySample], block_len: int = BLOCK_LEN) -> list:
    """Non-overlapping chronological blocks per sequence; remainders dropped."""
    if int(block_len) != block_len or block_len < 1:
        raise ValueError("block_len must be a positive integer")
    by_seq: dict = {}
    for s in samples:
        by_seq.setdefault(s.sequence_id, []).append(s)
    blocks = []
    for sid in sorted(by_seq):
        seq = sorted(by_seq[sid], key=lambda s: (s.timestamp, s.timestamp_index))
        for b in range(len(seq) // block_len):
            bid = len(blocks)
            members = [replace(s, block_id=bid) for s in seq[b * block_len:(b + 1) * block_len]]
            blocks.append(Block(members, sid, bid))
    return blocks


# --------------------------------------------------------------------------
# fixed feature encoder

def _complex_column(window: np.ndarray) -> np.ndarray:
    amp, phase = window[:, 0], window[:, 1]           # (W, K_el, N_sub)
    return amp * np.exp(1j * phase)


def encode_window(window: np.ndarray, ref: Optional[int] = None, sub_lags=(1, 3, 6)) -> np.ndarray:
    """Fixed, scale-free features of one (W, 2, K_el, N_sub) window.

    Cross-element products carry angle, cross-subcarrier products carry
    delay, lag-one products in time carry Doppler; mean amplitudes per element
    and subcarrier band carry path loss. Everything is normalised by the mean
    power of the window.
    """
    c = _complex_column(np.asarray(window, dtype=float))
    if ref is not None:
        c = np.delete(c, ref, axis=1)
    W, K, S = c.shape
    power = np.mean(np.abs(c) ** 2)
    if power <= 0:
        power = 1.0
    c = c / np.sqrt(power)
    iu = np.triu_indices(K, 1)
    cross_el = np.mean(c[:, :, None, :] * np.conj(c[:, None, :, :]), axis=(0, 3))[iu]
    cross_sub = [np.mean(c[:, :, lag:] * np.conj(c[:, :, :-lag]), axis=(0, 2)) for lag in sub_lags]
    doppler = np.mean(c[1:] * np.conj(c[:-1]), axis=(0, 2))
    bands = np.array_split(np.arange(S), 3)
    amps = np.stack([np.abs(c[:, :, b]).mean(axis=(0, 2)) for b in bands], axis=1).ravel()
    parts = [cross_el, *cross_sub, doppler]
    feats = [np.concatenate([p.real, p.imag]) for p in parts]
    return np.concatenate(feats + [amps])


def encode_blocks(blocks: Sequence[Block], ref: Optional[int] = None) -> np.ndarray:
    """(B, T, F) features for a list of equal-length blocks."""
    return np.array([[encode_window(s.csi_window, ref) for s in b.samples] for b in blocks])


# --------------------------------------------------------------------------
# simulated walks

DEFAULT_OFFSETS = np.array([[0.35, 0.0], [-0.2, 0.2], [-0.2, -0.2], [0.1, 0.0]])


@dataclass
class WalkConfig:
    truth_rate: float = 30.0
    csi_rate: float = 1000.0
    samples_per_sequence: int = 68
    area_lo: tuple = (1.5, 1.5)
    area_hi: tuple = (5.5, 4.5)
    speed: float = 1.0
    offsets: np.ndarray = field(default_factory=lambda: DEFAULT_OFFSETS.copy())
    gain: float = 0.3
    noise_std: float = 0.02
    n_walls: int = 4
    depth_bins: int = 8
    depth_range: tuple = (1.5, 7.0)
    kappa: float = 100.0
    hp_window_s: float = 1.0

    @property
    def duration(self) -> float:
        # truth instants span samples/rate; pad for the windows at both ends
        return (self.samples_per_sequence - 1) / self.truth_rate + 2 * WINDOW / self.csi_rate + 0.2

    @property
    def k(self) -> int:
        return len(self.offsets)


def depth_bin(distance, cfg: WalkConfig):
    lo, hi = cfg.depth_range
    b = np.floor((np.asarray(distance) - lo) / (hi - lo) * cfg.depth_bins).astype(int)
    return np.clip(b, 0, cfg.depth_bins - 1)


def random_lissajous(rng: np.random.Generator, cfg: WalkConfig) -> chansim.LissajousTrajectory:
    lo, hi = np.array(cfg.area_lo), np.array(cfg.area_hi)
    center = np.append((lo + hi) / 2 + rng.uniform(-0.3, 0.3, 2), 0.0)
    amp = (hi - lo) / 2 * rng.uniform(0.6, 0.9, 2)
    # angular rates chosen so the mean speed is about cfg.speed
    ratio = rng.uniform(0.6, 1.4)
    base = cfg.speed / np.sqrt(amp[0] ** 2 + (ratio * amp[1]) ** 2) * np.sqrt(2)
    omega = np.array([base, base * ratio])
    phase = rng.uniform(0, 2 * np.pi, 2)
    return chansim.LissajousTrajectory(center, amp, omega, phase)


def room_scene(room_seed: int, cfg: WalkConfig, targets: list, noise_seed: int) -> chansim.Scene:
    scene = chansim.default_scene(room_seed, targets=targets, n_walls=cfg.n_walls,
                                  noise_std=cfg.noise_std, sample_rate=cfg.csi_rate)
    return scene.replace(seed=noise_seed)


def simulate_walk(room_seed: int, walk_seed: int, cfg: WalkConfig = WalkConfig(),
                  sequence_id: int = 0):
    """Simulate, preprocess and window one walk; returns (samples, stream, truth)."""
    rng = np.random.default_rng([int(room_seed), int(walk_seed), 0x57])
    base = random_lissajous(rng, cfg)
    t0 = rng.uniform(0, 20.0)
    shifted = _TimeShift(base, t0)
    targets = [chansim.Scatterer("dynamic", gain=cfg.gain,
                                 trajectory=chansim.OffsetTrajectory(shifted, np.append(o, 0.0)))
               for o in cfg.offsets]
    scene = room_scene(room_seed, cfg, targets, noise_seed=int(rng.integers(2 ** 31)))
    seq = chansim.synthesize_sequence(scene, cfg.duration)
    stream = preprocess_sequence(seq, kappa=cfg.kappa, window_s=cfg.hp_window_s)
    truth = walk_truth(shifted, cfg, scene)
    samples = window_csi(stream.tensors, stream.timestamps, truth, sequence_id=sequence_id)
    return samples, stream, truth


def walk_truth(traj, cfg: WalkConfig, scene: chansim.Scene) -> TruthTrack:
    start = WINDOW / cfg.csi_rate + 0.1
    t = start + np.arange(cfg.samples_per_sequence) / cfg.truth_rate
    p = traj(t)
    v = traj.velocity(t)
    heading = np.arctan2(v[:, 1], v[:, 0])
    c, s = np.cos(heading)[:, None], np.sin(heading)[:, None]
    ox, oy = cfg.offsets[:, 0][None], cfg.offsets[:, 1][None]
    pose = np.stack([c * ox - s * oy, s * ox + c * oy], axis=-1)
    dist = np.linalg.norm(p - scene.rx_position, axis=1)
    return TruthTrack(t, p[:, :2], pose, depth_bin(dist, cfg))


class _TimeShift:
    """Trajectory evaluated at t + t0 (decorrelates walks sharing a shape)."""

    def __init__(self, base, t0):
        self.base, self.t0 = base, t0

    def __call__(self, t):
        return self.base(np.asarray(t) + self.t0)

    def velocity(self, t):
        return self.base.velocity(np.asarray(t) + self.t0)
