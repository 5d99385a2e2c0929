"""Synthetic CSI from static/dynamic multipath scenes.

Each antenna pair (n, m) sees

    h(f, t) = exp(-j phi(f, t)) * sum_l alpha_l(f, t) exp(-j 2 pi f tau_l(t)) + noise

with ground truth for the static sum ``h_s``, the dynamic sum ``h_d``, the
phase distortion and the noise kept alongside every frame, so that
``values == (h_s + h_d) * exp(-j phi) + noise`` holds to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .resolution import SPEED_OF_LIGHT, ArrayGeometry

PHASE_MODELS = ("zero", "uniform", "linear")


# --------------------------------------------------------------------------
# trajectories

class LinearTrajectory:
    """Constant-velocity motion ``start + velocity * t``."""

    def __init__(self, start, velocity):
        self.start = np.asarray(start, dtype=float)
        self.velocity_vec = np.asarray(velocity, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.start + t[..., None] * self.velocity_vec

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(self.velocity_vec, t.shape + (3,)).copy()


class LissajousTrajectory:
    """Smooth bounded planar wandering around ``center``.

    x(t) = cx + ax sin(wx t + px), y(t) = cy + ay sin(wy t + py), z fixed.
    """

    def __init__(self, center, amplitude, omega, phase):
        self.center = np.asarray(center, dtype=float)
        self.amplitude = np.asarray(amplitude, dtype=float)
        self.omega = np.asarray(omega, dtype=float)
        self.phase = np.asarray(phase, dtype=float)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        out = np.broadcast_to(self.center, t.shape[:-1] + (3,)).copy()
        out[..., :2] += self.amplitude * np.sin(self.omega * t + self.phase)
        return out

    def velocity(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        out = np.zeros(t.shape[:-1] + (3,))
        out[..., :2] = self.amplitude * self.omega * np.cos(self.omega * t + self.phase)
        return out


class OffsetTrajectory:
    """A point rigidly attached to ``base``, rotated to follow its heading.

    The offset is expressed in the body frame (x forward, y left); with
    ``rotate=False`` it is a fixed world-frame offset.
    """

    def __init__(self, base, offset, rotate: bool = True):
        self.base = base
        self.offset = np.asarray(offset, dtype=float)
        self.rotate = rotate

    def heading(self, t):
        v = self.base.velocity(t)
        return np.arctan2(v[..., 1], v[..., 0])

    def __call__(self, t):
        p = self.base(t)
        if not self.rotate:
            return p + self.offset
        h = self.heading(t)
        c, s = np.cos(h), np.sin(h)
        ox, oy = self.offset[0], self.offset[1]
        out = p.copy()
        out[..., 0] += c * ox - s * oy
        out[..., 1] += s * ox + c * oy
        out[..., 2] += self.offset[2]
        return out


# --------------------------------------------------------------------------
# scene description

@dataclass
class Scatterer:
    """One propagation path.

    Static paths use either a fixed ``path_length`` (same for every antenna
    pair), a fixed reflector ``position``, or neither, which means the direct
    Tx->Rx path. Dynamic paths follow ``trajectory(t) -> (..., 3)``.
    ``gain`` folds amplitude and reflection phase; with ``falloff`` the
    amplitude additionally scales as 1/path_length (default for dynamic
    paths).
    """

    kind: str
    gain: complex = 1.0
    path_length: Optional[float] = None
    position: Optional[Sequence[float]] = None
    trajectory: Optional[Callable] = None
    falloff: Optional[bool] = None

    def __post_init__(self):
        if self.kind not in ("static", "dynamic"):
            raise ValueError(f"unknown scatterer kind {self.kind!r}")
        if self.kind == "dynamic" and self.trajectory is None:
            raise ValueError("dynamic scatterer needs a trajectory")
        if self.kind == "static" and self.trajectory is not None:
            raise ValueError("static scatterer cannot have a trajectory")
        if self.path_length is not None and self.position is not None:
            raise ValueError("give either path_length or position, not both")
        if self.position is not None:
            self.position = np.asarray(self.position, dtype=float)
        if self.falloff is None:
            self.falloff = self.kind == "dynamic"

    @property
    def is_dynamic(self) -> bool:
        return self.kind == "dynamic"


def default_subcarriers(center: float = 5.32e9, span: float = 10e6, count: int = 30) -> np.ndarray:
    return center + np.linspace(-span / 2, span / 2, count)


@dataclass
class Scene:
    geometry: ArrayGeometry
    tx_position: np.ndarray
    rx_position: np.ndarray
    scatterers: list = field(default_factory=list)
    subcarrier_freqs: np.ndarray = field(default_factory=default_subcarriers)
    sample_rate: float = 1000.0
    phase_distortion: str = "uniform"
    timing_offset_std: float = 20e-9
    noise_std: float = 0.0
    seed: int = 0
    array_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    def __post_init__(self):
        self.tx_position = np.asarray(self.tx_position, dtype=float)
        self.rx_position = np.asarray(self.rx_position, dtype=float)
        self.subcarrier_freqs = np.asarray(self.subcarrier_freqs, dtype=float)
        self.array_axis = np.asarray(self.array_axis, dtype=float)
        self.array_axis = self.array_axis / np.linalg.norm(self.array_axis)
        f = self.subcarrier_freqs
        if f.ndim != 1 or f.size == 0:
            raise ValueError("subcarrier_freqs must be a non-empty 1-D array")
        if np.any(np.diff(f) <= 0):
            raise ValueError("subcarrier_freqs must be strictly increasing")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if self.phase_distortion not in PHASE_MODELS:
            raise ValueError(f"phase_distortion must be one of {PHASE_MODELS}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    @property
    def shape(self) -> tuple:
        g = self.geometry
        return (g.n_rx, g.n_tx, self.subcarrier_freqs.size)

    @property
    def tx_elements(self) -> np.ndarray:
        m = np.arange(self.geometry.n_tx)[:, None]
        return self.tx_position + m * self.geometry.d_tx * self.array_axis

    @property
    def rx_elements(self) -> np.ndarray:
        n = np.arange(self.geometry.n_rx)[:, None]
        return self.rx_position + n * self.geometry.d_rx * self.array_axis

    def static_scatterers(self):
        return [s for s in self.scatterers if not s.is_dynamic]

    def dynamic_scatterers(self):
        return [s for s in self.scatterers if s.is_dynamic]

    def replace(self, **kwargs) -> "Scene":
        from dataclasses import replace
        return replace(self, **kwargs)


# --------------------------------------------------------------------------
# geometry

def _bistatic_lengths(point, tx_el, rx_el):
    """|p - tx_m| + |p - rx_n| as (..., N_r, N_t)."""
    point = np.asarray(point, dtype=float)
    a = np.linalg.norm(point[..., None, :] - tx_el, axis=-1)
    b = np.linalg.norm(point[..., None, :] - rx_el, axis=-1)
    return b[..., :, None] + a[..., None, :]


def path_lengths(scene: Scene, scatterer: Scatterer, t) -> np.ndarray:
    """Path length in meters, shape ``t.shape + (N_r, N_t)``."""
    t = np.asarray(t, dtype=float)
    nr, nt = scene.geometry.n_rx, scene.geometry.n_tx
    if scatterer.is_dynamic:
        return _bistatic_lengths(scatterer.trajectory(t), scene.tx_elements, scene.rx_elements)
    if scatterer.path_length is not None:
        d = np.full((nr, nt), float(scatterer.path_length))
    elif scatterer.position is not None:
        d = _bistatic_lengths(scatterer.position, scene.tx_elements, scene.rx_elements)
    else:
        d = np.linalg.norm(scene.rx_elements[:, None, :] - scene.tx_elements[None, :, :], axis=-1)
    return np.broadcast_to(d, t.shape + (nr, nt))


def path_delay(scene: Scene, scatterer: Scatterer, tx_antenna: int, rx_antenna: int, t: float) -> float:
    return float(path_lengths(scene, scatterer, t)[rx_antenna, tx_antenna]) / SPEED_OF_LIGHT


def _path_response(scatterer: Scatterer, lengths, freqs):
    """alpha * exp(-j 2 pi f d / c), shape lengths.shape + (N_sub,)."""
    d = lengths[..., None]
    amp = scatterer.gain / d if scatterer.falloff else scatterer.gain
    return amp * np.exp(-2j * np.pi * freqs * d / SPEED_OF_LIGHT)


def path_attenuation(scatterer: Scatterer, lengths) -> np.ndarray:
    lengths = np.asarray(lengths, dtype=float)
    if scatterer.falloff:
        return scatterer.gain / lengths
    return np.full(lengths.shape, complex(scatterer.gain))


def static_component(scene: Scene) -> np.ndarray:
    hs = np.zeros(scene.shape, dtype=complex)
    for s in scene.static_scatterers():
        hs += _path_response(s, path_lengths(scene, s, 0.0), scene.subcarrier_freqs)
    return hs


def dynamic_component(scene: Scene, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    hd = np.zeros(t.shape + scene.shape, dtype=complex)
    for s in scene.dynamic_scatterers():
        hd += _path_response(s, path_lengths(scene, s, t), scene.subcarrier_freqs)
    return hd


# --------------------------------------------------------------------------
# frames and sequences

@dataclass
class FrameTruth:
    h_s: np.ndarray
    h_d: np.ndarray
    phase: np.ndarray  # phi(f), shape (N_sub,)
    noise: np.ndarray


@dataclass
class CsiFrame:
    values: np.ndarray  # (N_r, N_t, N_sub) complex
    timestamp: float
    truth: Optional[FrameTruth] = None


@dataclass
class GroundTruth:
    h_s: np.ndarray        # (N_r, N_t, N_sub)
    h_d: np.ndarray        # (T, N_r, N_t, N_sub)
    phase: np.ndarray      # (T, N_sub)
    noise: np.ndarray      # (T, N_r, N_t, N_sub)
    positions: np.ndarray  # (T, n_dynamic, 3)

    def recompose(self) -> np.ndarray:
        return (self.h_s + self.h_d) * np.exp(-1j * self.phase)[:, None, None, :] + self.noise


@dataclass
class CsiSequence:
    values: np.ndarray  # (T, N_r, N_t, N_sub) complex
    sample_rate: float
    start_time: float = 0.0
    ground_truth: Optional[GroundTruth] = None

    def __len__(self):
        return self.values.shape[0]

    @property
    def timestamps(self) -> np.ndarray:
        return self.start_time + np.arange(len(self)) / self.sample_rate

    @property
    def frames(self) -> list:
        return [CsiFrame(v, ts) for v, ts in zip(self.values, self.timestamps)]


def frame_rng(seed: int, index: int) -> np.random.Generator:
    """Per-frame random substream, independent of how frames are batched."""
    return np.random.default_rng([int(seed), int(index)])


def _draw_distortion_and_noise(scene: Scene, index: int):
    rng = frame_rng(scene.seed, index)
    f = scene.subcarrier_freqs
    if scene.phase_distortion == "zero":
        phase = np.zeros(f.size)
    elif scene.phase_distortion == "uniform":
        phase = np.full(f.size, rng.uniform(0.0, 2 * np.pi))
    else:
        phi0 = rng.uniform(0.0, 2 * np.pi)
        tau = rng.normal(0.0, scene.timing_offset_std)
        phase = phi0 + 2 * np.pi * (f - f.mean()) * tau
    if scene.noise_std > 0:
        z = rng.standard_normal(scene.shape + (2,))
        noise = (z[..., 0] + 1j * z[..., 1]) * (scene.noise_std / np.sqrt(2))
    else:
        noise = np.zeros(scene.shape, dtype=complex)
    return phase, noise


def synthesize_frame(scene: Scene, t: float, index: Optional[int] = None) -> CsiFrame:
    """One CSI snapshot at time ``t``.

    ``index`` selects the random substream; it defaults to the nearest
    sample index so that frames match those of :func:`synthesize_sequence`.
    """
    if index is None:
        index = int(round(t * scene.sample_rate))
    hs = static_component(scene)
    hd = dynamic_component(scene, t)
    phase, noise = _draw_distortion_and_noise(scene, index)
    values = (hs + hd) * np.exp(-1j * phase) + noise
    return CsiFrame(values, float(t), FrameTruth(hs, hd, phase, noise))


def n_samples(duration: float, sample_rate: float) -> int:
    if not duration > 0:
        raise ValueError("duration must be positive")
    count = int(np.floor(duration * sample_rate + 1e-9))
    if count < 1:
        raise ValueError("duration shorter than one sample period")
    return count


def synthesize_sequence(scene: Scene, duration: float, start_time: float = 0.0) -> CsiSequence:
    count = n_samples(duration, scene.sample_rate)
    first = int(round(start_time * scene.sample_rate))
    idx = first + np.arange(count)
    t = idx / scene.sample_rate
    hs = static_component(scene)
    hd = dynamic_component(scene, t)
    phase = np.empty((count, scene.subcarrier_freqs.size))
    noise = np.empty((count,) + scene.shape, dtype=complex)
    for k, i in enumerate(idx):
        phase[k], noise[k] = _draw_distortion_and_noise(scene, i)
    values = (hs + hd) * np.exp(-1j * phase)[:, None, None, :] + noise
    dyn = scene.dynamic_scatterers()
    positions = (np.stack([s.trajectory(t) for s in dyn], axis=1) if dyn
                 else np.zeros((count, 0, 3)))
    truth = GroundTruth(hs, hd, phase, noise, positions)
    return CsiSequence(values, scene.sample_rate, float(t[0]), truth)


def static_to_dynamic_ratio(truth: GroundTruth) -> float:
    """||h_s|| over the RMS-in-time ||h_d||."""
    hd_rms = np.sqrt(np.mean(np.sum(np.abs(truth.h_d) ** 2, axis=(1, 2, 3))))
    if hd_rms == 0:
        return np.inf
    return float(np.linalg.norm(truth.h_s) / hd_rms)


def predicted_power(scene: Scene, f: float, t: float, n: int, m: int) -> tuple[float, float]:
    """|h(f, t)|^2 of pair (rx n, tx m) from the static/dynamic power expansion.

    Returns ``(three_term, two_term)``; the two-term form drops the
    dynamic-dynamic interference sum. Noise is ignored. The accumulated
    path-length change is taken as d_l(t) - d_l(0) exactly.
    """
    k = 2 * np.pi * f / SPEED_OF_LIGHT
    hs = 0j
    for s in scene.static_scatterers():
        d = float(path_lengths(scene, s, 0.0)[n, m])
        hs += complex(path_attenuation(s, d)) * np.exp(-1j * k * d)

    alphas, d_now, d_start = [], [], []
    for s in scene.dynamic_scatterers():
        d_t = float(path_lengths(scene, s, t)[n, m])
        d_0 = float(path_lengths(scene, s, 0.0)[n, m])
        alphas.append(complex(path_attenuation(s, d_t)))
        d_now.append(d_t)
        d_start.append(d_0)

    first = abs(hs) ** 2
    second = 0.0
    for a, dt, d0 in zip(alphas, d_now, d_start):
        phi_sl = np.angle(hs) - np.angle(a)
        travelled = dt - d0
        second += 2 * abs(hs * a) * np.cos(k * travelled + k * d0 + phi_sl)
    third = 0.0
    for ak, dk in zip(alphas, d_now):
        for al, dl in zip(alphas, d_now):
            phi_kl = np.angle(al) - np.angle(ak)
            third += abs(ak * al) * np.cos(k * (dk - dl) + phi_kl)
    return float(first + second + third), float(first + second)


# --------------------------------------------------------------------------
# scene factories

def reference_geometry(bandwidth: float = 10e6, d_rt: float = 7.0) -> ArrayGeometry:
    """3x3 half-wavelength arrays at 5.32 GHz, 7 m apart."""
    return ArrayGeometry.from_carrier(5.32e9, n_tx=3, n_rx=3, bandwidth=bandwidth, d_rt=d_rt)


def random_walls(rng: np.random.Generator, count: int, lo=(-3.0, -5.0, -1.0), hi=(10.0, 5.0, 3.0),
                 gain_range=(0.3, 1.0)) -> list:
    walls = []
    for _ in range(count):
        pos = rng.uniform(lo, hi)
        g = rng.uniform(*gain_range) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        walls.append(Scatterer("static", gain=g, position=pos, falloff=True))
    return walls


def default_scene(seed: int = 0, *, targets: Optional[list] = None, n_walls: int = 4,
                  los_gain: float = 1.0, noise_std: float = 0.0,
                  phase_distortion: str = "uniform", sample_rate: float = 1000.0) -> Scene:
    """Desk-scale replica of the measurement setup: 3x3 antennas facing each
    other 7 m apart, 30 subcarriers over 10 MHz at 5.32 GHz, 1 kHz sampling.

    Static paths are the direct path plus ``n_walls`` random reflectors drawn
    from ``seed``; ``targets`` are dynamic scatterers (default: one walker).
    """
    rng = np.random.default_rng([int(seed), 0xC5])
    geom = reference_geometry()
    scatterers = [Scatterer("static", gain=los_gain, falloff=True)]
    scatterers += random_walls(rng, n_walls)
    if targets is None:
        start = rng.uniform([1.5, 1.0, 0.0], [5.5, 3.0, 0.0])
        heading = rng.uniform(0, 2 * np.pi)
        vel = 1.0 * np.array([np.cos(heading), np.sin(heading), 0.0])
        targets = [Scatterer("dynamic", gain=0.2, trajectory=LinearTrajectory(start, vel))]
    scatterers += targets
    return Scene(geometry=geom, tx_position=[0.0, 0.0, 0.0], rx_position=[geom.d_rt, 0.0, 0.0],
                 scatterers=scatterers, sample_rate=sample_rate,
                 phase_distortion=phase_distortion, noise_std=noise_std, seed=seed)


def scale_dynamic_to_ratio(scene: Scene, ratio: float, duration: float = 1.0) -> Scene:
    """Rescale dynamic gains so that ||h_s|| / rms ||h_d|| equals ``ratio``."""
    probe = scene.replace(noise_std=0.0)
    t = np.arange(n_samples(duration, scene.sample_rate)) / scene.sample_rate
    hs = static_component(probe)
    hd = dynamic_component(probe, t)
    rms = np.sqrt(np.mean(np.sum(np.abs(hd) ** 2, axis=(1, 2, 3))))
    factor = np.linalg.norm(hs) / (ratio * rms)
    new = []
    for s in scene.scatterers:
        if s.is_dynamic:
            s = Scatterer("dynamic", gain=s.gain * factor, trajectory=s.trajectory, falloff=s.falloff)
        new.append(s)
    return scene.replace(scatterers=new)
