"""Recovery of the dynamic CSI component.

Pipeline per subcarrier: flatten the N_r x N_t matrix into a vector h',
add a large phase-tracking constant beta to the reference element, form the
outer product with its own conjugate (which cancels the common phase
distortion), high-pass filter it in time to drop the static power, and read
the reference column, which is approximately proportional to h_d.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal

from .chansim import CsiSequence


class PreprocessError(ValueError):
    pass


def vectorize(values: np.ndarray) -> np.ndarray:
    """(..., N_r, N_t, N_sub) -> (..., N_sub, N_r*N_t), receive-antenna major."""
    values = np.asarray(values)
    nr, nt, ns = values.shape[-3:]
    moved = np.moveaxis(values, -1, -3)
    return moved.reshape(values.shape[:-3] + (ns, nr * nt))


def unvectorize(vec: np.ndarray, n_rx: int, n_tx: int) -> np.ndarray:
    vec = np.asarray(vec)
    ns = vec.shape[-2]
    mat = vec.reshape(vec.shape[:-2] + (ns, n_rx, n_tx))
    return np.moveaxis(mat, -3, -1)


def _vectors(seq) -> np.ndarray:
    values = seq.values if isinstance(seq, CsiSequence) else np.asarray(seq)
    return vectorize(values)


def select_reference(seq, n_ref: int = 1) -> np.ndarray:
    """Indices of the ``n_ref`` elements of h' with the largest mean modulus.

    The mean runs over time and subcarriers; ties go to the lower index.
    """
    vec = _vectors(seq)
    if vec.shape[0] == 0:
        raise PreprocessError("empty sequence")
    k = vec.shape[-1]
    if not 1 <= n_ref < k:
        raise PreprocessError(f"n_ref must be in [1, {k})")
    score = np.abs(vec).mean(axis=(0, 1))
    order = np.argsort(-score, kind="stable")
    return order[:n_ref]


def conjugate_product(vec: np.ndarray) -> np.ndarray:
    """Outer product h' h'^H over the last axis."""
    vec = np.asarray(vec)
    out = vec[..., :, None] * np.conj(vec[..., None, :])
    # rounding can leave a tiny imaginary part on the diagonal; pin it to |v|^2
    k = np.arange(vec.shape[-1])
    out[..., k, k] = np.abs(vec) ** 2
    return out


@dataclass(frozen=True)
class HighPassConfig:
    """Sliding-window mean removal, optionally followed by a one-pole HPF."""

    sample_rate: float = 1000.0
    window_s: float = 1.0
    cutoff_hz: Optional[float] = None

    @property
    def window(self) -> int:
        return max(1, int(round(self.window_s * self.sample_rate)))


def _moving_mean(x: np.ndarray, w: int) -> np.ndarray:
    # windows are clamped to lie inside the series so every mean spans w samples
    n = x.shape[0]
    offset = x.mean(axis=0)
    cs = np.cumsum(x - offset, axis=0)
    cs = np.concatenate([np.zeros((1,) + x.shape[1:], dtype=cs.dtype), cs], axis=0)
    start = np.clip(np.arange(n) - w // 2, 0, n - w)
    return (cs[start + w] - cs[start]) / w + offset


def high_pass(series: np.ndarray, cfg: HighPassConfig = HighPassConfig()) -> np.ndarray:
    """Remove the (quasi-)static part of a time series along axis 0."""
    x = np.asarray(series)
    w = cfg.window
    if x.shape[0] < w:
        raise PreprocessError(f"series of length {x.shape[0]} shorter than window {w}")
    y = x - _moving_mean(x, w)
    if cfg.cutoff_hz:
        rc = 1.0 / (2 * np.pi * cfg.cutoff_hz)
        dt = 1.0 / cfg.sample_rate
        a = rc / (rc + dt)
        b, den = np.array([a, -a]), np.array([1.0, -a])
        zi = signal.lfilter_zi(b, den)[0] * y[:1]
        y, _ = signal.lfilter(b, den, y, axis=0, zi=zi)
    return y


def augment_reference(vec: np.ndarray, refs, kappa: float) -> np.ndarray:
    """h' + [beta; 0] with |beta| = kappa * max_t |h'_ref| and the phase of h'_ref."""
    if kappa <= 1:
        warnings.warn(f"kappa={kappa} <= 1: beta no longer dominates the static component",
                      stacklevel=3)
    refs = np.atleast_1d(refs)
    out = np.array(vec, dtype=complex, copy=True)
    ref_vals = vec[..., refs]                     # (T, N_sub, N_ref)
    mag = kappa * np.abs(ref_vals).max(axis=0)    # (N_sub, N_ref)
    out[..., refs] = ref_vals + mag * np.exp(1j * np.angle(ref_vals))
    return out


def beta_augmented_product(seq, ref, kappa: float = 100.0,
                           cfg: Optional[HighPassConfig] = None,
                           column_only: bool = False) -> np.ndarray:
    """High-passed product of the beta-augmented CSI vector with its conjugate.

    Returns (T, N_sub, K, K), or only the columns of the reference elements
    (T, N_sub, K[, N_ref]) when ``column_only``; filtering is entrywise, so
    the columns equal those of the full product.
    """
    vec = _vectors(seq)
    if cfg is None:
        rate = seq.sample_rate if isinstance(seq, CsiSequence) else 1000.0
        cfg = HighPassConfig(sample_rate=rate)
    refs = np.atleast_1d(ref)
    aug = augment_reference(vec, refs, kappa)
    if column_only:
        cols = aug[..., :, None] * np.conj(aug[..., None, refs])
        out = high_pass(cols, cfg)
        return out[..., 0] if np.ndim(ref) == 0 else out
    return high_pass(conjugate_product(aug), cfg)


def reference_column(dprime: np.ndarray, ref: int) -> np.ndarray:
    """Column ``ref`` of D' as (T, N_sub, K); accepts full or column-only input."""
    dprime = np.asarray(dprime)
    if dprime.ndim == 4:
        return dprime[..., :, ref]
    if dprime.ndim == 3:
        return dprime
    raise PreprocessError(f"unexpected D' shape {dprime.shape}")


def to_planes(column: np.ndarray) -> np.ndarray:
    """(T, N_sub, K) complex -> (T, 2, K, N_sub) amplitude/phase planes."""
    amp = np.abs(column)
    phase = np.angle(column)
    phase = np.where(phase <= -np.pi, np.pi, phase)
    return np.stack([amp, phase], axis=1).transpose(0, 1, 3, 2)


def extract_dynamic(dprime: np.ndarray, ref: int) -> np.ndarray:
    """Amplitude and phase of D'[:, ref] per packet, shape (T, 2, K, N_sub).

    The reference row itself is kept so the element count stays N_t*N_r;
    it carries no dynamic information.
    """
    return to_planes(reference_column(dprime, ref))


@dataclass
class DynamicStream:
    tensors: np.ndarray    # (T, 2, K, N_sub)
    timestamps: np.ndarray
    sample_rate: float
    ref: int
    column: Optional[np.ndarray] = None  # complex (T, N_sub, K)


def preprocess_sequence(seq: CsiSequence, n_ref: int = 1, kappa: float = 100.0,
                        window_s: float = 1.0, cutoff_hz: Optional[float] = None,
                        keep_column: bool = False) -> DynamicStream:
    cfg = HighPassConfig(sample_rate=seq.sample_rate, window_s=window_s, cutoff_hz=cutoff_hz)
    refs = select_reference(seq, n_ref)
    ref = int(refs[0])
    cols = beta_augmented_product(seq, refs, kappa, cfg, column_only=True)
    column = cols[..., 0]
    return DynamicStream(to_planes(column), seq.timestamps, seq.sample_rate, ref,
                         column if keep_column else None)


def complex_correlation(a: np.ndarray, b: np.ndarray, axis: int = 0) -> np.ndarray:
    """|corr(a, b)| along ``axis`` after mean removal."""
    a = a - a.mean(axis=axis, keepdims=True)
    b = b - b.mean(axis=axis, keepdims=True)
    num = np.abs(np.sum(a * np.conj(b), axis=axis))
    den = np.sqrt(np.sum(np.abs(a) ** 2, axis=axis) * np.sum(np.abs(b) ** 2, axis=axis))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, 0.0)


def linearity_report(stream_column: np.ndarray, h_d_vec: np.ndarray, ref: int) -> np.ndarray:
    """Per-element correlation of D'[:, ref] with the true h_d, averaged over
    subcarriers. Both inputs are (T, N_sub, K); the reference is NaN."""
    corr = complex_correlation(stream_column, h_d_vec, axis=0).mean(axis=0)
    corr = corr.astype(float)
    corr[ref] = np.nan
    return corr
