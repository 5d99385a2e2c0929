"""Closed-form resolution limits of a bistatic Wi-Fi sensing link.

All angles are radians. ``theta_r`` is the angle of arrival measured at the
receiver from the receiver->transmitter baseline, which is the convention
under which the ellipse relations below are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact SI value
COS_TOLERANCE = 1e-9


class ResolutionError(ValueError):
    """Raised when a resolution limit is undefined for the given geometry."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear Tx/Rx arrays separated by ``d_rt`` meters.

    ``d_rt`` may be zero (monostatic limit); every other field must be
    strictly positive.
    """

    n_tx: int
    n_rx: int
    d_tx: float
    d_rx: float
    wavelength: float
    bandwidth: float
    d_rt: float

    def __post_init__(self):
        if int(self.n_tx) != self.n_tx or int(self.n_rx) != self.n_rx:
            raise ValueError("antenna counts must be integers")
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("antenna counts must be >= 1")
        for name in ("d_tx", "d_rx", "wavelength", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.d_rt >= 0:
            raise ValueError("d_rt must be non-negative")

    @classmethod
    def from_carrier(cls, carrier_hz: float, *, n_tx: int = 3, n_rx: int = 3,
                     spacing_wavelengths: float = 0.5, bandwidth: float = 40e6,
                     d_rt: float = 7.0, c: float = SPEED_OF_LIGHT) -> "ArrayGeometry":
        """Geometry with half-wavelength (by default) element spacing."""
        lam = c / carrier_hz
        return cls(n_tx=n_tx, n_rx=n_rx, d_tx=spacing_wavelengths * lam,
                   d_rx=spacing_wavelengths * lam, wavelength=lam,
                   bandwidth=bandwidth, d_rt=d_rt)


def phase_difference(geom: ArrayGeometry, m: int, n: int, theta_t: float, theta_r: float) -> float:
    """Phase of the (tx m, rx n) path relative to the (0, 0) path."""
    if not 0 <= m < geom.n_tx:
        raise IndexError(f"tx index {m} out of range [0, {geom.n_tx})")
    if not 0 <= n < geom.n_rx:
        raise IndexError(f"rx index {n} out of range [0, {geom.n_rx})")
    return 2 * math.pi / geom.wavelength * (
        m * geom.d_tx * math.sin(theta_t) + n * geom.d_rx * math.sin(theta_r))


def steering_sum(geom: ArrayGeometry, theta_t: float, theta_r: float) -> complex:
    """Array factor: sum of unit phasors over all Tx/Rx element pairs."""
    m = np.arange(geom.n_tx)[:, None]
    n = np.arange(geom.n_rx)[None, :]
    phase = 2 * np.pi / geom.wavelength * (
        m * geom.d_tx * np.sin(theta_t) + n * geom.d_rx * np.sin(theta_r))
    return complex(np.exp(1j * phase).sum())


def _checked_cos(theta_r: float) -> float:
    cos_t = math.cos(theta_r)
    if abs(cos_t) < COS_TOLERANCE:
        raise ResolutionError(f"angular resolution diverges at theta_r={theta_r!r}")
    return cos_t


def angular_resolution(geom: ArrayGeometry, theta_r: float) -> float:
    cos_t = _checked_cos(theta_r)
    return geom.wavelength / (geom.n_rx * geom.d_rx * abs(cos_t))


def sum_path_resolution(geom: ArrayGeometry, c: float = SPEED_OF_LIGHT) -> float:
    """Resolution of the total Tx->target->Rx path length, c/B."""
    return c / geom.bandwidth


def _check_ellipse(geom: ArrayGeometry, L: float) -> None:
    if not L > geom.d_rt:
        raise ResolutionError(f"path sum L={L!r} must exceed d_rt={geom.d_rt!r}")


def ellipse_range_sensitivity(geom: ArrayGeometry, L: float, theta_r: float) -> float:
    """dl_t/dl_r on the ellipse l_t + l_r = L at receive angle theta_r."""
    _check_ellipse(geom, L)
    d = geom.d_rt
    denom = d * d + L * L - 2 * d * L * math.cos(theta_r)
    if denom < 1e-12 * max(L * L, 1.0):
        raise ResolutionError("degenerate geometry: target on the baseline")
    return 1.0 - 2 * d * d * math.sin(theta_r) ** 2 / denom


def range_resolution(geom: ArrayGeometry, L: float, theta_r: float,
                     c: float = SPEED_OF_LIGHT) -> float:
    """Receiver-to-target distance resolution for a path sum ``L``."""
    _check_ellipse(geom, L)
    d = geom.d_rt
    cos_t = math.cos(theta_r)
    num = d * d + L * L - 2 * d * L * cos_t
    return num / (2 * (L - d * cos_t) ** 2) * c / geom.bandwidth


def total_spatial_resolution(geom: ArrayGeometry, L: float, theta_r: float, l_r: float,
                             c: float = SPEED_OF_LIGHT) -> float:
    """Combined range and cross-range resolution at receiver distance ``l_r``.

    The range term is the receiver-distance resolution; the cross-range term
    is the arc spanned by one angular resolution cell at ``l_r``.
    """
    dl_r = range_resolution(geom, L, theta_r, c=c)
    dtheta = angular_resolution(geom, theta_r)
    return math.hypot(dl_r, 2 * l_r * math.tan(dtheta / 2))


def resolution_table(geom: ArrayGeometry, L: float, theta_r: float, l_r: float,
                     c: float = SPEED_OF_LIGHT) -> dict[str, float]:
    return {
        "angular_resolution_rad": angular_resolution(geom, theta_r),
        "sum_path_resolution_m": sum_path_resolution(geom, c=c),
        "range_resolution_m": range_resolution(geom, L, theta_r, c=c),
        "total_resolution_m": total_spatial_resolution(geom, L, theta_r, l_r, c=c),
    }
