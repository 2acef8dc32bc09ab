"""Spectral analytics: transmittance, absorbance, optical density,
CIE L*a*b*, DIN EN 410 visible transmittance, and multi-Gaussian
fluorescence peak decomposition.

Measured spectra are never interpolated: table-grid integrations pick
the nearest covered wavelength, and analysis windows require coverage
instead of extrapolating.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .colordata import WL_5NM, WL_10NM, D65_5NM, D65_10NM, CMF_1964_5NM, V_PHOTOPIC_10NM

OD_WINDOW = (650.0, 900.0)
T_CLAMP = (1e-6, 10.0)


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class RawSpectrum:
    wavelengths: np.ndarray
    sample_counts: np.ndarray
    dark_counts: np.ndarray
    reference_counts: np.ndarray

    def __post_init__(self):
        wl = self.wavelengths
        n = wl.shape[0]
        if n < 2 or np.any(np.diff(wl) <= 0):
            raise SpectrumError("wavelengths must be strictly increasing, length >= 2")
        for a in (self.sample_counts, self.dark_counts, self.reference_counts):
            if a.shape != wl.shape:
                raise SpectrumError("count channels must match wavelength grid")


@dataclass(frozen=True)
class TransmittanceSpectrum:
    wavelengths: np.ndarray
    T: np.ndarray
    clamped: bool = False

    def __post_init__(self):
        if self.T.shape != self.wavelengths.shape:
            raise SpectrumError("T must match wavelength grid")


@dataclass(frozen=True)
class LabColor:
    L_star: float
    a_star: float
    b_star: float


@dataclass(frozen=True)
class GaussianPeak:
    center: float     # nm
    width: float      # nm, standard deviation
    amplitude: float  # spectrum units

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("peak width must be positive")
        if self.amplitude < 0:
            raise ValueError("peak amplitude must be non-negative")


def transmittance(raw: RawSpectrum) -> TransmittanceSpectrum:
    """Pointwise (sample - dark) / (reference - dark), clamped to
    [1e-6, 10]; the clamp is flagged in the result."""
    denom = raw.reference_counts - raw.dark_counts
    if np.any(denom <= 0):
        raise SpectrumError("reference counts must exceed dark counts")
    T = (raw.sample_counts - raw.dark_counts) / denom
    clipped = np.clip(T, *T_CLAMP)
    return TransmittanceSpectrum(raw.wavelengths, clipped,
                                 clamped=bool(np.any(clipped != T)))


def absorbance(t: TransmittanceSpectrum) -> np.ndarray:
    """A(lambda) = -log10(T(lambda))."""
    return -np.log10(t.T)


def _require_coverage(wl: np.ndarray, lo: float, hi: float, what: str) -> None:
    if wl[0] > lo or wl[-1] < hi:
        raise SpectrumError(
            f"{what} requires coverage of [{lo:g}, {hi:g}] nm, "
            f"got [{wl[0]:g}, {wl[-1]:g}]")


def optical_density(wavelengths: np.ndarray, A: np.ndarray) -> float:
    """Maximum absorbance within the 650-900 nm window."""
    wl = np.asarray(wavelengths, dtype=float)
    _require_coverage(wl, *OD_WINDOW, "optical density")
    sel = (wl >= OD_WINDOW[0]) & (wl <= OD_WINDOW[1])
    return float(np.max(np.asarray(A)[sel]))


def _nearest(values: np.ndarray, wl: np.ndarray, grid: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(wl, grid)
    idx = np.clip(idx, 1, wl.shape[0] - 1)
    left_closer = (grid - wl[idx - 1]) < (wl[idx] - grid)
    idx = idx - left_closer.astype(int)
    return values[idx]


_F_THRESHOLD = (6.0 / 29.0) ** 3


def _lab_f(x: np.ndarray) -> np.ndarray:
    return np.where(x > _F_THRESHOLD, np.cbrt(x),
                    x / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)


def cielab(t: TransmittanceSpectrum) -> LabColor:
    """CIE L*a*b* under illuminant D65 and the 1964 10-degree observer.

    Tristimulus values by rectangle-rule integration of T * D65 * CMF on
    the 5 nm table grid, normalized so a perfect transmitter has Y = 100.
    """
    _require_coverage(t.wavelengths, 380.0, 780.0, "CIE L*a*b*")
    Tg = _nearest(t.T, t.wavelengths, WL_5NM)
    weights = D65_5NM[:, None] * CMF_1964_5NM  # (81, 3)
    XYZ = 100.0 * (Tg[:, None] * weights).sum(axis=0)
    white = 100.0 * weights.sum(axis=0)
    norm = white[1]  # perfect transmitter -> Y = 100
    XYZ = XYZ / norm * 100.0
    white = white / norm * 100.0
    fx, fy, fz = _lab_f(XYZ / white)
    return LabColor(L_star=float(116.0 * fy - 16.0),
                    a_star=float(500.0 * (fx - fy)),
                    b_star=float(200.0 * (fy - fz)))


def tau_v(t: TransmittanceSpectrum) -> float:
    """Visible light transmittance in percent: the D65 * V(lambda)-weighted
    average of T on the 10 nm grid (DIN EN 410 convention)."""
    _require_coverage(t.wavelengths, 380.0, 780.0, "visible transmittance")
    Tg = _nearest(t.T, t.wavelengths, WL_10NM)
    w = D65_10NM * V_PHOTOPIC_10NM
    return float(np.sum(Tg * w) / np.sum(w) * 100.0)


# ---------------------------------------------------------------------------
# Multi-Gaussian peak decomposition (Gauss-Newton with Levenberg damping).

class PeakFitError(RuntimeError):
    pass


def _gauss_model(params: np.ndarray, wl: np.ndarray) -> np.ndarray:
    a = params[0::3]
    c = params[1::3]
    w = params[2::3]
    g = np.exp(-((wl[:, None] - c) ** 2) / (2.0 * w ** 2))
    return g @ a


def _gauss_jacobian(params: np.ndarray, wl: np.ndarray) -> np.ndarray:
    n_peaks = params.shape[0] // 3
    J = np.empty((wl.shape[0], 3 * n_peaks))
    for i in range(n_peaks):
        a, c, w = params[3 * i:3 * i + 3]
        d = wl - c
        g = np.exp(-d * d / (2.0 * w * w))
        J[:, 3 * i] = g
        J[:, 3 * i + 1] = a * g * d / (w * w)
        J[:, 3 * i + 2] = a * g * d * d / (w ** 3)
    return J


def _default_inits(wl: np.ndarray, y: np.ndarray, n_peaks: int) -> list[np.ndarray]:
    """Deterministic starting points for a blind fit.

    First choice places centers by greedy residual subtraction (finds
    shoulder peaks that are not local maxima); equal spacing across the
    support is kept as a fallback start.
    """
    span = wl[-1] - wl[0]
    width = span / (4.0 * n_peaks)
    resid = y.astype(float).copy()
    greedy = []
    for _ in range(n_peaks):
        i = int(np.argmax(resid))
        a = max(float(resid[i]), 0.0)
        c = float(wl[i])
        greedy.extend([a, c, width])
        resid = resid - a * np.exp(-((wl - c) ** 2) / (2.0 * width ** 2))
    centers = wl[0] + span * (np.arange(n_peaks) + 0.5) / n_peaks
    spaced = [v for c in centers
              for v in (float(y[np.argmin(np.abs(wl - c))]), float(c), width)]
    return [np.array(greedy), np.array(spaced)]


def _levenberg(params: np.ndarray, wl: np.ndarray, y: np.ndarray,
               max_iter: int, rtol: float) -> tuple[np.ndarray, float]:
    resid = _gauss_model(params, wl) - y
    cost = float(resid @ resid)
    damp = 1e-3
    for _ in range(max_iter):
        if cost == 0.0:
            break
        J = _gauss_jacobian(params, wl)
        JtJ = J.T @ J
        g = J.T @ resid
        accepted = False
        while damp <= 1e12:
            M = JtJ + damp * np.diag(np.maximum(np.diag(JtJ), 1e-12))
            try:
                step = np.linalg.solve(M, -g)
            except np.linalg.LinAlgError:
                damp *= 10.0
                continue
            trial = params + step
            if np.any(trial[2::3] <= 0):  # widths must stay positive
                damp *= 10.0
                continue
            trial_resid = _gauss_model(trial, wl) - y
            trial_cost = float(trial_resid @ trial_resid)
            if trial_cost <= cost:
                accepted = True
                break
            damp *= 10.0
        if not accepted:
            raise PeakFitError("Levenberg damping exhausted without progress")
        params, resid = trial, trial_resid
        improved = cost - trial_cost
        cost = trial_cost
        damp = max(damp / 10.0, 1e-12)
        if improved <= rtol * max(cost, 1e-300):
            break
    if np.any(params[0::3] < -1e-6):
        raise PeakFitError("converged to a negative peak amplitude")
    return params, cost


def fit_gaussian_peaks(wavelengths, intensities, n_peaks: int,
                       init: list[GaussianPeak] | None = None,
                       max_iter: int = 200, rtol: float = 1e-8
                       ) -> tuple[list[GaussianPeak], float]:
    """Least-squares decomposition into a sum of Gaussians.

    Returns the peaks sorted by center and the final residual norm.
    Converged when the relative residual change of an accepted step falls
    below `rtol`, diverged when the Levenberg damping is exhausted.
    """
    wl = np.asarray(wavelengths, dtype=float)
    y = np.asarray(intensities, dtype=float)
    if n_peaks < 1:
        raise ValueError("n_peaks must be >= 1")
    if wl.shape[0] <= 3 * n_peaks:
        raise ValueError("spectrum must have more points than fit parameters")

    if init is None:
        starts = _default_inits(wl, y, n_peaks)
    else:
        if len(init) != n_peaks:
            raise ValueError("init must supply one guess per peak")
        centers = np.array([p.center for p in init])
        if np.min(np.diff(np.sort(centers)), initial=np.inf) < 1e-9:
            raise ValueError("degenerate init: coincident peak centers")
        starts = [np.array([v for p in init
                            for v in (p.amplitude, p.center, p.width)])]

    best: tuple[np.ndarray, float] | None = None
    last_error: PeakFitError | None = None
    for start in starts:
        try:
            fitted, cost = _levenberg(start, wl, y, max_iter, rtol)
        except PeakFitError as err:
            last_error = err
            continue
        if best is None or cost < best[1]:
            best = (fitted, cost)
    if best is None:
        raise last_error if last_error is not None \
            else PeakFitError("no usable starting point")
    params, cost = best

    peaks = []
    for i in range(n_peaks):
        a, c, w = params[3 * i:3 * i + 3]
        if -1e-6 < a < 0:
            a = 0.0
        peaks.append(GaussianPeak(center=float(c), width=float(abs(w)),
                                  amplitude=float(a)))
    peaks.sort(key=lambda p: p.center)
    return peaks, float(np.sqrt(cost))


# ---------------------------------------------------------------------------
# CSV ingest: header `wavelength_nm,sample,dark,reference`.

def read_spectrum_csv(path) -> RawSpectrum:
    with open(Path(path), newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["wavelength_nm", "sample", "dark", "reference"]:
            raise SpectrumError("expected header 'wavelength_nm,sample,dark,reference'")
        rows = [[float(v) for v in row] for row in reader if row]
    arr = np.array(rows, dtype=float)
    if arr.size == 0:
        raise SpectrumError("empty spectrum file")
    return RawSpectrum(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def write_spectrum_csv(path, raw: RawSpectrum) -> None:
    with open(Path(path), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["wavelength_nm", "sample", "dark", "reference"])
        for i in range(raw.wavelengths.shape[0]):
            writer.writerow([f"{raw.wavelengths[i]:.6g}",
                             f"{raw.sample_counts[i]:.6f}",
                             f"{raw.dark_counts[i]:.6f}",
                             f"{raw.reference_counts[i]:.6f}"])
