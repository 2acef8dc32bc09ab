"""Deterministic virtual thin-film laboratory.

A hidden process-to-property ground truth calibrated to two captioned
anchor samples and the campaign's reported objective ranges, plus forward
synthesis of raw spectra and defect images and a replicate-noise model.
The functional forms are the artifact's own; they live behind this module
boundary so alternative truths can be swapped in for optimizer stress
tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import ObjectiveVector, ParameterSet, ParameterBounds
from .spectra import RawSpectrum
from .vision import GrayImage

# OD anchor system (two captioned operating points at c=4 wt%, 500 rpm,
# 10 s: acceleration 3000 rpm/s -> OD 1.5, 1000 rpm/s -> OD 0.6) solved
# exactly for (kappa, a_half) with od_sat = 10, tau_t = 8 s fixed.
# Residuals < 1e-12 on both anchors.
_KAPPA = 2.188253844670923
_A_HALF = 9396.221660347146


@dataclass(frozen=True)
class GroundTruthParams:
    kappa: float = _KAPPA          # OD scale
    a_half: float = _A_HALF        # rpm/s acceleration half-saturation
    tau_t: float = 8.0             # s time constant
    omega_ref: float = 500.0       # rpm reference speed
    od_sat: float = 10.0           # soft ceiling
    d0: float = 0.04               # defect floor, percent
    d_c: float = 0.0875            # concentration/speed defect coefficient
    d_a: float = 0.0225            # acceleration defect coefficient
    d_spike: float = 1.30          # low-speed spike amplitude
    spike_center: float = 300.0    # rpm
    spike_width: float = 100.0     # rpm
    bright_share: float = 0.6      # bright-channel share of total defect


@dataclass(frozen=True)
class NoiseModel:
    """Heteroscedastic replicate noise, sigma = base + rel * |true value|,
    Gaussian truncated at the physical bounds."""

    sigma_od_base: float = 0.012
    sigma_od_rel: float = 0.010
    sigma_def_base: float = 0.055   # per channel, percentage points
    sigma_def_rel: float = 0.050

    def __post_init__(self):
        if min(self.sigma_od_base, self.sigma_od_rel,
               self.sigma_def_base, self.sigma_def_rel) < 0:
            raise ValueError("noise constants must be non-negative")


ZERO_NOISE = NoiseModel(0.0, 0.0, 0.0, 0.0)


def ground_truth(p: ParameterSet, gt: GroundTruthParams = GroundTruthParams(),
                 bounds: ParameterBounds = ParameterBounds()) -> ObjectiveVector:
    """Noiseless objectives for a parameter set inside the campaign box."""
    p.validate(bounds)
    c, w, a, t = p.concentration, p.spin_speed, p.spin_acceleration, p.spin_time
    od_raw = (gt.kappa * c * np.sqrt(gt.omega_ref / w)
              * (1.0 - np.exp(-t / gt.tau_t)) * (a / (a + gt.a_half)))
    od = gt.od_sat * np.tanh(od_raw / gt.od_sat)
    d = (gt.d0
         + gt.d_c * (c / 4.0) ** 2 * (gt.omega_ref / w)
         + gt.d_a * (a / 3000.0) ** 2 * (c / 4.0)
         + gt.d_spike * np.exp(-((w - gt.spike_center) / gt.spike_width) ** 2) * (c / 4.0))
    return ObjectiveVector(optical_density=float(od),
                           defect_bright=float(gt.bright_share * d),
                           defect_dark=float((1.0 - gt.bright_share) * d))


# ---------------------------------------------------------------------------
# Forward synthesis

SPECTRUM_GRID = np.arange(380.0, 1000.5, 1.0)
BAND_CENTER = 712.0     # nm, IVCT band of the coating
BAND_WIDTH = 60.0       # nm
BASELINE_A = 0.05       # absorbance floor of substrate + film
DARK_LEVEL = 80.0       # counts
READ_NOISE = 2.0        # counts


def _lamp_profile(wl: np.ndarray) -> np.ndarray:
    # smooth, strictly positive reference spectrum
    return 48000.0 * np.exp(-((wl - 640.0) / 320.0) ** 2) + 2000.0


def synthesize_spectrum(od: float, seed) -> RawSpectrum:
    """Raw spectrum triple whose analysis yields absorbance
    od * gaussian(712 nm, 60 nm) + 0.05 baseline, with CCD read noise."""
    if od < 0:
        raise ValueError("od must be >= 0")
    rng = np.random.default_rng(seed)
    wl = SPECTRUM_GRID
    A = od * np.exp(-((wl - BAND_CENTER) ** 2) / (2.0 * BAND_WIDTH ** 2)) + BASELINE_A
    T = np.power(10.0, -A)
    reference = _lamp_profile(wl) + rng.normal(0.0, READ_NOISE, wl.shape)
    dark = DARK_LEVEL + rng.normal(0.0, READ_NOISE, wl.shape)
    sample = dark + (_lamp_profile(wl) - DARK_LEVEL) * T + rng.normal(0.0, READ_NOISE, wl.shape)
    return RawSpectrum(wl, sample, dark, reference)


IMAGE_SIZE = 1024
BG_BRIGHT, BG_DARK = 200, 30
DEFECT_ON_BRIGHT, DEFECT_ON_DARK = 40, 220
TEXTURE_SIGMA = 3.0
DISK_RADIUS_RANGE = (2.0, 20.0)


def synthesize_image_with_ledger(defect_fraction: float, background: str,
                                 seed, size: int = IMAGE_SIZE
                                 ) -> tuple[GrayImage, int]:
    """Synthetic sample photograph plus the exact count of painted defect
    pixels (the oracle ledger for round-trip tests).

    Disks with log-uniform radii are painted until the fresh-pixel count
    reaches the target; the last disks shrink toward the remaining budget
    so the overshoot stays below one minimum-size disk.
    """
    if not 0.0 <= defect_fraction <= 5.0:
        raise ValueError("defect fraction must lie in [0, 5] percent")
    if background == "bright":
        bg, fg = BG_BRIGHT, DEFECT_ON_BRIGHT
    elif background == "dark":
        bg, fg = BG_DARK, DEFECT_ON_DARK
    else:
        raise ValueError(f"background must be 'bright' or 'dark', got {background!r}")
    rng = np.random.default_rng(seed)
    target = int(round(defect_fraction / 100.0 * size * size))
    painted = np.zeros((size, size), dtype=bool)
    count = 0
    r_lo, r_hi = DISK_RADIUS_RANGE
    while count < target:
        remaining = target - count
        r = float(np.exp(rng.uniform(np.log(r_lo), np.log(r_hi))))
        r = min(r, max(r_lo, np.sqrt(remaining / np.pi)))
        cx, cy = rng.uniform(0, size, 2)
        x0, x1 = max(0, int(cx - r - 1)), min(size, int(cx + r + 2))
        y0, y1 = max(0, int(cy - r - 1)), min(size, int(cy + r + 2))
        if x0 >= x1 or y0 >= y1:
            continue
        yy, xx = np.mgrid[y0:y1, x0:x1]
        disk = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        patch = painted[y0:y1, x0:x1]
        fresh = int(np.count_nonzero(disk & ~patch))
        patch |= disk
        count += fresh
    frame = np.full((size, size), float(bg))
    frame[painted] = float(fg)
    frame += rng.normal(0.0, TEXTURE_SIGMA, frame.shape)
    img = GrayImage(np.clip(np.round(frame), 0, 255).astype(np.uint8))
    return img, count


def synthesize_image(defect_fraction: float, background: str, seed,
                     size: int = IMAGE_SIZE) -> GrayImage:
    img, _ = synthesize_image_with_ledger(defect_fraction, background, seed, size)
    return img


@dataclass(frozen=True)
class ExperimentData:
    """Raw outputs of one virtual experiment."""

    spectrum: RawSpectrum
    bright_image: GrayImage
    dark_image: GrayImage
    ambient: tuple[float, float]  # (temperature degC, relative humidity %)


AMBIENT_T_RANGE = (20.0, 24.0)
AMBIENT_RH_RANGE = (35.0, 55.0)


def run_experiment(p: ParameterSet, noise: NoiseModel, seed,
                   gt: GroundTruthParams = GroundTruthParams(),
                   bounds: ParameterBounds = ParameterBounds(),
                   image_size: int = IMAGE_SIZE) -> ExperimentData:
    """One virtual experiment: noisy realization of the ground truth,
    rendered into a raw spectrum and a bright/dark image pair.

    Fully deterministic per seed. The spectral band amplitude is reduced
    by the synthesis baseline so the analysis pipeline recovers the noisy
    optical density itself. Ambient values are metadata only.
    """
    truth = ground_truth(p, gt, bounds)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    kids = ss.spawn(5)
    rng = np.random.default_rng(kids[0])

    sigma_od = noise.sigma_od_base + noise.sigma_od_rel * truth.optical_density
    od_star = truth.optical_density + rng.normal(0.0, sigma_od) if sigma_od > 0 else truth.optical_density
    od_star = float(np.clip(od_star, 0.0, gt.od_sat + 3.0 * max(sigma_od, 1e-12)))

    defects = {}
    for name, true_val in (("bright", truth.defect_bright), ("dark", truth.defect_dark)):
        sigma = noise.sigma_def_base + noise.sigma_def_rel * true_val
        val = true_val + rng.normal(0.0, sigma) if sigma > 0 else true_val
        defects[name] = float(np.clip(val, 0.0, 5.0))

    spectrum = synthesize_spectrum(max(0.0, od_star - BASELINE_A), kids[1])
    bright = synthesize_image(defects["bright"], "bright", kids[2], image_size)
    dark = synthesize_image(defects["dark"], "dark", kids[3], image_size)
    arng = np.random.default_rng(kids[4])
    ambient = (float(arng.uniform(*AMBIENT_T_RANGE)),
               float(arng.uniform(*AMBIENT_RH_RANGE)))
    return ExperimentData(spectrum, bright, dark, ambient)
