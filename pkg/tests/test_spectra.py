"""Spectral analytics: transmittance, OD, colorimetry, peak fitting."""

import numpy as np
import pytest

from filmlab.spectra import (GaussianPeak, PeakFitError, RawSpectrum,
                             SpectrumError, TransmittanceSpectrum, absorbance,
                             cielab, fit_gaussian_peaks, optical_density,
                             read_spectrum_csv, tau_v, transmittance,
                             write_spectrum_csv)

WL = np.arange(380.0, 1001.0, 1.0)


def flat_T(value, wl=WL):
    return TransmittanceSpectrum(wl, np.full(wl.shape, float(value)))


def raw_from_T(T, wl=WL, ref=40000.0, dark=100.0):
    reference = np.full(wl.shape, ref)
    darkc = np.full(wl.shape, dark)
    sample = darkc + (reference - darkc) * T
    return RawSpectrum(wl, sample, darkc, reference)


# ---------------------------------------------------------------------------
# transmittance / absorbance

def test_transmittance_sample_equals_reference():
    raw = raw_from_T(np.ones(WL.shape))
    t = transmittance(raw)
    assert np.allclose(t.T, 1.0)
    assert not t.clamped


def test_transmittance_sample_equals_dark_clamps():
    raw = raw_from_T(np.zeros(WL.shape))
    t = transmittance(raw)
    assert np.all(t.T == 1e-6)
    assert t.clamped


def test_transmittance_round_trip_known_T():
    rng = np.random.default_rng(0)
    T = rng.uniform(0.05, 1.0, size=WL.shape)
    t = transmittance(raw_from_T(T))
    assert np.allclose(t.T, T, atol=1e-12)


def test_transmittance_rejects_reference_below_dark():
    wl = np.array([400.0, 500.0])
    with pytest.raises(SpectrumError):
        transmittance(RawSpectrum(wl, np.array([10.0, 10.0]),
                                  np.array([100.0, 100.0]),
                                  np.array([90.0, 150.0])))


def test_absorbance_decade_identities():
    wl = np.array([400.0, 500.0, 600.0])
    t = TransmittanceSpectrum(wl, np.array([1.0, 0.1, 0.01]))
    assert np.allclose(absorbance(t), [0.0, 1.0, 2.0], atol=1e-12)


def test_absorbance_forward_inverse_identity():
    rng = np.random.default_rng(1)
    A = rng.uniform(0, 6, size=200)
    wl = np.linspace(380, 1000, 200)
    t = TransmittanceSpectrum(wl, np.power(10.0, -A))
    assert np.allclose(absorbance(t), A, atol=1e-12)


def test_raw_spectrum_validation():
    with pytest.raises(SpectrumError):
        RawSpectrum(np.array([500.0, 400.0]), np.zeros(2), np.zeros(2), np.zeros(2))
    with pytest.raises(SpectrumError):
        RawSpectrum(np.array([400.0, 500.0]), np.zeros(3), np.zeros(2), np.zeros(2))


# ---------------------------------------------------------------------------
# optical density

def test_od_flat_spectrum():
    assert optical_density(WL, np.full(WL.shape, 0.3)) == pytest.approx(0.3)


def test_od_band_in_window():
    A = 1.5 * np.exp(-((WL - 712.0) ** 2) / (2 * 60.0 ** 2))
    assert optical_density(WL, A) == pytest.approx(1.5, abs=1e-4)


def test_od_band_outside_window_leaves_edge_tail():
    A = 2.0 * np.exp(-((WL - 500.0) ** 2) / (2 * 60.0 ** 2))
    # window max sits at the 650 nm edge; oracle is the band formula there
    expected = 2.0 * np.exp(-(150.0 ** 2) / (2 * 60.0 ** 2))
    assert optical_density(WL, A) == pytest.approx(expected, abs=1e-9)


def test_od_requires_window_coverage():
    wl = np.arange(380.0, 800.0, 1.0)
    with pytest.raises(SpectrumError):
        optical_density(wl, np.zeros(wl.shape))


def test_od_stable_under_regridding():
    fine = np.arange(380.0, 1000.05, 0.1)
    band = lambda wl: 1.2 * np.exp(-((wl - 712.0) ** 2) / (2 * 60.0 ** 2))
    coarse_od = optical_density(WL, band(WL))
    fine_od = optical_density(fine, band(fine))
    assert abs(coarse_od - fine_od) < 1e-4  # < grid-resolution bound


# ---------------------------------------------------------------------------
# colorimetry

def test_cielab_perfect_transmitter_is_white_point():
    lab = cielab(flat_T(1.0))
    assert lab.L_star == pytest.approx(100.0, abs=1e-6)
    assert lab.a_star == pytest.approx(0.0, abs=1e-6)
    assert lab.b_star == pytest.approx(0.0, abs=1e-6)


def test_cielab_neutral_gray():
    lab = cielab(flat_T(0.5))
    assert lab.a_star == pytest.approx(0.0, abs=1e-6)
    assert lab.b_star == pytest.approx(0.0, abs=1e-6)
    assert 0.0 < lab.L_star < 100.0


def test_cielab_constant_T_is_neutral_for_any_level():
    for v in (0.05, 0.25, 0.87):
        lab = cielab(flat_T(v))
        assert abs(lab.a_star) < 1e-6 and abs(lab.b_star) < 1e-6


def test_cielab_red_absorbing_band_looks_blue():
    # strong absorption near 712 nm transmits blue: negative b*
    A = 1.5 * np.exp(-((WL - 712.0) ** 2) / (2 * 60.0 ** 2))
    lab = cielab(TransmittanceSpectrum(WL, np.power(10.0, -A)))
    assert lab.b_star < 0.0


def test_cielab_requires_visible_coverage():
    wl = np.arange(500.0, 1000.0, 1.0)
    with pytest.raises(SpectrumError):
        cielab(TransmittanceSpectrum(wl, np.ones(wl.shape)))


def test_tau_v_perfect_transmitter():
    assert tau_v(flat_T(1.0)) == pytest.approx(100.0)


def test_tau_v_constant_factor():
    assert tau_v(flat_T(0.87)) == pytest.approx(87.0, abs=1e-9)


def test_tau_v_linearity():
    rng = np.random.default_rng(2)
    T = rng.uniform(0.1, 1.0, size=WL.shape)
    base = tau_v(TransmittanceSpectrum(WL, T))
    for alpha in (0.25, 0.5, 0.9):
        scaled = tau_v(TransmittanceSpectrum(WL, alpha * T))
        assert scaled == pytest.approx(alpha * base, rel=1e-12)


# ---------------------------------------------------------------------------
# peak fitting

def _gaussians(wl, peaks):
    out = np.zeros_like(wl)
    for a, c, w in peaks:
        out += a * np.exp(-((wl - c) ** 2) / (2 * w ** 2))
    return out


def test_fit_single_exact_gaussian():
    wl = np.arange(400.0, 701.0, 1.0)
    y = _gaussians(wl, [(1.0, 550.0, 30.0)])
    peaks, resid = fit_gaussian_peaks(wl, y, 1)
    assert peaks[0].amplitude == pytest.approx(1.0, abs=1e-6)
    assert peaks[0].center == pytest.approx(550.0, abs=1e-6)
    assert peaks[0].width == pytest.approx(30.0, abs=1e-6)
    assert resid < 1e-6


def test_fit_three_gaussians_with_noise():
    wl = np.arange(450.0, 701.0, 1.0)
    true = [(1.0, 520.0, 18.0), (0.8, 560.0, 20.0), (0.6, 620.0, 22.0)]
    rng = np.random.default_rng(3)
    y = _gaussians(wl, true)
    y_noisy = y + 0.02 * y.max() * rng.normal(size=wl.shape)
    peaks, _ = fit_gaussian_peaks(wl, y_noisy, 3)
    centers = [p.center for p in peaks]
    for got, (_, c, _) in zip(centers, true):
        assert abs(got - c) <= 2.0


def test_fit_flat_zero_spectrum():
    wl = np.arange(400.0, 501.0, 1.0)
    peaks, resid = fit_gaussian_peaks(wl, np.zeros(wl.shape), 1)
    assert peaks[0].amplitude == pytest.approx(0.0, abs=1e-9)
    assert resid == pytest.approx(0.0, abs=1e-9)


def test_fit_residual_non_increasing():
    # every accepted Levenberg step lowers the cost, so the final
    # residual can never exceed that of the initial guess
    wl = np.arange(450.0, 701.0, 1.0)
    y = _gaussians(wl, [(1.0, 520.0, 18.0), (0.7, 600.0, 25.0)])
    init = [GaussianPeak(500.0, 30.0, 0.5), GaussianPeak(640.0, 30.0, 0.5)]
    init_resid = np.linalg.norm(
        _gaussians(wl, [(p.amplitude, p.center, p.width) for p in init]) - y)
    _, final_resid = fit_gaussian_peaks(wl, y, 2, init=init)
    assert final_resid <= init_resid + 1e-12


def test_fit_validation():
    wl = np.arange(400.0, 405.0, 1.0)
    with pytest.raises(ValueError):
        fit_gaussian_peaks(wl, np.zeros(wl.shape), 2)  # too few points
    wl = np.arange(400.0, 501.0, 1.0)
    with pytest.raises(ValueError):
        fit_gaussian_peaks(wl, np.zeros(wl.shape), 0)
    degenerate = [GaussianPeak(500.0, 10.0, 1.0), GaussianPeak(500.0, 12.0, 1.0)]
    with pytest.raises(ValueError):
        fit_gaussian_peaks(wl, np.zeros(wl.shape), 2, init=degenerate)


def test_gaussian_peak_validation():
    with pytest.raises(ValueError):
        GaussianPeak(500.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        GaussianPeak(500.0, 10.0, -0.5)


# ---------------------------------------------------------------------------
# CSV ingest

def test_spectrum_csv_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    T = rng.uniform(0.2, 1.0, size=WL.shape)
    raw = raw_from_T(T)
    path = tmp_path / "spectrum.csv"
    write_spectrum_csv(path, raw)
    back = read_spectrum_csv(path)
    assert np.allclose(back.wavelengths, raw.wavelengths)
    assert np.allclose(back.sample_counts, raw.sample_counts, atol=1e-4)


def test_spectrum_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nm,s,d,r\n400,1,0,2\n")
    with pytest.raises(SpectrumError):
        read_spectrum_csv(path)
