"""Phase screen generation and frozen-flow tests."""

import numpy as np
import pytest

from wavetomo import (ConfigurationError, LayerSpec, PhaseScreen, VonKarmanSpectrum,
                      advance_frozen_flow, dump_screen, fried_strength,
                      generate_screen, load_screen)
from wavetomo.atmosphere import (SCREEN_HEADER_BYTES, make_atmosphere,
                                 normalize_strengths, periodogram_slope,
                                 validate_layer_stack)

SPECTRUM = VonKarmanSpectrum(outer_scale_m=25.0)


def small_spec(n=128, delta=0.5, strength=None):
    if strength is None:
        strength = fried_strength(0.157)
    return LayerSpec(altitude_m=0.0, strength=strength, grid_size=n,
                     grid_spacing_m=delta)


def test_zero_strength_rejected():
    with pytest.raises(ConfigurationError):
        LayerSpec(altitude_m=0.0, strength=0.0, grid_size=64, grid_spacing_m=0.5)


def test_non_power_of_two_rejected():
    with pytest.raises(ConfigurationError):
        LayerSpec(altitude_m=0.0, strength=1.0, grid_size=96, grid_spacing_m=0.5)


def test_nonpositive_outer_scale_rejected():
    with pytest.raises(ConfigurationError):
        VonKarmanSpectrum(outer_scale_m=0.0)


def test_same_seed_bit_identical():
    spec = small_spec(n=64)
    a = generate_screen(spec, SPECTRUM, seed=42)
    b = generate_screen(spec, SPECTRUM, seed=42)
    assert np.array_equal(a.values, b.values)


def test_distinct_seeds_decorrelate():
    spec = small_spec(n=512)
    a = generate_screen(spec, SPECTRUM, seed=1).values.ravel()
    b = generate_screen(spec, SPECTRUM, seed=2).values.ravel()
    corr = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    assert abs(corr) < 0.1


def test_piston_removed():
    scr = generate_screen(small_spec(), SPECTRUM, seed=3)
    assert abs(scr.values.mean()) < 1e-12 * scr.rms


def test_discrete_variance_matches_bin_sum():
    # oracle: variance of the synthesized field equals the Riemann sum of the
    # spectral density over the nonzero FFT bins
    spec = small_spec(n=128)
    n, d = spec.grid_size, spec.grid_spacing_m
    k = 2 * np.pi * np.fft.fftfreq(n, d=d)
    kx, ky = np.meshgrid(k, k)
    density = SPECTRUM.density(kx, ky, spec.strength)
    density[0, 0] = 0.0
    expected = density.sum() * (2 * np.pi / (n * d)) ** 2
    emp = np.mean([np.var(generate_screen(spec, SPECTRUM, seed=i).values)
                   for i in range(40)])
    assert abs(emp - expected) / expected < 0.05


def test_spectrum_finite_at_zero():
    val = SPECTRUM.density(np.array(0.0), np.array(0.0), 1.0)
    assert np.isfinite(val)
    assert val == pytest.approx(SPECTRUM.knee ** (-11.0 / 3.0))


def test_periodogram_slope_inertial_range():
    # averaged over 20 seeds on 512^2 screens, log-log slope within +-0.3
    spec = small_spec(n=512)
    slope = periodogram_slope([(spec, i) for i in range(20)], SPECTRUM,
                              band=(0.6, 6.0))
    assert abs(slope - (-11.0 / 3.0)) < 0.3


def test_band_averaged_power_within_ten_percent():
    # ensemble periodogram vs target density, band-averaged over the
    # inertial range
    spec = small_spec(n=512)
    n, d = spec.grid_size, spec.grid_spacing_m
    acc = np.zeros((n, n))
    nseed = 20
    for i in range(nseed):
        scr = generate_screen(spec, SPECTRUM, seed=100 + i)
        acc += np.abs(np.fft.fft2(scr.values)) ** 2 * d ** 2 / ((2 * np.pi) ** 2 * n * n)
    acc /= nseed
    k = 2 * np.pi * np.fft.fftfreq(n, d=d)
    kx, ky = np.meshgrid(k, k)
    kr = np.hypot(kx, ky)
    target = SPECTRUM.density(kx, ky, spec.strength)
    band = (kr > 0.6) & (kr < 6.0)
    ratio = np.exp(np.mean(np.log(acc[band]))) / np.exp(np.mean(np.log(target[band])))
    assert abs(ratio - 1.0) < 0.10


def test_frozen_flow_zero_wind_identical():
    scr = generate_screen(small_spec(n=64), SPECTRUM, seed=5)
    moved = advance_frozen_flow(scr, (0.0, 0.0), 1.0)
    assert np.array_equal(moved.values, scr.values)


def test_frozen_flow_integer_shift_is_roll():
    scr = generate_screen(small_spec(n=64), SPECTRUM, seed=6)
    d = scr.spacing_m
    moved = advance_frozen_flow(scr, (d, 0.0), 1.0)
    assert np.array_equal(moved.values, np.roll(scr.values, 1, axis=1))
    moved_y = advance_frozen_flow(scr, (0.0, -2.0 * d), 1.0)
    assert np.array_equal(moved_y.values, np.roll(scr.values, -2, axis=0))


def test_frozen_flow_subpixel_composition():
    scr = generate_screen(small_spec(n=64), SPECTRUM, seed=7)
    d = scr.spacing_m
    half = advance_frozen_flow(scr, (0.5 * d, 0.0), 1.0)
    full = advance_frozen_flow(half, (0.5 * d, 0.0), 1.0)
    ref = advance_frozen_flow(scr, (d, 0.0), 1.0)
    assert np.max(np.abs(full.values - ref.values)) < 1e-3 * scr.rms


def test_frozen_flow_variance_preserved():
    scr = generate_screen(small_spec(n=64), SPECTRUM, seed=8)
    cur = scr
    for _ in range(100):
        cur = advance_frozen_flow(cur, (0.31, 0.17), 0.37)
    drift = abs(np.var(cur.values) - np.var(scr.values)) / np.var(scr.values)
    assert drift < 0.005


def test_frozen_flow_offset_bookkeeping():
    scr = generate_screen(small_spec(n=64), SPECTRUM, seed=9)
    moved = advance_frozen_flow(scr, (2.0, -1.0), 0.25)
    assert np.allclose(moved.origin_offset, [0.5, -0.25])


def test_negative_dt_rejected():
    scr = generate_screen(small_spec(n=64), SPECTRUM, seed=10)
    with pytest.raises(ConfigurationError):
        advance_frozen_flow(scr, (1.0, 0.0), -0.1)


def test_layer_stack_validation():
    mk = lambda h: LayerSpec(altitude_m=h, strength=0.5, grid_size=32, grid_spacing_m=1.0)
    validate_layer_stack([mk(0.0), mk(4000.0), mk(12700.0)])
    with pytest.raises(ConfigurationError):
        validate_layer_stack([mk(0.0), mk(4000.0), mk(4000.0)])


def test_normalize_strengths():
    specs = [LayerSpec(altitude_m=h, strength=s, grid_size=32, grid_spacing_m=1.0)
             for h, s in [(0.0, 3.0), (1000.0, 1.0)]]
    out = normalize_strengths(specs, total=8.0)
    assert sum(s.strength for s in out) == pytest.approx(8.0)
    assert out[0].strength == pytest.approx(6.0)


def test_make_atmosphere_layers_independent():
    specs = [LayerSpec(altitude_m=h, strength=0.5, grid_size=64, grid_spacing_m=0.5)
             for h in (0.0, 10000.0)]
    atm = make_atmosphere(specs, SPECTRUM, master_seed=1)
    a, b = atm.screens[0].values.ravel(), atm.screens[1].values.ravel()
    corr = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    assert abs(corr) < 0.15
    atm2 = make_atmosphere(specs, SPECTRUM, master_seed=1)
    assert np.array_equal(atm.screens[0].values, atm2.screens[0].values)


def test_screen_dump_roundtrip(tmp_path):
    scr = generate_screen(small_spec(n=64), SPECTRUM, seed=11)
    path = tmp_path / "layer.pscn"
    dump_screen(scr, path)
    raw = path.read_bytes()
    assert raw[:4] == b"PSCN"
    assert len(raw) == SCREEN_HEADER_BYTES + 64 * 64 * 8
    assert SCREEN_HEADER_BYTES == 32
    back = load_screen(path)
    assert np.array_equal(back.values, scr.values)
    assert back.spacing_m == scr.spacing_m
