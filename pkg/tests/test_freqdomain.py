import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radred.freqdomain import (
    BodeCurve,
    FrozenOperatingPoint,
    bode_sweep,
    cluster_channels,
    fom_dc_gains,
    fom_transfer,
    lpi_cluster_reduce,
    omega_grid,
    rom_transfer,
    save_bode_csv,
)
from radred.physics import spectral_emissivity
from radred.spectra import AbsorptionTable, log_frequency_grid

FIVE_BAND_ALPHA = np.array([0.11, 0.92, 13.0, 120.0, 1700.0])
FIVE_BAND_E = np.array([0.72, 0.21, 0.054, 0.012, 0.0039])


def table_from(alpha_row, f_min=1e11, f_max=1e17):
    n = len(alpha_row)
    grid = log_frequency_grid(n, f_min, f_max)
    alpha = np.broadcast_to(np.asarray(alpha_row, dtype=float), (1, 2, 1, n)).copy()
    return AbsorptionTable(grid, [300.0, 25000.0], [1e5], ("x",), [[1.0]], alpha)


def two_plateau_table(n=2000, lo=0.5, hi=800.0, split=0.5):
    centers = log_frequency_grid(n, 1e11, 1e17).centers
    row = np.where(np.arange(n) < int(split * n), lo, hi)
    return table_from(row), centers


def test_fom_dc_gain_near_one():
    t = table_from(np.full(4000, 3.0))
    op = FrozenOperatingPoint(1e4, 1e5)
    assert abs(fom_transfer(op, t, None, 0.0) - 1.0) < 1e-3


def test_fom_transfer_formula():
    rng = np.random.default_rng(1)
    t = table_from(np.exp(rng.uniform(-2, 8, 30)), 1e13, 3e15)
    op = FrozenOperatingPoint(8000.0, 1e5)
    alpha = t.alpha[0, 0, 0] + (8000.0 - 300.0) / (24700.0) * (t.alpha[0, 1, 0] - t.alpha[0, 0, 0])
    gains = t.grid.widths * spectral_emissivity(8000.0, t.grid.centers)
    np.testing.assert_allclose(fom_dc_gains(op, t)[1], gains, rtol=1e-14)
    for w in (0.0, 0.3, 50.0, 1e5):
        ref = np.sum(gains * alpha / (1j * w + alpha))
        assert fom_transfer(op, t, None, w) == pytest.approx(ref, rel=1e-13)


def test_first_order_pole():
    g = complex(np.ravel(rom_transfer([7.0], [1.0], 7.0))[0])
    assert abs(g) == pytest.approx(1 / math.sqrt(2), rel=1e-14)
    assert math.degrees(np.angle(g)) == pytest.approx(-45.0, rel=1e-12)
    w = np.logspace(-2, 3, 20)
    np.testing.assert_allclose(np.abs(rom_transfer([7.0], [1.0], w)), 7.0 / np.sqrt(49.0 + w**2), rtol=1e-14)


def test_five_band_dc_gain():
    assert abs(rom_transfer(FIVE_BAND_ALPHA, FIVE_BAND_E, 0.0)) == pytest.approx(0.999, abs=1e-3)
    assert rom_transfer(FIVE_BAND_ALPHA, FIVE_BAND_E, 0.0).real == pytest.approx(FIVE_BAND_E.sum(), rel=1e-15)


def test_bode_low_frequency_bounds():
    curve = bode_sweep(lambda w: rom_transfer(FIVE_BAND_ALPHA, FIVE_BAND_E, w), np.array([1e-3, 1e-1, 1e1]))
    g0 = FIVE_BAND_E.sum()
    assert len(curve) == 3
    assert curve.magnitude[0] >= 0.99 * g0
    w_low = FIVE_BAND_ALPHA.min() / 100
    mag = abs(rom_transfer(FIVE_BAND_ALPHA, FIVE_BAND_E, w_low))
    assert mag == pytest.approx(g0, rel=1e-4)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(1e-2, 1e6), min_size=1, max_size=8),
    st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=8),
)
def test_rom_magnitude_and_phase_bounds(alphas, gains):
    n = min(len(alphas), len(gains))
    a, e = np.array(alphas[:n]), np.array(gains[:n])
    w = omega_grid(1e-4, 1e8, 60)
    curve = bode_sweep(lambda om: rom_transfer(a, e, om), w)
    g0 = e.sum()
    assert np.all(curve.magnitude <= g0 * (1 + 1e-12))
    assert np.all(curve.phase_deg <= 1e-9)
    assert np.all(curve.phase_deg >= -90.0 - 1e-9)


def test_bode_sweep_requires_ascending_grid():
    with pytest.raises(ValueError):
        bode_sweep(lambda w: rom_transfer([1.0], [1.0], w), np.array([1.0, 0.5]))
    with pytest.raises(ValueError):
        bode_sweep(lambda w: rom_transfer([1.0], [1.0], w), np.array([0.0, 1.0]))
    w = omega_grid(1e-2, 1e4, 7)
    assert w[0] == pytest.approx(1e-2) and w[-1] == pytest.approx(1e4) and w.size == 7


def brute_force_partition(x, w, m):
    best, arg = np.inf, None
    n = len(x)
    for cuts in itertools.combinations(range(1, n), m - 1):
        b = (0,) + cuts + (n,)
        cost = 0.0
        for i, j in zip(b[:-1], b[1:]):
            xs, ws = x[i:j], w[i:j]
            mu = np.sum(ws * xs) / np.sum(ws)
            cost += np.sum(ws * (xs - mu) ** 2)
        if cost < best - 1e-12:
            best, arg = cost, b
    return best, arg


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 6), min_size=3, max_size=9), st.integers(1, 4), st.integers(0, 100))
def test_cluster_matches_brute_force(values, m, seed):
    x = np.array(values)
    m = min(m, x.size)
    w = np.random.default_rng(seed).uniform(0.1, 2.0, x.size)
    groups = cluster_channels(x, w, m)
    assert groups[0][0] == 0 and groups[-1][1] == x.size
    assert all(a < b for a, b in groups)
    cost = 0.0
    for a, b in groups:
        mu = np.sum(w[a:b] * x[a:b]) / np.sum(w[a:b])
        cost += np.sum(w[a:b] * (x[a:b] - mu) ** 2)
    best, _ = brute_force_partition(x, w, m)
    assert cost == pytest.approx(best, rel=1e-9, abs=1e-9)


def test_lpi_one_band_per_channel_is_exact():
    rng = np.random.default_rng(2)
    t = table_from(np.exp(rng.uniform(0, 6, 12)), 1e13, 3e15)
    op = FrozenOperatingPoint(300.0, 1e5)
    red = lpi_cluster_reduce(op, t, None, 12)
    np.testing.assert_allclose(red.alpha_hat, t.alpha[0, 0, 0], rtol=1e-14)
    np.testing.assert_allclose(red.e_hat, fom_dc_gains(op, t)[1], rtol=1e-14)
    with pytest.raises(ValueError):
        lpi_cluster_reduce(op, t, None, 13)


def test_lpi_two_plateau_recovery():
    t, centers = two_plateau_table()
    op = FrozenOperatingPoint(9000.0, 1e5)
    red = lpi_cluster_reduce(op, t, None, 2)
    np.testing.assert_allclose(red.alpha_hat, [0.5, 800.0], rtol=1e-12)
    k = 1000
    assert t.grid.upper_edges[k - 1] <= red.cuts[0] <= t.grid.lower_edges[k]


@pytest.mark.parametrize("M", [1, 2, 3, 5])
def test_lpi_preserves_dc_gain(M):
    rng = np.random.default_rng(M)
    t = table_from(np.exp(rng.uniform(-1, 9, 500)), 3e13, 6e15)
    op = FrozenOperatingPoint(14000.0, 1e5)
    red = lpi_cluster_reduce(op, t, None, M)
    g0 = fom_transfer(op, t, None, 0.0).real
    assert red.e_hat.sum() == pytest.approx(g0, rel=1e-13)
    assert rom_transfer(red.alpha_hat, red.e_hat, 0.0).real == pytest.approx(g0, rel=1e-13)
    assert np.all(np.diff(red.cuts) > 0)


def test_operating_point_validation():
    with pytest.raises(ValueError):
        FrozenOperatingPoint(100.0, 1e5)
    with pytest.raises(ValueError):
        FrozenOperatingPoint(1e4, 1e9)


def test_bode_csv(tmp_path):
    w = omega_grid(1e-1, 1e1, 3)
    rom = bode_sweep(lambda om: rom_transfer([1.0], [1.0], om), w)
    save_bode_csv(tmp_path / "b.csv", w, None, rom)
    rows = (tmp_path / "b.csv").read_text().splitlines()
    assert rows[0] == "omega_rad_per_m,fom_mag,fom_phase_deg,rom_mag,rom_phase_deg"
    assert len(rows) == 4
    first = rows[1].split(",")
    assert float(first[0]) == w[0] and first[1] == "" and float(first[3]) == pytest.approx(1 / math.sqrt(1.01))
    assert isinstance(rom, BodeCurve)
