import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from radred.physics import spectral_emissivity, total_radiance
from radred.probes import TemperatureProfile
from radred.spectra import AbsorptionTable, FrequencyGrid, log_frequency_grid
from radred.transport import (
    BandModel,
    FullOrderModel,
    fom_step,
    fom_total_intensity,
    rom_step,
    save_intensity_profile,
    simulate_line,
    step_coefficients,
)


def ten_channel_table(seed=0, temps=(300.0, 10000.0, 25000.0)):
    rng = np.random.default_rng(seed)
    grid = log_frequency_grid(10, 1e13, 3e15)
    alpha = np.exp(rng.uniform(np.log(0.1), np.log(1e4), (1, len(temps), 1, 10)))
    return AbsorptionTable(grid, list(temps), [1e5], ("x",), [[1.0]], alpha)


def wide_table(n=4000):
    grid = log_frequency_grid(n, 1e11, 1e17)
    alpha = np.full((1, 2, 1, n), 5.0)
    return AbsorptionTable(grid, [300.0, 25000.0], [1e5], ("x",), [[1.0]], alpha)


def ode_oracle(alpha, src_density, I0, length):
    """dI/dx = alpha (S - I) with constant coefficients, S = e * Ibar_bb."""
    sol = solve_ivp(
        lambda x, I: alpha * (src_density - I), (0.0, length), I0, method="DOP853", rtol=1e-13, atol=1e-30
    )
    return sol.y[:, -1]


def test_one_step_matches_ode_oracle():
    t = ten_channel_table()
    T, dx = 1e4, 1e-4
    alpha = t.alpha[0, 1, 0]
    S = spectral_emissivity(T, t.grid.centers) * total_radiance(T)
    got = fom_step(np.zeros(10), T, 1e5, 0, t, dx)
    a = np.exp(-alpha * dx)
    np.testing.assert_allclose(got, (1 - a) * S, rtol=1e-14)
    ref = ode_oracle(alpha, S, np.zeros(10), dx)
    np.testing.assert_allclose(got, ref, rtol=1e-8)


def test_piecewise_constant_profile_matches_ode_oracle():
    t = ten_channel_table(1)
    dx = 2e-3
    temps = [300.0, 5000.0, 18000.0, 18000.0, 9000.0, 300.0]
    fom = FullOrderModel(t, 1e5)
    state = fom.initial_state(300.0)
    ref = state.copy()
    for T in temps:
        state = fom_step(state, T, 1e5, 0, t, dx)
        S = fom.emissivity(T) * total_radiance(T)
        ref = ode_oracle(fom.alpha(T), S, ref, dx)
    np.testing.assert_allclose(state, ref, rtol=1e-8)


def test_constant_temperature_fixed_point():
    t = ten_channel_table(2)
    T, dx = 7000.0, 1e-4
    fom = FullOrderModel(t, 1e5)
    alpha = fom.alpha(T)
    steps = int(np.ceil(20 / (alpha.min() * dx)))
    assert steps < 1_000_000
    prof = TemperatureProfile(np.full(steps + 1, T), dx)
    sim = simulate_line(fom, prof, t_ambient=300.0)
    target = fom.emissivity(T) * total_radiance(T)
    np.testing.assert_allclose(sim.final_state, target, rtol=1e-6)


def test_opaque_channel_reaches_source_in_one_step():
    c = step_coefficients(np.array([1e9]), np.array([0.3]), 1e-2)
    assert c.a[0] == 0.0
    assert rom_step(np.array([5.0]), 1e4, np.array([0.0]), np.array([1.0]))[0] == pytest.approx(total_radiance(1e4))


def test_total_intensity_quadrature():
    grid = FrequencyGrid(np.array([1.0, 2.0]), np.array([1.0, 1.0]))
    assert fom_total_intensity(np.zeros(2), grid) == 0.0
    assert fom_total_intensity(np.array([1.0, 2.0]), grid) == 3.0
    grid2 = FrequencyGrid(np.array([1.0, 3.0]), np.array([2.0, 2.0]))
    assert fom_total_intensity(np.array([1.0, 2.0]), grid2) == 6.0
    with pytest.raises(ValueError):
        fom_total_intensity(np.zeros(3), grid)
    wide = wide_table()
    T = 1e4
    eq = spectral_emissivity(T, wide.grid.centers) * total_radiance(T)
    assert fom_total_intensity(eq, wide.grid) == pytest.approx(total_radiance(T), rel=1e-3)


def test_rom_single_band_equilibrium():
    out = rom_step(np.array([0.0]), 8000.0, np.array([0.0]), np.array([1.0]))
    assert out[0] == pytest.approx(total_radiance(8000.0))
    a, e = np.array([0.3, 0.9]), np.array([0.25, 0.75])
    state = np.zeros(2)
    for _ in range(400):
        state = rom_step(state, 12000.0, a, e)
    np.testing.assert_allclose(state, e * total_radiance(12000.0), rtol=1e-12)


def test_rom_with_one_band_per_channel_equals_fom():
    t = ten_channel_table(3)
    fom = FullOrderModel(t, 1e5)
    dx = 1e-4
    widths = t.grid.widths

    def coeffs(T):
        return np.exp(-fom.alpha_many(T) * dx), spectral_emissivity(T[:, None], t.grid.centers) * widths

    rom = BandModel(coeffs, 10)
    rng = np.random.default_rng(0)
    prof = TemperatureProfile(rng.uniform(300, 25000, 500), dx)
    a = simulate_line(fom, prof, 300.0).intensity
    b = simulate_line(rom, prof, 300.0).intensity
    np.testing.assert_allclose(b, a, rtol=1e-12)


def test_ambient_profile_is_constant_equilibrium():
    wide = wide_table()
    prof = TemperatureProfile(np.full(200, 300.0), 1e-4)
    out = simulate_line(FullOrderModel(wide, 1e5), prof, 300.0).intensity
    assert np.ptp(out) <= 1e-12 * out[0]
    assert out[0] == pytest.approx(total_radiance(300.0), rel=1e-3)


def test_step_profile_single_band_closed_form():
    a, e = 0.9, 1.0
    rom = BandModel(lambda T: (np.full((T.size, 1), a), np.full((T.size, 1), e)), 1)
    hot = 9000.0
    samples = np.r_[300.0, np.full(60, hot)]
    out = simulate_line(rom, TemperatureProfile(samples, 1e-4), 300.0).intensity
    b0, b1 = total_radiance(300.0), total_radiance(hot)
    # first step still uses the ambient sample, then I_l = b1 + (b0 - b1) a^(l-1)
    ref = np.r_[b0, b0, b1 + (b0 - b1) * a ** np.arange(1, 60)]
    np.testing.assert_allclose(out, ref, rtol=1e-12)
    assert np.all(np.diff(out) >= 0)


def test_clamped_samples_counted():
    t = ten_channel_table()
    prof = TemperatureProfile(np.array([300.0, 30000.0, 100.0, 5000.0]), 1e-4)
    sim = simulate_line(FullOrderModel(t, 1e5), prof, 300.0)
    assert sim.n_clamped == 2
    assert sim.intensity.shape == (4,)
    assert sim.positions[-1] == pytest.approx(3e-4)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0, 40000), min_size=2, max_size=60), st.integers(0, 3))
def test_nonnegative_and_bounded(samples, seed):
    t = ten_channel_table(seed)
    fom = FullOrderModel(t, 1e5)
    prof = TemperatureProfile(np.asarray(samples), 1e-3)
    state = fom.initial_state(300.0)
    Tc = np.clip(prof.samples, 300.0, 25000.0)
    bound = np.max(fom.emissivity(np.r_[Tc, 300.0]) * total_radiance(np.r_[Tc, 300.0])[:, None], axis=0)
    for T in Tc[:-1]:
        state = fom_step(state, T, 1e5, 0, t, 1e-3)
        assert np.all(state >= 0)
        assert np.all(state <= bound * (1 + 1e-12))


def test_intensity_csv(tmp_path):
    save_intensity_profile(tmp_path / "i.csv", [0.0, 1e-4], [1.5, 2.5], {"model": "fom"})
    lines = (tmp_path / "i.csv").read_text().splitlines()
    assert lines == ["# model: fom", "x_m,I_tot", "0.0,1.5", "0.0001,2.5"]
