import json

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radred.physics import cumulative_emissivity, total_radiance
from radred.probes import ProbeDesignSpec, TemperatureProfile, design_probe_set
from radred.reduction import (
    GridPoint,
    ReductionConfig,
    RomFormatError,
    build_problem,
    export_rom,
    load_rom,
    lpi_seed,
    refine_seed,
    save_rom,
    solve,
    split_band,
    sweep_grid,
    sweep_order,
)
from radred.reduction.objective import ReductionProblem
from radred.reduction.params import (
    A_MARGIN,
    CUT_GAP,
    RomParameterization,
    constraint_residual,
    constraint_system,
    eval_a,
    eval_e,
    lambda_matrix,
    project_to_feasible,
    temperature_nodes,
)
from radred.spectra import AbsorptionTable, log_frequency_grid
from radred.transport import simulate_line

DX = 1e-3


def plateau_table(n=400, lo=0.5, hi=800.0, pressures=(1e5,)):
    grid = log_frequency_grid(n, 1e11, 1e17)
    row = np.where(np.arange(n) < n // 2, lo, hi)
    alpha = np.broadcast_to(row, (1, 2, len(pressures), n)).copy()
    return AbsorptionTable(grid, [300.0, 25000.0], list(pressures), ("x",), [[1.0]], alpha)


def probes(length=201):
    spec = ProbeDesignSpec(peaks=(8000.0, 16000.0), slopes=(1.0,), widths=(0.05,), length=length, dx=DX, repetitions=1)
    return design_probe_set(spec)


def random_params(rng, M, K):
    t = temperature_nodes(K)
    cuts = np.sort(rng.uniform(3e13, 3e15, M - 1))
    return RomParameterization(t, rng.uniform(0.05, 0.95, (M, K)), cuts)


def synthetic_problem(truth, profiles, beta=0.0):
    """Problem whose references are the output of ``truth`` itself."""
    unit = [TemperatureProfile(p.samples, p.dx, 1.0) for p in profiles]
    outs = ReductionProblem(unit, [np.zeros(p.length) for p in unit], truth.t_nodes).evaluate(truth, False).outputs
    weighted = [TemperatureProfile(p.samples, p.dx, 1.0 / o.mean()) for p, o in zip(unit, outs)]
    return ReductionProblem(weighted, outs, truth.t_nodes, beta)


# parameterisation -------------------------------------------------------


def test_eval_a_interpolation_contracts():
    rng = np.random.default_rng(0)
    p = random_params(rng, 3, 6)
    np.testing.assert_array_equal(eval_a(p, p.t_nodes), p.a_nodes.T)
    mid = 0.5 * (p.t_nodes[2] + p.t_nodes[3])
    np.testing.assert_allclose(eval_a(p, mid), 0.5 * (p.a_nodes[:, 2] + p.a_nodes[:, 3]), rtol=1e-14)
    # clamped outside the node range
    np.testing.assert_array_equal(eval_a(p, 50.0), p.a_nodes[:, 0])
    np.testing.assert_array_equal(eval_a(p, 1e5), p.a_nodes[:, -1])
    lam = lambda_matrix(p.t_nodes, np.linspace(100, 30000, 50))
    np.testing.assert_allclose(lam.sum(axis=1), 1.0, rtol=1e-15)
    assert np.all(lam >= 0) and np.all((lam > 0).sum(axis=1) <= 2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1e12, 1e16), min_size=0, max_size=5, unique=True), st.floats(300, 25000))
def test_band_emissivities_partition_unity(cuts, T):
    p = RomParameterization.flat(temperature_nodes(3), np.full(len(cuts) + 1, 0.5), np.sort(cuts))
    e = eval_e(p, T)
    assert e.shape == (len(cuts) + 1,)
    assert np.all(e >= 0)
    assert e.sum() == pytest.approx(1.0, abs=1e-12)


def test_band_emissivity_matches_cdf_difference():
    p = RomParameterization.flat(temperature_nodes(3), [0.5, 0.5, 0.5], [2e14, 9e14])
    T = 11000.0
    F = cumulative_emissivity(T, np.array([2e14, 9e14]))
    np.testing.assert_allclose(eval_e(p, T), [F[0], F[1] - F[0], 1 - F[1]], rtol=1e-12)
    assert eval_e(p, T, band=1) == pytest.approx(F[1] - F[0], rel=1e-12)


def test_parameter_shape_validation():
    t = temperature_nodes(4)
    with pytest.raises(ValueError):
        RomParameterization(t, np.ones((2, 3)), [1e14])
    with pytest.raises(ValueError):
        RomParameterization(t, np.ones((2, 4)), [])
    with pytest.raises(ValueError):
        temperature_nodes(1)
    p = RomParameterization(t, np.full((2, 4), 0.3), [1e14])
    assert p.n_theta == 9
    np.testing.assert_array_equal(p.with_theta(p.theta).theta, p.theta)
    with pytest.raises(ValueError):
        p.with_theta(p.theta[:-1])


@pytest.mark.parametrize("M,K", [(1, 2), (2, 5), (4, 3)])
def test_constraint_count(M, K):
    G, h = constraint_system(M, K)
    assert G.shape == (2 * M * K + M - 1, M * K + M - 1)
    assert h.shape == (G.shape[0],)


def test_constraint_system_describes_feasible_set():
    rng = np.random.default_rng(4)
    M, K = 3, 4
    G, h = constraint_system(M, K)
    for _ in range(50):
        p = RomParameterization(temperature_nodes(K), rng.uniform(-0.2, 1.2, (M, K)), rng.uniform(-1e11, 4e11, M - 1))
        inside = np.all(G @ p.theta <= h + 1e-9 * np.maximum(np.abs(h), 1))
        assert inside == (constraint_residual(p) <= 1e-9)


def cvxpy_projection(theta, M, K, eps=A_MARGIN, gap=CUT_GAP, scale=1e14):
    """Projection in scaled cut units, solved as a QP."""
    G, h = constraint_system(M, K, eps, gap / scale)
    y = theta.copy()
    y[M * K :] /= scale
    x = cp.Variable(y.size)
    cp.Problem(cp.Minimize(cp.sum_squares(x - y)), [G @ x <= h]).solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    out = np.array(x.value)
    out[M * K :] *= scale
    return out


@pytest.mark.parametrize("seed", range(4))
def test_projection_matches_qp_oracle(seed):
    rng = np.random.default_rng(seed)
    M, K = 3, 5
    a = rng.uniform(-0.5, 1.5, (M, K))
    # crossed and too-close cuts to exercise the isotonic step
    cuts = np.array([5.0, 3.0, 3.0000005])[: M - 1] * 1e14 if seed % 2 else np.array([0.5, 0.4])[: M - 1] * 1e11
    p = RomParameterization(temperature_nodes(K), a, cuts)
    got = project_to_feasible(p)
    ref = cvxpy_projection(p.theta, M, K)
    np.testing.assert_allclose(got.a_nodes.ravel(), ref[: M * K], atol=1e-7)
    np.testing.assert_allclose(got.cuts, ref[M * K :], rtol=1e-7)
    assert constraint_residual(got) <= 0


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-1, 2), min_size=6, max_size=6),
    st.lists(st.floats(-1e12, 1e16), min_size=2, max_size=2),
)
def test_projection_idempotent_and_feasible(a, cuts):
    p = RomParameterization(temperature_nodes(2), np.reshape(a, (3, 2)), cuts)
    q = project_to_feasible(p)
    assert constraint_residual(q) <= 0
    r = project_to_feasible(q)
    np.testing.assert_array_equal(r.theta, q.theta)


# objective ----------------------------------------------------------------


def test_objective_output_matches_transport_simulation():
    rng = np.random.default_rng(5)
    params = random_params(rng, 3, 6)
    profs = probes(151)
    prob = ReductionProblem(profs, [np.zeros(p.length) for p in profs], params.t_nodes)
    ev = prob.evaluate(params, gradient=False)
    model = export_rom(params, DX)
    for p, out in zip(profs, ev.outputs):
        ref = simulate_line(model.band_model(), p, 300.0).intensity
        np.testing.assert_allclose(out, ref, rtol=1e-12)
    # zero reference: cost is the sum of squared outputs
    assert ev.cost == pytest.approx(sum(np.sum(o * o) for o in ev.outputs), rel=1e-13)


def test_ambient_profile_zero_error():
    t = temperature_nodes(4)
    params = RomParameterization.flat(t, [0.3, 0.8], [5e14])
    prof = TemperatureProfile(np.full(50, 300.0), DX)
    ref = np.full(50, total_radiance(300.0))
    ev = ReductionProblem([prof], [ref], t).evaluate(params)
    assert ev.cost <= 1e-24 * ref[0] ** 2
    assert np.max(np.abs(ev.gradient)) <= 1e-9 * ref[0] ** 2


@pytest.mark.parametrize("M", [1, 2, 3])
def test_gradient_matches_finite_differences(M):
    rng = np.random.default_rng(10 + M)
    params = random_params(rng, M, 4)
    profs = probes(81)
    refs = [np.full(p.length, 1e7) for p in profs]
    prob = ReductionProblem(profs, refs, params.t_nodes, beta=3.0)
    grad = prob.evaluate(params).gradient
    theta = params.theta
    for i in range(theta.size):
        h = 1e-6 if i < M * 4 else 1e-6 * theta[i]
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fd = (prob.evaluate(params.with_theta(tp), False).cost - prob.evaluate(params.with_theta(tm), False).cost) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-9 * np.max(np.abs(grad)))


def test_regularisation_scales_with_beta():
    rng = np.random.default_rng(6)
    params = random_params(rng, 2, 5)
    profs = probes(41)
    refs = [np.full(p.length, 1e6) for p in profs]
    e1 = ReductionProblem(profs, refs, params.t_nodes, beta=1.0).evaluate(params)
    e3 = ReductionProblem(profs, refs, params.t_nodes, beta=3.0).evaluate(params)
    d = np.diff(params.a_nodes, axis=1)
    assert e1.reg_cost == pytest.approx(np.sum(d * d), rel=1e-14)
    assert e3.reg_cost == pytest.approx(3 * e1.reg_cost, rel=1e-14)
    assert e3.data_cost == e1.data_cost
    flat = RomParameterization.flat(params.t_nodes, [0.2, 0.7], params.cuts)
    assert ReductionProblem(profs, refs, params.t_nodes, beta=5.0).evaluate(flat).reg_cost == 0.0


def test_weight_doubling_quadruples_data_cost():
    rng = np.random.default_rng(7)
    params = random_params(rng, 2, 4)
    profs = probes(41)
    refs = [np.full(p.length, 1e6) for p in profs]
    doubled = [TemperatureProfile(p.samples, p.dx, 2 * p.weight) for p in profs]
    a = ReductionProblem(profs, refs, params.t_nodes).evaluate(params)
    b = ReductionProblem(doubled, refs, params.t_nodes).evaluate(params)
    assert b.cost == pytest.approx(4 * a.cost, rel=1e-13)
    np.testing.assert_allclose(b.rms, 2 * a.rms, rtol=1e-13)
    np.testing.assert_allclose(b.gradient, 4 * a.gradient, rtol=1e-12)


def test_problem_validation():
    profs = probes(41)
    t = temperature_nodes(3)
    with pytest.raises(ValueError):
        ReductionProblem([], [], t)
    with pytest.raises(ValueError):
        ReductionProblem(profs, [np.ones(41)], t)
    with pytest.raises(ValueError):
        ReductionProblem(profs, [np.ones(40), np.ones(41)], t)
    with pytest.raises(ValueError):
        ReductionProblem(profs, [np.ones(41)] * 2, t, beta=-1)
    prob = ReductionProblem(profs, [np.ones(41)] * 2, t)
    with pytest.raises(ValueError):
        prob.evaluate(RomParameterization.flat(temperature_nodes(4), [0.5], []))


# solver -------------------------------------------------------------------


def test_exact_seed_terminates_immediately():
    rng = np.random.default_rng(8)
    truth = random_params(rng, 2, 4)
    prob = synthetic_problem(truth, probes(101))
    params, report = solve(ReductionConfig(2, n_nodes=4), prob, truth)
    # the log-coordinate round trip leaves only rounding error
    assert report.iterations <= 1 and report.converged
    assert np.max(report.rms) < 1e-12
    np.testing.assert_allclose(params.theta, truth.theta, rtol=1e-12)


def test_solver_recovers_synthetic_truth():
    t = temperature_nodes(4)
    truth = RomParameterization(t, np.exp(-np.array([[2.0, 3.0, 5.0, 4.0], [300.0, 200.0, 500.0, 900.0]]) * DX), [6e14])
    prob = synthetic_problem(truth, probes(201))
    seed = RomParameterization.flat(t, np.exp(-np.array([10.0, 100.0]) * DX), [2e14])
    params, report = solve(ReductionConfig(2, n_nodes=4, max_iter=400), prob, seed)
    assert report.cost <= 1e-8 * report.trajectory[0]
    assert params.cuts[0] == pytest.approx(6e14, rel=1e-3)
    assert np.all(np.diff(report.trajectory) <= 0)
    assert report.constraint_residual <= 0
    assert report.gradient_check["max_rel_error"] < 1e-5


def test_two_plateau_recovery_from_poor_seed():
    table = plateau_table()
    cfg = ReductionConfig(2, n_nodes=5)
    prob = build_problem(table, GridPoint(1e5, 0), probes(), cfg)
    seed = lpi_seed(table, GridPoint(1e5, 0), cfg, DX)
    assert seed.cuts[0] == pytest.approx(table.grid.upper_edges[199], rel=1e-12)
    bad = RomParameterization.flat(seed.t_nodes, np.exp(-np.array([2.0, 200.0]) * DX), 3 * seed.cuts)
    params, report = solve(cfg, prob, bad)
    assert report.cost < 1e-6 * report.trajectory[0]
    assert params.cuts[0] == pytest.approx(1e14, rel=0.02)
    alpha = -np.log(params.a_nodes) / DX
    np.testing.assert_allclose(alpha[1], 800.0, rtol=0.01)
    assert np.all(np.diff(report.trajectory) <= 0)


def test_config_validation():
    for kw in ({"n_bands": 0}, {"n_bands": 2, "n_nodes": 1}, {"n_bands": 2, "beta": -1}, {"n_bands": 2, "seed_source": "x"}):
        with pytest.raises(ValueError):
            ReductionConfig(**kw)
    with pytest.raises(ValueError):
        solve(ReductionConfig(3, n_nodes=4), None, RomParameterization.flat(temperature_nodes(4), [0.5, 0.5], [1e14]))


def test_split_band_keeps_cost_and_refine_never_worse():
    table = plateau_table()
    cfg2 = ReductionConfig(2, n_nodes=3, max_iter=60)
    prob = build_problem(table, GridPoint(1e5, 0), probes(101), cfg2)
    p2, r2 = solve(cfg2, prob, lpi_seed(table, GridPoint(1e5, 0), cfg2, DX))
    for band in range(2):
        s = split_band(p2, band)
        assert s.n_bands == 3
        assert prob.evaluate(s, False).cost == pytest.approx(r2.cost, rel=1e-9)
        assert np.all(np.diff(np.r_[0.0, s.cuts]) > 0)
    cfg3 = ReductionConfig(3, n_nodes=3, max_iter=60)
    seed, label = refine_seed(p2, prob, cfg3, trial_iter=5)
    assert label.startswith("split")
    _, r3 = solve(cfg3, prob, seed)
    assert r3.cost <= r2.cost * (1 + 1e-9)


# sweep and export -----------------------------------------------------------


def test_sweep_order_serpentine():
    order = sweep_order([1.0, 2.0, 3.0], [0, 1])
    assert [(g.pressure, g.composition) for g in order] == [(1, 0), (2, 0), (3, 0), (3, 1), (2, 1), (1, 1)]


def test_sweep_grid_warm_start_and_validation():
    table = plateau_table(pressures=(1e5, 2e5))
    cfg = ReductionConfig(2, n_nodes=3, max_iter=30)
    profs = probes(101)
    res = sweep_grid(table, [1e5, 2e5], [0], cfg, profs)
    assert not res.errors and len(res.models) == 2
    assert res.reports[GridPoint(2e5, 0)].seed.startswith("warm:")
    with pytest.raises(ValueError):
        sweep_grid(table, [3e5], [0], cfg, profs)
    with pytest.raises(ValueError):
        sweep_grid(table, [1e5], [1], cfg, profs)


@pytest.mark.parametrize("fmt", ["text", "json"])
def test_rom_round_trip(tmp_path, fmt):
    rng = np.random.default_rng(9)
    params = random_params(rng, 3, 5)
    a = params.a_nodes.copy()
    a[0, 0] = 0.0
    params = RomParameterization(params.t_nodes, a, params.cuts)
    model = export_rom(params, DX, 1e5, (1.0,), {"cost": 1.5, "seed": "lpi"})
    assert model.capped[0, 0] and model.alpha_hat[0, 0] == 1e6
    save_rom(model, tmp_path / "m", fmt)
    back = load_rom(tmp_path / "m")
    for name in ("t_nodes", "cuts", "alpha_hat", "e_hat", "capped"):
        np.testing.assert_array_equal(getattr(back, name), getattr(model, name))
    assert back.meta == model.meta and back.pressure == 1e5
    np.testing.assert_allclose(back.to_params().a_nodes, params.a_nodes, rtol=1e-14)
    save_rom(back, tmp_path / "n", fmt)
    assert (tmp_path / "m").read_bytes() == (tmp_path / "n").read_bytes()


def test_rom_format_errors(tmp_path):
    model = export_rom(RomParameterization.flat(temperature_nodes(3), [0.5, 0.9], [4e14]), DX)
    save_rom(model, tmp_path / "m")
    text = (tmp_path / "m").read_text()
    (tmp_path / "a").write_text(text.replace("RADRED-ROM 1", "ROM 2"))
    with pytest.raises(RomFormatError, match=":1:"):
        load_rom(tmp_path / "a")
    (tmp_path / "b").write_text(text.replace("END\n", ""))
    with pytest.raises(RomFormatError, match="END"):
        load_rom(tmp_path / "b")
    lines = text.splitlines()
    k = next(i for i, l in enumerate(lines) if l.startswith("BAND 1")) + 2
    lines[k] = lines[k].rsplit(" ", 3)[0] + " 0.0 " + " ".join(lines[k].split()[2:])
    (tmp_path / "c").write_text("\n".join(lines) + "\n")
    with pytest.raises(RomFormatError):
        load_rom(tmp_path / "c")
    data = json.loads(json.dumps({"dx": 1e-3}))
    (tmp_path / "d").write_text(json.dumps(data))
    with pytest.raises(RomFormatError, match="malformed"):
        load_rom(tmp_path / "d")
    with pytest.raises(ValueError):
        save_rom(model, tmp_path / "e", "yaml")


def test_exported_frozen_values():
    params = RomParameterization.flat(temperature_nodes(3), np.exp(-np.array([4.0, 70.0]) * DX), [4e14])
    model = export_rom(params, DX)
    alpha, e = model.frozen(9000.0)
    np.testing.assert_allclose(alpha, [4.0, 70.0], rtol=1e-10)
    assert e.sum() == pytest.approx(1.0, abs=1e-12)
    a_half, _ = model.coefficients([9000.0], dx=DX / 2)
    np.testing.assert_allclose(a_half[0], np.exp(-np.array([4.0, 70.0]) * DX / 2), rtol=1e-12)


def test_documented_third_order_configuration():
    cfg = ReductionConfig(3, n_nodes=25)
    assert cfg.n_theta == 77
    G, _ = constraint_system(3, 25)
    assert G.shape == (2 * 3 * 25 + 2, 77)
