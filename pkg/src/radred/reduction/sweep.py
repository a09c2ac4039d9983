"""Reduction over a (pressure, composition) grid with warm starts."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..freqdomain import FrozenOperatingPoint, lpi_cluster_reduce
from scipy.optimize import brentq

from ..physics import T_MAX, T_MIN, cumulative_emissivity
from ..probes import compute_weights
from ..spectra import AbsorptionTable
from ..transport import FullOrderModel, simulate_line
from .export import RomModel, export_rom
from .objective import ReductionProblem
from .params import RomParameterization, temperature_nodes
from .solver import FitReport, ReductionConfig, solve

__all__ = [
    "GridPoint",
    "SweepResult",
    "fom_references",
    "build_problem",
    "lpi_seed",
    "split_band",
    "refine_seed",
    "reduce_point",
    "sweep_order",
    "sweep_grid",
]


@dataclass(frozen=True)
class GridPoint:
    pressure: float
    composition: int

    def label(self) -> str:
        return f"p={self.pressure!r},y={self.composition}"


@dataclass
class SweepResult:
    order: list
    models: dict = field(default_factory=dict)  # GridPoint -> RomModel
    reports: dict = field(default_factory=dict)  # GridPoint -> FitReport
    params: dict = field(default_factory=dict)  # GridPoint -> RomParameterization
    errors: dict = field(default_factory=dict)  # GridPoint -> message

    def error_manifest(self) -> list:
        return [{"pressure": g.pressure, "composition": g.composition, "error": self.errors[g]} for g in self.order if g in self.errors]


def fom_references(table: AbsorptionTable, pressure: float, composition, profiles: Sequence, t_ambient: float = T_MIN) -> list:
    """Full-order total-intensity traces, one per profile."""
    fom = FullOrderModel(table, pressure, composition)
    return [simulate_line(fom, prof, t_ambient).intensity for prof in profiles]


def build_problem(
    table: AbsorptionTable,
    point: GridPoint,
    profiles: Sequence,
    config: ReductionConfig,
    weight_rule: str = "mean",
    t_ambient: float = T_MIN,
    references=None,
) -> ReductionProblem:
    refs = fom_references(table, point.pressure, point.composition, profiles, t_ambient) if references is None else references
    weighted = compute_weights(profiles, refs, weight_rule)
    t_nodes = temperature_nodes(config.n_nodes, config.t_min, config.t_max)
    return ReductionProblem(weighted, refs, t_nodes, config.beta, t_ambient)


def lpi_seed(table: AbsorptionTable, point: GridPoint, config: ReductionConfig, dx: float) -> RomParameterization:
    """Cuts and flat-in-T a from the frozen model at the middle of the temperature range."""
    t_mid = 0.5 * (T_MIN + T_MAX)
    red = lpi_cluster_reduce(FrozenOperatingPoint(t_mid, point.pressure, point.composition), table, None, config.n_bands)
    t_nodes = temperature_nodes(config.n_nodes, config.t_min, config.t_max)
    return RomParameterization.flat(t_nodes, np.exp(-red.alpha_hat * dx), red.cuts)


def split_band(params: RomParameterization, band: int, t_ref: float = 0.5 * (T_MIN + T_MAX)) -> RomParameterization:
    """Insert a cut inside ``band`` where its emitted fraction at ``t_ref`` is halved.

    Both halves keep the band's a-nodes, so the model output is unchanged.
    """
    edges = np.concatenate([[0.0], params.cuts, [np.inf]])
    f_lo, f_hi = cumulative_emissivity(t_ref, edges[band]), cumulative_emissivity(t_ref, edges[band + 1])
    target = 0.5 * (f_lo + f_hi)
    lo = max(edges[band], 1e9)
    hi = edges[band + 1] if np.isfinite(edges[band + 1]) else 1e18
    cut = brentq(lambda nu: cumulative_emissivity(t_ref, nu) - target, lo, hi, xtol=1e3, rtol=1e-14)
    a = np.insert(params.a_nodes, band, params.a_nodes[band], axis=0)
    return RomParameterization(params.t_nodes, a, np.insert(params.cuts, band, cut))


def refine_seed(params: RomParameterization, problem: ReductionProblem, config: ReductionConfig, trial_iter: int = 15, others=()):
    """Seed for M + 1 bands from an M-band solution.

    Every single-band split, plus any ``(label, params)`` pairs in
    ``others``, is run for ``trial_iter`` iterations; the candidate reaching
    the lowest cost is returned with its label. A split starts at the
    M-band cost, so the refined fit can only improve on it.
    """
    if config.n_bands != params.n_bands + 1:
        raise ValueError(f"refining {params.n_bands} bands gives {params.n_bands + 1}, config wants {config.n_bands}")
    trial = replace(config, max_iter=trial_iter, gradient_checks=0)
    candidates = [(f"split band {b + 1}", split_band(params, b)) for b in range(params.n_bands)] + list(others)
    best, best_cost, best_label = None, np.inf, ""
    for label, cand in candidates:
        _, rep = solve(trial, problem, cand, "trial")
        if rep.cost < best_cost:
            best, best_cost, best_label = cand, rep.cost, label
    return best, best_label


def reduce_point(table, point: GridPoint, profiles, config: ReductionConfig, problem: ReductionProblem | None = None, seed=None, provenance: str = "lpi", **kw):
    """Solve at one grid point; returns (RomModel, FitReport, params)."""
    if problem is None:
        problem = build_problem(table, point, profiles, config, **kw)
    if seed is None:
        seed = lpi_seed(table, point, config, problem.dx)
        provenance = "lpi"
    params, report = solve(config, problem, seed, provenance)
    comp = table.compositions[point.composition].tolist()
    model = export_rom(params, problem.dx, point.pressure, comp, {"seed": provenance})
    return model, report, params


def sweep_order(pressures: Sequence[float], compositions: Sequence[int]) -> list:
    """Serpentine order: pressures ascend for even composition rows and descend for odd ones."""
    out = []
    for row, iy in enumerate(compositions):
        ps = list(pressures) if row % 2 == 0 else list(reversed(pressures))
        out.extend(GridPoint(float(p), int(iy)) for p in ps)
    return out


def sweep_grid(
    table: AbsorptionTable,
    pressures: Sequence[float],
    compositions: Sequence[int],
    config: ReductionConfig,
    profiles: Sequence,
    weight_rule: str = "mean",
    t_ambient: float = T_MIN,
    warm_start: bool = True,
    log=None,
) -> SweepResult:
    """Reduce every grid point; a failed point is recorded and skipped.

    Each point is seeded from the previously solved point in sweep order
    when ``warm_start`` is set, otherwise from the frozen-model clustering.
    """
    for p in pressures:
        if not np.any(np.isclose(table.pressures, p, rtol=1e-12)):
            raise ValueError(f"pressure {p} is not a node of the table")
    for iy in compositions:
        if not 0 <= int(iy) < table.compositions.shape[0]:
            raise ValueError(f"composition index {iy} is not in the table")
    result = SweepResult(sweep_order(pressures, compositions))
    previous = None
    for point in result.order:
        seed, provenance = None, "lpi"
        if warm_start and previous is not None:
            seed, provenance = result.params[previous], f"warm:{previous.label()}"
        try:
            model, report, params = reduce_point(
                table, point, profiles, config, seed=seed, provenance=provenance, weight_rule=weight_rule, t_ambient=t_ambient
            )
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            result.errors[point] = f"{type(exc).__name__}: {exc}"
            if log:
                log(f"{point.label()}: failed ({exc})")
            continue
        result.models[point] = model
        result.reports[point] = report
        result.params[point] = params
        previous = point
        if log:
            log(f"{point.label()}: cost {report.cost:.6g} after {report.iterations} iterations ({provenance})")
    return result
