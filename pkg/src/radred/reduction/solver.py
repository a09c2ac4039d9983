"""Constrained descent for the band-model fit.

The model set is a product of boxes once the cuts are rewritten as
positive gaps ``g_1 = cut_1``, ``g_i = cut_i - cut_{i-1}`` (each >= the
minimum spacing), so a bound-constrained quasi-Newton method with a
Wolfe line search handles it directly and keeps every iterate feasible.

The a-nodes are handed to the optimiser as ``z = log(-log(a) / dx)``
(log absorption coefficient). With ``dx`` small, transparent bands sit at
``a`` within 1e-3 of one, and the logarithmic coordinate spreads decades
of ``alpha`` evenly; the box ``[0, 1 - eps]`` maps to
``[log alpha_min, log ALPHA_MAX]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..physics import T_MAX, T_MIN
from .objective import NumericalError, ReductionProblem
from .params import A_MARGIN, ALPHA_MAX, CUT_GAP, RomParameterization, constraint_residual, project_to_feasible

__all__ = ["ReductionConfig", "FitReport", "SolverError", "solve", "gradient_check"]

FREQ_SCALE = 1e14  # Hz per optimisation unit for the gap variables


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReductionConfig:
    n_bands: int
    n_nodes: int = 50
    beta: float = 0.0
    eps: float = A_MARGIN
    cut_gap: float = CUT_GAP
    gtol: float = 1e-8  # projected-gradient tolerance relative to the seed cost
    ftol: float = 1e-12  # relative cost reduction tolerance
    step_tol: float = 1e-12  # max-norm step tolerance in optimisation units
    max_iter: int = 500
    seed_source: str = "lpi"  # lpi | previous | refine | explicit
    gradient_checks: int = 4  # finite-difference components checked at the seed
    t_min: float = T_MIN
    t_max: float = T_MAX

    def __post_init__(self):
        if self.n_bands < 1:
            raise ValueError("number of bands must be >= 1")
        if self.n_nodes < 2:
            raise ValueError("number of temperature nodes must be >= 2")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        for name in ("eps", "cut_gap", "gtol", "ftol", "step_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.seed_source not in ("lpi", "previous", "refine", "explicit"):
            raise ValueError("seed_source must be lpi, previous, refine or explicit")
        if not self.t_min < self.t_max:
            raise ValueError("t_min must be < t_max")

    @property
    def n_theta(self) -> int:
        return self.n_bands * self.n_nodes + self.n_bands - 1


@dataclass
class FitReport:
    cost: float
    data_cost: float
    reg_cost: float
    rms: np.ndarray
    constraint_residual: float
    iterations: int
    evaluations: int
    trajectory: list
    gradient_check: dict
    seed: str
    converged: bool
    message: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "data_cost": self.data_cost,
            "reg_cost": self.reg_cost,
            "rms": [float(v) for v in self.rms],
            "constraint_residual": self.constraint_residual,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "trajectory": [float(v) for v in self.trajectory],
            "gradient_check": self.gradient_check,
            "seed": self.seed,
            "converged": self.converged,
            "message": self.message,
            **({"extra": self.extra} if self.extra else {}),
        }


class _Coordinates:
    """Map between theta and the optimiser's box coordinates."""

    def __init__(self, template: RomParameterization, dx: float, eps: float, gap: float):
        self.template = template
        self.dx = dx
        self.k = template.n_bands * template.n_nodes
        self.z_lo = np.log(-np.log1p(-eps) / dx)
        self.z_hi = np.log(ALPHA_MAX)
        self.gap = gap / FREQ_SCALE
        self.bounds = [(self.z_lo, self.z_hi)] * self.k + [(self.gap, None)] * (template.n_bands - 1)

    def to_z(self, params: RomParameterization) -> np.ndarray:
        a = np.clip(params.a_nodes.ravel(), np.exp(-ALPHA_MAX * self.dx), None)
        z_a = np.clip(np.log(-np.log(a) / self.dx), self.z_lo, self.z_hi)
        gaps = np.maximum(np.diff(np.concatenate([[0.0], params.cuts])) / FREQ_SCALE, self.gap)
        return np.concatenate([z_a, gaps])

    def from_z(self, z: np.ndarray) -> RomParameterization:
        t = self.template
        a = np.exp(-np.exp(z[: self.k]) * self.dx)
        cuts = np.cumsum(z[self.k :]) * FREQ_SCALE
        return RomParameterization(t.t_nodes, a.reshape(t.a_nodes.shape), cuts)

    def grad(self, z: np.ndarray, grad_theta: np.ndarray) -> np.ndarray:
        k = self.k
        alpha = np.exp(z[:k])
        a = np.exp(-alpha * self.dx)
        # da/dz = -a * alpha * dx; cut_c = sum_{i<=c} g_i so dJ/dg_i = sum_{c>=i} dJ/dcut_c
        gc = grad_theta[k:]
        return np.concatenate([grad_theta[:k] * (-a * alpha * self.dx), np.cumsum(gc[::-1])[::-1] * FREQ_SCALE])


def gradient_check(problem: ReductionProblem, params: RomParameterization, components, rel_step: float = 1e-6) -> dict:
    """Central finite differences on selected theta components."""
    theta = params.theta
    grad = problem.evaluate(params).gradient
    k = params.n_bands * params.n_nodes
    worst = 0.0
    rows = []
    for i in components:
        if i < k:
            # Near a = 1 the cost is very curved in a; step relative to the distance from 1.
            scale = max(1.0 - theta[i], 1e-9) if theta[i] > 0.5 else 0.5
        else:
            scale = max(abs(theta[i]), FREQ_SCALE)
        h = rel_step * scale
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fp = problem.evaluate(params.with_theta(tp), gradient=False).cost
        fm = problem.evaluate(params.with_theta(tm), gradient=False).cost
        fd = (fp - fm) / (2 * h)
        err = abs(fd - grad[i]) / max(abs(fd), 1e-12)
        worst = max(worst, err)
        rows.append({"index": int(i), "analytic": float(grad[i]), "finite_difference": float(fd), "rel_error": float(err)})
    return {"max_rel_error": float(worst), "components": rows}


def _check_components(n_theta: int, count: int) -> list:
    if count <= 0:
        return []
    return sorted({int(round(v)) for v in np.linspace(0, n_theta - 1, min(count, n_theta))})


def solve(config: ReductionConfig, problem: ReductionProblem, seed: RomParameterization, provenance: str = "explicit"):
    """Local minimiser from ``seed``; returns (params, FitReport)."""
    if seed.n_bands != config.n_bands or seed.n_nodes != config.n_nodes:
        raise ValueError(
            f"seed has {seed.n_bands} bands x {seed.n_nodes} nodes, config wants {config.n_bands} x {config.n_nodes}"
        )
    start = project_to_feasible(seed, config.eps, config.cut_gap)
    if constraint_residual(start, config.eps, config.cut_gap) > 0:
        raise SolverError("seed is infeasible after projection")
    coords = _Coordinates(start, problem.dx, config.eps, config.cut_gap)
    z0 = coords.to_z(start)
    start = project_to_feasible(coords.from_z(z0), config.eps, config.cut_gap)

    ev0 = problem.evaluate(start)
    j0 = ev0.cost
    check = gradient_check(problem, start, _check_components(start.n_theta, config.gradient_checks)) if config.gradient_checks else {}
    scale = j0 if j0 > 0 else 1.0
    trajectory = [j0]
    counter = {"n": 1}
    cache = {}

    def fun(z):
        key = z.tobytes()
        if key not in cache:
            ev = problem.evaluate(coords.from_z(z))
            counter["n"] += 1
            cache.clear()
            cache[key] = (ev.cost / scale, coords.grad(z, ev.gradient) / scale)
        return cache[key]

    # Gap bounds live in scaled units; the final projection restores the
    # exact spacing lost to rescaling.
    bounds = coords.bounds
    prev = {"z": z0.copy()}

    def callback(intermediate_result):
        trajectory.append(float(intermediate_result.fun) * scale)
        z = intermediate_result.x
        step = float(np.max(np.abs(z - prev["z"]))) if z.size else 0.0
        prev["z"] = z.copy()
        if step < config.step_tol:
            raise StopIteration

    pg0 = _projected_grad_norm(z0, coords.grad(z0, ev0.gradient) / scale, bounds)
    if j0 == 0.0 or pg0 <= config.gtol:
        final, result_iter, message, converged = start, 0, "seed satisfies the gradient tolerance", True
    else:
        res = minimize(
            fun,
            z0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            callback=callback,
            options={"maxiter": config.max_iter, "gtol": config.gtol, "ftol": config.ftol, "maxcor": 20, "maxls": 40},
        )
        final = coords.from_z(res.x)
        result_iter = int(res.nit)
        message = str(res.message)
        converged = result_iter < config.max_iter
    final = project_to_feasible(final, config.eps, config.cut_gap)
    ev = problem.evaluate(final, gradient=False)
    if not np.isfinite(ev.cost):
        raise NumericalError("non-finite final cost")
    report = FitReport(
        cost=ev.cost,
        data_cost=ev.data_cost,
        reg_cost=ev.reg_cost,
        rms=ev.rms,
        constraint_residual=constraint_residual(final, config.eps, config.cut_gap),
        iterations=result_iter,
        evaluations=counter["n"],
        trajectory=trajectory,
        gradient_check=check,
        seed=provenance,
        converged=converged,
        message=message,
    )
    return final, report


def _projected_grad_norm(z, g, bounds) -> float:
    lo = np.array([b[0] if b[0] is not None else -np.inf for b in bounds])
    hi = np.array([b[1] if b[1] is not None else np.inf for b in bounds])
    pz = np.clip(z - g, lo, hi) - z
    return float(np.max(np.abs(pz))) if pz.size else 0.0
