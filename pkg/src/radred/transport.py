"""Line-of-sight simulation of the full- and reduced-order radiation models.

Both models share the exact exponential-integrator step for a temperature
held constant over one position interval::

    I[l+1] = a * I[l] + (1 - a) * e(T[l]) * Ibar_bb(T[l]),   a = exp(-alpha dx)

The full-order output is ``sum_i I_i dnu_i``; the reduced-order output is
the plain band sum.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .physics import T_MAX, T_MIN, spectral_emissivity, total_radiance
from .spectra import AbsorptionTable, FrequencyGrid, interp_temperature

__all__ = [
    "StepCoefficients",
    "FullOrderModel",
    "BandModel",
    "LineSimulation",
    "step_coefficients",
    "fom_step",
    "fom_total_intensity",
    "rom_step",
    "simulate_line",
    "save_intensity_profile",
]

# Temperatures equal after rounding to this many decimals share coefficients.
_T_QUANT_DECIMALS = 9
_CHUNK = 256


@dataclass(frozen=True)
class StepCoefficients:
    a: np.ndarray
    gain: np.ndarray  # (1 - a) * e, multiplies Ibar_bb

    def __post_init__(self):
        if np.any(self.a < 0) or np.any(self.a >= 1):
            raise ValueError("step coefficients a must lie in [0, 1)")


def step_coefficients(alpha, emissivity, dx: float) -> StepCoefficients:
    a = np.exp(-np.asarray(alpha, dtype=float) * dx)
    return StepCoefficients(a, (1.0 - a) * np.asarray(emissivity, dtype=float))


class FullOrderModel:
    """Full-order model frozen at one (p, y) pair of an absorption table."""

    def __init__(self, table: AbsorptionTable, p: float, y=0):
        self.table = table
        self.grid: FrequencyGrid = table.grid
        self.pressure = float(p)
        self.composition_index = table.composition_index(y)
        self.slab = table.slab(p, self.composition_index)
        self.temperatures = table.temperatures

    @property
    def n_states(self) -> int:
        return self.grid.size

    def alpha(self, T: float) -> np.ndarray:
        return interp_temperature(self.slab, self.temperatures, T)

    def alpha_many(self, T: np.ndarray) -> np.ndarray:
        Tn = self.temperatures
        if Tn.size == 1:
            return np.broadcast_to(self.slab[0], (T.size, self.grid.size)).copy()
        Tc = np.clip(T, Tn[0], Tn[-1])
        k = np.clip(np.searchsorted(Tn, Tc, side="right") - 1, 0, Tn.size - 2)
        w = ((Tc - Tn[k]) / (Tn[k + 1] - Tn[k]))[:, None]
        return (1.0 - w) * self.slab[k] + w * self.slab[k + 1]

    def emissivity(self, T) -> np.ndarray:
        return spectral_emissivity(np.asarray(T, dtype=float)[..., None], self.grid.centers)

    def initial_state(self, t_ambient: float) -> np.ndarray:
        return self.emissivity(t_ambient) * total_radiance(t_ambient)

    def output(self, state) -> float:
        return fom_total_intensity(state, self.grid)

    def source_terms(self, T: np.ndarray, dx: float):
        """(a, (1 - a) e Ibar_bb) for each temperature in ``T``, shape (len(T), N).

        Coefficients are computed once per distinct (quantised) temperature.
        """
        key = np.round(T, _T_QUANT_DECIMALS)
        _, first, inv = np.unique(key, return_index=True, return_inverse=True)
        Tu = T[first]
        a = np.exp(-self.alpha_many(Tu) * dx)
        src = (1.0 - a) * self.emissivity(Tu) * total_radiance(Tu)[:, None]
        return a[inv], src[inv]


class BandModel:
    """Reduced-order model given as functions of temperature.

    ``coefficients(T)`` must return ``(a_hat, e_hat)`` arrays of shape
    ``(len(T), M)`` for a 1-D array of temperatures.
    """

    def __init__(self, coefficients, n_bands: int):
        self._coefficients = coefficients
        self.n_bands = int(n_bands)

    @property
    def n_states(self) -> int:
        return self.n_bands

    def coefficients(self, T):
        a, e = self._coefficients(np.atleast_1d(np.asarray(T, dtype=float)))
        return np.asarray(a, dtype=float), np.asarray(e, dtype=float)

    def initial_state(self, t_ambient: float) -> np.ndarray:
        _, e = self.coefficients([t_ambient])
        return e[0] * total_radiance(t_ambient)

    def output(self, state) -> float:
        return float(np.sum(state))

    def source_terms(self, T: np.ndarray, dx: float):
        a, e = self.coefficients(T)
        return a, (1.0 - a) * e * total_radiance(T)[:, None]


def fom_step(state, T: float, p: float, y, table: AbsorptionTable, dx: float) -> np.ndarray:
    """Advance all full-order channels by one position step at temperature ``T``."""
    if not dx > 0:
        raise ValueError("dx must be > 0")
    T = min(max(float(T), T_MIN), T_MAX)
    alpha = interp_temperature(table.slab(p, y), table.temperatures, T)
    c = step_coefficients(alpha, spectral_emissivity(T, table.grid.centers), dx)
    return c.a * np.asarray(state, dtype=float) + c.gain * total_radiance(T)


def fom_total_intensity(state, grid: FrequencyGrid) -> float:
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != grid.size:
        raise ValueError(f"state has {state.shape[-1]} channels, grid has {grid.size}")
    return state @ grid.widths


def rom_step(state, T: float, a_hat, e_hat) -> np.ndarray:
    """One reduced-order step with band coefficients already evaluated at ``T``."""
    a_hat = np.asarray(a_hat, dtype=float)
    return a_hat * np.asarray(state, dtype=float) + (1.0 - a_hat) * np.asarray(e_hat) * total_radiance(T)


@dataclass
class LineSimulation:
    positions: np.ndarray
    intensity: np.ndarray
    n_clamped: int = 0
    final_state: np.ndarray | None = field(default=None, repr=False)


def simulate_line(model, profile, t_ambient: float = T_MIN, initial_state=None) -> LineSimulation:
    """Total intensity at every node of ``profile`` for a FOM or band model.

    The initial state is the equilibrium at ``t_ambient`` unless given.
    Samples outside [T_MIN, T_MAX] are clamped and counted.
    """
    T = np.asarray(profile.samples, dtype=float)
    clamped = np.clip(T, T_MIN, T_MAX)
    n_clamped = int(np.count_nonzero(clamped != T))
    dx = profile.dx
    state = model.initial_state(t_ambient) if initial_state is None else np.array(initial_state, dtype=float)
    L = T.size
    out = np.empty(L)
    out[0] = model.output(state)
    is_fom = isinstance(model, FullOrderModel)
    weights = model.grid.widths if is_fom else None
    for start in range(0, L - 1, _CHUNK):
        stop = min(start + _CHUNK, L - 1)
        a, src = model.source_terms(clamped[start:stop], dx)
        for m in range(stop - start):
            state = a[m] * state + src[m]
            out[start + m + 1] = state @ weights if is_fom else state.sum()
    return LineSimulation(np.arange(L) * dx, out, n_clamped, state)


def save_intensity_profile(path, positions, intensity, meta: dict | None = None) -> None:
    """Two-column CSV (x in m, I_tot in W m^-2 sr^-1) after a ``#`` metadata block."""
    with open(Path(path), "w", newline="") as fh:
        for k, v in sorted((meta or {}).items()):
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_m", "I_tot"])
        for x, I in zip(np.asarray(positions).tolist(), np.asarray(intensity).tolist()):
            w.writerow([repr(x), repr(I)])
