"""Frequency response of the frozen-parameter models and the LPI seed reducer.

At fixed (T, p, y) both models are sums of stable first-order lags driven
by the black-body radiance::

    G(jw)    = sum_i dnu_i e_i alpha_i / (jw + alpha_i)
    Ghat(jw) = sum_b e_b alpha_b / (jw + alpha_b)

``w`` is a spatial angular frequency in rad/m.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from .physics import T_MAX, T_MIN, spectral_emissivity
from .spectra import P_MAX, P_MIN, AbsorptionTable, FrequencyGrid, interp_temperature

__all__ = [
    "FrozenOperatingPoint",
    "BodeSample",
    "BodeCurve",
    "LpiReduction",
    "fom_dc_gains",
    "fom_transfer",
    "rom_transfer",
    "bode_sweep",
    "lpi_cluster_reduce",
    "cluster_channels",
    "omega_grid",
    "save_bode_csv",
]


@dataclass(frozen=True)
class FrozenOperatingPoint:
    temperature: float
    pressure: float
    composition: object = 0  # index into the table or a Composition / fraction vector

    def __post_init__(self):
        if not T_MIN <= self.temperature <= T_MAX:
            raise ValueError(f"temperature {self.temperature} outside [{T_MIN}, {T_MAX}]")
        if not P_MIN <= self.pressure <= P_MAX:
            raise ValueError(f"pressure {self.pressure} outside [{P_MIN}, {P_MAX}]")


@dataclass(frozen=True)
class BodeSample:
    omega: float
    magnitude: float
    phase_deg: float


@dataclass(frozen=True)
class BodeCurve:
    omega: np.ndarray
    response: np.ndarray  # complex

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.response)

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.angle(self.response))

    def __len__(self) -> int:
        return self.omega.size

    def __iter__(self) -> Iterator[BodeSample]:
        for w, m, ph in zip(self.omega, self.magnitude, self.phase_deg):
            yield BodeSample(float(w), float(m), float(ph))


def _frozen_channels(op: FrozenOperatingPoint, table: AbsorptionTable, grid: FrequencyGrid | None):
    grid = table.grid if grid is None else grid
    slab = table.slab(op.pressure, op.composition)
    alpha = interp_temperature(slab, table.temperatures, op.temperature)
    gains = grid.widths * spectral_emissivity(op.temperature, grid.centers)
    return alpha, gains


def fom_dc_gains(op: FrozenOperatingPoint, table: AbsorptionTable, grid: FrequencyGrid | None = None):
    """Per-channel (alpha_i, dnu_i e(T, nu_i)) at the operating point."""
    return _frozen_channels(op, table, grid)


def _first_order_sum(alpha, gains, omega):
    """Sum of first-order lags; a scalar omega gives a complex scalar."""
    scalar = np.ndim(omega) == 0
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(omega < 0):
        raise ValueError("omega must be >= 0")
    alpha = np.asarray(alpha, dtype=float)
    gains = np.asarray(gains, dtype=float)
    # Chunk over omega so that the (n_omega, N) temporary stays small.
    out = np.empty(omega.size, dtype=complex)
    step = max(1, 2_000_000 // max(alpha.size, 1))
    for s in range(0, omega.size, step):
        w = omega[s : s + step, None]
        out[s : s + step] = (gains * alpha / (1j * w + alpha)).sum(axis=1)
    return complex(out[0]) if scalar else out


def fom_transfer(op: FrozenOperatingPoint, table: AbsorptionTable, grid: FrequencyGrid | None, omega):
    """Full-order frequency response ``G(j omega)`` (diagonal A, no matrix inverse)."""
    alpha, gains = _frozen_channels(op, table, grid)
    return _first_order_sum(alpha, gains, omega)


def rom_transfer(alpha_hat, e_hat, omega):
    """Band-model frequency response ``Ghat(j omega)``."""
    return _first_order_sum(alpha_hat, e_hat, omega)


def bode_sweep(evaluator: Callable, omega) -> BodeCurve:
    """Evaluate ``evaluator(omega)`` on an ascending positive grid."""
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or np.any(omega <= 0) or np.any(np.diff(omega) <= 0):
        raise ValueError("omega grid must be ascending and positive")
    return BodeCurve(omega, np.asarray(evaluator(omega), dtype=complex))


def omega_grid(start: float, stop: float, points: int) -> np.ndarray:
    """``points`` log-spaced angular frequencies from ``start`` to ``stop``."""
    if not (0 < start < stop) or points < 2:
        raise ValueError("omega grid needs 0 < start < stop and >= 2 points")
    return np.logspace(np.log10(start), np.log10(stop), int(points))


@dataclass(frozen=True)
class LpiReduction:
    alpha_hat: np.ndarray
    e_hat: np.ndarray
    cuts: np.ndarray  # M - 1 frequencies (Hz) between adjacent groups
    groups: tuple  # (start, stop) channel index ranges

    @property
    def n_bands(self) -> int:
        return self.alpha_hat.size


def cluster_channels(values, weights, n_groups: int) -> tuple:
    """Optimal contiguous partition minimising weighted within-group variance.

    ``values`` are ordered (here by frequency); returns ``n_groups`` half-open
    index ranges. Exact dynamic programme, O(n_groups * n^2) vectorised.
    """
    x = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    n = x.size
    if n_groups < 1:
        raise ValueError("number of bands must be >= 1")
    if n_groups > n:
        raise ValueError(f"cannot form {n_groups} bands from {n} channels")
    # Prefix sums give the cost of any range [i, j) in O(1).
    W = np.concatenate([[0.0], np.cumsum(w)])
    S = np.concatenate([[0.0], np.cumsum(w * x)])
    Q = np.concatenate([[0.0], np.cumsum(w * x * x)])

    def range_cost(i, j):
        ww = W[j] - W[i]
        ss = S[j] - S[i]
        with np.errstate(invalid="ignore", divide="ignore"):
            c = Q[j] - Q[i] - np.where(ww > 0, ss * ss / ww, 0.0)
        return np.maximum(c, 0.0)

    # best[j]: minimal cost of splitting the first j channels into m groups.
    best = range_cost(np.zeros(n + 1, dtype=int), np.arange(n + 1))
    best[0] = np.inf
    back = [np.zeros(n + 1, dtype=int)]
    for m in range(2, n_groups + 1):
        new = np.full(n + 1, np.inf)
        arg = np.zeros(n + 1, dtype=int)
        for j in range(m, n + 1):
            i = np.arange(m - 1, j)
            cand = best[i] + range_cost(i, np.full(i.size, j))
            k = int(np.argmin(cand))
            new[j] = cand[k]
            arg[j] = i[k]
        best = new
        back.append(arg)
    bounds = [n]
    j = n
    for m in range(n_groups, 1, -1):
        j = int(back[m - 1][j])
        bounds.append(j)
    bounds.append(0)
    bounds = bounds[::-1]
    return tuple((bounds[k], bounds[k + 1]) for k in range(n_groups))


def lpi_cluster_reduce(op: FrozenOperatingPoint, table: AbsorptionTable, grid: FrequencyGrid | None, n_bands: int) -> LpiReduction:
    """Seed band model from the frozen full-order model.

    Channels are split into ``n_bands`` frequency-contiguous groups by
    clustering log10(alpha) weighted by DC gain. Per group the DC gain is
    summed and alpha is the gain-weighted harmonic mean, which keeps
    ``Ghat(0) == G(0)`` and matches the low-frequency slope ``dG/dw`` at 0.
    """
    grid = table.grid if grid is None else grid
    alpha, gains = _frozen_channels(op, table, grid)
    return _reduce(alpha, gains, grid, n_bands)


def _reduce(alpha, gains, grid: FrequencyGrid, n_bands: int) -> LpiReduction:
    if n_bands > alpha.size:
        raise ValueError(f"cannot form {n_bands} bands from {alpha.size} channels")
    # Tiny weights keep zero-gain channels from making the DP degenerate.
    w = np.maximum(gains, 1e-300)
    groups = cluster_channels(np.log10(alpha), w, n_bands)
    e_hat = np.array([gains[a:b].sum() for a, b in groups])
    alpha_hat = np.empty(n_bands)
    for k, (a, b) in enumerate(groups):
        g = w[a:b]
        alpha_hat[k] = g.sum() / (g / alpha[a:b]).sum()
    lo, hi = grid.lower_edges, grid.upper_edges
    cuts = np.array([0.5 * (hi[b - 1] + lo[b]) for (_, b) in groups[:-1]])
    return LpiReduction(alpha_hat, e_hat, cuts, groups)


def save_bode_csv(path, omega, fom: BodeCurve | None = None, rom: BodeCurve | None = None) -> None:
    """CSV with columns omega, |G|, angle G, |Ghat|, angle Ghat (missing model -> empty)."""
    with open(Path(path), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["omega_rad_per_m", "fom_mag", "fom_phase_deg", "rom_mag", "rom_phase_deg"])
        for k, w in enumerate(np.asarray(omega).tolist()):
            row = [repr(w)]
            for curve in (fom, rom):
                if curve is None:
                    row += ["", ""]
                else:
                    row += [repr(float(curve.magnitude[k])), repr(float(curve.phase_deg[k]))]
            wr.writerow(row)
