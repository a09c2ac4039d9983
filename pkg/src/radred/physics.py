"""Black-body kernels.

Planck spectral intensity, total radiance, spectral emissivity and the
cumulative emissivity ``f(T, nu) = int_0^nu e(T, s) ds`` used to turn band
cut frequencies into band emissivities.

Everything here is vectorised over numpy broadcasting and is pure.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import bernoulli

__all__ = [
    "PhysicalConstants",
    "CONSTANTS",
    "T_MIN",
    "T_MAX",
    "DomainError",
    "planck_intensity",
    "total_radiance",
    "spectral_emissivity",
    "cumulative_emissivity",
    "planck_integral",
    "EmissivityCdf",
    "build_emissivity_cdf",
    "default_emissivity_cdf",
    "cdf_lookup",
    "cdf_derivative",
    "save_cdf",
    "load_cdf",
]

T_MIN = 300.0
T_MAX = 25000.0

# exp(x) overflows float64 just above 709; beyond 700 the intensity is 0.
_EXP_CUTOFF = 700.0


class DomainError(ValueError):
    """Argument outside the physical domain of a kernel."""


@dataclass(frozen=True)
class PhysicalConstants:
    h: float = 6.62607015e-34
    c: float = 299792458.0
    k_B: float = 1.380649e-23

    def __post_init__(self):
        if min(self.h, self.c, self.k_B) <= 0:
            raise DomainError("physical constants must be strictly positive")

    @property
    def sigma_SB(self) -> float:
        # Derived rather than quoted so that int I_bb dnu == sigma/pi T^4 holds
        # to rounding for the same h, c, k_B.
        return 2.0 * math.pi**5 * self.k_B**4 / (15.0 * self.h**3 * self.c**2)


CONSTANTS = PhysicalConstants()


def _check_positive(name, arr, strict=True):
    bad = (arr <= 0) if strict else (arr < 0)
    if np.any(bad) or np.any(~np.isfinite(arr)):
        cmp = "> 0" if strict else ">= 0"
        raise DomainError(f"{name} must be finite and {cmp}")


def _reduced_frequency(T, nu, const):
    return const.h * nu / (const.k_B * T)


def planck_intensity(T, nu, const: PhysicalConstants = CONSTANTS):
    """Planck spectral intensity in W m^-2 sr^-1 Hz^-1.

    Parameters
    ----------
    T : array_like
        Temperature in K, strictly positive.
    nu : array_like
        Frequency in Hz, strictly positive.

    Returns 0 (not NaN) once ``h nu / (k_B T)`` exceeds 700.
    """
    T = np.asarray(T, dtype=float)
    nu = np.asarray(nu, dtype=float)
    _check_positive("temperature", T)
    _check_positive("frequency", nu)
    x = _reduced_frequency(T, nu, const)
    big = x > _EXP_CUTOFF
    denom = np.expm1(np.where(big, 1.0, x))
    out = 2.0 * const.h * nu**3 / const.c**2 / denom
    return np.where(big, 0.0, out)[()]


def total_radiance(T, const: PhysicalConstants = CONSTANTS):
    """Black-body radiance ``sigma_SB / pi * T**4`` in W m^-2 sr^-1."""
    T = np.asarray(T, dtype=float)
    _check_positive("temperature", T, strict=False)
    return (const.sigma_SB / math.pi * T**4)[()]


def spectral_emissivity(T, nu, const: PhysicalConstants = CONSTANTS):
    """Fraction of black-body radiance per Hz at ``nu``; integrates to 1 over nu."""
    T = np.asarray(T, dtype=float)
    nu = np.asarray(nu, dtype=float)
    _check_positive("temperature", T)
    _check_positive("frequency", nu)
    x = _reduced_frequency(T, nu, const)
    big = x > _EXP_CUTOFF
    # 15/pi^4 * (h / k_B T) * x^3 / (e^x - 1), identical to I_bb / Ibar_bb
    dens = x**3 / np.expm1(np.where(big, 1.0, x))
    out = 15.0 / math.pi**4 * const.h / (const.k_B * T) * dens
    return np.where(big, 0.0, out)[()]


# Coefficients B_n / ((n + 3) n!) of the small-x expansion of
# int_0^x t^3 / (e^t - 1) dt = sum_n c_n x^(n+3).
_SERIES_ORDER = 40
_B = bernoulli(_SERIES_ORDER)
_SERIES_COEF = np.array(
    [_B[n] / ((n + 3) * math.factorial(n)) for n in range(_SERIES_ORDER + 1)]
)
_SERIES_SWITCH = 1.0
_TAIL_TERMS = 40
_PI4_15 = math.pi**4 / 15.0


def planck_integral(x):
    """``int_0^x t^3 / (e^t - 1) dt`` for ``x >= 0`` to near machine precision.

    Uses the Bernoulli expansion below x = 1 and the exponential tail sum
    ``pi^4/15 - sum_k e^{-kx} (x^3/k + 3x^2/k^2 + 6x/k^3 + 6/k^4)`` above.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _SERIES_SWITCH
    xs = x[small]
    # Horner over the full polynomial, then scale by x^3.
    acc = np.zeros_like(xs)
    for c in _SERIES_COEF[::-1]:
        acc = acc * xs + c
    out[small] = acc * xs**3
    xl = np.minimum(x[~small], 1.0e3)
    tail = np.zeros_like(xl)
    for k in range(1, _TAIL_TERMS + 1):
        tail += np.exp(-k * xl) * (
            xl**3 / k + 3.0 * xl**2 / k**2 + 6.0 * xl / k**3 + 6.0 / k**4
        )
    out[~small] = _PI4_15 - tail
    return out[()]


def cumulative_emissivity(T, nu, const: PhysicalConstants = CONSTANTS):
    """Closed-form ``f(T, nu) = int_0^nu e(T, s) ds`` in [0, 1].

    ``nu`` may be 0 or ``+inf``. Its derivative in ``nu`` is exactly
    :func:`spectral_emissivity`, which the reduction relies on.
    """
    T = np.asarray(T, dtype=float)
    nu = np.asarray(nu, dtype=float)
    _check_positive("temperature", T)
    if np.any(nu < 0) or np.any(np.isnan(nu)):
        raise DomainError("frequency must be >= 0")
    x = np.where(np.isinf(nu), np.inf, const.h * np.where(np.isinf(nu), 0.0, nu))
    x = x / (const.k_B * T)
    return (planck_integral(np.minimum(x, 1.0e3)) / _PI4_15)[()]


@dataclass(frozen=True)
class EmissivityCdf:
    """Tabulated cumulative emissivity on a (T, nu) grid.

    ``table[k, n]`` holds ``f(T_k, nu_n)``; rows are non-decreasing in nu and
    the first column is 0 (``nu_0 == 0``).
    """

    temperatures: np.ndarray
    frequencies: np.ndarray
    table: np.ndarray
    const: PhysicalConstants = field(default=CONSTANTS, repr=False)

    def __post_init__(self):
        T, nu, tab = self.temperatures, self.frequencies, self.table
        if T.ndim != 1 or nu.ndim != 1 or T.size == 0 or nu.size < 2:
            raise ValueError("EmissivityCdf needs non-empty 1-D node arrays")
        if tab.shape != (T.size, nu.size):
            raise ValueError(f"table shape {tab.shape} != {(T.size, nu.size)}")
        for arr in (T, nu, tab):
            arr.setflags(write=False)

    @property
    def grid_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.temperatures, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.frequencies, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def clamp_temperature(self, T):
        return np.clip(np.asarray(T, dtype=float), self.temperatures[0], self.temperatures[-1])

    def lookup(self, T, nu):
        """Bilinear interpolation of the table; T and nu are clamped to the grid."""
        T = self.clamp_temperature(T)
        nu = np.clip(np.asarray(nu, dtype=float), 0.0, self.frequencies[-1])
        T, nu = np.broadcast_arrays(T, nu)
        Tn, fn = self.temperatures, self.frequencies
        if Tn.size == 1:
            kt = np.zeros(T.shape, dtype=int)
            wt = np.zeros(T.shape)
            rows = np.vstack([self.table, self.table])
        else:
            kt = np.clip(np.searchsorted(Tn, T, side="right") - 1, 0, Tn.size - 2)
            wt = (T - Tn[kt]) / (Tn[kt + 1] - Tn[kt])
            rows = self.table
        kn = np.clip(np.searchsorted(fn, nu, side="right") - 1, 0, fn.size - 2)
        wn = (nu - fn[kn]) / (fn[kn + 1] - fn[kn])
        k1 = np.minimum(kt + 1, rows.shape[0] - 1)
        v00 = rows[kt, kn]
        v01 = rows[kt, kn + 1]
        v10 = rows[k1, kn]
        v11 = rows[k1, kn + 1]
        lo = v00 + wn * (v01 - v00)
        hi = v10 + wn * (v11 - v10)
        return (lo + wt * (hi - lo))[()]

    def derivative(self, T, nu):
        """Analytic ``df/dnu = e(T, nu)`` (0 at nu = 0); T clamped like :meth:`lookup`."""
        T = self.clamp_temperature(T)
        nu = np.asarray(nu, dtype=float)
        T, nu = np.broadcast_arrays(T, nu)
        pos = nu > 0
        out = np.zeros(nu.shape)
        if np.any(pos):
            out[pos] = spectral_emissivity(T[pos], nu[pos], self.const)
        return out[()]

    def exact(self, T, nu):
        """Closed-form cumulative emissivity at the clamped temperature."""
        return cumulative_emissivity(self.clamp_temperature(T), nu, self.const)


def build_emissivity_cdf(temperatures, frequencies, const: PhysicalConstants = CONSTANTS):
    """Tabulate ``f(T, nu)`` by cumulative trapezoidal quadrature of ``e(T, nu)``.

    A zero frequency node is prepended when absent.
    """
    T = np.array(temperatures, dtype=float)
    nu = np.array(frequencies, dtype=float)
    if T.ndim != 1 or nu.ndim != 1 or T.size == 0 or nu.size == 0:
        raise ValueError("temperature and frequency nodes must be non-empty 1-D arrays")
    if np.any(np.diff(T) <= 0):
        raise ValueError("temperature nodes must be strictly ascending")
    if np.any(np.diff(nu) <= 0):
        raise ValueError("frequency nodes must be strictly ascending")
    _check_positive("temperature nodes", T)
    if nu[0] < 0:
        raise ValueError("frequency nodes must be >= 0")
    if nu[0] > 0:
        nu = np.concatenate([[0.0], nu])
    dens = np.zeros((T.size, nu.size))
    dens[:, 1:] = spectral_emissivity(T[:, None], nu[None, 1:], const)
    steps = 0.5 * (dens[:, 1:] + dens[:, :-1]) * np.diff(nu)[None, :]
    table = np.zeros_like(dens)
    table[:, 1:] = np.cumsum(steps, axis=1)
    return EmissivityCdf(T, nu, np.minimum(table, 1.0), const)


def default_emissivity_cdf(t_min: float = T_MIN, t_max: float = T_MAX) -> EmissivityCdf:
    """64 linear T nodes over [t_min, t_max] and 2048 log nodes over [1e12, 1e17] Hz."""
    return build_emissivity_cdf(np.linspace(t_min, t_max, 64), np.logspace(12, 17, 2048))


def cdf_lookup(cdf: EmissivityCdf, T, nu):
    return cdf.lookup(T, nu)


def cdf_derivative(cdf: EmissivityCdf, T, nu):
    return cdf.derivative(T, nu)


# Cache file: magic, u32 header length, JSON header, then little-endian f8
# arrays temperatures | frequencies | table (row-major).
_CDF_MAGIC = b"RRCDF001"


def save_cdf(cdf: EmissivityCdf, path) -> None:
    header = json.dumps(
        {
            "grid_hash": cdf.grid_hash,
            "n_temperatures": int(cdf.temperatures.size),
            "n_frequencies": int(cdf.frequencies.size),
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(_CDF_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arr in (cdf.temperatures, cdf.frequencies, cdf.table):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_cdf(path) -> EmissivityCdf:
    data = Path(path).read_bytes()
    if data[:8] != _CDF_MAGIC:
        raise ValueError(f"{path}: not an emissivity CDF cache file")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12 : 12 + hlen])
    nT, nF = header["n_temperatures"], header["n_frequencies"]
    body = np.frombuffer(data[12 + hlen :], dtype="<f8").astype(float)
    if body.size != nT + nF + nT * nF:
        raise ValueError(f"{path}: truncated CDF cache")
    cdf = EmissivityCdf(body[:nT].copy(), body[nT : nT + nF].copy(), body[nT + nF :].reshape(nT, nF).copy())
    if cdf.grid_hash != header["grid_hash"]:
        raise ValueError(f"{path}: grid hash mismatch")
    return cdf
