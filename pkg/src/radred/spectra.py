"""Absorption base data: alpha(T, p, y, nu) tables, ingestion and synthesis.

The table is stored as ``alpha[iy, iT, ip, inu]`` in m^-1. Lookups are
linear in T, log-log in p and exact-match in composition (reductions run
per (p, y) grid pair, so compositions are never blended here).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .physics import T_MAX, T_MIN

__all__ = [
    "P_MIN",
    "P_MAX",
    "BaseDataError",
    "FrequencyGrid",
    "Composition",
    "AbsorptionTable",
    "LineRecord",
    "ContinuumEdge",
    "DEFAULT_EDGES",
    "SyntheticSpectrumSpec",
    "log_frequency_grid",
    "default_frequency_grid",
    "default_synthetic_spec",
    "generate_synthetic_spectrum",
    "absorption_at",
    "load_absorption_table",
    "save_absorption_table",
    "spec_from_dict",
    "spec_to_dict",
]

P_MIN = 1.0e4
P_MAX = 1.0e7
COMPOSITION_TOL = 1e-9
_MATCH_TOL = 1e-6


class BaseDataError(ValueError):
    """Malformed or physically invalid base data."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Bin centres and widths (Hz) of the full-order frequency discretisation."""

    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        w = np.asarray(self.widths, dtype=float)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", w)
        if c.ndim != 1 or c.size < 1 or c.shape != w.shape:
            raise BaseDataError("frequency grid needs matching 1-D centers/widths, N >= 1")
        if np.any(~np.isfinite(c)) or np.any(c <= 0):
            raise BaseDataError("frequency centers must be finite and > 0")
        if np.any(w <= 0) or np.any(~np.isfinite(w)):
            raise BaseDataError("frequency widths must be > 0")
        if np.any(np.diff(c) <= 0):
            raise BaseDataError("frequency axis is unsorted (centers must be strictly ascending)")
        upper = c[:-1] + 0.5 * w[:-1]
        lower = c[1:] - 0.5 * w[1:]
        if np.any(upper > lower + 1e-9 * c[1:]):
            raise BaseDataError("frequency bins overlap")
        c.setflags(write=False)
        w.setflags(write=False)

    @property
    def size(self) -> int:
        return self.centers.size

    @property
    def lower_edges(self):
        return self.centers - 0.5 * self.widths

    @property
    def upper_edges(self):
        return self.centers + 0.5 * self.widths


def log_frequency_grid(n: int, f_min: float, f_max: float) -> FrequencyGrid:
    """``n`` contiguous bins with log-spaced edges; centres are bin midpoints."""
    edges = np.logspace(math.log10(f_min), math.log10(f_max), n + 1)
    return FrequencyGrid(0.5 * (edges[1:] + edges[:-1]), np.diff(edges))


def default_frequency_grid(n: int = 10_000) -> FrequencyGrid:
    return log_frequency_grid(n, 3.0e13, 6.0e15)


@dataclass(frozen=True)
class Composition:
    labels: tuple
    fractions: tuple

    def __post_init__(self):
        if len(self.labels) != len(self.fractions) or not self.labels:
            raise BaseDataError("composition needs one fraction per species label")
        y = np.asarray(self.fractions, dtype=float)
        if np.any(y < 0) or np.any(y > 1) or abs(y.sum() - 1.0) > COMPOSITION_TOL:
            raise BaseDataError(f"composition fractions {tuple(y)} must lie in [0,1] and sum to 1")

    def as_array(self):
        return np.asarray(self.fractions, dtype=float)

    def describe(self) -> str:
        return ",".join(f"{lab}={frac:.6g}" for lab, frac in zip(self.labels, self.fractions))


@dataclass(frozen=True)
class AbsorptionTable:
    grid: FrequencyGrid
    temperatures: np.ndarray
    pressures: np.ndarray
    species: tuple
    compositions: np.ndarray  # (ny, r)
    alpha: np.ndarray  # (ny, nT, np, N)

    def __post_init__(self):
        T = np.asarray(self.temperatures, dtype=float)
        p = np.asarray(self.pressures, dtype=float)
        y = np.atleast_2d(np.asarray(self.compositions, dtype=float))
        a = np.asarray(self.alpha, dtype=float)
        object.__setattr__(self, "temperatures", T)
        object.__setattr__(self, "pressures", p)
        object.__setattr__(self, "compositions", y)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "species", tuple(self.species))
        for name, ax, lo, hi in (("temperature", T, T_MIN, T_MAX), ("pressure", p, P_MIN, P_MAX)):
            if ax.ndim != 1 or ax.size == 0:
                raise BaseDataError(f"{name} axis must be a non-empty 1-D array")
            if np.any(np.diff(ax) <= 0):
                raise BaseDataError(f"{name} axis is unsorted: {ax.tolist()}")
            bad = ax[(ax < lo * (1 - 1e-12)) | (ax > hi * (1 + 1e-12))]
            if bad.size:
                raise BaseDataError(f"{name} axis value {bad[0]!r} outside [{lo:g}, {hi:g}]")
        if y.shape[1] != len(self.species):
            raise BaseDataError("composition rows must have one entry per species")
        for row in y:
            Composition(self.species, tuple(row))
        expected = (y.shape[0], T.size, p.size, self.grid.size)
        if a.shape != expected:
            raise BaseDataError(f"alpha array shape {a.shape} != {expected}")
        if np.any(~np.isfinite(a)):
            raise BaseDataError("non-finite absorption coefficient")
        if np.any(a <= 0):
            idx = tuple(int(i) for i in np.argwhere(a <= 0)[0])
            raise BaseDataError(f"non-positive absorption at index (iy, iT, ip, inu) = {idx}")
        for arr in (T, p, y, a):
            arr.setflags(write=False)

    def composition(self, iy: int) -> Composition:
        return Composition(self.species, tuple(float(v) for v in self.compositions[iy]))

    def composition_index(self, y) -> int:
        if isinstance(y, Composition):
            y = y.as_array()
        if isinstance(y, (int, np.integer)):
            if not 0 <= y < self.compositions.shape[0]:
                raise BaseDataError(f"composition index {y} out of range")
            return int(y)
        y = np.asarray(y, dtype=float)
        if y.shape != (len(self.species),):
            raise BaseDataError(f"composition {y.tolist()} has wrong length for species {self.species}")
        dist = np.abs(self.compositions - y[None, :]).max(axis=1)
        iy = int(np.argmin(dist))
        if dist[iy] > _MATCH_TOL:
            raise BaseDataError(f"composition {y.tolist()} has no grid match in the table")
        return iy

    def slab(self, p: float, y=0) -> np.ndarray:
        """alpha(T_k, p, y, nu_i) for all temperature nodes, shape (nT, N).

        Log-log interpolation in pressure, clamped to the axis.
        """
        iy = self.composition_index(y)
        P = self.pressures
        block = self.alpha[iy]
        if P.size == 1:
            return np.array(block[:, 0, :])
        lp = math.log(min(max(float(p), P[0]), P[-1]))
        lP = np.log(P)
        k = int(np.clip(np.searchsorted(lP, lp, side="right") - 1, 0, P.size - 2))
        w = (lp - lP[k]) / (lP[k + 1] - lP[k])
        if w == 0.0:
            return np.array(block[:, k, :])
        if w == 1.0:
            return np.array(block[:, k + 1, :])
        return np.exp((1.0 - w) * np.log(block[:, k, :]) + w * np.log(block[:, k + 1, :]))


def interp_temperature(slab: np.ndarray, temperatures: np.ndarray, T: float) -> np.ndarray:
    """Linear interpolation in T of a (nT, N) slab; T clamped to the axis."""
    if temperatures.size == 1:
        return slab[0].copy()
    T = min(max(float(T), temperatures[0]), temperatures[-1])
    k = int(np.clip(np.searchsorted(temperatures, T, side="right") - 1, 0, temperatures.size - 2))
    w = (T - temperatures[k]) / (temperatures[k + 1] - temperatures[k])
    if w == 0.0:
        return slab[k].copy()
    return (1.0 - w) * slab[k] + w * slab[k + 1]


def absorption_at(table: AbsorptionTable, T: float, p: float, y=0, index=None):
    """Absorption coefficient (m^-1) at (T, p, y) for channel ``index`` (all if None)."""
    alpha = interp_temperature(table.slab(p, y), table.temperatures, T)
    return alpha if index is None else alpha[index]


@dataclass(frozen=True)
class LineRecord:
    center: float  # Hz
    peak: float  # m^-1 above the floor, at (t_ref, p_ref)
    width: float  # Lorentzian HWHM at p_ref, Hz
    exponent: float = 0.0  # peak scales as (T / t_ref) ** exponent


@dataclass(frozen=True)
class ContinuumEdge:
    """Bound-free style edge: ``strength (T/t_ref)^exponent (frequency/nu)^3`` above ``frequency``."""

    frequency: float  # Hz
    strength: float  # m^-1 at the edge, at t_ref
    exponent: float = 0.0


# Opaque ultraviolet above ~1.6e15 Hz, transparent visible/infrared below.
DEFAULT_EDGES = (
    ContinuumEdge(1.6e15, 1.0e5, 0.5),
    ContinuumEdge(3.0e15, 1.0e6, 0.5),
)


@dataclass(frozen=True)
class SyntheticSpectrumSpec:
    """Lorentzian lines on a continuum with photoionisation-like edges.

    ``alpha = floor + edges(nu, T) + sum_k peak_k (T/t_ref)^g_k * L_k(nu; p)``,
    where the line profile keeps its integrated strength and broadens as
    ``width * (p / p_ref) ** pressure_broadening``. Explicit ``lines`` are
    used as given; ``n_random_lines`` more are drawn from ``seed``.
    """

    lines: tuple = ()
    edges: tuple = ()
    floor: float = 0.2
    temperature_exponent: float = 2.5
    pressure_broadening: float = 0.5
    seed: int = 0
    n_random_lines: int = 0
    peak_range: tuple = (1.0, 30.0)
    relative_width_range: tuple = (1.0e-4, 1.0e-3)
    t_ref: float = 1.0e4
    p_ref: float = 1.0e5
    wing_cutoff: float = 30.0  # in half-widths; 0 keeps the full Lorentzian
    negative_exponent_fraction: float = 0.2  # random exponents drawn from [-f g, g]

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "edges", tuple(self.edges))
        for i, ed in enumerate(self.edges):
            if not (ed.frequency > 0 and ed.strength > 0):
                raise BaseDataError(f"spec field 'edges[{i}]' needs positive frequency and strength")
        if not self.floor > 0:
            raise BaseDataError("spec field 'floor' must be > 0")
        for i, ln in enumerate(self.lines):
            if not ln.peak > self.floor:
                raise BaseDataError(f"spec field 'lines[{i}].peak' must exceed floor")
            if not ln.width > 0:
                raise BaseDataError(f"spec field 'lines[{i}].width' must be > 0")
            if not ln.center > 0:
                raise BaseDataError(f"spec field 'lines[{i}].center' must be > 0")
        if self.n_random_lines < 0:
            raise BaseDataError("spec field 'n_random_lines' must be >= 0")
        lo, hi = self.peak_range
        if not (self.floor < lo <= hi):
            raise BaseDataError("spec field 'peak_range' must satisfy floor < lo <= hi")
        lo, hi = self.relative_width_range
        if not (0 < lo <= hi):
            raise BaseDataError("spec field 'relative_width_range' must satisfy 0 < lo <= hi")
        if self.negative_exponent_fraction < 0:
            raise BaseDataError("spec field 'negative_exponent_fraction' must be >= 0")
        if self.wing_cutoff < 0:
            raise BaseDataError("spec field 'wing_cutoff' must be >= 0")
        if not (self.t_ref > 0 and self.p_ref > 0):
            raise BaseDataError("spec fields 't_ref' and 'p_ref' must be > 0")

    def resolved_lines(self, f_min: float, f_max: float) -> tuple:
        if self.n_random_lines == 0:
            return self.lines
        rng = np.random.default_rng(self.seed)
        n = self.n_random_lines
        centers = np.exp(rng.uniform(math.log(f_min), math.log(f_max), n))
        peaks = np.exp(rng.uniform(*np.log(self.peak_range), n))
        rel = np.exp(rng.uniform(*np.log(self.relative_width_range), n))
        g = self.temperature_exponent
        expo = rng.uniform(-self.negative_exponent_fraction * g, g, n)
        extra = tuple(
            LineRecord(float(c), float(pk), float(c * r), float(e))
            for c, pk, r, e in zip(centers, peaks, rel, expo)
        )
        return self.lines + extra


def default_synthetic_spec(seed: int = 7) -> SyntheticSpectrumSpec:
    return SyntheticSpectrumSpec(edges=DEFAULT_EDGES, n_random_lines=200, seed=seed)


def generate_synthetic_spectrum(
    spec: SyntheticSpectrumSpec,
    temperatures: Sequence[float],
    pressures: Sequence[float],
    grid: FrequencyGrid,
    compositions=None,
    species=("synthetic",),
) -> AbsorptionTable:
    """Evaluate the synthetic line spectrum on the (T, p, nu) grid.

    All compositions receive the same spectrum. Deterministic in ``spec``.
    """
    T = np.asarray(temperatures, dtype=float)
    P = np.asarray(pressures, dtype=float)
    if compositions is None:
        compositions = np.eye(len(species))[:1]
    Y = np.atleast_2d(np.asarray(compositions, dtype=float))
    lines = spec.resolved_lines(grid.lower_edges[0], grid.upper_edges[-1])
    nu = grid.centers
    alpha = np.full((T.size, P.size, nu.size), spec.floor)
    for ed in spec.edges:
        shape = np.where(nu >= ed.frequency, (ed.frequency / nu) ** 3, 0.0)
        alpha += (ed.strength * (T / spec.t_ref) ** ed.exponent)[:, None, None] * shape
    if lines:
        c = np.array([ln.center for ln in lines])
        pk = np.array([ln.peak for ln in lines])
        w = np.array([ln.width for ln in lines])
        g = np.array([ln.exponent for ln in lines])
        tfac = pk[None, :] * (T[:, None] / spec.t_ref) ** g[None, :]
        for ip, p in enumerate(P):
            s = (p / spec.p_ref) ** spec.pressure_broadening
            gw = w * s
            # Lorentzian with unit centre value at p_ref, fixed integrated strength.
            dist = nu[None, :] - c[:, None]
            shape = (w / gw)[:, None] * gw[:, None] ** 2 / (dist**2 + gw[:, None] ** 2)
            if spec.wing_cutoff > 0:
                shape[np.abs(dist) > spec.wing_cutoff * gw[:, None]] = 0.0
            alpha[:, ip, :] += tfac @ shape
    full = np.broadcast_to(alpha, (Y.shape[0],) + alpha.shape).copy()
    return AbsorptionTable(grid, T, P, tuple(species), Y, full)


def spec_to_dict(spec: SyntheticSpectrumSpec) -> dict:
    return {
        "lines": [
            {"center": ln.center, "peak": ln.peak, "width": ln.width, "exponent": ln.exponent}
            for ln in spec.lines
        ],
        "edges": [
            {"frequency": ed.frequency, "strength": ed.strength, "exponent": ed.exponent}
            for ed in spec.edges
        ],
        "floor": spec.floor,
        "temperature_exponent": spec.temperature_exponent,
        "pressure_broadening": spec.pressure_broadening,
        "seed": spec.seed,
        "n_random_lines": spec.n_random_lines,
        "peak_range": list(spec.peak_range),
        "relative_width_range": list(spec.relative_width_range),
        "t_ref": spec.t_ref,
        "p_ref": spec.p_ref,
        "wing_cutoff": spec.wing_cutoff,
        "negative_exponent_fraction": spec.negative_exponent_fraction,
    }


_SPEC_FLOATS = ("floor", "temperature_exponent", "pressure_broadening", "t_ref", "p_ref", "wing_cutoff", "negative_exponent_fraction")


def spec_from_dict(data: dict) -> SyntheticSpectrumSpec:
    """Build a spec from parsed JSON; errors name the offending field."""
    if not isinstance(data, dict):
        raise BaseDataError("spectrum spec must be a JSON object")
    known = set(spec_to_dict(SyntheticSpectrumSpec()))
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise BaseDataError(f"unknown spec field '{key}'")
        try:
            if key in _SPEC_FLOATS:
                kwargs[key] = float(value)
            elif key in ("seed", "n_random_lines"):
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError
                kwargs[key] = int(value)
            elif key in ("peak_range", "relative_width_range"):
                lo, hi = value
                kwargs[key] = (float(lo), float(hi))
            elif key == "lines":
                recs = []
                for i, ln in enumerate(value):
                    try:
                        recs.append(
                            LineRecord(
                                float(ln["center"]), float(ln["peak"]), float(ln["width"]),
                                float(ln.get("exponent", 0.0)),
                            )
                        )
                    except (KeyError, TypeError, ValueError) as exc:
                        raise BaseDataError(f"spec field 'lines[{i}]' is malformed: {exc}") from None
                kwargs[key] = tuple(recs)
            elif key == "edges":
                recs = []
                for i, ed in enumerate(value):
                    try:
                        recs.append(
                            ContinuumEdge(float(ed["frequency"]), float(ed["strength"]), float(ed.get("exponent", 0.0)))
                        )
                    except (KeyError, TypeError, ValueError) as exc:
                        raise BaseDataError(f"spec field 'edges[{i}]' is malformed: {exc}") from None
                kwargs[key] = tuple(recs)
        except BaseDataError:
            raise
        except (TypeError, ValueError):
            raise BaseDataError(f"spec field '{key}' has invalid value {value!r}") from None
    return SyntheticSpectrumSpec(**kwargs)


# ---------------------------------------------------------------------------
# Base-data files (see docs/formats.md)

TEXT_MAGIC = "RADRED-BASEDATA 1"
BINARY_MAGIC = b"RRBASE01"


def _fmt(v) -> str:
    return repr(float(v))


def save_absorption_table(table: AbsorptionTable, path, fmt: str = "text") -> None:
    path = Path(path)
    if fmt == "binary":
        _save_binary(table, path)
        return
    if fmt != "text":
        raise ValueError(f"unknown base-data format {fmt!r}")
    ny, nT, nP, N = table.alpha.shape
    out = [TEXT_MAGIC]
    out.append(f"TEMPERATURES {nT}")
    out.append(" ".join(_fmt(v) for v in table.temperatures))
    out.append(f"PRESSURES {nP}")
    out.append(" ".join(_fmt(v) for v in table.pressures))
    out.append(f"SPECIES {len(table.species)}")
    out.append(" ".join(table.species))
    out.append(f"COMPOSITIONS {ny}")
    out.extend(" ".join(_fmt(v) for v in row) for row in table.compositions)
    out.append(f"FREQUENCIES {N}")
    out.extend(f"{_fmt(c)} {_fmt(w)}" for c, w in zip(table.grid.centers, table.grid.widths))
    out.append(f"ALPHA {table.alpha.size}")
    idx = np.indices(table.alpha.shape).reshape(4, -1).T
    flat = table.alpha.reshape(-1)
    out.extend(f"{a} {b} {c} {d} {_fmt(v)}" for (a, b, c, d), v in zip(idx.tolist(), flat.tolist()))
    out.append("END")
    path.write_text("\n".join(out) + "\n")


def _save_binary(table: AbsorptionTable, path: Path) -> None:
    ny, nT, nP, N = table.alpha.shape
    header = json.dumps(
        {
            "n_compositions": ny,
            "n_temperatures": nT,
            "n_pressures": nP,
            "n_frequencies": N,
            "species": list(table.species),
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arr in (
            table.temperatures,
            table.pressures,
            table.compositions,
            table.grid.centers,
            table.grid.widths,
            table.alpha,
        ):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _load_binary(data: bytes, path) -> AbsorptionTable:
    (hlen,) = struct.unpack("<I", data[8:12])
    try:
        h = json.loads(data[12 : 12 + hlen])
        ny, nT, nP, N = h["n_compositions"], h["n_temperatures"], h["n_pressures"], h["n_frequencies"]
        species = tuple(h["species"])
    except (ValueError, KeyError) as exc:
        raise BaseDataError(f"{path}: bad binary header ({exc})") from None
    body = np.frombuffer(data[12 + hlen :], dtype="<f8").astype(float)
    sizes = [nT, nP, ny * len(species), N, N, ny * nT * nP * N]
    if body.size != sum(sizes):
        raise BaseDataError(f"{path}: binary payload has {body.size} values, expected {sum(sizes)}")
    parts = np.split(body, np.cumsum(sizes)[:-1])
    return AbsorptionTable(
        FrequencyGrid(parts[3], parts[4]),
        parts[0],
        parts[1],
        species,
        parts[2].reshape(ny, len(species)),
        parts[5].reshape(ny, nT, nP, N),
    )


class _Lines:
    def __init__(self, text: str, path):
        self.lines = text.splitlines()
        self.pos = 0
        self.path = path

    def error(self, msg, lineno=None):
        lineno = self.pos if lineno is None else lineno
        return BaseDataError(f"{self.path}:{lineno}: {msg}")

    def next(self) -> str:
        while self.pos < len(self.lines):
            raw = self.lines[self.pos].strip()
            self.pos += 1
            if raw and not raw.startswith("#"):
                return raw
        raise self.error("unexpected end of file")

    def section(self, keyword: str) -> int:
        head = self.next().split()
        if len(head) != 2 or head[0] != keyword:
            raise self.error(f"expected '{keyword} <count>', got {' '.join(head)!r}")
        try:
            n = int(head[1])
        except ValueError:
            raise self.error(f"bad count {head[1]!r} for {keyword}") from None
        if n < 1:
            raise self.error(f"{keyword} count must be >= 1")
        return n

    def floats(self, n: int, what: str) -> np.ndarray:
        parts = self.next().split()
        if len(parts) != n:
            raise self.error(f"{what}: expected {n} values, got {len(parts)}")
        try:
            return np.array([float(v) for v in parts])
        except ValueError as exc:
            raise self.error(f"{what}: {exc}") from None


def _load_text(text: str, path) -> AbsorptionTable:
    rd = _Lines(text, path)
    if rd.next() != TEXT_MAGIC:
        raise rd.error(f"missing '{TEXT_MAGIC}' header")
    nT = rd.section("TEMPERATURES")
    T = rd.floats(nT, "TEMPERATURES")
    nP = rd.section("PRESSURES")
    P = rd.floats(nP, "PRESSURES")
    r = rd.section("SPECIES")
    species = tuple(rd.next().split())
    if len(species) != r:
        raise rd.error(f"SPECIES: expected {r} labels, got {len(species)}")
    ny = rd.section("COMPOSITIONS")
    Y = np.array([rd.floats(r, f"COMPOSITIONS row {i}") for i in range(ny)])
    N = rd.section("FREQUENCIES")
    cw = np.array([rd.floats(2, f"FREQUENCIES row {i}") for i in range(N)])
    n_alpha = rd.section("ALPHA")
    total = ny * nT * nP * N
    if n_alpha != total:
        raise rd.error(f"ALPHA count {n_alpha} != {ny}*{nT}*{nP}*{N}")
    start = rd.pos
    body = rd.lines[start : start + n_alpha]
    alpha = np.full((ny, nT, nP, N), np.nan)
    shape = np.array([ny, nT, nP, N])
    try:
        rec = np.array(" ".join(body).split(), dtype=float).reshape(n_alpha, 5)
    except ValueError:
        rec = None
    if rec is None or np.any(rec[:, :4] != np.round(rec[:, :4])):
        for k, line in enumerate(body):
            parts = line.split()
            lineno = start + k + 1
            if len(parts) != 5:
                raise rd.error(f"alpha record needs 5 fields 'iy iT ip inu alpha', got {len(parts)}", lineno)
            try:
                [int(v) for v in parts[:4]]
                float(parts[4])
            except ValueError as exc:
                raise rd.error(f"bad alpha record: {exc}", lineno) from None
        raise rd.error("truncated ALPHA block", start + len(body))
    idx = rec[:, :4].astype(int)
    bad = np.any((idx < 0) | (idx >= shape[None, :]), axis=1)
    if np.any(bad):
        raise rd.error("alpha record index out of range", start + int(np.argmax(bad)) + 1)
    alpha[idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]] = rec[:, 4]
    if np.any(np.isnan(alpha)):
        raise rd.error("ALPHA block has duplicate or missing records", start + n_alpha)
    rd.pos = start + n_alpha
    if rd.next() != "END":
        raise rd.error("expected END")
    try:
        grid = FrequencyGrid(cw[:, 0], cw[:, 1])
    except BaseDataError as exc:
        raise BaseDataError(f"{path}: FREQUENCIES: {exc}") from None
    try:
        return AbsorptionTable(grid, T, P, species, Y, alpha)
    except BaseDataError as exc:
        raise BaseDataError(f"{path}: {exc}") from None


def load_absorption_table(source) -> AbsorptionTable:
    """Load a text or binary base-data file and validate every invariant."""
    data = Path(source).read_bytes()
    if data[:8] == BINARY_MAGIC:
        return _load_binary(data, source)
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise BaseDataError(f"{source}: neither binary nor ASCII base data") from None
    return _load_text(text, source)
