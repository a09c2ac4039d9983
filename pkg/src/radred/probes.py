"""Temperature probe profiles used to excite the full-order model.

Bell-shaped profiles with adjustable peak and flank steepness, repeated so
that later copies start from the state left by earlier ones, with uniform
white noise on top.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .physics import T_MAX, T_MIN

__all__ = [
    "TemperatureProfile",
    "ProbeDesignSpec",
    "bell_profile",
    "design_probe_set",
    "compute_weights",
    "save_probe_set",
    "load_probe_set",
    "load_profile_csv",
]


@dataclass(frozen=True)
class TemperatureProfile:
    samples: np.ndarray
    dx: float
    weight: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", s)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("a temperature profile needs at least 2 samples")
        if not np.all(np.isfinite(s)):
            raise ValueError("temperature profile contains non-finite samples")
        if not self.dx > 0:
            raise ValueError("position step dx must be > 0")
        if not self.weight > 0:
            raise ValueError("profile weight must be > 0")
        s.setflags(write=False)

    @property
    def length(self) -> int:
        return self.samples.size

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.dx


@dataclass(frozen=True)
class ProbeDesignSpec:
    peaks: tuple = (6000.0, 10000.0, 14000.0, 18000.0)
    slopes: tuple = (1.0, 3.0)
    widths: tuple = (0.01,)
    noise_fraction: float = 0.25
    repetitions: int = 2
    weight_rule: str = "mean"
    seed: int = 0
    length: int = 2001
    dx: float = 1.0e-4
    t_ambient: float = T_MIN
    t_min: float = T_MIN
    t_max: float = T_MAX

    def __post_init__(self):
        for name in ("peaks", "slopes", "widths"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not self.peaks or not self.slopes or not self.widths:
            raise ValueError("probe design needs non-empty peaks, slopes and widths")
        if not 0 <= self.noise_fraction < 1:
            raise ValueError("noise_fraction must lie in [0, 1)")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.weight_rule not in ("max", "mean"):
            raise ValueError("weight_rule must be 'max' or 'mean'")
        if any(not (self.t_min <= pk <= self.t_max) for pk in self.peaks):
            raise ValueError("probe peak temperatures must lie within the temperature domain")
        if any(s <= 0 for s in self.slopes) or any(w <= 0 for w in self.widths):
            raise ValueError("slopes and widths must be > 0")
        if self.length < 2 or not self.dx > 0:
            raise ValueError("length must be >= 2 and dx > 0")

    @property
    def line_length(self) -> float:
        return (self.length - 1) * self.dx


def bell_profile(length: int, dx: float, peak: float, width: float, slope: float, t_ambient: float):
    """Generalised Gaussian bell ``Ta + (peak - Ta) exp(-(|x - xc| / width)^(2 slope))``.

    ``xc`` is the node nearest the middle of the line, so the maximum equals
    ``peak`` exactly.
    """
    x = np.arange(length) * dx
    xc = x[(length - 1) // 2]
    return t_ambient + (peak - t_ambient) * np.exp(-np.abs((x - xc) / width) ** (2.0 * slope))


def design_probe_set(spec: ProbeDesignSpec) -> list:
    """One profile per (peak, slope, width), tiled ``repetitions`` times, plus noise.

    Noise is uniform in ``[-f * peak, f * peak]``, drawn from a single
    generator in profile order; samples are clamped to ``[t_min, t_max]``.
    """
    rng = np.random.default_rng(spec.seed)
    out = []
    for idx, (peak, slope, width) in enumerate(itertools.product(spec.peaks, spec.slopes, spec.widths)):
        bell = bell_profile(spec.length, spec.dx, peak, width, slope, spec.t_ambient)
        tiled = np.tile(bell, spec.repetitions)
        amp = spec.noise_fraction * peak
        noise = rng.uniform(-amp, amp, tiled.size) if amp > 0 else np.zeros(tiled.size)
        samples = np.clip(tiled + noise, spec.t_min, spec.t_max)
        meta = {
            "index": idx,
            "peak": peak,
            "slope": slope,
            "width": width,
            "noise_fraction": spec.noise_fraction,
            "repetitions": spec.repetitions,
            "seed": spec.seed,
        }
        out.append(TemperatureProfile(samples, spec.dx, 1.0, meta))
    return out


def compute_weights(profiles: Sequence[TemperatureProfile], intensities, rule: str = "mean") -> list:
    """Return copies of ``profiles`` with ``weight = 1 / max(I)`` or ``1 / mean(I)``.

    ``intensities`` are the full-order total-intensity traces, one per profile.
    """
    if rule not in ("max", "mean"):
        raise ValueError("weight rule must be 'max' or 'mean'")
    if len(profiles) != len(intensities):
        raise ValueError("one intensity trace per profile is required")
    out = []
    for j, (prof, I) in enumerate(zip(profiles, intensities)):
        I = np.asarray(I, dtype=float)
        scale = I.max() if rule == "max" else I.mean()
        if not np.isfinite(scale) or scale <= 0:
            raise ValueError(f"profile {j}: intensity trace is zero, cannot normalise")
        out.append(replace(prof, weight=1.0 / float(scale)))
    return out


def _write_profile_csv(path: Path, prof: TemperatureProfile) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_m", "T_K"])
        for x, T in zip(prof.positions.tolist(), prof.samples.tolist()):
            w.writerow([repr(x), repr(T)])


def load_profile_csv(path, dx: float | None = None) -> TemperatureProfile:
    """Read a two-column (x, T) CSV; dx is inferred from x unless given."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ValueError(f"{path}:{lineno}: bad profile row {row!r}") from None
    if len(rows) < 2:
        raise ValueError(f"{path}: profile needs at least 2 rows")
    arr = np.array(rows)
    if dx is None:
        steps = np.diff(arr[:, 0])
        dx = float(steps.mean())
        if not np.allclose(steps, dx, rtol=1e-6):
            raise ValueError(f"{path}: positions are not equally spaced")
    return TemperatureProfile(arr[:, 1], dx, 1.0, {"source": str(path)})


def save_probe_set(profiles: Sequence[TemperatureProfile], directory) -> None:
    """Write one CSV per profile plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    entries = []
    for j, prof in enumerate(profiles):
        name = f"profile_{j:03d}.csv"
        _write_profile_csv(d / name, prof)
        entries.append({"file": name, "dx": prof.dx, "weight": prof.weight, "meta": prof.meta})
    (d / "manifest.json").write_text(json.dumps({"profiles": entries}, indent=2, sort_keys=True) + "\n")


def load_probe_set(directory) -> list:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    out = []
    for e in manifest["profiles"]:
        prof = load_profile_csv(d / e["file"], dx=e["dx"])
        out.append(TemperatureProfile(prof.samples, e["dx"], e["weight"], e.get("meta", {})))
    return out
