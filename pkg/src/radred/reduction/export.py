"""Exported band models: absorption coefficients instead of step factors."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..transport import BandModel
from .params import ALPHA_MAX, RomParameterization, band_emissivities, interp_weights

__all__ = ["ALPHA_MAX", "RomModel", "RomFormatError", "export_rom", "save_rom", "load_rom"]

ROM_MAGIC = "RADRED-ROM 1"
_SUM_TOL = 1e-6


class RomFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RomModel:
    """Band model at one (p, y) grid point.

    ``alpha_hat`` and ``e_hat`` are (M, N_k) tables at ``t_nodes``; ``capped``
    marks nodes where a = 0 was replaced by ``ALPHA_MAX``.
    """

    dx: float
    t_nodes: np.ndarray
    cuts: np.ndarray
    alpha_hat: np.ndarray
    e_hat: np.ndarray
    capped: np.ndarray
    pressure: float = float("nan")
    composition: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("t_nodes", "cuts", "alpha_hat", "e_hat"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        capped = np.array(self.capped, dtype=bool)
        capped.setflags(write=False)
        object.__setattr__(self, "capped", capped)
        object.__setattr__(self, "composition", tuple(float(v) for v in self.composition))
        self.validate()

    @property
    def n_bands(self) -> int:
        return self.alpha_hat.shape[0]

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[0.0], self.cuts, [np.inf]])

    def validate(self) -> None:
        M, K = self.alpha_hat.shape
        if self.e_hat.shape != (M, K) or self.capped.shape != (M, K) or self.t_nodes.shape != (K,):
            raise RomFormatError("band tables do not match the temperature nodes")
        if self.cuts.shape != (M - 1,):
            raise RomFormatError(f"{M} bands need {M - 1} cuts")
        if not self.dx > 0:
            raise RomFormatError("dx must be > 0")
        if not np.all(self.alpha_hat > 0):
            raise RomFormatError("absorption coefficients must be > 0")
        if np.any(np.diff(np.concatenate([[0.0], self.cuts])) <= 0):
            raise RomFormatError("band cuts must be positive and ascending")
        dev = np.max(np.abs(self.e_hat.sum(axis=0) - 1.0))
        if dev > _SUM_TOL:
            raise RomFormatError(f"band emissivities sum to 1 only within {dev:.3g}")

    def a_nodes(self, dx: float | None = None) -> np.ndarray:
        return np.exp(-self.alpha_hat * (self.dx if dx is None else dx))

    def to_params(self) -> RomParameterization:
        a = self.a_nodes()
        a[self.capped] = 0.0
        return RomParameterization(self.t_nodes, a, self.cuts)

    def coefficients(self, T, dx: float | None = None):
        """(a_hat, e_hat) at temperatures ``T``, shape (len(T), M).

        The step factor is interpolated linearly between nodes as in the fit;
        for another ``dx`` it is rescaled as ``a ** (dx / self.dx)``.
        """
        T = np.atleast_1d(np.asarray(T, dtype=float))
        a = self.to_params().a_nodes
        k, w = interp_weights(self.t_nodes, T)
        a_t = (a[:, k] * (1.0 - w) + a[:, k + 1] * w).T
        if dx is not None and dx != self.dx:
            a_t = a_t ** (dx / self.dx)
        Tc = np.clip(T, self.t_nodes[0], self.t_nodes[-1])
        return a_t, band_emissivities(self.cuts, Tc)

    def band_model(self, dx: float | None = None) -> BandModel:
        return BandModel(lambda T: self.coefficients(T, dx), self.n_bands)

    def frozen(self, T: float):
        """(alpha_hat, e_hat) per band at one temperature, alpha interpolated via a."""
        a, e = self.coefficients([T])
        with np.errstate(divide="ignore"):
            alpha = np.where(a[0] > 0, -np.log(np.maximum(a[0], 1e-300)) / self.dx, ALPHA_MAX)
        return np.minimum(alpha, ALPHA_MAX), e[0]


def export_rom(params: RomParameterization, dx: float, pressure: float = float("nan"), composition=(), meta=None) -> RomModel:
    """alpha = -ln(a) / dx per node, capped at ``ALPHA_MAX`` where a = 0."""
    a = params.a_nodes
    with np.errstate(divide="ignore"):
        alpha = -np.log(a) / dx
    capped = ~(alpha < ALPHA_MAX)
    alpha = np.where(capped, ALPHA_MAX, alpha)
    e = band_emissivities(params.cuts, params.t_nodes).T
    return RomModel(dx, params.t_nodes, params.cuts, alpha, e, capped, float(pressure), tuple(composition), dict(meta or {}))


def _fmt(v: float) -> str:
    return repr(float(v))


def save_rom(model: RomModel, path, fmt: str = "text") -> None:
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(_to_json(model), indent=2, sort_keys=True) + "\n")
        return
    if fmt != "text":
        raise ValueError(f"unknown ROM format {fmt!r}")
    lines = [
        ROM_MAGIC,
        f"bands {model.n_bands}",
        f"temp_nodes {model.t_nodes.size}",
        f"dx {_fmt(model.dx)}",
        f"pressure {_fmt(model.pressure)}",
        "composition " + " ".join(_fmt(v) for v in model.composition),
        "cuts " + " ".join(_fmt(v) for v in model.cuts),
    ]
    for key in sorted(model.meta):
        lines.append(f"meta {key} {json.dumps(model.meta[key], sort_keys=True)}")
    edges = model.edges
    for i in range(model.n_bands):
        lines.append(f"BAND {i + 1} {_fmt(edges[i])} {_fmt(edges[i + 1])}")
        lines.append("# T_K alpha_hat_per_m e_hat capped")
        for k, T in enumerate(model.t_nodes):
            lines.append(
                f"{_fmt(T)} {_fmt(model.alpha_hat[i, k])} {_fmt(model.e_hat[i, k])} {int(model.capped[i, k])}"
            )
    lines.append("END")
    path.write_text("\n".join(lines) + "\n")


def _to_json(model: RomModel) -> dict:
    return {
        "format": ROM_MAGIC,
        "dx": model.dx,
        "pressure": None if math.isnan(model.pressure) else model.pressure,
        "composition": list(model.composition),
        "t_nodes": model.t_nodes.tolist(),
        "cuts": model.cuts.tolist(),
        "bands": [
            {
                "nu_low": float(model.edges[i]),
                "nu_high": None if i == model.n_bands - 1 else float(model.edges[i + 1]),
                "alpha_hat": model.alpha_hat[i].tolist(),
                "e_hat": model.e_hat[i].tolist(),
                "capped": [bool(c) for c in model.capped[i]],
            }
            for i in range(model.n_bands)
        ],
        "meta": model.meta,
    }


def _from_json(data: dict, path) -> RomModel:
    try:
        bands = data["bands"]
        p = data.get("pressure")
        return RomModel(
            float(data["dx"]),
            data["t_nodes"],
            data["cuts"],
            [b["alpha_hat"] for b in bands],
            [b["e_hat"] for b in bands],
            [b["capped"] for b in bands],
            float("nan") if p is None else float(p),
            tuple(data.get("composition", ())),
            dict(data.get("meta", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RomFormatError(f"{path}: malformed ROM JSON: {exc}") from None


def load_rom(path) -> RomModel:
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        return _from_json(json.loads(text), path)
    rows = text.splitlines()
    if not rows or rows[0].strip() != ROM_MAGIC:
        raise RomFormatError(f"{path}:1: expected header {ROM_MAGIC!r}")
    head: dict = {}
    meta: dict = {}
    bands = []
    current = None
    for lineno, raw in enumerate(rows[1:], 2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "END":
                break
            if parts[0] == "BAND":
                current = []
                bands.append(current)
            elif current is not None:
                if len(parts) != 4:
                    raise ValueError("expected 'T alpha_hat e_hat capped'")
                current.append((float(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])))
            elif parts[0] == "meta":
                meta[parts[1]] = json.loads(line.split(None, 2)[2])
            else:
                head[parts[0]] = [float(v) for v in parts[1:]]
        except (ValueError, IndexError) as exc:
            raise RomFormatError(f"{path}:{lineno}: {exc}") from None
    else:
        raise RomFormatError(f"{path}: missing END")
    try:
        M = int(head["bands"][0])
        K = int(head["temp_nodes"][0])
        dx = head["dx"][0]
        pressure = head["pressure"][0]
        comp = tuple(head.get("composition", ()))
        cuts = head.get("cuts", [])
    except (KeyError, IndexError):
        raise RomFormatError(f"{path}: header must give bands, temp_nodes, dx and pressure") from None
    if len(bands) != M or any(len(b) != K for b in bands):
        raise RomFormatError(f"{path}: expected {M} bands of {K} rows")
    arr = np.array(bands)  # (M, K, 4)
    t_nodes = arr[0, :, 0]
    if np.any(arr[:, :, 0] != t_nodes):
        raise RomFormatError(f"{path}: bands list different temperature nodes")
    return RomModel(dx, t_nodes, cuts, arr[:, :, 1], arr[:, :, 2], arr[:, :, 3] != 0, pressure, comp, meta)
