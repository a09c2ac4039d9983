"""Command-line entry point: ``radred <command> [options]``.

Every option can also come from a flat ``key = value`` file passed with
``--config``; flags override the file. The fully resolved options are
written to ``manifest.txt`` in the output directory, and
``radred <command> --config <dir>/manifest.txt --output <new dir>``
reproduces the run byte for byte.

Exit codes: 0 success, 2 usage error, 3 unreadable or inconsistent input,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, replace
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import plotting
from .freqdomain import FrozenOperatingPoint, bode_sweep, fom_transfer, omega_grid, rom_transfer, save_bode_csv
from .physics import T_MAX, T_MIN, DomainError
from .probes import ProbeDesignSpec, TemperatureProfile, bell_profile, design_probe_set, load_probe_set, load_profile_csv, save_probe_set
from .reduction import (
    GridPoint,
    NumericalError,
    ReductionConfig,
    RomFormatError,
    SolverError,
    build_problem,
    export_rom,
    load_rom,
    lpi_seed,
    refine_seed,
    save_rom,
    solve,
    sweep_order,
)
from .spectra import (
    BaseDataError,
    default_frequency_grid,
    default_synthetic_spec,
    generate_synthetic_spectrum,
    load_absorption_table,
    save_absorption_table,
    spec_from_dict,
    spec_to_dict,
)
from .transport import FullOrderModel, simulate_line

log = logging.getLogger("radred")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4

MANIFEST = "manifest.txt"


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# option values: parsing and canonical text


def _float_list(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ValueError("expected at least one number")
    return vals


def _int_list(text: str) -> tuple:
    try:
        vals = tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise ValueError("expected at least one integer")
    return vals


def _omega_spec(text: str) -> tuple:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"omega grid must be start:stop:points, got {text!r}")
    try:
        start, stop, pts = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"omega grid must be start:stop:points, got {text!r}") from None
    omega_grid(start, stop, pts)  # validates
    return (start, stop, pts)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _optional(conv):
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none"):
            return None
        return conv(text)

    return parse


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if len(value) == 3 and isinstance(value[2], int) and not isinstance(value[0], int):
            return f"{value[0]!r}:{value[1]!r}:{value[2]}"
        return ",".join(_fmt(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class Option:
    name: str
    parse: object
    default: object
    help: str


_PROBE_OPTIONS = [
    Option("peaks", _float_list, (6000.0, 10000.0, 14000.0, 18000.0), "probe peak temperatures [K]"),
    Option("slopes", _float_list, (1.0, 3.0), "bell slope exponents"),
    Option("widths", _float_list, (0.01,), "bell widths [m]"),
    Option("noise", float, 0.25, "uniform noise amplitude as a fraction of the peak"),
    Option("repetitions", int, 2, "times each bell is tiled along the line"),
    Option("seed", int, 0, "probe noise seed"),
    Option("dx", float, 1.0e-4, "position step [m]"),
    Option("line-length", float, 0.2, "length of one bell segment [m]"),
    Option("t-ambient", float, T_MIN, "ambient temperature [K]"),
]

_BASE = Option("input", _optional(str), None, "base-data file")
_FIGURES = Option("figures", _bool, True, "write PNG figures next to the CSV files")

COMMANDS = {
    "generate-spectrum": [
        Option("input", _optional(str), None, "spectrum spec JSON (default: built-in synthetic spectrum)"),
        Option("seed", _optional(int), None, "override the line seed of the spectrum definition"),
        Option("temperatures", int, 27, "number of temperature nodes on [300, 25000] K"),
        Option("pressures", _float_list, (1.0e5,), "pressure nodes [Pa]"),
        Option("frequency-bins", int, 10_000, "number of log-spaced frequency channels"),
        Option("format", _choice("text", "binary"), "text", "base-data file format"),
        _FIGURES,
    ],
    "design-probes": _PROBE_OPTIONS + [_FIGURES],
    "reduce": [
        _BASE,
        Option("probes", _optional(str), None, "probe directory from design-probes (default: design from the probe options)"),
        *_PROBE_OPTIONS,
        Option("bands", int, 2, "number of bands M"),
        Option("temp-nodes", int, 50, "number of temperature nodes N_k"),
        Option("beta", float, 0.0, "regularisation weight"),
        Option("weight-rule", _choice("max", "mean"), "mean", "profile weight 1/max(I) or 1/mean(I)"),
        Option("pressures", _optional(_float_list), None, "pressure nodes to reduce (default: all in the table)"),
        Option("compositions", _int_list, (0,), "composition indices to reduce"),
        Option("seed-source", _choice("lpi", "refine"), "lpi", "first-point seed: frozen clustering, or the best of it and the split M-1 band fits"),
        Option("warm-start", _bool, True, "seed each grid point from its solved neighbour"),
        Option("max-iter", int, 500, "solver iteration limit"),
        Option("gtol", float, 1e-8, "projected-gradient tolerance (relative to the seed cost)"),
        Option("format", _choice("text", "json"), "text", "model file format"),
        _FIGURES,
    ],
    "compare": [
        _BASE,
        Option("model", _optional(str), None, "reduced model file"),
        Option("profile", _optional(str), None, "temperature profile CSV (x, T); default: a bell from the options below"),
        Option("peak", float, 12000.0, "bell peak [K]"),
        Option("slope", float, 2.0, "bell slope exponent"),
        Option("width", float, 0.01, "bell width [m]"),
        Option("noise", float, 0.0, "noise fraction"),
        Option("seed", int, 1, "noise seed"),
        Option("dx", float, 1.0e-4, "position step [m]"),
        Option("line-length", float, 0.2, "line length [m]"),
        Option("t-ambient", float, T_MIN, "ambient temperature [K]"),
        Option("weight-rule", _choice("max", "mean"), "mean", "error weight 1/max(I) or 1/mean(I)"),
        _FIGURES,
    ],
    "bode": [
        _BASE,
        Option("model", _optional(str), None, "reduced model file"),
        Option("rom-alpha", _optional(_float_list), None, "band absorption coefficients [1/m] (instead of --model)"),
        Option("rom-emissivity", _optional(_float_list), None, "band emissivities (with --rom-alpha)"),
        Option("temperature", float, 12650.0, "frozen temperature [K]"),
        Option("pressure", _optional(float), None, "frozen pressure [Pa] (default: model tag or first table node)"),
        Option("composition", int, 0, "composition index"),
        Option("omega-grid", _omega_spec, (1.0e-4, 1.0e7, 60), "log grid start:stop:points [rad/m]"),
        _FIGURES,
    ],
}

_NOT_IN_MANIFEST = ("output", "config")


def _key(name: str) -> str:
    return name.replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radred", description="Band-model reduction of line-of-sight radiative transfer.")
    parser.add_argument("-q", "--quiet", action="store_true", default=False, help="only report errors")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for cmd, options in COMMANDS.items():
        p = sub.add_parser(cmd, help=f"run {cmd}", argument_default=argparse.SUPPRESS)
        p.add_argument("--output", "-o", required=True, help="output directory")
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("-q", "--quiet", action="store_true", help="only report errors")
        for opt in options:
            default = _fmt(opt.default)
            p.add_argument(f"--{opt.name}", dest=_key(opt.name), help=f"{opt.help} (default: {default})")
    return parser


def read_config(path) -> dict:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[_key(key)] = value
    return out


def resolve(command: str, flags: dict, config: dict) -> dict:
    """Defaults, then config file, then flags; every value parsed."""
    options = {_key(o.name): o for o in COMMANDS[command]}
    file_cmd = config.pop("command", command)
    if file_cmd != command:
        raise UsageError(f"config file is for '{file_cmd}', not '{command}'")
    unknown = sorted(set(config) - set(options))
    if unknown:
        raise UsageError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    resolved = {}
    for key, opt in options.items():
        raw = flags.get(key, config.get(key, opt.default))
        try:
            resolved[key] = opt.parse(raw) if isinstance(raw, str) else raw
        except (ValueError, TypeError) as exc:
            raise UsageError(f"--{opt.name}: {exc}") from None
    return resolved


def write_manifest(out: Path, command: str, cfg: dict, inputs=()) -> None:
    lines = [f"# radred {_version()}"]
    for path in inputs:
        if path:
            lines.append(f"# sha256 {_sha256(path)} {path}")
    lines.append(f"command = {command}")
    for key in sorted(cfg):
        if key not in _NOT_IN_MANIFEST:
            lines.append(f"{key.replace('_', '-')} = {_fmt(cfg[key])}")
    (out / MANIFEST).write_text("\n".join(lines) + "\n")


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _sha256(path) -> str:
    p = Path(path)
    if p.is_dir():
        h = hashlib.sha256()
        for f in sorted(p.iterdir()):
            if f.is_file():
                h.update(f.name.encode())
                h.update(f.read_bytes())
        return h.hexdigest()
    return hashlib.sha256(p.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# commands


def _require(cfg: dict, key: str, what: str):
    if cfg.get(key) is None:
        raise UsageError(f"--{key.replace('_', '-')} is required ({what})")
    return cfg[key]


def _load_table(path):
    try:
        return load_absorption_table(path)
    except OSError as exc:
        raise InputError(f"cannot read base data {path}: {exc}") from None


def _segment_length(cfg: dict) -> int:
    n = int(round(cfg["line_length"] / cfg["dx"])) + 1
    if n < 2:
        raise UsageError("--line-length must cover at least one step")
    return n


def _probe_spec(cfg: dict) -> ProbeDesignSpec:
    try:
        return ProbeDesignSpec(
            peaks=cfg["peaks"],
            slopes=cfg["slopes"],
            widths=cfg["widths"],
            noise_fraction=cfg["noise"],
            repetitions=cfg["repetitions"],
            seed=cfg["seed"],
            length=_segment_length(cfg),
            dx=cfg["dx"],
            t_ambient=cfg["t_ambient"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_generate_spectrum(cfg: dict, out: Path) -> int:
    if cfg["input"] is None:
        spec = default_synthetic_spec()
    else:
        try:
            data = json.loads(Path(cfg["input"]).read_text())
        except OSError as exc:
            raise InputError(f"cannot read spec {cfg['input']}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{cfg['input']}: invalid JSON: {exc}") from None
        try:
            spec = spec_from_dict(data)
        except (BaseDataError, ValueError) as exc:
            raise InputError(f"{cfg['input']}: {exc}") from None
    if cfg["seed"] is not None:
        spec = replace(spec, seed=cfg["seed"])
    cfg["seed"] = spec.seed
    if cfg["temperatures"] < 1 or cfg["frequency_bins"] < 1:
        raise UsageError("--temperatures and --frequency-bins must be >= 1")
    temps = np.linspace(T_MIN, T_MAX, cfg["temperatures"]) if cfg["temperatures"] > 1 else np.array([T_MIN])
    try:
        table = generate_synthetic_spectrum(spec, temps, sorted(cfg["pressures"]), default_frequency_grid(cfg["frequency_bins"]))
    except BaseDataError as exc:
        raise UsageError(str(exc)) from None
    name = "basedata.txt" if cfg["format"] == "text" else "basedata.rrb"
    save_absorption_table(table, out / name, cfg["format"])
    (out / "spectrum_spec.json").write_text(json.dumps(spec_to_dict(spec), indent=2, sort_keys=True) + "\n")
    if cfg["figures"]:
        plotting.plot_spectrum(out / "spectrum.png", table)
    ratio = float(table.alpha.max() / table.alpha.min())
    log.info("wrote %s: %d channels, alpha max/min %.3g", out / name, table.grid.size, ratio)
    write_manifest(out, "generate-spectrum", cfg, [cfg["input"]])
    return EXIT_OK


def cmd_design_probes(cfg: dict, out: Path) -> int:
    profiles = design_probe_set(_probe_spec(cfg))
    save_probe_set(profiles, out / "probes")
    if cfg["figures"]:
        plotting.plot_profiles(out / "probes.png", profiles)
    log.info("wrote %d profiles to %s", len(profiles), out / "probes")
    write_manifest(out, "design-probes", cfg)
    return EXIT_OK


def _point_tag(point: GridPoint) -> str:
    return f"p{point.pressure:.6g}_y{point.composition}"


def _write_fit_csv(path: Path, profiles, refs, outputs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["profile", "x_m", "T_K", "I_fom", "I_rom"])
        for j, (prof, I, R) in enumerate(zip(profiles, refs, outputs)):
            for x, T, a, b in zip(prof.positions.tolist(), prof.samples.tolist(), I.tolist(), R.tolist()):
                w.writerow([j, repr(x), repr(T), repr(a), repr(b)])


def _solve_point(table, point, profiles, rcfg: ReductionConfig, cfg: dict, seed, provenance):
    problem = build_problem(table, point, profiles, rcfg, cfg["weight_rule"], cfg["t_ambient"])
    if seed is None:
        if cfg["seed_source"] == "refine" and rcfg.n_bands > 1:
            lower = replace(rcfg, n_bands=rcfg.n_bands - 1)
            coarse, _ = solve(lower, problem, lpi_seed(table, point, lower, problem.dx), "lpi")
            lpi = lpi_seed(table, point, rcfg, problem.dx)
            seed, label = refine_seed(coarse, problem, rcfg, others=[("lpi", lpi)])
            provenance = f"refine:{label}"
        else:
            seed, provenance = lpi_seed(table, point, rcfg, problem.dx), "lpi"
    params, report = solve(rcfg, problem, seed, provenance)
    return problem, params, report


def cmd_reduce(cfg: dict, out: Path) -> int:
    if cfg["bands"] < 1:
        raise UsageError("--bands must be >= 1")
    table = _load_table(_require(cfg, "input", "base-data file"))
    if cfg["probes"] is not None:
        try:
            profiles = load_probe_set(cfg["probes"])
        except (OSError, KeyError, ValueError) as exc:
            raise InputError(f"cannot read probe set {cfg['probes']}: {exc}") from None
    else:
        profiles = design_probe_set(_probe_spec(cfg))
    try:
        rcfg = ReductionConfig(
            n_bands=cfg["bands"],
            n_nodes=cfg["temp_nodes"],
            beta=cfg["beta"],
            gtol=cfg["gtol"],
            max_iter=cfg["max_iter"],
            seed_source=cfg["seed_source"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    pressures = cfg["pressures"] if cfg["pressures"] is not None else tuple(table.pressures.tolist())
    cfg["pressures"] = tuple(float(p) for p in pressures)
    for p in pressures:
        if not np.any(np.isclose(table.pressures, p, rtol=1e-12)):
            raise UsageError(f"pressure {p!r} is not a node of the base data")
    for iy in cfg["compositions"]:
        if not 0 <= iy < table.compositions.shape[0]:
            raise UsageError(f"composition index {iy} is not in the base data")

    order = sweep_order(pressures, cfg["compositions"])
    summary, errors = [], []
    previous = None
    for point in order:
        tag = _point_tag(point)
        seed, provenance = None, ""
        if cfg["warm_start"] and previous is not None:
            seed, provenance = previous[1], f"warm:{previous[0].label()}"
        try:
            problem, params, report = _solve_point(table, point, profiles, rcfg, cfg, seed, provenance)
        except (ArithmeticError, SolverError, ValueError) as exc:
            errors.append({"pressure": point.pressure, "composition": point.composition, "error": f"{type(exc).__name__}: {exc}"})
            log.error("%s: %s", point.label(), exc)
            continue
        previous = (point, params)
        meta = {"seed": report.seed, "cost": report.cost, "rms": [float(v) for v in report.rms], "weight_rule": cfg["weight_rule"]}
        comp = table.compositions[point.composition].tolist()
        model = export_rom(params, problem.dx, point.pressure, comp, meta)
        suffix = "txt" if cfg["format"] == "text" else "json"
        save_rom(model, out / f"rom_{tag}.{suffix}", cfg["format"])
        (out / f"report_{tag}.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        outputs = problem.evaluate(params, gradient=False).outputs
        _write_fit_csv(out / f"fit_{tag}.csv", problem.profiles, problem.references, outputs)
        if cfg["figures"]:
            plotting.plot_rom_coefficients(out / f"coefficients_{tag}.png", model, tag)
            p0 = problem.profiles[0]
            plotting.plot_intensity(out / f"fit_{tag}.png", p0.positions, p0.samples, problem.references[0], outputs[0], tag)
            plotting.plot_fit_history(out / f"history_{tag}.png", report.trajectory, tag)
        summary.append((point, report))
        log.info("%s: cost %.6g, max rms %.4g, %d iterations (%s)", point.label(), report.cost, float(np.max(report.rms)), report.iterations, report.seed)

    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pressure_pa", "composition", "cost", "max_rms", "iterations", "converged", "seed"])
        for point, rep in summary:
            w.writerow([repr(point.pressure), point.composition, repr(rep.cost), repr(float(np.max(rep.rms))), rep.iterations, int(rep.converged), rep.seed])
    (out / "errors.json").write_text(json.dumps(errors, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "reduce", cfg, [cfg["input"], cfg["probes"]])
    return EXIT_NUMERICAL if errors else EXIT_OK


def _composition_index(table, model) -> int:
    if not model.composition:
        return 0
    try:
        return table.composition_index(np.asarray(model.composition))
    except BaseDataError as exc:
        raise InputError(f"model/table composition mismatch: {exc}") from None


def _check_pressure(table, p: float) -> None:
    lo, hi = table.pressures[0], table.pressures[-1]
    if not lo * (1 - 1e-12) <= p <= hi * (1 + 1e-12):
        raise UsageError(f"pressure {p!r} outside the base-data axis [{lo!r}, {hi!r}]")


def cmd_compare(cfg: dict, out: Path) -> int:
    table = _load_table(_require(cfg, "input", "base-data file"))
    try:
        model = load_rom(_require(cfg, "model", "reduced model file"))
    except OSError as exc:
        raise InputError(f"cannot read model: {exc}") from None
    iy = _composition_index(table, model)
    pressure = model.pressure if np.isfinite(model.pressure) else float(table.pressures[0])
    _check_pressure(table, pressure)
    if cfg["profile"] is not None:
        try:
            profile = load_profile_csv(cfg["profile"])
        except OSError as exc:
            raise InputError(f"cannot read profile: {exc}") from None
        except ValueError as exc:
            raise InputError(str(exc)) from None
        for key in ("peak", "slope", "width", "noise", "seed", "dx", "line_length"):
            cfg.pop(key, None)
    else:
        n = _segment_length(cfg)
        T = bell_profile(n, cfg["dx"], cfg["peak"], cfg["width"], cfg["slope"], cfg["t_ambient"])
        if cfg["noise"] > 0:
            amp = cfg["noise"] * cfg["peak"]
            T = T + np.random.default_rng(cfg["seed"]).uniform(-amp, amp, T.size)
        profile = TemperatureProfile(np.clip(T, T_MIN, T_MAX), cfg["dx"])
    if np.any(profile.samples < T_MIN) or np.any(profile.samples > T_MAX):
        log.warning("profile leaves [%g, %g] K; temperatures are clamped", T_MIN, T_MAX)
    fom = simulate_line(FullOrderModel(table, pressure, iy), profile, cfg["t_ambient"])
    rom = simulate_line(model.band_model(profile.dx), profile, cfg["t_ambient"])
    I, R = fom.intensity, rom.intensity
    scale = float(I.max() if cfg["weight_rule"] == "max" else I.mean())
    w = 1.0 / scale
    err = I - R
    rms = float(np.sqrt(np.mean((w * err) ** 2)))
    train = model.meta.get("rms")
    result = {
        "weighted_rms": rms,
        "weight": w,
        "max_abs_weighted_error": float(np.max(np.abs(w * err))),
        "rows": int(I.size),
        "training_rms": float(np.sqrt(np.mean(np.square(train)))) if train else None,
    }
    with open(out / "compare.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["x_m", "T_K", "I_fom", "I_rom", "error"])
        for row in zip(fom.positions.tolist(), profile.samples.tolist(), I.tolist(), R.tolist(), err.tolist()):
            wr.writerow([repr(v) for v in row])
    (out / "compare.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    if cfg["figures"]:
        plotting.plot_intensity(out / "compare.png", fom.positions, profile.samples, I, R)
    log.info("weighted rms %.4g over %d samples", rms, I.size)
    write_manifest(out, "compare", cfg, [cfg["input"], cfg["model"], cfg["profile"]])
    return EXIT_OK


def cmd_bode(cfg: dict, out: Path) -> int:
    omega = omega_grid(*cfg["omega_grid"])
    model = None
    if cfg["model"] is not None:
        if cfg["rom_alpha"] is not None:
            raise UsageError("give either --model or --rom-alpha, not both")
        try:
            model = load_rom(cfg["model"])
        except OSError as exc:
            raise InputError(f"cannot read model: {exc}") from None
    table = _load_table(cfg["input"]) if cfg["input"] is not None else None
    if table is None and model is None and cfg["rom_alpha"] is None:
        raise UsageError("bode needs --input, --model or --rom-alpha")
    if (cfg["rom_alpha"] is None) != (cfg["rom_emissivity"] is None):
        raise UsageError("--rom-alpha and --rom-emissivity go together")

    pressure = cfg["pressure"]
    if pressure is None:
        if model is not None and np.isfinite(model.pressure):
            pressure = model.pressure
        elif table is not None:
            pressure = float(table.pressures[0])
        else:
            pressure = 1.0e5
    cfg["pressure"] = float(pressure)
    T = cfg["temperature"]
    try:
        op = FrozenOperatingPoint(T, pressure, cfg["composition"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    fom_curve = rom_curve = None
    if table is not None:
        _check_pressure(table, pressure)
        if not table.temperatures[0] <= T <= table.temperatures[-1]:
            raise UsageError(f"temperature {T!r} outside the base-data axis")
        if not 0 <= cfg["composition"] < table.compositions.shape[0]:
            raise UsageError(f"composition index {cfg['composition']} is not in the base data")
        if model is not None and _composition_index(table, model) != cfg["composition"]:
            raise InputError("model composition differs from --composition")
        fom_curve = bode_sweep(lambda w: fom_transfer(op, table, None, w), omega)
    if model is not None:
        alpha, e = model.frozen(T)
    elif cfg["rom_alpha"] is not None:
        alpha, e = np.array(cfg["rom_alpha"]), np.array(cfg["rom_emissivity"])
        if alpha.shape != e.shape or np.any(alpha <= 0) or np.any(e < 0):
            raise UsageError("--rom-alpha needs positive values, one per --rom-emissivity entry")
    else:
        alpha = None
    if alpha is not None:
        rom_curve = bode_sweep(lambda w: rom_transfer(alpha, e, w), omega)

    save_bode_csv(out / "bode.csv", omega, fom_curve, rom_curve)
    if cfg["figures"]:
        plotting.plot_bode(out / "bode.png", omega, fom_curve, rom_curve, f"T = {T:g} K, p = {pressure:g} Pa")
    for label, curve in (("full order", fom_curve), ("reduced", rom_curve)):
        if curve is not None:
            log.info("%s: |G(%g)| = %.6g", label, omega[0], curve.magnitude[0])
    write_manifest(out, "bode", cfg, [cfg["input"], cfg["model"]])
    return EXIT_OK


_HANDLERS = {
    "generate-spectrum": cmd_generate_spectrum,
    "design-probes": cmd_design_probes,
    "reduce": cmd_reduce,
    "compare": cmd_compare,
    "bode": cmd_bode,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))  # exits with 2 on usage errors
    command = args.pop("command")
    logging.basicConfig(level=logging.ERROR if args.pop("quiet", False) else logging.INFO, format="radred: %(message)s", stream=sys.stderr)
    out = Path(args.pop("output"))
    try:
        config = read_config(args["config"]) if args.get("config") else {}
        cfg = resolve(command, args, config)
        out.mkdir(parents=True, exist_ok=True)
        return _HANDLERS[command](cfg, out)
    except UsageError as exc:
        print(f"radred {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, BaseDataError, RomFormatError) as exc:
        print(f"radred {command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, SolverError, DomainError, FloatingPointError) as exc:
        print(f"radred {command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
