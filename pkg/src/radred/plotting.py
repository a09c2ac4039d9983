"""PNG figures written next to the CSV outputs.

Uses the Agg canvas directly (no pyplot state) and strips PNG metadata so
that identical data gives byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = ["plot_bode", "plot_intensity", "plot_rom_coefficients", "plot_fit_history", "plot_spectrum", "plot_profiles"]

_DPI = 100


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.savefig(Path(path), format="png", dpi=_DPI, metadata={"Software": None})


def plot_bode(path, omega, fom=None, rom=None, title: str = "") -> None:
    """Magnitude and phase of one or two frequency responses."""
    fig = Figure(figsize=(7, 6))
    ax_m, ax_p = fig.subplots(2, 1, sharex=True)
    for curve, label, style in ((fom, "full order", "-"), (rom, "reduced", "--")):
        if curve is None:
            continue
        ax_m.loglog(omega, curve.magnitude, style, label=label)
        ax_p.semilogx(omega, curve.phase_deg, style, label=label)
    ax_m.set_ylabel("|G|")
    ax_p.set_ylabel("phase [deg]")
    ax_p.set_xlabel("omega [rad/m]")
    ax_m.legend(loc="lower left")
    ax_m.grid(True, which="both", alpha=0.3)
    ax_p.grid(True, which="both", alpha=0.3)
    if title:
        ax_m.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_intensity(path, x, temperature, fom, rom=None, title: str = "") -> None:
    """Temperature profile above, total intensity traces below."""
    fig = Figure(figsize=(7, 6))
    ax_t, ax_i = fig.subplots(2, 1, sharex=True)
    ax_t.plot(x, temperature, lw=0.6)
    ax_t.set_ylabel("T [K]")
    ax_i.plot(x, fom, lw=0.8, label="full order")
    if rom is not None:
        ax_i.plot(x, rom, "--", lw=0.8, label="reduced")
        ax_i.legend(loc="upper right")
    ax_i.set_ylabel("I_tot [W m^-2 sr^-1]")
    ax_i.set_xlabel("x [m]")
    if title:
        ax_t.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_rom_coefficients(path, model, title: str = "") -> None:
    """alpha_hat(T) on a log axis and e_hat(T) per band."""
    fig = Figure(figsize=(7, 6))
    ax_a, ax_e = fig.subplots(2, 1, sharex=True)
    for i in range(model.n_bands):
        label = f"band {i + 1}"
        ax_a.semilogy(model.t_nodes, model.alpha_hat[i], marker=".", label=label)
        ax_e.plot(model.t_nodes, model.e_hat[i], marker=".", label=label)
    ax_a.set_ylabel("alpha_hat [1/m]")
    ax_e.set_ylabel("e_hat")
    ax_e.set_xlabel("T [K]")
    ax_a.legend(loc="best")
    if title:
        ax_a.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_fit_history(path, trajectory, title: str = "") -> None:
    fig = Figure(figsize=(6, 4))
    ax = fig.subplots()
    ax.semilogy(np.arange(len(trajectory)), trajectory)
    ax.set_xlabel("iteration")
    ax.set_ylabel("cost")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_spectrum(path, table, pressure_index: int = 0, composition: int = 0, title: str = "") -> None:
    """alpha(nu) at the first, middle and last temperature nodes."""
    fig = Figure(figsize=(7, 4))
    ax = fig.subplots()
    T = table.temperatures
    for k in sorted({0, T.size // 2, T.size - 1}):
        ax.loglog(table.grid.centers, table.alpha[composition, k, pressure_index], lw=0.5, label=f"T = {T[k]:g} K")
    ax.set_xlabel("nu [Hz]")
    ax.set_ylabel("alpha [1/m]")
    ax.legend(loc="upper left")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_profiles(path, profiles) -> None:
    fig = Figure(figsize=(7, 4))
    ax = fig.subplots()
    for j, prof in enumerate(profiles):
        ax.plot(prof.positions, prof.samples, lw=0.4, label=f"profile {j}")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("T [K]")
    if len(profiles) <= 10:
        ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    _save(fig, path)
