"""Weighted least-squares cost and its exact gradient.

The sensitivities of the band intensities obey the same first-order
recursion as the intensities themselves::

    G[l+1] = a(T_l) G[l] + U[l]

where ``U[l]`` collects the interpolation-weight terms for the a-nodes and
the ``+-e(T, cut)`` terms for the cuts. The state is propagated first; the
sensitivity recursion then runs over the same steps in chunks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..physics import T_MAX, T_MIN, total_radiance
from .params import RomParameterization, band_emissivities, emissivity_cut_derivatives, interp_weights

__all__ = [
    "NumericalError",
    "ReductionProblem",
    "Evaluation",
    "cost",
    "cost_gradient",
    "regularization",
]

_CHUNK = 128


class NumericalError(ArithmeticError):
    """Non-finite cost or gradient; ``profile`` is the offending probe index (or None)."""

    def __init__(self, message: str, profile: int | None = None):
        super().__init__(message)
        self.profile = profile


@dataclass
class _Batch:
    index: np.ndarray  # profile indices in the original order
    T: np.ndarray  # (J, L) clamped samples
    b: np.ndarray  # (J, L) black-body radiance
    ref: np.ndarray  # (J, L)
    w2: np.ndarray  # (J,)
    k: np.ndarray  # (J, L-1) left node of each step temperature
    lw: np.ndarray  # (J, L-1) right interpolation weight


@dataclass
class Evaluation:
    cost: float
    data_cost: float
    reg_cost: float
    gradient: np.ndarray | None
    rms: np.ndarray  # per-profile weighted RMS error
    outputs: list  # per-profile ROM total intensity


def regularization(a_nodes: np.ndarray) -> tuple:
    """(sum of squared adjacent-node differences, its gradient w.r.t. a_nodes)."""
    d = np.diff(a_nodes, axis=1)
    g = np.zeros_like(a_nodes)
    g[:, :-1] -= 2.0 * d
    g[:, 1:] += 2.0 * d
    return float(np.sum(d * d)), g


class ReductionProblem:
    """Probe set, full-order references and weights, frozen for repeated evaluation.

    Profiles of equal length are batched; interpolation weights and
    black-body radiances are precomputed once.
    """

    def __init__(
        self,
        profiles: Sequence,
        references: Sequence,
        t_nodes,
        beta: float = 0.0,
        t_ambient: float = T_MIN,
    ):
        if len(profiles) == 0:
            raise ValueError("at least one probe profile is required")
        if len(profiles) != len(references):
            raise ValueError(f"{len(profiles)} profiles but {len(references)} reference traces")
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.t_nodes = np.asarray(t_nodes, dtype=float)
        self.beta = float(beta)
        self.t_ambient = float(t_ambient)
        self.n_profiles = len(profiles)
        self.profiles = tuple(profiles)
        self.references = tuple(np.asarray(r, dtype=float) for r in references)
        dxs = {float(p.dx) for p in profiles}
        if len(dxs) != 1:
            raise ValueError("all profiles must share the same dx")
        self.dx = dxs.pop()
        by_len: dict = {}
        for j, (prof, ref) in enumerate(zip(profiles, references)):
            ref = np.asarray(ref, dtype=float)
            if ref.shape != (prof.length,):
                raise ValueError(f"profile {j}: reference has shape {ref.shape}, expected ({prof.length},)")
            by_len.setdefault(prof.length, []).append(j)
        self.lengths = np.array([p.length for p in profiles])
        self._batches = []
        for L in sorted(by_len):
            idx = np.array(by_len[L])
            T = np.clip(np.stack([profiles[j].samples for j in idx]), T_MIN, T_MAX)
            k, lw = interp_weights(self.t_nodes, T[:, :-1])
            self._batches.append(
                _Batch(
                    index=idx,
                    T=T,
                    b=total_radiance(T),
                    ref=np.stack([np.asarray(references[j], dtype=float) for j in idx]),
                    w2=np.array([profiles[j].weight for j in idx]) ** 2,
                    k=k,
                    lw=lw,
                )
            )
        self._b_amb = float(total_radiance(self.t_ambient))

    def _check(self, params: RomParameterization):
        if params.t_nodes.shape != self.t_nodes.shape or np.any(params.t_nodes != self.t_nodes):
            raise ValueError("parameter temperature nodes differ from the problem's nodes")

    def evaluate(self, params: RomParameterization, gradient: bool = True) -> Evaluation:
        self._check(params)
        M, K = params.n_bands, params.n_nodes
        g_a = np.zeros((M, K))
        g_c = np.zeros(M - 1)
        data = 0.0
        rms = np.zeros(self.n_profiles)
        outputs = [None] * self.n_profiles
        for batch in self._batches:
            d, ga, gc, r, out = self._batch(params, batch, gradient)
            data += d
            if gradient:
                g_a += ga
                g_c += gc
            for jj, j in enumerate(batch.index):
                rms[j] = r[jj]
                outputs[j] = out[jj]
        bad = np.flatnonzero(~np.isfinite(rms))
        if bad.size:
            raise NumericalError(f"non-finite cost on profile {int(bad[0])}", int(bad[0]))
        reg, g_reg = regularization(params.a_nodes)
        total = data + self.beta * reg
        grad = None
        if gradient:
            g_a += self.beta * g_reg
            grad = np.concatenate([g_a.ravel(), g_c])
            if not np.all(np.isfinite(grad)):
                raise NumericalError("non-finite gradient")
        return Evaluation(total, data, self.beta * reg, grad, rms, outputs)

    def _batch(self, params, batch: _Batch, gradient: bool):
        M, K = params.n_bands, params.n_nodes
        J, L = batch.T.shape
        cuts = params.cuts
        Ts = batch.T[:, :-1]
        an = params.a_nodes
        # (J, L-1, M) step coefficients
        A = np.moveaxis(an[:, batch.k] * (1.0 - batch.lw) + an[:, batch.k + 1] * batch.lw, 0, -1)
        E = band_emissivities(cuts, Ts)
        bs = batch.b[:, :-1, None]
        S = (1.0 - A) * E * bs

        e_amb = band_emissivities(cuts, self.t_ambient)
        I = np.empty((J, L, M))
        I[:, 0] = e_amb * self._b_amb
        for l in range(L - 1):
            I[:, l + 1] = A[:, l] * I[:, l] + S[:, l]
        out = I.sum(axis=2)
        res = batch.ref - out
        w2 = batch.w2
        data = float(np.sum(w2[:, None] * res * res))
        rms = np.sqrt(w2 * np.mean(res * res, axis=1))
        if not gradient:
            return data, None, None, rms, out

        # Sensitivity layout along the last axis: K a-nodes, then d/d(lower
        # cut), d/d(upper cut) of the band's own emissivity.
        P = K + 2
        coef = -2.0 * w2[:, None] * res  # (J, L)
        g = np.zeros((J, M, P))
        if M > 1:
            de_amb = emissivity_cut_derivatives(cuts, self.t_ambient)
            g[:, 1:, K] = -de_amb * self._b_amb
            g[:, :-1, K + 1] = de_amb * self._b_amb
        acc = np.einsum("j,jmp->mp", coef[:, 0], g)
        rows = np.arange(J)
        buf = np.empty((_CHUNK + 1, J, M, P))
        for s in range(0, L - 1, _CHUNK):
            t = min(s + _CHUNK, L - 1)
            n = t - s
            U = np.zeros((n, J, M, P))
            # a-node terms: lambda_l * (I_l - e_l b_l)
            drive = np.moveaxis(I[:, s:t] - E[:, s:t] * bs[:, s:t], 1, 0)  # (n, J, M)
            kk = batch.k[:, s:t].T  # (n, J)
            ww = batch.lw[:, s:t].T
            steps = np.arange(n)[:, None]
            U[steps, rows[None, :], :, kk] += ((1.0 - ww)[..., None] * drive)
            U[steps, rows[None, :], :, kk + 1] += (ww[..., None] * drive)
            if M > 1:
                de = emissivity_cut_derivatives(cuts, Ts[:, s:t])  # (J, n, M-1)
                src = (1.0 - A[:, s:t]) * bs[:, s:t]  # (J, n, M)
                U[:, :, 1:, K] = np.moveaxis(-src[:, :, 1:] * de, 1, 0)
                U[:, :, :-1, K + 1] = np.moveaxis(src[:, :, :-1] * de, 1, 0)
            At = np.moveaxis(A[:, s:t], 1, 0)[..., None]  # (n, J, M, 1)
            buf[0] = g
            for m in range(n):
                np.multiply(At[m], buf[m], out=buf[m + 1])
                buf[m + 1] += U[m]
            g = buf[n].copy()
            acc += np.einsum("nj,njmp->mp", coef[:, s + 1 : t + 1].T, buf[1 : n + 1])
        g_a = acc[:, :K]
        g_c = acc[1:, K] + acc[:-1, K + 1]
        return data, g_a, g_c, rms, out


def cost(params: RomParameterization, problem: ReductionProblem) -> float:
    return problem.evaluate(params, gradient=False).cost


def cost_gradient(params: RomParameterization, problem: ReductionProblem) -> np.ndarray:
    """Gradient w.r.t. ``params.theta`` (a_nodes band-major, then cuts)."""
    return problem.evaluate(params, gradient=True).gradient
