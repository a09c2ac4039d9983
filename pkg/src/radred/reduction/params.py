"""Band-model parameter vector, its evaluation, and the feasible polytope."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..physics import T_MAX, T_MIN, EmissivityCdf, cumulative_emissivity, spectral_emissivity

__all__ = [
    "A_MARGIN",
    "ALPHA_MAX",
    "CUT_GAP",
    "RomParameterization",
    "temperature_nodes",
    "interp_weights",
    "lambda_matrix",
    "eval_a",
    "eval_e",
    "band_emissivities",
    "emissivity_cut_derivatives",
    "constraint_system",
    "constraint_residual",
    "project_to_feasible",
]

A_MARGIN = 1e-6  # a <= 1 - A_MARGIN
CUT_GAP = 1e11  # Hz, minimum cut spacing and lower bound on the first cut
ALPHA_MAX = 1e6  # m^-1, exported in place of a = 0


def temperature_nodes(n_nodes: int, t_min: float = T_MIN, t_max: float = T_MAX) -> np.ndarray:
    if n_nodes < 2:
        raise ValueError("at least 2 temperature nodes are required")
    return np.linspace(t_min, t_max, int(n_nodes))


@dataclass(frozen=True, eq=False)
class RomParameterization:
    """``a_nodes`` is (M, N_k); ``cuts`` holds the M - 1 inner band edges in Hz."""

    t_nodes: np.ndarray
    a_nodes: np.ndarray
    cuts: np.ndarray

    def __post_init__(self):
        t = np.array(self.t_nodes, dtype=float)
        a = np.array(self.a_nodes, dtype=float)
        c = np.array(self.cuts, dtype=float).reshape(-1)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("temperature nodes must be ascending with at least 2 entries")
        if a.ndim != 2 or a.shape[1] != t.size:
            raise ValueError(f"a_nodes must have shape (M, {t.size}), got {a.shape}")
        if c.size != a.shape[0] - 1:
            raise ValueError(f"{a.shape[0]} bands need {a.shape[0] - 1} cuts, got {c.size}")
        for arr in (t, a, c):
            arr.setflags(write=False)
        object.__setattr__(self, "t_nodes", t)
        object.__setattr__(self, "a_nodes", a)
        object.__setattr__(self, "cuts", c)

    @property
    def n_bands(self) -> int:
        return self.a_nodes.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.t_nodes.size

    @property
    def n_theta(self) -> int:
        return self.n_bands * self.n_nodes + self.n_bands - 1

    @property
    def theta(self) -> np.ndarray:
        """Flat vector: a_nodes band-major, then cuts."""
        return np.concatenate([self.a_nodes.ravel(), self.cuts])

    def with_theta(self, theta) -> "RomParameterization":
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_theta:
            raise ValueError(f"theta has {theta.size} entries, expected {self.n_theta}")
        k = self.n_bands * self.n_nodes
        return RomParameterization(self.t_nodes, theta[:k].reshape(self.n_bands, self.n_nodes), theta[k:])

    @classmethod
    def flat(cls, t_nodes, a_values, cuts) -> "RomParameterization":
        """Temperature-independent a per band."""
        t_nodes = np.asarray(t_nodes, dtype=float)
        a = np.repeat(np.asarray(a_values, dtype=float)[:, None], t_nodes.size, axis=1)
        return cls(t_nodes, a, cuts)


def interp_weights(t_nodes: np.ndarray, T):
    """Two-hot interpolation as (left index, right weight); T is clamped to the node range."""
    T = np.clip(np.asarray(T, dtype=float), t_nodes[0], t_nodes[-1])
    k = np.clip(np.searchsorted(t_nodes, T, side="right") - 1, 0, t_nodes.size - 2)
    w = (T - t_nodes[k]) / (t_nodes[k + 1] - t_nodes[k])
    return k, w


def lambda_matrix(t_nodes: np.ndarray, T) -> np.ndarray:
    """Dense convex-combination weights, shape (len(T), N_k)."""
    T = np.atleast_1d(np.asarray(T, dtype=float))
    k, w = interp_weights(t_nodes, T)
    lam = np.zeros((T.size, t_nodes.size))
    rows = np.arange(T.size)
    lam[rows, k] = 1.0 - w
    lam[rows, k + 1] += w
    return lam


def eval_a(params: RomParameterization, T, band: int | None = None) -> np.ndarray:
    """Interpolated a(T); all bands (..., M) unless ``band`` is given."""
    k, w = interp_weights(params.t_nodes, T)
    a = params.a_nodes
    vals = a[:, k] * (1.0 - w) + a[:, k + 1] * w  # (M, ...)
    vals = np.moveaxis(vals, 0, -1)
    return vals if band is None else vals[..., band]


def band_emissivities(cuts, T, cdf: EmissivityCdf | None = None) -> np.ndarray:
    """Band emissivities (..., M) from cuts, with edges 0 and +inf.

    The closed-form cumulative emissivity is used unless a tabulated ``cdf``
    is supplied.
    """
    T = np.asarray(T, dtype=float)
    edges = np.concatenate([[0.0], np.asarray(cuts, dtype=float), [np.inf]])
    if cdf is None:
        F = cumulative_emissivity(T[..., None], edges)
    else:
        F = cdf.lookup(T[..., None], edges)
        F[..., 0] = 0.0
        F[..., -1] = 1.0
    return np.diff(F, axis=-1)


def eval_e(params: RomParameterization, T, band: int | None = None, cdf: EmissivityCdf | None = None):
    e = band_emissivities(params.cuts, T, cdf)
    return e if band is None else e[..., band]


def emissivity_cut_derivatives(cuts, T) -> np.ndarray:
    """``e(T, cut_c)`` for every cut, shape (len(T), M - 1)."""
    return spectral_emissivity(np.asarray(T, dtype=float)[..., None], np.asarray(cuts, dtype=float))


def constraint_system(n_bands: int, n_nodes: int, eps: float = A_MARGIN, gap: float = CUT_GAP):
    """Linear inequalities ``G theta <= h`` describing the model set.

    Rows: a >= 0, a <= 1 - eps (2 M N_k rows), cut_1 >= gap and
    cut_{i+1} - cut_i >= gap (M - 1 rows).
    """
    na = n_bands * n_nodes
    nc = n_bands - 1
    n = na + nc
    G = np.zeros((2 * na + nc, n))
    h = np.zeros(2 * na + nc)
    G[:na, :na] = -np.eye(na)
    G[na : 2 * na, :na] = np.eye(na)
    h[na : 2 * na] = 1.0 - eps
    for c in range(nc):
        r = 2 * na + c
        G[r, na + c] = -1.0
        if c > 0:
            G[r, na + c - 1] = 1.0
        h[r] = -gap
    return G, h


def constraint_residual(params: RomParameterization, eps: float = A_MARGIN, gap: float = CUT_GAP) -> float:
    """Largest violation of the model-set inequalities; cut rows in units of ``gap``."""
    a = params.a_nodes
    viol = [0.0, float(np.max(-a)), float(np.max(a - (1.0 - eps)))]
    if params.cuts.size:
        d = np.diff(np.concatenate([[0.0], params.cuts]))
        viol.append(float(np.max((gap - d) / gap)))
    return max(viol)


def _pava(y: np.ndarray) -> np.ndarray:
    """Least-squares non-decreasing fit (pool adjacent violators)."""
    vals, counts = [], []
    for v in y:
        vals.append(float(v))
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            n = counts[-2] + counts[-1]
            m = (vals[-2] * counts[-2] + vals[-1] * counts[-1]) / n
            vals[-2:] = [m]
            counts[-2:] = [n]
    return np.repeat(vals, counts)


def _project_cuts(cuts: np.ndarray, gap: float) -> np.ndarray:
    if cuts.size == 0:
        return cuts.copy()
    # Euclidean projection onto {c_1 >= gap, c_{i+1} - c_i >= gap}: with
    # d_i = c_i - i*gap the set is {0 <= d_1 <= d_2 <= ...}.
    i = np.arange(1, cuts.size + 1)
    d = np.maximum(_pava(cuts - i * gap), 0.0)
    out = d + i * gap
    # Remove rounding shortfalls so the constraints hold exactly in floats.
    if out[0] < gap:
        out[0] = gap
    for k in range(1, out.size):
        while out[k] - out[k - 1] < gap:
            out[k] = np.nextafter(out[k], np.inf)
    return out


def project_to_feasible(params: RomParameterization, eps: float = A_MARGIN, gap: float = CUT_GAP) -> RomParameterization:
    """Nearest feasible point: a clamped into [0, 1 - eps], cuts by isotonic projection."""
    a = np.clip(params.a_nodes, 0.0, 1.0 - eps)
    return RomParameterization(params.t_nodes, a, _project_cuts(np.asarray(params.cuts, dtype=float), gap))
