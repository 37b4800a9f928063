"""Time grids clustered at t = 0, with high-order cumulative quadrature.

Every grid is uniform in an auxiliary variable ``u``: ``u = log t`` for the
geometric grid and ``u = (t/T)^(1/q)`` for the power grid. Integrals and
derivatives use Lagrange stencils in ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

QUAD_POINTS = 6
DIFF_POINTS = 7


@lru_cache(maxsize=None)
def _cell_weights(m: int) -> np.ndarray:
    """W[o, k]: integral over [o, o+1] of the k-th Lagrange basis on nodes 0..m-1."""
    nodes = np.arange(m, dtype=float)
    inv_vander = np.linalg.inv(np.vander(nodes, m, increasing=True))
    powers = np.arange(m)
    weights = np.empty((m - 1, m))
    for o in range(m - 1):
        moments = ((o + 1.0) ** (powers + 1) - float(o) ** (powers + 1)) / (powers + 1)
        weights[o] = moments @ inv_vander
    return weights


@lru_cache(maxsize=None)
def _diff_weights(m: int) -> np.ndarray:
    """D[o, k]: derivative at node o of the k-th Lagrange basis on nodes 0..m-1."""
    nodes = np.arange(m, dtype=float)
    inv_vander = np.linalg.inv(np.vander(nodes, m, increasing=True))
    powers = np.arange(m)
    weights = np.empty((m, m))
    for o in range(m):
        dmom = np.where(powers > 0, powers * float(o) ** np.maximum(powers - 1, 0), 0.0)
        weights[o] = dmom @ inv_vander
    return weights


def _stencil_starts(count: int, n: int, m: int, lead: int) -> np.ndarray:
    return np.clip(np.arange(count) - lead, 0, n - m)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Nodes ``t`` in (0, T], uniform spacing ``h`` in ``u``, and ``dt/du``."""

    t: np.ndarray
    h: float
    dt_du: np.ndarray
    kind: str

    @property
    def n(self) -> int:
        return int(self.t.size)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    def cumulative(self, values, tail_power=0.0) -> np.ndarray:
        """Cumulative integral from 0 to each node along axis 0.

        ``values`` holds F(t_i). Over (0, t_0) the integrand is taken to
        behave like ``F(t_0) (s/t_0)^p`` with ``p = tail_power`` (broadcast
        over trailing axes).
        """
        f = np.asarray(values)
        n = self.n
        if f.shape[0] != n:
            raise ValueError("values must have one row per grid node")
        m = min(QUAD_POINTS, n)
        g = f * self.dt_du.reshape((n,) + (1,) * (f.ndim - 1))
        starts = _stencil_starts(n - 1, n, m, max(m // 2 - 1, 0))
        offsets = np.arange(n - 1) - starts
        w = _cell_weights(m)[offsets]
        idx = starts[:, None] + np.arange(m)[None, :]
        cells = self.h * np.einsum("ck,ck...->c...", w, g[idx])
        tail = f[0] * self.t[0] / (1.0 + np.asarray(tail_power, dtype=float))
        out = np.empty(f.shape, dtype=np.result_type(f, float))
        out[0] = tail
        out[1:] = tail + np.cumsum(cells, axis=0)
        return out

    def derivative(self, values) -> np.ndarray:
        """d/dt along axis 0 by 7-point Lagrange differences in ``u``."""
        f = np.asarray(values)
        n = self.n
        m = min(DIFF_POINTS, n)
        starts = _stencil_starts(n, n, m, m // 2)
        offsets = np.arange(n) - starts
        w = _diff_weights(m)[offsets]
        idx = starts[:, None] + np.arange(m)[None, :]
        du = np.einsum("ck,ck...->c...", w, f[idx]) / self.h
        return du / self.dt_du.reshape((n,) + (1,) * (f.ndim - 1))


def geometric_grid(T: float, n: int, t_min_ratio: float = 1e-10) -> TimeGrid:
    """Nodes log-uniform on [t_min_ratio * T, T]."""
    if not (T > 0 and 0 < t_min_ratio < 1 and n >= 8):
        raise ValueError("need T > 0, 0 < t_min_ratio < 1, n >= 8")
    u = np.linspace(np.log(T * t_min_ratio), np.log(T), n)
    t = np.exp(u)
    t[-1] = T
    return TimeGrid(t=t, h=float(u[1] - u[0]), dt_du=t.copy(), kind="geometric")


def power_grid(T: float, n: int, q: float = 2.0) -> TimeGrid:
    """Nodes ``T (i/n)^q`` for i = 1..n."""
    if not (T > 0 and q >= 1 and n >= 8):
        raise ValueError("need T > 0, q >= 1, n >= 8")
    u = np.arange(1, n + 1) / n
    t = T * u ** q
    return TimeGrid(t=t, h=1.0 / n, dt_du=q * T * u ** (q - 1), kind="power")


def holder_seminorm(t, values, alpha: float = 0.5, block: int = 256) -> float:
    """Discrete sup over node pairs of |f(t_i) - f(t_j)| / |t_i - t_j|^alpha."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(values)
    f = f.reshape(f.shape[0], -1)
    best = 0.0
    for start in range(0, t.size, block):
        ti = t[start:start + block, None]
        fi = f[start:start + block, None, :]
        dt = np.abs(ti - t[None, :])
        df = np.max(np.abs(fi - f[None, :, :]), axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dt > 0, df / dt ** alpha, 0.0)
        best = max(best, float(np.max(q)))
    return best
