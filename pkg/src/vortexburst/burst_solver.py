"""Three-vortex bursts under an external field, by fixed-point iteration.

The unknown is a ``TransformedCurve`` u = (zeta, eta, x2, x3) on a grid in
(0, T]. The map ``gamma_map`` integrates the transformed equations with
``zeta(0) = 0``, ``eta(T) = 0`` and ``x(0) = 0``; its fixed points are
bursts. Existence is not constructive, so convergence of the damped
iteration is treated as an empirical certificate and failures are raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .core import VortexConfiguration, free_velocity
from .coords import (OutOfDomainError, TransformedCurve, cartesian, rtz_terms,
                     self_similar_curve)
from .fields import FieldSpec, zero_field
from .quadrature import TimeGrid, geometric_grid, holder_seminorm, power_grid
from .selfsimilar import SelfSimilarParams, build_L, holder_bound, params_for


class BurstConvergenceError(RuntimeError):
    """The fixed-point iteration did not reach the requested tolerance."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


class MembershipError(RuntimeError):
    """An iterate left the admissible set of curves."""

    def __init__(self, message: str, T: float):
        super().__init__(message)
        self.T = T


@dataclass(frozen=True)
class GammaConfig:
    """Grid and iteration settings of the burst solver.

    ``grid`` selects ``"geometric"`` (log-uniform nodes on
    ``[t_min_ratio T, T]``) or ``"power"`` (nodes ``T (i/n)^q``).
    """

    T: float = 1e-2
    grid_nodes: int = 512
    grading_exponent: float = 2.0
    grid: str = "geometric"
    t_min_ratio: float = 1e-10
    picard_tol: float = 1e-12
    picard_max_iter: int = 200
    damping: float = 1.0
    max_halvings: int = 6

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.grid_nodes < 64:
            raise ValueError("grid_nodes must be at least 64")
        if self.grading_exponent < 1:
            raise ValueError("grading_exponent must be >= 1")
        if self.grid not in ("geometric", "power"):
            raise ValueError("grid must be 'geometric' or 'power'")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")

    def make_grid(self, T: float | None = None) -> TimeGrid:
        T = self.T if T is None else T
        if self.grid == "geometric":
            return geometric_grid(T, self.grid_nodes, self.t_min_ratio)
        return power_grid(T, self.grid_nodes, self.grading_exponent)


@dataclass(frozen=True, eq=False)
class BurstSolution:
    """A certified burst: transformed curve, Cartesian positions and diagnostics."""

    curve: TransformedCurve
    cartesian: np.ndarray
    field: FieldSpec
    params: SelfSimilarParams
    gamma_residual: float
    residual_history: list = field(default_factory=list)
    grid: TimeGrid | None = None
    drift: complex = 0j
    solver_field: FieldSpec | None = None
    halvings: int = 0

    @property
    def times(self) -> np.ndarray:
        return self.curve.grid

    @property
    def T(self) -> float:
        return self.curve.T

    @property
    def intensities(self) -> np.ndarray:
        return self.params.intensities

    def velocities(self) -> np.ndarray:
        """Model velocities (free interaction plus field) at the nodes."""
        z = self.cartesian
        vel = free_velocity(self.intensities, z)
        if not self.field.is_zero:
            vel = vel + np.conj(self.field(self.times[:, None], z))
        return vel

    def ode_residual(self, t_from: float | None = None) -> float:
        """Relative mismatch of finite-difference velocities and the model, t > t_from."""
        t_from = self.T / 10 if t_from is None else t_from
        fd = self.grid.derivative(self.cartesian)
        model = self.velocities()
        mask = self.times > t_from
        scale = np.max(np.abs(model[mask]))
        return float(np.max(np.abs(fd[mask] - model[mask])) / scale)

    def holder_certificate(self) -> dict:
        """Discrete 1/2-Holder seminorms versus their bounds."""
        p = self.params
        unit = np.sqrt(self.curve.zeta) * np.exp(
            1j * (self.curve.eta + p.spiral_rate * np.log(self.times)))
        bound = holder_bound(p)
        per_vortex = [holder_seminorm(self.times, self.cartesian[:, j]) for j in range(3)]
        return {
            "r_e_itheta": holder_seminorm(self.times, unit),
            "r_e_itheta_bound": 2 * bound,
            "per_vortex": per_vortex,
            "per_vortex_bound": [3 * abs(a) * bound for a in p.shape],
        }


def preprocess_field(f: FieldSpec) -> tuple[FieldSpec, complex]:
    """Galilean change of frame making the field vanish at (0, 0).

    Returns ``f~(t, p) = f(t, p + conj(A) t) - A`` with ``A = f(0, 0)`` and
    the frame velocity ``conj(A)``; positions in the original frame are
    ``z = z~ + conj(A) t``.
    """
    if f.is_zero:
        return f, 0j
    value = complex(f(0.0, 0j))
    if value == 0:
        return f, 0j
    drift = np.conj(value)
    shifted = replace(f, drift=f.drift + drift, offset=f.offset + value,
                      bound_M=2 * f.bound_M)
    return shifted, complex(drift)


@dataclass(frozen=True, eq=False)
class _Kernel:
    """Eigen-decomposition of L/2a for the x-integral."""

    vecs: np.ndarray
    inv_vecs: np.ndarray
    rates: np.ndarray

    @classmethod
    def for_params(cls, p: SelfSimilarParams) -> "_Kernel":
        lam, vecs = np.linalg.eig(build_L(p).entries)
        return cls(vecs, np.linalg.inv(vecs), lam / (2 * p.a))


def gamma_map(u: TransformedCurve, f: FieldSpec, p: SelfSimilarParams,
              grid: TimeGrid, kernel: _Kernel | None = None) -> TransformedCurve:
    """One application of the fixed-point map on the nodes of ``grid``.

    ``f`` must vanish at (0, 0). The x-integral uses the exact power-law
    kernel ``(t/s)^(lambda_k/2a)`` of each eigenmode of L.
    """
    kernel = kernel or _Kernel.for_params(p)
    t = grid.t
    big_r, big_theta, xi2, xi3 = rtz_terms(t, u, f, p)
    zeta = 2 * p.a * t + grid.cumulative(big_r, tail_power=1.0).real
    theta_int = grid.cumulative(big_theta, tail_power=0.0).real
    eta = theta_int - theta_int[-1]
    xi_vec = np.stack([xi2, xi3, np.conj(xi2), np.conj(xi3)], axis=-1)
    modal = xi_vec @ kernel.inv_vecs.T
    log_t = np.log(t)[:, None]
    rates = kernel.rates[None, :]
    integrand = np.exp(-rates * log_t) * modal
    acc = grid.cumulative(integrand, tail_power=np.maximum(-kernel.rates.real, 0.0))
    x_vec = (np.exp(rates * log_t) * acc) @ kernel.vecs.T
    return TransformedCurve(t, zeta, eta, x_vec[:, 0], x_vec[:, 1])


def _iterate(f_pre, p, cfg: GammaConfig, grid: TimeGrid, init: TransformedCurve | None):
    kernel = _Kernel.for_params(p)
    u = init if init is not None else self_similar_curve(grid.t, p)
    zeta_scale = 2 * p.a * grid.T
    history = []
    for _ in range(cfg.picard_max_iter):
        try:
            image = gamma_map(u, f_pre, p, grid, kernel)
        except OutOfDomainError as exc:
            raise MembershipError(str(exc), grid.T) from exc
        bad = image.distance_violations(p)
        if bad:
            raise MembershipError("iterate left the admissible set: " + "; ".join(bad), grid.T)
        dist = u.distance(image, zeta_scale)
        history.append(dist)
        u = u.blend(image, cfg.damping) if cfg.damping < 1 else image
        if dist < cfg.picard_tol:
            final = gamma_map(u, f_pre, p, grid, kernel)
            return u, u.distance(final, zeta_scale), history
    raise BurstConvergenceError(
        f"no convergence in {cfg.picard_max_iter} iterations (last distance {history[-1]:.3e})",
        history)


def solve_burst(f: FieldSpec | None, xi: float, cfg: GammaConfig | None = None,
                init: TransformedCurve | None = None) -> BurstSolution:
    """Burst of a vortex of intensity ``xi`` at the origin under field ``f``.

    Starts from the self-similar curve (or ``init`` on a matching grid). If an
    iterate leaves the admissible set, T is halved, up to ``cfg.max_halvings``
    times.
    """
    cfg = cfg or GammaConfig()
    f = f if f is not None else zero_field()
    p = params_for(xi)
    f_pre, drift = preprocess_field(f)
    T = cfg.T
    last_error = None
    for halving in range(cfg.max_halvings + 1):
        grid = cfg.make_grid(T)
        start = init if (init is not None and init.grid.size == grid.n
                         and np.allclose(init.grid, grid.t)) else None
        try:
            u, residual, history = _iterate(f_pre, p, cfg, grid, start)
        except MembershipError as exc:
            last_error = exc
            T /= 2
            continue
        bad = u.ut_violations(p)
        if bad:
            last_error = MembershipError("; ".join(bad), T)
            T /= 2
            continue
        z = cartesian(grid.t, u.zeta, u.eta, u.x2, u.x3, p) + (drift * grid.t)[:, None]
        return BurstSolution(curve=u, cartesian=z, field=f, params=p,
                             gamma_residual=residual, residual_history=history,
                             grid=grid, drift=drift, solver_field=f_pre, halvings=halving)
    raise MembershipError(f"no admissible T after {cfg.max_halvings} halvings: {last_error}", T)


@dataclass(frozen=True)
class SensitivityReport:
    """Distance between bursts under two fields, and its normalizations."""

    sup_dist: float
    ratio: float
    field_distance: float
    T: float
    ratio_linear_in_T: float


def field_distance(f: FieldSpec, g: FieldSpec, times, radius: float, n_angles: int = 24) -> float:
    """Sampled sup of |f - g| over the given times and the disk of ``radius``."""
    ang = np.exp(2j * np.pi * np.arange(n_angles) / n_angles)
    pts = np.concatenate([[0j], np.outer(np.linspace(radius / 4, radius, 4), ang).ravel()])
    tt = np.asarray(times, dtype=float)[:, None]
    return float(np.max(np.abs(f(tt, pts[None, :]) - g(tt, pts[None, :]))))


def field_sensitivity(f: FieldSpec, g: FieldSpec, xi: float,
                      cfg: GammaConfig | None = None) -> SensitivityReport:
    """Solve under both fields and compare the Cartesian trajectories.

    ``ratio`` divides the sup distance by ``T^(1/2) |f - g|``;
    ``ratio_linear_in_T`` divides by ``T |f - g|`` instead.
    """
    cfg = cfg or GammaConfig()
    sol_f = solve_burst(f, xi, cfg)
    sol_g = solve_burst(g, xi, replace(cfg, T=sol_f.T, max_halvings=0))
    dist = float(np.max(np.abs(sol_f.cartesian - sol_g.cartesian)))
    radius = 2 * float(np.max(np.abs(np.concatenate([sol_f.cartesian, sol_g.cartesian]))))
    sample_t = sol_f.times[:: max(1, sol_f.times.size // 32)]
    fg = field_distance(f, g, sample_t, radius)
    T = sol_f.T
    if fg == 0:
        return SensitivityReport(dist, 0.0, 0.0, T, 0.0)
    return SensitivityReport(dist, dist / (np.sqrt(T) * fg), fg, T, dist / (T * fg))


def handoff(sol: BurstSolution, t0: float) -> VortexConfiguration:
    """Configuration at time ``t0`` in [t_min, T], for use as regular initial data.

    Between nodes the transformed unknowns are interpolated by cubic splines
    in ``log t`` and mapped back to Cartesian positions.
    """
    t = sol.times
    if not (t[0] <= t0 <= t[-1]):
        raise ValueError(f"t0 = {t0} outside [{t[0]}, {t[-1]}]")
    idx = np.searchsorted(t, t0)
    if idx < t.size and t[idx] == t0:
        return VortexConfiguration(sol.intensities, sol.cartesian[idx])
    u = sol.curve
    log_t = np.log(t)
    cols = np.stack([u.zeta, u.eta, u.x2.real, u.x2.imag, u.x3.real, u.x3.imag], axis=-1)
    vals = CubicSpline(log_t, cols, axis=0)(np.log(t0))
    z = cartesian(t0, vals[0], vals[1], vals[2] + 1j * vals[3], vals[4] + 1j * vals[5], sol.params)
    return VortexConfiguration(sol.intensities, z + sol.drift * t0)
