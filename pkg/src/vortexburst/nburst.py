"""Bursts inside N-vortex configurations and inside the unit disk.

Both constructions alternate between the burst solver, which sees the rest
of the system as an external field, and an update of that rest given the
burst triple. The loop stops when neither curve moves by more than the
outer tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .burst_solver import BurstSolution, GammaConfig, MembershipError, solve_burst
from .core import TWO_PI, VortexConfiguration, free_velocity, hamiltonian_of
from .dynamics import Burst, EventTrajectory, Trajectory, disk_velocity
from .fields import FieldSpec, disk_boundary_field, vortex_background_field, zero_field
from .quadrature import TimeGrid
from .selfsimilar import params_for, self_similar_positions


class OuterIterationError(RuntimeError):
    """The alternating iteration between burst and background did not settle."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True, eq=False)
class NBurstProblem:
    """A vortex of intensity ``xi`` at the origin bursting among ``background``.

    ``rho`` defaults to a third of the smallest of the background pair
    distances and distances to the origin. With no background it must be
    given.
    """

    xi: float
    background: VortexConfiguration | None = None
    rho: float | None = None
    T: float | None = None

    def __post_init__(self):
        if self.xi == 0:
            raise ValueError("xi must be nonzero")
        limit = self.rho_limit()
        rho = self.rho if self.rho is not None else limit
        if rho is None or not np.isfinite(rho) or rho <= 0:
            raise ValueError("rho must be positive (give it explicitly when N = 0)")
        if limit is not None and rho > limit * (1 + 1e-12):
            raise ValueError(f"rho = {rho} exceeds one third of the background separation ({limit})")
        object.__setattr__(self, "rho", float(rho))

    @property
    def n_background(self) -> int:
        return 0 if self.background is None else self.background.n

    def rho_limit(self) -> float | None:
        if self.background is None:
            return None
        y = self.background.positions
        if np.any(y == 0):
            raise ValueError("background vortices must avoid the origin")
        dists = [np.min(np.abs(y))]
        if y.size > 1:
            d = np.abs(y[:, None] - y[None, :])
            dists.append(np.min(d[np.triu_indices(y.size, 1)]))
        return float(min(dists)) / 3.0

    @property
    def children(self) -> np.ndarray:
        return params_for(self.xi).intensities


def tstar_bound(prob: NBurstProblem) -> float:
    """``2 pi rho^2 / ((N + 2) max |intensity|)`` over children and background."""
    strengths = list(np.abs(prob.children))
    if prob.background is not None:
        strengths.extend(np.abs(prob.background.intensities))
    return float(TWO_PI * prob.rho ** 2 / ((prob.n_background + 2) * max(strengths)))


@dataclass(frozen=True, eq=False)
class BackgroundCurve:
    """Background positions at ``times`` (first node is t = 0)."""

    times: np.ndarray
    positions: np.ndarray
    intensities: np.ndarray
    rho: float

    def displacement(self) -> float:
        return float(np.max(np.abs(self.positions - self.positions[0]))) if self.positions.size else 0.0

    def lipschitz(self) -> float:
        if self.positions.size == 0 or self.times.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.positions, axis=0))
                            / np.diff(self.times)[:, None]))

    def lipschitz_limit(self, xi: float) -> float:
        strengths = list(np.abs(params_for(xi).intensities)) + list(np.abs(self.intensities))
        return (self.positions.shape[1] + 2) * max(strengths) / (TWO_PI * self.rho)

    def violations(self, xi: float) -> list[str]:
        bad = []
        if self.displacement() > self.rho:
            bad.append("background displacement <= rho")
        if self.lipschitz() > self.lipschitz_limit(xi):
            bad.append("background Lipschitz bound")
        return bad


def static_background(prob: NBurstProblem, grid: TimeGrid) -> BackgroundCurve:
    times = np.concatenate([[0.0], grid.t])
    y0 = (prob.background.positions if prob.background is not None
          else np.zeros(0, dtype=complex))
    xi = (prob.background.intensities if prob.background is not None else np.zeros(0))
    return BackgroundCurve(times, np.repeat(y0[None, :], times.size, axis=0), xi, prob.rho)


def background_field(y: BackgroundCurve, check_xi: float | None = None) -> FieldSpec:
    """Field of the background vortices, cut off smoothly outside ``2 rho``."""
    if y.positions.shape[1] == 0:
        return zero_field()
    if check_xi is not None:
        bad = y.violations(check_xi)
        if bad:
            raise MembershipError("background curve: " + "; ".join(bad), float(y.times[-1]))
    return vortex_background_field(y.times, y.positions, y.intensities, cutoff=y.rho)


def triple_velocity_on(targets, sources, intensities) -> np.ndarray:
    """Velocity induced at ``targets (..., M)`` by vortices at ``sources (..., K)``."""
    xi = np.asarray(intensities, dtype=float).astype(complex)
    conj_vel = (1.0 / (targets[..., :, None] - sources[..., None, :])) @ xi / (2j * np.pi)
    return np.conj(conj_vel)


def gamma_Y(x_curve: BurstSolution, y: BackgroundCurve, prob: NBurstProblem) -> BackgroundCurve:
    """Integrate the background under mutual interaction and the triple's field."""
    if y.positions.shape[1] == 0:
        return y
    grid = x_curve.grid
    y_nodes = y.positions[1:]
    vel = free_velocity(y.intensities, y_nodes) if y_nodes.shape[1] > 1 else np.zeros_like(y_nodes)
    vel = vel + triple_velocity_on(y_nodes, x_curve.cartesian, x_curve.intensities)
    moved = y.positions[0][None, :] + grid.cumulative(vel, tail_power=0.0)
    return replace(y, positions=np.vstack([y.positions[:1], moved]))


def _full_system(sol: BurstSolution, y: BackgroundCurve):
    xi = np.concatenate([y.intensities, sol.intensities])
    z = np.concatenate([y.positions[1:], sol.cartesian], axis=1)
    return xi, z


def ode_residual(grid: TimeGrid, intensities, positions, velocity=None, t_from=None) -> float:
    """Relative mismatch of finite-difference and model velocities for t > t_from."""
    t_from = grid.T / 10 if t_from is None else t_from
    fd = grid.derivative(positions)
    model = free_velocity(intensities, positions) if velocity is None else velocity(positions)
    mask = grid.t > t_from
    return float(np.max(np.abs(fd[mask] - model[mask])) / np.max(np.abs(model[mask])))


def _assemble(prob_xi, origin, sol: BurstSolution, y: BackgroundCurve, geometry: str,
              meta: dict) -> EventTrajectory:
    xi_full, z_full = _full_system(sol, y)
    n_bg = y.positions.shape[1]
    pre_xi = np.append(y.intensities, prob_xi)
    pre_pos = np.append(y.positions[0], 0j)[None, :] + origin
    seg0 = Trajectory([0.0], pre_pos, pre_xi, None, None, None, geometry)
    vel = (disk_velocity(xi_full, z_full + origin) if geometry == "disk"
           else free_velocity(xi_full, z_full))
    seg1 = Trajectory(sol.times, z_full + origin, xi_full, vel, None, None, geometry)
    children = tuple(float(v) for v in sol.intensities)
    burst = Burst(0.0, n_bg, float(prob_xi), children, complex(origin),
                  tuple(range(n_bg, n_bg + 3)))
    return EventTrajectory([seg0, seg1], [burst], meta)


def solve_nburst(prob: NBurstProblem, cfg: GammaConfig | None = None,
                 outer_tol: float | None = None, max_outer: int = 60) -> EventTrajectory:
    """Burst of ``prob.xi`` at the origin while the background keeps moving.

    Returns an ``EventTrajectory``: a single-node segment holding the parent
    and background at t = 0, the burst event, and the (N + 3)-vortex
    segment on the grid. Ordering after the burst is background first, then
    the three children. Diagnostics are in ``meta``.
    """
    cfg = cfg or GammaConfig()
    t_star = tstar_bound(prob)
    T = prob.T if prob.T is not None else min(cfg.T, t_star)
    if T > t_star * (1 + 1e-12):
        raise ValueError(f"T = {T} exceeds the travel bound T* = {t_star}")
    outer_tol = 10 * cfg.picard_tol if outer_tol is None else outer_tol
    last_error = None
    for halving in range(cfg.max_halvings + 1):
        inner = replace(cfg, T=T, max_halvings=0)
        try:
            sol, y, history = _alternate(prob, inner, outer_tol, max_outer)
        except MembershipError as exc:
            last_error = exc
            T /= 2
            continue
        if np.max(np.abs(sol.cartesian)) > prob.rho:
            last_error = MembershipError("burst triple left the ball of radius rho", T)
            T /= 2
            continue
        xi_full, z_full = _full_system(sol, y)
        inv = hamiltonian_of(xi_full, z_full)
        meta = {
            "kind": "nburst",
            "T": T,
            "T_star": t_star,
            "rho": prob.rho,
            "halvings": halving,
            "outer_history": history,
            "gamma_residual": sol.gamma_residual,
            "picard_iterations": len(sol.residual_history),
            "ode_residual": ode_residual(sol.grid, xi_full, z_full),
            "background_displacement": y.displacement(),
            "background_lipschitz": y.lipschitz(),
            "background_lipschitz_limit": y.lipschitz_limit(prob.xi) if y.positions.shape[1] else 0.0,
            "hamiltonian_spread": float(np.ptp(inv[sol.times > T / 100])),
            "grid": {"kind": sol.grid.kind, "nodes": sol.grid.n, "t_min": sol.grid.t_min},
        }
        return _assemble(prob.xi, 0j, sol, y, "plane", meta)
    raise MembershipError(f"no admissible T after {cfg.max_halvings} halvings: {last_error}", T)


def _alternate(prob: NBurstProblem, cfg: GammaConfig, outer_tol: float, max_outer: int):
    grid = cfg.make_grid(cfg.T)
    y = static_background(prob, grid)
    if prob.n_background == 0:
        sol = solve_burst(zero_field(), prob.xi, cfg)
        return sol, y, [0.0]
    history = []
    sol = None
    for _ in range(max_outer):
        f = background_field(y, check_xi=prob.xi)
        new_sol = solve_burst(f, prob.xi, cfg, init=None if sol is None else sol.curve)
        new_y = gamma_Y(new_sol, y, prob)
        dz = 0.0 if sol is None else float(np.max(np.abs(new_sol.cartesian - sol.cartesian)))
        dy = float(np.max(np.abs(new_y.positions - y.positions)))
        dist = max(dz, dy) / prob.rho
        history.append(dist)
        sol, y = new_sol, new_y
        if dist < outer_tol:
            bad = y.violations(prob.xi)
            if bad:
                raise MembershipError("background curve: " + "; ".join(bad), cfg.T)
            return sol, y, history
    raise OuterIterationError(f"outer iteration stalled at {history[-1]:.3e}", history)


def solve_disk_burst(z0: complex, xi: float, cfg: GammaConfig | None = None,
                     outer_tol: float | None = None, max_outer: int = 60) -> EventTrajectory:
    """Burst at ``z0`` inside the unit disk; the image drift acts as the external field.

    The solver works in a frame centred on ``z0``; the boundary field is
    always evaluated at true positions.
    """
    z0 = complex(z0)
    if abs(z0) >= 1:
        raise ValueError("z0 must lie inside the unit disk")
    cfg = cfg or GammaConfig()
    outer_tol = 10 * cfg.picard_tol if outer_tol is None else outer_tol
    rho = 0.5 * (1 - abs(z0))
    p = params_for(xi)
    T = cfg.T
    last_error = None
    for halving in range(cfg.max_halvings + 1):
        inner = replace(cfg, T=T, max_halvings=0)
        grid = inner.make_grid(T)
        times = np.concatenate([[0.0], grid.t])
        rel = np.vstack([np.zeros((1, 3), complex), self_similar_positions(p, grid.t)])
        history = []
        sol = None
        try:
            for _ in range(max_outer):
                f = disk_boundary_field(times, rel + z0, p.intensities, origin=z0)
                new_sol = solve_burst(f, xi, inner, init=None if sol is None else sol.curve)
                new_rel = np.vstack([np.zeros((1, 3), complex), new_sol.cartesian])
                dist = float(np.max(np.abs(new_rel - rel))) / rho
                history.append(dist)
                sol, rel = new_sol, new_rel
                if dist < outer_tol:
                    break
            else:
                raise OuterIterationError(f"disk iteration stalled at {history[-1]:.3e}", history)
        except MembershipError as exc:
            last_error = exc
            T /= 2
            continue
        if np.max(np.abs(sol.cartesian)) > rho:
            last_error = MembershipError("triple left the ball of radius rho", T)
            T /= 2
            continue
        centre = sol.cartesian @ p.intensities
        c_ratio = np.abs(centre) / sol.times
        z_abs = sol.cartesian + z0
        meta = {
            "kind": "disk_burst",
            "T": T,
            "rho": rho,
            "halvings": halving,
            "outer_history": history,
            "gamma_residual": sol.gamma_residual,
            "centre_lipschitz": float(np.max(c_ratio)),
            "ode_residual": ode_residual(sol.grid, p.intensities, z_abs,
                                         velocity=lambda z: disk_velocity(p.intensities, z)),
        }
        empty = BackgroundCurve(times, np.zeros((times.size, 0), complex), np.zeros(0), rho)
        return _assemble(xi, z0, sol, empty, "disk", meta)
    raise MembershipError(f"no admissible T after {cfg.max_halvings} halvings: {last_error}", T)


def _shift_segment(seg: Trajectory, t0: float, origin: complex, length: float = 1.0,
                   spin: complex = 1.0) -> Trajectory:
    """Rescale a burst segment by ``length`` (time by ``length^2``), rotate it by
    the unit factor ``spin`` and move it to (t0, origin).

    Grid nodes closer to t = 0 than the resolution of ``t0`` would collapse
    onto each other after the shift and are dropped.
    """
    times = seg.times * length ** 2
    floor = 1e-11 * max(1.0, abs(t0))
    idx = np.flatnonzero(times >= floor)
    shifted = t0 + times[idx]
    idx = idx[np.concatenate([[True], np.diff(shifted) > 0])]
    vel = None if seg.velocities is None else seg.velocities[idx] * spin / length
    return replace(seg, times=t0 + times[idx],
                   positions=seg.positions[idx] * (length * spin) + origin, velocities=vel)


def _append_segment(a: Trajectory, b: Trajectory) -> Trajectory:
    """Join two segments with equal intensities; ``b`` may start where ``a`` ends."""
    keep = b.times > a.t_end
    if not np.any(keep):
        return replace(a, flag=b.flag, t_target=b.t_target)
    if a.times.size == 1:
        return replace(b, times=np.concatenate([a.times, b.times[keep]]),
                       positions=np.vstack([a.positions, b.positions[keep]]),
                       velocities=None if b.velocities is None else np.vstack(
                           [b.velocities[:1], b.velocities[keep]]))
    vel_a = a.velocities if a.velocities is not None else a.model_velocities()
    vel_b = b.velocities if b.velocities is not None else b.model_velocities()
    return replace(a, times=np.concatenate([a.times, b.times[keep]]),
                   positions=np.vstack([a.positions, b.positions[keep]]),
                   velocities=np.vstack([vel_a, vel_b[keep]]), flag=b.flag,
                   t_target=b.t_target)


class PathBuilder:
    """Assembles an event trajectory from regular stretches and bursts.

    Starts with a single node holding ``config`` at ``t0``. ``advance``
    integrates with merge continuation; ``burst`` splits one vortex using
    the constructions of this module.
    """

    def __init__(self, config: VortexConfiguration, t0: float = 0.0, geometry: str = "plane",
                 field: FieldSpec | None = None, integration=None):
        from .dynamics import IntegrationConfig

        self.geometry = geometry
        self.field = None if field is None or field.is_zero else field
        self.integration = integration or IntegrationConfig()
        self.segments = [Trajectory([t0], config.positions[None, :], config.intensities,
                                    None, None, None, geometry, self.field)]
        self.events: list = []
        self.bursts: list = []

    @property
    def t(self) -> float:
        return self.segments[-1].t_end

    @property
    def config(self) -> VortexConfiguration:
        return self.segments[-1].configuration(-1)

    def advance(self, t_stop: float) -> None:
        from .dynamics import SystemSpec, simulate

        if t_stop <= self.t:
            return
        spec = SystemSpec(self.config, self.geometry, self.field)
        part = simulate(spec, (self.t, t_stop), self.integration)
        self.segments.append(_append_segment(self.segments.pop(), part.segments[0]))
        self.segments.extend(part.segments[1:])
        self.events.extend(part.events)

    def burst(self, index: int, cfg: GammaConfig, rho: float | None = None,
              T_cap: float | None = None, normalize: bool = False) -> dict:
        """Burst vortex ``index`` now; returns the solver diagnostics.

        With ``normalize`` the burst is solved in units where the closest
        other vortex sits at distance 1 (space / L, time / L^2), which keeps
        field gradients, and hence the solver's membership conditions,
        independent of how crowded the configuration is. The solver pins
        the spiral phase at the window end in its own time units, so the
        rescaled problem is also rotated by ``(b/a) log L`` to select the
        same physical burst as an unscaled solve. ``T_cap`` bounds the
        physical window; by default it is ``cfg.T``.
        """
        config = self.config
        t0 = self.t
        xi = float(config.intensities[index])
        origin = complex(config.positions[index])
        others = [k for k in range(config.n) if k != index]
        T_cap = cfg.T if T_cap is None else T_cap
        length, spin = 1.0, 1.0
        if self.geometry == "disk":
            if others:
                raise ValueError("disk bursts are supported for a lone vortex only")
            et = solve_disk_burst(origin, xi, cfg)
            seg = _shift_segment(et.segments[1], t0, 0j)
        elif self.field is not None:
            if others or origin != 0 or t0 != 0:
                raise ValueError("bursts under an external field need a lone vortex at the origin at t = 0")
            sol = solve_burst(self.field, xi, cfg)
            seg = Trajectory(sol.times, sol.cartesian, sol.intensities, sol.velocities(),
                             None, None, "plane", self.field)
            et = None
            meta = {"kind": "burst", "T": sol.T, "halvings": sol.halvings,
                    "gamma_residual": sol.gamma_residual,
                    "picard_iterations": len(sol.residual_history),
                    "ode_residual": sol.ode_residual(), "holder": sol.holder_certificate(),
                    "drift": sol.drift}
        else:
            background = None
            if others:
                rel = config.positions[others] - origin
                if normalize:
                    length = 3.0 * NBurstProblem(xi, VortexConfiguration(
                        config.intensities[others], rel)).rho
                    p = params_for(xi)
                    spin = np.exp(1j * (p.b / p.a) * np.log(length))
                background = VortexConfiguration(config.intensities[others],
                                                 rel / (length * spin))
            probe = NBurstProblem(xi, background, rho=rho if rho is None else rho / length)
            T = min(T_cap / length ** 2, tstar_bound(probe))
            et = solve_nburst(replace(probe, T=T), replace(cfg, T=T))
            seg = _shift_segment(et.segments[1], t0, origin, length, spin)
        if et is not None:
            meta = dict(et.meta, length_scale=length, T_physical=et.meta["T"] * length ** 2)
        children = tuple(float(v) for v in params_for(xi).intensities)
        n_bg = len(others)
        self.events.append(Burst(t0, index, xi, children, origin, tuple(range(n_bg, n_bg + 3))))
        self.segments.append(seg)
        self.bursts.append(meta)
        return meta

    def build(self, meta: dict | None = None) -> EventTrajectory:
        return EventTrajectory(list(self.segments), list(self.events), dict(meta or {}))
