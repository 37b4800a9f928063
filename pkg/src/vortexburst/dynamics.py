"""Regular N-vortex integration, merges after collapse, and time reversal.

Trajectories are piecewise: an ``EventTrajectory`` alternates smooth
segments with ``Burst``/``Merge`` events. Vortex ordering across an event
follows a fixed rule: surviving vortices keep their relative order and the
new ones are inserted at the positions recorded in the event.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .core import (TWO_PI, SingularConfigurationError, VortexConfiguration, free_velocity,
                   hamiltonian_of, min_pair_distance, pair_product_sum)
from .fields import FieldSpec, disk_gamma_grad_conj


# ---------------------------------------------------------------------------
# unit disk


def disk_gamma(x, y, closed: bool = True) -> np.ndarray:
    """Regular part of the unit-disk Dirichlet Green function.

    ``gamma(x, y) = (1/2 pi) log(|y| |x - y/|y|^2|) = (1/2 pi) log|1 - x conj(y)|``;
    the second form is the removable continuation to ``y = 0``. With
    ``closed=True`` boundary points ``|x| = 1`` are accepted so the boundary
    identity can be checked.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    limit = 1.0 + 1e-12 if closed else 1.0
    if np.any(np.abs(x) > limit) or np.any(np.abs(y) > limit) or (
            not closed and (np.any(np.abs(x) >= 1) or np.any(np.abs(y) >= 1))):
        raise ValueError("disk_gamma needs points inside the unit disk")
    return np.log(np.abs(1.0 - x * np.conj(y))) / TWO_PI


def disk_gamma_grad_x(x, y) -> np.ndarray:
    """Gradient of ``disk_gamma`` in ``x`` as a complex number ``d/dx1 + i d/dx2``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return -y / (TWO_PI * (1.0 - np.conj(x) * y))


def disk_velocity(intensities, positions) -> np.ndarray:
    """Free velocity plus the image drift, self-term included; shape (..., N)."""
    xi = np.asarray(intensities, dtype=float)
    z = np.asarray(positions, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise SingularConfigurationError("vortex on or outside the unit circle")
    image = -np.conj(disk_gamma_grad_conj(z[..., :, None], z[..., None, :]) @ xi.astype(complex))
    return free_velocity(xi, z) + image


def rhs_disk(config: VortexConfiguration) -> np.ndarray:
    return disk_velocity(config.intensities, config.positions)


def disk_hamiltonian_of(intensities, positions) -> np.ndarray:
    """Conserved energy in the disk: free part plus ``sum_{j,k} xi_j xi_k gamma(z_j, z_k)``.

    The plus sign is the one conserved by ``rhs_disk`` (checked in tests).
    """
    xi = np.asarray(intensities, dtype=float)
    z = np.asarray(positions, dtype=complex)
    gam = np.log(np.abs(1.0 - z[..., :, None] * np.conj(z[..., None, :]))) / TWO_PI
    return hamiltonian_of(xi, z) + np.einsum("...jk,j,k->...", gam, xi, xi)


def disk_hamiltonian(config: VortexConfiguration) -> float:
    return float(disk_hamiltonian_of(config.intensities, config.positions))


# ---------------------------------------------------------------------------
# systems and trajectories


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Geometry, optional external field and initial configuration."""

    config0: VortexConfiguration
    geometry: str = "plane"
    field: FieldSpec | None = None

    def __post_init__(self):
        if self.geometry not in ("plane", "disk"):
            raise ValueError("geometry must be 'plane' or 'disk'")
        if self.geometry == "disk":
            if np.any(np.abs(self.config0.positions) >= 1):
                raise ValueError("disk geometry needs all vortices inside the unit disk")
            if self.field is not None and not self.field.is_zero:
                raise ValueError("external fields are only supported on the plane")

    def velocity(self, t, z) -> np.ndarray:
        xi = self.config0.intensities
        if self.geometry == "disk":
            return disk_velocity(xi, z)
        vel = free_velocity(xi, z)
        if self.field is not None and not self.field.is_zero:
            vel = vel + np.conj(self.field(np.asarray(t, dtype=float)[..., None], z))
        return vel


@dataclass(frozen=True)
class CollapseFlag:
    """Integration stopped because two vortices came closer than ``collapse_eps``."""

    t: float
    d_min: float
    pair: tuple


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Positions ``(m, N)`` and velocities at increasing times, fixed intensities."""

    times: np.ndarray
    positions: np.ndarray
    intensities: np.ndarray
    velocities: np.ndarray | None = None
    tol: float | None = None
    flag: CollapseFlag | None = None
    geometry: str = "plane"
    field: FieldSpec | None = None
    t_target: float | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        pos = np.asarray(self.positions, dtype=complex).reshape(times.size, -1)
        xi = np.asarray(self.intensities, dtype=float).reshape(-1)
        if pos.shape[1] != xi.size:
            raise ValueError("positions and intensities disagree on N")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "intensities", xi)
        if self.velocities is not None:
            object.__setattr__(self, "velocities",
                               np.asarray(self.velocities, dtype=complex).reshape(pos.shape))

    @property
    def n(self) -> int:
        return int(self.intensities.size)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def states(self) -> list[VortexConfiguration]:
        return [VortexConfiguration(self.intensities, z) for z in self.positions]

    def configuration(self, i: int) -> VortexConfiguration:
        return VortexConfiguration(self.intensities, self.positions[i])

    def model_velocities(self) -> np.ndarray:
        spec_vel = SystemSpec(self.configuration(0), self.geometry, self.field)
        return spec_vel.velocity(self.times, self.positions)

    def at(self, t) -> np.ndarray:
        """Positions at time(s) ``t`` by Hermite interpolation of stored velocities."""
        t = np.asarray(t, dtype=float)
        if self.times.size == 1:
            return np.broadcast_to(self.positions[0], t.shape + (self.n,)).copy()
        vel = self.velocities if self.velocities is not None else self.model_velocities()
        spline = CubicHermiteSpline(self.times, self.positions, vel, axis=0)
        return spline(np.clip(t, self.t_start, self.t_end))

    def hamiltonian(self) -> np.ndarray:
        if self.geometry == "disk":
            return disk_hamiltonian_of(self.intensities, self.positions)
        return hamiltonian_of(self.intensities, self.positions)

    def reversed(self, total: float | None = None) -> "Trajectory":
        """Time-reversed copy, ``t -> total - t``, with negated intensities.

        ``total`` defaults to ``t_start + t_end``, which keeps the interval.
        """
        total = self.t_start + self.t_end if total is None else total
        vel = None if self.velocities is None else -self.velocities[::-1]
        field_rev = None
        if self.field is not None and not self.field.is_zero:
            raise ValueError("time reversal with an external field is not supported")
        return Trajectory(total - self.times[::-1], self.positions[::-1].copy(),
                          -self.intensities, vel, self.tol, None, self.geometry, field_rev)


@dataclass(frozen=True)
class Burst:
    """One vortex splits into several at time ``t``.

    ``parent_index`` refers to the ordering before the event and
    ``children_indices`` to the ordering after it.
    """

    t: float
    parent_index: int
    parent_intensity: float
    children_intensities: tuple
    position: complex
    children_indices: tuple


@dataclass(frozen=True)
class Merge:
    """A group of vortices collapses into one at time ``t``.

    ``group_indices`` refers to the ordering before the event and
    ``survivor_index`` to the ordering after it.
    """

    t: float
    group_indices: tuple
    group_intensities: tuple
    survivor_intensity: float
    position: complex
    survivor_index: int


Event = Union[Burst, Merge]


def _after_order(n_before: int, removed: Sequence[int], inserted: Sequence[int]) -> np.ndarray:
    """Index map: entry i of the new ordering comes from old index (or -1 if new)."""
    keep = [k for k in range(n_before) if k not in set(removed)]
    n_after = len(keep) + len(inserted)
    out = np.full(n_after, -1)
    slots = [i for i in range(n_after) if i not in set(inserted)]
    out[slots] = keep
    return out


def apply_event(intensities: np.ndarray, event: Event) -> np.ndarray:
    """Intensity vector after an event."""
    xi = np.asarray(intensities, dtype=float)
    if isinstance(event, Burst):
        order = _after_order(xi.size, [event.parent_index], event.children_indices)
        out = np.where(order >= 0, xi[np.maximum(order, 0)], 0.0)
        out[list(event.children_indices)] = event.children_intensities
        return out
    order = _after_order(xi.size, event.group_indices, [event.survivor_index])
    out = np.where(order >= 0, xi[np.maximum(order, 0)], 0.0)
    out[event.survivor_index] = event.survivor_intensity
    return out


def reverse_event(event: Event, t_new: float) -> Event:
    """The same event seen backwards in time, with negated intensities."""
    if isinstance(event, Burst):
        return Merge(t_new, tuple(event.children_indices),
                     tuple(-x for x in event.children_intensities),
                     -event.parent_intensity, event.position, event.parent_index)
    return Burst(t_new, event.survivor_index, -event.survivor_intensity,
                 tuple(-x for x in event.group_intensities), event.position,
                 tuple(event.group_indices))


@dataclass(frozen=True, eq=False)
class EventTrajectory:
    """Smooth segments separated by bursts and merges; ``meta`` holds diagnostics."""

    segments: list
    events: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.events) != len(self.segments) - 1:
            raise ValueError("need exactly one event between consecutive segments")
        for k, ev in enumerate(self.events):
            before = self.segments[k]
            after = self.segments[k + 1]
            expected = apply_event(before.intensities, ev)
            if expected.shape != after.intensities.shape or not np.allclose(
                    expected, after.intensities, rtol=1e-12, atol=0):
                raise ValueError(f"event {k} is inconsistent with segment intensities")
            if isinstance(ev, Burst) and not np.isclose(
                    sum(ev.children_intensities), ev.parent_intensity, rtol=1e-12, atol=0):
                raise ValueError("burst children must sum to the parent")
            if isinstance(ev, Merge) and not np.isclose(
                    sum(ev.group_intensities), ev.survivor_intensity, rtol=1e-12, atol=0):
                raise ValueError("merge survivor must carry the group sum")

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def segment_at(self, t: float) -> int:
        for k, seg in enumerate(self.segments):
            if t <= seg.t_end:
                return k
        return len(self.segments) - 1

    def vortex_counts(self) -> list[int]:
        return [seg.n for seg in self.segments]


def time_reverse(traj):
    """Reverse time on ``[t_start, t_end]`` and negate intensities.

    Bursts become merges and conversely. Applying it twice gives back the
    original trajectory.
    """
    if isinstance(traj, Trajectory):
        return traj.reversed()
    total = traj.t_start + traj.t_end
    segments = [seg.reversed(total) for seg in reversed(traj.segments)]
    events = [reverse_event(ev, total - ev.t) for ev in reversed(traj.events)]
    return EventTrajectory(segments, events, dict(traj.meta, time_reversed=not traj.meta.get(
        "time_reversed", False)))


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class IntegrationConfig:
    """Tolerances of the regular integrator.

    The step is capped by ``step_factor * 2 pi d_min^2 / sum|xi|``, the time
    for a vortex to travel about a tenth of the closest distance.
    """

    tol: float = 1e-10
    collapse_eps: float = 1e-5
    step_factor: float = 0.1
    max_output_step: float | None = None
    steps_per_chunk: int = 50
    group_factor: float = 5.0
    admissible_rtol: float = 1e-6
    fit_points: int = 20


def _min_pair(z: np.ndarray):
    n = z.size
    d = np.abs(z[:, None] - z[None, :]) + np.diag(np.full(n, np.inf))
    k = int(np.argmin(d))
    return float(d.flat[k]), (k // n, k % n)


def _integrator_rhs(spec: SystemSpec):
    """Right-hand side for the integrator; a lean closure on the unforced plane.

    Coincident positions cannot occur there because integration stops at
    the collapse threshold first.
    """
    if spec.geometry != "plane" or (spec.field is not None and not spec.field.is_zero):
        return lambda t, z: spec.velocity(t, z)
    weights = spec.config0.intensities.astype(complex) / (2j * np.pi)
    diag = np.arange(spec.config0.n)

    def rhs(t, z):
        d = z[:, None] - z[None, :]
        d[diag, diag] = 1.0
        inv = 1.0 / d
        inv[diag, diag] = 0.0
        return np.conj(inv @ weights)

    return rhs


def integrate(spec: SystemSpec, t_span, tol: float | None = None,
              cfg: IntegrationConfig | None = None, collapse_eps: float | None = None
              ) -> Trajectory:
    """Adaptive DOP853 integration with a ``d_min^2`` step cap and collapse stop.

    Returns a partial trajectory with ``flag`` set if the minimal distance
    falls below ``collapse_eps``.
    """
    cfg = cfg or IntegrationConfig()
    tol = cfg.tol if tol is None else tol
    eps = cfg.collapse_eps if collapse_eps is None else collapse_eps
    t0, t1 = float(t_span[0]), float(t_span[1])
    xi = spec.config0.intensities
    z0 = spec.config0.positions.copy()
    scale = float(np.sum(np.abs(xi)))
    times = [t0]
    states = [z0]
    flag = None
    if spec.config0.n < 2 and spec.geometry == "plane" and (spec.field is None or spec.field.is_zero):
        dense = np.array([t0, t1]) if t1 > t0 else np.array([t0])
        pos = np.repeat(z0[None, :], dense.size, axis=0)
        return Trajectory(dense, pos, xi, np.zeros(pos.shape, complex), tol, None,
                          spec.geometry, spec.field, t1)

    rhs = _integrator_rhs(spec)
    diag = np.arange(z0.size)

    def near(t, z):
        d = np.abs(z[:, None] - z[None, :])
        d[diag, diag] = np.inf
        return float(d.min()) - eps

    near.terminal = True
    near.direction = -1

    t = t0
    z = z0
    length = max(abs(z0).max(), 1.0)
    while t < t1 and flag is None:
        d_min = float(min_pair_distance(z)) if z.size > 1 else np.inf
        if spec.geometry == "disk":
            d_min = min(d_min, float(np.min(1 - np.abs(z))) * 2)
        cap = cfg.step_factor * TWO_PI * d_min ** 2 / scale
        if cfg.max_output_step is not None:
            cap = min(cap, cfg.max_output_step)
        chunk_end = min(t1, t + cfg.steps_per_chunk * cap)
        sol = solve_ivp(rhs, (t, chunk_end), z, method="DOP853", rtol=tol,
                        atol=tol * length, max_step=cap, events=near if z.size > 1 else None)
        if sol.status == -1:
            raise RuntimeError(f"integration failed at t={t}: {sol.message}")
        new_t = sol.t[1:]
        new_z = sol.y.T[1:]
        if sol.status == 1 and len(sol.t_events[0]):
            te = float(sol.t_events[0][0])
            ze = sol.y_events[0][0]
            keep = new_t < te
            new_t = np.append(new_t[keep], te)
            new_z = np.vstack([new_z[keep], ze[None, :]])
            d, pair = _min_pair(ze)
            flag = CollapseFlag(te, d, pair)
        if new_t.size:
            times.extend(new_t.tolist())
            states.extend(list(new_z))
            t, z = float(new_t[-1]), new_z[-1]
        else:
            break
    times = np.array(times)
    positions = np.array(states)
    keep = np.concatenate([[True], np.diff(times) > 0])
    times, positions = times[keep], positions[keep]
    velocities = spec.velocity(times, positions)
    return Trajectory(times, positions, xi, velocities, tol, flag, spec.geometry, spec.field, t1)


def collapse_group(z: np.ndarray, pair: tuple, radius: float) -> list[int]:
    """Connected cluster containing ``pair`` with links shorter than ``radius``."""
    close = np.abs(z[:, None] - z[None, :]) < radius
    group = set(pair)
    frontier = list(pair)
    while frontier:
        j = frontier.pop()
        for k in np.flatnonzero(close[j]):
            if k not in group:
                group.add(int(k))
                frontier.append(int(k))
    return sorted(int(k) for k in group)


def group_admissible(intensities, rtol: float = 1e-6) -> bool:
    xi = np.asarray(intensities, dtype=float)
    scale = float(np.sum(xi ** 2))
    return bool(abs(pair_product_sum(xi)) <= rtol * scale and abs(np.sum(xi)) > rtol * np.sqrt(scale))


@dataclass(frozen=True)
class CollapseFit:
    t_c: float
    position: complex
    group: list
    slope: float


def fit_collapse(traj: Trajectory, group: Sequence[int], points: int = 20) -> CollapseFit:
    """Fit ``diameter^2 = slope (t - t_c)`` over the last nodes; slope must be negative."""
    idx = list(group)
    m = min(points, traj.times.size)
    t = traj.times[-m:]
    zg = traj.positions[-m:][:, idx]
    diam2 = np.max(np.abs(zg[:, :, None] - zg[:, None, :]) ** 2, axis=(1, 2))
    slope, intercept = np.polyfit(t - t[-1], diam2, 1)
    if not slope < 0:
        raise SingularConfigurationError("group is not shrinking; no collapse time")
    t_c = float(t[-1] - intercept / slope)
    xi = traj.intensities[idx]
    centre = zg @ xi / xi.sum()
    if m >= 2:
        c_slope, c_int = np.polyfit(t - t[-1], np.column_stack([centre.real, centre.imag]), 1)
        pos_xy = c_int + c_slope * (t_c - t[-1])
        position = complex(pos_xy[0], pos_xy[1])
    else:
        position = complex(centre[-1])
    return CollapseFit(t_c, position, idx, float(slope))


def _merge_at(traj: Trajectory, fit: CollapseFit) -> tuple[Merge, VortexConfiguration]:
    group = fit.group
    xi = traj.intensities
    dt = fit.t_c - traj.t_end
    vel = traj.velocities[-1] if traj.velocities is not None else traj.model_velocities()[-1]
    others = [k for k in range(traj.n) if k not in group]
    pos_others = traj.positions[-1][others] + vel[others] * dt
    survivor = float(np.sum(xi[group]))
    merge = Merge(fit.t_c, tuple(group), tuple(float(x) for x in xi[group]), survivor,
                  fit.position, len(others))
    config = VortexConfiguration(np.append(xi[others], survivor), np.append(pos_others, fit.position))
    return merge, config


def _continue(spec: SystemSpec, traj: Trajectory, t_end: float, cfg: IntegrationConfig,
              segments: list, events: list, meta: dict):
    eps = cfg.collapse_eps
    while True:
        if traj.flag is None:
            segments.append(traj)
            return
        z = traj.positions[-1]
        group = collapse_group(z, traj.flag.pair, cfg.group_factor * eps)
        if not group_admissible(traj.intensities[group], cfg.admissible_rtol):
            meta.setdefault("near_misses", []).append(
                {"t": traj.flag.t, "group": group, "d_min": traj.flag.d_min})
            eps_next = traj.flag.d_min / 10
            if eps_next < 1e-13:
                raise SingularConfigurationError("inadmissible group keeps approaching")
            more = integrate(replace(spec, config0=traj.configuration(-1)), (traj.t_end, t_end),
                             cfg=cfg, collapse_eps=eps_next)
            traj = _join(traj, more)
            continue
        fit = fit_collapse(traj, group, cfg.fit_points)
        merge, config = _merge_at(traj, fit)
        segments.append(replace(traj, flag=None))
        events.append(merge)
        spec = replace(spec, config0=config)
        if merge.t >= t_end:
            segments.append(Trajectory([merge.t], config.positions[None, :], config.intensities,
                                       None, cfg.tol, None, spec.geometry, spec.field, t_end))
            return
        traj = integrate(spec, (merge.t, t_end), cfg=cfg)


def _join(a: Trajectory, b: Trajectory) -> Trajectory:
    keep = b.times > a.t_end
    vel_a = a.velocities if a.velocities is not None else a.model_velocities()
    vel_b = b.velocities if b.velocities is not None else b.model_velocities()
    return replace(b, times=np.concatenate([a.times, b.times[keep]]),
                   positions=np.vstack([a.positions, b.positions[keep]]),
                   velocities=np.vstack([vel_a, vel_b[keep]]))


def detect_and_merge(traj: Trajectory, collapse_eps: float | None = None,
                     t_end: float | None = None, cfg: IntegrationConfig | None = None
                     ) -> EventTrajectory:
    """Merge the collapsing group of a flagged trajectory and continue to ``t_end``.

    Groups failing the collapse conditions are not merged; integration
    resumes with a smaller threshold and the near miss is recorded.
    """
    cfg = cfg or IntegrationConfig(tol=traj.tol or 1e-10)
    if collapse_eps is not None:
        cfg = replace(cfg, collapse_eps=collapse_eps)
    t_end = traj.t_target if t_end is None else t_end
    if t_end is None:
        t_end = traj.t_end
    spec = SystemSpec(traj.configuration(0), traj.geometry, traj.field)
    segments, events, meta = [], [], {}
    _continue(spec, traj, t_end, cfg, segments, events, meta)
    return EventTrajectory(segments, events, meta)


def simulate(spec: SystemSpec, t_span, cfg: IntegrationConfig | None = None) -> EventTrajectory:
    """Integrate with merge continuation after every admissible collapse."""
    cfg = cfg or IntegrationConfig()
    traj = integrate(spec, t_span, cfg=cfg)
    return detect_and_merge(traj, t_end=float(t_span[1]), cfg=cfg)


def concatenate(parts: Sequence[EventTrajectory], joins: Sequence[Event]) -> EventTrajectory:
    """Chain event trajectories, with ``joins[k]`` between part k and part k+1."""
    segments, events = [], []
    for k, part in enumerate(parts):
        segments.extend(part.segments)
        events.extend(part.events)
        if k < len(joins):
            events.append(joins[k])
    return EventTrajectory(segments, events, {"parts": [part.meta for part in parts]})
