"""Weak-solution certificates and the energy ledger for event trajectories.

For a test function phi the pairing ``<phi, omega_t> = sum_j xi_j phi(z_j)``
must satisfy ``<phi, omega_t> - <phi, omega_0> = int_0^t sum_{j != k}
xi_j xi_k H_phi(z_j, z_k) ds`` with the bounded symmetric kernel
``H_phi(x, y) = (grad phi(x) - grad phi(y)) . K(x - y) / 2``. In the unit
disk the smooth drift of the image vortices adds to the integrand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .core import (TWO_PI, VortexConfiguration, center_of_vorticity_of, free_velocity,
                   moment_of_inertia_of, pair_product_sum)
from .dynamics import EventTrajectory, Trajectory, disk_velocity


@lru_cache(maxsize=None)
def _profile_hessian_bound() -> float:
    """max over s in [0, 1) of the Hessian norm of the unit bump, per unit radius^2."""
    s = np.linspace(1e-6, 1 - 1e-6, 200001)
    g = np.e * np.exp(-1.0 / (1.0 - s ** 2))
    q = 1.0 - s ** 2
    g1 = g * (-2.0 * s / q ** 2)
    g2 = g * ((2.0 * s / q ** 2) ** 2 - (2.0 / q ** 2 + 8.0 * s ** 2 / q ** 3))
    return float(np.max(np.maximum(np.abs(g2), np.abs(g1 / s))))


@dataclass(frozen=True)
class TestFunction:
    """Bump ``e * exp(-1/(1 - s^2))`` with ``s = |x - center| / radius``; equals 1 at the center."""

    __test__ = False

    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def value(self, z) -> np.ndarray:
        s2 = np.abs(np.asarray(z, dtype=complex) - self.center) ** 2 / self.radius ** 2
        inside = s2 < 1
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(inside, np.e * np.exp(-1.0 / np.where(inside, 1.0 - s2, 1.0)), 0.0)
        return out

    def gradient(self, z) -> np.ndarray:
        """Gradient as a complex number ``d/dx + i d/dy``."""
        d = np.asarray(z, dtype=complex) - self.center
        s2 = (d.real ** 2 + d.imag ** 2) / self.radius ** 2
        inside = s2 < 1
        q = np.where(inside, 1.0 - s2, 1.0)
        value = np.where(inside, np.e * np.exp(-1.0 / q), 0.0)
        return value * (-2.0 / q ** 2) * d / self.radius ** 2

    @property
    def gradient_lipschitz(self) -> float:
        return _profile_hessian_bound() / self.radius ** 2


def biot_savart_kernel(d) -> np.ndarray:
    """``K(d) = d_perp / (2 pi |d|^2)`` as a complex number."""
    d = np.asarray(d, dtype=complex)
    return 1j * d / (TWO_PI * np.abs(d) ** 2)


def h_phi(phi: TestFunction, x, y) -> np.ndarray:
    """Symmetrized kernel ``(grad phi(x) - grad phi(y)) . K(x - y) / 2``; needs x != y."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if np.any(x == y):
        raise ValueError("h_phi is not evaluated on the diagonal")
    dg = phi.gradient(x) - phi.gradient(y)
    k = biot_savart_kernel(x - y)
    return 0.5 * np.real(dg * np.conj(k))


def diamond_pairing_of(phi: TestFunction, intensities, positions) -> np.ndarray:
    """Sum over ordered pairs j != k of ``xi_j xi_k H_phi(z_j, z_k)``; positions (..., N)."""
    xi = np.asarray(intensities, dtype=float)
    z = np.asarray(positions, dtype=complex)
    n = z.shape[-1]
    if n < 2:
        return np.zeros(z.shape[:-1])
    iu = np.triu_indices(n, 1)
    grad = phi.gradient(z)
    x, y = z[..., iu[0]], z[..., iu[1]]
    if np.any(x == y):
        raise ValueError("h_phi is not evaluated on the diagonal")
    vals = 0.5 * np.real((grad[..., iu[0]] - grad[..., iu[1]]) * np.conj(biot_savart_kernel(x - y)))
    return 2.0 * np.sum(xi[iu[0]] * xi[iu[1]] * vals, axis=-1)


def pairing_rate_of(phi: TestFunction, intensities, positions, geometry: str = "plane") -> np.ndarray:
    """Time derivative of ``<phi, omega>`` predicted by the model.

    On the plane it is the symmetrized pair sum. In the unit disk the drift
    induced by the image vortices is added as ``sum_j xi_j grad phi(z_j) . u_j``;
    that part needs no symmetrization because it is smooth.
    """
    rate = diamond_pairing_of(phi, intensities, positions)
    if geometry == "disk":
        xi = np.asarray(intensities, dtype=float)
        z = np.asarray(positions, dtype=complex)
        drift = disk_velocity(xi, z) - (free_velocity(xi, z) if z.shape[-1] > 1 else 0.0)
        rate = rate + np.real(np.conj(phi.gradient(z)) * drift) @ xi
    return rate


def diamond_pairing(phi: TestFunction, config: VortexConfiguration) -> float:
    return float(diamond_pairing_of(phi, config.intensities, config.positions))


def pairing(phi: TestFunction, intensities, positions) -> np.ndarray:
    """``<phi, omega> = sum_j xi_j phi(z_j)``."""
    return phi.value(positions) @ np.asarray(intensities, dtype=float)


@dataclass(frozen=True, eq=False)
class WeakResidualReport:
    """Residuals per test function (rows) and checkpoint (columns)."""

    functions: list
    checkpoints: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    quadrature_error: np.ndarray
    tolerance: float = 1e-5

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance

    def worst(self) -> dict:
        if not self.residual.size:
            return {}
        i, j = np.unravel_index(np.argmax(np.abs(self.residual)), self.residual.shape)
        phi = self.functions[i]
        return {"center": [phi.center.real, phi.center.imag], "radius": phi.radius,
                "t": float(self.checkpoints[j]), "residual": float(self.residual[i, j]),
                "quadrature_error": float(self.quadrature_error[i, j])}

    def as_dict(self) -> dict:
        return {"max_residual": self.max_residual, "tolerance": self.tolerance,
                "passed": self.passed, "n_functions": len(self.functions),
                "n_checkpoints": int(self.checkpoints.size), "worst": self.worst(),
                "max_quadrature_error": float(np.max(self.quadrature_error)) if self.quadrature_error.size else 0.0}


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(5)


def _battery_rates(phis, intensities, positions, geometry: str) -> np.ndarray:
    """``pairing_rate_of`` for every test function, shape (P, ...).

    The pair kernel and the image drift are shared by all test functions
    and computed once.
    """
    xi = np.asarray(intensities, dtype=float)
    z = np.asarray(positions, dtype=complex)
    n = z.shape[-1]
    out = np.zeros((len(phis),) + z.shape[:-1])
    if n >= 2:
        iu = np.triu_indices(n, 1)
        d = z[..., iu[0]] - z[..., iu[1]]
        if np.any(d == 0):
            raise ValueError("h_phi is not evaluated on the diagonal")
        kern = np.conj(biot_savart_kernel(d))
        weights = xi[iu[0]] * xi[iu[1]]
    drift = None
    if geometry == "disk":
        drift = disk_velocity(xi, z) - (free_velocity(xi, z) if n > 1 else 0.0)
    for i, phi in enumerate(phis):
        grad = phi.gradient(z)
        if n >= 2:
            out[i] = np.real((grad[..., iu[0]] - grad[..., iu[1]]) * kern) @ weights
        if drift is not None:
            out[i] += np.real(np.conj(grad) * drift) @ xi
    return out


def _segment_integral(seg: Trajectory, phis, target: float, max_refine: int = 64):
    """Cumulative time integrals of the pairing rates at the segment nodes, shape (P, m).

    Each node interval is split into k pieces with a 5-point Gauss rule on
    each; positions between nodes come from Hermite interpolation with the
    stored velocities. k doubles until the node values move by less than
    ``target``; the last change (per test function) is the error estimate.
    """
    times = seg.times
    if times.size < 2:
        return np.zeros((len(phis), times.size)), np.zeros(len(phis))
    vel = seg.velocities if seg.velocities is not None else seg.model_velocities()
    hermite = CubicHermiteSpline(times, seg.positions, vel, axis=0)
    dt = np.diff(times)
    prev = None
    k = 1
    while True:
        piece = (np.arange(k)[:, None] + 0.5 * (_GAUSS_X[None, :] + 1)) / k
        sub = times[:-1, None] + dt[:, None] * piece.ravel()[None, :]
        g = _battery_rates(phis, seg.intensities, hermite(sub.ravel()), seg.geometry)
        per_interval = dt * (g.reshape((len(phis),) + sub.shape) @ np.tile(_GAUSS_W, k)) / (2 * k)
        at_nodes = np.concatenate([np.zeros((len(phis), 1)), np.cumsum(per_interval, axis=1)], axis=1)
        if prev is not None:
            err = np.max(np.abs(at_nodes - prev), axis=1)
            if np.max(err) < target or k >= max_refine:
                return at_nodes, err
        prev = at_nodes
        k *= 2


def weak_residual(traj: EventTrajectory, phis, checkpoints=None,
                  tolerance: float = 1e-5) -> WeakResidualReport:
    """Check the weak formulation at every node (or at given checkpoints).

    Integrals run segment by segment; the short gaps at events are bridged
    with the trapezoid rule, which is justified because the integrand stays
    bounded and the pairing is continuous across events.
    """
    phis = list(phis)
    quad_target = tolerance / 100
    ts, lhs, rhs, err = [], [], [], []
    running = np.zeros(len(phis))
    running_err = np.zeros(len(phis))
    base = None
    prev_t, prev_g = None, None
    for seg in traj.segments:
        g = _battery_rates(phis, seg.intensities, seg.positions, seg.geometry)
        pair_vals = np.array([pairing(phi, seg.intensities, seg.positions) for phi in phis])
        if base is None:
            base = pair_vals[:, :1]
        if prev_t is not None and seg.times[0] > prev_t:
            running = running + 0.5 * (seg.times[0] - prev_t) * (g[:, 0] + prev_g)
        cum, seg_err = _segment_integral(seg, phis, quad_target)
        ts.append(seg.times)
        lhs.append(pair_vals - base)
        rhs.append(running[:, None] + cum)
        err.append(running_err[:, None] + np.outer(seg_err, np.linspace(0, 1, seg.times.size)))
        running = running + cum[:, -1]
        running_err = running_err + seg_err
        prev_t, prev_g = seg.times[-1], g[:, -1]
    t_all = np.concatenate(ts)
    lhs_arr = np.concatenate(lhs, axis=1)
    rhs_arr = np.concatenate(rhs, axis=1)
    err_arr = np.concatenate(err, axis=1)
    if checkpoints is not None:
        cps = np.asarray(checkpoints, dtype=float)
        idx = np.clip(np.searchsorted(t_all, cps, side="right") - 1, 0, t_all.size - 1)
        t_all, lhs_arr, rhs_arr, err_arr = t_all[idx], lhs_arr[:, idx], rhs_arr[:, idx], err_arr[:, idx]
    return WeakResidualReport(phis, t_all, lhs_arr, rhs_arr, lhs_arr - rhs_arr, err_arr, tolerance)


def standard_battery(traj: EventTrajectory) -> list[TestFunction]:
    """Twelve test functions: three radii around four centres.

    The first centre is the first event location (or the initial vorticity
    centroid); the others are offset so that some supports avoid it.
    """
    if traj.events:
        c0 = complex(traj.events[0].position)
    else:
        seg = traj.segments[0]
        w = np.abs(seg.intensities)
        c0 = complex(seg.positions[0] @ w / w.sum())
    reach = max(float(np.max(np.abs(seg.positions - c0))) for seg in traj.segments)
    scale = max(reach, 1e-6)
    centres = [c0, c0 + 0.5 * scale, c0 - 0.5j * scale, c0 + 0.3 * scale * (1 + 1j)]
    radii = [0.5 * scale, 1.0 * scale, 2.0 * scale]
    return [TestFunction(c, r) for c in centres for r in radii]


@dataclass(frozen=True, eq=False)
class EnergyLedger:
    """Energy per segment and its jumps across events."""

    intervals: list
    values: list
    spreads: list
    jumps: list
    flags: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.flags

    def as_dict(self) -> dict:
        return {"intervals": self.intervals, "values": self.values, "spreads": self.spreads,
                "jumps": self.jumps, "flags": self.flags}


def _one_sided_limit(times, values, t_event: float, side: str) -> float:
    """Quadratic extrapolation to the event time from offsets h, 2h, 4h."""
    if times.size == 1:
        return float(values[0])
    h = (times[-1] - times[0]) / 100.0
    offsets = np.array([h, 2 * h, 4 * h])
    pts = t_event + offsets if side == "after" else t_event - offsets
    vals = np.interp(pts, times, values)
    return float(np.dot([8.0 / 3.0, -2.0, 1.0 / 3.0], vals))


def energy_ledger(traj: EventTrajectory, rtol: float = 1e-6) -> EnergyLedger:
    """Hamiltonian per segment, checked constant, with extrapolated jumps at events."""
    intervals, values, spreads, flags, series = [], [], [], [], []
    for k, seg in enumerate(traj.segments):
        H = np.atleast_1d(seg.hamiltonian())
        series.append(H)
        scale = max(abs(float(np.median(H))),
                    abs(pair_product_sum(np.abs(seg.intensities))) / TWO_PI, 1e-300)
        spread = float(np.ptp(H)) / scale if H.size > 1 else 0.0
        intervals.append([seg.t_start, seg.t_end])
        values.append(float(np.median(H)))
        spreads.append(spread)
        if spread > rtol:
            flags.append(f"segment {k}: energy varies by {spread:.2e} (relative)")
    jumps = []
    for k, ev in enumerate(traj.events):
        before = traj.segments[k]
        after = traj.segments[k + 1]
        h_before = _one_sided_limit(before.times, series[k], ev.t, "before")
        h_after = _one_sided_limit(after.times, series[k + 1], ev.t, "after")
        jumps.append({"t": float(ev.t), "type": type(ev).__name__, "before": h_before,
                      "after": h_after, "jump": h_after - h_before})
    return EnergyLedger(intervals, values, spreads, jumps, flags)


def invariant_drift(traj: EventTrajectory) -> list[dict]:
    """Relative drift of the first integrals along each segment.

    Energy is checked in every segment. Moment of inertia and centre of
    vorticity are conserved only on the plane without external field and
    are reported as None elsewhere. Drifts are scaled by the pairwise sums
    of ``|xi_j xi_k|`` (times ``|z_j - z_k|^2`` for the moment of inertia)
    and by ``sum |xi_j z_j|`` for the centre.
    """
    out = []
    for seg in traj.segments:
        row = {"t_start": seg.t_start, "t_end": seg.t_end, "energy": 0.0,
               "moment_of_inertia": None, "centre": None}
        if seg.times.size < 2:
            out.append(row)
            continue
        xi = seg.intensities
        z = seg.positions
        H = np.atleast_1d(seg.hamiltonian())
        h_scale = max(abs(float(np.median(H))), abs(pair_product_sum(np.abs(xi))) / TWO_PI, 1e-300)
        row["energy"] = float(np.ptp(H)) / h_scale
        plain = seg.geometry == "plane" and (seg.field is None or seg.field.is_zero)
        if plain and seg.n > 1:
            I = moment_of_inertia_of(xi, z)
            d2 = np.abs(z[:, :, None] - z[:, None, :]) ** 2
            i_scale = max(float(np.max(np.sum(np.abs(np.outer(xi, xi)) * d2, axis=(1, 2)))), 1e-300)
            row["moment_of_inertia"] = float(np.ptp(I)) / i_scale
            C = center_of_vorticity_of(xi, z)
            c_scale = max(float(np.max(np.abs(z) @ np.abs(xi))), 1e-300)
            row["centre"] = float(np.max(np.abs(C - C[0]))) / c_scale
        out.append(row)
    return out
