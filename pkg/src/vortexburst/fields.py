"""External fields acting on vortices.

A field ``f(t, p)`` enters the equations in conjugate form:
``conj(dz_j/dt) = (1/2 pi i) sum_k xi_k/(z_j - z_k) + f(t, z_j)``, so the
velocity it adds is ``conj(f)``. Fields may carry a Galilean change of frame
``f(t, p + drift t) - offset`` (see ``burst_solver.preprocess_field``).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .core import TWO_PI

FIELD_KINDS = ("zero", "constant", "affine", "vortex_background", "disk_boundary", "composite")


def _bump(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)


def smooth_cutoff(r, inner: float) -> np.ndarray:
    """Smooth step: 1 for r <= inner, 0 for r >= 2 inner."""
    s = (np.asarray(r, dtype=float) - inner) / inner
    s = np.clip(s, 0.0, 1.0)
    up = _bump(1.0 - s)
    down = _bump(s)
    return up / (up + down)


class CurveInterpolant:
    """Cubic interpolation of complex positions ``(n_times, N)`` in time.

    Evaluations outside the tabulated range are clamped to the end values.
    """

    def __init__(self, times, positions):
        self.times = np.asarray(times, dtype=float)
        self.positions = np.asarray(positions, dtype=complex)
        if self.positions.ndim != 2 or self.positions.shape[0] != self.times.size:
            raise ValueError("positions must have shape (len(times), N)")
        if self.times.size > 1:
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("curve times must be strictly increasing")
            self._spline = CubicSpline(self.times, self.positions, axis=0)
        else:
            self._spline = None

    @property
    def n_vortices(self) -> int:
        return int(self.positions.shape[1])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self._spline is None:
            return np.broadcast_to(self.positions[0], t.shape + (self.n_vortices,))
        return self._spline(np.clip(t, self.times[0], self.times[-1]))


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """An external field with a bound ``bound_M`` on its E_T-type norm.

    ``drift`` and ``offset`` implement the frame change
    ``f(t, p) -> f(t, p + drift t) - offset``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    bound_M: float = 0.0
    drift: complex = 0j
    offset: complex = 0j

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if not self.bound_M >= 0:
            raise ValueError("bound_M must be nonnegative")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" and self.offset == 0

    def __call__(self, t, p) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        p = np.asarray(p, dtype=complex)
        t, p = np.broadcast_arrays(t, p)
        shifted = p + self.drift * t if self.drift != 0 else p
        return self._raw(t, shifted) - self.offset

    def _raw(self, t, p):
        kind = self.kind
        if kind == "zero":
            return np.zeros(p.shape, dtype=complex)
        if kind == "constant":
            return np.full(p.shape, complex(self.params["c"]))
        if kind == "affine":
            c = complex(self.params.get("c", 0j))
            beta = complex(self.params.get("beta", 0j))
            kappa = complex(self.params.get("kappa", 0j))
            return c + beta * p + kappa * t
        if kind == "vortex_background":
            return _background_value(self.params, t, p)
        if kind == "disk_boundary":
            return _disk_boundary_value(self.params, t, p)
        total = np.zeros(p.shape, dtype=complex)
        for part in self.params["parts"]:
            total = total + part(t, p)
        return total


def _background_value(params, t, p):
    curve: CurveInterpolant = params["curve"]
    xi = np.asarray(params["intensities"], dtype=float)
    y = curve(t)
    value = ((1.0 / (p[..., None] - y)) @ xi.astype(complex)) / (2j * np.pi)
    cutoff = params.get("cutoff")
    if cutoff is not None:
        value = value * smooth_cutoff(np.abs(p), cutoff)
    return value


def disk_gamma_grad_conj(x, y):
    """Complex form of the in-plane perpendicular gradient, conjugated.

    Returns ``conj(i * grad_x gamma(x, y))`` where the regular part of the
    unit-disk Green function is ``gamma(x, y) = (1/2 pi) log|1 - x conj(y)|``
    and ``grad_x gamma = -y / (2 pi (1 - conj(x) y))`` as a complex number.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    grad = -y / (TWO_PI * (1.0 - np.conj(x) * y))
    return np.conj(1j * grad)


def _disk_boundary_value(params, t, p):
    curve: CurveInterpolant = params["curve"]
    xi = np.asarray(params["intensities"], dtype=float)
    origin = complex(params.get("origin", 0j))
    y = curve(t)
    x = (p + origin)[..., None]
    return -(disk_gamma_grad_conj(x, y) @ xi.astype(complex))


def zero_field() -> FieldSpec:
    return FieldSpec("zero")


def constant_field(c: complex) -> FieldSpec:
    c = complex(c)
    return FieldSpec("constant", {"c": c}, bound_M=abs(c))


def affine_field(c: complex = 0j, beta: complex = 0j, kappa: complex = 0j,
                 radius: float = 1.0, T: float = 1.0) -> FieldSpec:
    """``f(t, p) = c + beta p + kappa t``; the bound is certified on |p| <= radius, t <= T."""
    c, beta, kappa = complex(c), complex(beta), complex(kappa)
    bound = abs(c) + abs(beta) * radius + abs(kappa) * T + abs(beta) + abs(kappa)
    return FieldSpec("affine", {"c": c, "beta": beta, "kappa": kappa}, bound_M=bound)


def composite_field(*parts: FieldSpec) -> FieldSpec:
    return FieldSpec("composite", {"parts": tuple(parts)},
                     bound_M=float(sum(part.bound_M for part in parts)))


def vortex_background_field(times, positions, intensities, cutoff: float | None = None,
                            bound_M: float | None = None) -> FieldSpec:
    """Field of moving background vortices, optionally cut off beyond ``2 cutoff``."""
    curve = CurveInterpolant(times, np.asarray(positions, dtype=complex).reshape(len(times), -1))
    params = {"curve": curve, "intensities": np.asarray(intensities, dtype=float), "cutoff": cutoff}
    spec = FieldSpec("vortex_background", params)
    if bound_M is None:
        radius = 2.0 * cutoff if cutoff is not None else 1.0
        bound_M = estimate_bound(spec, curve.times, radius)
    return replace(spec, bound_M=float(bound_M))


def disk_boundary_field(times, positions, intensities, origin: complex = 0j) -> FieldSpec:
    """Image field of vortices at absolute ``positions`` in the unit disk.

    The field is evaluated at ``origin + p`` so that solvers may work in a
    frame centred on ``origin``.
    """
    curve = CurveInterpolant(times, np.asarray(positions, dtype=complex).reshape(len(times), -1))
    params = {"curve": curve, "intensities": np.asarray(intensities, dtype=float),
              "origin": complex(origin)}
    spec = FieldSpec("disk_boundary", params)
    reach = 0.5 * (1.0 - abs(origin))
    return replace(spec, bound_M=estimate_bound(spec, curve.times, reach))


def estimate_bound(f: Callable, times, radius: float, n_angles: int = 16,
                   n_radii: int = 4, n_times: int = 9) -> float:
    """Sampled estimate of sup|f| + sup|Df| + sup|D^2 f| + time-Lipschitz constant.

    Derivatives by central differences on a polar sample of the disk of the
    given radius. This is an estimate, not a proof.
    """
    times = np.asarray(times, dtype=float)
    ts = np.linspace(times[0], times[-1], n_times) if times.size > 1 else times[:1]
    ang = np.exp(2j * np.pi * np.arange(n_angles) / n_angles)
    pts = np.concatenate([[0j], np.outer(np.linspace(radius / n_radii, radius, n_radii), ang).ravel()])
    h = 1e-4 * max(radius, 1e-12)
    tt = ts[:, None]
    val = f(tt, pts[None, :])
    dx = (f(tt, pts + h) - f(tt, pts - h)) / (2 * h)
    dy = (f(tt, pts + 1j * h) - f(tt, pts - 1j * h)) / (2 * h)
    dxx = (f(tt, pts + h) - 2 * val + f(tt, pts - h)) / h ** 2
    dyy = (f(tt, pts + 1j * h) - 2 * val + f(tt, pts - 1j * h)) / h ** 2
    bound = np.max(np.abs(val)) + np.max(np.hypot(np.abs(dx), np.abs(dy)))
    bound += np.max(np.hypot(np.abs(dxx), np.abs(dyy)))
    if ts.size > 1:
        bound += np.max(np.abs(np.diff(val, axis=0)) / np.diff(ts)[:, None])
    return float(bound)
