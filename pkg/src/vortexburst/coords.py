"""Rescaled coordinates in which a burst becomes a regular boundary-value problem.

A triple (z1, z2, z3) maps to ``r e^{i theta} = z1/a1`` and
``x_j = z_j/z1 - a_j/a1`` (j = 2, 3). The unknowns of the burst solver are
``zeta = r^2``, ``eta = theta - (b/2a) log t`` and ``x2, x3``; on the exact
self-similar burst they equal ``(2 a t, 0, 0, 0)``.

Remainders are evaluated exactly as "full expression minus leading term".
The free interaction is scale covariant, so every remainder depends on
``(x2, x3)`` alone and is computed with ``z1 = a1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SingularConfigurationError, free_velocity
from .fields import FieldSpec
from .quadrature import holder_seminorm
from .selfsimilar import SelfSimilarParams, build_L


class OutOfDomainError(ValueError):
    """Raised when (x2, x3) leaves the ball where the remainder bounds apply."""


@dataclass(frozen=True)
class TransformedState:
    """One point ``(zeta, eta, x2, x3)`` of a transformed curve."""

    zeta: float
    eta: float
    x2: complex
    x3: complex

    def __post_init__(self):
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")


@dataclass(frozen=True, eq=False)
class TransformedCurve:
    """Transformed unknowns on the nodes of a time grid in (0, T]."""

    grid: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray
    x2: np.ndarray
    x3: np.ndarray

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    def state(self, i: int) -> TransformedState:
        return TransformedState(float(self.zeta[i]), float(self.eta[i]),
                                complex(self.x2[i]), complex(self.x3[i]))

    def distance(self, other: "TransformedCurve", zeta_scale: float = 1.0) -> float:
        """Sup distance, with ``zeta`` measured in units of ``zeta_scale``."""
        return float(max(
            np.max(np.abs(self.zeta - other.zeta)) / zeta_scale,
            np.max(np.abs(self.eta - other.eta)),
            np.max(np.abs(self.x2 - other.x2)),
            np.max(np.abs(self.x3 - other.x3)),
        ))

    def blend(self, other: "TransformedCurve", weight: float) -> "TransformedCurve":
        """``(1 - weight) self + weight other``."""
        w = weight
        return TransformedCurve(self.grid, (1 - w) * self.zeta + w * other.zeta,
                                (1 - w) * self.eta + w * other.eta,
                                (1 - w) * self.x2 + w * other.x2,
                                (1 - w) * self.x3 + w * other.x3)

    def distance_violations(self, p: SelfSimilarParams) -> list[str]:
        """Pointwise membership conditions; cheap, checked every iteration."""
        t = self.grid
        bad = []
        if np.any(np.abs(self.zeta - 2 * p.a * t) > t ** 1.5):
            bad.append("|zeta - 2at| <= t^(3/2)")
        if np.any(np.abs(self.x2) > t) or np.any(np.abs(self.x3) > t):
            bad.append("|x_j| <= t")
        if abs(self.eta[-1]) > 1e-12:
            bad.append("eta(T) = 0")
        return bad

    def holder_norms(self) -> dict:
        t = self.grid
        return {name: holder_seminorm(t, getattr(self, name))
                for name in ("zeta", "eta", "x2", "x3")}

    def ut_violations(self, p: SelfSimilarParams) -> list[str]:
        """All membership conditions, including the 1/2-Holder seminorms."""
        bad = self.distance_violations(p)
        for name, value in self.holder_norms().items():
            if value > 1.0:
                bad.append(f"Holder-1/2 seminorm of {name} <= 1 (got {value:.3g})")
        return bad


def self_similar_curve(grid, p: SelfSimilarParams) -> TransformedCurve:
    t = np.asarray(grid, dtype=float)
    zero = np.zeros(t.shape, dtype=complex)
    return TransformedCurve(t, 2 * p.a * t, np.zeros(t.shape), zero, zero.copy())


def phi(z1, z2, z3, p: SelfSimilarParams):
    """Map a triple to ``(r, theta, x2, x3)``; theta is the principal branch."""
    z1 = np.asarray(z1, dtype=complex)
    if np.any(z1 == 0):
        raise SingularConfigurationError("z1 = 0 has no transformed coordinates")
    w = z1 / p.a1
    x2 = np.asarray(z2, dtype=complex) / z1 - p.a2 / p.a1
    x3 = np.asarray(z3, dtype=complex) / z1 - p.a3 / p.a1
    return np.abs(w), np.angle(w), x2, x3


def phi_inv(r, theta, x2, x3, p: SelfSimilarParams):
    """Inverse of ``phi``: ``z1 = a1 r e^{i theta}``, ``z_j = z1 (x_j + a_j/a1)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    z1 = p.a1 * r * np.exp(1j * np.asarray(theta, dtype=float))
    return z1, z1 * (np.asarray(x2) + p.a2 / p.a1), z1 * (np.asarray(x3) + p.a3 / p.a1)


def on_transformed_diagonal(x2, x3, p: SelfSimilarParams, tol: float = 0.0):
    """True where two of the reconstructed vortices coincide."""
    x2 = np.asarray(x2, dtype=complex)
    x3 = np.asarray(x3, dtype=complex)
    return ((np.abs(x2 - (1 - p.a2 / p.a1)) <= tol)
            | (np.abs(x3 - (1 - p.a3 / p.a1)) <= tol)
            | (np.abs((x2 - x3) - (p.a3 - p.a2) / p.a1) <= tol))


def rho_prime(p: SelfSimilarParams) -> float:
    """Radius of the (x2, x3) ball on which remainders are evaluated."""
    ratios = p.shape / p.a1
    return 0.25 * float(min(abs(1 - ratios[1]), abs(1 - ratios[2]),
                            abs(ratios[1] - ratios[2])))


def _unit_triple(x2, x3, p):
    x2 = np.asarray(x2, dtype=complex)
    x3 = np.asarray(x3, dtype=complex)
    z1 = np.full(np.broadcast(x2, x3).shape, p.a1, dtype=complex)
    return np.stack([z1, p.a1 * x2 + p.a2, p.a1 * x3 + p.a3], axis=-1)


def _transformed_rates(z, zdot, p):
    """Exact (d zeta/dt, d theta/dt, dx2/dt, dx3/dt) from Cartesian data."""
    z1, zd1 = z[..., 0], zdot[..., 0]
    dzeta = 2.0 * np.real(np.conj(z1) * zd1) / abs(p.a1) ** 2
    dtheta = np.imag(zd1 / z1)
    dx = (zdot[..., 1:] * z1[..., None] - z[..., 1:] * zd1[..., None]) / z1[..., None] ** 2
    return dzeta, dtheta, dx[..., 0], dx[..., 1]


def _check_ball(x2, x3, p):
    rp = rho_prime(p)
    if (np.any(np.abs(x2) >= rp) or np.any(np.abs(x3) >= rp)
            or np.any(np.abs(np.asarray(x2) - np.asarray(x3)) >= rp)):
        raise OutOfDomainError(f"(x2, x3) outside the ball of radius {rp:.4g}")


def linear_part(x2, x3, p: SelfSimilarParams):
    """``L (x2, x3, conj x2, conj x3)``, first two rows."""
    return build_L(p).apply(x2, x3)


def omega_terms(x2, x3, p: SelfSimilarParams, check: bool = True):
    """Remainders ``(omega_r, omega_theta, omega_2, omega_3)`` of the free field."""
    if check:
        _check_ball(x2, x3, p)
    z = _unit_triple(x2, x3, p)
    zdot = free_velocity(p.intensities, z)
    dzeta, dtheta, dx2, dx3 = _transformed_rates(z, zdot, p)
    l2, l3 = linear_part(x2, x3, p)
    return dzeta - 2 * p.a, dtheta - p.b, dx2 - l2, dx3 - l3


def cartesian(t, zeta, eta, x2, x3, p: SelfSimilarParams) -> np.ndarray:
    """Positions ``(..., 3)`` from transformed unknowns at times ``t``."""
    t = np.asarray(t, dtype=float)
    theta = np.asarray(eta) + p.spiral_rate * np.log(t)
    return np.stack(phi_inv(np.sqrt(zeta), theta, x2, x3, p), axis=-1)


def _field_velocity(f: FieldSpec | None, t, z):
    if f is None or f.is_zero:
        return np.zeros(z.shape, dtype=complex)
    tt = np.asarray(t, dtype=float)[..., None]
    return np.conj(f(tt, z))


def rtx_field(t, state: TransformedState, f: FieldSpec | None, p: SelfSimilarParams):
    """Exact transformed vector field ``(d zeta/dt, d theta/dt, dx2/dt, dx3/dt)``."""
    z = cartesian(t, state.zeta, state.eta, state.x2, state.x3, p)
    if np.any(on_transformed_diagonal(state.x2, state.x3, p)):
        raise SingularConfigurationError("state lies on the transformed diagonal")
    zdot = free_velocity(p.intensities, z) + _field_velocity(f, t, z)
    return _transformed_rates(z, zdot, p)


def rtz_terms(s, state, f: FieldSpec | None, p: SelfSimilarParams, check: bool = True):
    """Integrands ``(R, Theta, Xi2, Xi3)`` of the burst fixed-point map.

    ``state`` may be a ``TransformedState`` or a ``TransformedCurve`` (then
    ``s`` is its grid and the result is vectorized over nodes).
    """
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("s must be positive")
    zeta = np.asarray(state.zeta, dtype=float)
    eta = np.asarray(state.eta, dtype=float)
    x2 = np.asarray(state.x2, dtype=complex)
    x3 = np.asarray(state.x3, dtype=complex)
    om_r, om_th, om2, om3 = omega_terms(x2, x3, p, check=check)
    l2, l3 = linear_part(x2, x3, p)
    lead = 2 * p.a * s
    gap = (lead - zeta) / (lead * zeta)  # 1/zeta - 1/(2as)
    big_r = om_r
    big_theta = p.b * gap + om_th / zeta
    xi2 = l2 * gap + om2 / zeta
    xi3 = l3 * gap + om3 / zeta
    if f is not None and not f.is_zero:
        z = cartesian(s, zeta, eta, x2, x3, p)
        fv = f(s[..., None], z)
        z1 = z[..., 0]
        big_r = big_r + 2.0 * np.real(z1 * fv[..., 0]) / abs(p.a1) ** 2
        big_theta = big_theta + np.imag(np.conj(fv[..., 0]) / z1)
        base = np.conj(fv[..., 0]) / z1 ** 2
        xi2 = xi2 + np.conj(fv[..., 1]) / z1 - z[..., 1] * base
        xi3 = xi3 + np.conj(fv[..., 2]) / z1 - z[..., 2] * base
    return big_r, big_theta, xi2, xi3
