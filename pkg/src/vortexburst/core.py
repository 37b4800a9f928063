"""Point-vortex configurations, Biot-Savart velocities and first integrals.

Positions are complex numbers. Every velocity returned by this package is
``dz/dt`` itself; the conjugated form ``conj(dz/dt) = (1/2 pi i) sum ...``
only appears inside the kernels below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


class SingularConfigurationError(ValueError):
    """Raised when two vortices sit at the same point or an input is degenerate."""


def _as_intensities(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError("a configuration needs at least one vortex")
    if not np.all(np.isfinite(arr)):
        raise ValueError("intensities must be finite")
    if np.any(arr == 0.0):
        raise ValueError("intensities must be nonzero")
    return arr


def _as_positions(values) -> np.ndarray:
    arr = np.array(values, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("positions must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class InvariantReport:
    """The exact finite sums H, I, C and the total circulation."""

    hamiltonian: float
    moment_of_inertia: float
    center_of_vorticity: complex
    total_circulation: float

    def as_dict(self) -> dict:
        return {
            "hamiltonian": self.hamiltonian,
            "moment_of_inertia": self.moment_of_inertia,
            "center_of_vorticity": [self.center_of_vorticity.real, self.center_of_vorticity.imag],
            "total_circulation": self.total_circulation,
        }


@dataclass(frozen=True, eq=False)
class VortexConfiguration:
    """Intensities and distinct complex positions of N point vortices."""

    intensities: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        xi = _as_intensities(self.intensities)
        z = _as_positions(self.positions)
        if xi.shape != z.shape:
            raise ValueError(
                f"{xi.size} intensities but {z.size} positions")
        if z.size > 1 and np.unique(z).size != z.size:
            raise SingularConfigurationError("two vortices share a position")
        xi.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "intensities", xi)
        object.__setattr__(self, "positions", z)

    @property
    def n(self) -> int:
        return int(self.intensities.size)

    def with_positions(self, positions) -> "VortexConfiguration":
        return VortexConfiguration(self.intensities, positions)

    def translated(self, shift: complex) -> "VortexConfiguration":
        return VortexConfiguration(self.intensities, self.positions + shift)

    def rotated(self, angle: float, about: complex = 0.0) -> "VortexConfiguration":
        rot = np.exp(1j * angle)
        return VortexConfiguration(self.intensities, about + rot * (self.positions - about))

    def min_distance(self) -> float:
        return float(min_pair_distance(self.positions))

    def invariants(self) -> InvariantReport:
        return InvariantReport(
            hamiltonian=hamiltonian(self),
            moment_of_inertia=moment_of_inertia(self),
            center_of_vorticity=center_of_vorticity(self),
            total_circulation=float(np.sum(self.intensities)),
        )


def _pair_differences(z: np.ndarray) -> np.ndarray:
    """Array of z_j - z_k with shape (..., N, N)."""
    return z[..., :, None] - z[..., None, :]


def min_pair_distance(z: np.ndarray) -> np.ndarray:
    """Smallest pairwise distance along the last axis (inf for one vortex)."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    if n < 2:
        return np.full(z.shape[:-1], np.inf)
    d = np.abs(_pair_differences(z))
    iu = np.triu_indices(n, 1)
    return d[..., iu[0], iu[1]].min(axis=-1)


def free_velocity(intensities, positions) -> np.ndarray:
    """Biot-Savart velocities dz_j/dt for positions of shape (..., N).

    Broadcasts over leading axes so whole trajectories can be evaluated
    at once.
    """
    xi = np.asarray(intensities, dtype=float)
    z = np.asarray(positions, dtype=complex)
    diff = _pair_differences(z)
    n = z.shape[-1]
    diag = np.arange(n)
    diff[..., diag, diag] = 1.0
    if not np.all(diff):
        raise SingularConfigurationError("coincident vortex positions")
    inv = 1.0 / diff
    inv[..., diag, diag] = 0.0
    conj_vel = (inv @ xi.astype(complex)) / (2j * np.pi)
    return np.conj(conj_vel)


def rhs_free(config: VortexConfiguration) -> np.ndarray:
    """Velocities of the free N-vortex system on the plane."""
    return free_velocity(config.intensities, config.positions)


def hamiltonian_of(intensities, positions) -> np.ndarray:
    """H = -(1/2 pi) sum over ordered pairs j != k of xi_j xi_k log|z_j - z_k|."""
    xi = np.asarray(intensities, dtype=float)
    z = np.asarray(positions, dtype=complex)
    n = z.shape[-1]
    if n < 2:
        return np.zeros(z.shape[:-1])
    iu = np.triu_indices(n, 1)
    dist = np.abs(z[..., iu[0]] - z[..., iu[1]])
    if np.any(dist == 0):
        raise SingularConfigurationError("coincident vortex positions")
    weights = xi[iu[0]] * xi[iu[1]]
    return -(2.0 / TWO_PI) * np.sum(weights * np.log(dist), axis=-1)


def moment_of_inertia_of(intensities, positions) -> np.ndarray:
    """I = sum over ordered pairs j != k of xi_j xi_k |z_j - z_k|^2."""
    xi = np.asarray(intensities, dtype=float)
    z = np.asarray(positions, dtype=complex)
    n = z.shape[-1]
    if n < 2:
        return np.zeros(z.shape[:-1])
    iu = np.triu_indices(n, 1)
    dist2 = np.abs(z[..., iu[0]] - z[..., iu[1]]) ** 2
    return 2.0 * np.sum(xi[iu[0]] * xi[iu[1]] * dist2, axis=-1)


def center_of_vorticity_of(intensities, positions) -> np.ndarray:
    xi = np.asarray(intensities, dtype=float)
    return np.asarray(positions, dtype=complex) @ xi.astype(complex)


def hamiltonian(config: VortexConfiguration) -> float:
    return float(hamiltonian_of(config.intensities, config.positions))


def moment_of_inertia(config: VortexConfiguration) -> float:
    return float(moment_of_inertia_of(config.intensities, config.positions))


def center_of_vorticity(config: VortexConfiguration) -> complex:
    return complex(center_of_vorticity_of(config.intensities, config.positions))


def pair_product_sum(intensities: Sequence[float]) -> float:
    """Sum over ordered pairs j != k of xi_j xi_k."""
    xi = np.asarray(intensities, dtype=float)
    return float(np.sum(xi) ** 2 - np.sum(xi ** 2))


def collapse_admissible(intensities: Sequence[float], rtol: float = 1e-12) -> bool:
    """Necessary conditions for a self-similar collapse of the whole group.

    The pairwise product sum must vanish (relative to sum xi_j^2) while
    the total circulation must not.
    """
    xi = np.asarray(intensities, dtype=float)
    if xi.size < 2:
        return False
    scale = float(np.sum(xi ** 2))
    pairs_vanish = abs(pair_product_sum(xi)) <= rtol * scale
    total_nonzero = abs(float(np.sum(xi))) > rtol * np.sqrt(scale)
    return bool(pairs_vanish and total_nonzero)
