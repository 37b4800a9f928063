"""Closed-form self-similar three-vortex bursts and their linearization.

A burst of a vortex of intensity ``xi`` splits it into intensities
``(-xi/3, 2xi/3, 2xi/3)`` placed at ``a_j Z(t)`` with
``Z(t) = sqrt(2 a t) exp(i (b / 2a) log t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class SelfSimilarParams:
    """Shape ``(a1, a2, a3)`` and growth/rotation rates ``(a, b)`` of a burst."""

    xi: float
    a: float
    b: float
    a1: complex
    a2: complex
    a3: complex

    @property
    def xi1(self) -> float:
        return -self.xi / 3.0

    @property
    def xi2(self) -> float:
        return 2.0 * self.xi / 3.0

    @property
    def xi3(self) -> float:
        return 2.0 * self.xi / 3.0

    @property
    def intensities(self) -> np.ndarray:
        return np.array([self.xi1, self.xi2, self.xi3])

    @property
    def shape(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3], dtype=complex)

    @property
    def spiral_rate(self) -> float:
        """Angular rate per unit ``log t``, i.e. ``b / 2a``."""
        return self.b / (2.0 * self.a)


def params_for(xi: float) -> SelfSimilarParams:
    """Parameters of the explicit burst of a vortex of intensity ``xi``."""
    xi = float(xi)
    if xi == 0.0 or not np.isfinite(xi):
        raise ValueError("burst intensity must be finite and nonzero")
    scale = xi / (84.0 * np.pi)
    b = 5.0 * scale
    if xi > 0:
        return SelfSimilarParams(xi, SQRT3 * scale, b,
                                 complex(-2.0, 2.0 * SQRT3), complex(-2.0, SQRT3), 1.0 + 0j)
    return SelfSimilarParams(xi, -SQRT3 * scale, b,
                             complex(2.0, 2.0 * SQRT3), complex(2.0, SQRT3), -1.0 + 0j)


def asrelation_residual(p: SelfSimilarParams) -> float:
    """Max over j of |sum_k xi_k/(a_j - a_k) - 2 pi i conj(a_j)(a - i b)|."""
    shape = p.shape
    xi = p.intensities
    worst = 0.0
    for j in range(3):
        lhs = sum(xi[k] / (shape[j] - shape[k]) for k in range(3) if k != j)
        rhs = 2j * np.pi * np.conj(shape[j]) * (p.a - 1j * p.b)
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


def z_of_t(p: SelfSimilarParams, t):
    """Common self-similar factor Z(t); accepts scalars or arrays."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("Z(t) is defined for t > 0 only")
    out = np.sqrt(2.0 * p.a * t_arr) * np.exp(1j * p.spiral_rate * np.log(t_arr))
    return complex(out) if out.ndim == 0 else out


def z_dot(p: SelfSimilarParams, t):
    """Time derivative of Z, from Z' = Z (a + i b) / (2 a t)."""
    t_arr = np.asarray(t, dtype=float)
    return z_of_t(p, t_arr) * (p.a + 1j * p.b) / (2.0 * p.a * t_arr)


def self_similar_positions(p: SelfSimilarParams, t) -> np.ndarray:
    """Positions ``a_j Z(t)`` with shape ``(..., 3)``."""
    return np.multiply.outer(np.asarray(z_of_t(p, t)), p.shape)


def holder_bound(p: SelfSimilarParams) -> float:
    """Upper bound ``sqrt(2a)(1 + |b|/(4a))`` on the 1/2-Holder seminorm of Z."""
    return float(np.sqrt(2.0 * p.a) * (1.0 + abs(p.b) / (4.0 * p.a)))


@dataclass(frozen=True)
class LMatrix:
    """Linearization of the x-equations in coordinates (x2, x3, conj x2, conj x3)."""

    entries: np.ndarray

    @property
    def block(self) -> np.ndarray:
        """The 2x2 block multiplying (conj x2, conj x3) in the first two rows."""
        return self.entries[:2, 2:]

    def apply(self, x2, x3):
        """L applied to (x2, x3, conj x2, conj x3); returns the first two rows."""
        x2 = np.asarray(x2, dtype=complex)
        x3 = np.asarray(x3, dtype=complex)
        e = self.entries
        y2 = e[0, 0] * x2 + e[0, 1] * x3 + e[0, 2] * np.conj(x2) + e[0, 3] * np.conj(x3)
        y3 = e[1, 0] * x2 + e[1, 1] * x3 + e[1, 2] * np.conj(x2) + e[1, 3] * np.conj(x3)
        return y2, y3


def _offdiagonal_entries(p: SelfSimilarParams):
    a1, a2, a3 = p.shape
    x1, x2, x3 = p.intensities
    pre = 1.0 / (2j * np.pi * abs(a1) ** 2)
    s = a1 ** 2
    r2 = np.conj(a2) / np.conj(a1)
    r3 = np.conj(a3) / np.conj(a1)
    l13 = pre * np.conj(s * x3 / (a2 - a3) ** 2 + s * x1 / (a2 - a1) ** 2
                        + r2 * s * x2 / (a1 - a2) ** 2)
    l14 = pre * np.conj(-s * x3 / (a2 - a3) ** 2 + r2 * s * x3 / (a1 - a3) ** 2)
    l23 = pre * np.conj(-s * x2 / (a3 - a2) ** 2 + r3 * s * x2 / (a1 - a2) ** 2)
    l24 = pre * np.conj(s * x2 / (a3 - a2) ** 2 + s * x1 / (a3 - a1) ** 2
                        + r3 * s * x3 / (a1 - a3) ** 2)
    return l13, l14, l23, l24


@lru_cache(maxsize=64)
def build_L(p: SelfSimilarParams) -> LMatrix:
    """Assemble L from the closed-form entries."""
    l13, l14, l23, l24 = _offdiagonal_entries(p)
    d = -p.a - 1j * p.b
    entries = np.array([
        [d, 0, l13, l14],
        [0, d, l23, l24],
        [np.conj(l13), np.conj(l14), np.conj(d), 0],
        [np.conj(l23), np.conj(l24), 0, np.conj(d)],
    ], dtype=complex)
    return LMatrix(entries)


def char_poly_coeffs(p: SelfSimilarParams) -> tuple[float, float]:
    """Coefficients (c1, c2) of det(L - lambda) = y^2 - c1 y + c2, y = (a+lambda)^2 + b^2."""
    l13, l14, l23, l24 = _offdiagonal_entries(p)
    c = np.conj
    c1 = l23 * c(l14) + l24 * c(l24) + l13 * c(l13) + l14 * c(l23)
    c2 = (l13 * c(l13) * l24 * c(l24) + l23 * c(l23) * l14 * c(l14)
          - l14 * c(l13) * l23 * c(l24) - l13 * c(l14) * l24 * c(l23))
    return float(c1.real), float(c2.real)


def eigen_discriminants(p: SelfSimilarParams) -> tuple[float, float]:
    """Return ``2b^2 - c1`` and ``b^4 - b^2 c1 + c2``."""
    c1, c2 = char_poly_coeffs(p)
    b2 = p.b ** 2
    return 2.0 * b2 - c1, b2 * b2 - b2 * c1 + c2


def L_eigenvalues(p: SelfSimilarParams) -> np.ndarray:
    """Eigenvalues of L from the characteristic polynomial, sorted by real part.

    Solves ``y^2 - c1 y + c2 = 0`` and then ``(a + lambda)^2 = y - b^2``.
    """
    c1, c2 = char_poly_coeffs(p)
    ys = np.roots([1.0, -c1, c2]).astype(complex)
    lam = []
    for y in ys:
        root = np.sqrt(complex(y - p.b ** 2))
        lam.extend([-p.a + root, -p.a - root])
    lam = np.array(lam)
    return lam[np.lexsort((lam.imag, lam.real))]


def spectrum_report(p: SelfSimilarParams) -> dict:
    """Eigenvalues by two routes plus the stability condition on mu."""
    poly = L_eigenvalues(p)
    dense = np.linalg.eigvals(build_L(p).entries)
    # pair each root with its nearest dense eigenvalue; sorting is fragile for near-ties
    gap = max(float(np.min(np.abs(poly - d))) for d in dense)
    gap = max(gap, max(float(np.min(np.abs(dense - r))) for r in poly))
    d1, d2 = eigen_discriminants(p)
    c1, c2 = char_poly_coeffs(p)
    return {
        "eigenvalues_charpoly": poly,
        "eigenvalues_dense": dense,
        "charpoly_vs_dense": gap,
        "max_real_part_offset": float(np.max(np.abs(poly.real + p.a))),
        "c1": c1,
        "c2": c2,
        "discriminant_linear": d1,
        "discriminant_constant": d2,
        "mu_condition_holds": bool(d1 > 0 and d2 > 0 and d1 * d1 - 4 * d2 > 0),
    }
