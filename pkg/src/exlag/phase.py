"""Pointwise algebra of the arctangent phase operator and the Lewy rotation.

The phase of a symmetric 2x2 matrix M is arctan lam1 + arctan lam2 over its
eigenvalues.  The Lewy rotation by an angle shifts both arctangents by that
angle and is realised on Hessians by a Moebius-type matrix transform.  All
functions here are pure; array variants operate entrywise on stacked
component arrays so field-level code can stay vectorised.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularRotation

SINGULAR_DET_TOL = 1e-12


@dataclass(frozen=True)
class Sym2:
    """Symmetric 2x2 matrix stored by its three independent entries."""

    a11: float
    a12: float
    a22: float

    def as_array(self):
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])

    @staticmethod
    def from_array(m):
        m = np.asarray(m, dtype=float)
        return Sym2(m[0, 0], 0.5 * (m[0, 1] + m[1, 0]), m[1, 1])

    @staticmethod
    def identity(scale=1.0):
        return Sym2(scale, 0.0, scale)

    def trace(self):
        return self.a11 + self.a22

    def det(self):
        return self.a11 * self.a22 - self.a12 ** 2

    def frobenius_sq(self):
        return self.a11 ** 2 + 2.0 * self.a12 ** 2 + self.a22 ** 2


@dataclass(frozen=True)
class PhaseParams:
    """Phase level theta with an admissibility margin delta.

    The rotation angle is always half the margin; cos/sin of it are cached
    as properties.  Requires 0 < theta < pi and 0 < delta < theta so that
    the rotated phase level theta - delta stays positive.
    """

    theta: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.theta < math.pi:
            raise ValueError(f"theta must lie in (0, pi), got {self.theta}")
        if not 0.0 < self.delta < self.theta:
            raise ValueError(f"delta must lie in (0, theta), got {self.delta}")

    @property
    def vartheta(self):
        return self.delta / 2.0

    @property
    def cos_v(self):
        return math.cos(self.vartheta)

    @property
    def sin_v(self):
        return math.sin(self.vartheta)

    @property
    def theta_rotated(self):
        return self.theta - self.delta

    @property
    def hessian_bound(self):
        """cot of the rotation angle; eigenvalue ceiling after rotation."""
        return self.cos_v / self.sin_v


def eigenvalues_arrays(a11, a12, a22):
    """Eigenvalue pair (lam1 <= lam2) of stacked symmetric 2x2 entries."""
    mean = 0.5 * (a11 + a22)
    half = np.hypot(0.5 * (a11 - a22), a12)
    return mean - half, mean + half


def eigenvalues(m: Sym2):
    """Sorted eigenvalues (lam1 <= lam2) of a symmetric 2x2 matrix."""
    l1, l2 = eigenvalues_arrays(m.a11, m.a12, m.a22)
    return float(l1), float(l2)


def phase_arrays(a11, a12, a22):
    l1, l2 = eigenvalues_arrays(a11, a12, a22)
    return np.arctan(l1) + np.arctan(l2)


def phase(m: Sym2) -> float:
    """arctan lam1 + arctan lam2; lies in (-pi, pi)."""
    return float(phase_arrays(m.a11, m.a12, m.a22))


def phase_gradient_arrays(a11, a12, a22):
    """Entries of (I + M^2)^{-1} for stacked symmetric matrices.

    This is the derivative of the phase with respect to the matrix entries,
    in the sense d phase = g11 dM11 + 2 g12 dM12 + g22 dM22 for a symmetric
    perturbation dM.
    """
    b11 = 1.0 + a11 * a11 + a12 * a12
    b12 = a12 * (a11 + a22)
    b22 = 1.0 + a22 * a22 + a12 * a12
    det = b11 * b22 - b12 * b12
    return b22 / det, -b12 / det, b11 / det


def phase_gradient(m: Sym2) -> Sym2:
    """Closed-form linearization (I + M^2)^{-1} of the phase at M."""
    g11, g12, g22 = phase_gradient_arrays(m.a11, m.a12, m.a22)
    return Sym2(float(g11), float(g12), float(g22))


def _mobius_arrays(a11, a12, a22, num_diag, num_scale, den_diag, den_scale):
    """Symmetrized (num_diag I + num_scale M)(den_diag I + den_scale M)^{-1}."""
    d11 = den_diag + den_scale * a11
    d12 = den_scale * a12
    d22 = den_diag + den_scale * a22
    det = d11 * d22 - d12 * d12
    n11 = num_diag + num_scale * a11
    n12 = num_scale * a12
    n22 = num_diag + num_scale * a22
    # N D^{-1} with D^{-1} = adj(D)/det; the product is symmetrized because
    # N and D commute only up to roundoff once entries are finite floats.
    r11 = (n11 * d22 - n12 * d12) / det
    r12_a = (-n11 * d12 + n12 * d11) / det
    r12_b = (n12 * d22 - n22 * d12) / det
    r22 = (-n12 * d12 + n22 * d11) / det
    return r11, 0.5 * (r12_a + r12_b), r22, det


def lewy_hessian_arrays(a11, a12, a22, p: PhaseParams):
    c, s = p.cos_v, p.sin_v
    r11, r12, r22, det = _mobius_arrays(a11, a12, a22, -s, c, c, s)
    return r11, r12, r22, det


def _check_det(det, fro_sq):
    tol = SINGULAR_DET_TOL * (1.0 + fro_sq)
    if abs(det) < tol:
        raise SingularRotation(f"rotation denominator determinant {det:g} below {tol:g}")


def lewy_hessian(m: Sym2, p: PhaseParams) -> Sym2:
    """Hessian of the rotated potential: (-s I + c M)(c I + s M)^{-1}.

    Shifts each eigenvalue's arctangent by -vartheta.  Raises
    SingularRotation when c I + s M is singular (an eigenvalue of M at
    -cot vartheta).
    """
    r11, r12, r22, det = lewy_hessian_arrays(m.a11, m.a12, m.a22, p)
    _check_det(float(det), m.frobenius_sq())
    return Sym2(float(r11), float(r12), float(r22))


def lewy_hessian_inverse(mt: Sym2, p: PhaseParams) -> Sym2:
    """Inverse rotation (s I + c Mt)(c I - s Mt)^{-1}.

    Singular exactly when an eigenvalue of Mt reaches cot vartheta, the
    ceiling that the forward rotation never exceeds.
    """
    c, s = p.cos_v, p.sin_v
    r11, r12, r22, det = _mobius_arrays(mt.a11, mt.a12, mt.a22, s, c, c, -s)
    _check_det(float(det), mt.frobenius_sq())
    return Sym2(float(r11), float(r12), float(r22))
