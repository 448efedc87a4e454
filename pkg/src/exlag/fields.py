"""Annular polar grids and finite-difference calculus in Cartesian components.

Grids are log-spaced in radius and uniform in angle.  Radial derivatives
use 3-point stencils on the radii themselves (exact on quadratics in r,
second order on smooth fields since the mesh ratio is constant); angular
derivatives of measurement-grade operators are spectral, so any field with
resolved Fourier content differentiates exactly in the angle.  Together
this reproduces every polynomial of degree <= 2 to roundoff, which the
downstream expansion fits rely on.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _stencils
from .errors import (
    GridTooSmall,
    OutOfDomain,
    RadiusOutOfRange,
    ShapeMismatch,
    TooManyModes,
)

FIELD_FORMAT_HEADER = "polar-field v1"


@dataclass(eq=False)
class PolarGrid:
    """Log-radial x uniform-angular annulus grid.

    r nodes are geometric (constant ratio), phi nodes cover [0, 2pi) with a
    uniform step.  Instances are immutable by convention; derivative
    matrices are cached lazily.
    """

    r_min: float
    r_max: float
    n_r: int
    n_phi: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not (0.0 < self.r_min < self.r_max):
            raise ValueError("need 0 < r_min < r_max")
        if self.n_r < 8:
            raise ValueError("need at least 8 radial nodes")
        if self.n_phi < 16 or self.n_phi % 2:
            raise ValueError("n_phi must be even and at least 16")
        self.t = np.linspace(math.log(self.r_min), math.log(self.r_max), self.n_r)
        self.r = np.exp(self.t)
        self.r[0] = self.r_min
        self.r[-1] = self.r_max
        self.dt = self.t[1] - self.t[0]
        self.phi = 2.0 * math.pi * np.arange(self.n_phi) / self.n_phi
        self.dphi = 2.0 * math.pi / self.n_phi

    @property
    def shape(self):
        return (self.n_r, self.n_phi)

    def mesh_xy(self):
        r = self.r[:, None]
        return r * np.cos(self.phi)[None, :], r * np.sin(self.phi)[None, :]

    def radial_index(self, r):
        """Index of the last node <= r; RadiusOutOfRange outside the annulus."""
        if not (self.r_min <= r <= self.r_max):
            raise RadiusOutOfRange(f"radius {r} outside [{self.r_min}, {self.r_max}]")
        return int(np.searchsorted(self.r, r, side="right") - 1)

    def window_indices(self, r_lo, r_hi):
        mask = (self.r >= r_lo) & (self.r <= r_hi)
        return np.nonzero(mask)[0]

    def _radial_matrix(self, deriv, width=3):
        key = ("dr", deriv, width)
        if key not in self._cache:
            self._cache[key] = _stencils.derivative_matrix(self.r, deriv, interior_width=width)
        return self._cache[key]

    def radial_derivative(self, values, deriv=1, width=3):
        """d^deriv/dr^deriv along axis 0, boundary rows one-sided."""
        return self._radial_matrix(deriv, width) @ values


@dataclass(eq=False)
class ScalarField:
    """Scalar samples on a PolarGrid, periodic in the angular index."""

    grid: PolarGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ShapeMismatch(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )

    @staticmethod
    def from_function(grid, fn):
        """Sample fn(x, y) on the grid nodes."""
        x, y = grid.mesh_xy()
        return ScalarField(grid, np.asarray(fn(x, y), dtype=float) + np.zeros(grid.shape))

    def copy(self):
        return ScalarField(self.grid, self.values.copy())

    def save(self, path):
        g = self.grid
        with open(path, "w") as fh:
            fh.write(f"{FIELD_FORMAT_HEADER} {g.r_min!r} {g.r_max!r} {g.n_r} {g.n_phi}\n")
            for row in self.values:
                fh.write(" ".join(repr(v) for v in row) + "\n")

    @staticmethod
    def load(path):
        with open(path) as fh:
            header = fh.readline().split()
            if header[:2] != FIELD_FORMAT_HEADER.split():
                raise ValueError(f"not a {FIELD_FORMAT_HEADER} file: {path}")
            r_min, r_max = float(header[2]), float(header[3])
            n_r, n_phi = int(header[4]), int(header[5])
            values = np.loadtxt(fh, ndmin=2)
        if values.shape != (n_r, n_phi):
            raise ValueError(f"field body shape {values.shape} != header {(n_r, n_phi)}")
        return ScalarField(PolarGrid(r_min, r_max, n_r, n_phi), values)


@dataclass(eq=False)
class SymmetricMatrixField:
    """A Sym2 value per grid node, stored as three component arrays."""

    grid: PolarGrid
    h11: np.ndarray
    h12: np.ndarray
    h22: np.ndarray

    def at(self, i, j):
        from .phase import Sym2

        return Sym2(float(self.h11[i, j]), float(self.h12[i, j]), float(self.h22[i, j]))


def _spectral_wavenumbers(n_phi):
    k = np.fft.rfftfreq(n_phi, d=1.0 / n_phi)
    return k


def angular_derivative(values, n_phi, order=1):
    """Spectral d^order/dphi^order along axis 1 (exact on resolved modes)."""
    coeffs = np.fft.rfft(values, axis=1)
    k = _spectral_wavenumbers(n_phi)
    factor = (1j * k) ** order
    if order % 2 == 1 and n_phi % 2 == 0:
        factor = factor.copy()
        factor[-1] = 0.0  # Nyquist mode has no well-defined odd derivative
    return np.fft.irfft(coeffs * factor[None, :], n=n_phi, axis=1)


def _polar_derivatives(u: ScalarField):
    g = u.grid
    if g.n_r < 4:
        raise GridTooSmall("need at least 4 radial nodes for derivatives")
    v = u.values
    u_r = g.radial_derivative(v, 1)
    u_rr = g.radial_derivative(v, 2)
    u_p = angular_derivative(v, g.n_phi, 1)
    u_pp = angular_derivative(v, g.n_phi, 2)
    u_rp = g.radial_derivative(u_p, 1)
    return u_r, u_rr, u_p, u_pp, u_rp


def gradient(u: ScalarField):
    """Cartesian gradient (ux, uy) as two ScalarFields."""
    g = u.grid
    u_r, _, u_p, _, _ = _polar_derivatives(u)
    c = np.cos(g.phi)[None, :]
    s = np.sin(g.phi)[None, :]
    r = g.r[:, None]
    ux = c * u_r - s * u_p / r
    uy = s * u_r + c * u_p / r
    return ScalarField(g, ux), ScalarField(g, uy)


def hessian(u: ScalarField) -> SymmetricMatrixField:
    """Cartesian Hessian as a symmetric-matrix field."""
    g = u.grid
    u_r, u_rr, u_p, u_pp, u_rp = _polar_derivatives(u)
    c = np.cos(g.phi)[None, :]
    s = np.sin(g.phi)[None, :]
    r = g.r[:, None]
    rad = u_r / r + u_pp / r ** 2       # tangential second derivative
    mix = u_rp / r - u_p / r ** 2
    h11 = c * c * u_rr + s * s * rad - 2.0 * s * c * mix
    h22 = s * s * u_rr + c * c * rad + 2.0 * s * c * mix
    h12 = s * c * (u_rr - rad) + (c * c - s * s) * mix
    return SymmetricMatrixField(g, h11, h12, h22)


def laplacian(u: ScalarField) -> ScalarField:
    # wider radial stencils than gradient/hessian: this feeds harmonicity
    # checks, where second-order truncation would mask genuine content
    g = u.grid
    u_r = g.radial_derivative(u.values, 1, width=5)
    u_rr = g.radial_derivative(u.values, 2, width=5)
    u_pp = angular_derivative(u.values, g.n_phi, 2)
    r = g.r[:, None]
    return ScalarField(g, u_rr + u_r / r + u_pp / r ** 2)


def mean_profile(u: ScalarField):
    """Angular mean of the field per radius (trapezoid = exact mean)."""
    return u.values.mean(axis=1)


def flux_integral(u: ScalarField, r: float) -> float:
    """Boundary flux of the gradient over the circle of radius r.

    Equals 2 pi times the derivative of the angular-mean profile with
    respect to log-radius, evaluated by a high-order local stencil, so the
    r^2 / r / log r / constant parts of far-field models integrate exactly
    to roundoff.
    """
    g = u.grid
    i = g.radial_index(r)
    if i < 2 or i > g.n_r - 3:
        raise RadiusOutOfRange(
            f"flux radius {r} needs at least 2 radial nodes on each side"
        )
    prof = mean_profile(u)
    starts, w = _stencils.interp_weights_1d(g.t, math.log(r), order=8, deriv=1)
    dmean_dt = float(_stencils.apply_interp(prof, starts, w)[0])
    return 2.0 * math.pi * dmean_dt


def values_on_circle(u: ScalarField, r: float, order=8):
    """Field values at (r, phi_j) for every grid angle via radial interpolation."""
    g = u.grid
    if not (g.r_min <= r <= g.r_max):
        raise RadiusOutOfRange(f"radius {r} outside [{g.r_min}, {g.r_max}]")
    starts, w = _stencils.interp_weights_1d(g.t, math.log(r), order=order, deriv=0)
    return _stencils.apply_interp(u.values, starts, w)[0]


def circle_modes(u: ScalarField, r: float, k_max: int):
    """Angular Fourier coefficients c_0..c_k_max of phi -> u(r, phi).

    Normalised so that u(r, phi) = sum_k c_k e^{i k phi} + conjugates of the
    k >= 1 terms.
    """
    g = u.grid
    if k_max >= g.n_phi // 2:
        raise TooManyModes(f"k_max {k_max} must be < n_phi/2 = {g.n_phi // 2}")
    ring = values_on_circle(u, r)
    coeffs = np.fft.rfft(ring) / g.n_phi
    return coeffs[: k_max + 1]


def interp2(u: ScalarField, r_eval, phi_eval, order=8):
    """High-order local Lagrange interpolation at arbitrary (r, phi) points.

    Tensor stencils in (log r, phi) with periodic wrap in phi; OutOfDomain
    if any radius leaves the annulus.
    """
    g = u.grid
    r_eval = np.asarray(r_eval, dtype=float)
    phi_eval = np.asarray(phi_eval, dtype=float)
    shape = np.broadcast(r_eval, phi_eval).shape
    r_flat = np.broadcast_to(r_eval, shape).ravel()
    p_flat = np.mod(np.broadcast_to(phi_eval, shape).ravel(), 2.0 * math.pi)
    eps = 1e-12 * (1.0 + g.r_max)
    if np.any(r_flat < g.r_min - eps) or np.any(r_flat > g.r_max + eps):
        raise OutOfDomain("interpolation point outside the grid annulus")
    r_flat = np.clip(r_flat, g.r_min, g.r_max)

    starts_t, w_t = _stencils.interp_weights_1d(g.t, np.log(r_flat), order=order)
    width_t = w_t.shape[1]
    width_p = min(order, g.n_phi)
    # periodic angular stencil centered on each target angle
    j0 = np.floor(p_flat / g.dphi).astype(int)
    offsets = np.arange(width_p) - (width_p - 1) // 2
    cols = (j0[:, None] + offsets[None, :]) % g.n_phi
    phi_nodes = (j0[:, None] + offsets[None, :]) * g.dphi
    w_p = np.empty_like(phi_nodes)
    for k in range(p_flat.size):
        w_p[k] = _stencils.fd_weights(phi_nodes[k], p_flat[k], 0)[0]

    rows = starts_t[:, None] + np.arange(width_t)[None, :]
    # gather values on the tensor stencil: (npts, width_t, width_p)
    vals = u.values[rows[:, :, None], cols[:, None, :]]
    out = np.einsum("kt,kp,ktp->k", w_t, w_p, vals)
    return out.reshape(shape)


def rescale(u: ScalarField, x, R: float, out_grid: PolarGrid | None = None) -> ScalarField:
    """Zoomed quadratic-normalised view around x at scale R.

    Returns y -> (4/R)^2 u(x + (R/4) y) sampled on a unit-ball-scale
    annulus grid (r up to 2).  Requires the ball of radius R/2 around x to
    lie inside the source annulus.
    """
    if out_grid is None:
        out_grid = PolarGrid(1.0 / 64.0, 2.0, 64, u.grid.n_phi)
    x = np.asarray(x, dtype=float)
    yx, yy = out_grid.mesh_xy()
    px = x[0] + 0.25 * R * yx
    py = x[1] + 0.25 * R * yy
    pr = np.hypot(px, py)
    pphi = np.arctan2(py, px)
    vals = interp2(u, pr, pphi)
    return ScalarField(out_grid, (4.0 / R) ** 2 * vals)
