"""Damped Newton solver for the phase equation on the annulus.

The discrete residual is phase(H(u)) - theta - f with H the finite
difference Hessian built from 3-point radial stencils (exact on radial
quadratics) and centered angular differences.  Newton uses the exact
Jacobian of that discrete system, a_ij d_ij with a = (I + H^2)^{-1}, so
convergence is quadratic down to the roundoff floor.  A radial reduction
integrates the rotationally symmetric case as an ODE.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.sparse
import scipy.sparse.linalg

from . import _stencils, fields
from .errors import (
    DegeneratePhase,
    LinearSolveFailure,
    PhaseOutOfRange,
    ShapeMismatch,
)
from .phase import phase_arrays, phase_gradient_arrays

PHASE_GUARD = 1e-6  # tangent-argument margin from +-pi/2 in the radial ODE


@dataclass(eq=False)
class ExteriorProblem:
    """Dirichlet problem for phase(D^2 u) = theta + f on the annulus.

    inner_bc/outer_bc hold the Dirichlet values on the boundary circles
    (scalars broadcast).  beta records the claimed decay exponent of f for
    reporting only.
    """

    grid: fields.PolarGrid
    theta: float
    f: fields.ScalarField
    inner_bc: np.ndarray
    outer_bc: np.ndarray
    beta: float | None = None

    def __post_init__(self):
        if self.f.grid.shape != self.grid.shape:
            raise ShapeMismatch("f lives on a different grid")
        self.inner_bc = np.broadcast_to(
            np.asarray(self.inner_bc, dtype=float), (self.grid.n_phi,)
        ).copy()
        self.outer_bc = np.broadcast_to(
            np.asarray(self.outer_bc, dtype=float), (self.grid.n_phi,)
        ).copy()
        rhs = self.theta + self.f.values
        if np.any(rhs <= 0.0) or np.any(rhs >= math.pi):
            raise DegeneratePhase("theta + f must stay inside (0, pi) on the grid")


@dataclass
class NewtonReport:
    iterations: int
    residual_history: list
    converged: bool

    def to_json(self):
        return {
            "iterations": self.iterations,
            "residual_history": self.residual_history,
            "final_residual": self.residual_history[-1] if self.residual_history else None,
            "converged": self.converged,
        }


def fd_hessian_components(u: fields.ScalarField):
    """Solver-grade Hessian: 3-point radial, centered angular differences.

    This is the discretization whose exact Jacobian the Newton step
    assembles; the spectral measurement Hessian in fields is not used here
    so that the linearization matches the residual identically.
    """
    g = u.grid
    v = u.values
    u_r = g.radial_derivative(v, 1)
    u_rr = g.radial_derivative(v, 2)
    u_p = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2.0 * g.dphi)
    u_pp = (np.roll(v, -1, axis=1) - 2.0 * v + np.roll(v, 1, axis=1)) / g.dphi ** 2
    u_rp = g.radial_derivative(u_p, 1)
    c = np.cos(g.phi)[None, :]
    s = np.sin(g.phi)[None, :]
    r = g.r[:, None]
    rad = u_r / r + u_pp / r ** 2
    mix = u_rp / r - u_p / r ** 2
    h11 = c * c * u_rr + s * s * rad - 2.0 * s * c * mix
    h22 = s * s * u_rr + c * c * rad + 2.0 * s * c * mix
    h12 = s * c * (u_rr - rad) + (c * c - s * s) * mix
    return h11, h12, h22


def residual(u: fields.ScalarField, p: ExteriorProblem) -> fields.ScalarField:
    """phase(H(u)) - theta - f at interior nodes, zero on boundary rows."""
    if u.grid.shape != p.grid.shape:
        raise ShapeMismatch("solution field lives on a different grid")
    h11, h12, h22 = fd_hessian_components(u)
    res = phase_arrays(h11, h12, h22) - p.theta - p.f.values
    res[0, :] = 0.0
    res[-1, :] = 0.0
    return fields.ScalarField(u.grid, res)


def _sup_interior(res_values):
    return float(np.max(np.abs(res_values[1:-1, :])))


def _radial_weight_vectors(grid):
    """Interior 3-point radial weights as (lower, center, upper) vectors."""
    key = "newton_radial_weights"
    if key in grid._cache:
        return grid._cache[key]
    w1 = np.zeros((3, grid.n_r))
    w2 = np.zeros((3, grid.n_r))
    for i in range(1, grid.n_r - 1):
        nodes = grid.r[i - 1 : i + 2]
        w = _stencils.fd_weights(nodes, grid.r[i], 2)
        w1[:, i] = w[1]
        w2[:, i] = w[2]
    grid._cache[key] = (w1, w2)
    return w1, w2


def _assemble_jacobian(u, p, a11, a12, a22):
    """Sparse matrix of a11 dxx + 2 a12 dxy + a22 dyy, identity at boundaries."""
    g = u.grid
    n_r, n_phi = g.shape
    c = np.cos(g.phi)[None, :]
    s = np.sin(g.phi)[None, :]
    r = g.r[:, None]
    C_rr = a11 * c * c + 2.0 * a12 * s * c + a22 * s * s
    C_tt = a11 * s * s - 2.0 * a12 * s * c + a22 * c * c  # also weights u_r / r
    C_rp = 2.0 * ((a22 - a11) * s * c + a12 * (c * c - s * s))

    w1, w2 = _radial_weight_vectors(g)
    interior = np.arange(1, n_r - 1)
    jj = np.arange(n_phi)
    ii, jj = np.meshgrid(interior, jj, indexing="ij")
    row = (ii * n_phi + jj).ravel()

    rows, cols, vals = [], [], []

    def add(di, dj, coeff):
        rows.append(row)
        cols.append(((ii + di) * n_phi + (jj + dj) % n_phi).ravel())
        vals.append(coeff.ravel())

    rloc = r[interior]
    for k, di in enumerate((-1, 0, 1)):
        radial1 = w1[k, interior][:, None]
        radial2 = w2[k, interior][:, None]
        # C_rr u_rr + C_tt u_r / r
        add(di, 0, C_rr[interior] * radial2 + C_tt[interior] * radial1 / rloc)
        # cross term C_rp u_rphi / r
        cross = C_rp[interior] * radial1 / (rloc * 2.0 * g.dphi)
        add(di, 1, cross)
        add(di, -1, -cross)
    # angular Laplacian part C_tt u_phiphi / r^2 and drift -C_rp u_phi / r^2
    ang2 = C_tt[interior] / (rloc ** 2 * g.dphi ** 2)
    ang1 = -C_rp[interior] / (rloc ** 2 * 2.0 * g.dphi)
    add(0, 1, ang2 + ang1)
    add(0, -1, ang2 - ang1)
    add(0, 0, -2.0 * ang2)

    # identity rows for the Dirichlet boundary circles
    brow = np.concatenate([np.arange(n_phi), (n_r - 1) * n_phi + np.arange(n_phi)])
    rows.append(brow)
    cols.append(brow)
    vals.append(np.ones(brow.size))

    mat = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_r * n_phi, n_r * n_phi),
    )
    return mat.tocsc()


def default_initial_guess(p: ExteriorProblem) -> fields.ScalarField:
    """Leading quadratic of the phase level, harmonically matched to the BCs."""
    g = p.grid
    a = math.tan(p.theta / 2.0)
    x, y = g.mesh_xy()
    quad = 0.5 * a * (x * x + y * y)
    mismatch_in = p.inner_bc - quad[0, :]
    mismatch_out = p.outer_bc - quad[-1, :]
    corr = harmonic_interpolant(g, mismatch_in, mismatch_out)
    return fields.ScalarField(g, quad + corr.values)


def harmonic_interpolant(grid, inner_values, outer_values) -> fields.ScalarField:
    """Harmonic field on the annulus matching circle data mode by mode."""
    r1, r2 = grid.r_min, grid.r_max
    m1 = np.fft.rfft(np.asarray(inner_values, dtype=float)) / grid.n_phi
    m2 = np.fft.rfft(np.asarray(outer_values, dtype=float)) / grid.n_phi
    n_modes = m1.size
    coeffs = np.zeros((grid.n_r, n_modes), dtype=complex)
    for k in range(n_modes):
        if k == 0:
            G = np.array([[1.0, math.log(r1)], [1.0, math.log(r2)]])
            ck, dk = np.linalg.solve(G, np.array([m1[0].real, m2[0].real]))
            coeffs[:, 0] = ck + dk * grid.t
        else:
            G = np.array([[r1 ** k, r1 ** (-k)], [r2 ** k, r2 ** (-k)]])
            pk, qk = np.linalg.solve(G, np.array([m1[k], m2[k]]))
            coeffs[:, k] = pk * grid.r ** k + qk * grid.r ** (-k)
    vals = np.fft.irfft(coeffs * grid.n_phi, n=grid.n_phi, axis=1)
    return fields.ScalarField(grid, vals)


def newton_solve(p: ExteriorProblem, u0: fields.ScalarField, tol=1e-10,
                 max_iter=50, max_backtracks=20):
    """Damped Newton iteration; returns (solution, NewtonReport).

    The step solves the exact discrete linearization with a sparse direct
    factorization; the step length halves until the sup residual
    decreases.  Non-convergence is reported through the NewtonReport
    (best iterate returned), only a failed linear solve raises.
    """
    g = p.grid
    u = u0.copy()
    u.values[0, :] = p.inner_bc
    u.values[-1, :] = p.outer_bc
    history = []
    converged = False
    iterations = 0
    for _ in range(max_iter):
        res = residual(u, p)
        sup = _sup_interior(res.values)
        history.append(sup)
        if not math.isfinite(sup):
            raise LinearSolveFailure("residual is not finite")
        if sup < tol:
            converged = True
            break
        h11, h12, h22 = fd_hessian_components(u)
        a11, a12, a22 = phase_gradient_arrays(h11, h12, h22)
        mat = _assemble_jacobian(u, p, a11, a12, a22)
        rhs = -res.values.ravel()
        try:
            delta = scipy.sparse.linalg.spsolve(mat, rhs)
        except Exception as exc:  # factorization failure, singular matrix
            raise LinearSolveFailure(str(exc)) from exc
        if not np.all(np.isfinite(delta)):
            raise LinearSolveFailure("sparse solve returned non-finite values")
        delta = delta.reshape(g.shape)

        step = 1.0
        improved = False
        for _ in range(max_backtracks + 1):
            trial = fields.ScalarField(g, u.values + step * delta)
            trial_sup = _sup_interior(residual(trial, p).values)
            if trial_sup < sup:
                u = trial
                improved = True
                break
            step *= 0.5
        iterations += 1
        if not improved:
            break  # stalled line search; report best iterate
    else:
        res = residual(u, p)
        history.append(_sup_interior(res.values))
        converged = history[-1] < tol
    if converged and len(history) and history[-1] >= tol:
        converged = False
    return u, NewtonReport(iterations, history, converged)


@dataclass(eq=False)
class RadialProfile:
    """Radial solution u(r) of the rotationally symmetric reduction."""

    r0: float
    r_max: float
    _sol: object

    def u(self, r):
        return self._sol(np.asarray(r, dtype=float))[0]

    def du(self, r):
        return self._sol(np.asarray(r, dtype=float))[1]


def radial_solve(theta, f, r0, slope0, r_max, u0=0.0, rtol=1e-11, atol=1e-12) -> RadialProfile:
    """Integrate the radial reduction u'' = tan(theta + f(r) - arctan(u'/r)).

    The radial Hessian eigenvalue pair is (u'', u'/r); the reduction keeps
    their arctangents summing to theta + f(r).  Adaptive 4th/5th-order
    stepping; PhaseOutOfRange if the tangent argument approaches +-pi/2.
    """

    def rhs(r, y):
        arg = theta + f(r) - math.atan2(y[1], r)
        if abs(arg) >= 0.5 * math.pi - PHASE_GUARD:
            raise PhaseOutOfRange(
                f"tangent argument {arg:.6f} at r={r:.6g} leaves the principal branch"
            )
        return (y[1], math.tan(arg))

    sol = scipy.integrate.solve_ivp(
        rhs, (r0, r_max), (u0, slope0 * 1.0), method="RK45",
        rtol=rtol, atol=atol, dense_output=True,
    )
    if not sol.success:
        raise PhaseOutOfRange(f"radial integration failed: {sol.message}")
    return RadialProfile(r0, r_max, sol.sol)
