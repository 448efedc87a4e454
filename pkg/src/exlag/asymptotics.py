"""Far-field expansion extraction and decay-rate estimation.

The far-field model is u = x'Ax/2 + b'x + (d/2) ln(x'(I+A^2)x) + c plus a
remainder decaying like |x|^{-sigma} (ln|x|)^mu.  This module fits the
coefficients from a sampled field, extracts d independently through the
normalized-coordinate flux identity, fits harmonic exteriors mode by mode,
and regresses remainder decay rates with logarithmic-factor detection.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _stencils, fields
from .errors import (
    DegenerateRadii,
    IllConditioned,
    NotHarmonic,
    RadiusOutOfRange,
    WindowTooSmall,
)
from .phase import Sym2, phase

NORMAL_COND_LIMIT = 1e10
LOG_POWER_THRESHOLD = 0.5   # fitted ln-ln coefficient above this reports mu = 1


@dataclass
class Expansion:
    """Far-field model {A, b, c, d} plus claimed remainder exponents.

    sigma is the claimed decay exponent of the remainder (negative values
    encode slowly growing remainders of the weak-decay regimes); mu is the
    logarithmic power.
    """

    A: Sym2
    b: np.ndarray = field(default_factory=lambda: np.zeros(2))
    c: float = 0.0
    d: float = 0.0
    sigma: float = 0.0
    mu: int = 0

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)

    def phase_error(self, theta):
        return abs(phase(self.A) - theta)

    def to_json(self):
        return {
            "A": [self.A.a11, self.A.a12, self.A.a22],
            "b": [float(self.b[0]), float(self.b[1])],
            "c": self.c,
            "d": self.d,
            "sigma": self.sigma,
            "mu": self.mu,
        }


@dataclass
class DecayFit:
    """Measured power-law slope and logarithmic exponent of a remainder."""

    slope: float
    log_power: float
    window: tuple
    fit_residual: float

    def __post_init__(self):
        if not self.window[0] < self.window[1]:
            raise ValueError("window must satisfy r_lo < r_hi")
        if self.fit_residual < 0:
            raise ValueError("fit residual must be nonnegative")

    @property
    def mu_detected(self):
        return 1 if self.log_power > LOG_POWER_THRESHOLD else 0

    def to_json(self):
        return {
            "slope": self.slope,
            "log_power": self.log_power,
            "window": [self.window[0], self.window[1]],
            "fit_residual": self.fit_residual,
        }


def log_metric_matrix(A: Sym2):
    """I + A^2 for the logarithm argument of the expansion model."""
    m = A.as_array()
    return np.eye(2) + m @ m


def expansion_field(exp: Expansion, grid: fields.PolarGrid) -> fields.ScalarField:
    """Sample the model x'Ax/2 + b'x + (d/2) ln(x'(I+A^2)x) + c on a grid."""
    x, y = grid.mesh_xy()
    B = log_metric_matrix(exp.A)
    quad = 0.5 * (exp.A.a11 * x * x + 2.0 * exp.A.a12 * x * y + exp.A.a22 * y * y)
    logarg = B[0, 0] * x * x + 2.0 * B[0, 1] * x * y + B[1, 1] * y * y
    vals = quad + exp.b[0] * x + exp.b[1] * y + 0.5 * exp.d * np.log(logarg) + exp.c
    return fields.ScalarField(grid, vals)


def fit_A(u: fields.ScalarField, window) -> Sym2:
    """Area-weighted average of the Hessian over an annular window."""
    g = u.grid
    idx = g.window_indices(window[0], window[1])
    if idx.size < 3:
        raise WindowTooSmall(f"window {window} holds {idx.size} radial nodes, need >= 3")
    H = fields.hessian(u)
    w = (g.r[idx] ** 2)[:, None] * np.ones(g.n_phi)[None, :]
    wsum = w.sum()
    a11 = float((H.h11[idx] * w).sum() / wsum)
    a12 = float((H.h12[idx] * w).sum() / wsum)
    a22 = float((H.h22[idx] * w).sum() / wsum)
    return Sym2(a11, a12, a22)


def default_fit_window(grid: fields.PolarGrid, boundary_rows=3):
    """Outermost decade of the grid, excluding boundary stencil rows."""
    r_hi = grid.r[grid.n_r - 1 - boundary_rows]
    r_lo = max(r_hi / 10.0, grid.r[boundary_rows])
    return (r_lo, r_hi)


def fit_bcd(u: fields.ScalarField, A: Sym2, window, claimed_sigma=None):
    """Least squares for (b, c, d) of the expansion model on a window.

    Fits u - x'Ax/2 against {x1, x2, 1, (1/2) ln(x'(I+A^2)x)} over all
    window nodes, area weighted.  When claimed_sigma is given (and
    positive-definite in the sense of a plain power law), the basis is
    augmented with the nuisance shape |x|^{-claimed_sigma} so the known
    remainder of the expansion theorem does not bleed into d; without it
    the d estimate carries an O(remainder) bias.
    """
    g = u.grid
    idx = g.window_indices(window[0], window[1])
    if idx.size < 3:
        raise WindowTooSmall(f"window {window} holds {idx.size} radial nodes, need >= 3")
    x, y = g.mesh_xy()
    x, y = x[idx].ravel(), y[idx].ravel()
    r2 = x * x + y * y
    B = log_metric_matrix(A)
    quad = 0.5 * (A.a11 * x * x + 2.0 * A.a12 * x * y + A.a22 * y * y)
    logb = 0.5 * np.log(B[0, 0] * x * x + 2.0 * B[0, 1] * x * y + B[1, 1] * y * y)
    cols = [x, y, np.ones_like(x), logb]
    if claimed_sigma is not None and claimed_sigma != 0.0:
        cols.append(r2 ** (-0.5 * claimed_sigma))
    G = np.stack(cols, axis=1)
    w = np.sqrt(r2)[:, None] ** 2  # area weight per node on a log-radial grid
    rhs = u.values[idx].ravel() - quad
    Gw = G * np.sqrt(w)
    # condition measured after column equilibration, so physical units do
    # not masquerade as degeneracy; genuine collinearity survives scaling
    col_scale = np.linalg.norm(Gw, axis=0)
    Gn = Gw / col_scale
    cond = np.linalg.cond(Gn.T @ Gn)
    if not np.isfinite(cond) or cond > NORMAL_COND_LIMIT:
        raise IllConditioned(f"normal-equations condition number {cond:.3g}")
    coef, *_ = np.linalg.lstsq(Gn, rhs * np.sqrt(w[:, 0]), rcond=None)
    coef = coef / col_scale
    b = np.array([coef[0], coef[1]])
    return b, float(coef[2]), float(coef[3])


def _sqrt_metric(A: Sym2):
    """P = sqrt(I + A^2) and the normalized Hessian A(I+A^2)^{-1}."""
    m = A.as_array()
    evals, vecs = np.linalg.eigh(m)
    p_evals = np.sqrt(1.0 + evals ** 2)
    P = (vecs * p_evals) @ vecs.T
    Ahat = (vecs * (evals / (1.0 + evals ** 2))) @ vecs.T
    return P, Ahat


def d_from_flux(u: fields.ScalarField, A: Sym2, r: float) -> float:
    """Flux-identity value of the log coefficient d at probe radius r.

    Works in normalized coordinates xhat = P x with P = sqrt(I + A^2),
    where the model log term becomes d ln|xhat| and the linearized
    operator is the plain Laplacian: d = (1/2pi) (flux over the circle
    |xhat| = rhat minus tr(Ahat) |B_rhat|); for A = a I this reduces to
    (1/2pi)(flux - 2 a pi r^2) on the circle |x| = r.  The probe radius r
    is stated in original coordinates via rhat = r (det P)^{1/2}.
    """
    g = u.grid
    P, Ahat = _sqrt_metric(A)
    Pinv = np.linalg.inv(P)
    rhat = r * math.sqrt(np.linalg.det(P))

    # pull back circles |xhat| = rhat e^{j h}; radial extent of the ellipse
    p_evals = np.linalg.eigvalsh(P)
    half = 4
    h = g.dt
    t_hats = math.log(rhat) + h * np.arange(-half, half + 1)
    r_lo = math.exp(t_hats[0]) / p_evals[-1]
    r_hi = math.exp(t_hats[-1]) / p_evals[0]
    if r_lo < g.r[2] or r_hi > g.r[-3]:
        raise RadiusOutOfRange(
            f"flux probe at r={r} pulls back to [{r_lo:.3g}, {r_hi:.3g}] outside the grid"
        )
    cphi = np.cos(g.phi)
    sphi = np.sin(g.phi)
    profile = np.empty(t_hats.size)
    for k, th in enumerate(t_hats):
        rr = math.exp(th)
        px = Pinv[0, 0] * rr * cphi + Pinv[0, 1] * rr * sphi
        py = Pinv[1, 0] * rr * cphi + Pinv[1, 1] * rr * sphi
        vals = fields.interp2(u, np.hypot(px, py), np.arctan2(py, px))
        profile[k] = vals.mean()
    wts = _stencils.fd_weights(t_hats, math.log(rhat), 1)[1]
    dmean_dt = float(wts @ profile)
    return dmean_dt - 0.5 * np.trace(Ahat) * rhat ** 2


@dataclass
class HarmonicFit:
    """Mode-by-mode exterior-harmonic decomposition from two probe circles."""

    b: np.ndarray
    d: float
    c: float
    mode1_decay_amplitude: float
    higher_modes: list  # (k, growing_amplitude, decaying_amplitude, growth_flag)

    @property
    def growth_flags(self):
        return [k for k, _, _, flag in self.higher_modes if flag]


def harmonic_fit(u: fields.ScalarField, r1: float, r2: float, k_max: int,
                 harmonic_tol=1e-6, growth_tol=1e-8) -> HarmonicFit:
    """Fit b' x + d ln|x| + c + decaying modes from circle data at r1, r2.

    Mode 0 solves {1, ln r}; mode 1 solves {r, 1/r} giving b and the
    decaying dipole; modes >= 2 report amplitudes of {r^k, r^-k} with a
    growth flag when the growing amplitude contributes beyond growth_tol
    at the outer probe radius.  Raises NotHarmonic when the discrete
    Laplacian exceeds harmonic_tol times the field scale.
    """
    if r1 == r2:
        raise DegenerateRadii("harmonic fit needs two distinct radii")
    r1, r2 = sorted((r1, r2))
    scale = max(1.0, float(np.max(np.abs(u.values))))
    lap = fields.laplacian(u).values[1:-1]
    lap_sup = float(np.max(np.abs(lap)))
    if lap_sup > harmonic_tol * scale:
        raise NotHarmonic(
            f"discrete Laplacian sup {lap_sup:.3g} exceeds {harmonic_tol:g} * scale {scale:.3g}"
        )
    m1 = fields.circle_modes(u, r1, k_max)
    m2 = fields.circle_modes(u, r2, k_max)

    G0 = np.array([[1.0, math.log(r1)], [1.0, math.log(r2)]])
    c0, d = np.linalg.solve(G0, np.array([m1[0].real, m2[0].real]))

    G1 = np.array([[r1, 1.0 / r1], [r2, 1.0 / r2]])
    p, q = np.linalg.solve(G1, np.array([m1[1], m2[1]]))
    b = np.array([2.0 * p.real, -2.0 * p.imag])

    higher = []
    for k in range(2, k_max + 1):
        Gk = np.array([[r1 ** k, r1 ** (-k)], [r2 ** k, r2 ** (-k)]])
        pk, qk = np.linalg.solve(Gk, np.array([m1[k], m2[k]]))
        grow = 2.0 * abs(pk)
        decay = 2.0 * abs(qk)
        flag = grow * r2 ** k > growth_tol * scale
        higher.append((k, float(grow), float(decay), bool(flag)))
    return HarmonicFit(b, float(d), float(c0), 2.0 * abs(q), higher)


def loglog_fit(radii, values) -> DecayFit:
    """Regress ln(values) on {1, ln r, ln ln r}.

    slope is the ln r coefficient, log_power the ln ln r coefficient;
    fit_residual is the RMS misfit in log-log coordinates.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.size < 5:
        raise WindowTooSmall("need at least 5 radii for a decay fit")
    if radii.max() / radii.min() < 10.0:
        raise WindowTooSmall("decay window must span at least one decade")
    if radii.min() <= math.e:
        raise WindowTooSmall("decay radii must exceed e for the ln ln r basis")
    if np.any(values <= 0.0):
        raise ValueError("decay fit needs strictly positive magnitudes")
    t = np.log(radii)
    G = np.stack([np.ones_like(t), t, np.log(t)], axis=1)
    coef, *_ = np.linalg.lstsq(G, np.log(values), rcond=None)
    resid = np.log(values) - G @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return DecayFit(float(coef[1]), float(coef[2]), (float(radii.min()), float(radii.max())), rms)


def sup_on_circles(w: fields.ScalarField, radii):
    """Sup of |w| over each probe circle (radially interpolated)."""
    out = np.empty(len(radii))
    for k, r in enumerate(radii):
        out[k] = float(np.max(np.abs(fields.values_on_circle(w, r))))
    return out


def estimate_decay(w: fields.ScalarField, radii) -> DecayFit:
    """DecayFit of the sup-over-circle profile of |w| on the given radii."""
    radii = np.asarray(radii, dtype=float)
    for r in radii:
        if not (w.grid.r_min <= r <= w.grid.r_max):
            raise RadiusOutOfRange(f"decay radius {r} outside the grid annulus")
    return loglog_fit(radii, sup_on_circles(w, radii))
