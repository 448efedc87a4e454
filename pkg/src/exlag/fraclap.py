"""Fractional Laplacian and Riesz potential by singular-kernel quadrature.

The fractional Laplacian uses the symmetrized second-difference kernel
inside the unit ball (removes the principal value exactly for C^2
functions) and the raw difference outside, on log-radial rings around the
evaluation point.  Rings whose radius is comparable to the distance from
the evaluation point to the feature region get proportionally more angular
nodes, since structure near the origin subtends a small angle from far
away.  Truncation beyond quad_r_max is closed analytically from a caller
supplied tail model.

Functions are plain callables fn(x, y) -> array on coordinate arrays.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma

from .errors import TailModelMissing


def normalization_constant(s):
    """c_{2,s} of the principal-value definition in two dimensions."""
    return 4.0 ** s * s * gamma(1.0 + s) / (math.pi * gamma(1.0 - s))


def riesz_constant(s):
    """c_{2,-s} of the Riesz potential kernel in two dimensions."""
    return gamma(1.0 - s) / (4.0 ** s * math.pi * gamma(s))


@dataclass(frozen=True)
class PowerTail:
    """Radial far-field model coef * |y|^{-sigma} used to close quadratures."""

    coef: float
    sigma: float


@dataclass(frozen=True)
class FracParams:
    """Order s plus quadrature controls.

    c_ns is the two-dimensional normalization constant (derived from s
    unless overridden); quad_r_max truncates the numeric quadrature and
    quad_tol is the target accuracy that truncation estimates are checked
    against.
    """

    s: float
    quad_r_max: float = 1e4
    quad_tol: float = 1e-6
    c_ns: float | None = None
    inner_cutoff: float = 1e-5
    nodes_per_decade: int = 48
    base_angles: int = 64
    max_angles: int = 2048

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError("s must lie in (0, 1)")
        if self.quad_r_max <= 1.0:
            raise ValueError("quad_r_max must exceed the unit split radius")
        if self.c_ns is None:
            object.__setattr__(self, "c_ns", normalization_constant(self.s))

    @property
    def c_riesz(self):
        return riesz_constant(self.s)


def _ring_radii(rho_min, rho_max, nodes_per_decade):
    n = max(8, int(math.ceil(nodes_per_decade * math.log10(rho_max / rho_min))) + 1)
    t = np.linspace(math.log(rho_min), math.log(rho_max), n)
    wt = np.full(n, t[1] - t[0])
    wt[0] *= 0.5
    wt[-1] *= 0.5
    return np.exp(t), wt


def _ring_sum(x, rho, wt, p, integrand, mask_origin_disc=None, boost_window=None):
    """Sum integrand over polar rings around x; integrand(px, py, rho_col).

    mask_origin_disc zeroes the integrand inside an origin-centered disc
    (that region is covered by a separate origin chart); rings crossing
    the seam get boost_window extra angular nodes to keep the jump error
    small.
    """
    total = 0.0
    x = np.asarray(x, dtype=float)
    counts = np.full(rho.size, p.base_angles)
    if boost_window is not None:
        lo, hi, factor = boost_window
        boosted = (rho >= lo) & (rho <= hi)
        counts[boosted] = min(p.max_angles, p.base_angles * factor)
    for n in np.unique(counts):
        sel = counts == n
        phi = 2.0 * math.pi * np.arange(n) / n
        dphi = 2.0 * math.pi / n
        rho_s = rho[sel][:, None]
        zx = rho_s * np.cos(phi)[None, :]
        zy = rho_s * np.sin(phi)[None, :]
        px = x[0] + zx
        py = x[1] + zy
        vals = integrand(px, py, rho_s, zx, zy)
        if mask_origin_disc is not None:
            vals = np.where(px * px + py * py < mask_origin_disc ** 2, 0.0, vals)
        total += float(np.sum(vals * (rho_s ** 2 * wt[sel][:, None]) * dphi))
    return total


def _origin_chart_sum(x, r_split, p, feature_scale, numerator, kernel_pow):
    """Integral of numerator(y) / |x-y|^kernel_pow over the disc |y| < r_split.

    Log-radial polar rings centered at the origin resolve the feature
    region properly when the evaluation point is far away.
    """
    x = np.asarray(x, dtype=float)
    rho, wt = _ring_radii(1e-3 * feature_scale, r_split, p.nodes_per_decade)
    phi = 2.0 * math.pi * np.arange(p.base_angles) / p.base_angles
    dphi = 2.0 * math.pi / p.base_angles
    total = 0.0
    for i in range(0, rho.size, 64):
        rho_s = rho[i:i + 64][:, None]
        wt_s = wt[i:i + 64][:, None]
        yx = rho_s * np.cos(phi)[None, :]
        yy = rho_s * np.sin(phi)[None, :]
        dist = np.hypot(x[0] - yx, x[1] - yy)
        vals = numerator(yx, yy) * dist ** (-kernel_pow)
        total += float(np.sum(vals * rho_s ** 2 * wt_s) * dphi)
    return total


def _far_mode(x_norm, feature_scale):
    """Use a separate origin chart once the feature region subtends a small angle.

    The lower bound 4 keeps the masked disc clear of the symmetrized unit
    ball around the evaluation point.
    """
    return x_norm > max(8.0 * feature_scale, 4.0)


def _tail_mean_power(x_norm, sigma, r_q, kernel_pow):
    """Angular-averaged integral of |y|^-sigma |z|^-kernel_pow over |z| > r_q.

    Includes the first even correction in (|x|/|z|)^2; the odd term
    averages out over the circle.
    """
    a0 = sigma + kernel_pow - 2.0
    if a0 <= 0.0:
        raise TailModelMissing(
            f"tail power sigma={sigma} too weak for kernel exponent {kernel_pow}"
        )
    lead = 2.0 * math.pi * r_q ** (-a0) / a0
    corr = 2.0 * math.pi * (sigma ** 2 / 4.0) * x_norm ** 2 * r_q ** (-a0 - 2.0) / (a0 + 2.0)
    return lead + corr


def _check_tail_budget(mag, x_norm, r_q, p: FracParams, what):
    """Estimate the uncontrolled truncation remainder and enforce quad_tol."""
    if mag > p.quad_tol:
        raise TailModelMissing(
            f"{what} truncation estimate {mag:.3g} exceeds quad_tol {p.quad_tol:g}; "
            "raise quad_r_max or supply a tail model"
        )


def frac_laplacian(u, x, p: FracParams, tail=None, feature_scale=1.0):
    """(-Delta)^s u at the point x for a globally defined callable u.

    Splits the principal-value integral at |z| = 1: the inner part uses
    the symmetrized difference u(x) - (u(x+z)+u(x-z))/2, the outer the raw
    difference, both on log-radial rings; beyond quad_r_max the integral
    closes analytically from `tail` (PowerTail or None for a negligible
    far field).
    """
    x = np.asarray(x, dtype=float)
    x_norm = float(np.hypot(x[0], x[1]))
    ux = float(u(np.array([x[0]]), np.array([x[1]]))[0])
    kernel_pow = 2.0 + 2.0 * p.s

    far = _far_mode(x_norm, feature_scale)
    mask_radius = 0.5 * x_norm if far else None

    rho_in, wt_in = _ring_radii(p.inner_cutoff * feature_scale, 1.0, p.nodes_per_decade)

    def inner(px, py, rho_s, zx, zy):
        sym = ux - 0.5 * (u(px, py) + u(2.0 * x[0] - px, 2.0 * x[1] - py))
        return sym * rho_s ** (-kernel_pow)

    # the symmetrized inner ball never reaches the origin disc in far mode
    total = _ring_sum(x, rho_in, wt_in, p, inner)

    rho_out, wt_out = _ring_radii(1.0, p.quad_r_max, p.nodes_per_decade)

    def outer(px, py, rho_s, zx, zy):
        return (ux - u(px, py)) * rho_s ** (-kernel_pow)

    boost = (0.4 * x_norm, 1.7 * x_norm, 8) if far else None
    total += _ring_sum(x, rho_out, wt_out, p, outer,
                       mask_origin_disc=mask_radius, boost_window=boost)
    if far:
        total += _origin_chart_sum(
            x, mask_radius, p, feature_scale,
            lambda yx, yy: ux - u(yx, yy), kernel_pow,
        )

    # analytic closure beyond the truncation radius
    total += ux * 2.0 * math.pi * p.quad_r_max ** (-2.0 * p.s) / (2.0 * p.s)
    if tail is None:
        probe = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
        umax = float(np.max(np.abs(u(x[0] + p.quad_r_max * np.cos(probe),
                                     x[1] + p.quad_r_max * np.sin(probe)))))
        est = umax * 2.0 * math.pi * p.quad_r_max ** (-2.0 * p.s) / (2.0 * p.s)
        _check_tail_budget(est * p.c_ns, x_norm, p.quad_r_max, p, "zero-tail")
    else:
        total -= tail.coef * _tail_mean_power(x_norm, tail.sigma, p.quad_r_max, kernel_pow)
    return p.c_ns * total


def riesz_potential(f, x, p: FracParams, support_radius=None, tail=None):
    """(-Delta)^{-s} f at x: integral of f(y) / |x-y|^{2-2s}.

    For compactly supported f pass support_radius; the quadrature then
    covers the origin-centered support disc (with an around-x chart when x
    overlaps the support, since the kernel is weakly singular there).  For
    decaying f pass a PowerTail with sigma > 2s instead.
    """
    x = np.asarray(x, dtype=float)
    x_norm = float(np.hypot(x[0], x[1]))
    kernel_pow = 2.0 - 2.0 * p.s

    if support_radius is not None and x_norm > 2.0 * support_radius:
        # smooth kernel over the support: origin-centered polar quadrature
        n_r = max(48, 4 * p.nodes_per_decade)
        n_a = p.base_angles * 2
        rr = np.linspace(0.0, support_radius, n_r + 1)[1:]
        dr = support_radius / n_r
        phi = 2.0 * math.pi * np.arange(n_a) / n_a
        dphi = 2.0 * math.pi / n_a
        yx = rr[:, None] * np.cos(phi)[None, :]
        yy = rr[:, None] * np.sin(phi)[None, :]
        dist = np.hypot(x[0] - yx, x[1] - yy)
        total = float(np.sum(f(yx, yy) * dist ** (-kernel_pow) * rr[:, None]) * dr * dphi)
        return p.c_riesz * total

    # around-x chart: weakly singular kernel handled by log-radial rings
    if support_radius is not None:
        rho_max = x_norm + 2.0 * support_radius
        scale = support_radius
    else:
        rho_max = p.quad_r_max
        scale = 1.0
    rho, wt = _ring_radii(p.inner_cutoff * scale, rho_max, p.nodes_per_decade)

    def integrand(px, py, rho_s, zx, zy):
        return f(px, py) * rho_s ** (-kernel_pow)

    total = _ring_sum(x, rho, wt, p, integrand)
    if support_radius is None:
        if tail is None:
            raise TailModelMissing("riesz_potential of non-compact f needs a tail model")
        if tail.sigma <= 2.0 * p.s:
            raise TailModelMissing("riesz tail needs sigma > 2s to converge")
        total += tail.coef * _tail_mean_power(x_norm, tail.sigma, rho_max, kernel_pow)
    return p.c_riesz * total


def cross_term(u1, u2, x, p: FracParams, tails=(None, None), feature_scale=1.0):
    """Integral of (u1(x)-u1(y))(u2(x)-u2(y)) / |x-y|^{2+2s} over the plane.

    The integrand is absolutely integrable (no principal value); the far
    field closes from the product of the two difference tails.
    """
    x = np.asarray(x, dtype=float)
    x_norm = float(np.hypot(x[0], x[1]))
    u1x = float(u1(np.array([x[0]]), np.array([x[1]]))[0])
    u2x = float(u2(np.array([x[0]]), np.array([x[1]]))[0])
    kernel_pow = 2.0 + 2.0 * p.s
    far = _far_mode(x_norm, feature_scale)
    mask_radius = 0.5 * x_norm if far else None

    rho, wt = _ring_radii(p.inner_cutoff * feature_scale, p.quad_r_max, p.nodes_per_decade)

    def integrand(px, py, rho_s, zx, zy):
        return (u1x - u1(px, py)) * (u2x - u2(px, py)) * rho_s ** (-kernel_pow)

    boost = (0.4 * x_norm, 1.7 * x_norm, 8) if far else None
    total = _ring_sum(x, rho, wt, p, integrand,
                      mask_origin_disc=mask_radius, boost_window=boost)
    if far:
        total += _origin_chart_sum(
            x, mask_radius, p, feature_scale,
            lambda yx, yy: (u1x - u1(yx, yy)) * (u2x - u2(yx, yy)), kernel_pow,
        )

    # tail: (u1x - t1)(u2x - t2) expanded into power-law pieces
    r_q = p.quad_r_max
    total += u1x * u2x * 2.0 * math.pi * r_q ** (-2.0 * p.s) / (2.0 * p.s)
    t1, t2 = tails
    if t1 is not None:
        total -= u2x * t1.coef * _tail_mean_power(x_norm, t1.sigma, r_q, kernel_pow)
    if t2 is not None:
        total -= u1x * t2.coef * _tail_mean_power(x_norm, t2.sigma, r_q, kernel_pow)
    if t1 is not None and t2 is not None:
        total += t1.coef * t2.coef * _tail_mean_power(
            x_norm, t1.sigma + t2.sigma, r_q, kernel_pow
        )
    return total


def _jitter_params(p: FracParams, bump):
    """Same accuracy class, different node sets, so identity terms cannot
    cancel by sharing quadrature error."""
    return FracParams(
        s=p.s, quad_r_max=p.quad_r_max * (1.0 + 0.13 * bump), quad_tol=p.quad_tol,
        inner_cutoff=p.inner_cutoff, nodes_per_decade=p.nodes_per_decade + 5 * bump,
        base_angles=p.base_angles + 8 * bump, max_angles=p.max_angles,
    )


def product_rule_defect(u1, u2, x, p: FracParams, tails=(None, None),
                        feature_scale=1.0, decorrelate=True):
    """Defect of the fractional product rule at x; zero up to quadrature error.

    Computes (-D)^s(u1 u2) - u1 (-D)^s u2 - u2 (-D)^s u1 + c I12 with the
    four terms on deliberately different quadrature node sets (see
    decorrelate), so the result measures genuine quadrature error instead
    of cancelling algebraically.
    """
    x = np.asarray(x, dtype=float)
    u1x = float(u1(np.array([x[0]]), np.array([x[1]]))[0])
    u2x = float(u2(np.array([x[0]]), np.array([x[1]]))[0])
    t1, t2 = tails
    params = [_jitter_params(p, k) for k in (0, 1, 2, 3)] if decorrelate else [p] * 4

    def prod(px, py):
        return u1(px, py) * u2(px, py)

    tail_prod = None
    if t1 is not None and t2 is not None:
        tail_prod = PowerTail(t1.coef * t2.coef, t1.sigma + t2.sigma)
    lhs = frac_laplacian(prod, x, params[0], tail=tail_prod, feature_scale=feature_scale)
    term1 = u1x * frac_laplacian(u2, x, params[1], tail=t2, feature_scale=feature_scale)
    term2 = u2x * frac_laplacian(u1, x, params[2], tail=t1, feature_scale=feature_scale)
    cross = cross_term(u1, u2, x, params[3], tails=tails, feature_scale=feature_scale)
    return lhs - term1 - term2 + p.c_ns * cross


def radial_interpolant(r_nodes, values, tail: PowerTail | None = None):
    """Callable (x, y) -> value from a radial profile with a power-law tail.

    Cubic spline in log radius inside the sampled range; the tail model
    continues beyond it and small radii clamp to the innermost sample.
    Useful when one nonlocal operator must consume the (profile-only)
    output of another, e.g. the inversion check.
    """
    r_nodes = np.asarray(r_nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    spline = CubicSpline(np.log(r_nodes), values)
    r_lo, r_hi = r_nodes[0], r_nodes[-1]
    v_lo = values[0]

    def fn(x, y):
        rr = np.hypot(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        rr = np.atleast_1d(rr)
        out = np.empty_like(rr)
        low = rr <= r_lo
        high = rr >= r_hi
        mid = ~(low | high)
        out[low] = v_lo
        out[mid] = spline(np.log(rr[mid]))
        if tail is None:
            out[high] = 0.0
        else:
            out[high] = tail.coef * rr[high] ** (-tail.sigma)
        return out

    return fn


def commutator_defect(u, k, x, p: FracParams, du=None, fd_step=1e-3, feature_scale=1.0):
    """(-D)^s(d_k u)(x) minus a central difference of y -> (-D)^s u(y).

    du supplies the analytic partial derivative; by default it is formed
    from central differences of u with a step tied to the quadrature
    tolerance.  Intended for smooth rapidly decaying test functions, so
    tails are taken as negligible.
    """
    x = np.asarray(x, dtype=float)
    if du is None:
        h = 1e-6 * feature_scale

        def du(px, py, _h=h):
            if k == 0:
                return (u(px + _h, py) - u(px - _h, py)) / (2.0 * _h)
            return (u(px, py + _h) - u(px, py - _h)) / (2.0 * _h)

    lhs = frac_laplacian(du, x, p, feature_scale=feature_scale)
    e = np.zeros(2)
    e[k] = fd_step
    plus = frac_laplacian(u, x + e, p, feature_scale=feature_scale)
    minus = frac_laplacian(u, x - e, p, feature_scale=feature_scale)
    return lhs - (plus - minus) / (2.0 * fd_step)
