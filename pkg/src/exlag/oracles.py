"""Closed-form solution families with known far-field behavior.

Four families over the quadratic (tan(theta/2)/2)|x|^2:

  u0: log term plus a pure power remainder |x|^(2-beta), beta > 2; the
      right-hand side decays like |x|^-beta.
  u1: log term plus (x1+x2) ln|x| / |x|^2; right-hand side O(|x|^-3) while
      the remainder keeps the logarithmic factor (beta = 3 borderline).
  u2: plus (x1+x2) ln|x|; right-hand side O(|x|^-1) with a remainder that
      grows like |x| ln|x| (beta = 1 slow decay).
  u3: radial profile driven by f = |x|^-beta for beta in (0, 2]; no closed
      form, manufactured by the radial ODE with the initial slope shot so
      that the far field carries no spurious log/constant terms.

Every family reports its true expansion and the claimed remainder rate.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import fields, solver
from .asymptotics import Expansion
from .errors import DomainTooSmall
from .phase import Sym2, phase_arrays

FAMILIES = ("u0", "u1", "u2", "u3")


@dataclass(frozen=True)
class OracleSpec:
    """Parameters of one oracle family instance.

    d and c are the log and constant coefficients where the family admits
    them; tail_amplitude scales the remainder construction (0 drops it,
    leaving the pure expansion model).  The closed forms are only valid
    outside the smoothing radius, so grids must start beyond it.
    """

    family: str
    theta: float
    beta: float
    d: float = 0.0
    c: float = 0.0
    tail_amplitude: float = 1.0
    smoothing_radius: float = 2.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}, expected one of {FAMILIES}")
        if not 0.0 < self.theta < math.pi:
            raise ValueError("theta must lie in (0, pi)")
        if self.family == "u0" and self.beta <= 2.0:
            raise ValueError("family u0 requires beta > 2")
        if self.family == "u1" and self.beta != 3.0:
            raise ValueError("family u1 fixes beta = 3")
        if self.family == "u2" and self.beta != 1.0:
            raise ValueError("family u2 fixes beta = 1")
        if self.family == "u3" and not 0.0 < self.beta <= 2.0:
            raise ValueError("family u3 requires beta in (0, 2]")

    @property
    def a_star(self):
        return math.tan(self.theta / 2.0)

    @property
    def log_offset(self):
        """Constant absorbed by writing d ln|x| as (d/2) ln(x'(I+A^2)x)."""
        return 0.5 * self.d * math.log(self.a_star ** 2 + 1.0)


def claimed_remainder(family, beta):
    """(sigma, mu, slow) claimed for u - model: remainder ~ |x|^-sigma (ln|x|)^mu."""
    if family in ("u0", "u1"):
        sigma = min(1.0, beta - 2.0)
        mu = 1 if beta == 3.0 else 0
        return sigma, mu, False
    if family == "u2":
        return beta - 2.0, 1, True
    # u3, slow decay: |x|^{2-beta} with (ln)^[beta] resp. (ln)^2 at beta=2
    if beta == 2.0:
        return 0.0, 2, True
    mu = int(beta) if beta <= 1.0 else 2 * (int(beta) - 1)
    return beta - 2.0, mu, True


@dataclass(eq=False)
class OracleFields:
    """Sampled solution, right-hand side, and ground-truth expansion."""

    u: fields.ScalarField
    f: fields.ScalarField
    truth: Expansion
    slow_decay: bool
    radial_profile: solver.RadialProfile | None = None


def _radial_closed_form(spec: OracleSpec, rr):
    """(u, lam_radial, lam_tangential) for the radial families u0 and pure model."""
    a, d = spec.a_star, spec.d
    beta, amp = spec.beta, spec.tail_amplitude
    base = 0.5 * a * rr ** 2 + d * np.log(rr) + spec.log_offset + spec.c
    lam_rad = a - d / rr ** 2
    lam_tan = a + d / rr ** 2
    if amp != 0.0:
        base = base + amp * rr ** (2.0 - beta)
        lam_rad = lam_rad + amp * (2.0 - beta) * (1.0 - beta) * rr ** (-beta)
        lam_tan = lam_tan + amp * (2.0 - beta) * rr ** (-beta)
    return base, lam_rad, lam_tan


def _g1_hessian(x, y):
    """Analytic Hessian entries of (x1+x2) ln r / r^2."""
    r2 = x * x + y * y
    r = np.sqrt(r2)
    lnr = np.log(r)
    p = lnr / r2                       # radial profile
    dp = (1.0 - 2.0 * lnr) / (r2 * r)  # p'
    ddp = (6.0 * lnr - 5.0) / (r2 * r2)  # p''
    s = x + y
    h11 = dp * (x + x) / r + s * (ddp * x * x / r2 + dp * (1.0 / r - x * x / (r2 * r)))
    h22 = dp * (y + y) / r + s * (ddp * y * y / r2 + dp * (1.0 / r - y * y / (r2 * r)))
    h12 = dp * (x + y) / r + s * (ddp * x * y / r2 - dp * x * y / (r2 * r))
    return h11, h12, h22


def _g2_hessian(x, y):
    """Analytic Hessian entries of (x1+x2) ln r."""
    r2 = x * x + y * y
    s = x + y
    h11 = 2.0 * x / r2 + s * (1.0 / r2 - 2.0 * x * x / r2 ** 2)
    h22 = 2.0 * y / r2 + s * (1.0 / r2 - 2.0 * y * y / r2 ** 2)
    h12 = (x + y) / r2 - 2.0 * s * x * y / r2 ** 2
    return h11, h12, h22


def _log_hessian(x, y):
    r2 = x * x + y * y
    return (1.0 / r2 - 2.0 * x * x / r2 ** 2,
            -2.0 * x * y / r2 ** 2,
            1.0 / r2 - 2.0 * y * y / r2 ** 2)


def shoot_radial_family(theta, beta, r0, r_max, fit_radii=None, max_iter=8):
    """Radial profile for f = r^-beta with clean far-field normalization.

    The initial slope is adjusted by a secant iteration until the log
    coefficient of the far field vanishes, and the additive constant is
    removed afterwards; plain slope matching at r0 leaves C ln r + c
    contamination that dominates the remainder at moderate radii.
    Returns (profile, u_offset) so that u3 = profile.u - u_offset.
    """
    a = math.tan(theta / 2.0)
    if fit_radii is None:
        fit_radii = np.geomspace(0.05 * r_max, 0.8 * r_max, 48)
    f = lambda r: r ** (-beta)
    shape = (np.log(fit_radii) ** 2) if beta == 2.0 else fit_radii ** (2.0 - beta)
    basis = np.stack([shape, np.log(fit_radii), np.ones_like(fit_radii)], axis=1)

    def log_coef(slope0):
        prof = solver.radial_solve(theta, f, r0, slope0, r_max)
        rem = prof.u(fit_radii) - 0.5 * a * fit_radii ** 2
        coef, *_ = np.linalg.lstsq(basis, rem, rcond=None)
        return prof, coef

    s0 = a * r0
    s1 = s0 * (1.0 + 1e-2) + 1e-2
    prof0, coef0 = log_coef(s0)
    prof1, coef1 = log_coef(s1)
    scale = max(1.0, abs(coef0[0]))
    for _ in range(max_iter):
        if abs(coef1[1]) < 1e-9 * scale:
            break
        ds = coef1[1] * (s1 - s0) / (coef1[1] - coef0[1])
        s0, coef0 = s1, coef1
        s1 = s1 - ds
        prof1, coef1 = log_coef(s1)
    return prof1, float(coef1[2])


def oracle_field(spec: OracleSpec, grid: fields.PolarGrid) -> OracleFields:
    """Sample the family solution, its analytic right-hand side, and the truth.

    f comes from analytic Hessians (radial eigenvalue pair for u0/u3,
    structured closed forms for u1/u2), never from finite differences.
    """
    if grid.r_min <= spec.smoothing_radius:
        raise DomainTooSmall(
            f"grid r_min {grid.r_min} must exceed the smoothing radius "
            f"{spec.smoothing_radius}"
        )
    a = spec.a_star
    sigma, mu, slow = claimed_remainder(spec.family, spec.beta)
    x, y = grid.mesh_xy()
    rr = np.hypot(x, y)
    A = Sym2(a, 0.0, a)
    profile = None

    if spec.family == "u0":
        # the log-offset constant makes d ln|x| match the canonical
        # (d/2) ln(x'(I+A^2)x) form, so the canonical constant is spec.c
        uvals, lam_rad, lam_tan = _radial_closed_form(spec, rr)
        fvals = np.arctan(lam_rad) + np.arctan(lam_tan) - spec.theta
        truth = Expansion(A, np.zeros(2), spec.c, spec.d, sigma, mu)
    elif spec.family in ("u1", "u2"):
        amp = spec.tail_amplitude
        if spec.family == "u1":
            g = amp * (x + y) * np.log(rr) / rr ** 2
            gh = _g1_hessian(x, y)
            d_term = spec.d
        else:
            g = amp * (x + y) * np.log(rr)
            gh = _g2_hessian(x, y)
            d_term = 0.0
        lh = _log_hessian(x, y)
        h11 = a + d_term * lh[0] + amp * gh[0]
        h12 = d_term * lh[1] + amp * gh[1]
        h22 = a + d_term * lh[2] + amp * gh[2]
        uvals = (0.5 * a * rr ** 2 + d_term * np.log(rr)
                 + (spec.log_offset if spec.family == "u1" else 0.0)
                 + (spec.c if spec.family == "u1" else 0.0) + g)
        fvals = phase_arrays(h11, h12, h22) - spec.theta
        if spec.family == "u1":
            truth = Expansion(A, np.zeros(2), spec.c, spec.d, sigma, mu)
        else:
            truth = Expansion(A, np.zeros(2), 0.0, 0.0, sigma, mu)
    else:  # u3 via the radial ODE
        profile, offset = shoot_radial_family(spec.theta, spec.beta, grid.r_min, grid.r_max)
        radial_u = profile.u(grid.r) - offset
        uvals = np.repeat(radial_u[:, None], grid.n_phi, axis=1)
        fvals = rr ** (-spec.beta)
        truth = Expansion(A, np.zeros(2), 0.0, 0.0, sigma, mu)

    return OracleFields(
        u=fields.ScalarField(grid, uvals),
        f=fields.ScalarField(grid, fvals),
        truth=truth,
        slow_decay=slow,
        radial_profile=profile,
    )


def truth_expansion(spec: OracleSpec) -> Expansion:
    """Ground-truth expansion of the family without sampling anything."""
    sigma, mu, _ = claimed_remainder(spec.family, spec.beta)
    A = Sym2(spec.a_star, 0.0, spec.a_star)
    if spec.family in ("u0", "u1"):
        return Expansion(A, np.zeros(2), spec.c, spec.d, sigma, mu)
    return Expansion(A, np.zeros(2), 0.0, 0.0, sigma, mu)


def model_part(spec: OracleSpec, grid: fields.PolarGrid) -> fields.ScalarField:
    """The expansion part of the family (remainder dropped)."""
    from .asymptotics import expansion_field

    return expansion_field(truth_expansion(spec), grid)
