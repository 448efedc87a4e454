"""Exception types shared across the toolkit."""


class ExlagError(Exception):
    """Base class for all toolkit errors."""


class SingularRotation(ExlagError):
    """The Lewy rotation matrix is singular at the requested input."""


class GridTooSmall(ExlagError):
    """The grid has too few nodes for the requested stencil."""


class RadiusOutOfRange(ExlagError):
    """A probe radius falls outside the usable part of the grid annulus."""


class TooManyModes(ExlagError):
    """More angular Fourier modes requested than the grid resolves."""


class OutOfDomain(ExlagError):
    """A sample point falls outside the grid annulus."""


class ShapeMismatch(ExlagError):
    """Field shapes or grids do not match."""


class LinearSolveFailure(ExlagError):
    """The sparse linear solve inside Newton failed or returned non-finite values."""


class PhaseOutOfRange(ExlagError):
    """The tangent argument left the principal branch during radial integration."""


class DegeneratePhase(ExlagError):
    """theta + f leaves (0, pi) somewhere on the grid."""


class WindowTooSmall(ExlagError):
    """A fit window contains too few radii or spans less than required."""


class IllConditioned(ExlagError):
    """The least-squares system for the expansion fit is numerically degenerate."""


class NotHarmonic(ExlagError):
    """The field fails the discrete-Laplacian harmonicity check."""


class DegenerateRadii(ExlagError):
    """The two probe radii of a harmonic fit coincide."""


class DomainTooSmall(ExlagError):
    """The grid annulus overlaps the smoothing region of an oracle family."""


class TailModelMissing(ExlagError):
    """The quadrature truncation radius is insufficient for the requested tolerance."""


class ConfigError(ExlagError):
    """A configuration file is missing keys or holds invalid values."""
