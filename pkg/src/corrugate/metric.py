"""Target metrics g(u) du^2 on [0, 1], shortness and the twist amplitude.

The twist amplitude is the pointwise slack ``r = sqrt(g - |f0'|^2)``: adding a
normal vector of that length to ``f0'`` raises the induced metric to exactly
``g``.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline

from .errors import AmplitudeDegenerate, ConfigError, NotShortAt, OutOfDomain

DEFAULT_SHORTNESS_GRID = 4096
DEFAULT_FD_STEP = 1e-5
DEFAULT_R_MIN = 1e-10
NOT_SHORT_TOL = 1e-12
_GMIN_GRID = 4097


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A positive function ``g`` on [0, 1]; ``g_min`` is a lower bound checked at construction."""

    kind: str
    params: dict
    g_min: float
    _impl: object = field(repr=False, default=None)

    def __call__(self, u):
        return self._impl(np.asarray(u, dtype=float))

    def describe(self):
        return {"kind": self.kind, "params": self.params, "g_min": self.g_min}

    @classmethod
    def constant(cls, value):
        value = float(value)
        if not value > 0:
            raise ConfigError(f"metric must be positive, got constant {value}")
        return cls("constant", {"value": value}, value,
                   lambda u: np.full(np.shape(u), value))

    @classmethod
    def polynomial(cls, coeffs):
        """``g(u) = c0 + c1 u + c2 u^2 + ...``"""
        c = np.array([float(x) for x in coeffs])
        if c.size == 0:
            raise ConfigError("polynomial metric needs at least one coefficient")
        impl = lambda u: P.polyval(u, c)
        return cls("polynomial", {"coeffs": c.tolist()}, _lower_bound(impl), impl)

    @classmethod
    def tabulated(cls, u, g):
        u = np.asarray(u, dtype=float)
        g = np.asarray(g, dtype=float)
        if u.ndim != 1 or g.shape != u.shape or u.size < 4 or np.any(np.diff(u) <= 0):
            raise ConfigError("tabulated metric needs >= 4 strictly increasing nodes")
        if u[0] > 0.0 or u[-1] < 1.0:
            raise ConfigError("tabulated metric nodes must cover [0, 1]")
        spline = CubicSpline(u, g, bc_type="natural")
        impl = lambda s: spline(s)
        return cls("tabulated", {"nodes": int(u.size)}, _lower_bound(impl), impl)


def _lower_bound(impl):
    g = impl(np.linspace(0.0, 1.0, _GMIN_GRID))
    g_min = float(np.min(g))
    if not g_min > 0:
        raise ConfigError(f"metric must be positive on [0, 1]; minimum found {g_min:g}")
    return g_min


@dataclass(frozen=True)
class ShortnessReport:
    min_margin: float
    argmin_u: float
    is_strictly_short: bool
    grid_size: int


def shortness_report(curve, metric, grid=DEFAULT_SHORTNESS_GRID):
    """Evaluate ``sqrt(g) - |f0'|`` on a uniform grid of ``grid`` nodes.

    A curve that is not short is reported, never raised.
    """
    if grid < 2:
        raise ConfigError("shortness grid needs at least 2 nodes")
    u = np.linspace(0.0, 1.0, grid)
    speed = curve.speed(u)
    margin = np.sqrt(metric(u)) - speed
    i = int(np.argmin(margin))
    short = bool(margin[i] > 0 and np.all(speed > 0))
    return ShortnessReport(float(margin[i]), float(u[i]), short, int(grid))


def residual_amplitude(curve, metric, u):
    """``r(u) = sqrt(g(u) - |f0'(u)|^2)``, vectorized over ``u``.

    Raises :class:`NotShortAt` where ``g`` falls below the squared speed by
    more than 1e-12; smaller deficits are clamped to ``r = 0``.
    """
    u = np.asarray(u, dtype=float)
    deficit = metric(u) - curve.speed_squared(u)
    bad = deficit < -NOT_SHORT_TOL
    if np.any(bad):
        i = np.argmax(bad) if np.ndim(bad) else ()
        raise NotShortAt(np.asarray(u)[i] if np.ndim(u) else u,
                         np.asarray(deficit)[i] if np.ndim(deficit) else deficit)
    return np.sqrt(np.maximum(deficit, 0.0))


def amplitude_field(curve, metric, frames, u):
    """``r(u) Z(u)`` with frames taken from ``frames.at``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    _, _, Z = frames.at(u)
    return residual_amplitude(curve, metric, u)[:, None] * Z


def amplitude_field_derivative(curve, metric, frames, u, step=DEFAULT_FD_STEP,
                               r_min=DEFAULT_R_MIN):
    """Derivative of ``u -> r(u) Z(u)`` by Richardson-extrapolated central differences.

    Uses steps ``h`` and ``h/2`` and returns ``(4 D(h/2) - D(h)) / 3``. Near
    the ends of [0, 1] the step is shrunk to half the distance to the
    boundary so that every stencil point stays inside the domain. Where
    ``r <= r_min`` the derivative is refused (:class:`AmplitudeDegenerate`)
    unless ``r`` vanishes on the whole stencil, in which case it is zero.

    Returns an array of shape ``(m, 3)`` for ``m`` parameters (``(3,)`` for a
    scalar ``u``).
    """
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise OutOfDomain("amplitude derivative needs parameters strictly inside (0, 1)")
    h = np.minimum(step, 0.5 * np.minimum(u, 1.0 - u))
    offsets = np.array([-1.0, -0.5, 0.5, 1.0])
    pts = (u[:, None] + offsets[None, :] * h[:, None]).ravel()
    r = residual_amplitude(curve, metric, u)
    low = r <= r_min
    if np.any(low):
        # r identically zero on the stencil has derivative exactly zero
        flat = residual_amplitude(curve, metric, pts).reshape(u.size, 4).max(axis=1) == 0.0
        bad = low & ~(flat & (r == 0.0))
        if np.any(bad):
            i = int(np.argmax(bad))
            raise AmplitudeDegenerate(
                f"amplitude r={r[i]:.3e} <= {r_min:g} at u={u[i]:.17g}; "
                "derivative ill-conditioned")
    F = amplitude_field(curve, metric, frames, pts).reshape(u.size, 4, 3)
    d_full = (F[:, 3] - F[:, 0]) / (2.0 * h[:, None])
    d_half = (F[:, 2] - F[:, 1]) / h[:, None]
    out = (4.0 * d_half - d_full) / 3.0
    return out[0] if scalar else out
