"""The Gaussian limit of the scaled difference process, as an exact oracle.

The limit

    L(t) = int_0^t r Z dW - int_0^t int_0^s (r Z)'(u) dW(u) ds

is rewritten (stochastic Fubini) with the deterministic kernel

    K(t, u) = r(u) Z(u) - (t - u) (r Z)'(u),      0 <= u <= t,

so that ``L(t) = int_0^t K(t, u) dW(u)`` and, by the Ito isometry,
``Cov(L(t1), L(t2)) = int_0^{min(t1,t2)} K(t1, u) K(t2, u)^T du``.
The covariance is evaluated by composite Gauss-Legendre quadrature and the law
is sampled exactly by factorizing the covariance on a time grid.
:func:`euler_limit_path` discretizes the original double stochastic integral
directly and is kept only as an independent cross-check of the rewrite.
"""

from dataclasses import dataclass, field

import numpy as np

from ._numerics import gauss_legendre
from .errors import ConfigError, NotPSD, NotShort, OutOfOrder
from .geometry import frame_field
from .metric import (DEFAULT_FD_STEP, DEFAULT_R_MIN, amplitude_field,
                     amplitude_field_derivative, shortness_report)
from . import rng

PANELS = 64
PANEL_ORDER = 32
BASE_NODES = 4097
JITTER = 1e-12


@dataclass(eq=False)
class LimitBundle:
    """Deterministic ingredients ``r`` and ``Z`` of the limit law."""

    curve: object
    metric: object
    frames: object
    r_min_guard: float = DEFAULT_R_MIN
    fd_step: float = DEFAULT_FD_STEP
    _cache: dict = field(default_factory=dict, repr=False)

    def kernel_parts(self, u):
        """``(A, B) = (r Z, (r Z)')`` at parameters ``u``, each ``(m, 3)``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        A = amplitude_field(self.curve, self.metric, self.frames, u)
        B = amplitude_field_derivative(self.curve, self.metric, self.frames, u,
                                       step=self.fd_step, r_min=self.r_min_guard)
        return A, B


def limit_bundle(curve, metric, frame_method="rmf", initial_normal=None,
                 base_nodes=BASE_NODES, r_min_guard=DEFAULT_R_MIN):
    """Bundle with frames on a uniform base grid; further frames come from ``frames.at``.

    The metric may equal the squared speed at isolated points (``r = 0``);
    the derivative guard then decides whether the kernel can be evaluated.
    """
    report = shortness_report(curve, metric)
    if report.min_margin < -1e-12:
        raise NotShort(report.argmin_u, report.min_margin)
    nodes = np.linspace(0.0, 1.0, base_nodes)
    if frame_method == "rmf":
        frames = frame_field(curve, nodes, "rmf", initial_normal)
    else:
        frames = frame_field(curve, nodes, frame_method)
    return LimitBundle(curve, metric, frames, r_min_guard)


def covariance_kernel(bundle, t, u):
    """``K(t, u) = r(u) Z(u) - (t - u) (r Z)'(u)`` for ``u <= t``."""
    if u > t:
        raise OutOfOrder(f"kernel needs u <= t, got u={u}, t={t}")
    if u == t:
        return amplitude_field(bundle.curve, bundle.metric, bundle.frames, u)[0]
    A, B = bundle.kernel_parts(u)
    return A[0] - (t - u) * B[0]


def _panel_nodes(upper, panels=PANELS, order=PANEL_ORDER):
    z, w = gauss_legendre(order)
    edges = np.linspace(0.0, upper, panels + 1)
    h = np.diff(edges)
    u = (edges[:-1, None] + h[:, None] * z[None, :]).ravel()
    wt = (h[:, None] * w[None, :]).ravel()
    return u, wt


def _quadrature_data(bundle, upper):
    key = ("panels", float(upper))
    hit = bundle._cache.get(key)
    if hit is None:
        u, w = _panel_nodes(upper)
        A, B = bundle.kernel_parts(u)
        hit = (u, w, A, B)
        bundle._cache[key] = hit
    return hit


def limit_covariance(bundle, t1, t2):
    """``Cov(L(t1), L(t2))`` as a 3x3 matrix (64 panels of order-32 Gauss)."""
    for t in (t1, t2):
        if not 0.0 <= t <= 1.0:
            raise ConfigError(f"time {t} outside [0, 1]")
    upper = min(t1, t2)
    if upper == 0.0:
        return np.zeros((3, 3))
    u, w, A, B = _quadrature_data(bundle, upper)
    K1 = A - (t1 - u)[:, None] * B
    K2 = A - (t2 - u)[:, None] * B
    C = np.einsum("m,mi,mj->ij", w, K1, K2)
    return 0.5 * (C + C.T) if t1 == t2 else C


def limit_covariance_matrix(bundle, t_grid):
    """Full ``(3G, 3G)`` covariance of ``(L(t_1), ..., L(t_G))``, block ``(i, j)`` for times ``(t_i, t_j)``."""
    t = np.asarray(t_grid, dtype=float)
    G = t.size
    C = np.zeros((3 * G, 3 * G))
    for i in range(G):
        for j in range(i, G):
            blk = limit_covariance(bundle, t[i], t[j])
            C[3 * i:3 * i + 3, 3 * j:3 * j + 3] = blk
            C[3 * j:3 * j + 3, 3 * i:3 * i + 3] = blk.T
    return C


def psd_defect(C):
    """``-min eigenvalue / trace`` of the symmetrized matrix (<= 0 means PSD)."""
    S = 0.5 * (C + C.T)
    tr = float(np.trace(S))
    if tr == 0.0:
        return 0.0
    return float(-np.linalg.eigvalsh(S)[0] / tr)


def gaussian_factor(C):
    """Lower factor ``F`` with ``F F^T = C`` on the support of ``C``.

    Coordinates with zero variance are excluded (their rows of ``F`` are
    zero), the rest is Cholesky-factorized; if that fails a diagonal jitter of
    ``1e-12 * trace`` is tried once, and :class:`NotPSD` is raised beyond it.
    """
    C = 0.5 * (C + C.T)
    d = np.diag(C)
    if np.any(d < 0):
        raise NotPSD("negative variance on the diagonal")
    live = np.flatnonzero(d > 0)
    F = np.zeros_like(C)
    if live.size == 0:
        return F
    sub = C[np.ix_(live, live)]
    try:
        L = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        jitter = JITTER * float(np.trace(sub))
        try:
            L = np.linalg.cholesky(sub + jitter * np.eye(live.size))
        except np.linalg.LinAlgError:
            raise NotPSD(
                f"covariance not positive semidefinite within jitter budget "
                f"(min eigenvalue / trace = {-psd_defect(sub):.3e})") from None
    F[np.ix_(live, live)] = L
    return F


def sample_limit(bundle, t_grid, M, seed):
    """``M`` exact draws of ``(L(t))`` on ``t_grid``; returns ``(M, G, 3)``."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0.0) or np.any(t > 1.0) \
            or np.any(np.diff(t) <= 0):
        raise ConfigError("t_grid must be sorted, distinct and within (0, 1]")
    if M < 1:
        raise ConfigError("M must be >= 1")
    F = gaussian_factor(limit_covariance_matrix(bundle, t))
    xi = rng.normal_generator(seed).standard_normal((int(M), 3 * t.size))
    return (xi @ F.T).reshape(int(M), t.size, 3)


def _euler_coefficients(bundle, m):
    key = ("euler", int(m))
    hit = bundle._cache.get(key)
    if hit is None:
        # deterministic integrand: midpoints are as valid as left points and avoid u = 0
        mid = (np.arange(m) + 0.5) / m
        hit = bundle.kernel_parts(mid)
        bundle._cache[key] = hit
    return hit


def euler_limit_paths(bundle, m, seeds):
    """One Euler path per seed on ``{j/m}``; returns ``(len(seeds), m + 1, 3)``.

    ``dW_i ~ N(0, 1/m)``; the two Ito sums use coefficients at cell midpoints
    and the outer time integral is a left Riemann sum.
    """
    if m < 16:
        raise ConfigError("Euler resolution must be >= 16")
    A, B = _euler_coefficients(bundle, m)
    dW = np.stack([rng.normal_generator(s).standard_normal(m) for s in seeds])
    dW /= np.sqrt(m)
    P = len(seeds)
    I1 = np.zeros((P, m + 1, 3))
    I2 = np.zeros((P, m + 1, 3))
    np.cumsum(dW[:, :, None] * A[None], axis=1, out=I1[:, 1:])
    np.cumsum(dW[:, :, None] * B[None], axis=1, out=I2[:, 1:])
    outer = np.zeros((P, m + 1, 3))
    np.cumsum(I2[:, :-1] / m, axis=1, out=outer[:, 1:])
    return I1 - outer


def euler_limit_path(bundle, resolution, seed):
    """A single Euler path of the limit on ``{j/resolution}``, shape ``(resolution + 1, 3)``."""
    return euler_limit_paths(bundle, resolution, [seed])[0]
