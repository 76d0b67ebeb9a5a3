"""Deterministic and random Nash twists of a short curve.

The twisted map is

    f_n(t) = f0(0) + int_0^t [f0'(u) + r(u) (Y(u) cos 2 pi H(u) + Z(u) sin 2 pi H(u))] du

where ``H`` is the phase path: ``H(u) = n u`` for the deterministic twist, or
the piecewise-linear walk with slope ``n X_{k+1}`` on ``[k/n, (k+1)/n)`` for
i.i.d. signs ``X_k``. Since ``H(k/n) = S_k`` is an integer, on that cell

    cos 2 pi H(u) = cos 2 pi z,    sin 2 pi H(u) = X_{k+1} sin 2 pi z,    z = n u - k,

so every quantity below is affine in the signs. Integrals are taken cell by
cell with a fixed Gauss-Legendre rule (one oscillation per cell), never across
a breakpoint, and accumulated with compensated summation.

Layout: ``TwistGeometry`` holds everything that does not depend on the signs
(nodes, frames, amplitudes, per-cell integrals) and can be shared by many
``TwistedMap`` instances with different phases.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._numerics import gauss_legendre, kahan_cumsum
from .errors import (ConfigError, FrameNodesMissing, LengthMismatch, NotShort,
                     NotShortAt, OutOfDomain)
from .geometry import FrameField, frame_field
from .metric import residual_amplitude, shortness_report
from . import rng

TWO_PI = 2.0 * math.pi
DEFAULT_QUADRATURE_ORDER = 16


@dataclass(frozen=True, eq=False)
class SignSequence:
    """``n`` Rademacher signs ``X_1..X_n`` stored as an int8 array (index 0 holds ``X_1``)."""

    n: int
    signs: np.ndarray
    seed: object = None

    def __post_init__(self):
        s = np.asarray(self.signs)
        if s.shape != (self.n,):
            raise LengthMismatch(f"expected {self.n} signs, got shape {s.shape}")
        if not np.all((s == 1) | (s == -1)):
            raise ConfigError("signs must all be +1 or -1")
        s = s.astype(np.int8)
        s.flags.writeable = False
        object.__setattr__(self, "signs", s)

    def partial_sums(self):
        """``S_0 = 0, S_1, ..., S_n``."""
        return np.concatenate([[0], np.cumsum(self.signs, dtype=np.int64)])


def sample_signs(n, seed):
    """Signs from the counter-based stream keyed by ``seed``; same (n, seed), same output."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    return SignSequence(int(n), rng.rademacher(seed, n), int(seed))


@dataclass(frozen=True, eq=False)
class PhasePath:
    n: int
    mode: str
    signs: SignSequence = None

    @property
    def sign_array(self):
        """Per-cell slope signs as floats (all ones for the deterministic path)."""
        if self.mode == "deterministic":
            return np.ones(self.n)
        return self.signs.signs.astype(float)

    def cell(self, u):
        """Cell index ``k`` with ``u`` in ``[k/n, (k+1)/n)`` (the last cell is closed)."""
        u = np.asarray(u, dtype=float)
        return np.clip(np.floor(self.n * u), 0, self.n - 1).astype(np.int64)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.mode == "deterministic":
            return self.n * u
        k = self.cell(u)
        S = self.signs.partial_sums()
        return S[k] + self.sign_array[k] * (self.n * u - k)


def deterministic_phase(n):
    if n < 1:
        raise ConfigError("n must be >= 1")
    return PhasePath(int(n), "deterministic")


def random_phase(n, signs):
    if signs.n != n:
        raise LengthMismatch(f"phase of frequency {n} needs {n} signs, got {signs.n}")
    return PhasePath(int(n), "random", signs)


def twist_nodes(n, quadrature_order=DEFAULT_QUADRATURE_ORDER):
    """Sorted breakpoints ``k/n`` and Gauss nodes ``(k + z_j)/n`` of every cell.

    Frames for a twist must be available at exactly these parameters.
    """
    z, _ = gauss_legendre(quadrature_order)
    k = np.arange(n)[:, None]
    gauss = (k + z[None, :]) / n
    breaks = np.arange(n + 1) / n
    return np.sort(np.concatenate([breaks, gauss.ravel()])), gauss


def _check_admissible(curve, metric, extra_nodes):
    """Reject metrics below the squared speed; ``g == |f0'|^2`` (r = 0) is allowed."""
    report = shortness_report(curve, metric)
    try:
        residual_amplitude(curve, metric, np.linspace(0.0, 1.0, report.grid_size))
        residual_amplitude(curve, metric, extra_nodes)
    except NotShortAt as exc:
        margin = math.sqrt(max(float(metric(exc.u)), 0.0)) - float(curve.speed(exc.u))
        raise NotShort(exc.u, margin) from None
    return report


@dataclass(eq=False)
class TwistGeometry:
    """Sign-independent data of a twist at frequency ``n``.

    Per cell ``k`` (with ``z`` the local coordinate and ``w`` Gauss weights):

    - ``Ic[k]`` = int over the cell of ``r Y cos 2 pi z``
    - ``Is[k]`` = int over the cell of ``r Z sin 2 pi z``
    - ``Jc[k]``, ``Js[k]`` = the same integrands weighted by ``(k+1)/n - u``,
      i.e. the double integral ``int int_{k/n}^s`` over the cell.
    """

    curve: object
    metric: object
    frames: FrameField
    n: int
    quadrature_order: int
    nodes: np.ndarray
    r: np.ndarray
    rY: np.ndarray
    rZ: np.ndarray
    Ic: np.ndarray
    Is: np.ndarray
    Jc: np.ndarray
    Js: np.ndarray
    _partials: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, curve, metric, frames, n, quadrature_order=DEFAULT_QUADRATURE_ORDER):
        if n < 1:
            raise ConfigError("n must be >= 1")
        all_nodes, gauss = twist_nodes(n, quadrature_order)
        _check_admissible(curve, metric, all_nodes)
        if isinstance(frames, str):
            frames = frame_field(curve, all_nodes, frames)
        missing = ~np.isin(gauss.ravel(), frames.nodes)
        if np.any(missing):
            raise FrameNodesMissing(
                f"{int(missing.sum())} Gauss nodes have no frame "
                f"(first at u={gauss.ravel()[np.argmax(missing)]:.17g})")
        _, Y, Z = frames.at(gauss.ravel())
        r = residual_amplitude(curve, metric, gauss.ravel())
        shape = (n, quadrature_order, 3)
        rY = (r[:, None] * Y).reshape(shape)
        rZ = (r[:, None] * Z).reshape(shape)
        z, w = gauss_legendre(quadrature_order)
        wc = w * np.cos(TWO_PI * z) / n
        ws = w * np.sin(TWO_PI * z) / n
        lever = (1.0 - z) / n
        return cls(curve, metric, frames, int(n), int(quadrature_order), gauss,
                   r.reshape(n, quadrature_order), rY, rZ,
                   Ic=np.einsum("j,kjd->kd", wc, rY),
                   Is=np.einsum("j,kjd->kd", ws, rZ),
                   Jc=np.einsum("j,kjd->kd", wc * lever, rY),
                   Js=np.einsum("j,kjd->kd", ws * lever, rZ))

    def local_pieces(self, t, weighted):
        """Cos and sin pieces of the partial integral over ``[l/n, t]`` for each ``t``.

        Returns ``(cell, c, s)`` with ``c, s`` of shape ``(len(t), 3)``; the
        partial twist integral is ``c + X_{l+1} s``. With ``weighted`` the
        integrand carries the factor ``(t - u)``. Results are cached per ``t``.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        key = (bool(weighted), t.tobytes())
        hit = self._partials.get(key)
        if hit is not None:
            return hit
        n, q = self.n, self.quadrature_order
        cell = np.minimum(np.floor(n * t), n).astype(np.int64)
        inside = cell < n
        c = np.zeros((t.size, 3))
        s = np.zeros((t.size, 3))
        if np.any(inside):
            tt, ll = t[inside], cell[inside]
            a = ll / n
            width = tt - a
            z, w = gauss_legendre(q)
            u = a[:, None] + width[:, None] * z[None, :]
            u_flat = np.clip(u.ravel(), 0.0, 1.0)
            _, Y, Z = self.frames.at(u_flat)
            r = residual_amplitude(self.curve, self.metric, u_flat)
            rY = (r[:, None] * Y).reshape(u.shape + (3,))
            rZ = (r[:, None] * Z).reshape(u.shape + (3,))
            local = n * u - ll[:, None]
            weight = width[:, None] * w[None, :]
            if weighted:
                weight = weight * (tt[:, None] - u)
            c[inside] = np.einsum("gj,gjd->gd", weight * np.cos(TWO_PI * local), rY)
            s[inside] = np.einsum("gj,gjd->gd", weight * np.sin(TWO_PI * local), rZ)
        out = (np.where(inside, cell, n), c, s)
        if len(self._partials) < 64:
            self._partials[key] = out
        return out


def _check_grid(t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.size and (np.any(t < 0.0) or np.any(t > 1.0) or np.any(np.isnan(t))):
        raise OutOfDomain("parameters must lie in [0, 1]")
    return t


def difference_breaks_batch(geom, signs):
    """``f_n(k/n) - f0(k/n)`` for ``k = 0..n`` and a batch of sign rows: ``(B, n+1, 3)``."""
    X = np.asarray(signs, dtype=float)
    inc = geom.Ic[None] + X[:, :, None] * geom.Is[None]
    return kahan_cumsum(inc, axis=1)


def scaled_difference_batch(geom, signs, t_grid, parts=False):
    """``D_n(t) = 2 pi n^{3/2} int_0^t (f_n - f0) ds`` for a batch of sign rows.

    Returns ``(B, G, 3)``; with ``parts=True`` returns the cos (sign-free)
    and sin (sign-linear) contributions separately, which sum to ``D_n``.
    Every operation is elementwise across the batch, so a row's result does
    not depend on which other rows share the batch.
    """
    t = _check_grid(t_grid)
    n = geom.n
    X = np.asarray(signs, dtype=float)
    scale = TWO_PI * n ** 1.5
    cell, pc, ps = geom.local_pieces(t, weighted=True)
    _, ec, es = geom.local_pieces(t, weighted=False)
    inside = cell < n
    cl = np.minimum(cell, n - 1)
    lag = t - cell / n

    Xcell = np.where(inside[None, :], X[:, cl], 0.0)

    # cos part: identical for every row
    Bc = kahan_cumsum(geom.Ic, axis=0)
    Oc = kahan_cumsum(Bc[:n] / n + geom.Jc, axis=0)
    cos_part = Oc[cell] + Bc[cell] * lag[:, None] + pc
    cos_part = np.broadcast_to(scale * cos_part, (X.shape[0],) + cos_part.shape)

    Bs = kahan_cumsum(X[:, :, None] * geom.Is[None], axis=1)
    Os = kahan_cumsum(Bs[:, :n] / n + X[:, :, None] * geom.Js[None], axis=1)
    sin_part = Os[:, cell] + Bs[:, cell] * lag[None, :, None] + Xcell[:, :, None] * ps[None]
    sin_part = scale * sin_part
    if parts:
        return np.array(cos_part), sin_part
    return cos_part + sin_part


@dataclass(eq=False)
class TwistedMap:
    """A twisted curve ``f_n``; immutable after construction."""

    geometry: TwistGeometry
    phase: PhasePath
    breakpoint_values: np.ndarray
    breakpoint_differences: np.ndarray

    @property
    def curve(self):
        return self.geometry.curve

    @property
    def metric(self):
        return self.geometry.metric

    @property
    def frames(self):
        return self.geometry.frames

    @property
    def n(self):
        return self.geometry.n

    @property
    def quadrature_order(self):
        return self.geometry.quadrature_order

    @classmethod
    def from_geometry(cls, geom, phase):
        if phase.n != geom.n:
            raise LengthMismatch(f"phase frequency {phase.n} != geometry frequency {geom.n}")
        diff = difference_breaks_batch(geom, phase.sign_array[None])[0]
        breaks = np.arange(geom.n + 1) / geom.n
        values = np.atleast_2d(geom.curve(breaks)) + diff
        return cls(geom, phase, values, diff)


def build_twisted_map(curve, metric, frames, phase, quadrature_order=DEFAULT_QUADRATURE_ORDER):
    """Assemble ``f_n`` with cached breakpoint values.

    ``frames`` is a :class:`FrameField` covering :func:`twist_nodes` or a
    method name (``"rmf"``/``"frenet"``) to compute one.
    """
    geom = TwistGeometry.build(curve, metric, frames, phase.n, quadrature_order)
    return TwistedMap.from_geometry(geom, phase)


def twist_difference(fmap, t):
    """``f_n(t) - f0(t)``: cached breakpoint difference plus a partial cell integral."""
    t = _check_grid(t)
    geom = fmap.geometry
    cell, c, s = geom.local_pieces(t, weighted=False)
    X = np.concatenate([fmap.phase.sign_array, [0.0]])
    return fmap.breakpoint_differences[cell] + c + X[cell][:, None] * s


def eval_map(fmap, t):
    """``f_n(t)``; returns ``(3,)`` for scalar ``t`` and ``(m, 3)`` otherwise."""
    scalar = np.ndim(t) == 0
    t = _check_grid(t)
    out = np.atleast_2d(fmap.curve(t)) + twist_difference(fmap, t)
    return out[0] if scalar else out


def velocity(fmap, u):
    """``f_n'(u)`` from the twist formula (no differencing)."""
    u = _check_grid(u)
    phase = fmap.phase
    k = phase.cell(u)
    z = fmap.n * u - k
    _, Y, Z = fmap.frames.at(u)
    r = residual_amplitude(fmap.curve, fmap.metric, u)
    X = phase.sign_array[k]
    twist = r[:, None] * (Y * np.cos(TWO_PI * z)[:, None]
                          + Z * (X * np.sin(TWO_PI * z))[:, None])
    return np.atleast_2d(fmap.curve.evaluate(u, 1)) + twist


def isometry_defect(fmap, grid=4096, include_nodes=True):
    """Max relative defect ``| |f_n'|^2 - g | / g`` over a uniform grid.

    With ``include_nodes`` the Gauss nodes used to build the map are checked
    as well.
    """
    if grid < 2:
        raise ConfigError("grid needs at least 2 nodes")
    u = np.linspace(0.0, 1.0, grid)
    if include_nodes:
        u = np.concatenate([u, fmap.geometry.nodes.ravel()])
    v = velocity(fmap, u)
    g = fmap.metric(u)
    return float(np.max(np.abs(np.sum(v * v, axis=1) - g) / g))


def sup_difference(fmap, grid=None):
    """Max of ``|f_n(t) - f0(t)|`` over a uniform grid (default ``8n + 1`` nodes)."""
    if grid is None:
        grid = 8 * fmap.n + 1
    if grid < fmap.n:
        raise ConfigError(f"grid ({grid}) must resolve every cell (>= n = {fmap.n})")
    t = np.linspace(0.0, 1.0, grid)
    return float(np.max(np.linalg.norm(twist_difference(fmap, t), axis=1)))


def scaled_difference(fmap, t_grid):
    """``D_n`` on ``t_grid`` as an array of shape ``(G, 3)``."""
    return scaled_difference_batch(fmap.geometry, fmap.phase.sign_array[None], t_grid)[0]


def scaled_difference_parts(fmap, t_grid):
    """Cos (sign-independent) and sin contributions to ``D_n``, each ``(G, 3)``."""
    c, s = scaled_difference_batch(fmap.geometry, fmap.phase.sign_array[None], t_grid,
                                   parts=True)
    return c[0], s[0]
