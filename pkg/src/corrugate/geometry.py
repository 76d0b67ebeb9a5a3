"""Curves on [0, 1] and orthonormal frame fields along them.

Curves come from a small catalog of analytic entries with closed-form
derivatives, or from a table interpolated by a natural cubic spline. Frames
are either Frenet-Serret frames (tangent, principal normal, binormal) or
rotation-minimizing frames transported by the double-reflection rule.

All evaluation functions are vectorized over the parameter: passing an array
of shape ``(m,)`` returns arrays of shape ``(m, 3)``; a scalar returns ``(3,)``.
"""

from dataclasses import dataclass, field
import math
import re

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline

from .errors import (CurvatureVanishes, IrregularCurve, MissingParameter,
                     NonOrthogonalSeed, OrderUnsupported, OutOfDomain,
                     UnknownCatalogEntry, ConfigError)

TWO_PI = 2.0 * math.pi
KAPPA_MIN = 1e-8
ORTHO_TOL = 1e-9

CATALOG = {
    "line": {"required": ("dx", "dy", "dz"),
             "optional": {"x0": 0.0, "y0": 0.0, "z0": 0.0},
             "doc": "f(u) = (x0, y0, z0) + u (dx, dy, dz)"},
    "circle": {"required": ("radius",), "optional": {},
               "doc": "f(u) = radius (cos 2 pi u, sin 2 pi u, 0)"},
    "helix": {"required": ("a", "b"), "optional": {},
              "doc": "f(u) = (a cos 2 pi u, a sin 2 pi u, b u)"},
    "polynomial": {"required": (), "optional": {},
                   "doc": "component c in {x, y, z}: sum_k ck u^k, keys x0, x1, ..., z3"},
}

_POLY_KEY = re.compile(r"^([xyz])(\d+)$")


@dataclass(frozen=True, eq=False)
class Curve:
    """A smooth regular curve ``f0: [0, 1] -> R^3``.

    Use :func:`make_catalog_curve` or :meth:`Curve.tabulated` to construct.
    """

    kind: str
    params: dict
    _impl: object = field(repr=False, default=None)

    def __call__(self, u):
        return self.evaluate(u, 0)

    def evaluate(self, u, order=0):
        """Position (``order=0``) or the ``order``-th derivative at ``u``."""
        if order not in (0, 1, 2, 3):
            raise OrderUnsupported(
                f"derivative order {order} not supported (0..3) for {self.kind} curves")
        u = np.asarray(u, dtype=float)
        return self._impl(u, order)

    def speed(self, u):
        return np.linalg.norm(self.evaluate(u, 1), axis=-1)

    def speed_squared(self, u):
        d = self.evaluate(u, 1)
        return np.sum(d * d, axis=-1)

    def describe(self):
        return {"kind": self.kind, "params": {k: self.params[k] for k in sorted(self.params)}}

    @classmethod
    def tabulated(cls, u, points):
        """Natural cubic spline through ``points[i]`` at strictly increasing ``u[i]``."""
        u = np.asarray(u, dtype=float)
        points = np.asarray(points, dtype=float)
        if u.ndim != 1 or points.shape != (u.size, 3):
            raise ConfigError("tabulated curve needs u of shape (m,) and points of shape (m, 3)")
        if u.size < 4 or np.any(np.diff(u) <= 0):
            raise ConfigError("tabulated curve needs >= 4 strictly increasing nodes")
        if u[0] > 0.0 or u[-1] < 1.0:
            raise ConfigError("tabulated curve nodes must cover [0, 1]")
        spline = CubicSpline(u, points, axis=0, bc_type="natural")
        return cls("tabulated", {"nodes": int(u.size)},
                   lambda s, k: spline(s, k) if k else spline(s))


def _check_params(name, params):
    entry = CATALOG[name]
    if name == "polynomial":
        if not params:
            raise MissingParameter("polynomial curve needs at least one coefficient (x0, y1, ...)")
        for key in params:
            if not _POLY_KEY.match(key):
                raise ConfigError(f"unexpected polynomial parameter {key!r}")
        return dict(params)
    missing = [k for k in entry["required"] if k not in params]
    if missing:
        raise MissingParameter(f"{name} curve is missing parameter(s): {', '.join(missing)}")
    allowed = set(entry["required"]) | set(entry["optional"])
    extra = sorted(set(params) - allowed)
    if extra:
        raise ConfigError(f"unexpected parameter(s) for {name}: {', '.join(extra)}")
    full = dict(entry["optional"])
    full.update({k: float(v) for k, v in params.items()})
    return full


def _trig_derivative(u, order):
    # d^k/du^k of (cos 2 pi u, sin 2 pi u)
    phase = TWO_PI * u + order * (math.pi / 2.0)
    scale = TWO_PI ** order
    return scale * np.cos(phase), scale * np.sin(phase)


def make_catalog_curve(name, params=None):
    """Build a catalog curve with analytic derivatives up to order 3.

    >>> make_catalog_curve("line", {"dx": 0.5, "dy": 0, "dz": 0})(1.0)
    array([0.5, 0. , 0. ])
    """
    if name not in CATALOG:
        raise UnknownCatalogEntry(
            f"unknown curve {name!r}; catalog: {', '.join(sorted(CATALOG))}")
    p = _check_params(name, params or {})

    if name == "line":
        origin = np.array([p["x0"], p["y0"], p["z0"]])
        direction = np.array([p["dx"], p["dy"], p["dz"]])

        def impl(u, k):
            shape = u.shape + (3,)
            if k == 0:
                return origin + u[..., None] * direction
            if k == 1:
                return np.broadcast_to(direction, shape).copy()
            return np.zeros(shape)

    elif name == "circle":
        rho = p["radius"]

        def impl(u, k):
            c, s = _trig_derivative(u, k)
            return np.stack([rho * c, rho * s, np.zeros_like(u)], axis=-1)

    elif name == "helix":
        a, b = p["a"], p["b"]

        def impl(u, k):
            c, s = _trig_derivative(u, k)
            if k == 0:
                z = b * u
            elif k == 1:
                z = np.full_like(u, b)
            else:
                z = np.zeros_like(u)
            return np.stack([a * c, a * s, z], axis=-1)

    else:
        coeffs = []
        for axis in "xyz":
            degs = [int(_POLY_KEY.match(k).group(2)) for k in p if k[0] == axis]
            c = np.zeros(max(degs, default=0) + 1)
            for key, value in p.items():
                m = _POLY_KEY.match(key)
                if m.group(1) == axis:
                    c[int(m.group(2))] = float(value)
            coeffs.append(c)
        derived = [[P.polyder(c, k) if k else c for k in range(4)] for c in coeffs]

        def impl(u, k):
            return np.stack([P.polyval(u, derived[i][k]) for i in range(3)], axis=-1)

    return Curve(name, p, impl)


def curve_derivative(curve, u, order):
    """The ``order``-th derivative (1..3) of ``curve`` at ``u``."""
    if order not in (1, 2, 3):
        raise OrderUnsupported(f"derivative order must be 1..3, got {order}")
    return curve.evaluate(u, order)


@dataclass(frozen=True)
class Frame:
    """Orthonormal frame: ``X`` unit tangent, ``(Y, Z)`` spans the normal plane."""

    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray

    def defect(self):
        m = np.stack([self.X, self.Y, self.Z])
        return float(np.max(np.abs(m @ m.T - np.eye(3))))


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _frenet_arrays(curve, u, kappa_min=KAPPA_MIN):
    d1 = np.atleast_2d(curve.evaluate(u, 1))
    d2 = np.atleast_2d(curve.evaluate(u, 2))
    speed = np.linalg.norm(d1, axis=-1)
    cross = np.cross(d1, d2)
    cn = np.linalg.norm(cross, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = cn / speed ** 3
    bad = ~(kappa > kappa_min)
    if np.any(bad):
        where = np.atleast_1d(np.asarray(u, dtype=float))[np.argmax(bad)]
        raise CurvatureVanishes(
            f"curvature {float(kappa[np.argmax(bad)]):.3e} <= {kappa_min:g} at u={where:.17g}; "
            "use rotation-minimizing frames")
    X = d1 / speed[:, None]
    Z = cross / cn[:, None]
    Y = np.cross(Z, X)
    return X, Y, Z


def frenet_frame(curve, u, kappa_min=KAPPA_MIN):
    """Frenet-Serret frame at a single parameter value.

    Raises :class:`CurvatureVanishes` where the curvature does not exceed
    ``kappa_min``; callers should switch to :func:`rmf_frame_field` there.
    """
    X, Y, Z = _frenet_arrays(curve, float(u), kappa_min)
    return Frame(X[0], Y[0], Z[0])


def _reflection_march(points, tangents, r0):
    """Double-reflection transport of the normal ``r0`` along sampled points.

    ``points`` and ``tangents`` are sequences of 3-tuples; returns a list of
    normal 3-tuples, one per point. Pure Python floats: the loop is inherently
    sequential and small-vector numpy calls would dominate the cost.
    """
    out = [tuple(r0)]
    rx, ry, rz = r0
    for i in range(len(points) - 1):
        x0, x1 = points[i], points[i + 1]
        t0, t1 = tangents[i], tangents[i + 1]
        v1x, v1y, v1z = x1[0] - x0[0], x1[1] - x0[1], x1[2] - x0[2]
        c1 = v1x * v1x + v1y * v1y + v1z * v1z
        if c1 > 0.0:
            a = 2.0 * (v1x * rx + v1y * ry + v1z * rz) / c1
            lx, ly, lz = rx - a * v1x, ry - a * v1y, rz - a * v1z
            b = 2.0 * (v1x * t0[0] + v1y * t0[1] + v1z * t0[2]) / c1
            tlx, tly, tlz = t0[0] - b * v1x, t0[1] - b * v1y, t0[2] - b * v1z
        else:
            lx, ly, lz = rx, ry, rz
            tlx, tly, tlz = t0
        v2x, v2y, v2z = t1[0] - tlx, t1[1] - tly, t1[2] - tlz
        c2 = v2x * v2x + v2y * v2y + v2z * v2z
        if c2 > 0.0:
            a = 2.0 * (v2x * lx + v2y * ly + v2z * lz) / c2
            lx, ly, lz = lx - a * v2x, ly - a * v2y, lz - a * v2z
        # re-project onto the normal plane of t1 to stop roundoff drift
        d = lx * t1[0] + ly * t1[1] + lz * t1[2]
        lx, ly, lz = lx - d * t1[0], ly - d * t1[1], lz - d * t1[2]
        nrm = math.sqrt(lx * lx + ly * ly + lz * lz)
        rx, ry, rz = lx / nrm, ly / nrm, lz / nrm
        out.append((rx, ry, rz))
    return out


def _tangents(curve, u):
    d1 = np.atleast_2d(curve.evaluate(u, 1))
    speed = np.linalg.norm(d1, axis=-1)
    if np.any(~(speed > 1e-14)):
        i = int(np.argmax(~(speed > 1e-14)))
        raise IrregularCurve(f"curve speed vanishes at u={float(np.atleast_1d(u)[i]):.17g}")
    return d1 / speed[:, None]


def _default_normal(curve, u0):
    """Principal normal where defined, else the axis least aligned with the tangent."""
    try:
        return frenet_frame(curve, u0).Y
    except CurvatureVanishes:
        t = _tangents(curve, u0)[0]
        axis = np.eye(3)[int(np.argmin(np.abs(t)))]
        n = axis - (axis @ t) * t
        return n / np.linalg.norm(n)


@dataclass(frozen=True, eq=False)
class FrameField:
    """Frames at strictly increasing nodes of [0, 1].

    ``X``, ``Y``, ``Z`` are arrays of shape ``(len(nodes), 3)``. The field keeps
    a reference to its curve so that frames at further parameters can be
    computed with :meth:`at` using the same construction.
    """

    nodes: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    method: str
    curve: Curve = field(repr=False)

    def __len__(self):
        return self.nodes.size

    def frame(self, i):
        return Frame(self.X[i], self.Y[i], self.Z[i])

    def orthonormality_defect(self):
        """Largest deviation of the frame Gram matrices from the identity."""
        vecs = np.stack([self.X, self.Y, self.Z], axis=1)
        gram = vecs @ np.swapaxes(vecs, 1, 2)
        return float(np.max(np.abs(gram - np.eye(3)))) if len(self) else 0.0

    def at(self, u):
        """Frames ``(X, Y, Z)`` at arbitrary parameters ``u`` (any order).

        Stored nodes are returned verbatim. Frenet frames are computed in
        closed form; rotation-minimizing frames are transported from the
        nearest stored node at or below each query, visiting the queries
        of that cell in increasing order.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.size and (u.min() < self.nodes[0] or u.max() > 1.0):
            raise OutOfDomain(f"frame requested outside [{self.nodes[0]}, 1]")
        if self.method == "frenet":
            return _frenet_arrays(self.curve, u)
        X = _tangents(self.curve, u)
        Y = np.empty_like(X)
        cell = np.searchsorted(self.nodes, u, side="right") - 1
        exact = self.nodes[cell] == u
        Y[exact] = self.Y[cell[exact]]
        pending = np.flatnonzero(~exact)
        if pending.size:
            order = pending[np.lexsort((u[pending], cell[pending]))]
            pos = self.curve.evaluate(u, 0)
            pos = np.atleast_2d(pos)
            start = 0
            while start < order.size:
                c = cell[order[start]]
                stop = start
                while stop < order.size and cell[order[stop]] == c:
                    stop += 1
                idx = order[start:stop]
                base_u = self.nodes[c]
                base_p = tuple(np.atleast_2d(self.curve.evaluate(base_u, 0))[0])
                pts = [base_p] + [tuple(p) for p in pos[idx]]
                tan = [tuple(self.X[c])] + [tuple(t) for t in X[idx]]
                normals = _reflection_march(pts, tan, tuple(self.Y[c]))
                Y[idx] = np.array(normals[1:])
                start = stop
        Z = np.cross(X, Y)
        return X, Y, Z


def _check_nodes(nodes):
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size == 0:
        raise ConfigError("nodes must be a non-empty 1-d sequence")
    if np.any(np.diff(nodes) <= 0) or nodes[0] < 0.0 or nodes[-1] > 1.0:
        raise ConfigError("nodes must be strictly increasing within [0, 1]")
    return nodes


def frenet_frame_field(curve, nodes, kappa_min=KAPPA_MIN):
    nodes = _check_nodes(nodes)
    X, Y, Z = _frenet_arrays(curve, nodes, kappa_min)
    return FrameField(nodes, X, Y, Z, "frenet", curve)


def rmf_frame_field(curve, nodes, initial_normal=None):
    """Rotation-minimizing frames at ``nodes`` by double-reflection marching.

    ``initial_normal`` is the ``Y`` vector at the first node and must be a
    unit vector orthogonal to the tangent there. When omitted, the principal
    normal is used if the curvature is nonzero, otherwise the coordinate
    axis least aligned with the tangent (orthogonalized).
    """
    nodes = _check_nodes(nodes)
    X = _tangents(curve, nodes)
    if initial_normal is None:
        r0 = _default_normal(curve, nodes[0])
    else:
        r0 = np.asarray(initial_normal, dtype=float)
        if (abs(float(r0 @ X[0])) > ORTHO_TOL
                or abs(float(np.linalg.norm(r0)) - 1.0) > ORTHO_TOL):
            raise NonOrthogonalSeed(
                f"initial normal must be a unit vector orthogonal to the tangent "
                f"{X[0].tolist()} (dot = {float(r0 @ X[0]):.3e})")
        r0 = r0 - (r0 @ X[0]) * X[0]
        r0 = r0 / np.linalg.norm(r0)
    pts = [tuple(p) for p in np.atleast_2d(curve.evaluate(nodes, 0))]
    Y = np.array(_reflection_march(pts, [tuple(t) for t in X], tuple(r0)))
    Z = np.cross(X, Y)
    return FrameField(nodes, X, Y, Z, "rmf", curve)


def frame_field(curve, nodes, method="rmf", initial_normal=None):
    """Frame field by method name (``"rmf"`` or ``"frenet"``)."""
    if method == "rmf":
        return rmf_frame_field(curve, nodes, initial_normal)
    if method == "frenet":
        return frenet_frame_field(curve, nodes)
    raise ConfigError(f"unknown frame method {method!r} (expected 'rmf' or 'frenet')")
