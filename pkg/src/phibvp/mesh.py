"""Meshes on a compact interval and piecewise-linear W^{1,1} functions.

A :class:`GridFunction` stores nodal values together with one slope per
cell.  The pair is kept consistent: nodal increments equal slope times
cell width, so the function is the absolutely continuous integral of its
slope field.  Points where the weight ``k`` vanishes are always mesh nodes
and every quadrature rule in this module is open, so such points are never
sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigurationError, DomainError, IntegrandDomainError, MeshMismatchError

DEFAULT_CELLS = 2048
DEFAULT_GRADING = 1.5
# innermost graded node distance relative to the base cell width
GRADED_DEPTH = 1e-6
CONSISTENCY_RTOL = 1e-12
ABSCISSA_ULPS = 8.0
_EPS = float(np.finfo(float).eps)
NORM_KINDS = ("L1", "Linf", "Lq", "W11")


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes on (0, 1) and weights summing to one."""
    if order < 1:
        raise ConfigurationError("quadrature order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    x = (x + 1.0) / 2.0
    w = w / 2.0
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def _vectorized(w: Callable):
    def call(t):
        try:
            out = w(t)
        except TypeError:
            out = np.vectorize(w, otypes=[float])(t)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(t))

    return call


@dataclass(frozen=True, eq=False)
class Mesh:
    """Strictly increasing nodes ``t_0 = a < ... < t_n = b``.

    ``singular_points`` marks nodes where the weight ``k`` vanishes.  Each
    marked point must coincide exactly with a node.
    """

    nodes: np.ndarray
    singular_points: tuple = ()

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).ravel()
        if nodes.size < 2:
            raise ConfigurationError("a mesh needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise ConfigurationError("mesh nodes must be finite")
        if np.any(np.diff(nodes) <= 0.0):
            raise ConfigurationError("mesh nodes must be strictly increasing")
        singular = tuple(sorted({float(s) for s in self.singular_points}))
        node_set = set(nodes.tolist())
        for s in singular:
            if s not in node_set:
                raise DomainError(f"singular point {s!r} is not a mesh node")
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "singular_points", singular)

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def n_cells(self) -> int:
        return self.nodes.size - 1

    @cached_property
    def widths(self) -> np.ndarray:
        return _readonly(np.diff(self.nodes))

    @cached_property
    def midpoints(self) -> np.ndarray:
        return _readonly(0.5 * (self.nodes[:-1] + self.nodes[1:]))

    @cached_property
    def singular_cells(self) -> np.ndarray:
        """Boolean mask of cells having a singular point as an endpoint."""
        mask = np.zeros(self.n_cells, dtype=bool)
        for s in self.singular_points:
            i = int(np.searchsorted(self.nodes, s))
            if i > 0:
                mask[i - 1] = True
            if i < self.n_cells:
                mask[i] = True
        mask.setflags(write=False)
        return mask

    def locate(self, t) -> np.ndarray:
        """Index of the cell containing ``t`` (cells are closed on the left)."""
        idx = np.searchsorted(self.nodes, t, side="right") - 1
        return np.clip(idx, 0, self.n_cells - 1)

    def quadrature(self, order: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-cell Gauss points ``(n_cells, order)`` and weights including widths."""
        cache = self.__dict__.setdefault("_quad_cache", {})
        if order not in cache:
            x, w = gauss_legendre(order)
            h = self.widths[:, None]
            pts = _readonly(self.nodes[:-1, None] + h * x[None, :])
            wts = _readonly(h * w[None, :])
            cache[order] = (pts, wts)
        return cache[order]

    def contains(self, other: "Mesh") -> bool:
        """True if every node of ``other`` is a node of this mesh."""
        return bool(np.all(np.isin(other.nodes, self.nodes)))

    def union(self, other: "Mesh") -> "Mesh":
        if self is other:
            return self
        if self.a != other.a or self.b != other.b:
            raise MeshMismatchError(
                f"meshes cover different intervals [{self.a}, {self.b}] and [{other.a}, {other.b}]"
            )
        nodes = np.union1d(self.nodes, other.nodes)
        if nodes.size == self.nodes.size and not set(other.singular_points) - set(self.singular_points):
            return self
        return Mesh(nodes, tuple(set(self.singular_points) | set(other.singular_points)))

    def with_nodes(self, extra: Iterable[float]) -> "Mesh":
        extra = np.asarray(list(extra), dtype=float)
        if extra.size == 0:
            return self
        nodes = np.union1d(self.nodes, extra)
        if nodes.size == self.nodes.size:
            return self
        return Mesh(nodes, self.singular_points)


def consistency_defect(mesh: Mesh, values, slopes, scale=None):
    """Per cell |value increment - slope*width| and the defect tolerated for it."""
    values = np.asarray(values, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    scale = np.abs(values) if scale is None else scale
    defect = np.abs(np.diff(values) - slopes * mesh.widths)
    # interpolating at a rounded abscissa moves the value by a few ulp(t)*|slope|
    t = np.abs(mesh.nodes)
    allowed = CONSISTENCY_RTOL * (1.0 + scale[:-1] + scale[1:]) + ABSCISSA_ULPS * _EPS * np.abs(slopes) * (t[:-1] + t[1:])
    return defect, allowed


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Continuous piecewise-linear function with per-cell slopes."""

    mesh: Mesh
    values: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        slopes = np.asarray(self.slopes, dtype=float).ravel()
        n = self.mesh.nodes.size
        if values.size != n:
            raise MeshMismatchError(f"expected {n} nodal values, got {values.size}")
        if slopes.size != n - 1:
            raise MeshMismatchError(f"expected {n - 1} slopes, got {slopes.size}")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))):
            raise ConfigurationError("grid function entries must be finite")
        self._check_consistency(values, slopes, np.abs(values))
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "slopes", _readonly(slopes))

    def _check_consistency(self, values, slopes, scale):
        defect, allowed = consistency_defect(self.mesh, values, slopes, scale)
        if np.any(defect > allowed):
            i = int(np.argmax(defect - allowed))
            raise ConfigurationError(
                f"values and slopes disagree on cell {i}: defect {defect[i]:.3e}"
            )

    @classmethod
    def _sum(cls, mesh: Mesh, u, v, sign: float) -> "GridFunction":
        """u + sign*v, with the consistency check scaled by the operands."""
        out = object.__new__(cls)
        object.__setattr__(out, "mesh", mesh)
        values = u.values + sign * v.values
        slopes = u.slopes + sign * v.slopes
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))):
            raise ConfigurationError("grid function entries must be finite")
        out._check_consistency(values, slopes, np.abs(u.values) + np.abs(v.values))
        object.__setattr__(out, "values", _readonly(values))
        object.__setattr__(out, "slopes", _readonly(slopes))
        return out

    @classmethod
    def from_values(cls, mesh: Mesh, values) -> "GridFunction":
        values = np.asarray(values, dtype=float)
        return cls(mesh, values, np.diff(values) / mesh.widths)

    @classmethod
    def from_increments(cls, mesh: Mesh, start: float, increments) -> "GridFunction":
        increments = np.asarray(increments, dtype=float)
        values = np.concatenate(([start], start + np.cumsum(increments)))
        return cls(mesh, values, increments / mesh.widths)

    @classmethod
    def constant(cls, mesh: Mesh, c: float) -> "GridFunction":
        return cls(mesh, np.full(mesh.nodes.size, float(c)), np.zeros(mesh.n_cells))

    @classmethod
    def from_function(cls, mesh: Mesh, fn: Callable) -> "GridFunction":
        """Nodal interpolant of ``fn``."""
        return cls.from_values(mesh, _vectorized(fn)(mesh.nodes))

    @property
    def increments(self) -> np.ndarray:
        return self.slopes * self.mesh.widths

    def __call__(self, t):
        return np.interp(t, self.mesh.nodes, self.values)

    def slope_at(self, t):
        return self.slopes[self.mesh.locate(t)]

    def on_mesh(self, mesh: Mesh) -> "GridFunction":
        """Exact re-expression on a mesh that contains every node of ours."""
        if mesh is self.mesh:
            return self
        if mesh.a != self.mesh.a or mesh.b != self.mesh.b or not mesh.contains(self.mesh):
            raise MeshMismatchError("target mesh must refine the function's mesh")
        return GridFunction(mesh, self(mesh.nodes), self.slope_at(mesh.midpoints))

    def align(self, other: "GridFunction") -> tuple["GridFunction", "GridFunction"]:
        mesh = self.mesh.union(other.mesh)
        return self.on_mesh(mesh), other.on_mesh(mesh)

    def _combine(self, other, sign: float) -> "GridFunction":
        if isinstance(other, GridFunction):
            u, v = self.align(other)
            return GridFunction._sum(u.mesh, u, v, sign)
        c = float(other)
        return GridFunction(self.mesh, self.values + sign * c, self.slopes)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return GridFunction(self.mesh, -self.values, -self.slopes)

    def __mul__(self, c):
        c = float(c)
        return GridFunction(self.mesh, c * self.values, c * self.slopes)

    __rmul__ = __mul__


def make_graded_mesh(
    a: float,
    b: float,
    n: int = DEFAULT_CELLS,
    singular: Iterable[float] = (),
    grading: float = DEFAULT_GRADING,
    breakpoints: Iterable[float] = (),
) -> Mesh:
    """Uniform mesh of ``n`` cells, geometrically refined toward singular points.

    Every singular point and breakpoint becomes a node.  Next to a singular
    point the cell widths shrink by the factor ``grading`` per cell, from
    the base width ``h = (b - a)/n`` down to ``GRADED_DEPTH * h``, so the
    graded zone spans about ``h/(grading - 1)`` on each side.
    ``grading == 1`` disables the refinement.
    """
    a, b = float(a), float(b)
    if not a < b:
        raise ConfigurationError(f"need a < b, got [{a}, {b}]")
    if int(n) != n or n < 2:
        raise ConfigurationError(f"need an integer n >= 2, got {n}")
    if not grading >= 1.0:
        raise ConfigurationError(f"grading ratio must be >= 1, got {grading}")
    n = int(n)
    singular = sorted({float(s) for s in singular})
    breakpoints = sorted({float(s) for s in breakpoints})
    for s in singular + breakpoints:
        if not a <= s <= b:
            raise DomainError(f"point {s} lies outside [{a}, {b}]")

    h = (b - a) / n
    base = np.linspace(a, b, n + 1)
    base[-1] = b
    required = np.array(sorted({a, b, *singular, *breakpoints}))
    dist = np.min(np.abs(base[:, None] - required[None, :]), axis=1)
    nodes = np.union1d(base[dist > 0.3 * h], required)

    if grading > 1.0 and singular:
        g = float(grading)
        sing = np.array(singular)
        extra, drop = [], np.zeros(nodes.size, dtype=bool)
        for s in singular:
            # widths grow by g away from s and reach h after a zone of h/(g-1);
            # the zone stops halfway to a neighbouring singular point
            others = np.abs(sing[sing != s] - s)
            span = min(h / (g - 1.0), 0.5 * float(np.min(others, initial=np.inf)))
            levels = int(math.ceil(math.log(span / (GRADED_DEPTH * h)) / math.log(g)))
            dist = span * g ** -np.arange(levels + 1)
            for side in (-1.0, 1.0):
                if not a <= s + side * dist[-1] <= b:
                    continue
                pts = s + side * dist
                extra.append(pts[(pts > a) & (pts < b)])
                near = (side * (nodes - s) > 0) & (side * (nodes - s) < span + 0.3 * h)
                drop |= near & ~np.isin(nodes, required)
        nodes = np.union1d(nodes[~drop], np.concatenate(extra))
        # graded runs of two close singular points meet halfway
        tol = 1e-14 * max(abs(a), abs(b), b - a)
        close = np.flatnonzero(np.diff(nodes) <= tol)
        while close.size:
            i = int(close[0])
            nodes = np.delete(nodes, i if np.isin(nodes[i + 1], required) else i + 1)
            close = np.flatnonzero(np.diff(nodes) <= tol)
    return Mesh(nodes, tuple(singular))


def _sign_free_pieces(x: GridFunction):
    """Split cells at interior sign changes; returns (t0, t1, v0, v1) arrays."""
    t = x.mesh.nodes
    v = x.values
    t0, t1, v0, v1 = t[:-1], t[1:], v[:-1], v[1:]
    cross = v0 * v1 < 0.0
    if not np.any(cross):
        return t0, t1, v0, v1
    tc = t0[cross] + (t1[cross] - t0[cross]) * v0[cross] / (v0[cross] - v1[cross])
    zeros = np.zeros(tc.size)
    return (
        np.concatenate((t0[~cross], t0[cross], tc)),
        np.concatenate((t1[~cross], tc, t1[cross])),
        np.concatenate((v0[~cross], v0[cross], zeros)),
        np.concatenate((v1[~cross], zeros, v1[cross])),
    )


def _l1_linear(x: GridFunction) -> float:
    v0, v1 = x.values[:-1], x.values[1:]
    h = x.mesh.widths
    same = v0 * v1 >= 0.0
    a0, a1 = np.abs(v0), np.abs(v1)
    total = np.sum(h[same] * (a0[same] + a1[same]) / 2.0)
    cross = ~same
    total += np.sum(h[cross] * (v0[cross] ** 2 + v1[cross] ** 2) / (2.0 * (a0[cross] + a1[cross])))
    return float(total)


def norm(x: GridFunction, kind: str = "W11", q: float | None = None) -> float:
    """L1, Linf, Lq or W^{1,1} norm of a piecewise-linear function.

    The L1 part is exact.  For ``Lq`` each sign-free piece is integrated
    with an 8-point Gauss rule.  ``W11`` is ``L1(x) + L1(x')``.
    """
    if kind == "L1":
        return _l1_linear(x)
    if kind == "Linf":
        return float(np.max(np.abs(x.values)))
    if kind == "W11":
        return _l1_linear(x) + float(np.sum(np.abs(x.slopes) * x.mesh.widths))
    if kind == "Lq":
        if q is None or not 1.0 < q < math.inf:
            raise ConfigurationError(f"Lq norm needs 1 < q < inf, got {q}")
        t0, t1, v0, v1 = _sign_free_pieces(x)
        gx, gw = gauss_legendre(8)
        vals = v0[:, None] + (v1 - v0)[:, None] * gx[None, :]
        integral = np.sum((t1 - t0)[:, None] * gw[None, :] * np.abs(vals) ** q)
        return float(integral ** (1.0 / q))
    raise ConfigurationError(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def antiderivative(mesh: Mesh, g, start: float = 0.0) -> GridFunction:
    """Integral from ``a`` of a cellwise-constant field ``g``, plus ``start``."""
    g = np.asarray(g, dtype=float)
    if g.shape != (mesh.n_cells,):
        raise MeshMismatchError(f"expected {mesh.n_cells} cell values, got shape {g.shape}")
    return GridFunction.from_increments(mesh, start, g * mesh.widths)


def _gauss_sum(w, nodes: np.ndarray, order: int) -> float:
    gx, gw = gauss_legendre(order)
    h = np.diff(nodes)[:, None]
    pts = nodes[:-1, None] + h * gx[None, :]
    vals = w(pts)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        where = float(pts[bad][0])
        raise IntegrandDomainError(f"integrand is not finite at t={where!r}", where)
    return float(np.sum(vals * h * gw[None, :]))


def integrate_singular(w: Callable, mesh: Mesh, order: int = 3) -> float:
    """Integral of ``w`` over the mesh with open Gauss rules and one Richardson step.

    ``w`` may blow up at singular nodes; it is only sampled strictly inside
    cells.  The cellwise rule is applied on the mesh and on its uniform
    bisection, and the two sums are extrapolated assuming order ``2*order``.
    """
    wv = _vectorized(w)
    coarse = _gauss_sum(wv, mesh.nodes, order)
    fine_nodes = np.sort(np.concatenate((mesh.nodes, mesh.midpoints)))
    fine = _gauss_sum(wv, fine_nodes, order)
    return fine + (fine - coarse) / (4.0 ** order - 1.0)
