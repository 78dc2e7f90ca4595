"""Truncation of a function between two envelopes, and of a slope field."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, OrderingError
from .mesh import CONSISTENCY_RTOL, GridFunction, consistency_defect

ORDER_TOL = 0.0


def _crossings(mesh, d: np.ndarray) -> np.ndarray:
    """Abscissae where the piecewise-linear difference ``d`` changes sign strictly."""
    d0, d1 = d[:-1], d[1:]
    cross = d0 * d1 < 0.0
    t0 = mesh.nodes[:-1][cross]
    t1 = mesh.nodes[1:][cross]
    tc = t0 + (t1 - t0) * (d0[cross] / (d0[cross] - d1[cross]))
    return tc[(tc > t0) & (tc < t1)]


def clamp_fn(x: GridFunction, lower: GridFunction, upper: GridFunction) -> GridFunction:
    """Pointwise max(lower, min(x, upper)), exact for piecewise-linear data.

    Crossing points of ``x`` with either envelope are inserted as nodes, so
    on every cell of the result a single one of the three functions is
    active and the result's slope is that function's slope.
    """
    mesh = x.mesh.union(lower.mesh).union(upper.mesh)
    lo, up = lower.on_mesh(mesh), upper.on_mesh(mesh)
    if np.any(lo.values > up.values + ORDER_TOL):
        i = int(np.argmax(lo.values - up.values))
        raise OrderingError(
            f"lower envelope exceeds upper envelope at t={mesh.nodes[i]!r} "
            f"({lo.values[i]!r} > {up.values[i]!r})"
        )
    xm = x.on_mesh(mesh)
    cross_lo = _crossings(mesh, xm.values - lo.values)
    cross_up = _crossings(mesh, xm.values - up.values)
    if cross_lo.size or cross_up.size:
        mesh = mesh.with_nodes(np.concatenate((cross_lo, cross_up)))
        xm, lo, up = xm.on_mesh(mesh), lo.on_mesh(mesh), up.on_mesh(mesh)
    xv, lv, uv = xm.values, lo.values, up.values
    values = np.maximum(lv, np.minimum(xv, uv))
    # x meets the envelope at a crossing; taking the envelope's value keeps the
    # rounding of the abscissa (|x'| ulp(t)) out of the envelope-side cell
    values[np.searchsorted(mesh.nodes, cross_lo)] = lv[np.searchsorted(mesh.nodes, cross_lo)]
    values[np.searchsorted(mesh.nodes, cross_up)] = uv[np.searchsorted(mesh.nodes, cross_up)]
    # after crossing insertion the active piece is decided at cell midpoints;
    # ties go to x, which makes the clamp exactly idempotent
    xc, lc, uc = (0.5 * (v[:-1] + v[1:]) for v in (xv, lv, uv))
    below = xc < lc
    above = xc > uc
    slopes = np.where(below, lo.slopes, np.where(above, up.slopes, xm.slopes))
    # a crossing closer to a node than t can resolve is not inserted; on such a
    # cell the midpoint piece is inactive at a plain end node, and the chord is
    # the only slope consistent with the clamped values
    piece = np.where(below, -1, np.where(above, 1, 0))
    node_piece = np.where(xv < lv, -1, np.where(xv > uv, 1, 0))
    crossing = np.zeros(xv.size, dtype=bool)
    crossing[np.searchsorted(mesh.nodes, np.concatenate((cross_lo, cross_up)))] = True
    unresolved = ((piece != node_piece[:-1]) & ~crossing[:-1]) | ((piece != node_piece[1:]) & ~crossing[1:])
    defect, allowed = consistency_defect(mesh, values, slopes)
    value_tol = CONSISTENCY_RTOL * (1.0 + np.abs(values[:-1]) + np.abs(values[1:]))
    bad = (unresolved & (defect > value_tol)) | (defect > allowed)
    if np.any(bad):
        slopes = np.where(bad, np.diff(values) / mesh.widths, slopes)
    return GridFunction(mesh, values, slopes)


def clamp_derivative(slopes, gamma) -> np.ndarray:
    """Clamp each cell slope into [-gamma_i, gamma_i]."""
    if isinstance(slopes, GridFunction):
        slopes = slopes.slopes
    slopes = np.asarray(slopes, dtype=float)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), slopes.shape)
    if np.any(gamma < 0.0):
        raise ConfigurationError("slope bound gamma must be nonnegative")
    return np.clip(slopes, -gamma, gamma)
