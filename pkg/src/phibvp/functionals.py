"""Functional terms G_x and boundary functionals H_a, H_b.

Every shipped variant is monotone (x <= y implies G_x <= G_y and
H[x] <= H[y]) and comes with an explicit bound and continuity modulus, so
the hypotheses on these operators hold by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .mesh import GridFunction, gauss_legendre


class FunctionalTerm:
    """Base class.  ``evaluate`` gives exact values of G_x at arbitrary points."""

    name = "abstract"

    def validate(self, a: float, b: float) -> None:
        pass

    def evaluate(self, x: GridFunction, t) -> np.ndarray:
        raise NotImplementedError

    def apply(self, x: GridFunction) -> GridFunction:
        """G_x sampled at the nodes of ``x`` (piecewise-linear between them)."""
        self.validate(x.mesh.a, x.mesh.b)
        return GridFunction.from_values(x.mesh, self.evaluate(x, x.mesh.nodes))

    def eta(self, r: float, length: float) -> float:
        """Bound on sup|G_x| over ``sup|x| <= r`` on an interval of this length."""
        return float(r)

    def lipschitz(self, r: float, length: float) -> float:
        """Sup-norm Lipschitz constant on the ball of radius ``r``."""
        return 1.0

    def to_dict(self) -> dict:
        return {"variant": self.name}


@dataclass(frozen=True)
class IdentityTerm(FunctionalTerm):
    name = "identity"

    def evaluate(self, x, t):
        return np.asarray(x(t), dtype=float)


@dataclass(frozen=True)
class IntegralOfPower(FunctionalTerm):
    """G_x(t) = integral from a to t of x^e, e an odd positive integer."""

    exponent: int = 3
    name = "integral_power"

    def __post_init__(self):
        e = self.exponent
        if int(e) != e or e < 1 or int(e) % 2 == 0:
            raise ConfigurationError(f"exponent must be an odd positive integer, got {e}")
        object.__setattr__(self, "exponent", int(e))

    def _rule(self):
        # exact for polynomials of degree exponent
        return gauss_legendre(self.exponent // 2 + 1)

    def cell_integrals(self, x: GridFunction) -> np.ndarray:
        gx, gw = self._rule()
        v0 = x.values[:-1, None]
        dv = np.diff(x.values)[:, None]
        vals = (v0 + dv * gx[None, :]) ** self.exponent
        return x.mesh.widths * np.sum(vals * gw[None, :], axis=1)

    def evaluate(self, x, t):
        t = np.asarray(t, dtype=float)
        mesh = x.mesh
        cum = np.concatenate(([0.0], np.cumsum(self.cell_integrals(x))))
        i = mesh.locate(t)
        left = mesh.nodes[i]
        part = t - left
        gx, gw = self._rule()
        pts = left[..., None] + part[..., None] * gx
        vals = np.asarray(x(pts)) ** self.exponent
        return cum[i] + part * np.sum(vals * gw, axis=-1)

    def eta(self, r, length):
        return float(length) * float(r) ** self.exponent

    def lipschitz(self, r, length):
        return self.exponent * float(length) * float(r) ** (self.exponent - 1)

    def to_dict(self):
        return {"variant": self.name, "exponent": self.exponent}


@dataclass(frozen=True)
class Delay(FunctionalTerm):
    """G_x(t) = x(t - tau) for t >= a + tau, and x(a) before that."""

    tau: float
    name = "delay"

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise ConfigurationError(f"delay must be positive, got {self.tau}")
        object.__setattr__(self, "tau", float(self.tau))

    def validate(self, a, b):
        if not 0.0 < self.tau < b - a:
            raise ConfigurationError(f"delay tau={self.tau} must lie in (0, {b - a})")

    def evaluate(self, x, t):
        self.validate(x.mesh.a, x.mesh.b)
        t = np.asarray(t, dtype=float)
        a = x.mesh.a
        return np.where(t >= a + self.tau, x(np.maximum(t - self.tau, a)), x.values[0])

    def to_dict(self):
        return {"variant": self.name, "tau": self.tau}


@dataclass(frozen=True)
class RunningMax(FunctionalTerm):
    """G_x(t) = max of x over [a, t]."""

    name = "running_max"

    def evaluate(self, x, t):
        t = np.asarray(t, dtype=float)
        prefix = np.maximum.accumulate(x.values)
        i = x.mesh.locate(t)
        return np.maximum(prefix[i], x(t))


def apply_functional(G: FunctionalTerm, x: GridFunction) -> GridFunction:
    return G.apply(x)


def functional_at(G: FunctionalTerm, x: GridFunction, t) -> np.ndarray:
    return G.evaluate(x, t)


def eta_bound(G: FunctionalTerm, r: float, length: float = 1.0) -> float:
    if r < 0:
        raise ConfigurationError("radius must be nonnegative")
    return G.eta(r, length)


class BoundaryFunctional:
    """Continuous nondecreasing real functional of the whole solution."""

    name = "abstract"

    def validate(self, a: float, b: float) -> None:
        pass

    def apply(self, x: GridFunction) -> float:
        raise NotImplementedError

    def modulus(self, delta: float, length: float) -> float:
        """Bound on |H[x] - H[y]| when sup|x - y| <= delta."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"variant": self.name}


@dataclass(frozen=True)
class Constant(BoundaryFunctional):
    value: float = 0.0
    name = "constant"

    def apply(self, x):
        return float(self.value)

    def modulus(self, delta, length):
        return 0.0

    def to_dict(self):
        return {"variant": self.name, "value": float(self.value)}


POST_MAPS = ("identity", "cbrt", "max_with")


@dataclass(frozen=True)
class PointEval(BoundaryFunctional):
    """post(x(t_star)); ``max_with`` means max(x(t_star), c)."""

    t_star: float
    post: str = "identity"
    c: float | None = None
    name = "point"

    def __post_init__(self):
        if self.post not in POST_MAPS:
            raise ConfigurationError(f"unknown post map {self.post!r}; expected one of {POST_MAPS}")
        if (self.post == "max_with") != (self.c is not None):
            raise ConfigurationError("the constant c is required exactly for post='max_with'")

    def validate(self, a, b):
        if not a <= self.t_star <= b:
            raise DomainError(f"evaluation point {self.t_star} lies outside [{a}, {b}]")

    def apply(self, x):
        self.validate(x.mesh.a, x.mesh.b)
        v = float(x(self.t_star))
        if self.post == "cbrt":
            return float(np.cbrt(v))
        if self.post == "max_with":
            return max(v, float(self.c))
        return v

    def modulus(self, delta, length):
        if self.post == "cbrt":
            return 2.0 ** (2.0 / 3.0) * float(delta) ** (1.0 / 3.0)
        return float(delta)

    def to_dict(self):
        out = {"variant": self.name, "t_star": float(self.t_star), "post": self.post}
        if self.c is not None:
            out["c"] = float(self.c)
        return out


@dataclass(frozen=True)
class MeanShift(BoundaryFunctional):
    """scale * integral over [a, b] of (x + shift), with scale >= 0."""

    scale: float
    shift: float = 0.0
    name = "mean_shift"

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale >= 0.0):
            raise ConfigurationError(f"scale must be nonnegative for monotonicity, got {self.scale}")

    def apply(self, x):
        trap = 0.5 * np.sum((x.values[:-1] + x.values[1:]) * x.mesh.widths)
        return float(self.scale * (trap + self.shift * x.mesh.length))

    def modulus(self, delta, length):
        return float(self.scale * length * delta)

    def to_dict(self):
        return {"variant": self.name, "scale": float(self.scale), "shift": float(self.shift)}


def apply_boundary(H: BoundaryFunctional, x: GridFunction) -> float:
    return H.apply(x)


FUNCTIONAL_VARIANTS = {
    "identity": IdentityTerm,
    "integral_power": IntegralOfPower,
    "delay": Delay,
    "running_max": RunningMax,
}
BOUNDARY_VARIANTS = {
    "constant": Constant,
    "point": PointEval,
    "mean_shift": MeanShift,
}
