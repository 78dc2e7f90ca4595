"""Problem data, solver configuration, and the discretized problem."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import expr as ex
from .errors import ConfigurationError, DomainError, IntegrandDomainError, OrderingError
from .functionals import BoundaryFunctional, FunctionalTerm
from .mesh import DEFAULT_CELLS, DEFAULT_GRADING, GridFunction, Mesh, gauss_legendre, make_graded_mesh
from .phi import PhiOperator

# graded sub-rule for product weights on cells touching a zero of k
PRODUCT_LEVELS = 40
PRODUCT_ORDER = 8


def _as_expr(e, allowed):
    if isinstance(e, (ex.Num, ex.Var, ex.Neg, ex.BinOp, ex.Call)):
        extra = ex.variables(e) - set(allowed)
        if extra:
            raise ConfigurationError(f"expression uses undeclared variables {sorted(extra)}")
        return e
    return ex.parse(str(e), allowed)


@dataclass(frozen=True)
class Envelope:
    """A lower or upper solution: a constant or a piecewise-linear table."""

    constant: float | None = None
    t: tuple = ()
    x: tuple = ()

    def __post_init__(self):
        if self.constant is not None:
            if self.t or self.x:
                raise ConfigurationError("an envelope is either a constant or a table")
            object.__setattr__(self, "constant", float(self.constant))
            return
        t = tuple(float(v) for v in self.t)
        x = tuple(float(v) for v in self.x)
        if len(t) < 2 or len(t) != len(x):
            raise ConfigurationError("an envelope table needs matching t and x columns of length >= 2")
        if any(t1 <= t0 for t0, t1 in zip(t, t[1:])):
            raise ConfigurationError("envelope abscissae must be strictly increasing")
        if not all(math.isfinite(v) for v in t + x):
            raise ConfigurationError("envelope entries must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)

    @classmethod
    def const(cls, c: float) -> "Envelope":
        return cls(constant=c)

    @classmethod
    def table(cls, t, x) -> "Envelope":
        return cls(t=tuple(t), x=tuple(x))

    @property
    def kinks(self) -> tuple:
        return self.t[1:-1] if self.constant is None else ()

    def validate(self, a: float, b: float):
        if self.constant is None and (self.t[0] != a or self.t[-1] != b):
            raise DomainError(f"envelope table must span exactly [{a}, {b}]")

    def on_mesh(self, mesh: Mesh) -> GridFunction:
        if self.constant is not None:
            return GridFunction.constant(mesh, self.constant)
        missing = set(self.kinks) - set(mesh.nodes.tolist())
        if missing:
            raise DomainError(f"envelope kinks {sorted(missing)} are not mesh nodes")
        return GridFunction.from_values(mesh, np.interp(mesh.nodes, self.t, self.x))

    def to_dict(self) -> dict:
        if self.constant is not None:
            return {"constant": self.constant}
        return {"table": {"t": list(self.t), "x": list(self.x)}}


@dataclass(frozen=True)
class NagumoData:
    """Growth data ``H, psi(s), l(t), mu(t), q``; each may also depend on ``R``."""

    H: object
    psi: object
    l: object
    mu: object
    q: float

    def __post_init__(self):
        object.__setattr__(self, "H", _as_expr(self.H, ("R",)))
        object.__setattr__(self, "psi", _as_expr(self.psi, ("s", "R")))
        object.__setattr__(self, "l", _as_expr(self.l, ("t", "R")))
        object.__setattr__(self, "mu", _as_expr(self.mu, ("t", "R")))
        q = float(self.q)
        if not q > 1.0:
            raise ConfigurationError(f"Nagumo exponent q must satisfy 1 < q <= inf, got {q}")
        object.__setattr__(self, "q", q)

    def H_at(self, R: float) -> float:
        H = float(ex.evaluate(self.H, R=R))
        if not H > 0.0:
            raise ConfigurationError(f"Nagumo threshold H must be positive, got {H}")
        return H

    def psi_at(self, s, R: float):
        return ex.evaluate(self.psi, s=np.asarray(s, dtype=float), R=R)

    def l_at(self, t, R: float):
        return ex.evaluate(self.l, t=np.asarray(t, dtype=float), R=R)

    def mu_at(self, t, R: float):
        return ex.evaluate(self.mu, t=np.asarray(t, dtype=float), R=R)

    @property
    def holder_exponent(self) -> float:
        """(q - 1)/q, equal to 1 for q = inf."""
        return 1.0 if math.isinf(self.q) else (self.q - 1.0) / self.q

    def to_dict(self) -> dict:
        return {
            "H": ex.to_source(self.H),
            "psi": ex.to_source(self.psi),
            "l": ex.to_source(self.l),
            "mu": ex.to_source(self.mu),
            "q": "inf" if math.isinf(self.q) else self.q,
        }


@dataclass(frozen=True)
class SolverConfig:
    cells: int = DEFAULT_CELLS
    grading: float = DEFAULT_GRADING
    damping: float = 0.5
    max_iters: int = 200
    fp_tol: float = 1e-10
    z_tol: float = 1e-13
    margin_N: float = 1.01
    margin_L: float = 1.05
    anderson: int = 3
    precondition: bool = True
    quad_order: int = 4
    seed: int = 0

    def __post_init__(self):
        if int(self.cells) != self.cells or self.cells < 2:
            raise ConfigurationError(f"cells must be an integer >= 2, got {self.cells}")
        if not self.grading >= 1.0:
            raise ConfigurationError(f"grading must be >= 1, got {self.grading}")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigurationError(f"damping must lie in (0, 1], got {self.damping}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ConfigurationError(f"max_iters must be a nonnegative integer, got {self.max_iters}")
        for name in ("fp_tol", "z_tol"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"{name} must be positive")
        for name in ("margin_N", "margin_L"):
            if not getattr(self, name) > 1.0:
                raise ConfigurationError(f"{name} must exceed 1 (strict inequality), got {getattr(self, name)}")
        if int(self.anderson) != self.anderson or self.anderson < 0:
            raise ConfigurationError("anderson memory must be a nonnegative integer")
        if not isinstance(self.precondition, bool):
            raise ConfigurationError("precondition must be a boolean")
        if int(self.quad_order) != self.quad_order or self.quad_order < 1:
            raise ConfigurationError("quad_order must be a positive integer")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class ProblemSpec:
    """The boundary value problem

        (Phi(k x'))' + f(t, G_x(t)) rho(t, x') = 0,  x(a) = H_a[x],  x(b) = H_b[x],

    together with a lower solution ``alpha``, an upper solution ``beta`` and
    the growth (Nagumo) data.
    """

    a: float
    b: float
    phi: PhiOperator
    k: object
    f: object
    rho: object
    G: FunctionalTerm
    Ha: BoundaryFunctional
    Hb: BoundaryFunctional
    alpha: Envelope
    beta: Envelope
    nagumo: NagumoData
    singular: tuple = ()
    breakpoints: tuple = ()
    name: str = "problem"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ConfigurationError(f"need a finite interval a < b, got [{a}, {b}]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "k", _as_expr(self.k, ("t",)))
        object.__setattr__(self, "f", _as_expr(self.f, ("t", "z")))
        object.__setattr__(self, "rho", _as_expr(self.rho, ("t", "y")))
        for name in ("singular", "breakpoints"):
            pts = tuple(sorted({float(s) for s in getattr(self, name)}))
            for s in pts:
                if not a <= s <= b:
                    raise DomainError(f"{name} point {s} lies outside [{a}, {b}]")
            object.__setattr__(self, name, pts)
        self.G.validate(a, b)
        self.Ha.validate(a, b)
        self.Hb.validate(a, b)
        self.alpha.validate(a, b)
        self.beta.validate(a, b)

    @property
    def length(self) -> float:
        return self.b - self.a

    def k_at(self, t):
        return ex.evaluate(self.k, t=np.asarray(t, dtype=float))

    def f_at(self, t, z):
        return ex.evaluate(self.f, t=np.asarray(t, dtype=float), z=np.asarray(z, dtype=float))

    def rho_at(self, t, y):
        return ex.evaluate(self.rho, t=np.asarray(t, dtype=float), y=np.asarray(y, dtype=float))

    def mesh_points(self) -> tuple:
        """Points that every mesh for this problem must contain."""
        return tuple(sorted(set(self.breakpoints) | set(self.alpha.kinks) | set(self.beta.kinks)))

    def make_mesh(self, cells: int = DEFAULT_CELLS, grading: float = DEFAULT_GRADING) -> Mesh:
        return make_graded_mesh(self.a, self.b, cells, self.singular, grading, self.mesh_points())

    def discretize(self, cells: int = DEFAULT_CELLS, grading: float = DEFAULT_GRADING, order: int = 4):
        return Discretization.from_mesh(self, self.make_mesh(cells, grading), order)

    def with_(self, **kw) -> "ProblemSpec":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "interval": {"a": self.a, "b": self.b},
            "phi": {"kind": self.phi.kind, **({"p": self.phi.p} if self.phi.p is not None else {})},
            "k": {
                "expr": ex.to_source(self.k),
                "singular": list(self.singular),
                "breakpoints": list(self.breakpoints),
            },
            "f": ex.to_source(self.f),
            "rho": ex.to_source(self.rho),
            "functional": self.G.to_dict(),
            "boundary_a": self.Ha.to_dict(),
            "boundary_b": self.Hb.to_dict(),
            "alpha": self.alpha.to_dict(),
            "beta": self.beta.to_dict(),
            "nagumo": self.nagumo.to_dict(),
        }


class Discretization:
    """A problem on a fixed mesh, with the quadrature data reused everywhere.

    ``inv_k`` holds 1/k at the per-cell Gauss points and ``inv_k_weights``
    the matching weights for integrals of ``g/k``; on cells touching a zero
    of ``k`` these are product-integration weights.  ``k_eff`` is the
    harmonic cell average ``h / integral(1/k)``, finite even on cells that
    touch a zero of ``k``; ``centroids`` are the 1/k-weighted cell centres.
    """

    def __init__(self, spec: ProblemSpec, mesh: Mesh, order: int = 4):
        if mesh.a != spec.a or mesh.b != spec.b:
            raise DomainError("mesh does not cover the problem interval")
        missing = set(spec.singular) - set(mesh.singular_points)
        if missing:
            raise DomainError(f"singular points {sorted(missing)} are not marked on the mesh")
        self.spec = spec
        self.mesh = mesh
        self.order = int(order)
        self.alpha = spec.alpha.on_mesh(mesh)
        self.beta = spec.beta.on_mesh(mesh)
        bad = self.alpha.values > self.beta.values
        if np.any(bad):
            i = int(np.argmax(bad))
            raise OrderingError(
                f"lower solution exceeds upper solution at t={mesh.nodes[i]!r}"
            )
        self.points, self.weights = mesh.quadrature(self.order)
        k = np.asarray(spec.k_at(self.points), dtype=float)
        if np.any(~np.isfinite(k)) or np.any(k <= 0.0):
            bad = ~np.isfinite(k) | (k <= 0.0)
            where = float(self.points[bad][0])
            raise IntegrandDomainError(
                f"k must be positive inside cells; k({where!r}) = {k[bad][0]!r}", where
            )
        self.k_points = k
        self.inv_k = 1.0 / k
        # wk[i, j] integrates g/k over cell i from samples of g at its Gauss points
        wk = self.weights * self.inv_k
        for i in self._singular_cells():
            wk[i] = self._product_weights(i)
        wk.setflags(write=False)
        self.inv_k_weights = wk
        self.inv_k_cell = np.sum(wk, axis=1)
        self.k_eff = mesh.widths / self.inv_k_cell
        self.centroids = np.sum(wk * self.points, axis=1) / self.inv_k_cell

    def _singular_cells(self) -> list[int]:
        nodes = self.mesh.nodes
        cells = set()
        for s in self.mesh.singular_points:
            i = int(np.searchsorted(nodes, s))
            cells.update(c for c in (i - 1, i) if 0 <= c < self.mesh.n_cells)
        return sorted(cells)

    def _product_weights(self, i: int) -> np.ndarray:
        """Moments of 1/k against the Lagrange basis of the Gauss points of cell i.

        The moments come from a composite rule graded geometrically toward
        each singular end, so an integrable blow-up of 1/k is resolved.
        Falls back to plain Gauss weights if a moment comes out negative.
        """
        t0, t1 = self.mesh.nodes[i], self.mesh.nodes[i + 1]
        h = t1 - t0
        sing = set(self.mesh.singular_points)
        ends = [e for e, t in ((0.0, t0), (1.0, t1)) if t in sing]
        # reference breakpoints in [0, 1]
        levels = 0.5 ** np.arange(1, PRODUCT_LEVELS + 1)
        cuts = {0.0, 0.5, 1.0}
        for e in ends:
            cuts.update(0.5 * levels if e == 0.0 else 1.0 - 0.5 * levels)
        cuts = np.array(sorted(cuts))
        gx, gw = gauss_legendre(PRODUCT_ORDER)
        lo, wid = cuts[:-1, None], np.diff(cuts)[:, None]
        s = (lo + wid * gx[None, :]).ravel()
        ws = (wid * gw[None, :]).ravel()
        kv = np.asarray(self.spec.k_at(t0 + h * s), dtype=float)
        if np.any(~np.isfinite(kv)) or np.any(kv <= 0.0):
            return self.weights[i] * self.inv_k[i]
        nodes, _ = gauss_legendre(self.order)
        basis = np.ones((self.order, s.size))
        for j in range(self.order):
            for m in range(self.order):
                if m != j:
                    basis[j] *= (s - nodes[m]) / (nodes[j] - nodes[m])
        moments = h * (basis @ (ws / kv))
        if np.any(moments <= 0.0):
            return self.weights[i] * self.inv_k[i]
        return moments

    @classmethod
    def from_mesh(cls, spec: ProblemSpec, mesh: Mesh, order: int = 4) -> "Discretization":
        return cls(spec, mesh, order)

    @cached_property
    def k_sup(self) -> float:
        """Essential supremum of k, sampled at interior quadrature points."""
        return float(np.max(self.k_points))

    @cached_property
    def k_nodes(self) -> np.ndarray:
        return np.asarray(self.spec.k_at(self.mesh.nodes), dtype=float)
