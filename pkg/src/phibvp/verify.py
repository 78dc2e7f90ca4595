"""Numerical certificates for solutions, lower/upper solutions and hypotheses.

A certificate records the worst violation of one inequality over the
samples it inspects, where it occurred, and the tolerance it was held to;
it passes exactly when the worst violation does not exceed the tolerance.
Statements that hold "almost everywhere" are checked at cell samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import ProblemConstants, compute_M
from .errors import DivergenceError, ExprError, IntegrandDomainError, PhiBVPError
from .mesh import GridFunction, gauss_legendre, integrate_singular
from .problem import Discretization, SolverConfig

BOUNDARY_TOL = 1e-8
BAND_RTOL = 1e-8
RESIDUAL_RTOL = 1e-4
DERIVATIVE_RTOL = 1e-6
PENALTY_TOL = 1e-8
# innermost graded cells must shrink their contributions by at least this factor
TAIL_RATIO_TOL = 0.999


@dataclass(frozen=True)
class Certificate:
    name: str
    passed: bool
    worst_violation: float
    location: float | None
    tolerance: float
    detail: str = ""

    @classmethod
    def of(cls, name, worst, location, tolerance, detail=""):
        worst = float(worst)
        return cls(name, bool(worst <= tolerance), worst, None if location is None else float(location), float(tolerance), detail)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "worst_violation": self.worst_violation if math.isfinite(self.worst_violation) else str(self.worst_violation),
            "location": self.location,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }

    def line(self) -> str:
        where = "-" if self.location is None else f"{self.location:.6g}"
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<28} worst={self.worst_violation:.3e}  tol={self.tolerance:.3e}  at={where}  {self.detail}".rstrip()


def _check_mesh(x: GridFunction, disc: Discretization) -> GridFunction:
    if x.mesh is disc.mesh:
        return x
    if x.mesh.nodes.shape != disc.mesh.nodes.shape or not np.array_equal(x.mesh.nodes, disc.mesh.nodes):
        from .errors import MeshMismatchError

        raise MeshMismatchError("candidate is not defined on the discretization mesh")
    return GridFunction(disc.mesh, x.values, x.slopes)


@dataclass
class Residual:
    """Nodal residual of (Phi(k x'))' + f rho on the dual cells [c_{i-1}, c_i]."""

    nodes: np.ndarray
    values: np.ndarray
    widths: np.ndarray
    flux: np.ndarray
    source_abs: float
    source_max: float
    source_local: np.ndarray | None = None

    @property
    def defects(self) -> np.ndarray:
        return self.values * self.widths

    @property
    def l1(self) -> float:
        return float(np.sum(np.abs(self.defects)))


def _source_on_dual(x: GridFunction, disc: Discretization):
    """Integrals of f(t, G_x) rho(t, x') over [c_{i-1}, t_i] and [t_i, c_i]."""
    spec = disc.spec
    mesh = disc.mesh
    gx, gw = gauss_legendre(disc.order)
    c = disc.centroids
    t = mesh.nodes
    # right part of cell i-1 and left part of cell i, for interior nodes i
    lo = np.concatenate((c[:-1], t[1:-1]))
    hi = np.concatenate((t[1:-1], c[1:]))
    slope = np.concatenate((x.slopes[:-1], x.slopes[1:]))
    pts = lo[:, None] + (hi - lo)[:, None] * gx[None, :]
    G = spec.G.evaluate(x, pts)
    src = spec.f_at(pts, G) * spec.rho_at(pts, np.broadcast_to(slope[:, None], pts.shape))
    pieces = np.sum(src * gw[None, :], axis=1) * (hi - lo)
    abs_pieces = np.sum(np.abs(src) * gw[None, :], axis=1) * (hi - lo)
    n = mesh.n_cells - 1
    return pieces[:n] + pieces[n:], abs_pieces[:n] + abs_pieces[n:], src


def residual_ode(x: GridFunction, disc: Discretization) -> Residual:
    """Residual of the differential equation on the dual mesh.

    With v_i = Phi(k_i x'_i) on cell i (k_i the harmonic cell mean of k) and
    c_i the 1/k-weighted cell centre, the residual at interior node t_i is

        r_i = (v_i - v_{i-1} + integral of f rho over [c_{i-1}, c_i]) / (c_i - c_{i-1}).
    """
    x = _check_mesh(x, disc)
    v = disc.spec.phi.apply(disc.k_eff * x.slopes)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    widths = np.diff(disc.centroids)
    if x.mesh.n_cells < 2:
        empty = np.zeros(0)
        return Residual(empty, empty, empty, v, 0.0, 0.0, empty)
    source, local, samples = _source_on_dual(x, disc)
    defect = np.diff(v) + source
    return Residual(
        x.mesh.nodes[1:-1],
        defect / widths,
        widths,
        v,
        float(np.sum(np.abs(source))),
        float(np.max(np.abs(samples))),
        local,
    )


def continuity_tolerance(res: Residual, t0: float | None = None):
    """Mesh-scale bound on the flux jump at interior nodes.

    An absolutely continuous Phi(k x') can change across the dual cell
    [c_{i-1}, c_i] by at most the integral of |f rho| there; the bound is
    twice that plus twice the dual width.  Returns the array over interior
    nodes, or the value at the node ``t0``.
    """
    tau = 2.0 * (res.widths + res.source_local)
    if t0 is None:
        return tau
    i = int(np.searchsorted(res.nodes, t0))
    if i >= res.nodes.size or res.nodes[i] != t0:
        raise ValueError(f"{t0} is not an interior node")
    return float(tau[i])


def slope_jump(x: GridFunction, t0: float) -> float:
    """|x'(t0+) - x'(t0-)| at a node t0."""
    i = int(np.searchsorted(x.mesh.nodes, t0))
    if not (0 < i < x.mesh.n_cells) or x.mesh.nodes[i] != t0:
        raise ValueError(f"{t0} is not an interior node")
    return float(abs(x.slopes[i] - x.slopes[i - 1]))


def flux_jump(x: GridFunction, disc: Discretization, t0: float) -> float:
    """|Phi(k x')(t0+) - Phi(k x')(t0-)| at a node t0."""
    i = int(np.searchsorted(disc.mesh.nodes, t0))
    v = disc.spec.phi.apply(disc.k_eff[i - 1 : i + 1] * x.slopes[i - 1 : i + 1])
    return float(abs(v[1] - v[0]))


def _boundary_certs(x, disc, side=None):
    spec = disc.spec
    Ha, Hb = spec.Ha.apply(x), spec.Hb.apply(x)
    xa, xb = float(x.values[0]), float(x.values[-1])
    if side is None:
        return [
            Certificate.of("boundary_a", abs(xa - Ha), spec.a, BOUNDARY_TOL, f"x(a)={xa:.12g} H_a[x]={Ha:.12g}"),
            Certificate.of("boundary_b", abs(xb - Hb), spec.b, BOUNDARY_TOL, f"x(b)={xb:.12g} H_b[x]={Hb:.12g}"),
        ]
    sign = 1.0 if side == "lower" else -1.0
    rel = "<=" if side == "lower" else ">="
    return [
        Certificate.of(f"{side}_boundary_a", max(0.0, sign * (xa - Ha)), spec.a, BOUNDARY_TOL, f"x(a) {rel} H_a[x]: {xa:.12g} vs {Ha:.12g}"),
        Certificate.of(f"{side}_boundary_b", max(0.0, sign * (xb - Hb)), spec.b, BOUNDARY_TOL, f"x(b) {rel} H_b[x]: {xb:.12g} vs {Hb:.12g}"),
    ]


def check_lower_upper(x: GridFunction, disc: Discretization, side: str = "lower") -> list[Certificate]:
    """Lower: (Phi(k x'))' + f rho >= 0 a.e., x(a) <= H_a[x], x(b) <= H_b[x]; upper reversed."""
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    x = _check_mesh(x, disc)
    res = residual_ode(x, disc)
    tol = RESIDUAL_RTOL * (1.0 + res.source_max)
    sign = 1.0 if side == "lower" else -1.0
    if res.values.size:
        viol = np.maximum(0.0, -sign * res.values) + 0.0  # no negative zeros
        i = int(np.argmax(viol))
        ode = Certificate.of(f"{side}_differential_inequality", viol[i], res.nodes[i], tol)
    else:
        ode = Certificate.of(f"{side}_differential_inequality", 0.0, None, tol)
    return [ode] + _boundary_certs(x, disc, side)


def check_solution(x: GridFunction, disc: Discretization, consts: ProblemConstants) -> list[Certificate]:
    """Residual, boundary equalities, band, sup and derivative bounds, flux continuity."""
    x = _check_mesh(x, disc)
    t = disc.mesh.nodes
    res = residual_ode(x, disc)
    certs = [
        Certificate.of(
            "ode_residual_l1", res.l1, None, RESIDUAL_RTOL * (1.0 + res.source_abs),
            f"integral |f rho| = {res.source_abs:.3e}",
        )
    ]
    certs += _boundary_certs(x, disc)
    band_tol = BAND_RTOL * (1.0 + consts.M)
    below = disc.alpha.values - x.values
    above = x.values - disc.beta.values
    worst = np.maximum(below, above)
    i = int(np.argmax(worst))
    certs.append(Certificate.of("band", max(0.0, worst[i]), t[i], band_tol, "alpha <= x <= beta"))
    j = int(np.argmax(np.abs(x.values)))
    certs.append(
        Certificate.of("sup_bound", max(0.0, abs(x.values[j]) - consts.M), t[j], band_tol, f"sup|x| <= M = {consts.M:.6g}")
    )
    K = np.abs(disc.k_eff * x.slopes)
    j = int(np.argmax(K))
    certs.append(
        Certificate.of(
            "derivative_bound", max(0.0, K[j] - consts.L_M), disc.mesh.midpoints[j],
            DERIVATIVE_RTOL * consts.L_M, f"sup|k x'| = {K[j]:.6g} <= L_M = {consts.L_M:.6g}",
        )
    )
    jumps = np.abs(np.diff(res.flux))
    if jumps.size:
        tau = continuity_tolerance(res)
        ratio = jumps / tau
        j = int(np.argmax(ratio))
        certs.append(
            Certificate.of(
                "flux_continuity", ratio[j], t[j + 1], 1.0,
                f"jump of Phi(k x') / local bound; jump {jumps[j]:.3e} vs {tau[j]:.3e}",
            )
        )
    return certs


def fixed_point_certificates(x, step, config: SolverConfig) -> list[Certificate]:
    """||x - A x||_W11 <= 2 fp_tol and the arctan penalty vanishes."""
    from .mesh import norm

    fp = norm(step.value - x, "W11")
    pen = np.abs(step.penalty)
    i = int(np.argmax(pen))
    return [
        Certificate.of("fixed_point", fp, None, 2.0 * config.fp_tol, "||x - A x||_W11"),
        Certificate.of("penalty", pen[i], x.mesh.midpoints[i], PENALTY_TOL, "|arctan(x - Tx)|"),
    ]


# --------------------------------------------------------------------------
# hypothesis audits


def graded_tail_ratio(weight: np.ndarray, disc: Discretization):
    """Largest ratio of successive innermost cell contributions toward a zero of k.

    ``weight`` holds integrand samples at the quadrature points.  A ratio
    below one means the contributions shrink geometrically, which is how an
    integrable endpoint singularity shows up on the graded mesh.
    Returns (ratio, location); ratio is 0 without singular points.
    """
    mesh = disc.mesh
    contrib = np.sum(np.abs(weight) * disc.weights, axis=1)
    worst, where = 0.0, None
    for s in mesh.singular_points:
        i = int(np.searchsorted(mesh.nodes, s))
        sides = []
        if i >= 4:
            sides.append([i - 2, i - 3, i - 4])
        if i + 3 <= mesh.n_cells:
            sides.append([i + 1, i + 2, i + 3])
        for cells in sides:
            c = contrib[cells]
            for inner, outer in ((c[0], c[1]), (c[1], c[2])):
                if outer > 0.0:
                    r = inner / outer
                elif inner > 0.0:
                    r = math.inf
                else:
                    r = 0.0
                if r > worst:
                    worst, where = r, s
    return worst, where


def _integrability_cert(name, fn, disc, detail=""):
    try:
        vals = np.asarray(fn(disc.points), dtype=float)
        vals = np.broadcast_to(vals, disc.points.shape)
        if not np.all(np.isfinite(vals)):
            bad = ~np.isfinite(vals)
            return Certificate.of(name, math.inf, disc.points[bad][0], TAIL_RATIO_TOL, "non-finite sample")
        total = integrate_singular(lambda t: np.abs(fn(t)), disc.mesh)
    except (IntegrandDomainError, ExprError) as err:
        return Certificate.of(name, math.inf, getattr(err, "abscissa", None), TAIL_RATIO_TOL, str(err))
    ratio, where = graded_tail_ratio(vals, disc)
    if not math.isfinite(total):
        ratio = math.inf
    return Certificate.of(name, ratio, where, TAIL_RATIO_TOL, f"integral = {total:.6g}{detail}")


def _random_ordered_pairs(disc, M, rng, count):
    mesh = disc.mesh
    n = mesh.nodes.size
    for _ in range(count):
        x = rng.uniform(-M, M, n)
        y = np.minimum(x + rng.uniform(0.0, 2.0 * M, n) * (rng.random(n) < 0.7), M)
        yield GridFunction.from_values(mesh, x), GridFunction.from_values(mesh, np.maximum(x, y))


def audit_hypotheses(disc: Discretization, consts: ProblemConstants | None = None, config: SolverConfig | None = None) -> list[Certificate]:
    """Sampled checks of the standing hypotheses on the problem data."""
    config = config or SolverConfig()
    spec = disc.spec
    mesh = disc.mesh
    rng = np.random.default_rng(config.seed)
    certs: list[Certificate] = []

    # k >= 0, 1/k integrable
    k_nodes = np.asarray(spec.k_at(mesh.nodes), dtype=float)
    k_all = np.concatenate((k_nodes, disc.k_points.ravel()))
    t_all = np.concatenate((mesh.nodes, disc.points.ravel()))
    i = int(np.argmin(k_all))
    certs.append(Certificate.of("H1_k_nonnegative", max(0.0, -k_all[i]), t_all[i], 0.0))
    certs.append(_integrability_cert("H1_inv_k_integrable", lambda t: 1.0 / spec.k_at(t), disc))

    M, _ = compute_M(disc.alpha, disc.beta, disc.k_eff * disc.alpha.slopes, disc.k_eff * disc.beta.slopes)
    eta = spec.G.eta(M, spec.length)
    tm = mesh.midpoints
    pairs = list(_random_ordered_pairs(disc, max(M, 1e-12), rng, 50))

    # G bounded by eta on the M-ball
    worst, where = 0.0, None
    for x, y in pairs:
        for u in (x, y):
            g = np.abs(spec.G.evaluate(u, mesh.nodes))
            j = int(np.argmax(g))
            if g[j] - eta > worst:
                worst, where = g[j] - eta, mesh.nodes[j]
    certs.append(Certificate.of("H2_G_bounded", worst, where, 1e-12 * (1.0 + eta), f"eta_M = {eta:.6g}"))

    # t -> f(t, G_x(t)) nondecreasing in x (kappa = 0)
    worst, where = 0.0, None
    for x, y in pairs:
        fx = spec.f_at(tm, spec.G.evaluate(x, tm))
        fy = spec.f_at(tm, spec.G.evaluate(y, tm))
        d = fx - fy
        j = int(np.argmax(d))
        if d[j] > worst:
            worst, where = d[j], tm[j]
    certs.append(Certificate.of("H3_monotone", worst, where, 1e-12 * (1.0 + eta), "f(t, G_x) <= f(t, G_y) for x <= y"))

    # boundary functionals nondecreasing
    worst = 0.0
    for x, y in pairs:
        worst = max(worst, spec.Ha.apply(x) - spec.Ha.apply(y), spec.Hb.apply(x) - spec.Hb.apply(y))
    certs.append(Certificate.of("H4_boundary_monotone", worst, None, 1e-12 * (1.0 + M), "H[x] <= H[y] for x <= y"))

    # lower and upper solutions
    lower = check_lower_upper(disc.alpha, disc, "lower")
    upper = check_lower_upper(disc.beta, disc, "upper")
    order = np.max(disc.alpha.values - disc.beta.values)
    lu = lower + upper + [Certificate.of("ordered", max(0.0, order), None, 0.0, "alpha <= beta")]
    bad = [c for c in lu if not c.passed]
    worst_c = max(lu, key=lambda c: c.worst_violation - c.tolerance)
    certs.append(
        Certificate.of(
            "H5_lower_upper", 0.0 if not bad else worst_c.worst_violation, worst_c.location if bad else None,
            0.0 if not bad else worst_c.tolerance, "; ".join(c.name for c in bad) or "alpha lower, beta upper",
        )
    )

    # constants and the psi divergence
    R = eta
    try:
        H = spec.nagumo.H_at(R)
    except PhiBVPError as err:
        certs.append(Certificate.of("H7_threshold", math.inf, None, 0.0, str(err)))
        return certs
    gamma = None
    try:
        if consts is None:
            from .constants import compute_constants

            consts = compute_constants(disc, config)
        gamma = consts.gamma_L
        certs.append(Certificate.of("H7_psi_divergence", 0.0, None, 0.0, f"L_M = {consts.L_M:.6g} for rhs {consts.rhs:.6g}"))
    except (DivergenceError, IntegrandDomainError, ExprError) as err:
        certs.append(Certificate.of("H7_psi_divergence", math.inf, getattr(err, "abscissa", None), 0.0, str(err)))

    # rho >= 0 and the dominating function for |f rho|
    zs = np.linspace(-R, R, 9)
    ys_unit = np.concatenate(([-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0], rng.uniform(-1.0, 1.0, 6)))
    g_cells = gamma if gamma is not None else np.ones(mesh.n_cells)
    worst_rho, where_rho = 0.0, None
    h = np.zeros(disc.points.shape)
    for q in range(disc.points.shape[1]):
        tq = disc.points[:, q]
        for yu in ys_unit:
            y = yu * g_cells
            r = np.asarray(spec.rho_at(tq, y), dtype=float)
            j = int(np.argmin(r))
            if -r[j] > worst_rho:
                worst_rho, where_rho = -r[j], tq[j]
            for z in zs:
                h[:, q] = np.maximum(h[:, q], np.abs(spec.f_at(tq, z) * r))
    certs.append(Certificate.of("rho_nonnegative", worst_rho, where_rho, 0.0))
    if gamma is not None:
        ratio, where = graded_tail_ratio(h, disc)
        total = float(np.sum(h * disc.weights))
        certs.append(
            Certificate.of("H6_dominated", ratio if math.isfinite(total) else math.inf, where, TAIL_RATIO_TOL,
                           f"sampled sup |f rho| has integral {total:.6g}")
        )
    else:
        certs.append(Certificate.of("H6_dominated", math.inf, None, TAIL_RATIO_TOL, "gamma_L unavailable"))

    # integrability of l and mu^q
    nag = spec.nagumo
    certs.append(_integrability_cert("H7_l_integrable", lambda t: nag.l_at(t, R), disc))
    if math.isinf(nag.q):
        mu = np.abs(np.asarray(nag.mu_at(disc.points, R), dtype=float))
        certs.append(Certificate.of("H7_mu_bounded", 0.0 if np.all(np.isfinite(mu)) else math.inf, None, 0.0))
    else:
        certs.append(
            _integrability_cert("H7_mu_Lq_integrable", lambda t: np.abs(nag.mu_at(t, R)) ** nag.q, disc, f" (q = {nag.q:g})")
        )

    # pointwise Nagumo inequality on |k y| >= H
    scales = np.logspace(0.0, 8.0, 17)
    expo = nag.holder_exponent
    worst, where = 0.0, None
    stride = max(1, mesh.n_cells // 256)
    cells = np.unique(np.concatenate((np.arange(0, mesh.n_cells, stride), np.flatnonzero(mesh.singular_cells))))
    tq = disc.points[cells].ravel()
    kq = disc.k_points[cells].ravel()
    psi = lambda s: nag.psi_at(s, R)
    with np.errstate(over="ignore", invalid="ignore"):
        for sgn in (-1.0, 1.0):
            for sc in scales:
                y = sgn * sc * H / kq
                lhs_rho = np.asarray(spec.rho_at(tq, y), dtype=float)
                bound = psi(np.abs(spec.phi.apply(kq * y))) * (nag.l_at(tq, R) + nag.mu_at(tq, R) * np.abs(y) ** expo)
                for z in zs:
                    lhs = np.abs(spec.f_at(tq, z) * lhs_rho)
                    viol = np.where(lhs <= bound, 0.0, (lhs - bound) / (1.0 + np.abs(bound)))
                    viol = np.where(np.isnan(viol), 0.0, viol)
                    j = int(np.argmax(viol))
                    if viol[j] > worst:
                        worst, where = viol[j], tq[j]
    certs.append(
        Certificate.of("H7_nagumo_inequality", worst, where, 1e-9, "|f rho| <= psi(|Phi(k y)|)(l + mu |y|^((q-1)/q)) for |k y| >= H")
    )
    return certs
