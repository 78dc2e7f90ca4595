"""Truncated operator A and the fixed-point iteration.

For a candidate x the truncated right-hand side is

    F_x = -f(t, G_{Tx}(t)) rho(t, D(Tx)') + arctan(x - Tx),

with T the clamp into [alpha, beta] and D the slope clamp into
[-gamma_L, gamma_L].  Writing calF for the antiderivative of F_x, the
scalar z_x solves

    integral over [a, b] of (1/k) Phi^{-1}(z + calF) = B_b - B_a,   B = H o T,

and A_x = B_a + integral from a to t of the same integrand.  Fixed points
of A solve (Phi(k x'))' = F_x with the truncated boundary conditions.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .constants import ProblemConstants, compute_constants
from .errors import BracketError, PhiBVPError
from .mesh import GridFunction, Mesh, antiderivative, norm
from .problem import Discretization, ProblemSpec, SolverConfig
from .truncation import clamp_derivative, clamp_fn

log = logging.getLogger(__name__)

MAX_DOUBLINGS = 1024


@dataclass
class AStep:
    """One application of A with its intermediate quantities."""

    value: GridFunction
    z: float
    F: np.ndarray
    truncated: GridFunction
    gap: float
    penalty: np.ndarray
    calF: np.ndarray | None = None


def truncate(x: GridFunction, disc: Discretization) -> GridFunction:
    return clamp_fn(x, disc.alpha, disc.beta)


def assemble_F(x: GridFunction, disc: Discretization, consts: ProblemConstants):
    """Cellwise F_x sampled at cell midpoints; returns (F, Tx, penalty)."""
    spec = disc.spec
    tm = disc.mesh.midpoints
    T = truncate(x, disc)
    GT = spec.G.evaluate(T, tm)
    DT = clamp_derivative(T.slope_at(tm), consts.gamma_L)
    penalty = np.arctan(x(tm) - T(tm))
    F = -spec.f_at(tm, GT) * spec.rho_at(tm, DT) + penalty
    return np.asarray(F, dtype=float), T, penalty


def _calF_at_points(F: np.ndarray, disc: Discretization) -> np.ndarray:
    mesh = disc.mesh
    cum = antiderivative(mesh, F, 0.0).values
    return cum[:-1, None] + F[:, None] * (disc.points - mesh.nodes[:-1, None])


def _cell_integrals(z: float, calF: np.ndarray, disc: Discretization) -> np.ndarray:
    vals = disc.spec.phi.invert(z + calF)
    return np.sum(disc.inv_k_weights * vals, axis=1)


def gap_integral(z: float, F: np.ndarray, disc: Discretization) -> float:
    """Integral over [a, b] of (1/k) Phi^{-1}(z + calF)."""
    return float(np.sum(_cell_integrals(z, _calF_at_points(F, disc), disc)))


def solve_zx(F, target_gap: float, disc: Discretization, z_tol: float = 1e-13, calF=None) -> float:
    """Root of the strictly increasing map z -> gap_integral(z) - target_gap.

    Bracket doubling from [-1, 1] (at most 1024 doublings per side), then
    bisection until the gap matches to ``z_tol * (1 + |target_gap|)`` or
    the bracket can no longer be split.
    """
    if calF is None:
        calF = _calF_at_points(np.asarray(F, dtype=float), disc)
    g = lambda z: float(np.sum(_cell_integrals(z, calF, disc))) - target_gap
    tol = z_tol * (1.0 + abs(target_gap))
    lo, hi = -1.0, 1.0
    g_lo, g_hi = g(lo), g(hi)
    for _ in range(MAX_DOUBLINGS):
        if g_lo <= 0.0:
            break
        hi, g_hi = lo, g_lo
        lo *= 2.0
        g_lo = g(lo)
    else:
        raise BracketError("no lower bracket for z within 1024 doublings")
    for _ in range(MAX_DOUBLINGS):
        if g_hi >= 0.0:
            break
        lo, g_lo = hi, g_hi
        hi *= 2.0
        g_hi = g(hi)
    else:
        raise BracketError("no upper bracket for z within 1024 doublings")
    if not (np.isfinite(g_lo) and np.isfinite(g_hi)):
        raise BracketError("gap integral overflowed while bracketing z")
    if abs(g_lo) <= tol:
        return lo
    if abs(g_hi) <= tol:
        return hi
    best, g_best = (lo, g_lo) if abs(g_lo) < abs(g_hi) else (hi, g_hi)
    for _ in range(4 * MAX_DOUBLINGS):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        g_mid = g(mid)
        if abs(g_mid) < abs(g_best):
            best, g_best = mid, g_mid
        if abs(g_mid) <= tol:
            break
        if g_mid < 0.0:
            lo = mid
        else:
            hi = mid
    return best


def apply_A(x: GridFunction, disc: Discretization, consts: ProblemConstants, z_tol: float = 1e-13) -> AStep:
    spec = disc.spec
    F, T, penalty = assemble_F(x, disc, consts)
    Ba = spec.Ha.apply(T)
    Bb = spec.Hb.apply(T)
    calF = _calF_at_points(F, disc)
    z = solve_zx(F, Bb - Ba, disc, z_tol, calF=calF)
    increments = _cell_integrals(z, calF, disc)
    value = GridFunction.from_increments(disc.mesh, Ba, increments)
    return AStep(value, z, F, T, Bb - Ba, penalty, calF)


def _state(x: GridFunction) -> np.ndarray:
    return np.concatenate(([x.values[0]], x.increments))


def _from_state(mesh: Mesh, u: np.ndarray) -> GridFunction:
    return GridFunction.from_increments(mesh, u[0], u[1:])


@dataclass
class SolveReport:
    solution: GridFunction
    K_field: np.ndarray
    constants: ProblemConstants
    disc: Discretization
    iterations: int
    step_converged: bool
    converged: bool
    z_history: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    residual_l1: float = float("nan")
    fp_residual: float = float("nan")
    penalty_linf: float = float("nan")
    certificates: list = field(default_factory=list)
    elapsed: float = 0.0
    message: str = ""

    @property
    def max_abs_z(self) -> float:
        return float(max((abs(z) for z in self.z_history), default=0.0))

    @property
    def certificates_pass(self) -> bool:
        return all(c.passed for c in self.certificates)


def _central_diff(fn, v: np.ndarray, rel: float) -> np.ndarray:
    eps = rel * (1.0 + np.abs(v))
    return (fn(v + eps) - fn(v - eps)) / (2.0 * eps)


class CausalPreconditioner:
    """Approximate inverse of I - A' built from the local part of A's linearisation.

    Holding G, the boundary values and the penalty fixed, a slope
    perturbation ds changes F on cell j by d_j ds_j, with d_j the derivative of
    -f rho in y, and hence changes the new slope on every later cell by
    c_i (dz + sum_{j<i} h_j d_j ds_j), where c_i is the cell mean of
    (Phi^{-1})'(z + calF) / k and dz restores the boundary gap.  This
    triangular-plus-rank-one system is solved in O(n).  It removes the
    transient growth that plain damping suffers from on Volterra-type
    operators, and near a zero of x' it uses a zero (averaged) derivative
    of a kink such as |y|.
    """

    def __init__(self, step: AStep, disc: Discretization, consts: ProblemConstants):
        spec = disc.spec
        tm = disc.mesh.midpoints
        h = disc.mesh.widths
        T = step.truncated
        s = T.slope_at(tm)
        D = clamp_derivative(s, consts.gamma_L)
        drho = _central_diff(lambda y: spec.rho_at(tm, y), D, 1e-6)
        d = -spec.f_at(tm, spec.G.evaluate(T, tm)) * drho
        d = np.where(np.abs(s) < consts.gamma_L, d, 0.0)
        d = np.where(np.isfinite(d), d, 0.0)
        dinv = _central_diff(spec.phi.invert, step.z + step.calF, 1e-7)
        c = np.sum(disc.inv_k_weights * dinv, axis=1) / h
        c = np.where(np.isfinite(c), c, 0.0)
        self.h = h
        self.hd = h * d
        self.c = c
        # the current cell feels about half of its own F perturbation
        self.den = np.maximum(1.0 - 0.5 * c * self.hd, 0.5)
        self.unit = self._sweep(np.zeros_like(h), 1.0)

    def _sweep(self, rhs: np.ndarray, dz: float) -> np.ndarray:
        out = np.empty_like(rhs)
        c, hd, den = self.c.tolist(), self.hd.tolist(), self.den.tolist()
        rhs_l = rhs.tolist()
        P = 0.0
        for i in range(len(rhs_l)):
            si = (rhs_l[i] + c[i] * (dz + P)) / den[i]
            out[i] = si
            P += hd[i] * si
        return out

    def __call__(self, g: np.ndarray) -> np.ndarray:
        h = self.h
        gs = g[1:] / h
        base = self._sweep(gs, 0.0)
        span = float(np.sum(h * self.unit))
        dz = float(np.sum(h * (gs - base))) / span if span != 0.0 else 0.0
        return np.concatenate((g[:1], h * (base + dz * self.unit)))


class AndersonMixer:
    """Damped Anderson acceleration (type II) over the last ``memory`` steps."""

    def __init__(self, damping: float, memory: int):
        self.damping = damping
        self.memory = memory
        self.U: list[np.ndarray] = []
        self.G: list[np.ndarray] = []

    def reset(self):
        self.U.clear()
        self.G.clear()

    def step(self, u: np.ndarray, g: np.ndarray) -> np.ndarray:
        lam = self.damping
        self.U.append(u)
        self.G.append(g)
        if len(self.U) > self.memory + 1:
            self.U.pop(0)
            self.G.pop(0)
        if self.memory == 0 or len(self.U) < 2:
            return u + lam * g
        dU = np.diff(np.array(self.U), axis=0).T
        dG = np.diff(np.array(self.G), axis=0).T
        coef, *_ = np.linalg.lstsq(dG, g, rcond=None)
        return u + lam * g - (dU + lam * dG) @ coef


def fixed_point(spec: ProblemSpec, config: SolverConfig | None = None, disc: Discretization | None = None) -> SolveReport:
    """Iterate x <- x + lambda P(A x - x) with Anderson mixing, then certify.

    P is the causal preconditioner (identity when ``config.precondition``
    is off).
    """
    from .verify import check_solution, fixed_point_certificates, residual_ode

    config = config or SolverConfig()
    start = time.perf_counter()
    disc = disc or spec.discretize(config.cells, config.grading, config.quad_order)
    consts = compute_constants(disc, config)
    mesh = disc.mesh
    x = GridFunction(mesh, 0.5 * (disc.alpha.values + disc.beta.values), 0.5 * (disc.alpha.slopes + disc.beta.slopes))
    mixer = AndersonMixer(config.damping, config.anderson)
    z_hist: list = []
    steps: list = []
    last: AStep | None = None
    step_ok = False
    best_norm, best_x = np.inf, x
    breakdown = None
    for it in range(config.max_iters):
        try:
            last = apply_A(x, disc, consts, config.z_tol)
            step = norm(last.value - x, "W11")
            if not np.isfinite(step):
                raise FloatingPointError("non-finite step")
        except (PhiBVPError, FloatingPointError) as err:
            breakdown = f"iteration {it + 1}: {err}"
            break
        z_hist.append(last.z)
        steps.append(step)
        log.debug("iteration %d: step %.3e, z %.6g", it + 1, step, last.z)
        if step <= config.fp_tol:
            step_ok = True
            break
        if step > 10.0 * best_norm:
            mixer.reset()  # mixing went astray; restart from a plain damped step
        if step < best_norm:
            best_norm, best_x = step, x
        g = _state(last.value) - _state(x)
        if config.precondition:
            g = CausalPreconditioner(last, disc, consts)(g)
        u = mixer.step(_state(x), g)
        try:
            x = _from_state(mesh, u)
        except PhiBVPError as err:
            breakdown = f"iteration {it + 1}: {err}"
            break
    if breakdown is not None:
        # the iterate is unusable; report on the best one seen
        log.warning("iteration broke down at %s", breakdown)
        x = best_x
    if not step_ok:
        # x moved after the last evaluation; certificates describe the returned iterate
        last = apply_A(x, disc, consts, config.z_tol)
    iterations = len(steps)
    certs = check_solution(x, disc, consts)
    certs += fixed_point_certificates(x, last, config)
    res = residual_ode(x, disc)
    report = SolveReport(
        solution=x,
        K_field=disc.k_eff * x.slopes,
        constants=consts,
        disc=disc,
        iterations=iterations,
        step_converged=step_ok,
        converged=step_ok and all(c.passed for c in certs),
        z_history=z_hist,
        step_norms=steps,
        residual_l1=res.l1,
        fp_residual=norm(last.value - x, "W11"),
        penalty_linf=float(np.max(np.abs(last.penalty))),
        certificates=certs,
        elapsed=time.perf_counter() - start,
    )
    if breakdown is not None:
        report.message = f"iteration broke down at {breakdown}; reporting the best iterate (step {best_norm:.3e})"
    elif not step_ok:
        report.message = f"no convergence after {iterations} iterations (last step {steps[-1] if steps else float('nan'):.3e})"
    elif not report.converged:
        failed = ", ".join(c.name for c in certs if not c.passed)
        report.message = f"iteration converged but certificates failed: {failed}"
    else:
        report.message = f"converged in {iterations} iterations"
    return report
