"""Builders for three model problems with known lower/upper solutions.

``sinh_integral_problem``
    (sinh(sqrt(t(1-t)) x'))' + a(int_0^t x^3) |x'|^rho = 0 on [0, 1],
    x(0) = max{x(1), 1},  x(1) = eps * int_0^1 x.
``plaplacian_delay_problem``
    (Phi_p(|sin t|^(1/theta0) x'))' + x(t - tau) |x'|^delta = 0 on [0, 2 pi],
    x(0) = cbrt(x(pi)),  x(2 pi) = (1/(4 pi)) int (x + 2).
``cubic_running_max_problem``
    ((k x')^3)' + (max_{[-1,t]} x) log(1 + |cbrt(t) x'|^2) = 0 on [-1, 1],
    k = d1 on [-1, 0], d2 on [0, 1],  x(-1) = 0,  x(1) = 1.
"""

from __future__ import annotations

import math

from . import expr as ex
from .errors import ConfigurationError
from .functionals import Constant, Delay, IntegralOfPower, MeanShift, PointEval, RunningMax
from .phi import PhiOperator
from .problem import Envelope, NagumoData, ProblemSpec


def _open_unit(name, v):
    if not 0.0 < v < 1.0:
        raise ConfigurationError(f"{name} must lie in (0, 1), got {v}")


def sinh_integral_problem(eps: float = 0.5, rho_exp: float = 0.5, a: str = "z") -> ProblemSpec:
    """``a`` is a nondecreasing expression in ``z`` (identity by default)."""
    _open_unit("eps", eps)
    _open_unit("rho_exp", rho_exp)
    a_expr = ex.parse(a, ("z",))
    # max |a| on [-R, R] sits at an endpoint because a is nondecreasing
    mu = ex.Call(
        "max",
        (
            ex.Call("abs", (ex.substitute(a_expr, "z", ex.Var("R")),)),
            ex.Call("abs", (ex.substitute(a_expr, "z", ex.Neg(ex.Var("R"))),)),
        ),
    )
    return ProblemSpec(
        a=0.0,
        b=1.0,
        phi=PhiOperator.sinh(),
        k="sqrt(t*(1-t))",
        f=a_expr,
        rho=f"abs(y)^{rho_exp!r}",
        G=IntegralOfPower(3),
        Ha=PointEval(1.0, "max_with", 1.0),
        Hb=MeanShift(eps, 0.0),
        alpha=Envelope.const(-1.0),
        beta=Envelope.const(1.0),
        nagumo=NagumoData(H="1", psi="1", l="0", mu=mu, q=1.0 / (1.0 - rho_exp)),
        singular=(0.0, 1.0),
        name="sinh-integral",
        params={"eps": eps, "rho_exp": rho_exp, "a": a},
    )


def plaplacian_delay_problem(
    theta0: float = 2.0, p: float = 2.0, delta: float = 1.0, tau: float = math.pi, check: bool = True
) -> ProblemSpec:
    """``check=False`` skips the parameter constraints (to audit a violating choice)."""
    if not theta0 > 1.0:
        raise ConfigurationError(f"theta0 must exceed 1, got {theta0}")
    if not 0.0 < tau < 2.0 * math.pi:
        raise ConfigurationError(f"tau must lie in (0, 2 pi), got {tau}")
    if check:
        if not 1.0 < p < theta0 + 1.0:
            raise ConfigurationError(f"parameter constraint 1 < p < theta0 + 1 violated: p = {p}, theta0 = {theta0}")
        bound = p - (p - 1.0) / theta0
        if not 0.0 < delta < bound:
            raise ConfigurationError(
                f"parameter constraint 0 < delta < p - (p-1)/theta0 = {bound:g} violated: delta = {delta}"
            )
    q = theta0 / (p - 1.0)
    mu_power = (delta + 1.0 / q - 1.0) / theta0
    return ProblemSpec(
        a=0.0,
        b=2.0 * math.pi,
        phi=PhiOperator.plaplacian(p),
        k=f"abs(sin(t))^(1/{theta0!r})",
        f="z",
        rho=f"abs(y)^{delta!r}",
        G=Delay(tau),
        Ha=PointEval(math.pi, "cbrt"),
        Hb=MeanShift(1.0 / (4.0 * math.pi), 2.0),
        alpha=Envelope.const(1.0),
        beta=Envelope.const(2.0),
        nagumo=NagumoData(H="1", psi="s", l="0", mu=f"R/abs(sin(t))^{mu_power!r}", q=q),
        singular=(0.0, math.pi, 2.0 * math.pi),
        name="plaplacian-delay",
        params={"theta0": theta0, "p": p, "delta": delta, "tau": tau},
    )


def cubic_running_max_problem(d1: float = 1.0, d2: float = 1.0) -> ProblemSpec:
    if not (d1 > 0.0 and d2 > 0.0):
        raise ConfigurationError(f"d1 and d2 must be positive, got {d1}, {d2}")
    d = min(d1, d2)
    return ProblemSpec(
        a=-1.0,
        b=1.0,
        phi=PhiOperator.cubic(),
        k=f"{d1!r}*indicator(-1, 0) + {d2!r}*indicator(0, 1)",
        f="z",
        rho="log(1+abs(cbrt(t)*y)^2)",
        G=RunningMax(),
        Ha=Constant(0.0),
        Hb=Constant(1.0),
        alpha=Envelope.const(0.0),
        beta=Envelope.const(1.0),
        nagumo=NagumoData(H="1", psi="s", l=f"R/{d * d!r}", mu="0", q=2.0),
        breakpoints=(0.0,),
        name="cubic-runmax",
        params={"d1": d1, "d2": d2},
    )


SUMMARIES = {
    "sinh-integral": "sinh flux, weight sqrt(t(1-t)), integral functional on [0, 1]",
    "plaplacian-delay": "p-Laplacian, weight |sin t|^(1/theta0), delay tau on [0, 2 pi]",
    "cubic-runmax": "cubic flux, piecewise-constant weight, running maximum on [-1, 1]",
}

BUILDERS = {
    "sinh-integral": sinh_integral_problem,
    "plaplacian-delay": plaplacian_delay_problem,
    "cubic-runmax": cubic_running_max_problem,
}


def build_example(name: str, **params) -> ProblemSpec:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ConfigurationError(f"unknown example {name!r}; expected one of {sorted(BUILDERS)}") from None
    return builder(**params)
