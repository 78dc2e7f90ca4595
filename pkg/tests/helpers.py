"""Small problem builders shared by the tests."""

from phibvp import Constant, Envelope, IdentityTerm, NagumoData, PhiOperator, ProblemSpec


def simple_problem(phi=None, k="1", f="0", rho="0", ha=0.0, hb=1.0, lo=0.0, hi=1.0, a=0.0, b=1.0, **kw):
    """A problem on [a, b] with constant boundary functionals and envelopes."""
    return ProblemSpec(
        a=a,
        b=b,
        phi=phi or PhiOperator.identity(),
        k=k,
        f=f,
        rho=rho,
        G=kw.pop("G", IdentityTerm()),
        Ha=Constant(ha),
        Hb=Constant(hb),
        alpha=Envelope.const(lo),
        beta=Envelope.const(hi),
        nagumo=kw.pop("nagumo", NagumoData(H="1", psi="1", l="0", mu="0", q=float("inf"))),
        name="test",
        **kw,
    )
