"""Singular Phi-Laplacian boundary value problems with functional terms.

Typical use::

    from phibvp import build_example, fixed_point
    report = fixed_point(build_example("sinh-integral"))
    report.converged, report.solution.values
"""

__version__ = "0.1.0"

from .constants import ProblemConstants, compute_constants, compute_LM, compute_M, choose_N, nagumo_rhs
from .errors import (
    BracketError,
    ConfigurationError,
    DivergenceError,
    DomainError,
    ExprDomainError,
    ExprError,
    ExprSyntaxError,
    IntegrandDomainError,
    MeshMismatchError,
    OrderingError,
    PhiBVPError,
    SpecFileError,
)
from .examples import (
    build_example,
    cubic_running_max_problem,
    plaplacian_delay_problem,
    sinh_integral_problem,
)
from .functionals import (
    Constant,
    Delay,
    IdentityTerm,
    IntegralOfPower,
    MeanShift,
    PointEval,
    RunningMax,
)
from .mesh import GridFunction, Mesh, antiderivative, integrate_singular, make_graded_mesh, norm
from .phi import PhiOperator
from .problem import Discretization, Envelope, NagumoData, ProblemSpec, SolverConfig
from .solver import SolveReport, apply_A, fixed_point, solve_zx
from .specfile import dumps_spec, load_spec, loads_spec
from .truncation import clamp_derivative, clamp_fn
from .verify import Certificate, audit_hypotheses, check_lower_upper, check_solution, residual_ode

__all__ = [name for name in dir() if not name.startswith("_")]
