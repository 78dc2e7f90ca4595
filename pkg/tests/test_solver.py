import math

import numpy as np
import pytest
from helpers import simple_problem

from phibvp import GridFunction, PhiOperator, SolverConfig, apply_A, build_example, compute_constants, fixed_point, norm, solve_zx
from phibvp.solver import CausalPreconditioner, assemble_F, gap_integral

PHIS = [PhiOperator.identity(), PhiOperator.plaplacian(3.0), PhiOperator.plaplacian(1.5), PhiOperator.sinh(), PhiOperator.cubic()]


def disc_of(spec, cells=64):
    return spec.discretize(cells)


def test_zx_identity():
    disc = disc_of(simple_problem())
    assert solve_zx(np.zeros(64), 0.5, disc) == pytest.approx(0.5, abs=1e-12)


def test_zx_cubic():
    disc = disc_of(simple_problem(PhiOperator.cubic()))
    assert solve_zx(np.zeros(64), 2.0, disc) == pytest.approx(8.0, abs=1e-9)


def test_zx_antisymmetric_primitive():
    # F = 2 pi cos(2 pi t) has primitive sin(2 pi t), odd about t = 1/2
    disc = disc_of(simple_problem(PhiOperator.cubic()))
    F = 2 * math.pi * np.cos(2 * math.pi * disc.mesh.midpoints)
    assert abs(solve_zx(F, 0.0, disc, z_tol=1e-13)) <= 1e-12


def test_gap_is_strictly_increasing_in_z():
    rng = np.random.default_rng(3)
    disc41 = build_example("sinh-integral").discretize(128)
    for phi in PHIS:
        disc = build_example("sinh-integral").with_(phi=phi).discretize(128)
        for _ in range(20):
            F = rng.normal(0, 2, disc.mesh.n_cells)
            z = np.sort(rng.uniform(-5, 5, 8))
            gaps = [gap_integral(v, F, disc) for v in z]
            assert np.all(np.diff(gaps) > 0)
    assert disc41.mesh.singular_points == (0.0, 1.0)


def test_assemble_F_penalty_only():
    spec = simple_problem(lo=-1.0, hi=1.0)
    disc = disc_of(spec)
    F, T, pen = assemble_F(GridFunction.constant(disc.mesh, 5.0), disc, compute_constants(disc))
    np.testing.assert_allclose(F, math.atan(4.0))
    np.testing.assert_array_equal(T.values, 1.0)


def test_assemble_F_vanishes_on_the_upper_solution():
    disc = build_example("cubic-runmax").discretize(64)
    F, _, _ = assemble_F(GridFunction.constant(disc.mesh, 1.0), disc, compute_constants(disc))
    np.testing.assert_array_equal(F, 0.0)


def test_apply_A_straight_line():
    disc = disc_of(simple_problem())
    consts = compute_constants(disc)
    x = GridFunction.from_values(disc.mesh, 0.5 + 0.3 * np.sin(5 * disc.mesh.nodes))
    out = apply_A(x, disc, consts).value
    assert norm(out - GridFunction.from_values(disc.mesh, disc.mesh.nodes), "W11") <= 1e-12


def test_endpoint_exactness():
    rng = np.random.default_rng(5)
    for name in ("sinh-integral", "plaplacian-delay", "cubic-runmax"):
        disc = build_example(name).discretize(256)
        consts = compute_constants(disc)
        lo, hi = disc.alpha.values, disc.beta.values
        for _ in range(5):
            x = GridFunction.from_values(disc.mesh, lo + (hi - lo) * rng.random(lo.size))
            step = apply_A(x, disc, consts, z_tol=1e-13)
            assert abs(step.value.values[-1] - disc.spec.Hb.apply(step.truncated)) <= 10 * 1e-13 * (1 + abs(step.gap))


def test_weight_jump_moves_the_slope_not_the_flux():
    disc = build_example("cubic-runmax", d1=1.0, d2=2.0).discretize(64)
    consts = compute_constants(disc)
    x = GridFunction.from_values(disc.mesh, 0.5 * (1 + disc.mesh.nodes))
    out = apply_A(x, disc, consts).value
    i = int(np.searchsorted(disc.mesh.nodes, 0.0))
    s = out.slopes[i - 1 : i + 1]
    flux = disc.spec.phi.apply(disc.k_eff[i - 1 : i + 1] * s)
    assert s[0] / s[1] == pytest.approx(2.0, rel=1e-2)  # k x' continuous, k jumps from 1 to 2
    assert abs(flux[0] - flux[1]) <= 1e-2 * abs(flux[0])


def test_trivial_problem_converges_fast():
    report = fixed_point(simple_problem(), SolverConfig(cells=64))
    assert report.converged and report.iterations <= 3
    exact = GridFunction.from_values(report.solution.mesh, report.solution.mesh.nodes)
    assert norm(report.solution - exact, "W11") <= 1e-10


def test_preconditioner_is_identity_without_slope_dependence():
    disc = disc_of(simple_problem())
    consts = compute_constants(disc)
    x = GridFunction.constant(disc.mesh, 0.5)
    step = apply_A(x, disc, consts)
    g = np.random.default_rng(0).normal(size=disc.mesh.n_cells + 1)
    np.testing.assert_allclose(CausalPreconditioner(step, disc, consts)(g), g, rtol=1e-12, atol=1e-15)


def test_zero_iterations():
    report = fixed_point(simple_problem(), SolverConfig(cells=16, max_iters=0))
    assert report.iterations == 0 and not report.converged and not report.step_converged
    assert report.certificates  # still certified, and reported


def test_one_iteration_is_not_enough():
    report = fixed_point(build_example("sinh-integral"), SolverConfig(cells=256, max_iters=1))
    assert not report.step_converged and not report.converged
    assert "no convergence" in report.message


def test_breakdown_reports_the_best_iterate(monkeypatch):
    import phibvp.solver as solver
    from phibvp.errors import BracketError

    real = solver.apply_A
    calls = []

    def flaky(x, *args, **kw):
        calls.append(x)
        if len(calls) == 4:
            raise BracketError("synthetic failure")
        return real(x, *args, **kw)

    monkeypatch.setattr(solver, "apply_A", flaky)
    report = fixed_point(build_example("sinh-integral"), SolverConfig(cells=128))
    assert not report.step_converged and not report.converged
    assert "broke down at iteration 4" in report.message and "synthetic failure" in report.message
    steps = report.step_norms
    assert len(steps) == 3
    assert report.solution is calls[int(np.argmin(steps))]


def test_sublinear_delay_fails_cleanly():
    # delta < 1 admits flat pieces in the solution, which this iteration does not reach
    report = fixed_point(build_example("plaplacian-delay", delta=0.5), SolverConfig(cells=128, max_iters=40))
    assert not report.step_converged and not report.converged
    assert report.message


@pytest.mark.parametrize("name", ["sinh-integral", "plaplacian-delay", "cubic-runmax"])
def test_report_fields(solve_example, name):
    r = solve_example(name)
    assert r.converged
    assert len(r.z_history) == len(r.step_norms) == r.iterations
    np.testing.assert_allclose(r.K_field, r.disc.k_eff * r.solution.slopes)
    names = {c.name for c in r.certificates}
    assert {"band", "ode_residual_l1", "fixed_point", "penalty", "boundary_a", "boundary_b"} <= names
    assert r.max_abs_z == max(abs(z) for z in r.z_history)


def test_anderson_and_plain_damping_agree():
    spec = build_example("cubic-runmax")
    a = fixed_point(spec, SolverConfig(cells=256))
    b = fixed_point(spec, SolverConfig(cells=256, anderson=0, max_iters=2000, precondition=False))
    assert a.converged and b.converged
    assert norm(a.solution - b.solution, "W11") <= 1e-8
