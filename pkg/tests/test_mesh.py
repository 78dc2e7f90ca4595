import math

import numpy as np
import pytest

from phibvp import GridFunction, Mesh, antiderivative, integrate_singular, make_graded_mesh, norm
from phibvp.errors import ConfigurationError, DomainError, IntegrandDomainError, MeshMismatchError
from phibvp.mesh import gauss_legendre


def test_graded_mesh_contains_required_points_and_grades_geometrically():
    m = make_graded_mesh(0.0, 2 * math.pi, 64, singular=(0.0, math.pi, 2 * math.pi), grading=1.5, breakpoints=(1.0,))
    for s in (0.0, math.pi, 2 * math.pi, 1.0):
        assert s in m.nodes
    i = int(np.searchsorted(m.nodes, math.pi))
    right = m.widths[i + 1 : i + 7]  # the cell touching pi closes the geometric run
    np.testing.assert_allclose(right[1:] / right[:-1], 1.5, rtol=1e-6)  # nodes near pi carry absolute rounding
    assert m.widths[i] < 1e-6 * (2 * math.pi / 64)
    assert m.singular_cells[i] and m.singular_cells[i - 1]


def test_uniform_mesh_without_grading():
    m = make_graded_mesh(-1.0, 1.0, 8, grading=1.0)
    np.testing.assert_allclose(m.widths, 0.25)


@pytest.mark.parametrize("bad", [dict(n=1), dict(grading=0.5), dict(singular=(3.0,))])
def test_graded_mesh_rejects_bad_input(bad):
    kw = dict(a=0.0, b=1.0, n=8, singular=(), grading=1.5)
    kw.update(bad)
    with pytest.raises((ConfigurationError, DomainError)):
        make_graded_mesh(**kw)


def test_mesh_validation():
    with pytest.raises(ConfigurationError):
        Mesh(np.array([0.0, 0.0, 1.0]))
    with pytest.raises(DomainError):
        Mesh(np.array([0.0, 1.0]), (0.5,))


def test_grid_function_consistency_is_enforced():
    m = Mesh(np.array([0.0, 0.5, 1.0]))
    with pytest.raises(ConfigurationError):
        GridFunction(m, np.array([0.0, 1.0, 2.0]), np.array([2.0, 1.0]))


def test_arithmetic_on_different_meshes_aligns_exactly():
    u = GridFunction.from_values(Mesh(np.array([0.0, 0.5, 1.0])), [0.0, 1.0, 0.0])
    v = GridFunction.from_values(Mesh(np.array([0.0, 0.25, 1.0])), [1.0, 1.0, 1.0])
    w = u - v
    assert w.mesh.nodes.tolist() == [0.0, 0.25, 0.5, 1.0]
    np.testing.assert_allclose(w.values, [-1.0, -0.5, 0.0, -1.0])
    with pytest.raises(MeshMismatchError):
        u + GridFunction.constant(Mesh(np.array([0.0, 2.0])), 1.0)


def test_norms_against_closed_forms():
    m = make_graded_mesh(0.0, 1.0, 10, grading=1.0)
    x = GridFunction.from_values(m, 2 * m.nodes - 1.0)  # 2t - 1
    assert norm(x, "L1") == pytest.approx(0.5, abs=1e-15)
    assert norm(x, "Linf") == 1.0
    assert norm(x, "W11") == pytest.approx(2.5, abs=1e-15)
    assert norm(x, "Lq", 2) == pytest.approx(math.sqrt(1 / 3), rel=1e-13)
    with pytest.raises(ConfigurationError):
        norm(x, "H1")


def test_antiderivative_of_cellwise_constant():
    m = Mesh(np.array([0.0, 1.0, 3.0]))
    A = antiderivative(m, np.array([2.0, -1.0]), start=1.0)
    np.testing.assert_allclose(A.values, [1.0, 3.0, 1.0])


def test_gauss_legendre_exactness():
    x, w = gauss_legendre(4)
    for d in range(8):
        assert np.sum(w * x**d) == pytest.approx(1.0 / (d + 1), rel=1e-14)


def test_integrate_singular_inverse_square_root():
    m = make_graded_mesh(0.0, 1.0, 64, singular=(0.0,))
    assert integrate_singular(lambda t: 1.0 / np.sqrt(t), m) == pytest.approx(2.0, abs=1e-3)
    m = make_graded_mesh(0.0, 1.0, 64, singular=(0.0, 1.0))
    assert integrate_singular(lambda t: 1.0 / np.sqrt(t * (1.0 - t)), m) == pytest.approx(math.pi, abs=1e-3)


def test_integrate_singular_order_on_smooth_integrand():
    errs = []
    for n in (2, 4, 8):
        m = make_graded_mesh(0.0, 1.0, n, grading=1.0)
        errs.append(abs(integrate_singular(np.exp, m) - (math.e - 1.0)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 2.0)


def test_integrate_singular_reports_non_finite_samples():
    m = Mesh(np.array([0.0, 0.5, 1.0]))
    with pytest.raises(IntegrandDomainError) as info:
        integrate_singular(lambda t: np.where(t > 0.5, np.inf, 1.0), m)
    assert info.value.abscissa > 0.5


def test_steep_functions_survive_refinement_far_from_zero():
    # near t = 2 pi a slope of 1e6 turns ulp(t) into a visible value error
    rng = np.random.default_rng(3)
    nodes = np.sort(np.concatenate(([0.0, 2 * math.pi], 2 * math.pi - np.geomspace(1e-9, 1e-1, 40))))
    m = Mesh(nodes, (2 * math.pi,))
    x = GridFunction.from_values(m, np.sqrt(np.maximum(2 * math.pi - nodes, 0.0)) * 1e3)
    fine = m.with_nodes(rng.uniform(2 * math.pi - 1e-1, 2 * math.pi, 500))
    y = x.on_mesh(fine)
    np.testing.assert_allclose(y(nodes), x.values, rtol=1e-12, atol=1e-9)


def test_steep_value_errors_are_still_rejected():
    # the abscissa allowance covers a few ulps of t, not a visible error
    m = Mesh(np.array([0.0, 6.0, 6.001, 7.0]))
    slope = 1e6
    values = np.array([0.0, 0.0, slope * (m.nodes[2] - 6.0) + 1e-6, slope * (m.nodes[2] - 6.0) + 1e-6])
    with pytest.raises(ConfigurationError):
        GridFunction(m, values, np.array([0.0, slope, 0.0]))
