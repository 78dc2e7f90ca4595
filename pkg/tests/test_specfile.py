import math
from pathlib import Path

import pytest
from conftest import EXAMPLES

from phibvp import SolverConfig, build_example, dumps_spec, load_spec, loads_spec
from phibvp.errors import SpecFileError

SPECS = Path(__file__).resolve().parent.parent / "specs"

TRIVIAL = """\
interval: {a: 0, b: 1}
phi: {kind: identity}
k: {expr: "1"}
f: "0"
rho: "0"
functional: {variant: identity}
boundary_a: {variant: constant, params: {value: 0}}
boundary_b: {variant: constant, params: {value: 1}}
alpha: {constant: 0}
beta: {constant: 1}
nagumo: {H: "1", psi: "1", l: "0", mu: "0", q: inf}
"""


def error_of(text):
    with pytest.raises(SpecFileError) as info:
        loads_spec(text, "test.yaml")
    return info.value


def test_defaults_when_solver_section_is_absent():
    spec, config = loads_spec(TRIVIAL)
    assert config == SolverConfig()
    assert (spec.a, spec.b) == (0.0, 1.0) and math.isinf(spec.nagumo.q)


@pytest.mark.parametrize("name", EXAMPLES)
def test_builders_round_trip(name):
    spec = build_example(name)
    config = SolverConfig(cells=512, damping=0.7)
    spec2, config2 = loads_spec(dumps_spec(spec, config))
    assert spec2 == spec and config2 == config


@pytest.mark.parametrize(
    "path, name, params",
    [
        ("sinh_integral.yaml", "sinh-integral", {}),
        ("plaplacian_delay.yaml", "plaplacian-delay", {}),
        ("cubic_runmax.yaml", "cubic-runmax", {}),
        ("cubic_runmax_d2.yaml", "cubic-runmax", {"d2": 2.0}),
    ],
)
def test_shipped_specs_match_the_builders(path, name, params):
    spec, _ = load_spec(SPECS / path)
    ref = build_example(name, **params)
    assert spec.phi == ref.phi and spec.G == ref.G and spec.Ha == ref.Ha and spec.Hb == ref.Hb
    assert spec.alpha == ref.alpha and spec.beta == ref.beta
    assert spec.singular == ref.singular and spec.breakpoints == ref.breakpoints
    for t in (0.1 * (spec.b - spec.a) + spec.a, 0.5 * (spec.a + spec.b) + 0.01, spec.b - 0.03):
        assert spec.k_at(t) == pytest.approx(ref.k_at(t), rel=1e-14)
        assert spec.rho_at(t, 0.7) == pytest.approx(ref.rho_at(t, 0.7), rel=1e-14)
        assert spec.nagumo.mu_at(t, 2.0) == pytest.approx(ref.nagumo.mu_at(t, 2.0), rel=1e-14)


def test_expression_constants_are_accepted():
    spec, _ = loads_spec(TRIVIAL.replace("{a: 0, b: 1}", "{a: 0, b: 2*pi}"))
    assert spec.b == pytest.approx(2 * math.pi)


def test_unknown_key_is_located():
    err = error_of(TRIVIAL + "colour: blue\n")
    assert "colour" in str(err)
    assert err.line == 12 and err.column == 1
    assert str(err).startswith("test.yaml:12:1:")


def test_unknown_nested_key():
    err = error_of(TRIVIAL.replace("{kind: identity}", "{kind: identity, q: 2}"))
    assert err.line == 2 and "q" in str(err)


def test_missing_section():
    err = error_of(TRIVIAL.replace('rho: "0"\n', ""))
    assert "rho" in str(err)


def test_duplicate_key():
    err = error_of(TRIVIAL + 'f: "1"\n')
    assert "duplicate" in str(err).lower() and err.line == 12


def test_bad_expression_is_located():
    err = error_of(TRIVIAL.replace('f: "0"', 'f: "z +"'))
    assert err.line == 4


def test_bad_variant_and_solver_values():
    assert "variant" in str(error_of(TRIVIAL.replace("{variant: identity}", "{variant: nope}")))
    err = error_of(TRIVIAL + "solver: {damping: 2}\n")
    assert err.line == 12 and "damping" in str(err)
    err = error_of(TRIVIAL + "solver: {cells: many}\n")
    assert err.line == 12


def test_yaml_syntax_error():
    err = error_of("interval: {a: 0, b: 1\n")
    assert err.line is not None


def test_example_form_checks_parameters():
    with pytest.raises(SpecFileError, match="delta"):
        load_spec(SPECS / "plaplacian_delay_bad_delta.yaml")
    spec, config = loads_spec("example: {name: cubic-runmax, params: {d2: 3}}\nsolver: {cells: 128}\n")
    assert spec == build_example("cubic-runmax", d2=3.0) and config.cells == 128
    assert "unknown" in str(error_of("example: {name: cubic-runmax, params: {d3: 3}}\n")).lower()


def test_missing_file():
    with pytest.raises(SpecFileError, match="cannot read"):
        load_spec(SPECS / "does-not-exist.yaml")
