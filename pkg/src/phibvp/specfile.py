"""YAML problem-spec files.

A document either spells the problem out section by section, or names a
built-in example::

    example: {name: plaplacian-delay, params: {delta: 1.0}}
    solver: {cells: 2048}

Numbers may be written as closed expressions (``pi``, ``2*pi``,
``1/(4*pi)``).  Unknown keys are rejected, and every error carries the
line and column of the offending node.
"""

from __future__ import annotations

import dataclasses
import inspect
import math
from pathlib import Path

import yaml

from . import expr as ex
from .errors import ExprError, PhiBVPError, SpecFileError
from .examples import BUILDERS
from .functionals import BOUNDARY_VARIANTS, FUNCTIONAL_VARIANTS
from .phi import PhiOperator
from .problem import Envelope, NagumoData, ProblemSpec, SolverConfig

SECTIONS = (
    "name", "interval", "phi", "k", "f", "rho", "functional",
    "boundary_a", "boundary_b", "alpha", "beta", "nagumo", "solver",
)
REQUIRED = ("interval", "phi", "k", "f", "rho", "functional", "boundary_a", "boundary_b", "alpha", "beta", "nagumo")
SOLVER_KEYS = tuple(f.name for f in dataclasses.fields(SolverConfig))


class _Reader:
    """Walks a composed YAML node tree, converting and checking as it goes."""

    def __init__(self, source: str):
        self.source = source
        self._loader = yaml.SafeLoader("")

    def fail(self, node, message):
        mark = getattr(node, "start_mark", None)
        if mark is None:
            raise SpecFileError(message, self.source)
        raise SpecFileError(message, self.source, mark.line + 1, mark.column + 1)

    def plain(self, node):
        return self._loader.construct_object(node, deep=True)

    def mapping(self, node, what, allowed, required=()):
        if not isinstance(node, yaml.MappingNode):
            self.fail(node, f"{what} must be a mapping")
        out = {}
        for key_node, value_node in node.value:
            key = self.plain(key_node)
            if not isinstance(key, str):
                self.fail(key_node, f"{what}: keys must be strings")
            if key not in allowed:
                self.fail(key_node, f"unknown key {key!r} in {what}; allowed: {', '.join(allowed)}")
            if key in out:
                self.fail(key_node, f"duplicate key {key!r} in {what}")
            out[key] = value_node
        for key in required:
            if key not in out:
                self.fail(node, f"{what} is missing required key {key!r}")
        return out

    def number(self, node, what):
        if not isinstance(node, yaml.ScalarNode):
            self.fail(node, f"{what} must be a number")
        value = self.plain(node)
        if isinstance(value, bool) or value is None:
            self.fail(node, f"{what} must be a number, got {node.value!r}")
        if isinstance(value, (int, float)):
            return float(value)
        if str(value).strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            return ex.constant_value(str(value))
        except ExprError as err:
            self.fail(node, f"{what}: {err}")

    def integer(self, node, what):
        value = self.number(node, what)
        if not (math.isfinite(value) and value == int(value)):
            self.fail(node, f"{what} must be an integer")
        return int(value)

    def string(self, node, what):
        if not isinstance(node, yaml.ScalarNode):
            self.fail(node, f"{what} must be a scalar")
        value = self.plain(node)
        if value is None or isinstance(value, bool):
            self.fail(node, f"{what} must be a string")
        return str(value)

    def boolean(self, node, what):
        value = self.plain(node) if isinstance(node, yaml.ScalarNode) else None
        if not isinstance(value, bool):
            self.fail(node, f"{what} must be true or false")
        return value

    def numbers(self, node, what):
        if not isinstance(node, yaml.SequenceNode):
            self.fail(node, f"{what} must be a list of numbers")
        return [self.number(item, f"{what}[{i}]") for i, item in enumerate(node.value)]

    def expression(self, node, what, allowed_vars):
        """An expression given directly or as ``{expr: ...}``."""
        if isinstance(node, yaml.MappingNode):
            node = self.mapping(node, what, ("expr",), ("expr",))["expr"]
        src = self.string(node, what)
        try:
            return ex.parse(src, allowed_vars)
        except ExprError as err:
            self.fail(node, f"{what}: {err}")


def _call(reader, node, fn, *args, **kw):
    """Run a constructor, relocating library errors onto ``node``."""
    try:
        return fn(*args, **kw)
    except SpecFileError:
        raise
    except PhiBVPError as err:
        reader.fail(node, str(err))


def _variant(reader, node, what, registry):
    sec = reader.mapping(node, what, ("variant", "params"), ("variant",))
    name = reader.string(sec["variant"], f"{what}.variant")
    if name not in registry:
        reader.fail(sec["variant"], f"unknown {what} variant {name!r}; expected one of {sorted(registry)}")
    cls = registry[name]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    if "params" in sec:
        params = reader.mapping(sec["params"], f"{what}.params", tuple(fields))
        for key, value in params.items():
            if "str" in str(fields[key].type):
                kwargs[key] = reader.string(value, f"{what}.params.{key}")
            else:
                kwargs[key] = reader.number(value, f"{what}.params.{key}")
    return _call(reader, node, cls, **kwargs)


def _envelope(reader, node, what):
    sec = reader.mapping(node, what, ("constant", "table"))
    if ("constant" in sec) == ("table" in sec):
        reader.fail(node, f"{what} needs exactly one of 'constant' or 'table'")
    if "constant" in sec:
        return Envelope.const(reader.number(sec["constant"], f"{what}.constant"))
    tab = reader.mapping(sec["table"], f"{what}.table", ("t", "x"), ("t", "x"))
    t = reader.numbers(tab["t"], f"{what}.table.t")
    x = reader.numbers(tab["x"], f"{what}.table.x")
    return _call(reader, node, Envelope.table, t, x)


def _solver(reader, node):
    sec = reader.mapping(node, "solver", SOLVER_KEYS)
    kwargs = {}
    for f in dataclasses.fields(SolverConfig):
        if f.name not in sec:
            continue
        value = sec[f.name]
        if f.type in ("int", int):
            kwargs[f.name] = reader.integer(value, f"solver.{f.name}")
        elif f.type in ("bool", bool):
            kwargs[f.name] = reader.boolean(value, f"solver.{f.name}")
        else:
            kwargs[f.name] = reader.number(value, f"solver.{f.name}")
    return _call(reader, node, SolverConfig, **kwargs)


def _example(reader, node):
    sec = reader.mapping(node, "example", ("name", "params"), ("name",))
    name = reader.string(sec["name"], "example.name")
    if name not in BUILDERS:
        reader.fail(sec["name"], f"unknown example {name!r}; expected one of {sorted(BUILDERS)}")
    builder = BUILDERS[name]
    defaults = {
        p.name: p.default for p in inspect.signature(builder).parameters.values()
        if p.default is not inspect.Parameter.empty
    }
    kwargs = {}
    if "params" in sec:
        params = reader.mapping(sec["params"], "example.params", tuple(defaults))
        for key, value in params.items():
            default = defaults[key]
            if isinstance(default, bool):
                kwargs[key] = reader.boolean(value, f"example.params.{key}")
            elif isinstance(default, str):
                kwargs[key] = reader.string(value, f"example.params.{key}")
            else:
                kwargs[key] = reader.number(value, f"example.params.{key}")
    return _call(reader, node, builder, **kwargs)


def _problem(reader, sec, name):
    iv = reader.mapping(sec["interval"], "interval", ("a", "b"), ("a", "b"))
    a = reader.number(iv["a"], "interval.a")
    b = reader.number(iv["b"], "interval.b")

    ph = reader.mapping(sec["phi"], "phi", ("kind", "p"), ("kind",))
    kind = reader.string(ph["kind"], "phi.kind")
    p = reader.number(ph["p"], "phi.p") if "p" in ph else None
    phi = _call(reader, sec["phi"], PhiOperator, kind, p)

    kk = reader.mapping(sec["k"], "k", ("expr", "singular", "breakpoints"), ("expr",))
    k = reader.expression(kk["expr"], "k.expr", ("t",))
    singular = reader.numbers(kk["singular"], "k.singular") if "singular" in kk else []
    breakpoints = reader.numbers(kk["breakpoints"], "k.breakpoints") if "breakpoints" in kk else []

    f = reader.expression(sec["f"], "f", ("t", "z"))
    rho = reader.expression(sec["rho"], "rho", ("t", "y"))
    G = _variant(reader, sec["functional"], "functional", FUNCTIONAL_VARIANTS)
    Ha = _variant(reader, sec["boundary_a"], "boundary_a", BOUNDARY_VARIANTS)
    Hb = _variant(reader, sec["boundary_b"], "boundary_b", BOUNDARY_VARIANTS)
    alpha = _envelope(reader, sec["alpha"], "alpha")
    beta = _envelope(reader, sec["beta"], "beta")

    ng = reader.mapping(sec["nagumo"], "nagumo", ("H", "psi", "l", "mu", "q"), ("H", "psi", "l", "mu", "q"))
    nagumo = _call(
        reader, sec["nagumo"], NagumoData,
        H=reader.expression(ng["H"], "nagumo.H", ("R",)),
        psi=reader.expression(ng["psi"], "nagumo.psi", ("s", "R")),
        l=reader.expression(ng["l"], "nagumo.l", ("t", "R")),
        mu=reader.expression(ng["mu"], "nagumo.mu", ("t", "R")),
        q=reader.number(ng["q"], "nagumo.q"),
    )
    return _call(
        reader, sec["interval"], ProblemSpec,
        a=a, b=b, phi=phi, k=k, f=f, rho=rho, G=G, Ha=Ha, Hb=Hb, alpha=alpha, beta=beta,
        nagumo=nagumo, singular=tuple(singular), breakpoints=tuple(breakpoints), name=name,
    )


def loads_spec(text: str, source: str = "<spec>") -> tuple[ProblemSpec, SolverConfig]:
    """Parse a spec document into a problem and a solver configuration."""
    reader = _Reader(source)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as err:
        mark = err.problem_mark or err.context_mark
        line, col = (mark.line + 1, mark.column + 1) if mark is not None else (None, None)
        raise SpecFileError(f"YAML syntax error: {err.problem or err}", source, line, col) from None
    if root is None:
        raise SpecFileError("empty spec document", source)
    if isinstance(root, yaml.MappingNode) and any(reader.plain(k) == "example" for k, _ in root.value):
        sec = reader.mapping(root, "spec", ("example", "solver", "name"), ("example",))
        spec = _example(reader, sec["example"])
        if "name" in sec:
            spec = spec.with_(name=reader.string(sec["name"], "name"))
    else:
        sec = reader.mapping(root, "spec", SECTIONS, REQUIRED)
        name = reader.string(sec["name"], "name") if "name" in sec else Path(source).stem
        spec = _problem(reader, sec, name)
    config = _solver(reader, sec["solver"]) if "solver" in sec else SolverConfig()
    return spec, config


def load_spec(path) -> tuple[ProblemSpec, SolverConfig]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise SpecFileError(f"cannot read spec file: {err.strerror}", str(path)) from None
    return loads_spec(text, str(path))


def _variant_doc(obj) -> dict:
    d = obj.to_dict()
    variant = d.pop("variant")
    return {"variant": variant, "params": d} if d else {"variant": variant}


def spec_document(spec: ProblemSpec, config: SolverConfig | None = None) -> dict:
    """Mapping that ``loads_spec`` turns back into an equivalent problem."""
    d = spec.to_dict()
    doc = {
        "name": d["name"],
        "interval": d["interval"],
        "phi": d["phi"],
        "k": {key: v for key, v in d["k"].items() if v or key == "expr"},
        "f": d["f"],
        "rho": d["rho"],
        "functional": _variant_doc(spec.G),
        "boundary_a": _variant_doc(spec.Ha),
        "boundary_b": _variant_doc(spec.Hb),
        "alpha": d["alpha"],
        "beta": d["beta"],
        "nagumo": d["nagumo"],
    }
    if config is not None:
        doc["solver"] = dataclasses.asdict(config)
    return doc


def dumps_spec(spec: ProblemSpec, config: SolverConfig | None = None) -> str:
    return yaml.safe_dump(spec_document(spec, config), sort_keys=False, default_flow_style=None)
