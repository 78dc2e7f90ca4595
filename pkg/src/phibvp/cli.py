"""Command-line interface: ``phibvp solve | verify | constants | example``.

Exit codes: 0 success; 1 input error; 2 the iteration converged (or the
constants were computed) but a certificate or hypothesis failed; 3 the
fixed-point iteration did not converge.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .constants import compute_constants
from .errors import DivergenceError, PhiBVPError
from .examples import BUILDERS, SUMMARIES
from .mesh import GridFunction, Mesh
from .problem import Discretization, ProblemSpec, SolverConfig
from .solver import SolveReport, apply_A, fixed_point
from .specfile import dumps_spec, load_spec, loads_spec
from .verify import check_lower_upper, check_solution, fixed_point_certificates

EXIT_OK, EXIT_INPUT, EXIT_UNCERTIFIED, EXIT_NOT_CONVERGED = 0, 1, 2, 3
CSV_COLUMNS = ("t", "x", "dx", "k_dx", "phi_k_dx")
REPORT_SCHEMA = "phibvp.report"
REPORT_SCHEMA_VERSION = 1


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def solution_columns(x: GridFunction, disc: Discretization) -> dict:
    """Nodal table; derivative columns refer to the cell starting at each node.

    The last node reuses the slope of the last cell.
    """
    cell = np.minimum(np.arange(x.mesh.nodes.size), x.mesh.n_cells - 1)
    dx = x.slopes[cell]
    k_dx = disc.k_eff[cell] * dx
    return {
        "t": x.mesh.nodes,
        "x": x.values,
        "dx": dx,
        "k_dx": k_dx,
        "phi_k_dx": np.asarray(disc.spec.phi.apply(k_dx), dtype=float),
    }


def write_csv(cols: dict, stream):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in zip(*(cols[c] for c in CSV_COLUMNS)):
        w.writerow(["%.17g" % v for v in row])


def read_candidate(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """(t, x) columns of a candidate CSV; other columns are ignored."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise PhiBVPError(f"{path}: cannot read candidate: {err.strerror}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise PhiBVPError(f"{path}: empty candidate file")
    header = [h.strip() for h in rows[0]]
    if "t" not in header or "x" not in header:
        raise PhiBVPError(f"{path}:1: candidate header must contain columns 't' and 'x', got {header}")
    it, ix = header.index("t"), header.index("x")
    t, x = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise PhiBVPError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        try:
            t.append(float(row[it]))
            x.append(float(row[ix]))
        except ValueError:
            raise PhiBVPError(f"{path}:{lineno}: non-numeric entry") from None
    if len(t) < 2:
        raise PhiBVPError(f"{path}: candidate needs at least two rows")
    return np.array(t), np.array(x)


def candidate_discretization(spec: ProblemSpec, config: SolverConfig, t: np.ndarray):
    """Mesh for checking a candidate given on nodes ``t``.

    The candidate's nodes are kept; the problem's mandatory points are
    added, and a coarse candidate is refined by the solver mesh (linear
    interpolation represents it exactly there).
    """
    if t[0] != spec.a or t[-1] != spec.b:
        raise PhiBVPError(f"candidate spans [{t[0]}, {t[-1]}], problem is on [{spec.a}, {spec.b}]")
    if np.any(np.diff(t) <= 0.0):
        raise PhiBVPError("candidate abscissae must be strictly increasing")
    nodes = np.union1d(t, np.array(spec.singular + spec.mesh_points(), dtype=float))
    mesh = Mesh(nodes, spec.singular)
    if mesh.n_cells < config.cells:
        mesh = mesh.union(spec.make_mesh(config.cells, config.grading))
    return Discretization.from_mesh(spec, mesh, config.quad_order)


def report_document(report: SolveReport, spec: ProblemSpec, config: SolverConfig, timestamp: str | None = None) -> dict:
    cols = solution_columns(report.solution, report.disc)
    return _jsonable(
        {
            "schema": REPORT_SCHEMA,
            "schema_version": REPORT_SCHEMA_VERSION,
            "version": __version__,
            "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "problem": spec.to_dict(),
            "solver": dataclasses.asdict(config),
            "status": {
                "step_converged": report.step_converged,
                "converged": report.converged,
                "certificates_pass": report.certificates_pass,
                "message": report.message,
                "iterations": report.iterations,
            },
            "constants": report.constants.to_dict(report.disc.mesh),
            "diagnostics": {
                "residual_l1": report.residual_l1,
                "fp_residual": report.fp_residual,
                "penalty_linf": report.penalty_linf,
                "max_abs_z": report.max_abs_z,
                "z_history": report.z_history,
                "step_norms": report.step_norms,
            },
            "certificates": [c.to_dict() for c in report.certificates],
            "solution": {k: cols[k] for k in CSV_COLUMNS},
        }
    )


def _print_constants(consts, mesh, out):
    for key, value in consts.to_dict(mesh).items():
        print(f"{key:<18} {value:.12g}" if isinstance(value, float) else f"{key:<18} {value}", file=out)


def _exit_code(report: SolveReport) -> int:
    if not report.step_converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK if report.converged else EXIT_UNCERTIFIED


def _solve_and_write(spec, config, out_path, fmt, stdout, stderr) -> int:
    try:
        report = fixed_point(spec, config)
    except DivergenceError as err:
        print(f"error: {err}", file=stderr)
        return EXIT_UNCERTIFIED
    summary = stdout if out_path else stderr
    if fmt == "json":
        text = json.dumps(report_document(report, spec, config), sort_keys=True, indent=1) + "\n"
    else:
        buf = io.StringIO()
        write_csv(solution_columns(report.solution, report.disc), buf)
        text = buf.getvalue()
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    print(report.message, file=summary)
    _print_constants(report.constants, report.disc.mesh, summary)
    for c in report.certificates:
        print(c.line(), file=summary)
    return _exit_code(report)


def _config_overrides(config: SolverConfig, args) -> SolverConfig:
    kw = {}
    for name in ("cells", "max_iters"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    return config.with_(**kw) if kw else config


def cmd_solve(args, stdout, stderr) -> int:
    spec, config = load_spec(args.spec)
    config = _config_overrides(config, args)
    return _solve_and_write(spec, config, args.out, args.format, stdout, stderr)


def cmd_verify(args, stdout, stderr) -> int:
    spec, config = load_spec(args.spec)
    config = _config_overrides(config, args)
    t, xv = read_candidate(Path(args.candidate))
    disc = candidate_discretization(spec, config, t)
    x = GridFunction.from_values(disc.mesh, np.interp(disc.mesh.nodes, t, xv))
    if args.role == "solution":
        consts = compute_constants(disc, config)
        certs = check_solution(x, disc, consts)
        certs += fixed_point_certificates(x, apply_A(x, disc, consts, config.z_tol), config)
    else:
        certs = check_lower_upper(x, disc, args.role)
    for c in certs:
        print(c.line(), file=stdout)
    ok = all(c.passed for c in certs)
    print(f"{args.role}: {'all certificates pass' if ok else 'certificate failure'}", file=stdout)
    return EXIT_OK if ok else EXIT_UNCERTIFIED


def cmd_constants(args, stdout, stderr) -> int:
    spec, config = load_spec(args.spec)
    config = _config_overrides(config, args)
    disc = spec.discretize(config.cells, config.grading, config.quad_order)
    try:
        consts = compute_constants(disc, config)
    except DivergenceError as err:
        print(f"divergence test failed: {err}", file=stderr)
        return EXIT_UNCERTIFIED
    _print_constants(consts, disc.mesh, stdout)
    return EXIT_OK


def _parse_param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise PhiBVPError(f"--param expects key=value, got {text!r}")
    return key.strip(), value.strip()


def cmd_example(args, stdout, stderr) -> int:
    if args.list:
        for name in BUILDERS:
            print(f"{name:<18} {SUMMARIES[name]}", file=stdout)
        return EXIT_OK
    if not args.name:
        raise PhiBVPError("example name required (see --list)")
    params = dict(_parse_param(p) for p in args.param or [])
    # route the parameters through the spec-file reader so they are typed and checked
    doc = {"example": {"name": args.name, "params": params}} if params else {"example": {"name": args.name}}
    spec, config = loads_spec(yaml.safe_dump(doc), f"example {args.name}")
    config = _config_overrides(config, args)
    if args.spec_only:
        stdout.write(dumps_spec(spec, config))
        return EXIT_OK
    return _solve_and_write(spec, config, args.out, args.format, stdout, stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phibvp", description="Singular Phi-Laplacian BVP solver with certificates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log iteration progress")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_opts(sp):
        sp.add_argument("--cells", type=int, help="override solver.cells")
        sp.add_argument("--max-iters", dest="max_iters", type=int, help="override solver.max_iters")

    s = sub.add_parser("solve", help="solve a spec file")
    s.add_argument("spec")
    s.add_argument("--out", "-o", help="output file (default: stdout)")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    solver_opts(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="certify a candidate CSV against a spec")
    v.add_argument("spec")
    v.add_argument("candidate")
    v.add_argument("--role", choices=("solution", "lower", "upper"), default="solution")
    solver_opts(v)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("constants", help="print the a-priori constants of a spec")
    c.add_argument("spec")
    solver_opts(c)
    c.set_defaults(func=cmd_constants)

    e = sub.add_parser("example", help="solve or print a built-in example")
    e.add_argument("name", nargs="?", choices=sorted(BUILDERS))
    e.add_argument("--param", "-p", action="append", metavar="KEY=VALUE")
    e.add_argument("--list", action="store_true", help="list the built-in examples")
    e.add_argument("--spec-only", action="store_true", help="print the example as a spec file and exit")
    e.add_argument("--out", "-o")
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    solver_opts(e)
    e.set_defaults(func=cmd_example)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args, stdout, stderr)
    except PhiBVPError as err:
        print(f"error: {err}", file=stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
