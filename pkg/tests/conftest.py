import functools

import pytest

from phibvp import SolverConfig, build_example, fixed_point

EXAMPLES = ("sinh-integral", "plaplacian-delay", "cubic-runmax")


@functools.lru_cache(maxsize=None)
def solved(name, cells=2048, **params):
    """Solve a built-in example once per session and cache the report."""
    return fixed_point(build_example(name, **params), SolverConfig(cells=cells))


@pytest.fixture(scope="session")
def solve_example():
    return solved
