"""Strictly increasing homeomorphisms of the real line (the Phi-Laplacian map)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BracketError, ConfigurationError

KINDS = ("identity", "plaplacian", "sinh", "cubic")


def monotone_inverse(fn: Callable, v, max_iter: int = 200):
    """Solve ``fn(y) = v`` for a strictly increasing ``fn`` by bisection.

    The bracket starts at [-1, 1] and is doubled on the deficient side until
    it contains the root; then at most ``max_iter`` bisection steps follow.
    Works elementwise on arrays.
    """
    v = np.asarray(v, dtype=float)
    lo = np.full(v.shape, -1.0)
    hi = np.full(v.shape, 1.0)
    for _ in range(1100):
        low_bad = fn(lo) > v
        high_bad = fn(hi) < v
        if not (np.any(low_bad) or np.any(high_bad)):
            break
        with np.errstate(over="ignore"):
            lo = np.where(low_bad, 2.0 * lo, lo)
            hi = np.where(high_bad, 2.0 * hi, hi)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise BracketError("no bracket for the inverse within the floating-point range")
    else:
        raise BracketError("bracket doubling did not terminate")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = fn(mid) < v
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all((hi - lo) <= 4.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))):
            break
    out = 0.5 * (lo + hi)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PhiOperator:
    """One of the built-in odd homeomorphisms.

    ``plaplacian`` is ``|y|^(p-2) y`` and needs ``p > 1``.
    """

    kind: str = "identity"
    p: float | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ConfigurationError(f"unknown Phi kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if kind == "plaplacian":
            if self.p is None or not float(self.p) > 1.0 or not math.isfinite(self.p):
                raise ConfigurationError(f"p-Laplacian needs a finite p > 1, got {self.p}")
            object.__setattr__(self, "p", float(self.p))
        elif self.p is not None:
            raise ConfigurationError(f"Phi kind {kind!r} takes no exponent")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def plaplacian(cls, p):
        return cls("plaplacian", p)

    @classmethod
    def sinh(cls):
        return cls("sinh")

    @classmethod
    def cubic(cls):
        return cls("cubic")

    def apply(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "identity":
            out = y.copy()
        elif self.kind == "plaplacian":
            out = np.sign(y) * np.abs(y) ** (self.p - 1.0)
        elif self.kind == "sinh":
            with np.errstate(over="ignore"):
                out = np.sinh(y)
        else:
            out = y * y * y
        return out if out.ndim else float(out)

    def invert(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "identity":
            out = v.copy()
        elif self.kind == "plaplacian":
            out = np.sign(v) * np.abs(v) ** (1.0 / (self.p - 1.0))
        elif self.kind == "sinh":
            out = np.arcsinh(v)
        elif self.kind == "cubic":
            out = np.cbrt(v)
        else:  # pragma: no cover - every kind above has a closed form
            out = np.asarray(monotone_inverse(self.apply, v))
        return out if out.ndim else float(out)

    __call__ = apply

    def describe(self) -> str:
        if self.kind == "plaplacian":
            return f"plaplacian(p={self.p:g})"
        return self.kind


def phi_apply(op: PhiOperator, y):
    return op.apply(y)


def phi_invert(op: PhiOperator, v):
    return op.invert(v)
