"""A-priori constants: the sup bound M, eta_M, N, L_M, and the slope bound gamma_L."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DivergenceError, OrderingError
from .mesh import GridFunction, Mesh, gauss_legendre, integrate_singular
from .phi import PhiOperator
from .problem import Discretization, NagumoData, SolverConfig

# the marching gives up once the level exceeds this multiple of its start
DIVERGENCE_SPAN = 1e12
MARCH_GROWTH = 0.05


@dataclass(frozen=True)
class ProblemConstants:
    M: float
    M_active: str
    eta_M: float
    H_M: float
    N: float
    L_M: float
    rhs: float
    l_norm: float
    mu_norm: float
    k_sup: float
    gamma_L: np.ndarray

    def gamma_l1(self, mesh: Mesh) -> float:
        return float(np.sum(self.gamma_L * mesh.widths))

    def to_dict(self, mesh: Mesh | None = None) -> dict:
        out = {
            "M": self.M,
            "M_active": self.M_active,
            "eta_M": self.eta_M,
            "H_M": self.H_M,
            "N": self.N,
            "L_M": self.L_M,
            "rhs": self.rhs,
            "l_norm_L1": self.l_norm,
            "mu_norm_Lq": self.mu_norm,
            "k_sup": self.k_sup,
        }
        if mesh is not None:
            out["gamma_L_norm_L1"] = self.gamma_l1(mesh)
        return out


def compute_M(alpha: GridFunction, beta: GridFunction, K_alpha=None, K_beta=None) -> tuple[float, str]:
    """Largest of sup|alpha|, sup|beta| (and sup|k alpha'|, sup|k beta'| if given).

    Returns the value and the name of the quantity attaining it.
    """
    lo, up = alpha.align(beta)
    if np.any(lo.values > up.values):
        i = int(np.argmax(lo.values - up.values))
        raise OrderingError(f"alpha > beta at t={lo.mesh.nodes[i]!r}")
    candidates = {
        "sup|alpha|": float(np.max(np.abs(alpha.values))),
        "sup|beta|": float(np.max(np.abs(beta.values))),
    }
    if K_alpha is not None:
        candidates["sup|k alpha'|"] = float(np.max(np.abs(K_alpha), initial=0.0))
    if K_beta is not None:
        candidates["sup|k beta'|"] = float(np.max(np.abs(K_beta), initial=0.0))
    name = max(candidates, key=lambda key: candidates[key])
    return candidates[name], name


def choose_N(phi: PhiOperator, H_M: float, M: float, k_sup: float, length: float, margin: float = 1.01) -> float:
    if not margin > 1.0:
        raise ConfigurationError(f"margin must exceed 1, got {margin}")
    if not (H_M > 0 and length > 0 and M >= 0 and k_sup >= 0):
        raise ConfigurationError("choose_N needs H_M > 0, length > 0, M >= 0, k_sup >= 0")
    N = margin * max(H_M, 2.0 * M * k_sup / length)
    if not (phi.apply(N) > 0.0 and phi.apply(-N) < 0.0):
        raise ConfigurationError(f"sign condition Phi(N) > 0 > Phi(-N) fails for N={N}")
    return N


def nagumo_rhs(nagumo: NagumoData, R: float, M: float, mesh: Mesh) -> tuple[float, float, float]:
    """``||l||_1 + ||mu||_q (2M)^((q-1)/q)`` with its two norms."""
    l_norm = integrate_singular(lambda t: np.abs(nagumo.l_at(t, R)), mesh)
    if math.isinf(nagumo.q):
        pts, _ = mesh.quadrature(4)
        mu_norm = float(np.max(np.abs(nagumo.mu_at(pts, R))))
    else:
        q = nagumo.q
        integral = integrate_singular(lambda t: np.abs(nagumo.mu_at(t, R)) ** q, mesh)
        mu_norm = max(integral, 0.0) ** (1.0 / q)
    rhs = l_norm + mu_norm * (2.0 * M) ** nagumo.holder_exponent
    return float(rhs), float(l_norm), float(mu_norm)


def _psi_level(psi, start: float, target: float, what: str) -> float:
    """Smallest s >= start with integral from start to s of 1/psi equal to target."""
    gx, gw = gauss_legendre(8)

    def inv_psi(s):
        vals = np.asarray(psi(s), dtype=float)
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0.0):
            bad = ~np.isfinite(vals) | (vals <= 0.0)
            raise ConfigurationError(f"psi must be positive; psi({np.asarray(s)[bad][0]!r}) = {vals[bad][0]!r}")
        return 1.0 / vals

    def piece(s0, s1):
        return float(np.sum(gw * inv_psi(s0 + (s1 - s0) * gx)) * (s1 - s0))

    if target <= 0.0:
        return start
    scale = max(start, 1e-12)
    limit = scale * DIVERGENCE_SPAN
    s, total = start, 0.0
    while s < limit:
        step = MARCH_GROWTH * max(s, scale)
        gain = piece(s, s + step)
        if total + gain > target:
            lo, hi = s, s + step
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if total + piece(s, mid) > target:
                    hi = mid
                else:
                    lo = mid
                if hi - lo <= 4e-16 * hi:
                    break
            return hi
        total += gain
        s += step
    raise DivergenceError(
        f"integral of 1/psi on the {what} branch reached only {total:.6g} <= {target:.6g} "
        f"by s = {s:.3g}; psi does not satisfy the divergence condition"
    )


def compute_LM(phi: PhiOperator, nagumo: NagumoData, N: float, rhs: float, R: float, margin: float = 1.05) -> float:
    """L_M = margin * Phi^{-1}(s*) where the 1/psi integral from Phi(N) reaches ``rhs``.

    Both branches (starting at Phi(N) and at -Phi(-N)) are marched and the
    larger resulting L is kept.
    """
    if not margin > 1.0:
        raise ConfigurationError(f"margin must exceed 1, got {margin}")
    psi = lambda s: nagumo.psi_at(s, R)
    up = _psi_level(psi, float(phi.apply(N)), rhs, "positive")
    L_up = float(phi.invert(up))
    if phi.kind in ("identity", "plaplacian", "sinh", "cubic"):
        L_down = L_up  # odd Phi: both branches coincide
    else:  # pragma: no cover - future non-odd kinds
        down = _psi_level(psi, -float(phi.apply(-N)), rhs, "negative")
        L_down = -float(phi.invert(-down))
    return margin * max(L_up, L_down, N)


def gamma_L_field(L_M: float, disc: Discretization) -> np.ndarray:
    """Per cell: L_M times the cell average of 1/k, plus |alpha'| + |beta'|."""
    mean_inv_k = disc.inv_k_cell / disc.mesh.widths
    return L_M * mean_inv_k + np.abs(disc.alpha.slopes) + np.abs(disc.beta.slopes)


def compute_constants(disc: Discretization, config: SolverConfig | None = None) -> ProblemConstants:
    config = config or SolverConfig()
    spec = disc.spec
    k_a = disc.k_eff * disc.alpha.slopes
    k_b = disc.k_eff * disc.beta.slopes
    M, active = compute_M(disc.alpha, disc.beta, k_a, k_b)
    eta = spec.G.eta(M, spec.length)
    H_M = spec.nagumo.H_at(eta)
    N = choose_N(spec.phi, H_M, M, disc.k_sup, spec.length, config.margin_N)
    rhs, l_norm, mu_norm = nagumo_rhs(spec.nagumo, eta, M, disc.mesh)
    L = compute_LM(spec.phi, spec.nagumo, N, rhs, eta, config.margin_L)
    gamma = gamma_L_field(L, disc)
    gamma.setflags(write=False)
    return ProblemConstants(M, active, eta, H_M, N, L, rhs, l_norm, mu_norm, disc.k_sup, gamma)
