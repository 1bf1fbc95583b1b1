"""Reaction kinetics, their multilinear expansions, and linear dispersion analysis.

The two-component kinetics are

    f(u, v) = -u + u^2 v + sigma (u - 1/v)^2
    g(u, v) = lam - u^2 v - sigma (u - 1/v)^2

with diffusion matrix diag(1, d).  The sigma term vanishes identically at the
homogeneous state (lam, 1/lam) together with its first derivatives, so the
linear (Turing) analysis is independent of sigma while the quadratic and cubic
interactions are not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelParams",
    "PointState",
    "DispersionResult",
    "homogeneous_state",
    "reaction",
    "reaction_terms",
    "reaction_jacobian",
    "reaction_jacobian_terms",
    "bilinear_B",
    "trilinear_C",
    "nonlinear_remainder",
    "dispersion_matrix",
    "mu_pm",
    "mu_plus",
    "critical_values",
    "turing_lambda",
]


@dataclass(frozen=True)
class ModelParams:
    """Model parameters: feed rate lam > 0, diffusion ratio d > 0, modification sigma."""

    lam: float
    d: float = 60.0
    sigma: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.d > 0:
            raise ValueError(f"d must be positive, got {self.d}")

    def with_lam(self, lam: float) -> "ModelParams":
        return ModelParams(lam=lam, d=self.d, sigma=self.sigma)


@dataclass(frozen=True)
class PointState:
    u: float
    v: float


@dataclass(frozen=True)
class DispersionResult:
    k: float
    mu_plus: float
    mu_minus: float
    is_complex: bool


def homogeneous_state(p: ModelParams) -> PointState:
    """Unique spatially homogeneous equilibrium (lam, 1/lam); independent of sigma."""
    return PointState(p.lam, 1.0 / p.lam)


def reaction_terms(p: ModelParams, u, v):
    """Kinetics (f, g) evaluated componentwise; u, v may be arrays."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if p.sigma != 0.0 and np.any(v == 0.0):
        raise ZeroDivisionError("sigma term requires v != 0")
    f = -u + u * u * v
    g = p.lam - u * u * v
    if p.sigma != 0.0:
        s = p.sigma * (u - 1.0 / v) ** 2
        f = f + s
        g = g - s
    return f, g


def reaction(p: ModelParams, s: PointState) -> np.ndarray:
    """Kinetics at a single point as a 2-vector."""
    f, g = reaction_terms(p, s.u, s.v)
    return np.array([float(f), float(g)])


def reaction_jacobian_terms(p: ModelParams, u, v):
    """Partial derivatives (f_u, f_v, g_u, g_v), componentwise over arrays."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if p.sigma != 0.0 and np.any(v == 0.0):
        raise ZeroDivisionError("sigma term requires v != 0")
    fu = -1.0 + 2.0 * u * v
    fv = u * u
    gu = -2.0 * u * v
    gv = -u * u
    if p.sigma != 0.0:
        w = u - 1.0 / v
        su = 2.0 * p.sigma * w
        sv = 2.0 * p.sigma * w / (v * v)
        fu, fv = fu + su, fv + sv
        gu, gv = gu - su, gv - sv
    return fu, fv, gu, gv


def reaction_jacobian(p: ModelParams, s: PointState) -> np.ndarray:
    """2x2 Jacobian of the kinetics at a single point."""
    fu, fv, gu, gv = reaction_jacobian_terms(p, s.u, s.v)
    return np.array([[float(fu), float(fv)], [float(gu), float(gv)]])


def bilinear_B(p: ModelParams, wa, wb) -> np.ndarray:
    """Symmetric bilinear form of the kinetics expanded about the homogeneous state.

    Closed form from the Taylor expansion at (lam, 1/lam), with 1/v expanded as
    lam - lam^2 w2 + lam^3 w2^2 - ...; both output components carry the same
    scalar with opposite signs.
    """
    lam = p.lam
    a1, a2 = wa[0], wa[1]
    b1, b2 = wb[0], wb[1]
    s = a1 * b1 / lam + lam * (a1 * b2 + a2 * b1)
    if p.sigma != 0.0:
        s = s + p.sigma * (a1 + lam**2 * a2) * (b1 + lam**2 * b2)
    return np.array([s, -s])


def trilinear_C(p: ModelParams, wa, wb, wc) -> np.ndarray:
    """Fully symmetric trilinear form of the kinetics about the homogeneous state."""
    lam = p.lam
    a1, a2 = wa[0], wa[1]
    b1, b2 = wb[0], wb[1]
    c1, c2 = wc[0], wc[1]
    s = (a1 * b1 * c2 + a1 * b2 * c1 + a2 * b1 * c1) / 3.0
    if p.sigma != 0.0:
        s = s - p.sigma * (2.0 * lam**3 / 3.0) * (
            a2 * b2 * c1 + a2 * b1 * c2 + a1 * b2 * c2
        )
        s = s - p.sigma * 2.0 * lam**5 * a2 * b2 * c2
    return np.array([s, -s])


def nonlinear_remainder(p: ModelParams, w) -> np.ndarray:
    """Kinetics at w* + w minus the linearization: N(w*+w) - N(w*) - J w.

    Exact evaluation used by the Taylor-consistency oracles for bilinear_B and
    trilinear_C.
    """
    ws = homogeneous_state(p)
    base = reaction(p, ws)
    J = reaction_jacobian(p, ws)
    w = np.asarray(w, dtype=float)
    full = reaction(p, PointState(ws.u + w[0], ws.v + w[1]))
    return full - base - J @ w


def dispersion_matrix(p: ModelParams, k: float) -> np.ndarray:
    """Fourier symbol J - diag(1, d) k^2 of the linearization at the homogeneous state."""
    lam = p.lam
    J = np.array([[1.0, lam**2], [-2.0, -(lam**2)]])
    return J - np.diag([1.0, p.d]) * k**2


def mu_pm(p: ModelParams, k: float) -> DispersionResult:
    """Both dispersion eigenvalues at wavenumber modulus k (real parts if complex)."""
    L = dispersion_matrix(p, k)
    tr = L[0, 0] + L[1, 1]
    det = L[0, 0] * L[1, 1] - L[0, 1] * L[1, 0]
    disc = (tr / 2.0) ** 2 - det
    if disc >= 0.0:
        root = np.sqrt(disc)
        return DispersionResult(k, tr / 2.0 + root, tr / 2.0 - root, False)
    return DispersionResult(k, tr / 2.0, tr / 2.0, True)


def mu_plus(p: ModelParams, k: float) -> float:
    """Real part of the larger dispersion eigenvalue."""
    return mu_pm(p, k).mu_plus


def critical_values(d: float) -> tuple[float, float]:
    """Turing onset (lam_c, k_c) in closed form: sqrt(d)*sqrt(3-sqrt(8)), sqrt(sqrt(2)-1)."""
    if not d > 0:
        raise ValueError(f"d must be positive, got {d}")
    lam_c = np.sqrt(d) * np.sqrt(3.0 - np.sqrt(8.0))
    k_c = np.sqrt(np.sqrt(2.0) - 1.0)
    return lam_c, k_c


def turing_lambda(d: float, k2: float) -> float | None:
    """lam at which the mode with squared wavenumber k2 crosses zero growth.

    Root of det(J - D k^2) = 0, i.e. lam^2 = d k^2 (1 - k^2)/(1 + k^2); None when
    no such lam > 0 exists (k2 outside (0, 1)).  Feeding the exact eigenvalues of
    the discrete Laplacian gives the bifurcation ladder of the discretized
    homogeneous branch, used as an independent oracle for event detection.
    """
    if not 0.0 < k2 < 1.0:
        return None
    return float(np.sqrt(d * k2 * (1.0 - k2) / (1.0 + k2)))
