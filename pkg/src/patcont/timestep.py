"""Semi-implicit time integration: implicit diffusion, explicit reaction.

Used to relax rough initial guesses toward attractor basins before a Newton
polish, and for the stick-slip experiments.  One step solves

    (I - dt D Lap) U_{n+1} = U_n + dt N(U_n)

with a cached sparse factorization per (grid, dt) pair; equilibria of the
spatial discretization are fixed points up to linear-solver accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Field, NeumannLaplacian
from .model import ModelParams, reaction_terms

__all__ = ["TimestepSettings", "IntegrationResult", "imex_step",
           "residual_inf", "integrate_to_residual"]


@dataclass(frozen=True)
class TimestepSettings:
    dt: float = 0.1
    max_steps: int = 2000
    residual_target: float = 1e-3

    def __post_init__(self):
        if self.dt <= 0 or self.residual_target <= 0:
            raise ValueError("dt and residual_target must be positive")


@dataclass
class IntegrationResult:
    field: Field
    steps: int
    reached: bool
    residual: float


def _diffusion_factor(lap: NeumannLaplacian, d: float, dt: float):
    key = ("imex", d, dt)
    fac = lap._factor_cache.get(key)
    if fac is None:
        n = lap.spec.npoints
        eye = sp.identity(n, format="csr")
        block = sp.block_diag([eye - dt * lap.matrix, eye - dt * d * lap.matrix],
                              format="csc")
        fac = spla.splu(block)
        lap._factor_cache[key] = fac
    return fac


def rhs(f: Field, p: ModelParams, lap: NeumannLaplacian) -> np.ndarray:
    """Discrete right-hand side D Lap U + N(U), stacked (u then v)."""
    fu, gv = reaction_terms(p, f.u, f.v)
    return np.concatenate([lap.apply(f.u) + fu, p.d * lap.apply(f.v) + gv])


def residual_inf(f: Field, p: ModelParams, lap: NeumannLaplacian) -> float:
    """Max norm of the time derivative over all nodes and components."""
    return float(np.abs(rhs(f, p, lap)).max())


def imex_step(f: Field, p: ModelParams, lap: NeumannLaplacian, dt: float) -> Field:
    fac = _diffusion_factor(lap, p.d, dt)
    fu, gv = reaction_terms(p, f.u, f.v)
    rhs_vec = np.concatenate([f.u + dt * fu, f.v + dt * gv])
    out = fac.solve(rhs_vec)
    return Field.from_stacked(f.spec, out)


def integrate_to_residual(f: Field, p: ModelParams, lap: NeumannLaplacian,
                          settings: TimestepSettings,
                          callback=None) -> IntegrationResult:
    """Step until the residual target is met or max_steps is exhausted.

    The step size halves whenever a step inflates the residual more than
    tenfold (stiff transients); non-convergence is reported, not raised.
    """
    dt = settings.dt
    res = residual_inf(f, p, lap)
    if res <= settings.residual_target:
        return IntegrationResult(f, 0, True, res)
    cur = f
    for n in range(1, settings.max_steps + 1):
        nxt = imex_step(cur, p, lap, dt)
        nres = residual_inf(nxt, p, lap)
        if nres > 10.0 * res and dt > 1e-6:
            dt /= 2.0
            continue
        cur, res = nxt, nres
        if callback is not None:
            callback(n, cur, res)
        if res <= settings.residual_target:
            return IntegrationResult(cur, n, True, res)
    return IntegrationResult(cur, settings.max_steps, False, res)
