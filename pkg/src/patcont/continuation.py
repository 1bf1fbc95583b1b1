"""Pseudo-arclength continuation of stationary states with stability bookkeeping.

The extended unknown is z = (U, lam) with the weighted inner product
<z, z'> = (U . U') / (nx ny) + lam lam', which keeps arclength steps
grid-resolution independent.  Folds are flagged by a sign change of the
tangent's lam-component, bifurcations by a change of the unstable-eigenvalue
count without a fold, and both are localized by bisection in arclength.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Field, NeumannLaplacian, lp_norm, mirror_x_error, mirror_y_error
from .model import ModelParams, reaction_jacobian_terms
from .timestep import residual_inf, rhs

__all__ = [
    "ContSettings",
    "BranchPoint",
    "Branch",
    "Event",
    "NewtonError",
    "BranchSwitchError",
    "assemble_jacobian",
    "newton_correct",
    "stability_count",
    "start_homogeneous",
    "point_from_field",
    "run_branch",
    "detect_events",
    "branch_switch",
    "arclength_consistency",
    "save_branch_csv",
    "save_events_csv",
]


class NewtonError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class BranchSwitchError(RuntimeError):
    pass


@dataclass(frozen=True)
class ContSettings:
    ds0: float = 0.01
    dsmin: float = 1e-7
    dsmax: float = 0.1
    newton_tol: float = 1e-9
    max_newton: int = 10
    n_eigs: int = 16
    bif_loc_tol: float = 1e-4
    eig_shift: float = 0.03

    def __post_init__(self):
        if not (0 < self.dsmin <= self.ds0 <= self.dsmax):
            raise ValueError("need 0 < dsmin <= ds0 <= dsmax")
        if self.newton_tol <= 0 or self.n_eigs < 1:
            raise ValueError("newton_tol must be positive, n_eigs >= 1")


@dataclass
class BranchPoint:
    s: float
    lam: float
    state: Field
    tangent: np.ndarray
    n_unstable: int
    norms: dict
    ds: float = 0.0


@dataclass
class Event:
    index: int
    kind: str  # "fold" | "bifurcation"
    located_lambda: float
    state: Field | None = None
    kernel: np.ndarray | None = None


@dataclass
class Branch:
    label: str
    points: list[BranchPoint] = dataclass_field(default_factory=list)
    events: list[Event] = dataclass_field(default_factory=list)
    termination: str = ""


# ---------------------------------------------------------------------------
# residual, Jacobian, Newton
# ---------------------------------------------------------------------------

def assemble_jacobian(f: Field, p: ModelParams, lap: NeumannLaplacian) -> sp.csr_matrix:
    """Sparse Jacobian of the stationary residual: diffusion plus pointwise kinetics."""
    fu, fv, gu, gv = reaction_jacobian_terms(p, f.u, f.v)
    A = sp.bmat([
        [lap.matrix + sp.diags(fu), sp.diags(fv)],
        [sp.diags(gu), p.d * lap.matrix + sp.diags(gv)],
    ], format="csr")
    return A


def _lam_derivative(spec) -> np.ndarray:
    # d residual / d lam: the feed enters the v-equation only
    n = spec.npoints
    out = np.zeros(2 * n)
    out[n:] = 1.0
    return out


def newton_correct(f: Field, p: ModelParams, lap: NeumannLaplacian,
                   tol: float = 1e-9, max_iter: int = 12) -> Field:
    """Plain Newton for the stationary problem at fixed lam."""
    cur = f
    res = rhs(cur, p, lap)
    for _ in range(max_iter):
        rnorm = np.abs(res).max()
        if rnorm <= tol:
            return cur
        A = assemble_jacobian(cur, p, lap)
        try:
            step = spla.spsolve(A.tocsc(), res)
        except RuntimeError as exc:
            raise NewtonError(f"linear solve failed: {exc}", rnorm) from exc
        if not np.all(np.isfinite(step)):
            raise NewtonError("Newton step not finite", rnorm)
        cur = Field.from_stacked(cur.spec, cur.stacked() - step)
        res = rhs(cur, p, lap)
    rnorm = float(np.abs(res).max())
    if rnorm <= tol:
        return cur
    raise NewtonError("Newton did not converge", rnorm)


# ---------------------------------------------------------------------------
# eigenvalue counting
# ---------------------------------------------------------------------------

def stability_count(f: Field, p: ModelParams, lap: NeumannLaplacian,
                    n_eigs: int = 16, shift: float = 0.03) -> int:
    """Count eigenvalues with positive real part among the rightmost ones.

    Shift-inverted Arnoldi about a small positive shift; dense fallback for
    small problems.  A saturated count (every returned eigenvalue unstable)
    triggers a retry with a larger subspace.
    """
    A = assemble_jacobian(f, p, lap)
    n = A.shape[0]
    if n < 2000:
        eigs = np.linalg.eigvals(A.toarray())
        return int(np.sum(eigs.real > 0))
    k = min(n_eigs, n - 2)
    for attempt, (kk, sig) in enumerate(
            [(k, shift), (k, shift * 2.7), (min(2 * k, n - 2), shift)]):
        try:
            vals = _shift_invert_eigs(A, kk, sig)
        except (RuntimeError, spla.ArpackNoConvergence):
            continue
        count = int(np.sum(vals.real > 0))
        if count < kk or attempt == 2:
            return count
        k = kk  # saturated: fall through to the larger-subspace attempt
    raise RuntimeError("eigenvalue count failed after shift retries")


def _shift_invert_eigs(A: sp.csr_matrix, k: int, shift: float) -> np.ndarray:
    n = A.shape[0]
    lu = spla.splu((A - shift * sp.identity(n, format="csr")).tocsc())
    op = spla.LinearOperator((n, n), matvec=lu.solve)
    # fixed start vector keeps reruns byte-identical
    v0 = np.sin(0.7 + 3.1 * np.arange(n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals = spla.eigs(A, k=k, sigma=shift, OPinv=op, v0=v0,
                         return_eigenvectors=False, tol=1e-9)
    return vals


def kernel_vector(f: Field, p: ModelParams, lap: NeumannLaplacian) -> np.ndarray:
    """Eigenvector for the eigenvalue nearest zero (the near-kernel direction)."""
    A = assemble_jacobian(f, p, lap)
    n = A.shape[0]
    if n < 2000:
        vals, vecs = np.linalg.eig(A.toarray())
        idx = int(np.argmin(np.abs(vals)))
        vec = vecs[:, idx].real
    else:
        reg = 1e-7
        v0 = np.sin(0.7 + 3.1 * np.arange(n))
        for _ in range(4):
            try:
                lu = spla.splu((A - reg * sp.identity(n, format="csr")).tocsc())
                op = spla.LinearOperator((n, n), matvec=lu.solve)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    vals, vecs = spla.eigs(A, k=3, sigma=reg, OPinv=op, v0=v0,
                                           tol=1e-10)
                idx = int(np.argmin(np.abs(vals)))
                vec = vecs[:, idx].real
                break
            except (RuntimeError, spla.ArpackNoConvergence):
                reg *= 13.7
        else:
            raise RuntimeError("kernel vector computation failed")
    return vec / np.linalg.norm(vec)


# ---------------------------------------------------------------------------
# extended (bordered) corrector
# ---------------------------------------------------------------------------

class _Extended:
    """Bordered Newton systems in the weighted (state, lam) space.

    The bordered solves use block elimination against a factorization of the
    sparse PDE Jacobian alone (a dense border row would wreck sparse fill-in),
    and the factorization is frozen across corrector iterations: predictors
    start close, so a stale Jacobian still contracts and saves most of the
    factorization work.
    """

    def __init__(self, p0: ModelParams, lap: NeumannLaplacian, settings: ContSettings):
        self.p0 = p0
        self.lap = lap
        self.cfg = settings
        self.m = lap.spec.npoints
        self.rlam = _lam_derivative(lap.spec)
        self._lu = None
        self._lu_x2 = None

    def params(self, lam: float) -> ModelParams:
        return self.p0.with_lam(lam)

    def wdot(self, u_part: np.ndarray, lam_part: float,
             u2: np.ndarray, lam2: float) -> float:
        return float(u_part @ u2) / self.m + lam_part * lam2

    def norm(self, u_part: np.ndarray, lam_part: float) -> float:
        return np.sqrt(self.wdot(u_part, lam_part, u_part, lam_part))

    def refactor(self, fld: Field, lam: float) -> None:
        A = assemble_jacobian(fld, self.params(lam), self.lap)
        self._lu = spla.splu(A.tocsc())
        self._lu_x2 = self._lu.solve(self.rlam)

    def _bordered_solve(self, res: np.ndarray, arc: float,
                        tu: np.ndarray, tl: float) -> tuple[np.ndarray, float]:
        """Solve [[A, R_lam],[tu/m, tl]] (du, dl) = (res, arc) by block elimination."""
        x1 = self._lu.solve(res)
        x2 = self._lu_x2
        den = tl - self.wdot(tu, 0.0, x2, 0.0)
        if den == 0.0 or not np.isfinite(den):
            raise NewtonError("bordered system degenerate", float(np.abs(res).max()))
        dl = (arc - self.wdot(tu, 0.0, x1, 0.0)) / den
        return x1 - dl * x2, dl

    def correct(self, u_pred: np.ndarray, lam_pred: float,
                tu: np.ndarray, tl: float, max_iter: int | None = None,
                refactor: bool = True) -> tuple[Field, float]:
        """Newton on residual = 0 plus the arclength plane through the predictor."""
        spec = self.lap.spec
        u, lam = u_pred.copy(), lam_pred
        iters = max_iter if max_iter is not None else self.cfg.max_newton
        if refactor or self._lu is None:
            self.refactor(Field.from_stacked(spec, u), lam)
        prev_rnorm = np.inf
        for it in range(iters):
            fld = Field.from_stacked(spec, u)
            res = rhs(fld, self.params(lam), self.lap)
            arc = self.wdot(u - u_pred, lam - lam_pred, tu, tl)
            rnorm = float(np.abs(res).max())
            if rnorm <= self.cfg.newton_tol and abs(arc) <= 1e-10:
                return fld, lam
            if not np.isfinite(rnorm):
                raise NewtonError("corrector diverged", rnorm)
            if it > 0 and rnorm > 0.5 * prev_rnorm:
                # stale-Jacobian contraction too weak; refresh once per stall
                self.refactor(fld, lam)
            prev_rnorm = rnorm
            du, dl = self._bordered_solve(res, arc, tu, tl)
            if not np.all(np.isfinite(du)):
                raise NewtonError("corrector step not finite", rnorm)
            u = u - du
            lam = lam - dl
        fld = Field.from_stacked(spec, u)
        rnorm = float(np.abs(rhs(fld, self.params(lam), self.lap)).max())
        if rnorm <= self.cfg.newton_tol:
            return fld, lam
        raise NewtonError("corrector did not converge", rnorm)

    def tangent(self, fld: Field, lam: float, tu_prev: np.ndarray,
                tl_prev: float, refactor: bool = True) -> tuple[np.ndarray, float]:
        """Nullspace direction of [A, R_lam], oriented along the previous tangent."""
        if refactor or self._lu is None:
            self.refactor(fld, lam)
        tu, tl = self._bordered_solve(np.zeros(2 * self.m), 1.0, tu_prev, tl_prev)
        nrm = self.norm(tu, tl)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise NewtonError("tangent computation failed", np.inf)
        return tu / nrm, tl / nrm


def _point_norms(f: Field) -> dict:
    return {
        "l2_u": lp_norm(f, "u", 2.0),
        "l8_u": lp_norm(f, "u", 8.0),
        "min_u": float(f.u.min()),
        "max_u": float(f.u.max()),
        "u00": f.u_center(),
    }


def _make_point(ext: _Extended, fld: Field, lam: float, tu, tl, s: float,
                ds: float) -> BranchPoint:
    count = stability_count(fld, ext.params(lam), ext.lap,
                            ext.cfg.n_eigs, ext.cfg.eig_shift)
    return BranchPoint(s=s, lam=lam, state=fld,
                       tangent=np.concatenate([tu, [tl]]),
                       n_unstable=count, norms=_point_norms(fld), ds=ds)


def start_homogeneous(p: ModelParams, lap: NeumannLaplacian,
                      settings: ContSettings, direction: int = -1) -> BranchPoint:
    """Branch point on the homogeneous branch, tangent oriented by direction in lam."""
    spec = lap.spec
    fld = Field.homogeneous(spec, p)
    ext = _Extended(p, lap, settings)
    n = spec.npoints
    ulam = np.concatenate([np.ones(n), np.full(n, -1.0 / p.lam**2)])
    tl = direction / ext.norm(ulam, 1.0)
    tu = ulam * tl
    return _make_point(ext, fld, p.lam, tu, tl, s=0.0, ds=0.0)


def point_from_field(f: Field, p: ModelParams, lap: NeumannLaplacian,
                     settings: ContSettings, direction: int = -1) -> BranchPoint:
    """Newton-polish a state and equip it with a lam-oriented tangent."""
    fld = newton_correct(f, p, lap, settings.newton_tol, settings.max_newton)
    ext = _Extended(p, lap, settings)
    A = assemble_jacobian(fld, p, lap)
    ulam = -spla.spsolve(A.tocsc(), _lam_derivative(lap.spec))
    tl = direction / ext.norm(ulam, 1.0)
    tu = ulam * tl
    return _make_point(ext, fld, p.lam, tu, tl, s=0.0, ds=0.0)


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------

def detect_events(branch: Branch) -> list[tuple[int, str, int]]:
    """Re-scan a stored branch for raw event intervals.

    Returns (index, kind, count_change) per interval (points[index-1], points[index]);
    localization happens during the run, this is the post-hoc consistency view.
    """
    out = []
    pts = branch.points
    for i in range(1, len(pts)):
        fold = pts[i - 1].tangent[-1] * pts[i].tangent[-1] < 0
        dcount = pts[i].n_unstable - pts[i - 1].n_unstable
        if fold:
            out.append((i, "fold", dcount))
            if abs(dcount) > 1:
                out.append((i, "bifurcation", dcount))
        elif dcount != 0:
            out.append((i, "bifurcation", dcount))
    return out


class _Prober:
    """Re-corrects sub-steps between two accepted points for event bisection."""

    def __init__(self, ext: _Extended, base: BranchPoint):
        self.ext = ext
        self.base = base
        self.tu = base.tangent[:-1]
        self.tl = base.tangent[-1]

    def solve(self, ds: float) -> tuple[Field, float]:
        u_pred = self.base.state.stacked() + ds * self.tu
        lam_pred = self.base.lam + ds * self.tl
        return self.ext.correct(u_pred, lam_pred, self.tu, self.tl, max_iter=20,
                                refactor=False)

    def tangent_lam(self, ds: float) -> tuple[float, Field, float]:
        fld, lam = self.solve(ds)
        _, tl = self.ext.tangent(fld, lam, self.tu, self.tl)
        return tl, fld, lam

    def count(self, ds: float) -> tuple[int, Field, float]:
        fld, lam = self.solve(ds)
        c = stability_count(fld, self.ext.params(lam), self.ext.lap,
                            self.ext.cfg.n_eigs, self.ext.cfg.eig_shift)
        return c, fld, lam


def _localize_fold(prober: _Prober, ds_hi: float, tol: float) -> tuple[float, Field]:
    sign0 = np.sign(prober.tl)
    a, b = 0.0, ds_hi
    lam_loc, fld_loc = prober.base.lam, prober.base.state
    while b - a > tol:
        m = 0.5 * (a + b)
        try:
            tl, fld, lam = prober.tangent_lam(m)
        except NewtonError:
            break
        if np.sign(tl) == sign0:
            a = m
        else:
            b = m
        lam_loc, fld_loc = lam, fld
    return lam_loc, fld_loc


def _localize_crossings(prober: _Prober, a: float, b: float, ca: int, cb: int,
                        tol: float, out: list, depth: int = 0) -> None:
    """Recursively split [a, b] until each crossing interval is resolved."""
    if cb == ca:
        return
    if (b - a <= tol and abs(cb - ca) == 1) or depth > 42 or b - a < 1e-12:
        try:
            fld, lam = prober.solve(0.5 * (a + b))
        except NewtonError:
            fld, lam = prober.solve(a) if a > 0 else (prober.base.state, prober.base.lam)
        for _ in range(abs(cb - ca)):
            out.append((lam, fld))
        return
    m = 0.5 * (a + b)
    try:
        cm, _, _ = prober.count(m)
    except NewtonError:
        cm = ca
    _localize_crossings(prober, a, m, ca, cm, tol, out, depth + 1)
    _localize_crossings(prober, m, b, cm, cb, tol, out, depth + 1)


# ---------------------------------------------------------------------------
# the branch runner
# ---------------------------------------------------------------------------

def run_branch(start: BranchPoint, p: ModelParams, lap: NeumannLaplacian,
               settings: ContSettings, lambda_range: tuple[float, float],
               max_points: int = 200, label: str = "branch",
               locate: bool = True, keep_kernels: bool = False,
               stop_after_events: int = 0, progress=None) -> Branch:
    """Predictor-corrector continuation with adaptive steps and event bookkeeping.

    Steps halve on corrector failure (down to dsmin, then the branch terminates
    with a diagnostic) and grow by 1.3 after easy successes.  Localized events
    carry the located state; kernel vectors are attached when keep_kernels is
    set (branch switching recomputes them on demand otherwise).  A positive
    stop_after_events ends the run once that many events are on record.
    """
    ext = _Extended(p, lap, settings)
    branch = Branch(label=label, points=[start])
    ds = settings.ds0 if start.ds == 0.0 else start.ds
    lam_lo, lam_hi = lambda_range
    while len(branch.points) < max_points:
        cur = branch.points[-1]
        tu, tl = cur.tangent[:-1], cur.tangent[-1]
        fld = lam = ntu = ntl = None
        while True:
            u_pred = cur.state.stacked() + ds * tu
            lam_pred = cur.lam + ds * tl
            try:
                fld, lam = ext.correct(u_pred, lam_pred, tu, tl, refactor=False)
                # guards against corrector drift onto a nearby branch
                dist = ext.norm(fld.stacked() - u_pred, lam - lam_pred)
                ntu, ntl = ext.tangent(fld, lam, tu, tl)
                if dist > 0.8 * ds or ext.wdot(ntu, ntl, tu, tl) < 0.1:
                    raise NewtonError("corrector wandered off the branch", dist)
                break
            except NewtonError:
                ext._lu = None  # stale factorization may be at a bad state
                if ds <= settings.dsmin * 2:
                    branch.termination = f"corrector failed at ds={ds:.2e}"
                    return branch
                ds = max(ds / 2.0, settings.dsmin)
        pt = _make_point(ext, fld, lam, ntu, ntl, s=cur.s + ds, ds=ds)
        branch.points.append(pt)
        if progress is not None:
            progress(branch)

        fold = tl * ntl < 0
        dcount = pt.n_unstable - cur.n_unstable
        if locate and (fold or dcount != 0):
            prober = _Prober(ext, cur)
            idx = len(branch.points) - 1
            fold_lam = None
            if fold:
                lam_loc, fld_loc = _localize_fold(prober, ds, settings.bif_loc_tol)
                fold_lam = lam_loc
                branch.events.append(Event(index=idx, kind="fold",
                                           located_lambda=lam_loc, state=fld_loc))
            n_extra = abs(dcount) - (1 if fold else 0)
            if (dcount != 0 and not fold) or n_extra > 0:
                crossings: list = []
                try:
                    _localize_crossings(prober, 0.0, ds, cur.n_unstable,
                                        pt.n_unstable, settings.bif_loc_tol,
                                        crossings)
                except NewtonError:
                    crossings = []
                if fold_lam is not None and crossings:
                    # drop the crossing explained by the fold itself
                    dists = [abs(l - fold_lam) for l, _ in crossings]
                    crossings.pop(int(np.argmin(dists)))
                for lam_loc, fld_loc in crossings:
                    ev = Event(index=idx, kind="bifurcation",
                               located_lambda=lam_loc, state=fld_loc)
                    if keep_kernels:
                        ev.kernel = kernel_vector(fld_loc, ext.params(lam_loc), lap)
                    branch.events.append(ev)

        if stop_after_events and len(branch.events) >= stop_after_events:
            branch.termination = f"stopped after {len(branch.events)} events"
            return branch
        if not (lam_lo <= lam <= lam_hi):
            branch.termination = f"lambda left [{lam_lo}, {lam_hi}]"
            return branch
        ds = min(ds * 1.3, settings.dsmax)
    branch.termination = "max points reached"
    return branch


# ---------------------------------------------------------------------------
# branch switching
# ---------------------------------------------------------------------------

def _symmetrize_kernel(psi_u: np.ndarray, base: Field) -> np.ndarray:
    """Project the kernel onto its dominant mirror-symmetry class when the base
    state is symmetric; removes the rounding-level symmetry pollution that
    would otherwise leak into the switched branch."""
    spec = base.spec
    scale = max(np.abs(base.u).max(), 1.0)
    for axis, err in ((0, mirror_y_error(base)), (1, mirror_x_error(base))):
        if err > 1e-8 * scale:
            continue
        comps = []
        for block in (psi_u[:spec.npoints], psi_u[spec.npoints:]):
            arr = block.reshape(spec.ny, spec.nx)
            mirrored = arr[::-1, :] if axis == 0 else arr[:, ::-1]
            sym = 0.5 * (arr + mirrored)
            anti = 0.5 * (arr - mirrored)
            comps.append((sym, anti))
        sym_norm = np.sqrt(sum(np.sum(s**2) for s, _ in comps))
        anti_norm = np.sqrt(sum(np.sum(a**2) for _, a in comps))
        pick = 0 if sym_norm >= anti_norm else 1
        psi_u = np.concatenate([c[pick].ravel() for c in comps])
    nrm = np.linalg.norm(psi_u)
    return psi_u / nrm if nrm > 0 else psi_u


def branch_switch(event: Event, p: ModelParams, lap: NeumannLaplacian,
                  settings: ContSettings, direction: int = 1,
                  perturbation: float = 0.01) -> tuple[BranchPoint, np.ndarray]:
    """Step off a simple bifurcation along its kernel vector onto the new branch.

    direction +1 points toward increasing u(0, 0).  Returns the first corrected
    point of the new branch together with the kernel vector used (exported for
    tangent plots).  Retries with larger kicks when the corrector slides back
    to the old branch.
    """
    if event.kind != "bifurcation":
        raise BranchSwitchError("can only switch at simple bifurcation events")
    base = event.state
    if base is None:
        raise BranchSwitchError("event carries no located state")
    lam0 = event.located_lambda
    p0 = p.with_lam(lam0)
    psi = event.kernel
    if psi is None:
        psi = kernel_vector(base, p0, lap)
    psi = _symmetrize_kernel(psi, base)
    m = lap.spec.npoints
    rms = np.linalg.norm(psi) / np.sqrt(2 * m)
    psi = psi / rms  # typical nodal magnitude one
    center = psi[lap.spec.center_index()]
    orient = center if abs(center) > 1e-9 else psi[np.argmax(np.abs(psi[:m]))]
    if orient < 0:
        psi = -psi

    ext = _Extended(p, lap, settings)
    tl = 0.0
    pert = perturbation
    last_exc: Exception | None = None
    for _ in range(5):
        tu = direction * psi / ext.norm(psi, 0.0)
        u_pred = base.stacked() + direction * pert * psi
        try:
            fld, lam = ext.correct(u_pred, lam0, tu, tl, max_iter=25)
        except NewtonError as exc:
            last_exc = exc
            pert /= 2.0
            continue
        proj = abs(ext.wdot(fld.stacked() - base.stacked(), 0.0, psi, 0.0))
        if proj < 0.05 * pert * ext.norm(psi, 0.0):
            last_exc = BranchSwitchError("corrector returned to the old branch")
            pert *= 3.0
            continue
        ntu, ntl = ext.tangent(fld, lam, tu, tl)
        pt = _make_point(ext, fld, lam, ntu, ntl, s=0.0, ds=0.0)
        return pt, psi
    raise BranchSwitchError(f"branch switch failed after retries: {last_exc}")


# ---------------------------------------------------------------------------
# post-hoc checks and exports
# ---------------------------------------------------------------------------

def arclength_consistency(branch: Branch) -> float:
    """Max relative mismatch of <z_k+1 - z_k, t_k> against the recorded ds."""
    worst = 0.0
    pts = branch.points
    for i in range(1, len(pts)):
        prev, cur = pts[i - 1], pts[i]
        m = prev.state.spec.npoints
        du = cur.state.stacked() - prev.state.stacked()
        proj = float(du @ prev.tangent[:-1]) / m \
            + (cur.lam - prev.lam) * prev.tangent[-1]
        worst = max(worst, abs(proj - cur.ds) / cur.ds)
    return worst


def residual_recheck(branch: Branch, p: ModelParams, lap: NeumannLaplacian) -> float:
    return max(residual_inf(pt.state, p.with_lam(pt.lam), lap) for pt in branch.points)


_EVENT_FLAG = {"": 0, "fold": 1, "bifurcation": 2}


def save_branch_csv(branch: Branch, path) -> None:
    flags = {}
    for ev in branch.events:
        flags[ev.index] = max(flags.get(ev.index, 0), _EVENT_FLAG[ev.kind])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "lambda", "L2_u", "L8_u", "min_u", "max_u", "u00",
                    "n_unstable", "ds", "event_flag"])
        for i, pt in enumerate(branch.points):
            n = pt.norms
            w.writerow([repr(pt.s), repr(pt.lam), repr(n["l2_u"]), repr(n["l8_u"]),
                        repr(n["min_u"]), repr(n["max_u"]), repr(n["u00"]),
                        pt.n_unstable, repr(pt.ds), flags.get(i, 0)])


def save_events_csv(branch: Branch, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "kind", "located_lambda"])
        for ev in branch.events:
            w.writerow([ev.index, ev.kind, repr(ev.located_lambda)])


def load_branch_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {k: (int(v) if k in ("n_unstable", "event_flag") else float(v))
             for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]
