"""Uniform rectangular Neumann grids, fields, norms, ansatz guesses, and field I/O.

Domains are (-lx, lx) x (-ly, ly) with lx = 2 l1 pi / k_c and
ly = 2 l2 pi / (sqrt(3) k_c), sized to hold l1 stripe pairs and l2 hexagon rows.
Discretization is a node-centered uniform grid; the 5-point Neumann Laplacian
uses mirrored ghost nodes (doubled off-diagonal in boundary rows), which makes
plain cosines exact discrete eigenvectors and the matrix self-adjoint in the
trapezoid-weighted inner product.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import ModelParams, critical_values

__all__ = [
    "DomainSpec",
    "Field",
    "NeumannLaplacian",
    "build_domain",
    "build_laplacian",
    "lp_norm",
    "make_initial_guess",
    "relative_l1_error",
    "mirror_y_error",
    "mirror_x_error",
    "save_snapshot",
    "load_snapshot",
    "write_ppm",
]

K_C = critical_values(60.0)[1]  # k_c is independent of d


@dataclass(frozen=True)
class DomainSpec:
    l1: float
    l2: float
    nx: int
    ny: int
    quasi1d: bool = False

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"need nx, ny >= 2, got {self.nx}, {self.ny}")
        if self.l1 <= 0 or self.l2 <= 0:
            raise ValueError("domain multipliers must be positive")
        if self.quasi1d and self.ny != 2:
            raise ValueError("quasi-1D strips use exactly two grid rows")

    @property
    def lx(self) -> float:
        return 2.0 * self.l1 * np.pi / K_C

    @property
    def ly(self) -> float:
        if self.quasi1d:
            # thin strip: one square cell across, solutions constant in y
            return 0.5 * self.hx
        return 2.0 * self.l2 * np.pi / (np.sqrt(3.0) * K_C)

    @property
    def hx(self) -> float:
        return 2.0 * self.lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return 2.0 * self.ly / (self.ny - 1)

    @property
    def npoints(self) -> int:
        return self.nx * self.ny

    def xs(self) -> np.ndarray:
        return np.linspace(-self.lx, self.lx, self.nx)

    def ys(self) -> np.ndarray:
        return np.linspace(-self.ly, self.ly, self.ny)

    def meshgrid(self):
        """(X, Y) arrays of shape (ny, nx); flat index is iy * nx + ix."""
        return np.meshgrid(self.xs(), self.ys())

    def center_index(self) -> int:
        """Flat index of the node nearest the domain center (0, 0)."""
        ix = int(np.argmin(np.abs(self.xs())))
        iy = int(np.argmin(np.abs(self.ys())))
        return iy * self.nx + ix

    def trapezoid_weights(self) -> np.ndarray:
        """Flat quadrature weights; they sum to the domain area 4 lx ly."""
        wx = np.full(self.nx, self.hx)
        wx[0] = wx[-1] = self.hx / 2.0
        wy = np.full(self.ny, self.hy)
        wy[0] = wy[-1] = self.hy / 2.0
        return np.outer(wy, wx).ravel()


def build_domain(l1, l2, nx, ny, quasi1d: bool = False) -> DomainSpec:
    if quasi1d:
        ny = 2
    return DomainSpec(l1=float(l1), l2=float(l2), nx=int(nx), ny=int(ny), quasi1d=quasi1d)


@dataclass
class Field:
    """Two-component grid function; u and v are flat arrays of length nx*ny."""

    spec: DomainSpec
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).ravel()
        self.v = np.asarray(self.v, dtype=float).ravel()
        n = self.spec.npoints
        if self.u.size != n or self.v.size != n:
            raise ValueError(
                f"component length {self.u.size}/{self.v.size} does not match grid {n}"
            )

    @classmethod
    def constant(cls, spec: DomainSpec, u: float, v: float) -> "Field":
        n = spec.npoints
        return cls(spec, np.full(n, float(u)), np.full(n, float(v)))

    @classmethod
    def homogeneous(cls, spec: DomainSpec, p: ModelParams) -> "Field":
        return cls.constant(spec, p.lam, 1.0 / p.lam)

    def u2d(self) -> np.ndarray:
        return self.u.reshape(self.spec.ny, self.spec.nx)

    def v2d(self) -> np.ndarray:
        return self.v.reshape(self.spec.ny, self.spec.nx)

    def copy(self) -> "Field":
        return Field(self.spec, self.u.copy(), self.v.copy())

    def stacked(self) -> np.ndarray:
        """State vector (u then v), the layout used by the PDE solvers."""
        return np.concatenate([self.u, self.v])

    @classmethod
    def from_stacked(cls, spec: DomainSpec, z: np.ndarray) -> "Field":
        n = spec.npoints
        return cls(spec, z[:n].copy(), z[n:].copy())

    def u_center(self) -> float:
        return float(self.u[self.spec.center_index()])


def _neumann_1d(n: int, h: float) -> sp.csr_matrix:
    # interior rows (1, -2, 1)/h^2; boundary rows (−2, 2)/h^2 via mirrored ghosts
    main = np.full(n, -2.0)
    lower = np.ones(n - 1)
    upper = np.ones(n - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / h**2


@dataclass
class NeumannLaplacian:
    spec: DomainSpec
    matrix: sp.csr_matrix
    weights: np.ndarray
    _factor_cache: dict = dataclass_field(default_factory=dict, repr=False)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f


def build_laplacian(spec: DomainSpec) -> NeumannLaplacian:
    """Assemble the 5-point Neumann Laplacian on the grid."""
    ax = _neumann_1d(spec.nx, spec.hx)
    ay = _neumann_1d(spec.ny, spec.hy)
    ix = sp.identity(spec.nx, format="csr")
    iy = sp.identity(spec.ny, format="csr")
    lap = sp.kron(iy, ax, format="csr") + sp.kron(ay, ix, format="csr")
    return NeumannLaplacian(spec=spec, matrix=lap, weights=spec.trapezoid_weights())


def lp_norm(f: Field, component: str = "u", p: float = 2.0) -> float:
    """Domain-averaged L^p norm, (1/|O| int |f|^p)^(1/p), by trapezoid quadrature."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    vals = f.u if component == "u" else f.v
    w = f.spec.trapezoid_weights()
    return float((np.sum(w * np.abs(vals) ** p) / np.sum(w)) ** (1.0 / p))


def make_initial_guess(spec: DomainSpec, lam: float, A: float = 0.3,
                       B: float = 0.15, L: float = 12.0) -> Field:
    """Sech-envelope hexagons-over-stripes seed for time integration.

        u = lam (1 + m(x, y)),   v = (1/lam)(1 - m(x, y)/2),
        m = A cos(k_c x) + sech(x/L) [2B cos(k_c x/2) cos(sqrt(3) k_c y/2)
                                      - 0.1 cos(k_c x)]
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    X, Y = spec.meshgrid()
    env = 1.0 / np.cosh(X / L)
    m = A * np.cos(K_C * X) + env * (
        2.0 * B * np.cos(K_C * X / 2.0) * np.cos(K_C * np.sqrt(3.0) * Y / 2.0)
        - 0.1 * np.cos(K_C * X)
    )
    u = lam * (1.0 + m)
    v = (1.0 - 0.5 * m) / lam
    return Field(spec, u.ravel(), v.ravel())


def relative_l1_error(numeric: Field, ansatz: Field) -> float:
    """Sum of nodewise 1-norm differences over both components, relative to numeric."""
    if numeric.spec != ansatz.spec:
        raise ValueError("fields live on different grids")
    num = np.abs(numeric.u - ansatz.u).sum() + np.abs(numeric.v - ansatz.v).sum()
    den = np.abs(numeric.u).sum() + np.abs(numeric.v).sum()
    return float(num / den)


def mirror_y_error(f: Field) -> float:
    """Max deviation of both components from y -> -y mirror symmetry."""
    du = np.abs(f.u2d() - f.u2d()[::-1, :]).max()
    dv = np.abs(f.v2d() - f.v2d()[::-1, :]).max()
    return float(max(du, dv))


def mirror_x_error(f: Field) -> float:
    du = np.abs(f.u2d() - f.u2d()[:, ::-1]).max()
    dv = np.abs(f.v2d() - f.v2d()[:, ::-1]).max()
    return float(max(du, dv))


# ---------------------------------------------------------------------------
# snapshot files: plain-text header + one value per line, JSON sidecar
# ---------------------------------------------------------------------------

def save_snapshot(f: Field, path, lam: float, sigma: float = 0.0,
                  label: str = "", extra: dict | None = None) -> None:
    path = Path(path)
    spec = f.spec
    lines = [
        f"{spec.nx} {spec.ny}",
        f"{spec.lx!r} {spec.ly!r}",
        f"{lam!r} {sigma!r}",
        label if label else "-",
    ]
    lines.extend(repr(x) for x in f.u)
    lines.extend(repr(x) for x in f.v)
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "nx": spec.nx,
        "ny": spec.ny,
        "l1": spec.l1,
        "l2": spec.l2,
        "lx": spec.lx,
        "ly": spec.ly,
        "quasi1d": spec.quasi1d,
        "lambda": lam,
        "sigma": sigma,
        "label": label,
    }
    if extra:
        meta.update(extra)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=1))


def load_snapshot(path) -> tuple[Field, dict]:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    lines = path.read_text().splitlines()
    nx, ny = (int(t) for t in lines[0].split())
    n = nx * ny
    vals = np.array([float(t) for t in lines[4:4 + 2 * n]])
    spec = DomainSpec(l1=meta["l1"], l2=meta["l2"], nx=nx, ny=ny,
                      quasi1d=meta.get("quasi1d", False))
    return Field(spec, vals[:n], vals[n:]), meta


# fixed blue -> white -> red ramp, linear over [min u, max u]
_CMAP_ANCHORS = np.array([[40, 40, 160], [240, 240, 240], [170, 20, 20]], dtype=float)


def _colormap(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    rgb = np.empty(t.shape + (3,))
    lo = t < 0.5
    s = np.where(lo, 2 * t, 2 * t - 1)[..., None]
    a = np.where(lo[..., None], _CMAP_ANCHORS[0], _CMAP_ANCHORS[1])
    b = np.where(lo[..., None], _CMAP_ANCHORS[1], _CMAP_ANCHORS[2])
    rgb = a + s * (b - a)
    return rgb.astype(np.uint8)


def write_ppm(f: Field, path) -> None:
    """u-component heatmap as a binary PPM, linearly mapped over [min u, max u]."""
    u = f.u2d()[::-1, :]  # image rows top-to-bottom = +y to -y
    lo, hi = float(u.min()), float(u.max())
    span = hi - lo if hi > lo else 1.0
    rgb = _colormap((u - lo) / span)
    header = f"P6\n{f.spec.nx} {f.spec.ny}\n255\n".encode()
    Path(path).write_bytes(header + rgb.tobytes())
