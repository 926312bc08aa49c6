"""Projective-space geometry: points, chart grids, Fubini-Study data, automorphisms.

Everything works on P^1 or P^2 through a single affine chart.  The chart
carries a uniform cell-centered grid; behaviour at the chart boundary is
handled analytically by the callers (see currents.QuasiPotential).

Conventions used throughout the package:
  * dd^c = (i/pi) del delbar, so that dd^c log|z - a| is the unit Dirac
    mass at a on C and dd^c log||ztilde|| is the Fubini-Study form omega
    with integral 1 over P^k.
  * Homogeneous representatives are unit vectors with the first nonzero
    coordinate rotated to be real positive.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.linalg import expm

__all__ = [
    "ProjectivePoint",
    "ChartGrid",
    "Automorphism",
    "fs_density",
    "fs_distance",
    "fs_box_mass",
    "sample_automorphism",
    "sl_basis",
]


# ---------------------------------------------------------------------------
# points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectivePoint:
    """A point of P^k given by a unit-norm homogeneous representative."""

    homogeneous: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.homogeneous, dtype=complex)
        nrm = np.linalg.norm(v)
        if nrm == 0.0 or not np.isfinite(nrm):
            raise ValueError("projective point needs a nonzero finite vector")
        v = v / nrm
        # canonical phase: first nonzero coordinate real positive
        j = np.argmax(np.abs(v) > 1e-14)
        phase = v[j] / abs(v[j])
        v = v / phase
        v.setflags(write=False)
        object.__setattr__(self, "homogeneous", v)

    @property
    def k(self) -> int:
        return len(self.homogeneous) - 1

    @classmethod
    def from_chart(cls, coords, chart: int = 0) -> "ProjectivePoint":
        """Point with affine coordinates `coords` in the chart {z_chart = 1}."""
        coords = np.atleast_1d(np.asarray(coords, dtype=complex))
        v = np.insert(coords, chart, 1.0)
        return cls(v)

    def to_chart(self, chart: int = 0) -> np.ndarray:
        """Affine coordinates in the chart {z_chart = 1}; inf if on its boundary."""
        v = self.homogeneous
        if abs(v[chart]) < 1e-300:
            return np.full(len(v) - 1, np.inf, dtype=complex)
        return np.delete(v / v[chart], chart)

    def is_close(self, other: "ProjectivePoint", tol: float = 1e-9) -> bool:
        return fs_distance(self, other) < tol


def fs_distance(p: ProjectivePoint, q: ProjectivePoint) -> float:
    """Geodesic Fubini-Study distance arccos|<p, q>|, valued in [0, pi/2]."""
    ip = abs(np.vdot(p.homogeneous, q.homogeneous))
    return float(np.arccos(min(1.0, ip)))


# ---------------------------------------------------------------------------
# Fubini-Study densities and box masses
# ---------------------------------------------------------------------------

def fs_density(points, k: int = 1):
    """Density of omega^k against Lebesgue measure in an affine chart.

    `points` is a complex array for k = 1, or a pair (z, w) of broadcastable
    complex arrays for k = 2.  The closed form is
    k!/pi^k * (1 + |x|^2)^-(k+1); it integrates to 1 over the chart.
    """
    if k == 1:
        z = np.asarray(points)
        s = 1.0 + np.abs(z) ** 2
        return (1.0 / np.pi) * s ** -2
    if k == 2:
        z, w = points
        s = 1.0 + np.abs(z) ** 2 + np.abs(w) ** 2
        return (2.0 / np.pi ** 2) * s ** -3
    raise ValueError("k must be 1 or 2")


def _fs_strip_mass_1d(a2: float, lo: float, hi: float) -> float:
    # integral of (1/pi)(a2 + y^2)^-2 dy over [lo, hi]
    a = np.sqrt(a2)
    def F(y):
        return y / (2 * a2 * (a2 + y * y)) + np.arctan(y / a) / (2 * a2 * a)
    return (F(hi) - F(lo)) / np.pi


def _inv_cube_integral(c2: float, lo: float, hi: float) -> float:
    # integral of (c^2 + y^2)^-3 dy over [lo, hi]
    c = np.sqrt(c2)
    def F(y):
        u = c2 + y * y
        return y / (4 * c2 * u * u) + 3 * y / (8 * c2 * c2 * u) \
            + 3 * np.arctan(y / c) / (8 * c2 * c2 * c)
    return F(hi) - F(lo)


def _panel_gl_nodes(lo: float, hi: float, order: int = 16):
    """Composite Gauss-Legendre nodes/weights on geometric panels of unit scale.

    Panel edges grow geometrically away from 0, so integrands peaked at the
    origin with O(1) width are resolved on arbitrarily large intervals.
    """
    edges = [0.0]
    w = 1.0
    while edges[-1] < max(abs(lo), abs(hi)):
        edges.append(edges[-1] + w)
        w *= 2.0
    edges = np.array(edges)
    cuts = np.unique(np.clip(np.concatenate([-edges[::-1], edges]), lo, hi))
    gn, gw = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (cuts[1:] + cuts[:-1])
    half = 0.5 * np.diff(cuts)
    keep = half > 0
    nodes = (mid[keep, None] + half[keep, None] * gn[None, :]).ravel()
    weights = (half[keep, None] * gw[None, :]).ravel()
    return nodes, weights


@functools.lru_cache(maxsize=256)
def _fs_box_mass_cached(k: int, bounds: tuple) -> float:
    if k == 1:
        (x0, x1, y0, y1) = bounds
        xs, ws = _panel_gl_nodes(x0, x1)
        vals = np.array([_fs_strip_mass_1d(1.0 + x * x, y0, y1) for x in xs])
        return float(np.sum(ws * vals))
    (x0, x1, y0, y1, u0, u1, v0, v1) = bounds
    us, uw = _panel_gl_nodes(u0, u1)

    def g_of_s(s):
        # (2/pi^2) * integral over the second factor's rectangle of
        # (s + |zeta|^2)^-3; closed form in v, panel GL in u
        s = np.atleast_1d(s)[:, None]
        vals = _inv_cube_integral(s + us[None, :] ** 2, v0, v1)
        return (2.0 / np.pi ** 2) * np.sum(uw[None, :] * vals, axis=1)

    xs, xw = _panel_gl_nodes(x0, x1)
    ys, yw = _panel_gl_nodes(y0, y1)
    s_grid = 1.0 + xs[:, None] ** 2 + ys[None, :] ** 2
    # tabulate G on a dense log grid of s; it is smooth and monotone
    table_s = np.exp(np.linspace(0.0, np.log(s_grid.max() + 1.0), 800))
    table_g = g_of_s(table_s)
    g_vals = np.interp(s_grid.ravel(), table_s, table_g).reshape(s_grid.shape)
    return float(np.einsum("i,j,ij->", xw, yw, g_vals))


def fs_box_mass(k: int, bounds) -> float:
    """Mass of omega^k inside a coordinate box of the chart.

    bounds: (x0,x1,y0,y1) for k=1 or (x0,x1,y0,y1,u0,u1,v0,v1) for k=2,
    real/imaginary intervals per complex axis.  Semi-analytic (1D closed
    forms plus adaptive quadrature), accurate to ~1e-10.
    """
    key = tuple(round(float(b), 12) for b in bounds)
    return _fs_box_mass_cached(k, key)


def fs_grid_mass(grid: "ChartGrid") -> float:
    """Integral of fs_density over a P^1 grid by a cell-subordinate rule.

    Plain midpoint sums need spacing < 0.5 to resolve the unit-scale peak of
    the density; this composite rule (4-point Gauss-Legendre per cell in x,
    closed form in y) is accurate on any admissible grid.
    """
    if grid.k != 1:
        raise ValueError("fs_grid_mass is for P^1 grids")
    (x0, x1, y0, y1) = grid.bounds()
    edges = np.linspace(x0, x1, grid.resolution + 1)
    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(4)
    mids = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * grid.spacing
    xs = (mids[:, None] + half * gl_nodes[None, :]).ravel()
    ws = np.tile(half * gl_weights, grid.resolution)
    strip = np.array([_fs_strip_mass_1d(1.0 + x * x, y0, y1) for x in xs])
    return float(np.sum(ws * strip))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartGrid:
    """Uniform cell-centered grid on a chart box of P^k (k = 1 or 2).

    resolution is the number of cells per real axis; the box is the product
    of squares of half-width `radius` centered at `center` (complex, one per
    complex axis).  Node j sits at the center of cell j, so plain sums times
    cell_volume implement midpoint quadrature.
    """

    k: int
    center: tuple
    radius: float
    resolution: int
    chart: int = 0

    def __post_init__(self):
        if self.k not in (1, 2):
            raise ValueError("k must be 1 or 2")
        if self.resolution < 8:
            raise ValueError("resolution must be >= 8")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        center = tuple(complex(c) for c in np.atleast_1d(self.center))
        if len(center) != self.k:
            raise ValueError("center must have one entry per complex axis")
        object.__setattr__(self, "center", center)

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / self.resolution

    @property
    def cell_volume(self) -> float:
        return self.spacing ** (2 * self.k)

    @property
    def shape(self) -> tuple:
        return (self.resolution,) * (2 * self.k)

    def axis(self, i: int = 0) -> np.ndarray:
        """Cell-center offsets along one real axis, shared by re and im."""
        n = self.resolution
        return self.radius * (2.0 * (np.arange(n) + 0.5) / n - 1.0)

    def points(self):
        """Complex node coordinates, broadcastable to self.shape.

        Returns Z for k=1 (full (n,n) array) and (Z, W) broadcastable views
        for k=2 to keep memory at O(n) until consumed.
        """
        t = self.axis()
        if self.k == 1:
            z = self.center[0] + t[:, None] + 1j * t[None, :]
            return z
        z = self.center[0] + t[:, None, None, None] + 1j * t[None, :, None, None]
        w = self.center[1] + t[None, None, :, None] + 1j * t[None, None, None, :]
        return z, w

    def bounds(self) -> tuple:
        out = []
        for c in self.center:
            out += [c.real - self.radius, c.real + self.radius,
                    c.imag - self.radius, c.imag + self.radius]
        return tuple(out)

    def fs_weights(self):
        """fs_density sampled at the nodes (same shape/broadcast as points)."""
        return fs_density(self.points(), self.k)

    @property
    def omega_mass_inside(self) -> float:
        return fs_box_mass(self.k, self.bounds())

    @property
    def omega_mass_outside(self) -> float:
        return 1.0 - self.omega_mass_inside

    def contains(self, pts) -> np.ndarray:
        """Boolean mask of chart points lying strictly inside the box."""
        if self.k == 1:
            z = np.asarray(pts)
            c = self.center[0]
            return (np.abs(z.real - c.real) < self.radius) \
                & (np.abs(z.imag - c.imag) < self.radius)
        z, w = pts
        cz, cw = self.center
        return (np.abs(np.asarray(z).real - cz.real) < self.radius) \
            & (np.abs(np.asarray(z).imag - cz.imag) < self.radius) \
            & (np.abs(np.asarray(w).real - cw.real) < self.radius) \
            & (np.abs(np.asarray(w).imag - cw.imag) < self.radius)


# ---------------------------------------------------------------------------
# automorphisms of P^k
# ---------------------------------------------------------------------------

def sl_basis(k: int) -> list:
    """Complex basis of the traceless (k+1)x(k+1) matrices, dim k^2 + 2k."""
    n = k + 1
    basis = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            basis.append(e)
    for i in range(n - 1):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        e[i + 1, i + 1] = -1.0
        basis.append(e)
    return basis


@dataclass(frozen=True)
class Automorphism:
    """tau_y = exp(sum_j y_j E_j) in PGL(k+1), stored with unit determinant."""

    matrix: np.ndarray
    y: np.ndarray = field(default=None)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        det = np.linalg.det(m)
        if abs(det) < 1e-14:
            raise ValueError("automorphism matrix is singular")
        n = m.shape[0]
        m = m / det ** (1.0 / n)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        y = np.zeros(n * n - 1, dtype=complex) if self.y is None else \
            np.asarray(self.y, dtype=complex)
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def k(self) -> int:
        return self.matrix.shape[0] - 1

    @classmethod
    def identity(cls, k: int) -> "Automorphism":
        n = k + 1
        return cls(np.eye(n, dtype=complex), np.zeros(n * n - 1, dtype=complex))

    @classmethod
    def from_parameter(cls, y) -> "Automorphism":
        y = np.asarray(y, dtype=complex)
        dim = len(y)
        k = int(round(np.sqrt(dim + 1))) - 1
        if (k + 1) ** 2 - 1 != dim:
            raise ValueError("parameter length must be (k+1)^2 - 1")
        m = sum(c * e for c, e in zip(y, sl_basis(k)))
        return cls(expm(m), y)

    def is_identity(self, tol: float = 1e-12) -> bool:
        m = self.matrix / self.matrix[0, 0] if abs(self.matrix[0, 0]) > 0.5 \
            else self.matrix
        return bool(np.allclose(m, np.eye(self.k + 1), atol=tol))

    def inverse(self) -> "Automorphism":
        return Automorphism(np.linalg.inv(self.matrix), -self.y)

    def __matmul__(self, other: "Automorphism") -> "Automorphism":
        return Automorphism(self.matrix @ other.matrix,
                            np.full_like(self.y, np.nan))

    def apply_point(self, p: ProjectivePoint) -> ProjectivePoint:
        return ProjectivePoint(self.matrix @ p.homogeneous)

    def apply_chart(self, pts, chart: int = 0):
        """Mobius action on chart coordinates; vectorized, inf-safe.

        For k=1 takes/returns a complex array; for k=2 a pair (z, w).
        """
        m = self.matrix
        if self.k == 1:
            z = np.asarray(pts, dtype=complex)
            h0 = m[0, 0] + m[0, 1] * z
            h1 = m[1, 0] + m[1, 1] * z
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(np.abs(h0) > 0, h1 / h0, np.inf)
            return out
        z, w = pts
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        h0 = m[0, 0] + m[0, 1] * z + m[0, 2] * w
        h1 = m[1, 0] + m[1, 1] * z + m[1, 2] * w
        h2 = m[2, 0] + m[2, 1] * z + m[2, 2] * w
        with np.errstate(divide="ignore", invalid="ignore"):
            return (np.where(np.abs(h0) > 0, h1 / h0, np.inf),
                    np.where(np.abs(h0) > 0, h2 / h0, np.inf))

    def log_norm_ratio(self, pts, chart: int = 0, inverse: bool = False):
        """log(||A zt|| / ||zt||) at chart points, A = matrix or its inverse.

        This is the quasi-potential of tau^* omega - omega (or of the
        push-forward correction when applied with the inverse matrix).
        """
        m = np.linalg.inv(self.matrix) if inverse else self.matrix
        if self.k == 1:
            z = np.asarray(pts, dtype=complex)
            h0 = m[0, 0] + m[0, 1] * z
            h1 = m[1, 0] + m[1, 1] * z
            return 0.5 * (np.log(np.abs(h0) ** 2 + np.abs(h1) ** 2)
                          - np.log1p(np.abs(z) ** 2))
        z, w = pts
        h0 = m[0, 0] + m[0, 1] * z + m[0, 2] * w
        h1 = m[1, 0] + m[1, 1] * z + m[1, 2] * w
        h2 = m[2, 0] + m[2, 1] * z + m[2, 2] * w
        return 0.5 * (np.log(np.abs(h0) ** 2 + np.abs(h1) ** 2 + np.abs(h2) ** 2)
                      - np.log1p(np.abs(z) ** 2 + np.abs(w) ** 2))


@functools.lru_cache(maxsize=8)
def _radial_cdf_table(ndim: int, npts: int = 4096):
    r = np.linspace(0.0, 1.0 - 1e-9, npts)
    with np.errstate(divide="ignore", over="ignore"):
        dens = r ** (ndim - 1) * np.exp(-1.0 / (1.0 - r * r))
    dens[~np.isfinite(dens)] = 0.0
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1])
                                           * np.diff(r))])
    cdf /= cdf[-1]
    return r, cdf


def sample_automorphism(rng: np.random.Generator, theta: complex,
                        k: int = 1) -> Automorphism:
    """Draw tau_{theta y} with y ~ rho, a radial smooth bump on {|y| < 1}.

    rho(y) is proportional to exp(-1/(1-|y|^2)) on the complex parameter
    ball, so it is radial, decreasing in |y| and invariant under y -> -y
    (hence under tau -> tau^(-1)).  theta = 0 returns the identity.
    """
    if abs(theta) > 1.0 + 1e-12:
        raise ValueError("|theta| must be <= 1")
    dim = (k + 1) ** 2 - 1
    if theta == 0:
        return Automorphism.identity(k)
    # direction uniform on the unit sphere of C^dim, radius by inverse CDF
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v = v / np.linalg.norm(v)
    grid, cdf = _radial_cdf_table(2 * dim)
    r = float(np.interp(rng.uniform(), cdf, grid))
    return Automorphism.from_parameter(theta * r * v)
