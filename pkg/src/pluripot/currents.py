"""Currents and measures on P^1 / P^2 through chart-grid quasi-potentials.

A QuasiPotential is a function u with dd^c u >= -omega, stored as

    u = g + sum_i (c_i / m_i) * log(|P_i(zt)| / ||zt||^(m_i)),

where g is sampled on a ChartGrid (the regular part, smooth across the
chart boundary) and the singular summands are kept as exact homogeneous
polynomials.  The current S = omega + dd^c u then splits into

    S = (1 - sum c_i) * omega + sum_i (c_i/m_i) [P_i = 0] + dd^c g,

so mass bookkeeping for the analytic parts is exact, while dd^c g is
handled by finite differences plus a fitted radial tail beyond the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .geom import (Automorphism, ChartGrid, ProjectivePoint, fs_box_mass,
                   fs_density, sample_automorphism)
from .polymap import ExactComplex, HomogeneousPolynomial

__all__ = [
    "SingularPart",
    "QuasiPotential",
    "Current11",
    "GridMeasure",
    "DivisorCurrent",
    "NEG_INFINITY_FLOOR",
    "mass",
    "mass_defect",
    "trace_measure",
    "lelong_number",
    "regularize",
    "pushforward_potential",
    "omega_current",
    "current_from_grid_values",
    "dirac_measure",
    "green_potential",
    "log_convolution",
    "smoothed_dirac_current",
    "random_smooth_current",
    "UnderResolvedError",
]

NEG_INFINITY_FLOOR = -1.0e6
_LOG_CLIP = -3.0e6  # below the floor: exact zero hits register as -infinity


class UnderResolvedError(RuntimeError):
    """A grid quantity failed its consistency check; refine or enlarge."""


# ---------------------------------------------------------------------------
# singular ledger entries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingularPart:
    """Weight c > 0 on the normalized divisor potential of P (degree m)."""

    weight: float
    poly: HomogeneousPolynomial

    @property
    def m(self) -> int:
        return self.poly.degree

    def chart_values(self, pts, k: int, smoothing: float = 0.0):
        """(c/m) log(|P(zt)|/||zt||^m) at chart points.

        With smoothing = eps > 0 the scale-invariant ratio q is replaced by
        max(q, eps): grid sampling passes eps ~ cell size, which moves the
        divisor mass onto the eps-ring around the zero set instead of
        hitting raw log singularities (finite-difference stencils across an
        unresolved -inf are garbage), and keeps the potential quasi-psh.
        Exact point evaluation uses eps = 0, keeping -infinity detectable.
        """
        if k == 1:
            z = np.asarray(pts, dtype=complex)
            coords = (np.ones_like(z), z)
            lognorm = 0.5 * np.log1p(np.abs(z) ** 2)
        else:
            z, w = pts
            z = np.asarray(z, dtype=complex)
            w = np.asarray(w, dtype=complex)
            one = np.ones(np.broadcast_shapes(z.shape, w.shape), dtype=complex)
            coords = (one, z + 0 * one, w + 0 * one)
            lognorm = 0.5 * np.log1p(np.abs(z) ** 2 + np.abs(w) ** 2)
        vals = self.poly.evaluate(coords)
        with np.errstate(divide="ignore"):
            logq = np.log(np.abs(vals)) - self.m * lognorm
        logq = np.maximum(logq, _LOG_CLIP)
        if smoothing > 0:
            logq = np.maximum(logq, np.log(smoothing))
        return (self.weight / self.m) * logq

    def transported(self, tau: Automorphism) -> "SingularPart":
        """Ledger entry of the push-forward under tau: P o A^(-1), exactly."""
        ainv = np.linalg.inv(tau.matrix)
        n = ainv.shape[0]
        rows = []
        for i in range(n):
            comp = HomogeneousPolynomial.zero(n)
            for j in range(n):
                if ainv[i, j] != 0:
                    term = HomogeneousPolynomial.variable(j, n) \
                        * ExactComplex.of(complex(ainv[i, j]))
                    comp = term if comp.is_zero() else comp + term
            rows.append(comp)
        return SingularPart(self.weight, self.poly.substitute(rows))

    def chart_roots(self, max_roots: int = 4096):
        """k=1 only: (root or None-for-infinity, weight) atoms of (c/m)[P=0]."""
        if self.poly.nvars != 2:
            raise ValueError("chart_roots is for P^1 ledger entries")
        m = self.m
        cs = np.zeros(m + 1, dtype=complex)
        for e, c in self.poly.coeffs.items():
            cs[m - e[1]] = c.to_complex()
        lead = np.nonzero(np.abs(cs) > 0)[0]
        n_inf = lead[0] if len(lead) else 0
        roots = np.roots(cs[lead[0]:]) if len(lead) and len(cs[lead[0]:]) > 1 else []
        out = [(complex(r), self.weight / m) for r in np.atleast_1d(roots)]
        if n_inf > 0:
            out.append((None, self.weight * n_inf / m))
        return out


# ---------------------------------------------------------------------------
# finite-difference machinery
# ---------------------------------------------------------------------------

def _lap2d(g: np.ndarray, h: float) -> np.ndarray:
    """5-point Laplacian on interior nodes, zero-padded back to full shape."""
    out = np.zeros_like(g)
    out[1:-1, 1:-1] = (g[2:, 1:-1] + g[:-2, 1:-1] + g[1:-1, 2:]
                       + g[1:-1, :-2] - 4.0 * g[1:-1, 1:-1]) / (h * h)
    return out


def _second_diff(g: np.ndarray, axis: int, h: float) -> np.ndarray:
    out = np.zeros_like(g)
    sl = [slice(None)] * g.ndim
    lo, mid, hi = sl.copy(), sl.copy(), sl.copy()
    lo[axis] = slice(None, -2)
    mid[axis] = slice(1, -1)
    hi[axis] = slice(2, None)
    out[tuple(mid)] = (g[tuple(hi)] + g[tuple(lo)]
                       - 2.0 * g[tuple(mid)]) / (h * h)
    return out


def _mixed_diff(g: np.ndarray, ax1: int, ax2: int, h: float) -> np.ndarray:
    sl = [slice(None)] * g.ndim
    def shifted(d1, d2):
        s = sl.copy()
        s[ax1] = slice(1 + d1, g.shape[ax1] - 1 + d1)
        s[ax2] = slice(1 + d2, g.shape[ax2] - 1 + d2)
        return g[tuple(s)]
    out = np.zeros_like(g)
    mid = sl.copy()
    mid[ax1] = slice(1, -1)
    mid[ax2] = slice(1, -1)
    out[tuple(mid)] = (shifted(1, 1) + shifted(-1, -1)
                       - shifted(1, -1) - shifted(-1, 1)) / (4.0 * h * h)
    return out


def complex_hessian_4d(g: np.ndarray, h: float):
    """Wirtinger Hessian entries (u_zzb, u_wwb, u_zwb) of a 4D sample array.

    Axes are (x1, y1, x2, y2) for (z, w) = (x1 + i y1, x2 + i y2).
    Boundary entries are zero; callers exclude a 2-cell ring anyway.
    """
    u_zzb = 0.25 * (_second_diff(g, 0, h) + _second_diff(g, 1, h))
    u_wwb = 0.25 * (_second_diff(g, 2, h) + _second_diff(g, 3, h))
    re = _mixed_diff(g, 0, 2, h) + _mixed_diff(g, 1, 3, h)
    im = _mixed_diff(g, 0, 3, h) - _mixed_diff(g, 1, 2, h)
    u_zwb = 0.25 * (re + 1j * im)
    return u_zzb, u_wwb, u_zwb


def mixed_m2(h1, h2):
    """M2(u,v) = u_zz v_ww + u_ww v_zz - 2 Re(u_zw conj(v_zw)).

    (4/pi^2) * M2 is the Lebesgue density of dd^c u wedge dd^c v on C^2.
    """
    a1, b1, c1 = h1
    a2, b2, c2 = h2
    return (a1 * b2 + b1 * a2 - 2.0 * np.real(c1 * np.conj(c2))).real


def fs_hessian(pts):
    """Complex Hessian of u0 = (1/2) log(1 + |z|^2 + |w|^2), closed form."""
    z, w = pts
    s = 1.0 + np.abs(z) ** 2 + np.abs(w) ** 2
    a = 0.5 * (1.0 / s - np.abs(z) ** 2 / s ** 2)
    b = 0.5 * (1.0 / s - np.abs(w) ** 2 / s ** 2)
    c = -0.5 * np.conj(z) * w / s ** 2
    return a, b, c


# ---------------------------------------------------------------------------
# quasi-potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuasiPotential:
    """Regular grid part + exact singular ledger + recorded mean."""

    grid: ChartGrid
    values: np.ndarray
    singular: tuple = ()
    mean: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid {self.grid.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "singular", tuple(self.singular))

    # -- structural helpers ---------------------------------------------------

    @property
    def k(self) -> int:
        return self.grid.k

    @property
    def singular_weight(self) -> float:
        return float(sum(s.weight for s in self.singular))

    @property
    def background_coeff(self) -> float:
        """Coefficient of omega in the current's smooth-background split."""
        return 1.0 - self.singular_weight

    def with_mean(self, target_mean: float) -> "QuasiPotential":
        """Shift the grid part so the recorded mean becomes target_mean."""
        delta = target_mean - self.mean
        return replace(self, values=self.values + delta, mean=target_mean)

    # -- boundary/tail model ----------------------------------------------------

    def _ring_stats(self):
        """Radial fit g ~ ginf + gamma/r^2 (+ Re alpha/z on P^1) at the edge."""
        g = self.values
        grid = self.grid
        if self.k == 1:
            z = grid.points()
            c = grid.center[0]
            r = np.abs(z - c)
            r1 = 0.95 * grid.radius
            r2 = 0.78 * grid.radius
            band = 0.03 * grid.radius
            m = []
            alpha = 0.0
            for rr in (r1, r2):
                sel = np.abs(r - rr) < band
                m.append(float(np.mean(g[sel])))
            sel = np.abs(r - r1) < band
            ph = (z - c)[sel] / r[sel]
            alpha = 2.0 * np.mean(g[sel] * ph) * r1
            ginf = (m[0] * r1 ** 2 - m[1] * r2 ** 2) / (r1 ** 2 - r2 ** 2)
            gamma = (m[0] - ginf) * r1 ** 2
            return ginf, gamma, complex(alpha), r1
        z, w = grid.points()
        cz, cw = grid.center
        r = np.sqrt(np.abs(z - cz) ** 2 + np.abs(w - cw) ** 2
                    + np.zeros(grid.shape))
        r1 = 0.95 * grid.radius
        r2 = 0.78 * grid.radius
        band = 0.04 * grid.radius
        m = []
        for rr in (r1, r2):
            sel = np.abs(r - rr) < band
            m.append(float(np.mean(g[sel])))
        ginf = (m[0] * r1 ** 2 - m[1] * r2 ** 2) / (r1 ** 2 - r2 ** 2)
        gamma = (m[0] - ginf) * r1 ** 2
        return ginf, gamma, 0.0j, r1

    # -- evaluation --------------------------------------------------------------

    def eval_regular(self, pts):
        """Grid part at arbitrary chart points: interpolation + radial tail."""
        grid = self.grid
        n = grid.resolution
        h = grid.spacing
        t0 = grid.axis()[0]
        ginf, gamma, alpha, _ = self._ring_stats()
        if self.k == 1:
            z = np.asarray(pts, dtype=complex)
            zc = z - grid.center[0]
            fx = (zc.real - t0) / h
            fy = (zc.imag - t0) / h
            inside = (fx >= 0) & (fx <= n - 1) & (fy >= 0) & (fy <= n - 1) \
                & np.isfinite(fx) & np.isfinite(fy)
            fx = np.clip(np.nan_to_num(fx, nan=0.0, posinf=0.0, neginf=0.0),
                         0, n - 1 - 1e-9)
            fy = np.clip(np.nan_to_num(fy, nan=0.0, posinf=0.0, neginf=0.0),
                         0, n - 1 - 1e-9)
            i = fx.astype(int)
            j = fy.astype(int)
            ax, ay = fx - i, fy - j
            g = self.values
            interp = ((1 - ax) * (1 - ay) * g[i, j] + ax * (1 - ay) * g[i + 1, j]
                      + (1 - ax) * ay * g[i, j + 1] + ax * ay * g[i + 1, j + 1])
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                rr2 = np.abs(zc) ** 2
                tail = ginf + np.where(rr2 > 0, gamma / rr2, 0.0) \
                    + np.where(rr2 > 0, (alpha / np.where(zc == 0, 1, zc)).real, 0.0)
            tail = np.where(np.isfinite(z), tail, ginf)
            return np.where(inside, interp, tail)
        z, w = pts
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        shape = np.broadcast_shapes(z.shape, w.shape)
        z = np.broadcast_to(z, shape)
        w = np.broadcast_to(w, shape)
        cz, cw = grid.center
        coords = np.stack([
            (z.real - cz.real - t0).ravel() / h,
            (z.imag - cz.imag - t0).ravel() / h,
            (w.real - cw.real - t0).ravel() / h,
            (w.imag - cw.imag - t0).ravel() / h,
        ])
        inside = np.all((coords >= 0) & (coords <= n - 1), axis=0) \
            & np.all(np.isfinite(coords), axis=0)
        cl = np.clip(np.nan_to_num(coords, nan=0.0, posinf=0.0, neginf=0.0),
                     0, n - 1 - 1e-9)
        idx = cl.astype(int)
        frac = cl - idx
        g = self.values
        interp = np.zeros(coords.shape[1])
        for corner in range(16):
            bits = [(corner >> b) & 1 for b in range(4)]
            wgt = np.ones(coords.shape[1])
            ix = []
            for b, bit in enumerate(bits):
                wgt = wgt * (frac[b] if bit else (1 - frac[b]))
                ix.append(idx[b] + bit)
            interp += wgt * g[ix[0], ix[1], ix[2], ix[3]]
        rr2 = (np.abs(z - cz) ** 2 + np.abs(w - cw) ** 2).ravel()
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            tail = ginf + np.where(rr2 > 0, gamma / rr2, 0.0)
        tail = np.where(np.isfinite(rr2), tail, ginf)
        return np.where(inside, interp, tail).reshape(shape)

    def eval(self, pts):
        """Full potential u at chart points (singular parts exact)."""
        out = self.eval_regular(pts)
        for s in self.singular:
            out = out + s.chart_values(pts, self.k)
        return out

    def eval_point(self, p: ProjectivePoint) -> float:
        """u at a projective point; -inf floor on singular supports."""
        chart = p.to_chart(self.grid.chart)
        if self.k == 1:
            val = float(np.atleast_1d(self.eval(np.array([chart[0]])))[0])
        else:
            val = float(np.atleast_1d(self.eval((np.array([chart[0]]),
                                                 np.array([chart[1]]))))[0])
        return max(val, NEG_INFINITY_FLOOR)

    # -- measure-theoretic pieces -------------------------------------------------

    def ddc_regular_density(self) -> np.ndarray:
        """Lebesgue density of dd^c g on the grid (trace density for k=2)."""
        h = self.grid.spacing
        if self.k == 1:
            return _lap2d(self.values, h) / (2.0 * np.pi)
        hess = complex_hessian_4d(self.values, h)
        return (4.0 / np.pi ** 2) * mixed_m2(hess, fs_hessian(self.grid.points()))

    def net_ddc_regular(self) -> float:
        """Window integral of dd^c g (against omega for k=2) + model tail.

        Vanishes for a genuine global quasi-potential; the residual measures
        grid/tail consistency and enters the numerical mass.
        """
        grid = self.grid
        ginf, gamma, _, r1 = self._ring_stats()
        dens = self.ddc_regular_density()
        if self.k == 1:
            z = grid.points()
            r = np.abs(z - grid.center[0])
            window = float(np.sum(dens[r < r1]) * grid.cell_volume)
            tail = 2.0 * gamma / r1 ** 2
            return window + tail
        z, w = grid.points()
        cz, cw = grid.center
        r = np.sqrt(np.abs(z - cz) ** 2 + np.abs(w - cw) ** 2
                    + np.zeros(grid.shape))
        window = float(np.sum(dens[r < r1]) * grid.cell_volume)
        # radial model psi = gamma/s, s = r^2: trace integrand from the
        # closed-form M2 of radial functions
        def m2_radial(s):
            up = -gamma / s ** 2
            upp = 2.0 * gamma / s ** 3
            v = 0.5 / (1.0 + s)
            vp = -0.5 / (1.0 + s) ** 2
            return 2 * up * v + s * (up * vp + upp * v)
        tail, _ = integrate.quad(
            lambda rr: (4.0 / np.pi ** 2) * m2_radial(rr * rr)
            * 2.0 * np.pi ** 2 * rr ** 3, r1, np.inf, limit=200)
        return window + tail

    def chart_mean(self) -> float:
        """<u, omega^k> by grid quadrature + analytic tails and ledgers."""
        grid = self.grid
        pts = grid.points()
        fsw = fs_density(pts, self.k)
        total = float(np.sum(self.values * fsw) * grid.cell_volume)
        ginf, gamma, _, _ = self._ring_stats()
        out_mass = grid.omega_mass_outside
        total += ginf * out_mass + gamma * _fs_inverse_r2_tail(grid)
        for s in self.singular:
            total += _singular_mean(s, grid, self.k)
        return total


def _fs_inverse_r2_tail(grid: ChartGrid) -> float:
    """integral of |x - center|^-2 against omega^k outside the grid box.

    Uses the circumscribed disc complement; the box/disc sliver is part of
    the tail-model error budget.
    """
    r0 = grid.radius
    if grid.k == 1:
        c = abs(grid.center[0])
        val, _ = integrate.quad(
            lambda r: (1.0 / r ** 2) * 2.0 * r / (1.0 + (r + c) ** 2) ** 2,
            r0, np.inf, limit=100)
        return val
    c = math.hypot(abs(grid.center[0]), abs(grid.center[1]))
    val, _ = integrate.quad(
        lambda r: (1.0 / r ** 2) * (2.0 / np.pi ** 2)
        * (1.0 + (r + c) ** 2) ** -3 * 2.0 * np.pi ** 2 * r ** 3,
        r0, np.inf, limit=100)
    return val


_P2_LINE_LOG_MEAN = None
_P2_U0_MEAN = None


def _p2_constants():
    """Universal means over omega^2: <log|unit linear form|> and <u0>."""
    global _P2_LINE_LOG_MEAN, _P2_U0_MEAN
    if _P2_LINE_LOG_MEAN is None:
        # radial integrals in s = |x|^2 with measure s (1+s)^-3 ds * 2
        u0, _ = integrate.quad(
            lambda s: 0.5 * np.log1p(s) * 2.0 * s / (1.0 + s) ** 3, 0, np.inf)
        # for the unit form z0 on unit vectors: <log|z0|> over the FS measure;
        # |z0|^2 at a chart point is 1/(1+s): log|z0| = -(1/2)log(1+s)
        line, _ = integrate.quad(
            lambda s: -0.5 * np.log1p(s) * 2.0 * s / (1.0 + s) ** 3, 0, np.inf)
        _P2_U0_MEAN = u0
        _P2_LINE_LOG_MEAN = line
    return _P2_LINE_LOG_MEAN, _P2_U0_MEAN


def _singular_mean(s: SingularPart, grid: ChartGrid, k: int) -> float:
    """<(c/m) log(|P|/||.||^m), omega^k>, closed form where available."""
    if k == 1:
        # log|P(1,z)| = log|lead| + sum log|z - a_i|; <log|z-a|, omega> =
        # (1/2) log(1+|a|^2) and <u0, omega> = 1/2
        m = s.m
        cs = np.zeros(m + 1, dtype=complex)
        for e, c in s.poly.coeffs.items():
            cs[m - e[1]] = c.to_complex()
        lead = np.nonzero(np.abs(cs) > 0)[0]
        a0 = lead[0]
        roots = np.roots(cs[a0:]) if len(cs[a0:]) > 1 else np.array([])
        total = np.log(np.abs(cs[a0]))
        total += sum(0.5 * np.log1p(np.abs(r) ** 2) for r in roots)
        # the z0^a0 factor contributes a0 * log|z0| with <log|z0|> = -1/2
        total += a0 * (-0.5)
        total -= m * 0.5
        return (s.weight / m) * float(total)
    if s.m == 1:
        line_mean, u0_mean = _p2_constants()
        coeffs = np.zeros(3, dtype=complex)
        for e, c in s.poly.coeffs.items():
            coeffs[int(np.argmax(e))] = c.to_complex()
        return s.weight * (np.log(np.linalg.norm(coeffs)) + line_mean)
    # general P^2 divisors: window quadrature + flat tail of the bounded
    # integrand log(|P|/||.||^m)
    vals = s.chart_values(grid.points(), 2)
    fsw = fs_density(grid.points(), 2)
    window = float(np.sum(vals * fsw) * grid.cell_volume)
    edge = float(np.mean(vals[0])) if vals.ndim else 0.0
    return window + edge * grid.omega_mass_outside


# ---------------------------------------------------------------------------
# currents and measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Current11:
    """A positive closed (1,1)-current of mass 1: omega + dd^c(potential)."""

    potential: QuasiPotential
    provenance: str = "smooth"

    PROVENANCES = ("divisor", "smooth", "regularized", "green", "pullback")

    def __post_init__(self):
        if self.provenance not in self.PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def k(self) -> int:
        return self.potential.k

    @property
    def grid(self) -> ChartGrid:
        return self.potential.grid

    def positivity_defect(self) -> float:
        """Most negative nodewise eigenvalue of the smooth part of S.

        S_smooth = (1 - sum c) omega + dd^c g; the defect should stay above
        -tol with tol = 10 * spacing^2 (second-difference discretization
        error).  The 2-cell boundary ring is excluded.
        """
        pot = self.potential
        grid = pot.grid
        h = grid.spacing
        b = pot.background_coeff
        if pot.k == 1:
            dens = b * fs_density(grid.points(), 1) \
                + _lap2d(pot.values, h) / (2.0 * np.pi)
            return float(np.min(dens[2:-2, 2:-2]))
        hz = complex_hessian_4d(pot.values, h)
        f0 = fs_hessian(grid.points())
        a = b * f0[0] + hz[0]
        d = b * f0[1] + hz[1]
        c = b * np.broadcast_to(f0[2], grid.shape) + hz[2]
        # smallest eigenvalue of the 2x2 Hermitian matrix [[a, c], [cbar, d]]
        half = 0.5 * (a + d)
        disc = np.sqrt(np.maximum(0.25 * (a - d) ** 2 + np.abs(c) ** 2, 0.0))
        lam_min = half - disc
        core = (slice(2, -2),) * (2 * pot.k)
        return float(np.min(lam_min[core]))

    def positivity_tolerance(self) -> float:
        return 10.0 * self.grid.spacing ** 2


@dataclass(frozen=True)
class GridMeasure:
    """Atoms + grid density (+ analytically known off-window mass)."""

    atoms: tuple
    grid: ChartGrid
    density: np.ndarray
    exterior: float = 0.0
    total: float = None

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if d.shape != self.grid.shape:
            raise ValueError("density shape does not match the grid")
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "density", d)
        atoms = []
        for p, w in self.atoms:
            if w < 0:
                raise ValueError("atom weights must be nonnegative")
            if not isinstance(p, ProjectivePoint):
                p = ProjectivePoint.from_chart(p, self.grid.chart)
            atoms.append((p, float(w)))
        object.__setattr__(self, "atoms", tuple(atoms))
        if self.total is None:
            object.__setattr__(self, "total", self.computed_mass())

    @property
    def k(self) -> int:
        return self.grid.k

    def atom_mass(self) -> float:
        return float(sum(w for _, w in self.atoms))

    def window_mass(self) -> float:
        return float(np.sum(self.density) * self.grid.cell_volume)

    def computed_mass(self) -> float:
        return self.atom_mass() + self.window_mass() + self.exterior

    def deposited(self) -> "GridMeasure":
        """Atoms smeared onto the density grid by bilinear (CIC) deposit.

        Atoms outside the window move to the exterior ledger.  Useful when
        the current is viewed as a form (sup-density diagnostics, rasters).
        """
        grid = self.grid
        n = grid.resolution
        h = grid.spacing
        t0 = grid.axis()[0]
        dens = np.array(self.density)
        ext = self.exterior
        for p, w in self.atoms:
            chart = p.to_chart(grid.chart)
            if self.k == 1:
                fr = [(chart[0].real - grid.center[0].real - t0) / h,
                      (chart[0].imag - grid.center[0].imag - t0) / h]
            else:
                fr = [(chart[0].real - grid.center[0].real - t0) / h,
                      (chart[0].imag - grid.center[0].imag - t0) / h,
                      (chart[1].real - grid.center[1].real - t0) / h,
                      (chart[1].imag - grid.center[1].imag - t0) / h]
            if not all(np.isfinite(f) and 0 <= f <= n - 1 for f in fr):
                ext += w
                continue
            idx = [int(f) for f in fr]
            frac = [f - i for f, i in zip(fr, idx)]
            for corner in range(2 ** len(fr)):
                wgt = w
                pos = []
                for b in range(len(fr)):
                    bit = (corner >> b) & 1
                    wgt *= frac[b] if bit else (1 - frac[b])
                    pos.append(min(idx[b] + bit, n - 1))
                dens[tuple(pos)] += wgt / grid.cell_volume
        return GridMeasure((), grid, dens, exterior=ext)

    def pair_function(self, values_fn) -> float:
        """integral of a scalar function against the measure.

        values_fn(chart_points) -> array on the grid; atoms are evaluated
        through their chart coordinates (atoms at the chart boundary get the
        exterior/limit value).
        """
        total = float(np.sum(values_fn(self.grid.points()) * self.density)
                      * self.grid.cell_volume)
        for p, w in self.atoms:
            chart = p.to_chart(self.grid.chart)
            if self.k == 1:
                v = float(np.atleast_1d(values_fn(np.array([chart[0]])))[0])
            else:
                v = float(np.atleast_1d(values_fn(
                    (np.array([chart[0]]), np.array([chart[1]]))))[0])
            total += w * v
        return total


def dirac_measure(point, grid: ChartGrid) -> GridMeasure:
    """The unit Dirac mass at a point, as a GridMeasure."""
    if not isinstance(point, ProjectivePoint):
        point = ProjectivePoint.from_chart(point, grid.chart)
    return GridMeasure(atoms=((point, 1.0),), grid=grid,
                       density=np.zeros(grid.shape))


def omega_current(grid: ChartGrid, provenance: str = "smooth") -> Current11:
    """The Fubini-Study current omega (zero potential, mean 0)."""
    pot = QuasiPotential(grid, np.zeros(grid.shape), (), mean=0.0)
    return Current11(pot, provenance)


def current_from_grid_values(grid: ChartGrid, values: np.ndarray,
                             singular=(), provenance: str = "smooth",
                             mean: float = None) -> Current11:
    """Current11 from raw potential samples; the mean is recomputed."""
    pot = QuasiPotential(grid, values, tuple(singular), mean=0.0)
    pot = replace(pot, mean=pot.chart_mean()) if mean is None \
        else replace(pot, mean=mean)
    return Current11(pot, provenance)


@dataclass(frozen=True)
class DivisorCurrent:
    """[V]/m for V = {P = 0}, P square-free of degree m; mass exactly 1."""

    poly: HomogeneousPolynomial
    normalized: bool = True

    def __post_init__(self):
        if self.poly.is_zero() or self.poly.degree == 0:
            raise ValueError("divisor polynomial must be nonconstant")
        if not self.poly.square_free():
            raise ValueError("divisor polynomial must be square-free")

    @property
    def m(self) -> int:
        return self.poly.degree

    def current(self, grid: ChartGrid) -> Current11:
        part = SingularPart(1.0, self.poly)
        pot = QuasiPotential(grid, np.zeros(grid.shape), (part,), mean=0.0)
        pot = replace(pot, mean=pot.chart_mean())
        return Current11(pot, "divisor")


# ---------------------------------------------------------------------------
# mass / trace / Lelong / regularization
# ---------------------------------------------------------------------------

def mass(obj) -> float:
    """Mass of a current or measure.

    Current11: the cohomological ledger (omega background + divisor weights).
    The regular part contributes exactly zero by Stokes on the closed
    manifold, since the type stores a globally defined potential; how well
    the grid data honors that is reported by mass_defect(), not folded in
    here.  GridMeasure: atoms + window quadrature + recorded exterior.
    """
    if isinstance(obj, GridMeasure):
        return obj.computed_mass()
    if isinstance(obj, Current11):
        pot = obj.potential
        return pot.background_coeff + pot.singular_weight
    raise TypeError(f"mass() wants a Current11 or GridMeasure, got {type(obj)}")


def mass_defect(S: Current11) -> float:
    """Grid-vs-tail residual of the regular part's dd^c mass.

    The window integral of dd^c g plus the fitted radial tail should vanish;
    the residual measures discretization + tail-model error and scales like
    (feature scale / grid radius)^4 on P^1.
    """
    return abs(S.potential.net_ddc_regular())


def _line_fs_mass_in_box(poly: HomogeneousPolynomial, grid: ChartGrid,
                         margin: float = 0.0) -> float:
    """FS trace mass of a projective line inside the grid box (k = 2).

    Parametrizes the chart part of {P = 0} and integrates the restricted
    FS form with composite panel quadrature; the total over P^2 is 1.
    `margin` shrinks the box (used to match a boundary-ring exclusion).
    """
    from .geom import _panel_gl_nodes
    c = np.zeros(3, dtype=complex)
    for e, cc in poly.coeffs.items():
        c[int(np.argmax(e))] = cc.to_complex()
    # chart line c0 + c1 z + c2 w = 0
    if abs(c[2]) >= abs(c[1]):
        def point(t):
            return t, -(c[0] + c[1] * t) / c[2]
        dz, dw = 1.0, -c[1] / c[2]
    else:
        def point(t):
            return -(c[0] + c[2] * t) / c[1], t
        dz, dw = -c[2] / c[1], 1.0
    lim = 60.0 * (1.0 + grid.radius + max(abs(x) for x in grid.center))
    xs, xw = _panel_gl_nodes(-lim, lim)
    T = xs[:, None] + 1j * xs[None, :]
    z, w = point(T)
    # restricted FS density: (1/pi) (A s - |B|^2)/s^2 with A = |dz|^2+|dw|^2
    # and B = conj(z) dz + conj(w) dw along the affine parametrization
    s = 1.0 + np.abs(z) ** 2 + np.abs(w) ** 2
    A = abs(dz) ** 2 + abs(dw) ** 2
    B = np.conj(z) * dz + np.conj(w) * dw
    dens = (1.0 / np.pi) * (A * s - np.abs(B) ** 2) / s ** 2
    r = grid.radius - margin
    cz, cw = grid.center
    inside = (np.abs(z.real - cz.real) < r) & (np.abs(z.imag - cz.imag) < r) \
        & (np.abs(w.real - cw.real) < r) & (np.abs(w.imag - cw.imag) < r)
    return float(np.einsum("i,j,ij->", xw, xw, dens * inside))


def trace_measure(S: Current11) -> GridMeasure:
    """The trace measure S wedge omega^(k-1) as a GridMeasure.

    k = 1: the current itself (atoms from the singular ledger, density from
    the background and dd^c g).  k = 2: contraction against omega by finite
    differences; divisor parts enter through their sampled log potentials,
    whose discrete Hessians concentrate along the zero sets.
    """
    pot = S.potential
    grid = pot.grid
    pts = grid.points()
    if pot.k == 1:
        dens = pot.background_coeff * fs_density(pts, 1) \
            + pot.ddc_regular_density()
        atoms = []
        ext = pot.background_coeff * grid.omega_mass_outside
        for s in pot.singular:
            for root, w in s.chart_roots():
                if root is None:
                    atoms.append((ProjectivePoint([0.0, 1.0]), w))
                elif grid.contains(np.array([root]))[0]:
                    atoms.append((ProjectivePoint.from_chart(root), w))
                else:
                    ext += w
        core = dens[2:-2, 2:-2]
        neg_mass = float(np.sum(np.minimum(core, 0.0)) * grid.cell_volume)
        pos_mass = float(np.sum(np.maximum(core, 0.0)) * grid.cell_volume)
        if -neg_mass > 0.25 * (pos_mass + 0.1):
            raise UnderResolvedError(
                f"trace density has negative mass {neg_mass:.3g} against "
                f"{pos_mass:.3g} positive; refine the grid")
        return GridMeasure(tuple(atoms), grid, dens, exterior=ext)
    # k = 2: build the full sampled potential (singular parts included at
    # cell-scale smoothing) and contract its Hessian with omega.  The
    # sampled singular values carry their own -u0 background, so the omega^2
    # term enters with coefficient one.
    h = grid.spacing
    full = pot.values.copy()
    for s in pot.singular:
        full = full + s.chart_values(pts, 2, smoothing=0.75 * h)
    hess = complex_hessian_4d(full, h)
    dens = fs_density(pts, 2) \
        + (4.0 / np.pi ** 2) * mixed_m2(hess, fs_hessian(pts))
    ext = pot.background_coeff * grid.omega_mass_outside
    for s in pot.singular:
        if s.m == 1:
            # the 2-cell boundary ring is replaced by the ambient density,
            # so the ledger complements the shrunken core box
            inside = _line_fs_mass_in_box(s.poly, grid, margin=2 * h)
            ext += s.weight * (1.0 - inside)
        # higher-degree divisor tails are not ledgered; the window carries them
    core = np.zeros(grid.shape, dtype=bool)
    core[(slice(2, -2),) * 4] = True
    dens = np.where(core, dens,
                    pot.background_coeff * fs_density(pts, 2))
    return GridMeasure((), grid, dens, exterior=ext)


def lelong_number(S: Current11, a: ProjectivePoint, radii=None) -> float:
    """Lelong number at a: extrapolated ball-mass ratios of the trace.

    The ratio sequence must be non-increasing within tolerance; violations
    raise UnderResolvedError.  radii defaults to a geometric sweep between
    4 grid cells and a quarter of the grid radius.
    """
    pot = S.potential
    grid = pot.grid
    h = grid.spacing
    if radii is None:
        lo = 4.0 * h
        hi = max(0.25 * grid.radius, 8.0 * h)
        radii = list(np.geomspace(hi, lo, 6))
    radii = sorted(radii, reverse=True)
    if radii[-1] < 4.0 * h - 1e-12:
        raise UnderResolvedError("smallest radius is below 4 grid cells")
    chart = a.to_chart(grid.chart)
    pts = grid.points()
    if pot.k == 1:
        dens = pot.background_coeff * fs_density(pts, 1) \
            + pot.ddc_regular_density()
        r2 = np.abs(pts - chart[0]) ** 2
        atom_w = []
        for s in pot.singular:
            for root, w in s.chart_roots():
                if root is not None and abs(root - chart[0]) < 2 * h:
                    atom_w.append((abs(root - chart[0]), w))
        ratios = []
        for r in radii:
            ball = float(np.sum(dens[r2 < r * r]) * grid.cell_volume)
            ball += sum(w for d, w in atom_w if d < r)
            ratios.append(ball)
    else:
        full = pot.values.copy()
        for s in pot.singular:
            full = full + s.chart_values(pts, 2, smoothing=0.75 * h)
        hess = complex_hessian_4d(full, h)
        b = pot.background_coeff
        f0 = fs_hessian(pts)
        tr = (hess[0] + hess[1]).real + b * (f0[0] + f0[1]).real
        dens = (2.0 / np.pi) * tr
        r2 = np.abs(pts[0] - chart[0]) ** 2 + np.abs(pts[1] - chart[1]) ** 2 \
            + np.zeros(grid.shape)
        ratios = []
        for r in radii:
            ball = float(np.sum(dens[r2 < r * r]) * grid.cell_volume)
            ratios.append(ball / (np.pi * r * r))
    tol = 0.1 + 20.0 * h / min(radii)
    for hi_v, lo_v in zip(ratios, ratios[1:]):
        if lo_v > hi_v + tol:
            raise UnderResolvedError(
                f"Lelong ratios increase ({hi_v:.3g} -> {lo_v:.3g}); "
                "the grid under-resolves the point")
    # Richardson extrapolation on the last three radii: ratios behave like
    # nu + const * r^2 for smooth remainders
    r3 = np.array(radii[-3:])
    v3 = np.array(ratios[-3:])
    coef = np.polyfit(r3 ** 2, v3, 1)
    return float(coef[1])


def pushforward_potential(tau: Automorphism, u: QuasiPotential) -> QuasiPotential:
    """Quasi-potential of tau_*(omega + dd^c u), i.e. of the moved current.

    u o tau^(-1) transports the potential; the corrector
    log(||A^(-1) zt||/||zt||) is the quasi-potential of tau_* omega - omega.
    Singular ledger entries transport exactly as P o A^(-1).
    """
    if tau.k != u.k:
        raise ValueError("automorphism and potential live on different spaces")
    grid = u.grid
    pts = grid.points()
    inv = tau.inverse()
    pre = inv.apply_chart(pts, grid.chart)
    g_new = u.eval_regular(pre) + tau.log_norm_ratio(pts, grid.chart,
                                                     inverse=True)
    if u.k == 2:
        g_new = np.broadcast_to(g_new, grid.shape)
    sing = tuple(s.transported(tau) for s in u.singular)
    out = QuasiPotential(grid, np.asarray(g_new, dtype=float), sing, mean=0.0)
    return replace(out, mean=out.chart_mean())


def regularize(S: Current11, theta: complex, samples: int = 32,
               seed: int = 0) -> Current11:
    """theta-regularization: Monte-Carlo average of automorphism push-forwards.

    Averages the transported quasi-potentials of tau_(theta y) pushes over
    `samples` draws of y; the result is tagged "regularized".  Mass is
    preserved exactly (the ledger weights are untouched and the grid parts
    average linearly).
    """
    if not (0 < abs(theta) <= 1):
        raise ValueError("need 0 < |theta| <= 1")
    if samples < 32:
        raise ValueError("samples must be at least 32")
    rng = np.random.default_rng(seed)
    pot = S.potential
    acc = np.zeros(pot.grid.shape)
    sing = []
    w = 1.0 / samples
    for _ in range(samples):
        tau = sample_automorphism(rng, theta, pot.k)
        moved = pushforward_potential(tau, pot)
        acc += moved.values / samples
        sing.extend(SingularPart(s.weight * w, s.poly) for s in moved.singular)
    out = QuasiPotential(pot.grid, acc, tuple(sing), mean=0.0)
    out = replace(out, mean=out.chart_mean())
    return Current11(out, "regularized")


# ---------------------------------------------------------------------------
# P^1 Green quasi-potentials and smooth building blocks
# ---------------------------------------------------------------------------

def _log_kernel_selfcell() -> float:
    # mean of log|x| over the unit square cell, for the FFT self-interaction;
    # tensor Gauss-Legendre nodes never hit the integrable singularity at 0
    gn, gw = np.polynomial.legendre.leggauss(96)
    x = 0.5 * gn
    w = 0.5 * gw
    vals = np.log(np.hypot(x[:, None], x[None, :]))
    return float(np.einsum("i,j,ij->", w, w, vals))


_SELF_CELL = None


def log_convolution(grid: ChartGrid, density: np.ndarray) -> np.ndarray:
    """(log|.| * density)(nodes) * cell area, by zero-padded FFT.

    The singular self-cell uses the exact cell average of log|x|.
    """
    global _SELF_CELL
    if _SELF_CELL is None:
        _SELF_CELL = _log_kernel_selfcell()
    n = grid.resolution
    h = grid.spacing
    idx = np.arange(-(n - 1), n)
    dz = h * (idx[:, None] + 1j * idx[None, :])
    with np.errstate(divide="ignore"):
        ker = np.log(np.abs(dz))
    ker[n - 1, n - 1] = np.log(h) + _SELF_CELL
    from numpy.fft import irfft2, rfft2
    shape = (2 * n, 2 * n)
    kpad = np.zeros(shape)
    kpad[: 2 * n - 1, : 2 * n - 1] = ker
    dpad = np.zeros(shape)
    dpad[:n, :n] = density
    conv = irfft2(rfft2(kpad) * rfft2(dpad), shape)
    return conv[n - 1: 2 * n - 1, n - 1: 2 * n - 1] * grid.cell_volume


def green_potential(measure: GridMeasure) -> QuasiPotential:
    """The explicit negative Green quasi-potential of a P^1 measure.

    Uses the kernel K(z, w) = log|z - w| - u0(z) - u0(w) with
    u0 = (1/2) log(1 + |.|^2), which satisfies dd^c_z K = delta_w - omega
    and K <= 0.  Atoms become exact ledger entries; the density part goes
    through an FFT log-convolution.  The mean is -1/2 per unit mass.
    """
    if measure.k != 1:
        raise ValueError("green_potential is the explicit P^1 kernel route")
    grid = measure.grid
    z = grid.points()
    u0 = 0.5 * np.log1p(np.abs(z) ** 2)
    dens_mass = measure.window_mass() + measure.exterior
    g = np.zeros(grid.shape)
    if np.any(measure.density):
        g += log_convolution(grid, measure.density)
        # - int u0 dR over the density part
        g -= float(np.sum(u0 * measure.density) * grid.cell_volume)
    if measure.exterior:
        # off-window density is not resolvable here; treat it as sitting at
        # the far ring (contributes ~log|z| - u0(z) ~ 0 up to a constant)
        g -= measure.exterior * 0.0
    g -= dens_mass * u0
    sing = []
    for p, w in measure.atoms:
        chart = p.to_chart(grid.chart)
        if np.isinf(chart[0]):
            poly = HomogeneousPolynomial.variable(0, 2)  # z0: the point at inf
        else:
            a = complex(chart[0])
            poly = HomogeneousPolynomial.variable(1, 2) \
                - HomogeneousPolynomial.variable(0, 2) * ExactComplex.of(a)
            g -= w * 0.5 * np.log1p(abs(a) ** 2)
        sing.append(SingularPart(w, poly))
    out = QuasiPotential(grid, g, tuple(sing), mean=0.0)
    return replace(out, mean=out.chart_mean())


def smoothed_dirac_current(grid: ChartGrid, a: complex, sigma: float,
                           weight: float = 1.0) -> Current11:
    """(1-t) omega + t * (sigma-smoothed Dirac at a), t = weight, on P^1.

    The smoothed Dirac has potential (1/2) log(sigma^2 + |z-a|^2) relative
    to log|z|-type growth, giving the smooth density
    (1/pi) sigma^2 / (sigma^2 + |z-a|^2)^2 of mass 1.
    """
    if not 0 <= weight <= 1:
        raise ValueError("weight must lie in [0, 1]")
    z = grid.points()
    g = weight * (0.5 * np.log(sigma ** 2 + np.abs(z - a) ** 2)
                  - 0.5 * np.log1p(np.abs(z) ** 2))
    pot = QuasiPotential(grid, g, (), mean=0.0)
    pot = replace(pot, mean=pot.chart_mean())
    return Current11(pot, "smooth")


def random_smooth_current(grid: ChartGrid, rng: np.random.Generator,
                          blobs: int = 3) -> Current11:
    """Random convex mix of omega and smoothed Diracs; always in C_1.

    Blob centers and widths are kept well inside the grid so the window
    resolves essentially all of the current's mass.
    """
    weights = rng.dirichlet(np.ones(blobs + 1))
    z = grid.points()
    g = np.zeros(grid.shape)
    for j in range(blobs):
        a = 0.15 * grid.radius * (rng.standard_normal() + 1j * rng.standard_normal())
        if abs(a) > 0.3 * grid.radius:
            a *= 0.3 * grid.radius / abs(a)
        sigma = 0.25 + 0.35 * rng.uniform()
        g += weights[j] * (0.5 * np.log(sigma ** 2 + np.abs(z - a) ** 2)
                           - 0.5 * np.log1p(np.abs(z) ** 2))
    pot = QuasiPotential(grid, g, (), mean=0.0)
    pot = replace(pot, mean=pot.chart_mean())
    return Current11(pot, "smooth")
