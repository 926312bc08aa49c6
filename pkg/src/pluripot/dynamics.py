"""Pull-back of currents, Green currents and equidistribution experiments.

Two map classes are implemented: holomorphic endomorphisms of P^k (k <= 2)
and regular polynomial automorphisms of C^2 (Henon type).  Pull-backs act
at the potential level: if S = omega + dd^c u then

    d^-1 f^*(S) = omega + dd^c((u o f + h) / d),

with h = log(||F(zt)|| / ||zt||^d) the homogeneity corrector of the lifted
map F.  Green potentials are accumulated along normalized homogeneous
orbits, so no overflow occurs and the fixed-point residuals are geometric.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .currents import (Current11, GridMeasure, NEG_INFINITY_FLOOR,
                       QuasiPotential, SingularPart, dirac_measure, mass,
                       trace_measure)
from .distances import default_panel, dist_alpha
from .geom import ChartGrid, ProjectivePoint, fs_distance
from .polymap import (ExactComplex, HomogeneousMap, HomogeneousPolynomial,
                      compose, indeterminacy_points, parse_map)
from .superpot import SuperPotentialValue, super_potential

__all__ = [
    "Endomorphism",
    "RegularAutomorphism",
    "GreenCurrent",
    "ExperimentRecord",
    "DecayFit",
    "pullback",
    "pullback_measure",
    "pushforward_measure",
    "green_current_endo",
    "equidistribution_endo",
    "dynamical_super_potential",
    "henon_map",
    "henon_green",
    "henon_equilibrium",
    "henon_truncated_current",
    "henon_uniqueness_experiment",
]


# ---------------------------------------------------------------------------
# map wrappers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Endomorphism:
    """A holomorphic self-map of P^k of algebraic degree d >= 2."""

    map: HomogeneousMap
    d: int = field(init=False, default=0)

    def __post_init__(self):
        if self.map.degree < 2:
            raise ValueError("need algebraic degree >= 2")
        if self.map.k == 2 and indeterminacy_points(self.map):
            raise ValueError("map has indeterminacy points; not holomorphic")
        object.__setattr__(self, "d", self.map.degree)

    @property
    def k(self) -> int:
        return self.map.k

    def homogeneous_step(self, coords):
        """One application of the lifted map, renormalized to unit norm.

        Returns (new coords, log ||F(x)|| at the unit-norm input), whose
        accumulated d-weighted sums build Green potentials overflow-free.
        """
        vals = [p.evaluate(coords) for p in self.map.components]
        nrm = np.sqrt(sum(np.abs(v) ** 2 for v in vals))
        safe = np.where(nrm > 0, nrm, 1.0)
        return [v / safe for v in vals], np.log(safe)

    def corrector(self, pts):
        """h = log(||F(zt)||/||zt||^d) at chart points."""
        if self.k == 1:
            z = np.asarray(pts, dtype=complex)
            coords = (np.ones_like(z), z)
            lognorm = 0.5 * np.log1p(np.abs(z) ** 2)
        else:
            z, w = pts
            one = np.ones(np.broadcast_shapes(np.shape(z), np.shape(w)),
                          dtype=complex)
            coords = (one, z + 0 * one, w + 0 * one)
            lognorm = 0.5 * np.log1p(np.abs(z) ** 2 + np.abs(w) ** 2) \
                + np.zeros(one.shape)
        vals = [p.evaluate(coords) for p in self.map.components]
        nrm2 = sum(np.abs(v) ** 2 for v in vals)
        return 0.5 * np.log(nrm2) - self.d * lognorm

    def corrector_defect(self, grid: ChartGrid) -> float:
        """sup |density(f^* omega) - (d omega + dd^c h)| by finite differences.

        The pull-back of omega has chart density fs(f(z)) |f'(z)|^2 (k=1);
        comparing it against d*fs + Lap h / (2 pi) validates the corrector.
        """
        if self.k != 1:
            raise NotImplementedError("corrector check is a P^1 diagnostic")
        from .currents import _lap2d
        from .geom import fs_density
        z = grid.points()
        h_vals = np.asarray(self.corrector(z), dtype=float)
        lhs = self.d * fs_density(z, 1) + _lap2d(h_vals, grid.spacing) / (2 * np.pi)
        fz = self.map.apply_chart(z)
        eps = 1e-5
        dfz = (self.map.apply_chart(z + eps) - self.map.apply_chart(z - eps)) \
            / (2 * eps)
        rhs = fs_density(fz, 1) * np.abs(dfz) ** 2
        core = (slice(4, -4),) * 2
        return float(np.max(np.abs(lhs - rhs)[core]))


def _poly_chart_roots(poly_num, poly_den, target: complex):
    """Solutions z of poly_num(1,z)/poly_den(1,z) = target, with roots at
    infinity dropped; returns the d roots with multiplicity."""
    d = max(poly_num.degree, poly_den.degree)
    cs = np.zeros(d + 1, dtype=complex)
    for e, c in poly_num.coeffs.items():
        cs[d - e[1]] += c.to_complex()
    for e, c in poly_den.coeffs.items():
        cs[d - e[1]] -= target * c.to_complex()
    lead = np.nonzero(np.abs(cs) > 1e-13 * np.max(np.abs(cs)))[0]
    if not len(lead) or len(cs[lead[0]:]) <= 1:
        return np.array([], dtype=complex)
    return np.roots(cs[lead[0]:])


@dataclass(frozen=True)
class RegularAutomorphism:
    """A regular polynomial automorphism of C^2 (Henon type on P^2).

    forward/inverse are the homogenized maps; regularity means the two
    indeterminacy points at infinity are distinct, and then the algebraic
    degrees satisfy d_+ = d_- (k = 2, p = 1).
    """

    forward: HomogeneousMap
    inverse: HomogeneousMap
    coeffs: dict

    def __post_init__(self):
        i_plus = indeterminacy_points(self.forward)
        i_minus = indeterminacy_points(self.inverse)
        if len(i_plus) != 1 or len(i_minus) != 1:
            raise ValueError("expected a single indeterminacy point each way")
        if fs_distance(i_plus[0], i_minus[0]) < 1e-8:
            raise ValueError("not regular: I+ and I- intersect")
        object.__setattr__(self, "_i_plus", i_plus[0])
        object.__setattr__(self, "_i_minus", i_minus[0])
        # exact inverse check on random points
        rng = np.random.default_rng(0)
        z = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        w = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        fz, fw = self.apply((z, w))
        bz, bw = self.apply((fz, fw), inverse=True)
        if not (np.allclose(bz, z, atol=1e-9) and np.allclose(bw, w, atol=1e-9)):
            raise ValueError("inverse map does not invert the forward map")

    @property
    def I_plus(self) -> ProjectivePoint:
        return self._i_plus

    @property
    def I_minus(self) -> ProjectivePoint:
        return self._i_minus

    @property
    def d_plus(self) -> int:
        return self.forward.degree

    @property
    def d_minus(self) -> int:
        return self.inverse.degree

    @property
    def p(self) -> int:
        return 1  # dim I_+ = k - p - 1 = 0 on P^2

    @property
    def escape_radius(self) -> float:
        total = sum(abs(v) for v in self.coeffs.values())
        return 2.0 * (1.0 + total)

    def apply(self, pts, inverse: bool = False):
        g = self.inverse if inverse else self.forward
        return g.apply_chart(pts)

    def green_values(self, pts, direction: str = "+", n: int = 40):
        """G_+/- = lim d^{-n} log+ ||f^{+-n}(x)|| on chart points.

        Escaped orbits switch to scalar log-domain recursion, keeping
        ~1e-12 accuracy without overflow; bounded orbits return 0.
        """
        zz, ww = pts
        shape = np.broadcast_shapes(np.shape(zz), np.shape(ww))
        z = np.broadcast_to(np.asarray(zz, dtype=complex), shape).ravel().copy()
        w = np.broadcast_to(np.asarray(ww, dtype=complex), shape).ravel().copy()
        d = self.d_plus if direction == "+" else self.d_minus
        r_esc = self.escape_radius
        g = np.zeros(z.shape)
        scale = np.ones(z.shape)  # d^{-j} weight of the pending orbit
        active = np.ones(z.shape, dtype=bool)
        for _ in range(n):
            if not np.any(active):
                break
            big = np.zeros(z.shape, dtype=bool)
            big[active] = np.maximum(np.abs(z[active]), np.abs(w[active])) > 1e60
            if np.any(big):
                # far in the escape regime the remaining correction terms are
                # O(|w|^-2) ~ 1e-120: G = scale * log||.|| to full precision
                g[big] = scale[big] * 0.5 * np.log(np.abs(z[big]) ** 2
                                                   + np.abs(w[big]) ** 2)
                active &= ~big
            za, wa = z[active], w[active]
            fz, fw = self.apply((za, wa))
            z[active] = fz
            w[active] = fw
            scale[active] /= d
        live = active & (np.abs(z) ** 2 + np.abs(w) ** 2 > r_esc ** 2)
        g[live] = scale[live] * 0.5 * np.log(np.abs(z[live]) ** 2
                                             + np.abs(w[live]) ** 2)
        # never-escaped points: G = 0 up to the geometric tail
        return g.reshape(shape)


def henon_map(a: float = 0.3, c: float = -1.1) -> RegularAutomorphism:
    """(z, w) -> (w, w^2 + c - a z), extended to P^2, with its inverse."""
    if a == 0:
        raise ValueError("a must be nonzero for invertibility")
    from fractions import Fraction
    fa, fc = Fraction(str(a)), Fraction(str(c))
    z0, z1, z2 = (HomogeneousPolynomial.variable(i, 3) for i in range(3))
    fwd = HomogeneousMap([
        z0 * z0,
        z0 * z2,
        z2 * z2 + z0 * z0 * ExactComplex(fc) - z0 * z1 * ExactComplex(fa)])
    inv = HomogeneousMap([
        z0 * z0 * ExactComplex(fa),
        z1 * z1 + z0 * z0 * ExactComplex(fc) - z0 * z2,
        z0 * z1 * ExactComplex(fa)])
    return RegularAutomorphism(fwd, inv, {"a": a, "c": c})


# ---------------------------------------------------------------------------
# records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentRecord:
    """One row of a convergence/decay experiment."""

    n: int
    distance: float
    residual: float = float("nan")
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DecayFit:
    """Log-linear fit of a distance sequence: distance ~ C lambda^-n."""

    records: tuple
    rate: float
    r_squared: float
    converged_before_fit: bool = False

    def __post_init__(self):
        ns = [r.n for r in self.records]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("records must be strictly ordered in n")

    @property
    def passed(self) -> bool:
        if self.converged_before_fit:
            return True
        return self.rate > 1.0 and self.r_squared >= 0.9


def fit_decay(records, noise_floor: float = 1e-10) -> DecayFit:
    """Fit distance ~ C lambda^-n on the pre-floor segment of the records."""
    records = tuple(records)
    live = [r for r in records if r.distance > noise_floor]
    if len(live) < 3:
        return DecayFit(records, rate=float("inf"), r_squared=1.0,
                        converged_before_fit=True)
    ns = np.array([r.n for r in live], dtype=float)
    logs = np.log([r.distance for r in live])
    slope, intercept = np.polyfit(ns, logs, 1)
    pred = slope * ns + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(records, rate=float(np.exp(-slope)), r_squared=r2)


@dataclass(frozen=True)
class GreenCurrent:
    """An invariant current with its construction diagnostics."""

    current: object  # Current11 or GridMeasure
    generator: str
    iterates: int
    residual: float

    GENERATORS = ("endo-T", "henon-T+", "henon-T-", "mu")

    def __post_init__(self):
        if self.generator not in self.GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")


# ---------------------------------------------------------------------------
# pull-back and push-forward
# ---------------------------------------------------------------------------

def pullback(f: Endomorphism, S: Current11) -> Current11:
    """Normalized pull-back L(S) = d^-1 f^*(S), mass 1, at potential level.

    Ledger atoms on P^1 transport to their preimages by root finding; on
    P^2 divisor entries compose exactly (P o F, degree m d).  The grid part
    becomes (g o f + b h)/d with b the ledger-complement coefficient.
    """
    pot = S.potential
    grid = pot.grid
    pts = grid.points()
    d = f.d
    fz = f.map.apply_chart(pts, grid.chart)
    g_of = np.asarray(pot.eval_regular(fz), dtype=float)
    h_vals = np.asarray(f.corrector(pts), dtype=float)
    sing = []
    weight = pot.singular_weight
    if pot.k == 1:
        for s in pot.singular:
            for root, w_at in s.chart_roots():
                target = None if root is None else complex(root)
                if target is None:
                    # preimages of the point at infinity: F0(1,z) = 0
                    den = f.map.components[0]
                    cs = np.zeros(d + 1, dtype=complex)
                    for e, c in den.coeffs.items():
                        cs[d - e[1]] = c.to_complex()
                    lead = np.nonzero(np.abs(cs) > 0)[0]
                    roots = np.roots(cs[lead[0]:]) if len(cs[lead[0]:]) > 1 else []
                    n_inf = lead[0]
                else:
                    full = _poly_chart_roots(f.map.components[1],
                                             f.map.components[0], target)
                    roots, n_inf = full, d - len(full)
                for b in np.atleast_1d(roots):
                    poly = HomogeneousPolynomial.variable(1, 2) \
                        - HomogeneousPolynomial.variable(0, 2) \
                        * ExactComplex.of(complex(b))
                    sing.append(SingularPart(w_at / d, poly))
                if n_inf > 0:
                    sing.append(SingularPart(
                        w_at * n_inf / d, HomogeneousPolynomial.variable(0, 2)))
    else:
        for s in pot.singular:
            sing.append(SingularPart(
                s.weight, s.poly.substitute(f.map.components)))
    new_vals = (g_of + (1.0 - weight) * h_vals) / d
    out = QuasiPotential(grid, new_vals, tuple(sing), mean=0.0)
    out = replace(out, mean=out.chart_mean())
    return Current11(out, "pullback")


def pullback_measure(f: Endomorphism, nu: GridMeasure) -> GridMeasure:
    """d^-k (f^k)... preimage transport of an atomic P^1 measure.

    Atoms split over their d preimages with weight /d (the Brolin-style
    cloud iteration); density parts are not supported here.
    """
    if f.k != 1:
        raise NotImplementedError("preimage clouds are a P^1 cross-check")
    if np.any(nu.density):
        raise NotImplementedError("pullback_measure transports atoms only")
    atoms = []
    for p, w in nu.atoms:
        chart = p.to_chart(nu.grid.chart)
        target = complex(chart[0]) if np.isfinite(chart[0]) else None
        if target is None:
            den = f.map.components[0]
            cs = np.zeros(f.d + 1, dtype=complex)
            for e, c in den.coeffs.items():
                cs[f.d - e[1]] = c.to_complex()
            lead = np.nonzero(np.abs(cs) > 0)[0]
            roots = np.roots(cs[lead[0]:]) if len(cs[lead[0]:]) > 1 else []
            n_inf = lead[0]
        else:
            roots = _poly_chart_roots(f.map.components[1],
                                      f.map.components[0], target)
            n_inf = f.d - len(roots)
        for b in np.atleast_1d(roots):
            atoms.append((ProjectivePoint.from_chart(complex(b)), w / f.d))
        if n_inf > 0:
            atoms.append((ProjectivePoint([0.0, 1.0]), w * n_inf / f.d))
    return GridMeasure(tuple(atoms), nu.grid, np.zeros(nu.grid.shape))


def pushforward_measure(f: Endomorphism, nu: GridMeasure) -> GridMeasure:
    """f_* on atomic measures: atoms move to their images, mass preserved."""
    atoms = [(f.map.apply_point(p), w) for p, w in nu.atoms]
    if np.any(nu.density):
        raise NotImplementedError("pushforward_measure transports atoms only")
    return GridMeasure(tuple(atoms), nu.grid, np.zeros(nu.grid.shape),
                       exterior=nu.exterior)


# ---------------------------------------------------------------------------
# Green currents for endomorphisms
# ---------------------------------------------------------------------------

def _green_potential_values(f: Endomorphism, grid: ChartGrid, n: int):
    """g_n = sum_{j<n} d^{-j-1} h o f^j on the grid, plus the tail sup."""
    pts = grid.points()
    if f.k == 1:
        z = np.asarray(pts, dtype=complex)
        coords = [np.ones_like(z), z]
    else:
        z, w = pts
        one = np.ones(grid.shape, dtype=complex)
        coords = [one, z + 0 * one, w + 0 * one]
    nrm = np.sqrt(sum(np.abs(c) ** 2 for c in coords))
    coords = [c / nrm for c in coords]
    g = np.zeros(grid.shape)
    d = f.d
    last_term = np.zeros(grid.shape)
    for j in range(n):
        coords, lognrm = f.homogeneous_step(coords)
        # h(f^j x) for unit-norm input is just log ||F|| at that point
        last_term = lognrm / d ** (j + 1)
        g = g + last_term
    return g, float(np.max(np.abs(last_term)))


def green_current_endo(f: Endomorphism, n: int = 30,
                       grid: ChartGrid = None) -> GreenCurrent:
    """The Green (1,1)-current T = omega + dd^c g with g the orbit sum.

    residual = sup |g_n - g_{n-1}| (geometric with ratio 1/d); the limit
    satisfies the fixed point g = (g o f + h)/d, whose defect at level n is
    d^{-n-1} sup |h o f^n| and is reported through the residual.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if grid is None:
        grid = ChartGrid(k=f.k, center=(0,) * f.k, radius=4.0,
                         resolution=1024 if f.k == 1 else 48)
    g, tail = _green_potential_values(f, grid, n)
    pot = QuasiPotential(grid, g, (), mean=0.0)
    pot = replace(pot, mean=pot.chart_mean())
    return GreenCurrent(Current11(pot, "green"), "endo-T", n, tail)


def invariance_defect(f: Endomorphism, green: GreenCurrent,
                      sample_points=None) -> float:
    """sup |(g o f + h)/d - g| at sample chart points, g from direct orbits."""
    grid = green.current.grid
    n = green.iterates
    if sample_points is None:
        t = np.linspace(-0.8 * grid.radius, 0.8 * grid.radius, 48)
        sample_points = t[:, None] + 1j * t[None, :] if f.k == 1 else \
            (t[:, None] + 0.3j, 0.2 + 1j * t[None, :])
    def g_at(pts):
        if f.k == 1:
            z = np.asarray(pts, dtype=complex)
            coords = [np.ones_like(z), z]
        else:
            z, w = pts
            one = np.ones(np.broadcast_shapes(np.shape(z), np.shape(w)),
                          dtype=complex)
            coords = [one, z + 0 * one, w + 0 * one]
        nrm = np.sqrt(sum(np.abs(c) ** 2 for c in coords))
        coords = [c / nrm for c in coords]
        g = np.zeros(coords[0].shape)
        for j in range(n):
            coords, lognrm = f.homogeneous_step(coords)
            g = g + lognrm / f.d ** (j + 1)
        return g
    g_here = g_at(sample_points)
    f_pts = f.map.apply_chart(sample_points)
    g_there = g_at(f_pts)
    h_vals = f.corrector(sample_points)
    return float(np.max(np.abs((g_there + h_vals) / f.d - g_here)))


# ---------------------------------------------------------------------------
# equidistribution for endomorphisms
# ---------------------------------------------------------------------------

def equidistribution_endo(f: Endomorphism, S0, N: int = 12,
                          alpha: float = 1.0, grid: ChartGrid = None,
                          noise_floor: float = 1e-10) -> DecayFit:
    """dist_alpha(L^n S0, T) for n = 0..N with a log-linear decay fit.

    S0 may be a Current11 (potential-level iteration) or an atomic P^1
    GridMeasure (preimage-cloud iteration, the Brolin cross-check).
    """
    if N > 25:
        raise ValueError("N <= 25 (iterate potentials grow past the grid)")
    if isinstance(S0, Current11):
        grid = grid or S0.grid
    else:
        grid = grid or S0.grid
    n_green = max(25, N + 8)
    green = green_current_endo(f, n=n_green, grid=grid)
    target = trace_measure(green.current)
    panel = default_panel(grid.k, alpha)
    records = []
    cur = S0
    for n in range(N + 1):
        nu = cur if isinstance(cur, GridMeasure) else trace_measure(cur)
        dist = dist_alpha(nu, target, alpha, panel)
        records.append(ExperimentRecord(n, dist, metadata={"alpha": alpha}))
        if n < N:
            cur = pullback_measure(f, cur) if isinstance(cur, GridMeasure) \
                else pullback(f, cur)
    return fit_decay(records, noise_floor=noise_floor)


def dynamical_super_potential(f: Endomorphism, S: Current11,
                              green: GreenCurrent, panel=None) -> dict:
    """V_S = U_S - U_T - c_S with c_S = U_S(T) - U_T(T) (anchor T at k=1).

    Evaluates V on a panel of dual measures, checks the normalization
    V_S(anchor) = 0, and reports the functional-equation residual
    |V_{L(S)}(R) - d^-1 V_S(Lambda(R))| over atomic panel members.
    """
    if f.k != 1:
        raise NotImplementedError(
            "the dynamical super-potential pipeline anchors at k = 1")
    T = green.current
    anchor = trace_measure(T)

    def V(current, R):
        us = super_potential(current, R)
        ut = super_potential(T, R)
        if not (us.is_finite and ut.is_finite):
            return NEG_INFINITY_FLOOR
        c_s = float(super_potential(current, anchor)) \
            - float(super_potential(T, anchor))
        return float(us) - float(ut) - c_s

    grid = T.grid
    if panel is None:
        rng = np.random.default_rng(3)
        panel = [dirac_measure(complex(a, b), grid)
                 for a, b in rng.uniform(-1.2, 1.2, (10, 2))]
    anchor_val = V(S, anchor)
    ls = pullback(f, S)
    residuals = []
    values = []
    for R in panel:
        values.append(V(S, R))
        lhs = V(ls, R)
        rhs = V(S, pushforward_measure(f, R)) / f.d
        residuals.append(abs(lhs - rhs))
    return {
        "anchor_value": anchor_val,
        "values": values,
        "functional_residuals": residuals,
        "max_residual": float(max(residuals)) if residuals else 0.0,
    }


# ---------------------------------------------------------------------------
# Henon dynamics
# ---------------------------------------------------------------------------

def henon_green(f: RegularAutomorphism, direction: str = "+",
                grid: ChartGrid = None, n: int = 40) -> GreenCurrent:
    """T_+/- = omega + dd^c(G_+/- - u0) from the escape-rate iteration.

    The stored potential is G - log sqrt(1 + ||x||^2), a bounded corrector
    away from the indeterminacy point, so chart quadratures converge.
    """
    if direction not in ("+", "-"):
        raise ValueError("direction is '+' or '-'")
    if grid is None:
        grid = ChartGrid(k=2, center=(0, 0), radius=3.0, resolution=48)
    pts = grid.points()
    G = f.green_values(pts, direction, n)
    z, w = pts
    u0 = 0.5 * np.log1p(np.abs(z) ** 2 + np.abs(w) ** 2) + np.zeros(grid.shape)
    pot = QuasiPotential(grid, G - u0, (), mean=0.0)
    pot = replace(pot, mean=pot.chart_mean())
    d = f.d_plus if direction == "+" else f.d_minus
    # fixed-point residual sup |G o f - d G| on a sample box, by direct
    # iteration at x and f(x)
    t = np.linspace(-1.5, 1.5, 24)
    sample = (t[:, None] + 0.21j, 0.13 + 1j * t[None, :])
    g_here = f.green_values(sample, direction, n)
    fwd = f.apply(sample, inverse=(direction == "-"))
    g_there = f.green_values(fwd, direction, n)
    residual = float(np.max(np.abs(g_there - d * g_here)))
    tag = "henon-T+" if direction == "+" else "henon-T-"
    return GreenCurrent(Current11(pot, "green"), tag, n, residual)


def henon_equilibrium(f: RegularAutomorphism, grid: ChartGrid = None,
                      n: int = 40) -> GreenCurrent:
    """mu = T_+ ^ T_- through the wedge machinery; supported on the
    boundary of K = K_+ cap K_-."""
    from .intersect import wedge
    if grid is None:
        grid = ChartGrid(k=2, center=(0, 0), radius=2.5, resolution=48)
    t_plus = henon_green(f, "+", grid, n)
    t_minus = henon_green(f, "-", grid, n)
    result = wedge(t_plus.current, t_minus.current, window=grid)
    residual = max(t_plus.residual, t_minus.residual)
    return GreenCurrent(result.product, "mu", n, residual)


def henon_truncated_current(f: RegularAutomorphism, seed_line,
                            pre_iterations: int = 6,
                            grid: ChartGrid = None,
                            theta: float = 0.05, samples: int = 32,
                            seed: int = 0) -> Current11:
    """A mass-1 current carried by {G_+ <= eps}: a regularized line pulled
    back m times (pull-backs contract supports into the basin, G_+ scale
    d_+^-m); the operational form of truncating and reclosing a piece of
    curve near K_+."""
    from .currents import DivisorCurrent, regularize
    if grid is None:
        grid = ChartGrid(k=2, center=(0, 0), radius=2.5, resolution=48)
    line = DivisorCurrent(seed_line).current(grid)
    S = regularize(line, theta, samples=samples, seed=seed)
    for _ in range(pre_iterations):
        S = henon_pullback(f, S)
    return S


def henon_pullback(f: RegularAutomorphism, S: Current11) -> Current11:
    """d_+^-1 f^*(S) at the potential level in the C^2 chart.

    Ledger entries of S are realized on the grid through their values at
    the image points (cell-scale smoothed): composing the polynomials
    exactly would double their degree at every step.
    """
    pot = S.potential
    grid = pot.grid
    pts = grid.points()
    d = f.d_plus
    fz = f.apply(pts)
    u_of = np.asarray(pot.eval_regular(fz), dtype=float)
    for s in pot.singular:
        u_of = u_of + np.asarray(
            s.chart_values(fz, 2, smoothing=0.75 * grid.spacing), dtype=float)
    z, w = pts
    one = np.ones(grid.shape, dtype=complex)
    coords = (one, z + 0 * one, w + 0 * one)
    vals = [p.evaluate(coords) for p in f.forward.components]
    nrm2 = sum(np.abs(v) ** 2 for v in vals)
    lognorm = 0.5 * np.log1p(np.abs(z) ** 2 + np.abs(w) ** 2) \
        + np.zeros(grid.shape)
    h_vals = 0.5 * np.log(nrm2) - d * lognorm
    new_vals = (u_of + h_vals) / d
    out = QuasiPotential(grid, np.asarray(new_vals, dtype=float), (), mean=0.0)
    out = replace(out, mean=out.chart_mean())
    return Current11(out, "pullback")


def henon_support_fraction(f: RegularAutomorphism, S: Current11,
                           level: float = 0.1, n: int = 40) -> float:
    """Fraction of the trace mass of S sitting in {G_+ <= level}."""
    nu = trace_measure(S).deposited()
    G = f.green_values(nu.grid.points(), "+", n)
    inside = G <= level
    total = nu.window_mass()
    if total <= 0:
        return 0.0
    return float(np.sum(nu.density[inside]) * nu.grid.cell_volume / total)


def henon_uniqueness_experiment(f: RegularAutomorphism, family, N: int = 8,
                                level: float = 0.1, alpha: float = 2.0,
                                leak_tolerance: float = 0.01) -> dict:
    """Contraction of normalized pull-back iterates toward T_+.

    Every family member must carry >= 99 percent of its trace mass in
    {G_+ <= level}; the panel distances to T_+ and between members must
    decrease along n = 0..N.
    """
    if not family:
        raise ValueError("need at least one current in the family")
    grid = family[0].grid
    for j, S in enumerate(family):
        frac = henon_support_fraction(f, S, level)
        if frac < 1.0 - leak_tolerance:
            raise ValueError(
                f"family member {j} leaks {1 - frac:.1%} of its mass outside "
                f"{{G+ <= {level}}}; rejected")
    t_plus = henon_green(f, "+", grid).current
    target = trace_measure(t_plus)
    panel = default_panel(2, alpha)
    iterates = [list(family)]
    for _ in range(N):
        iterates.append([henon_pullback(f, S) for S in iterates[-1]])
    dists_to_t = []
    dists_pair = []
    for n in range(N + 1):
        row = [dist_alpha(trace_measure(S), target, alpha, panel)
               for S in iterates[n]]
        dists_to_t.append(row)
        if len(family) >= 2:
            dists_pair.append(dist_alpha(trace_measure(iterates[n][0]),
                                         trace_measure(iterates[n][1]),
                                         alpha, panel))
    to_t = np.array(dists_to_t)
    decreasing_t = bool(np.all(to_t[1:] <= to_t[:-1] + 1e-12))
    decreasing_pair = bool(all(b <= a + 1e-12 for a, b in
                               zip(dists_pair, dists_pair[1:]))) \
        if dists_pair else True
    return {
        "distances_to_green": to_t.tolist(),
        "pair_distances": dists_pair,
        "strictly_decreasing_to_green": decreasing_t,
        "strictly_decreasing_pairwise": decreasing_pair,
        "passed": decreasing_t and decreasing_pair,
    }
