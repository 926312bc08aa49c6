"""Super-potential evaluation, its laws, and current capacity.

The super-potential of mean m of a (1,1)-current S acts on dual-degree
mass-1 currents (measures here, since k <= 2) by pairing the mean-m
quasi-potential of the (1,1) side against the measure side.  All
evaluations reduce to the (1,1)-potential side; no higher-bidegree
quasi-potentials are ever built.  The value -infinity is represented by a
floor at -1e6 with an explicit absorbing marker.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .currents import (Current11, GridMeasure, NEG_INFINITY_FLOOR,
                       QuasiPotential, SingularPart, dirac_measure,
                       green_potential, mass, regularize, trace_measure)
from .geom import ChartGrid, ProjectivePoint, fs_density
from .polymap import HomogeneousPolynomial

__all__ = [
    "SuperPotentialValue",
    "CapacityEstimate",
    "super_potential",
    "theta_profile",
    "hartogs_check",
    "log_bound_check",
    "capacity_estimate",
    "witness_family",
    "pair_potential_measure",
]


@dataclass(frozen=True)
class SuperPotentialValue:
    """One evaluated super-potential pairing."""

    value: float
    mean: float
    method: str = "direct-pairing"
    theta_trace: tuple = ()
    is_finite: bool = True

    def __post_init__(self):
        if self.value <= NEG_INFINITY_FLOOR:
            object.__setattr__(self, "value", NEG_INFINITY_FLOOR)
            object.__setattr__(self, "is_finite", False)

    def __float__(self):
        return self.value

    def __add__(self, other):
        """Absorbing arithmetic: -infinity + anything = -infinity."""
        o = float(other)
        if not self.is_finite or o <= NEG_INFINITY_FLOOR:
            return SuperPotentialValue(NEG_INFINITY_FLOOR, self.mean, self.method)
        return SuperPotentialValue(self.value + o, self.mean, self.method)


def pair_potential_measure(u: QuasiPotential, nu: GridMeasure) -> float:
    """<u, nu> with exact singular parts; returns the floor on divergence.

    Atoms sitting on a singular zero set produce the -infinity floor; the
    density part integrates the raw (unsmoothed) potential samples, whose
    log singularities are integrable when finite.
    """
    total = 0.0
    if np.any(nu.density):
        vals = u.eval(nu.grid.points())
        vals = np.maximum(vals, NEG_INFINITY_FLOOR)
        total += float(np.sum(vals * nu.density) * nu.grid.cell_volume)
    if nu.exterior:
        ginf, _, _, _ = u._ring_stats()
        total += nu.exterior * ginf
    for p, w in nu.atoms:
        v = u.eval_point(p)
        if v <= NEG_INFINITY_FLOOR:
            return NEG_INFINITY_FLOOR
        total += w * v
    return max(total, NEG_INFINITY_FLOOR)


def _as_measure(obj) -> GridMeasure:
    return obj if isinstance(obj, GridMeasure) else trace_measure(obj)


def super_potential(S, R, mean: float = 0.0) -> SuperPotentialValue:
    """U_S(R) of mean `mean`: pair the (1,1)-side potential with the measure.

    Exactly one side must carry a quasi-potential (a Current11); by the
    symmetry of the pairing the roles of S and R may be swapped, which is
    how measure-first calls are evaluated.  The pair must have total
    bidegree (k+1, k+1): Current11 x GridMeasure, or two P^1 currents.
    """
    if isinstance(S, Current11):
        current, other = S, R
    elif isinstance(R, Current11):
        current, other = R, S
    else:
        raise TypeError("one argument must be a Current11")
    if isinstance(other, Current11):
        if current.k != 1 or other.k != 1:
            raise TypeError(
                "two (1,1)-currents only pair on P^1 (bidegree mismatch)")
        if other.grid == current.grid:
            return super_potential_pair(current, other, mean)
        other = trace_measure(other)
    if not isinstance(other, GridMeasure):
        raise TypeError("the dual side must be a GridMeasure or P^1 current")
    if other.k != current.k:
        raise TypeError("bidegree mismatch: different ambient spaces")
    u = current.potential
    raw = pair_potential_measure(u, other)
    if raw <= NEG_INFINITY_FLOOR:
        return SuperPotentialValue(NEG_INFINITY_FLOOR, mean)
    total_mass = other.computed_mass()
    value = raw + (mean - u.mean) * total_mass
    return SuperPotentialValue(value, mean)


def super_potential_pair(S: Current11, R: Current11,
                         mean: float = 0.0) -> SuperPotentialValue:
    """U_S(R) on P^1 through both potentials; symmetric by construction.

    <u_S, omega + dd^c u_R> = b_R m + atom terms + <u_S, dd^c g_R>: the
    last integral uses the self-adjoint discrete Laplacian, so swapping S
    and R changes the value only by boundary-flux truncation, not by the
    trace-window bookkeeping of the generic measure route.
    """
    if S.k != 1 or R.k != 1:
        raise TypeError("the two-potential route is a P^1 pairing")
    u = S.potential
    grid = u.grid
    pot_r = R.potential
    if pot_r.grid != grid:
        return super_potential(S, trace_measure(R), mean)
    u_m = u.values + (mean - u.mean)
    u_shift = QuasiPotential(grid, u_m, u.singular, mean)
    value = pot_r.background_coeff * mean
    # atoms of R from its singular ledger, evaluated exactly against u
    for s in pot_r.singular:
        for root, w in s.chart_roots():
            p = ProjectivePoint([0.0, 1.0]) if root is None else \
                ProjectivePoint.from_chart(root)
            v = u_shift.eval_point(p)
            if v <= NEG_INFINITY_FLOOR:
                return SuperPotentialValue(NEG_INFINITY_FLOOR, mean)
            value += w * v
    h = grid.spacing
    lap = (pot_r.values[2:, 1:-1] + pot_r.values[:-2, 1:-1]
           + pot_r.values[1:-1, 2:] + pot_r.values[1:-1, :-2]
           - 4.0 * pot_r.values[1:-1, 1:-1]) / (h * h)
    u_full = u_m[1:-1, 1:-1].copy()
    for s in u.singular:
        u_full = u_full + np.asarray(
            s.chart_values(grid.points(), 1))[1:-1, 1:-1]
    u_full = np.maximum(u_full, NEG_INFINITY_FLOOR)
    # <u, dd^c g_R> over P^1 is shift-invariant; anchoring u at its chart-
    # boundary value makes the window truncation O(tail * flux) instead of
    # O(const * flux), which is what keeps the pairing symmetric
    ginf, _, _, _ = u._ring_stats()
    u_edge = ginf + (mean - u.mean)
    for s in u.singular:
        # ledger parts tend to their own boundary-ring mean
        ring = np.asarray(s.chart_values(grid.points(), 1))
        u_edge += float(np.mean(ring[0, :]) + np.mean(ring[-1, :])) / 2.0
    value += float(np.sum((u_full - u_edge) * lap)
                   * grid.cell_volume / (2.0 * np.pi))
    return SuperPotentialValue(max(value, NEG_INFINITY_FLOOR), mean)


def theta_profile(S, R, thetas, samples: int = 32, seed: int = 0,
                  mean: float = 0.0):
    """U_S(R_theta) along decreasing theta, with the subharmonic correction.

    Returns (profile, fitted A >= 0): profile is a list of (theta, value);
    value + A theta^2 must be non-increasing within tolerance for the
    fitted A (the correction constant exists but is not explicit).
    """
    thetas = list(thetas)
    if any(t2 >= t1 for t1, t2 in zip(thetas, thetas[1:])):
        raise ValueError("thetas must be strictly decreasing")
    nu = _as_measure(R)
    base = Current11(green_potential(nu), "smooth") if nu.k == 1 else None
    profile = []
    for j, th in enumerate(thetas):
        if isinstance(R, Current11):
            R_theta = regularize(R, th, samples=samples, seed=seed + j)
            val = super_potential(S, R_theta, mean=mean)
        else:
            # regularize the measure through its P^1 potential
            R_theta = regularize(base, th, samples=samples, seed=seed + j)
            val = super_potential(S, trace_measure(R_theta), mean=mean)
        profile.append((th, val.value))
    th2 = np.array([t * t for t, _ in profile])
    vals = np.array([v for _, v in profile])
    finite = vals > NEG_INFINITY_FLOOR
    if finite.sum() >= 2:
        slope = np.polyfit(th2[finite], vals[finite], 1)[0]
        a_fit = max(0.0, float(slope))
    else:
        a_fit = 0.0
    return profile, a_fit


def profile_monotone(profile, a_fit: float, tol: float = 2e-2) -> bool:
    """Check that value + A theta^2 is non-increasing as theta decreases."""
    corrected = [v + a_fit * t * t for t, v in profile]
    return all(lo <= hi + tol for hi, lo in zip(corrected, corrected[1:]))


def hartogs_check(sequence, limit, panel, tol: float = 2e-2) -> dict:
    """H-convergence probe: U_{S_n} >= U_S - c_n with fitted c_n -> 0.

    `panel` is a list of dual-side measures/currents.  Returns per-element
    pass flags, the fitted constants c_n, and the limsup check.
    """
    if len(sequence) < 3:
        raise ValueError("need at least 3 currents in the sequence")
    lim_vals = np.array([float(super_potential(limit, r)) for r in panel])
    seq_vals = np.array([[float(super_potential(s, r)) for r in panel]
                         for s in sequence])
    c_n = np.maximum(0.0, (lim_vals[None, :] - seq_vals).max(axis=1))
    limsup_ok = seq_vals[-1] <= lim_vals + max(tol, c_n[-1] + tol)
    per_element = (seq_vals[-1] + c_n[-1] >= lim_vals - tol) & limsup_ok
    return {
        "c_n": c_n.tolist(),
        "c_final": float(c_n[-1]),
        "pass_per_element": per_element.tolist(),
        "passed": bool(per_element.all() and c_n[-1] <= max(tol, c_n[0])),
    }


def log_bound_check(S: Current11, family, sup_norms=None) -> dict:
    """Ratios |U_S(R)| / (1 + log+ ||R||_inf) over a family of bounded forms.

    Returns the fitted constant (max ratio) and a growth-trend verdict:
    the ratios must not grow systematically with log ||R||_inf.
    """
    ratios = []
    logsups = []
    for j, R in enumerate(family):
        nu = _as_measure(R)
        sup = sup_norms[j] if sup_norms is not None else \
            float(np.max(nu.deposited().density))
        val = abs(float(super_potential(S, nu)))
        ratios.append(val / (1.0 + max(0.0, np.log(sup))))
        logsups.append(max(0.0, np.log(sup)))
    ratios = np.array(ratios)
    logsups = np.array(logsups)
    slope = float(np.polyfit(logsups, ratios, 1)[0]) if len(family) > 2 else 0.0
    return {
        "fitted_c": float(ratios.max()),
        "ratios": ratios.tolist(),
        "log_sup_norms": logsups.tolist(),
        "trend_slope": slope,
        "bounded": bool(slope <= 0.05 * (1.0 + ratios.max())),
    }


@dataclass(frozen=True)
class CapacityEstimate:
    """Bracketing of cap(R) = inf exp(sup U) over normalized witnesses."""

    lower: float
    upper: float
    witness: str

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper + 1e-12):
            raise ValueError("need 0 <= lower <= upper")
        if self.upper > 1.0 + 1e-9:
            raise ValueError("upper capacity bound cannot exceed 1")


def witness_family(grid: ChartGrid, size: int, seed: int = 0):
    """Normalized quasi-psh witnesses: divisor potentials, regularized atom
    potentials and convex mixes, each shifted to max = 0 on the grid.

    Returns a list of (label, QuasiPotential-like Current11).  Sizes follow
    the 32 + 32 + 16 split scaled to `size`.
    """
    if grid.k != 1:
        raise NotImplementedError("witness families are built on P^1")
    out = []

    def normalized(pot, label):
        vals = pot.eval(grid.points())
        top = float(np.max(vals))
        shifted = QuasiPotential(grid, pot.values - top, pot.singular,
                                 mean=pot.mean - top)
        out.append((label, shifted))

    # one independent stream per slot so families with a common seed nest:
    # min over a larger family is then monotone in the size
    for j in range(size):
        rng = np.random.default_rng(np.random.SeedSequence([seed, j]))
        kind = j % 5
        if kind in (0, 1):
            deg = int(rng.integers(1, 4))
            coeffs = {}
            for a in range(deg + 1):
                coeffs[(a, deg - a)] = complex(rng.standard_normal()
                                               + 1j * rng.standard_normal())
            poly = HomogeneousPolynomial(deg, 2, coeffs)
            pot = QuasiPotential(grid, np.zeros(grid.shape),
                                 (SingularPart(1.0, poly),), 0.0)
            normalized(pot, f"divisor-deg{deg}-{j}")
        elif kind in (2, 3):
            a = 0.3 * grid.radius * (rng.standard_normal()
                                     + 1j * rng.standard_normal())
            pot = green_potential(dirac_measure(a, grid))
            normalized(pot, f"atom-{j}")
        else:
            t = rng.uniform(0.2, 0.8)
            i1, i2 = rng.integers(0, len(out), 2)
            p1, p2 = out[i1][1], out[i2][1]
            scaled = tuple(SingularPart(s.weight * t, s.poly)
                           for s in p1.singular) \
                + tuple(SingularPart(s.weight * (1 - t), s.poly)
                        for s in p2.singular)
            mixed = QuasiPotential(
                grid, t * p1.values + (1 - t) * p2.values, scaled,
                t * p1.mean + (1 - t) * p2.mean)
            normalized(mixed, f"mix-{j}")
    return out


def capacity_estimate(R, family_size: int = 80, seed: int = 0,
                      grid: ChartGrid = None) -> CapacityEstimate:
    """cap(R) bracketed over a randomized normalized witness family.

    upper = min over witnesses of exp(U(R)) with max-0 normalization;
    lower = exp(-c_fit + min over witnesses of the mean-0 value), where
    c_fit estimates the universal constant sup max U over mean-0
    super-potentials (fitted from the family, not asserted).
    """
    nu = _as_measure(R)
    grid = grid or nu.grid
    fam = witness_family(grid, family_size, seed)
    best_val = np.inf
    best_label = ""
    mean0_min = np.inf
    c_fit = 0.0
    for label, pot in fam:
        val = pair_potential_measure(pot, nu)
        if val < best_val:
            best_val, best_label = val, label
        c_fit = max(c_fit, -pot.mean)  # max-0 witness: mean-0 max is -mean
        mean0_min = min(mean0_min, val - pot.mean)
    upper = float(np.exp(min(best_val, 0.0)))
    lower = float(np.exp(max(-c_fit + mean0_min, NEG_INFINITY_FLOOR)))
    return CapacityEstimate(min(lower, upper), upper, best_label)
