import numpy as np
import pytest

from pluripot.currents import (Current11, DivisorCurrent, NEG_INFINITY_FLOOR,
                               QuasiPotential, dirac_measure, mass,
                               omega_current, random_smooth_current,
                               regularize, smoothed_dirac_current,
                               trace_measure)
from pluripot.distances import dist_alpha
from pluripot.geom import ChartGrid, ProjectivePoint
from pluripot.polymap import ExactComplex, HomogeneousPolynomial
from pluripot.superpot import (CapacityEstimate, capacity_estimate,
                               hartogs_check, log_bound_check,
                               profile_monotone, super_potential,
                               theta_profile, witness_family)


def p1_grid(radius=4.0, resolution=256):
    return ChartGrid(k=1, center=(0,), radius=radius, resolution=resolution)


def line_poly(a, b, c):
    out = HomogeneousPolynomial.zero(3, 1)
    for i, coef in enumerate((a, b, c)):
        if coef:
            out = out + HomogeneousPolynomial.variable(i, 3) * ExactComplex.of(coef)
    return out


class TestSuperPotential:
    def test_omega_gives_mean(self):
        grid = p1_grid()
        S = omega_current(grid)
        R = dirac_measure(0.4, grid)
        assert float(super_potential(S, R, mean=0.0)) == pytest.approx(0.0, abs=1e-12)
        # mean law: shifting m shifts the value exactly
        assert float(super_potential(S, R, mean=1.5)) == pytest.approx(1.5, abs=1e-12)

    def test_symmetry_on_smooth_pairs(self):
        grid = p1_grid(resolution=512)
        rng = np.random.default_rng(42)
        for _ in range(20):
            S = random_smooth_current(grid, rng)
            R = random_smooth_current(grid, rng)
            usr = float(super_potential(S, R))
            urs = float(super_potential(R, S))
            assert abs(usr - urs) <= 1e-2 * (1.0 + abs(usr))

    def test_line_against_on_line_dirac_diverges(self):
        grid = ChartGrid(k=2, center=(0, 0), radius=1.5, resolution=16)
        line = DivisorCurrent(line_poly(0, 1, -1)).current(grid)
        on_line = dirac_measure([0.3, 0.3], grid)
        val = super_potential(line, on_line)
        assert not val.is_finite
        assert float(val) == NEG_INFINITY_FLOOR
        # direct divergence oracle: the potential at the point is -inf
        assert line.potential.eval_point(
            ProjectivePoint.from_chart([0.3, 0.3])) == NEG_INFINITY_FLOOR

    def test_measure_first_uses_symmetry(self):
        grid = p1_grid()
        S = smoothed_dirac_current(grid, 0.2, 0.6, weight=0.8)
        R = dirac_measure(0.9, grid)
        # measure-first call reduces to the (1,1)-side potential
        v1 = float(super_potential(R, S))
        v2 = float(super_potential(S, R))
        assert v1 == pytest.approx(v2, abs=1e-12)

    def test_bidegree_mismatch(self):
        g1 = p1_grid(resolution=64)
        g2 = ChartGrid(k=2, center=(0, 0), radius=1.0, resolution=8)
        with pytest.raises(TypeError):
            super_potential(omega_current(g1), dirac_measure([0, 0], g2))
        with pytest.raises(TypeError):
            super_potential(dirac_measure(0, g1), dirac_measure(0.1, g1))

    def test_affinity_exact(self):
        grid = p1_grid()
        rng = np.random.default_rng(1)
        S1 = random_smooth_current(grid, rng)
        S2 = random_smooth_current(grid, rng)
        R = dirac_measure(0.5, grid)
        t = 0.3
        mixed = Current11(QuasiPotential(
            grid, t * S1.potential.values + (1 - t) * S2.potential.values, (),
            t * S1.potential.mean + (1 - t) * S2.potential.mean))
        lhs = float(super_potential(mixed, R))
        rhs = t * float(super_potential(S1, R)) \
            + (1 - t) * float(super_potential(S2, R))
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_upper_bound_mean_plus_constant(self):
        # U_S <= m + c with one fitted c across all tested pairs
        grid = p1_grid()
        rng = np.random.default_rng(7)
        vals = []
        for _ in range(10):
            S = random_smooth_current(grid, rng)
            R = dirac_measure(complex(rng.uniform(-1, 1), rng.uniform(-1, 1)),
                              grid)
            vals.append(float(super_potential(S, R, mean=0.0)))
        c_fit = max(max(vals), 0.0)
        assert c_fit < 5.0  # a single moderate constant

    def test_determination(self):
        # panel-close super-potentials imply dist_2-close currents
        grid = p1_grid(resolution=512)
        rng = np.random.default_rng(3)
        panel = [dirac_measure(c, grid) for c in
                 (0.0, 0.5, -0.5, 0.8j, -0.7j, 0.4 + 0.4j)]
        S = random_smooth_current(grid, rng)
        Sp = regularize(S, 0.01, samples=32, seed=9)
        gap = max(abs(float(super_potential(S, r))
                      - float(super_potential(Sp, r))) for r in panel)
        if gap <= 1e-3:
            assert dist_alpha(S, Sp, 2.0) <= 1e-2


class TestThetaProfile:
    def test_smooth_pair_constant(self):
        grid = p1_grid()
        S = smoothed_dirac_current(grid, 0.1, 0.8, weight=0.6)
        R = smoothed_dirac_current(grid, -0.4, 0.9, weight=0.5)
        profile, a_fit = theta_profile(S, R, [0.2, 0.1, 0.05], samples=48,
                                       seed=2)
        vals = [v for _, v in profile]
        assert max(vals) - min(vals) <= 1e-2
        assert profile_monotone(profile, a_fit)

    def test_limit_matches_direct_pairing(self):
        grid = p1_grid()
        S = smoothed_dirac_current(grid, 0.1, 0.8, weight=0.6)
        R = smoothed_dirac_current(grid, -0.4, 0.9, weight=0.5)
        profile, _ = theta_profile(S, R, [0.1, 0.05, 0.025], samples=64, seed=4)
        direct = float(super_potential(S, R))
        assert profile[-1][1] == pytest.approx(direct, abs=2e-2)

    def test_divisor_against_supported_dirac_decreases(self):
        grid = p1_grid(radius=2.0, resolution=512)
        p = HomogeneousPolynomial(2, 2, {(0, 2): 1, (2, 0): -1})  # z^2 = 1
        S = DivisorCurrent(p).current(grid)
        R = dirac_measure(1.0, grid)  # on the divisor
        profile, a_fit = theta_profile(S, R, [0.4, 0.2, 0.1, 0.05], samples=32,
                                       seed=6)
        vals = [v for _, v in profile]
        assert vals[-1] < vals[0] - 0.5  # marches down toward the floor
        assert profile_monotone(profile, a_fit, tol=0.3)


class TestHartogs:
    def test_regularizations_h_converge(self):
        grid = p1_grid()
        S = smoothed_dirac_current(grid, 0.3, 0.5, weight=0.9)
        seq = [regularize(S, th, samples=48, seed=8) for th in (0.2, 0.1, 0.05)]
        panel = [dirac_measure(c, grid) for c in (0.0, 0.6, -0.5j)]
        report = hartogs_check(seq, S, panel)
        assert report["passed"]

    def test_constant_sequence(self):
        grid = p1_grid()
        S = smoothed_dirac_current(grid, 0.3, 0.5, weight=0.9)
        report = hartogs_check([S, S, S], S,
                               [dirac_measure(0.2, grid)])
        assert report["passed"]
        assert report["c_final"] == pytest.approx(0.0, abs=1e-12)

    def test_drift_to_different_current_fails(self):
        grid = p1_grid(radius=2.0, resolution=512)
        pa = HomogeneousPolynomial(1, 2, {(0, 1): 1, (1, 0): -0.9})  # z = 0.9
        target = DivisorCurrent(pa).current(grid)
        drifting = [regularize(target, th, samples=32, seed=10)
                    for th in (0.2, 0.1, 0.05)]
        other = smoothed_dirac_current(grid, -0.9, 0.2, weight=1.0)
        panel = [dirac_measure(0.9, grid), dirac_measure(-0.9, grid)]
        report = hartogs_check(drifting, other, panel)
        assert not report["passed"]


class TestLogBound:
    def test_bounded_family(self):
        grid = p1_grid()
        S = smoothed_dirac_current(grid, 0.0, 0.7, weight=0.8)
        family = [regularize(Current11(
            __import__("pluripot.currents", fromlist=["green_potential"])
            .green_potential(dirac_measure(0.5, grid)), "smooth"),
            th, samples=32, seed=12 + j)
            for j, th in enumerate((0.4, 0.2, 0.1, 0.05))]
        report = log_bound_check(S, family)
        assert report["bounded"]
        assert np.isfinite(report["fitted_c"])

    def test_omega_ratio_finite(self):
        grid = p1_grid()
        S = smoothed_dirac_current(grid, 0.0, 0.7, weight=0.8)
        report = log_bound_check(S, [omega_current(grid)], sup_norms=[1.0])
        assert np.isfinite(report["fitted_c"])


class TestCapacity:
    def test_omega_capacity_moderate(self):
        grid = p1_grid()
        est = capacity_estimate(trace_measure(omega_current(grid)),
                                family_size=40, seed=0)
        assert 0.1 < est.upper <= 1.0
        assert est.lower <= est.upper

    def test_dirac_upper_decreases_with_family(self):
        grid = p1_grid()
        R = trace_measure(regularize(
            smoothed_dirac_current(grid, 0.25, 0.02, weight=1.0), 0.05,
            samples=32, seed=1))
        uppers = [capacity_estimate(R, family_size=n, seed=2).upper
                  for n in (10, 40, 160)]
        assert uppers[0] >= uppers[1] >= uppers[2]
        assert uppers[2] < uppers[0]

    def test_bounded_forms_power_law_trend(self):
        grid = p1_grid()
        sigmas = (0.4, 0.2, 0.1)  # sup norms double as sigma halves
        logs, logcaps = [], []
        for s in sigmas:
            S = smoothed_dirac_current(grid, 0.0, s, weight=1.0)
            nu = trace_measure(S)
            est = capacity_estimate(nu, family_size=60, seed=3)
            logs.append(np.log(np.max(nu.density)))
            logcaps.append(np.log(max(est.lower, 1e-300)))
        slope = np.polyfit(logs, logcaps, 1)[0]
        # log cap >= c - lambda log||R||: fitted lambda finite, trend linear
        assert np.isfinite(slope)
        resid = np.polyval(np.polyfit(logs, logcaps, 1), logs) - logcaps
        assert np.max(np.abs(resid)) < 1.0

    def test_invariants(self):
        with pytest.raises(ValueError):
            CapacityEstimate(0.5, 0.4, "bad")
        with pytest.raises(ValueError):
            CapacityEstimate(0.5, 1.4, "bad")

    def test_witness_family_normalized(self):
        grid = p1_grid(resolution=128)
        fam = witness_family(grid, 20, seed=4)
        assert len(fam) == 20
        for label, pot in fam:
            vals = pot.eval(grid.points())
            assert np.max(vals) <= 1e-9
