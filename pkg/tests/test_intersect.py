import numpy as np
import pytest

from pluripot.currents import (Current11, DivisorCurrent, QuasiPotential,
                               current_from_grid_values, mass, omega_current,
                               regularize, trace_measure)
from pluripot.geom import ChartGrid, fs_density
from pluripot.intersect import (WedgeResult, pair_potential_line, wedge,
                                wedge_laws_check, wedgeable)
from pluripot.polymap import ExactComplex, HomogeneousPolynomial


def p2_grid(radius=1.5, resolution=24, center=(0, 0)):
    return ChartGrid(k=2, center=center, radius=radius, resolution=resolution)


def line_poly(a, b, c):
    out = HomogeneousPolynomial.zero(3, 1)
    for i, coef in enumerate((a, b, c)):
        if coef:
            out = out + HomogeneousPolynomial.variable(i, 3) * ExactComplex.of(coef)
    return out


def line_current(a, b, c, grid):
    return DivisorCurrent(line_poly(a, b, c)).current(grid)


def torus_current(grid, tau):
    """Potential log max(1, |z|, |w|) relative to omega, with the kinks
    mollified at scale tau by a soft max (log-sum-exp stays psh)."""
    z, w = grid.points()
    a = np.log(np.abs(z))
    b = np.log(np.abs(w))
    u = 0.5 * tau * np.logaddexp(0.0, np.logaddexp(2 * a / tau, 2 * b / tau))
    u = u + np.zeros(grid.shape)
    u0 = 0.5 * np.log1p(np.abs(z) ** 2 + np.abs(w) ** 2) + np.zeros(grid.shape)
    return current_from_grid_values(grid, u - u0, provenance="smooth")


def blob_current(grid, center, sigma, weight=1.0):
    z, w = grid.points()
    s2 = np.abs(z - center[0]) ** 2 + np.abs(w - center[1]) ** 2
    g = weight * (0.5 * np.log(sigma ** 2 + s2)
                  - 0.5 * np.log1p(np.abs(z) ** 2 + np.abs(w) ** 2))
    return current_from_grid_values(grid, g + np.zeros(grid.shape))


class TestWedgeable:
    def test_omega_pair(self):
        grid = p2_grid(resolution=16)
        flag, value = wedgeable(omega_current(grid), omega_current(grid))
        assert flag
        assert value == pytest.approx(0.0, abs=1e-9)

    def test_distinct_lines(self):
        grid = p2_grid(resolution=16)
        L1 = line_current(0, 1, -1, grid)
        L2 = line_current(0.2, 1, 1, grid)
        flag, value = wedgeable(L1, L2)
        assert flag and np.isfinite(value)
        # 1-d oracle: log|t| is integrable along a transverse line
        assert value < 0

    def test_same_line_not_wedgeable(self):
        grid = p2_grid(resolution=16)
        L = line_current(0, 1, -1, grid)
        flag, value = wedgeable(L, L)
        assert not flag
        from pluripot.currents import NEG_INFINITY_FLOOR
        assert value == NEG_INFINITY_FLOOR

    def test_regularized_factor_stays_wedgeable(self):
        grid = p2_grid(resolution=16)
        L1 = line_current(0, 1, -1, grid)
        L2 = line_current(0.2, 1, 1, grid)
        R1 = regularize(L1, 0.05, samples=32, seed=0)
        flag, _ = wedgeable(R1, L2)
        assert flag


class TestWedge:
    def test_omega_omega_is_trace(self):
        grid = p2_grid(radius=2.0, resolution=16)
        result = wedge(omega_current(grid), omega_current(grid))
        direct = trace_measure(omega_current(grid))
        assert np.allclose(result.product.density, direct.density)
        assert result.diagnostics["path"] == "omega-contraction"
        assert result.mass == pytest.approx(1.0, abs=1e-3)

    def test_lines_give_intersection_atom(self):
        grid = p2_grid(resolution=24)
        L1 = line_current(0, 1, -1, grid)          # z = w
        L2 = line_current(-0.4, 1, 1, grid)        # z + w = 0.4
        result = wedge(L1, L2, seed=3)
        assert result.mass == pytest.approx(1.0, abs=1e-12)
        # true intersection: z = w, z + w = 0.4 -> (0.2, 0.2)
        nu = result.product.deposited()
        z, w = nu.grid.points()
        d2 = np.abs(z - 0.2) ** 2 + np.abs(w - 0.2) ** 2 + np.zeros(nu.grid.shape)
        near = d2 <= (3 * nu.grid.spacing) ** 2
        frac = np.sum(nu.density[near]) * nu.grid.cell_volume / result.mass
        assert frac >= 0.95
        assert result.diagnostics["path"] == "exact-line-atoms"

    def test_atoms_report(self):
        grid = p2_grid(resolution=24)
        L1 = line_current(0, 1, -1, grid)
        L2 = line_current(-0.4, 1, 1, grid)
        atoms = wedge(L1, L2, seed=3).atoms_report()
        assert len(atoms) >= 1
        top = atoms[0]
        assert top[1] == pytest.approx(1.0, abs=5e-2)
        chart = top[0].to_chart()
        assert abs(chart[0] - 0.2) < 0.05 and abs(chart[1] - 0.2) < 0.05

    def test_torus_monge_ampere(self):
        # build the factor on the assembly window itself: interpolating a
        # kinked potential onto another grid garbles its Hessinas.  Mass
        # tolerance 2e-2 here: the kink-adapted mollification leaves a
        # percent-level wall residue at desk resolution.
        grid = p2_grid(radius=1.3, resolution=32)
        T = torus_current(grid, 1.5 * grid.spacing)
        result = wedge(T, T, window=grid)
        assert result.diagnostics["path"] == "hessian-direct"
        assert result.mass == pytest.approx(1.0, abs=2e-2)
        z, w = grid.points()
        h = grid.spacing
        shell = (np.abs(np.abs(z) - 1.0) < 3 * h) \
            & (np.abs(np.abs(w) - 1.0) < 3 * h)
        frac = np.sum(result.product.density[shell]) * grid.cell_volume \
            / result.mass
        assert frac >= 0.9

    def test_bilinearity_nodewise(self):
        grid = p2_grid(radius=2.0, resolution=16)
        A = blob_current(grid, (0.2, 0.0), 0.6, weight=0.8)
        B = blob_current(grid, (-0.3, 0.1), 0.7, weight=0.6)
        S = blob_current(grid, (0.0, -0.2), 0.5, weight=0.7)
        t = 0.35
        mix_pot = QuasiPotential(
            grid, t * A.potential.values + (1 - t) * B.potential.values, (),
            t * A.potential.mean + (1 - t) * B.potential.mean)
        mix = Current11(mix_pot)
        win = p2_grid(radius=1.2, resolution=16)
        w_mix = wedge(mix, S, window=win)
        w_a = wedge(A, S, window=win)
        w_b = wedge(B, S, window=win)
        combo = t * w_a.product.density + (1 - t) * w_b.product.density
        assert np.allclose(w_mix.product.density, combo, atol=1e-6)

    def test_not_wedgeable_error_carries_diagnostic(self):
        grid = p2_grid(resolution=16)
        L = line_current(0, 1, -1, grid)
        with pytest.raises(ValueError, match="integrability"):
            wedge(L, L)

    def test_mass_conservation_smooth(self):
        # resolved + contained regime: blob scale ~ 3 cells, window holds
        # the structure, ambient omega^2 completes the tail
        grid = p2_grid(radius=8.0, resolution=40)
        A = blob_current(grid, (0.3, -0.1), 1.2, weight=0.9)
        B = blob_current(grid, (-0.2, 0.2), 1.3, weight=0.7)
        result = wedge(A, B, window=grid)
        assert result.diagnostics["ambient_edge"]
        assert result.mass == pytest.approx(1.0, abs=1e-2)


class TestWedgeLaws:
    def test_symmetry_and_omega(self):
        grid = p2_grid(radius=2.0, resolution=16)
        rng = np.random.default_rng(5)
        pairs = []
        for _ in range(4):
            A = blob_current(grid, rng.uniform(-0.3, 0.3, 2), 0.5 + 0.3 * rng.uniform(),
                             weight=0.5 + 0.4 * rng.uniform())
            B = blob_current(grid, rng.uniform(-0.3, 0.3, 2), 0.5 + 0.3 * rng.uniform(),
                             weight=0.5 + 0.4 * rng.uniform())
            pairs.append((A, B))
        report = wedge_laws_check(pairs, resolution=16)
        assert report["symmetry_ok"]
        assert report["max_symmetry_gap"] <= 2e-2
        assert report["omega_contraction_exact"]

    def test_line_pair_theta_trend(self):
        grid = p2_grid(resolution=24)
        L1 = line_current(0, 1, -1, grid)
        L2 = line_current(-0.4, 1, 1, grid)
        report = wedge_laws_check([(L1, L2)], resolution=24, seed=2)
        assert len(report["theta_trend"]) == 3
        assert report["theta_trend_decreasing"]
