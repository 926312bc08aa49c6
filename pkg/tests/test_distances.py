import numpy as np
import pytest

from pluripot.currents import (dirac_measure, omega_current, regularize,
                               smoothed_dirac_current, trace_measure)
from pluripot.distances import TestFormPanel, default_panel, dist_alpha
from pluripot.geom import ChartGrid


def p1_grid(radius=4.0, resolution=256):
    return ChartGrid(k=1, center=(0,), radius=radius, resolution=resolution)


class TestPanel:
    def test_build_and_signature(self):
        panel = default_panel(1, 1.0)
        assert panel.signature()[0] == "1"
        assert len(panel.members) >= 60
        assert np.all(panel.norms > 0)

    def test_kinks_only_below_one(self):
        rough = TestFormPanel.build(1, 0.5)
        smooth = TestFormPanel.build(1, 2.0)
        kinds_rough = {m.kind for m in rough.members}
        kinds_smooth = {m.kind for m in smooth.members}
        assert "kink" in kinds_rough
        assert "kink" not in kinds_smooth


class TestDistAlpha:
    def test_zero_on_equal(self):
        grid = p1_grid()
        mu = dirac_measure(0.3, grid)
        assert dist_alpha(mu, mu, 1.0) == 0.0

    def test_symmetry_and_triangle(self):
        grid = p1_grid()
        a = dirac_measure(0.1, grid)
        b = dirac_measure(0.4 + 0.2j, grid)
        c = dirac_measure(-0.3j, grid)
        dab = dist_alpha(a, b, 1.0)
        dba = dist_alpha(b, a, 1.0)
        assert dab == pytest.approx(dba, abs=1e-15)
        assert dist_alpha(a, c, 1.0) <= dab + dist_alpha(b, c, 1.0) + 1e-15

    @pytest.mark.parametrize("alpha,expected", [(0.5, 0.5), (1.0, 1.0), (2.0, 1.0)])
    def test_dirac_separation_scaling(self, alpha, expected):
        # log-log slope of dist(delta_a, delta_b) vs ||a-b|| is min(alpha,1)
        grid = p1_grid()
        seps = np.geomspace(0.02, 0.4, 6)
        a = dirac_measure(0.0, grid)
        dists = [dist_alpha(a, dirac_measure(t * np.exp(0.3j), grid), alpha)
                 for t in seps]
        slope = np.polyfit(np.log(seps), np.log(dists), 1)[0]
        assert slope == pytest.approx(expected, abs=0.1)

    def test_interpolation_inequality(self):
        # dist_2 <= dist_1 <= C dist_2^(1/2) with one fitted C over pairs
        grid = p1_grid()
        rng = np.random.default_rng(0)
        ratios = []
        for _ in range(50):
            a = rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1)
            b = rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1)
            mu, nu = dirac_measure(a, grid), dirac_measure(b, grid)
            d1 = dist_alpha(mu, nu, 1.0)
            d2 = dist_alpha(mu, nu, 2.0)
            assert d2 <= d1 + 1e-12
            if d2 > 0:
                ratios.append(d1 / np.sqrt(d2))
        fitted_c = max(ratios)
        assert np.isfinite(fitted_c) and fitted_c < 50.0

    def test_current_vs_measure_pairing(self):
        grid = p1_grid()
        S = smoothed_dirac_current(grid, 0.0, 0.5, weight=1.0)
        # the current and its own trace measure are at distance zero
        assert dist_alpha(S, trace_measure(S), 1.0) < 1e-12

    def test_incompatible_kinds_raise(self):
        g1 = p1_grid()
        g2 = ChartGrid(k=2, center=(0, 0), radius=1.0, resolution=8)
        with pytest.raises(TypeError):
            dist_alpha(dirac_measure(0.0, g1),
                       dirac_measure([0.0, 0.0], g2), 1.0)

    def test_regularization_converges_in_dist2(self):
        grid = p1_grid()
        S = smoothed_dirac_current(grid, 0.3, 0.6, weight=0.7)
        ds = [dist_alpha(regularize(S, th, 64, seed=5), S, 2.0)
              for th in (0.2, 0.1, 0.05)]
        assert ds[0] > ds[-1]
        assert ds[-1] < 0.05
