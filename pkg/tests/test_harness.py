import numpy as np
import pytest

from dynbc.errors import DomainError
from dynbc.grid import HalfSpaceGrid
from dynbc.harness import (
    LemmaReport,
    SweepPlan,
    fit_rate,
    run_lemma_suite,
    run_sweep,
)
from dynbc.solver import SolverConfig


class TestFitRate:
    def test_exact_linear_rate(self):
        eps = [0.1, 0.03, 0.01, 0.003]
        slope, _, resid = fit_rate([(e, e) for e in eps])
        assert slope == pytest.approx(1.0, abs=1e-12)
        assert resid == pytest.approx(0.0, abs=1e-12)

    def test_exact_square_root_rate(self):
        eps = [0.1, 0.03, 0.01, 0.003]
        slope, _, resid = fit_rate([(e, np.sqrt(e)) for e in eps])
        assert slope == pytest.approx(0.5, abs=1e-12)
        assert resid == pytest.approx(0.0, abs=1e-12)

    def test_noisy_synthetic_rate(self):
        rng = np.random.default_rng(7)
        eps = np.geomspace(0.1, 1e-3, 6)
        vals = 3.0 * eps**0.75 * (1.0 + 0.01 * rng.uniform(-1, 1, eps.size))
        slope, _, _ = fit_rate(list(zip(eps, vals)))
        assert slope == pytest.approx(0.75, abs=0.02)

    def test_nonpositive_values_excluded(self):
        pts = [(0.1, 1.0), (0.03, 0.5), (0.01, -1.0), (0.003, 0.1)]
        slope, _, _ = fit_rate(pts)  # drops the negative point, 3 remain
        with pytest.raises(DomainError):
            fit_rate([(0.1, 1.0), (0.03, -1.0), (0.01, -1.0), (0.003, 0.1)])

    def test_too_few_points_refused(self):
        with pytest.raises(DomainError):
            fit_rate([(0.1, 1.0), (0.01, 0.1)])


class TestSweepPlan:
    def test_eps_must_decrease(self):
        with pytest.raises(DomainError):
            SweepPlan(eps_values=[0.01, 0.1])
        with pytest.raises(DomainError):
            SweepPlan(eps_values=[0.1, 1.5])

    def test_window_inside_horizon(self):
        with pytest.raises(DomainError):
            SweepPlan(window=(0.4, 0.7), horizon=0.5)


class TestLemmaSuite:
    def test_reports_are_reproducible(self):
        g = HalfSpaceGrid(6.0, 3.0, 33, 17)
        a = run_lemma_suite(g, seed=99)
        b = run_lemma_suite(g, seed=99)
        assert a.to_text() == b.to_text()

    def test_report_shape(self):
        g = HalfSpaceGrid(6.0, 3.0, 33, 17)
        rep = run_lemma_suite(g, seed=99)
        assert isinstance(rep, LemmaReport)
        assert len(rep.entries) >= 20
        text = rep.to_text()
        assert "PASS" in text


class TestRunSweep:
    @pytest.fixture(scope="class")
    def tiny_sweep(self, default_data):
        grid = HalfSpaceGrid(8.0, 4.0, 65, 33)
        plan = SweepPlan(
            eps_values=[0.1, 0.03, 0.01],
            window=(0.1, 0.25),
            horizon=0.25,
            bands={"thm_c_wgap": (0.3, 0.7)},
        )
        cfg = SolverConfig(duhamel_nodes=16, norm_levels=10, residual_levels=(0, 2, 4, 8))
        return plan, run_sweep(plan, grid, default_data, cfg)

    def test_monotone_gap_functionals(self, tiny_sweep):
        plan, rep = tiny_sweep
        for name in ("thm_b_strip", "thm_c_wgap", "cor_u_gap"):
            vals = rep.values[name]
            for a, b in zip(vals, vals[1:]):
                assert b <= a * 1.1

    def test_wgap_band(self, tiny_sweep):
        _, rep = tiny_sweep
        assert rep.band_passed["thm_c_wgap"]

    def test_report_text_round_trip(self, tiny_sweep):
        _, rep = tiny_sweep
        text = rep.to_text()
        assert "thm_c_wgap" in text and "slope" in text

    def test_floor_detection_on_compatible_data(self):
        from dynbc.grid import InitialData

        grid = HalfSpaceGrid(6.0, 3.0, 33, 17)
        const = InitialData(
            lambda xp, xn: np.ones_like(np.asarray(xp, dtype=float)),
            lambda xp: np.ones_like(np.asarray(xp, dtype=float)),
            phi_far=1.0,
            phi_b_far=1.0,
        )
        plan = SweepPlan(
            eps_values=[0.1, 0.03, 0.01],
            window=(0.05, 0.2),
            horizon=0.2,
            floor=1e-8,
        )
        cfg = SolverConfig(duhamel_nodes=16, norm_levels=4, residual_levels=(0, 2))
        rep = run_sweep(plan, grid, const, cfg)
        # exact solution: every functional at the floor, fits refused
        for name in ("thm_b_strip", "thm_c_wgap", "cor_u_gap"):
            assert rep.fits[name] is None
            assert len(rep.excluded[name]) == 3
