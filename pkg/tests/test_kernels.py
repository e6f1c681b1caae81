import numpy as np
import pytest
from scipy import integrate

from dynbc.errors import DomainError
from dynbc.kernels import (
    KernelPoint,
    dirichlet_heat_kernel,
    dirichlet_kernel_dxn,
    gauss_kernel,
    normalization_constant,
    poisson_dyn_kernel,
    poisson_dyn_kernel_dt,
)


class TestGaussKernel:
    def test_prefactor_cancels_at_origin(self):
        assert gauss_kernel(1, 0.0, 1.0 / (4.0 * np.pi)) == pytest.approx(1.0, abs=1e-15)

    def test_point_value_matches_quadrature_normalized_form(self):
        # closed form at z=2, t=1; the normalization integral pins the prefactor
        val = gauss_kernel(1, 2.0, 1.0)
        assert val == pytest.approx((4.0 * np.pi) ** -0.5 * np.exp(-1.0), rel=1e-14)
        mass, _ = integrate.quad(lambda z: gauss_kernel(1, z, 1.0), -np.inf, np.inf)
        assert mass == pytest.approx(1.0, abs=1e-10)

    def test_two_dimensional_origin(self):
        assert gauss_kernel(2, (0.0, 0.0), 1.0) == pytest.approx(1.0 / (4.0 * np.pi), rel=1e-14)

    def test_normalization_any_dimension(self):
        mass, _ = integrate.quad(
            lambda r: 2 * np.pi * r * gauss_kernel(2, np.array([r, 0.0]), 0.7), 0, np.inf
        )
        assert mass == pytest.approx(1.0, abs=1e-9)

    def test_nonpositive_time_rejected(self):
        with pytest.raises(DomainError):
            gauss_kernel(1, 0.0, 0.0)
        with pytest.raises(DomainError):
            gauss_kernel(1, 0.0, -1.0)


class TestDirichletHeatKernel:
    def test_vanishes_on_the_boundary(self):
        p = KernelPoint((0.0, 0.0), (0.0, 1.0), 1.0)
        assert dirichlet_heat_kernel(p) == 0.0

    def test_on_diagonal_value(self):
        p = KernelPoint((0.0, 1.0), (0.0, 1.0), 1.0)
        expect = (1.0 - np.exp(-1.0)) / (4.0 * np.pi)
        assert dirichlet_heat_kernel(p) == pytest.approx(expect, rel=1e-14)

    def test_symmetry_in_the_two_points(self, rng):
        for _ in range(20):
            a = (rng.uniform(-2, 2), rng.uniform(0.1, 2))
            b = (rng.uniform(-2, 2), rng.uniform(0.1, 2))
            t = rng.uniform(0.1, 2)
            assert dirichlet_heat_kernel(KernelPoint(a, b, t)) == pytest.approx(
                dirichlet_heat_kernel(KernelPoint(b, a, t)), rel=1e-13
            )

    def test_factorizes_into_lateral_and_depth_parts(self, rng):
        for _ in range(50):
            x = (rng.uniform(-3, 3), rng.uniform(0, 3))
            y = (rng.uniform(-3, 3), rng.uniform(0.01, 3))
            t = rng.uniform(0.05, 5)
            lat = gauss_kernel(1, x[0] - y[0], t)
            dep = gauss_kernel(1, x[1] - y[1], t) - gauss_kernel(1, x[1] + y[1], t)
            full = dirichlet_heat_kernel(KernelPoint(x, y, t))
            assert abs(full - lat * dep) <= 1e-14 * lat

    def test_nonnegative(self, rng):
        for _ in range(100):
            x = (rng.uniform(-3, 3), rng.uniform(0, 3))
            y = (rng.uniform(-3, 3), rng.uniform(0.01, 3))
            t = rng.uniform(0.05, 5)
            assert dirichlet_heat_kernel(KernelPoint(x, y, t)) >= 0.0

    def test_invalid_points_rejected(self):
        with pytest.raises(DomainError):
            KernelPoint((0.0, -0.1), (0.0, 1.0), 1.0)
        with pytest.raises(DomainError):
            KernelPoint((0.0, 0.0), (0.0, 0.0), 1.0)
        with pytest.raises(DomainError):
            KernelPoint((0.0, 0.0), (0.0, 1.0), 0.0)


class TestDirichletKernelDxn:
    def test_boundary_row_is_positive(self, rng):
        for _ in range(20):
            y = (rng.uniform(-2, 2), rng.uniform(0.05, 2))
            t = rng.uniform(0.1, 2)
            k = dirichlet_kernel_dxn(KernelPoint((0.0, 0.0), y, t))
            expect = gauss_kernel(1, -y[0], t) * (y[1] / t) * gauss_kernel(1, y[1], t)
            assert k == pytest.approx(expect, rel=1e-13)
            assert k > 0

    def test_absolute_mass_at_boundary(self):
        # integral of |K| over the half-space equals (pi t)^-1/2 at x_N = 0
        # (the lateral factor has unit mass; the depth factor is (y/t) Gamma_1)
        for t in (0.25, 1.0, 4.0):
            val, _ = integrate.quad(
                lambda y: (y / t) * gauss_kernel(1, y, t), 0, 40 * np.sqrt(t)
            )
            assert val == pytest.approx((np.pi * t) ** -0.5, rel=1e-10)

    def test_matches_central_difference_with_second_order_trend(self, rng):
        for _ in range(10):
            x = (rng.uniform(-2, 2), rng.uniform(0.3, 2))
            y = (rng.uniform(-2, 2), rng.uniform(0.3, 2))
            t = rng.uniform(0.3, 2)
            k = dirichlet_kernel_dxn(KernelPoint(x, y, t))
            errs = []
            for h in (2e-2, 1e-2):
                up = dirichlet_heat_kernel(KernelPoint((x[0], x[1] + h), y, t))
                dn = dirichlet_heat_kernel(KernelPoint((x[0], x[1] - h), y, t))
                errs.append(abs((up - dn) / (2 * h) - k))
            if errs[1] > 1e-14:
                assert errs[0] / errs[1] > 3.0


class TestPoissonKernel:
    def test_center_value_is_normalization_constant(self):
        assert poisson_dyn_kernel(0.0, 0.0, 1.0) == pytest.approx(1.0 / np.pi, rel=1e-12)

    def test_normalization(self, rng):
        for _ in range(5):
            xn = rng.uniform(0, 2)
            t = rng.uniform(0.1, 3)
            mass, _ = integrate.quad(
                lambda z: poisson_dyn_kernel(z, xn, t), -np.inf, np.inf
            )
            assert mass == pytest.approx(1.0, abs=1e-8)

    def test_depends_only_on_the_sum_of_depth_and_time(self, rng):
        for _ in range(20):
            a = rng.uniform(0.01, 2)
            b = rng.uniform(0.01, 2)
            z = rng.uniform(-3, 3)
            assert poisson_dyn_kernel(z, a, b) == pytest.approx(
                poisson_dyn_kernel(z, 0.0, a + b), rel=1e-14
            )

    def test_delta_limit_rejected(self):
        with pytest.raises(DomainError):
            poisson_dyn_kernel(1.0, 0.0, 0.0)


class TestPoissonKernelDt:
    def test_center_value(self):
        assert poisson_dyn_kernel_dt(0.0, 0.0, 1.0) == pytest.approx(-1.0 / np.pi, rel=1e-12)

    def test_sign_change_at_the_critical_radius(self):
        # at x_N + t = 1 (N = 2) the derivative is positive iff |x'| > 1
        assert poisson_dyn_kernel_dt(1.5, 0.0, 1.0) > 0
        assert poisson_dyn_kernel_dt(0.5, 0.0, 1.0) < 0
        assert abs(poisson_dyn_kernel_dt(1.0, 0.0, 1.0)) < 1e-15

    def test_matches_central_difference(self, rng):
        for _ in range(20):
            z = rng.uniform(-3, 3)
            xn = rng.uniform(0, 2)
            t = rng.uniform(0.2, 2)
            d = poisson_dyn_kernel_dt(z, xn, t)
            errs = []
            for h in (1e-3, 5e-4):
                errs.append(
                    abs(
                        (poisson_dyn_kernel(z, xn, t + h) - poisson_dyn_kernel(z, xn, t - h))
                        / (2 * h)
                        - d
                    )
                )
            if errs[1] > 1e-14:
                assert errs[0] / errs[1] > 3.0

    def test_pointwise_bound_with_explicit_constant(self, rng):
        for n in (2, 3):
            c = max(1, n - 1)
            for _ in range(50):
                xp = rng.uniform(-4, 4, size=n - 1)
                xn = rng.uniform(0, 3)
                t = rng.uniform(0.05, 4)
                p = poisson_dyn_kernel(xp, xn, t)
                dp = poisson_dyn_kernel_dt(xp, xn, t)
                assert abs(dp) <= c / (xn + t) * p * (1 + 1e-12)


class TestNormalizationConstant:
    def test_two_dimensional_closed_form(self):
        assert normalization_constant(2) == pytest.approx(1.0 / np.pi, abs=1e-9)

    def test_three_dimensional_closed_form(self):
        assert normalization_constant(3) == pytest.approx(0.5 / np.pi, abs=1e-9)

    def test_defining_property_recovered(self):
        for n, xn, t in ((2, 0.5, 2.0), (3, 0.25, 1.0)):
            if n == 2:
                mass, _ = integrate.quad(lambda z: poisson_dyn_kernel(z, xn, t), -np.inf, np.inf)
            else:
                mass, _ = integrate.quad(
                    lambda r: 2 * np.pi * r * poisson_dyn_kernel(np.array([r, 0.0]), xn, t),
                    0,
                    np.inf,
                )
            assert mass == pytest.approx(1.0, abs=1e-8)

    def test_small_dimension_rejected(self):
        with pytest.raises(DomainError):
            normalization_constant(1)

    def test_concurrent_first_call_is_safe(self):
        import threading

        from dynbc import kernels

        kernels._cn_cache.pop(5, None)
        results = []

        def work():
            results.append(normalization_constant(5))

        threads = [threading.Thread(target=work) for _ in range(8)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        assert len(set(results)) == 1
