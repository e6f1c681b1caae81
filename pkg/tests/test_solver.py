import numpy as np
import pytest

from dynbc.duhamel_ops import TraceHistory
from dynbc.errors import DomainError, SolverFailure
from dynbc.grid import Field, HalfSpaceGrid, InitialData, sup_norm
from dynbc.harness import SyntheticTrace
from dynbc.solver import (
    ProblemSpec,
    QEpsOperator,
    SolverConfig,
    continue_global,
    e_norm,
    norm_samples,
    prepare,
    q_eps_apply,
    save_solver_run,
    solve_interval,
)

FAST = SolverConfig(duhamel_nodes=16, norm_levels=8, residual_levels=(0, 2, 4, 8))


def zero_data():
    return InitialData(
        lambda xp, xn: np.zeros_like(np.asarray(xp, dtype=float)),
        lambda xp: np.zeros_like(np.asarray(xp, dtype=float)),
    )


def const_data():
    return InitialData(
        lambda xp, xn: np.ones_like(np.asarray(xp, dtype=float)),
        lambda xp: np.ones_like(np.asarray(xp, dtype=float)),
        phi_far=1.0,
        phi_b_far=1.0,
    )


class TestPrepare:
    def test_zero_data(self, small_grid):
        prob = prepare(ProblemSpec(zero_data(), 0.1, 0.5), small_grid)
        assert prob.m == 0.0
        assert sup_norm(prob.Phi) == 0.0

    def test_compatible_constants_cancel(self, small_grid):
        prob = prepare(ProblemSpec(const_data(), 0.1, 0.5), small_grid)
        assert prob.m == 16.0
        assert sup_norm(prob.Phi) == 0.0

    def test_interior_constant_with_zero_boundary(self, small_grid):
        data = InitialData(
            lambda xp, xn: np.ones_like(np.asarray(xp, dtype=float)),
            lambda xp: np.zeros_like(np.asarray(xp, dtype=float)),
            phi_far=1.0,
        )
        prob = prepare(ProblemSpec(data, 0.1, 0.5), small_grid)
        assert prob.m == 16.0
        assert np.allclose(prob.Phi.values, 1.0)

    def test_shifted_field_bound(self, small_grid, default_data):
        prob = prepare(ProblemSpec(default_data, 0.1, 0.5), small_grid)
        assert sup_norm(prob.Phi) <= 1.0 + 1.0 + 1e-9

    def test_invalid_problem_rejected(self, small_grid):
        with pytest.raises(DomainError):
            ProblemSpec(zero_data(), 1.5, 0.5)
        with pytest.raises(DomainError):
            ProblemSpec(zero_data(), 0.1, -1.0)


class TestSolveInterval:
    def test_zero_problem_converges_immediately(self, small_grid):
        prob = prepare(ProblemSpec(zero_data(), 0.1, 0.5), small_grid)
        res = solve_interval(prob, 0.5, FAST)
        assert res.iterations == 1
        assert np.all(res.values == 0.0)
        assert res.halvings == 0

    def test_residual_ratios_below_threshold(self, small_grid, default_data):
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        res = solve_interval(prob, 0.3, FAST)
        rats = [res.residuals[i + 1] / res.residuals[i] for i in range(len(res.residuals) - 2)]
        assert all(r <= 0.5 for r in rats)

    def test_uniqueness_of_the_fixed_point(self, small_grid, default_data):
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        op = QEpsOperator(prob, FAST)
        res_a = solve_interval(prob, 0.3, FAST, operator=op)
        perturbed = res_a.values + 0.3 * np.sin(small_grid.x_prime)[None, :]
        res_b = solve_interval(prob, 0.3, FAST, operator=op, initial_values=perturbed)
        # both admissible starts land on the same trace history
        tr_a = TraceHistory(small_grid)
        tr_a.extend(res_a.nodes, res_a.values)
        tr_b = TraceHistory(small_grid)
        tr_b.extend(res_b.nodes, res_b.values)
        worst = 0.0
        for t in (0.05, 0.15, 0.3):
            da, db = op.dtilde(tr_a, t), op.dtilde(tr_b, t)
            worst = max(
                worst,
                e_norm(
                    prob.eps,
                    t,
                    Field(small_grid, da[0].values - db[0].values, 0.0),
                    Field(small_grid, da[1].values - db[1].values, 0.0),
                ),
            )
        assert worst <= 10.0 * FAST.picard_tol * prob.m

    def test_halving_gives_up_below_t_min(self, small_grid, default_data):
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        cfg = SolverConfig(
            duhamel_nodes=16, residual_levels=(0, 2), max_iter=2, t_min=0.05, picard_tol=1e-14
        )
        with pytest.raises(SolverFailure) as exc:
            solve_interval(prob, 0.3, cfg)
        assert exc.value.partial is not None


class TestQEpsApply:
    def test_zero_trace_gives_data_part(self, small_grid, default_data):
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        zero = TraceHistory(small_grid)
        out = q_eps_apply(prob, zero, [0.1, 0.3], FAST)
        assert set(out) == {0.1, 0.3}
        val, dxn = out[0.3]
        assert sup_norm(val) > 0
        assert np.allclose(val.values[0], 0.0, atol=1e-12)  # Dirichlet trace

    def test_ball_preservation(self, small_grid, default_data):
        # the mapped iterate of a ball element stays well inside the ball
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        op = QEpsOperator(prob, FAST)
        samples = norm_samples(0.0, 0.3, 8)
        for kappa in (0.5, 1.5):
            tr = SyntheticTrace(small_grid, prob.eps, amp=prob.m / 4.0, kappa=kappa)
            vals = [op.v_fields(tr, t) for t in samples]
            xnorm = max(e_norm(prob.eps, t, v, d) for t, (v, d) in zip(samples, vals))
            assert xnorm <= 0.75 * prob.m

    def test_contraction_on_ball_pairs(self, small_grid, default_data, rng):
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        op = QEpsOperator(prob, FAST)
        samples = norm_samples(0.0, 0.3, 8)
        for _ in range(4):
            a = SyntheticTrace(
                small_grid, prob.eps, amp=float(rng.uniform(0.5, 2.0)),
                c=float(rng.uniform(-2, 2)), kappa=float(rng.uniform(0.5, 1.5)),
            )
            b = SyntheticTrace(
                small_grid, prob.eps, amp=float(rng.uniform(0.5, 2.0)),
                c=float(rng.uniform(-2, 2)), kappa=float(rng.uniform(0.5, 1.5)),
            )
            dvals = []
            denom = 0.0
            for t in samples:
                da = op.dtilde(a, t)
                db = op.dtilde(b, t)
                dvals.append(
                    e_norm(
                        prob.eps,
                        t,
                        Field(small_grid, da[0].values - db[0].values, 0.0),
                        Field(small_grid, da[1].values - db[1].values, 0.0),
                    )
                )
                va = a.a(t) * a.field_values()
                vb = b.a(t) * b.field_values()
                field_diff = Field(small_grid, va - vb, 0.0)
                dxn_diff = Field(
                    small_grid,
                    -a.kappa * a.a(t) * a.field_values() + b.kappa * b.a(t) * b.field_values(),
                    0.0,
                )
                denom = max(denom, e_norm(prob.eps, t, field_diff, dxn_diff))
            assert max(dvals) <= 0.5 * denom


class TestContinueGlobal:
    def test_zero_problem(self, small_grid):
        prob = prepare(ProblemSpec(zero_data(), 0.1, 0.4), small_grid)
        run = continue_global(prob, 0.4, FAST)
        assert all(sup_norm(u) == 0.0 for u in run.u)

    def test_compatible_constants_are_exact(self, small_grid):
        prob = prepare(ProblemSpec(const_data(), 0.1, 0.4), small_grid)
        run = continue_global(prob, 0.4, FAST)
        assert max(np.max(np.abs(u.values - 1.0)) for u in run.u) <= 1e-5

    def test_assembly_identity(self, small_grid, default_data):
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        run = continue_global(prob, 0.3, FAST)
        for v, w, u in zip(run.v, run.w, run.u):
            assert np.array_equal(u.values, v.values + w.values)

    def test_w_bound_chain(self, small_grid, default_data):
        # sup|w(t)| <= |phi_b| + 2 sqrt(eps t) * (weighted trace norm)
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        run = continue_global(prob, 0.3, FAST)
        for t, ws in zip(run.times, run.w_sup_table):
            assert ws <= 1.0 + 2.0 * np.sqrt(prob.eps * t) * run.xt_norm * 1.2 + 1e-9

    def test_a_priori_bound(self, small_grid, default_data):
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        run = continue_global(prob, 0.3, FAST)
        data_size = 1.0 + 1.0
        c_tau = (run.xt_norm + np.max(run.w_sup_table)) / data_size
        assert c_tau < 4.0

    def test_multi_interval_continuation(self, small_grid, default_data):
        # force short intervals and check the horizon is covered seamlessly
        prob = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        run_multi = continue_global(prob, 0.3, FAST, report_times=[0.15, 0.3])

        cfg = SolverConfig(duhamel_nodes=16, norm_levels=8, residual_levels=(0, 2, 4, 8))
        prob2 = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        op = QEpsOperator(prob2, cfg)
        tr = TraceHistory(small_grid)
        a = 0.0
        for _ in range(3):
            res = solve_interval(prob2, 0.1, cfg, tr, a, op)
            tr.extend(res.nodes, res.values)
            a = res.b
        assert a == pytest.approx(0.3)
        for t in (0.15, 0.3):
            j = int(np.argmin(np.abs(run_multi.times - t)))
            v1 = run_multi.v[j]
            v2 = op.v_fields(tr, t)[0]
            assert sup_norm(Field(small_grid, v1.values - v2.values, 0.0)) < 5e-4

    def test_determinism(self, small_grid, default_data):
        prob1 = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        run1 = continue_global(prob1, 0.3, FAST)
        prob2 = prepare(ProblemSpec(default_data, 0.05, 0.3), small_grid)
        run2 = continue_global(prob2, 0.3, FAST)
        assert np.array_equal(run1.e_table, run2.e_table)
        for a, b in zip(run1.u, run2.u):
            assert np.array_equal(a.values, b.values)


class TestPersistence:
    def test_save_solver_run(self, small_grid, tmp_path):
        prob = prepare(ProblemSpec(const_data(), 0.1, 0.2), small_grid)
        run = continue_global(prob, 0.2, SolverConfig(duhamel_nodes=16, norm_levels=4, residual_levels=(0, 2)))
        written = save_solver_run(run, str(tmp_path), persist_fields=True)
        assert any(p.endswith("solution.txt") for p in written)
        assert any("field_u" in p for p in written)
        from dynbc.grid import field_from_csv

        u = field_from_csv([p for p in written if "field_u" in p][0])
        assert np.max(np.abs(u.values - 1.0)) <= 1e-5
