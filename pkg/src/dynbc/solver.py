"""Contraction fixed-point construction of the mild solution pair (v, w).

The map being iterated sends v to

    S1(t/eps) Phi  -  D_eps[phi_b](t)  -  D~[v](t),

and depends on v only through the boundary trace of its x_N-derivative.
The solver therefore iterates on that trace, stored at graded time nodes,
and reconstructs full fields on demand.  Intervals are accepted when the
empirical residual ratio stays below the contraction threshold; otherwise
the interval length is halved and the iteration restarts.  Later intervals
keep the global Duhamel form, freezing the already-converged part of the
trace history (the interval concatenation the uniqueness argument allows).

w is assembled from the converged trace as the boundary-data evolution plus
the trace-driven memory integral, and u = v + w nodewise.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import quadrature as quad
from .duhamel_ops import TraceHistory, d_eps_tilde_eval, f1_trace_batch
from .errors import DomainError, SolverFailure
from .grid import (
    BoundaryField,
    Field,
    HalfSpaceGrid,
    InitialData,
    field_to_csv,
    sup_norm,
)
from .semigroups import S1Op, S2Op, s2_apply_cropped


@dataclass(frozen=True)
class ProblemSpec:
    """One instance of the coupled problem: data, diffusion parameter, horizon."""

    data: InitialData
    eps: float
    horizon: float
    N: int = 2

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise DomainError(f"eps must be in (0, 1), got {self.eps}")
        if self.horizon <= 0.0:
            raise DomainError(f"horizon must be > 0, got {self.horizon}")


@dataclass(frozen=True)
class SolverConfig:
    duhamel_nodes: int = 24
    picard_tol: float = 1e-7
    max_iter: int = 50
    t_min: float = 1e-6
    ratio_threshold: float = 0.5
    ratio_strikes: int = 2
    norm_levels: int = 20
    residual_levels: tuple = (0, 1, 2, 4, 8, 14, 20)
    guard: float = 8.0


@dataclass
class PreparedProblem:
    """Problem with sampled data, the shifted initial field, and the ball radius."""

    spec: ProblemSpec
    grid: HalfSpaceGrid
    phi: Field
    phi_b: BoundaryField
    phi_b_wide: BoundaryField
    Phi: Field
    m: float

    @property
    def eps(self) -> float:
        return self.spec.eps


def prepare(spec: ProblemSpec, grid: HalfSpaceGrid, guard: float = 8.0) -> PreparedProblem:
    """Sample the data, form Phi = phi - [extension of phi_b], size the ball."""
    phi, phi_b = spec.data.sample(grid)
    wide = grid.widened(guard)
    phi_b_wide = BoundaryField(
        wide, np.asarray(spec.data.phi_b(wide.x_prime), dtype=float), spec.data.phi_b_far
    )
    s20 = s2_apply_cropped(phi_b_wide, 0.0, grid)
    big_phi = Field(grid, phi.values - s20.values, phi.far_const - s20.far_const)
    m = 16.0 * max(sup_norm(phi), sup_norm(phi_b))
    return PreparedProblem(spec, grid, phi, phi_b, phi_b_wide, big_phi, m)


def norm_samples(a: float, b: float, levels: int) -> np.ndarray:
    """Geometric sample times a + (b - a) 2^-j, j = 0..levels (clustered at a)."""
    j = np.arange(levels + 1, dtype=float)
    return (a + (b - a) * 2.0 ** (-j))[::-1].copy()


def e_norm(eps: float, t: float, val: Field, dxn: Field) -> float:
    """Sup norm of the value plus the parabolic-weighted derivative sup norm."""
    return sup_norm(val) + np.sqrt(t / eps) * sup_norm(dxn)


class QEpsOperator:
    """Evaluator of the fixed-point map and its pieces for one prepared problem.

    The data-driven and trace-driven Duhamel terms share one batched pass:
    both forcings are boundary generators extended harmonically, so their
    extension and heat propagation are fused.  The data generator rows at
    each evaluation time are iteration-independent and cached.
    """

    def __init__(self, prob: PreparedProblem, cfg: SolverConfig):
        self.prob = prob
        self.cfg = cfg
        self.grid = prob.grid
        self.eps = prob.eps
        self.outer_rule = quad.TimeQuadRule(cfg.duhamel_nodes, (0.5, 0.875))
        self.memory_rule = quad.TimeQuadRule(cfg.duhamel_nodes, (0.5, 0.75))
        self._s1phi_cache: dict[float, tuple[Field, Field]] = {}
        self._f1_rows_cache: dict[float, np.ndarray] = {}
        self._has_phib = sup_norm(prob.phi_b_wide) > 0.0
        self._zero = Field(self.grid, np.zeros((self.grid.n_depth, self.grid.n_prime)), 0.0)

    def s1_phi(self, t: float) -> tuple[Field, Field]:
        hit = self._s1phi_cache.get(t)
        if hit is None:
            hit = S1Op(self.grid, t / self.eps).apply_both(self.prob.Phi)
            self._s1phi_cache[t] = hit
        return hit

    def _f1_rows(self, t: float) -> np.ndarray | None:
        """Data-forcing boundary rows at the outer quadrature nodes of time t."""
        if not self._has_phib:
            return None
        rows = self._f1_rows_cache.get(t)
        if rows is None:
            sb, _ = quad.duhamel_nodes(1.0, self.outer_rule)
            rows = f1_trace_batch(self.prob.phi_b_wide, t * sb, self.grid)
            self._f1_rows_cache[t] = rows
        return rows

    def duhamel_term(self, trace, t: float) -> tuple[Field, Field]:
        """Combined smoothed forcing integral (data plus trace), with derivative."""
        return d_eps_tilde_eval(
            trace,
            self.eps,
            t,
            self.outer_rule,
            self.memory_rule,
            self.grid,
            extra_rows=self._f1_rows(t),
        )

    def duhamel_trace(self, trace, t: float) -> np.ndarray:
        """Boundary row of the combined term's x_N-derivative (collocation update)."""
        return d_eps_tilde_eval(
            trace,
            self.eps,
            t,
            self.outer_rule,
            self.memory_rule,
            self.grid,
            extra_rows=self._f1_rows(t),
            trace_only=True,
        )

    def dtilde(self, trace, t: float) -> tuple[Field, Field]:
        """Trace-driven Duhamel term alone (contraction measurements)."""
        return d_eps_tilde_eval(
            trace, self.eps, t, self.outer_rule, self.memory_rule, self.grid
        )

    def v_fields(self, trace, t: float) -> tuple[Field, Field]:
        """v(t) = S1(t/eps) Phi - [combined Duhamel term](t), with derivative."""
        v0v, v0d = self.s1_phi(t)
        dv, dd = self.duhamel_term(trace, t)
        return (
            Field(self.grid, v0v.values - dv.values, v0v.far_const),
            Field(self.grid, v0d.values - dd.values, 0.0),
        )

    def e_norm_at(self, trace, t: float) -> float:
        val, dxn = self.v_fields(trace, t)
        return e_norm(self.eps, t, val, dxn)


@dataclass
class IntervalResult:
    a: float
    b: float
    nodes: np.ndarray
    values: np.ndarray
    iterations: int
    residuals: list
    halvings: int


@dataclass
class SolverRun:
    """Converged histories, assembled fields, and iteration diagnostics."""

    eps: float
    grid: HalfSpaceGrid
    m: float
    times: np.ndarray
    v: list
    v_dxn: list
    w: list
    u: list
    trace: TraceHistory
    intervals: list
    T_star: float
    e_table: np.ndarray
    xt_norm: float
    w_sup_table: np.ndarray


def _interval_nodes(a: float, length: float, rule: quad.TimeQuadRule) -> np.ndarray:
    s, _ = quad.duhamel_nodes(length, rule)
    return np.concatenate([a + np.sort(s), [a + length]])


def solve_interval(
    prob: PreparedProblem,
    T_guess: float,
    cfg: SolverConfig | None = None,
    frozen: TraceHistory | None = None,
    a: float = 0.0,
    operator: QEpsOperator | None = None,
    initial_values: np.ndarray | None = None,
) -> IntervalResult:
    """Picard iteration on one interval (a, a + T]; halves T until it contracts.

    Residuals are measured in the weighted norm over geometric sample times;
    two consecutive residual ratios above the threshold trigger a halving.
    Returns the converged trace segment and the accepted interval length.
    """
    cfg = cfg or SolverConfig()
    op = operator or QEpsOperator(prob, cfg)
    frozen = frozen or TraceHistory(prob.grid)
    tol = cfg.picard_tol * max(prob.m, 1e-300)
    halvings = 0
    T = T_guess
    while True:
        b = a + T
        nodes = _interval_nodes(a, T, op.outer_rule)
        sample_t = np.array([a + T * 2.0 ** (-j) for j in cfg.residual_levels])

        def sweep(gvals):
            """One application of the map: updated trace plus term fields."""
            working = frozen.copy_with(nodes, gvals)
            g_next = np.empty_like(gvals)
            for i, s in enumerate(nodes):
                g_next[i] = op.s1_phi(s)[1].values[0] - op.duhamel_trace(working, s)
            fields = {t: op.duhamel_term(working, t) for t in sample_t}
            return g_next, fields

        # bootstrap: the first iterate is the map applied to the zero trace
        if initial_values is None:
            g_work, prev_fields = sweep(np.zeros((nodes.size, prob.grid.n_prime)))
        else:
            g_work, prev_fields = sweep(initial_values.copy())
        residuals: list[float] = []
        strikes = 0
        converged = False
        for _ in range(cfg.max_iter):
            g_next, cur_fields = sweep(g_work)
            r = max(
                e_norm(
                    prob.eps,
                    t,
                    Field(prob.grid, cur_fields[t][0].values - prev_fields[t][0].values, 0.0),
                    Field(prob.grid, cur_fields[t][1].values - prev_fields[t][1].values, 0.0),
                )
                for t in sample_t
            )
            residuals.append(r)
            prev_fields = cur_fields
            g_work = g_next
            if r <= tol:
                converged = True
                break
            if len(residuals) >= 2 and residuals[-2] > 0.0:
                if r / residuals[-2] > cfg.ratio_threshold:
                    strikes += 1
                else:
                    strikes = 0
                if strikes >= cfg.ratio_strikes:
                    break
        if converged:
            return IntervalResult(a, b, nodes, g_work, len(residuals), residuals, halvings)
        T *= 0.5
        halvings += 1
        if T < cfg.t_min:
            raise SolverFailure(
                f"interval length fell below {cfg.t_min} at t = {a} "
                f"(discretization too coarse for the contraction to show); "
                f"last residuals: {residuals[-3:]}",
                partial={"a": a, "residuals": residuals},
            )


def q_eps_apply(
    prob: PreparedProblem, trace, times, cfg: SolverConfig | None = None
) -> dict:
    """Apply the fixed-point map to a trace history at the given times.

    Returns {t: (value Field, derivative Field)} of the mapped iterate.
    """
    cfg = cfg or SolverConfig()
    op = QEpsOperator(prob, cfg)
    return {t: op.v_fields(trace, t) for t in times}


def assemble_w(
    prob: PreparedProblem, trace, t: float, rule: quad.TimeQuadRule
) -> Field:
    """w(t): boundary-data evolution plus the trace-driven memory integral."""
    grid = prob.grid
    base = s2_apply_cropped(prob.phi_b_wide, t, grid)
    if t <= 0.0:
        return base
    s_nodes, wts = quad.duhamel_nodes(t, rule)
    acc = np.zeros((grid.n_depth, grid.n_prime))
    for si, wi in zip(s_nodes, wts):
        g = trace(si)
        taps, resp = quad.poisson_extension_bank(grid, t - si)
        rows = np.broadcast_to(g.values, (grid.n_depth, grid.n_prime))
        acc += wi * quad.apply_lateral_bank(taps, resp, rows, g.far_const)
    return Field(grid, base.values + acc, base.far_const)


def continue_global(
    prob: PreparedProblem,
    horizon: float,
    cfg: SolverConfig | None = None,
    report_times=None,
) -> SolverRun:
    """March intervals of the accepted contraction length across the horizon.

    The converged trace of earlier intervals is frozen and feeds the global
    Duhamel integrals of later ones.  Fields are stored at the report times
    (geometric norm samples by default) and w, u are assembled from the
    final trace.
    """
    cfg = cfg or SolverConfig()
    op = QEpsOperator(prob, cfg)
    trace = TraceHistory(prob.grid)
    intervals: list[IntervalResult] = []
    a = 0.0
    T_guess = min(1.0, horizon)
    t_star = None
    while a < horizon - 1e-12:
        T_try = min(T_guess, horizon - a)
        res = solve_interval(prob, T_try, cfg, trace, a, op)
        trace.extend(res.nodes, res.values)
        intervals.append(res)
        if t_star is None:
            t_star = res.b - res.a
        T_guess = res.b - res.a
        a = res.b

    samples = norm_samples(0.0, horizon, cfg.norm_levels)
    if report_times is None:
        report_times = samples
    times = np.unique(np.concatenate([samples, np.asarray(report_times, dtype=float)]))
    v_list, d_list, w_list, u_list = [], [], [], []
    e_table = np.empty(times.size)
    w_sup = np.empty(times.size)
    for k, t in enumerate(times):
        val, dxn = op.v_fields(trace, t)
        wf = assemble_w(prob, trace, t, op.memory_rule)
        uf = Field(prob.grid, val.values + wf.values, val.far_const + wf.far_const)
        v_list.append(val)
        d_list.append(dxn)
        w_list.append(wf)
        u_list.append(uf)
        e_table[k] = e_norm(prob.eps, t, val, dxn)
        w_sup[k] = sup_norm(wf)
    return SolverRun(
        eps=prob.eps,
        grid=prob.grid,
        m=prob.m,
        times=times,
        v=v_list,
        v_dxn=d_list,
        w=w_list,
        u=u_list,
        trace=trace,
        intervals=intervals,
        T_star=t_star if t_star is not None else horizon,
        e_table=e_table,
        xt_norm=float(np.max(e_table)),
        w_sup_table=w_sup,
    )


def save_solver_run(run: SolverRun, outdir: str, persist_fields: bool = True) -> list[str]:
    """Persist the manifest-style summary plus per-time-node field CSVs."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    lines = [
        f"eps = {run.eps!r}",
        f"m = {run.m!r}",
        f"T_star = {run.T_star!r}",
        f"xt_norm = {run.xt_norm!r}",
        f"intervals = {len(run.intervals)}",
    ]
    for k, iv in enumerate(run.intervals):
        lines.append(
            f"interval[{k}] = ({iv.a!r}, {iv.b!r}) iterations={iv.iterations} "
            f"halvings={iv.halvings} final_residual={iv.residuals[-1]!r}"
        )
    lines.append("columns: t  E[v](t)  sup|w(t)|")
    for t, e, ws in zip(run.times, run.e_table, run.w_sup_table):
        lines.append(f"{t!r} {e!r} {ws!r}")
    path = os.path.join(outdir, "solution.txt")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    written.append(path)
    if persist_fields:
        for t, vf, wf, uf in zip(run.times, run.v, run.w, run.u):
            for tag, f in (("v", vf), ("w", wf), ("u", uf)):
                p = os.path.join(outdir, f"field_{tag}_t{t:.6f}.csv")
                field_to_csv(f, p)
                written.append(p)
    return written
