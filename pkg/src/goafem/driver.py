"""Nested adaptive loop: solve & estimate, mark, refine, account.

Per level the primal and dual problems are solved by the inexact
symmetrization iteration: the outer loop freezes the current iterate
into the symmetric correction right-hand side, the inner loop applies
the contractive multilevel solver and recomputes the full estimator
after every step.  Inner loop m/step n stop as soon as

    |u^{m,n} - u^{m,n-1}|  <=  lambda_alg [lambda_sym eta(u^{m,n}) + |u^{m,n} - u^{m,0}|],
    |u^{m,n_} - u^{m,0}|   <=  lambda_sym eta(u^{m,n_}),

(energy norms), with the analogous criteria for the dual iterate.  The
two solver loops are independent and are paired step-for-step into a
combined counter: a loop that has already stopped keeps its final
iterate frozen while the other continues.  Each executed combined step
is charged the current number of elements, which makes the cumulative
cost the quantity the optimal-complexity statements are about.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assemble import assemble, energy_norm, goal_value, solve_direct
from .estimator import EstimatorGeometry, EstimatorWorkspace
from .marking import combine_marks, doerfler_mark
from .mesh import MeshHierarchy, initial_mesh, refine, uniform_refine
from .multigrid import build_preconditioner, psi_step
from .space import DiscreteFunction, build_space, prolong, zero_function
from .zarantonello import exact_phi, zarantonello_rhs

log = logging.getLogger("goafem")


class IterationCapExceeded(RuntimeError):
    """Safety cap hit in a solver loop; indicates an implementation bug."""


@dataclass
class AdaptiveParams:
    """Input parameters of the adaptive algorithm."""

    theta: float = 0.5
    delta: float = 0.5
    lambda_sym: float = 0.7
    lambda_alg: float = 0.7
    p: int = 1
    c_mark: float = 1.0
    # termination: any set rule fires
    tol: Optional[float] = None          # estimator product threshold
    max_cost: Optional[float] = None     # cumulative cost bound
    max_levels: Optional[int] = None     # last level index
    solver_kind: str = "vcycle"
    omega: float = 0.5
    max_sym_steps: int = 500
    max_alg_steps: int = 500
    diagnostics: bool = False

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        if self.delta <= 0.0 or self.lambda_sym <= 0.0 or self.lambda_alg <= 0.0:
            raise ValueError("delta, lambda_sym, lambda_alg must be positive")
        if self.c_mark < 1.0:
            raise ValueError("c_mark must be >= 1")
        if self.tol is None and self.max_cost is None and self.max_levels is None:
            raise ValueError("at least one termination rule is required")


@dataclass
class SolveStats:
    """Loop protocol of one solve_estimate call (one problem, one level)."""

    n_steps: list                 # n_[m] for m = 1..m_
    alg_log: list                 # (m, n, lhs, rhs, stopped)
    sym_log: list                 # (m, lhs, rhs, stopped)

    @property
    def m_final(self):
        return len(self.n_steps)

    @property
    def total_steps(self):
        return int(sum(self.n_steps))


@dataclass
class HistoryRecord:
    """Per-level snapshot written after solve & estimate."""

    level: int
    ndofs: int
    n_elems: int
    eta: float
    zeta: float
    est_product: float
    goal: float
    goal_error: Optional[float]
    cum_cost: float
    cum_time: float
    steps_primal: int
    steps_dual: int
    steps_combined: int
    m_primal: int
    m_dual: int
    n_marked: int = 0
    # oracle-based quasi-errors of the final iterates; only filled when
    # diagnostics are enabled, never on the cost path
    quasi_h: Optional[float] = None
    quasi_z: Optional[float] = None


@dataclass
class CostLedger:
    """Append-only log of executed combined solver steps."""

    steps: list = field(default_factory=list)   # (level, k, j, n_elems, ndofs, cum_cost, t_wall)
    cum_cost: float = 0.0

    def charge(self, level, k, j, n_elems, ndofs, t_wall):
        self.cum_cost += n_elems
        self.steps.append((level, k, j, n_elems, ndofs, self.cum_cost, t_wall))

    def recompute(self):
        return float(sum(s[3] for s in self.steps))


@dataclass
class RunResult:
    records: list
    ledger: CostLedger
    stats: list                   # (primal SolveStats, dual SolveStats) per level
    marked_history: list
    hierarchy: MeshHierarchy
    final_primal: DiscreteFunction
    final_dual: DiscreteFunction
    diagnostics: list             # (level, k, j, H, Z) per combined step
    estimator_zero: bool = False


def solve_estimate(which, system, precond, workspace, seed, params):
    """Inexact symmetrization loop for one problem on one level.

    Returns the final iterate, its indicator field and the loop stats.
    The per-step criterion values are logged so the stopping conditions
    can be audited exactly.
    """
    lam_alg = params.lambda_alg
    lam_sym = params.lambda_sym
    alg_log = []
    sym_log = []
    n_steps = []
    per_step = []                 # (iterate, field) for every inner step, in order

    u_outer = seed
    m = 0
    while True:
        m += 1
        if m > params.max_sym_steps:
            raise IterationCapExceeded(
                f"{which} symmetrization loop exceeded {params.max_sym_steps} steps "
                f"(level dim {system.n})")
        u_m0 = u_outer
        rhs = zarantonello_rhs(system, which, u_m0, params.delta)
        u = u_m0
        n = 0
        while True:
            n += 1
            if n > params.max_alg_steps:
                raise IterationCapExceeded(
                    f"{which} algebraic loop exceeded {params.max_alg_steps} steps "
                    f"(level dim {system.n})")
            u_new = psi_step(precond, system.A_sym, rhs, u)
            fld = workspace.indicators(u_new)
            per_step.append((u_new, fld))
            inc = energy_norm(system, u_new.values - u.values)
            tot = energy_norm(system, u_new.values - u_m0.values)
            bound = lam_alg * (lam_sym * fld.total + tot)
            stop = inc <= bound
            alg_log.append((m, n, inc, bound, stop))
            if stop:
                break
            u = u_new
        n_steps.append(n)
        bound_m = lam_sym * fld.total
        stop_m = tot <= bound_m
        sym_log.append((m, tot, bound_m, stop_m))
        if stop_m:
            break
        u_outer = u_new

    return u_new, fld, SolveStats(n_steps=n_steps, alg_log=alg_log, sym_log=sym_log), per_step


def _combined_steps(stats_u, stats_z):
    """Pair the two loops in parallel: j_[k] = max of the active counts."""
    k_final = max(stats_u.m_final, stats_z.m_final)
    j_by_k = []
    for k in range(1, k_final + 1):
        nu = stats_u.n_steps[k - 1] if k <= stats_u.m_final else 0
        nz = stats_z.n_steps[k - 1] if k <= stats_z.m_final else 0
        j_by_k.append(max(nu, nz))
    return j_by_k


def _quasi_errors(system, which, params, seed, stats, per_step):
    """Oracle quasi-errors for every inner step (diagnostics only)."""
    star = solve_direct(system, which)
    out = []
    idx = 0
    u_outer = seed
    for m, n_m in enumerate(stats.n_steps, start=1):
        phi = exact_phi(system, which, u_outer, params.delta)
        for _ in range(n_m):
            it, fld = per_step[idx]
            idx += 1
            h = (energy_norm(system, star.values - it.values)
                 + energy_norm(system, phi.values - it.values)
                 + fld.total)
            out.append(h)
        u_outer = it
    return out


def run(problem, params):
    """Adaptive loop (solve & estimate, mark, refine) until termination."""
    t_start = time.perf_counter()
    mesh = uniform_refine(initial_mesh(problem.domain), problem.initial_refinements)
    hierarchy = MeshHierarchy(mesh)

    records = []
    all_stats = []
    marked_history = []
    diag = []
    ledger = CostLedger()
    u_prev = None
    z_prev = None
    estimator_zero = False

    level = 0
    precond = None
    while True:
        space = build_space(mesh, params.p)
        system = assemble(space, problem)
        precond = build_preconditioner(hierarchy, space, system.A_sym,
                                       problem_A=problem.A,
                                       omega=params.omega, kind=params.solver_kind,
                                       reuse=precond)
        geo = EstimatorGeometry(space, problem)
        ws_u = EstimatorWorkspace(space, problem, "primal", geometry=geo)
        ws_z = EstimatorWorkspace(space, problem, "dual", geometry=geo)

        seed_u = prolong(u_prev, space) if u_prev is not None else zero_function(space)
        seed_z = prolong(z_prev, space) if z_prev is not None else zero_function(space)

        u, field_u, stats_u, steps_u = solve_estimate("primal", system, precond, ws_u, seed_u, params)
        z, field_z, stats_z, steps_z = solve_estimate("dual", system, precond, ws_z, seed_z, params)
        all_stats.append((stats_u, stats_z))

        j_by_k = _combined_steps(stats_u, stats_z)
        t_now = time.perf_counter() - t_start
        for k, jf in enumerate(j_by_k, start=1):
            for j in range(1, jf + 1):
                ledger.charge(level, k, j, mesh.n_triangles, space.dim, t_now)

        quasi_h = quasi_z = None
        if params.diagnostics:
            h_steps = _quasi_errors(system, "primal", params, seed_u, stats_u, steps_u)
            z_steps = _quasi_errors(system, "dual", params, seed_z, stats_z, steps_z)
            cu = cz = 0
            for k, jf in enumerate(j_by_k, start=1):
                for j in range(1, jf + 1):
                    if k <= stats_u.m_final and j <= stats_u.n_steps[k - 1]:
                        cu += 1
                    if k <= stats_z.m_final and j <= stats_z.n_steps[k - 1]:
                        cz += 1
                    diag.append((level, k, j, h_steps[cu - 1], z_steps[cz - 1]))
            quasi_h = h_steps[-1]
            quasi_z = z_steps[-1]

        gval = goal_value(system, u, z)
        rec = HistoryRecord(
            level=level,
            ndofs=space.dim,
            n_elems=mesh.n_triangles,
            eta=field_u.total,
            zeta=field_z.total,
            est_product=field_u.total * field_z.total,
            goal=gval,
            goal_error=None,
            cum_cost=ledger.cum_cost,
            cum_time=time.perf_counter() - t_start,
            steps_primal=stats_u.total_steps,
            steps_dual=stats_z.total_steps,
            steps_combined=int(sum(j_by_k)),
            m_primal=stats_u.m_final,
            m_dual=stats_z.m_final,
            quasi_h=quasi_h,
            quasi_z=quasi_z,
        )
        records.append(rec)
        log.info("level %3d: ndofs %8d elems %8d eta*zeta %.4e cost %.3e",
                 level, rec.ndofs, rec.n_elems, rec.est_product, rec.cum_cost)

        if rec.est_product == 0.0:
            # an exactly vanishing estimator means the discrete solution is
            # exact; terminate with a success record instead of iterating
            estimator_zero = True
            break
        if params.tol is not None and rec.est_product <= params.tol:
            break
        if params.max_cost is not None and ledger.cum_cost >= params.max_cost:
            break
        if params.max_levels is not None and level >= params.max_levels:
            break

        marks_u = doerfler_mark(field_u, params.theta)
        marks_z = doerfler_mark(field_z, params.theta)
        marked = combine_marks(marks_u, marks_z, field_u, field_z)
        rec.n_marked = int(marked.size)
        marked_history.append(marked)

        mesh = refine(mesh, marked)
        hierarchy.append(mesh)
        u_prev, z_prev = u, z
        level += 1

    return RunResult(
        records=records,
        ledger=ledger,
        stats=all_stats,
        marked_history=marked_history,
        hierarchy=hierarchy,
        final_primal=u,
        final_dual=z,
        diagnostics=diag,
        estimator_zero=estimator_zero,
    )
