"""Generalized Benders decomposition driver.

Initialization picks the first feasible ``y`` in list order, solves its subproblem and
seeds the pools with its multiplier and a fixed unit vector of ``K+``.  Each
outer iteration then solves the relaxed master for ``(y, eta)``, stops when
``UBD <= eta + eps``, and otherwise solves ``P(y)``: a finite value either
closes the gap or adds an optimality cut, an infeasible one adds the
certificate as a feasibility cut.

Gaps are compared on values that each carry up to ``inner_tol`` error, so a
reported gap is only meaningful to within about ``2 * inner_tol``.
"""
from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, MasterInfeasible, SubproblemBreakdown
from .master import MasterState, solve_relaxed_master
from .model import Instance, validate
from .subsolver import (
    DEFAULT_CONFIG,
    SolverConfig,
    feasibility_certificate,
    initial_cut_vector,
    solve_primal,
)

log = logging.getLogger(__name__)


class GbdStatus(enum.Enum):
    EPS_OPTIMAL = "EpsOptimal"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"
    SOLVER_BREAKDOWN = "SolverBreakdown"


@dataclass
class IterationRecord:
    k: int
    y: tuple | None
    eta: float | None
    ubd: float
    subproblem_status: str | None = None
    cut_added: str | None = None
    value: float | None = None

    def to_dict(self):
        return {"k": self.k, "y": None if self.y is None else list(self.y), "eta": self.eta,
                "ubd": self.ubd, "subproblem_status": self.subproblem_status,
                "cut_added": self.cut_added, "value": self.value}


@dataclass
class GbdReport:
    status: GbdStatus
    best_value: float = math.inf
    best_point: tuple | None = None  # (x, y)
    final_eta: float = -math.inf
    final_ubd: float = math.inf
    iterations: list = field(default_factory=list)
    wall_time: float = 0.0
    primal_solves: int = 0
    diagnostics: list = field(default_factory=list)

    @property
    def gap(self):
        return self.final_ubd - self.final_eta


def find_initial_y(inst: Instance, cfg: SolverConfig = DEFAULT_CONFIG):
    """First ``y`` in list order without an infeasibility certificate, else ``None``."""
    for i in range(len(inst.Y)):
        y = inst.y_array(i)
        if feasibility_certificate(inst, y, cfg) is None:
            return y
    return None


def initial_feasibility_cut_vector(inst: Instance) -> np.ndarray:
    return initial_cut_vector(inst.cone)


def _y(y):
    return tuple(float(v) for v in y)


def gbd_solve(inst: Instance, eps: float, cfg: SolverConfig = DEFAULT_CONFIG) -> GbdReport:
    if not eps > 0:
        raise InputError("eps must be positive")
    diags = validate(inst)
    if diags:
        raise InputError("; ".join(diags))
    start = time.perf_counter()
    max_outer = cfg.max_outer or 10 * len(inst.Y)
    report = GbdReport(GbdStatus.ITERATION_LIMIT)
    trace = report.iterations

    def finish(status):
        report.status = status
        report.wall_time = time.perf_counter() - start
        log.info("gbd finished: %s value=%s after %d primal solves",
                 status.value, report.best_value, report.primal_solves)
        return report

    # initialization: first feasible y seeds both cut pools
    y1 = find_initial_y(inst, cfg)
    if y1 is None:
        trace.append(IterationRecord(1, None, None, math.inf, "Infeasible", None))
        report.diagnostics.append("every y in Y has an infeasibility certificate")
        return finish(GbdStatus.INFEASIBLE)
    try:
        sol = solve_primal(inst, y1, cfg)
    except SubproblemBreakdown as exc:
        report.diagnostics.append(str(exc))
        trace.append(IterationRecord(1, _y(y1), None, math.inf, "Breakdown", None))
        return finish(GbdStatus.SOLVER_BREAKDOWN)
    report.primal_solves = 1
    state = MasterState()
    state.add_optimality_cut(sol.u_star, 1)
    state.add_feasibility_cut(initial_feasibility_cut_vector(inst), 1)
    state.update_incumbent(sol.x_star, y1, sol.value)
    trace.append(IterationRecord(1, _y(y1), None, state.UBD, sol.status.value, "Optimality", sol.value))

    def sync():
        report.final_ubd = state.UBD
        report.best_value = state.UBD
        x, y, _ = state.incumbent
        report.best_point = (x, y)

    sync()
    for _ in range(max_outer):
        # relaxed master and stopping test
        try:
            master = solve_relaxed_master(state, inst, cfg)
        except MasterInfeasible as exc:
            report.diagnostics.append(str(exc))
            return finish(GbdStatus.INFEASIBLE)
        except SubproblemBreakdown as exc:
            report.diagnostics.append(str(exc))
            return finish(GbdStatus.SOLVER_BREAKDOWN)
        k = state.k + 1
        eta = master.eta
        report.final_eta = eta
        rec = IterationRecord(k, _y(master.y), eta, state.UBD)
        trace.append(rec)
        log.debug("k=%d y=%s eta=%.10g UBD=%.10g", k, rec.y, eta, state.UBD)
        if state.UBD <= eta + eps:
            return finish(GbdStatus.EPS_OPTIMAL)
        # subproblem at the master's y
        try:
            sol = solve_primal(inst, master.y, cfg)
        except SubproblemBreakdown as exc:
            report.diagnostics.append(str(exc))
            rec.subproblem_status = "Breakdown"
            return finish(GbdStatus.SOLVER_BREAKDOWN)
        report.primal_solves += 1
        rec.subproblem_status = sol.status.value
        if sol.optimal:
            rec.value = sol.value
            state.update_incumbent(sol.x_star, master.y, sol.value)
            rec.ubd = state.UBD
            sync()
            if sol.value <= eta + eps:
                return finish(GbdStatus.EPS_OPTIMAL)
            added = state.add_optimality_cut(sol.u_star, k)
            kind = "Optimality"
        else:
            added = state.add_feasibility_cut(sol.z_star, k)
            kind = "Feasibility"
        if not added:
            # a repeated cut leaves the master unchanged, so every further
            # iteration would reproduce this one
            report.diagnostics.append(
                f"stall at k={k}: duplicate {kind.lower()} cut for y={list(rec.y)}; "
                "eps is likely below the subsolver accuracy")
            return finish(GbdStatus.ITERATION_LIMIT)
        rec.cut_added = kind
        state.k = k
    report.diagnostics.append(f"no convergence within {max_outer} outer iterations")
    return finish(GbdStatus.ITERATION_LIMIT)
