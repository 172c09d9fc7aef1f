"""Cut pools and the relaxed master problem.

An optimality cut with multiplier ``u`` contributes ``eta >= L(y, u)``; a
feasibility cut with unit vector ``z`` requires ``min_x <z, g(x, y)> <= 0``.
Both are functions of ``y`` alone, so with ``Y`` an explicit finite list the
relaxed master is solved exactly by evaluating every cut at every point.
Cut values are memoized per point, so each pool entry costs ``|Y|``
inner minimizations over its lifetime.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import cones
from .errors import MasterInfeasible, PreconditionError
from .model import Instance
from .subsolver import DEFAULT_CONFIG, SolverConfig, minimize_lagrangian

DUPLICATE_TOL = 1e-10


class CutKind(enum.Enum):
    OPTIMALITY = "Optimality"
    FEASIBILITY = "Feasibility"


@dataclass
class Cut:
    kind: CutKind
    vector: np.ndarray
    origin_iteration: int
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float)


def _check_cut(cut, inst, kind):
    if cut.kind is not kind:
        raise PreconditionError(f"expected a {kind.value} cut, got {cut.kind.value}")
    if not cones.dual_contains(inst.cone, cut.vector, 1e-9):
        raise PreconditionError("cut vector must lie in K+")
    if kind is CutKind.FEASIBILITY and abs(np.linalg.norm(cut.vector) - 1.0) > 1e-9:
        raise PreconditionError("feasibility cut vector must have unit norm")


def _evaluate(cut, inst, y, cfg, with_objective):
    i = inst.y_index(y)
    # the instance is stored with the value so a recycled id() can never hit
    hit = cut.cache.get((id(inst), i))
    if hit is None or hit[0] is not inst:
        _, value = minimize_lagrangian(inst, inst.y_array(i), cut.vector, cfg,
                                       with_objective=with_objective)
        hit = cut.cache[(id(inst), i)] = (inst, value)
    return hit[1]


def eval_optimality_cut(cut: Cut, inst: Instance, y, cfg: SolverConfig = DEFAULT_CONFIG) -> float:
    """``L(y, u)`` for the cut's multiplier ``u`` (memoized)."""
    _check_cut(cut, inst, CutKind.OPTIMALITY)
    return _evaluate(cut, inst, y, cfg, True)


def eval_feasibility_cut(cut: Cut, inst: Instance, y, cfg: SolverConfig = DEFAULT_CONFIG) -> float:
    """``min_x <z, g(x, y)>`` for the cut's unit vector ``z`` (memoized)."""
    _check_cut(cut, inst, CutKind.FEASIBILITY)
    return _evaluate(cut, inst, y, cfg, False)


@dataclass
class MasterState:
    T: list = field(default_factory=list)
    S: list = field(default_factory=list)
    UBD: float = float("inf")
    incumbent: tuple | None = None  # (x, y, value)
    k: int = 1

    def _duplicate(self, pool, vector):
        return any(np.linalg.norm(c.vector - vector) < DUPLICATE_TOL for c in pool)

    def add_optimality_cut(self, u, iteration) -> bool:
        """Append a cut unless an identical multiplier is already pooled."""
        if self._duplicate(self.T, u):
            return False
        self.T.append(Cut(CutKind.OPTIMALITY, u, iteration))
        return True

    def add_feasibility_cut(self, z, iteration) -> bool:
        if self._duplicate(self.S, z):
            return False
        self.S.append(Cut(CutKind.FEASIBILITY, z, iteration))
        return True

    def update_incumbent(self, x, y, value):
        if value < self.UBD:
            self.UBD = value
            self.incumbent = (np.asarray(x, dtype=float), np.asarray(y, dtype=float), value)


class MasterSolution(NamedTuple):
    y: np.ndarray
    eta: float
    index: int


def master_bound(state: MasterState, inst: Instance, i: int, cfg: SolverConfig = DEFAULT_CONFIG):
    """``eta(y_i)``, or ``None`` when some feasibility cut excludes ``y_i``."""
    y = inst.y_array(i)
    for cut in state.S:
        if eval_feasibility_cut(cut, inst, y, cfg) > cfg.cert_threshold:
            return None
    return max(eval_optimality_cut(cut, inst, y, cfg) for cut in state.T)


def solve_relaxed_master(state: MasterState, inst: Instance,
                         cfg: SolverConfig = DEFAULT_CONFIG) -> MasterSolution:
    """Minimize ``eta`` over the pooled cuts by enumerating ``Y``.

    Ties go to the smallest index in ``Y``.  Raises ``MasterInfeasible`` if every
    point is excluded by a feasibility cut.
    """
    if not state.T:
        raise PreconditionError("the relaxed master needs at least one optimality cut")
    best = None
    for i in range(len(inst.Y)):
        eta = master_bound(state, inst, i, cfg)
        if eta is not None and (best is None or eta < best[1]):
            best = (i, eta)
    if best is None:
        raise MasterInfeasible("every discrete point violates a feasibility cut")
    i, eta = best
    return MasterSolution(inst.y_array(i), eta, i)
