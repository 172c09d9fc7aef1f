"""Continuous pieces of the decomposition for a fixed discrete point ``y``.

* ``minimize_lagrangian``: ``L(y, u) = min_{x in X} f(x, y) + <u, g(x, y)>``
* ``solve_primal``: the subproblem ``min f(x, y) s.t. g(x, y) <=_K 0, x in X``
  together with an optimal multiplier ``u*`` in ``K+``
* ``feasibility_certificate``: a unit ``z*`` in ``K+`` with
  ``min_x <z*, g(x, y)> > 0`` whenever the subproblem is infeasible

Two interchangeable methods back these operations.  ``"conic"`` (default)
compiles each piece once per ``(instance, y)`` into a parametrized cvxpy
program solved by Clarabel; multipliers are the conic duals.  ``"subgradient"``
runs projected subgradient descent over the box for the inner minimization
and projected supergradient ascent over ``K+`` (clipped to a ball of radius
``dual_radius``) for the multiplier and the certificate.

The certificate search relies on the identity
``max_{z in K+, |z| <= 1} min_x <z, g(x)> = min_x dist(g(x), -K)``;
the conic method solves the right-hand side and reads ``z*`` off the
projection of ``g(x*)`` onto ``K``.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from . import cones
from .errors import MultiplierRadiusExceeded, PreconditionError, SubproblemBreakdown
from .model import Instance, _weighted_g_subgrad, f_values, g_values

METHODS = ("conic", "subgradient")


@dataclass(frozen=True)
class SolverConfig:
    inner_max_iter: int = 5000
    inner_tol: float = 1e-7
    dual_max_iter: int = 2000
    dual_tol: float = 1e-6
    dual_radius: float = 1e3
    step_a: float = 1.0
    step_b: float = 10.0
    cert_threshold: float = 1e-7
    method: str = "conic"
    max_outer: int | None = None

    def __post_init__(self):
        for name in ("inner_max_iter", "inner_tol", "dual_max_iter", "dual_tol",
                     "dual_radius", "step_a", "step_b", "cert_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.inner_tol < 10 * self.cert_threshold:
            raise ValueError("inner_tol must stay below 10 * cert_threshold")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.max_outer is not None and self.max_outer < 1:
            raise ValueError("max_outer must be positive")


DEFAULT_CONFIG = SolverConfig()


class SubproblemStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class OptimalityResiduals:
    """Residuals of the four saddle-point conditions at a pair ``(x, u)``.

    ``r_lagrangian_min``  f(x) + <u, g(x)> - min_x' (f(x') + <u, g(x')>)
    ``r_complementarity`` |<u, g(x)>|
    ``r_dual_cone``       distance of u to K+
    ``r_primal_feas``     distance of -g(x) to K
    """

    r_lagrangian_min: float
    r_complementarity: float
    r_dual_cone: float
    r_primal_feas: float

    @property
    def worst(self):
        return max(self.r_lagrangian_min, self.r_complementarity, self.r_dual_cone, self.r_primal_feas)

    def passes(self, tol):
        return self.worst <= tol


@dataclass
class SubproblemSolution:
    status: SubproblemStatus
    y: np.ndarray
    x_star: np.ndarray | None = None
    value: float = float("inf")
    u_star: np.ndarray | None = None
    z_star: np.ndarray | None = None
    residuals: OptimalityResiduals | None = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status is SubproblemStatus.OPTIMAL


def _check_y_u(inst, y, u):
    i = inst.y_index(y)
    u = np.asarray(u, dtype=float)
    if u.shape != (inst.cone.total_dim,):
        raise PreconditionError(f"u has shape {u.shape}, expected ({inst.cone.total_dim},)")
    if not cones.dual_contains(inst.cone, u, 1e-9):
        raise PreconditionError("u must lie in the dual cone K+")
    return i, inst.y_array(i), u


def _lagrangian_value(inst, x, y, u, with_objective=True):
    val = float(u @ g_values(inst, x, y))
    if with_objective:
        val += float(f_values(inst, x, y))
    return val


# ---------------------------------------------------------------- conic method


class _ConicPrograms:
    """Lazily compiled cvxpy programs for one ``(instance, y)`` pair."""

    def __init__(self, inst: Instance, y: np.ndarray):
        self.inst = inst
        self.y = y
        self._lagr = {}
        self._primal = None
        self._cert = None
        self.orth_idx = []
        self.soc = []  # (slice, Ax, Ay, b)
        for blk, sl, ent in inst.layout():
            if blk.kind == "orthant":
                self.orth_idx.extend(range(sl.start, sl.stop))
            else:
                self.soc.append((sl,) + ent.matrices())
        self.orth_idx = np.array(self.orth_idx, dtype=int)

    def _pieces(self, x):
        import cvxpy as cp

        rows, socs = [], []
        for blk, sl, ent in self.inst.layout():
            if blk.kind == "orthant":
                rows.extend(cp.Constant(e) if np.isscalar(e) else e
                            for e in (r.to_cvx(x, self.y) for r in ent))
            else:
                Ax, Ay, b = ent.matrices()
                socs.append(Ax @ x + (Ay @ self.y + b))
        return rows, socs

    def _box(self, x):
        return [x >= self.inst.lo, x <= self.inst.hi]

    def lagrangian(self, with_objective):
        import cvxpy as cp

        if with_objective not in self._lagr:
            x = cp.Variable(self.inst.n)
            rows, _ = self._pieces(x)
            w = cp.Parameter(self.inst.n)
            obj = w @ x
            uo = None
            if rows:
                uo = cp.Parameter(len(rows), nonneg=True)
                obj = obj + cp.sum(cp.multiply(uo, cp.hstack(rows)))
            if with_objective:
                obj = obj + self.inst.objective.to_cvx(x, self.y)
            prob = cp.Problem(cp.Minimize(obj), self._box(x))
            w.value = np.zeros(self.inst.n)
            if uo is not None:
                uo.value = np.zeros(len(rows))
            _warm(prob)
            self._lagr[with_objective] = (prob, x, uo, w)
        return self._lagr[with_objective]

    def primal(self):
        import cvxpy as cp

        if self._primal is None:
            x = cp.Variable(self.inst.n)
            rows, socs = self._pieces(x)
            row_cons = [r <= 0 for r in rows]
            soc_cons = [cp.SOC(-a[0], -a[1:]) for a in socs]
            obj = self.inst.objective.to_cvx(x, self.y)
            if np.isscalar(obj):
                obj = cp.Constant(obj)
            prob = cp.Problem(cp.Minimize(obj), self._box(x) + row_cons + soc_cons)
            _warm(prob)
            self._primal = (prob, x, row_cons, soc_cons)
        return self._primal

    def certificate(self):
        import cvxpy as cp

        if self._cert is None:
            x = cp.Variable(self.inst.n)
            s = cp.Variable(self.inst.cone.total_dim)
            rows, socs = self._pieces(x)
            cons = self._box(x)
            cons += [r <= s[i] for i, r in zip(self.orth_idx, rows)]
            for (sl, *_), a in zip(self.soc, socs):
                d = s[sl] - a
                cons.append(cp.SOC(d[0], d[1:]))
            prob = cp.Problem(cp.Minimize(cp.norm(s, 2)), cons)
            _warm(prob)
            self._cert = (prob, x, s)
        return self._cert


def _warm(prob):
    # cvxpy's first solve goes through a different canonicalization path than
    # later ones and can differ in the last bits; solving once here makes every
    # real solve independent of cache history, so replays are bit-identical
    try:
        _solve(prob)
    except SubproblemBreakdown:
        pass


def _programs(inst, i) -> _ConicPrograms:
    key = ("conic", i)
    if key not in inst._cache:
        inst._cache[key] = _ConicPrograms(inst, inst.y_array(i))
    return inst._cache[key]


def _solve(prob):
    import cvxpy as cp

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.error.SolverError as exc:
            raise SubproblemBreakdown(f"conic solver failed: {exc}") from None
    return prob.status


def _clip(inst, x):
    return np.clip(np.asarray(x, dtype=float), inst.lo, inst.hi)


def _conic_lagrangian(inst, i, y, u, with_objective):
    progs = _programs(inst, i)
    prob, x, uo, w = progs.lagrangian(with_objective)
    lin = np.zeros(inst.n)
    for sl, Ax, _, _ in progs.soc:
        lin += Ax.T @ u[sl]
    w.value = lin
    if uo is not None:
        uo.value = np.maximum(u[progs.orth_idx], 0.0)
    status = _solve(prob)
    if status not in ("optimal", "optimal_inaccurate"):
        raise SubproblemBreakdown(f"Lagrangian minimization ended with status {status}")
    xs = _clip(inst, x.value)
    return xs, _lagrangian_value(inst, xs, y, u, with_objective)


# ----------------------------------------------------------- subgradient method


def _subgradient_lagrangian(inst, y, u, cfg, x0, with_objective):
    lo, hi = inst.lo, inst.hi
    x = _clip(inst, inst.midpoint if x0 is None else x0)
    best_x, best = x, _lagrangian_value(inst, x, y, u, with_objective)
    for k in range(cfg.inner_max_iter):
        s = _weighted_g_subgrad(inst, x, y, u)
        if with_objective:
            s = s + inst.objective.subgrad(x, y)
        ns = np.linalg.norm(s)
        if ns == 0.0:
            break
        x_new = np.clip(x - cfg.step_a / (k + cfg.step_b) * (s / ns), lo, hi)
        if np.array_equal(x_new, x):
            # -s lies in the normal cone of the box: x is optimal
            break
        x = x_new
        val = _lagrangian_value(inst, x, y, u, with_objective)
        if val < best:
            best_x, best = x, val
    return best_x, best


def minimize_lagrangian(inst: Instance, y, u, cfg: SolverConfig = DEFAULT_CONFIG, *,
                        x0=None, with_objective=True):
    """Return ``(x, L(y, u))`` with ``x`` a minimizer over the box.

    With ``with_objective=False`` the objective is dropped, giving
    ``min_x <u, g(x, y)>`` as used by feasibility cuts.
    """
    i, y, u = _check_y_u(inst, y, u)
    if cfg.method == "conic":
        return _conic_lagrangian(inst, i, y, u, with_objective)
    return _subgradient_lagrangian(inst, y, u, cfg, x0, with_objective)


# ---------------------------------------------------------------- certificates


def initial_cut_vector(cone) -> np.ndarray:
    """Unit vector of ``K+``: ``1/sqrt(d)`` per orthant coordinate, ``(1, 0, ...)`` per
    second-order block, then normalized as a whole."""
    z = np.zeros(cone.total_dim)
    for blk, sl in cone.slices():
        if blk.kind == "orthant":
            z[sl] = 1.0 / np.sqrt(blk.dim)
        else:
            z[sl.start] = 1.0
    return z / np.linalg.norm(z)


def _unit(cone, z):
    z = cones.project(cone, z)
    nz = np.linalg.norm(z)
    return None if nz == 0.0 else z / nz


def _conic_violation(inst, i):
    progs = _programs(inst, i)
    prob, x, _ = progs.certificate()
    status = _solve(prob)
    if status not in ("optimal", "optimal_inaccurate"):
        raise SubproblemBreakdown(f"certificate search ended with status {status}")
    # the optimal slack is proj_K(g(x*)); rebuilding it from x* removes solver fuzz
    return float(prob.value), _unit(inst.cone, g_values(inst, _clip(inst, x.value), progs.y))


def _subgradient_violation(inst, y, cfg):
    cone = inst.cone
    z = initial_cut_vector(cone)
    x = None
    best, best_z = -np.inf, z
    for k in range(cfg.dual_max_iter):
        x, phi = _subgradient_lagrangian(inst, y, z, cfg, x, with_objective=False)
        if phi > best:
            best, best_z = phi, z
        z_new = cones.project(cone, z + cfg.step_a / (k + cfg.step_b) * g_values(inst, x, y))
        nz = np.linalg.norm(z_new)
        if nz > 1.0:
            z_new /= nz
        if np.linalg.norm(z_new - z) < cfg.dual_tol:
            z = z_new
            break
        z = z_new
    nz = np.linalg.norm(best_z)
    if nz == 0.0:
        return best, None
    return best / nz, best_z / nz


def feasibility_certificate(inst: Instance, y, cfg: SolverConfig = DEFAULT_CONFIG):
    """Unit ``z*`` in ``K+`` proving ``P(y)`` infeasible, or ``None``.

    A vector is only returned after ``min_x <z*, g(x, y)>`` has been recomputed
    and found above ``cfg.cert_threshold``.
    """
    i = inst.y_index(y)
    y = inst.y_array(i)
    if cfg.method == "conic":
        phi, z = _conic_violation(inst, i)
    else:
        phi, z = _subgradient_violation(inst, y, cfg)
    if z is None or phi <= cfg.cert_threshold:
        return None
    _, value = minimize_lagrangian(inst, y, z, cfg, with_objective=False)
    return z if value > cfg.cert_threshold else None


# --------------------------------------------------------------- primal solves


def optimality_residuals(inst: Instance, y, x, u, cfg: SolverConfig = DEFAULT_CONFIG):
    """Residuals of the saddle-point conditions; ``u`` is projected onto ``K+``
    before the Lagrangian gap is measured."""
    i = inst.y_index(y)
    y = inst.y_array(i)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    gx = g_values(inst, x, y)
    u_plus = cones.project(inst.cone, u)
    _, lmin = minimize_lagrangian(inst, y, u_plus, cfg)
    gap = float(f_values(inst, x, y)) + float(u_plus @ gx) - lmin
    return OptimalityResiduals(
        r_lagrangian_min=max(gap, 0.0),
        r_complementarity=abs(float(u @ gx)),
        r_dual_cone=float(cones.distance(inst.cone, u)),
        r_primal_feas=float(cones.distance(inst.cone, -gx)),
    )


def _conic_primal(inst, i, y, cfg):
    prob, x, row_cons, soc_cons = _programs(inst, i).primal()
    status = _solve(prob)
    if status not in ("optimal", "optimal_inaccurate"):
        raise SubproblemBreakdown(f"primal subproblem at y={y.tolist()} ended with status {status}")
    progs = _programs(inst, i)
    u = np.zeros(inst.cone.total_dim)
    for j, con in zip(progs.orth_idx, row_cons):
        u[j] = float(np.asarray(con.dual_value).ravel()[0])
    for (sl, *_), con in zip(progs.soc, soc_cons):
        head, tail = con.dual_value
        u[sl] = np.concatenate([np.ravel(head), np.ravel(tail)])
    u = cones.project(inst.cone, u)
    norm = float(np.linalg.norm(u))
    if status != "optimal" or not np.isfinite(norm) or norm >= cfg.dual_radius:
        raise MultiplierRadiusExceeded(y, norm if np.isfinite(norm) else np.inf, cfg.dual_radius)
    xs = _clip(inst, x.value)
    return xs, float(f_values(inst, xs, y)), u, 1


def _subgradient_primal(inst, y, cfg):
    cone = inst.cone
    R = cfg.dual_radius
    u = np.zeros(cone.total_dim)
    x = None
    best, best_u = -np.inf, u
    tail_start = cfg.dual_max_iter // 2
    x_sum, w_sum = np.zeros(inst.n), 0.0
    on_radius = False
    k = 0
    for k in range(cfg.dual_max_iter):
        x, val = _subgradient_lagrangian(inst, y, u, cfg, x, True)
        if val > best:
            best, best_u = val, u
        alpha = cfg.step_a / (k + cfg.step_b)
        if k >= tail_start:
            x_sum += alpha * x
            w_sum += alpha
        u_new = cones.project(cone, u + alpha * g_values(inst, x, y))
        nu = np.linalg.norm(u_new)
        on_radius = nu >= R
        if on_radius:
            u_new *= R / nu
        if np.linalg.norm(u_new - u) < cfg.dual_tol:
            u = u_new
            break
        u = u_new
    if on_radius:
        raise MultiplierRadiusExceeded(y, float(np.linalg.norm(u)), R)
    # primal recovery: step-weighted average of the inner minimizers over the tail
    x_star = x_sum / w_sum if w_sum > 0 else x
    return _clip(inst, x_star), best, best_u, k + 1


def solve_primal(inst: Instance, y, cfg: SolverConfig = DEFAULT_CONFIG) -> SubproblemSolution:
    """Solve ``P(y)``.

    Returns an ``Infeasible`` solution carrying a certificate when one exists,
    otherwise an ``Optimal`` one with ``x*``, ``v_y(0)`` and a multiplier.
    Raises ``MultiplierRadiusExceeded`` when no bounded multiplier is found.
    """
    i = inst.y_index(y)
    y = inst.y_array(i)
    z = feasibility_certificate(inst, y, cfg)
    if z is not None:
        return SubproblemSolution(SubproblemStatus.INFEASIBLE, y, z_star=z)
    if cfg.method == "conic":
        x, value, u, iters = _conic_primal(inst, i, y, cfg)
    else:
        x, value, u, iters = _subgradient_primal(inst, y, cfg)
    res = optimality_residuals(inst, y, x, u, cfg)
    return SubproblemSolution(SubproblemStatus.OPTIMAL, y, x_star=x, value=value, u_star=u,
                              residuals=res, iterations=iters)
