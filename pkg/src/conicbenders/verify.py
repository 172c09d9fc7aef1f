"""Grid oracles and duality checks, independent of the subsolver's method.

The oracles enumerate a uniform grid over the box, keep the points that are
feasible for ``g(x, y) <=_K z`` (membership tolerance ``1e-9``), and then
zoom in: each round re-grids a small window around the best few points and
shrinks the spacing by ``3 / (local - 1)`` until it falls below ``xtol``.
The spacing is held while the best point keeps travelling, so the search can
slide along a constraint boundary.

Pattern search can still stall where a kink of ``f`` meets a curved boundary,
a few 1e-4 above the infimum.  With ``polish`` on, the grid result is
therefore compared with an interior-point solve of the perturbed problem, and
the solver's point is kept only if exact evaluation of ``f`` and ``g`` confirms
it is feasible and better.  Either way the reported value is ``f`` at a
verified feasible point, hence an upper bound on ``v_y(z)``.  Enumeration is
only attempted for ``n <= 4``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import cones
from .errors import GridDimensionError, PreconditionError, SubproblemBreakdown
from .model import Instance, f_values, g_values
from .subsolver import (
    DEFAULT_CONFIG,
    OptimalityResiduals,
    SolverConfig,
    feasibility_certificate,
    initial_cut_vector,
    minimize_lagrangian,
    optimality_residuals,
    solve_primal,
)

MAX_GRID_DIM = 4
FEAS_TOL = 1e-9
DEFAULT_DENSITY = {1: 201, 2: 101, 3: 41, 4: 21}
_CHUNK = 1 << 18
_CACHE_LIMIT = 1 << 21
_MEMO_LIMIT = 4096
# zoom window points per axis, by dimension
_LOCAL = {1: 11, 2: 11, 3: 7}
_POLISH_TOL = 1e-10
_POLISH_SHIFT = 1e-9

__all__ = [
    "OptimalityResiduals",
    "PerturbationOracle",
    "brute_force_solve",
    "check_lipschitz_bound",
    "check_monotone_perturbation",
    "check_multiplier_subgradient",
    "check_optimality_conditions",
    "grid_min_weighted_g",
    "perturbation_value",
    "refined_grid_min",
    "run_checks",
]


def _require_small(inst):
    if inst.n > MAX_GRID_DIM:
        raise GridDimensionError(
            f"grid oracles handle n <= {MAX_GRID_DIM} (got n={inst.n}); "
            "use the subsolver and the property checks instead")


def grid_chunks(lo, hi, density, chunk=_CHUNK):
    """Yield the uniform ``density**n`` grid over ``[lo, hi]`` in row blocks."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    axes = [np.linspace(lo[j], hi[j], density) for j in range(n)]
    total = density ** n
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), (density,) * n)
        yield np.stack([axes[j][idx[j]] for j in range(n)], axis=-1)


def _top(points, values, keep):
    finite = np.isfinite(values)
    if not finite.any():
        return points[:0], values[:0]
    points, values = points[finite], values[finite]
    if len(values) > keep:
        sel = np.argpartition(values, keep - 1)[:keep]
        points, values = points[sel], values[sel]
    order = np.argsort(values, kind="stable")
    return points[order], values[order]


def _refine(fun, lo, hi, h, cand_x, cand_v, keep, local, xtol, max_rounds=2000):
    # pattern search: hold the scale while the best point keeps reaching the
    # edge of its window (it is sliding along a boundary), shrink otherwise
    n = lo.size
    offs = np.linspace(-1.5, 1.5, local)
    window = np.stack(np.meshgrid(*([offs] * n), indexing="ij"), axis=-1).reshape(-1, n)
    shrink = 3.0 / (local - 1)
    for _ in range(max_rounds):
        if np.max(h) <= xtol:
            break
        prev, prev_v = cand_x[0], cand_v[0]
        pts = (cand_x[:, None, :] + window[None, :, :] * h).reshape(-1, n)
        pts = np.clip(pts, lo, hi)
        vals = fun(pts)
        cand_x, cand_v = _top(np.vstack([cand_x, pts]), np.concatenate([cand_v, vals]), keep)
        travelled = np.any(np.abs(cand_x[0] - prev) > (1.5 - 0.5 * shrink) * h)
        if not (travelled and cand_v[0] < prev_v):
            h = h * shrink
    return cand_x, cand_v


def refined_grid_min(fun, lo, hi, density, *, keep=4, local=None, xtol=1e-9, coarse=None):
    """Minimize ``fun`` (``(N, n) -> (N,)``, ``+inf`` = infeasible) over a box.

    ``coarse`` may carry precomputed ``(points, values)`` of the initial grid.
    Returns ``(value, x)``; ``(inf, None)`` if no grid point is feasible.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if coarse is not None:
        cand_x, cand_v = _top(coarse[0], coarse[1], keep)
    else:
        cand_x, cand_v = np.empty((0, lo.size)), np.empty(0)
        for pts in grid_chunks(lo, hi, density):
            cand_x, cand_v = _top(np.vstack([cand_x, pts]), np.concatenate([cand_v, fun(pts)]), keep)
    if cand_v.size == 0:
        return math.inf, None
    h = (hi - lo) / (density - 1)
    local = local or _LOCAL.get(lo.size, 5)
    cand_x, cand_v = _refine(fun, lo, hi, h, cand_x, cand_v, keep, local, xtol)
    return float(cand_v[0]), cand_x[0]


class _PerturbedProgram:
    """``min f(x, y) s.t. g(x, y) <=_K z, x in X`` with ``z`` a cvxpy parameter."""

    def __init__(self, inst, y):
        import cvxpy as cp

        x = cp.Variable(inst.n)
        z = cp.Parameter(inst.cone.total_dim)
        cons = [x >= inst.lo, x <= inst.hi]
        for blk, sl, ent in inst.layout():
            if blk.kind == "orthant":
                cons += [row.to_cvx(x, y) <= z[sl.start + j] for j, row in enumerate(ent)]
            else:
                Ax, Ay, b = ent.matrices()
                slack = z[sl] - (Ax @ x + (Ay @ y + b))
                cons.append(cp.SOC(slack[0], slack[1:]))
        obj = inst.objective.to_cvx(x, y)
        self.prob = cp.Problem(cp.Minimize(obj if not np.isscalar(obj) else cp.Constant(obj)), cons)
        self.x = x
        self.z = z

    def solve(self, z):
        import cvxpy as cp

        self.z.value = z
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                self.prob.solve(solver=cp.CLARABEL, tol_feas=_POLISH_TOL, tol_gap_abs=_POLISH_TOL,
                                tol_gap_rel=_POLISH_TOL)
            except cp.error.SolverError:
                return None
        # inaccurate solves are fine: the caller re-checks the point exactly
        if self.prob.status not in ("optimal", "optimal_inaccurate") or self.x.value is None:
            return None
        return np.asarray(self.x.value, dtype=float)


class PerturbationOracle:
    """Grid evaluation of ``v_y(z) = min {f(x, y) : g(x, y) <=_K z, x in X}``.

    The coarse grid and its ``f``/``g`` values are computed once and reused for
    every ``z``; values are memoized per ``z``.
    """

    def __init__(self, inst: Instance, y, density=None, xtol=1e-9, polish=True):
        _require_small(inst)
        self.inst = inst
        self.index = inst.y_index(y)
        self.y = inst.y_array(self.index)
        self.density = density or DEFAULT_DENSITY[inst.n]
        if self.density < 10:
            raise PreconditionError("grid density must be at least 10 points per dimension")
        self.xtol = xtol
        self._polish = _PerturbedProgram(inst, self.y) if polish else None
        self._interior = initial_cut_vector(inst.cone)
        self._memo = {}
        self._coarse = None
        if self.density ** inst.n <= _CACHE_LIMIT:
            pts = next(grid_chunks(inst.lo, inst.hi, self.density, chunk=_CACHE_LIMIT))
            self._coarse = (pts, f_values(inst, pts, self.y) * np.ones(len(pts)),
                            g_values(inst, pts, self.y))

    def _fun(self, z):
        def fun(pts):
            vals = f_values(self.inst, pts, self.y) * np.ones(len(pts))
            ok = cones.contains(self.inst.cone, z - g_values(self.inst, pts, self.y), FEAS_TOL)
            return np.where(ok, vals, np.inf)
        return fun

    def solve(self, z=None):
        """``(v_y(z), argmin)``; ``(inf, None)`` when no feasible point is found."""
        inst = self.inst
        z = np.zeros(inst.cone.total_dim) if z is None else np.asarray(z, dtype=float)
        fun = self._fun(z)
        coarse = None
        if self._coarse is not None:
            pts, fv, gv = self._coarse
            ok = cones.contains(inst.cone, z - gv, FEAS_TOL)
            coarse = (pts, np.where(ok, fv, np.inf))
        value, x = refined_grid_min(fun, inst.lo, inst.hi, self.density, xtol=self.xtol, coarse=coarse)
        if self._polish is not None:
            # a second solve against a slightly tightened right-hand side
            # recovers points that miss feasibility by solver round-off
            for shift in (0.0, _POLISH_SHIFT):
                xp = self._polish.solve(z - shift * self._interior)
                if xp is None:
                    continue
                xp = np.clip(xp, inst.lo, inst.hi)
                vp = float(fun(xp[None, :])[0])
                if vp < value:
                    value, x = vp, xp
                if math.isfinite(vp):
                    break
        return value, x

    def value(self, z=None) -> float:
        key = None if z is None else np.asarray(z, dtype=float).tobytes()
        if key not in self._memo:
            if len(self._memo) >= _MEMO_LIMIT:
                self._memo.clear()
            self._memo[key] = self.solve(z)[0]
        return self._memo[key]


def _oracle(inst, y, density=None, xtol=1e-9, polish=True) -> PerturbationOracle:
    _require_small(inst)
    i = inst.y_index(y)
    key = ("grid", i, density or DEFAULT_DENSITY[inst.n], xtol, polish)
    if key not in inst._cache:
        inst._cache[key] = PerturbationOracle(inst, inst.y_array(i), density, xtol, polish)
    return inst._cache[key]


def perturbation_value(inst: Instance, y, z, grid_density=None, polish=True) -> float:
    return _oracle(inst, y, grid_density, polish=polish).value(z)


def brute_force_solve(inst: Instance, grid_density=None, polish=True):
    """Grid optimum over all of ``Y``: ``(value, x, y)``; ``(inf, None, None)`` if
    no grid point is feasible for any ``y``."""
    _require_small(inst)
    best = (math.inf, None, None)
    for i in range(len(inst.Y)):
        value, x = _oracle(inst, inst.y_array(i), grid_density, polish=polish).solve()
        if value < best[0]:
            best = (value, x, inst.y_array(i))
    return best


def grid_min_weighted_g(inst: Instance, y, z, n_points=10_000) -> float:
    """Plain-grid value of ``min_x <z, g(x, y)>`` on at least ``n_points`` points."""
    _require_small(inst)
    y = inst.y_array(inst.y_index(y))
    density = max(2, math.ceil(n_points ** (1.0 / inst.n) - 1e-9))
    z = np.asarray(z, dtype=float)
    return min(float(np.min(g_values(inst, pts, y) @ z))
               for pts in grid_chunks(inst.lo, inst.hi, density))


def check_optimality_conditions(inst: Instance, y, x, u,
                                cfg: SolverConfig = DEFAULT_CONFIG) -> OptimalityResiduals:
    return optimality_residuals(inst, y, x, u, cfg)


def _sample_box(rng, n_samples, m):
    return rng.uniform(-1.0, 1.0, size=(n_samples, m))


def check_multiplier_subgradient(inst: Instance, y, u, n_samples=100, rng_seed=0,
                                 grid_density=None) -> float:
    """Worst ``v(0) - <u, z> - v(z)`` over sampled ``z`` (positive = violation).

    A multiplier ``u`` satisfies ``-u in dv(0)`` exactly when this never exceeds 0.
    """
    oracle = _oracle(inst, y, grid_density)
    v0 = oracle.value()
    if not math.isfinite(v0):
        raise PreconditionError("the unperturbed subproblem has no feasible grid point")
    u = np.asarray(u, dtype=float)
    rng = np.random.default_rng(rng_seed)
    worst = -math.inf
    for z in _sample_box(rng, n_samples, inst.cone.total_dim):
        vz = oracle.value(z)
        if math.isfinite(vz):
            worst = max(worst, v0 - float(u @ z) - vz)
    return worst


def check_lipschitz_bound(inst: Instance, y, n_samples=100, rng_seed=0, grid_density=None) -> float:
    """Largest sampled ``(v(0) - v(z)) / |z|``; ``-inf`` if no sample is feasible."""
    oracle = _oracle(inst, y, grid_density)
    v0 = oracle.value()
    if not math.isfinite(v0):
        raise PreconditionError("the unperturbed subproblem has no feasible grid point")
    rng = np.random.default_rng(rng_seed)
    worst = -math.inf
    for z in _sample_box(rng, n_samples, inst.cone.total_dim):
        nz = np.linalg.norm(z)
        vz = oracle.value(z)
        if nz > 0 and math.isfinite(vz):
            worst = max(worst, (v0 - vz) / nz)
    return worst


@dataclass(frozen=True)
class PerturbationCheck:
    monotonicity: float
    convexity: float
    pairs: int

    @property
    def worst(self):
        return max(self.monotonicity, self.convexity)


def check_monotone_perturbation(inst: Instance, y, n_pairs=50, rng_seed=0, grid_density=None,
                                pairs=None) -> PerturbationCheck:
    """Sample ``z1 <=_K z2`` and measure ``v(z2) - v(z1)`` (should be <= 0) and the
    midpoint gap ``v((z1+z2)/2) - (v(z1)+v(z2))/2`` (should be <= 0).

    Pairs with ``v(z1) = inf`` hold vacuously.  Explicit ``pairs`` replace sampling.
    """
    oracle = _oracle(inst, y, grid_density)
    cone = inst.cone
    if pairs is None:
        rng = np.random.default_rng(rng_seed)
        z1s = _sample_box(rng, n_pairs, cone.total_dim)
        steps = cones.random_member(cone, rng, n_pairs) * rng.uniform(0.0, 1.0, (n_pairs, 1))
        pairs = list(zip(z1s, z1s + steps))
    mono = conv = 0.0
    for z1, z2 in pairs:
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        v1 = oracle.value(z1)
        if not math.isfinite(v1):
            continue
        v2 = oracle.value(z2)
        mono = max(mono, v2 - v1)
        if math.isfinite(v2):
            conv = max(conv, oracle.value(0.5 * (z1 + z2)) - 0.5 * (v1 + v2))
    return PerturbationCheck(mono, conv, len(pairs))


# ------------------------------------------------------------------- battery


CHECKS = (
    "certificate",
    "oracle-agreement",
    "optimality-conditions",
    "strong-duality",
    "weak-duality",
    "essential-feasibility",
    "multiplier-subgradient",
    "lipschitz",
    "monotone-perturbation",
)


@dataclass
class CheckResult:
    name: str
    y: list
    passed: bool
    value: float | None = None
    detail: str = ""

    def to_dict(self):
        v = self.value
        if v is not None and not math.isfinite(v):
            v = None
        return {"check": self.name, "y": self.y, "passed": self.passed, "value": v,
                "detail": self.detail}


def _random_duals(cone, rng, count):
    return cones.random_member(cone, rng, count) * rng.uniform(0.0, 10.0, (count, 1))


def _check_y(inst, y, cfg, rng_seed, density, only):
    ylist = [float(v) for v in y]
    out = []

    def add(name, passed, value=None, detail=""):
        if only is None or name in only:
            out.append(CheckResult(name, ylist, bool(passed), value, detail))

    def wanted(*names):
        return only is None or any(n in only for n in names)

    v0 = _oracle(inst, y, density).value()
    feasible = math.isfinite(v0)
    if wanted("certificate"):
        z = feasibility_certificate(inst, y, cfg)
        if z is None:
            add("certificate", True, None, "no certificate" + ("" if feasible else "; grid found no feasible point"))
        else:
            gmin = grid_min_weighted_g(inst, y, z)
            add("certificate", gmin > 0 and not feasible, gmin,
                "grid confirms certificate" if gmin > 0 else "grid contradicts certificate")
    if wanted("essential-feasibility"):
        rng = np.random.default_rng(rng_seed)
        vals = [minimize_lagrangian(inst, y, u, cfg)[1] for u in _random_duals(inst.cone, rng, 20)]
        add("essential-feasibility", all(math.isfinite(v) for v in vals), max(vals))
    if not feasible:
        return out
    if wanted("weak-duality"):
        rng = np.random.default_rng(rng_seed + 1)
        gaps = [minimize_lagrangian(inst, y, u, cfg)[1] - v0
                for u in _random_duals(inst.cone, rng, 100)]
        add("weak-duality", max(gaps) <= 1e-6, max(gaps))
    needs_solution = ("oracle-agreement", "optimality-conditions", "strong-duality",
                      "multiplier-subgradient", "lipschitz")
    if wanted(*needs_solution):
        try:
            sol = solve_primal(inst, y, cfg)
        except SubproblemBreakdown as exc:
            for name in needs_solution:
                add(name, False, None, str(exc))
            sol = None
        if sol is not None and not sol.optimal:
            for name in needs_solution:
                add(name, False, None, "solver certified infeasibility but the grid found a feasible point")
        elif sol is not None:
            diff = abs(sol.value - v0)
            add("oracle-agreement", diff <= 2e-3, diff)
            add("optimality-conditions", sol.residuals.passes(1e-4), sol.residuals.worst)
            _, lval = minimize_lagrangian(inst, y, sol.u_star, cfg)
            sd = abs(lval - v0)
            add("strong-duality", sd <= max(1e-4, 1e-3 * abs(v0)), sd)
            if wanted("multiplier-subgradient"):
                worst = check_multiplier_subgradient(inst, y, sol.u_star, 100, rng_seed, density)
                add("multiplier-subgradient", worst <= 1e-4, worst)
            if wanted("lipschitz"):
                est = float(check_lipschitz_bound(inst, y, 100, rng_seed, density))
                add("lipschitz", est < math.inf, est)
    if wanted("monotone-perturbation"):
        chk = check_monotone_perturbation(inst, y, 20, rng_seed, density)
        add("monotone-perturbation", chk.worst <= 1e-6, chk.worst)
    return out


def run_checks(inst: Instance, cfg: SolverConfig = DEFAULT_CONFIG, only=None, rng_seed=0,
               grid_density=None) -> list[CheckResult]:
    """Run the duality battery for every ``y`` in ``Y``; ``only`` restricts by name."""
    _require_small(inst)
    if only is not None:
        unknown = set(only) - set(CHECKS)
        if unknown:
            raise PreconditionError(f"unknown checks: {sorted(unknown)}")
        only = set(only)
    results = []
    for i in range(len(inst.Y)):
        results.extend(_check_y(inst, inst.y_array(i), cfg, rng_seed, grid_density, only))
    return results
