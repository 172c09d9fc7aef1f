"""Reference instances and a seeded generator of random test instances.

Random instances mix orthant rows and at most one second-order block, have
``n <= 3`` and ``|Y| <= 8``, and are screened on a refined grid so that every
``y`` is either strictly feasible with a Slater margin of at least
``SLATER_MIN`` (the maximizing point is stored as the Slater hint) or
infeasible with ``min_x dist(g(x, y), -K) >= INFEAS_MIN``.  Borderline draws
are rejected and redrawn.
"""
from __future__ import annotations

import numpy as np

from . import cones
from .cones import ConeSpec, Orthant, SecondOrderCone
from .expr import (
    AbsOfAffine,
    AffineX,
    AffineY,
    Constant,
    MaxOf,
    NormOfAffineList,
    PosScale,
    SquareOfAffine,
    Sum,
)
from .model import Instance, SocAffine, g_values
from .verify import refined_grid_min

SLATER_MIN = 0.1
INFEAS_MIN = 0.05
SCREEN_DENSITY = {1: 101, 2: 41, 3: 21}


def toy_instance() -> Instance:
    """``min -x + max(y-1, 1-y)`` s.t. ``x + max(-y, y-2) <= 0``, ``x in [-1, 1]``, ``y in {0, 1, 2}``."""
    f = Sum([AffineX([-1.0]), MaxOf([AffineY([1.0], -1.0), AffineY([-1.0], 1.0)])])
    g = Sum([AffineX([1.0]), MaxOf([AffineY([-1.0], 0.0), AffineY([1.0], -2.0)])])
    return Instance(n=1, lower=[-1.0], upper=[1.0], Y=[[0.0], [1.0], [2.0]],
                    cone=cones.orthant(1), objective=f, constraints=[g],
                    slater_hints={0: [-1.0], 1: [-1.0], 2: [-1.0]}, name="toy")


def infeasible_instance() -> Instance:
    """``g(x, y) = x + 5`` on ``[-1, 1]``: no ``y`` is feasible."""
    return Instance(n=1, lower=[-1.0], upper=[1.0], Y=[[0.0], [1.0]], cone=cones.orthant(1),
                    objective=AffineX([1.0]), constraints=[AffineX([1.0], 5.0)], name="infeasible")


def nonslater_instance() -> Instance:
    """``min x`` s.t. ``x^2 <= 0``: feasible set ``{0}`` with empty interior, so no
    Lagrange multiplier exists."""
    return Instance(n=1, lower=[-1.0], upper=[1.0], Y=[[0.0]], cone=cones.orthant(1),
                    objective=AffineX([1.0]), constraints=[SquareOfAffine(AffineX([1.0]))],
                    name="nonslater")


def constant_instance(c=3.0) -> Instance:
    return Instance(n=1, lower=[-1.0], upper=[1.0], Y=[[0.0], [1.0]], cone=cones.orthant(1),
                    objective=Constant(c), constraints=[AffineX([1.0], -0.5)],
                    slater_hints={0: [-1.0], 1: [-1.0]}, name="const")


def _affine(rng, n, p, x_scale=1.0, y_scale=0.5):
    return Sum([AffineX(rng.normal(0.0, x_scale, n), rng.normal(0.0, 0.3)),
                AffineY(rng.normal(0.0, y_scale, p))])


def _convex_piece(rng, n, p):
    kind = rng.integers(5)
    if kind == 0:
        return MaxOf([_affine(rng, n, p) for _ in range(rng.integers(2, 4))])
    if kind == 1:
        return PosScale(rng.uniform(0.2, 1.0), SquareOfAffine(_affine(rng, n, p)))
    if kind == 2:
        return NormOfAffineList([_affine(rng, n, p) for _ in range(2)])
    if kind == 3:
        return AbsOfAffine(_affine(rng, n, p))
    return _affine(rng, n, p)


def _objective(rng, n, p):
    terms = [AffineX(rng.normal(0.0, 1.0, n))]
    terms += [_convex_piece(rng, n, p) for _ in range(rng.integers(1, 3))]
    return Sum(terms)


def _orthant_row(rng, n, p):
    return Sum([_convex_piece(rng, n, p), AffineY(rng.normal(0.0, 0.6, p)),
                Constant(-rng.uniform(0.3, 1.5))])


def _soc_block(rng, n, p, dim):
    Ax = rng.normal(0.0, 0.5, (dim, n))
    Ay = rng.normal(0.0, 0.3, (dim, p))
    b = rng.normal(0.0, 0.3, dim)
    b[0] = -rng.uniform(1.0, 2.5)
    Ax[0] *= 0.3
    return SocAffine(Ax.tolist(), Ay.tolist(), b.tolist())


def _draw(rng, n, with_soc):
    p = int(rng.integers(1, 3))
    size = int(rng.integers(1, 9))
    if p == 1:
        pool = [[float(v)] for v in range(-3, 5)]
    else:
        pool = [[float(a), float(b)] for a in range(-2, 3) for b in range(-2, 3)]
    picks = rng.choice(len(pool), size=min(size, len(pool)), replace=False)
    Y = [pool[j] for j in sorted(picks)]
    n_rows = int(rng.integers(1, 3))
    blocks = [Orthant(n_rows)]
    constraints = [_orthant_row(rng, n, p) for _ in range(n_rows)]
    if with_soc:
        dim = int(rng.integers(2, 4))
        blocks.append(SecondOrderCone(dim))
        constraints.append(_soc_block(rng, n, p, dim))
    lower = -rng.uniform(0.5, 2.0, n)
    upper = rng.uniform(0.5, 2.0, n)
    return dict(n=n, lower=lower.tolist(), upper=upper.tolist(), Y=Y,
                cone=ConeSpec(tuple(blocks)), objective=_objective(rng, n, p),
                constraints=constraints)


def screen(inst: Instance):
    """Classify each ``y``: returns ``(slater_margin, hint, infeasibility)`` triples."""
    out = []
    density = SCREEN_DENSITY.get(inst.n, 11)
    for i in range(len(inst.Y)):
        y = inst.y_array(i)

        def neg_margin(pts):
            return -cones.interior_margin(inst.cone, -g_values(inst, pts, y))

        def violation(pts):
            return cones.distance(inst.cone, -g_values(inst, pts, y))

        m, hint = refined_grid_min(neg_margin, inst.lo, inst.hi, density, xtol=1e-6)
        d, _ = refined_grid_min(violation, inst.lo, inst.hi, density, xtol=1e-6)
        out.append((-m, hint, d))
    return out


def random_instance(rng: np.random.Generator, n=None, with_soc=None, name="",
                    max_tries=200, allow_infeasible=True) -> Instance:
    """Draw until every ``y`` is clearly feasible (Slater) or clearly infeasible."""
    for _ in range(max_tries):
        nn = int(rng.integers(1, 4)) if n is None else n
        soc_flag = bool(rng.integers(2)) if with_soc is None else with_soc
        spec = _draw(rng, nn, soc_flag)
        inst = Instance(**spec, name=name)
        hints = {}
        ok = True
        for i, (margin, hint, infeas) in enumerate(screen(inst)):
            if margin >= SLATER_MIN:
                hints[i] = hint.tolist()
            elif infeas < INFEAS_MIN:
                ok = False
                break
        if not ok or (not hints and not allow_infeasible):
            continue
        return Instance(**spec, slater_hints=hints, name=name)
    raise RuntimeError("could not draw a well-separated instance")


def generate_corpus(count=50, seed=20240611):
    """Deterministic corpus: alternating SOC/orthant-only, cycling ``n = 1, 2, 3``."""
    rng = np.random.default_rng(seed)
    out = []
    for j in range(count):
        out.append(random_instance(rng, n=1 + j % 3, with_soc=(j % 2 == 0), name=f"rand{j:02d}",
                                   allow_infeasible=(j % 10 == 9)))
    return out
