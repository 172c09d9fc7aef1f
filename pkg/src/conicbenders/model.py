"""Problem instances: box ``X``, finite discrete set ``Y``, objective ``f`` and
constraint map ``g`` with ``g(x, y) <=_K 0``.

Orthant coordinates of ``g`` are convex expression trees; each second-order
block of ``g`` is an affine map ``x -> Ax x + Ay y + b``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import cones
from .cones import ConeSpec
from .errors import InputError, PreconditionError
from .expr import Expr

BOX_SLACK = 1e-9
SLATER_MARGIN = 1e-8


@dataclass(frozen=True)
class SocAffine:
    """One second-order block of ``g``: ``Ax @ x + Ay @ y + b``."""

    Ax: tuple
    Ay: tuple
    b: tuple

    def __post_init__(self):
        object.__setattr__(self, "Ax", tuple(tuple(float(v) for v in row) for row in self.Ax))
        object.__setattr__(self, "Ay", tuple(tuple(float(v) for v in row) for row in self.Ay))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))

    @property
    def dim(self):
        return len(self.b)

    def matrices(self):
        m = self.dim
        Ax = np.array(self.Ax, dtype=float).reshape(m, -1)
        Ay = np.array(self.Ay, dtype=float).reshape(m, -1)
        return Ax, Ay, np.array(self.b)

    def value(self, x, y):
        Ax, Ay, b = self.matrices()
        return np.asarray(x, dtype=float) @ Ax.T + (Ay @ np.asarray(y, dtype=float) + b)

    def to_dict(self):
        return {"type": "soc_affine", "Ax": [list(r) for r in self.Ax],
                "Ay": [list(r) for r in self.Ay], "b": list(self.b)}

    def check(self, n, p):
        out = []
        if any(len(r) != n for r in self.Ax) or len(self.Ax) != self.dim:
            out.append(f"soc_affine Ax must be {self.dim}x{n}")
        if any(len(r) != p for r in self.Ay) or len(self.Ay) != self.dim:
            out.append(f"soc_affine Ay must be {self.dim}x{p}")
        return out


@dataclass(frozen=True)
class Instance:
    n: int
    lower: tuple
    upper: tuple
    Y: tuple
    cone: ConeSpec
    objective: Expr
    constraints: tuple
    slater_hints: tuple = ()
    name: str = ""
    # per-instance memo for compiled solver programs and oracle grids
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        ys = []
        for y in self.Y:
            y = tuple(float(v) for v in np.atleast_1d(y))
            if y in ys:
                warnings.warn(f"duplicate discrete point {list(y)} dropped", stacklevel=3)
                continue
            ys.append(y)
        object.__setattr__(self, "Y", tuple(ys))
        hints = tuple(sorted((int(k), tuple(float(v) for v in x)) for k, x in dict(self.slater_hints).items()))
        object.__setattr__(self, "slater_hints", hints)

    @property
    def p(self):
        return len(self.Y[0]) if self.Y else 0

    @property
    def lo(self):
        return np.array(self.lower)

    @property
    def hi(self):
        return np.array(self.upper)

    @property
    def midpoint(self):
        return 0.5 * (self.lo + self.hi)

    def y_array(self, i):
        return np.array(self.Y[i])

    def y_index(self, y) -> int:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        for i, yy in enumerate(self.Y):
            if len(yy) == len(y) and np.allclose(yy, y, rtol=0.0, atol=1e-12):
                return i
        raise InputError(f"y={y.tolist()} is not in the discrete set Y")

    def hint(self, i):
        for k, x in self.slater_hints:
            if k == i:
                return np.array(x)
        return None

    def layout(self):
        """Pair each cone block with the constraint entries producing it.

        Raises ``InputError`` when entries and blocks do not line up.
        """
        if "layout" not in self._cache:
            self._cache["layout"] = self._layout()
        return self._cache["layout"]

    def _layout(self):
        out = []
        entries = list(self.constraints)
        pos = 0
        for blk, sl in self.cone.slices():
            if blk.kind == "orthant":
                rows = entries[pos : pos + blk.dim]
                if len(rows) != blk.dim or not all(isinstance(r, Expr) for r in rows):
                    raise InputError(f"orthant block of dim {blk.dim} needs {blk.dim} expression rows")
                out.append((blk, sl, tuple(rows)))
                pos += blk.dim
            else:
                ent = entries[pos] if pos < len(entries) else None
                if not isinstance(ent, SocAffine) or ent.dim != blk.dim:
                    raise InputError(f"soc block of dim {blk.dim} needs a soc_affine entry of that dim")
                out.append((blk, sl, ent))
                pos += 1
        if pos != len(entries):
            raise InputError("more constraint entries than cone blocks")
        return out

    @property
    def g_dim(self):
        return sum(1 if isinstance(e, Expr) else e.dim for e in self.constraints)


def _check_point(inst: Instance, x, y):
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise InputError(f"x has shape {x.shape}, expected ({inst.n},)")
    if np.any(x < inst.lo - BOX_SLACK) or np.any(x > inst.hi + BOX_SLACK):
        raise InputError(f"x={x.tolist()} lies outside the box")
    i = inst.y_index(y)
    return x, inst.y_array(i)


def f_values(inst: Instance, x, y):
    """Objective on a point or batch; no membership checks."""
    return inst.objective.value(x, y)


def g_values(inst: Instance, x, y):
    """Constraint map on a point ``(n,)`` or batch ``(N, n)``; no membership checks."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape[:-1] + (inst.cone.total_dim,))
    for blk, sl, ent in inst.layout():
        if blk.kind == "orthant":
            for j, row in enumerate(ent):
                out[..., sl.start + j] = row.value(x, y)
        else:
            out[..., sl] = ent.value(x, y)
    return out


def eval_f(inst: Instance, x, y) -> float:
    x, y = _check_point(inst, x, y)
    return float(f_values(inst, x, y))


def eval_g(inst: Instance, x, y) -> np.ndarray:
    x, y = _check_point(inst, x, y)
    return g_values(inst, x, y)


def subgrad_f(inst: Instance, x, y) -> np.ndarray:
    x, y = _check_point(inst, x, y)
    return np.asarray(inst.objective.subgrad(x, y), dtype=float)


def _weighted_g_subgrad(inst, x, y, u):
    s = np.zeros(inst.n)
    for blk, sl, ent in inst.layout():
        if blk.kind == "orthant":
            for j, row in enumerate(ent):
                w = u[sl.start + j]
                if w != 0.0:
                    s += w * row.subgrad(x, y)
        else:
            Ax, _, _ = ent.matrices()
            s += Ax.T @ u[sl]
    return s


def subgrad_weighted_g(inst: Instance, x, y, u) -> np.ndarray:
    """A subgradient of ``x -> <u, g(x, y)>`` for ``u`` in the dual cone."""
    x, y = _check_point(inst, x, y)
    u = np.asarray(u, dtype=float)
    if u.shape != (inst.cone.total_dim,):
        raise InputError(f"u has shape {u.shape}, expected ({inst.cone.total_dim},)")
    if not cones.dual_contains(inst.cone, u, 1e-9):
        raise PreconditionError("weights must lie in the dual cone K+")
    return _weighted_g_subgrad(inst, x, y, u)


@dataclass(frozen=True)
class PartialOrderWitness:
    z1: tuple
    z2: tuple
    holds: bool


def compare(cone: ConeSpec, z1, z2, tol: float = 0.0) -> PartialOrderWitness:
    """Decide ``z1 <=_K z2``, i.e. ``z2 - z1 in K``."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    holds = bool(cones.contains(cone, z2 - z1, tol))
    return PartialOrderWitness(tuple(z1.tolist()), tuple(z2.tolist()), holds)


def validate(inst: Instance) -> list[str]:
    """Structural diagnostics; an empty list means the instance is usable."""
    diags = []
    n = inst.n
    if n < 1:
        diags.append(f"n must be positive, got {n}")
    if len(inst.lower) != n or len(inst.upper) != n:
        diags.append(f"box bounds must have length n={n}")
    else:
        for i, (l, u) in enumerate(zip(inst.lower, inst.upper)):
            if not (np.isfinite(l) and np.isfinite(u)):
                diags.append(f"box coordinate {i} is not finite")
            elif l > u:
                diags.append(f"box coordinate {i} has lower {l} > upper {u}")
    if not inst.Y:
        diags.append("discrete set Y is empty")
    elif any(len(y) != inst.p for y in inst.Y):
        diags.append("points of Y have different dimensions")
    if not inst.cone.blocks:
        diags.append("cone has no blocks")
    if inst.g_dim != inst.cone.total_dim:
        diags.append(f"constraint map has dimension {inst.g_dim}, cone has {inst.cone.total_dim}")
    else:
        try:
            inst.layout()
        except InputError as exc:
            diags.append(str(exc))
    dim_diags = inst.objective.check(n, inst.p)
    for ent in inst.constraints:
        dim_diags.extend(ent.check(n, inst.p))
    diags.extend(dict.fromkeys(dim_diags))
    if diags:
        return diags
    for i, x in inst.slater_hints:
        if not 0 <= i < len(inst.Y):
            diags.append(f"slater hint refers to missing y index {i}")
            continue
        x = np.asarray(x)
        if x.shape != (n,) or np.any(x < inst.lo) or np.any(x > inst.hi):
            diags.append(f"slater hint for y index {i} is not a point of the box")
            continue
        margin = float(cones.interior_margin(inst.cone, -g_values(inst, x, inst.y_array(i))))
        if margin < SLATER_MARGIN:
            diags.append(f"slater hint for y index {i} is not strictly feasible (margin {margin:.3g})")
    return diags
