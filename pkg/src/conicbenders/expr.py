"""Expression trees that are convex in ``x`` for every fixed ``y`` by construction.

Grammar::

    Constant(c)                 c
    AffineX(a, b)               a.x + b
    AffineY(c, d)               c.y + d
    Sum(children)               sum of convex children
    PosScale(scale, child)      scale * child, scale >= 0
    MaxOf(children)             max of >= 2 affine-in-x children
    AbsOfAffine(child)          |affine|
    NormOfAffineList(children)  || (affine_1, ..., affine_k) ||_2
    SquareOfAffine(child)       (affine)^2

"Affine" means built from Constant, AffineX, AffineY, Sum and PosScale only.
Every node evaluates on a single point ``x`` of shape ``(n,)`` or on a batch of
shape ``(N, n)``; ``subgrad`` works on single points.  At kinks the subgradient
of the first maximizing branch is returned (``|v|`` is read as ``max(v, -v)``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


def _vec(v):
    return tuple(float(t) for t in v)


class Expr:
    is_affine = False

    def value(self, x, y):
        raise NotImplementedError

    def subgrad(self, x, y):
        raise NotImplementedError

    def to_cvx(self, x, y):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def children(self):
        return ()

    def check(self, n, p):
        """Dimension diagnostics for an instance with ``x`` in R^n and ``y`` in R^p."""
        out = []
        for c in self.children():
            out.extend(c.check(n, p))
        return out


@dataclass(frozen=True)
class Constant(Expr):
    c: float
    is_affine = True

    def __post_init__(self):
        object.__setattr__(self, "c", float(self.c))

    def value(self, x, y):
        return self.c

    def subgrad(self, x, y):
        return np.zeros(np.shape(x)[-1])

    def to_cvx(self, x, y):
        return self.c

    def to_dict(self):
        return {"type": "constant", "c": self.c}


@dataclass(frozen=True)
class AffineX(Expr):
    a: tuple
    b: float = 0.0
    is_affine = True

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a))
        object.__setattr__(self, "b", float(self.b))

    def value(self, x, y):
        return np.asarray(x, dtype=float) @ np.asarray(self.a) + self.b

    def subgrad(self, x, y):
        return np.array(self.a)

    def to_cvx(self, x, y):
        return x @ np.asarray(self.a) + self.b

    def to_dict(self):
        return {"type": "affine_x", "a": list(self.a), "b": self.b}

    def check(self, n, p):
        if len(self.a) != n:
            return [f"affine_x coefficient has length {len(self.a)}, expected n={n}"]
        return []


@dataclass(frozen=True)
class AffineY(Expr):
    c: tuple
    d: float = 0.0
    is_affine = True

    def __post_init__(self):
        object.__setattr__(self, "c", _vec(self.c))
        object.__setattr__(self, "d", float(self.d))

    def value(self, x, y):
        return float(np.asarray(y, dtype=float) @ np.asarray(self.c) + self.d)

    def subgrad(self, x, y):
        return np.zeros(np.shape(x)[-1])

    def to_cvx(self, x, y):
        return self.value(None, y)

    def to_dict(self):
        return {"type": "affine_y", "c": list(self.c), "d": self.d}

    def check(self, n, p):
        if len(self.c) != p:
            return [f"affine_y coefficient has length {len(self.c)}, expected p={p}"]
        return []


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise InputError("sum needs at least one term")

    @property
    def is_affine(self):
        return all(t.is_affine for t in self.terms)

    def children(self):
        return self.terms

    def value(self, x, y):
        total = 0.0
        for t in self.terms:
            total = total + t.value(x, y)
        return total

    def subgrad(self, x, y):
        return sum(t.subgrad(x, y) for t in self.terms)

    def to_cvx(self, x, y):
        return sum(t.to_cvx(x, y) for t in self.terms)

    def to_dict(self):
        return {"type": "sum", "args": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class PosScale(Expr):
    scale: float
    child: Expr

    def __post_init__(self):
        object.__setattr__(self, "scale", float(self.scale))
        if not self.scale >= 0:
            raise InputError(f"pos_scale needs a nonnegative coefficient, got {self.scale}")

    @property
    def is_affine(self):
        return self.child.is_affine

    def children(self):
        return (self.child,)

    def value(self, x, y):
        return self.scale * self.child.value(x, y)

    def subgrad(self, x, y):
        return self.scale * self.child.subgrad(x, y)

    def to_cvx(self, x, y):
        return self.scale * self.child.to_cvx(x, y)

    def to_dict(self):
        return {"type": "pos_scale", "scale": self.scale, "arg": self.child.to_dict()}


def _require_affine(node, what):
    if not node.is_affine:
        raise InputError(f"{what} accepts only affine arguments, got {node.to_dict()['type']}")


@dataclass(frozen=True)
class MaxOf(Expr):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if len(self.terms) < 2:
            raise InputError("max needs at least two arguments")
        for t in self.terms:
            _require_affine(t, "max")

    def children(self):
        return self.terms

    def value(self, x, y):
        vals = [t.value(x, y) for t in self.terms]
        if np.ndim(x) > 1:
            return np.maximum.reduce(np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in vals]))
        return max(float(v) for v in vals)

    def subgrad(self, x, y):
        vals = [float(t.value(x, y)) for t in self.terms]
        return self.terms[int(np.argmax(vals))].subgrad(x, y)

    def to_cvx(self, x, y):
        import cvxpy as cp

        return cp.maximum(*[t.to_cvx(x, y) for t in self.terms])

    def to_dict(self):
        return {"type": "max", "args": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class AbsOfAffine(Expr):
    child: Expr

    def __post_init__(self):
        _require_affine(self.child, "abs")

    def children(self):
        return (self.child,)

    def value(self, x, y):
        return np.abs(self.child.value(x, y))

    def subgrad(self, x, y):
        g = self.child.subgrad(x, y)
        return g if self.child.value(x, y) >= 0 else -g

    def to_cvx(self, x, y):
        import cvxpy as cp

        return cp.abs(self.child.to_cvx(x, y))

    def to_dict(self):
        return {"type": "abs", "arg": self.child.to_dict()}


@dataclass(frozen=True)
class NormOfAffineList(Expr):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise InputError("norm needs at least one argument")
        for t in self.terms:
            _require_affine(t, "norm")

    def children(self):
        return self.terms

    def value(self, x, y):
        vals = np.broadcast_arrays(*[np.asarray(t.value(x, y), dtype=float) for t in self.terms])
        return np.sqrt(sum(v * v for v in vals))[()]

    def subgrad(self, x, y):
        r = np.array([float(t.value(x, y)) for t in self.terms])
        nr = np.linalg.norm(r)
        if nr == 0.0:
            return np.zeros(np.shape(x)[-1])
        jac = np.array([t.subgrad(x, y) for t in self.terms])
        return jac.T @ (r / nr)

    def to_cvx(self, x, y):
        import cvxpy as cp

        return cp.norm(cp.hstack([t.to_cvx(x, y) for t in self.terms]), 2)

    def to_dict(self):
        return {"type": "norm", "args": [t.to_dict() for t in self.terms]}


@dataclass(frozen=True)
class SquareOfAffine(Expr):
    child: Expr

    def __post_init__(self):
        _require_affine(self.child, "square")

    def children(self):
        return (self.child,)

    def value(self, x, y):
        v = self.child.value(x, y)
        return v * v

    def subgrad(self, x, y):
        return 2.0 * float(self.child.value(x, y)) * self.child.subgrad(x, y)

    def to_cvx(self, x, y):
        import cvxpy as cp

        return cp.square(self.child.to_cvx(x, y))

    def to_dict(self):
        return {"type": "square", "arg": self.child.to_dict()}


def expr_from_dict(d) -> Expr:
    if not isinstance(d, dict) or "type" not in d:
        raise InputError(f"expression node must be an object with a 'type' key, got {d!r}")
    kind = d["type"]
    try:
        if kind == "constant":
            return Constant(d["c"])
        if kind == "affine_x":
            return AffineX(d["a"], d.get("b", 0.0))
        if kind == "affine_y":
            return AffineY(d["c"], d.get("d", 0.0))
        if kind == "sum":
            return Sum([expr_from_dict(t) for t in d["args"]])
        if kind == "pos_scale":
            return PosScale(d["scale"], expr_from_dict(d["arg"]))
        if kind == "max":
            return MaxOf([expr_from_dict(t) for t in d["args"]])
        if kind == "abs":
            return AbsOfAffine(expr_from_dict(d["arg"]))
        if kind == "norm":
            return NormOfAffineList([expr_from_dict(t) for t in d["args"]])
        if kind == "square":
            return SquareOfAffine(expr_from_dict(d["arg"]))
    except KeyError as exc:
        raise InputError(f"expression node {kind!r} is missing key {exc}") from None
    raise InputError(f"unknown expression type {kind!r}")
