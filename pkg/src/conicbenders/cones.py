"""Ordering cones built from nonnegative-orthant and second-order-cone blocks.

A ``ConeSpec`` is the product ``K = K_1 x ... x K_r``.  Vectors are laid out
block after block; a second-order block of dimension ``d`` stores ``(t, w)``
with ``t`` the scalar head and ``w`` the ``d - 1`` tail, and contains the
points with ``|w|_2 <= t``.

All functions accept either a single vector of length ``total_dim`` or a 2-D
array of stacked vectors (one per row); the result then has one entry per row.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Orthant:
    dim: int
    kind = "orthant"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise InputError(f"orthant block needs dim >= 1, got {self.dim}")


@dataclass(frozen=True)
class SecondOrderCone:
    dim: int
    kind = "soc"

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise InputError(f"second-order block needs dim >= 2, got {self.dim}")


@dataclass(frozen=True)
class ConeSpec:
    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        for b in self.blocks:
            if not isinstance(b, (Orthant, SecondOrderCone)):
                raise InputError(f"unknown cone block {b!r}")

    @property
    def total_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def slices(self):
        """Yield ``(block, slice)`` pairs in layout order."""
        start = 0
        for b in self.blocks:
            yield b, slice(start, start + b.dim)
            start += b.dim

    def to_list(self):
        return [{"kind": b.kind, "dim": b.dim} for b in self.blocks]

    @classmethod
    def from_list(cls, items):
        blocks = []
        for item in items:
            kind = item.get("kind")
            if kind == "orthant":
                blocks.append(Orthant(int(item["dim"])))
            elif kind == "soc":
                blocks.append(SecondOrderCone(int(item["dim"])))
            else:
                raise InputError(f"unknown cone block kind {kind!r}")
        return cls(tuple(blocks))


def orthant(dim: int) -> ConeSpec:
    return ConeSpec((Orthant(dim),))


def soc(dim: int) -> ConeSpec:
    return ConeSpec((SecondOrderCone(dim),))


def _as_array(cone: ConeSpec, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim not in (1, 2) or z.shape[-1] != cone.total_dim:
        raise InputError(
            f"vector of shape {z.shape} does not match cone dimension {cone.total_dim}"
        )
    return z


def margins(cone: ConeSpec, z) -> np.ndarray:
    """Per-block slack: min coordinate for orthants, ``t - |w|`` for SOC blocks.

    Shape ``(..., n_blocks)``.  ``z`` is in ``K`` iff every margin is >= 0 and in
    the interior iff every margin is > 0.
    """
    z = _as_array(cone, z)
    out = []
    for b, sl in cone.slices():
        blk = z[..., sl]
        out.append(_block_margin(b, blk))
    return np.stack(out, axis=-1)


def _block_margin(b, blk):
    if b.kind == "orthant":
        # reducing over a short trailing axis is slow in numpy; fold columns instead
        return functools.reduce(np.minimum, (blk[..., j] for j in range(b.dim)))
    return blk[..., 0] - np.sqrt(np.einsum("...i,...i->...", blk[..., 1:], blk[..., 1:]))


def interior_margin(cone: ConeSpec, z):
    """Smallest block margin; positive exactly when ``z`` is interior to ``K``."""
    z = _as_array(cone, z)
    return functools.reduce(np.minimum, (_block_margin(b, z[..., sl]) for b, sl in cone.slices()))


def contains(cone: ConeSpec, z, tol: float = 0.0):
    """Membership ``z in K`` up to ``tol``.

    ``g <=_K 0`` is checked as ``contains(cone, -g, tol)``.
    """
    if tol < 0:
        raise InputError("tolerance must be nonnegative")
    return interior_margin(cone, z) >= -tol


def dual_contains(cone: ConeSpec, u, tol: float = 0.0):
    # orthant and second-order blocks are both self-dual
    return contains(cone, u, tol)


def project(cone: ConeSpec, z) -> np.ndarray:
    """Euclidean projection onto ``K``, block by block."""
    z = _as_array(cone, z)
    p = np.array(z, copy=True)
    for b, sl in cone.slices():
        blk = z[..., sl]
        if b.kind == "orthant":
            p[..., sl] = np.maximum(blk, 0.0)
            continue
        t = blk[..., 0]
        w = blk[..., 1:]
        nw = np.linalg.norm(w, axis=-1)
        inside = nw <= t
        polar = nw <= -t
        scale = np.where(inside | polar, 0.0, 0.5 * (t + nw))
        safe = np.where(nw > 0, nw, 1.0)
        head = np.where(inside, t, np.where(polar, 0.0, scale))
        tail = np.where(
            inside[..., None], w, np.where(polar[..., None], 0.0, (scale / safe)[..., None] * w)
        )
        p[..., sl.start] = head
        p[..., sl.start + 1 : sl.stop] = tail
    return p


def distance(cone: ConeSpec, z):
    """Euclidean distance from ``z`` to ``K``."""
    z = _as_array(cone, z)
    return np.linalg.norm(z - project(cone, z), axis=-1)


def random_member(cone: ConeSpec, rng: np.random.Generator, size=None) -> np.ndarray:
    """A random point of ``K`` (projection of a standard normal draw)."""
    shape = (cone.total_dim,) if size is None else (size, cone.total_dim)
    return project(cone, rng.standard_normal(shape))
