"""Self- and mutual intersection local times, and folding onto the torus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .lattice_walk import LocalTimeBatch, LocalTimeField, aggregate_sites

@dataclass(frozen=True)
class IntersectionValue:
    value: float
    exponent_q: float
    kind: str  # "self" | "mutual"

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("intersection value must be nonnegative")
        if self.kind == "mutual" and (self.exponent_q != int(self.exponent_q) or self.exponent_q < 2):
            raise ValueError("mutual intersections need an integer q >= 2")

    def __float__(self):
        return self.value


def _sum(x: np.ndarray) -> float:
    # correctly rounded, so the result depends only on the multiset of terms:
    # a fold that merges nothing reproduces the value bit for bit
    return math.fsum(x)


def silt(field: LocalTimeField, q: float, allow_unit: bool = False) -> IntersectionValue:
    """``sum_x l(x)**q`` over the support of ``field``.

    ``q = 1`` is rejected unless ``allow_unit`` is set; it then returns the
    total mass, which is how the mass-conservation identity is checked.
    """
    if not (q > 1 or (allow_unit and q == 1)):
        raise ParameterError(f"q must be > 1, got {q!r}")
    return IntersectionValue(_sum(field.times**q), float(q), "self")


def lq_norm(field: LocalTimeField, q: float) -> float:
    """``||l||_q``, i.e. ``silt(field, q) ** (1/q)``."""
    return silt(field, q, allow_unit=True).value ** (1.0 / q)


def silt_batch(batch: LocalTimeBatch, q: float, exact: bool = True) -> np.ndarray:
    """Per-walk self-intersection values of a batch.

    ``exact`` sums each walk with ``math.fsum`` (order independent, as in
    ``silt``); otherwise a single ``bincount`` pass is used.
    """
    if not q >= 1:
        raise ParameterError(f"q must be >= 1, got {q!r}")
    if not exact:
        return batch.power_sums(q)
    terms = batch.times**q
    return np.array([math.fsum(terms[a:b]) for a, b in zip(batch.offsets[:-1], batch.offsets[1:])])


def _check_same_geometry(fields: Sequence[LocalTimeField]):
    d, R = fields[0].dimension, fields[0].torus_R
    for f in fields[1:]:
        if f.dimension != d or f.torus_R != R:
            raise ParameterError("fields must share dimension and geometry")


def milt(fields: Sequence[LocalTimeField]) -> IntersectionValue:
    """``sum_x prod_i l_i(x)`` for ``q = len(fields)`` independent walks."""
    q = len(fields)
    if q < 2:
        raise ParameterError("mutual intersection needs at least two fields")
    _check_same_geometry(fields)
    if any(len(f) == 0 for f in fields):
        return IntersectionValue(0.0, float(q), "mutual")
    allsites = np.concatenate([f.sites for f in fields])
    _, inv = np.unique(allsites, axis=0, return_inverse=True)
    inv = inv.ravel()
    nuniq = int(inv.max()) + 1
    prod = np.ones(nuniq)
    start = 0
    for f in fields:
        v = np.zeros(nuniq)
        v[inv[start:start + len(f)]] = f.times
        prod *= v
        start += len(f)
    return IntersectionValue(_sum(prod), float(q), "mutual")


def fold(field: LocalTimeField, R: int) -> LocalTimeField:
    """Project a Z^d field onto T_R: mass at ``x mod R`` is ``sum_k l(x + kR)``."""
    if int(R) != R or R < 1:
        raise ParameterError(f"R must be an integer >= 1, got {R!r}")
    if field.torus_R is not None:
        raise ParameterError("fold expects a field on Z^d")
    sites, times = aggregate_sites(field.sites % R, field.times)
    return LocalTimeField(field.dimension, int(R), sites, times, field.elapsed, field.jumps)


def fold_batch(batch: LocalTimeBatch, R: int) -> LocalTimeBatch:
    if int(R) != R or R < 1:
        raise ParameterError(f"R must be an integer >= 1, got {R!r}")
    if batch.torus_R is not None:
        raise ParameterError("fold expects fields on Z^d")
    d = batch.dimension
    walk = batch.walk_index()
    flat = np.ravel_multi_index(tuple((batch.sites % R).T), (R,) * d)
    key = walk * R**d + flat
    ukey, inv = np.unique(key, return_inverse=True)
    tot = np.bincount(inv.ravel(), weights=batch.times, minlength=len(ukey))
    uwalk = ukey // R**d
    sites = np.column_stack(np.unravel_index(ukey % R**d, (R,) * d)).astype(np.int64)
    offsets = np.zeros(len(batch) + 1, dtype=np.int64)
    np.cumsum(np.bincount(uwalk, minlength=len(batch)), out=offsets[1:])
    return LocalTimeBatch(d, int(R), offsets, sites, tot, batch.elapsed, batch.jumps, batch.max_norm)
