"""Monte Carlo check of Eisenbaum's isomorphism on the torus.

For the walk on T_R started at 0 and killed at an independent Exp(lam)
time, and Z the centered Gaussian field with covariance G_{R,lam},

    E[F(l_tau + (Z + s)^2 / 2)] = E[F((Z + s)^2 / 2) (1 + Z_0 / s)]

for every bounded measurable F and s != 0.  The two sides are estimated
from independent streams and compared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .gaussian_field import sample_fields
from .lattice_walk import WalkConfig, simulate_batch
from .mc import BLOCK, FIELD, FIELD_RHS, MCEstimate
from .torus_green import build_kernel

KINDS = ("constant", "linear", "exponential")


@dataclass(frozen=True, eq=False)
class TestFunctional:
    """``F(S)`` = 1, ``sum a_x S_x`` or ``exp(-sum a_x S_x)`` on T_R."""

    __test__ = False  # not a pytest class

    kind: str
    d: int
    R: int
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown functional kind {self.kind!r}; valid: {KINDS}")
        if self.kind != "constant":
            w = np.asarray(self.weights, dtype=float)
            if w.size == 1:
                w = np.full(self.R**self.d, float(w))
            w = w.reshape(-1)
            if w.size != self.R**self.d:
                raise ParameterError("one weight per torus site is required")
            if np.any(w < 0):
                raise ParameterError("weights must be nonnegative")
            object.__setattr__(self, "weights", w)

    @classmethod
    def constant(cls, d, R):
        return cls("constant", d, R)

    @classmethod
    def exponential(cls, d, R, weights):
        return cls("exponential", d, R, weights)

    @classmethod
    def linear(cls, d, R, weights):
        return cls("linear", d, R, weights)

    def __call__(self, S: np.ndarray) -> np.ndarray:
        """Evaluate on a stack ``S`` of shape ``(n, R**d)``."""
        if self.kind == "constant":
            return np.ones(len(S))
        lin = S @ self.weights
        if self.kind == "linear":
            return lin
        return np.exp(-lin)


def _check(F: TestFunctional, d, R, s, n):
    if s == 0:
        raise ParameterError("the shift s must be nonzero")
    if (F.d, F.R) != (d, R):
        raise ParameterError("functional and torus disagree")
    if n < 1:
        raise ParameterError("n must be >= 1")


def lhs_estimate(F: TestFunctional, d: int, R: int, lam: float, s: float, n: int,
                 seed: int, block: int = BLOCK) -> MCEstimate:
    """Estimate ``E[F(l_tau + (Z+s)^2/2)]``."""
    _check(F, d, R, s, n)
    if F.kind == "linear":
        raise ParameterError("linear F is unbounded; use analytic_linear_check")
    kernel = build_kernel(d, R, lam)
    vals = np.empty(n)
    if F.kind == "constant" or not np.any(F.weights):
        vals[:] = 1.0
    else:
        cfg = WalkConfig(d, torus_R=R, stop_rate=lam, seed=seed)
        for b, (start, z) in enumerate(sample_fields(kernel, n, seed, FIELD, block)):
            m = len(z)
            ell = simulate_batch(cfg, m, block=block, first_block=b).dense()
            S = ell + 0.5 * (z.reshape(m, -1) + s) ** 2
            vals[start:start + m] = F(S)
    return MCEstimate.from_samples(vals, seed, side="lhs", d=d, R=R, lam=lam, s=s)


def rhs_estimate(F: TestFunctional, d: int, R: int, lam: float, s: float, n: int,
                 seed: int, common_numbers: bool = False, block: int = BLOCK) -> MCEstimate:
    """Estimate ``E[F((Z+s)^2/2) (1 + Z_0/s)]``; the weight is signed.

    ``common_numbers`` reuses the Gaussian stream of ``lhs_estimate`` with
    the same seed; off by default so the two estimators are independent.
    """
    _check(F, d, R, s, n)
    if F.kind == "linear":
        raise ParameterError("linear F is unbounded; use analytic_linear_check")
    kernel = build_kernel(d, R, lam)
    tag = FIELD if common_numbers else FIELD_RHS
    vals = np.empty(n)
    for start, z in sample_fields(kernel, n, seed, tag, block):
        m = len(z)
        flat = z.reshape(m, -1)
        vals[start:start + m] = F(0.5 * (flat + s) ** 2) * (1.0 + flat[:, 0] / s)
    return MCEstimate.from_samples(vals, seed, side="rhs", d=d, R=R, lam=lam, s=s)


@dataclass(frozen=True)
class LinearCheck:
    lhs_closed: float
    rhs_closed: float
    gap: float


def analytic_linear_check(d: int, R: int, lam: float, s: float, weights) -> LinearCheck:
    """Both sides of the identity for ``F(S) = sum a_x S_x`` in closed form.

    Left: ``E_0 l_tau(x) = G(0,x)`` and ``E (Z_x+s)^2/2 = (G(x,x)+s^2)/2``.
    Right: the extra term is ``E[(Z_x+s)^2 Z_0] / (2s) = G(x,0)`` because
    odd Gaussian moments vanish.
    """
    if s == 0:
        raise ParameterError("the shift s must be nonzero")
    kernel = build_kernel(d, R, lam)
    a = np.asarray(weights, dtype=float).reshape(-1)
    if a.size != kernel.volume:
        raise ParameterError("one weight per torus site is required")
    row = kernel.green_row.ravel()                       # G(0, x)
    shape = kernel.shape
    coords = np.array(np.unravel_index(np.arange(kernel.volume), shape))
    back = row[np.ravel_multi_index(tuple((-coords) % R), shape)]  # G(x, 0)
    diag = row[0]                                        # G(x, x)
    lhs = float(np.sum(a * (row + 0.5 * (diag + s * s))))
    rhs = float(np.sum(a * (0.5 * (diag + s * s) + back)))
    return LinearCheck(lhs, rhs, abs(lhs - rhs))
