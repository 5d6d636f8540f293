"""Variational constants on the torus and in a box.

rho1(lam, R) = inf { lam ||f||_2^2 + ||grad f||_2^2 : ||f||_{2q} = 1 }   on T_R
rho2(lam, R) = sup { <f, G f> : ||f||_{(2q)'} = 1 },  G = (lam - Delta)^{-1}
sobolev      = inf { ||grad f||_2^2 / ||f||_{2q}^2 : supp f in [-L, L]^d }, q = d/(d-2)

rho1 * rho2 = 1, and the box value decreases to 1/C_S(d)^2 as L grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import DomainError, ParameterError
from .torus_green import build_kernel, laplacian


@dataclass
class VariationalSolution:
    value: float
    minimizer: np.ndarray
    lagrange_residual: float
    iterations: int
    converged: bool
    kind: str = ""
    history: list[float] = field(default_factory=list, repr=False)
    info: dict[str, Any] = field(default_factory=dict)


def critical_q(d: int) -> float:
    if d <= 2:
        raise DomainError(f"no critical exponent in d={d}")
    return d / (d - 2)


def dual_exponent(q: float) -> float:
    """``(2q)' = 2q / (2q - 1)``, exact in rationals when ``2q`` is rational."""
    two_q = Fraction(q).limit_denominator(10**6) * 2
    if abs(float(two_q) - 2 * q) < 1e-15:
        return float(two_q / (two_q - 1))
    return 2 * q / (2 * q - 1)


def _pnorm(f: np.ndarray, p: float) -> float:
    return float(np.sum(np.abs(f) ** p) ** (1.0 / p))


def _check(d, R, lam, q):
    if int(d) != d or d < 1:
        raise ParameterError("d must be an integer >= 1")
    if int(R) != R or R < 1:
        raise ParameterError("R must be an integer >= 1")
    if not lam > 0:
        raise ParameterError("lambda must be > 0")
    if not q > 1:
        raise ParameterError("q must be > 1")


def _torus_dist2(d: int, R: int, center: int) -> np.ndarray:
    r = np.arange(R) - center
    r = np.minimum(np.abs(r), R - np.abs(r)).astype(float)
    out = r**2
    for _ in range(d - 1):
        out = np.add.outer(out, r**2)
    return np.asarray(out, dtype=float)


def bump(d: int, R: int) -> np.ndarray:
    """``(1 + |x - c|^2)^{-(d-2)/2}`` centred in the torus (periodic distance)."""
    expo = max(d - 2, 1) / 2
    return (1.0 + _torus_dist2(d, R, R // 2)) ** (-expo)


def _circular_center(w: np.ndarray, d: int, R: int) -> list[int]:
    shifts = []
    for ax in range(d):
        other = tuple(a for a in range(d) if a != ax)
        m = w.sum(axis=other) if other else w
        ang = 2 * np.pi * np.arange(R) / R
        z = np.sum(m * np.exp(1j * ang))
        shifts.append(0 if abs(z) < 1e-12 * m.sum() else int(round(np.angle(z) / (2 * np.pi) * R)) % R)
    return shifts


def canonicalize(f: np.ndarray, d: int, R: int, weight_power: float = 2.0) -> np.ndarray:
    """Roll a torus minimizer so that its mass barycenter sits at the origin."""
    shifts = _circular_center(np.abs(f) ** weight_power, d, R)
    return np.roll(f, [-s for s in shifts], axis=tuple(range(d)))


# ---------------------------------------------------------------- rho1

def _project(f, p):
    g = np.maximum(f, 0.0)
    n = _pnorm(g, p)
    return g / n if n > 0 else None


def _rho1_descent(f0, d, lam, q, tol, max_iter, step0=0.1, c1=1e-4, polish=None):
    p = 2 * q
    f = _project(f0, p)
    Af = lam * f - laplacian(f, d)
    E = float(np.sum(f * Af))
    hist = [E]
    prev = None
    it = 0
    res = math.inf
    step = step0
    for it in range(1, max_iter + 1):
        r = Af - E * f ** (p - 1)
        res = float(np.sqrt(np.sum(r * r)))
        if res <= tol:
            it -= 1
            break
        if prev is not None:
            s_, y_ = f - prev[0], r - prev[1]
            sy = float(np.sum(s_ * y_))
            if sy > 0:
                step = min(max(float(np.sum(s_ * s_)) / sy, 1e-8), 1e4)
        t = step
        floor = 8 * np.finfo(float).eps * abs(E)
        while True:
            g = _project(f - t * r, p)
            if g is not None:
                Ag = lam * g - laplacian(g, d)
                Eg = float(np.sum(g * Ag))
                need = c1 * t * res * res
                if Eg <= E - need or (need < floor and Eg <= E):
                    break
            t *= 0.5
            if t < 1e-14:
                g = None
                break
        if g is None or (need < floor and Eg >= E):
            # energy decrease no longer representable
            break
        prev = (f, r)
        f, Af, E = g, Ag, Eg
        hist.append(E)
    r = Af - E * f ** (p - 1)
    res = float(np.sqrt(np.sum(r * r)))
    k = 0
    if res > tol and polish is not None:
        f, Af, E, res, k = _polish(f, E, res, d, lam, q, tol, polish)
    return f, E, res, it, hist, k


# energy slack of the endgame: E itself carries rounding noise of a few ulps
# times the site count, far above 64 eps on larger tori
POLISH_RTOL = 1e-12


def _polish(f, E, res, d, lam, q, tol, apply_G, max_iter=500):
    """Endgame once the energy is flat to rounding: iterate ``f <- P(G f^{2q-1})``.

    Fixed points of this map are exactly the Lagrange points; steps are kept
    only while the residual shrinks and the energy stays within
    ``POLISH_RTOL`` of its value on entry.
    """
    p = 2 * q
    Af = lam * f - laplacian(f, d)
    cap = E + POLISH_RTOL * abs(E)
    k = 0
    for k in range(1, max_iter + 1):
        g = _project(apply_G(f ** (p - 1)), p)
        Ag = lam * g - laplacian(g, d)
        Eg = float(np.sum(g * Ag))
        rg = Ag - Eg * g ** (p - 1)
        rn = float(np.sqrt(np.sum(rg * rg)))
        if rn >= res or Eg > cap:
            k -= 1
            break
        f, Af, E, res = g, Ag, Eg, rn
        if res <= tol:
            break
    return f, Af, E, res, k


def rho1(d: int, R: int, lam: float, q: float | None = None, tol: float = 1e-10,
         max_iter: int = 100_000, starts: Sequence[str] = ("bump", "uniform", "delta"),
         init: np.ndarray | None = None) -> VariationalSolution:
    """Projected gradient descent on the 2q-sphere, nonnegative orthant.

    Each step moves against the Lagrange residual ``(lam - Delta) f - E f^{2q-1}``
    (the gradient of the scale-invariant quotient), clamps at zero and
    renormalises.  The trial step is the Barzilai-Borwein estimate (0.1 on
    the first step) and Armijo backtracking keeps the objective
    nonincreasing.  Once the decrease drops below rounding, the fixed-point
    map ``f <- P(G f^{2q-1})`` finishes the residual.  Several starts guard
    against the constant-function trap; the lowest value wins, and values
    tied to 1e-12 go to the smaller residual.  ``history`` holds the descent
    steps only.
    """
    q = critical_q(d) if q is None else q
    _check(d, R, lam, q)
    if R == 1:
        f = np.ones((1,) * d)
        return VariationalSolution(float(lam), f, 0.0, 0, True, "rho1",
                                   [float(lam)], {"d": d, "R": R, "lam": lam, "q": q})
    inits = []
    if init is not None:
        inits.append(("init", np.asarray(init, dtype=float)))
    for s in starts:
        if s == "bump":
            inits.append((s, bump(d, R)))
        elif s == "uniform":
            inits.append((s, np.ones((R,) * d)))
        elif s == "delta":
            x = np.zeros((R,) * d)
            x[(R // 2,) * d] = 1.0
            # small positive floor keeps every site off the clamp
            inits.append((s, x + 1e-3 * bump(d, R)))
        else:
            raise ParameterError(f"unknown start {s!r}")

    if not inits:
        raise ParameterError("no starting point given")
    kernel = build_kernel(d, R, lam)
    best = None
    for name, f0 in inits:
        f, E, res, it, hist, k = _rho1_descent(f0, d, lam, q, tol, max_iter, polish=kernel.apply)
        if best is None or _better(E, res, best[1], best[2]):
            best = (f, E, res, it, hist, name, k)
    f, E, res, it, hist, name, k = best
    return VariationalSolution(E, canonicalize(f, d, R), res, it + k, res <= tol, "rho1", hist,
                               {"d": d, "R": R, "lam": lam, "q": q, "start": name,
                                "polish_steps": k})


def _better(E, res, E0, res0, rtol=1e-12):
    """Lower value wins; values equal to ``rtol`` are split by the residual."""
    if abs(E - E0) <= rtol * abs(E0):
        return res < res0
    return E < E0


# ---------------------------------------------------------------- rho2

def _fixed_point(apply_G, h0, q, tol, max_iter):
    """Maximise ``<h, G h>`` on the unit ``(2q)'``-sphere.

    Iterates ``h <- normalise(|G h|^{2q-1} sign(G h))``; for a convex
    objective on a norm ball this never decreases ``<h, G h>``.
    """
    pd = dual_exponent(q)
    e = 2 * q - 1
    h = h0 / _pnorm(h0, pd)
    Gh = apply_G(h)
    val = float(np.sum(h * Gh))
    hist = [val]
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        # Lagrange condition: G h = rho2 * |h|^{1/(2q-1)} sign(h)
        r = Gh - val * np.sign(h) * np.abs(h) ** (1.0 / e)
        res = float(np.sqrt(np.sum(r * r)))
        if res <= tol:
            it -= 1
            break
        nxt = np.sign(Gh) * np.abs(Gh) ** e
        h = nxt / _pnorm(nxt, pd)
        Gh = apply_G(h)
        val = float(np.sum(h * Gh))
        hist.append(val)
    r = Gh - val * np.sign(h) * np.abs(h) ** (1.0 / e)
    res = float(np.sqrt(np.sum(r * r)))
    return h, val, res, it, hist


def rho2(d: int, R: int, lam: float, q: float | None = None, tol: float = 1e-10,
         max_iter: int = 100_000, starts: Sequence[str] = ("bump", "uniform", "delta"),
         init: np.ndarray | None = None) -> VariationalSolution:
    """Fixed-point iteration from the Lagrange condition, G applied spectrally."""
    q = critical_q(d) if q is None else q
    _check(d, R, lam, q)
    kernel = build_kernel(d, R, lam)
    if R == 1:
        h = np.ones((1,) * d)
        return VariationalSolution(1.0 / lam, h, 0.0, 0, True, "rho2", [1.0 / lam],
                                   {"d": d, "R": R, "lam": lam, "q": q})
    inits = []
    if init is not None:
        inits.append(("init", np.asarray(init, dtype=float)))
    for s in starts:
        if s == "bump":
            inits.append((s, bump(d, R) ** (2 * q - 1)))
        elif s == "uniform":
            inits.append((s, np.ones((R,) * d)))
        elif s == "delta":
            x = np.full((R,) * d, 1e-6)
            x[(R // 2,) * d] = 1.0
            inits.append((s, x))
        else:
            raise ParameterError(f"unknown start {s!r}")
    if not inits:
        raise ParameterError("no starting point given")
    best = None
    for name, h0 in inits:
        h, val, res, it, hist = _fixed_point(kernel.apply, h0, q, tol, max_iter)
        if best is None or _better(-val, res, -best[1], best[2]):
            best = (h, val, res, it, hist, name)
    h, val, res, it, hist, name = best
    return VariationalSolution(val, canonicalize(h, d, R), res, it, res <= tol, "rho2", hist,
                               {"d": d, "R": R, "lam": lam, "q": q, "start": name})


# ---------------------------------------------------------------- Sobolev

def box_gradient_energy(f: np.ndarray) -> float:
    """``||grad f||_2^2`` on Z^d for ``f`` supported on the array's box."""
    d = f.ndim
    g = np.pad(f, 1)
    return float(sum(np.sum(np.diff(g, axis=ax) ** 2) for ax in range(d)))


def sobolev_quotient(f: np.ndarray) -> float:
    q = critical_q(f.ndim)
    return box_gradient_energy(f) / _pnorm(f, 2 * q) ** 2


class _DirichletGreen:
    """Inverse of minus the Laplacian on ``n^d`` sites with zero exterior (DST-I)."""

    def __init__(self, d: int, n: int):
        self.d = d
        k = np.arange(1, n + 1)
        ev = 2.0 * (1.0 - np.cos(np.pi * k / (n + 1)))
        out = ev
        for _ in range(d - 1):
            out = np.add.outer(out, ev)
        self.eig = np.asarray(out, dtype=float)

    def __call__(self, h):
        return sfft.idstn(sfft.dstn(h, type=1, norm="ortho") / self.eig, type=1, norm="ortho")


def sobolev_constant(d: int, box_L: int, tol: float = 1e-9, max_iter: int = 20_000) -> VariationalSolution:
    """Minimise ``||grad f||^2 / ||f||_{2q}^2`` over f supported in ``[-L, L]^d``.

    The dual problem ``sup <h, G_D h>`` over the ``(2q)'``-sphere is solved by
    the Lagrange fixed-point iteration with the Dirichlet Green operator; the
    reported value is the quotient of the primal trial ``f = G_D h``, hence a
    certified upper bound on the box infimum.  ``info['dual_lower']`` is
    ``1/<h, G_D h>``, a lower bound on the same infimum.
    """
    if d < 3:
        raise DomainError("the Sobolev inequality needs d >= 3")
    if box_L < 0:
        raise ParameterError("box_L must be >= 0")
    q = critical_q(d)
    n = 2 * box_L + 1
    G = _DirichletGreen(d, n)
    c = np.arange(n) - box_L
    r2 = c.astype(float) ** 2
    rr = r2
    for _ in range(d - 1):
        rr = np.add.outer(rr, r2)
    h0 = (1.0 + rr / max(box_L, 1)) ** (-(d + 2) / 2)
    h, val, res, it, hist = _fixed_point(G, h0, q, tol, max_iter)
    f = G(h)
    f = f / _pnorm(f, 2 * q)
    value = sobolev_quotient(f)
    gap = value - 1.0 / val
    return VariationalSolution(value, f, res, it, res <= tol, "sobolev", [1.0 / v for v in hist],
                               {"d": d, "L": box_L, "q": q, "dual_lower": 1.0 / val, "gap": gap})


def trial_quotient(d: int, box_L: int, c: float) -> float:
    """Quotient of ``(1 + |x|^2/c)^{-(d-2)/2}`` truncated to ``[-L, L]^d``."""
    x = np.arange(-box_L, box_L + 1, dtype=float) ** 2
    rr = x
    for _ in range(d - 1):
        rr = np.add.outer(rr, x)
    return sobolev_quotient((1.0 + rr / c) ** (-(d - 2) / 2))


# ---------------------------------------------------------------- trend

DEFAULT_SCHEDULE = ((4, 0.25), (8, 0.5), (12, 1.0), (16, 2.0))


def rho1_critical_trend(d: int, schedule: Sequence[tuple[int, float]] = DEFAULT_SCHEDULE,
                        sobolev_L: int = 20, q: float | None = None, **opts) -> list[dict]:
    """ρ1 along a schedule of increasing ``lam R^2``, next to the box Sobolev value."""
    q = critical_q(d) if q is None else q
    prods = [lam * R * R for R, lam in schedule]
    if any(b <= a for a, b in zip(prods, prods[1:])):
        raise ParameterError("schedule must have increasing lam * R^2")
    sob = sobolev_constant(d, sobolev_L).value
    rows = []
    for R, lam in schedule:
        sol = rho1(d, R, lam, q, **opts)
        rows.append({"R": R, "lam": lam, "lam_R2": lam * R * R, "rho1": sol.value,
                     "converged": sol.converged, "residual": sol.lagrange_residual,
                     "sobolev": sob})
    return rows
