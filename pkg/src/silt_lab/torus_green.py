"""Green kernel of the walk on the torus stopped at rate lambda.

On T_R the generator is diagonal in the Fourier basis with eigenvalues
``-nu_k``, ``nu_k = sum_j 2(1 - cos(2 pi k_j / R))``, so
``G_{R,lam} = (lam - Delta)^{-1}`` has eigenvalues ``1 / (lam + nu_k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .errors import DomainError, ParameterError

MATERIALIZE_LIMIT = 2**24
MIN_LAMBDA = 1e-12


def axis_eigenvalues(R: int) -> np.ndarray:
    """Eigenvalues of minus the 1-d torus Laplacian, ``2(1 - cos(2 pi k / R))``."""
    k = np.arange(R)
    return 2.0 * (1.0 - np.cos(2.0 * np.pi * k / R))


def _grid_sum(axes: list[np.ndarray]) -> np.ndarray:
    out = axes[0]
    for a in axes[1:]:
        out = np.add.outer(out, a)
    return np.asarray(out, dtype=float)


@dataclass(frozen=True)
class SpectralKernel:
    d: int
    R: int
    lam: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ParameterError(f"d must be an integer >= 1, got {self.d!r}")
        if int(self.R) != self.R or self.R < 1:
            raise ParameterError(f"R must be an integer >= 1, got {self.R!r}")
        if not self.lam > 0:
            raise ParameterError(f"lambda must be > 0 (the torus Laplacian is singular), got {self.lam!r}")
        if self.lam < MIN_LAMBDA:
            raise ParameterError(f"lambda below {MIN_LAMBDA} is too ill-conditioned")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.R,) * self.d

    @property
    def volume(self) -> int:
        return self.R**self.d

    @cached_property
    def nu1(self) -> np.ndarray:
        return axis_eigenvalues(self.R)

    @cached_property
    def laplacian_eigenvalues(self) -> np.ndarray:
        """``nu_k`` on the full ``(R,)*d`` mode grid."""
        self._check_size()
        return _grid_sum([self.nu1] * self.d)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """``mu_k = lam + nu_k`` on the full mode grid."""
        return self.lam + self.laplacian_eigenvalues

    @cached_property
    def green_row(self) -> np.ndarray:
        """``G(0, x)`` for every torus site ``x``, shape ``(R,)*d``."""
        return np.fft.ifftn(1.0 / self.eigenvalues).real

    def _check_size(self):
        if self.volume > MATERIALIZE_LIMIT:
            raise MemoryError(f"{self.R}^{self.d} modes exceed the materialization limit")

    def apply(self, f: np.ndarray) -> np.ndarray:
        """``G f`` for a field (or a stack of fields) on the torus."""
        axes = tuple(range(-self.d, 0))
        return np.fft.ifftn(np.fft.fftn(f, axes=axes) / self.eigenvalues, axes=axes).real

    def apply_inverse(self, f: np.ndarray) -> np.ndarray:
        """``(lam - Delta) f`` computed on the lattice (no FFT)."""
        return self.lam * f - laplacian(f, self.d)

    def dense_matrix(self) -> np.ndarray:
        """Full ``R^d x R^d`` covariance, site order = C-order flattening."""
        n = self.volume
        if n > 4096:
            raise MemoryError("dense Green matrix only for small tori")
        row = self.green_row.ravel()
        coords = np.array(np.unravel_index(np.arange(n), self.shape)).T
        diff = (coords[None, :, :] - coords[:, None, :]) % self.R
        idx = np.ravel_multi_index(tuple(np.moveaxis(diff, -1, 0)), self.shape)
        return row[idx]


def laplacian(f: np.ndarray, d: int) -> np.ndarray:
    """Periodic lattice Laplacian ``sum_{y~x} (f(y) - f(x))`` over the last ``d`` axes."""
    out = -2.0 * d * f
    for ax in range(-d, 0):
        out = out + np.roll(f, 1, axis=ax) + np.roll(f, -1, axis=ax)
    return out


def build_kernel(d: int, R: int, lam: float) -> SpectralKernel:
    return SpectralKernel(int(d), int(R), float(lam))


def green_value(kernel: SpectralKernel, x, y) -> float:
    """``G_{R,lam}(x, y) = R^-d sum_k cos(2 pi k.(x-y)/R) / mu_k``.

    Sites are reduced mod R; a scalar stands for the site with all
    coordinates equal to it.  Small tori read the cached row; large ones sum
    the modes slice by slice.
    """
    d, R = kernel.d, kernel.R
    r = (np.broadcast_to(np.asarray(y, dtype=np.int64), (d,))
         - np.broadcast_to(np.asarray(x, dtype=np.int64), (d,))) % R
    if kernel.volume <= MATERIALIZE_LIMIT:
        return float(kernel.green_row[tuple(r)])
    # on-the-fly summation over the first mode index
    theta = 2.0 * np.pi * np.arange(R) / R
    rest = _grid_sum([kernel.nu1] * (d - 1)) if d > 1 else np.zeros(())
    phase_rest = _grid_sum([theta * r[j] for j in range(1, d)]) if d > 1 else np.zeros(())
    total = 0.0
    for k0 in range(R):
        mu = kernel.lam + kernel.nu1[k0] + rest
        total += float(np.sum(np.cos(theta[k0] * r[0] + phase_rest) / mu))
    return total / kernel.volume


def heat_kernel_zero(d: int, R: int, t: float) -> float:
    """Return probability ``p_t^R(0, 0)`` of the torus walk.

    The mode sum factorises over axes: ``(R^-1 sum_k exp(-t nu_k))^d``.
    """
    if not t >= 0:
        raise ParameterError(f"t must be >= 0, got {t!r}")
    return float(np.mean(np.exp(-t * axis_eigenvalues(R))) ** d)


def _lattice_return(d: int):
    # p_t(0,0) on Z^d = (e^{-2t} I_0(2t))^d
    return lambda t: special.ive(0, 2.0 * t) ** d


def green_infinite(d: int, tol: float = 1e-10) -> tuple[float, float]:
    """Expected time at the origin of the walk on Z^d, with an error bound.

    Uses ``G_d(0,0) = int_0^inf (e^{-2t} I_0(2t))^d dt``, which equals the
    Fourier integral ``(2 pi)^-d int dtheta / sum_j 2(1 - cos theta_j)``.
    The range is cut at ``t_max`` and the tail integrated from the
    asymptotic expansion of ``I_0``.
    """
    if int(d) != d:
        raise ParameterError("d must be an integer")
    if d <= 2:
        raise DomainError(f"the walk is recurrent in d={d}: the Green value diverges")
    if not tol > 0:
        raise ParameterError("tol must be > 0")
    f = _lattice_return(d)
    # tail: (e^{-x} I_0(x))^d <= (2 pi x)^{-d/2} (1 + 1/(4x))^d for x >= 1
    t_max = 10.0
    while (4 * math.pi) ** (-d / 2) * (2 / (d - 2)) * t_max ** (1 - d / 2) * ((1 + 1 / (8 * t_max)) ** d - 1) > tol / 4:
        t_max *= 10.0
    edges = [0.0, 1.0] + list(np.geomspace(10.0, t_max, int(round(math.log10(t_max))) * 2))
    value, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(f, a, b, epsabs=tol / (4 * len(edges)), epsrel=1e-13, limit=200)
        value += v
        err += e
    # leading tail (4 pi t)^{-d/2} (1 + d/(16 t)) integrated on [t_max, inf)
    c = (4 * math.pi) ** (-d / 2)
    tail0 = c * t_max ** (1 - d / 2) / (d / 2 - 1)
    tail1 = c * d / 16 * t_max ** (-d / 2) / (d / 2)
    value += tail0 + tail1
    err += c * (2 / (d - 2)) * t_max ** (1 - d / 2) * ((1 + 1 / (8 * t_max)) ** d - 1)
    return value, err


def green_infinite_fourier(d: int, n) -> float:
    """Fourier-side value of ``G_d(0,0)`` by shifted midpoint sums + Richardson.

    ``n`` is the per-axis point count (an int or a length-``d`` sequence); the
    grid avoids theta = 0.  The midpoint error expands as ``c1 h + c3 h^3``,
    which two Richardson steps over ``n, 2n, 4n`` remove.
    """
    if d <= 2:
        raise DomainError(f"the integral diverges for d={d}")
    ns = np.broadcast_to(np.asarray(n, dtype=np.int64), (d,))

    def midpoint(m: np.ndarray) -> float:
        axes = []
        for k in m:
            h = 2 * np.pi / k
            theta = -np.pi + (np.arange(k) + 0.5) * h
            axes.append(2.0 * (1.0 - np.cos(theta)))
        # sum slice by slice along the first axis to bound memory
        rest = _grid_sum(axes[1:])
        total = 0.0
        for a in axes[0]:
            total += float(np.sum(1.0 / (a + rest)))
        return total / float(np.prod(m))

    m0, m1, m2 = midpoint(ns), midpoint(2 * ns), midpoint(4 * ns)
    r1 = 2 * m1 - m0
    r2 = 2 * m2 - m1
    return (8 * r2 - r1) / 7
