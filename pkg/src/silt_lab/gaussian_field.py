"""Centered Gaussian field on T_R with covariance G_{R,lam}.

Sampling is spectral.  With ``a_k, b_k`` i.i.d. N(0,1) per Fourier mode,

    Z_x = Re sum_k c_k (a_k + i b_k) exp(-2 pi i k.x / R),  c_k = (R^d mu_k)^{-1/2},

has ``Cov(Z_x, Z_y) = R^-d sum_k cos(2 pi k.(x-y)/R) / mu_k = G(x, y)``
exactly, with one FFT and no Hermitian bookkeeping.  Per sample the stream
layout is: all ``a_k`` (C order over modes) then all ``b_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ParameterError
from .mc import BLOCK, FIELD, block_rng, iter_blocks
from .torus_green import SpectralKernel


@dataclass(frozen=True, eq=False)
class FieldSample:
    d: int
    R: int
    lam: float
    values: np.ndarray
    seed: int

    def __post_init__(self):
        if self.values.shape != (self.R,) * self.d:
            raise ValueError("field must hold exactly R^d values")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")


def _synthesize(kernel: SpectralKernel, rng: np.random.Generator, m: int) -> np.ndarray:
    shape = (m,) + kernel.shape
    a = rng.standard_normal(shape)
    b = rng.standard_normal(shape)
    scale = 1.0 / np.sqrt(kernel.volume * kernel.eigenvalues)
    axes = tuple(range(1, kernel.d + 1))
    return np.fft.fftn(scale * (a + 1j * b), axes=axes).real


def sample_field(kernel: SpectralKernel, seed: int) -> FieldSample:
    """One field; deterministic in ``seed``."""
    rng = np.random.default_rng([int(seed), FIELD])
    z = _synthesize(kernel, rng, 1)[0]
    return FieldSample(kernel.d, kernel.R, kernel.lam, z, int(seed))


def sample_fields(kernel: SpectralKernel, n: int, seed: int, tag: int = FIELD,
                  block: int = BLOCK):
    """Yield ``(start, array)`` blocks of shape ``(m, R, ..., R)`` covering ``n`` samples."""
    for b, start, size in iter_blocks(n, block):
        yield start, _synthesize(kernel, block_rng(seed, b, tag), size)


def sample_fields_cholesky(kernel: SpectralKernel, n: int, seed: int) -> np.ndarray:
    """Reference sampler through a dense Cholesky factor (``R^d <= 512``)."""
    if kernel.volume > 512:
        raise ParameterError("Cholesky sampling is limited to R^d <= 512")
    L = np.linalg.cholesky(kernel.dense_matrix())
    rng = np.random.default_rng([int(seed), FIELD, 99])
    w = rng.standard_normal((n, kernel.volume))
    return (w @ L.T).reshape((n,) + kernel.shape)


def lp_norm(sample, p: float) -> np.ndarray | float:
    """``(sum_x |Z_x|^p)^(1/p)`` of one field (FieldSample or array).

    Use ``lp_norms`` for a stack of fields.
    """
    if not p >= 1:
        raise ParameterError(f"p must be >= 1, got {p!r}")
    if isinstance(sample, FieldSample):
        return float(np.sum(np.abs(sample.values) ** p) ** (1.0 / p))
    v = np.asarray(sample, dtype=float)
    return float(np.sum(np.abs(v) ** p) ** (1.0 / p))


def lp_norms(stack: np.ndarray, p: float) -> np.ndarray:
    if not p >= 1:
        raise ParameterError(f"p must be >= 1, got {p!r}")
    flat = np.abs(stack.reshape(len(stack), -1))
    return np.sum(flat**p, axis=1) ** (1.0 / p)


def gaussian_abs_moment(p: float) -> float:
    """``E|V|^p`` for V standard normal."""
    return 2 ** (p / 2) * special.gamma((p + 1) / 2) / math.sqrt(math.pi)


def median_norm_bound(kernel: SpectralKernel, q: float) -> float:
    """Upper bound ``2^{1/q} R^{d/q} G(0,0) E(V^{2q})^{1/q}`` on the squared median of ``||Z||_{2q}``."""
    g00 = float(kernel.green_row.flat[0])
    return 2 ** (1 / q) * kernel.R ** (kernel.d / q) * g00 * gaussian_abs_moment(2 * q) ** (1 / q)


@dataclass
class NormStats:
    p: float
    n: int
    median: float
    median_stderr: float
    mean: float
    mean_stderr: float
    q40: float
    q60: float
    tail: dict[float, float] = field(default_factory=dict)
    norms: np.ndarray | None = field(default=None, repr=False)

    def concentration_tail(self, u: float) -> float:
        """Empirical ``P[| ||Z|| - M | >= sqrt(u)]``."""
        return float(np.mean(np.abs(self.norms - self.median) >= math.sqrt(u)))


TAIL_GRID = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


def norm_statistics(kernel: SpectralKernel, p: float, n: int, seed: int,
                    keep_norms: bool = True) -> NormStats:
    """Median, mean and concentration tail of ``||Z||_p`` over ``n`` samples.

    ``median_stderr`` is half the width of the order-statistic band
    ``n/2 +- sqrt(n)/2``, a distribution-free one-sigma interval.
    """
    if n < 1000:
        raise ParameterError("norm statistics need n >= 1000")
    norms = np.concatenate([lp_norms(z, p) for _, z in sample_fields(kernel, n, seed)])
    s = np.sort(norms)
    med = float(np.median(s))
    half = math.sqrt(n) / 2
    lo = s[max(int(math.floor(n / 2 - half)), 0)]
    hi = s[min(int(math.ceil(n / 2 + half)), n - 1)]
    tail = {u: float(np.mean(np.abs(norms - med) >= math.sqrt(u))) for u in TAIL_GRID}
    return NormStats(
        p=float(p), n=n, median=med, median_stderr=float(hi - lo) / 2,
        mean=float(norms.mean()), mean_stderr=float(norms.std(ddof=1) / math.sqrt(n)),
        q40=float(np.quantile(s, 0.4)), q60=float(np.quantile(s, 0.6)),
        tail=tail, norms=norms if keep_norms else None,
    )
