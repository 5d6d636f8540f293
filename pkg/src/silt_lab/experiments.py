"""Experiment presets and the tail / moment estimators built on the walk sampler.

All estimators of one seed share the same walks (common random numbers):
the naive tail, the confinement bound and the exponential moment are
functions of the same simulated batch, which makes the pathwise orderings
between them exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Sequence

import numpy as np
from scipy import integrate, stats

from .errors import ConfigError, ParameterError
from .lattice_walk import LocalTimeBatch, WalkConfig, simulate_batch
from .mc import MCEstimate

KINDS = ("tail", "exp_moment", "isomorphism", "variational", "green_convergence",
         "confinement", "sobolev")
PRESETS = ("critical", "large_deviation")

# I_T is a floating sum; the event {I_T >= b^q} is read with this relative slack
# so that configurations where I_T = b^q exactly (q = 1, or a frozen walk) count.
EVENT_RTOL = 1e-12


class HeavyTailWarning(RuntimeWarning):
    """A few replicas dominate the sample mean; the estimate is unreliable."""


class ScalingWarning(UserWarning):
    """The resolved preset violates ``b_T R^2 / T >= 1``."""


def default_q(d: int) -> float:
    if d <= 2:
        raise ConfigError(f"q has no critical default in d={d}; set it explicitly")
    return d / (d - 2)


@dataclass
class ExperimentConfig:
    kind: str
    d: int = 3
    q: float | None = None
    T: float | None = None
    b_T: float | list[float] | None = None
    theta: float = 0.0
    alpha: float = 1.0
    A: float | None = None
    R: int | str | None = "auto"
    lam: float | None = None
    preset: str = "critical"
    s: float = 1.0
    a: float = 0.05
    box_L: int | None = None
    schedule: list | None = None
    n: int = 10_000
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; valid kinds: {', '.join(KINDS)}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; valid: {', '.join(PRESETS)}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError("d must be an integer >= 1")
        self.d = int(self.d)
        if self.q is None and self.d >= 3:
            self.q = default_q(self.d)
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        if not raw:
            raise ConfigError("empty configuration")
        if "kind" not in raw:
            raise ConfigError(f"configuration needs a 'kind'; valid kinds: {', '.join(KINDS)}")
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown configuration keys: {sorted(extra)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def resolve(self) -> dict[str, Any]:
        """Fill in ``R`` and ``lam`` from the scaling preset when left on auto.

        critical:        R = round(T^(1/d)),   lam = alpha b_T / T
        large_deviation: R = round((A T)^(1/d)), lam = alpha T^(1/q) / T
        """
        out: dict[str, Any] = {"d": self.d, "q": self.q, "preset": self.preset}
        R, lam = self.R, self.lam
        auto = R is None or R == "auto"
        if auto or lam is None:
            if self.T is None or not self.T > 0:
                raise ConfigError("automatic scaling needs T > 0")
            T = float(self.T)
            if self.preset == "critical":
                b = self._scalar_b()
                if b is None:
                    raise ConfigError("the critical preset needs b_T")
                if auto:
                    R = max(1, int(round(T ** (1.0 / self.d))))
                if lam is None:
                    lam = self.alpha * b / T
                if b * R * R / T < 1:
                    warnings.warn(f"b_T R^2 / T = {b * R * R / T:.3g} < 1: lam R^d >> 1 is not guaranteed",
                                  ScalingWarning, stacklevel=2)
            else:
                if self.q is None:
                    raise ConfigError("the large-deviation preset needs q")
                if auto:
                    if self.A is None:
                        raise ConfigError("the large-deviation preset needs A")
                    R = max(1, int(round((self.A * T) ** (1.0 / self.d))))
                if lam is None:
                    lam = self.alpha * T ** (1.0 / self.q) / T
        if int(R) != R or R < 1:
            raise ConfigError("R must be an integer >= 1")
        if not lam > 0:
            raise ConfigError("lam must be > 0")
        out["R"], out["lam"] = int(R), float(lam)
        return out

    def _scalar_b(self):
        if isinstance(self.b_T, (list, tuple)):
            return float(max(self.b_T)) if self.b_T else None
        return None if self.b_T is None else float(self.b_T)


# ---------------------------------------------------------------- estimators

def _check_tail(d, q, T, b_T, n):
    if not q >= 1:
        raise ParameterError("q must be >= 1")
    if not T >= 0:
        raise ParameterError("T must be >= 0")
    if not b_T >= 0:
        raise ParameterError("b_T must be >= 0")
    if n < 1000:
        raise ParameterError("tail estimators need n >= 1000")


def clopper_pearson_upper(k: int, n: int, level: float = 0.95) -> float:
    """Upper end of the exact two-sided Clopper-Pearson interval for k hits in n."""
    if k >= n:
        return 1.0
    return float(stats.beta.ppf(1 - (1 - level) / 2, k + 1, n - k))


def _walks(d, T, n, seed) -> LocalTimeBatch:
    return simulate_batch(WalkConfig(d, horizon=float(T), seed=int(seed)), n)


def _exceeds(I: np.ndarray, b_T: float, q: float) -> np.ndarray:
    thr = float(b_T) ** q
    return I >= thr * (1 - EVENT_RTOL)


def frequency_estimate(hits: np.ndarray, seed, b_T, **params) -> MCEstimate:
    """Binomial frequency with its Clopper-Pearson bound and ``log(p) / b_T``."""
    n = hits.size
    k = int(hits.sum())
    p = k / n
    se = math.sqrt(p * (1 - p) / n) if n > 1 else 0.0
    extra = {"count": k, "b_T": float(b_T)}
    if k == 0:
        extra["upper95"] = clopper_pearson_upper(0, n)
        extra["log_rate"] = None
    else:
        extra["upper95"] = clopper_pearson_upper(k, n)
        extra["log_rate"] = math.log(p) / b_T if b_T > 0 else None
    return MCEstimate(p, se, n, seed, {**params, **extra})


def tail_indicators(d: int, q: float, T: float, b_T: float, n: int, seed: int,
                    walks: LocalTimeBatch | None = None) -> np.ndarray:
    """Per-replica indicators of ``{I_T >= b_T^q}``."""
    _check_tail(d, q, T, b_T, n)
    if b_T > T * (1 + EVENT_RTOL):
        return np.zeros(n, dtype=bool)
    walks = _walks(d, T, n, seed) if walks is None else walks
    return _exceeds(walks.power_sums(q), b_T, q)


def tail_probability(d: int, q: float, T: float, b_T: float, n: int, seed: int) -> MCEstimate:
    """Naive Monte Carlo frequency of ``{I_T >= b_T^q}`` for walks on Z^d.

    Since ``I_T <= T^q``, a threshold ``b_T > T`` is answered with exactly 0
    without simulating.  When no replica hits, ``params['upper95']`` carries
    the Clopper-Pearson bound and ``params['log_rate']`` is None.
    """
    hits = tail_indicators(d, q, T, b_T, n, seed)
    return frequency_estimate(hits, seed, b_T, estimator="naive", d=d, q=q, T=T)


def tail_curve(d: int, q: float, T: float, b_values: Sequence[float], n: int, seed: int) -> list[MCEstimate]:
    """Tail frequencies for several thresholds on one batch of walks."""
    walks = None
    if any(b <= T * (1 + EVENT_RTOL) for b in b_values):
        _check_tail(d, q, T, min(b_values), n)
        walks = _walks(d, T, n, seed)
    return [frequency_estimate(tail_indicators(d, q, T, b, n, seed, walks), seed, b,
                       estimator="naive", d=d, q=q, T=T) for b in b_values]


def confinement_indicators(d: int, q: float, T: float, b_T: float, box_L: int, n: int,
                           seed: int, walks: LocalTimeBatch | None = None) -> np.ndarray:
    _check_tail(d, q, T, b_T, n)
    if int(box_L) != box_L or box_L < 0:
        raise ParameterError("box_L must be an integer >= 0")
    if b_T > T * (1 + EVENT_RTOL):
        return np.zeros(n, dtype=bool)
    walks = _walks(d, T, n, seed) if walks is None else walks
    return (walks.max_norm <= box_L) & _exceeds(walks.power_sums(q), b_T, q)


def confinement_lower_bound(d: int, q: float, T: float, b_T: float, box_L: int, n: int,
                            seed: int) -> MCEstimate:
    """Frequency of ``{walk stays in [-L, L]^d up to T and I_T >= b_T^q}``.

    This is ``P[confined] * P[I_T >= b_T^q | confined]`` and bounds the tail
    from below.  Walks are the same as in ``tail_probability`` with the same
    seed, so the bound never exceeds the naive frequency on a given seed.
    ``params['confined']`` is the acceptance frequency of the box.
    """
    return confinement_run(d, q, T, b_T, box_L, n, seed)[0]


def confinement_run(d, q, T, b_T, box_L, n, seed) -> tuple[MCEstimate, np.ndarray]:
    """``confinement_lower_bound`` together with the per-replica indicators."""
    _check_tail(d, q, T, b_T, n)
    if int(box_L) != box_L or box_L < 0:
        raise ParameterError("box_L must be an integer >= 0")
    walks = _walks(d, T, n, seed)
    hits = confinement_indicators(d, q, T, b_T, box_L, n, seed, walks)
    est = frequency_estimate(hits, seed, b_T, estimator="confinement", d=d, q=q, T=T, box_L=int(box_L))
    est.params["confined"] = float(np.mean(walks.max_norm <= box_L))
    return est, hits


def exp_moment_values(d: int, q: float, T: float, theta: float, n: int, seed: int) -> np.ndarray:
    if not theta >= 0:
        raise ParameterError("theta must be >= 0")
    if not q >= 1:
        raise ParameterError("q must be >= 1")
    if theta == 0:
        return np.ones(n)
    I = _walks(d, T, n, seed).power_sums(q)
    return np.exp(theta * I ** (1.0 / q))


def top_share(values: np.ndarray, frac: float = 0.01) -> float:
    """Share of the sample total carried by the largest ``frac`` of replicas."""
    v = np.sort(np.asarray(values, dtype=float))
    k = max(1, int(math.ceil(frac * v.size)))
    tot = float(np.sum(v))
    return float(np.sum(v[-k:]) / tot) if tot > 0 else 0.0


def exp_moment(d: int, q: float, T: float, theta: float, n: int, seed: int) -> MCEstimate:
    """Monte Carlo estimate of ``E exp(theta I_T^(1/q))``.

    Warns with ``HeavyTailWarning`` when the top 1% of replicas carries more
    than half of the sample mean: past the critical theta the moment can be
    infinite and the estimate then means nothing.
    """
    vals = exp_moment_values(d, q, T, theta, n, seed)
    return summarize_exp_moment(vals, seed, d=d, q=q, T=T, theta=theta)


def summarize_exp_moment(vals: np.ndarray, seed, **params) -> MCEstimate:
    est = MCEstimate.from_samples(vals, seed, **params)
    share = top_share(vals)
    est.params["top1_share"] = share
    est.params["heavy_tail"] = share > 0.5
    if share > 0.5:
        warnings.warn(f"top 1% of replicas carry {share:.0%} of the mean; the moment may be infinite",
                      HeavyTailWarning, stacklevel=3)
    return est


def exp_moment_small_T(d: int, q: float, T: float, theta: float) -> tuple[float, float]:
    """Bracket ``E exp(theta I_T^(1/q))`` by conditioning on at most one jump.

    No jump: ``I = T^q``.  One jump at ``u``: ``I = u^q + (T-u)^q``.  Two or
    more jumps contribute between ``P[N >= 2]`` and ``P[N >= 2] e^(theta T)``.
    """
    r = 2 * d
    p0 = math.exp(-r * T)
    zero = p0 * math.exp(theta * T)
    one, _ = integrate.quad(lambda u: r * p0 * math.exp(theta * (u**q + (T - u) ** q) ** (1 / q)),
                            0.0, T, epsabs=1e-14, epsrel=1e-13)
    p2 = 1.0 - p0 * (1 + r * T)
    base = zero + one
    return base + p2, base + p2 * math.exp(theta * T)
