"""Continuous-time simple random walk on Z^d and on the torus T_R.

Each of the 2d edges at a site fires at rate 1, so holding times are
Exp(2d) and jumps go to a uniformly chosen neighbour.  Walks start at the
origin.  The simulation is event driven: the local time of a site is the
length of the holding interval spent there, and the last interval is cut at
the stopping time, so occupation times sum to the elapsed time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .mc import BLOCK, WALK, block_rng, iter_blocks

DENSE_LIMIT = 2**24


@dataclass(frozen=True)
class WalkConfig:
    dimension: int
    horizon: float = math.inf
    torus_R: int | None = None
    stop_rate: float | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ConfigError(f"dimension must be an integer >= 1, got {self.dimension!r}")
        if not self.horizon >= 0:
            raise ConfigError(f"horizon must be >= 0, got {self.horizon!r}")
        if self.torus_R is not None and (int(self.torus_R) != self.torus_R or self.torus_R < 1):
            raise ConfigError(f"torus_R must be an integer >= 1, got {self.torus_R!r}")
        if self.stop_rate is not None and not self.stop_rate > 0:
            raise ConfigError(f"stop_rate must be > 0, got {self.stop_rate!r}")
        if math.isinf(self.horizon) and self.stop_rate is None:
            raise ConfigError("an infinite horizon needs a stop_rate")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class LocalTimeField:
    """Occupation times of one trajectory.

    ``sites`` is an ``(k, d)`` integer array of distinct sites (reduced mod R
    on the torus) and ``times`` the matching positive occupation times.
    """

    dimension: int
    torus_R: int | None
    sites: np.ndarray
    times: np.ndarray
    elapsed: float
    jumps: int = 0

    @property
    def is_torus(self) -> bool:
        return self.torus_R is not None

    def __len__(self):
        return len(self.times)

    def total(self) -> float:
        return math.fsum(self.times)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(c) for c in s): float(t) for s, t in zip(self.sites, self.times)}

    def dense(self) -> np.ndarray:
        """Occupation array of shape ``(R,)*d`` (torus fields only)."""
        if self.torus_R is None:
            raise ValueError("dense view is only defined on the torus")
        R, d = self.torus_R, self.dimension
        if R**d > DENSE_LIMIT:
            raise ValueError(f"torus too large for a dense view ({R}^{d} sites)")
        out = np.zeros((R,) * d)
        np.add.at(out, tuple(self.sites.T), self.times)
        return out

    @classmethod
    def from_dict(cls, masses: dict, dimension: int, torus_R: int | None = None,
                  elapsed: float | None = None) -> "LocalTimeField":
        """Build a field from ``{site: time}``; mainly for tests and examples."""
        items = [(tuple(s), float(t)) for s, t in masses.items() if t > 0]
        if items:
            sites = np.array([s for s, _ in items], dtype=np.int64).reshape(-1, dimension)
            times = np.array([t for _, t in items])
        else:
            sites = np.zeros((0, dimension), dtype=np.int64)
            times = np.zeros(0)
        if torus_R is not None:
            sites, times = aggregate_sites(sites % torus_R, times)
        if elapsed is None:
            elapsed = math.fsum(times)
        return cls(dimension, torus_R, sites, times, float(elapsed))


def aggregate_sites(sites: np.ndarray, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum times over repeated sites; drops zero-mass entries."""
    if len(times) == 0:
        return sites.reshape(0, sites.shape[1]), times
    uniq, inv = np.unique(sites, axis=0, return_inverse=True)
    tot = np.bincount(inv.ravel(), weights=times, minlength=len(uniq))
    keep = tot > 0
    return uniq[keep], tot[keep]


def _stop_time(config: WalkConfig, rng: np.random.Generator, size=None):
    if config.stop_rate is None:
        return np.full(size, config.horizon) if size is not None else config.horizon
    tau = rng.exponential(1.0 / config.stop_rate, size=size)
    return np.minimum(tau, config.horizon)


def _steps(d: int) -> np.ndarray:
    eye = np.eye(d, dtype=np.int64)
    return np.concatenate([eye, -eye])


def simulate_local_times(config: WalkConfig, replica: int = 0) -> LocalTimeField:
    """Local-time field of one walk up to ``min(horizon, tau)``.

    The random stream is keyed by ``(config.seed, replica)``; the draws do not
    depend on ``torus_R``, so the torus field of a seed is the reduction of
    the lattice field of the same seed.
    """
    d = config.dimension
    rng = np.random.default_rng([int(config.seed), int(replica), WALK])
    t_end = float(_stop_time(config, rng))
    rate = 2 * d
    steps = _steps(d)

    if t_end == 0.0:
        return LocalTimeField(d, config.torus_R, np.zeros((0, d), dtype=np.int64),
                              np.zeros(0), 0.0, 0)

    arrivals = [np.zeros(1)]
    moves = []
    t = 0.0
    chunk = int(rate * t_end + 5 * math.sqrt(rate * t_end)) + 16
    while True:
        hold = rng.exponential(1.0 / rate, size=chunk)
        dirs = rng.integers(0, 2 * d, size=chunk)
        arr = t + np.cumsum(hold)
        k = int(np.searchsorted(arr, t_end, side="left"))
        arrivals.append(arr[:k])
        moves.append(dirs[:k])
        if k < chunk:
            break
        t = float(arr[-1])
    arrival = np.concatenate(arrivals)
    dirs = np.concatenate(moves)
    njumps = len(dirs)

    pos = np.zeros((njumps + 1, d), dtype=np.int64)
    if njumps:
        np.cumsum(steps[dirs], axis=0, out=pos[1:])
    leave = np.empty_like(arrival)
    leave[:-1] = arrival[1:]
    leave[-1] = t_end
    dur = leave - arrival

    if config.torus_R is not None:
        pos %= config.torus_R
    sites, times = aggregate_sites(pos, dur)
    return LocalTimeField(d, config.torus_R, sites, times, t_end, njumps)


def confined_sample(config: WalkConfig, box_radius: int, replica: int = 0) -> LocalTimeField | None:
    """Walk on Z^d accepted only if it never leaves ``[-L, L]^d``."""
    if config.torus_R is not None:
        raise ConfigError("confinement is defined for walks on Z^d")
    if box_radius < 0:
        raise ConfigError("box_radius must be >= 0")
    field = simulate_local_times(config, replica)
    if len(field) and np.abs(field.sites).max() > box_radius:
        return None
    return field


@dataclass(frozen=True, eq=False)
class LocalTimeBatch:
    """Occupation fields of many independent walks, stored CSR style.

    Walk ``i`` owns rows ``offsets[i]:offsets[i+1]`` of ``sites``/``times``.
    ``max_norm[i]`` is the largest sup-norm of a lattice site visited by
    walk ``i`` before any torus reduction.
    """

    dimension: int
    torus_R: int | None
    offsets: np.ndarray
    sites: np.ndarray
    times: np.ndarray
    elapsed: np.ndarray
    jumps: np.ndarray
    max_norm: np.ndarray

    def __len__(self):
        return len(self.elapsed)

    def walk_index(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), np.diff(self.offsets))

    def field(self, i: int) -> LocalTimeField:
        a, b = self.offsets[i], self.offsets[i + 1]
        return LocalTimeField(self.dimension, self.torus_R, self.sites[a:b], self.times[a:b],
                              float(self.elapsed[i]), int(self.jumps[i]))

    def fields(self):
        return [self.field(i) for i in range(len(self))]

    def totals(self) -> np.ndarray:
        return np.bincount(self.walk_index(), weights=self.times, minlength=len(self))

    def power_sums(self, q: float) -> np.ndarray:
        """Per-walk sum of ``l(x)**q``."""
        return np.bincount(self.walk_index(), weights=self.times**q, minlength=len(self))

    def dense(self) -> np.ndarray:
        """Array of shape ``(n, R**d)`` with torus sites flattened in C order."""
        if self.torus_R is None:
            raise ValueError("dense view is only defined on the torus")
        R, d = self.torus_R, self.dimension
        flat = np.ravel_multi_index(tuple(self.sites.T), (R,) * d) if len(self.times) else np.zeros(0, dtype=np.int64)
        out = np.zeros((len(self), R**d))
        np.add.at(out, (self.walk_index(), flat), self.times)
        return out


def _encode(walk: np.ndarray, pos: np.ndarray) -> tuple[np.ndarray, int, int]:
    d = pos.shape[1]
    lo = int(pos.min()) if pos.size else 0
    span = (int(pos.max()) - lo + 1) if pos.size else 1
    if span**d * (int(walk.max()) + 1 if walk.size else 1) >= 2**62:
        return None, lo, span
    key = walk.astype(np.int64)
    for j in range(d):
        key = key * span + (pos[:, j] - lo)
    return key, lo, span


def _decode(key: np.ndarray, d: int, lo: int, span: int):
    coords = np.empty((len(key), d), dtype=np.int64)
    k = key.copy()
    for j in range(d - 1, -1, -1):
        coords[:, j] = k % span + lo
        k //= span
    return k, coords


def _simulate_block(config: WalkConfig, m: int, rng: np.random.Generator):
    d = config.dimension
    rate = 2 * d
    steps = _steps(d)
    t_end = np.asarray(_stop_time(config, rng, size=m), dtype=float)
    t = np.zeros(m)
    pos = np.zeros((m, d), dtype=np.int64)
    jumps = np.zeros(m, dtype=np.int64)
    maxn = np.zeros(m, dtype=np.int64)
    alive = np.flatnonzero(t_end > 0)

    rec_walk, rec_pos, rec_dur = [], [], []
    while alive.size:
        hold = rng.exponential(1.0 / rate, size=alive.size)
        nxt = t[alive] + hold
        stop = t_end[alive]
        jumped = nxt < stop
        rec_walk.append(alive)
        rec_pos.append(pos[alive])
        rec_dur.append(np.where(jumped, nxt, stop) - t[alive])
        movers = alive[jumped]
        if movers.size:
            dirs = rng.integers(0, 2 * d, size=movers.size)
            pos[movers] += steps[dirs]
            t[movers] = nxt[jumped]
            jumps[movers] += 1
            maxn[movers] = np.maximum(maxn[movers], np.abs(pos[movers]).max(axis=1))
        alive = movers

    if rec_walk:
        walk = np.concatenate(rec_walk)
        p = np.concatenate(rec_pos)
        dur = np.concatenate(rec_dur)
    else:
        walk = np.zeros(0, dtype=np.int64)
        p = np.zeros((0, d), dtype=np.int64)
        dur = np.zeros(0)
    return walk, p, dur, t_end, jumps, maxn


def simulate_batch(config: WalkConfig, n: int, seed: int | None = None,
                   block: int = BLOCK, first_block: int = 0) -> LocalTimeBatch:
    """``n`` independent walks, vectorised across replicas.

    Replicas are processed in blocks of ``block`` walks, each drawing from the
    stream keyed by ``(seed, block index)``; within a block all live walks
    advance one holding interval per step.  ``first_block`` shifts the block
    index, so a long run can be produced piecewise with identical draws.
    """
    if n < 0:
        raise ConfigError("n must be >= 0")
    seed = config.seed if seed is None else seed
    d = config.dimension
    R = config.torus_R
    parts = []
    for b, start, size in iter_blocks(n, block):
        rng = block_rng(seed, b + first_block, WALK)
        walk, p, dur, t_end, jumps, maxn = _simulate_block(config, size, rng)
        if R is not None:
            p = p % R
        parts.append((walk + start, p, dur, t_end, jumps, maxn))

    if not parts:
        z = np.zeros(0)
        return LocalTimeBatch(d, R, np.zeros(1, dtype=np.int64), np.zeros((0, d), dtype=np.int64),
                              z, z, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))

    walk = np.concatenate([x[0] for x in parts])
    pos = np.concatenate([x[1] for x in parts])
    dur = np.concatenate([x[2] for x in parts])
    elapsed = np.concatenate([x[3] for x in parts])
    jumps = np.concatenate([x[4] for x in parts])
    maxn = np.concatenate([x[5] for x in parts])

    key, lo, span = _encode(walk, pos)
    if key is None:
        rows = np.column_stack([walk, pos])
        uniq, inv = np.unique(rows, axis=0, return_inverse=True)
        uwalk, usites = uniq[:, 0], uniq[:, 1:]
    else:
        ukey, inv = np.unique(key, return_inverse=True)
        uwalk, usites = _decode(ukey, d, lo, span)
    tot = np.bincount(inv.ravel(), weights=dur, minlength=len(uwalk))
    keep = tot > 0
    uwalk, usites, tot = uwalk[keep], usites[keep], tot[keep]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(uwalk, minlength=n), out=offsets[1:])
    return LocalTimeBatch(d, R, offsets, usites, tot, elapsed, jumps, maxn)
