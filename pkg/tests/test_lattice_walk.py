import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from silt_lab.errors import ConfigError
from silt_lab.lattice_walk import (LocalTimeField, WalkConfig, confined_sample, simulate_batch,
                                   simulate_local_times)


def test_zero_horizon_gives_empty_field():
    f = simulate_local_times(WalkConfig(3, horizon=0.0, seed=1))
    assert len(f) == 0
    assert f.elapsed == 0.0
    assert f.total() == 0.0


@settings(max_examples=60, deadline=None)
@given(d=st.integers(1, 4), T=st.floats(0, 30), seed=st.integers(0, 2**64 - 1),
       R=st.one_of(st.none(), st.integers(1, 6)))
def test_mass_equals_elapsed(d, T, seed, R):
    f = simulate_local_times(WalkConfig(d, horizon=T, torus_R=R, seed=seed))
    assert f.elapsed == T
    assert math.isclose(f.total(), f.elapsed, rel_tol=1e-12, abs_tol=0.0) or f.elapsed == 0
    assert np.all(f.times > 0)
    assert len(np.unique(f.sites, axis=0)) == len(f)
    if R is not None:
        assert np.all((f.sites >= 0) & (f.sites < R))


def test_jump_count_is_poisson_2dT():
    d, T, n = 3, 10.0, 100_000
    batch = simulate_batch(WalkConfig(d, horizon=T, seed=11), n)
    mean = batch.jumps.mean()
    # Poisson(2dT): variance equals the mean
    assert abs(mean - 2 * d * T) <= 4 * math.sqrt(2 * d * T / n)


def test_seed_determinism():
    cfg = WalkConfig(3, horizon=7.5, seed=2024)
    a, b = simulate_local_times(cfg, replica=3), simulate_local_times(cfg, replica=3)
    assert np.array_equal(a.sites, b.sites)
    assert np.array_equal(a.times, b.times)
    c = simulate_local_times(cfg, replica=4)
    assert not (len(a) == len(c) and np.array_equal(a.times, c.times))
    x = simulate_batch(cfg, 500)
    y = simulate_batch(cfg, 500)
    assert np.array_equal(x.times, y.times) and np.array_equal(x.sites, y.sites)


def test_batch_is_reproducible_piecewise():
    cfg = WalkConfig(2, horizon=3.0, seed=5)
    whole = simulate_batch(cfg, 300, block=100)
    parts = [simulate_batch(cfg, 100, block=100, first_block=b) for b in range(3)]
    assert np.array_equal(whole.totals(), np.concatenate([p.totals() for p in parts]))
    assert np.array_equal(whole.power_sums(2.0), np.concatenate([p.power_sums(2.0) for p in parts]))


def test_exponential_stop_mean():
    lam, n = 0.4, 20_000
    batch = simulate_batch(WalkConfig(3, stop_rate=lam, seed=8), n)
    assert abs(batch.elapsed.mean() - 1 / lam) <= 4 * batch.elapsed.std(ddof=1) / math.sqrt(n)
    assert np.allclose(batch.totals(), batch.elapsed, rtol=1e-12, atol=0)


def test_stop_is_capped_by_horizon():
    batch = simulate_batch(WalkConfig(2, horizon=0.5, stop_rate=0.1, seed=1), 2000)
    assert batch.elapsed.max() <= 0.5
    assert np.mean(batch.elapsed == 0.5) > 0.9


def test_torus_field_is_reduced_lattice_field():
    R = 101  # far beyond twice any displacement reached in T=5
    for rep in range(20):
        lat = simulate_local_times(WalkConfig(3, horizon=5.0, seed=9), rep)
        tor = simulate_local_times(WalkConfig(3, horizon=5.0, torus_R=R, seed=9), rep)
        assert np.abs(lat.sites).max() * 2 < R
        expected = {tuple(int(c) % R for c in s): t for s, t in lat.as_dict().items()}
        assert tor.as_dict() == expected


def test_torus_batch_dense_view():
    R, d = 3, 2
    batch = simulate_batch(WalkConfig(d, horizon=4.0, torus_R=R, seed=3), 50)
    dense = batch.dense()
    assert dense.shape == (50, R**d)
    assert np.allclose(dense.sum(axis=1), batch.elapsed, rtol=1e-12)
    f = batch.field(7)
    assert np.allclose(f.dense().ravel(), dense[7])


@pytest.mark.parametrize("kw", [dict(dimension=0, horizon=1.0), dict(dimension=3, horizon=-1.0),
                                dict(dimension=2, horizon=1.0, torus_R=0),
                                dict(dimension=2, stop_rate=0.0),
                                dict(dimension=2)])
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        WalkConfig(**kw)


def test_box_zero_acceptance_is_no_jump_probability():
    d, T, n = 3, 0.1, 20_000
    cfg = WalkConfig(d, horizon=T, seed=77)
    acc = sum(confined_sample(cfg, 0, replica=i) is not None for i in range(n))
    p = math.exp(-2 * d * T)
    assert abs(acc / n - p) <= 4 * math.sqrt(p * (1 - p) / n)


def test_confined_fields_stay_in_box():
    cfg = WalkConfig(3, horizon=3.0, seed=4)
    L = 2
    kept = [f for i in range(400) if (f := confined_sample(cfg, L, replica=i)) is not None]
    assert kept
    for f in kept:
        assert np.abs(f.sites).max() <= L


def test_confinement_frequency_decreases_with_time():
    n, L = 100_000, 2
    freq = [np.mean(simulate_batch(WalkConfig(3, horizon=T, seed=12), n).max_norm <= L)
            for T in (1.0, 2.0, 4.0)]
    assert freq[0] >= freq[1] >= freq[2]


def test_from_dict_drops_zero_masses():
    f = LocalTimeField.from_dict({(0, 0): 1.0, (1, 0): 0.0}, 2)
    assert len(f) == 1 and f.elapsed == 1.0
