import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from silt_lab.errors import ParameterError
from silt_lab.intersection import (IntersectionValue, fold, fold_batch, lq_norm, milt, silt,
                                   silt_batch)
from silt_lab.lattice_walk import LocalTimeField, WalkConfig, simulate_batch, simulate_local_times

masses = st.dictionaries(
    st.tuples(st.integers(-6, 6), st.integers(-6, 6)),
    st.floats(1e-6, 10.0), min_size=1, max_size=25)


def F(m, d=2, R=None):
    return LocalTimeField.from_dict(m, d, R)


def test_single_site():
    assert silt(F({(0, 0): 3.0}), 2.5).value == pytest.approx(3.0**2.5, rel=1e-15)


def test_two_masses():
    assert silt(F({(0, 0): 2.0, (1, 0): 3.0}), 2).value == 13.0


def test_unit_exponent_is_elapsed():
    f = simulate_local_times(WalkConfig(3, horizon=6.0, seed=1))
    assert silt(f, 1, allow_unit=True).value == pytest.approx(f.elapsed, rel=1e-12)
    with pytest.raises(ParameterError):
        silt(f, 1)
    with pytest.raises(ParameterError):
        silt(f, 0.5, allow_unit=True)


def test_mutual_frozen_walks():
    T = 1.7
    fs = [F({(0, 0): T}) for _ in range(3)]
    assert milt(fs).value == pytest.approx(T**3, rel=1e-15)


def test_mutual_disjoint_and_partial():
    assert milt([F({(0, 0): 1.0}), F({(1, 0): 1.0})]).value == 0.0
    a = F({(0, 0): 1.0, (1, 0): 2.0})
    b = F({(0, 0): 3.0})
    assert milt([a, b]).value == 3.0


def test_mutual_geometry_mismatch():
    with pytest.raises(ParameterError):
        milt([F({(0, 0): 1.0}), F({(0, 0): 1.0}, R=4)])
    with pytest.raises(ParameterError):
        milt([F({(0, 0): 1.0})])


def test_intersection_value_invariants():
    with pytest.raises(ValueError):
        IntersectionValue(-1.0, 2.0, "self")
    with pytest.raises(ValueError):
        IntersectionValue(1.0, 2.5, "mutual")


def test_fold_inside_box_is_identity():
    m = {(0, 1): 0.5, (2, 3): 1.5, (3, 0): 2.0}
    out = fold(F(m), 4)
    assert out.as_dict() == m
    assert out.torus_R == 4 and out.elapsed == pytest.approx(4.0)


def test_fold_merges_residue_class():
    f = F({(0, 0): 1.0, (5, 0): 1.0})
    g = fold(f, 5)
    assert g.as_dict() == {(0, 0): 2.0}
    assert silt(f, 2).value == 2.0 and silt(g, 2).value == 4.0


def test_fold_rejects_bad_input():
    with pytest.raises(ParameterError):
        fold(F({(0, 0): 1.0}), 0)
    with pytest.raises(ParameterError):
        fold(F({(0, 0): 1.0}, R=3), 3)


@settings(max_examples=200, deadline=None)
@given(m=masses, R=st.integers(1, 9), q=st.floats(1.01, 5.0))
def test_fold_never_decreases(m, R, q):
    f = F(m)
    g = fold(f, R)
    assert silt(f, q).value <= silt(g, q).value
    assert math.isclose(g.total(), f.total(), rel_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(ms=st.lists(masses, min_size=2, max_size=4))
def test_holder_chain(ms):
    fs = [F(m) for m in ms]
    q = len(fs)
    Q = milt(fs).value
    norms = [lq_norm(f, q) for f in fs]
    geo = math.prod(norms) ** (1 / q)
    assert Q ** (1 / q) <= geo * (1 + 1e-12)
    assert geo <= sum(norms) / q * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(m=masses, q=st.floats(1.01, 6.0))
def test_power_sum_bounded_by_total_power(m, q):
    f = F(m)
    assert silt(f, q).value <= f.total() ** q * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(m=masses, q=st.floats(1.01, 6.0), bump=st.floats(0.0, 3.0))
def test_monotone_in_masses(m, q, bump):
    site = next(iter(m))
    bigger = dict(m)
    bigger[site] += bump
    assert silt(F(m), q).value <= silt(F(bigger), q).value


def test_batch_matches_single_fields():
    batch = simulate_batch(WalkConfig(3, horizon=4.0, seed=2), 200)
    ps = silt_batch(batch, 2.5)
    fb = fold_batch(batch, 3)
    for i in (0, 17, 199):
        assert ps[i] == pytest.approx(silt(batch.field(i), 2.5).value, rel=1e-12)
        assert fold(batch.field(i), 3).as_dict() == pytest.approx(fb.field(i).as_dict(), rel=1e-12)


def test_compensated_sum_on_large_support():
    rng = np.random.default_rng(0)
    n = 200_001
    sites = np.column_stack([np.arange(n), np.zeros(n, dtype=np.int64)])
    times = rng.random(n) + 1e-3
    times[0] = 1e8
    f = LocalTimeField(2, None, sites, times, math.fsum(times))
    assert silt(f, 2).value == math.fsum(times**2)
