"""Shared oracles and the per-criterion report of the acceptance suite."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

# expected time at the origin of the rate-1-per-edge walk is W_d / (2d), with
# W_d the lattice Green integral.  W_3 has Watson's closed form in Gamma values;
# the d=4 value was frozen from a 30-digit mpmath quadrature of
# int_0^inf (e^{-2t} I_0(2t))^4 dt.
G3_CLOSED_FORM = (math.sqrt(6) / (32 * math.pi**3) * math.gamma(1 / 24) * math.gamma(5 / 24)
                  * math.gamma(7 / 24) * math.gamma(11 / 24)) / 6
G4_FROZEN = 0.154933390231060214


def torus_generator(d: int, R: int) -> np.ndarray:
    """Dense generator of the walk on T_R, built by enumerating neighbours."""
    sites = list(itertools.product(range(R), repeat=d))
    index = {s: i for i, s in enumerate(sites)}
    n = len(sites)
    L = np.zeros((n, n))
    for s in sites:
        i = index[s]
        for j in range(d):
            for step in (1, -1):
                t = list(s)
                t[j] = (t[j] + step) % R
                L[i, index[tuple(t)]] += 1.0
                L[i, i] -= 1.0
    return L


_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or rep.failed:
        num, title = mark.args
        entry = _RESULTS.setdefault(num, {"title": title, "ok": True, "tests": []})
        entry["ok"] &= rep.passed
        entry["tests"].append((item.name, rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_RESULTS):
        e = _RESULTS[num]
        tr.write_line(f"[{'PASS' if e['ok'] else 'FAIL'}] criterion {num:2d}: {e['title']}")
        for name, outcome in e["tests"]:
            if outcome != "passed":
                tr.write_line(f"         {outcome}: {name}")
