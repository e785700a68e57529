"""Acceptance criteria at the reference resolution n=1024, L=64 pi, s=1, dt=1e-3.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary.
"""
import math
from functools import lru_cache

import pytest

from rbo.experiments import ExperimentConfig, run_experiment


@lru_cache(maxsize=None)
def _run(**kw):
    return run_experiment(ExperimentConfig(**kw))


def _check(rep, fragment):
    hits = [c for c in rep.checks if fragment in c.name]
    assert hits, f"no check matching {fragment!r}"
    return hits


def test_criterion_01_conservation(record):
    rep = _run(name="conservation", T=5.0)
    drift = _check(rep, "Q relative drift")[0]
    order = _check(rep, "drift shrinks")[0]
    ok = drift.passed and order.passed
    record(1, ok, f"Q drift {drift.value:.2e} (< 1e-6); drift shrink per dt halving "
                  f"{order.value:.1f}x at dt={rep.measured['coarse_dts']} (>= 8)")
    assert ok


def test_criterion_02_mean_mode(record):
    rep = _run(name="conservation", T=5.0)
    c = _check(rep, "phi^(0)")[0]
    record(2, c.passed, f"max |u^(t,0) - phi^(0)| = {c.value:.2e} (< 1e-10)")
    assert c.passed


def test_criterion_03_isometry(record):
    rep = _run(name="isometry")
    worst = max(c.value for c in _check(rep, "|E(t)phi|_s"))
    record(3, rep.passed, f"max relative H^s change over t in {{0.5, 1, 10}}: {worst:.2e} (<= 1e-12)")
    assert rep.passed


def test_criterion_04_derivative_formulas(record):
    rep = _run(name="derivative_formulas")
    m = rep.measured
    record(4, rep.passed, f"FD rel err j=1 {m['max_rel_err_j1']:.1e}, j=2 {m['max_rel_err_j2']:.1e} (< 1e-6), "
                          f"j=3 {m['max_rel_err_j3']:.1e} (< 1e-5); j=3 delta coefficient 4it")
    assert rep.passed


def test_criterion_05_group_bounds(record):
    reps = [_run(name="group_bounds", r=r) for r in (1.0, 2.0)]
    ok = all(r.passed for r in reps)
    excess = max(max(r.measured["max_excess_L"], r.measured["max_excess_2L"]) for r in reps)
    record(5, ok, f"r=1,2 at six t, L and 2L: max(measured - bound) = {excess:.3g} (<= 1e-8)")
    assert ok


def test_criterion_06_moment_condition(record):
    g = _run(name="moment_condition", r=3.0, T=1.0, family="gaussian")
    d = _run(name="moment_condition", r=3.0, T=1.0, family="gaussian_derivative")
    ok = g.measured["verdict"] == "DIVERGES" and d.measured["verdict"] == "BOUNDED"
    record(6, ok, f"gaussian {g.measured['verdict']} ratios {[round(x, 4) for x in g.measured['ratios']]}; "
                  f"x e^(-x^2) {d.measured['verdict']} ratios {[round(x, 4) for x in d.measured['ratios']]}")
    assert ok


def test_criterion_07_contraction(record):
    rep = _run(name="contraction", amplitude=0.5, T=0.25)
    rates = rep.series["rates"]
    record(7, rep.passed, f"max rates at T, T/2, T/4: {[round(r, 4) for r in rates['rate']]}; "
                          f"Picard vs RK4 {rep.measured.get('picard_vs_rk4', math.nan):.1e} (< 1e-6)")
    assert rep.passed


def test_criterion_08_operator_bound(record):
    rep = _run(name="operator_bound", corpus_size=20)
    c = _check(rep, "A phi")[0]
    record(8, rep.passed, f"20-field corpus: max |A phi|^2/|phi|^2 = {rep.measured['max_ratio']:.3f} (<= 4)")
    assert rep.passed


def test_criterion_09_decay_persistence(record):
    rep = _run(name="decay_persistence", r=2.4, T=2.0)
    m = rep.measured
    record(9, rep.passed, f"r=2.4, T=2: max L vs 2L difference {m['max_rel_diff']:.2%} (< 1%); "
                          f"growth {m['growth']:.2f}x")
    assert rep.passed


def test_criterion_10_unique_continuation(record):
    rep = _run(name="unique_continuation", t2=1.0)
    m = rep.measured
    record(10, rep.passed, f"I(1) = {m['i_value']:.4f} (> 0); jump error {m['jump_relative_error']:.1e} (< 5%); "
                           f"h ratio r=5/2 {m['h_ratio_r2.5']:.3f} (>= 1.1), r=2.4 {m['h_ratio_r2.4']:.3f} (<= 1.01)")
    assert rep.passed


def test_criterion_11_a2_weights(record):
    rep = _run(name="a2_weight")
    stab = {c.name.split("=")[-1]: round(c.value, 4) for c in _check(rep, "n-stable")}
    record(11, rep.passed, f"n vs 2n change of max R by theta {stab} (<= 10%); "
                           f"probe theta->1/2 max R {[round(x, 3) for x in rep.measured['probe_growth']]}")
    assert rep.passed


def test_criterion_12_growth_envelope(record):
    rep = _run(name="growth_envelope", T=10.0)
    stable = all(c.passed for c in rep.checks if not c.blocking)
    record(12, stable, f"(non-blocking) C2 {rep.measured['c2']}, C3 {rep.measured['c3']} at dt, dt/2 (+-20%)")
    assert all(math.isfinite(x) for x in rep.measured["c2"] + rep.measured["c3"])
