import math

import numpy as np
import pytest

from rbo.diagnostics import conserved_q, mean_mode
from rbo.evolution import (
    BlowUpError,
    ContractionFailure,
    PicardConfig,
    Trajectory,
    dealias,
    evolve,
    heuristic_contraction_time,
    norm_s2,
    picard_solve,
    rhs,
    rk4_step,
)
from rbo.semigroup import group_apply, symbol_b
from rbo.spectral import Field, GridSpec

from conftest import gaussian


def test_rhs_zero_and_constant(small_grid):
    assert np.all(rhs(Field.zeros(small_grid)).spectrum == 0)
    c = Field.from_values(small_grid, np.full(small_grid.n, 2.5))
    assert np.max(np.abs(rhs(c).values)) < 1e-14


def test_rhs_linear_single_mode(unit_grid):
    x = unit_grid.x
    out = rhs(Field.from_values(unit_grid, np.cos(x)), nonlinear=False)
    # b(+-1) = -+ i/2, so cos x -> (1/2) sin x
    assert np.allclose(out.values, 0.5 * np.sin(x), atol=1e-14)


def test_rhs_nonlinear_single_mode(unit_grid):
    # u = cos x: u^2 = 1/2 + cos(2x)/2, b(2) = -2i/3 -> (1/2) * (2/3) sin 2x / 2
    x = unit_grid.x
    full = rhs(Field.from_values(unit_grid, np.cos(x))).values
    expected = 0.5 * np.sin(x) + np.sin(2 * x) / 6
    assert np.allclose(full, expected, atol=1e-14)


def test_dealias_band_limited_unchanged(small_grid):
    rng = np.random.default_rng(1)
    spec = np.zeros(small_grid.n, complex)
    band = (np.abs(small_grid.k) <= small_grid.n // 3) & (small_grid.k != -small_grid.nyquist)
    spec[band] = rng.standard_normal(band.sum())
    f = Field.from_values(small_grid, Field.from_spectrum(small_grid, spec).values)
    assert np.allclose(dealias(f).spectrum, f.spectrum, atol=1e-12)


def test_dealias_noise_top_third_zero(small_grid):
    f = Field.from_values(small_grid, np.random.default_rng(2).standard_normal(small_grid.n))
    out = dealias(f).spectrum
    assert np.all(out[np.abs(small_grid.k) > small_grid.n // 3] == 0)


def test_dealiased_square_is_exact_convolution():
    g = GridSpec(32, 2 * math.pi)
    rng = np.random.default_rng(3)
    K = g.n // 3
    coef = {k: rng.standard_normal() + 1j * rng.standard_normal() for k in range(1, K + 1)}
    coef[0] = rng.standard_normal()
    for k in range(1, K + 1):
        coef[-k] = np.conj(coef[k])
    u = sum((coef[k] * np.exp(1j * k * g.x)).real for k in range(-K, K + 1)) / 1.0
    # direct convolution of Fourier-series coefficients on retained modes
    conv = {m: sum(coef[k] * coef[m - k] for k in range(-K, K + 1) if -K <= m - k <= K) for m in range(-K, K + 1)}
    # rhs nonlinear part = b * (u^2)^ / 2; recover (u^2)^ from it
    nl = rhs(Field.from_values(g, u)).spectrum - rhs(Field.from_values(g, u), nonlinear=False).spectrum
    b = symbol_b(g.xi)
    for m in range(1, K + 1):
        idx = m % g.n
        series_coef = nl[idx] / (0.5 * b[idx]) / g.length
        assert abs(series_coef - conv[m]) < 1e-12 * max(1, abs(conv[m]))


def test_rk4_zero_state(small_grid):
    z = Field.zeros(small_grid)
    assert np.all(rk4_step(z, 0.1).spectrum == 0)


def test_rk4_linear_mode(unit_grid):
    x = unit_grid.x
    f = Field.from_values(unit_grid, np.cos(x))
    dt = 0.01
    out = rk4_step(f, dt, nonlinear=False)
    exact = group_apply(dt, f)
    assert np.max(np.abs(out.values - exact.values)) < 1e-11


def test_rk4_global_order(small_grid):
    phi = gaussian(small_grid)
    T = 1.0
    ref = evolve(phi, T, 1e-4, stride=10_000).states[-1]
    errs = []
    dts = [1e-2, 5e-3, 2.5e-3]
    for dt in dts:
        u = evolve(phi, T, dt, stride=10_000).states[-1]
        errs.append(np.max(np.abs(u.values - ref.values)))
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert abs(slope - 4) < 0.2


def test_evolve_t0_single_snapshot(small_grid):
    tr = evolve(gaussian(small_grid), 0.0, 1e-3)
    assert len(tr) == 1
    assert tr.times.tolist() == [0.0]


def test_evolve_small_amplitude_matches_group(ref_grid):
    phi = gaussian(ref_grid, amplitude=1e-6)
    tr = evolve(phi, 1.0, 1e-2, stride=100)
    lin = group_apply(1.0, phi)
    assert np.max(np.abs(tr.states[-1].values - lin.values)) < 1e-9


def test_evolve_invariants(small_grid):
    phi = gaussian(small_grid)
    tr = evolve(phi, 2.0, 1e-3, stride=250)
    q = tr.diagnostics["q"]
    assert np.max(np.abs(q - q[0])) / q[0] < 1e-10
    assert np.max(np.abs(tr.diagnostics["mean_mode"] - mean_mode(phi))) < 1e-12
    assert tr.times[-1] == pytest.approx(2.0)
    for st in tr.states:
        assert st.hermitian_defect() < 1e-12
    assert tr.diagnostics["l2_integral"][0] == 0.0


def test_evolve_records_final_time(small_grid):
    tr = evolve(gaussian(small_grid), 0.35, 0.05, stride=3)
    assert tr.times.tolist() == pytest.approx([0.0, 0.15, 0.3, 0.35])
    assert tr.at(0.15) is tr.states[1]
    with pytest.raises(KeyError):
        tr.at(0.2)


def test_evolve_argument_errors(small_grid):
    phi = gaussian(small_grid)
    with pytest.raises(ValueError):
        evolve(phi, 1.0, 0.3)
    with pytest.raises(ValueError):
        evolve(phi, -1.0, 0.1)
    with pytest.raises(ValueError):
        evolve(phi, 1.0, 0.1, stride=0)


def test_evolve_blow_up_reports_last_state(small_grid):
    phi = gaussian(small_grid, amplitude=1e6)
    with pytest.raises(BlowUpError) as info:
        evolve(phi, 100.0, 1.0)
    assert info.value.last_state is not None
    assert np.all(np.isfinite(info.value.last_state.values))


def test_trajectory_validation(small_grid):
    f = gaussian(small_grid)
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 0.0]), states=[f, f], diagnostics={})
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.1]), states=[f], diagnostics={})


def test_picard_zero_data(small_grid):
    tr, rates = picard_solve(Field.zeros(small_grid), PicardConfig(T=0.5, nt=17))
    assert rates == []
    assert tr.diagnostics["iterations"][0] == 1
    assert np.all(tr.diagnostics["norm_s2"] == 0)


def test_picard_matches_rk4(small_grid):
    phi = gaussian(small_grid, amplitude=0.5)
    cfg = PicardConfig(T=0.25, nt=129)
    tr, rates = picard_solve(phi, cfg)
    assert max(rates) < 0.5
    ref = evolve(phi, 0.25, 0.25 / 512, stride=4)
    U = np.array([s.spectrum for s in tr.states])
    R = np.array([s.spectrum for s in ref.states])
    assert np.max(norm_s2(U - R, small_grid)) < 1e-6


def test_picard_rate_scales_with_T(small_grid):
    phi = gaussian(small_grid, amplitude=0.5)
    _, r1 = picard_solve(phi, PicardConfig(T=0.25))
    _, r2 = picard_solve(phi, PicardConfig(T=0.125))
    assert max(r2) <= 0.7 * max(r1)


def test_picard_large_T_fails_cleanly(small_grid):
    with pytest.raises(ContractionFailure) as info:
        picard_solve(gaussian(small_grid), PicardConfig(T=50.0, max_iter=30))
    assert len(info.value.rates) > 0


def test_picard_config_validation():
    with pytest.raises(ValueError):
        PicardConfig(T=0.0)
    with pytest.raises(ValueError):
        PicardConfig(T=1.0, nt=1)
    with pytest.raises(ValueError):
        PicardConfig(T=1.0, tol=0.0)


def test_heuristic_time_positive(small_grid):
    T0 = heuristic_contraction_time(gaussian(small_grid))
    assert 0 < T0 < 1 / 8
