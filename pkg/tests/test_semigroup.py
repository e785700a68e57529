import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import hermite_e
from scipy.integrate import quad

from rbo.diagnostics import l2_norm, norm_hs, norm_weighted
from rbo.semigroup import (
    GroupBound,
    group_apply,
    group_xi_derivative,
    moment_defect,
    one_sided_limits,
    regular_part,
    singular_part,
    symbol_b,
    weighted_group_norm_bound,
)
from rbo.spectral import Field

from conftest import gaussian


def F(t, xi):
    return np.exp(t * symbol_b(xi))


def test_symbol_b_values():
    assert symbol_b(0.0) == 0
    assert symbol_b(1.0) == pytest.approx(-0.5j)
    xi = np.linspace(-50, 50, 1001)
    b = symbol_b(xi)
    assert np.all(b.real == 0)
    assert np.all(np.abs(b) < 1)
    assert np.array_equal(symbol_b(-xi), -b)


def test_group_identity_isometry_and_law(ref_grid):
    phi = gaussian(ref_grid)
    assert np.max(np.abs(group_apply(0.0, phi).values - phi.values)) < 1e-15
    base = norm_hs(phi, 1.0)
    for t in (0.5, 1.0, 10.0):
        assert abs(norm_hs(group_apply(t, phi), 1.0) - base) <= 1e-12 * base
    back = group_apply(1.0, group_apply(-1.0, phi))
    assert np.max(np.abs(back.values - phi.values)) < 1e-12
    a = group_apply(0.7, group_apply(1.3, phi))
    b = group_apply(2.0, phi)
    assert np.max(np.abs(a.values - b.values)) < 1e-12


def test_j1_vanishes_at_t0():
    for xi in (-3.0, -0.2, 0.5, 4.0):
        assert group_xi_derivative(1, 0.0, xi).regular == 0


def test_j2_reference_value():
    val = group_xi_derivative(2, 1.0, 1.0).regular
    expected = (0.25j - 0.0625) * np.exp(-0.5j)
    assert abs(val - expected) < 1e-15


def _fd(order, t, xi, h=1e-4):
    with mpmath.workdps(40):
        f = lambda z: mpmath.exp(-1j * t * z / (1 + abs(z)))
        return complex(mpmath.diff(f, mpmath.mpf(xi), order, h=h, method="step"))


@pytest.mark.parametrize("j", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("side", [1.0, -1.0])
def test_regular_part_matches_finite_differences(j, side):
    rng = np.random.default_rng(j)
    for _ in range(10):
        t = rng.uniform(0.2, 4.0)
        xi = side * rng.uniform(0.2, 4.0)
        fd = _fd(j, t, xi)
        val = complex(regular_part(j, t, xi))
        assert abs(val - fd) <= 1e-6 * abs(fd)


def test_singular_parts():
    t = 0.8
    assert singular_part(1, t) == ()
    assert singular_part(2, t) == ()
    assert singular_part(3, t) == ((0, 4j * t),)
    assert singular_part(4, t) == ((1, 4j * t), (0, 12 * t**2))
    assert singular_part(5, t) == ((2, 4j * t), (1, 12 * t**2), (0, 48j * t - 24j * t**3))


@pytest.mark.parametrize("j", [2, 3, 4])
def test_delta_coefficients_are_jumps(j):
    t = 1.7
    plus, minus = one_sided_limits(j, t)
    coef = dict(singular_part(j + 1, t))[0]
    assert abs((plus - minus) - coef) < 1e-12


def _pair(fn, a, lim=40.0):
    re = quad(lambda x: fn(x).real, -lim, 0, limit=400)[0] + quad(lambda x: fn(x).real, 0, lim, limit=400)[0]
    im = quad(lambda x: fn(x).imag, -lim, 0, limit=400)[0] + quad(lambda x: fn(x).imag, 0, lim, limit=400)[0]
    return re + 1j * im


@pytest.mark.parametrize("j", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("t,a", [(0.6, 0.3), (1.5, -0.7)])
def test_distributional_pairing(j, t, a):
    # <d^j F, psi> = (-1)^j <F, psi^(j)> with psi a shifted Gaussian;
    # psi^(m)(x) = (-1)^m He_m(x - a) psi(x).
    psi = lambda x: math.exp(-((x - a) ** 2) / 2)

    def dpsi(m, x):
        c = np.zeros(m + 1)
        c[m] = 1
        return (-1) ** m * hermite_e.hermeval(x - a, c) * psi(x)

    lhs = _pair(lambda x: complex(regular_part(j, t, x)) * psi(x), a)
    for m, c in singular_part(j, t):
        lhs += c * (-1) ** m * dpsi(m, 0.0)
    rhs = (-1) ** j * _pair(lambda x: complex(F(t, x)) * dpsi(j, x), a)
    assert abs(lhs - rhs) < 1e-8 * max(1.0, abs(rhs))


def test_group_xi_derivative_errors():
    with pytest.raises(ValueError):
        group_xi_derivative(0, 1.0, 1.0)
    with pytest.raises(ValueError):
        group_xi_derivative(6, 1.0, 1.0)
    with pytest.raises(ValueError):
        group_xi_derivative(2, 1.0, 0.0)
    dv = group_xi_derivative(3, 2.0, 0.5)
    assert dv.jump() == pytest.approx(12 * 4.0)


def test_bound_coefficients():
    assert GroupBound(3).coefficients(1.0) == (73, 45, 9, 1)
    assert GroupBound(2).coefficients(0.0) == (0, 0, 1, 0)
    assert GroupBound(1).coefficients(2.0) == (4, 1, 0, 0)
    norms = {"hs": 2.0, "l2": 1.0, "x1": 0.5, "x2": 3.0}
    assert weighted_group_norm_bound(0, 5.0, norms) == 5.0
    assert weighted_group_norm_bound(2, 0.0, norms) == 4.0 + 9.0
    with pytest.raises(ValueError):
        weighted_group_norm_bound(3, 1.0, norms)
    with pytest.raises(KeyError):
        weighted_group_norm_bound(3, 1.0, norms, moment_verified=True)


@pytest.mark.parametrize("r", [1, 2])
def test_bound_holds_for_centred_gaussian(ref_grid, r):
    phi = gaussian(ref_grid)
    norms = {"hs": norm_hs(phi, 1), "l2": l2_norm(phi), "x1": norm_weighted(phi, 1), "x2": norm_weighted(phi, 2)}
    for t in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0):
        u = group_apply(t, phi)
        measured = norm_hs(u, 1) ** 2 + norm_weighted(u, r) ** 2
        assert measured <= weighted_group_norm_bound(r, t, norms) + 1e-8


def test_bound_fails_for_shifted_gaussian(ref_grid):
    # The chain discards cross terms; an off-centre Gaussian exposes that.
    phi = gaussian(ref_grid, center=3.0)
    norms = {"hs": norm_hs(phi, 1), "l2": l2_norm(phi), "x1": norm_weighted(phi, 1), "x2": norm_weighted(phi, 2)}
    u = group_apply(2.0, phi)
    measured = norm_hs(u, 1) ** 2 + norm_weighted(u, 1) ** 2
    assert measured > weighted_group_norm_bound(1, 2.0, norms)


def test_moment_defect_examples(ref_grid):
    x = ref_grid.x
    g = np.exp(-x * x)
    assert abs(moment_defect(Field.from_values(ref_grid, x * g))[0]) < 1e-14
    assert abs(moment_defect(Field.from_values(ref_grid, g))[0] - math.sqrt(math.pi)) < 1e-10
    assert abs(moment_defect(Field.from_values(ref_grid, (1 - 2 * x * x) * g))[0]) < 1e-10
    d = moment_defect(Field.from_values(ref_grid, x * g), 2)
    assert d[1] == pytest.approx(-1j * math.sqrt(math.pi) / 2)
    with pytest.raises(ValueError):
        moment_defect(Field.from_values(ref_grid, g), 3)


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_group_symbol_unimodular(t, xi):
    assert abs(abs(F(t, xi)) - 1) < 1e-14
