"""The linear rBO group E(t) = exp(tA) and its xi-derivative calculus.

E(t) acts by the unimodular multiplier F(t, xi) = exp(b(xi) t) with
b(xi) = -i xi / (1 + |xi|).  Weights |x|^r in physical space correspond to
xi-derivatives of F * phi^, which is why the derivatives of F and their
distributional parts at xi = 0 matter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .spectral import Field, GridSpec, MultiplierSymbol, apply_multiplier

__all__ = [
    "symbol_b",
    "group_symbol",
    "group_apply",
    "DerivativeValue",
    "group_xi_derivative",
    "regular_part",
    "singular_part",
    "one_sided_limits",
    "GroupBound",
    "weighted_group_norm_bound",
    "moment_defect",
]

MAX_ORDER = 5


def symbol_b(xi):
    """b(xi) = -i xi / (1 + |xi|); purely imaginary with |b| < 1."""
    xi = np.asarray(xi, dtype=float)
    return -1j * xi / (1.0 + np.abs(xi))


def group_symbol(t: float) -> MultiplierSymbol:
    # b is odd, so it is taken as 0 on the Nyquist mode and F = 1 there.
    return MultiplierSymbol(lambda xi: np.exp(t * symbol_b(xi)), f"exp({t:g} b)", nyquist=1.0)


def group_apply(t: float, field: Field) -> Field:
    """E(t) field.  Valid for any real t (it is a group)."""
    return apply_multiplier(field, group_symbol(t))


# Regular part of d^j/dxi^j F on xi != 0:
#     R_j = sum  coef * (i t)^p * [sgn(xi) if odd] * (1+|xi|)^(-k) * F
# Entries are (k, odd, coef, p).  Obtained from the recurrence
#     P_{j+1}(g) = -g^2 (sgn P_j'(g) + i t P_j(g)),  g = 1/(1+|xi|),
# which follows from dg/dxi = -sgn g^2 and dF/dxi = -i t g^2 F.
_REGULAR_TERMS = {
    1: ((2, False, -1, 1),),
    2: ((3, True, 2, 1), (4, False, 1, 2)),
    3: ((4, False, -6, 1), (5, True, -6, 2), (6, False, -1, 3)),
    4: ((5, True, 24, 1), (6, False, 36, 2), (7, True, 12, 3), (8, False, 1, 4)),
    5: (
        (6, False, -120, 1),
        (7, True, -240, 2),
        (8, False, -120, 3),
        (9, True, -20, 4),
        (10, False, -1, 5),
    ),
}


def _check_order(j: int) -> None:
    if not (isinstance(j, (int, np.integer)) and 1 <= j <= MAX_ORDER):
        raise ValueError(f"derivative order must be an integer in 1..{MAX_ORDER}, got {j!r}")


def regular_part(j: int, t: float, xi, sign=None):
    """Pointwise part of d^j F / dxi^j, vectorized in ``xi``.

    ``sign`` forces sgn(xi) (use +1/-1 for one-sided limits at 0); by default
    it is taken from ``xi``, and xi = 0 gives the average of the two limits.
    """
    _check_order(j)
    xi = np.asarray(xi, dtype=float)
    s = np.sign(xi) if sign is None else np.broadcast_to(float(sign), xi.shape)
    g = 1.0 / (1.0 + np.abs(xi))
    F = np.exp(t * symbol_b(xi))
    it = 1j * t
    total = np.zeros(np.broadcast(xi, s).shape, dtype=complex)
    for k, odd, coef, p in _REGULAR_TERMS[j]:
        term = coef * it**p * g**k
        total = total + (term * s if odd else term)
    return total * F


def singular_part(j: int, t: float) -> tuple[tuple[int, complex], ...]:
    """(m, c_m) pairs such that d^j F contains sum c_m delta^(m).

    The coefficient of delta^(m) in d^j F is the jump at 0 of the regular
    part of d^(j-1-m) F.
    """
    _check_order(j)
    jumps = {
        2: 4j * t,
        3: 12.0 * t**2,
        4: 48j * t - 24j * t**3,
    }
    out = []
    for m in range(j - 3, -1, -1):
        out.append((m, complex(jumps[j - 1 - m])))
    return tuple(out)


def one_sided_limits(j: int, t: float) -> tuple[complex, complex]:
    """(R_j(0+), R_j(0-)) for the regular part of d^j F."""
    return (
        complex(regular_part(j, t, 0.0, sign=1.0)),
        complex(regular_part(j, t, 0.0, sign=-1.0)),
    )


@dataclass(frozen=True)
class DerivativeValue:
    """d^j_xi F(t, xi) split into its pointwise value and its delta terms."""

    order: int
    t: float
    xi: float
    regular: complex
    singular: tuple[tuple[int, complex], ...]

    def limits(self) -> tuple[complex, complex]:
        return one_sided_limits(self.order, self.t)

    def jump(self) -> complex:
        plus, minus = self.limits()
        return plus - minus


def group_xi_derivative(j: int, t: float, xi: float) -> DerivativeValue:
    """d^j_xi of F(t, xi) = exp(b(xi) t) for j = 1..5 at a nonzero xi."""
    _check_order(j)
    if xi == 0:
        raise ValueError("the regular part is discontinuous at xi = 0; use one_sided_limits")
    return DerivativeValue(
        order=int(j),
        t=float(t),
        xi=float(xi),
        regular=complex(regular_part(j, t, xi)),
        singular=singular_part(j, t),
    )


# Coefficients on (|phi|_0^2, |x phi|_0^2, |x^2 phi|_0^2, |x^3 phi|_0^2); the
# H^s part always enters with coefficient 1.
def _bound_coefficients(r: int, t: float) -> tuple[float, float, float, float]:
    t2 = t * t
    if r == 0:
        return (1.0, 0.0, 0.0, 0.0)
    if r == 1:
        return (t2, 1.0, 0.0, 0.0)
    if r == 2:
        return (4 * t2 + t2 * t2, t2, 1.0, 0.0)
    if r == 3:
        return (36 * t2 + 36 * t2**2 + t2**3, 36 * t2 + 9 * t2**2, 9 * t2, 1.0)
    raise ValueError(f"explicit group bounds exist for r in 0..3, got {r!r}")


_NORM_KEYS = ("l2", "x1", "x2", "x3")


@dataclass(frozen=True)
class GroupBound:
    """Polynomial bound on |E(t) phi|_{s,r}^2 in terms of weighted norms of phi.

    Norm keys: ``hs`` (|phi|_s), ``l2`` (|phi|_0), ``x1``, ``x2``, ``x3``
    (|x^j phi|_0).  All are plain norms; the bound squares them.
    """

    r: int

    def coefficients(self, t: float) -> tuple[float, float, float, float]:
        return _bound_coefficients(self.r, t)

    def evaluate(self, t: float, norms: Mapping[str, float]) -> float:
        coefs = self.coefficients(t)
        total = float(norms["hs"]) ** 2
        for key, c in zip(_NORM_KEYS, coefs):
            if c == 0.0:
                continue
            if key not in norms:
                raise KeyError(f"bound for r={self.r} needs norm {key!r}")
            total += c * float(norms[key]) ** 2
        return total


def weighted_group_norm_bound(r: int, t: float, norms: Mapping[str, float], moment_verified: bool = False) -> float:
    """Right-hand side of the inequality chain for |E(t) phi|_{s,r}^2.

    For r = 3 the bound only applies when phi^(0) = 0; pass
    ``moment_verified=True`` once that has been checked.
    """
    if r == 3 and not moment_verified:
        raise ValueError("r=3 bound requires phi^(0) = 0; verify with moment_defect and pass moment_verified=True")
    return GroupBound(int(r)).evaluate(t, norms)


def moment_defect(field: Field, jmax: int = 0) -> list[complex]:
    """[d^j phi^ (0) for j = 0..jmax], via (-i)^j * int x^j phi dx (trapezoid)."""
    if not (0 <= jmax <= 2):
        raise ValueError(f"jmax must be in 0..2, got {jmax}")
    x = field.grid.x
    u = field.values
    dx = field.grid.dx
    return [complex((-1j) ** j * np.sum(x**j * u) * dx) for j in range(jmax + 1)]
