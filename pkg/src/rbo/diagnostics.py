"""Norms and functionals evaluated on fields and trajectories.

Weighted norms are truncated-domain quantities: they integrate over
[-L/2, L/2] only, and every report carries L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import mpmath
import numpy as np

from .evolution import Trajectory
from .spectral import Field, derivative, fractional_operator, regularized_derivative

__all__ = [
    "NormReport",
    "UCReport",
    "norm_hs",
    "norm_weighted",
    "norm_report",
    "conserved_q",
    "mean_mode",
    "l2_norm",
    "i_functional",
    "jump_second_derivative",
    "one_sided_second_derivatives",
    "bg_ratio",
    "kato_ponce_ratio",
    "operator_bound_ratio",
    "EnvelopeFit",
    "fit_double_exponential",
]


@dataclass(frozen=True)
class NormReport:
    h_s: float
    l2_r: float
    sigma_sr: float
    r: float
    s: float
    L: float


@dataclass(frozen=True)
class UCReport:
    t2: float
    phi_hat_0: float
    integral_term: float
    i_value: float
    measured_jump: Optional[complex] = None
    predicted_jump: Optional[complex] = None

    @property
    def jump_relative_error(self) -> float:
        if self.measured_jump is None or self.predicted_jump is None:
            return math.nan
        if self.predicted_jump == 0:
            return abs(self.measured_jump)
        return abs(self.measured_jump - self.predicted_jump) / abs(self.predicted_jump)


def norm_hs(field: Field, s: float) -> float:
    """|u|_s^2 = (1/2pi) int (1+xi^2)^s |u^|^2 dxi."""
    xi = field.grid.xi
    return math.sqrt(float(np.sum((1.0 + xi**2) ** s * np.abs(field.spectrum) ** 2)) / field.grid.length)


def l2_norm(field: Field) -> float:
    return norm_hs(field, 0.0)


def norm_weighted(field: Field, r: float) -> float:
    """(int_{-L/2}^{L/2} |x|^{2r} |u|^2 dx)^{1/2} by the trapezoid rule.

    Unless 2r is an even integer, |x|^{2r} is not smooth at the node x = 0
    and the plain trapezoid sum has an error of order dx^{2r+1}.  The leading
    terms of its expansion (Navot's extension of Euler-Maclaurin),

        sum_k 2 zeta(-2r-2k) h^{2r+2k+1} g^(2k)(0) / (2k)!,  g = u^2,  k = 0..2,

    are subtracted so that fractional weights keep spectral-like accuracy.
    """
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    x = field.grid.x
    u = field.values
    if r == 0:
        return math.sqrt(float(np.sum(u * u)) * field.grid.dx)
    h = field.grid.dx
    total = float(np.sum(np.abs(x) ** (2.0 * r) * u * u)) * h
    zetas = _zetas(2.0 * r)
    if any(zetas):
        mid = field.grid.n // 2
        g = Field.from_values(field.grid, u * u)
        for k, z in enumerate(zetas):
            if k:
                g = derivative(derivative(g))
            total -= 2.0 * z * h ** (2 * r + 2 * k + 1) * g.values[mid] / math.factorial(2 * k)
    return math.sqrt(max(total, 0.0))


@lru_cache(maxsize=64)
def _zetas(alpha: float) -> tuple[float, ...]:
    return tuple(float(mpmath.zeta(-alpha - 2 * k)) for k in range(3))


def norm_report(field: Field, s: float = 1.0, r: float = 2.0) -> NormReport:
    h = norm_hs(field, s)
    w = norm_weighted(field, r)
    return NormReport(h_s=h, l2_r=w, sigma_sr=math.hypot(h, w), r=r, s=s, L=field.grid.length)


def conserved_q(field: Field) -> float:
    """(1/2pi) int (1+|xi|) |u^|^2 dxi = <J~ u, u>, J~ = 1 + H d/dx."""
    xi = field.grid.xi
    return float(np.sum((1.0 + np.abs(xi)) * np.abs(field.spectrum) ** 2)) / field.grid.length


def mean_mode(field: Field) -> float:
    """u^(0) = int u dx."""
    return float(field.spectrum[0].real)


def i_functional(traj: Trajectory, t2: float, width: int = 4) -> UCReport:
    """2 t2 phi^(0) + int_0^{t2} |u(tau)|_0^2 dtau.

    When t2 is a recorded time the measured and predicted jumps of
    d^2_xi u^ at xi = 0 are filled in as well; the prediction is 2i times the
    functional.
    """
    times = traj.times
    if not (0.0 <= t2 <= times[-1] + 1e-12):
        raise ValueError(f"t2={t2} outside trajectory range [0, {times[-1]}]")
    phi0 = mean_mode(traj.states[0])
    diag = traj.diagnostics
    if "l2_integral" in diag:
        integral = float(np.interp(t2, times, diag["l2_integral"]))
    else:
        l2 = diag.get("l2_sq")
        if l2 is None:
            l2 = np.array([l2_norm(st) ** 2 for st in traj.states])
        mask = times <= t2
        ts = np.append(times[mask], t2) if times[mask][-1] < t2 else times[mask]
        vals = np.interp(ts, times, l2)
        integral = float(np.trapezoid(vals, ts))
    i_value = 2.0 * t2 * phi0 + integral
    measured = predicted = None
    try:
        state = traj.at(t2)
    except KeyError:
        state = None
    if state is not None:
        measured = jump_second_derivative(state, width)
        predicted = 2j * i_value
    return UCReport(
        t2=float(t2),
        phi_hat_0=phi0,
        integral_term=integral,
        i_value=i_value,
        measured_jump=measured,
        predicted_jump=predicted,
    )


def _second_derivative_at_zero(values: np.ndarray, h: float) -> complex:
    # Interpolating polynomial through k = 0..w, second derivative at 0.
    w = len(values) - 1
    V = np.vander(np.arange(w + 1, dtype=float), increasing=True)
    c = np.linalg.solve(V, values)
    return complex(2.0 * c[2] / h**2)


def one_sided_second_derivatives(field: Field, width: int = 4) -> tuple[complex, complex]:
    """(d^2 u^(0+), d^2 u^(0-)) from the first ``width`` modes on each side."""
    n = field.grid.n
    if width < 2:
        raise ValueError(f"width must be >= 2, got {width}")
    if width > n // 4:
        raise ValueError(f"width {width} exceeds n/4 = {n // 4}")
    s = field.spectrum
    h = field.grid.dxi
    pos = s[: width + 1]
    neg = s[(-np.arange(width + 1)) % n]
    return _second_derivative_at_zero(pos, h), _second_derivative_at_zero(neg, h)


def jump_second_derivative(field: Field, width: int = 4) -> complex:
    """d^2_xi u^(0+) - d^2_xi u^(0-) from one-sided polynomial stencils."""
    plus, minus = one_sided_second_derivatives(field, width)
    return plus - minus


def bg_ratio(field: Field, s: float) -> float:
    """|f|_inf / (1 + sqrt(log(1 + |f|_s)) |f|_{1/2})."""
    if not s > 0.5:
        raise ValueError(f"s must exceed 1/2, got {s}")
    sup = float(np.max(np.abs(field.values)))
    if sup == 0.0:
        return 0.0
    denom = 1.0 + math.sqrt(math.log1p(norm_hs(field, s))) * norm_hs(field, 0.5)
    return sup / denom


def kato_ponce_ratio(f: Field, g: Field, s: float) -> float:
    """|J^s(fg)|_0 / (|f|_inf |J^s g|_0 + |g|_inf |J^s f|_0)."""
    prod = Field.from_values(f.grid, f.values * g.values)
    num = norm_hs(prod, s)
    den = np.max(np.abs(f.values)) * norm_hs(g, s) + np.max(np.abs(g.values)) * norm_hs(f, s)
    return float(num / den)


def operator_bound_ratio(field: Field, s: float = 1.0) -> float:
    """|A phi|_{s,2}^2 / |phi|_{s,2}^2 with A = d/dx (1+H d/dx)^{-1}."""
    a = regularized_derivative(field)
    return norm_report(a, s, 2.0).sigma_sr ** 2 / norm_report(field, s, 2.0).sigma_sr ** 2


@dataclass(frozen=True)
class EnvelopeFit:
    """|u(t)|_s <= exp(C2 exp(C3 t)) - 1 fitted to a sampled series.

    C3 is the least-squares slope of log log(1 + |u|_s); C2 is then the
    smallest value making the envelope dominate every sample.
    """

    c2: float
    c3: float

    def __call__(self, t):
        return np.expm1(self.c2 * np.exp(self.c3 * np.asarray(t)))


def fit_double_exponential(times: Sequence[float], norms: Sequence[float]) -> EnvelopeFit:
    t = np.asarray(times, dtype=float)
    y = np.log(np.log1p(np.asarray(norms, dtype=float)))
    c3 = float(np.polyfit(t, y, 1)[0])
    c2 = float(np.exp(np.max(y - c3 * t)))
    return EnvelopeFit(c2=c2, c3=c3)


def fractional_ratio(field: Field, theta: float = 0.5) -> float:
    """|D^theta f|_0 / (|f|_0 + |D f|_0)."""
    num = l2_norm(fractional_operator(field, "homogeneous", theta))
    den = l2_norm(field) + l2_norm(fractional_operator(field, "homogeneous", 1.0))
    return num / den
