"""Nonlinear rBO evolution.

In Fourier variables the equation u_t + u_x + H u_xt + u u_x = 0 reads

    d/dt u^ = b(xi) (u^ + v^/2),     v = u^2,   b(xi) = -i xi/(1+|xi|),

i.e. u_t = A u + f(u) with A = -d/dx (1+H d/dx)^{-1} and
f(u) = -(1/2) d/dx (1+H d/dx)^{-1} u^2.  Two solvers are provided: classical
RK4 on this ODE system and Picard iteration of the Duhamel map.  Both use
the same dealiased quadratic term.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Optional

import numpy as np

from .spectral import Field, GridSpec, forward_array, inverse_array
from .semigroup import symbol_b

__all__ = [
    "BlowUpError",
    "ContractionFailure",
    "PicardConfig",
    "Trajectory",
    "dealias",
    "rhs",
    "rk4_step",
    "evolve",
    "picard_solve",
    "duhamel_map",
    "heuristic_contraction_time",
    "norm_s2",
]

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    """A non-finite value appeared during time stepping."""

    def __init__(self, message: str, time: float, last_state: Optional[Field]):
        super().__init__(message)
        self.time = time
        self.last_state = last_state


class ContractionFailure(RuntimeError):
    """Picard iteration did not reach the tolerance within max_iter."""

    def __init__(self, message: str, rates: list[float], differences: list[float]):
        super().__init__(message)
        self.rates = rates
        self.differences = differences


@lru_cache(maxsize=32)
def _operators(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    b = symbol_b(grid.xi)
    b[grid.nyquist] = 0.0
    keep = (np.abs(grid.k) <= grid.n / 3).astype(float)
    b.flags.writeable = False
    keep.flags.writeable = False
    return b, keep


def _dealias_array(uhat: np.ndarray, grid: GridSpec) -> np.ndarray:
    return uhat * _operators(grid)[1]


def _square_hat(uhat: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Spectrum of u^2 restricted to |k| <= n/3 (works on stacked arrays)."""
    keep = _operators(grid)[1]
    u = inverse_array(uhat * keep, grid)
    return forward_array(u * u, grid) * keep


def _nonlinear_hat(uhat: np.ndarray, grid: GridSpec) -> np.ndarray:
    b, _ = _operators(grid)
    return 0.5 * b * _square_hat(uhat, grid)


def _rhs_hat(uhat: np.ndarray, grid: GridSpec, nonlinear: bool = True) -> np.ndarray:
    b, _ = _operators(grid)
    if not nonlinear:
        return b * uhat
    return b * (uhat + 0.5 * _square_hat(uhat, grid))


def dealias(field: Field) -> Field:
    """Zero every mode with |k| > n/3."""
    return Field.from_spectrum(field.grid, _dealias_array(field.spectrum, field.grid))


def rhs(field: Field, nonlinear: bool = True) -> Field:
    """A u + f(u) as a field."""
    return Field.from_spectrum(field.grid, _rhs_hat(field.spectrum, field.grid, nonlinear))


def _rk4(uhat: np.ndarray, dt: float, grid: GridSpec, nonlinear: bool) -> np.ndarray:
    k1 = _rhs_hat(uhat, grid, nonlinear)
    k2 = _rhs_hat(uhat + 0.5 * dt * k1, grid, nonlinear)
    k3 = _rhs_hat(uhat + 0.5 * dt * k2, grid, nonlinear)
    k4 = _rhs_hat(uhat + dt * k3, grid, nonlinear)
    return uhat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(state: Field, dt: float, nonlinear: bool = True) -> Field:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    new = _rk4(state.spectrum, dt, state.grid, nonlinear)
    if not np.all(np.isfinite(new)):
        raise BlowUpError("non-finite values after RK4 step", dt, state)
    return Field.from_spectrum(state.grid, new)


@dataclass
class Trajectory:
    """Recorded states of one run plus per-record scalar diagnostics."""

    times: np.ndarray
    states: list[Field]
    diagnostics: dict[str, np.ndarray] = dc_field(default_factory=dict)
    s: float = 1.0
    r: float = 2.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if len(self.times) and self.times[0] != 0.0:
            raise ValueError("trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        grids = {st.grid for st in self.states}
        if len(grids) > 1:
            raise ValueError("trajectory states live on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.states[0].grid

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise KeyError(f"t={t} is not a recorded time")
        return i

    def at(self, t: float) -> Field:
        return self.states[self.index_of(t)]

    def __len__(self) -> int:
        return len(self.times)


def _record_diagnostics(traj_diag: dict[str, list], state: Field, s: float, r: float) -> None:
    from . import diagnostics as dg

    rep = dg.norm_report(state, s=s, r=r)
    traj_diag["norm_h_s"].append(rep.h_s)
    traj_diag["norm_l2_r"].append(rep.l2_r)
    traj_diag["q"].append(dg.conserved_q(state))
    traj_diag["mean_mode"].append(dg.mean_mode(state))


def evolve(
    phi: Field,
    T: float,
    dt: float,
    stride: int = 1,
    *,
    s: float = 1.0,
    r: float = 2.0,
    nonlinear: bool = True,
) -> Trajectory:
    """RK4 run from ``phi`` to time ``T``, recording every ``stride`` steps.

    Diagnostics per record: norm_h_s, norm_l2_r, q, mean_mode, l2_sq
    (|u|_0^2) and l2_integral (int_0^t |u|_0^2 dtau, trapezoid over every
    RK4 step, not just the recorded ones).  The final time is always recorded.
    """
    if T < 0:
        raise ValueError(f"T must be non-negative, got {T}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    grid = phi.grid
    L = grid.length

    uhat = np.array(phi.spectrum)
    times = [0.0]
    states = [Field.from_spectrum(grid, uhat)]
    diag: dict[str, list] = {k: [] for k in ("norm_h_s", "norm_l2_r", "q", "mean_mode", "l2_sq", "l2_integral")}
    l2_prev = float(np.sum(np.abs(uhat) ** 2) / L)
    integral = 0.0
    _record_diagnostics(diag, states[0], s, r)
    diag["l2_sq"].append(l2_prev)
    diag["l2_integral"].append(0.0)

    for step in range(1, nsteps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            new = _rk4(uhat, dt, grid, nonlinear)
        if not np.all(np.isfinite(new)):
            raise BlowUpError(
                f"non-finite values at t={step * dt:.6g}",
                step * dt,
                Field.from_spectrum(grid, uhat),
            )
        uhat = new
        l2_now = float(np.sum(np.abs(uhat) ** 2) / L)
        integral += 0.5 * dt * (l2_prev + l2_now)
        l2_prev = l2_now
        if step % stride == 0 or step == nsteps:
            state = Field.from_spectrum(grid, uhat)
            times.append(step * dt)
            states.append(state)
            _record_diagnostics(diag, state, s, r)
            diag["l2_sq"].append(l2_now)
            diag["l2_integral"].append(integral)

    return Trajectory(
        times=np.array(times),
        states=states,
        diagnostics={k: np.array(v) for k, v in diag.items()},
        s=s,
        r=r,
    )


@dataclass(frozen=True)
class PicardConfig:
    """Settings for the Picard iteration on [0, T].

    ``M`` is the radius of the contraction ball around E(t)phi;
    it is only reported (sup_t |u(t) - E(t)phi|_{s,2} is compared to it).
    """

    T: float
    nt: int = 129
    tol: float = 1e-10
    max_iter: int = 50
    M: float = 1.0
    s: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.nt < 2:
            raise ValueError(f"nt must be >= 2, got {self.nt}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


def norm_s2(uhat: np.ndarray, grid: GridSpec, s: float = 1.0) -> np.ndarray:
    """|u|_{s,2} for a stack of spectra (last axis is the grid)."""
    hs = np.sum((1.0 + grid.xi**2) ** s * np.abs(uhat) ** 2, axis=-1) / grid.length
    u = inverse_array(uhat, grid)
    w = np.sum(grid.x**4 * u * u, axis=-1) * grid.dx
    return np.sqrt(hs + w)


def duhamel_map(phi_hat: np.ndarray, U: np.ndarray, times: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Phi(u)(t_i) = E(t_i) [phi^ + int_0^{t_i} E(-tau) f(u(tau)) dtau] (trapezoid)."""
    b, _ = _operators(grid)
    N = _nonlinear_hat(U, grid)
    back = np.exp(-np.outer(times, b)) * N
    dtau = np.diff(times)[:, None]
    cum = np.zeros_like(back)
    cum[1:] = np.cumsum(0.5 * dtau * (back[1:] + back[:-1]), axis=0)
    return np.exp(np.outer(times, b)) * (phi_hat[None, :] + cum)


def picard_solve(phi: Field, cfg: PicardConfig) -> tuple[Trajectory, list[float]]:
    """Iterate the Duhamel map from u^0(t) = E(t) phi until successive
    iterates differ by less than ``cfg.tol`` in sup_t |.|_{s,2}.

    Returns the fixed point as a trajectory on the cfg.nt nodes and the list
    of successive-difference ratios d_{m+1}/d_m.  Raises ContractionFailure
    (carrying the rates) if max_iter is reached or the iterates blow up.
    """
    grid = phi.grid
    b, _ = _operators(grid)
    times = np.linspace(0.0, cfg.T, cfg.nt)
    phi_hat = np.array(phi.spectrum)
    linear = np.exp(np.outer(times, b)) * phi_hat[None, :]
    U = linear
    diffs: list[float] = []
    rates: list[float] = []
    converged = False
    for it in range(cfg.max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            new = duhamel_map(phi_hat, U, times, grid)
            d = float(np.max(norm_s2(new - U, grid, cfg.s)))
        if not math.isfinite(d) or (diffs and d > 1e8 * max(diffs[0], 1e-300)):
            raise ContractionFailure(
                f"Picard iterates diverged at iteration {it + 1} (T={cfg.T})", rates, diffs + [d]
            )
        if diffs and diffs[-1] > 0:
            rates.append(d / diffs[-1])
        diffs.append(d)
        U = new
        log.debug("picard iter %d: diff %.3e", it + 1, d)
        if d < cfg.tol:
            converged = True
            break
    if not converged:
        raise ContractionFailure(
            f"no convergence in {cfg.max_iter} iterations (T={cfg.T}, last diff {diffs[-1]:.3e})",
            rates,
            diffs,
        )
    states = [Field.from_spectrum(grid, row) for row in U]
    radius = float(np.max(norm_s2(U - linear, grid, cfg.s)))
    traj = Trajectory(
        times=times,
        states=states,
        diagnostics={
            "norm_s2": norm_s2(U, grid, cfg.s),
            "distance_to_linear": norm_s2(U - linear, grid, cfg.s),
        },
        s=cfg.s,
        r=2.0,
    )
    traj.diagnostics["ball_radius_used"] = np.full(len(times), radius)
    traj.diagnostics["within_ball"] = np.full(len(times), float(radius <= cfg.M))
    traj.diagnostics["iterations"] = np.full(len(times), float(len(diffs)))
    return traj, rates


def heuristic_contraction_time(phi: Field, s: float = 1.0) -> float:
    """Starting guess T0 = 1 / (8 (|phi|_{s,2} + 1))."""
    n = float(norm_s2(np.asarray(phi.spectrum), phi.grid, s))
    return 1.0 / (8.0 * (n + 1.0))
