"""Numerics for the regularized Benjamin-Ono equation

    u_t + u_x + H u_xxt + u u_x = 0,

solved on a large periodic box.  In Fourier form u^_t = b(xi) (u^ + (u^2)^/2)
with b(xi) = -i xi / (1 + |xi|).
"""
__version__ = "0.1.0"

from .spectral import Field, GridSpec, make_grid
from .semigroup import group_apply
from .evolution import evolve, picard_solve, PicardConfig, Trajectory
from .experiments import ExperimentConfig, ExperimentReport, run_experiment

__all__ = [
    "Field",
    "GridSpec",
    "make_grid",
    "group_apply",
    "evolve",
    "picard_solve",
    "PicardConfig",
    "Trajectory",
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
]
