"""Periodic grid, Fourier transforms and static Fourier multipliers.

Transform convention (used everywhere in the package)
-----------------------------------------------------
The continuous pair is

    f^(xi) = int f(x) exp(-i x xi) dx,       f(x) = (1/2pi) int f^(xi) exp(i x xi) dxi

discretized on the torus [-L/2, L/2) with nodes x_j = -L/2 + j*dx and
frequencies xi_k = 2*pi*k/L.  The discrete forward transform is

    f^_k = dx * sum_j f_j exp(-i xi_k x_j) = dx * (-1)^k * FFT(f)_k

so f^_k approximates the continuous transform at xi_k (with spectral
accuracy for smooth data that is negligible at the seam).  Plancherel reads

    dx * sum_j |f_j|^2 = (1/2pi) * dxi * sum_k |f^_k|^2 = (1/L) * sum_k |f^_k|^2.

Spectra are stored as full complex arrays in numpy FFT order
(k = 0, 1, ..., n/2-1, -n/2, ..., -1).  The unpaired Nyquist mode k = -n/2
sits at index n/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

__all__ = [
    "GridSpec",
    "Field",
    "MultiplierSymbol",
    "HermitianSymmetryError",
    "make_grid",
    "transform",
    "apply_multiplier",
    "hilbert_transform",
    "fractional_operator",
    "derivative",
    "regularized_derivative",
    "forward_array",
    "inverse_array",
    "spectral_inner",
    "HILBERT",
    "DERIVATIVE",
    "REGULARIZER",
]


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid of ``n`` points on ``[-length/2, length/2)``."""

    n: int
    length: float

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise ValueError(f"n must be an integer, got {self.n!r}")
        if self.n < 8 or not _is_power_of_two(int(self.n)):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive and finite, got {self.length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def dxi(self) -> float:
        return 2.0 * math.pi / self.length

    @property
    def nyquist(self) -> int:
        """Array index of the unpaired mode k = -n/2."""
        return self.n // 2

    @cached_property
    def x(self) -> np.ndarray:
        x = -0.5 * self.length + self.dx * np.arange(self.n)
        x.flags.writeable = False
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)
        k.flags.writeable = False
        return k

    @cached_property
    def xi(self) -> np.ndarray:
        """Angular frequencies 2*pi*k/L in FFT order."""
        xi = self.dxi * self.k
        xi.flags.writeable = False
        return xi

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i xi_k x_0) with x_0 = -L/2 is (-1)^k.
        p = np.where(self.k % 2 == 0, 1.0, -1.0)
        p.flags.writeable = False
        return p

    def doubled(self) -> "GridSpec":
        """Grid on a domain twice as long with the same spacing."""
        return GridSpec(2 * self.n, 2.0 * self.length)

    def refined(self) -> "GridSpec":
        """Same domain, twice as many points."""
        return GridSpec(2 * self.n, self.length)


def make_grid(n: int, length: float) -> GridSpec:
    return GridSpec(n, length)


def forward_array(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Physical samples -> spectral coefficients (last axis)."""
    return grid.dx * grid._phase * np.fft.fft(values, axis=-1)


def inverse_array(spectrum: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Spectral coefficients -> real physical samples (last axis)."""
    return np.fft.ifft(spectrum * grid._phase, axis=-1).real / grid.dx


def spectral_inner(a: np.ndarray, b: np.ndarray, grid: GridSpec, weight=None) -> complex:
    """(1/2pi) sum conj(a) b w dxi, the Plancherel inner product."""
    prod = np.conj(a) * b
    if weight is not None:
        prod = prod * weight
    return prod.sum() / grid.length


class Field:
    """A real function sampled on a grid.

    Build with :meth:`from_values` or :meth:`from_spectrum`; the other
    representation is computed on first access and cached.  Both arrays are
    read-only, so fields can be shared between threads.
    """

    __slots__ = ("grid", "_values", "_spectrum")

    def __init__(self, grid: GridSpec, values=None, spectrum=None):
        if values is None and spectrum is None:
            raise ValueError("Field needs values or spectrum")
        self.grid = grid
        self._values = None
        self._spectrum = None
        if values is not None:
            v = np.array(values, dtype=float)
            if v.shape != (grid.n,):
                raise ValueError(f"values must have shape ({grid.n},), got {v.shape}")
            v.flags.writeable = False
            self._values = v
        if spectrum is not None:
            s = np.array(spectrum, dtype=complex)
            if s.shape != (grid.n,):
                raise ValueError(f"spectrum must have shape ({grid.n},), got {s.shape}")
            s.flags.writeable = False
            self._spectrum = s

    @classmethod
    def from_values(cls, grid: GridSpec, values) -> "Field":
        return cls(grid, values=values)

    @classmethod
    def from_spectrum(cls, grid: GridSpec, spectrum) -> "Field":
        return cls(grid, spectrum=spectrum)

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "Field":
        return cls(grid, values=fn(np.asarray(grid.x)))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, values=np.zeros(grid.n))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            v = inverse_array(self._spectrum, self.grid)
            v.flags.writeable = False
            self._values = v
        return self._values

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            s = forward_array(self._values, self.grid)
            s.flags.writeable = False
            self._spectrum = s
        return self._spectrum

    @property
    def has_values(self) -> bool:
        return self._values is not None

    @property
    def has_spectrum(self) -> bool:
        return self._spectrum is not None

    def hermitian_defect(self) -> float:
        """max |u^_{-k} - conj(u^_k)| (plus |Im| of the Nyquist mode)."""
        s = self.spectrum
        mirrored = s[(-np.arange(self.grid.n)) % self.grid.n]
        return float(np.max(np.abs(mirrored - np.conj(s))))

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, values=self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, values=self.values - other.values)

    def __mul__(self, c: float) -> "Field":
        if self.has_spectrum and not self.has_values:
            return Field(self.grid, spectrum=self.spectrum * c)
        return Field(self.grid, values=self.values * c)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Field(n={self.grid.n}, L={self.grid.length:.6g})"


def _same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError(f"fields live on different grids: {a.grid} vs {b.grid}")


def transform(field: Field, direction: str = "forward") -> Field:
    """Return a field whose requested representation is populated.

    ``forward`` fills the spectrum from the samples, ``inverse`` fills the
    samples from the spectrum.  The input is not modified.
    """
    if direction == "forward":
        return Field(field.grid, values=field.values, spectrum=forward_array(field.values, field.grid))
    if direction == "inverse":
        return Field(field.grid, values=inverse_array(field.spectrum, field.grid), spectrum=field.spectrum)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


class HermitianSymmetryError(ValueError):
    """A multiplier would turn a real field into a complex one."""


@dataclass(frozen=True)
class MultiplierSymbol:
    """A Fourier multiplier m(xi).

    ``nyquist`` overrides the value used on the unpaired mode k = -n/2.
    Odd symbols (sgn, i*xi, ...) set it to 0: that mode has no partner, so an
    odd multiplier is not defined on it.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "symbol"
    nyquist: Optional[complex] = None

    def evaluate(self, grid: GridSpec) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.asarray(self.fn(np.asarray(grid.xi)), dtype=complex)
        m = np.broadcast_to(m, (grid.n,)).copy()
        if self.nyquist is not None:
            m[grid.nyquist] = self.nyquist
        return m

    def __call__(self, xi):
        return self.fn(np.asarray(xi, dtype=float))


def _hermitian_ok(m: np.ndarray, grid: GridSpec, tol: float = 1e-14) -> bool:
    mirrored = m[(-np.arange(grid.n)) % grid.n]
    scale = max(1.0, float(np.max(np.abs(m))))
    return bool(np.max(np.abs(mirrored - np.conj(m))) <= tol * scale)


def apply_multiplier(field: Field, symbol: MultiplierSymbol) -> Field:
    """Multiply the spectrum of ``field`` by ``symbol`` evaluated on the grid.

    Raises HermitianSymmetryError if the symbol does not satisfy
    m(-xi) = conj(m(xi)) on the grid (the output would not be real).
    """
    m = symbol.evaluate(field.grid)
    if not np.all(np.isfinite(m)):
        raise ValueError(f"symbol {symbol.name!r} is not finite on the grid")
    if not _hermitian_ok(m, field.grid):
        raise HermitianSymmetryError(
            f"symbol {symbol.name!r} breaks Hermitian symmetry; output would not be real"
        )
    return Field(field.grid, spectrum=m * field.spectrum)


HILBERT = MultiplierSymbol(lambda xi: -1j * np.sign(xi), "-i sgn(xi)", nyquist=0.0)
DERIVATIVE = MultiplierSymbol(lambda xi: 1j * xi, "i xi", nyquist=0.0)
REGULARIZER = MultiplierSymbol(lambda xi: 1.0 / (1.0 + np.abs(xi)), "1/(1+|xi|)")
# A = d/dx (1 + H d/dx)^{-1}
REGULARIZED_DERIVATIVE = MultiplierSymbol(
    lambda xi: 1j * xi / (1.0 + np.abs(xi)), "i xi/(1+|xi|)", nyquist=0.0
)


def hilbert_transform(field: Field) -> Field:
    """H f with symbol -i sgn(xi); sgn(0) = 0 so constants are annihilated."""
    return apply_multiplier(field, HILBERT)


def derivative(field: Field) -> Field:
    return apply_multiplier(field, DERIVATIVE)


def regularized_derivative(field: Field) -> Field:
    """d/dx (1 + H d/dx)^{-1}, symbol i xi / (1 + |xi|)."""
    return apply_multiplier(field, REGULARIZED_DERIVATIVE)


def fractional_symbol(kind: str, order: float) -> MultiplierSymbol:
    if not math.isfinite(order):
        raise ValueError(f"order must be finite, got {order}")
    if kind == "homogeneous":
        return MultiplierSymbol(lambda xi: np.abs(xi) ** order, f"|xi|^{order:g}")
    if kind == "bessel":
        return MultiplierSymbol(lambda xi: (1.0 + xi**2) ** (0.5 * order), f"(1+xi^2)^{order / 2:g}")
    if kind == "tilde":
        return MultiplierSymbol(lambda xi: (1.0 + np.abs(xi)) ** order, f"(1+|xi|)^{order:g}")
    raise ValueError(f"kind must be homogeneous, bessel or tilde, got {kind!r}")


def fractional_operator(field: Field, kind: str, order: float) -> Field:
    """D^s (|xi|^s), J^s ((1+xi^2)^{s/2}) or J~^s ((1+|xi|)^s).

    For a negative homogeneous order the mean mode must vanish.
    """
    symbol = fractional_symbol(kind, order)
    if kind == "homogeneous" and order < 0:
        mean = field.spectrum[0]
        if abs(mean) > 1e-13 * max(1.0, float(np.max(np.abs(field.spectrum)))):
            raise ValueError("D^s with s < 0 needs a mean-zero field (division by zero at xi=0)")
        m = symbol.evaluate(field.grid)
        m[0] = 0.0
        return Field(field.grid, spectrum=m * field.spectrum)
    return apply_multiplier(field, symbol)
