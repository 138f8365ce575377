"""Periodic grid functions on the unit square and their discrete Fourier calculus.

Everything here works on the fundamental cell of an n-by-n uniform grid of
[0,1)^2 with spacing h = 1/n.  The transform pair uses the analysis
normalization

    v_hat(r) = h^2 * sum_m v(x_m) exp(-2*pi*i r.x_m),      r in Z^2 (FFT order)
    v(x_m)   =       sum_r v_hat(r) exp(+2*pi*i r.x_m),

so that the zero mode of a function is its mean value.  The discrete
fractional Laplacian is the Fourier multiplier (4*pi^2 |r|^2)^alpha with the
zero mode mapped to zero.

Everything in this module is a pure function of its inputs; grid functions
and spectra are immutable after construction and freely shareable across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridMismatch(ValueError):
    """Two grid quantities with different resolutions were combined."""


class SymmetryViolation(ValueError):
    """A synthesis produced an imaginary part too large to discard."""


# Fourier multipliers of the fractional Laplacian, keyed by (n, alpha).
_multiplier_cache: dict[tuple[int, float], np.ndarray] = {}


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform n-by-n periodic grid on the unit square.

    Grid nodes are x_m = (m1/n, m2/n) for 0 <= m1, m2 < n.  Wavenumbers per
    axis are the integers {-floor(n/2), ..., ceil(n/2)-1} in FFT order; for
    even n the unpaired -n/2 mode carries a real coefficient for real input.
    """

    n: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"grid needs n >= 2 points per axis, got {self.n}")

    @property
    def h(self) -> float:
        """Grid spacing 1/n.  Sums weighted by h^2 divide by n^2 instead so
        that h*n == 1 holds exactly."""
        return 1.0 / self.n

    @property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis integer wavenumbers in FFT order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (X, Y) of node coordinates, 'ij' indexing."""
        x = np.arange(self.n) / self.n
        return np.meshgrid(x, x, indexing="ij")

    def wavenumber_squares(self) -> np.ndarray:
        """|r|^2 = r1^2 + r2^2 on the FFT-ordered wavenumber mesh."""
        k = self.wavenumbers.astype(np.float64)
        kx, ky = np.meshgrid(k, k, indexing="ij")
        return kx**2 + ky**2

    def laplacian_multiplier(self, alpha: float) -> np.ndarray:
        """Multiplier (4*pi^2 |r|^2)^alpha with 0^alpha := 0 at the zero mode."""
        if alpha <= 0:
            raise ValueError(f"fractional order must be positive, got {alpha}")
        key = (self.n, float(alpha))
        mult = _multiplier_cache.get(key)
        if mult is None:
            k2 = self.wavenumber_squares()
            mult = np.zeros_like(k2)
            nonzero = k2 > 0
            mult[nonzero] = (4.0 * np.pi**2 * k2[nonzero]) ** alpha
            mult.setflags(write=False)
            _multiplier_cache[key] = mult
        return mult


def _check_same_grid(a, b) -> None:
    if a.grid.n != b.grid.n:
        raise GridMismatch(f"grids differ: n={a.grid.n} vs n={b.grid.n}")


@dataclass(frozen=True)
class GridFunction:
    """Real values on the fundamental cell of a periodic grid.

    Non-finite values are constructible on purpose: divergent solver iterates
    are flagged by inspection (`is_finite`), not by exceptions.
    """

    grid: SpectralGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"values shape {values.shape} does not match grid {self.grid.n}x{self.grid.n}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: SpectralGrid) -> "GridFunction":
        return cls(grid, np.zeros((grid.n, grid.n)))

    @classmethod
    def constant(cls, grid: SpectralGrid, c: float) -> "GridFunction":
        return cls(grid, np.full((grid.n, grid.n), float(c)))

    @classmethod
    def sample(cls, grid: SpectralGrid, fn) -> "GridFunction":
        """Sample a callable fn(X, Y) at the grid nodes."""
        X, Y = grid.nodes()
        return cls(grid, np.asarray(fn(X, Y), dtype=np.float64))

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self.values).all())

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _check_same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)


@dataclass(frozen=True)
class Spectrum:
    """Complex Fourier coefficients in FFT wavenumber order."""

    grid: SpectralGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"coeffs shape {coeffs.shape} does not match grid {self.grid.n}x{self.grid.n}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    def conjugate_symmetry_error(self) -> float:
        """max |c(-r) - conj(c(r))|, zero (to round-off) for real signals."""
        flipped = np.roll(self.coeffs[::-1, ::-1], shift=1, axis=(0, 1))
        return float(np.max(np.abs(flipped - np.conj(self.coeffs))))


def dft(v: GridFunction) -> Spectrum:
    """Forward transform with the h^2 analysis normalization."""
    return Spectrum(v.grid, np.fft.fft2(v.values) / v.grid.n**2)


def idft(s: Spectrum, symmetry_tol: float = 1e-10) -> GridFunction:
    """Synthesis sum; discards the imaginary part after checking it is noise.

    Raises SymmetryViolation when the discarded imaginary part exceeds
    symmetry_tol relative to the real part, which signals an asymmetric
    multiplier or a corrupted spectrum rather than round-off.
    """
    w = np.fft.ifft2(s.coeffs) * s.grid.n**2
    imag_max = float(np.max(np.abs(w.imag)))
    scale = max(float(np.max(np.abs(w.real))), 1e-300)
    if imag_max > symmetry_tol * scale:
        raise SymmetryViolation(
            f"discarded imaginary part {imag_max:.3e} exceeds {symmetry_tol:.1e} "
            f"relative to real magnitude {scale:.3e}"
        )
    return GridFunction(s.grid, np.ascontiguousarray(w.real))


def apply_multiplier(values: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    """Real part of ifft2(multiplier * fft2(values)); hot path, no checks."""
    return np.fft.ifft2(multiplier * np.fft.fft2(values)).real


def fractional_laplacian(v: GridFunction, alpha: float) -> GridFunction:
    """Apply (-Laplacian)^alpha through its Fourier multiplier."""
    mult = v.grid.laplacian_multiplier(alpha)
    return GridFunction(v.grid, apply_multiplier(v.values, mult))


def inner_l2n(v: GridFunction, w: GridFunction) -> float:
    """(v, w)_N = h^2 sum v(x_m) w(x_m); row-major summation order."""
    _check_same_grid(v, w)
    return float(np.sum(v.values * w.values)) / v.grid.n**2


def norm_l2n(v: GridFunction) -> float:
    return float(np.sqrt(np.sum(v.values * v.values))) / v.grid.n


def norm_np(v: GridFunction, p: float) -> float:
    """(h^2 sum |v|^p)^(1/p) for p >= 1."""
    if p < 1:
        raise ValueError(f"p-norm needs p >= 1, got {p}")
    return float(np.sum(np.abs(v.values) ** p) / v.grid.n**2) ** (1.0 / p)


def norm_inf(v: GridFunction) -> float:
    return float(np.max(np.abs(v.values)))


def norm_halpha(v: GridFunction, alpha: float) -> float:
    """Sobolev-type norm sqrt(||v||_N^2 + ||(-Lap)^(alpha/2) v||_N^2).

    Evaluated in spectral space: sum_r (1 + (4*pi^2 |r|^2)^alpha) |v_hat(r)|^2.
    """
    mult = v.grid.laplacian_multiplier(alpha)
    coeffs = np.fft.fft2(v.values) / v.grid.n**2
    return float(np.sqrt(np.sum((1.0 + mult) * np.abs(coeffs) ** 2)))


def save_grid_csv(v: GridFunction, path) -> None:
    """One value per line, row-major, header line '# n=<n>'."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# n={v.grid.n}\n")
        for value in v.values.ravel(order="C"):
            fh.write(repr(float(value)) + "\n")


def load_grid_csv(path) -> GridFunction:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if not header.startswith("# n="):
            raise ValueError(f"{path}: missing '# n=<n>' header, got {header!r}")
        n = int(header[4:])
        values = np.array([float(line) for line in fh if line.strip()])
    if values.size != n * n:
        raise ValueError(f"{path}: expected {n * n} values, got {values.size}")
    return GridFunction(SpectralGrid(n), values.reshape(n, n))
