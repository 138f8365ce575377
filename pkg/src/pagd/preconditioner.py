"""Preconditioners: symmetric positive operators and their induced norms.

A preconditioner supplies two maps on grid functions: `apply` (the operator
itself) and `solve` (its inverse, the Riesz map turning residuals into search
directions).  It induces

    (v, w)_L    = (apply(v), w)_N            inner product on grid functions,
    ||r||_Linv  = sqrt((r, solve(r))_N)      dual norm on residuals,

with the identity ||apply(v)||_Linv = ||v||_L linking the two.

Preconditioners are immutable after construction and fixed for the lifetime
of a run; apply/solve are pure and safe to call concurrently.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, GridMismatch, SpectralGrid, apply_multiplier, inner_l2n


class InvalidShift(ValueError):
    """The zero-order shift of a spectral preconditioner must be positive."""


class NegativeQuadraticForm(ArithmeticError):
    """(r, solve(r))_N came out significantly negative: the operator is not
    symmetric positive definite."""


class Preconditioner(ABC):
    """Contract: symmetric, coercive, with an exact inverse."""

    @abstractmethod
    def apply(self, v: GridFunction) -> GridFunction:
        """Forward action."""

    @abstractmethod
    def solve(self, r: GridFunction) -> GridFunction:
        """Inverse action (Riesz map)."""


class IdentityPreconditioner(Preconditioner):
    """No preconditioning: apply and solve are both the identity."""

    def apply(self, v: GridFunction) -> GridFunction:
        return v

    def solve(self, r: GridFunction) -> GridFunction:
        return r


class SpectralPreconditioner(Preconditioner):
    """(-Laplacian)^alpha + nu * I, diagonal in Fourier space.

    The multiplier (4*pi^2 |r|^2)^alpha + nu is >= nu > 0 for every
    wavenumber, so the inverse is a plain spectral division.
    """

    def __init__(self, grid: SpectralGrid, alpha: float, nu: float):
        if nu <= 0:
            raise InvalidShift(f"shift nu must be positive, got {nu}")
        if alpha <= 0:
            raise ValueError(f"fractional order must be positive, got {alpha}")
        self.grid = grid
        self.alpha = float(alpha)
        self.nu = float(nu)
        self.multiplier = grid.laplacian_multiplier(alpha) + self.nu
        self.multiplier.setflags(write=False)

    def _check(self, v: GridFunction) -> None:
        if v.grid.n != self.grid.n:
            raise GridMismatch(f"grids differ: n={v.grid.n} vs n={self.grid.n}")

    def apply(self, v: GridFunction) -> GridFunction:
        self._check(v)
        return GridFunction(v.grid, apply_multiplier(v.values, self.multiplier))

    def solve(self, r: GridFunction) -> GridFunction:
        self._check(r)
        return GridFunction(r.grid, apply_multiplier(r.values, 1.0 / self.multiplier))


def inner_L(P: Preconditioner, v: GridFunction, w: GridFunction) -> float:
    """(v, w)_L = (apply(v), w)_N."""
    return inner_l2n(P.apply(v), w)


def norm_L(P: Preconditioner, v: GridFunction) -> float:
    return float(np.sqrt(max(inner_L(P, v, v), 0.0)))


def norm_Linv(P: Preconditioner, r: GridFunction, tol: float = 1e-12) -> float:
    """Dual norm sqrt((r, solve(r))_N).

    A value below -tol (relative to the residual size) means solve is not the
    inverse of a symmetric positive operator and is reported as an error
    rather than silently clamped.
    """
    form = inner_l2n(r, P.solve(r))
    if form < 0:
        scale = max(inner_l2n(r, r), 1e-300)
        if form < -tol * scale:
            raise NegativeQuadraticForm(
                f"(r, solve(r))_N = {form:.3e} < 0 beyond round-off"
            )
        form = 0.0
    return float(np.sqrt(form))
