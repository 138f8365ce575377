"""Objective functionals: the nonlocal elliptic energy and a quadratic oracle.

The model energy on grid functions is

    G(v) = 1/2 ||(-Lap)^(alpha/2) v||_N^2 + 1/p ||v||_{N,p}^p
           + t/2 ||v||_N^2 - (f, v)_N,

whose gradient representer in the L2_N pairing is

    G'(v) = (-Lap)^alpha v + |v|^(p-2) v + t v - f.

The quadratic oracle 1/2 (A v, v)_N - (b, v)_N with A a positive Fourier
multiplier has a closed-form minimizer and exact convexity constants, which
makes it the reference problem for verifying solver kernels.

Objectives are immutable; value/gradient are pure and reentrant.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    GridFunction,
    GridMismatch,
    SpectralGrid,
    apply_multiplier,
    inner_l2n,
)
from .preconditioner import Preconditioner, norm_L


class NonPositiveMultiplier(ValueError):
    """The quadratic oracle needs a strictly positive spectral multiplier."""


class DegeneratePair(ValueError):
    """A sample pair for trap estimation coincides."""


class Objective(ABC):
    """Value plus gradient representer, consistent to second order."""

    @abstractmethod
    def value(self, v: GridFunction) -> float: ...

    @abstractmethod
    def gradient(self, v: GridFunction) -> GridFunction: ...


@dataclass(frozen=True)
class PdeProblem:
    """Parameters (alpha, p, t, f) of the discrete nonlocal problem."""

    alpha: float
    p: float
    t: float
    f: GridFunction

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.p < 2:
            raise ValueError(f"nonlinearity power must satisfy p >= 2, got {self.p}")
        if self.t <= 0:
            raise ValueError(f"zeroth-order coefficient must be positive, got {self.t}")
        if not self.f.is_finite:
            raise ValueError("right-hand side must be finite")

    @property
    def grid(self) -> SpectralGrid:
        return self.f.grid


def signed_power(values: np.ndarray, p: float) -> np.ndarray:
    """|v|^(p-2) v, the identity map for p = 2 and 0 at 0 for p > 2."""
    if p == 2:
        return values
    return np.abs(values) ** (p - 2.0) * values


def _operator_image(problem: PdeProblem, values: np.ndarray) -> np.ndarray:
    # Shared by gradient and rhs manufacture so a manufactured solution has
    # an exactly zero gradient, not just one below truncation error.
    mult = problem.grid.laplacian_multiplier(problem.alpha)
    return (
        apply_multiplier(values, mult)
        + signed_power(values, problem.p)
        + problem.t * values
    )


def pde_energy(problem: PdeProblem, v: GridFunction) -> float:
    if v.grid.n != problem.grid.n:
        raise GridMismatch(f"grids differ: n={v.grid.n} vs n={problem.grid.n}")
    n2 = v.grid.n**2
    half_mult = problem.grid.laplacian_multiplier(problem.alpha / 2.0)
    half = apply_multiplier(v.values, half_mult)
    grad_term = 0.5 * float(np.sum(half * half)) / n2
    power_term = float(np.sum(np.abs(v.values) ** problem.p)) / n2 / problem.p
    mass_term = 0.5 * problem.t * float(np.sum(v.values * v.values)) / n2
    forcing_term = float(np.sum(problem.f.values * v.values)) / n2
    return grad_term + power_term + mass_term - forcing_term


def pde_gradient(problem: PdeProblem, v: GridFunction) -> GridFunction:
    if v.grid.n != problem.grid.n:
        raise GridMismatch(f"grids differ: n={v.grid.n} vs n={problem.grid.n}")
    return GridFunction(v.grid, _operator_image(problem, v.values) - problem.f.values)


def manufacture_rhs(u: GridFunction, alpha: float, p: float, t: float) -> GridFunction:
    """Right-hand side that makes u the exact discrete solution."""
    placeholder = PdeProblem(alpha, p, t, GridFunction.zeros(u.grid))
    return GridFunction(u.grid, _operator_image(placeholder, u.values))


class PdeEnergy(Objective):
    """Objective wrapper around a PdeProblem."""

    def __init__(self, problem: PdeProblem):
        self.problem = problem

    def value(self, v: GridFunction) -> float:
        return pde_energy(self.problem, v)

    def gradient(self, v: GridFunction) -> GridFunction:
        return pde_gradient(self.problem, v)


def manufactured_solution(grid: SpectralGrid) -> GridFunction:
    """exp(sin 2*pi*(x - 1/4) + sin 4*pi*(y - 3/8)) sampled at the nodes."""
    return GridFunction.sample(
        grid,
        lambda X, Y: np.exp(
            np.sin(2 * np.pi * (X - 0.25)) + np.sin(4 * np.pi * (Y - 0.375))
        ),
    )


def exp_forcing(grid: SpectralGrid) -> GridFunction:
    """exp(sin 2*pi*(x - 1/4) + sin 2*pi*(y - 1/4)) sampled at the nodes."""
    return GridFunction.sample(
        grid,
        lambda X, Y: np.exp(
            np.sin(2 * np.pi * (X - 0.25)) + np.sin(2 * np.pi * (Y - 0.25))
        ),
    )


class QuadraticObjective(Objective):
    """1/2 (A v, v)_N - (b, v)_N with A a positive Fourier multiplier.

    Minimizer, minimum value, and convexity constants are available in closed
    form, so runs against this objective can be checked exactly.
    """

    def __init__(self, grid: SpectralGrid, multiplier: np.ndarray, b: GridFunction):
        multiplier = np.asarray(multiplier, dtype=np.float64)
        if multiplier.shape != (grid.n, grid.n):
            raise ValueError(
                f"multiplier shape {multiplier.shape} does not match grid {grid.n}x{grid.n}"
            )
        if np.min(multiplier) <= 0:
            raise NonPositiveMultiplier(
                f"multiplier minimum {np.min(multiplier)} is not positive"
            )
        # A(-r) must equal A(r), otherwise the map is not a real symmetric
        # operator and the closed-form minimizer is meaningless.
        flipped = np.roll(multiplier[::-1, ::-1], shift=1, axis=(0, 1))
        asym = np.max(np.abs(multiplier - flipped))
        if asym > 1e-12 * np.max(multiplier):
            raise ValueError(f"multiplier is not conjugate symmetric (defect {asym:.3e})")
        if b.grid.n != grid.n:
            raise GridMismatch(f"grids differ: n={b.grid.n} vs n={grid.n}")
        self.grid = grid
        self.multiplier = multiplier
        self.b = b

    def value(self, v: GridFunction) -> float:
        av = apply_multiplier(v.values, self.multiplier)
        n2 = self.grid.n**2
        return 0.5 * float(np.sum(av * v.values)) / n2 - float(
            np.sum(self.b.values * v.values)
        ) / n2

    def gradient(self, v: GridFunction) -> GridFunction:
        av = apply_multiplier(v.values, self.multiplier)
        return GridFunction(self.grid, av - self.b.values)

    def minimizer(self) -> GridFunction:
        return GridFunction(
            self.grid, apply_multiplier(self.b.values, 1.0 / self.multiplier)
        )

    def min_value(self) -> float:
        return self.value(self.minimizer())


@dataclass(frozen=True)
class ConvexityEstimates:
    """Strong-convexity and smoothness constants used for step sizing.

    r_margin is the slack factor in the accelerated step rule; r_margin = 3
    keeps the rule's second branch from binding in practice.
    """

    mu: float
    lipschitz: float
    r_margin: float = 3.0

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.lipschitz < self.mu:
            raise ValueError(
                f"lipschitz {self.lipschitz} must be >= mu {self.mu}"
            )
        if self.r_margin <= 1:
            raise ValueError(f"r_margin must exceed 1, got {self.r_margin}")

    @property
    def rho(self) -> float:
        """Inverse condition number mu / L."""
        return self.mu / self.lipschitz


def estimate_quadratic_traps(
    objective: Objective,
    samples: list[tuple[GridFunction, GridFunction]],
    P: Preconditioner,
) -> tuple[float, float]:
    """Empirical bracket for the quadratic-trap constants.

    For each pair evaluates <G'(x) - G'(y), x - y>_N / ||x - y||_L^2; the
    min and max over the pairs bracket any valid (mu, L) on the sampled set.
    """
    if len(samples) < 2:
        raise ValueError("need at least two sample pairs")
    ratios = []
    for x, y in samples:
        diff = x - y
        denom = norm_L(P, diff) ** 2
        if denom == 0.0:
            raise DegeneratePair("sample pair coincides")
        gdiff = objective.gradient(x) - objective.gradient(y)
        ratios.append(inner_l2n(gdiff, diff) / denom)
    return min(ratios), max(ratios)
