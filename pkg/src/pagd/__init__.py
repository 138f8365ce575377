"""Preconditioned (accelerated) gradient descent on periodic spectral grids.

A small toolkit with four layers: discrete Fourier calculus on the unit
square (`grid`), spectral preconditioners and their induced norms
(`preconditioner`), objective functionals including a nonlocal elliptic
energy and a quadratic oracle (`objective`), the four first-order schemes
with energy diagnostics (`optimizers`), the damped heavy-ball flow they
discretize (`heavyball`), and experiment orchestration plus a CLI
(`experiments`, `reporting`, `cli`).
"""

from .grid import (
    GridFunction,
    GridMismatch,
    SpectralGrid,
    Spectrum,
    SymmetryViolation,
    dft,
    fractional_laplacian,
    idft,
    inner_l2n,
    norm_halpha,
    norm_inf,
    norm_l2n,
    norm_np,
)
from .preconditioner import (
    IdentityPreconditioner,
    InvalidShift,
    NegativeQuadraticForm,
    Preconditioner,
    SpectralPreconditioner,
    inner_L,
    norm_L,
    norm_Linv,
)
from .objective import (
    ConvexityEstimates,
    DegeneratePair,
    NonPositiveMultiplier,
    Objective,
    PdeEnergy,
    PdeProblem,
    QuadraticObjective,
    estimate_quadratic_traps,
    exp_forcing,
    manufacture_rhs,
    manufactured_solution,
    pde_energy,
    pde_gradient,
)
from .optimizers import (
    IterateTrace,
    MissingReference,
    PagdParams,
    Reference,
    Scheme,
    SolverConfig,
    SolverState,
    initial_state,
    invariant_set_monitor,
    iterate_identity_checks,
    lyapunov_energy,
    momentum_method_step,
    pagd_step,
    pgd_step,
    residual_l2_sum_check,
    run,
    step_size_rule,
)
from .heavyball import (
    BlowUp,
    HeavyBallIvp,
    OdeState,
    Trajectory,
    energy_identity_residual,
    integrate,
    lyapunov_decay_check,
    rate_matching_study,
)

__version__ = "0.1.0"
