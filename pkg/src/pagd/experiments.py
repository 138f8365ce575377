"""Experiment orchestration: the three solver studies and the flow study.

Each experiment has a config dataclass (defaults match the reference
protocols), a runner returning a result object, and CSV/figure emission in
`reporting`.  Sweep cells are independent solver runs; they may execute on a
worker pool, and results are merged in deterministic parameter order however
the pool schedules them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .config import (
    ConfigError,
    FieldSpec,
    apply_updates,
    coerce_bool,
    coerce_float,
    coerce_float_list,
    coerce_int,
    coerce_int_list,
    coerce_str,
)
from .grid import GridFunction, SpectralGrid, load_grid_csv
from .objective import (
    ConvexityEstimates,
    PdeEnergy,
    PdeProblem,
    QuadraticObjective,
    exp_forcing,
    manufacture_rhs,
    manufactured_solution,
)
from .optimizers import (
    IterateTrace,
    Reference,
    Scheme,
    SolverConfig,
    VERDICT_BLEW_UP,
    VERDICT_CONVERGED,
    run,
)
from .preconditioner import IdentityPreconditioner, SpectralPreconditioner
from . import heavyball

BLOWUP_SENTINEL = 1100


def mu_hat(t: float, nu: float) -> float:
    """Strong-convexity constant min(1, t/nu) of the preconditioned energy."""
    return min(1.0, t / nu)


def sentinel_iterations(trace: IterateTrace, max_iters: int) -> int:
    """Iterations-to-converge, or max_iters for no convergence, or 1100 for
    blow up (the sentinel encodes the verdict in sweep tables)."""
    if trace.verdict == VERDICT_CONVERGED:
        return trace.passes
    if trace.verdict == VERDICT_BLEW_UP:
        return BLOWUP_SENTINEL
    return max_iters


def make_rhs(grid: SpectralGrid, rhs: str, alpha: float, p: float, t: float) -> GridFunction:
    """Built-in right-hand sides, or a grid-function CSV path."""
    if rhs == "manufactured":
        return manufacture_rhs(manufactured_solution(grid), alpha=alpha, p=p, t=t)
    if rhs == "exp-forcing":
        return exp_forcing(grid)
    f = load_grid_csv(rhs)
    if f.grid.n != grid.n:
        raise ConfigError(f"rhs file has n={f.grid.n}, expected n={grid.n}")
    return f


# ---------------------------------------------------------------------------
# experiment 1: manufactured solution, all four schemes


@dataclass(frozen=True)
class ManufacturedConfig:
    n: int = 64
    alpha: float = 0.5
    p: float = 4.0
    t: float = 1.0
    nu: float = 1.2
    mu_plain: float = 1.0
    lipschitz_plain: float = 500.0
    lipschitz_precond: float = 20.0
    tol: float = 1e-8
    upper_tol: float = 1e10
    max_iters: int = 200

    FIELDS = {
        "n": FieldSpec(coerce_int, "grid points per axis"),
        "alpha": FieldSpec(coerce_float, "fractional order"),
        "p": FieldSpec(coerce_float, "nonlinearity power (>= 2)"),
        "t": FieldSpec(coerce_float, "zeroth-order coefficient"),
        "nu": FieldSpec(coerce_float, "preconditioner shift"),
        "mu_plain": FieldSpec(coerce_float, "strong convexity constant, plain norm"),
        "lipschitz_plain": FieldSpec(coerce_float, "smoothness constant for gd/agd steps"),
        "lipschitz_precond": FieldSpec(coerce_float, "smoothness constant for pgd/pagd steps"),
        "tol": FieldSpec(coerce_float, "convergence tolerance"),
        "upper_tol": FieldSpec(coerce_float, "blow-up threshold"),
        "max_iters": FieldSpec(coerce_int, "iteration cap"),
    }


@dataclass
class ManufacturedResult:
    config: ManufacturedConfig
    traces: dict[str, IterateTrace]
    step_sizes: dict[str, float]
    nu_used: dict[str, float]
    g0_gap: float
    g_star: float


def manufactured_scheme_settings(cfg: ManufacturedConfig):
    """(step size, friction, preconditioned?) per scheme from the constants."""
    muh = mu_hat(cfg.t, cfg.nu)
    return {
        Scheme.GD: (2.0 / (cfg.lipschitz_plain + cfg.mu_plain), math.sqrt(cfg.mu_plain), False),
        Scheme.AGD: (1.0 / cfg.lipschitz_plain, math.sqrt(cfg.mu_plain), False),
        Scheme.PGD: (2.0 / (cfg.lipschitz_precond + muh), math.sqrt(muh), True),
        Scheme.PAGD: (1.0 / cfg.lipschitz_precond, math.sqrt(muh), True),
    }


def run_manufactured(cfg: ManufacturedConfig, collect_identities: bool = False) -> ManufacturedResult:
    grid = SpectralGrid(cfg.n)
    u = manufactured_solution(grid)
    f = manufacture_rhs(u, alpha=cfg.alpha, p=cfg.p, t=cfg.t)
    problem = PdeProblem(cfg.alpha, cfg.p, cfg.t, f)
    objective = PdeEnergy(problem)
    reference = Reference(x_star=u, g_star=objective.value(u))
    x0 = GridFunction.zeros(grid)
    g0_gap = objective.value(x0) - reference.g_star

    traces: dict[str, IterateTrace] = {}
    steps: dict[str, float] = {}
    nus: dict[str, float] = {}
    for scheme, (s, eta, preconditioned) in manufactured_scheme_settings(cfg).items():
        P = SpectralPreconditioner(grid, cfg.alpha, cfg.nu) if preconditioned else IdentityPreconditioner()
        solver = SolverConfig(
            scheme=scheme,
            step_size=s,
            friction=eta,
            tol=cfg.tol,
            upper_tol=cfg.upper_tol,
            max_iters=cfg.max_iters,
            norm_for_stopping="L",  # the true solution is known
        )
        traces[scheme.value] = run(
            solver,
            objective,
            P,
            x0,
            reference=reference,
            collect_identities=collect_identities and scheme.accelerated,
        )
        steps[scheme.value] = s
        nus[scheme.value] = cfg.nu if preconditioned else None
    return ManufacturedResult(cfg, traces, steps, nus, g0_gap, reference.g_star)


# ---------------------------------------------------------------------------
# experiment 2: resolution sweep, stability of plain vs preconditioned schemes


@dataclass(frozen=True)
class ResolutionSweepConfig:
    alpha: float = 0.5
    p: float = 10.0
    t: float = 1.0
    nu: float = 0.9
    mu_plain: float = 1.0
    lipschitz_plain_values: tuple = (300.0, 3000.0)
    lipschitz_precond: float = 9.0
    grid_sizes: tuple = (16, 32, 64, 128, 256, 512)
    rhs: str = "exp-forcing"
    tol: float = 1e-3
    upper_tol: float = 1e8
    max_iters: int = 1000
    workers: int = 1

    FIELDS = {
        "alpha": FieldSpec(coerce_float, "fractional order"),
        "p": FieldSpec(coerce_float, "nonlinearity power"),
        "t": FieldSpec(coerce_float, "zeroth-order coefficient"),
        "nu": FieldSpec(coerce_float, "preconditioner shift"),
        "mu_plain": FieldSpec(coerce_float, "strong convexity constant, plain norm"),
        "lipschitz_plain_values": FieldSpec(coerce_float_list, "gd/agd smoothness constants"),
        "lipschitz_precond": FieldSpec(coerce_float, "pgd/pagd smoothness constant"),
        "grid_sizes": FieldSpec(coerce_int_list, "grid resolutions"),
        "rhs": FieldSpec(coerce_str, "manufactured | exp-forcing | csv path"),
        "tol": FieldSpec(coerce_float, "convergence tolerance (inf norm)"),
        "upper_tol": FieldSpec(coerce_float, "blow-up threshold"),
        "max_iters": FieldSpec(coerce_int, "iteration cap"),
        "workers": FieldSpec(coerce_int, "parallel sweep workers"),
    }


@dataclass(frozen=True)
class ResolutionCell:
    scheme: str
    lipschitz_plain: float | None  # None for the preconditioned schemes
    n: int
    verdict: str
    iterations: int


@dataclass
class ResolutionSweepResult:
    config: ResolutionSweepConfig
    cells: list


@dataclass(frozen=True)
class _CellTask:
    """Primitive description of one solver run (picklable for worker pools)."""

    scheme: str
    n: int
    alpha: float
    p: float
    t: float
    nu: float
    step: float
    eta: float
    preconditioned: bool
    rhs: str
    tol: float
    upper_tol: float
    max_iters: int
    stop_norm: str = "inf"


def _run_cell(task: _CellTask) -> tuple[str, int]:
    """Verdict and sentinel-mapped iteration count of one cell."""
    grid = SpectralGrid(task.n)
    f = make_rhs(grid, task.rhs, task.alpha, task.p, task.t)
    objective = PdeEnergy(PdeProblem(task.alpha, task.p, task.t, f))
    P = (
        SpectralPreconditioner(grid, task.alpha, task.nu)
        if task.preconditioned
        else IdentityPreconditioner()
    )
    solver = SolverConfig(
        scheme=Scheme(task.scheme),
        step_size=task.step,
        friction=task.eta,
        tol=task.tol,
        upper_tol=task.upper_tol,
        max_iters=task.max_iters,
        norm_for_stopping=task.stop_norm,
    )
    try:
        trace = run(solver, objective, P, GridFunction.zeros(grid))
    except ValueError:
        # Accelerated cells with eta*sqrt(s) >= 1 have no valid extrapolation
        # weight; such steps are far beyond the stable range and are recorded
        # with the blow-up sentinel so every cell still gets a verdict.
        return VERDICT_BLEW_UP, BLOWUP_SENTINEL
    return trace.verdict, sentinel_iterations(trace, task.max_iters)


def _run_tasks(tasks: list[_CellTask], workers: int) -> list[tuple[str, int]]:
    if workers <= 1:
        return [_run_cell(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, tasks, chunksize=16))


def run_resolution_sweep(cfg: ResolutionSweepConfig) -> ResolutionSweepResult:
    muh = mu_hat(cfg.t, cfg.nu)
    tasks: list[_CellTask] = []
    labels: list[tuple[str, float | None, int]] = []
    common = dict(
        alpha=cfg.alpha, p=cfg.p, t=cfg.t, nu=cfg.nu, rhs=cfg.rhs,
        tol=cfg.tol, upper_tol=cfg.upper_tol, max_iters=cfg.max_iters,
    )
    for n in cfg.grid_sizes:
        for big_l in cfg.lipschitz_plain_values:
            for scheme, step in (
                (Scheme.GD, 2.0 / (big_l + cfg.mu_plain)),
                (Scheme.AGD, 1.0 / big_l),
            ):
                tasks.append(_CellTask(
                    scheme=scheme.value, n=n, step=step,
                    eta=math.sqrt(cfg.mu_plain), preconditioned=False, **common,
                ))
                labels.append((scheme.value, big_l, n))
        for scheme, step in (
            (Scheme.PGD, 2.0 / (cfg.lipschitz_precond + muh)),
            (Scheme.PAGD, 1.0 / cfg.lipschitz_precond),
        ):
            tasks.append(_CellTask(
                scheme=scheme.value, n=n, step=step,
                eta=math.sqrt(muh), preconditioned=True, **common,
            ))
            labels.append((scheme.value, None, n))

    outcomes = _run_tasks(tasks, cfg.workers)
    cells = [
        ResolutionCell(scheme, big_l, n, verdict, iterations)
        for (scheme, big_l, n), (verdict, iterations) in zip(labels, outcomes)
    ]
    return ResolutionSweepResult(cfg, cells)


# ---------------------------------------------------------------------------
# experiment 3: (nu, s) sweep per fractional order


def _float_range(step: float, count: int) -> tuple[float, ...]:
    return tuple(round(step * j, 10) for j in range(1, count + 1))


DEFAULT_ALPHAS = tuple([round(0.1 * j, 10) for j in range(1, 11)] + [1.5, 2.0, 2.5, 3.0])


@dataclass(frozen=True)
class ParamSweepConfig:
    alpha_values: tuple = DEFAULT_ALPHAS
    n: int = 64
    p: float = 6.0
    t: float = 1.0
    rhs: str = "exp-forcing"
    tol: float = 1e-9
    upper_tol: float = 1e8
    max_iters: int = 1000
    full: bool = False  # full grids: nu 0.1..10 by 0.1, s 0.01..2 by 0.01
    nu_values: tuple = ()
    s_values: tuple = ()
    workers: int = 1

    FIELDS = {
        "alpha_values": FieldSpec(coerce_float_list, "fractional orders"),
        "n": FieldSpec(coerce_int, "grid points per axis"),
        "p": FieldSpec(coerce_float, "nonlinearity power"),
        "t": FieldSpec(coerce_float, "zeroth-order coefficient"),
        "rhs": FieldSpec(coerce_str, "manufactured | exp-forcing | csv path"),
        "tol": FieldSpec(coerce_float, "convergence tolerance (inf norm)"),
        "upper_tol": FieldSpec(coerce_float, "blow-up threshold"),
        "max_iters": FieldSpec(coerce_int, "iteration cap"),
        "full": FieldSpec(coerce_bool, "use the full 20000-cell (nu, s) grids"),
        "nu_values": FieldSpec(coerce_float_list, "explicit shift grid (overrides full/coarse)"),
        "s_values": FieldSpec(coerce_float_list, "explicit step grid (overrides full/coarse)"),
        "workers": FieldSpec(coerce_int, "parallel sweep workers"),
    }

    def grids(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        if self.nu_values and self.s_values:
            return self.nu_values, self.s_values
        if self.nu_values or self.s_values:
            raise ConfigError("set both nu_values and s_values, or neither")
        if self.full:
            return _float_range(0.1, 100), _float_range(0.01, 200)
        return _float_range(0.5, 20), _float_range(0.05, 40)


@dataclass(frozen=True)
class ParamSweepCell:
    alpha: float
    scheme: str
    nu: float
    step: float
    verdict: str
    iterations: int


@dataclass(frozen=True)
class BestCell:
    alpha: float
    scheme: str
    iterations: int
    nu: float
    step: float


@dataclass
class ParamSweepResult:
    config: ParamSweepConfig
    cells: list
    best: list


def select_best(cells: list) -> BestCell:
    """Minimal iteration count; ties resolved by lexicographic (nu, s)."""
    ordered = sorted(cells, key=lambda c: (c.iterations, c.nu, c.step))
    top = ordered[0]
    return BestCell(top.alpha, top.scheme, top.iterations, top.nu, top.step)


def run_param_sweep(cfg: ParamSweepConfig) -> ParamSweepResult:
    nu_grid, s_grid = cfg.grids()
    tasks: list[_CellTask] = []
    keys: list[tuple[float, str, float, float]] = []
    for alpha in cfg.alpha_values:
        for scheme in (Scheme.PGD, Scheme.PAGD):
            for nu in nu_grid:
                eta = math.sqrt(mu_hat(cfg.t, nu))
                for s in s_grid:
                    tasks.append(_CellTask(
                        scheme=scheme.value, n=cfg.n, alpha=alpha, p=cfg.p,
                        t=cfg.t, nu=nu, step=s, eta=eta, preconditioned=True,
                        rhs=cfg.rhs, tol=cfg.tol, upper_tol=cfg.upper_tol,
                        max_iters=cfg.max_iters,
                    ))
                    keys.append((alpha, scheme.value, nu, s))

    outcomes = _run_tasks(tasks, cfg.workers)
    cells = [
        ParamSweepCell(alpha, scheme, nu, s, verdict, iterations)
        for (alpha, scheme, nu, s), (verdict, iterations) in zip(keys, outcomes)
    ]
    best = [
        select_best([c for c in cells if c.alpha == alpha and c.scheme == scheme.value])
        for alpha in cfg.alpha_values
        for scheme in (Scheme.PGD, Scheme.PAGD)
    ]
    return ParamSweepResult(cfg, cells, best)


def run_table_cells(cfg: ParamSweepConfig, pairs: dict) -> list:
    """Run fixed (nu, s) pairs per (alpha, scheme) without sweeping.

    `pairs` maps (alpha, scheme_value) -> (nu, s); used to reproduce reported
    best cells directly.
    """
    cells = []
    for (alpha, scheme_value), (nu, s) in pairs.items():
        task = _CellTask(
            scheme=scheme_value, n=cfg.n, alpha=alpha, p=cfg.p, t=cfg.t,
            nu=nu, step=s, eta=math.sqrt(mu_hat(cfg.t, nu)), preconditioned=True,
            rhs=cfg.rhs, tol=cfg.tol, upper_tol=cfg.upper_tol, max_iters=cfg.max_iters,
        )
        verdict, iterations = _run_cell(task)
        cells.append(ParamSweepCell(alpha, scheme_value, nu, s, verdict, iterations))
    return cells


# ---------------------------------------------------------------------------
# flow study: heavy-ball trajectory and rate matching on the quadratic oracle


@dataclass(frozen=True)
class OdeStudyConfig:
    n: int = 8
    mu: float = 1.0
    lipschitz: float = 25.0
    r_margin: float = 3.0
    dt: float = 1e-3
    t_end: float = 10.0
    window_lo: int = 10
    window_hi: int = 50
    ode_substeps: int = 40
    seed: int = 12345

    FIELDS = {
        "n": FieldSpec(coerce_int, "grid points per axis of the oracle"),
        "mu": FieldSpec(coerce_float, "strong convexity constant"),
        "lipschitz": FieldSpec(coerce_float, "smoothness constant"),
        "r_margin": FieldSpec(coerce_float, "invariant-set margin r > 1"),
        "dt": FieldSpec(coerce_float, "trajectory time step"),
        "t_end": FieldSpec(coerce_float, "trajectory horizon"),
        "window_lo": FieldSpec(coerce_int, "first iteration of the fit window"),
        "window_hi": FieldSpec(coerce_int, "last iteration of the fit window"),
        "ode_substeps": FieldSpec(coerce_int, "integrator steps per sqrt(s)"),
        "seed": FieldSpec(coerce_int, "seed of the fixed starting point"),
    }


@dataclass
class OdeStudyResult:
    config: OdeStudyConfig
    trajectory: heavyball.Trajectory
    identity_residual: float
    rate_rows: list


def spread_multiplier(grid: SpectralGrid, mu: float, lipschitz: float) -> np.ndarray:
    """Positive Fourier multiplier spreading [mu, L] across the modes.

    A function of |r|^2 only, so it is conjugate symmetric (a genuine real
    symmetric operator) and attains mu at the zero mode and L at the extreme
    mode: the conditioning is exactly mu/L.
    """
    k2 = grid.wavenumber_squares()
    frac = np.sqrt(k2 / k2.max())
    return mu + (lipschitz - mu) * frac


def oracle_start(grid: SpectralGrid, seed: int) -> GridFunction:
    """Deterministic start with every Fourier mode excited."""
    rng = np.random.default_rng(seed)
    return GridFunction(grid, rng.standard_normal((grid.n, grid.n)))


def run_ode_study(cfg: OdeStudyConfig) -> OdeStudyResult:
    grid = SpectralGrid(cfg.n)
    quad = QuadraticObjective(grid, spread_multiplier(grid, cfg.mu, cfg.lipschitz), GridFunction.zeros(grid))
    P = IdentityPreconditioner()
    x0 = oracle_start(grid, cfg.seed)
    estimates = ConvexityEstimates(cfg.mu, cfg.lipschitz, cfg.r_margin)
    reference = Reference(quad.minimizer(), quad.min_value())

    ivp = heavyball.HeavyBallIvp(quad, P, math.sqrt(cfg.mu), x0)
    traj = heavyball.integrate(ivp, cfg.dt, cfg.t_end, reference=reference)
    residual = heavyball.energy_identity_residual(traj, ivp)
    rows = heavyball.rate_matching_study(
        quad, P, estimates, x0,
        window=(cfg.window_lo, cfg.window_hi),
        ode_substeps=cfg.ode_substeps,
    )
    return OdeStudyResult(cfg, traj, residual, rows)


# ---------------------------------------------------------------------------
# config plumbing shared by the CLI


EXPERIMENTS = {
    "manufactured": ManufacturedConfig,
    "resolution-sweep": ResolutionSweepConfig,
    "param-sweep": ParamSweepConfig,
    "ode-study": OdeStudyConfig,
}


def build_config(cls, file_values: dict[str, str], overrides: dict[str, str]):
    """Defaults <- config file <- command-line overrides, all validated."""
    defaults = {f.name: getattr(cls, f.name) for f in dataclass_fields(cls)}
    merged = apply_updates(defaults, file_values, cls.FIELDS)
    merged = apply_updates(merged, overrides, cls.FIELDS)
    try:
        return cls(**merged)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
