"""Damped heavy-ball flow: the continuous-time limit of the accelerated scheme.

The initial value problem integrated here is

    X'' + 2 eta X' + P^{-1} G'(X) = 0,    X(0) = x0,  X'(0) = 0,

with the auxiliary variable V = X - x* + X'/eta and the energy

    E(X, V) = (G(X) - G*)/eta + eta/2 ||V||_L^2,

which decays like e^(-eta t) whenever eta^2 <= mu.  The time stepper is a
symmetric splitting: exact half-steps of the linear friction (velocity times
e^(-eta dt)) around a velocity-Verlet step of the frictionless system.  It is
second order, exact on the friction subsystem, and reduces to velocity Verlet
at eta = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import GridFunction
from .objective import ConvexityEstimates, Objective, QuadraticObjective
from .optimizers import (
    MissingReference,
    Reference,
    Scheme,
    SolverConfig,
    momentum_method_step,  # noqa: F401  (re-exported; it is part of this toolkit's surface)
    run,
)
from .preconditioner import Preconditioner, norm_L


class BlowUp(RuntimeError):
    """The trajectory left the finite floating-point range."""


@dataclass(frozen=True)
class HeavyBallIvp:
    """Flow data: objective, preconditioner, friction eta (damping 2 eta),
    and the rest initial state (x0, 0)."""

    objective: Objective
    preconditioner: Preconditioner
    eta: float
    x0: GridFunction

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise ValueError(f"friction must be positive, got {self.eta}")


@dataclass(frozen=True)
class OdeState:
    t: float
    x: GridFunction
    xdot: GridFunction
    v: GridFunction | None  # X - x* + X'/eta, available when x* is known


@dataclass
class Trajectory:
    """Per-step diagnostics of one integration.

    speed_sq holds ||X'||_L^2 and g_values holds G(X); the energy columns are
    populated when a reference was supplied.  Full states are kept only on
    request (they are the expensive part).
    """

    dt: float
    eta: float
    ts: list = field(default_factory=list)
    speed_sq: list = field(default_factory=list)
    g_values: list = field(default_factory=list)
    potential: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    total: list = field(default_factory=list)
    inflated: list = field(default_factory=list)
    states: list = field(default_factory=list)
    final_state: OdeState | None = None


TRAJECTORY_CSV_HEADER = (
    "t,potential,kinetic,total,inflated_total,energy_identity_residual"
)


def integrate(
    ivp: HeavyBallIvp,
    dt: float,
    t_end: float,
    reference: Reference | None = None,
    observer=None,
    keep_states: bool = False,
) -> Trajectory:
    """Advance (X, X') to t_end, invoking `observer(OdeState)` at every step."""
    if dt <= 0 or t_end <= 0 or dt > t_end:
        raise ValueError(f"need 0 < dt <= t_end, got dt={dt}, t_end={t_end}")

    grid = ivp.x0.grid
    objective, P, eta = ivp.objective, ivp.preconditioner, ivp.eta
    friction_half = math.exp(-eta * dt)

    traj = Trajectory(dt=dt, eta=eta)

    def record(i: int, x: GridFunction, w: GridFunction) -> OdeState:
        t = i * dt
        traj.ts.append(t)
        traj.speed_sq.append(norm_L(P, w) ** 2)
        traj.g_values.append(objective.value(x))
        v = None
        if reference is not None:
            v = (x - reference.x_star) + (1.0 / eta) * w
            pot = (traj.g_values[-1] - reference.g_star) / eta
            kin = 0.5 * eta * norm_L(P, v) ** 2
            traj.potential.append(pot)
            traj.kinetic.append(kin)
            traj.total.append(pot + kin)
            traj.inflated.append(math.exp(eta * t) * (pot + kin))
        state = OdeState(t=t, x=x, xdot=w, v=v)
        if keep_states:
            traj.states.append(state)
        if observer is not None:
            observer(state)
        return state

    x = ivp.x0
    w = GridFunction.zeros(grid)
    d = P.solve(objective.gradient(x))
    state = record(0, x, w)

    n_steps = int(round(t_end / dt))
    # A diverging trajectory overflows before the finiteness check trips;
    # keep the IEEE warnings out of the loop.
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, n_steps + 1):
            w = friction_half * w
            w = w - (0.5 * dt) * d
            x = x + dt * w
            d = P.solve(objective.gradient(x))  # next step's first kick too
            w = w - (0.5 * dt) * d
            w = friction_half * w
            if not (x.is_finite and w.is_finite):
                raise BlowUp(f"state became non-finite at t = {i * dt}")
            state = record(i, x, w)

    traj.final_state = state
    return traj


def energy_identity_residual(trajectory: Trajectory, ivp: HeavyBallIvp) -> float:
    """Max defect of 1/2 ||X'||_L^2 + G(X) - G(x0) + 2 eta int_0^t ||X'||_L^2;
    the integral uses the trapezoid rule, so the defect is O(dt^2)."""
    if not trajectory.ts:
        raise ValueError("empty trajectory")
    sp = np.asarray(trajectory.speed_sq)
    g = np.asarray(trajectory.g_values)
    dt = trajectory.dt
    cum = np.concatenate(([0.0], np.cumsum(dt * 0.5 * (sp[1:] + sp[:-1]))))
    residual = 0.5 * sp + g - g[0] + 2.0 * ivp.eta * cum
    return float(np.max(np.abs(residual)))


@dataclass(frozen=True)
class DecayReport:
    ok: bool
    max_excess: float
    slack: float


def lyapunov_decay_check(
    trajectory: Trajectory,
    ivp: HeavyBallIvp,
    reference: Reference | None,
    slack_coeff: float = 100.0,
) -> DecayReport:
    """Check E(X(t), V(t)) <= e^(-eta t) E_0 up to an O(dt^2) discretization
    allowance (slack_coeff * dt^2 * E_0)."""
    if reference is None or not trajectory.total:
        raise MissingReference("the decay bound needs (x*, G*) recorded energies")
    e0 = trajectory.total[0]
    slack = slack_coeff * trajectory.dt**2 * max(e0, 1.0)
    excess = max(
        tot - math.exp(-ivp.eta * t) * e0
        for t, tot in zip(trajectory.ts, trajectory.total)
    )
    return DecayReport(ok=excess <= slack, max_excess=excess, slack=slack)


def v_ode_residual(
    trajectory: Trajectory, ivp: HeavyBallIvp, reference: Reference
) -> float:
    """Midpoint residual of eta V' + eta X' + P^{-1} G'(X) = 0 along a stored
    trajectory; O(dt^2) for the symmetric stepper.  Needs keep_states=True."""
    states = trajectory.states
    if len(states) < 2:
        raise ValueError("need a trajectory integrated with keep_states=True")
    P, eta, dt = ivp.preconditioner, ivp.eta, trajectory.dt
    worst = 0.0
    d_prev = P.solve(ivp.objective.gradient(states[0].x))
    for s0, s1 in zip(states[:-1], states[1:]):
        d_next = P.solve(ivp.objective.gradient(s1.x))
        resid = (
            (eta / dt) * (s1.v - s0.v)
            + 0.5 * eta * (s0.xdot + s1.xdot)
            + 0.5 * (d_prev + d_next)
        )
        scale = max(norm_L(P, d_prev), eta * norm_L(P, s0.xdot), 1e-300)
        worst = max(worst, norm_L(P, resid) / scale)
        d_prev = d_next
    return worst


@dataclass(frozen=True)
class RateMatchRow:
    label: str
    fitted: float
    target: float
    rel_deviation: float


def _fit_factor(log_values: np.ndarray, lo: int, hi: int) -> float:
    """exp(slope) of a least-squares line through log values over [lo, hi]."""
    window = np.arange(lo, hi + 1)
    return float(np.exp(np.polyfit(window, log_values[lo : hi + 1], 1)[0]))


def _row(label: str, fitted: float, target: float) -> RateMatchRow:
    dev = abs(fitted - target) / max(target, 1e-300)
    if target == 0.0 and fitted == 0.0:
        dev = 0.0
    return RateMatchRow(label, fitted, target, dev)


def rate_matching_study(
    objective: QuadraticObjective,
    P: Preconditioner,
    estimates: ConvexityEstimates,
    x0: GridFunction,
    window: tuple[int, int] = (10, 50),
    ode_substeps: int = 40,
) -> list[RateMatchRow]:
    """Empirical contraction factors vs their closed-form targets.

    Per-step factors, all at s = 1/L and eta = sqrt(mu):

      pgd_error_sq   fit of ||x_k - x*||_L^2       target (1-rho)/(1+rho)
      pagd_energy    fit of sqrt(E_k)              target 1 - sqrt(rho)
      ode_energy     fit of sqrt(E(k sqrt(s)))     target e^(-eta sqrt(s))

    The squared error and the energy are quadratic in the distance to the
    minimizer, so the energy-based fits extract the square root: for a
    quadratic objective the iteration matrix has spectral radius 1 - sqrt(rho)
    at the extreme mode, and the energies decay at the square of that rate
    while the stated targets are amplitude-scale factors.
    """
    mu, L = estimates.mu, estimates.lipschitz
    rho = estimates.rho
    s = 1.0 / L
    eta = math.sqrt(mu)
    lo, hi = window
    x_star = objective.minimizer()
    reference = Reference(x_star, objective.value(x_star))
    floor = 1e-200

    def make_config(scheme: Scheme) -> SolverConfig:
        return SolverConfig(
            scheme=scheme,
            step_size=s,
            friction=eta,
            tol=1e-290,
            upper_tol=1e30,
            max_iters=hi + 2,
        )

    rows = []

    def fitted_or_zero(series, scale: float) -> float:
        # A run that bottoms out before the window ends has effectively
        # converged: report factor 0 instead of fitting noise.
        series = np.asarray(series[: hi + 1])
        if len(series) <= hi or np.min(series[lo:]) <= floor:
            return 0.0
        return _fit_factor(scale * np.log(series), lo, hi)

    pgd = run(make_config(Scheme.PGD), objective, P, x0, reference=reference)
    rows.append(_row(
        "pgd_error_sq",
        fitted_or_zero(pgd.err_L, 2.0),
        (1.0 - rho) / (1.0 + rho),
    ))

    if rho >= 1.0:
        # theta = sqrt(rho) leaves no valid extrapolation weight; the exactly
        # conditioned problem converges in one step, matching the target 0.
        rows.append(_row("pagd_energy", 0.0, 1.0 - math.sqrt(rho)))
    else:
        pagd = run(make_config(Scheme.PAGD), objective, P, x0, reference=reference)
        rows.append(_row(
            "pagd_energy",
            fitted_or_zero(pagd.total, 0.5),
            1.0 - math.sqrt(rho),
        ))

    sqrt_s = math.sqrt(s)
    ivp = HeavyBallIvp(objective, P, eta, x0)
    traj = integrate(
        ivp,
        dt=sqrt_s / ode_substeps,
        t_end=(hi + 2) * sqrt_s,
        reference=reference,
    )
    rows.append(_row(
        "ode_energy",
        fitted_or_zero(traj.total[::ode_substeps], 0.5),
        math.exp(-eta * sqrt_s),
    ))

    return rows
