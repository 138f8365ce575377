"""First-order descent schemes with energy diagnostics.

Four schemes share one kernel.  With preconditioner P, step size s and
residual g = G'(.) evaluated at the scheme's evaluation point:

    plain        x_{k+1} = x_k - s * P^{-1} g(x_k)            (gd / pgd)
    accelerated  y_k     = x_k + lambda (x_k - x_{k-1})
                 x_{k+1} = y_k - s * P^{-1} g(y_k)            (agd / pagd)
                 v_{k+1} = x_k + (x_{k+1} - x_k) / theta

with theta = eta * sqrt(s) and lambda = (1 - theta) / (1 + theta).  The
auxiliary sequence v_k is not needed to advance the iteration; it is kept for
the energy diagnostics

    E_k = (G(x_k) - G*) / eta  +  eta/2 ||v_k - x*||_L^2,

and is maintained for the plain schemes too (same update formula) so their
energy decomposition can be plotted.

A run terminates with one of three verdicts: the stopping norm of the search
direction P^{-1} g fell below `tol` (converged), rose above `upper_tol` or
went non-finite (blew_up), or the iteration budget ran out (no_convergence).
Reported iteration counts are 1-based: the count is the index of the first
evaluation pass whose search direction satisfied the tolerance.

A single run is strictly sequential; distinct runs share no mutable state
and may execute in parallel (the sweep runner does).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .grid import GridFunction, inner_l2n, norm_inf
from .objective import ConvexityEstimates, Objective
from .preconditioner import Preconditioner, norm_L


class MissingReference(ValueError):
    """A diagnostic needing (x*, G*) was invoked without a reference."""


class Scheme(str, Enum):
    GD = "gd"
    AGD = "agd"
    PGD = "pgd"
    PAGD = "pagd"

    @property
    def accelerated(self) -> bool:
        return self in (Scheme.AGD, Scheme.PAGD)

    @property
    def preconditioned(self) -> bool:
        return self in (Scheme.PGD, Scheme.PAGD)


VERDICT_RUNNING = "running"
VERDICT_CONVERGED = "converged"
VERDICT_BLEW_UP = "blew_up"
VERDICT_NO_CONVERGENCE = "no_convergence"


@dataclass(frozen=True)
class SolverConfig:
    scheme: Scheme
    step_size: float
    friction: float
    tol: float
    upper_tol: float
    max_iters: int
    norm_for_stopping: str = "inf"  # "inf" when x* unknown, "L" when known

    def __post_init__(self) -> None:
        if self.step_size <= 0:
            raise ValueError(f"step size must be positive, got {self.step_size}")
        if self.friction <= 0:
            raise ValueError(f"friction must be positive, got {self.friction}")
        if not 0 < self.tol < self.upper_tol:
            raise ValueError(
                f"need 0 < tol < upper_tol, got tol={self.tol}, upper_tol={self.upper_tol}"
            )
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.norm_for_stopping not in ("inf", "L"):
            raise ValueError(f"unknown stopping norm {self.norm_for_stopping!r}")


@dataclass(frozen=True)
class PagdParams:
    """Derived acceleration weights; build through `from_friction`."""

    theta: float
    lam: float

    @classmethod
    def from_friction(cls, friction: float, step_size: float) -> "PagdParams":
        theta = friction * math.sqrt(step_size)
        if not 0 < theta < 1:
            raise ValueError(
                f"acceleration needs theta = eta*sqrt(s) in (0, 1), got {theta}"
            )
        return cls(theta=theta, lam=(1.0 - theta) / (1.0 + theta))


@dataclass(frozen=True)
class Reference:
    """Known minimizer and minimum value, enabling error/energy diagnostics."""

    x_star: GridFunction
    g_star: float


@dataclass(frozen=True)
class SolverState:
    """Iterate bundle after k update steps.

    `y` is the evaluation point whose gradient produced this iterate (for the
    initial state, x itself): consecutive states (k, k+1) therefore carry the
    index-k triple (x_k, y_k, v_k) as (state_k.x, state_k1.y, state_k.v).
    """

    k: int
    x: GridFunction
    x_prev: GridFunction
    y: GridFunction
    v: GridFunction


@dataclass
class IterateTrace:
    """Append-only per-iteration diagnostics of one run.

    Row k describes the iterate after k updates together with the search
    direction evaluated there; entries are None when no reference is known.
    """

    scheme: Scheme
    step_size: float
    eta: float
    tol: float
    norm_for_stopping: str
    ks: list = field(default_factory=list)
    objective_gap: list = field(default_factory=list)
    err_L: list = field(default_factory=list)
    search_inf: list = field(default_factory=list)
    search_L: list = field(default_factory=list)
    potential: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    total: list = field(default_factory=list)
    residual_Linv: list = field(default_factory=list)
    identity_residuals: list = field(default_factory=list)
    verdict: str = VERDICT_RUNNING
    verdict_k: int | None = None

    def record(self, k, gap, err, s_inf, s_L, pot, kin, tot, resid) -> None:
        self.ks.append(k)
        self.objective_gap.append(gap)
        self.err_L.append(err)
        self.search_inf.append(s_inf)
        self.search_L.append(s_L)
        self.potential.append(pot)
        self.kinetic.append(kin)
        self.total.append(tot)
        self.residual_Linv.append(resid)

    def set_verdict(self, verdict: str, k: int) -> None:
        if self.verdict != VERDICT_RUNNING:
            raise RuntimeError(f"verdict already set to {self.verdict}")
        self.verdict = verdict
        self.verdict_k = k

    @property
    def passes(self) -> int:
        """Number of evaluation passes = reported iteration count."""
        return len(self.ks)

    def rows(self):
        last = self.passes - 1
        for i in range(self.passes):
            verdict = self.verdict if i == last else VERDICT_RUNNING
            yield (
                self.ks[i],
                self.objective_gap[i],
                self.err_L[i],
                self.search_inf[i],
                self.search_L[i],
                self.potential[i],
                self.kinetic[i],
                self.total[i],
                self.residual_Linv[i],
                verdict,
            )


TRACE_CSV_HEADER = (
    "k,objective_gap,err_L,search_inf,search_L,potential,kinetic,total,"
    "residual_Linv,verdict"
)


def initial_state(x0: GridFunction) -> SolverState:
    return SolverState(k=0, x=x0, x_prev=x0, y=x0, v=x0)


def pgd_step(
    state: SolverState, objective: Objective, P: Preconditioner, s: float
) -> SolverState:
    """One plain descent update x <- x - s P^{-1} G'(x)."""
    d = P.solve(objective.gradient(state.x))
    x_new = state.x - s * d
    return SolverState(state.k + 1, x_new, state.x, state.x, x_new)


def pagd_step(
    state: SolverState,
    objective: Objective,
    P: Preconditioner,
    params: PagdParams,
    s: float,
) -> SolverState:
    """One accelerated update: extrapolate, descend at the extrapolation,
    and advance the auxiliary sequence."""
    y = state.x + params.lam * (state.x - state.x_prev)
    d = P.solve(objective.gradient(y))
    x_new = y - s * d
    v_new = state.x + (1.0 / params.theta) * (x_new - state.x)
    return SolverState(state.k + 1, x_new, state.x, y, v_new)


def momentum_method_step(
    state: SolverState,
    objective: Objective,
    P: Preconditioner,
    s: float,
    eta: float,
) -> SolverState:
    """Heavy-ball update x <- x - s P^{-1} G'(x) + (1 - 2 eta sqrt(s)) (x - x_prev).

    Contrasts with the accelerated schemes, which evaluate the gradient at an
    extrapolated point; the weight 1 - 2 eta sqrt(s) is within O((eta sqrt(s))^2)
    of lambda.
    """
    weight = 1.0 - 2.0 * eta * math.sqrt(s)
    if not -1.0 < weight < 1.0:
        raise ValueError(f"momentum weight must lie in (-1, 1), got {weight}")
    d = P.solve(objective.gradient(state.x))
    x_new = state.x - s * d + weight * (state.x - state.x_prev)
    theta = eta * math.sqrt(s)
    v_new = state.x + (1.0 / theta) * (x_new - state.x)
    return SolverState(state.k + 1, x_new, state.x, state.x, v_new)


def step_size_rule(scheme: Scheme, estimates: ConvexityEstimates) -> float:
    """Step size from convexity constants.

    Plain schemes take 2/(L + mu); accelerated ones take
    min(1/L, ((r-1)/(r+1))^2 / mu), whose second branch rarely binds.
    """
    if scheme.accelerated:
        margin = ((estimates.r_margin - 1.0) / (estimates.r_margin + 1.0)) ** 2
        return min(1.0 / estimates.lipschitz, margin / estimates.mu)
    return 2.0 / (estimates.lipschitz + estimates.mu)


def lyapunov_energy(
    x: GridFunction,
    v: GridFunction,
    reference: Reference | None,
    eta: float,
    objective: Objective,
    P: Preconditioner,
) -> tuple[float, float, float]:
    """(potential, kinetic, total) with potential (G(x) - G*)/eta and kinetic
    eta/2 ||v - x*||_L^2."""
    if reference is None:
        raise MissingReference("energy diagnostics need (x*, G*)")
    pot = (objective.value(x) - reference.g_star) / eta
    kin = 0.5 * eta * norm_L(P, v - reference.x_star) ** 2
    return pot, kin, pot + kin


def _relative(residual: float, *scales: float) -> float:
    return residual / max(*scales, 1e-300)


def _identity_residuals(
    x: GridFunction,
    x_prev: GridFunction,
    y: GridFunction,
    v: GridFunction,
    x_new: GridFunction,
    v_new: GridFunction,
    g: GridFunction,
    d: GridFunction,
    P: Preconditioner,
    theta: float,
    eta: float,
    s: float,
) -> dict[str, float]:
    # Residuals are normalized by the iterate magnitudes entering each
    # identity, not by the differences of iterates: once a run sits at its
    # round-off floor the differences are pure cancellation, while the
    # identities still hold to machine precision relative to the states.
    rs = math.sqrt(s)
    state_scale = max(
        norm_L(P, x), norm_L(P, y), norm_L(P, v), norm_L(P, v_new), 1e-300
    )

    # (i) one-line form of the scheme: eta (v_{k+1}-v_k)/sqrt(s)
    #     + eta (y_k - x_k)/sqrt(s) + P^{-1} g(y_k) = 0
    a = (eta / rs) * (v_new - v)
    b = (eta / rs) * (y - x)
    total = a + b + d
    one_line = _relative(
        norm_L(P, total),
        (eta / rs) * state_scale,
        norm_L(P, a),
        norm_L(P, b),
        norm_L(P, d),
    )

    # (ii) kinetic-increment identity:
    #     eta/(2 sqrt(s)) ||v_{k+1}-v_k||_L^2 = eta/(2 sqrt(s)) ||x_k-y_k||_L^2
    #     + sqrt(s)/(2 eta) ||g||_Linv^2 + <g, y_k - x_k>_N
    lhs = (eta / (2 * rs)) * norm_L(P, v_new - v) ** 2
    t1 = (eta / (2 * rs)) * norm_L(P, x - y) ** 2
    t2 = (rs / (2 * eta)) * inner_l2n(g, d)
    t3 = inner_l2n(g, y - x)
    increment = _relative(
        abs(lhs - (t1 + t2 + t3)),
        (eta / (2 * rs)) * state_scale**2,
        abs(lhs),
        abs(t1),
        abs(t2),
        abs(t3),
    )

    # (iii) convex-hull relations between x_k, y_k, v_k
    hull = max(
        norm_L(P, y - (1.0 / (1 + theta)) * x - (theta / (1 + theta)) * v),
        norm_L(P, x - (1 + theta) * y + theta * v),
        norm_L(P, v - (1 + 1.0 / theta) * y + (1.0 / theta) * x),
        norm_L(P, (x - y) - theta * (y - v)),
    ) / state_scale

    return {"one_line": one_line, "kinetic_increment": increment, "convex_hull": hull}


def iterate_identity_checks(
    state_k: SolverState,
    state_k1: SolverState,
    objective: Objective,
    P: Preconditioner,
    params: PagdParams,
    s: float,
) -> dict[str, float]:
    """Relative residuals of the exact per-iteration identities of the
    accelerated scheme, evaluated on two consecutive states.

    All three are algebraic consequences of the update formulas, so anything
    above round-off indicates a broken kernel.  The friction coefficient is
    recovered as theta / sqrt(s); the evaluation point y_k of the transition
    is the one stored in state_k1.
    """
    y = state_k1.y
    g = objective.gradient(y)
    d = P.solve(g)
    eta = params.theta / math.sqrt(s)
    return _identity_residuals(
        state_k.x,
        state_k.x_prev,
        y,
        state_k.v,
        state_k1.x,
        state_k1.v,
        g,
        d,
        P,
        params.theta,
        eta,
        s,
    )


def run(
    config: SolverConfig,
    objective: Objective,
    P: Preconditioner,
    x0: GridFunction,
    reference: Reference | None = None,
    collect_identities: bool = False,
) -> IterateTrace:
    """Iterate a scheme until convergence, blow-up, or the iteration cap.

    The stopping norm is applied to the search direction P^{-1} G' evaluated
    at x_k (plain schemes) or y_k (accelerated schemes).  Pass
    collect_identities=True on accelerated runs to record the per-iteration
    identity residuals alongside the trace.
    """
    scheme = config.scheme
    s = config.step_size
    eta = config.friction
    theta = eta * math.sqrt(s)
    params = PagdParams.from_friction(eta, s) if scheme.accelerated else None

    trace = IterateTrace(
        scheme=scheme,
        step_size=s,
        eta=eta,
        tol=config.tol,
        norm_for_stopping=config.norm_for_stopping,
    )

    x = x0
    x_prev = x0
    v = x0
    # Divergent iterates legitimately overflow before the blow-up verdict
    # fires; the errstate keeps IEEE chatter out of the loop.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(config.max_iters):
            y = x + params.lam * (x - x_prev) if scheme.accelerated else x
            g = objective.gradient(y)
            d = P.solve(g)

            finite = d.is_finite
            if finite:
                s_inf = norm_inf(d)
                # ||d||_L = ||g||_Linv exactly; one inner product serves both.
                s_L = math.sqrt(max(inner_l2n(g, d), 0.0))
            else:
                s_inf = s_L = math.inf

            if reference is not None:
                gap = objective.value(x) - reference.g_star
                err = norm_L(P, x - reference.x_star)
                kin = 0.5 * eta * norm_L(P, v - reference.x_star) ** 2
                pot = gap / eta
                tot = pot + kin
            else:
                gap = err = pot = kin = tot = None

            trace.record(k, gap, err, s_inf, s_L, pot, kin, tot, s_L)

            stop_norm = s_inf if config.norm_for_stopping == "inf" else s_L
            if not finite or stop_norm >= config.upper_tol:
                trace.set_verdict(VERDICT_BLEW_UP, k)
                break
            if stop_norm <= config.tol:
                trace.set_verdict(VERDICT_CONVERGED, k)
                break

            x_new = y - s * d
            v_new = x + (1.0 / theta) * (x_new - x)
            if collect_identities and scheme.accelerated:
                trace.identity_residuals.append(
                    _identity_residuals(
                        x, x_prev, y, v, x_new, v_new, g, d, P, theta, eta, s
                    )
                )
            x_prev, x, v = x, x_new, v_new
        else:
            trace.set_verdict(VERDICT_NO_CONVERGENCE, config.max_iters - 1)

    return trace


@dataclass(frozen=True)
class InvariantSetReport:
    ok: bool
    radius_x: float
    radius_v: float
    max_x_ratio: float
    max_v_ratio: float
    first_violation: tuple[int, str] | None


def invariant_set_monitor(
    trace: IterateTrace,
    estimates: ConvexityEstimates,
    g0_gap: float,
    slack: float = 1e-9,
) -> InvariantSetReport:
    """Check the trace against the invariant-set radii.

    R1 = sqrt(2 (G(x0) - G*) / mu) bounds ||x_k - x*||_L and
    R = R1 + sqrt(2 r (G(x0) - G*)) / eta bounds ||v_k - x*||_L.
    """
    if any(e is None for e in trace.err_L):
        raise MissingReference("invariant-set monitoring needs reference diagnostics")
    r1 = math.sqrt(2.0 * g0_gap / estimates.mu)
    r2 = math.sqrt(2.0 * estimates.r_margin * g0_gap)
    radius_v = r1 + r2 / trace.eta

    first = None
    max_x = max_v = 0.0
    for i, k in enumerate(trace.ks):
        x_ratio = trace.err_L[i] / r1 if r1 > 0 else (1.0 if trace.err_L[i] > 0 else 0.0)
        v_dist = math.sqrt(2.0 * trace.kinetic[i] / trace.eta)
        v_ratio = v_dist / radius_v if radius_v > 0 else (1.0 if v_dist > 0 else 0.0)
        max_x = max(max_x, x_ratio)
        max_v = max(max_v, v_ratio)
        if first is None and x_ratio > 1.0 + slack:
            first = (k, "x")
        if first is None and v_ratio > 1.0 + slack:
            first = (k, "v")
    return InvariantSetReport(
        ok=first is None,
        radius_x=r1,
        radius_v=radius_v,
        max_x_ratio=max_x,
        max_v_ratio=max_v,
        first_violation=first,
    )


def residual_l2_sum_check(
    trace: IterateTrace, s: float, lam: float, g0_gap: float | None
) -> bool:
    """True iff sum_k ||G'(y_k)||_Linv^2 <= 2(1+lambda)/(s(1-lambda)) (G(x0)-G*)."""
    if g0_gap is None:
        raise MissingReference("the residual sum bound needs G(x0) - G*")
    total = sum(r * r for r in trace.residual_Linv)
    bound = 2.0 * (1.0 + lam) / (s * (1.0 - lam)) * g0_gap
    return total <= bound + 1e-8 * max(1.0, bound)
