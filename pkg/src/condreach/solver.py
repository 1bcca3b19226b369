"""Robust value iteration, consistency repair, and the bound pair.

The layered model is acyclic except for the single reset back-edge into
the initial abstract state, so each value sweep is one backward pass.
The sweep also propagates, through the distributions actually chosen,
the sensitivity of every value to the injected initial value; the reset
fixpoint is then solved in closed form and re-swept until the choices
stabilize (policy iteration on a scalar).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .abstraction import reachable_states

DEFAULT_VI_TOL = 1e-9
_MAX_SWEEPS = 10000


class SolverError(ArithmeticError):
    """Raised on non-convergence, e.g. (near-)zero evidence likelihood."""


@dataclass(frozen=True)
class Scheduler:
    """Chosen next-layer cell per abstract state.

    choices[i] is an int array (n_cells_i, n_states); -1 marks reset
    states, which have no choice.
    """

    choices: tuple


@dataclass(frozen=True)
class BoundsReport:
    lower: float
    upper: float
    guide_scheduler: Scheduler
    repaired_scheduler: Scheduler
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower > self.upper + 1e-9:
            raise SolverError(
                f"lower bound {self.lower} exceeds upper bound {self.upper}"
            )


def greedy_distribution(lower, upper, values, maximize):
    """Extreme point of the interval-distribution polytope.

    Rows start at their lower bounds; the remaining mass is poured into
    successors in value order (best first when maximizing).  This is the
    exact optimum of a linear objective over the polytope
    { p : lower <= p <= upper, sum p = 1 }.
    """
    order = np.argsort(-values if maximize else values, kind="stable")
    L = lower[..., order]
    U = upper[..., order]
    room = U - L
    slack = 1.0 - L.sum(axis=-1, keepdims=True)
    before = np.cumsum(room, axis=-1) - room
    p = L + np.clip(slack - before, 0.0, room)
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.size)
    return p[..., inverse]


def _sweep(imdp, weights, v0, outer, inner, fixed=None):
    """One backward pass; returns (values, betas, choices).

    values[i] has shape (n_cells_i, n_states); betas is the derivative
    of each value with respect to the injected initial value v0 under
    the choices made during this pass.
    """
    n_layers = imdp.n_layers
    n = imdp.n_states
    values = [None] * n_layers
    betas = [None] * n_layers
    choices = [None] * (n_layers - 1)
    w = np.asarray(weights, dtype=float)
    values[-1] = np.tile(w, (imdp.n_cells(n_layers - 1), 1))
    betas[-1] = np.zeros_like(values[-1])
    for i in range(n_layers - 2, -1, -1):
        nc = imdp.n_cells(i)
        nc2 = imdp.n_cells(i + 1)
        q_val = np.empty((nc, nc2, n))
        q_beta = np.empty((nc, nc2, n))
        for j2 in range(nc2):
            vn = values[i + 1][j2]
            bn = betas[i + 1][j2]
            p = greedy_distribution(
                imdp.lower[i][:, j2], imdp.upper[i][:, j2], vn, inner == "max"
            )
            q_val[:, j2] = p @ vn
            q_beta[:, j2] = p @ bn
        if fixed is not None:
            choice = fixed.choices[i].copy()
            # Reset rows carry -1; give them a valid gather index, their
            # values are overwritten below anyway.
            gather = np.maximum(choice, 0)
        elif outer == "max":
            gather = choice = np.argmax(q_val, axis=1)
        else:
            gather = choice = np.argmin(q_val, axis=1)
        take = gather[:, None, :]
        val = np.take_along_axis(q_val, take, axis=1)[:, 0, :]
        beta = np.take_along_axis(q_beta, take, axis=1)[:, 0, :]
        reset = imdp.reset_masks[i]
        val[:, reset] = v0
        beta[:, reset] = 1.0
        choice = np.asarray(choice)
        choice[:, reset] = -1
        values[i] = val
        betas[i] = beta
        choices[i] = choice
    return values, betas, choices


def _solve(imdp, weights, outer, inner, tol, fixed=None):
    """Iterate sweeps until the reset fixpoint stabilizes."""
    v0 = 0.0
    for _ in range(_MAX_SWEEPS):
        values, betas, choices = _sweep(imdp, weights, v0, outer, inner, fixed)
        f = values[0][0, imdp.initial]
        b = betas[0][0, imdp.initial]
        if b >= 1.0 - 1e-12:
            raise SolverError(
                "reset loop does not contract; the evidence has (near-)zero "
                "likelihood"
            )
        # The pass computes f = alpha + b * v0 under frozen choices; the
        # frozen-choice fixpoint is alpha / (1 - b).
        v0_new = (f - b * v0) / (1.0 - b)
        if abs(v0_new - v0) <= tol:
            values, _, choices = _sweep(
                imdp, weights, v0_new, outer, inner, fixed
            )
            return values, Scheduler(tuple(choices)), v0_new
        v0 = v0_new
    raise SolverError("value iteration did not converge")


def robust_value_iteration(
    imdp, weights, outer="max", inner="max", tol=DEFAULT_VI_TOL
):
    """Optimal robust values and the outer-optimal scheduler.

    outer optimizes over actions (next-layer cells), inner over the
    feasible distributions inside the interval bounds.  Argmax ties
    break to the lowest-indexed action.
    """
    values, sched, _ = _solve(imdp, weights, outer, inner, tol)
    return values, sched


def evaluate_scheduler(imdp, weights, sched, inner, tol=DEFAULT_VI_TOL):
    """Value of a fixed scheduler under adversarial (or friendly) nature."""
    values, _, value = _solve(imdp, weights, outer=None, inner=inner,
                              tol=tol, fixed=sched)
    return values, value


def reachable_under(imdp, sched):
    """Abstract states reachable from the start following the scheduler."""
    return reachable_states(imdp, sched)


def repair_consistency(imdp, sched):
    """Make per-cell choices uniform by majority vote over reachable states.

    Layers are fixed front to back; reachability is recomputed after each
    layer since earlier repairs change which later states are reachable.
    Ties (and cells with no reachable voters) resolve to the lowest
    action index among the votes of all non-reset states.
    """
    choices = [c.copy() for c in sched.choices]
    for i in range(imdp.n_layers - 1):
        reach = reachable_states(imdp, Scheduler(tuple(choices)))
        reset = imdp.reset_masks[i]
        for j in range(imdp.n_cells(i)):
            eligible = ~reset & imdp.active[i][j]
            if not eligible.any():
                continue
            voters = reach[i][j] & eligible
            votes = choices[i][j][voters if voters.any() else eligible]
            winner = np.bincount(votes).argmax()
            choices[i][j][eligible] = winner
    return Scheduler(tuple(choices))


def audit_consistency(imdp, sched, reach=None):
    """Check that reachable states sharing a cell share an action."""
    if reach is None:
        reach = reachable_states(imdp, sched)
    for i in range(imdp.n_layers - 1):
        reset = imdp.reset_masks[i]
        for j in range(imdp.n_cells(i)):
            acts = sched.choices[i][j][reach[i][j] & ~reset]
            if acts.size and not (acts == acts[0]).all():
                return False
    return True


def compute_bounds(imdp, weights, tol=DEFAULT_VI_TOL, direction="max"):
    """Sound bound pair on the optimal conditional weight.

    Maximization: the upper bound is the unrestricted robust optimum
    (max over schedulers, max over distributions); the lower bound
    evaluates, pessimistically, the consistent scheduler obtained by
    repairing the max/min-optimal one.  Minimization flips every
    direction symmetrically.
    """
    if direction not in ("max", "min"):
        raise ValueError("direction must be 'max' or 'min'")
    opt, pess = ("max", "min") if direction == "max" else ("min", "max")

    vals_outer, sigma_star = robust_value_iteration(
        imdp, weights, outer=opt, inner=opt, tol=tol
    )
    outer_bound = float(vals_outer[0][0, imdp.initial])

    _, sigma_minus = robust_value_iteration(
        imdp, weights, outer=opt, inner=pess, tol=tol
    )
    sigma_hat = repair_consistency(imdp, sigma_minus)
    _, inner_bound = evaluate_scheduler(imdp, weights, sigma_hat, inner=pess,
                                        tol=tol)
    inner_bound = float(inner_bound)

    if direction == "max":
        lower, upper = inner_bound, outer_bound
    else:
        lower, upper = outer_bound, inner_bound
    return BoundsReport(
        lower=lower,
        upper=upper,
        guide_scheduler=sigma_star,
        repaired_scheduler=sigma_hat,
        info={"direction": direction},
    )
