"""Outer refinement loop: abstract, solve, record, split, repeat."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .abstraction import TransientBoundCache, abstract, restrict_reachable
from .ctmc import DEFAULT_TRANSIENT_TOL
from .evidence import coarsest_partition
from .solver import DEFAULT_VI_TOL, compute_bounds, reachable_under


@dataclass(frozen=True)
class AnalysisConfig:
    time_limit: float = 600.0
    max_iters: int | None = None
    width_target: float | None = None
    transient_tol: float = DEFAULT_TRANSIENT_TOL
    vi_tol: float = DEFAULT_VI_TOL
    mode: str = "guided"
    direction: str = "max"
    seed: int = 0

    def __post_init__(self):
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")
        if self.transient_tol <= 0 or self.vi_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.mode not in ("guided", "full"):
            raise ValueError("mode must be 'guided' or 'full'")
        if self.direction not in ("max", "min"):
            raise ValueError("direction must be 'max' or 'min'")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    elapsed_s: float
    lower: float
    upper: float
    splits: int
    imdp_states: int
    imdp_actions: int
    imdp_transitions: int
    unfold_s: float
    solve_s: float


@dataclass(frozen=True)
class AnalysisTrace:
    rows: tuple
    final_partition: object
    final_report: object

    @property
    def lower(self):
        return self.rows[-1].lower

    @property
    def upper(self):
        return self.rows[-1].upper

    @property
    def total_s(self):
        return self.rows[-1].elapsed_s

    def to_csv(self):
        header = (
            "iter,elapsed_s,lower,upper,splits,imdp_states,imdp_actions,"
            "imdp_transitions,unfold_s,solve_s"
        )
        lines = [header]
        for r in self.rows:
            lines.append(
                f"{r.iteration},{r.elapsed_s:.6f},{r.lower:.12g},"
                f"{r.upper:.12g},{r.splits},{r.imdp_states},"
                f"{r.imdp_actions},{r.imdp_transitions},"
                f"{r.unfold_s:.6f},{r.solve_s:.6f}"
            )
        return "\n".join(lines) + "\n"


def guided_split_targets(psi, reachable):
    """Positive-width cells touched by the reachable abstract states.

    reachable is the per-layer mask tuple; observation index i maps to
    model layer i + 1 (layer 0 is the anchor).
    """
    targets = []
    for i, row in enumerate(psi.cells):
        for j, cell in enumerate(row):
            if cell.hi > cell.lo and reachable[i + 1][j].any():
                targets.append((i, j))
    return targets


def all_split_targets(psi):
    """Every positive-width cell."""
    return [
        (i, j)
        for i, row in enumerate(psi.cells)
        for j, cell in enumerate(row)
        if cell.hi > cell.lo
    ]


def apply_splits(psi, targets):
    """Bisect every targeted cell; later indices first so they stay valid."""
    for i, j in sorted(targets, reverse=True):
        psi = psi.split_cell(i, j)
    return psi


def analyze(ctmc, omega, weights, config=AnalysisConfig()):
    """Run the abstraction-refinement loop and collect the trace.

    Iteration 1 uses the coarsest partition.  Termination is checked
    only between iterations: time budget exhausted, bound width at or
    below target, iteration cap reached, or nothing left to split.
    """
    omega.bind_check(ctmc.alphabet)
    cache = TransientBoundCache()
    psi = coarsest_partition(omega)
    parent_imdp = parent_psi = None
    rows = []
    pending_splits = 0
    start = time.monotonic()
    iteration = 0
    while True:
        iteration += 1
        t0 = time.monotonic()
        imdp = abstract(
            ctmc,
            omega,
            psi,
            eps=config.transient_tol,
            cache=cache,
            parent=parent_imdp,
            parent_psi=parent_psi,
        )
        pruned = restrict_reachable(imdp)
        unfold_s = time.monotonic() - t0
        t1 = time.monotonic()
        report = compute_bounds(
            pruned, weights, tol=config.vi_tol, direction=config.direction
        )
        solve_s = time.monotonic() - t1
        states, actions, transitions = pruned.sizes()
        rows.append(
            TraceRow(
                iteration=iteration,
                elapsed_s=time.monotonic() - start,
                lower=report.lower,
                upper=report.upper,
                splits=pending_splits,
                imdp_states=states,
                imdp_actions=actions,
                imdp_transitions=transitions,
                unfold_s=unfold_s,
                solve_s=solve_s,
            )
        )

        if time.monotonic() - start >= config.time_limit:
            break
        if (
            config.width_target is not None
            and report.upper - report.lower <= config.width_target
        ):
            break
        if config.max_iters is not None and iteration >= config.max_iters:
            break

        if config.mode == "guided":
            reach = reachable_under(pruned, report.guide_scheduler)
            targets = guided_split_targets(psi, reach)
        else:
            targets = all_split_targets(psi)
        if not targets:
            break
        parent_imdp, parent_psi = imdp, psi
        psi = apply_splits(psi, targets)
        pending_splits = len(targets)

    return AnalysisTrace(tuple(rows), psi, report)
