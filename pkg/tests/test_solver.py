import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from condreach.abstraction import abstract, restrict_reachable
from condreach.evidence import coarsest_partition
from condreach.solver import (
    BoundsReport,
    Scheduler,
    SolverError,
    audit_consistency,
    compute_bounds,
    evaluate_scheduler,
    greedy_distribution,
    repair_consistency,
    robust_value_iteration,
)
from condreach.unfolding import conditional_weight


def _random_intervals(rng, k):
    """Feasible (lower, upper) interval rows over k successors."""
    while True:
        lower = rng.uniform(0.0, 0.6, k)
        upper = lower + rng.uniform(0.0, 1.0, k)
        if lower.sum() <= 1.0 <= upper.sum():
            return lower, np.minimum(upper, 1.0)


def _lp_optimum(lower, upper, values, maximize):
    c = -values if maximize else values
    res = linprog(
        c,
        A_eq=np.ones((1, len(values))),
        b_eq=[1.0],
        bounds=list(zip(lower, upper)),
        method="highs",
    )
    assert res.success
    return -res.fun if maximize else res.fun


def test_greedy_matches_lp_oracle():
    rng = np.random.default_rng(123)
    for _ in range(300):
        k = rng.integers(2, 4)
        lower, upper = _random_intervals(rng, k)
        values = rng.uniform(-1.0, 2.0, k)
        for maximize in (True, False):
            p = greedy_distribution(lower, upper, values, maximize)
            assert p.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(p >= lower - 1e-12) and np.all(p <= upper + 1e-12)
            assert p @ values == pytest.approx(
                _lp_optimum(lower, upper, values, maximize), abs=1e-9
            )


def test_greedy_broadcasts_over_rows():
    rng = np.random.default_rng(5)
    lower = np.stack([_random_intervals(rng, 3)[0] for _ in range(4)])
    upper = np.clip(lower + 0.5, None, 1.0)
    values = np.array([0.3, 0.9, 0.1])
    p = greedy_distribution(lower, upper, values, True)
    assert p.shape == (4, 3)
    for row_lo, row in zip(lower, p):
        q = greedy_distribution(row_lo, np.clip(row_lo + 0.5, None, 1.0),
                                values, True)
        np.testing.assert_allclose(row, q, atol=1e-12)


def test_degenerate_imdp_reproduces_exact_value(invent, invent_weights):
    # All-point partition: one realizable kernel per step, so robust VI
    # collapses to the exact conditional weight.
    from condreach.evidence import ImpreciseEvidence, TimeSet, parse_formula

    times = (0.4, 1.2, 2.6)
    forms = ("nonempty", "nonempty", "nonempty")
    omega = ImpreciseEvidence(
        tuple(
            (TimeSet.point(t), parse_formula(f)) for t, f in zip(times, forms)
        )
    )
    imdp = restrict_reachable(
        abstract(invent, omega, coarsest_partition(omega))
    )
    report = compute_bounds(imdp, invent_weights)
    exact = conditional_weight(invent, omega.to_precise(), invent_weights)
    assert report.lower == pytest.approx(exact, abs=1e-9)
    assert report.upper == pytest.approx(exact, abs=1e-9)


def test_bounds_order_and_direction(invent, invent1, invent_weights):
    imdp = restrict_reachable(
        abstract(invent, invent1, coarsest_partition(invent1))
    )
    rmax = compute_bounds(imdp, invent_weights, direction="max")
    rmin = compute_bounds(imdp, invent_weights, direction="min")
    assert rmax.lower <= rmax.upper
    assert rmin.lower <= rmin.upper
    # The min problem's optimum cannot exceed the max problem's.
    assert rmin.lower <= rmax.upper
    with pytest.raises(ValueError):
        compute_bounds(imdp, invent_weights, direction="sideways")


def test_repaired_scheduler_is_consistent(invent, invent1, invent_weights):
    imdp = restrict_reachable(
        abstract(invent, invent1, coarsest_partition(invent1))
    )
    report = compute_bounds(imdp, invent_weights)
    assert audit_consistency(imdp, report.repaired_scheduler)
    # Evaluating a consistent scheduler pessimistically stays below the
    # robust optimum.
    _, val = evaluate_scheduler(
        imdp, invent_weights, report.repaired_scheduler, inner="min"
    )
    assert val <= report.upper + 1e-9


def _toy_imdp(n_mid=2):
    """4-layer, 3-state interval MDP with full-support uniform intervals.

    Layer 1 has a single cell whose three states are all reachable, so a
    repair vote there has three voters; they choose among layer 2's two
    cells.
    """
    from condreach.abstraction import IntervalMdp
    from condreach.evidence import TimeSet

    n = 3
    layers = (
        (TimeSet.point(0.0),),
        (TimeSet.of((1.0, 1.5)),),
        tuple(TimeSet.of((2.0 + j, 2.5 + j)) for j in range(n_mid)),
        (TimeSet.point(9.0),),
    )
    lower = []
    upper = []
    for i in range(3):
        nc, nc2 = len(layers[i]), len(layers[i + 1])
        lower.append(np.zeros((nc, nc2, n, n)))
        upper.append(np.ones((nc, nc2, n, n)))
    return IntervalMdp(
        layers=layers,
        lower=tuple(lower),
        upper=tuple(upper),
        reset_masks=tuple(np.zeros(n, bool) for _ in layers),
        initial=0,
        n_states=n,
        active=tuple(np.ones((len(row), n), bool) for row in layers),
    )


def _toy_sched(mid_votes, n_mid=2):
    return Scheduler(
        (
            np.array([[0, 0, 0]]),
            np.array([mid_votes]),
            np.zeros((n_mid, 3), dtype=int),
        )
    )


def test_repair_majority_vote():
    # Mixed votes 0/1/1 inside one shared cell repair to the majority 1.
    imdp = _toy_imdp()
    repaired = repair_consistency(imdp, _toy_sched([0, 1, 1]))
    np.testing.assert_array_equal(repaired.choices[1][0], [1, 1, 1])
    assert audit_consistency(imdp, repaired)


def test_repair_tie_breaks_low():
    imdp = _toy_imdp(n_mid=3)
    # With three distinct votes the lowest action index wins.
    repaired = repair_consistency(imdp, _toy_sched([1, 0, 2], n_mid=3))
    assert set(repaired.choices[1][0]) == {0}


def test_audit_detects_inconsistency():
    imdp = _toy_imdp()
    assert not audit_consistency(imdp, _toy_sched([0, 1, 1]))


def test_bounds_report_validates_order():
    s = Scheduler((np.zeros((1, 1), int),))
    with pytest.raises(SolverError):
        BoundsReport(lower=0.9, upper=0.1, guide_scheduler=s,
                     repaired_scheduler=s)


def test_zero_likelihood_evidence_raises(invent, invent_weights):
    # Initial state is nonempty; an empty observation at time 0 can never
    # be satisfied, so the reset loop does not contract.
    from condreach.evidence import ImpreciseEvidence, TimeSet, parse_formula

    omega = ImpreciseEvidence(
        ((TimeSet.point(0.0), parse_formula("empty")),)
    )
    imdp = restrict_reachable(
        abstract(invent, omega, coarsest_partition(omega))
    )
    with pytest.raises(SolverError):
        compute_bounds(imdp, invent_weights)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_robust_vi_monotone_in_inner(invent, invent1, invent_weights, seed):
    # For the same outer direction, friendly nature never does worse
    # than adversarial nature.
    imdp = restrict_reachable(
        abstract(invent, invent1, coarsest_partition(invent1))
    )
    vmax, _ = robust_value_iteration(imdp, invent_weights, "max", "max")
    vmin, _ = robust_value_iteration(imdp, invent_weights, "max", "min")
    assert vmax[0][0, imdp.initial] >= vmin[0][0, imdp.initial] - 1e-9
