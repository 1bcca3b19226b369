import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condreach.evidence import PreciseEvidence, parse_formula
from condreach.unfolding import (
    bayes_quotient_weight,
    condition,
    conditional_distribution,
    conditional_weight,
    evidence_likelihood,
    unfold_precise,
)

TRUE = parse_formula("true")


def _rho(*pairs):
    return PreciseEvidence(tuple((t, parse_formula(f)) for t, f in pairs))


def test_unfold_shapes(invent):
    rho = _rho((1.0, "nonempty"), (2.0, "empty"))
    chain = unfold_precise(invent, rho)
    assert chain.n_layers == 4  # 0, t1, t2, copy
    assert chain.times == (0.0, 1.0, 2.0, 2.0)
    np.testing.assert_array_equal(chain.kernels[-1], np.eye(3))
    assert not chain.reset_masks[0].any()
    np.testing.assert_array_equal(
        chain.reset_masks[1], np.array([True, False, False])
    )
    assert not chain.conditioned


def test_condition_zeroes_reset_rows(invent):
    chain = condition(unfold_precise(invent, _rho((1.0, "empty"))))
    assert chain.conditioned
    np.testing.assert_array_equal(chain.kernels[1][[1, 2]], 0.0)


def test_trivial_evidence_is_unconditional(invent, invent_weights):
    # `true` observations never reset, so the conditional weight equals
    # the plain expected weight of the transient distribution.
    from condreach.ctmc import transient

    rho = _rho((0.7, "true"), (1.3, "true"))
    got = conditional_weight(invent, rho, invent_weights)
    want = transient(invent, invent.initial, 1.3) @ invent_weights
    assert got == pytest.approx(want, abs=1e-12)
    assert evidence_likelihood(invent, rho) == pytest.approx(1.0, abs=1e-10)


def test_single_observation_closed_form(two_state):
    # P(up at t) = exp(-1.5 t); conditioning on "up" pins state a.
    w = np.array([0.25, 0.75])
    rho = _rho((0.4, "up"))
    assert evidence_likelihood(two_state, rho) == pytest.approx(
        math.exp(-0.6), abs=1e-10
    )
    assert conditional_weight(two_state, rho, w) == pytest.approx(0.25, abs=1e-12)
    post = conditional_distribution(two_state, rho)
    np.testing.assert_allclose(post, [1.0, 0.0], atol=1e-12)


def test_frozen_midpoint_values(invent, invent_weights):
    # Frozen oracle: midpoint instance of the 4-observation benchmark
    # evidence, cross-checked against the quotient route below.
    rho = _rho(
        (0.0, "nonempty"), (1.0, "nonempty"), (2.0, "empty"), (3.0, "nonempty")
    )
    assert conditional_weight(invent, rho, invent_weights) == pytest.approx(
        0.07862016331147531, abs=1e-12
    )
    assert evidence_likelihood(invent, rho) == pytest.approx(
        0.11548486256744492, abs=1e-12
    )


@settings(max_examples=40, deadline=None)
@given(
    t1=st.floats(0.05, 2.0),
    gap=st.floats(0.05, 2.0),
    f1=st.sampled_from(["empty", "nonempty", "true"]),
    f2=st.sampled_from(["empty", "nonempty", "true"]),
)
def test_fixpoint_agrees_with_bayes_quotient(
    invent, invent_weights, t1, gap, f1, f2
):
    # Two independent routes to the same conditional weight.
    rho = _rho((t1, f1), (t1 + gap, f2))
    a = conditional_weight(invent, rho, invent_weights)
    b = bayes_quotient_weight(invent, rho, invent_weights)
    assert a == pytest.approx(b, abs=1e-11)
    assert 0.0 <= a <= invent_weights.max() + 1e-12


def test_zero_likelihood_returns_zero(invent, invent_weights):
    # The initial state is nonempty, so observing empty at time 0 is
    # impossible.
    rho = _rho((0.0, "empty"))
    with pytest.warns(UserWarning):
        assert conditional_weight(invent, rho, invent_weights) == 0.0
    with pytest.warns(UserWarning):
        np.testing.assert_array_equal(conditional_distribution(invent, rho), 0.0)


def test_posterior_sums_to_one(invent):
    rho = _rho((0.5, "nonempty"), (1.5, "empty"))
    post = conditional_distribution(invent, rho)
    assert post.sum() == pytest.approx(1.0, abs=1e-10)
    assert post[0] == pytest.approx(1.0, abs=1e-10)  # only empty state


def test_rejects_negative_weights(invent):
    with pytest.raises(ValueError):
        conditional_weight(invent, _rho((1.0, "true")), np.array([1.0, -1.0, 0.0]))
