import numpy as np
import pytest

from condreach.ctmc import from_rates, parse_ctmc, weight_from_property
from condreach.evidence import parse_evidence, parse_formula
from condreach.fixtures import fixture_text


@pytest.fixture(scope="session")
def invent():
    return parse_ctmc(fixture_text("invent.ctmc"))


@pytest.fixture(scope="session")
def invent_weights(invent):
    # P(empty inventory within time 0.1), the benchmark weight function.
    target = invent.satisfying(parse_formula("empty"))
    return weight_from_property(invent, target, 0.1)


@pytest.fixture(scope="session")
def invent1():
    return parse_evidence(fixture_text("invent1.evidence"))


@pytest.fixture(scope="session")
def invent2():
    return parse_evidence(fixture_text("invent2.evidence"))


@pytest.fixture(scope="session")
def two_state():
    # a -> b at rate 1.5, b absorbing; closed-form transients.
    return from_rates(
        ["a", "b"], "a", {("a", "b"): 1.5}, {"a": ["up"], "b": ["down"]}
    )


@pytest.fixture(scope="session")
def random_chain():
    """Factory for random irreducible-ish labeled chains."""

    def make(rng, n, max_rate=10.0, aps=("a", "b")):
        names = [f"s{i}" for i in range(n)]
        rates = {}
        for i in range(n):
            # Ring edge keeps every state non-absorbing and connected.
            rates[(names[i], names[(i + 1) % n])] = rng.uniform(1e-3, max_rate)
            for j in range(n):
                if j != i and rng.random() < 0.4:
                    rates[(names[i], names[j])] = rng.uniform(1e-3, max_rate)
        labels = {
            name: [ap for ap in aps if rng.random() < 0.5] for name in names
        }
        return from_rates(names, names[0], rates, labels)

    return make
