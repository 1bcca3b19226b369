"""Labeled continuous-time Markov chains and transient analysis.

A chain is stored as a jump distribution plus per-state exit rates; the
rate matrix R(s, s') = jump_probs[s, s'] * exit_rates[s] is derived on
demand.  Transient distributions are computed by uniformization with
Poisson truncation, which keeps every intermediate vector a proper
distribution (no negative entries).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import poisson

DEFAULT_TRANSIENT_TOL = 1e-10

# Uniformization rate is inflated slightly above the maximal exit rate so
# the uniformized jump matrix keeps a strictly positive diagonal.
_RATE_INFLATION = 1.0 + 1e-6


class ModelError(ValueError):
    """Raised for malformed or inconsistent chain definitions."""


@dataclass(frozen=True)
class Ctmc:
    """Finite labeled CTMC.

    Attributes
    ----------
    state_names : tuple of str
        State identifiers, index position is the state id used everywhere.
    initial : int
        Index of the initial state.
    jump_probs : (n, n) ndarray
        Row-stochastic jump distribution; rows of absorbing states are a
        Dirac self-loop by convention.
    exit_rates : (n,) ndarray
        Nonnegative exit rates; rate 0 marks an absorbing state.
    labels : tuple of frozenset of str
        Atomic propositions per state.
    """

    state_names: tuple
    initial: int
    jump_probs: np.ndarray
    exit_rates: np.ndarray
    labels: tuple
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.state_names)
        if self.jump_probs.shape != (n, n):
            raise ModelError("jump_probs shape does not match state count")
        if self.exit_rates.shape != (n,):
            raise ModelError("exit_rates shape does not match state count")
        if np.any(self.exit_rates < 0):
            raise ModelError("negative exit rate")
        if np.any(self.jump_probs < 0) or np.any(self.jump_probs > 1):
            raise ModelError("jump probability outside [0, 1]")
        if not np.allclose(self.jump_probs.sum(axis=1), 1.0, atol=1e-12):
            raise ModelError("jump distribution rows must sum to 1")
        if not 0 <= self.initial < n:
            raise ModelError("initial state out of range")
        self._index.update({name: i for i, name in enumerate(self.state_names)})
        self.jump_probs.setflags(write=False)
        self.exit_rates.setflags(write=False)

    @property
    def n_states(self):
        return len(self.state_names)

    @property
    def alphabet(self):
        """All atomic propositions appearing on any state."""
        aps = set()
        for lab in self.labels:
            aps |= lab
        return frozenset(aps)

    def state_index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"unknown state {name!r}") from None

    def rate_matrix(self):
        """Dense transition rate matrix R(s, s') = jump(s, s') * exit(s)."""
        R = self.jump_probs * self.exit_rates[:, None]
        # The Dirac self-loop convention for absorbing states carries rate 0
        # automatically, but zero it explicitly for clarity.
        R[self.exit_rates == 0.0] = 0.0
        return R

    def generator(self):
        """Infinitesimal generator R - diag(E)."""
        Q = self.rate_matrix()
        np.fill_diagonal(Q, np.diag(Q) - self.exit_rates)
        return Q

    def effective_exit_rates(self):
        """Exit rates discounting self-loops: E(s) * (1 - jump(s, s))."""
        return self.exit_rates * (1.0 - np.diag(self.jump_probs))

    def satisfying(self, formula):
        """Boolean vector of states satisfying an observation formula."""
        return np.array([formula.holds(lab) for lab in self.labels], dtype=bool)

    def absorbing_variant(self, absorb_mask):
        """Copy of the chain with the masked states made absorbing."""
        jp = self.jump_probs.copy()
        er = self.exit_rates.copy()
        jp[absorb_mask] = 0.0
        jp[absorb_mask, absorb_mask] = 1.0
        er[absorb_mask] = 0.0
        return Ctmc(self.state_names, self.initial, jp, er, self.labels)


def from_rates(names, initial, rates, labels):
    """Build a chain from named rate entries.

    Parameters
    ----------
    names : sequence of str
    initial : str
    rates : dict mapping (src, dst) names to positive rates
    labels : dict mapping state name to iterable of APs
    """
    idx = {name: i for i, name in enumerate(names)}
    n = len(names)
    R = np.zeros((n, n))
    for (src, dst), rate in rates.items():
        if rate < 0:
            raise ModelError(f"negative rate for {src} -> {dst}")
        R[idx[src], idx[dst]] = rate
    exit_rates = R.sum(axis=1)
    jump = np.zeros((n, n))
    for s in range(n):
        if exit_rates[s] > 0:
            jump[s] = R[s] / exit_rates[s]
        else:
            jump[s, s] = 1.0
    lab = tuple(frozenset(labels.get(name, ())) for name in names)
    return Ctmc(tuple(names), idx[initial], jump, exit_rates, lab)


def parse_ctmc(text):
    """Parse the line-oriented explicit CTMC format.

    Format::

        ctmc
        state <id> [label ...]
        init <id>
        rate <src> <dst> <positive decimal>
    """
    names, labels, rates = [], {}, {}
    initial = None
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not seen_header:
            if line != "ctmc":
                raise ModelError(f"line {lineno}: expected 'ctmc' header")
            seen_header = True
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "state":
            if len(parts) < 2:
                raise ModelError(f"line {lineno}: state needs an id")
            name = parts[1]
            if name in labels:
                raise ModelError(f"line {lineno}: duplicate state {name!r}")
            names.append(name)
            labels[name] = parts[2:]
        elif kind == "init":
            if len(parts) != 2:
                raise ModelError(f"line {lineno}: init needs one id")
            initial = parts[1]
        elif kind == "rate":
            if len(parts) != 4:
                raise ModelError(f"line {lineno}: rate needs src dst value")
            src, dst = parts[1], parts[2]
            for name in (src, dst):
                if name not in labels:
                    raise ModelError(f"line {lineno}: unknown state {name!r}")
            try:
                value = float(parts[3])
            except ValueError:
                raise ModelError(f"line {lineno}: bad rate {parts[3]!r}") from None
            if value <= 0:
                raise ModelError(f"line {lineno}: rate must be positive")
            if (src, dst) in rates:
                raise ModelError(f"line {lineno}: duplicate rate {src} -> {dst}")
            rates[(src, dst)] = value
        else:
            raise ModelError(f"line {lineno}: unknown directive {kind!r}")
    if not seen_header:
        raise ModelError("empty document")
    if initial is None:
        raise ModelError("missing init line")
    if initial not in labels:
        raise ModelError(f"unknown initial state {initial!r}")
    return from_rates(names, initial, rates, labels)


def serialize_ctmc(ctmc):
    """Inverse of :func:`parse_ctmc` (up to float formatting)."""
    lines = ["ctmc"]
    for name, labs in zip(ctmc.state_names, ctmc.labels):
        lines.append(" ".join(["state", name, *sorted(labs)]))
    lines.append(f"init {ctmc.state_names[ctmc.initial]}")
    R = ctmc.rate_matrix()
    for s in range(ctmc.n_states):
        for s2 in range(ctmc.n_states):
            if R[s, s2] > 0 and not (s == s2 and ctmc.exit_rates[s] == 0):
                lines.append(
                    f"rate {ctmc.state_names[s]} {ctmc.state_names[s2]} "
                    f"{float(R[s, s2]):.17g}"
                )
    return "\n".join(lines) + "\n"


def _poisson_weights(mean, eps):
    """Poisson pmf values 0..K with truncated tail mass below eps."""
    if mean <= 0.0:
        return np.array([1.0])
    hi = int(poisson.ppf(1.0 - 0.1 * eps, mean)) + 1
    weights = poisson.pmf(np.arange(hi + 1), mean)
    return weights


def transient_matrix(ctmc, t, eps=DEFAULT_TRANSIENT_TOL):
    """Full transient kernel K with K[s, s'] = Pr_s(t)(s').

    Uniformization: K = sum_k pois(k; lam*t) P^k with P the uniformized
    jump matrix at rate lam = max exit rate (slightly inflated).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = ctmc.n_states
    lam = float(np.max(ctmc.exit_rates)) * _RATE_INFLATION
    if t == 0.0 or lam == 0.0:
        return np.eye(n)
    P = np.eye(n) + ctmc.generator() / lam
    weights = _poisson_weights(lam * t, eps)
    acc = weights[0] * np.eye(n)
    power = np.eye(n)
    for w in weights[1:]:
        power = power @ P
        acc += w * power
    # Distribute the truncated tail onto the final power so rows stay
    # within eps of stochastic.
    acc += (1.0 - weights.sum()) * power
    return acc


def transient(ctmc, source, t, eps=DEFAULT_TRANSIENT_TOL):
    """Transient distribution Pr_source(t) as a dense vector."""
    dist = transient_matrix(ctmc, t, eps)[source]
    total = dist.sum()
    if abs(total - 1.0) > 1e-9:
        raise ArithmeticError(f"transient distribution sums to {total}")
    return dist


def reach_matrix(ctmc, duration, eps=DEFAULT_TRANSIENT_TOL):
    """All-pairs bounded reachability within `duration`.

    Entry [s, s'] is the probability to visit s' at some point within
    `duration` starting from s.  A single uniformization pass serves all
    target columns: the chains with target s' made absorbing differ from
    the base chain only in row s', so their matrix powers are obtained by
    forcing the diagonal back to 1 after each multiplication.
    """
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    n = ctmc.n_states
    lam = float(np.max(ctmc.exit_rates)) * _RATE_INFLATION
    if duration == 0.0 or lam == 0.0:
        return np.eye(n)
    P = np.eye(n) + ctmc.generator() / lam
    weights = _poisson_weights(lam * duration, eps)
    X = np.eye(n)
    acc = weights[0] * X
    for w in weights[1:]:
        X = P @ X
        np.fill_diagonal(X, 1.0)
        acc += w * X
    acc += (1.0 - weights.sum()) * X
    return np.clip(acc, 0.0, 1.0)


def _reach_vector(ctmc, target_mask, duration, eps):
    """P(reach target within duration) from every state, target absorbing."""
    if not np.any(target_mask):
        return np.zeros(ctmc.n_states)
    absorbed = ctmc.absorbing_variant(target_mask)
    K = transient_matrix(absorbed, duration, eps)
    return K[:, target_mask].sum(axis=1)


def bounded_reachability_vector(ctmc, target_mask, window, eps=DEFAULT_TRANSIENT_TOL):
    """P(occupy a target state at some time in [a, b]) from every state.

    Two phases: transient to a on the unmodified chain, then time-bounded
    reachability over b - a with the target made absorbing.  States in the
    target at time a count as reached.
    """
    a, b = window
    if not (0 <= a <= b):
        raise ValueError("window must satisfy 0 <= a <= b")
    target_mask = np.asarray(target_mask, dtype=bool)
    if not np.any(target_mask):
        warnings.warn("empty target set, reachability is 0", stacklevel=2)
        return np.zeros(ctmc.n_states)
    reach = _reach_vector(ctmc, target_mask, b - a, eps)
    if a == 0.0:
        return reach
    return transient_matrix(ctmc, a, eps) @ reach


def bounded_reachability(ctmc, source, target_mask, window, eps=DEFAULT_TRANSIENT_TOL):
    """Single-source version of :func:`bounded_reachability_vector`."""
    return float(bounded_reachability_vector(ctmc, target_mask, window, eps)[source])


def invariance(ctmc, state, tau):
    """P(no state-changing jump from `state` within tau).

    Self-loops do not leave the state, so the effective rate is
    E(s) * (1 - jump(s, s)).
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return float(np.exp(-ctmc.effective_exit_rates()[state] * tau))


def invariance_vector(ctmc, tau):
    """Per-state invariance probabilities over [0, tau]."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return np.exp(-ctmc.effective_exit_rates() * tau)


def weight_from_property(ctmc, target_mask, horizon, eps=DEFAULT_TRANSIENT_TOL):
    """State weights w(s) = P(reach target within horizon from s)."""
    target_mask = np.asarray(target_mask, dtype=bool)
    if not np.any(target_mask):
        warnings.warn("empty target set, all weights are 0", stacklevel=2)
        return np.zeros(ctmc.n_states)
    if horizon == 0.0:
        return target_mask.astype(float)
    return bounded_reachability_vector(ctmc, target_mask, (0.0, horizon), eps)
