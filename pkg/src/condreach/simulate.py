"""Monte-Carlo baselines: path simulation, rejection conditioning, and
the sampled-instance envelope."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctmc import DEFAULT_TRANSIENT_TOL
from .evidence import is_instance, sample_instance
from .unfolding import conditional_weight


def simulate_states_at(ctmc, checkpoints, n, rng):
    """States of n independent paths at the given checkpoint times.

    Returns an (n, len(checkpoints)) int array.  Paths use exponential
    residence times at the full exit rate; self-loop jumps re-enter the
    same state, which leaves every checkpoint reading unchanged.  The
    state at a jump instant is the post-jump state.
    """
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(rng)
    checkpoints = np.asarray(checkpoints, dtype=float)
    if checkpoints.size and np.any(np.diff(checkpoints) < 0):
        raise ValueError("checkpoints must be sorted")
    m = checkpoints.size
    out = np.empty((n, m), dtype=np.int64)
    state = np.full(n, ctmc.initial, dtype=np.int64)
    now = np.zeros(n)
    ptr = np.zeros(n, dtype=np.int64)
    jump_cdf = np.cumsum(ctmc.jump_probs, axis=1)
    rates = ctmc.exit_rates
    alive = np.arange(n)
    while alive.size:
        r = rates[state[alive]]
        dt = np.full(alive.size, np.inf)
        moving = r > 0
        dt[moving] = rng.exponential(1.0 / r[moving])
        nxt = now[alive] + dt
        # Record every checkpoint passed before the next jump fires.
        while True:
            rec = ptr[alive] < m
            rec[rec] = checkpoints[ptr[alive][rec]] < nxt[rec]
            if not rec.any():
                break
            idx = alive[rec]
            out[idx, ptr[idx]] = state[idx]
            ptr[idx] += 1
        done = ptr[alive] >= m
        jumping = ~done
        idx = alive[jumping]
        if idx.size:
            u = rng.random(idx.size)
            state[idx] = (u[:, None] < jump_cdf[state[idx]]).argmax(axis=1)
            now[idx] = nxt[jumping]
        alive = idx
    return out


@dataclass(frozen=True)
class RejectionEstimate:
    value: float
    sigma: float
    acceptance_rate: float
    n_accepted: int


def rejection_conditional_weight(ctmc, rho, weights, n, rng):
    """Conditional expected weight by keeping evidence-consistent paths.

    Paths are sampled forward; a path is accepted when its state at every
    observation time satisfies the observed formula.  The estimate is the
    mean weight of the final-time state over accepted paths, with the
    binomial-normal standard error of that mean.
    """
    weights = np.asarray(weights, dtype=float)
    states = simulate_states_at(ctmc, rho.times, n, rng)
    masks = [ctmc.satisfying(obs) for obs in rho.formulas]
    accept = np.ones(len(states), dtype=bool)
    for k, mask in enumerate(masks):
        accept &= mask[states[:, k]]
    n_acc = int(accept.sum())
    if n_acc == 0:
        return RejectionEstimate(0.0, np.inf, 0.0, 0)
    vals = weights[states[accept, -1]]
    sigma = float(vals.std(ddof=1) / np.sqrt(n_acc)) if n_acc > 1 else np.inf
    return RejectionEstimate(float(vals.mean()), sigma, n_acc / n, n_acc)


def empirical_likelihood(ctmc, rho, n, rng):
    """Acceptance-rate estimate of the evidence probability with its sigma."""
    states = simulate_states_at(ctmc, rho.times, n, rng)
    accept = np.ones(len(states), dtype=bool)
    for k, obs in enumerate(rho.formulas):
        accept &= ctmc.satisfying(obs)[states[:, k]]
    rate = accept.mean()
    sigma = float(np.sqrt(max(rate * (1.0 - rate), 1e-12) / n))
    return float(rate), sigma


@dataclass(frozen=True)
class SampleEnvelope:
    samples: tuple  # (instance, exact conditional weight) pairs

    @property
    def min(self):
        return min(v for _, v in self.samples)

    @property
    def max(self):
        return max(v for _, v in self.samples)

    def to_csv(self):
        d = len(self.samples[0][0])
        header = "sample_idx," + ",".join(f"t_{i + 1}" for i in range(d))
        lines = [header + ",value"]
        for k, (rho, value) in enumerate(self.samples):
            times = ",".join(f"{t:.12g}" for t in rho.times)
            lines.append(f"{k},{times},{value:.12g}")
        return "\n".join(lines) + "\n"


def sample_envelope(ctmc, omega, weights, n, seed=0, eps=DEFAULT_TRANSIENT_TOL):
    """Exact conditional weights of n sampled precise instances.

    Every value is a feasible point of the optimization over instances,
    so the envelope maximum is a lower bound on the true supremum.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        rho = sample_instance(omega, rng)
        assert is_instance(rho, omega)
        samples.append((rho, conditional_weight(ctmc, rho, weights, eps)))
    return SampleEnvelope(tuple(samples))
