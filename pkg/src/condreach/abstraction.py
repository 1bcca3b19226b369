"""Interval MDP abstraction of the conditioned unfolding.

Abstract states are (layer, cell, CTMC state) triples.  Layer 0 is the
anchor {0}, layers 1..d hold the partition cells of the d observation
windows, and the final layer is the terminal copy.  An action picks the
next-layer cell; its interval distribution over successor states brackets
every transient kernel realizable by times inside the two cells.

Bounds depend on the two cells only through the elapsed-time gap they
admit, so a cache keyed by (min gap, max gap) is shared across layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ctmc import (
    DEFAULT_TRANSIENT_TOL,
    invariance_vector,
    reach_matrix,
    transient_matrix,
)

# Floating-point slack for lower > upper inversions on near-point cells.
_NOISE = 1e-9


class AbstractionError(ArithmeticError):
    """Raised when computed interval bounds are numerically infeasible."""


@dataclass(frozen=True)
class TransientBoundCache:
    """Transparent cache of (lower, upper) bound matrices per gap signature.

    The key is the exact (min gap, max gap, eps) triple; cell endpoint
    arithmetic is exact on representable binary fractions, so evidences
    with uniform window spacing hit the cache across layers.
    """

    entries: dict = field(default_factory=dict)

    def bound_matrices(self, ctmc, gap, eps):
        key = (float(gap[0]), float(gap[1]), float(eps))
        hit = self.entries.get(key)
        if hit is None:
            hit = _compute_bound_matrices(ctmc, gap, eps)
            self.entries[key] = hit
        return hit


def _compute_bound_matrices(ctmc, gap, eps):
    """Sound bound matrices for all state pairs over an elapsed-time gap.

    For elapsed time tau in [g_min, g_max]:
      upper[s, s'] = P(visit s' at some point in [g_min, g_max] from s),
      lower[s, s'] = P(in s' at g_min, no jump until g_max from s),
    both of which bracket the transient probability at every tau.
    """
    g_min, g_max = gap
    if not 0 <= g_min <= g_max:
        raise ValueError("gap must satisfy 0 <= min <= max")
    K = transient_matrix(ctmc, g_min, eps)
    if g_max == g_min:
        K = np.clip(K, 0.0, 1.0)
        return K, K
    spread = g_max - g_min
    upper = np.clip(K @ reach_matrix(ctmc, spread, eps), 0.0, 1.0)
    lower = np.clip(K * invariance_vector(ctmc, spread)[None, :], 0.0, 1.0)
    bad = lower - upper
    if np.any(bad > _NOISE):
        raise AbstractionError("lower bound exceeds upper beyond tolerance")
    mid = 0.5 * (lower + upper)
    noisy = bad > 0
    lower = np.where(noisy, mid, lower)
    upper = np.where(noisy, mid, upper)
    lower.setflags(write=False)
    upper.setflags(write=False)
    return lower, upper


@dataclass(frozen=True)
class IntervalMdp:
    """Layered interval MDP.

    Attributes
    ----------
    layers : tuple
        Per layer, the tuple of TimeSet cells (layer 0 and the final
        layer hold a single anchor cell each).
    lower, upper : tuple of ndarray
        Per layer i < last, arrays of shape
        (n_cells_i, n_cells_{i+1}, n_states, n_states); entry
        [j, j2, s, s'] bounds the transition probability of abstract
        state (i, j, s) under action j2 into (i+1, j2, s').
    reset_masks : tuple of ndarray
        Per layer, the states violating that layer's observation; such
        abstract states carry a single probability-1 redirect to the
        initial abstract state instead of their interval rows.
    initial : int
        CTMC initial state; the initial abstract state is (0, 0, initial).
    active : tuple of ndarray
        Per layer, (n_cells, n_states) masks of materialized states; all
        True until restrict_reachable prunes.
    """

    layers: tuple
    lower: tuple
    upper: tuple
    reset_masks: tuple
    initial: int
    n_states: int
    active: tuple

    @property
    def n_layers(self):
        return len(self.layers)

    def n_cells(self, i):
        return len(self.layers[i])

    def sizes(self):
        """(states, actions, transitions) over active abstract states.

        Terminal-layer states are absorbing and contribute no actions or
        transitions; reset states contribute one of each.
        """
        states = sum(int(a.sum()) for a in self.active)
        actions = transitions = 0
        for i in range(self.n_layers - 1):
            act = self.active[i]
            reset = self.reset_masks[i]
            n_reset = int(act[:, reset].sum())
            actions += n_reset
            transitions += n_reset
            n_next = self.n_cells(i + 1)
            live = act[:, ~reset]
            actions += int(live.sum()) * n_next
            out_deg = (self.upper[i][:, :, ~reset, :] > 0).sum(axis=(1, 3))
            transitions += int(out_deg[live].sum())
        return states, actions, transitions


def _cell_parent_map(cells, parent_cells):
    """Index of the unique parent cell containing each child cell."""
    mapping = []
    for cell in cells:
        hits = [
            pj
            for pj, p in enumerate(parent_cells)
            if p.lo <= cell.lo and cell.hi <= p.hi
        ]
        if len(hits) != 1:
            raise AbstractionError("cell does not nest inside a unique parent")
        mapping.append(hits[0])
    return mapping


def abstract(
    ctmc,
    omega,
    psi,
    eps=DEFAULT_TRANSIENT_TOL,
    cache=None,
    parent=None,
    parent_psi=None,
):
    """Build the interval MDP for evidence omega under partition psi.

    When the previous iteration's model and partition are supplied, each
    child interval is intersected with its parent's: both bracket the
    same set of realizable transient probabilities, so the intersection
    stays sound and makes refinement nesting exact by construction.
    """
    omega.bind_check(ctmc.alphabet)
    if cache is None:
        cache = TransientBoundCache()
    n = ctmc.n_states
    layers = (
        (psi.anchor_zero,),
        *psi.cells,
        (psi.anchor_star,),
    )
    reset_masks = [np.zeros(n, dtype=bool)]
    for obs in omega.formulas:
        reset_masks.append(~ctmc.satisfying(obs))
    reset_masks.append(np.zeros(n, dtype=bool))

    parent_maps = None
    if parent is not None:
        parent_maps = [[0]]
        for row, p_row in zip(psi.cells, parent_psi.cells):
            parent_maps.append(_cell_parent_map(row, p_row))
        parent_maps.append([0])

    lower, upper = [], []
    n_layers = len(layers)
    for i in range(n_layers - 1):
        nc, nc2 = len(layers[i]), len(layers[i + 1])
        L = np.empty((nc, nc2, n, n))
        U = np.empty((nc, nc2, n, n))
        if i == n_layers - 2:
            # Terminal copy step: exact identity.
            L[:] = U[:] = np.eye(n)
        else:
            for j, cell in enumerate(layers[i]):
                for j2, cell2 in enumerate(layers[i + 1]):
                    gap = (cell2.lo - cell.hi, cell2.hi - cell.lo)
                    L[j, j2], U[j, j2] = cache.bound_matrices(ctmc, gap, eps)
            if parent is not None:
                pm, pm2 = parent_maps[i], parent_maps[i + 1]
                pL = parent.lower[i][np.ix_(pm, pm2)]
                pU = parent.upper[i][np.ix_(pm, pm2)]
                L = np.maximum(L, pL)
                U = np.minimum(U, pU)
                bad = L - U
                if np.any(bad > _NOISE):
                    raise AbstractionError(
                        "parent intersection produced an empty interval"
                    )
                mid = 0.5 * (L + U)
                noisy = bad > 0
                L = np.where(noisy, mid, L)
                U = np.where(noisy, mid, U)
        _check_feasible(L, U, reset_masks[i], i)
        L.setflags(write=False)
        U.setflags(write=False)
        lower.append(L)
        upper.append(U)

    active = tuple(
        np.ones((len(row), n), dtype=bool) for row in layers
    )
    return IntervalMdp(
        layers=layers,
        lower=tuple(lower),
        upper=tuple(upper),
        reset_masks=tuple(reset_masks),
        initial=ctmc.initial,
        n_states=n,
        active=active,
    )


def _check_feasible(L, U, reset, layer):
    """Every non-reset row must admit a distribution inside its intervals."""
    lo_sum = L[:, :, ~reset, :].sum(axis=3)
    hi_sum = U[:, :, ~reset, :].sum(axis=3)
    if np.any(lo_sum > 1.0 + _NOISE) or np.any(hi_sum < 1.0 - _NOISE):
        j, j2, s = np.unravel_index(
            np.argmax(np.maximum(lo_sum - 1.0, 1.0 - hi_sum)), lo_sum.shape
        )
        raise AbstractionError(
            f"infeasible interval row at layer {layer}, cell {j}, "
            f"action {j2}, state row {s}"
        )


def reachable_states(imdp, scheduler=None):
    """Per-layer masks of abstract states forward-reachable from the start.

    With a scheduler, only chosen actions are followed; otherwise every
    action is explored.  Reset states redirect to the initial abstract
    state, which is reachable by definition, so one forward pass suffices.
    """
    reach = [np.zeros_like(a) for a in imdp.active]
    reach[0][0, imdp.initial] = True
    for i in range(imdp.n_layers - 1):
        U = imdp.upper[i]
        reset = imdp.reset_masks[i]
        for j in range(imdp.n_cells(i)):
            here = reach[i][j] & ~reset
            if not here.any():
                continue
            for j2 in range(imdp.n_cells(i + 1)):
                if scheduler is None:
                    rows = here
                else:
                    rows = here & (scheduler.choices[i][j] == j2)
                if rows.any():
                    reach[i + 1][j2] |= (U[j, j2][rows] > 0).any(axis=0)
    return tuple(reach)


def restrict_reachable(imdp):
    """Prune abstract states unreachable under any action.

    Only the active masks change; bounds arrays are shared, so values of
    surviving states are untouched.
    """
    reach = reachable_states(imdp)
    active = tuple(a & r for a, r in zip(imdp.active, reach))
    return IntervalMdp(
        layers=imdp.layers,
        lower=imdp.lower,
        upper=imdp.upper,
        reset_masks=imdp.reset_masks,
        initial=imdp.initial,
        n_states=imdp.n_states,
        active=active,
    )


def debug_dump(imdp, state_names=None):
    """Deterministic one-line-per-transition text dump for golden tests."""
    if state_names is None:
        state_names = [str(s) for s in range(imdp.n_states)]
    lines = []
    for i in range(imdp.n_layers - 1):
        reset = imdp.reset_masks[i]
        for j in range(imdp.n_cells(i)):
            for s in range(imdp.n_states):
                if not imdp.active[i][j, s]:
                    continue
                if reset[s]:
                    lines.append(
                        f"<{state_names[s]},{i},{j}> --reset--> "
                        f"<{state_names[imdp.initial]},0,0> [1,1]"
                    )
                    continue
                for j2 in range(imdp.n_cells(i + 1)):
                    L = imdp.lower[i][j, j2, s]
                    U = imdp.upper[i][j, j2, s]
                    for s2 in range(imdp.n_states):
                        if U[s2] > 0:
                            lines.append(
                                f"<{state_names[s]},{i},{j}> --{j2}--> "
                                f"<{state_names[s2]},{i + 1},{j2}> "
                                f"[{L[s2]:.12g},{U[s2]:.12g}]"
                            )
    return "\n".join(lines) + "\n"
