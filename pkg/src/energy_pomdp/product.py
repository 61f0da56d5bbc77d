"""Energy product: fold the resource level into the state space.

Product states are pairs ``(s, n)`` with ``1 <= n <= cap`` plus a sink that
absorbs every move which would exhaust the resource.  Only states reachable
from ``{(s, cap) : λ(s) > 0}`` are built.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np

from .model import Pomdp

SINK_NAME = "sink"


class LiftError(ValueError):
    """A base run cannot be lifted because it violates the energy objective."""

    def __init__(self, step: int, level: int):
        self.step = step
        self.level = level
        super().__init__(f"energy exhausted at step {step} (level {level})")


def energy_update(model: Pomdp, s: int, a: int, n: int) -> int:
    """One-step resource update ``min(cap, n + E(a, O(s)))``; may be <= 0."""
    return min(model.capacity, n + int(model.energy[a, model.obs[s]]))


def target_level(model: Pomdp, s: int, a: int, n: int) -> int:
    """Level of a target state after ``a`` in the analysis copy of the product."""
    return max(1, energy_update(model, s, a, n))


Row = tuple[tuple[int, ...], tuple[float, ...]]


@dataclass(eq=False)
class ProductPomdp:
    """Reachable part of the energy product of ``base``.

    ``transitions`` keeps the original outgoing edges of target states;
    ``dynamics`` is the analysis copy in which a target only moves to the same
    base state (at its updated level) and costs nothing.  Everything else
    (solvers, simulation) uses ``dynamics``.
    """

    base: Pomdp
    pairs: list[tuple[int, int]]  # (base state, energy); sink is (-1, 0)
    sink: int | None
    transitions: list[list[Row]]
    initial: dict[int, float]
    energy_enabled: bool = True
    targets: frozenset[int] = field(init=False)
    obs: list[int] = field(init=False)
    dynamics: list[list[Row]] = field(init=False)
    cum_probs: list[list[tuple[float, ...]]] = field(init=False)
    cost: np.ndarray = field(init=False)
    index: dict[tuple[int, int], int] = field(init=False)

    def __post_init__(self):
        base = self.base
        self.index = {pair: i for i, pair in enumerate(self.pairs)}
        self.obs = [base.n_obs if i == self.sink else int(base.obs[s]) for i, (s, _) in enumerate(self.pairs)]
        self.targets = frozenset(i for i, (s, _) in enumerate(self.pairs) if i != self.sink and s in base.targets)
        cost = np.ones((len(self.pairs), base.n_actions), dtype=np.int64)
        for i, (s, _) in enumerate(self.pairs):
            if i != self.sink:
                cost[i] = base.cost[s]
        self.cost = cost
        self.dynamics = []
        for i, rows in enumerate(self.transitions):
            if i in self.targets:
                self.dynamics.append([((self._target_step(i, a),), (1.0,)) for a in range(base.n_actions)])
            else:
                self.dynamics.append(rows)
        self.cum_probs = [[tuple(accumulate(p)) for _, p in rows] for rows in self.dynamics]
        self._init_states = tuple(sorted(s for s, p in self.initial.items() if p > 0))
        self._init_cum = tuple(accumulate(self.initial[s] for s in self._init_states))

    def _target_step(self, i: int, a: int) -> int:
        # Targets never leave the target set, but their level still follows
        # EnUp (floored at 1) so that supports stay energy-homogeneous.
        if not self.energy_enabled:
            return i
        s, n = self.pairs[i]
        return self.index[(s, target_level(self.base, s, a, n))]

    def sample_initial(self, rng: random.Random) -> int:
        cum = self._init_cum
        k = bisect_right(cum, rng.random() * cum[-1])
        return self._init_states[min(k, len(cum) - 1)]

    def sample_next(self, s: int, a: int, rng: random.Random) -> int:
        cum = self.cum_probs[s][a]
        succ = self.dynamics[s][a][0]
        if len(succ) == 1:
            return succ[0]
        k = bisect_right(cum, rng.random() * cum[-1])
        return succ[min(k, len(succ) - 1)]

    @property
    def n_states(self) -> int:
        return len(self.pairs)

    @property
    def n_actions(self) -> int:
        return self.base.n_actions

    @property
    def n_obs(self) -> int:
        return self.base.n_obs + 1

    @property
    def capacity(self) -> int:
        return self.base.capacity

    def analysis_cost(self, i: int, a: int) -> int:
        """Cost used for total-cost accounting: zero once a target is hit."""
        return 0 if i in self.targets else int(self.cost[i, a])

    def base_state(self, i: int) -> int:
        return self.pairs[i][0]

    def energy(self, i: int) -> int:
        return self.pairs[i][1]

    def name(self, i: int) -> str:
        if i == self.sink:
            return SINK_NAME
        s, n = self.pairs[i]
        return f"{self.base.state_names[s]}@{n}" if self.energy_enabled else self.base.state_names[s]

    def obs_name(self, z: int) -> str:
        return SINK_NAME if z == self.base.n_obs else self.base.obs_names[z]

    def to_pomdp(self) -> Pomdp:
        """Export as a plain model (capacity 0) for inspection or emission."""
        n, n_a = self.n_states, self.n_actions
        trans = np.zeros((n, n_a, n))
        for i, rows in enumerate(self.transitions):
            for a, (succ, probs) in enumerate(rows):
                trans[i, a, list(succ)] = probs
        initial = np.zeros(n)
        for i, p in self.initial.items():
            initial[i] = p
        return Pomdp(
            state_names=tuple(self.name(i).replace("@", "_e") for i in range(n)),
            action_names=self.base.action_names,
            obs_names=tuple(self.base.obs_names) + ((SINK_NAME,) if self.sink is not None else ()),
            transition=trans,
            obs=np.array(self.obs),
            initial=initial,
            cost=self.cost,
            energy=np.zeros((n_a, self.base.n_obs + (self.sink is not None)), dtype=np.int64),
            capacity=0,
            targets=self.targets,
        )


def build_product(model: Pomdp) -> ProductPomdp:
    """Breadth-first construction of the reachable energy product."""
    cap = model.capacity
    if cap < 1:
        raise ValueError("capacity 0 disables the energy objective; use as_product() instead")
    n_a = model.n_actions
    pairs: list[tuple[int, int]] = []
    index: dict[tuple[int, int], int] = {}
    SINK = (-1, 0)

    def intern(pair):
        if pair not in index:
            index[pair] = len(pairs)
            pairs.append(pair)
            queue.append(pair)
        return index[pair]

    queue: deque = deque()
    initial = {}
    for s in np.flatnonzero(model.initial > 0):
        initial[intern((int(s), cap))] = float(model.initial[s])

    rows: dict[int, list[Row]] = {}
    while queue:
        pair = queue.popleft()
        i = index[pair]
        if pair == SINK:
            continue
        s, n = pair
        out = []
        for a in range(n_a):
            n2 = energy_update(model, s, a, n)
            if n2 >= 1:
                succ = model.successors(s, a)
                out.append((tuple(intern((t, n2)) for t, _ in succ), tuple(p for _, p in succ)))
            else:
                out.append(((intern(SINK),), (1.0,)))
        rows[i] = out
        if s in model.targets:
            for a in range(n_a):
                intern((s, target_level(model, s, a, n)))
    sink = index.get(SINK)
    if sink is not None:
        rows[sink] = [((sink,), (1.0,))] * n_a
    return ProductPomdp(
        base=model,
        pairs=pairs,
        sink=sink,
        transitions=[rows[i] for i in range(len(pairs))],
        initial=initial,
    )


def as_product(model: Pomdp) -> ProductPomdp:
    """Product for ``cap >= 1``; otherwise a sink-free copy with energy 0."""
    if model.capacity >= 1:
        return build_product(model)
    n = model.n_states
    transitions = [[tuple(zip(*model.successors(s, a))) for a in range(model.n_actions)] for s in range(n)]
    return ProductPomdp(
        base=model,
        pairs=[(s, 0) for s in range(n)],
        sink=None,
        transitions=transitions,
        initial={int(s): float(model.initial[s]) for s in np.flatnonzero(model.initial > 0)},
        energy_enabled=False,
    )


def lift_run(model: Pomdp, run: list[int]) -> list:
    """Lift a base run ``[s0, a1, s1, ...]`` to ``[(s0, cap), a1, (s1, n1), ...]``.

    Raises :class:`LiftError` if the energy level drops to zero or below
    before the first target state.
    """
    if not run:
        raise ValueError("a run needs at least its initial state")
    n = model.capacity
    lifted: list = [(run[0], n)]
    reached = run[0] in model.targets
    for k in range(1, len(run), 2):
        a, s_prev, s = run[k], run[k - 1], run[k + 1]
        n = energy_update(model, s_prev, a, n)
        step = (k + 1) // 2
        if n <= 0 and not reached:
            raise LiftError(step, n)
        lifted.extend([a, (s, n)])
        reached = reached or s in model.targets
    return lifted


def project_run(run: list) -> tuple[list[int], list[int]]:
    """Inverse of :func:`lift_run`: returns the base run and the energy trace."""
    base: list[int] = []
    levels: list[int] = []
    for k, item in enumerate(run):
        if k % 2 == 0:
            s, n = item
            base.append(s)
            levels.append(n)
        else:
            base.append(item)
    return base, levels
