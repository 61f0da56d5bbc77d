"""RTDP-Bel on the energy product, restricted to allowed actions.

Values are stored per discretized belief (probabilities rounded to
multiples of ``1/B``, energy appended).  A trial follows the greedy action
from a sampled hidden state, backing up the value of every belief it visits.
"""

from __future__ import annotations

import io
import math
import random
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .belief import Belief, BeliefCache, DiscreteKey, belief_key, key_to_vector, vector_to_key
from .policy import ContractViolation, Policy, uniform_choice
from .product import ProductPomdp
from .qualitative import AllowedTable
from .rng import stream

DEFAULT_PRECISION = 20
DEFAULT_CUTOFF = 1000

Heuristic = Callable[[Belief], float]


def zero_heuristic(b: Belief) -> float:
    return 0.0


class ValueTable:
    """Map from discretized beliefs to cost-to-go estimates."""

    def __init__(self, precision: int, capacity: int, n_base: int):
        self.precision = precision
        self.capacity = capacity
        self.n_base = n_base
        self.values: dict[DiscreteKey, float] = {}
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, key: DiscreteKey) -> bool:
        return key in self.values

    def __getitem__(self, key: DiscreteKey) -> float:
        return self.values[key]

    def __setitem__(self, key: DiscreteKey, value: float) -> None:
        self.values[key] = value

    def get(self, key: DiscreteKey) -> float | None:
        v = self.values.get(key)
        if v is None:
            self.misses += 1
        else:
            self.hits += 1
        return v

    def copy(self) -> "ValueTable":
        t = ValueTable(self.precision, self.capacity, self.n_base)
        t.values = dict(self.values)
        return t

    def to_text(self, header: str = "") -> str:
        out = io.StringIO()
        for line in header.splitlines():
            out.write(f"# {line}\n")
        out.write(f"precision: {self.precision}\ncapacity: {self.capacity}\nstates: {self.n_base}\n")
        for key in sorted(self.values):
            vec = key_to_vector(key, self.n_base)
            out.write(" ".join(str(int(v)) for v in vec) + f" : {self.values[key]:.17g}\n")
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ValueTable":
        meta: dict[str, int] = {}
        rows: list[tuple[list[int], float]] = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head, sep, tail = line.partition(":")
            if not sep:
                raise ValueError(f"{lineno}: expected ':'")
            if head.strip() in ("precision", "capacity", "states"):
                meta[head.strip()] = int(tail)
                continue
            try:
                rows.append(([int(v) for v in head.split()], float(tail)))
            except ValueError:
                raise ValueError(f"{lineno}: malformed table row") from None
        for k in ("precision", "capacity", "states"):
            if k not in meta:
                raise ValueError(f"value table header lacks {k!r}")
        table = cls(meta["precision"], meta["capacity"], meta["states"])
        for vec, value in rows:
            if len(vec) != table.n_base + 1:
                raise ValueError(f"row has {len(vec)} entries, expected {table.n_base + 1}")
            table.values[vector_to_key(vec)] = value
        return table


@dataclass
class TrialResult:
    steps: int
    outcome: str  # "target" or "cutoff"
    cost: float


@dataclass
class SolveResult:
    table: ValueTable
    trace: list[float] = field(default_factory=list)
    outcomes: list[str] = field(default_factory=list)


class BeliefQ:
    """Q-values of beliefs against a value table; shared by solver and greedy executor."""

    def __init__(
        self,
        product: ProductPomdp,
        allowed: AllowedTable,
        table: ValueTable,
        heuristic: Heuristic | None = None,
        cache: BeliefCache | None = None,
    ):
        self.product = product
        self.allowed = allowed
        self.table = table
        self.precision = table.precision
        self.heuristic = heuristic or zero_heuristic
        self.cache = cache or BeliefCache(product)
        self._keys: dict[Belief, DiscreteKey] = {}
        self._targets = product.targets

    def key(self, b: Belief) -> DiscreteKey:
        k = self._keys.get(b)
        if k is None:
            if len(self._keys) > 1_000_000:
                self._keys.clear()
            k = self._keys[b] = belief_key(self.product, b, self.precision)
        return k

    def is_target(self, b: Belief) -> bool:
        return all(s in self._targets for s in b.states)

    def actions(self, b: Belief) -> tuple[int, ...]:
        acts = self.allowed.for_support(b.states)
        if not acts:
            raise ContractViolation(f"no allowed action for belief support {b.states}")
        return acts

    def value(self, b: Belief) -> tuple[float, bool]:
        """Estimate of ``b`` and whether it came from the table."""
        if self.is_target(b):
            return 0.0, False
        v = self.table.values.get(self.key(b))
        if v is None:
            return self.heuristic(b), False
        return v, True

    def q(self, b: Belief, a: int) -> tuple[float, bool]:
        cost = self.product.cost
        targets = self._targets
        q = sum(p * cost[s, a] for s, p in zip(b.states, b.probs) if s not in targets)
        seen = False
        for _, pz, nb in self.cache.branch(b, a):
            v, hit = self.value(nb)
            q += pz * v
            seen = seen or hit
        return float(q), seen

    def best(self, b: Belief) -> tuple[int, float, bool]:
        """Greedy action (ties to the lowest index), its Q-value, and table coverage."""
        best_a, best_q, seen = -1, math.inf, False
        for a in self.actions(b):
            q, hit = self.q(b, a)
            seen = seen or hit
            if q < best_q:
                best_a, best_q = a, q
        return best_a, best_q, seen


def rtdp_trial(
    solver: BeliefQ,
    rng: random.Random,
    cutoff: int = DEFAULT_CUTOFF,
) -> TrialResult:
    """One RTDP-Bel trial from a hidden state drawn from the initial distribution."""
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    product = solver.product
    table = solver.table
    s = product.sample_initial(rng)
    b = solver.cache.initial(product.obs[s])
    steps, total = 0, 0.0
    while s not in product.targets and steps < cutoff:
        a, q, _ = solver.best(b)
        table[solver.key(b)] = q
        total += product.analysis_cost(s, a)
        s = product.sample_next(s, a, rng)
        b = solver.cache.update(b, a, product.obs[s])
        steps += 1
    if s in product.targets:
        if solver.is_target(b):
            table[solver.key(b)] = 0.0
        return TrialResult(steps, "target", total)
    return TrialResult(steps, "cutoff", total)


def solve(
    product: ProductPomdp,
    allowed: AllowedTable,
    trials: int,
    precision: int = DEFAULT_PRECISION,
    cutoff: int = DEFAULT_CUTOFF,
    seed: int = 0,
    heuristic: Heuristic | None = None,
    table: ValueTable | None = None,
) -> SolveResult:
    """Run ``trials`` RTDP-Bel trials, starting from ``table`` if given.

    Trial ``i`` draws from the random stream ``(seed, i)``.
    """
    if table is None:
        table = ValueTable(precision, product.capacity, product.base.n_states)
    elif table.precision != precision:
        raise ValueError("warm-start table was built with a different precision")
    solver = BeliefQ(product, allowed, table, heuristic)
    result = SolveResult(table)
    for i in range(trials):
        r = rtdp_trial(solver, stream(seed, i), cutoff)
        result.trace.append(r.cost)
        result.outcomes.append(r.outcome)
    return result


def fully_observable_values(product: ProductPomdp, allowed: AllowedTable | None = None, tol: float = 1e-10) -> np.ndarray:
    """Optimal expected cost per product state when the state is observed.

    Actions are restricted to those keeping almost-sure reachability of the
    targets in the fully observable product; losing states get ``inf``.
    Used as an admissible heuristic (a belief's value is at least the
    average of these).
    """
    n, n_a = product.n_states, product.n_actions
    dyn = product.dynamics
    alive = [True] * n
    while True:
        safe = [[a for a in range(n_a) if all(alive[t] for t in dyn[s][a][0])] if alive[s] else [] for s in range(n)]
        reach = [alive[s] and s in product.targets for s in range(n)]
        changed = True
        while changed:
            changed = False
            for s in range(n):
                if alive[s] and not reach[s] and any(any(reach[t] for t in dyn[s][a][0]) for a in safe[s]):
                    reach[s] = changed = True
        if reach == alive:
            break
        alive = reach
    V = np.where(alive, 0.0, np.inf)
    for _ in range(100_000):
        delta = 0.0
        for s in range(n):
            if not alive[s] or s in product.targets:
                continue
            best = min(
                product.cost[s, a] + sum(p * V[t] for t, p in zip(*dyn[s][a])) for a in safe[s]
            )
            delta = max(delta, abs(best - V[s]))
            V[s] = best
        if delta < tol:
            break
    return V


def mdp_heuristic(product: ProductPomdp) -> Heuristic:
    V = fully_observable_values(product)

    def h(b: Belief) -> float:
        return float(sum(p * V[s] for s, p in zip(b.states, b.probs)))

    return h


class GreedyPolicy(Policy):
    """Executes the table greedily on the exact belief.

    When neither the current discretized belief nor any successor is in the
    table, an allowed action is drawn uniformly instead.
    """

    name = "rtdp"

    def __init__(self, product: ProductPomdp, allowed: AllowedTable, table: ValueTable,
                 heuristic: Heuristic | None = None, _shared=None):
        self.product = product
        self.allowed = allowed
        self.table = table
        self.heuristic = heuristic
        if _shared is None:
            _shared = (BeliefQ(product, allowed, table, heuristic), {})
        self._shared = _shared
        self.q, self._decisions = _shared
        self.b: Belief | None = None
        self.steps = 0
        self.fallbacks = 0

    def spawn(self):
        return GreedyPolicy(self.product, self.allowed, self.table, self.heuristic, self._shared)

    def reset(self, z):
        self.b = self.q.cache.initial(z)

    def act(self, rng):
        b = self.b
        a = self._decisions.get(b)
        if a is None:
            best, _, seen = self.q.best(b)
            a = best if (seen or self.q.key(b) in self.table) else -1
            self._decisions[b] = a
        self.steps += 1
        if a < 0:
            self.fallbacks += 1
            return uniform_choice(self.q.actions(b), rng)
        return a

    def observe(self, a, z):
        self.b = self.q.cache.update(self.b, a, z)

    @property
    def size(self):
        return len(self.table)

    @property
    def fallback_rate(self):
        return self.fallbacks / self.steps if self.steps else 0.0


def greedy_policy(product: ProductPomdp, allowed: AllowedTable, table: ValueTable,
                  heuristic: Heuristic | None = None) -> GreedyPolicy:
    return GreedyPolicy(product, allowed, table, heuristic)
