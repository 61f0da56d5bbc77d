"""Exact beliefs over product states and their discretization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .product import ProductPomdp


class ZeroProbabilityObservation(ValueError):
    pass


@dataclass(frozen=True)
class Belief:
    """Sparse distribution over product states sharing one observation.

    ``states`` is sorted; ``probs`` holds the matching positive
    probabilities.  Instances are hashable so they can key caches.
    """

    states: tuple[int, ...]
    probs: tuple[float, ...]
    obs: int
    energy: int

    def __iter__(self):
        return iter(zip(self.states, self.probs))

    def prob(self, s: int) -> float:
        try:
            return self.probs[self.states.index(s)]
        except ValueError:
            return 0.0


def _make(product: ProductPomdp, mass: dict[int, float], total: float) -> Belief:
    states = tuple(sorted(mass))
    probs = tuple(mass[s] / total for s in states)
    first = states[0]
    return Belief(states, probs, product.obs[first], product.energy(first))


def initial_belief(product: ProductPomdp, z: int) -> Belief:
    mass = {s: p for s, p in product.initial.items() if p > 0 and product.obs[s] == z}
    if not mass:
        raise ZeroProbabilityObservation(f"initial observation {z} has probability 0")
    return _make(product, mass, sum(mass.values()))


def branch(product: ProductPomdp, b: Belief, a: int) -> tuple[tuple[int, float, Belief], ...]:
    """All observation outcomes of playing ``a``: ``(z, P(z | b, a), b_z)``."""
    groups: dict[int, dict[int, float]] = {}
    obs = product.obs
    dyn = product.dynamics
    for s, p in zip(b.states, b.probs):
        succ, probs = dyn[s][a]
        for t, q in zip(succ, probs):
            g = groups.setdefault(obs[t], {})
            g[t] = g.get(t, 0.0) + p * q
    out = []
    for z in sorted(groups):
        mass = groups[z]
        pz = sum(mass.values())
        out.append((z, pz, _make(product, mass, pz)))
    return tuple(out)


def belief_update(product: ProductPomdp, b: Belief, a: int, z: int) -> Belief:
    """Bayes filter step ``b'(s') ∝ Σ_s b(s) δ(s'|s,a)`` restricted to ``O(s') = z``."""
    for zz, pz, nb in branch(product, b, a):
        if zz == z and pz > 0:
            return nb
    raise ZeroProbabilityObservation(f"observation {z} has probability 0 after action {a}")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


DiscreteKey = tuple[int, tuple[tuple[int, int], ...]]


def belief_key(product: ProductPomdp, b: Belief, precision: int) -> DiscreteKey:
    """Sparse hashable form of the discretized belief: ``(energy, ((s, v), ...))``.

    Zero entries are dropped; base states are used, so the key does not
    depend on how the product happened to number its states.
    """
    if product.sink is not None and b.states == (product.sink,):
        return (0, ())
    items = []
    for s, p in zip(b.states, b.probs):
        v = round_half_up(precision * p)
        if v:
            items.append((product.pairs[s][0], v))
    items.sort()
    return (b.energy, tuple(items))


def key_to_vector(key: DiscreteKey, n_base: int) -> np.ndarray:
    energy, items = key
    vec = np.zeros(n_base + 1, dtype=np.int64)
    for s, v in items:
        vec[s] = v
    vec[n_base] = energy
    return vec


def vector_to_key(vec) -> DiscreteKey:
    vec = [int(v) for v in vec]
    return (vec[-1], tuple((s, v) for s, v in enumerate(vec[:-1]) if v))


def discretize(product: ProductPomdp, b: Belief, precision: int) -> np.ndarray:
    """Integer vector of length ``|S| + 1``: ``round(B * b(s))`` per base state, then energy."""
    return key_to_vector(belief_key(product, b, precision), product.base.n_states)


class BeliefCache:
    """Memoizes :func:`branch`; beliefs recur across runs of the same model."""

    def __init__(self, product: ProductPomdp, limit: int = 500_000):
        self.product = product
        self.limit = limit
        self._branches: dict[tuple[Belief, int], tuple] = {}
        self._initial: dict[int, Belief] = {}

    def initial(self, z: int) -> Belief:
        b = self._initial.get(z)
        if b is None:
            b = self._initial[z] = initial_belief(self.product, z)
        return b

    def branch(self, b: Belief, a: int):
        k = (b, a)
        out = self._branches.get(k)
        if out is None:
            if len(self._branches) >= self.limit:
                self._branches.clear()
            out = self._branches[k] = branch(self.product, b, a)
        return out

    def update(self, b: Belief, a: int, z: int) -> Belief:
        for zz, pz, nb in self.branch(b, a):
            if zz == z and pz > 0:
                return nb
        raise ZeroProbabilityObservation(f"observation {z} has probability 0 after action {a}")
