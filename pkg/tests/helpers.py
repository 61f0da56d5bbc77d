"""Model generators and brute-force oracles shared by the test modules.

The oracles deliberately avoid the package's own machinery: they work on
explicit arrays and enumerate paths or subsets directly.
"""

from __future__ import annotations

import itertools
import random
from collections import deque

import numpy as np

from energy_pomdp.model import Pomdp, RawPomdp


def random_distribution(rng: random.Random, n: int, support: int | None = None) -> np.ndarray:
    k = support or rng.randint(1, min(n, 3))
    idx = rng.sample(range(n), k)
    w = np.array([rng.randint(1, 9) for _ in idx], dtype=float)
    out = np.zeros(n)
    out[idx] = w / w.sum()
    return out


def random_model(
    seed: int,
    n_states: int = 4,
    n_actions: int = 2,
    n_obs: int = 2,
    capacity: int = 3,
    injective: bool = False,
    reload: bool = True,
    max_cost: int = 3,
) -> Pomdp:
    """Random valid model; the last state is the (single) target."""
    rng = random.Random(seed)
    if injective:
        n_obs = n_states
        obs = np.arange(n_states)
    else:
        obs = np.array([rng.randrange(n_obs) for _ in range(n_states)])
    trans = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            trans[s, a] = random_distribution(rng, n_states)
    initial = np.zeros(n_states)
    initial[0] = 1.0
    cost = np.array([[rng.randint(1, max_cost) for _ in range(n_actions)] for _ in range(n_states)])
    energy = np.full((n_actions, n_obs), -1, dtype=np.int64)
    if reload:
        energy[rng.randrange(n_actions), rng.randrange(n_obs)] = capacity
    return Pomdp(
        state_names=tuple(f"s{i}" for i in range(n_states)),
        action_names=tuple(f"a{i}" for i in range(n_actions)),
        obs_names=tuple(f"z{i}" for i in range(n_obs)),
        transition=trans,
        obs=obs,
        initial=initial,
        cost=cost,
        energy=energy,
        capacity=capacity,
        targets=frozenset({n_states - 1}),
    )


def random_raw(seed: int, n_states: int = 3, n_actions: int = 2, n_obs: int = 2, capacity: int = 2) -> RawPomdp:
    rng = random.Random(seed)
    trans = np.zeros((n_states, n_actions, n_states))
    observation = np.zeros((n_states, n_actions, n_obs))
    for s in range(n_states):
        for a in range(n_actions):
            trans[s, a] = random_distribution(rng, n_states)
            observation[s, a] = random_distribution(rng, n_obs)
    return RawPomdp(
        state_names=tuple(f"s{i}" for i in range(n_states)),
        action_names=tuple(f"a{i}" for i in range(n_actions)),
        obs_names=tuple(f"z{i}" for i in range(n_obs)),
        transition=trans,
        observation=observation,
        initial=random_distribution(rng, n_states, support=rng.randint(1, n_states)),
        cost=np.ones((n_states, n_actions), dtype=np.int64),
        energy=np.array([[rng.randint(-1, 1) for _ in range(n_obs)] for _ in range(n_actions)]),
        capacity=capacity,
        targets=frozenset({n_states - 1}),
    )


def chain(length: int = 3, cost: int = 1, capacity: int = 0) -> Pomdp:
    """Deterministic chain s0 -> s1 -> ... with a single action."""
    trans = np.zeros((length, 1, length))
    for i in range(length):
        trans[i, 0, min(i + 1, length - 1)] = 1.0
    initial = np.zeros(length)
    initial[0] = 1.0
    return Pomdp(
        tuple(f"s{i}" for i in range(length)), ("go",), ("o",), trans, np.zeros(length, dtype=int), initial,
        np.full((length, 1), cost), np.full((1, 1), -1), capacity, frozenset({length - 1}),
    )


# ---------------------------------------------------------------------------
# observation-sequence oracle


def raw_obs_sequence_probs(m: RawPomdp, actions: list[int]) -> dict[tuple[int, ...], float]:
    """P(z_1..z_k | a_1..a_k) by enumerating all state paths."""
    out: dict[tuple[int, ...], float] = {}
    S, Z = m.n_states, m.n_obs
    for path in itertools.product(range(S), repeat=len(actions) + 1):
        p0 = m.initial[path[0]]
        if p0 == 0:
            continue
        p = p0
        for k, a in enumerate(actions):
            p *= m.transition[path[k], a, path[k + 1]]
            if p == 0:
                break
        if p == 0:
            continue
        for zs in itertools.product(range(Z), repeat=len(actions)):
            q = p
            for k, a in enumerate(actions):
                q *= m.observation[path[k + 1], a, zs[k]]
            if q > 0:
                out[zs] = out.get(zs, 0.0) + q
    return out


def det_obs_sequence_probs(m: Pomdp, actions: list[int]) -> dict[tuple[int, ...], float]:
    out: dict[tuple[int, ...], float] = {}
    S = m.n_states
    for path in itertools.product(range(S), repeat=len(actions) + 1):
        p = m.initial[path[0]]
        for k, a in enumerate(actions):
            if p == 0:
                break
            p *= m.transition[path[k], a, path[k + 1]]
        if p > 0:
            zs = tuple(int(m.obs[s]) for s in path[1:])
            out[zs] = out.get(zs, 0.0) + p
    return out


# ---------------------------------------------------------------------------
# Bayes oracle on the product


def path_posterior(product, first_obs: int, history: list[tuple[int, int]]) -> dict[int, float]:
    """Posterior over the current product state by summing over every state path."""
    n = product.n_states
    trans = np.zeros((n, product.n_actions, n))
    for s in range(n):
        for a in range(product.n_actions):
            succ, probs = product.dynamics[s][a]
            for t, p in zip(succ, probs):
                trans[s, a, t] += p
    mass: dict[int, float] = {}
    for path in itertools.product(range(n), repeat=len(history) + 1):
        s0 = path[0]
        p = product.initial.get(s0, 0.0)
        if p == 0 or product.obs[s0] != first_obs:
            continue
        for k, (a, z) in enumerate(history):
            if product.obs[path[k + 1]] != z:
                p = 0.0
                break
            p *= trans[path[k], a, path[k + 1]]
            if p == 0:
                break
        if p > 0:
            mass[path[-1]] = mass.get(path[-1], 0.0) + p
    total = sum(mass.values())
    return {s: p / total for s, p in mass.items()} if total else {}


# ---------------------------------------------------------------------------
# almost-sure analysis by subset enumeration


def brute_force_winning(graph) -> list[bool]:
    """Union of all vertex sets W that are closed (each member has an action
    staying in W) and from which a target is reachable inside W.

    Such sets are closed under union, so the union is the greatest one.
    """
    n = len(graph)
    n_a = graph.product.n_actions
    succ = [[[v for _, v in graph.succ[u][a]] for a in range(n_a)] for u in range(n)]
    best: set[int] = set()
    for mask in range(1, 2 ** n):
        W = {u for u in range(n) if mask >> u & 1}
        if W <= best:
            continue
        safe = {u: [a for a in range(n_a) if all(v in W for v in succ[u][a])] for u in W}
        if any(not safe[u] for u in W):
            continue
        reach = {u for u in W if graph.is_target[u]}
        queue = deque(reach)
        preds: dict[int, set[int]] = {u: set() for u in W}
        for u in W:
            for a in safe[u]:
                for v in succ[u][a]:
                    preds[v].add(u)
        while queue:
            v = queue.popleft()
            for u in preds[v]:
                if u not in reach:
                    reach.add(u)
                    queue.append(u)
        if reach == W:
            best |= W
    return [u in best for u in range(n)]


def brute_force_allowed(graph) -> dict[int, tuple[int, ...]]:
    win = brute_force_winning(graph)
    n_a = graph.product.n_actions
    out = {}
    for u in range(len(graph)):
        if not win[u]:
            continue
        acts = tuple(a for a in range(n_a) if all(win[v] for _, v in graph.succ[u][a]))
        if acts:
            out[u] = acts
    return out


# ---------------------------------------------------------------------------
# fully observable value iteration


def product_value_iteration(product, tol: float = 1e-12, max_iter: int = 200_000) -> np.ndarray:
    """Optimal expected total cost on the product MDP over proper policies."""
    n, n_a = product.n_states, product.n_actions
    dyn = product.dynamics
    targets = product.targets
    # states that reach the target almost surely under some policy
    good = set(range(n))
    while True:
        ok_actions = {s: [a for a in range(n_a) if set(dyn[s][a][0]) <= good] for s in good}
        reach = set(targets) & good
        changed = True
        while changed:
            changed = False
            for s in good - reach:
                if any(set(dyn[s][a][0]) & reach for a in ok_actions[s]):
                    reach.add(s)
                    changed = True
        if reach == good:
            break
        good = reach
    V = np.zeros(n)
    V[[s for s in range(n) if s not in good]] = np.inf
    for _ in range(max_iter):
        delta = 0.0
        for s in sorted(good - set(targets)):
            best = min(
                product.cost[s, a] + sum(p * V[t] for t, p in zip(*dyn[s][a])) for a in ok_actions[s]
            )
            delta = max(delta, abs(best - V[s]))
            V[s] = best
        if delta < tol:
            break
    return V


def small_products(count: int, max_states: int = 4):
    """Products with at most ``max_states`` states and some observation branching."""
    from energy_pomdp.product import build_product

    out, seed = [], 0
    while len(out) < count:
        m = random_model(seed, n_states=2 + seed % 2, n_obs=2, capacity=1 + seed % 3)
        seed += 1
        p = build_product(m)
        if p.n_states <= max_states and len(set(p.obs)) > 1:
            out.append(p)
    return out


def small_feasible_randoms(count: int, max_vertices: int = 14):
    """Random products whose support graph is small enough for subset enumeration."""
    from energy_pomdp.product import build_product
    from energy_pomdp.qualitative import build_support_graph

    out, seed = [], 0
    while len(out) < count:
        m = random_model(seed, n_states=4, n_actions=2, n_obs=2, capacity=3)
        seed += 1
        p = build_product(m)
        if len(build_support_graph(p)) <= max_vertices:
            out.append(p)
    return out


def injective_instances(count: int, min_table: int = 3):
    """Feasible fully observable products with 10 to 50 states and a non-trivial table."""
    from energy_pomdp.product import build_product
    from energy_pomdp.qualitative import analyze
    from energy_pomdp.rtdp import solve

    out, seed = [], 0
    while len(out) < count:
        m = random_model(seed, n_states=4 + seed % 7, n_actions=3, injective=True, capacity=3 + seed % 3, max_cost=5)
        seed += 1
        p = build_product(m)
        if not 10 <= p.n_states <= 50:
            continue
        res = analyze(p)
        if not res.feasible:
            continue
        if len(solve(p, res.allowed, trials=50).table) < min_table:
            continue
        out.append((p, res.allowed))
    return out


def initial_values(product, allowed, table) -> dict[int, float]:
    """Table estimate at the initial belief of each initial product state."""
    from energy_pomdp.belief import initial_belief
    from energy_pomdp.rtdp import BeliefQ

    q = BeliefQ(product, allowed, table)
    return {s: q.value(initial_belief(product, product.obs[s]))[0] for s in product.initial}


def all_histories(product, first_obs: int, length: int) -> list[list[tuple[int, int]]]:
    """Every feasible (action, observation) history of the given length."""
    from energy_pomdp.belief import belief_update, branch, initial_belief

    out: list[list[tuple[int, int]]] = [[]]
    for _ in range(length):
        nxt = []
        for h in out:
            b = initial_belief(product, first_obs)
            for a, z in h:
                b = belief_update(product, b, a, z)
            for a in range(product.n_actions):
                for z, _, _ in branch(product, b, a):
                    nxt.append(h + [(a, z)])
        out = nxt
    return out


def bayes_max_error(product, max_length: int = 3) -> float:
    """Largest deviation of the Bayes filter from :func:`path_posterior`."""
    from energy_pomdp.belief import belief_update, initial_belief

    worst = 0.0
    for z0 in sorted({product.obs[s] for s in product.initial}):
        for k in range(max_length + 1):
            for h in all_histories(product, z0, k):
                b = initial_belief(product, z0)
                for a, z in h:
                    b = belief_update(product, b, a, z)
                oracle = path_posterior(product, z0, h)
                if set(oracle) != set(b.states):
                    return float("inf")
                worst = max(worst, max(abs(p - oracle[s]) for s, p in b))
    return worst


def assert_support_bound_and_homogeneity(graph) -> None:
    p = graph.product
    assert len(graph) <= (2 ** p.base.n_states - 1) * p.capacity + 1
    for members in graph.supports:
        assert len({p.obs[s] for s in members}) == 1
        assert len({p.energy(s) for s in members}) == 1
