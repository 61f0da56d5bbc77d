"""Qualitative energy-reachability via belief supports.

The support graph has one vertex per reachable belief support of the
product and, for every action, the successor support for each observation
that can occur.  Allowed actions are computed by the usual almost-sure
reachability fixpoint on this graph: observation branches are treated as
positive-probability outcomes and exact probabilities are ignored.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .policy import ContractViolation, Policy, uniform_choice
from .product import ProductPomdp

DEFAULT_VERTEX_LIMIT = 2_000_000


class SupportExplosion(RuntimeError):
    pass


@dataclass(eq=False)
class SupportGraph:
    product: ProductPomdp
    supports: list[tuple[int, ...]]
    index: dict[tuple[int, ...], int]
    # succ[u][a] is a tuple of (observation, successor support id), sorted by observation
    succ: list[list[tuple[tuple[int, int], ...]]]
    is_target: list[bool]
    initial: dict[int, int]  # observation -> support id
    obs: list[int]
    energy: list[int]

    def __len__(self) -> int:
        return len(self.supports)

    def successor(self, u: int, a: int, z: int) -> int | None:
        for zz, v in self.succ[u][a]:
            if zz == z:
                return v
        return None


def _succ_supports(product: ProductPomdp, support: tuple[int, ...], a: int) -> dict[int, tuple[int, ...]]:
    groups: dict[int, set[int]] = {}
    obs = product.obs
    for s in support:
        for t in product.dynamics[s][a][0]:
            groups.setdefault(obs[t], set()).add(t)
    return {z: tuple(sorted(ts)) for z, ts in sorted(groups.items())}


def initial_supports(product: ProductPomdp) -> dict[int, tuple[int, ...]]:
    groups: dict[int, list[int]] = {}
    for s in sorted(product.initial):
        if product.initial[s] > 0:
            groups.setdefault(product.obs[s], []).append(s)
    return {z: tuple(ss) for z, ss in sorted(groups.items())}


def build_support_graph(product: ProductPomdp, vertex_limit: int = DEFAULT_VERTEX_LIMIT) -> SupportGraph:
    """Forward subset construction from the initial supports."""
    supports: list[tuple[int, ...]] = []
    index: dict[tuple[int, ...], int] = {}
    queue: deque[int] = deque()

    def intern(u: tuple[int, ...]) -> int:
        if u not in index:
            if len(supports) >= vertex_limit:
                raise SupportExplosion(f"more than {vertex_limit} belief supports")
            index[u] = len(supports)
            supports.append(u)
            queue.append(index[u])
        return index[u]

    initial = {z: intern(u) for z, u in initial_supports(product).items()}
    succ: dict[int, list] = {}
    while queue:
        u = queue.popleft()
        row = []
        for a in range(product.n_actions):
            row.append(tuple((z, intern(v)) for z, v in _succ_supports(product, supports[u], a).items()))
        succ[u] = row
    targets = product.targets
    return SupportGraph(
        product=product,
        supports=supports,
        index=index,
        succ=[succ[u] for u in range(len(supports))],
        is_target=[all(s in targets for s in u) for u in supports],
        initial=initial,
        obs=[product.obs[u[0]] for u in supports],
        energy=[product.energy(u[0]) for u in supports],
    )


@dataclass(eq=False)
class AllowedTable:
    graph: SupportGraph
    allowed: dict[int, tuple[int, ...]]  # only winning supports appear
    winning: list[bool]

    def __getitem__(self, u: int) -> tuple[int, ...]:
        return self.allowed.get(u, ())

    def for_support(self, support: tuple[int, ...]) -> tuple[int, ...]:
        u = self.graph.index.get(support)
        return () if u is None else self.allowed.get(u, ())

    def to_text(self) -> str:
        """Two blocks: support ids with their member states, then allowed actions."""
        g = self.graph
        p = g.product
        lines = ["# supports"]
        for u, members in enumerate(g.supports):
            lines.append(f"{u} : " + " ".join(p.name(s) for s in members))
        lines.append("# allowed")
        for u in sorted(self.allowed):
            lines.append(f"{u} : " + " ".join(p.base.action_names[a] for a in self.allowed[u]))
        return "\n".join(lines) + "\n"


def compute_allowed(graph: SupportGraph) -> AllowedTable:
    """Greatest set of supports from which targets are reachable almost surely.

    Iterates: with ``W`` the current candidate set, an action is safe in
    ``U`` if all its successors stay in ``W``; keep only supports that reach
    a target support through safe actions; repeat until ``W`` is stable.
    """
    n = len(graph)
    n_a = graph.product.n_actions
    alive = [True] * n
    while True:
        safe = [
            [a for a in range(n_a) if all(alive[v] for _, v in graph.succ[u][a])] if alive[u] else []
            for u in range(n)
        ]
        preds: list[list[int]] = [[] for _ in range(n)]
        for u in range(n):
            for a in safe[u]:
                for _, v in graph.succ[u][a]:
                    preds[v].append(u)
        reach = [alive[u] and graph.is_target[u] for u in range(n)]
        queue = deque(u for u in range(n) if reach[u])
        while queue:
            v = queue.popleft()
            for u in preds[v]:
                if not reach[u]:
                    reach[u] = True
                    queue.append(u)
        if reach == alive:
            break
        alive = reach
    allowed = {u: tuple(safe[u]) for u in range(n) if alive[u] and safe[u]}
    return AllowedTable(graph=graph, allowed=allowed, winning=alive)


def qualitative_answer(allowed: AllowedTable) -> bool:
    """True iff every initial support is winning (the instance is feasible)."""
    return all(allowed.winning[u] for u in allowed.graph.initial.values())


@dataclass
class QualitativeResult:
    graph: SupportGraph
    allowed: AllowedTable
    feasible: bool


def analyze(product: ProductPomdp, vertex_limit: int = DEFAULT_VERTEX_LIMIT) -> QualitativeResult:
    graph = build_support_graph(product, vertex_limit)
    allowed = compute_allowed(graph)
    return QualitativeResult(graph, allowed, qualitative_answer(allowed))


class SigmaAll(Policy):
    """Plays every allowed action of the current support uniformly at random."""

    name = "sigma_all"

    def __init__(self, allowed: AllowedTable):
        self.table = allowed
        self.graph = allowed.graph
        self.support: int | None = None

    def spawn(self):
        return SigmaAll(self.table)

    def reset(self, z):
        self.support = self.graph.initial[z]

    def act(self, rng: random.Random) -> int:
        choices = self.table[self.support]
        if not choices:
            raise ContractViolation(f"no allowed action in support {self.support}")
        return uniform_choice(choices, rng)

    def observe(self, a, z):
        v = self.graph.successor(self.support, a, z)
        if v is None:
            raise ContractViolation(f"observation {z} impossible after action {a} in support {self.support}")
        self.support = v


def sigma_all(allowed: AllowedTable) -> SigmaAll:
    return SigmaAll(allowed)
