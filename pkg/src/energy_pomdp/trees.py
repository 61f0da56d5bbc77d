"""Decision-tree representation of belief policies.

Training data are produced by simulating a policy and recording, for every
step, features of the current discretized belief together with the action
taken.  Trees are grown top-down with threshold predicates ``[v <= t]``
chosen by information gain or Gini decrease, and shrunk afterwards by
cost-complexity pruning.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .belief import Belief, BeliefCache, DiscreteKey, belief_key
from .policy import ContractViolation, Policy, uniform_choice
from .product import ProductPomdp
from .qualitative import AllowedTable
from .rng import stream

ENERGY = "Energy"
_COORD = re.compile(r"^r(\d+)c(\d+)")


# ---------------------------------------------------------------------------
# features


@dataclass(eq=False)
class FeatureMap:
    """Named integer features of a discretized belief."""

    names: tuple[str, ...]
    fn: Callable[[DiscreteKey], tuple[int, ...]]
    kind: str = "custom"

    def __call__(self, key: DiscreteKey) -> tuple[int, ...]:
        return self.fn(key)

    def __len__(self) -> int:
        return len(self.names)


def _sanitize(name: str) -> str:
    return re.sub(r"[\s()\[\]:,#]", "_", name)


def raw_features(state_names: Sequence[str]) -> FeatureMap:
    """One feature per base-state probability (in ``[0, B]``) plus ``Energy``."""
    n = len(state_names)
    names = tuple(_sanitize(s) for s in state_names) + (ENERGY,)

    def fn(key):
        energy, items = key
        vec = [0] * (n + 1)
        for s, v in items:
            vec[s] = v
        vec[n] = energy
        return tuple(vec)

    return FeatureMap(names, fn, "raw")


def grid_coordinates(state_names: Sequence[str]) -> list[tuple[int, int] | None]:
    """Parse ``r<row>c<col>`` prefixes of state names (1-based)."""
    out = []
    for name in state_names:
        m = _COORD.match(name)
        out.append((int(m.group(1)), int(m.group(2))) if m else None)
    return out


def grid_features(rows: int, cols: int, coords: Sequence[tuple[int, int] | None]) -> FeatureMap:
    """Column marginals ``x1..xC``, row marginals ``y1..yR``, then ``Energy``.

    Marginals are sums of the discretized entries, so each lies in
    ``[0, B + R]`` because of rounding slack.
    """
    names = tuple(f"x{c}" for c in range(1, cols + 1)) + tuple(f"y{r}" for r in range(1, rows + 1)) + (ENERGY,)
    cells = list(coords)

    def fn(key):
        energy, items = key
        vec = [0] * (cols + rows + 1)
        for s, v in items:
            rc = cells[s]
            if rc is not None:
                r, c = rc
                vec[c - 1] += v
                vec[cols + r - 1] += v
        vec[-1] = energy
        return tuple(vec)

    return FeatureMap(names, fn, "grid")


def grid_features_for(state_names: Sequence[str]) -> FeatureMap:
    coords = grid_coordinates(state_names)
    known = [rc for rc in coords if rc is not None]
    if not known:
        raise ValueError("no state name carries an r<row>c<col> prefix")
    return grid_features(max(r for r, _ in known), max(c for _, c in known), coords)


# ---------------------------------------------------------------------------
# training data


@dataclass
class TrainingSet:
    names: tuple[str, ...]
    X: np.ndarray  # (k, d) int
    y: np.ndarray  # (k,) int

    def __len__(self) -> int:
        return len(self.y)

    @classmethod
    def from_records(cls, names, records) -> "TrainingSet":
        names = tuple(names)
        if records:
            X = np.array([r[0] for r in records], dtype=np.int64)
            y = np.array([r[1] for r in records], dtype=np.int64)
        else:
            X = np.zeros((0, len(names)), dtype=np.int64)
            y = np.zeros(0, dtype=np.int64)
        if X.shape[1] != len(names):
            raise ValueError("records do not match the feature names")
        return cls(names, X, y)

    def records(self) -> list[tuple[tuple[int, ...], int]]:
        return [(tuple(int(v) for v in x), int(a)) for x, a in zip(self.X, self.y)]


def generate_training_data(
    policy: Policy,
    product: ProductPomdp,
    features: FeatureMap,
    simulations: int = 1000,
    length: int = 250,
    seed: int = 0,
    precision: int = 20,
) -> TrainingSet:
    """Simulate ``policy`` and record (features of belief, chosen action) per step.

    Each simulation runs for at most ``length`` steps and stops early at a
    target or the sink.  Simulation ``i`` uses the random stream ``(seed, i)``.
    """
    cache = BeliefCache(product)
    keys: dict[Belief, DiscreteKey] = {}
    records = []
    targets = product.targets
    for i in range(simulations):
        rng = stream(seed, i)
        ex = policy.spawn()
        s = product.sample_initial(rng)
        z = product.obs[s]
        b = cache.initial(z)
        ex.reset(z)
        for _ in range(length):
            if s in targets or s == product.sink:
                break
            k = keys.get(b)
            if k is None:
                k = keys[b] = belief_key(product, b, precision)
            a = ex.act(rng)
            records.append((features(k), a))
            s = product.sample_next(s, a, rng)
            z = product.obs[s]
            ex.observe(a, z)
            b = cache.update(b, a, z)
    return TrainingSet.from_records(features.names, records)


# ---------------------------------------------------------------------------
# trees

_OPS: dict[str, Callable[[float, float], bool]] = {
    "<=": lambda x, t: x <= t,
    "<": lambda x, t: x < t,
    ">=": lambda x, t: x >= t,
    ">": lambda x, t: x > t,
    "=": lambda x, t: x == t,
}


@dataclass(eq=False)
class Node:
    """Inner node when ``feature`` is set (``true``/``false`` children), else a leaf."""

    action: int = 0
    feature: int | None = None
    op: str = "<="
    threshold: float = 0.0
    true: "Node | None" = None
    false: "Node | None" = None
    counts: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def size(self) -> int:
        return 1 if self.is_leaf else 1 + self.true.size() + self.false.size()

    def leaves(self) -> int:
        return 1 if self.is_leaf else self.true.leaves() + self.false.leaves()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.true.depth(), self.false.depth())

    def same_as(self, other: "Node") -> bool:
        if self.is_leaf or other.is_leaf:
            return self.is_leaf and other.is_leaf and self.action == other.action
        return (
            self.feature == other.feature
            and self.op == other.op
            and self.threshold == other.threshold
            and self.true.same_as(other.true)
            and self.false.same_as(other.false)
        )


@dataclass(eq=False)
class DecisionTree:
    root: Node
    feature_names: tuple[str, ...]
    action_names: tuple[str, ...] | None = None

    @property
    def size(self) -> int:
        return self.root.size()

    def same_as(self, other: "DecisionTree") -> bool:
        return self.feature_names == other.feature_names and self.root.same_as(other.root)


def eval_tree(tree: DecisionTree, features: Sequence[float]) -> int:
    """Descend from the root: a satisfied predicate leads to the first child."""
    if len(features) != len(tree.feature_names):
        raise ValueError(f"expected {len(tree.feature_names)} features, got {len(features)}")
    node = tree.root
    while node.feature is not None:
        node = node.true if _OPS[node.op](features[node.feature], node.threshold) else node.false
    return node.action


def _majority(counts: np.ndarray) -> int:
    return int(np.argmax(counts))


def entropy(counts: np.ndarray) -> float:
    """Shannon entropy in bits of a class-count vector."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts[counts > 0] / n
    return float(-(p * np.log2(p)).sum())


def gini(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


def split_score(parent: np.ndarray, left: np.ndarray, right: np.ndarray, criterion: str) -> float:
    """Impurity decrease of a split (information gain in bits, or Gini decrease)."""
    f = entropy if criterion == "infogain" else gini
    n, nl, nr = parent.sum(), left.sum(), right.sum()
    return f(parent) - (nl / n) * f(left) - (nr / n) * f(right)


def _impurity_rows(counts: np.ndarray, criterion: str) -> np.ndarray:
    """Row-wise impurity of a (m, K) count matrix."""
    n = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(n > 0, counts / np.maximum(n, 1), 0.0)
        if criterion == "infogain":
            logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
            return -(p * logs).sum(axis=1)
        return 1.0 - (p * p).sum(axis=1)


def _best_split(X: np.ndarray, Y: np.ndarray, criterion: str, min_leaf: int):
    """Best ``[x_j <= t]`` over features and midpoints; ``Y`` is one-hot (n, K)."""
    n = len(X)
    parent = Y.sum(axis=0)
    base = _impurity_rows(parent[None, :], criterion)[0]
    best = (0.0, None, None)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        cuts = np.flatnonzero(xs[1:] != xs[:-1])  # split after position cut
        if len(cuts) == 0:
            continue
        nl = cuts + 1
        ok = (nl >= min_leaf) & (n - nl >= min_leaf)
        if not ok.any():
            continue
        cuts, nl = cuts[ok], nl[ok]
        cum = np.cumsum(Y[order], axis=0)
        left = cum[cuts]
        right = parent[None, :] - left
        score = base - (nl / n) * _impurity_rows(left, criterion) - ((n - nl) / n) * _impurity_rows(right, criterion)
        k = int(np.argmax(score))
        if score[k] > best[0] + 1e-12:
            best = (float(score[k]), j, (xs[cuts[k]] + xs[cuts[k] + 1]) / 2.0)
    return best


def learn_tree(
    data: TrainingSet,
    criterion: str = "infogain",
    min_leaf: int = 1,
    max_depth: int | None = None,
    n_actions: int | None = None,
    action_names: Sequence[str] | None = None,
) -> DecisionTree:
    """Top-down induction (ID3-style with numeric thresholds).

    A node becomes a leaf when it is pure, holds fewer than ``min_leaf``
    records, sits at ``max_depth``, or no split with positive score leaves at
    least ``min_leaf`` records on each side.  Leaves take the majority action,
    ties going to the lowest index.
    """
    if len(data) == 0:
        raise ValueError("cannot learn a tree from an empty training set")
    if criterion not in ("infogain", "gini"):
        raise ValueError(f"unknown criterion {criterion!r}")
    k = max(int(data.y.max()) + 1, n_actions or 0)
    Y = np.zeros((len(data), k), dtype=np.int64)
    Y[np.arange(len(data)), data.y] = 1
    X = data.X.astype(float)

    def grow(idx: np.ndarray, depth: int) -> Node:
        counts = Y[idx].sum(axis=0)
        node = Node(action=_majority(counts), counts=counts)
        if np.count_nonzero(counts) <= 1 or len(idx) < min_leaf:
            return node
        if max_depth is not None and depth >= max_depth:
            return node
        score, j, t = _best_split(X[idx], Y[idx], criterion, min_leaf)
        if j is None:
            return node
        mask = X[idx, j] <= t
        node.feature, node.threshold = j, float(t)
        node.true = grow(idx[mask], depth + 1)
        node.false = grow(idx[~mask], depth + 1)
        return node

    root = grow(np.arange(len(data)), 0)
    return DecisionTree(root, tuple(data.names), tuple(action_names) if action_names else None)


def _route(node: Node, X: np.ndarray, idx: np.ndarray, fn) -> None:
    fn(node, idx)
    if node.is_leaf:
        return
    vals = X[idx, node.feature]
    mask = np.array([_OPS[node.op](v, node.threshold) for v in vals], dtype=bool) if len(idx) else np.zeros(0, bool)
    _route(node.true, X, idx[mask], fn)
    _route(node.false, X, idx[~mask], fn)


def objective(tree: DecisionTree, data: TrainingSet, alpha: float) -> float:
    """Misclassified training records plus ``alpha`` times the number of leaves."""
    wrong = sum(int(a != eval_tree(tree, x)) for x, a in zip(data.X.tolist(), data.y.tolist()))
    return wrong + alpha * tree.root.leaves()


def prune_tree(tree: DecisionTree, data: TrainingSet, alpha: float) -> DecisionTree:
    """Cost-complexity pruning: keep the subtree minimizing errors + alpha * leaves.

    A subtree is replaced by a leaf only if that strictly lowers the
    objective, so ``alpha = 0`` leaves a tree that fits its data untouched.
    """
    k = max(int(data.y.max()) + 1 if len(data) else 1, _max_action(tree.root) + 1)
    X = data.X.astype(float)
    y = data.y

    def counts_of(idx):
        return np.bincount(y[idx], minlength=k) if len(idx) else np.zeros(k, dtype=np.int64)

    if math.isinf(alpha):
        c = counts_of(np.arange(len(data)))
        return DecisionTree(Node(action=_majority(c) if c.sum() else tree.root.action, counts=c),
                            tree.feature_names, tree.action_names)

    def rec(node: Node, idx: np.ndarray) -> tuple[Node, float]:
        c = counts_of(idx)
        if node.is_leaf:
            wrong = int(c.sum() - c[node.action])
            return Node(action=node.action, counts=c), wrong + alpha
        vals = X[idx, node.feature]
        mask = np.array([_OPS[node.op](v, node.threshold) for v in vals], dtype=bool) if len(idx) else np.zeros(0, bool)
        t, ct = rec(node.true, idx[mask])
        f, cf = rec(node.false, idx[~mask])
        keep = ct + cf
        label = _majority(c) if c.sum() else node.action
        leaf_cost = int(c.sum() - c[label]) + alpha
        if leaf_cost < keep:
            return Node(action=label, counts=c), leaf_cost
        return Node(action=label, feature=node.feature, op=node.op, threshold=node.threshold,
                    true=t, false=f, counts=c), keep

    root, _ = rec(tree.root, np.arange(len(data)))
    return DecisionTree(root, tree.feature_names, tree.action_names)


def _max_action(node: Node) -> int:
    if node.is_leaf:
        return node.action
    return max(_max_action(node.true), _max_action(node.false))


# ---------------------------------------------------------------------------
# text and graph formats


def _fmt_threshold(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def tree_to_text(tree: DecisionTree) -> str:
    """``(name <= t (true-subtree) (false-subtree))`` with leaves ``[action]``."""

    def rec(node: Node) -> str:
        if node.is_leaf:
            return f"[{node.action}]"
        name = tree.feature_names[node.feature]
        return f"({name} {node.op} {_fmt_threshold(node.threshold)} {rec(node.true)} {rec(node.false)})"

    return rec(tree.root)


_TREE_TOKEN = re.compile(r"\(|\)|\[|\]|[^\s()\[\]]+")


def tree_from_text(text: str, feature_names: Sequence[str], action_names: Sequence[str] | None = None) -> DecisionTree:
    """Inverse of :func:`tree_to_text`; lines starting with ``#`` are comments."""
    body = "\n".join(line for line in text.splitlines() if not line.lstrip().startswith("#"))
    toks = _TREE_TOKEN.findall(body)
    index = {name: i for i, name in enumerate(feature_names)}
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(toks):
            raise ValueError("unexpected end of tree text")
        pos += 1
        return toks[pos - 1]

    def expect(tok: str) -> None:
        got = take()
        if got != tok:
            raise ValueError(f"expected {tok!r}, found {got!r}")

    def rec() -> Node:
        tok = take()
        if tok == "[":
            action = int(take())
            expect("]")
            return Node(action=action)
        if tok != "(":
            raise ValueError(f"expected '(' or '[', found {tok!r}")
        name = take()
        if name not in index:
            raise ValueError(f"unknown feature {name!r}")
        op = take()
        if op not in _OPS:
            raise ValueError(f"unknown comparison {op!r}")
        threshold = float(take())
        t = rec()
        f = rec()
        expect(")")
        return Node(action=t.action, feature=index[name], op=op, threshold=threshold, true=t, false=f)

    root = rec()
    if pos != len(toks):
        raise ValueError("trailing text after tree")
    return DecisionTree(root, tuple(feature_names), tuple(action_names) if action_names else None)


def export_tree_dot(tree: DecisionTree, feature_names: Sequence[str] | None = None,
                    action_names: Sequence[str] | None = None) -> str:
    """Graphviz description; solid edges for satisfied predicates, dashed otherwise."""
    names = tuple(feature_names or tree.feature_names)
    actions = action_names or tree.action_names
    lines = ["digraph policy {", '  node [fontname="Helvetica"];']
    counter = 0

    def rec(node: Node) -> int:
        nonlocal counter
        me = counter
        counter += 1
        if node.is_leaf:
            label = actions[node.action] if actions else str(node.action)
            lines.append(f'  n{me} [shape=ellipse, label="{label}"];')
            return me
        label = f"{names[node.feature]} {node.op} {_fmt_threshold(node.threshold)}"
        lines.append(f'  n{me} [shape=box, label="{label}"];')
        t = rec(node.true)
        lines.append(f'  n{me} -> n{t} [label="true"];')
        f = rec(node.false)
        lines.append(f'  n{me} -> n{f} [label="false", style=dashed];')
        return me

    rec(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# execution


class DTPolicy(Policy):
    """Plays the tree's recommendation when allowed, else a uniform allowed action."""

    name = "dt"

    def __init__(self, tree: DecisionTree, features: FeatureMap, product: ProductPomdp,
                 allowed: AllowedTable, precision: int = 20, _shared=None):
        if len(features) != len(tree.feature_names):
            raise ValueError("feature map does not match the tree")
        self.tree = tree
        self.features = features
        self.product = product
        self.allowed = allowed
        self.precision = precision
        if _shared is None:
            _shared = (BeliefCache(product), {})
        self._shared = _shared
        self.cache, self._decisions = _shared
        self.b: Belief | None = None
        self.steps = 0
        self.fallbacks = 0

    def spawn(self):
        return DTPolicy(self.tree, self.features, self.product, self.allowed, self.precision, self._shared)

    def reset(self, z):
        self.b = self.cache.initial(z)

    def act(self, rng):
        b = self.b
        hit = self._decisions.get(b)
        if hit is None:
            acts = self.allowed.for_support(b.states)
            if not acts:
                raise ContractViolation(f"no allowed action for belief support {b.states}")
            rec = eval_tree(self.tree, self.features(belief_key(self.product, b, self.precision)))
            hit = self._decisions[b] = (rec if rec in acts else -1, acts)
        a, acts = hit
        self.steps += 1
        if a < 0:
            self.fallbacks += 1
            return uniform_choice(acts, rng)
        return a

    def observe(self, a, z):
        self.b = self.cache.update(self.b, a, z)

    @property
    def size(self):
        return self.tree.size

    @property
    def fallback_rate(self):
        return self.fallbacks / self.steps if self.steps else 0.0


def dt_policy(tree: DecisionTree, features: FeatureMap, product: ProductPomdp, allowed: AllowedTable,
              precision: int = 20) -> DTPolicy:
    return DTPolicy(tree, features, product, allowed, precision)
