"""In-memory POMDP models with energy annotations.

Two flavours exist. :class:`RawPomdp` carries a probabilistic observation
function ``O(s', a)(z)``; :class:`Pomdp` carries a deterministic observation
per state, which is what every algorithm in this package works with.
:func:`determinize_observations` converts the former into the latter by
pairing each state with the observation that was emitted on entering it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_TOL = 1e-9

#: Name of the observation appended by :func:`determinize_observations` to
#: label the states of the initial distribution.
INIT_OBSERVATION = "init"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pomdp:
    """Finite POMDP with deterministic observations and an energy objective.

    Arrays are dense and indexed by integer ids; the ``*_names`` tuples keep
    the identifiers from the source file.  ``capacity == 0`` means the energy
    objective is disabled.
    """

    state_names: tuple[str, ...]
    action_names: tuple[str, ...]
    obs_names: tuple[str, ...]
    transition: np.ndarray  # (S, A, S)
    obs: np.ndarray  # (S,) observation index of each state
    initial: np.ndarray  # (S,)
    cost: np.ndarray  # (S, A) positive integers
    energy: np.ndarray  # (A, Z) integer resource change
    capacity: int
    targets: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "transition", _freeze(np.asarray(self.transition, dtype=float)))
        object.__setattr__(self, "obs", _freeze(np.asarray(self.obs, dtype=np.int64)))
        object.__setattr__(self, "initial", _freeze(np.asarray(self.initial, dtype=float)))
        object.__setattr__(self, "cost", _freeze(np.asarray(self.cost, dtype=np.int64)))
        object.__setattr__(self, "energy", _freeze(np.asarray(self.energy, dtype=np.int64)))
        object.__setattr__(self, "targets", frozenset(int(t) for t in self.targets))
        object.__setattr__(self, "capacity", int(self.capacity))

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    @property
    def n_obs(self) -> int:
        return len(self.obs_names)

    def successors(self, s: int, a: int) -> list[tuple[int, float]]:
        row = self.transition[s, a]
        return [(int(t), float(row[t])) for t in np.flatnonzero(row)]

    def energy_change(self, s: int, a: int) -> int:
        """Resource change of playing ``a`` in ``s`` (looked up by ``O(s)``)."""
        return int(self.energy[a, self.obs[s]])

    def same_as(self, other: "Pomdp", atol: float = 1e-12) -> bool:
        """Structural equality up to ``atol`` on probabilities."""
        if not isinstance(other, Pomdp):
            return False
        return (
            self.state_names == other.state_names
            and self.action_names == other.action_names
            and self.obs_names == other.obs_names
            and self.capacity == other.capacity
            and self.targets == other.targets
            and np.array_equal(self.obs, other.obs)
            and np.array_equal(self.cost, other.cost)
            and np.array_equal(self.energy, other.energy)
            and np.allclose(self.transition, other.transition, rtol=0, atol=atol)
            and np.allclose(self.initial, other.initial, rtol=0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class RawPomdp:
    """POMDP whose observation function is ``O(s', a) -> distribution over Z``.

    ``init_energy`` is the resource change applied to the very first action,
    taken before any observation other than the initial one was received.  If
    omitted, the per-action minimum of ``energy`` over observations is used.
    """

    state_names: tuple[str, ...]
    action_names: tuple[str, ...]
    obs_names: tuple[str, ...]
    transition: np.ndarray  # (S, A, S)
    observation: np.ndarray  # (S', A, Z): probability of z on entering s' via a
    initial: np.ndarray
    cost: np.ndarray
    energy: np.ndarray  # (A, Z)
    capacity: int
    targets: frozenset[int]
    init_energy: np.ndarray | None = field(default=None)

    def __post_init__(self):
        for name in ("transition", "observation", "initial"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=float)))
        object.__setattr__(self, "cost", _freeze(np.asarray(self.cost, dtype=np.int64)))
        object.__setattr__(self, "energy", _freeze(np.asarray(self.energy, dtype=np.int64)))
        if self.init_energy is None:
            init = self.energy.min(axis=1) if self.energy.size else np.zeros(len(self.action_names))
        else:
            init = self.init_energy
        object.__setattr__(self, "init_energy", _freeze(np.asarray(init, dtype=np.int64)))
        object.__setattr__(self, "targets", frozenset(int(t) for t in self.targets))
        object.__setattr__(self, "capacity", int(self.capacity))

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    @property
    def n_obs(self) -> int:
        return len(self.obs_names)

    def same_as(self, other: "RawPomdp", atol: float = 1e-12) -> bool:
        if not isinstance(other, RawPomdp):
            return False
        return (
            self.state_names == other.state_names
            and self.action_names == other.action_names
            and self.obs_names == other.obs_names
            and self.capacity == other.capacity
            and self.targets == other.targets
            and np.array_equal(self.cost, other.cost)
            and np.array_equal(self.energy, other.energy)
            and np.array_equal(self.init_energy, other.init_energy)
            and np.allclose(self.transition, other.transition, rtol=0, atol=atol)
            and np.allclose(self.observation, other.observation, rtol=0, atol=atol)
            and np.allclose(self.initial, other.initial, rtol=0, atol=atol)
        )


def _check_common(model, violations: list[str]) -> None:
    n_s, n_a = model.n_states, model.n_actions
    if model.transition.shape != (n_s, n_a, n_s):
        violations.append(f"transition array has shape {model.transition.shape}, expected {(n_s, n_a, n_s)}")
        return
    if np.any(model.transition < 0):
        violations.append("negative transition probability")
    sums = model.transition.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > PROB_TOL)):
        violations.append(
            f"transition ({model.state_names[s]}, {model.action_names[a]}) sums to {sums[s, a]:.12g}"
        )
    if model.cost.shape != (n_s, n_a):
        violations.append(f"cost array has shape {model.cost.shape}, expected {(n_s, n_a)}")
    else:
        for s, a in zip(*np.nonzero(model.cost <= 0)):
            violations.append(
                f"non-positive cost {model.cost[s, a]} at ({model.state_names[s]}, {model.action_names[a]})"
            )
    if model.initial.shape != (n_s,):
        violations.append("initial distribution has wrong length")
    else:
        if np.any(model.initial < 0):
            violations.append("negative initial probability")
        total = float(model.initial.sum())
        if abs(total - 1.0) > PROB_TOL:
            violations.append(f"initial distribution sums to {total:.12g}")
        if not np.any(model.initial > 0):
            violations.append("initial distribution has empty support")
    if model.energy.shape != (n_a, model.n_obs):
        violations.append(f"energy array has shape {model.energy.shape}, expected {(n_a, model.n_obs)}")
    if model.capacity < 0:
        violations.append(f"negative capacity {model.capacity}")
    for t in model.targets:
        if not 0 <= t < n_s:
            violations.append(f"target index {t} out of range")


def validate(model: Pomdp | RawPomdp) -> list[str]:
    """Return every invariant violation of ``model``; an empty list means valid."""
    violations: list[str] = []
    _check_common(model, violations)
    if isinstance(model, Pomdp):
        if model.obs.shape != (model.n_states,):
            violations.append("observation map has wrong length")
        elif np.any((model.obs < 0) | (model.obs >= model.n_obs)):
            violations.append("observation index out of range")
    else:
        shape = (model.n_states, model.n_actions, model.n_obs)
        if model.observation.shape != shape:
            violations.append(f"observation array has shape {model.observation.shape}, expected {shape}")
        else:
            sums = model.observation.sum(axis=2)
            for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > PROB_TOL)):
                violations.append(
                    f"observation ({model.state_names[s]}, {model.action_names[a]}) sums to {sums[s, a]:.12g}"
                )
    return violations


def determinize_observations(model: RawPomdp) -> Pomdp:
    """Fold the observation function into the state space.

    States become pairs ``(s, z)`` where ``z`` was observed on entering ``s``;
    the initial distribution sits on ``(s, init)`` with ``init`` a fresh
    observation.  Only pairs reachable from the initial distribution are kept.
    """
    n_a, n_z = model.n_actions, model.n_obs
    init_z = n_z
    obs_names = tuple(model.obs_names) + (INIT_OBSERVATION,)

    index: dict[tuple[int, int], int] = {}
    order: list[tuple[int, int]] = []

    def intern(pair):
        if pair not in index:
            index[pair] = len(order)
            order.append(pair)
        return index[pair]

    for s in np.flatnonzero(model.initial > 0):
        intern((int(s), init_z))

    rows: dict[tuple[int, int], dict[int, float]] = {}
    frontier = 0
    while frontier < len(order):
        s, z = order[frontier]
        src = frontier
        frontier += 1
        for a in range(n_a):
            out: dict[int, float] = {}
            for s2 in np.flatnonzero(model.transition[s, a]):
                p = model.transition[s, a, s2]
                for z2 in np.flatnonzero(model.observation[s2, a]):
                    q = p * model.observation[s2, a, z2]
                    j = intern((int(s2), int(z2)))
                    out[j] = out.get(j, 0.0) + q
            rows[(src, a)] = out

    n = len(order)
    trans = np.zeros((n, n_a, n))
    for (i, a), out in rows.items():
        for j, p in out.items():
            trans[i, a, j] = p
    obs = np.array([z for _, z in order], dtype=np.int64)
    initial = np.zeros(n)
    cost = np.zeros((n, n_a), dtype=np.int64)
    for i, (s, z) in enumerate(order):
        if z == init_z:
            initial[i] = model.initial[s]
        cost[i] = model.cost[s]
    energy = np.concatenate([model.energy, model.init_energy[:, None]], axis=1)
    names = tuple(f"{model.state_names[s]}|{obs_names[z]}" for s, z in order)
    targets = frozenset(i for i, (s, _) in enumerate(order) if s in model.targets)
    return Pomdp(
        state_names=names,
        action_names=tuple(model.action_names),
        obs_names=obs_names,
        transition=trans,
        obs=obs,
        initial=initial,
        cost=cost,
        energy=energy,
        capacity=model.capacity,
        targets=targets,
    )


def base_state_of(model: Pomdp, raw: RawPomdp) -> list[int]:
    """Map states of ``determinize_observations(raw)`` back to raw states."""
    lookup = {name: i for i, name in enumerate(raw.state_names)}
    return [lookup[name.rsplit("|", 1)[0]] for name in model.state_names]
