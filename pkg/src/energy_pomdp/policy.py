"""Common interface of executable policies.

A policy object is an executor with private per-run state.  Simulation code
drives it with ``reset(z)`` once, then alternates ``act(rng)`` and
``observe(a, z)``.  ``spawn()`` returns a fresh executor that shares any
read-only tables and caches, so one instance can be handed to each worker.
"""

from __future__ import annotations

import random


class ContractViolation(RuntimeError):
    """An executor reached a situation the qualitative analysis rules out."""


def uniform_choice(choices, rng: random.Random) -> int:
    """Uniform pick that consumes randomness only when there is a real choice."""
    return choices[rng.randrange(len(choices))] if len(choices) > 1 else choices[0]


class Policy:
    name = "policy"

    def spawn(self) -> "Policy":
        raise NotImplementedError

    def reset(self, z: int) -> None:
        raise NotImplementedError

    def act(self, rng: random.Random) -> int:
        raise NotImplementedError

    def observe(self, a: int, z: int) -> None:
        raise NotImplementedError

    @property
    def size(self) -> int | None:
        """Representation size (table entries, tree nodes) if meaningful."""
        return None

    @property
    def fallback_rate(self) -> float | None:
        return None


class FixedSequencePolicy(Policy):
    """Plays a fixed action list, then repeats the last action."""

    name = "fixed"

    def __init__(self, actions: list[int]):
        self.actions = list(actions)
        self.t = 0

    def spawn(self):
        return FixedSequencePolicy(self.actions)

    def reset(self, z):
        self.t = 0

    def act(self, rng):
        a = self.actions[min(self.t, len(self.actions) - 1)]
        self.t += 1
        return a

    def observe(self, a, z):
        pass
