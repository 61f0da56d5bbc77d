"""Benchmark generators: Hallway mazes, RockSample, and small test instances.

Hallway maps use one character per cell::

    #  wall          .  free         +  start (free)
    R  reload        X  trap         G  goal

The grid is surrounded by an implicit wall.  Regular cells carry four
orientation states each; every goal and every trap cell is a single
absorbing state.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

import numpy as np

from .model import Pomdp, RawPomdp, determinize_observations

# ---------------------------------------------------------------------------
# Hallway

HEADINGS = "NESW"
_STEP = {0: (-1, 0), 1: (0, 1), 2: (1, 0), 3: (0, -1)}
HALLWAY_ACTIONS = ("forward", "left", "right")

# Reconstructed layouts.  Sizes follow the regular-cell counts behind the
# reference state counts (4 * regular + goals + traps).
HALLWAY_LAYOUTS = {
    "5x5": """
        #.X##
        #R###
        +..X#
        .+.##
        ...RG
    """,
    "6x6": """
        ##G#X.
        ...##.
        .#.#..
        ...R+#
        #.....
        ##X#+#
    """,
    "8x8": """
        ###X....
        #####...
        ##.##.#.
        ##.#..+.
        ##.#.#..
        ..+R...+
        #....R..
        G...#X#.
    """,
}


@dataclass
class HallwaySpec:
    """Maze map plus motion/observation noise and capacity.

    ``forward_ok`` is the probability that ``forward`` moves as intended;
    the rest is split between sliding sideways (``slip``, half each side)
    and staying put.  Turns fail (heading unchanged) with ``turn_fail``.
    ``obs_noise`` replaces the wall pattern by another one of the same cell
    kind with that total probability.
    """

    grid: list[str]
    capacity: int = 10
    forward_ok: float = 1.0
    slip: float = 0.0
    turn_fail: float = 0.0
    obs_noise: float = 0.0
    name: str = "hallway"

    def __post_init__(self):
        if not self.grid or len({len(r) for r in self.grid}) != 1:
            raise ValueError("hallway grid must be a non-empty rectangle")
        bad = {ch for row in self.grid for ch in row} - set("#.+RXG")
        if bad:
            raise ValueError(f"unknown map characters: {''.join(sorted(bad))}")
        if not any("+" in r for r in self.grid):
            raise ValueError("hallway map needs at least one start cell '+'")
        if not any("G" in r for r in self.grid):
            raise ValueError("hallway map needs at least one goal cell 'G'")
        if not 0 <= self.slip <= 1 - self.forward_ok + 1e-12 or not 0 <= self.forward_ok <= 1:
            raise ValueError("need 0 <= slip <= 1 - forward_ok")
        if not 0 <= self.turn_fail <= 1 or not 0 <= self.obs_noise < 1:
            raise ValueError("noise parameters out of range")

    @property
    def rows(self) -> int:
        return len(self.grid)

    @property
    def cols(self) -> int:
        return len(self.grid[0])

    def cell(self, r: int, c: int) -> str:
        if 0 <= r < self.rows and 0 <= c < self.cols:
            return self.grid[r][c]
        return "#"


def parse_hallway_map(text: str, **kwargs) -> HallwaySpec:
    rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
    return HallwaySpec(rows, **kwargs)


def hallway_spec(size: str, **kwargs) -> HallwaySpec:
    if size not in HALLWAY_LAYOUTS:
        raise ValueError(f"unknown hallway layout {size!r}; known: {', '.join(HALLWAY_LAYOUTS)}")
    kwargs.setdefault("name", f"Hallway{size}")
    return parse_hallway_map(HALLWAY_LAYOUTS[size], **kwargs)


def _wall_bits(spec: HallwaySpec, r: int, c: int, h: int) -> str:
    """Walls in front, left, right, behind (1 = wall) relative to heading ``h``."""
    bits = []
    for rel in (0, 3, 1, 2):
        dr, dc = _STEP[(h + rel) % 4]
        bits.append("1" if spec.cell(r + dr, c + dc) == "#" else "0")
    return "".join(bits)


def gen_hallway(spec: HallwaySpec) -> Pomdp:
    """Hallway model: position x heading, actions forward / left / right.

    Every action costs 1 and uses one unit of energy, except that acting on
    a reload cell refills to capacity.
    """
    states: list[str] = []
    index: dict[tuple, int] = {}
    for r in range(spec.rows):
        for c in range(spec.cols):
            ch = spec.grid[r][c]
            if ch == "#":
                continue
            if ch in "GX":
                index[(r, c, None)] = len(states)
                states.append(f"r{r + 1}c{c + 1}{ch}")
            else:
                for h in range(4):
                    index[(r, c, h)] = len(states)
                    states.append(f"r{r + 1}c{c + 1}{HEADINGS[h]}")

    def locate(r, c, h):
        return index[(r, c, None)] if spec.cell(r, c) in "GX" else index[(r, c, h)]

    obs_names: list[str] = []
    obs_index: dict[str, int] = {}
    kind_of: list[str] = []

    def obs_id(name: str, kind: str) -> int:
        if name not in obs_index:
            obs_index[name] = len(obs_names)
            obs_names.append(name)
            kind_of.append(kind)
        return obs_index[name]

    n, n_a = len(states), len(HALLWAY_ACTIONS)
    trans = np.zeros((n, n_a, n))
    true_obs = np.zeros(n, dtype=np.int64)
    for (r, c, h), s in index.items():
        ch = spec.grid[r][c]
        if h is None:
            true_obs[s] = obs_id("goal" if ch == "G" else "trap", ch)
            trans[s, :, s] = 1.0
            continue
        kind = "R" if ch == "R" else "."
        true_obs[s] = obs_id(("reload-" if kind == "R" else "cell-") + _wall_bits(spec, r, c, h), kind)

        def move(dr, dc):
            rr, cc = r + dr, c + dc
            return (rr, cc) if spec.cell(rr, cc) != "#" else (r, c)

        # forward
        stay = 1.0 - spec.forward_ok - spec.slip
        outcomes = [(move(*_STEP[h]), spec.forward_ok), ((r, c), stay)]
        for side in (3, 1):
            outcomes.append((move(*_STEP[(h + side) % 4]), spec.slip / 2))
        for (rr, cc), p in outcomes:
            if p > 0:
                trans[s, 0, locate(rr, cc, h)] += p
        for a, turn in ((1, 3), (2, 1)):
            trans[s, a, index[(r, c, (h + turn) % 4)]] += 1.0 - spec.turn_fail
            trans[s, a, s] += spec.turn_fail

    energy = np.full((n_a, len(obs_names)), -1, dtype=np.int64)
    for z, kind in enumerate(kind_of):
        if kind == "R":
            energy[:, z] = spec.capacity
    initial = np.zeros(n)
    starts = [index[(r, c, h)] for (r, c, h) in index if h is not None and spec.grid[r][c] == "+"]
    initial[starts] = 1.0 / len(starts)
    targets = frozenset(s for (r, c, h), s in index.items() if h is None and spec.grid[r][c] == "G")
    cost = np.ones((n, n_a), dtype=np.int64)
    if spec.obs_noise == 0:
        return Pomdp(tuple(states), HALLWAY_ACTIONS, tuple(obs_names), trans, true_obs, initial, cost,
                     energy, spec.capacity, targets)

    observation = np.zeros((n, n_a, len(obs_names)))
    for s in range(n):
        z = true_obs[s]
        peers = [w for w in range(len(obs_names)) if kind_of[w] == kind_of[z] and w != z]
        if not peers:
            observation[s, :, z] = 1.0
            continue
        observation[s, :, z] = 1.0 - spec.obs_noise
        for w in peers:
            observation[s, :, w] = spec.obs_noise / len(peers)
    raw = RawPomdp(tuple(states), HALLWAY_ACTIONS, tuple(obs_names), trans, observation, initial, cost,
                   energy, spec.capacity, targets)
    return determinize_observations(raw)


# ---------------------------------------------------------------------------
# RockSample

ROCK_OBS = ("none", "good", "bad", "fuel")

# Fixed rock positions (row, col), 1-based, row 1 on top.
ROCK_LAYOUTS = {
    (3, 4): ((1, 3), (2, 3), (3, 1), (3, 3)),
    (4, 2): ((2, 2), (4, 4)),
    (4, 3): ((1, 2), (4, 1), (3, 3)),
    (4, 4): ((1, 2), (4, 1), (3, 3), (2, 4)),
}


def default_rocks(n: int, k: int) -> tuple[tuple[int, int], ...]:
    if (n, k) in ROCK_LAYOUTS:
        return ROCK_LAYOUTS[(n, k)]
    if k > n * n:
        raise ValueError("more rocks than cells")
    cells = [(r, c) for r in range(1, n + 1) for c in range(1, n + 1)]
    return tuple(sorted(random.Random(n * 1000 + k).sample(cells, k)))


@dataclass
class RockSampleSpec:
    """Rover on an ``n x n`` grid with ``k`` rocks; leaving east is the goal.

    Checking rock ``i`` from distance ``d`` reports its quality correctly
    with probability ``0.5 + 0.5 * 2 ** (-d / half_distance)``.  Every
    action costs 1; leaving costs ``missed_penalty`` extra per good rock
    left behind and sampling a bad rock costs ``bad_sample_penalty`` extra.
    """

    n: int
    k: int
    capacity: int = 7
    rocks: tuple[tuple[int, int], ...] | None = None
    start: tuple[int, int] | None = None
    half_distance: float = 2.0
    check_energy: int = 0
    missed_penalty: int = 0
    bad_sample_penalty: int = 0
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.k < 0:
            raise ValueError("need n >= 1 and k >= 0")
        if self.rocks is None:
            self.rocks = default_rocks(self.n, self.k)
        self.rocks = tuple(tuple(p) for p in self.rocks)
        if len(self.rocks) != self.k:
            raise ValueError("number of rock positions differs from k")
        if len(set(self.rocks)) != self.k:
            raise ValueError("rock positions must be distinct")
        if any(not (1 <= r <= self.n and 1 <= c <= self.n) for r, c in self.rocks):
            raise ValueError("rock outside the grid")
        if self.start is None:
            self.start = ((self.n + 1) // 2, 1)
        if self.half_distance <= 0:
            raise ValueError("half_distance must be positive")
        if self.missed_penalty < 0 or self.bad_sample_penalty < 0:
            raise ValueError("penalties must be non-negative")
        if not self.name:
            self.name = f"RockSample[{self.n},{self.k}]"


def check_accuracy(spec: RockSampleSpec, pos: tuple[int, int], rock: int) -> float:
    (r, c), (rr, rc) = pos, spec.rocks[rock]
    d = float(np.hypot(r - rr, c - rc))
    return 0.5 + 0.5 * 2.0 ** (-d / spec.half_distance)


def gen_rocksample(spec: RockSampleSpec) -> Pomdp:
    """RockSample with energy: moves use 1 unit, sampling 2, checks ``check_energy``.

    Sampling a good rock turns it bad and yields the ``fuel`` observation;
    whatever the rover does next refills the tank.  The observation after
    a check is remembered in the state so that observations are a function
    of the state.
    """
    n, k = spec.n, spec.k
    actions = ("north", "south", "east", "west", "sample") + tuple(f"check{i + 1}" for i in range(k))
    rock_at = {p: i for i, p in enumerate(spec.rocks)}
    names: list[str] = []
    index: dict[tuple, int] = {}
    for r, c in itertools.product(range(1, n + 1), repeat=2):
        for config in range(2 ** k):
            for z, zname in enumerate(ROCK_OBS):
                if zname == "fuel" and ((r, c) not in rock_at or config >> rock_at[(r, c)] & 1):
                    continue
                if zname in ("good", "bad") and k == 0:
                    continue
                index[(r, c, config, z)] = len(names)
                bits = format(config, f"0{k}b")[::-1] if k else "-"
                names.append(f"r{r}c{c}_{bits}_{zname}")
    exit_state = len(names)
    names.append("exit")
    S, A = len(names), len(actions)
    trans = np.zeros((S, A, S))
    obs = np.zeros(S, dtype=np.int64)
    cost = np.ones((S, A), dtype=np.int64)
    for (r, c, config, z), s in index.items():
        obs[s] = z
        if c == n:
            cost[s, 2] += spec.missed_penalty * bin(config).count("1")
        for a, (dr, dc) in enumerate(((-1, 0), (1, 0), (0, 1), (0, -1))):
            rr, cc = r + dr, c + dc
            if cc > n:
                trans[s, a, exit_state] = 1.0
            elif 1 <= rr <= n and cc >= 1:
                trans[s, a, index[(rr, cc, config, 0)]] = 1.0
            else:
                trans[s, a, index[(r, c, config, 0)]] = 1.0
        i = rock_at.get((r, c))
        if i is not None and config >> i & 1:
            trans[s, 4, index[(r, c, config & ~(1 << i), 3)]] = 1.0
        else:
            if i is not None:
                cost[s, 4] += spec.bad_sample_penalty
            trans[s, 4, index[(r, c, config, 0)]] = 1.0
        for i in range(k):
            eta = check_accuracy(spec, (r, c), i)
            good = config >> i & 1
            p_good = eta if good else 1.0 - eta
            trans[s, 5 + i, index[(r, c, config, 1)]] += p_good
            trans[s, 5 + i, index[(r, c, config, 2)]] += 1.0 - p_good
    obs[exit_state] = 0
    trans[exit_state, :, exit_state] = 1.0
    energy = np.full((A, len(ROCK_OBS)), -1, dtype=np.int64)
    energy[4, :] = -2
    energy[5:, :] = spec.check_energy
    energy[:, 3] = spec.capacity
    initial = np.zeros(S)
    r0, c0 = spec.start
    for config in range(2 ** k):
        initial[index[(r0, c0, config, 0)]] = 1.0 / 2 ** k
    return Pomdp(tuple(names), actions, ROCK_OBS, trans, obs, initial, cost, energy, spec.capacity,
                 frozenset({exit_state}))


# ---------------------------------------------------------------------------
# small instances


def energy_tiger(capacity: int = 3, accuracy: float = 0.85, penalty: int = 100) -> Pomdp:
    """Tiger with a battery: listening drains it, recharging costs time.

    Opening the tiger's door costs ``penalty``, the other door costs 1; both
    end the episode.  Observations are noisy, so the raw model is
    determinized.
    """
    states = ("tiger-left", "tiger-right", "done")
    actions = ("listen", "open-left", "open-right", "recharge")
    observations = ("hear-left", "hear-right", "none")
    trans = np.zeros((3, 4, 3))
    for s in (0, 1):
        trans[s, 0, s] = 1.0
        trans[s, 3, s] = 1.0
        trans[s, 1, 2] = trans[s, 2, 2] = 1.0
    trans[2, :, 2] = 1.0
    observation = np.zeros((3, 4, 3))
    observation[:, :, 2] = 1.0
    for s in (0, 1):
        observation[s, 0] = 0.0
        observation[s, 0, s] = accuracy
        observation[s, 0, 1 - s] = 1.0 - accuracy
    cost = np.array([[1, penalty, 1, 2], [1, 1, penalty, 2], [1, 1, 1, 1]])
    energy = np.zeros((4, 3), dtype=np.int64)
    energy[0, :] = -1
    energy[3, :] = capacity
    raw = RawPomdp(states, actions, observations, trans, observation, np.array([0.5, 0.5, 0.0]), cost,
                   energy, capacity, frozenset({2}), init_energy=energy[:, 2])
    return determinize_observations(raw)


def corridor(length: int = 5, capacity: int = 3, reload_at: int | None = None) -> Pomdp:
    """Chain ``c0 -> ... -> c{length-1}``; the last cell is the target.

    ``forward`` advances, ``wait`` stays; both use one unit of energy.  A
    reload cell (if any) refills the tank for whatever is played there.
    """
    names = tuple(f"c{i}" for i in range(length))
    trans = np.zeros((length, 2, length))
    for i in range(length):
        trans[i, 0, min(i + 1, length - 1)] = 1.0
        trans[i, 1, i] = 1.0
    obs = np.zeros(length, dtype=np.int64)
    obs_names = ("plain",)
    energy = np.full((2, 1), -1, dtype=np.int64)
    if reload_at is not None:
        obs[reload_at] = 1
        obs_names = ("plain", "reload")
        energy = np.array([[-1, capacity], [-1, capacity]])
    initial = np.zeros(length)
    initial[0] = 1.0
    return Pomdp(names, ("forward", "wait"), obs_names, trans, obs, initial, np.ones((length, 2), dtype=np.int64),
                 energy, capacity, frozenset({length - 1}))


@dataclass
class BenchmarkInstance:
    name: str
    model: Pomdp
    features: str = "raw"
    meta: dict = field(default_factory=dict)


def standard_instances() -> list[BenchmarkInstance]:
    """The instances used for the reference comparison."""
    out = []
    for size in ("6x6", "8x8"):
        spec = hallway_spec(size)
        out.append(BenchmarkInstance(spec.name, gen_hallway(spec), "grid"))
    rs = RockSampleSpec(3, 4)
    out.append(BenchmarkInstance(rs.name, gen_rocksample(rs), "raw"))
    return out
