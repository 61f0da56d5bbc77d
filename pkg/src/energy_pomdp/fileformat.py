"""Reading and writing model files and training sets.

Model files use the classic textual POMDP format (``states:``, ``T:``,
``O:``, ``R:`` ...) with ``values: cost`` and three extra statements for
the energy objective::

    capacity: 5
    energy: move : * : -1      # <action|*> : <observation|*> : <int>
    target: goal               # <state|*>, repeatable

``energy`` lines are applied in order, later lines overriding earlier ones.
Costs are given by ``R: <a> : <s> : * : * <int>`` and must not depend on
the successor state or the observation.

The three energy statements extend the classic format; nothing else changes.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import INIT_OBSERVATION, Pomdp, RawPomdp, validate

__all__ = [
    "ModelFileError",
    "ModelSyntaxError",
    "ModelSemanticError",
    "TrainingSetError",
    "ModelFile",
    "parse_model",
    "emit_model",
    "load_model",
    "write_training_set",
    "read_training_set",
]

_KEYWORDS = {
    "discount", "values", "states", "actions", "observations", "start",
    "T", "O", "R", "capacity", "energy", "target",
}
_TOKEN = re.compile(r":|[^\s:]+")


class ModelFileError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


class ModelSyntaxError(ModelFileError):
    pass


class ModelSemanticError(ModelFileError):
    pass


class TrainingSetError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.message = message
        self.line = line
        super().__init__(f"{line}: {message}" if line is not None else message)


@dataclass
class ModelFile:
    path: Path | None
    model: Pomdp | RawPomdp
    dialect: str  # "plain" or "energy"


@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for m in _TOKEN.finditer(line):
            toks.append(_Tok(m.group(0), lineno, m.start() + 1))
    return toks


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0
        self.states: list[str] | None = None
        self.actions: list[str] | None = None
        self.observations: list[str] | None = None
        self.seen: set[str] = set()
        self.energy_used = False
        self.discount = None

    # -- token helpers -------------------------------------------------
    def peek(self, k: int = 0) -> _Tok | None:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def next(self, what: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("", 1, 1)
            raise ModelSyntaxError(f"unexpected end of input, expected {what}", last.line, last.col)
        self.pos += 1
        return tok

    def colon(self) -> None:
        tok = self.next("':'")
        if tok.text != ":":
            raise ModelSyntaxError(f"expected ':' but found {tok.text!r}", tok.line, tok.col)

    def at_statement(self) -> bool:
        tok = self.peek()
        if tok is None:
            return True
        nxt = self.peek(1)
        if tok.text not in _KEYWORDS:
            return False
        if tok.text == "start" and nxt is not None and nxt.text in ("include", "exclude"):
            return True
        return nxt is not None and nxt.text == ":"

    def number(self, what: str = "number") -> tuple[float, _Tok]:
        tok = self.next(what)
        try:
            return float(tok.text), tok
        except ValueError:
            raise ModelSyntaxError(f"expected {what} but found {tok.text!r}", tok.line, tok.col) from None

    def integer(self, what: str = "integer") -> tuple[int, _Tok]:
        tok = self.next(what)
        try:
            return int(tok.text), tok
        except ValueError:
            raise ModelSyntaxError(f"expected {what} but found {tok.text!r}", tok.line, tok.col) from None

    def numbers(self, n: int, what: str) -> np.ndarray:
        vals = []
        for _ in range(n):
            if self.at_statement():
                raise ModelSyntaxError(
                    f"expected {n} values ({what}), found {len(vals)}", self.stmt.line, self.stmt.col
                )
            vals.append(self.number(what)[0])
        return np.array(vals)

    def resolve(self, tok: _Tok, names: list[str] | None, kind: str, wildcard: bool = True) -> list[int]:
        if names is None:
            raise ModelSemanticError(f"{kind}s used before being declared", tok.line, tok.col)
        if wildcard and tok.text == "*":
            return list(range(len(names)))
        if tok.text in self._index(kind):
            return [self._index(kind)[tok.text]]
        if tok.text.isdigit() and int(tok.text) < len(names):
            return [int(tok.text)]
        raise ModelSemanticError(f"unknown {kind} {tok.text!r}", tok.line, tok.col)

    def _index(self, kind: str) -> dict[str, int]:
        cache = self.__dict__.setdefault("_idx", {})
        if kind not in cache:
            names = {"state": self.states, "action": self.actions, "observation": self.observations}[kind]
            cache[kind] = {name: i for i, name in enumerate(names)}
        return cache[kind]

    # -- statements ------------------------------------------------------
    def parse(self) -> Pomdp | RawPomdp:
        self.T = None
        self.O = None
        self.o_given = None
        self.R = None
        self.start = None
        self.capacity = 0
        self.energy_lines: list[tuple[list[int], list[int] | None, int]] = []
        self.targets: set[int] = set()
        while self.peek() is not None:
            tok = self.next("statement")
            self.stmt = tok
            if not self.at_statement_tok(tok):
                raise ModelSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)
            getattr(self, f"_st_{tok.text}")(tok)
        return self.build()

    def at_statement_tok(self, tok: _Tok) -> bool:
        self.pos -= 1
        ok = self.at_statement()
        self.pos += 1
        return ok

    def once(self, tok: _Tok) -> None:
        if tok.text in self.seen:
            raise ModelSemanticError(f"duplicate section {tok.text!r}", tok.line, tok.col)
        self.seen.add(tok.text)

    def _declare(self, tok: _Tok) -> list[str]:
        self.once(tok)
        self.colon()
        names = []
        while not self.at_statement():
            names.append(self.next("name").text)
        if not names:
            raise ModelSyntaxError(f"empty {tok.text} declaration", tok.line, tok.col)
        if len(names) == 1 and names[0].isdigit():
            return [str(i) for i in range(int(names[0]))]
        if len(set(names)) != len(names):
            raise ModelSemanticError(f"duplicate name in {tok.text}", tok.line, tok.col)
        return names

    def _need_dims(self, tok: _Tok) -> None:
        if self.states is None or self.actions is None or self.observations is None:
            raise ModelSemanticError("states, actions and observations must be declared first", tok.line, tok.col)
        if self.T is None:
            n_s, n_a, n_z = len(self.states), len(self.actions), len(self.observations)
            self.T = np.zeros((n_s, n_a, n_s))
            self.O = np.zeros((n_s, n_a, n_z))
            self.o_given = np.zeros((n_s, n_a), dtype=bool)
            self.R = np.zeros((n_s, n_a), dtype=np.int64)

    def _st_discount(self, tok):
        self.once(tok)
        self.colon()
        self.discount = self.number("discount")[0]

    def _st_values(self, tok):
        self.once(tok)
        self.colon()
        v = self.next("'cost'")
        if v.text != "cost":
            raise ModelSemanticError("only 'values: cost' is supported", v.line, v.col)

    def _st_states(self, tok):
        self.states = self._declare(tok)

    def _st_actions(self, tok):
        self.actions = self._declare(tok)

    def _st_observations(self, tok):
        self.observations = self._declare(tok)

    def _st_start(self, tok):
        self.once(tok)
        if self.states is None:
            raise ModelSemanticError("start before states", tok.line, tok.col)
        n = len(self.states)
        mode = self.peek()
        if mode is not None and mode.text in ("include", "exclude"):
            self.pos += 1
            self.colon()
            chosen: set[int] = set()
            while not self.at_statement():
                chosen.update(self.resolve(self.next("state"), self.states, "state", wildcard=False))
            if mode.text == "exclude":
                chosen = set(range(n)) - chosen
            if not chosen:
                raise ModelSemanticError("start distribution has empty support", tok.line, tok.col)
            self.start = np.zeros(n)
            self.start[sorted(chosen)] = 1.0 / len(chosen)
            return
        self.colon()
        first = self.peek()
        if first is not None and first.text == "uniform":
            self.pos += 1
            self.start = np.full(n, 1.0 / n)
            return
        if first is not None and _is_number(first.text) and not (first.text.isdigit() and self._lone_index()):
            self.start = self.numbers(n, "start probability")
        else:
            s = self.resolve(self.next("state"), self.states, "state", wildcard=False)[0]
            self.start = np.zeros(n)
            self.start[s] = 1.0

    def _lone_index(self) -> bool:
        # `start: 3` names a state when it is followed directly by a statement
        save = self.pos
        self.pos += 1
        lone = self.at_statement()
        self.pos = save
        return lone and len(self.states) > 1

    def _st_T(self, tok):
        self._need_dims(tok)
        self.colon()
        a = self.resolve(self.next("action"), self.actions, "action")
        if self.peek() is not None and self.peek().text == ":":
            self.colon()
            s = self.resolve(self.next("state"), self.states, "state")
            if self.peek() is not None and self.peek().text == ":":
                self.colon()
                s2 = self.resolve(self.next("state"), self.states, "state")
                p = self.number("probability")[0]
                for ai in a:
                    for si in s:
                        self.T[si, ai, s2] = p
            else:
                row = self._row(len(self.states), "probability")
                for ai in a:
                    for si in s:
                        self.T[si, ai] = row
        else:
            mat = self._matrix(len(self.states), len(self.states))
            for ai in a:
                self.T[:, ai] = mat

    def _st_O(self, tok):
        self._need_dims(tok)
        self.colon()
        a = self.resolve(self.next("action"), self.actions, "action")
        n_z = len(self.observations)
        if self.peek() is not None and self.peek().text == ":":
            self.colon()
            s = self.resolve(self.next("state"), self.states, "state")
            if self.peek() is not None and self.peek().text == ":":
                self.colon()
                z = self.resolve(self.next("observation"), self.observations, "observation")
                p = self.number("probability")[0]
                for ai in a:
                    for si in s:
                        self.O[si, ai, z] = p
                        self.o_given[si, ai] = True
            else:
                row = self._row(n_z, "probability")
                for ai in a:
                    for si in s:
                        self.O[si, ai] = row
                        self.o_given[si, ai] = True
        else:
            mat = self._matrix(len(self.states), n_z)
            for ai in a:
                self.O[:, ai] = mat
                self.o_given[:, ai] = True

    def _row(self, n: int, what: str) -> np.ndarray:
        tok = self.peek()
        if tok is not None and tok.text == "uniform":
            self.pos += 1
            return np.full(n, 1.0 / n)
        return self.numbers(n, what)

    def _matrix(self, rows: int, cols: int) -> np.ndarray:
        tok = self.peek()
        if tok is not None and tok.text == "uniform":
            self.pos += 1
            return np.full((rows, cols), 1.0 / cols)
        if tok is not None and tok.text == "identity":
            self.pos += 1
            if rows != cols:
                raise ModelSemanticError("identity is only valid for transitions", tok.line, tok.col)
            return np.eye(rows)
        return np.array([self.numbers(cols, "probability") for _ in range(rows)])

    def _st_R(self, tok):
        self._need_dims(tok)
        self.colon()
        a = self.resolve(self.next("action"), self.actions, "action")
        self.colon()
        s = self.resolve(self.next("state"), self.states, "state")
        for kind in ("state", "observation"):
            self.colon()
            t = self.next(kind)
            if t.text != "*":
                raise ModelSemanticError(
                    f"cost may only depend on state and action; use '*' for the {kind}", t.line, t.col
                )
        v, vt = self.number("cost")
        if v != int(v):
            raise ModelSemanticError(f"cost {vt.text} is not an integer", vt.line, vt.col)
        for ai in a:
            for si in s:
                self.R[si, ai] = int(v)

    def _st_capacity(self, tok):
        self.once(tok)
        self.colon()
        cap, ct = self.integer("capacity")
        if cap < 0:
            raise ModelSemanticError("capacity must be non-negative", ct.line, ct.col)
        self.capacity = cap
        self.energy_used = True

    def _st_energy(self, tok):
        self.energy_used = True
        self.colon()
        a = self.resolve(self.next("action"), self.actions, "action")
        self.colon()
        zt = self.next("observation")
        if zt.text == INIT_OBSERVATION and INIT_OBSERVATION not in (self.observations or []):
            z = None
        else:
            z = self.resolve(zt, self.observations, "observation")
        self.colon()
        v, _ = self.integer("energy change")
        self.energy_lines.append((a, z, v))

    def _st_target(self, tok):
        self.energy_used = True
        self.colon()
        self.targets.update(self.resolve(self.next("state"), self.states, "state"))

    # -- assembly --------------------------------------------------------
    def build(self) -> Pomdp | RawPomdp:
        last = self.toks[-1] if self.toks else _Tok("", 1, 1)
        for kind in ("states", "actions", "observations"):
            if getattr(self, kind) is None:
                raise ModelSemanticError(f"missing '{kind}' section", last.line, 1)
        n_s, n_a, n_z = len(self.states), len(self.actions), len(self.observations)
        if self.T is None:
            raise ModelSemanticError("no transitions given", last.line, 1)
        if self.start is None:
            self.start = np.full(n_s, 1.0 / n_s)
        missing = np.argwhere(self.T.sum(axis=2) == 0)
        if len(missing):
            s, a = missing[0]
            raise ModelSemanticError(
                f"transition row missing for ({self.states[s]}, {self.actions[a]})", last.line, 1
            )
        energy = np.zeros((n_a, n_z), dtype=np.int64)
        init_energy = None
        for a, z, v in self.energy_lines:
            if z is None:
                if init_energy is None:
                    init_energy = np.zeros(n_a, dtype=np.int64)
                init_energy[a] = v
            else:
                energy[np.ix_(a, z)] = v

        if n_z == 1 and not self.o_given.any():
            self.O[:, :, 0] = 1.0
            self.o_given[:] = True
        deterministic, obs = self._deterministic_obs()
        common = dict(
            state_names=tuple(self.states),
            action_names=tuple(self.actions),
            obs_names=tuple(self.observations),
            transition=self.T,
            initial=self.start,
            cost=self.R,
            energy=energy,
            capacity=self.capacity,
            targets=frozenset(self.targets),
        )
        if deterministic and init_energy is None:
            model: Pomdp | RawPomdp = Pomdp(obs=obs, **common)
        else:
            missing = np.argwhere(~self.o_given)
            if len(missing):
                s, a = missing[0]
                raise ModelSemanticError(
                    f"observation row missing for ({self.states[s]}, {self.actions[a]})", last.line, 1
                )
            model = RawPomdp(observation=self.O, init_energy=init_energy, **common)
        problems = validate(model)
        if problems:
            raise ModelSemanticError("; ".join(problems[:5]), last.line, 1)
        return model

    def _deterministic_obs(self) -> tuple[bool, np.ndarray | None]:
        n_s = len(self.states)
        obs = np.full(n_s, -1, dtype=np.int64)
        for s in range(n_s):
            if not self.o_given[s].all():
                return False, None
            rows = self.O[s]
            if not np.all(rows == rows[0]):
                return False, None
            nz = np.flatnonzero(rows[0])
            if len(nz) != 1 or rows[0, nz[0]] != 1.0:
                return False, None
            obs[s] = nz[0]
        return True, obs


def parse_model(text: str) -> Pomdp | RawPomdp:
    """Parse a model file.

    Returns a :class:`Pomdp` when every state has a single observation that
    does not depend on the action, otherwise a :class:`RawPomdp`.
    """
    return _Parser(text).parse()


def load_model(path: str | Path) -> ModelFile:
    path = Path(path)
    parser = _Parser(path.read_text(encoding="utf-8"))
    model = parser.parse()
    return ModelFile(path=path, model=model, dialect="energy" if parser.energy_used else "plain")


def _check_name(name: str) -> str:
    if not name or any(c.isspace() for c in name) or ":" in name or "#" in name or name == "*":
        raise ValueError(f"identifier {name!r} cannot be written to a model file")
    return name


def _fmt(p: float) -> str:
    return repr(float(p))


def emit_model(model: Pomdp | RawPomdp) -> str:
    """Render ``model`` in the file format understood by :func:`parse_model`."""
    out = io.StringIO()
    w = out.write
    S = [_check_name(n) for n in model.state_names]
    A = [_check_name(n) for n in model.action_names]
    Z = [_check_name(n) for n in model.obs_names]
    w("values: cost\n")
    w("states: " + " ".join(S) + "\n")
    w("actions: " + " ".join(A) + "\n")
    w("observations: " + " ".join(Z) + "\n")
    w("start: " + " ".join(_fmt(p) for p in model.initial) + "\n")
    if model.capacity:
        w(f"capacity: {model.capacity}\n")
    for t in sorted(model.targets):
        w(f"target: {S[t]}\n")
    w("\n")
    for s in range(model.n_states):
        for a in range(model.n_actions):
            for s2 in np.flatnonzero(model.transition[s, a]):
                w(f"T: {A[a]} : {S[s]} : {S[s2]} {_fmt(model.transition[s, a, s2])}\n")
    w("\n")
    if isinstance(model, Pomdp):
        if model.n_obs > 1:
            for s in range(model.n_states):
                w(f"O: * : {S[s]} : {Z[model.obs[s]]} 1.0\n")
    else:
        for s in range(model.n_states):
            for a in range(model.n_actions):
                for z in np.flatnonzero(model.observation[s, a]):
                    w(f"O: {A[a]} : {S[s]} : {Z[z]} {_fmt(model.observation[s, a, z])}\n")
    w("\n")
    for s in range(model.n_states):
        for a in range(model.n_actions):
            w(f"R: {A[a]} : {S[s]} : * : * {int(model.cost[s, a])}\n")
    energy_lines = []
    for a in range(model.n_actions):
        for z in range(model.n_obs):
            if model.energy[a, z]:
                energy_lines.append(f"energy: {A[a]} : {Z[z]} : {int(model.energy[a, z])}\n")
    if isinstance(model, RawPomdp):
        if INIT_OBSERVATION in Z:
            raise ValueError(f"observation name {INIT_OBSERVATION!r} is reserved in raw models")
        for a in range(model.n_actions):
            energy_lines.append(f"energy: {A[a]} : {INIT_OBSERVATION} : {int(model.init_energy[a])}\n")
    if energy_lines:
        w("\n")
        w("".join(energy_lines))
    return out.getvalue()


def write_training_set(records: Iterable[tuple[Sequence[int], int]], feature_names: Sequence[str]) -> str:
    """Comma-separated integers; header of feature names, label column last."""
    out = io.StringIO()
    names = list(feature_names)
    out.write(",".join(names + ["action"]) + "\n")
    for vec, action in records:
        if len(vec) != len(names):
            raise TrainingSetError(f"record has {len(vec)} features, expected {len(names)}")
        out.write(",".join(str(int(v)) for v in vec) + f",{int(action)}\n")
    return out.getvalue()


def read_training_set(text: str) -> tuple[list[str], list[tuple[tuple[int, ...], int]]]:
    lines = text.splitlines()
    if not lines:
        raise TrainingSetError("missing header", 1)
    header = lines[0].split(",")
    if len(header) < 2:
        raise TrainingSetError("header needs at least one feature and the label", 1)
    width = len(header)
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != width:
            raise TrainingSetError(f"expected {width} columns, found {len(cells)}", lineno)
        try:
            values = [int(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not c.strip().lstrip("-").isdigit())
            raise TrainingSetError(f"non-integer cell {bad!r}", lineno) from None
        records.append((tuple(values[:-1]), values[-1]))
    return header[:-1], records
