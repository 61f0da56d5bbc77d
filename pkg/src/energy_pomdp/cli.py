"""Command-line front end: check, solve, learn, eval, bench.

Each subcommand reads and writes plain files so stages can be swapped for
external tools.  Exit status: 0 success, 1 infeasible instance, 2 bad
input.  Every output file starts with ``#`` lines echoing the configuration
(the training-set CSV excepted, to keep it readable by other tools).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import __version__
from .benchmarks import (
    HALLWAY_LAYOUTS,
    RockSampleSpec,
    corridor,
    energy_tiger,
    gen_hallway,
    gen_rocksample,
    hallway_spec,
    parse_hallway_map,
)
from .fileformat import ModelFileError, TrainingSetError, emit_model, load_model, read_training_set, write_training_set
from .model import Pomdp, RawPomdp, determinize_observations
from .product import as_product
from .qualitative import DEFAULT_VERTEX_LIMIT, SupportExplosion, analyze, sigma_all
from .rtdp import DEFAULT_CUTOFF, DEFAULT_PRECISION, ValueTable, greedy_policy, mdp_heuristic, solve
from .simulate import evaluate, format_traces, report_csv, report_table
from .trees import (
    FeatureMap,
    TrainingSet,
    dt_policy,
    export_tree_dot,
    generate_training_data,
    grid_features_for,
    learn_tree,
    prune_tree,
    raw_features,
    tree_from_text,
    tree_to_text,
)

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad user input, reported as ``file:line: message``."""

    def __init__(self, path, message: str, line: int | None = None):
        self.path = str(path)
        self.line = line
        super().__init__(message)

    def __str__(self) -> str:
        where = f"{self.path}:{self.line}" if self.line is not None else self.path
        return f"{where}: {self.args[0]}"


class Infeasible(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _header(args: argparse.Namespace) -> str:
    """Configuration echo, one ``key = value`` per line, in a fixed order."""
    skip = {"func"}
    lines = [f"energy-pomdp {__version__} {args.command}"]
    for key in sorted(vars(args)):
        if key in skip or key == "command":
            continue
        lines.append(f"{key} = {getattr(args, key)}")
    return "\n".join(lines)


def _comment(header: str) -> str:
    return "".join(f"# {line}\n" for line in header.splitlines())


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(path, e.strerror or str(e)) from None


def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise InputError(path, e.strerror or str(e)) from None


def _load(path, cap: int | None) -> Pomdp:
    try:
        mf = load_model(path)
    except ModelFileError as e:
        raise InputError(path, e.message, e.line) from None
    except OSError as e:
        raise InputError(path, e.strerror or str(e)) from None
    model = mf.model
    if cap is not None:
        if cap < 0:
            raise InputError(path, "--cap must be non-negative")
        model = dataclasses.replace(model, capacity=cap)
    if isinstance(model, RawPomdp):
        model = determinize_observations(model)
    return model


def _analyze(path, model: Pomdp, vertex_limit: int):
    product = as_product(model)
    try:
        q = analyze(product, vertex_limit)
    except SupportExplosion as e:
        raise InputError(path, str(e)) from None
    return product, q


def _features(kind: str, model: Pomdp, path) -> FeatureMap:
    if kind == "raw":
        return raw_features(model.state_names)
    try:
        return grid_features_for(model.state_names)
    except ValueError as e:
        raise InputError(path, f"--features grid: {e}") from None


def _load_table(path) -> ValueTable:
    try:
        return ValueTable.from_text(_read(path))
    except ValueError as e:
        msg = str(e)
        head, sep, rest = msg.partition(": ")
        if sep and head.isdigit():
            raise InputError(path, rest, int(head)) from None
        raise InputError(path, msg) from None


def _check_table(path, table: ValueTable, model: Pomdp, precision: int) -> None:
    if table.n_base != model.n_states:
        raise InputError(path, f"table is for {table.n_base} states, model has {model.n_states}")
    if table.precision != precision:
        raise InputError(path, f"table precision {table.precision} differs from --precision {precision}")


def _heuristic(name: str, product):
    return mdp_heuristic(product) if name == "mdp" else None


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    model = _load(args.model, args.cap)
    product, q = _analyze(args.model, model, args.vertex_limit)
    verdict = "feasible" if q.feasible else "infeasible"
    text = _comment(_header(args))
    text += f"# product states: {product.n_states}\n# belief supports: {len(q.graph)}\n"
    text += f"result: {verdict}\n" + q.allowed.to_text()
    if args.out:
        _write(args.out, text)
    print(verdict)
    return EXIT_OK if q.feasible else EXIT_INFEASIBLE


def cmd_solve(args) -> int:
    model = _load(args.model, args.cap)
    product, q = _analyze(args.model, model, args.vertex_limit)
    if not q.feasible:
        raise Infeasible(f"{args.model}: instance is infeasible; nothing to solve")
    table = None
    if args.warm_start:
        table = _load_table(args.warm_start)
        _check_table(args.warm_start, table, model, args.precision)
    res = solve(product, q.allowed, args.trials, args.precision, args.cutoff, args.seed,
                _heuristic(args.heuristic, product), table)
    header = _header(args)
    _write(args.out, res.table.to_text(header))
    if args.trace:
        lines = [_comment(header), "trial,outcome,cost\n"]
        lines += [f"{i},{o},{c:g}\n" for i, (o, c) in enumerate(zip(res.outcomes, res.trace))]
        _write(args.trace, "".join(lines))
    print(f"table entries: {len(res.table)}")
    return EXIT_OK


def cmd_learn(args) -> int:
    model = _load(args.model, args.cap)
    features = _features(args.features, model, args.model)
    prefix = Path(args.out)
    if args.data:
        try:
            names, records = read_training_set(_read(args.data))
        except TrainingSetError as e:
            raise InputError(args.data, e.message, e.line) from None
        if tuple(names) != features.names:
            raise InputError(args.data, "training-set header does not match the selected feature map", 1)
        data = TrainingSet.from_records(names, records)
    else:
        if not args.table:
            raise InputError(args.model, "learn needs --table or --data")
        product, q = _analyze(args.model, model, args.vertex_limit)
        if not q.feasible:
            raise Infeasible(f"{args.model}: instance is infeasible")
        table = _load_table(args.table)
        _check_table(args.table, table, model, args.precision)
        policy = greedy_policy(product, q.allowed, table, _heuristic(args.heuristic, product))
        data = generate_training_data(policy, product, features, args.sims, args.length, args.seed, args.precision)
        _write(prefix.with_suffix(".csv"), write_training_set(data.records(), data.names))
    if len(data) == 0:
        raise InputError(args.data or args.table, "training set is empty")
    tree = learn_tree(data, args.criterion, args.min_leaf, args.max_depth, model.n_actions, model.action_names)
    tree = prune_tree(tree, data, args.alpha)
    header = _header(args) + f"\nrecords = {len(data)}\nnodes = {tree.size}"
    _write(prefix.with_suffix(".tree"), _comment(header) + tree_to_text(tree) + "\n")
    _write(prefix.with_suffix(".dot"), "".join(f"// {line}\n" for line in header.splitlines())
           + export_tree_dot(tree, action_names=model.action_names))
    print(f"records: {len(data)}  tree nodes: {tree.size}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = _load(args.model, args.cap)
    product, q = _analyze(args.model, model, args.vertex_limit)
    if not q.feasible:
        raise Infeasible(f"{args.model}: instance is infeasible; no energy-safe policy to evaluate")
    name = args.name or Path(args.model).stem
    policies = [sigma_all(q.allowed)]
    if args.table:
        table = _load_table(args.table)
        _check_table(args.table, table, model, args.precision)
        policies.append(greedy_policy(product, q.allowed, table, _heuristic(args.heuristic, product)))
    for path in args.tree or []:
        features = _features(args.features, model, args.model)
        try:
            tree = tree_from_text(_read(path), features.names, model.action_names)
        except ValueError as e:
            raise InputError(path, str(e)) from None
        if tree.root.size() and max(_actions(tree.root)) >= model.n_actions:
            raise InputError(path, "tree names an action outside the model")
        p = dt_policy(tree, features, product, q.allowed, args.precision)
        p.name = f"dt:{Path(path).stem}"
        policies.append(p)
    reports = [evaluate(p, product, args.sims, args.cutoff, args.seed, name, args.trace_runs if args.trace else 0)
               for p in policies]
    header = _comment(_header(args))
    table_text = report_table(reports)
    if args.out:
        _write(args.out, header + table_text)
    if args.csv:
        _write(args.csv, header + report_csv(reports))
    if args.trace:
        _write(args.trace, header + "".join(f"# policy {r.policy}\n" + format_traces(product, r.traces) for r in reports))
    sys.stdout.write(table_text)
    return EXIT_OK


def _actions(node):
    if node.is_leaf:
        yield node.action
    else:
        yield from _actions(node.true)
        yield from _actions(node.false)


def cmd_bench(args) -> int:
    family = args.family
    if family == "hallway":
        kwargs = dict(capacity=10 if args.cap is None else args.cap, forward_ok=args.forward_ok,
                      slip=args.slip, turn_fail=args.turn_fail, obs_noise=args.obs_noise)
        try:
            if args.map:
                spec = parse_hallway_map(_read(args.map), name=Path(args.map).stem, **kwargs)
            else:
                spec = hallway_spec(args.layout, **kwargs)
        except ValueError as e:
            raise InputError(args.map or "--layout", str(e)) from None
        model = gen_hallway(spec)
    elif family == "rocksample":
        try:
            spec = RockSampleSpec(args.n, args.k, capacity=7 if args.cap is None else args.cap,
                                  half_distance=args.half_distance)
        except ValueError as e:
            raise InputError("--n/--k", str(e)) from None
        model = gen_rocksample(spec)
    elif family == "tiger":
        model = energy_tiger(3 if args.cap is None else args.cap)
    else:
        model = corridor(args.length, 3 if args.cap is None else args.cap, args.reload_at)
    text = _comment(_header(args)) + emit_model(model)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, model: bool = True) -> None:
    if model:
        p.add_argument("model", help="model file")
    p.add_argument("--cap", type=int, default=None, help="override the capacity (0 disables the energy objective)")
    p.add_argument("--vertex-limit", type=int, default=DEFAULT_VERTEX_LIMIT, help="belief-support limit")


def _precision(p):
    p.add_argument("--precision", "-B", type=int, default=DEFAULT_PRECISION, help="belief discretization B")
    p.add_argument("--heuristic", choices=("zero", "mdp"), default="zero", help="value of unseen beliefs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="energy-pomdp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="qualitative analysis and allowed actions")
    _common(p)
    p.add_argument("--out", help="write the allowed-action table here")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", help="RTDP-Bel on the energy product")
    _common(p)
    _precision(p)
    p.add_argument("--trials", type=int, default=3000)
    p.add_argument("--cutoff", type=int, default=DEFAULT_CUTOFF)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--warm-start", help="continue from this value table")
    p.add_argument("--trace", help="write per-trial costs here")
    p.add_argument("--out", required=True, help="value table output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("learn", help="training data and decision tree")
    _common(p)
    _precision(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--table", help="value table whose greedy policy is simulated")
    src.add_argument("--data", help="existing training set (CSV)")
    p.add_argument("--sims", type=int, default=1000, help="number of simulations m")
    p.add_argument("--length", type=int, default=250, help="steps per simulation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--criterion", choices=("infogain", "gini"), default="infogain")
    p.add_argument("--min-leaf", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--alpha", type=float, default=1.0, help="cost-complexity weight per leaf")
    p.add_argument("--features", choices=("raw", "grid"), default="raw")
    p.add_argument("--out", required=True, help="output prefix for .csv, .tree and .dot")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("eval", help="Monte-Carlo comparison of policies")
    _common(p)
    _precision(p)
    p.add_argument("--table", help="evaluate the greedy policy of this value table")
    p.add_argument("--tree", action="append", help="evaluate this decision tree (repeatable)")
    p.add_argument("--features", choices=("raw", "grid"), default="raw")
    p.add_argument("--sims", type=int, default=10000)
    p.add_argument("--cutoff", type=int, default=DEFAULT_CUTOFF)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", help="instance name in the report")
    p.add_argument("--out", help="write the text report here")
    p.add_argument("--csv", help="write the comma-separated report here")
    p.add_argument("--trace", help="dump step traces here")
    p.add_argument("--trace-runs", type=int, default=1, help="runs per policy to trace")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="generate benchmark model files")
    p.add_argument("family", choices=("hallway", "rocksample", "tiger", "corridor"))
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--layout", choices=sorted(HALLWAY_LAYOUTS), default="6x6")
    p.add_argument("--map", help="hallway map file")
    p.add_argument("--forward-ok", type=float, default=1.0)
    p.add_argument("--slip", type=float, default=0.0)
    p.add_argument("--turn-fail", type=float, default=0.0)
    p.add_argument("--obs-noise", type=float, default=0.0)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--half-distance", type=float, default=2.0)
    p.add_argument("--length", type=int, default=5)
    p.add_argument("--reload-at", type=int, default=None)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"energy-pomdp: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Infeasible as e:
        print(f"energy-pomdp: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
