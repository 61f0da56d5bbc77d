"""Monte-Carlo evaluation of policies on the energy product.

Every run draws from its own random stream ``(seed, run index)``, so results
do not depend on how runs are distributed over worker threads.  The energy
level is recomputed from base states and actions alongside the simulation
and any step that would exhaust it before the target is counted as a
violation.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .policy import Policy
from .product import ProductPomdp
from .rng import stream

THREADS_ENV = "ENERGY_POMDP_THREADS"


@dataclass(frozen=True)
class TraceStep:
    state: int  # product state the action was played in
    action: int
    obs: int  # observation received after the action
    energy: int  # level after the action, recomputed from the base model
    cost: int
    target: bool = False  # the successor is a target


@dataclass
class RunResult:
    cost: int
    steps: int
    outcome: str  # "target", "sink" or "cutoff"
    violations: int
    trace: list[TraceStep] | None = None


def energy_violations(trace: Sequence[TraceStep]) -> int:
    """Steps up to and including the first target hit whose energy level is <= 0."""
    count = 0
    for step in trace:
        if step.energy <= 0:
            count += 1
        if step.target:
            break
    return count


def run_once(policy: Policy, product: ProductPomdp, rng, cutoff: int, keep_trace: bool = False) -> RunResult:
    """One run of ``policy`` (an executor already spawned for this thread).

    A run entering the sink keeps paying cost 1 per step there, so its cost
    is extended to the cutoff without simulating the remaining steps.
    """
    base = product.base
    targets = product.targets
    audit = product.energy_enabled
    cap = base.capacity
    base_obs = base.obs
    energy = base.energy
    pairs = product.pairs
    obs = product.obs
    sink = product.sink

    s = product.sample_initial(rng)
    policy.reset(obs[s])
    level = cap
    total = steps = violations = 0
    trace: list[TraceStep] | None = [] if keep_trace else None
    outcome = "cutoff"
    while True:
        if s in targets:
            outcome = "target"
            break
        if s == sink:
            outcome = "sink"
            total += cutoff - steps
            break
        if steps >= cutoff:
            break
        a = policy.act(rng)
        c = int(product.cost[s, a])
        if audit:
            bs = pairs[s][0]
            level = min(cap, level + int(energy[a, base_obs[bs]]))
            if level <= 0:
                violations += 1
        total += c
        s_next = product.sample_next(s, a, rng)
        steps += 1
        if trace is not None:
            trace.append(TraceStep(s, a, obs[s_next], level, c, s_next in targets))
        s = s_next
        if s != sink:
            policy.observe(a, obs[s])
    return RunResult(total, steps, outcome, violations, trace)


@dataclass
class EvalReport:
    """Aggregate of ``sims`` runs of one policy on one instance."""

    policy: str
    instance: str
    sims: int
    cutoff: int
    seed: int
    value: float
    half_width: float
    reach: float
    sink: float
    truncated: float
    mean_steps: float
    violations: int
    fallback_rate: float | None = None
    size: int | None = None
    costs: list[int] = field(default_factory=list, repr=False)
    traces: list[list[TraceStep]] = field(default_factory=list, repr=False)

    @property
    def lower_bound(self) -> bool:
        """Some runs never reached a target, so ``value`` underestimates Val."""
        return self.reach < 1.0

    @property
    def std_error(self) -> float:
        return self.half_width / 1.96


def _threads(requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def evaluate(
    policy: Policy,
    product: ProductPomdp,
    sims: int,
    cutoff: int = 1000,
    seed: int = 0,
    instance: str = "",
    trace_runs: int = 0,
    threads: int | None = None,
) -> EvalReport:
    """Estimate ``Val(policy)`` from ``sims`` independent runs truncated at ``cutoff``.

    ``trace_runs`` keeps the step traces of the first runs.  Work is split
    into contiguous blocks of run indices, one executor per block, and
    aggregated in index order.
    """
    if sims < 1:
        raise ValueError("need at least one simulation")
    if cutoff < 1:
        raise ValueError("cutoff must be at least 1")
    n_threads = min(_threads(threads), sims)
    bounds = [sims * k // n_threads for k in range(n_threads + 1)]

    def block(k: int):
        ex = policy.spawn()
        out = [run_once(ex, product, stream(seed, i), cutoff, i < trace_runs) for i in range(bounds[k], bounds[k + 1])]
        return out, getattr(ex, "steps", 0), getattr(ex, "fallbacks", 0)

    if n_threads == 1:
        parts = [block(0)]
    else:
        with ThreadPoolExecutor(n_threads) as pool:
            parts = list(pool.map(block, range(n_threads)))
    runs = [r for part, _, _ in parts for r in part]
    steps = sum(p[1] for p in parts)
    fallbacks = sum(p[2] for p in parts)

    costs = [r.cost for r in runs]
    mean = math.fsum(costs) / sims
    if sims > 1:
        var = math.fsum((c - mean) ** 2 for c in costs) / (sims - 1)
        hw = 1.96 * math.sqrt(var / sims)
    else:
        hw = 0.0
    outcomes = [r.outcome for r in runs]
    has_fallback = policy.fallback_rate is not None
    return EvalReport(
        policy=policy.name,
        instance=instance,
        sims=sims,
        cutoff=cutoff,
        seed=seed,
        value=mean,
        half_width=hw,
        reach=outcomes.count("target") / sims,
        sink=outcomes.count("sink") / sims,
        truncated=outcomes.count("cutoff") / sims,
        mean_steps=math.fsum(r.steps for r in runs) / sims,
        violations=sum(r.violations for r in runs),
        fallback_rate=(fallbacks / steps if steps else 0.0) if has_fallback else None,
        size=policy.size,
        costs=costs,
        traces=[r.trace for r in runs if r.trace is not None],
    )


def less_with_confidence(a: EvalReport, b: EvalReport, z: float = 1.96) -> bool:
    """``Val(a) < Val(b)`` by a two-sample normal test at the given z level."""
    se = math.hypot(a.std_error, b.std_error)
    return b.value - a.value > z * se


# ---------------------------------------------------------------------------
# rendering

COLUMNS = ("instance", "policy", "size", "val", "ci95", "reach", "sink", "cutoff", "steps", "fallback", "violations")


def _row(r: EvalReport) -> list[str]:
    val = f"{r.value:.3f}"
    return [
        r.instance,
        r.policy,
        "-" if r.size is None else str(r.size),
        ("~" if r.lower_bound else "") + val,
        f"{r.half_width:.3f}",
        f"{r.reach:.4f}",
        f"{r.sink:.4f}",
        f"{r.truncated:.4f}",
        f"{r.mean_steps:.2f}",
        "-" if r.fallback_rate is None else f"{r.fallback_rate:.4f}",
        str(r.violations),
    ]


def report_table(reports: Sequence[EvalReport]) -> str:
    """Aligned plain-text table; ``~`` marks values that are only lower bounds."""
    rows = [list(COLUMNS)] + [_row(r) for r in reports]
    widths = [max(len(row[i]) for row in rows) for i in range(len(COLUMNS))]
    lines = []
    for row in rows:
        cells = [row[0].ljust(widths[0]), row[1].ljust(widths[1])]
        cells += [c.rjust(w) for c, w in zip(row[2:], widths[2:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def report_csv(reports: Sequence[EvalReport]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    w.writerows(_row(r) for r in reports)
    return out.getvalue()


def format_traces(product: ProductPomdp, traces: Sequence[Sequence[TraceStep]]) -> str:
    """One line per step: run, step, state, action, observation, energy, cost."""
    names = product.base.action_names
    lines = ["run,step,state,action,observation,energy,cost"]
    for run, trace in enumerate(traces):
        for k, st in enumerate(trace, start=1):
            lines.append(
                f"{run},{k},{product.name(st.state)},{names[st.action]},{product.obs_name(st.obs)},{st.energy},{st.cost}"
            )
    return "\n".join(lines) + "\n"
