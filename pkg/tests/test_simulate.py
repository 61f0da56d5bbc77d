import csv
import io

import pytest

from energy_pomdp.benchmarks import corridor
from energy_pomdp.policy import FixedSequencePolicy
from energy_pomdp.product import build_product
from energy_pomdp.qualitative import analyze, sigma_all
from energy_pomdp.rtdp import greedy_policy, solve
from energy_pomdp.simulate import (
    EvalReport,
    TraceStep,
    energy_violations,
    evaluate,
    format_traces,
    less_with_confidence,
    report_csv,
    report_table,
)
from helpers import chain


def report(value=10.0, reach=1.0, sink=0.0, truncated=0.0, **kw) -> EvalReport:
    base = dict(policy="p", instance="inst", sims=100, cutoff=1000, seed=0, value=value, half_width=0.5,
                reach=reach, sink=sink, truncated=truncated, mean_steps=4.0, violations=0)
    base.update(kw)
    return EvalReport(**base)


class TestRuns:
    def test_one_step_to_target(self):
        p = build_product(chain(2, cost=3, capacity=3))
        r = evaluate(sigma_all(analyze(p).allowed), p, sims=50)
        assert r.value == 3 and r.reach == 1.0 and r.half_width == 0.0
        assert not r.lower_bound

    def test_cutoff_gives_lower_bound(self):
        p = build_product(corridor(5, 3, reload_at=0))
        r = evaluate(FixedSequencePolicy([1]), p, sims=10, cutoff=40)
        assert r.truncated == 1.0 and r.value == 40 and r.lower_bound
        assert r.violations == 0

    def test_sink_extends_cost_to_cutoff(self, corridor_pair):
        p = build_product(corridor_pair[0])
        r = evaluate(FixedSequencePolicy([0]), p, sims=5, cutoff=100, trace_runs=1)
        assert r.sink == 1.0 and r.lower_bound
        assert r.value == 100 and r.mean_steps == 3
        assert r.violations == 5
        assert [st.energy for st in r.traces[0]] == [2, 1, 0]

    @pytest.mark.parametrize("sims", [1, 7, 100])
    def test_fractions_sum_to_one(self, tiger, sims):
        p = build_product(tiger)
        r = evaluate(sigma_all(analyze(p).allowed), p, sims=sims, cutoff=5)
        assert r.reach + r.sink + r.truncated == pytest.approx(1.0, abs=1e-12)

    def test_bad_arguments(self, tiger):
        p = build_product(tiger)
        pol = sigma_all(analyze(p).allowed)
        with pytest.raises(ValueError):
            evaluate(pol, p, sims=0)
        with pytest.raises(ValueError):
            evaluate(pol, p, sims=1, cutoff=0)


class TestEnergyAudit:
    def test_target_on_first_step(self):
        assert energy_violations([TraceStep(0, 0, 0, 2, 1, target=True)]) == 0

    def test_dip_to_zero_before_target(self):
        levels = [3, 2, 1, 0, 3]
        trace = [TraceStep(0, 0, 0, e, 1, target=(i == 4)) for i, e in enumerate(levels)]
        assert energy_violations(trace) >= 1

    def test_steps_after_target_ignored(self):
        trace = [TraceStep(0, 0, 0, 1, 1, target=True), TraceStep(0, 0, 0, 0, 1)]
        assert energy_violations(trace) == 0

    def test_sigma_all_and_greedy_have_no_violations(self, tiger, hallway6):
        for p, allowed, table in [
            (build_product(tiger), None, None),
            (hallway6.product, hallway6.allowed, hallway6.table),
        ]:
            allowed = allowed or analyze(p).allowed
            table = table or solve(p, allowed, trials=200).table
            for pol in (sigma_all(allowed), greedy_policy(p, allowed, table)):
                r = evaluate(pol, p, sims=500, trace_runs=500)
                assert r.violations == 0
                assert all(energy_violations(t) == 0 for t in r.traces)


class TestDeterminism:
    def test_same_seed_same_report(self, tiger):
        p = build_product(tiger)
        pol = sigma_all(analyze(p).allowed)
        a = evaluate(pol, p, sims=300, seed=11)
        b = evaluate(pol, p, sims=300, seed=11)
        assert report_csv([a]) == report_csv([b]) and a.costs == b.costs

    @pytest.mark.parametrize("threads", [2, 3, 8])
    def test_thread_count_does_not_matter(self, hallway6, threads):
        p, allowed = hallway6.product, hallway6.allowed
        one = evaluate(greedy_policy(p, allowed, hallway6.table), p, sims=200, seed=5, threads=1)
        many = evaluate(greedy_policy(p, allowed, hallway6.table), p, sims=200, seed=5, threads=threads)
        assert one.costs == many.costs and report_table([one]) == report_table([many])

    def test_thread_env_variable(self, tiger, monkeypatch):
        p = build_product(tiger)
        pol = sigma_all(analyze(p).allowed)
        base = evaluate(pol, p, sims=100, seed=2)
        monkeypatch.setenv("ENERGY_POMDP_THREADS", "4")
        assert evaluate(pol, p, sims=100, seed=2).costs == base.costs


class TestReports:
    def test_one_row(self):
        lines = report_table([report()]).splitlines()
        assert len(lines) == 2
        assert lines[0].split()[:4] == ["instance", "policy", "size", "val"]
        assert "10.000" in lines[1]

    def test_empty_is_header_only(self):
        assert len(report_table([]).splitlines()) == 1
        assert report_csv([]).count("\n") == 1

    def test_lower_bound_prefix(self):
        text = report_table([report(reach=0.9, truncated=0.1)])
        assert "~10.000" in text

    def test_csv_is_machine_readable(self):
        rows = list(csv.DictReader(io.StringIO(report_csv([report(size=42), report(policy="q", reach=0.5, sink=0.5)]))))
        assert [r["policy"] for r in rows] == ["p", "q"]
        assert rows[0]["size"] == "42" and rows[1]["val"] == "~10.000"

    def test_less_with_confidence(self):
        assert less_with_confidence(report(value=5.0), report(value=10.0))
        assert not less_with_confidence(report(value=9.9), report(value=10.0))

    def test_trace_dump(self):
        p = build_product(chain(3, capacity=4))
        r = evaluate(sigma_all(analyze(p).allowed), p, sims=2, trace_runs=1)
        lines = format_traces(p, r.traces).splitlines()
        assert lines[0] == "run,step,state,action,observation,energy,cost"
        assert lines[1:] == ["0,1,s0@4,go,o,3,1", "0,2,s1@3,go,o,2,1"]
