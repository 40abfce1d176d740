import csv
import io
import math
from fractions import Fraction

import pytest

from flowlab import harness
from flowlab.adversaries import gen_multi_lb
from flowlab.algorithms import run_greedy
from flowlab.core import Instance, total_flow, validate_schedule

F = Fraction


def test_ratio_examples():
    inst = Instance.build(1, [(0, 3), (1, 1)])
    r = harness.compute_ratio(F(6), inst, harness.SRPT)
    assert r.value == F(6, 5) and r.baseline == "srpt" and r.kind == "exact"
    auto = harness.compute_ratio(F(6), inst)
    assert auto.baseline == "brute-force" and auto.value == 1
    assert harness.compute_ratio(F(6), inst, harness.SUM_P).kind == "bound"


def test_witness_ratio_is_a_bound():
    fam = gen_multi_lb(230, 2, seed=4)
    flow = total_flow(fam.instance, run_greedy(fam.instance)).total
    r = harness.compute_ratio(flow, fam.instance)
    assert r.baseline == "witness" and r.kind == "bound"
    assert r.value == flow / fam.witness_flow
    own = harness.compute_ratio(fam.witness_flow, fam.instance, harness.WITNESS)
    assert own.value == 1


def test_ratio_errors_and_auto_choice():
    plain = harness.random_instance(20, 2, seed=1)
    with pytest.raises(ValueError):
        harness.compute_ratio(F(1), plain, harness.WITNESS)
    with pytest.raises(ValueError):
        harness.compute_ratio(F(1), plain, "nonsense")
    assert harness.compute_ratio(F(100), plain).baseline == "sum-p"
    assert harness.compute_ratio(F(100), harness.random_instance(20, 1, seed=1)).baseline == "srpt"
    zero = Instance.build(1, [(0, 0)], allow_zero_size=True)
    assert harness.compute_ratio(F(0), zero, harness.SUM_P).value == 1
    with pytest.raises(ValueError):
        harness.compute_ratio(F(1), zero, harness.SUM_P)


def test_decimal_rendering():
    assert harness.decimal_str(F(1, 3)) == "0.33333333333333333333"
    assert harness.decimal_str(F(6, 5)) == "1.2"
    assert harness.decimal_str(F(123456, 1)) == "123456"


def test_fit_examples():
    sqrt_pts = [(n, 3 * math.sqrt(n)) for n in (10, 100, 1000, 10000)]
    fit = harness.fit_scaling(sqrt_pts)
    assert fit.slope == pytest.approx(0.5) and fit.r2 == pytest.approx(1.0)
    nlog = [(2 ** e, 2 ** e / math.log(2 ** e)) for e in range(6, 13)]
    assert harness.fit_scaling(nlog).slope > 0.8
    flat = harness.fit_scaling([(n, 7.0) for n in (2, 4, 8)])
    assert flat.slope == pytest.approx(0.0) and flat.r2 == 1.0
    for bad in ([(1, 1), (2, 2)], [(4, 1), (4, 2), (4, 3)], [(1, 1), (2, 0), (3, 1)]):
        with pytest.raises(ValueError):
            harness.fit_scaling(bad)


def test_random_instance_is_seeded():
    a = harness.random_instance(30, 2, seed=8)
    assert a == harness.random_instance(30, 2, seed=8)
    assert a != harness.random_instance(30, 2, seed=9)
    assert a.n == 30 and all(F(1, 4) <= j.size <= 4 for j in a.jobs)


@pytest.mark.parametrize("alg", sorted(harness.ALGORITHMS))
def test_every_algorithm_validates(alg):
    inst = harness.random_instance(25, 1 if alg == "rand-single" else 3, seed=2)
    sched = harness.ALGORITHMS[alg](inst, 7)
    assert sched.model is harness.MODEL_OF[alg]
    assert validate_schedule(inst, sched).ok


def test_generate_families():
    assert harness.generate("random", 10, 1, 0) is None
    assert harness.generate("multi-lb", 58, 1, 7).instance.n == 55
    with pytest.raises(ValueError):
        harness.generate("single-rand-lb", 50, 2, 0)
    with pytest.raises(ValueError):
        harness.generate("bogus", 50, 1, 0)


def test_bench_rows_and_determinism():
    rows = harness.bench("greedy", "multi-lb", [58, 230], 1, 3, seed=5)
    assert len(rows) == 6
    assert [r["n"] for r in rows] == [58] * 3 + [230] * 3
    text = harness.rows_to_csv(rows)
    assert text == harness.rows_to_csv(harness.bench("greedy", "multi-lb", [58, 230], 1, 3, seed=5))
    assert text != harness.rows_to_csv(harness.bench("greedy", "multi-lb", [58, 230], 1, 3, seed=6))
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert list(parsed[0]) == harness.COLUMNS
    assert {r["kind"] for r in parsed} == {"exact"}
    fit = harness.fit_csv(text)
    assert math.isfinite(fit.slope)


def test_bench_parallel_matches_serial(monkeypatch):
    serial = harness.bench("nsjf", "random", [20, 40], 2, 3, seed=1, workers=1)
    parallel = harness.bench("nsjf", "random", [20, 40], 2, 3, seed=1, workers=3)
    assert serial == parallel
    monkeypatch.setenv("FLOWLAB_THREADS", "2")
    assert harness.workers_from_env() == 2
    assert harness.bench("nsjf", "random", [20, 40], 2, 3, seed=1) == serial
    monkeypatch.setenv("FLOWLAB_THREADS", "0")
    with pytest.raises(ValueError):
        harness.workers_from_env()


def test_bench_exact_and_labels():
    rows = harness.bench("kill-restart", "random", [30], 2, 2, seed=3, exact=True)
    assert all(r["kind"] == "bound" and r["baseline"] == "sum-p" for r in rows)
    for r in rows:
        assert F(r["ratio"]) == F(r["alg_flow"]) / F(r["baseline_flow"])
    with pytest.raises(ValueError):
        harness.bench("nope", "random", [5], 1, 1, 0)
    with pytest.raises(ValueError):
        harness.bench("greedy", "nope", [5], 1, 1, 0)
