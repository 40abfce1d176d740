"""The ten acceptance criteria, each run at its stated size and tolerance.

Every test records exactly one PASS/FAIL line; the lines are repeated in the
pytest terminal summary under "acceptance criteria".
"""
import math
import random
import time
from fractions import Fraction

import pytest

from flowlab import harness
from flowlab.adversaries import (analyze_conflicts, duel_nm2, duel_restart_lb,
                                 gen_multi_lb, gen_multi_restart_lb, gen_single_rand_lb, harmonic)
from flowlab.algorithms import (GOLDEN, GreedyPolicy, KillRestartPolicy, RngPolicy, UnknownNPolicy,
                                derive_seed, rounds_agree, run_greedy, run_kill_restart,
                                run_rand_multi, run_rand_single)
from flowlab.baselines import brute_force_opt_np, reassign_to_fewer_machines, run_srpt
from flowlab.cli import main as cli_main
from flowlab.core import Instance, Job, total_flow, validate_schedule
from flowlab.engine import Engine
from flowlab.nsjf import run_nsjf
from flowlab.partition import PartitionState, classify, classify_refined, rank_key
from oracles import check_dominance

pytestmark = pytest.mark.acceptance
F = Fraction


def rational(rng, lo, hi, positive=False):
    d = rng.randint(1, 6)
    low = lo * d + (1 if positive else 0)
    return F(rng.randint(low, hi * d), d)


def random_tiny(rng, max_n, machines, max_size=10):
    n = rng.randint(1, max_n)
    m = rng.choice(machines)
    pairs = [(rational(rng, 0, 10), rational(rng, 0, max_size, positive=True)) for _ in range(n)]
    return Instance.build(m, pairs)


def flow(inst, sched):
    return total_flow(inst, sched).total


def seeds(base, reps):
    """The harness's per-repetition seeds: (generator seed, algorithm seed)."""
    for rep in range(reps):
        rep_seed = derive_seed(base, rep)
        yield derive_seed(rep_seed, "gen"), derive_seed(rep_seed, "alg")


def test_criterion_1_oracle_equivalence(criterion):
    rng = random.Random(1)
    t0 = time.time()
    bad = 0
    for _ in range(500):
        inst = random_tiny(rng, 7, (1, 2))
        opt = brute_force_opt_np(inst)[1]
        tau = max(j.size for j in inst.jobs)
        if inst.m == 1 and flow(inst, run_srpt(inst)) > opt:
            bad += 1
        if flow(inst, run_nsjf(inst.jobs, inst.m)) > opt + 2 * inst.n * tau:
            bad += 1
    elapsed = time.time() - t0
    criterion(1, bad == 0 and elapsed < 300,
              f"500 instances, {bad} violations, {elapsed:.1f}s (limit 300s)")


def test_criterion_2_dominance(criterion):
    rng = random.Random(2)
    bad, checked = 0, 0
    for _ in range(500):
        tau = rng.choice([F(1), F(2), F(3)])
        n = rng.randint(1, 8)
        m = rng.choice((1, 2, 3))
        pairs = [(rational(rng, 0, 10), F(rng.randint(1, 12), 12) * tau) for _ in range(n)]
        inst = Instance.build(m, pairs)
        blocking = [rational(rng, 0, 5) for _ in range(m)]
        bad += len(check_dominance(inst, with_brute_force=False))
        bad += len(check_dominance(inst, blocking, with_brute_force=False))
        checked += 1
    criterion(2, bad == 0, f"{checked} instances, volume/count/blocked-count, {bad} violations")


def test_criterion_3_partition(criterion):
    rng = random.Random(3)
    bad = 0
    for _ in range(200):
        capacity = rng.randint(1, 10)
        n = rng.randint(1, 60)
        jobs = [Job(i, F(i, 2), F(rng.randint(1, 20), rng.randint(1, 3))) for i in range(n)]
        waiting = [rng.random() < 0.6 for _ in range(n)]
        for rule in (classify, classify_refined):
            state = PartitionState(capacity, next_proxy_id=n)
            image = set()
            for idx, job in enumerate(jobs):
                out = rule(state, job, lambda i: waiting[i])
                if len(state.active) > capacity:
                    bad += 1
                bigger = sum(1 for o in jobs[:idx] if rank_key(o) > rank_key(job))
                if not out.large:
                    if rule is classify and bigger < capacity:
                        bad += 1
                    if rule is classify_refined and not (
                            job.size * capacity <= 4 * state.released_work or bigger >= capacity):
                        bad += 1
                proxy = out.proxy
                if proxy is not None:
                    # the displacing arrival is the proxy's image: same release, strictly larger
                    if not (job.release == proxy.release and job.size > proxy.size) or job.id in image:
                        bad += 1
                    image.add(job.id)
    criterion(3, bad == 0, f"200 streams x 2 rules, {bad} violations")


def test_criterion_4_online_stability(criterion):
    rng = random.Random(4)
    bad = 0
    for i in range(100):
        for m in (1, rng.choice((2, 3, 4))):
            n = rng.randint(1, 50)
            pairs = [(rational(rng, 0, 20), rational(rng, 0, 6, positive=True)) for _ in range(n)]
            inst = Instance.build(m, pairs)
            run = run_rand_single if m == 1 else run_rand_multi
            rounds = []
            sched = run(inst, RngPolicy(i), rounds=rounds)
            bad += len(rounds_agree(rounds))
            if not validate_schedule(inst, sched).ok or sched != run(inst, RngPolicy(i)):
                bad += 1
    criterion(4, bad == 0, f"100 instances x (single, multi), {bad} unstable rounds")


def test_criterion_5_randomized_family(criterion):
    t0 = time.time()
    ok, notes, points = True, [], []
    for n in (102, 402, 1602):
        greedy, witness, ratios = [], [], []
        for gen_seed, alg_seed in seeds(0, 50):
            fam = gen_single_rand_lb(n, gen_seed)
            greedy.append(flow(fam.instance, run_greedy(fam.instance)))
            witness.append(fam.witness_flow)
            ratios.append(flow(fam.instance, run_rand_single(fam.instance, RngPolicy(alg_seed)))
                          / fam.witness_flow)
        mean_greedy, mean_witness = sum(greedy) / 50, sum(witness) / 50
        need = 0.2 * math.sqrt(n) * float(mean_witness)
        zeros = sum(1 for g, w in zip(greedy, witness) if g > 2 * w)
        # exact expectation over the single fair coin, for context
        both = [gen_single_rand_lb(n, coin=c) for c in (0, 1)]
        exp_greedy = sum(flow(f.instance, run_greedy(f.instance)) for f in both) / 2
        exp_witness = sum(f.witness_flow for f in both) / 2
        exp_ok = float(exp_greedy) >= 0.2 * math.sqrt(n) * float(exp_witness)
        ok &= float(mean_greedy) >= need
        points.append((n, float(sum(ratios) / 50)))
        notes.append(f"n={n}: greedy {float(mean_greedy):.2f} vs {need:.2f} "
                     f"(early-wave draws {zeros}/50; exact expectation {'meets' if exp_ok else 'misses'})")
    slope = harness.fit_scaling(points).slope
    ok &= slope <= 0.6
    elapsed = time.time() - t0
    ok &= elapsed < 600
    criterion(5, ok, "; ".join(notes) + f"; rand-single slope {slope:.3f} (<= 0.6); {elapsed:.1f}s")


def test_criterion_6_gadget_families(criterion):
    bad, detail = 0, []
    for n, m in ((58, 1), (230, 2), (926, 4)):
        for gen, cap in ((gen_multi_lb, 6), (gen_multi_restart_lb, 11)):
            fam = gen(n, m, seed=0)
            k = fam.params["k"]
            if not validate_schedule(fam.instance, fam.witness).ok or fam.witness_flow > cap * m * k:
                bad += 1
            scheds = [run_greedy(fam.instance), run_rand_multi(fam.instance, RngPolicy(0)),
                      run_kill_restart(fam.instance)]
            for sched in scheds:
                bad += sum(1 for r in analyze_conflicts(fam, sched) if not r.holds)
            detail.append(f"{gen.__name__}({n},{m}) witness {float(fam.witness_flow):.2f}<={cap * m * k}")
    criterion(6, bad == 0, f"{bad} violations; " + ", ".join(detail))


def test_criterion_7_kill_restart_scaling(criterion):
    t0 = time.time()
    ok, notes, worst_b = True, [], 0.0
    for family in ("multi-restart-lb", "random"):
        points = []
        for e in range(7, 13):
            n = 2 ** e
            ratios = []
            for gen_seed, _ in seeds(0, 3):
                if family == "random":
                    inst = harness.random_instance(n, 2, gen_seed)
                else:
                    inst = gen_multi_restart_lb(n, 2, gen_seed).instance
                ratios.append(harness.compute_ratio(flow(inst, run_kill_restart(inst)), inst).value)
                policy = UnknownNPolicy(2)
                Engine(2, policy, inst.jobs).run()
                bound = 4 * inst.n ** (1 - GOLDEN) / math.sqrt(2)
                worst_b = max(worst_b, policy.kills["B"] / bound)
                ok &= policy.kills["B"] <= bound
            points.append((n, float(sum(ratios) / len(ratios))))
        slope = harness.fit_scaling(points).slope
        ok &= slope <= 0.6
        notes.append(f"{family} slope {slope:.3f}")
    elapsed = time.time() - t0
    ok &= elapsed < 1200
    criterion(7, ok, ", ".join(notes) + f" (<= 0.6); worst type-B count/bound {worst_b:.3f}; {elapsed:.1f}s")


def test_criterion_8_adaptive_adversaries(criterion):
    ok, notes = True, []
    for n in (100, 400):
        for name, policy in (("greedy", GreedyPolicy()), ("kill-restart", KillRestartPolicy(n, 1))):
            res = duel_restart_lb(policy, n)
            need = F(n - 2 - n // 2) / harmonic(n) - 1
            good = (res.finished and res.instance.n == n and res.flow.total >= need
                    and res.witness_flow <= 10 and validate_schedule(res.instance, res.witness).ok)
            ok &= good
            got = float(res.flow.total) if res.finished else float("inf")
            notes.append(f"restart-lb {name} n={n}: {got:.2f}>={float(need):.2f}, "
                         f"witness {float(res.witness_flow):.2f}")
    for n, m in ((100, 1), (100, 2)):
        res = duel_nm2(GreedyPolicy(), n, m)
        need = sum(F(i, n) for i in range(1, n // m + 1))
        good = res.finished and res.flow.total >= need and res.witness_flow <= 4
        ok &= good
        notes.append(f"nm2 ({n},{m}): {float(res.flow.total):.2f}>={float(need):.2f}, "
                     f"witness {float(res.witness_flow):.2f}")
    criterion(8, ok, "; ".join(notes))


def test_criterion_9_machine_reduction(criterion):
    rng = random.Random(9)
    bad = 0
    for _ in range(200):
        inst = random_tiny(rng, 12, (2, 3, 4))
        k = rng.randint(1, inst.m - 1)
        sched = run_srpt(inst, migratory=False)
        out = reassign_to_fewer_machines(sched, inst, k)
        reduced = Instance(inst.m - k, inst.jobs)
        if not validate_schedule(reduced, out).ok:
            bad += 1
            continue
        load = [F(0)] * inst.m
        home = {s.job: s.machine for s in sched.segments}
        for j, mach in home.items():
            load[mach] += inst.jobs[j].size
        light = set(sorted(range(inst.m), key=lambda i: (load[i], i))[:k])
        moved = sum((inst.jobs[j].size for j, mach in home.items() if mach in light), F(0))
        if flow(reduced, out) - flow(inst, sched) > F(inst.n, inst.m - k) * moved:
            bad += 1
    criterion(9, bad == 0, f"200 schedules, {bad} violations")


def test_criterion_10_determinism(criterion, tmp_path, monkeypatch):
    combos = []
    for alg in sorted(harness.ALGORITHMS):
        for family in sorted(harness.FAMILIES):
            for m in (1, 2):
                if m == 2 and (alg == "rand-single" or family == "single-rand-lb"):
                    continue
                combos.append((alg, family, m))
    mismatched = []
    for alg, family, m in combos:
        args = ["bench", "--alg", alg, "--family", family, "--n", "30,60", "--m", str(m),
                "--reps", "2", "--seed", "11"]
        outputs = []
        for i, threads in enumerate(("1", "1", "2")):
            monkeypatch.setenv("FLOWLAB_THREADS", threads)
            path = tmp_path / f"{alg}-{family}-{m}-{i}.csv"
            if cli_main(args + ["--csv", str(path)]) != 0:
                mismatched.append((alg, family, m, "exit"))
            outputs.append(path.read_bytes())
        if len(set(outputs)) != 1:
            mismatched.append((alg, family, m))
    criterion(10, not mismatched,
              f"{len(combos)} bench invocations x 3 runs (serial, serial, 2 workers), "
              f"{len(mismatched)} differ")
