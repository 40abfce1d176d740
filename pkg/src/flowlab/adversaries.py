"""Lower-bound instance generators, adaptive adversaries and gadget conflict analysis."""
from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import groupby
from math import isqrt
from typing import Callable, Optional, Sequence

from .algorithms import derive_seed
from .core import (FlowReport, Instance, Job, Model, Outcome, Schedule, Segment,
                   total_flow, validate_schedule)
from .engine import Agent, Engine, Policy, Transcript


@dataclass
class GeneratedFamily:
    instance: Instance
    witness: Schedule
    witness_flow: Fraction
    params: dict


@dataclass
class _Item:
    release: Fraction
    size: Fraction
    role: str
    batch: int = -1
    machine: int = 0
    start: Optional[Fraction] = None     # witness start; None means "fill in later"


def _coins(seed: Optional[int], count: int, forced: Optional[int]) -> list[int]:
    if forced is not None:
        return [forced] * count
    rng = random.Random(derive_seed(seed, "coins"))
    return [rng.randint(0, 1) for _ in range(count)]


def _assemble(m: int, items: list[_Item], meta: dict, allow_zero: bool = False) -> GeneratedFamily:
    order = sorted(range(len(items)), key=lambda i: items[i].release)
    jobs, segs, roles = [], [], []
    for new_id, idx in enumerate(order):
        it = items[idx]
        jobs.append(Job(new_id, it.release, it.size))
        roles.append([it.role, it.batch])
        segs.append(Segment(new_id, it.machine, it.start, it.start + it.size, Outcome.COMPLETED))
    meta = dict(meta, roles=roles)
    instance = Instance(m, tuple(jobs), allow_zero, meta)
    witness = Schedule(Model.NON_PREEMPTIVE, tuple(segs)).sorted()
    report = validate_schedule(instance, witness)
    if not report.ok:
        raise AssertionError(f"witness invalid: {report.violations[:3]}")
    flow = total_flow(instance, witness).total
    instance.meta["witness_flow"] = str(flow)
    params = {k: v for k, v in meta.items() if k != "roles"}
    return GeneratedFamily(instance, witness, flow, params)


def gen_single_rand_lb(n: int, seed: Optional[int] = 0, coin: Optional[int] = None) -> GeneratedFamily:
    """One job of size 2 against k waves of k tiny jobs; the first wave lands at 1 or 2."""
    if n < 3:
        raise ValueError("need n >= 3")
    k = isqrt(n - 2)
    eps = Fraction(1, 2 * n * n)
    c = _coins(seed, 1, coin)[0]
    big = _Item(Fraction(0), Fraction(2), "large")
    waves = [Fraction(1 + c)] + [Fraction(t) for t in range(3, k + 2)]
    tiny = [_Item(r, eps, "small", b) for b, r in enumerate(waves) for _ in range(k)]
    # witness: the big job goes first when the first wave comes late, else right after it
    seq = [big] + tiny if c else tiny[:k] + [big] + tiny[k:]
    end = Fraction(0)
    for it in seq:
        it.start = max(end, it.release)
        end = it.start + it.size
    meta = {"family": "single-rand-lb", "n": n, "m": 1, "k": k, "eps": eps,
            "coins": [c], "seed": seed}
    return _assemble(1, [big] + tiny, meta)


def _k_for(n: int, m: int, per_gadget: Callable[[int], int]) -> int:
    k = 0
    while m * per_gadget(k + 1) <= n:
        k += 1
    return k


def gen_multi_lb(n: int, m: int, seed: Optional[int] = 0, coin: Optional[int] = None) -> GeneratedFamily:
    """k batches, 5 apart, of m identical gadgets: one size-2 job and two waves of k
    jobs of size 1/k; the first wave's offset (1 or 2) is a shared coin per batch."""
    k = _k_for(n, m, lambda k: k * (2 * k + 1))
    if k < 1:
        raise ValueError(f"n={n} too small for m={m}")
    coins = _coins(seed, k, coin)
    unit = Fraction(1, k)
    items = []
    for b, c in enumerate(coins):
        t = Fraction(5 * b)
        for g in range(m):
            items.append(_Item(t, Fraction(2), "large", b, g, t + 2 if c == 0 else t))
            for i in range(k):
                r = t + 4 + i * unit
                items.append(_Item(r, unit, "small", b, g, r))
            for i in range(k):
                r = t + 1 + c + i * unit
                items.append(_Item(r, unit, "small", b, g, r))
    meta = {"family": "multi-lb", "n": n, "m": m, "k": k, "coins": coins, "seed": seed,
            "spacing": 5, "wave_offsets": [1, 4], "coin_wave": 0}
    return _assemble(m, items, meta)


def gen_multi_restart_lb(n: int, m: int, seed: Optional[int] = 0,
                         coin: Optional[int] = None) -> GeneratedFamily:
    """Like gen_multi_lb with two large jobs (sizes 2 and 3) per gadget and batches 7 apart."""
    k = _k_for(n, m, lambda k: k * (2 * k + 2))
    if k < 1:
        raise ValueError(f"n={n} too small for m={m}")
    coins = _coins(seed, k, coin)
    unit = Fraction(1, k)
    items = []
    for b, c in enumerate(coins):
        t = Fraction(7 * b)
        for g in range(m):
            if c == 0:
                two, three = t, t + 3
            else:
                two, three = t + 4, t
            items.append(_Item(t, Fraction(2), "large", b, g, two))
            items.append(_Item(t, Fraction(3), "large", b, g, three))
            for i in range(k):
                r = t + 6 + i * unit
                items.append(_Item(r, unit, "small", b, g, r))
            for i in range(k):
                r = t + 2 + c + i * unit
                items.append(_Item(r, unit, "small", b, g, r))
    meta = {"family": "multi-restart-lb", "n": n, "m": m, "k": k, "coins": coins, "seed": seed,
            "spacing": 7, "wave_offsets": [2, 6], "coin_wave": 0}
    return _assemble(m, items, meta)


# -- conflict analysis -------------------------------------------------------------

@dataclass(frozen=True)
class PeriodReport:
    start: Fraction
    conflicts: int
    small_flow: Fraction
    bound: Fraction

    @property
    def holds(self) -> bool:
        return self.small_flow >= self.bound


def analyze_conflicts(family: GeneratedFamily, schedule: Schedule) -> list[PeriodReport]:
    """Per unit-length wave of small jobs, count large-job runs that start within
    [t - 3/2, t + 1/2] and cover at least half of [t, t + 1), and compare the
    wave's total flow with conflicts * k / 8."""
    meta = family.instance.meta
    if meta.get("family") not in ("multi-lb", "multi-restart-lb"):
        raise ValueError("not a gadget family instance")
    k, spacing = meta["k"], meta["spacing"]
    roles = meta["roles"]
    jobs = family.instance.jobs
    ends: dict[int, Fraction] = {}
    for seg in schedule.segments:
        if seg.outcome is Outcome.COMPLETED:
            ends[seg.job] = max(ends.get(seg.job, seg.end), seg.end)
    large_runs = [s for s in schedule.segments if roles[s.job][0] == "large"]
    half = Fraction(1, 2)
    out = []
    for b, c in enumerate(meta["coins"]):
        for w, offset in enumerate(meta["wave_offsets"]):
            t = Fraction(spacing * b + offset + (c if w == meta["coin_wave"] else 0))
            x = sum(1 for s in large_runs
                    if t - 3 * half <= s.start <= t + half
                    and min(s.end, t + 1) - max(s.start, t) >= half)
            flow = sum((ends[j.id] - j.release for j in jobs
                        if roles[j.id] == ["small", b] and t <= j.release < t + 1), Fraction(0))
            out.append(PeriodReport(t, x, flow, Fraction(x * k, 8)))
    return out


# -- adaptive duels --------------------------------------------------------------------

@dataclass
class DuelResult:
    instance: Instance
    schedule: Schedule
    transcript: Transcript
    flow: Optional[FlowReport]
    witness: Schedule
    witness_flow: Fraction
    info: dict = field(default_factory=dict)

    @property
    def finished(self) -> bool:
        return self.flow is not None


def harmonic(n: int) -> Fraction:
    return sum((Fraction(1, i) for i in range(1, n + 1)), Fraction(0))


def harmonic_thresholds(n: int) -> list[Fraction]:
    hn = harmonic(n)
    out, h = [], Fraction(0)
    for i in range(1, n + 1):
        h += Fraction(1, i)
        out.append(h / hn)
    return out


def _sequence(jobs: Sequence[Job]) -> tuple[list[Segment], Fraction]:
    end, flow, segs = Fraction(0), Fraction(0), []
    for job in jobs:
        start = max(end, job.release)
        end = start + job.size
        flow += end - job.release
        segs.append(Segment(job.id, 0, start, end, Outcome.COMPLETED))
    return segs, flow


def _single_machine_witness(instance: Instance, big: Sequence[int], groups: int = 4) -> Schedule:
    """Tiny jobs in release order, each big job slotted before one of the first
    few release groups (or at the end); the cheapest arrangement wins."""
    tiny = [j for j in instance.jobs if j.id not in big]
    cuts = [0]
    for _, grp in groupby(tiny, key=lambda j: j.release):
        cuts.append(cuts[-1] + len(list(grp)))
    slots = sorted(set(cuts[:groups] + [len(tiny)]))
    best = None
    bigs = [instance.jobs[i] for i in big]
    orders = [bigs, bigs[::-1]] if len(bigs) == 2 else [bigs]
    for first, second in ((a, b) for a in slots for b in slots if a <= b):
        for pair in orders:
            seq = tiny[:first] + [pair[0]] + tiny[first:second] + list(pair[1:]) + tiny[second:]
            segs, flow = _sequence(seq)
            if best is None or flow < best[0]:
                best = (flow, segs)
    return Schedule(Model.NON_PREEMPTIVE, tuple(best[1])).sorted()


class _RestartAdversary(Agent):
    """Two phases: first force an unsolved big job, then punish each run of it with
    tiny jobs released at harmonic thresholds after the run starts."""

    def __init__(self, n: int):
        self.n = n
        self.eps = Fraction(1, 2 * n * n)
        self.burst = n // 2
        self.remaining = n - 2 - self.burst
        self.thresholds = harmonic_thresholds(n)
        self.timer: Optional[Fraction] = Fraction(3)
        self.stage = "probe"
        self.pivot: Optional[Fraction] = None
        self.target: Optional[int] = None
        self.armed_run: Optional[Fraction] = None
        self.run_start: Optional[Fraction] = None
        self.phase2_jobs: list[int] = []
        self.info: dict = {}

    def start(self, engine: Engine) -> None:
        engine.release(Fraction(0), Fraction(4))
        engine.release(Fraction(2), Fraction(1))

    def next_timer(self) -> Optional[Fraction]:
        return self.timer

    def _flush(self, engine: Engine, t: Fraction) -> None:
        for _ in range(self.remaining):
            engine.release(t, self.eps)
        self.remaining = 0
        self.stage = "done"
        self.timer = None

    def _arm(self, engine: Engine) -> None:
        self.timer = None
        if self.target in engine.completed:
            if self.remaining:
                engine.transcript.add(engine.now, "phase", name="flush-after-completion")
                self._flush(engine, engine.now)
            return
        machine = engine.machine_of(self.target)
        if machine is None:
            return
        run_start = engine.running[machine][1]
        self.run_start = run_start
        idx = bisect.bisect_right(self.thresholds, engine.now - run_start)
        if idx < len(self.thresholds):
            self.armed_run = run_start
            self.timer = run_start + self.thresholds[idx]

    def on_timer(self, engine: Engine) -> None:
        now = engine.now
        if self.stage == "probe":
            working = engine.running_job(0) == 0
            self.info["working_at_3"] = working
            if working:
                half = self.burst // 2
                for _ in range(half):
                    engine.release(now, self.eps)
                for _ in range(self.burst - half):
                    engine.release(Fraction(7), self.eps)
                self.pivot = Fraction(7)
            else:
                for _ in range(self.burst):
                    engine.release(Fraction(5), self.eps)
                self.pivot = Fraction(5)
            engine.transcript.add(now, "phase", name="phase1", pivot=self.pivot)
            self.stage = "await"
            self.timer = None
        elif self.stage == "wait":
            self.target = 0 if 0 not in engine.completed else 1
            self.stage = "phase2"
            self.info.update(phase2_start=now, target=self.target)
            engine.transcript.add(now, "phase", name="phase2", target=self.target)
            self._arm(engine)
        elif self.stage == "phase2":
            self.timer = None
            if self.run_start == self.armed_run:
                job = engine.release(now, self.eps)
                self.phase2_jobs.append(job.id)
                self.remaining -= 1
                if self.remaining == 0:
                    self.stage = "done"
                    return
            self._arm(engine)

    def on_start(self, engine: Engine, job: Job, machine: int) -> None:
        if job.id == self.target:
            self.run_start = engine.now
        if self.stage == "await" and job.release == self.pivot and job.id >= 2:
            t = engine.now
            self.info["pivot_start"] = t
            if {0, 1} <= engine.completed or t - self.pivot >= 1:
                engine.transcript.add(t, "phase", name="early-exit")
                self.info["early_exit"] = True
                self._flush(engine, t)
            else:
                self.stage = "wait"
                self.timer = t + self.burst * self.eps
        elif self.stage == "phase2" and job.id == self.target:
            self._arm(engine)

    def on_kill(self, engine: Engine, job: Job, machine: int) -> None:
        if job.id == self.target:
            self.run_start = None
            if self.stage == "phase2":
                self.timer = None

    def on_complete(self, engine: Engine, job: Job, machine: int) -> None:
        if self.stage == "phase2" and job.id == self.target and self.timer != engine.now:
            self._arm(engine)


def _finish(engine: Engine, witness_fn: Callable[[Instance], Schedule], info: dict) -> DuelResult:
    instance = engine.instance(meta={"family": "duel"})
    schedule = engine.schedule()
    unfinished = set(engine.jobs) - engine.completed
    flow = None if unfinished else total_flow(instance, schedule)
    info = dict(info, unfinished=sorted(unfinished), idle_forever=bool(unfinished))
    witness = witness_fn(instance)
    return DuelResult(instance, schedule, engine.transcript, flow, witness,
                      total_flow(instance, witness).total, info)


def duel_restart_lb(policy: Policy, n: int, horizon: Optional[Fraction] = None) -> DuelResult:
    """Adaptive adversary against a deterministic single-machine kill-and-restart policy."""
    if n < 4:
        raise ValueError("need n >= 4")
    adversary = _RestartAdversary(n)
    engine = Engine(1, policy, agents=[adversary], horizon=horizon or Fraction(10 * n + 20))
    engine.run()
    info = dict(adversary.info, N=n - 2 - n // 2, phase2_jobs=adversary.phase2_jobs,
                released=len(engine.jobs))
    return _finish(engine, lambda inst: _single_machine_witness(inst, (0, 1)), info)


class _BatchAdversary(Agent):
    def __init__(self, n: int, m: int):
        self.n, self.m = n, m
        self.first_start: Optional[Fraction] = None

    def start(self, engine: Engine) -> None:
        engine.release(Fraction(0), Fraction(1))

    def on_start(self, engine: Engine, job: Job, machine: int) -> None:
        if self.first_start is not None:
            return
        self.first_start = t = engine.now
        for i in range(1, self.n // self.m + 1):
            for _ in range(self.m):
                engine.release(t + Fraction(i, self.n), Fraction(1, self.n))


def duel_nm2(policy: Policy, n: int, m: int, horizon: Optional[Fraction] = None) -> DuelResult:
    """A unit job, then, once the policy starts anything, n/m batches of m jobs of size 1/n."""
    adversary = _BatchAdversary(n, m)
    engine = Engine(m, policy, agents=[adversary], horizon=horizon or Fraction(10 * n + 20))
    engine.run()

    def witness(instance: Instance) -> Schedule:
        t = adversary.first_start
        segs = []
        by_release: dict[Fraction, int] = {}
        for job in instance.jobs[1:]:
            machine = by_release.get(job.release, 0)
            by_release[job.release] = machine + 1
            segs.append(Segment(job.id, machine, job.release, job.release + job.size))
        if t is None or t >= 1:
            unit_start = Fraction(0)
        else:
            unit_start = t + Fraction(n // m + 1, n)
        segs.append(Segment(0, 0, unit_start, unit_start + 1))
        return Schedule(Model.NON_PREEMPTIVE, tuple(segs)).sorted()

    return _finish(engine, witness, {"first_start": adversary.first_start, "batches": n // m})


# -- unknown n --------------------------------------------------------------------------

@dataclass
class UnknownNResult:
    kind: str                      # "A" or "B"
    t: Optional[int]
    masses: dict
    family: GeneratedFamily
    note: str


def duel_unknown_n(algorithm: Callable[[Instance, int], Schedule], n0: int, trials: int = 1,
                   m: int = 1, n1: Optional[int] = None, seed: int = 0) -> UnknownNResult:
    """Probe the start time of a lone size-2 job, then emit the instance that punishes it.

    If some unit window [t, t+1) with t in 1..n0 carries start probability at
    least 1/(2 n0), dummy jobs arrive at t+1 (Type A); otherwise n0 dummy jobs
    arrive at n0+1 (Type B).
    """
    if trials < 1:
        raise ValueError("estimation failure: no probe runs")
    probe = Instance(m, (Job(0, Fraction(0), Fraction(2)),))
    starts: list[Optional[Fraction]] = []
    for trial in range(trials):
        sched = algorithm(probe, derive_seed(seed, "probe", trial))
        runs = [s.start for s in sched.segments if s.job == 0]
        starts.append(min(runs) if runs else None)
    x, y = n0, Fraction(1, 2 * n0)
    masses = {}
    for t in range(1, x + 1):
        masses[t] = Fraction(sum(1 for s in starts if s is not None and t <= s < t + 1), trials)
    hit = next((t for t in range(1, x + 1) if masses[t] >= y), None)
    n1 = n1 if n1 is not None else 4 * n0
    items = [_Item(Fraction(0), Fraction(2), "large", -1, 0, Fraction(0))]
    if hit is not None:
        kind = "A"
        if m == 1:
            items += [_Item(Fraction(hit + 1), Fraction(0), "small", 0, 0, Fraction(hit + 1))
                      for _ in range(n1)]
        else:
            k = max(1, n1 // m)
            for i in range(k):
                r = hit + 1 + Fraction(i, k)
                items += [_Item(r, Fraction(1, k), "small", 0, g, r) for g in range(m)]
    else:
        kind = "B"
        items += [_Item(Fraction(x + 1), Fraction(0), "small", 0, 0, Fraction(x + 1))
                  for _ in range(n0)]
    meta = {"family": f"unknown-n-{kind}", "n0": n0, "m": m, "t": hit, "trials": trials}
    family = _assemble(m, items, meta, allow_zero=True)
    margin = max(masses.values(), default=Fraction(0)) - y
    note = f"{trials} probe runs; best window mass minus 1/(2n0) = {margin}"
    return UnknownNResult(kind, hit, masses, family, note)
