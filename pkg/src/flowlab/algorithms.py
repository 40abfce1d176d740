"""Online scheduling policies.

The randomized algorithms keep a tentative plan that is rebuilt from scratch
after releases, executing only what lies before the next release; the other
policies run on the shared event engine.
"""
from __future__ import annotations

import bisect
import hashlib
import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from typing import Optional, Sequence

from .core import Instance, Job, Model, Outcome, Schedule, Segment
from .engine import Engine, Policy, Transcript
from .nsjf import run_nsjf
from .partition import Label, PartitionState, classify, classify_refined


@dataclass(frozen=True)
class RngPolicy:
    """Per-job draws derived from (seed, tag, job id) alone."""

    seed: int

    def draw(self, tag: str, job_id: int, upper: int) -> int:
        """Uniform integer in 1..upper."""
        digest = hashlib.blake2b(f"{self.seed}:{tag}:{job_id}".encode(), digest_size=16).digest()
        return random.Random(int.from_bytes(digest, "big")).randint(1, upper)


def derive_seed(*parts: object) -> int:
    digest = hashlib.blake2b(":".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


# -- greedy ---------------------------------------------------------------------

class GreedyPolicy(Policy):
    """Start the earliest-released waiting job on any free machine; never kill."""

    def __init__(self) -> None:
        self.queue: list[tuple[Fraction, int]] = []

    def on_release(self, engine: Engine, job: Job) -> None:
        heapq.heappush(self.queue, (job.release, job.id))

    def dispatch(self, engine: Engine) -> None:
        for machine in engine.idle_machines():
            if not self.queue:
                return
            _, job_id = heapq.heappop(self.queue)
            engine.start(job_id, machine)


class NsjfPolicy(Policy):
    """Online non-preemptive shortest job first."""

    def __init__(self) -> None:
        self.queue: list[tuple[Fraction, int]] = []

    def on_release(self, engine: Engine, job: Job) -> None:
        heapq.heappush(self.queue, (job.size, job.id))

    def dispatch(self, engine: Engine) -> None:
        for machine in engine.idle_machines():
            if not self.queue:
                return
            _, job_id = heapq.heappop(self.queue)
            engine.start(job_id, machine)


def _run(instance: Instance, policy: Policy, trace: Optional[Transcript]) -> Schedule:
    engine = Engine(instance.m, policy, instance.jobs).run()
    if trace is not None:
        trace.events.extend(engine.transcript.events)
    return engine.schedule()


def run_greedy(instance: Instance, trace: Optional[Transcript] = None) -> Schedule:
    return _run(instance, GreedyPolicy(), trace)


# -- randomized reconstruction ----------------------------------------------------

Timeline = list  # per machine: sorted [start, end, job id]


def first_idle_point(timeline: Timeline, release: Fraction, need: Fraction) -> Fraction:
    """Earliest t >= release such that the machine is idle for `need` time in [release, t)."""
    cur, acc = release, Fraction(0)
    for s, e, _ in itertools.islice(timeline, bisect.bisect_right(timeline, release, key=lambda x: x[1]), None):
        if s > cur:
            gap = s - cur
            if acc + gap >= need:
                return cur + (need - acc)
            acc += gap
        cur = max(cur, e)
    return cur + (need - acc)


def insert_at(timeline: Timeline, t: Fraction, size: Fraction, job_id: int) -> Timeline:
    """Insert a job at t in place and push later jobs right, keeping their order."""
    pos = bisect.bisect_left(timeline, t, key=lambda x: x[0])
    timeline.insert(pos, [t, t + size, job_id])
    prev_end = t + size
    for entry in itertools.islice(timeline, pos + 1, None):
        if entry[0] >= prev_end:
            break
        shift = prev_end - entry[0]
        entry[0], entry[1] = prev_end, entry[1] + shift
        prev_end = entry[1]
    return timeline


@dataclass
class Round:
    time: Fraction
    segments: tuple[Segment, ...]


@dataclass
class _RandState:
    partition: PartitionState
    small: list = field(default_factory=list)   # originals classified small plus proxies
    large: list = field(default_factory=list)   # originals classified large, release order
    draws: dict = field(default_factory=dict)   # id -> (w, machine)


def _reconstruct(st: _RandState, m: int) -> list[Segment]:
    s1 = run_nsjf(st.small, m)
    timelines: list[Timeline] = [[] for _ in range(m)]
    for seg in s1.segments:
        timelines[seg.machine].append([seg.start, seg.end, seg.job])
    for tl in timelines:
        tl.sort(key=lambda e: e[0])
    for job in st.large:
        if st.partition.labels[job.id] is Label.PROXIED:
            continue
        w, machine = st.draws[job.id]
        tl = timelines[machine]
        t = first_idle_point(tl, job.release, w * job.size)
        insert_at(tl, t, job.size, job.id)
    origin = {j.id: j.proxy_of for j in st.small if j.is_proxy}
    segs = []
    for machine, tl in enumerate(timelines):
        for s, e, j in tl:
            segs.append(Segment(origin.get(j, j), machine, s, e, Outcome.COMPLETED))
    segs.sort(key=lambda s: (s.start, s.machine, s.job))
    return segs


def _run_rand(instance: Instance, rng: RngPolicy, capacity: int, wmax: int,
              multi: bool, rounds: Optional[list], trace: Optional[Transcript]) -> Schedule:
    """Replay the releases in order.

    With ``rounds`` given, the plan is rebuilt at every release instant and the
    executed schedule is stitched from each plan's slice before the next
    release.  Otherwise a plan is built only when a displacement needs to know
    whether a job has started, and the final plan is returned: online stability
    makes the two identical, and the tests check that they are.
    """
    n, m = instance.n, instance.m
    st = _RandState(PartitionState(max(1, capacity), next_proxy_id=n))
    lazy: Optional[list[Segment]] = None      # plan for the current state, if built
    last: list[Segment] = []                  # plan of the previous round (instrumented mode)
    executed: list[Segment] = []
    prev_t: Optional[Fraction] = None

    def started_before(job_id: int, t: Fraction) -> bool:
        nonlocal lazy
        if rounds is not None:
            plan = last
        else:
            if lazy is None:
                lazy = _reconstruct(st, m)
            plan = lazy
        return any(s.job == job_id and s.start < t for s in plan)

    for t, group in itertools.groupby(instance.jobs, key=lambda j: j.release):
        for job in group:
            out = classify(st.partition, job, lambda j: not started_before(j, t))
            lazy = None
            if out.large:
                w = rng.draw("w", job.id, max(1, wmax))
                machine = rng.draw("m", job.id, m) - 1 if multi else 0
                st.draws[job.id] = (w, machine)
                st.large.append(job)
            else:
                st.small.append(job)
            if out.proxy is not None:
                st.small.append(out.proxy)
            if trace is not None:
                trace.add(t, "classify", job=job.id, large=out.large,
                          displaced=out.displaced[0] if out.displaced else None,
                          proxy=out.proxy.id if out.proxy else None)
        if rounds is not None:
            if prev_t is not None:
                executed.extend(s for s in last if prev_t <= s.start < t)
            last = _reconstruct(st, m)
            rounds.append(Round(t, tuple(last)))
        prev_t = t
    if rounds is None:
        executed = _reconstruct(st, m)
    elif prev_t is not None:
        executed.extend(s for s in last if s.start >= prev_t)
    return Schedule(Model.NON_PREEMPTIVE, tuple(executed)).sorted()


def run_rand_single(instance: Instance, rng: RngPolicy, rounds: Optional[list] = None,
                    trace: Optional[Transcript] = None) -> Schedule:
    """Single machine: capacity floor(sqrt n), idle factor w uniform on 1..floor(sqrt n)."""
    if instance.m != 1:
        raise ValueError("run_rand_single needs exactly one machine")
    root = isqrt(instance.n)
    return _run_rand(instance, rng, root, root, False, rounds, trace)


def run_rand_multi(instance: Instance, rng: RngPolicy, rounds: Optional[list] = None,
                   trace: Optional[Transcript] = None) -> Schedule:
    """m machines: capacity floor(sqrt(nm)), w uniform on 1..floor(sqrt(n/m)), machine uniform."""
    n, m = instance.n, instance.m
    return _run_rand(instance, rng, isqrt(n * m), isqrt(n // m), True, rounds, trace)


def rounds_agree(rounds: Sequence[Round]) -> list[Fraction]:
    """Release instants at which a round rewrote the part of the plan before that instant."""
    bad = []
    for prev, cur in zip(rounds, rounds[1:]):
        before = lambda segs: sorted((s for s in segs if s.start < cur.time),
                                     key=lambda s: (s.start, s.machine, s.job))
        if before(prev.segments) != before(cur.segments):
            bad.append(cur.time)
    return bad


# -- deterministic non-preemptive with machine roles -----------------------------------

LARGE_ONLY, MIXED, SMALL_ONLY, ANY = "large-only", "mixed", "small-only", "any"


@dataclass(frozen=True)
class DetNpConfig:
    n: int
    m: int

    @property
    def capacity(self) -> int:
        return max(1, isqrt(self.n * self.m))

    def roles(self) -> list[str]:
        if self.m == 1:
            return [ANY]
        mixed_hi = min(self.m - 1, -(-self.m // 2))
        return [LARGE_ONLY] + [MIXED] * mixed_hi + [SMALL_ONLY] * (self.m - 1 - mixed_hi)

    def gamma(self, k: int) -> int:
        """floor(k / sqrt(n/m)) computed without irrationals."""
        if self.n == 0:
            return 0
        return isqrt(k * k * self.m // self.n)


class _Queues:
    """Small queue (originals and proxies) and active-large queue with lazy deletion."""

    def __init__(self) -> None:
        self.small: list[tuple[Fraction, int, int]] = []   # (size, key id, job to start)
        self.large: list[tuple[Fraction, int]] = []
        self.large_waiting: set[int] = set()

    def push_small(self, job: Job) -> None:
        heapq.heappush(self.small, (job.size, job.id, job.proxy_of if job.is_proxy else job.id))

    def push_large(self, job: Job) -> None:
        self.large_waiting.add(job.id)
        heapq.heappush(self.large, (job.size, job.id))

    def drop_large(self, job_id: int) -> None:
        self.large_waiting.discard(job_id)

    def top_large(self) -> Optional[tuple[Fraction, int]]:
        while self.large and self.large[0][1] not in self.large_waiting:
            heapq.heappop(self.large)
        return self.large[0] if self.large else None

    def pop_large(self) -> int:
        _, job_id = self.top_large()
        heapq.heappop(self.large)
        self.large_waiting.discard(job_id)
        return job_id


class DetNpPolicy(Policy):
    def __init__(self, config: DetNpConfig):
        self.config = config
        self.roles = config.roles()
        self.state = PartitionState(config.capacity, next_proxy_id=config.n)
        self.q = _Queues()
        self.kind: dict[int, str] = {}   # machine -> "small" | "large"

    def on_release(self, engine: Engine, job: Job) -> None:
        out = classify(self.state, job, lambda j: j in engine.waiting)
        (self.q.push_large if out.large else self.q.push_small)(job)
        if out.displaced:
            self.q.drop_large(out.displaced[0])
        if out.proxy is not None:
            self.q.push_small(out.proxy)
        engine.transcript.add(engine.now, "classify", job=job.id, large=out.large,
                              displaced=out.displaced[0] if out.displaced else None)

    def on_complete(self, engine: Engine, job: Job, machine: int) -> None:
        self.kind.pop(machine, None)

    def _start(self, engine: Engine, job_id: int, machine: int, kind: str, **info) -> None:
        self.kind[machine] = kind
        engine.start(job_id, machine, kind=kind, role=self.roles[machine], **info)

    def dispatch(self, engine: Engine) -> None:
        for machine in engine.idle_machines():
            role = self.roles[machine]
            if role in (MIXED, SMALL_ONLY, ANY) and self.q.small:
                _, _, job_id = heapq.heappop(self.q.small)
                self._start(engine, job_id, machine, "small")
            elif role in (LARGE_ONLY, ANY) and self.q.top_large():
                self._start(engine, self.q.pop_large(), machine, "large")
            elif role == MIXED and self.q.top_large():
                theta = sum(1 for i, r in enumerate(self.roles)
                            if r == MIXED and self.kind.get(i) == "large")
                k = len(self.q.large_waiting)
                if theta < self.config.gamma(k):
                    self._start(engine, self.q.pop_large(), machine, "large", theta=theta, k=k)


def run_det_nonpreemptive(instance: Instance, config: Optional[DetNpConfig] = None,
                          trace: Optional[Transcript] = None) -> Schedule:
    config = config or DetNpConfig(instance.n, instance.m)
    return _run(instance, DetNpPolicy(config), trace)


# -- kill-and-restart, known n ----------------------------------------------------------

class KillRestartPolicy(Policy):
    """Small releases that arrive while an active large job runs are counted; at the
    threshold every running active large job is killed."""

    model = Model.KILL_RESTART

    def __init__(self, n: int, m: int):
        self.m = m
        self.threshold = max(1, isqrt(n * m))
        self.state = PartitionState(self.threshold, next_proxy_id=n)
        self.small_only = list(range(m // 2))
        self.mixed = list(range(m // 2, m))
        self.phi = 0
        self.q = _Queues()

    def _active_running(self, engine: Engine) -> list[int]:
        return [i for i in range(self.m)
                if engine.running[i] and self.state.is_active(engine.running[i][0])]

    def on_release(self, engine: Engine, job: Job) -> None:
        out = classify_refined(self.state, job, lambda j: j in engine.waiting)
        engine.transcript.add(engine.now, "classify", job=job.id, large=out.large,
                              displaced=out.displaced[0] if out.displaced else None)
        if out.displaced:
            self.q.drop_large(out.displaced[0])
        if out.proxy is not None:
            self.q.push_small(out.proxy)
        if out.large:
            self.q.push_large(job)
            return
        self.q.push_small(job)
        if self._active_running(engine):
            self.phi += 1
            if self.phi == self.threshold:
                engine.transcript.add(engine.now, "kill-event", phi=self.phi)
                for machine in self._active_running(engine):
                    victim = engine.jobs[engine.running[machine][0]]
                    engine.kill(machine, phi=self.phi)
                    self.q.push_large(victim)
                self.phi = 0

    def dispatch(self, engine: Engine) -> None:
        for machine in self.small_only:
            if engine.running[machine] is None and self.q.small:
                _, _, job_id = heapq.heappop(self.q.small)
                engine.start(job_id, machine, kind="small", role=SMALL_ONLY)
        for machine in self.mixed:
            if engine.running[machine] is not None:
                continue
            small = self.q.small[0] if self.q.small else None
            large = self.q.top_large()
            if small is None and large is None:
                return
            if large is None or (small is not None and small[:2] < large):
                _, _, job_id = heapq.heappop(self.q.small)
                engine.start(job_id, machine, kind="small", role=MIXED)
            else:
                engine.start(self.q.pop_large(), machine, kind="large", role=MIXED)
                self.phi = 0


def run_kill_restart(instance: Instance, trace: Optional[Transcript] = None) -> Schedule:
    return _run(instance, KillRestartPolicy(instance.n, instance.m), trace)


# -- kill-and-restart, unknown n ----------------------------------------------------------

GOLDEN = (math.sqrt(5) - 1) / 2


class UnknownNPolicy(Policy):
    """Guesses n by doubling; a job is currently large if it is among the top
    capacity jobs by size and at least 4P/capacity."""

    model = Model.KILL_RESTART

    def __init__(self, m: int):
        self.m = m
        self.guess = 1
        self.released = 0
        self.work = Fraction(0)
        self.ranked: list[tuple[Fraction, int, int]] = []   # ascending (size, -id, id)
        self.current_large: set[int] = set()
        self.small_only = list(range(m // 2))
        self.mixed = list(range(m // 2, m))
        self.queue: list[tuple[Fraction, int]] = []
        self.capacity = self._capacity()
        self.kills = {"A": 0, "B": 0}

    def _capacity(self) -> int:
        return int(self.guess ** GOLDEN * math.sqrt(self.m))

    def _relabel(self) -> set[int]:
        cap = self.capacity
        out = set()
        for size, _, job_id in reversed(self.ranked[-cap:]):
            if size * cap < 4 * self.work:
                break
            out.add(job_id)
        return out

    def _kill(self, engine: Engine, machines: list[int], kind: str) -> None:
        for machine in machines:
            victim = engine.jobs[engine.running[machine][0]]
            engine.kill(machine, type=kind)
            heapq.heappush(self.queue, (victim.size, victim.id))

    def on_release(self, engine: Engine, job: Job) -> None:
        self.released += 1
        updated = self.released > self.guess
        if updated:
            self.guess *= 2
            self.capacity = self._capacity()
            engine.transcript.add(engine.now, "n-update", guess=self.guess, capacity=self.capacity)
        self.work += job.size
        bisect.insort(self.ranked, (job.size, -job.id, job.id))
        heapq.heappush(self.queue, (job.size, job.id))
        labels = self._relabel()
        flipped = sorted(labels ^ self.current_large)
        if flipped:
            engine.transcript.add(engine.now, "label", flipped=flipped)
        self.current_large = labels
        if updated:
            victims = [i for i in self.small_only
                       if engine.running[i] and engine.running[i][0] in labels]
            if victims:
                self.kills["A"] += 1
                engine.transcript.add(engine.now, "kill-event", type="A")
                self._kill(engine, victims, "A")
        running_large = [i for i in range(self.m)
                         if engine.running[i] and engine.running[i][0] in labels]
        if running_large:
            phi = len(engine.waiting) - len(engine.waiting & labels)
            if phi > self.capacity:
                self.kills["B"] += 1
                engine.transcript.add(engine.now, "kill-event", type="B", phi=phi)
                self._kill(engine, running_large, "B")

    def _pop(self, engine: Engine, small_only: bool) -> Optional[int]:
        held, found = [], None
        while self.queue:
            entry = heapq.heappop(self.queue)
            if entry[1] not in engine.waiting:
                continue
            if small_only and entry[1] in self.current_large:
                held.append(entry)
                continue
            found = entry[1]
            break
        for entry in held:
            heapq.heappush(self.queue, entry)
        return found

    def dispatch(self, engine: Engine) -> None:
        for machine in self.small_only + self.mixed:
            if engine.running[machine] is not None:
                continue
            job_id = self._pop(engine, machine in self.small_only)
            if job_id is not None:
                label = "large" if job_id in self.current_large else "small"
                engine.start(job_id, machine, kind=label)


def run_kill_restart_unknown_n(instance: Instance, trace: Optional[Transcript] = None) -> Schedule:
    return _run(instance, UnknownNPolicy(instance.m), trace)
