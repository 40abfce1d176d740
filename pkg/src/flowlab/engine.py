"""Deterministic discrete-event engine shared by the online policies and adversaries.

At each instant the engine processes, in order: completions, agent timers,
releases (one ``on_release`` call per job, by id), then a single dispatch pass.
Agents may inject new releases at the current instant or later; those are
picked up by another pass at the same instant.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

from .core import Instance, Job, Model, Outcome, Schedule, Segment, fmt_q


@dataclass
class Transcript:
    events: list[dict] = field(default_factory=list)

    def add(self, t: Fraction, event: str, /, **data: Any) -> None:
        self.events.append({"t": t, "ev": event, **data})

    def of(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["ev"] == kind]

    def to_jsonl(self) -> str:
        import json

        def conv(v: Any) -> Any:
            if isinstance(v, Fraction):
                return fmt_q(v)
            if isinstance(v, (list, tuple)):
                return [conv(x) for x in v]
            return v

        return "".join(json.dumps({k: conv(v) for k, v in e.items()}, sort_keys=True) + "\n"
                       for e in self.events)


class Agent:
    """Observer with optional timers; adversaries subclass this."""

    def start(self, engine: "Engine") -> None:
        pass

    def next_timer(self) -> Optional[Fraction]:
        return None

    def on_timer(self, engine: "Engine") -> None:
        pass

    def on_start(self, engine: "Engine", job: Job, machine: int) -> None:
        pass

    def on_kill(self, engine: "Engine", job: Job, machine: int) -> None:
        pass

    def on_complete(self, engine: "Engine", job: Job, machine: int) -> None:
        pass


class Policy:
    """Online scheduling policy.  Subclasses decide what to start and what to kill."""

    model = Model.NON_PREEMPTIVE

    def on_release(self, engine: "Engine", job: Job) -> None:
        pass

    def on_complete(self, engine: "Engine", job: Job, machine: int) -> None:
        pass

    def next_timer(self) -> Optional[Fraction]:
        """A future instant at which the policy wants a dispatch pass, if any."""
        return None

    def dispatch(self, engine: "Engine") -> None:
        raise NotImplementedError


class Engine:
    def __init__(self, m: int, policy: Policy, jobs: Sequence[Job] = (),
                 agents: Sequence[Agent] = (), horizon: Optional[Fraction] = None):
        self.m = m
        self.policy = policy
        self.agents = list(agents)
        self.now = Fraction(0)
        self.horizon = horizon
        self.jobs: dict[int, Job] = {}
        self.running: list[Optional[tuple[int, Fraction]]] = [None] * m
        self.waiting: set[int] = set()
        self.completed: set[int] = set()
        self.segments: list[Segment] = []
        self.transcript = Transcript()
        self._pending: list[tuple[Fraction, int]] = []
        for job in jobs:
            self._enqueue(job)

    # -- agent/policy API -----------------------------------------------------

    def _enqueue(self, job: Job) -> None:
        if job.id in self.jobs:
            raise ValueError(f"duplicate job id {job.id}")
        self.jobs[job.id] = job
        heapq.heappush(self._pending, (job.release, job.id))

    def release(self, release: Fraction, size: Fraction) -> Job:
        """Adversary hook: add a job with the next free id, no earlier than now."""
        if release < self.now:
            raise ValueError("cannot release a job in the past")
        job = Job(len(self.jobs), Fraction(release), Fraction(size))
        self._enqueue(job)
        return job

    def idle_machines(self) -> list[int]:
        return [i for i, r in enumerate(self.running) if r is None]

    def running_job(self, machine: int) -> Optional[int]:
        r = self.running[machine]
        return r[0] if r else None

    def machine_of(self, job_id: int) -> Optional[int]:
        for i, r in enumerate(self.running):
            if r and r[0] == job_id:
                return i
        return None

    def start(self, job_id: int, machine: int, **info: Any) -> None:
        if self.running[machine] is not None:
            raise RuntimeError(f"machine {machine} is busy")
        if job_id not in self.waiting:
            raise RuntimeError(f"job {job_id} is not waiting")
        self.waiting.discard(job_id)
        self.running[machine] = (job_id, self.now)
        self.transcript.add(self.now, "start", job=job_id, machine=machine, **info)
        job = self.jobs[job_id]
        for agent in self.agents:
            agent.on_start(self, job, machine)

    def kill(self, machine: int, **info: Any) -> None:
        job_id, start = self.running[machine]
        self.running[machine] = None
        if self.now > start:
            self.segments.append(Segment(job_id, machine, start, self.now, Outcome.KILLED))
        self.waiting.add(job_id)
        self.transcript.add(self.now, "kill", job=job_id, machine=machine, **info)
        job = self.jobs[job_id]
        for agent in self.agents:
            agent.on_kill(self, job, machine)

    # -- main loop -------------------------------------------------------------

    def _end_of(self, machine: int) -> Optional[Fraction]:
        r = self.running[machine]
        return r[1] + self.jobs[r[0]].size if r else None

    def _next_time(self) -> Optional[Fraction]:
        cands = [e for e in (self._end_of(i) for i in range(self.m)) if e is not None]
        if self._pending:
            cands.append(self._pending[0][0])
        cands.extend(t for t in (a.next_timer() for a in self.agents) if t is not None)
        wake = self.policy.next_timer()
        if wake is not None and wake > self.now:
            cands.append(wake)
        return min(cands) if cands else None

    def run(self) -> "Engine":
        for agent in self.agents:
            agent.start(self)
        while True:
            t = self._next_time()
            if t is None or (self.horizon is not None and t > self.horizon):
                break
            if t < self.now:
                raise RuntimeError("time went backwards")
            self.now = t
            for machine in range(self.m):
                if self._end_of(machine) == t:
                    job_id, start = self.running[machine]
                    self.running[machine] = None
                    self.segments.append(Segment(job_id, machine, start, t, Outcome.COMPLETED))
                    self.completed.add(job_id)
                    self.transcript.add(t, "complete", job=job_id, machine=machine)
                    job = self.jobs[job_id]
                    self.policy.on_complete(self, job, machine)
                    for agent in self.agents:
                        agent.on_complete(self, job, machine)
            for agent in self.agents:
                if agent.next_timer() == t:
                    agent.on_timer(self)
            while self._pending and self._pending[0][0] == t:
                _, job_id = heapq.heappop(self._pending)
                job = self.jobs[job_id]
                self.waiting.add(job_id)
                self.transcript.add(t, "release", job=job_id, r=job.release, p=job.size)
                self.policy.on_release(self, job)
            self.policy.dispatch(self)
        return self

    def schedule(self) -> Schedule:
        return Schedule(self.policy.model, tuple(self.segments)).sorted()

    def instance(self, allow_zero_size: bool = True, meta: Optional[dict] = None) -> Instance:
        jobs = tuple(sorted(self.jobs.values(), key=lambda j: j.id))
        return Instance(self.m, jobs, allow_zero_size, dict(meta or {}))


def run_policy(instance: Instance, policy: Policy) -> Engine:
    return Engine(instance.m, policy, instance.jobs).run()
