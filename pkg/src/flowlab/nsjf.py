"""Non-preemptive shortest-job-first on m machines with optional initial blocking."""
from __future__ import annotations

import heapq
from fractions import Fraction
from typing import Optional, Sequence

from .core import Job, Model, Outcome, Schedule, Segment


def run_nsjf(jobs: Sequence[Job], m: int, blocking: Optional[Sequence[Fraction]] = None) -> Schedule:
    """Whenever a machine is free and unblocked, start the smallest waiting job.

    Machine ``i`` cannot start anything before ``blocking[i]``.  Ties in size go
    to the lower id, ties between free machines to the lower index.
    """
    free = [Fraction(b) for b in blocking] if blocking is not None else [Fraction(0)] * m
    if len(free) != m:
        raise ValueError("blocking vector must have one entry per machine")
    pending = sorted(jobs, key=lambda j: (j.release, j.id))
    waiting: list[tuple[Fraction, int, Job]] = []
    segs: list[Segment] = []
    i, clock = 0, Fraction(0)
    while i < len(pending) or waiting:
        t = max(clock, min(free))
        if not waiting and pending[i].release > t:
            t = pending[i].release
        while i < len(pending) and pending[i].release <= t:
            job = pending[i]
            heapq.heappush(waiting, (job.size, job.id, job))
            i += 1
        clock = t
        machine = next(k for k in range(m) if free[k] <= t)
        _, _, job = heapq.heappop(waiting)
        segs.append(Segment(job.id, machine, t, t + job.size, Outcome.COMPLETED))
        free[machine] = t + job.size
    return Schedule(Model.NON_PREEMPTIVE, tuple(segs))


def active_power(blocking: Sequence[Fraction], t: Fraction) -> Fraction:
    """Machine time available in [0, t): sum of max(0, t - b_i)."""
    return sum((t - b for b in blocking if t > b), Fraction(0))


def active_power_inverse(blocking: Sequence[Fraction], w: Fraction) -> Fraction:
    """Least t with active_power(blocking, t) >= w."""
    if w <= 0:
        return Fraction(0)
    bs = sorted(Fraction(b) for b in blocking)
    prefix = Fraction(0)
    for j in range(1, len(bs) + 1):
        prefix += bs[j - 1]
        t = (w + prefix) / j
        if j == len(bs) or t <= bs[j]:
            return t
    raise AssertionError("unreachable")


def _eligible(job: Job, p: Optional[Fraction], t: Fraction) -> bool:
    return (p is None or job.size <= p) and job.release <= t


def progress_volume_started(schedule: Schedule, jobs: Sequence[Job], p: Optional[Fraction],
                            t: Fraction, strict: bool = False) -> Fraction:
    """Full size of every job with size <= p (None: no limit) that has started by t.

    ``strict`` gives the left limit: only starts strictly before t count.
    """
    first: dict[int, Fraction] = {}
    for seg in schedule.segments:
        if seg.job not in first or seg.start < first[seg.job]:
            first[seg.job] = seg.start
    total = Fraction(0)
    for job in jobs:
        s = first.get(job.id)
        if s is None or not _eligible(job, p, t):
            continue
        if s < t or (s == t and not strict):
            total += job.size
    return total


def progress_volume_processed(schedule: Schedule, jobs: Sequence[Job], p: Optional[Fraction],
                              t: Fraction) -> Fraction:
    """Work executed before t on jobs with size <= p; continuous in t."""
    sizes = {job.id: job.size for job in jobs}
    total = Fraction(0)
    for seg in schedule.segments:
        size = sizes.get(seg.job)
        if size is None or (p is not None and size > p) or seg.outcome is not Outcome.COMPLETED:
            continue
        if seg.start < t:
            total += min(seg.end, t) - seg.start
    return total


def completed_count(schedule: Schedule, jobs: Sequence[Job], p: Optional[Fraction],
                    t: Fraction, strict: bool = False) -> int:
    ends: dict[int, Fraction] = {}
    for seg in schedule.segments:
        if seg.outcome is Outcome.COMPLETED:
            ends[seg.job] = max(ends.get(seg.job, seg.end), seg.end)
    count = 0
    for job in jobs:
        c = ends.get(job.id)
        if c is None or not _eligible(job, p, t):
            continue
        if c < t or (c == t and not strict):
            count += 1
    return count
