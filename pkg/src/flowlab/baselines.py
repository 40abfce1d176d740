"""Offline baselines: SRPT, exact non-preemptive optimum for tiny inputs, machine reduction."""
from __future__ import annotations

from fractions import Fraction
from typing import Optional

from .core import Instance, Job, Model, Outcome, Schedule, Segment

BRUTE_FORCE_MAX_N = 9


def run_srpt(instance: Instance, migratory: bool = True) -> Schedule:
    """Run the m jobs with least remaining work at every event (ties by id).

    Without migration a job is pinned to the first machine it runs on and
    waits whenever that machine is taken by a higher-priority job.
    """
    m = instance.m
    jobs = list(instance.jobs)
    remaining = {j.id: j.size for j in jobs}
    pinned: dict[int, int] = {}
    open_seg: list[Optional[tuple[int, Fraction]]] = [None] * m
    segs: list[Segment] = []
    released: list[int] = []
    i, now = 0, Fraction(0)

    def close(machine: int, t: Fraction) -> None:
        if open_seg[machine] is not None:
            job_id, start = open_seg[machine]
            if t > start:
                segs.append(Segment(job_id, machine, start, t, Outcome.COMPLETED))
            open_seg[machine] = None

    while i < len(jobs) or released:
        if not released:
            now = max(now, jobs[i].release)
        while i < len(jobs) and jobs[i].release <= now:
            released.append(jobs[i].id)
            i += 1
        for job_id in [j for j in released if remaining[j] == 0]:
            machine = pinned.get(job_id, 0)
            segs.append(Segment(job_id, machine, now, now, Outcome.COMPLETED))
            released.remove(job_id)
        if not released:
            continue
        released.sort(key=lambda j: (remaining[j], j))
        current = {open_seg[k][0]: k for k in range(m) if open_seg[k] is not None}
        assign: dict[int, int] = {}
        if migratory:
            chosen = released[:m]
            taken = {current[j] for j in chosen if j in current}
            spare = [k for k in range(m) if k not in taken]
            for j in chosen:
                assign[j] = current[j] if j in current else spare.pop(0)
        else:
            busy: set[int] = set()
            for j in released:
                if len(busy) == m:
                    break
                if j in pinned:
                    if pinned[j] not in busy:
                        assign[j] = pinned[j]
                        busy.add(pinned[j])
                else:
                    free = min(k for k in range(m) if k not in busy)
                    assign[j] = free
                    busy.add(free)
        for machine in range(m):
            seg = open_seg[machine]
            if seg is not None and assign.get(seg[0]) != machine:
                close(machine, now)
        for j, machine in assign.items():
            pinned.setdefault(j, machine)
            if open_seg[machine] is None:
                open_seg[machine] = (j, now)
        horizon = min(now + remaining[j] for j in assign)
        if i < len(jobs):
            horizon = min(horizon, jobs[i].release)
        for j in assign:
            remaining[j] -= horizon - now
        now = horizon
        for machine in range(m):
            seg = open_seg[machine]
            if seg is not None and remaining[seg[0]] == 0:
                close(machine, now)
                released.remove(seg[0])
    model = Model.MIGRATORY if migratory else Model.PREEMPTIVE
    return Schedule(model, tuple(segs)).sorted()


# -- brute force ----------------------------------------------------------------

def _single_machine_fronts(jobs: list[Job]) -> list[tuple[Fraction, tuple[int, ...]]]:
    """For every subset (bitmask) the best total flow on one machine and its order.

    Keeps, per subset, the Pareto front of (finish time, flow) over orders; a
    dominated prefix can never lead to a better completion of the same subset.
    """
    n = len(jobs)
    fronts: list[list[tuple[Fraction, Fraction, tuple[int, ...]]]] = [[] for _ in range(1 << n)]
    fronts[0] = [(Fraction(0), Fraction(0), ())]
    for mask in range(1, 1 << n):
        cands = []
        for b in range(n):
            if not mask >> b & 1:
                continue
            job = jobs[b]
            for end, flow, order in fronts[mask ^ (1 << b)]:
                finish = max(end, job.release) + job.size
                cands.append((finish, flow + finish - job.release, order + (b,)))
        cands.sort(key=lambda c: (c[0], c[1], c[2]))
        front = []
        for c in cands:
            if not front or c[1] < front[-1][1]:
                front.append(c)
        fronts[mask] = front
    return [(min(f, key=lambda c: (c[1], c[2]))[1], min(f, key=lambda c: (c[1], c[2]))[2])
            for f in fronts]


def brute_force_opt_np(instance: Instance) -> tuple[Schedule, Fraction]:
    """Exact minimum total flow without preemption, by subset dynamic programming.

    Enumerates every split of the jobs into at most m machine sets; each set is
    solved exactly over all orders with earliest-start timing.
    """
    n, m = instance.n, instance.m
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refuses n={n} > {BRUTE_FORCE_MAX_N}")
    jobs = list(instance.jobs)
    best_single = _single_machine_fronts(jobs)
    full = (1 << n) - 1
    total_size = [sum((jobs[b].size for b in range(n) if mask >> b & 1), Fraction(0))
                  for mask in range(1 << n)]

    best: Optional[tuple[Fraction, tuple[int, ...]]] = None

    def search(rest: int, machines_left: int, acc: Fraction, parts: tuple[int, ...]) -> None:
        nonlocal best
        if best is not None and acc + total_size[rest] > best[0]:
            return
        if rest == 0:
            if best is None or (acc, parts) < best:
                best = (acc, parts)
            return
        if machines_left == 1:
            search(0, 0, acc + best_single[rest][0], parts + (rest,))
            return
        low = rest & -rest   # the lowest remaining job anchors this part: no symmetric repeats
        sub = rest
        while sub:
            if sub & low:
                search(rest ^ sub, machines_left - 1, acc + best_single[sub][0], parts + (sub,))
            sub = (sub - 1) & rest

    search(full, min(m, n) if n else 0, Fraction(0), ())
    if best is None:
        return Schedule(Model.NON_PREEMPTIVE, ()), Fraction(0)
    segs = []
    for machine, mask in enumerate(best[1]):
        end = Fraction(0)
        for b in best_single[mask][1]:
            job = jobs[b]
            start = max(end, job.release)
            end = start + job.size
            segs.append(Segment(job.id, machine, start, end, Outcome.COMPLETED))
    return Schedule(Model.NON_PREEMPTIVE, tuple(segs)).sorted(), best[0]


# -- machine reduction ------------------------------------------------------------

def reassign_to_fewer_machines(schedule: Schedule, instance: Instance, k: int) -> Schedule:
    """Empty the k least-loaded machines into the remaining m-k.

    Each displaced job starts, unpreempted, at its original first start on the
    surviving machine holding the fewest jobs; residents keep their order and
    are pushed right by at most that job's size.  Output machines are renumbered
    0..m-k-1 and the result is a non-migratory preemptive schedule.
    """
    m = instance.m
    if not 1 <= k <= m - 1:
        raise ValueError(f"k must be in 1..{m - 1}")
    home: dict[int, int] = {}
    for seg in schedule.segments:
        if home.setdefault(seg.job, seg.machine) != seg.machine:
            raise ValueError("input must keep every job on one machine")
    load = [Fraction(0)] * m
    members: list[list[int]] = [[] for _ in range(m)]
    for job_id, machine in sorted(home.items()):
        load[machine] += instance.jobs[job_id].size
        members[machine].append(job_id)
    order = sorted(range(m), key=lambda i: (load[i], i))
    light, kept = set(order[:k]), sorted(order[k:])
    renumber = {old: new for new, old in enumerate(kept)}
    first_start = {}
    for seg in schedule.segments:
        first_start[seg.job] = min(first_start.get(seg.job, seg.start), seg.start)

    pieces: list[list[list]] = [[] for _ in kept]    # per surviving machine: [start, end, job]
    count = [0] * len(kept)
    for seg in schedule.segments:
        if seg.machine in renumber:
            pieces[renumber[seg.machine]].append([seg.start, seg.end, seg.job])
    for old in kept:
        count[renumber[old]] = len(members[old])
    for tl in pieces:
        tl.sort(key=lambda p: p[0])

    moved = sorted((j for i in light for j in members[i]), key=lambda j: (first_start[j], j))
    for job_id in moved:
        t, size = first_start[job_id], instance.jobs[job_id].size
        target = min(range(len(kept)), key=lambda i: (count[i], i))
        count[target] += 1
        tl = pieces[target]
        out = []
        for s, e, j in tl:
            if e <= t:
                out.append([s, e, j])
            elif s < t:
                out.append([s, t, j])       # split at t; the tail is pushed below
        tail = [[max(s, t), e, j] for s, e, j in tl if e > t]
        out.append([t, t + size, job_id])
        prev = t + size
        for s, e, j in tail:
            start = max(s, prev)
            out.append([start, start + (e - s), j])
            prev = start + (e - s)
        pieces[target] = out

    segs = []
    for machine, tl in enumerate(pieces):
        merged: list[list] = []
        for s, e, j in tl:
            if merged and merged[-1][2] == j and merged[-1][1] == s:
                merged[-1][1] = e
            elif e > s or instance.jobs[j].size == 0:
                merged.append([s, e, j])
        segs.extend(Segment(j, machine, s, e, Outcome.COMPLETED) for s, e, j in merged)
    return Schedule(Model.PREEMPTIVE, tuple(segs)).sorted()
