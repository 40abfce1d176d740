"""Exact-time scheduling primitives: jobs, instances, schedules, validation, flow.

All times and sizes are :class:`fractions.Fraction`.  Segments are half-open
``[start, end)`` so a machine may start a job at the instant it finishes another.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Optional, Union

TimeQ = Fraction
Number = Union[int, str, Fraction]


def q(value: Number) -> Fraction:
    """Parse an int, Fraction or decimal/"p/q" string exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact times")
    return Fraction(value)


def fmt_q(value: Fraction) -> str:
    return str(value)


class Model(str, enum.Enum):
    NON_PREEMPTIVE = "non-preemptive"
    KILL_RESTART = "kill-restart"
    PREEMPTIVE = "preemptive"
    MIGRATORY = "migratory"


class Outcome(str, enum.Enum):
    COMPLETED = "completed"
    KILLED = "killed"


@dataclass(frozen=True)
class Job:
    id: int
    release: Fraction
    size: Fraction
    proxy_of: Optional[int] = None

    @property
    def is_proxy(self) -> bool:
        return self.proxy_of is not None


@dataclass(frozen=True)
class Instance:
    m: int
    jobs: tuple[Job, ...]
    allow_zero_size: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("need at least one machine")
        for i, job in enumerate(self.jobs):
            if job.id != i:
                raise ValueError(f"job ids must be dense 0..n-1, got {job.id} at {i}")
            if job.release < 0 or job.size < 0:
                raise ValueError(f"job {job.id}: negative release or size")
            if job.size == 0 and not self.allow_zero_size:
                raise ValueError(f"job {job.id}: zero size not allowed")
            if i and (self.jobs[i - 1].release, i - 1) > (job.release, i):
                raise ValueError("jobs must be sorted by (release, id)")

    @property
    def n(self) -> int:
        return len(self.jobs)

    def job(self, job_id: int) -> Job:
        return self.jobs[job_id]

    @classmethod
    def build(cls, m: int, pairs: Iterable[tuple[Number, Number]],
              allow_zero_size: bool = False, meta: Optional[dict] = None) -> "Instance":
        """Build from (release, size) pairs; ids follow the stable release order."""
        items = sorted(((q(r), q(p)) for r, p in pairs), key=lambda rp: rp[0])
        jobs = tuple(Job(i, r, p) for i, (r, p) in enumerate(items))
        return cls(m, jobs, allow_zero_size, dict(meta or {}))


@dataclass(frozen=True)
class Segment:
    job: int
    machine: int
    start: Fraction
    end: Fraction
    outcome: Outcome = Outcome.COMPLETED

    @property
    def length(self) -> Fraction:
        return self.end - self.start


@dataclass(frozen=True)
class Schedule:
    model: Model
    segments: tuple[Segment, ...]

    def by_job(self) -> dict[int, list[Segment]]:
        out: dict[int, list[Segment]] = {}
        for seg in self.segments:
            out.setdefault(seg.job, []).append(seg)
        for segs in out.values():
            segs.sort(key=lambda s: (s.start, s.end))
        return out

    def completion(self, job_id: int) -> Optional[Fraction]:
        ends = [s.end for s in self.segments if s.job == job_id and s.outcome is Outcome.COMPLETED]
        return max(ends) if ends else None

    def sorted(self) -> "Schedule":
        key = lambda s: (s.start, s.machine, s.job, s.end)
        return Schedule(self.model, tuple(sorted(self.segments, key=key)))


class StructuralError(ValueError):
    """Schedule references a job that the instance does not contain."""


@dataclass(frozen=True)
class Violation:
    rule: str
    job: Optional[int]
    segment: Optional[int]
    detail: str = ""

    def __str__(self) -> str:
        where = []
        if self.job is not None:
            where.append(f"job {self.job}")
        if self.segment is not None:
            where.append(f"segment {self.segment}")
        suffix = f" ({', '.join(where)})" if where else ""
        return f"{self.rule}{suffix}{': ' + self.detail if self.detail else ''}"


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}


def _overlaps(a: Segment, b: Segment) -> bool:
    return max(a.start, b.start) < min(a.end, b.end)


def validate_schedule(instance: Instance, schedule: Schedule) -> ValidationReport:
    """Check every model rule; returns all violations rather than stopping at the first."""
    out: list[Violation] = []
    segs = schedule.segments
    for idx, seg in enumerate(segs):
        if not 0 <= seg.job < instance.n:
            raise StructuralError(f"segment {idx} names unknown job {seg.job}")
    index = {id(s): i for i, s in enumerate(segs)}

    for idx, seg in enumerate(segs):
        job = instance.jobs[seg.job]
        if not 0 <= seg.machine < instance.m:
            out.append(Violation("machine out of range", seg.job, idx, f"machine {seg.machine}"))
        if seg.start < job.release:
            out.append(Violation("start before release", seg.job, idx))
        if seg.end < seg.start:
            out.append(Violation("negative length", seg.job, idx))
        elif seg.end == seg.start and not (job.size == 0 and seg.outcome is Outcome.COMPLETED):
            out.append(Violation("empty segment", seg.job, idx))

    per_machine: dict[int, list[Segment]] = {}
    for seg in segs:
        per_machine.setdefault(seg.machine, []).append(seg)
    for machine, lst in per_machine.items():
        lst.sort(key=lambda s: (s.start, s.end))
        # sweep keeping the furthest-reaching segment seen so far
        reach: Optional[Segment] = None
        for seg in lst:
            if reach is not None and _overlaps(reach, seg):
                out.append(Violation("machine overlap", seg.job, index[id(seg)],
                                     f"machine {machine} with job {reach.job}"))
            if reach is None or seg.end > reach.end:
                reach = seg

    grouped = schedule.by_job()
    model = schedule.model
    for job in instance.jobs:
        lst = grouped.get(job.id, [])
        done = [s for s in lst if s.outcome is Outcome.COMPLETED]
        killed = [s for s in lst if s.outcome is Outcome.KILLED]
        for a, b in zip(lst, lst[1:]):
            if _overlaps(a, b):
                out.append(Violation("job overlap", job.id, index[id(b)]))
        if not done:
            out.append(Violation("unfinished job", job.id, None))
            continue
        if model is Model.NON_PREEMPTIVE:
            if len(lst) != 1:
                out.append(Violation("multiple segments in non-preemptive model", job.id, None))
            elif done[0].length != job.size:
                out.append(Violation("wrong length", job.id, index[id(done[0])]))
        elif model is Model.KILL_RESTART:
            if len(done) != 1:
                out.append(Violation("multiple completed segments", job.id, None))
            final = done[-1]
            if final.length != job.size:
                out.append(Violation("wrong length", job.id, index[id(final)]))
            for seg in killed:
                if seg.length > job.size:
                    out.append(Violation("killed segment too long", job.id, index[id(seg)]))
                if seg.end > final.start:
                    out.append(Violation("killed after completion", job.id, index[id(seg)]))
        else:
            if killed:
                out.append(Violation("killed segment in preemptive model", job.id, index[id(killed[0])]))
            if sum((s.length for s in lst), Fraction(0)) != job.size:
                out.append(Violation("wrong total length", job.id, None))
            if model is Model.PREEMPTIVE and len({s.machine for s in lst}) > 1:
                out.append(Violation("migration in non-migratory model", job.id, None))
    return ValidationReport(out)


@dataclass(frozen=True)
class FlowReport:
    per_job: dict[int, Fraction]
    total: Fraction
    baseline_used: Optional[str] = None


def total_flow(instance: Instance, schedule: Schedule) -> FlowReport:
    ends: dict[int, Fraction] = {}
    for seg in schedule.segments:
        if seg.outcome is Outcome.COMPLETED:
            prev = ends.get(seg.job)
            ends[seg.job] = seg.end if prev is None else max(prev, seg.end)
    per_job = {}
    for job in instance.jobs:
        if job.id not in ends:
            raise ValueError(f"job {job.id} never completes")
        per_job[job.id] = ends[job.id] - job.release
    return FlowReport(per_job, sum(per_job.values(), Fraction(0)))


# -- serialization ---------------------------------------------------------

def _jsonable(value: Any) -> Any:
    if isinstance(value, Fraction):
        return fmt_q(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, enum.Enum):
        return value.value
    return value


def instance_to_json(instance: Instance) -> str:
    doc = {
        "m": instance.m,
        "allow_zero_size": instance.allow_zero_size,
        "jobs": [{"id": j.id, "r": fmt_q(j.release), "p": fmt_q(j.size)} for j in instance.jobs],
        "meta": _jsonable(instance.meta),
    }
    return json.dumps(doc, sort_keys=True)


def instance_from_json(text: str) -> Instance:
    doc = json.loads(text)
    jobs = tuple(Job(int(d["id"]), q(d["r"]), q(d["p"])) for d in doc["jobs"])
    jobs = tuple(sorted(jobs, key=lambda j: (j.release, j.id)))
    return Instance(int(doc["m"]), jobs, bool(doc.get("allow_zero_size", False)), doc.get("meta") or {})


def schedule_to_jsonl(schedule: Schedule) -> str:
    lines = [json.dumps({"job": s.job, "machine": s.machine, "start": fmt_q(s.start),
                         "end": fmt_q(s.end), "outcome": s.outcome.value}, sort_keys=True)
             for s in schedule.segments]
    return "".join(line + "\n" for line in lines)


def schedule_from_jsonl(text: str, model: Optional[Model] = None) -> Schedule:
    segs = []
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        segs.append(Segment(int(d["job"]), int(d["machine"]), q(d["start"]), q(d["end"]),
                            Outcome(d.get("outcome", "completed"))))
    return Schedule(model or infer_model(segs), tuple(segs))


def infer_model(segments: Iterable[Segment]) -> Model:
    """Loosest reading of a bare segment list: used only when no model is given."""
    segs = list(segments)
    if any(s.outcome is Outcome.KILLED for s in segs):
        return Model.KILL_RESTART
    machines: dict[int, set[int]] = {}
    counts: dict[int, int] = {}
    for s in segs:
        machines.setdefault(s.job, set()).add(s.machine)
        counts[s.job] = counts.get(s.job, 0) + 1
    if all(c == 1 for c in counts.values()):
        return Model.NON_PREEMPTIVE
    if all(len(ms) == 1 for ms in machines.values()):
        return Model.PREEMPTIVE
    return Model.MIGRATORY
