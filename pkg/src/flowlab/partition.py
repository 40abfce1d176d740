"""Online rank-based partitioning of arriving jobs into large and small.

The active-large set holds at most ``capacity`` jobs.  Ranking uses the key
``(size, -id)``: among equal sizes the earlier job ranks higher, so an arrival
that only ties the current minimum is classified small.
"""
from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

from .core import Job


class Label(str, enum.Enum):
    SMALL = "small"
    LARGE = "large"
    PROXIED = "proxied"
    COMMITTED = "committed"


class Committed:
    """Marker: the displaced job had already started, so it keeps running as is."""

    def __repr__(self) -> str:
        return "Committed"


COMMITTED = Committed()


@dataclass(frozen=True)
class ClassifyOutcome:
    large: bool
    displaced: Optional[tuple[int, Union[Job, Committed]]] = None

    @property
    def proxy(self) -> Optional[Job]:
        if self.displaced and isinstance(self.displaced[1], Job):
            return self.displaced[1]
        return None


def rank_key(job: Job) -> tuple[Fraction, int]:
    return (job.size, -job.id)


@dataclass
class PartitionState:
    capacity: int
    next_proxy_id: int
    active: list = field(default_factory=list)        # sorted [(size, -id, id)]
    labels: dict = field(default_factory=dict)        # id -> Label
    proxied_by: dict = field(default_factory=dict)    # original id -> proxy id
    released_work: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("capacity must be positive")

    @property
    def active_ids(self) -> list[int]:
        return [entry[2] for entry in self.active]

    def is_active(self, job_id: int) -> bool:
        return self.labels.get(job_id) is Label.LARGE

    def dump(self) -> dict:
        return {"capacity": self.capacity, "active": self.active_ids,
                "labels": {k: v.value for k, v in self.labels.items()},
                "released_work": str(self.released_work)}


def _rank(state: PartitionState, job: Job, is_waiting: Callable[[int], bool]) -> ClassifyOutcome:
    entry = (job.size, -job.id, job.id)
    if len(state.active) < state.capacity:
        bisect.insort(state.active, entry)
        state.labels[job.id] = Label.LARGE
        return ClassifyOutcome(True)
    if entry[:2] <= state.active[0][:2]:
        state.labels[job.id] = Label.SMALL
        return ClassifyOutcome(False)
    size, _, evicted = state.active.pop(0)
    bisect.insort(state.active, entry)
    state.labels[job.id] = Label.LARGE
    if is_waiting(evicted):
        proxy = Job(state.next_proxy_id, job.release, size, proxy_of=evicted)
        state.next_proxy_id += 1
        state.labels[evicted] = Label.PROXIED
        state.proxied_by[evicted] = proxy.id
        return ClassifyOutcome(True, (evicted, proxy))
    state.labels[evicted] = Label.COMMITTED
    return ClassifyOutcome(True, (evicted, COMMITTED))


def _admit(state: PartitionState, job: Job) -> None:
    if job.id in state.labels:
        raise ValueError(f"job {job.id} already classified")
    if job.is_proxy:
        raise ValueError("proxy jobs are never classified")
    state.released_work += job.size


def classify(state: PartitionState, job: Job, is_waiting: Callable[[int], bool]) -> ClassifyOutcome:
    """Rank rule only: fill the active set, else displace its minimum if strictly larger."""
    _admit(state, job)
    return _rank(state, job, is_waiting)


def classify_refined(state: PartitionState, job: Job, is_waiting: Callable[[int], bool]) -> ClassifyOutcome:
    """Absolute size rule first (p <= 4P/capacity, P including this job), then the rank rule."""
    _admit(state, job)
    if job.size * state.capacity <= 4 * state.released_work:
        state.labels[job.id] = Label.SMALL
        return ClassifyOutcome(False)
    return _rank(state, job, is_waiting)
