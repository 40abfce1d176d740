from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from flowlab.core import Job
from flowlab.partition import (COMMITTED, Label, PartitionState, classify, classify_refined,
                               rank_key)


def job(i, p, r=0):
    return Job(i, Fraction(r), Fraction(p))


def always_waiting(_):
    return True


def test_fill_displace_and_small():
    st_ = PartitionState(2, next_proxy_id=10)
    assert classify(st_, job(0, 5), always_waiting).large
    assert classify(st_, job(1, 3), always_waiting).large
    assert sorted(st_.active_ids) == [0, 1]
    out = classify(st_, job(2, 7, r=4), always_waiting)
    assert out.large
    evicted, proxy = out.displaced
    assert evicted == 1
    assert proxy == Job(10, Fraction(4), Fraction(3), proxy_of=1)
    assert st_.labels[1] is Label.PROXIED and st_.proxied_by == {1: 10}
    out = classify(st_, job(3, 1, r=5), always_waiting)
    assert not out.large and out.displaced is None


def test_started_job_is_committed():
    st_ = PartitionState(1, next_proxy_id=5)
    classify(st_, job(0, 1), always_waiting)
    out = classify(st_, job(1, 2), lambda j: False)
    assert out.displaced == (0, COMMITTED) and out.proxy is None
    assert st_.labels[0] is Label.COMMITTED and st_.next_proxy_id == 5


def test_tie_with_minimum_is_small():
    st_ = PartitionState(1, next_proxy_id=5)
    classify(st_, job(0, 2), always_waiting)
    assert not classify(st_, job(1, 2), always_waiting).large
    assert rank_key(job(0, 2)) > rank_key(job(1, 2))


def test_reclassification_rejected():
    st_ = PartitionState(1, next_proxy_id=5)
    classify(st_, job(0, 2), always_waiting)
    with pytest.raises(ValueError):
        classify(st_, job(0, 2), always_waiting)
    with pytest.raises(ValueError):
        PartitionState(0, next_proxy_id=0)


def refined(capacity, prior_work, p):
    st_ = PartitionState(capacity, next_proxy_id=100, released_work=Fraction(prior_work))
    return classify_refined(st_, job(0, p), always_waiting), st_


def test_refined_absolute_rule():
    assert not refined(4, 10, 3)[0].large
    out, st_ = refined(4, 0, 8)
    assert not out.large and st_.released_work == 8
    assert not refined(2, 1, 100)[0].large
    out, st_ = refined(50, 1, 100)
    assert out.large and st_.active_ids == [0]


@st.composite
def streams(draw, distinct=False):
    capacity = draw(st.integers(1, 10))
    n = draw(st.integers(1, 40))
    if distinct:
        sizes = draw(st.lists(st.integers(1, 500), min_size=n, max_size=n, unique=True))
    else:
        sizes = draw(st.lists(st.integers(1, 12), min_size=n, max_size=n))
    waiting = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    jobs = [Job(i, Fraction(i, 2), Fraction(s, 3)) for i, s in enumerate(sizes)]
    return capacity, jobs, waiting


def replay(capacity, jobs, waiting, rule):
    state = PartitionState(capacity, next_proxy_id=len(jobs))
    log = []
    for j in jobs:
        out = rule(state, j, lambda i: waiting[i])
        assert len(state.active) <= capacity
        log.append((j, out, state.released_work))
    return state, log


@given(streams())
def test_small_jobs_have_enough_larger_predecessors(stream):
    capacity, jobs, waiting = stream
    _, log = replay(capacity, jobs, waiting, classify)
    for idx, (j, out, _) in enumerate(log):
        if not out.large:
            bigger = [o for o in jobs[:idx] if rank_key(o) > rank_key(j)]
            assert len(bigger) >= capacity


@given(streams(distinct=True))
def test_small_witness_strict_sizes(stream):
    capacity, jobs, waiting = stream
    _, log = replay(capacity, jobs, waiting, classify)
    for idx, (j, out, _) in enumerate(log):
        if not out.large:
            assert sum(1 for o in jobs[:idx] if o.size > j.size) >= capacity


@given(streams(), st.sampled_from([classify, classify_refined]))
def test_proxy_injection(stream, rule):
    capacity, jobs, waiting = stream
    state, log = replay(capacity, jobs, waiting, rule)
    image = {}
    for j, out, _ in log:
        proxy = out.proxy
        if proxy is None:
            continue
        original = jobs[proxy.proxy_of]
        assert proxy.size == original.size and proxy.release == j.release
        assert j.size > proxy.size
        assert j.id not in image.values()
        image[proxy.id] = j.id
    assert len(set(image.values())) == len(image)
    assert set(state.proxied_by.values()) == set(image)


@given(streams())
def test_refined_bounds(stream):
    capacity, jobs, waiting = stream
    _, log = replay(capacity, jobs, waiting, classify_refined)
    for idx, (j, out, work) in enumerate(log):
        if out.large:
            assert j.size * capacity > 4 * work
        else:
            bigger = sum(1 for o in jobs[:idx] if rank_key(o) > rank_key(j))
            assert j.size * capacity <= 4 * work or bigger >= capacity


@given(streams())
def test_labels_are_consistent(stream):
    capacity, jobs, waiting = stream
    state, log = replay(capacity, jobs, waiting, classify)
    active = set(state.active_ids)
    for j in jobs:
        assert (state.labels[j.id] is Label.LARGE) == (j.id in active)
