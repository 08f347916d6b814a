from fractions import Fraction

import pytest
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.stateful import RuleBasedStateMachine, initialize, invariant, rule, run_state_machine_as_test

from app.errors import JobLimitExceeded, OvershootError
from app.services.compiler import build_rs_network
from app.services.network import InitialCondition
from app.services.simulator import (
    EventKind,
    advance_to,
    init_sim,
    next_event_time,
    queue_snapshot,
    run_until,
    step,
    total_jobs,
    workload,
)

from .conftest import arrivals, make_class, make_network
from .strategies import networks

F = Fraction


def kinds(events, class_id=None):
    return [e.kind for e in events if class_id is None or e.class_id == class_id]


def test_empty_network_has_no_events():
    spec = make_network(make_class("a", "S", "1"))
    state = init_sim(spec)
    state, events = step(state)
    assert events == []
    assert next_event_time(state) is None
    assert run_until(state, F(10)).end_time == 10


def test_service_drains_between_events():
    spec = make_network(make_class("x", "S", "1/2"))
    state = init_sim(spec, InitialCondition(in_service=(("x", F(1, 2)),)))
    step(state)
    assert next_event_time(state) == F(1, 2)
    advance_to(state, F(3, 10))
    assert state.servers["S"].remaining == F(1, 5)
    with pytest.raises(OvershootError):
        advance_to(state, F(1))
    with pytest.raises(OvershootError):
        advance_to(state, F(1, 10))


def test_next_event_is_earliest_of_completion_and_arrival():
    spec = make_network(
        make_class("x", "S", "1/25"),
        make_class("y", "T", "1", arrival=arrivals(3, F(27, 10))),
    )
    state = init_sim(spec, InitialCondition(in_service=(("x", F(1, 25)),)))
    step(state)
    assert next_event_time(state) == F(1, 25)


def test_zero_capacity_arrival_dropped_while_server_busy():
    spec = make_network(
        make_class("h", "S", "1", priority=1),
        make_class("z", "S", "1", capacity=0, priority=2, arrival=arrivals(10, F(1, 2))),
    )
    state = init_sim(spec, InitialCondition(in_service=(("h", F(1)),)))
    trace = run_until(state, F(1, 2))
    assert kinds(trace.events, "z") == [EventKind.EXTERNAL_ARRIVAL, EventKind.DROP]
    assert state.counters["z"].dropped == 1
    assert state.occupancy("z") == 0


def test_zero_capacity_arrival_admitted_on_idle_server():
    spec = make_network(
        make_class("h", "S", "1", priority=1),
        make_class("z", "S", "1", capacity=0, priority=2, arrival=arrivals(10, F(1, 2))),
    )
    state = init_sim(spec)
    trace = run_until(state, F(3, 2))
    assert kinds(trace.events, "z") == [
        EventKind.EXTERNAL_ARRIVAL,
        EventKind.ADMIT,
        EventKind.SERVICE_START,
        EventKind.SERVICE_COMPLETE,
        EventKind.DEPART,
    ]
    assert [e.time for e in trace.events if e.kind == EventKind.DEPART] == [F(3, 2)]


def test_simultaneous_zero_capacity_deliveries_pass_in_priority_order():
    spec = make_network(
        make_class("d1", "S4", "1/50", priority=1),
        make_class("d2", "S4", "0", capacity=0, nxt="t2", priority=2, arrival=arrivals(3, 0, 1)),
        make_class("d3", "S4", "0", capacity=0, nxt="t3", priority=3, arrival=arrivals(3, 0, 1)),
        make_class("t2", "A", "1"),
        make_class("t3", "B", "1"),
    )
    state = init_sim(spec)
    trace = run_until(state, F(3))
    admits = [e.class_id for e in trace.events if e.kind == EventKind.ADMIT]
    assert admits[:2] == ["d2", "d3"]
    started = {e.class_id: e.time for e in trace.events if e.kind == EventKind.SERVICE_START}
    assert started["t2"] == started["t3"] == 3


def test_zero_service_job_waits_behind_service_then_passes_instantly():
    spec = make_network(
        make_class("i11", "S1", "0", nxt="i21", priority=2, arrival=arrivals(10, F(1, 4))),
        make_class("i12", "S1", "1/2", priority=1),
        make_class("i21", "S2", "1/2", priority=1),
    )
    state = init_sim(spec, InitialCondition(in_service=(("i12", F(1, 2)),)))
    run_until(state, F(1, 4))
    assert len(state.queue("i11")) == 1
    trace = run_until(state, F(1, 2))
    assert len(state.queue("i11")) == 0
    starts = [(e.time, e.class_id) for e in trace.events if e.kind == EventKind.SERVICE_START]
    assert (F(1, 2), "i21") in starts
    assert state.servers["S2"].busy


def crossing(s1="S1", s2="S2", feed=None):
    """i12/i21 with zero-service feeders i11 -> i21 and i22 -> i12"""
    return make_network(
        make_class("i11", s1, "0", nxt="i21", priority=2, arrival=feed.get("i11") if feed else None),
        make_class("i12", s1, "1/2", priority=1),
        make_class("i21", s2, "1/2", priority=1),
        make_class("i22", s2, "0", nxt="i12", priority=2, arrival=feed.get("i22") if feed else None),
    )


@pytest.mark.parametrize("s1, s2", [("S1", "S2"), ("Y", "X")])
def test_arrival_into_higher_class_keeps_waiting_head_back(s1, s2):
    # i12 finishes as a new job reaches it through i22; the i11 job must not cross
    spec = crossing(s1, s2, feed={"i22": arrivals(10, F(1, 2))})
    state = init_sim(spec, InitialCondition(queued={"i11": 1}, in_service=(("i12", F(1, 2)),)))
    run_until(state, F(1, 2))
    assert state.occupancy("i12") == 1
    assert state.occupancy("i21") == 0
    assert len(state.queue("i11")) == 1
    assert state.servers[s1].job.current_class == "i12"

    trace = run_until(state, F(1))
    assert state.occupancy("i12") == 0
    assert state.occupancy("i21") == 1
    starts = [(e.time, e.class_id) for e in trace.events if e.kind == EventKind.SERVICE_START]
    assert (F(1), "i21") in starts


@pytest.mark.parametrize("s1, s2", [("S1", "S2"), ("Y", "X")])
def test_mirrored_tie_lets_new_arrival_cross(s1, s2):
    spec = crossing(s1, s2, feed={"i11": arrivals(10, F(1, 2))})
    state = init_sim(spec, InitialCondition(queued={"i22": 1}, in_service=(("i21", F(1, 2)),)))
    run_until(state, F(1, 2))
    assert state.occupancy("i21") == 1
    assert state.occupancy("i12") == 0
    assert len(state.queue("i22")) == 1


def test_finite_buffer_drops_overflow():
    spec = make_network(
        make_class("h", "S", "10", priority=1),
        make_class("b", "S", "1", capacity=1, priority=2, arrival=arrivals(1, F(1, 2))),
    )
    state = init_sim(spec, InitialCondition(in_service=(("h", F(10)),)))
    run_until(state, F(3))
    assert len(state.queue("b")) == 1
    assert state.counters["b"].dropped == 2


def test_runs_are_replay_identical(compiled_incrementer):
    cn = compiled_incrementer
    first = run_until(init_sim(cn.spec, cn.init), F(31))
    second = run_until(init_sim(cn.spec, cn.init), F(31))
    assert first.events == second.events
    assert first.end_time == 31


def test_workload_follows_remaining_route():
    spec = build_rs_network(0).spec
    queued = init_sim(spec, InitialCondition(queued={"122": 1}))
    assert workload(queued, {"112", "121"}) == F(1, 2)
    assert workload(queued, {"121"}) == 0
    serving = init_sim(spec, InitialCondition(in_service=(("112", F(3, 10)),)))
    assert workload(serving, {"112"}) == F(3, 10)
    assert workload(init_sim(spec), {"112", "121"}) == 0


def test_queue_snapshot_counts_busy_slots(compiled_incrementer):
    cn = compiled_incrementer
    snap = queue_snapshot(init_sim(cn.spec, cn.init))
    assert snap.total == 1
    assert snap.busy["S02"]
    assert snap.occupancy["02.1"] == 1
    assert snap.lengths["02.1"] == 0


def test_observer_sees_probe_times_without_events():
    spec = make_network(make_class("a", "S", "1"))
    seen = []
    run_until(init_sim(spec), F(2), observers=[lambda pre, post, ev: seen.append(post.clock)], probe_times=[F(1, 2), F(3, 2)])
    assert seen == [0, F(1, 2), F(3, 2)]


def test_job_limit_trips():
    spec = make_network(make_class("a", "S", "1", arrival=arrivals(F(1, 2))))
    with pytest.raises(JobLimitExceeded) as info:
        run_until(init_sim(spec), F(50), job_limit=5)
    assert info.value.limit == 5
    assert info.value.exit_code == 5


class SimulatorStateMachine(RuleBasedStateMachine):
    """Steps random acyclic networks and checks the ledger after every move"""

    @initialize(spec=networks())
    def build(self, spec):
        self.state = init_sim(spec)
        self.clock = self.state.clock

    @rule()
    def take_step(self):
        in_service = {sid: srv.job for sid, srv in self.state.servers.items() if srv.busy}
        self.state, events = step(self.state)
        completed = {e.job_id for e in events if e.kind == EventKind.SERVICE_COMPLETE}
        for sid, job in in_service.items():
            assert self.state.servers[sid].job == job or job.job_id in completed
        assert all(e.time == self.state.clock for e in events)

    @rule(fraction=st.sampled_from([F(1, 4), F(1, 2), F(3, 4)]))
    def advance_partway(self, fraction):
        nxt = next_event_time(self.state)
        if nxt is None or nxt == self.state.clock:
            return
        advance_to(self.state, self.state.clock + (nxt - self.state.clock) * fraction)

    @invariant()
    def clock_is_monotone(self):
        assert self.state.clock >= self.clock
        self.clock = self.state.clock

    @invariant()
    def buffers_respect_capacity(self):
        for c in self.state.spec.classes:
            if c.capacity is not None:
                assert len(self.state.queue(c.class_id)) <= c.capacity

    @invariant()
    def idle_servers_have_empty_queues(self):
        if self.state.instant_pending:
            return
        for sid, classes in self.state.spec.servers.items():
            srv = self.state.servers[sid]
            assert srv.occupied == srv.busy
            if not srv.occupied:
                assert all(not self.state.queue(cid) for cid in classes)

    @invariant()
    def ledger_balances(self):
        for cid, n in self.state.counters.items():
            assert n.arrived == n.admitted + n.dropped
            assert self.state.occupancy(cid) == n.admitted - n.completed
            assert n.departed <= n.completed

    @invariant()
    def totals_agree(self):
        assert total_jobs(self.state) <= self.state.live_jobs()


def test_simulator_state_machine():
    run_state_machine_as_test(
        SimulatorStateMachine,
        settings=settings(max_examples=40, stateful_step_count=30, deadline=None),
    )
