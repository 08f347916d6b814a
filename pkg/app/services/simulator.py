"""Event-driven execution of a network under the nonpreemptive static buffer
priority policy with exact rational time.

An instant is resolved in phases: due completions fire, due external arrivals
are released, then deliveries settle tier by tier until the state is quiescent:

  1. deliveries into buffered classes enqueue (or drop when full);
  2. an idle server whose best nonempty queue holds a zero-service job passes
     it on, unless another job moving this instant would reach a class of
     higher precedence on that server; one head moves per round;
  3. zero-capacity, zero-service deliveries are admitted iff their server could
     begin them now, and pass straight through;
  4. zero-capacity deliveries with positive service compete per server; the
     best admissible one starts service, the rest are dropped;
  5. idle servers start the head of their best nonempty queue.

Tiers 1-3 repeat until no delivery is pending. Heads that wait only on each
other are released servers-idle-before-the-instant first, then by class id, so
the result does not depend on how servers are named or visited.
"""

import heapq
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Callable, Deque, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from ..errors import JobLimitExceeded, NonterminationError, OvershootError
from .network import ZERO, InitialCondition, NetworkSpec, validate_initial

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    EXTERNAL_ARRIVAL = "EXTERNAL_ARRIVAL"
    ROUTED_ARRIVAL = "ROUTED_ARRIVAL"
    ADMIT = "ADMIT"
    DROP = "DROP"
    SERVICE_START = "SERVICE_START"
    SERVICE_COMPLETE = "SERVICE_COMPLETE"
    DEPART = "DEPART"


@dataclass(frozen=True)
class Job:
    job_id: int
    origin: str
    current_class: str


@dataclass
class ServerState:
    job: Optional[Job] = None
    remaining: Fraction = ZERO
    started_at: Optional[Fraction] = None

    @property
    def busy(self) -> bool:
        return self.job is not None and self.remaining > 0

    @property
    def occupied(self) -> bool:
        return self.job is not None

    def copy(self) -> "ServerState":
        return ServerState(self.job, self.remaining, self.started_at)


@dataclass(frozen=True)
class EventRecord:
    time: Fraction
    seq: int
    kind: EventKind
    class_id: str
    server_id: str
    job_id: int


@dataclass
class ClassCounters:
    arrived: int = 0
    admitted: int = 0
    dropped: int = 0
    completed: int = 0
    departed: int = 0


@dataclass
class SimState:
    spec: NetworkSpec
    clock: Fraction
    queues: Dict[str, Deque[Job]]
    servers: Dict[str, ServerState]
    arrival_cursors: Dict[str, int]
    counters: Dict[str, ClassCounters]
    next_job_id: int = 0
    next_seq: int = 0
    instant_pending: bool = False
    arrival_heap: List[Tuple[Fraction, str]] = field(default_factory=list)

    def queue(self, class_id: str) -> Sequence[Job]:
        return self.queues.get(class_id, ())

    def occupancy(self, class_id: str) -> int:
        """Jobs in the class: waiting plus the one in service, if any"""
        count = len(self.queue(class_id))
        srv = self.servers[self.spec.by_id[class_id].server_id]
        if srv.job is not None and srv.job.current_class == class_id:
            count += 1
        return count

    def jobs(self) -> Iterable[Tuple[Job, Optional[Fraction]]]:
        """Every live job with its remaining service if in service, else None"""
        for q in self.queues.values():
            for job in q:
                yield job, None
        for srv in self.servers.values():
            if srv.job is not None:
                yield srv.job, srv.remaining

    def live_jobs(self) -> int:
        return sum(len(q) for q in self.queues.values()) + sum(1 for s in self.servers.values() if s.job is not None)

    def snapshot(self) -> "SimState":
        """Copy of the queues and servers at this moment; ledgers and arrival
        cursors are not carried over."""
        return SimState(
            spec=self.spec,
            clock=self.clock,
            queues={cid: deque(q) for cid, q in self.queues.items() if q},
            servers={sid: srv.copy() for sid, srv in self.servers.items()},
            arrival_cursors={},
            counters={},
            next_job_id=self.next_job_id,
            next_seq=self.next_seq,
        )


@dataclass
class QueueSnapshot:
    time: Fraction
    lengths: Dict[str, int]
    occupancy: Dict[str, int]
    busy: Dict[str, bool]
    total: int


@dataclass
class Trace:
    events: List[EventRecord] = field(default_factory=list)
    instants: int = 0
    end_time: Fraction = ZERO


Observer = Callable[[SimState, SimState, List[EventRecord]], None]


def init_sim(spec: NetworkSpec, init: Optional[InitialCondition] = None) -> SimState:
    init = validate_initial(spec, init or InitialCondition())
    state = SimState(
        spec=spec,
        clock=ZERO,
        queues={cid: deque() for cid in spec.by_id},
        servers={sid: ServerState() for sid in spec.server_ids},
        arrival_cursors={},
        counters={cid: ClassCounters() for cid in spec.by_id},
        instant_pending=True,
    )
    for cid in sorted(init.queued):
        for _ in range(init.queued[cid]):
            state.queues[cid].append(_new_job(state, "initial", cid))
            state.counters[cid].admitted += 1
    for cid, remaining in init.in_service:
        c = spec.by_id[cid]
        srv = state.servers[c.server_id]
        srv.job = _new_job(state, "initial", cid)
        srv.remaining = remaining
        srv.started_at = remaining - c.service_time
        state.counters[cid].admitted += 1
    for c in spec.classes:
        first = c.arrival.first_index if c.arrival is not None else None
        if first is None:
            continue
        state.arrival_cursors[c.class_id] = first
        heapq.heappush(state.arrival_heap, (c.arrival.time_of(first), c.class_id))
    logger.debug(f"Initialized simulation of {spec.name} with {init.job_count} initial jobs")
    return state


def _new_job(state: SimState, origin: str, class_id: str) -> Job:
    job = Job(state.next_job_id, origin, class_id)
    state.next_job_id += 1
    return job


def next_event_time(state: SimState) -> Optional[Fraction]:
    if state.instant_pending:
        return state.clock
    candidates = []
    if state.arrival_heap:
        candidates.append(state.arrival_heap[0][0])
    for srv in state.servers.values():
        if srv.job is not None:
            candidates.append(state.clock + srv.remaining)
    return min(candidates) if candidates else None


def advance_to(state: SimState, t: Fraction) -> SimState:
    if t < state.clock:
        raise OvershootError(f"cannot move the clock back from {state.clock} to {t}")
    if t == state.clock:
        return state
    nxt = next_event_time(state)
    if nxt is not None and t > nxt:
        raise OvershootError(f"advance to {t} passes the next event at {nxt}")
    elapsed = t - state.clock
    for srv in state.servers.values():
        if srv.job is not None:
            srv.remaining -= elapsed
    state.clock = t
    return state


@dataclass
class _Delivery:
    job: Job
    kind: EventKind
    gen: int


class _InstantResolver:
    def __init__(self, state: SimState):
        self.state = state
        self.spec = state.spec
        self.events: List[EventRecord] = []
        self.pending: List[_Delivery] = []
        self.freed: Set[str] = set()
        self._gen = 0
        self._processed = 0
        self._limit = 0

    # ledger

    def emit(self, kind: EventKind, class_id: str, job_id: int) -> None:
        state = self.state
        server_id = self.spec.by_id[class_id].server_id
        self.events.append(EventRecord(state.clock, state.next_seq, kind, class_id, server_id, job_id))
        state.next_seq += 1

    # phases

    def complete_due(self) -> None:
        for sid in self.spec.server_ids:
            srv = self.state.servers[sid]
            if srv.job is not None and srv.remaining == 0:
                job = srv.job
                srv.job, srv.remaining, srv.started_at = None, ZERO, None
                self.freed.add(sid)
                self.state.counters[job.current_class].completed += 1
                self.emit(EventKind.SERVICE_COMPLETE, job.current_class, job.job_id)
                self.route(job)

    def release_arrivals(self) -> int:
        state = self.state
        released = 0
        while state.arrival_heap and state.arrival_heap[0][0] == state.clock:
            _, cid = heapq.heappop(state.arrival_heap)
            self.push(_new_job(state, cid, cid), EventKind.EXTERNAL_ARRIVAL)
            n = state.arrival_cursors[cid] + 1
            state.arrival_cursors[cid] = n
            heapq.heappush(state.arrival_heap, (self.spec.by_id[cid].arrival.time_of(n), cid))
            released += 1
        return released

    def route(self, job: Job) -> None:
        nxt = self.spec.by_id[job.current_class].next_class
        if nxt is None:
            self.state.counters[job.current_class].departed += 1
            self.emit(EventKind.DEPART, job.current_class, job.job_id)
        else:
            self.push(replace(job, current_class=nxt), EventKind.ROUTED_ARRIVAL)

    def push(self, job: Job, kind: EventKind) -> None:
        self.pending.append(_Delivery(job, kind, self._gen))
        self._gen += 1

    def settle(self) -> None:
        # every job present or pending is delivered to, and passed through, each class at most once
        self._limit = 2 * (self.state.live_jobs() + len(self.pending) + 1) * max(1, len(self.spec.classes))
        while True:
            self.deliver_buffered()
            if self.pass_zero_service_heads():
                continue
            if self.admit_instantaneous():
                continue
            break
        self.admit_blocking()
        self.start_heads()

    # helpers

    def _key(self, d: _Delivery):
        c = self.spec.by_id[d.job.current_class]
        return (c.server_id, c.priority, c.class_id, d.gen)

    def _take(self, predicate) -> List[_Delivery]:
        taken = [d for d in self.pending if predicate(self.spec.by_id[d.job.current_class])]
        if taken:
            self.pending = [d for d in self.pending if not predicate(self.spec.by_id[d.job.current_class])]
            taken.sort(key=self._key)
        return taken

    def _count(self) -> None:
        self._processed += 1
        if self._processed > self._limit:
            raise NonterminationError(f"instant {self.state.clock} exceeded {self._limit} deliveries")

    def _arrive(self, d: _Delivery) -> str:
        cid = d.job.current_class
        self._count()
        self.state.counters[cid].arrived += 1
        self.emit(d.kind, cid, d.job.job_id)
        return cid

    def _drop(self, d: _Delivery) -> None:
        self.state.counters[d.job.current_class].dropped += 1
        self.emit(EventKind.DROP, d.job.current_class, d.job.job_id)

    def _best_waiting(self, server_id: str) -> Optional[str]:
        for cid in self.spec.servers[server_id]:
            if self.state.queues[cid]:
                return cid
        return None

    def _blocked(self, server_id: str, precedence) -> bool:
        """True if the server cannot begin a job of the given precedence right now"""
        if self.state.servers[server_id].occupied:
            return True
        best = self._best_waiting(server_id)
        if best is not None and self.spec.by_id[best].precedence < precedence:
            return True
        for d in self.pending:
            c = self.spec.by_id[d.job.current_class]
            if c.server_id == server_id and c.zero_capacity and c.precedence < precedence:
                return True
        return False

    def _serve_instantly(self, job: Job) -> None:
        cid = job.current_class
        self.emit(EventKind.SERVICE_START, cid, job.job_id)
        self.state.counters[cid].completed += 1
        self.emit(EventKind.SERVICE_COMPLETE, cid, job.job_id)
        self.route(job)

    def _start(self, server_id: str, job: Job) -> None:
        srv = self.state.servers[server_id]
        srv.job = job
        srv.remaining = self.spec.by_id[job.current_class].service_time
        srv.started_at = self.state.clock
        self.emit(EventKind.SERVICE_START, job.current_class, job.job_id)

    # tiers

    def deliver_buffered(self) -> None:
        for d in self._take(lambda c: not c.zero_capacity):
            cid = self._arrive(d)
            c = self.spec.by_id[cid]
            q = self.state.queues[cid]
            if c.capacity is not None and len(q) >= c.capacity:
                self._drop(d)
                continue
            q.append(d.job)
            self.state.counters[cid].admitted += 1
            self.emit(EventKind.ADMIT, cid, d.job.job_id)

    def pass_zero_service_heads(self) -> bool:
        """Pass on one zero-service head, then let the caller settle again.

        A head waits while another job able to move this instant would reach a
        class of higher precedence on its server. When heads only wait on each
        other, servers that were idle before the instant go first.
        """
        heads = self._passable_heads()
        if not heads:
            return False
        arrivals = [d.job.current_class for d in self.pending if self._admissible_instantly(d)]
        movers = [cid for _, cid in heads] + arrivals
        clear = [(sid, cid) for sid, cid in heads if not self._overtaken(sid, cid, movers)]
        if not clear:
            if arrivals:
                return False
            clear = [h for h in heads if h[0] not in self.freed] or heads
        _, cid = min(clear, key=lambda h: h[1])
        self._count()
        self._serve_instantly(self.state.queues[cid].popleft())
        return True

    def _passable_heads(self) -> List[Tuple[str, str]]:
        heads = []
        for sid in self.spec.server_ids:
            if self.state.servers[sid].occupied:
                continue
            best = self._best_waiting(sid)
            if best is None or self.spec.by_id[best].service_time > 0:
                continue
            if not self._contender_ahead(sid, self.spec.by_id[best].precedence):
                heads.append((sid, best))
        return heads

    def _admissible_instantly(self, d: _Delivery) -> bool:
        c = self.spec.by_id[d.job.current_class]
        return c.zero_capacity and c.service_time == 0 and not self._blocked(c.server_id, c.precedence)

    def _overtaken(self, server_id: str, class_id: str, movers: Sequence[str]) -> bool:
        precedence = self.spec.by_id[class_id].precedence
        for other in movers:
            if other == class_id:
                continue
            for target in self.spec.instant_reach[other]:
                t = self.spec.by_id[target]
                if t.server_id == server_id and t.precedence < precedence:
                    return True
        return False

    def _contender_ahead(self, server_id: str, precedence) -> bool:
        for d in self.pending:
            c = self.spec.by_id[d.job.current_class]
            if c.server_id == server_id and c.zero_capacity and c.precedence < precedence:
                return True
        return False

    def admit_instantaneous(self) -> bool:
        batch = self._take(lambda c: c.zero_capacity and c.service_time == 0)
        for d in batch:
            cid = self._arrive(d)
            c = self.spec.by_id[cid]
            if self._blocked(c.server_id, c.precedence):
                self._drop(d)
                continue
            self.state.counters[cid].admitted += 1
            self.emit(EventKind.ADMIT, cid, d.job.job_id)
            self._serve_instantly(d.job)
        return bool(batch)

    def admit_blocking(self) -> None:
        batch = self._take(lambda c: c.zero_capacity)
        winners: Dict[str, _Delivery] = {}
        for d in batch:
            c = self.spec.by_id[d.job.current_class]
            if c.server_id in winners:
                continue
            best = self._best_waiting(c.server_id)
            server_free = not self.state.servers[c.server_id].occupied
            if server_free and (best is None or self.spec.by_id[best].precedence > c.precedence):
                winners[c.server_id] = d
        for d in batch:
            cid = self._arrive(d)
            c = self.spec.by_id[cid]
            if winners.get(c.server_id) is d:
                self.state.counters[cid].admitted += 1
                self.emit(EventKind.ADMIT, cid, d.job.job_id)
                self._start(c.server_id, d.job)
            else:
                self._drop(d)

    def start_heads(self) -> None:
        for sid in self.spec.server_ids:
            if self.state.servers[sid].occupied:
                continue
            best = self._best_waiting(sid)
            if best is not None:
                self._start(sid, self.state.queues[best].popleft())


def resolve_instant(state: SimState) -> Tuple[SimState, List[EventRecord]]:
    resolver = _InstantResolver(state)
    resolver.complete_due()
    resolver.release_arrivals()
    resolver.settle()
    state.instant_pending = False
    if resolver.events:
        logger.debug(f"t={state.clock}: {len(resolver.events)} events")
    return state, resolver.events


def step(state: SimState) -> Tuple[SimState, List[EventRecord]]:
    t = next_event_time(state)
    if t is None:
        return state, []
    advance_to(state, t)
    return resolve_instant(state)


def run_until(
    state: SimState,
    horizon: Fraction,
    observers: Sequence[Observer] = (),
    probe_times: Iterable[Fraction] = (),
    job_limit: Optional[int] = None,
    keep_events: bool = True,
) -> Trace:
    """Run every instant up to and including `horizon`.

    Observers are called with (pre-instant snapshot, post-instant state, events)
    at every event instant and at every probe time, in time order.
    """
    horizon = Fraction(horizon)
    trace = Trace(end_time=state.clock)
    probes = sorted({Fraction(p) for p in probe_times if state.clock <= p <= horizon})
    probe_index = 0
    while True:
        t_event = next_event_time(state)
        while probe_index < len(probes) and probes[probe_index] < state.clock:
            probe_index += 1
        t_probe = probes[probe_index] if probe_index < len(probes) else None
        candidates = [t for t in (t_event, t_probe) if t is not None and t <= horizon]
        if not candidates:
            break
        t = min(candidates)
        advance_to(state, t)
        pre = state.snapshot() if observers else state
        _, events = resolve_instant(state)
        if probe_index < len(probes) and probes[probe_index] == t:
            probe_index += 1
        trace.instants += 1
        if keep_events:
            trace.events.extend(events)
        for observer in observers:
            observer(pre, state, events)
        if job_limit is not None:
            live = state.live_jobs()
            if live > job_limit:
                logger.warning(f"Job limit tripped at t={state.clock}: {live} > {job_limit}")
                raise JobLimitExceeded(live, job_limit, state.clock)
    nxt = next_event_time(state)
    if horizon > state.clock and (nxt is None or nxt > horizon):
        advance_to(state, horizon)
    trace.end_time = state.clock
    return trace


def workload(state: SimState, classes: Iterable[str]) -> Fraction:
    """Service still owed, over the classes in `classes`, by every job present,
    following each job's remaining route."""
    spec = state.spec
    targets = frozenset(classes)
    tail = _tail_work(spec, targets)
    total = ZERO
    for cid, q in state.queues.items():
        if q:
            own = spec.by_id[cid].service_time if cid in targets else ZERO
            total += len(q) * (own + tail[cid])
    for srv in state.servers.values():
        if srv.job is not None:
            cid = srv.job.current_class
            total += (srv.remaining if cid in targets else ZERO) + tail[cid]
    return total


def _tail_work(spec: NetworkSpec, targets: FrozenSet[str]) -> Dict[str, Fraction]:
    cache = spec.__dict__.setdefault("_tail_work_cache", {})
    if targets not in cache:
        cache[targets] = {
            cid: sum((spec.by_id[c].service_time for c in tail if c in targets), ZERO)
            for cid, tail in spec.route_tails.items()
        }
    return cache[targets]


def queue_snapshot(state: SimState) -> QueueSnapshot:
    lengths = {cid: len(state.queue(cid)) for cid in state.spec.by_id}
    occupancy = dict(lengths)
    busy = {}
    for sid, srv in state.servers.items():
        busy[sid] = srv.busy
        if srv.job is not None:
            occupancy[srv.job.current_class] += 1
    total = sum(lengths.values()) + sum(1 for b in busy.values() if b)
    return QueueSnapshot(state.clock, lengths, occupancy, busy, total)


def total_jobs(state: SimState) -> int:
    """Waiting jobs plus busy service slots, the count used for stability"""
    return sum(len(q) for q in state.queues.values()) + sum(1 for s in state.servers.values() if s.busy)
