"""Cycle-by-cycle checks of a compiled network against its counter machine.

Every three time units the network encodes one machine configuration: the
state in the single job the state network holds, each counter in twice the
remaining workload of its crossing subnetwork. The harness decodes those
values at every 3t + 1, compares them with the machine's own run, and checks
the per-cycle properties the encoding relies on.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Tuple

from .compiler import CompiledNetwork, build_rs_network, compile_scm, relabel_servers
from .counter_machine import SCM, Config, scm_run
from .network import NetworkSpec, load_factors, reachable_into
from .simulator import EventKind, EventRecord, SimState, init_sim, run_until, total_jobs, workload

logger = logging.getLogger(__name__)

CYCLE = 3


@dataclass(frozen=True)
class Violation:
    check: str
    cycle: int
    time: Fraction
    detail: str


@dataclass(frozen=True)
class StatusReport:
    t: int
    status_mn: int
    status_sn1: int
    status_sn2: int
    expected: Config
    expected_index: int

    @property
    def match(self) -> bool:
        return (self.status_mn, self.status_sn1, self.status_sn2) == (
            self.expected_index,
            self.expected.z1,
            self.expected.z2,
        )


@dataclass
class VerifyReport:
    cycles: int
    normalized: bool
    statuses: List[StatusReport]
    violations: List[Violation]
    max_total_jobs: int
    left_limit_totals: List[int]
    cycle_peaks: List[int]

    @property
    def first_mismatch(self) -> Optional[int]:
        return next((s.t for s in self.statuses if not s.match), None)

    @property
    def ok(self) -> bool:
        return self.first_mismatch is None and not self.violations


@dataclass(frozen=True)
class BoundednessRecord:
    max_counter: int
    bound: int
    left_limit_max: int
    within_bound: bool
    excess: int
    growth: bool


@dataclass(frozen=True)
class LoadAudit:
    load: Fraction
    ok: bool


@dataclass
class PeriodicityResult:
    m: int
    horizon: Fraction
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def cycle_of(time: Fraction) -> int:
    """Cycle t covers [3t + 1, 3t + 4); earlier instants count as cycle 0"""
    return max(0, int((time - 1) // CYCLE))


def status_mn(cn: CompiledNetwork, post: SimState, t: int) -> int:
    """Index j of the state class 02j whose job started service at 3t and is
    the only job in the state network at 3t + 1; -1 otherwise."""
    mn = cn.mn_classes
    present = [(job, remaining) for job, remaining in post.jobs() if job.current_class in mn]
    if len(present) != 1:
        return -1
    job, remaining = present[0]
    j = cn.state_classes.get(job.current_class)
    if j is None or remaining is None:
        return -1
    server = post.servers[cn.spec.by_id[job.current_class].server_id]
    if server.started_at != CYCLE * t:
        return -1
    return j


def status_sn(
    cn: CompiledNetwork, pre: SimState, post: SimState, i: int, feeders: Optional[FrozenSet[str]] = None
) -> int:
    """Counter i decoded as 2W((3t + 1)^-) over {i12, i21}; -1 if the crossing
    network is not in a clean state or the value is not an integer."""
    i12, i21 = cn.cid(f"SN{i}.i12"), cn.cid(f"SN{i}.i21")
    if post.occupancy(i12) * post.occupancy(i21) != 0:
        return -1
    rs = cn.rs_classes(i)
    sn = cn.sn_classes(i)
    if feeders is None:
        feeders = reachable_into(cn.spec, rs)
    for job, _ in post.jobs():
        cid = job.current_class
        if cid in sn and cid not in rs and cid not in feeders:
            return -1
    doubled = 2 * workload(pre, cn.workload_classes(i))
    if doubled.denominator != 1:
        return -1
    return int(doubled)


class CycleObserver:
    """Run observer that decodes statuses at every 3t + 1 and records the
    per-instant and per-cycle properties of the encoding."""

    def __init__(self, cn: CompiledNetwork, cycles: int):
        self.cn = cn
        self.cycles = cycles
        self.subnets = tuple(i for i in (1, 2) if f"SN{i}.i12" in cn.directory)
        self.has_state_network = cn.m > 0
        self.workload_sets = {i: cn.workload_classes(i) for i in self.subnets}
        self.feeders = {i: reachable_into(cn.spec, cn.rs_classes(i)) for i in self.subnets}
        self.update_classes = cn.counter_update_classes if self.has_state_network else frozenset()
        self.increments = {i: cn.increment_classes(i) for i in self.subnets}
        self.decrements = {i: cn.decrement_classes(i) for i in self.subnets}
        self.dispatch = cn.dispatch_servers if self.has_state_network else ()

        self.statuses: Dict[int, Tuple[int, int, int]] = {}
        self.left_limit_totals: Dict[int, int] = {}
        self.cycle_peaks: Dict[int, int] = defaultdict(int)
        self.update_admits: Dict[int, List[Tuple[Fraction, str]]] = defaultdict(list)
        self.violations: List[Violation] = []
        self.max_total = 0
        self._previous: Optional[Tuple[Fraction, Dict[int, Fraction], Dict[int, int]]] = None

    def probe_times(self) -> List[Fraction]:
        times = [Fraction(CYCLE * t + 1) for t in range(self.cycles + 1)]
        times += [Fraction(CYCLE * t + 3) for t in range(self.cycles)]
        return sorted(times)

    def violation(self, check: str, time: Fraction, detail: str) -> None:
        v = Violation(check, cycle_of(time), time, detail)
        logger.warning(f"{check} violated at t={time}: {detail}")
        self.violations.append(v)

    def __call__(self, pre: SimState, post: SimState, events: List[EventRecord]) -> None:
        now = post.clock
        cycle = cycle_of(now)
        self._check_drain(pre, post)
        self._check_virtual_station(post)

        total = max(total_jobs(pre), total_jobs(post))
        self.cycle_peaks[cycle] = max(self.cycle_peaks[cycle], total)
        self.max_total = max(self.max_total, total)

        start = CYCLE * cycle + 1
        for e in events:
            if e.kind == EventKind.SERVICE_COMPLETE and start <= now < start + 2:
                if any(e.class_id in v for v in self.workload_sets.values()) and (2 * now).denominator != 1:
                    self.violation("half_unit_completions", now, f"{e.class_id} completed off the half-unit grid")
            elif e.kind == EventKind.ADMIT and e.class_id in self.update_classes:
                self.update_admits[cycle].append((now, e.class_id))
                if start < now < start + 2:
                    self.violation("counter_update_window", now, f"{e.class_id} admitted before dispatch")

        if now.denominator == 1 and now % CYCLE == 1:
            t = (int(now) - 1) // CYCLE
            self.left_limit_totals[t] = total_jobs(pre)
            if self.has_state_network:
                sn = [status_sn(self.cn, pre, post, i, self.feeders[i]) for i in (1, 2)]
                self.statuses[t] = (status_mn(self.cn, post, t), sn[0], sn[1])

        if self.has_state_network and now > 0 and now.denominator == 1 and now % CYCLE == 0:
            idle = [sid for sid in self.dispatch if not pre.servers[sid].busy]
            if len(idle) != 1:
                self.violation("single_idle_dispatch", now, f"idle dispatch servers {idle}")

    def _check_virtual_station(self, post: SimState) -> None:
        for i in self.subnets:
            i12, i21 = self.cn.cid(f"SN{i}.i12"), self.cn.cid(f"SN{i}.i21")
            if post.occupancy(i12) * post.occupancy(i21) != 0:
                self.violation("virtual_station_exclusive", post.clock, f"SN{i} has jobs in both {i12} and {i21}")

    def _check_drain(self, pre: SimState, post: SimState) -> None:
        now = post.clock
        if self._previous is not None:
            before, work, busy = self._previous
            elapsed = now - before
            for i in self.subnets:
                expected = work[i] - elapsed * busy[i]
                actual = workload(pre, self.workload_sets[i])
                if actual != expected:
                    self.violation("workload_drain", now, f"SN{i} workload {actual}, expected {expected}")
        work = {i: workload(post, self.workload_sets[i]) for i in self.subnets}
        busy = {
            i: sum(1 for s in post.servers.values() if s.busy and s.job.current_class in self.workload_sets[i])
            for i in self.subnets
        }
        self._previous = (now, work, busy)

    def finish(self) -> List[Violation]:
        if not self.has_state_network:
            return self.violations
        for t in range(self.cycles):
            admits = self.update_admits.get(t, [])
            dispatch_time = CYCLE * t + 3
            if len(admits) > 1:
                self.violation("single_counter_update", Fraction(dispatch_time), f"{len(admits)} counter updates in cycle {t}")
            for when, cid in admits:
                if when != dispatch_time:
                    self.violation("single_counter_update", when, f"{cid} admitted away from 3t+3")
            if t + 1 not in self.statuses or t not in self.statuses:
                continue
            for i in (1, 2):
                before, after = self.statuses[t][i], self.statuses[t + 1][i]
                when = Fraction(CYCLE * (t + 1) + 1)
                if before < 0 or after < 0:
                    self.violation("status_step", when, f"SN{i} status undecodable ({before} -> {after})")
                    continue
                fired = sum(1 for _, c in admits if c in self.increments[i]) - sum(
                    1 for _, c in admits if c in self.decrements[i]
                )
                delta = after - before
                if delta not in (-1, 0, 1) or delta != fired:
                    self.violation("status_step", when, f"SN{i} moved by {delta}, counter updates say {fired}")
        return self.violations


def _observe(cn: CompiledNetwork, cycles: int, job_limit: Optional[int] = None) -> CycleObserver:
    if cycles < 1:
        raise ValueError("cycles must be at least 1")
    observer = CycleObserver(cn, cycles)
    state = init_sim(cn.spec, cn.init)
    run_until(
        state,
        Fraction(CYCLE * cycles + 1),
        observers=[observer],
        probe_times=observer.probe_times(),
        job_limit=job_limit,
        keep_events=False,
    )
    observer.finish()
    return observer


def run_verification(cn: CompiledNetwork, scm: SCM, cycles: int, job_limit: Optional[int] = None) -> VerifyReport:
    # the oracle runs first so a machine that underflows fails before any simulation
    oracle = scm_run(scm, None, cycles)
    observer = _observe(cn, cycles, job_limit)
    index = cn.scm_state_index or {s: scm.index(s) for s in scm.states}
    statuses = []
    for t in range(cycles + 1):
        mn, sn1, sn2 = observer.statuses.get(t, (-1, -1, -1))
        expected = oracle.trajectory[t]
        report = StatusReport(t, mn, sn1, sn2, expected, index[expected.state])
        if not report.match:
            logger.warning(
                f"Cycle {t}: network reads ({mn}, {sn1}, {sn2}), "
                f"machine is ({report.expected_index}, {expected.z1}, {expected.z2})"
            )
        statuses.append(report)
    return VerifyReport(
        cycles=cycles,
        normalized=cn.normalized,
        statuses=statuses,
        violations=list(observer.violations),
        max_total_jobs=observer.max_total,
        left_limit_totals=[observer.left_limit_totals.get(t, 0) for t in range(cycles + 1)],
        cycle_peaks=[observer.cycle_peaks.get(t, 0) for t in range(cycles + 1)],
    )


def verify_lockstep(
    scm: SCM,
    cycles: int,
    normalized: bool = False,
    server_map: Optional[Dict[str, str]] = None,
    job_limit: Optional[int] = None,
) -> VerifyReport:
    """Compile the machine, run it for `cycles` cycles and compare the decoded
    statuses at every 3t + 1 with the machine's own trajectory."""
    scm.validate()
    cn = compile_scm(scm, normalized=normalized)
    if server_map:
        cn = relabel_servers(cn, server_map)
    return run_verification(cn, scm, cycles, job_limit)


def check_invariants(cn: CompiledNetwork, cycles: int) -> List[Violation]:
    return _observe(cn, cycles).violations


def verify_boundedness(scm: SCM, cycles: int, report: VerifyReport) -> BoundednessRecord:
    """Compare job counts with the counters: at most 2M + 1 jobs at every
    (3t + 1)^-, and within each cycle at most the encoded counters plus a
    constant (the measured `excess`)."""
    trajectory = scm_run(scm, None, cycles).trajectory
    peak = max(max(c.z1, c.z2) for c in trajectory)
    bound = 2 * peak + 1
    totals = report.left_limit_totals
    excess = 0
    for t, jobs in enumerate(report.cycle_peaks):
        here = trajectory[min(t, len(trajectory) - 1)]
        there = trajectory[min(t + 1, len(trajectory) - 1)]
        encoded = max(here.z1, there.z1) + max(here.z2, there.z2)
        excess = max(excess, jobs - encoded)
    half = len(totals) // 2
    growth = bool(totals[half:]) and bool(totals[:half]) and max(totals[half:]) > max(totals[:half])
    if growth:
        logger.warning(f"Job count at cycle starts keeps growing: {totals[0]} -> {totals[-1]}")
    return BoundednessRecord(
        max_counter=peak,
        bound=bound,
        left_limit_max=max(totals),
        within_bound=all(n <= bound for n in totals),
        excess=excess,
        growth=growth,
    )


def rs_periodicity(m: int, horizon: Optional[Fraction] = None) -> PeriodicityResult:
    """Simulate the standalone crossing network from m jobs in i21.

    With m >= 1 the total is m at every integer instant, and the whole
    population swaps sides at m, then every m - 1/2: into i12 on odd swaps,
    into i21 on even ones. With m = 0 the network is empty just before
    every integer instant.
    """
    horizon = Fraction(horizon) if horizon is not None else Fraction(max(10, 20 * m))
    cn = build_rs_network(m)
    i12, i21 = cn.cid("SN1.i12"), cn.cid("SN1.i21")
    rs = sorted(cn.rs_classes(1))
    result = PeriodicityResult(m, horizon)

    swaps: Dict[Fraction, int] = {}
    if m >= 1:
        when, k = Fraction(m), 1
        while when <= horizon:
            swaps[when] = k
            when += m - Fraction(1, 2)
            k += 1

    def observe(pre: SimState, post: SimState, events: List[EventRecord]) -> None:
        now = post.clock
        occupancy = {c: post.occupancy(c) for c in rs}
        population = sum(occupancy.values())
        if occupancy[i12] * occupancy[i21] != 0:
            result.failures.append(f"t={now}: both {i12} and {i21} occupied")
        if m >= 1 and now.denominator == 1 and population != m:
            result.failures.append(f"t={now}: population {population} != {m}")
        if now in swaps:
            receiver = i21 if swaps[now] % 2 == 0 else i12
            if occupancy[receiver] != m or population != m:
                result.failures.append(f"t={now}: swap {swaps[now]} left {occupancy}")
        if m == 0 and now >= 1 and now.denominator == 1 and total_jobs(pre) != 0:
            result.failures.append(f"t={now}: {total_jobs(pre)} jobs left before the instant")

    probes = [Fraction(k) for k in range(int(horizon) + 1)] + list(swaps)
    run_until(init_sim(cn.spec, cn.init), horizon, observers=[observe], probe_times=probes, keep_events=False)
    if result.failures:
        logger.warning(f"Crossing network with m={m}: {len(result.failures)} failures")
    return result


def audit_loads(spec: NetworkSpec) -> Dict[str, LoadAudit]:
    return {sid: LoadAudit(load, load < 1) for sid, load in load_factors(spec).items()}
