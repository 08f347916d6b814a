"""Network model: classes, servers, arrival processes, initial conditions,
validation, traffic equations and load factors. All quantities are exact
Fractions; a capacity or arrival period of None means infinite."""

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx

from ..errors import ErrorCode, InitConflictError, NetworkValidationError

logger = logging.getLogger(__name__)

ZERO = Fraction(0)


@dataclass(frozen=True)
class ArrivalProcess:
    """Deterministic arrivals at period·n + offset for n ≥ start_index (times ≥ 0 only)"""

    period: Optional[Fraction]
    offset: Fraction = ZERO
    start_index: int = 0

    @property
    def rate(self) -> Fraction:
        return ZERO if self.period is None else 1 / self.period

    @property
    def first_index(self) -> Optional[int]:
        """Smallest generated n whose instant is nonnegative"""
        if self.period is None:
            return None
        earliest = math.ceil(-self.offset / self.period)
        return max(self.start_index, earliest)

    def time_of(self, n: int) -> Fraction:
        return self.period * n + self.offset


@dataclass(frozen=True)
class ClassSpec:
    class_id: str
    server_id: str
    service_time: Fraction
    capacity: Optional[int]
    next_class: Optional[str]
    priority: int
    arrival: Optional[ArrivalProcess] = None

    @property
    def zero_capacity(self) -> bool:
        return self.capacity == 0

    @property
    def external_rate(self) -> Fraction:
        return ZERO if self.arrival is None else self.arrival.rate

    @property
    def precedence(self) -> Tuple[int, str]:
        # smaller is served first
        return (self.priority, self.class_id)


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    classes: Tuple[ClassSpec, ...]

    @cached_property
    def by_id(self) -> Dict[str, ClassSpec]:
        return {c.class_id: c for c in self.classes}

    @cached_property
    def servers(self) -> Dict[str, Tuple[str, ...]]:
        """server_id -> class ids ordered by (priority, class_id)"""
        grouped: Dict[str, List[ClassSpec]] = {}
        for c in self.classes:
            grouped.setdefault(c.server_id, []).append(c)
        return {
            sid: tuple(c.class_id for c in sorted(members, key=lambda c: c.precedence))
            for sid, members in sorted(grouped.items())
        }

    @cached_property
    def server_ids(self) -> Tuple[str, ...]:
        return tuple(self.servers)

    @cached_property
    def route_tails(self) -> Dict[str, Tuple[str, ...]]:
        """class_id -> classes visited after it, in order, until the job exits"""
        tails: Dict[str, Tuple[str, ...]] = {}
        for cid in self.by_id:
            path = []
            nxt = self.by_id[cid].next_class
            while nxt is not None:
                path.append(nxt)
                nxt = self.by_id[nxt].next_class
            tails[cid] = tuple(path)
        return tails

    @cached_property
    def instant_reach(self) -> Dict[str, Tuple[str, ...]]:
        """class_id -> classes a job leaving it can enter within the same instant:
        the zero-service run of its tail and the first class that holds it"""
        reach: Dict[str, Tuple[str, ...]] = {}
        for cid, tail in self.route_tails.items():
            path = []
            for nxt in tail:
                path.append(nxt)
                if self.by_id[nxt].service_time > 0:
                    break
            reach[cid] = tuple(path)
        return reach

    def cls(self, class_id: str) -> ClassSpec:
        return self.by_id[class_id]

    def with_classes(self, classes: Iterable[ClassSpec], name: Optional[str] = None) -> "NetworkSpec":
        return NetworkSpec(name=name or self.name, classes=tuple(classes))


@dataclass(frozen=True)
class InitialCondition:
    queued: Dict[str, int] = field(default_factory=dict)
    in_service: Tuple[Tuple[str, Fraction], ...] = ()

    @property
    def job_count(self) -> int:
        return sum(self.queued.values()) + len(self.in_service)


def routing_graph(spec: NetworkSpec) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(spec.by_id)
    for c in spec.classes:
        if c.next_class is not None:
            graph.add_edge(c.class_id, c.next_class)
    return graph


def validate_network(spec: NetworkSpec) -> NetworkSpec:
    """Return the spec unchanged if it is well-formed, otherwise raise NetworkValidationError"""
    seen = set()
    for c in spec.classes:
        if c.class_id in seen:
            raise NetworkValidationError(ErrorCode.DUPLICATE_CLASS, f"duplicate class id {c.class_id!r}")
        seen.add(c.class_id)
        if c.service_time < 0:
            raise NetworkValidationError(ErrorCode.NEGATIVE_TIME, f"class {c.class_id}: negative service time {c.service_time}")
        if c.priority <= 0:
            raise NetworkValidationError(ErrorCode.BAD_PRIORITY, f"class {c.class_id}: priority must be positive, got {c.priority}")
        if c.capacity is not None and c.capacity < 0:
            raise NetworkValidationError(ErrorCode.BAD_CAPACITY, f"class {c.class_id}: negative capacity {c.capacity}")
        if c.arrival is not None:
            if c.arrival.period is not None and c.arrival.period <= 0:
                raise NetworkValidationError(ErrorCode.NEGATIVE_TIME, f"class {c.class_id}: arrival period must be positive")
            if c.arrival.start_index < 0:
                raise NetworkValidationError(ErrorCode.NEGATIVE_TIME, f"class {c.class_id}: negative start index")

    for c in spec.classes:
        if c.next_class is not None and c.next_class not in seen:
            raise NetworkValidationError(
                ErrorCode.DANGLING_NEXT_CLASS, f"class {c.class_id} routes to unknown class {c.next_class!r}"
            )

    graph = routing_graph(spec)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        path = " -> ".join(u for u, _ in cycle)
        raise NetworkValidationError(ErrorCode.CYCLIC_ROUTING, f"routing cycle {path} -> {cycle[0][0]}")

    return spec


def validate_initial(spec: NetworkSpec, init: InitialCondition) -> InitialCondition:
    for cid, count in init.queued.items():
        if cid not in spec.by_id:
            raise InitConflictError(f"initial queue for unknown class {cid!r}")
        if count < 0:
            raise InitConflictError(f"negative initial queue for {cid}")
        cap = spec.by_id[cid].capacity
        if cap is not None and count > cap:
            raise InitConflictError(f"initial queue {count} exceeds capacity {cap} of {cid}")
    occupied: Dict[str, str] = {}
    for cid, remaining in init.in_service:
        if cid not in spec.by_id:
            raise InitConflictError(f"in-service job for unknown class {cid!r}")
        c = spec.by_id[cid]
        if remaining <= 0 or remaining > c.service_time:
            raise InitConflictError(f"remaining {remaining} outside (0, {c.service_time}] for {cid}")
        if c.server_id in occupied:
            raise InitConflictError(f"server {c.server_id} holds {occupied[c.server_id]} and {cid} in service")
        occupied[c.server_id] = cid
    return init


def solve_traffic(spec: NetworkSpec) -> Dict[str, Fraction]:
    """Effective arrival rate per class: the solution of lam = lambda + R^T lam,
    propagated along the routing DAG in topological order."""
    rates = {c.class_id: c.external_rate for c in spec.classes}
    for cid in nx.topological_sort(routing_graph(spec)):
        nxt = spec.by_id[cid].next_class
        if nxt is not None:
            rates[nxt] += rates[cid]
    return rates


def load_factors(spec: NetworkSpec) -> Dict[str, Fraction]:
    rates = solve_traffic(spec)
    loads = {sid: ZERO for sid in spec.server_ids}
    for c in spec.classes:
        loads[c.server_id] += rates[c.class_id] * c.service_time
    return loads


def count_arrivals(proc: ArrivalProcess, t: Fraction) -> int:
    """Number of arrival instants in [0, t]"""
    if proc.period is None or t < 0:
        return 0
    first = proc.first_index
    last = math.floor((t - proc.offset) / proc.period)
    return max(0, last - first + 1)


def classes_at(spec: NetworkSpec, server_id: str) -> Tuple[ClassSpec, ...]:
    return tuple(spec.by_id[cid] for cid in spec.servers[server_id])


def reachable_into(spec: NetworkSpec, targets: FrozenSet[str]) -> FrozenSet[str]:
    """Classes whose remaining route visits at least one of `targets`"""
    return frozenset(cid for cid, tail in spec.route_tails.items() if targets.intersection(tail))


def relabel(spec: NetworkSpec, server_map: Dict[str, str]) -> NetworkSpec:
    return spec.with_classes(replace(c, server_id=server_map.get(c.server_id, c.server_id)) for c in spec.classes)
