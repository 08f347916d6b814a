import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from ..config import settings
from ..errors import ParseError
from ..utils.performance_monitor import PerformanceMonitor
from ..utils.rational import format_rational, to_decimal
from .compiler import CompiledNetwork
from .simulator import EventRecord, SimState, Trace, init_sim, run_until, workload

logger = logging.getLogger(__name__)

Probe = Tuple[List[str], Fraction]


@dataclass
class SimulationResult:
    trace: Trace
    state: SimState
    probe_rows: List[Dict[str, object]] = field(default_factory=list)


class SimulationService:
    """Runs a network to a horizon and samples workload probes"""

    def __init__(self, job_limit: Optional[int] = None, decimal_places: Optional[int] = None):
        self.job_limit = settings.job_limit if job_limit is None else job_limit
        self.decimal_places = settings.decimal_places if decimal_places is None else decimal_places
        self.monitor = PerformanceMonitor()

    def resolve_classes(self, cn: CompiledNetwork, names: Sequence[str]) -> List[str]:
        """Accept class ids, directory names such as "SN1.i12", or a short
        name such as "i12" when exactly one directory entry ends with it"""
        resolved = []
        for name in names:
            cid = cn.directory.get(name, name)
            if cid not in cn.spec.by_id:
                matches = [v for k, v in cn.directory.items() if k.endswith(f".{name}")]
                if len(matches) == 1:
                    cid = matches[0]
            if cid not in cn.spec.by_id:
                raise ParseError(f"unknown class {name!r}", field="probe")
            resolved.append(cid)
        return resolved

    def simulate(self, cn: CompiledNetwork, until: Fraction, probes: Sequence[Probe] = ()) -> SimulationResult:
        resolved = [(self.resolve_classes(cn, names), cadence) for names, cadence in probes]
        sampled = sorted({c for classes, _ in resolved for c in classes})
        columns = {f"workload_{'+'.join(classes)}": frozenset(classes) for classes, _ in resolved}
        probe_times = set()
        for _, cadence in resolved:
            k = 0
            while cadence * k <= until:
                probe_times.add(cadence * k)
                k += 1

        rows: List[Dict[str, object]] = []

        def sample(pre: SimState, post: SimState, events: List[EventRecord]) -> None:
            values = {name: workload(post, classes) for name, classes in columns.items()}
            for cid in sampled:
                row = {"time": format_rational(post.clock), "class": cid, "queue_len": len(post.queue(cid))}
                for name, value in values.items():
                    row[name] = format_rational(value)
                    row[f"{name}_decimal"] = to_decimal(value, self.decimal_places)
                rows.append(row)

        state = init_sim(cn.spec, cn.init)
        with self.monitor.measure(f"simulate {cn.spec.name} until {format_rational(until)}") as timing:
            trace = run_until(
                state,
                until,
                observers=[sample] if resolved else [],
                probe_times=probe_times,
                job_limit=self.job_limit,
            )
            timing.instants = trace.instants
        logger.info(f"Simulated {cn.spec.name}: {trace.instants} instants, {len(trace.events)} events")
        return SimulationResult(trace, state, rows)
