import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, Iterator, Optional

logger = logging.getLogger(__name__)


@dataclass
class RunTiming:
    seconds: float
    instants: Optional[int] = None

    @property
    def instants_per_second(self) -> Optional[float]:
        if self.instants is None or self.seconds <= 0:
            return None
        return self.instants / self.seconds


class PerformanceMonitor:
    """Wall-clock timings of compile, simulate and verify runs"""

    def __init__(self):
        self.runs: Dict[str, RunTiming] = {}

    @contextmanager
    def measure(self, label: str) -> Iterator[RunTiming]:
        """Time the block; callers may set `instants` on the yielded record"""
        record = RunTiming(0.0)
        began = time.perf_counter()
        logger.debug(f"Started {label}")
        try:
            yield record
        finally:
            record.seconds = time.perf_counter() - began
            self.runs[label] = record
            rate = record.instants_per_second
            suffix = f", {rate:,.0f} instants/s" if rate is not None else ""
            logger.info(f"{label} took {record.seconds:.3f}s{suffix}")

    def log_summary(self) -> None:
        if not self.runs:
            return
        total = sum(run.seconds for run in self.runs.values())
        logger.info(f"{len(self.runs)} runs in {total:.3f}s")
        for label, run in sorted(self.runs.items(), key=lambda kv: kv[1].seconds, reverse=True):
            logger.info(f"  {label}: {run.seconds:.3f}s")
