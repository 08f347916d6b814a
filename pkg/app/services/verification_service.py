import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, Optional, Tuple

from ..config import settings
from ..utils.performance_monitor import PerformanceMonitor
from .counter_machine import SCM
from .verification import BoundednessRecord, VerifyReport, verify_boundedness, verify_lockstep

logger = logging.getLogger(__name__)

Outcome = Tuple[VerifyReport, BoundednessRecord]


def _verify_one(scm: SCM, cycles: int, normalized: bool, job_limit: Optional[int]) -> Outcome:
    report = verify_lockstep(scm, cycles, normalized=normalized, job_limit=job_limit)
    return report, verify_boundedness(scm, cycles, report)


class VerificationService:
    """Runs lockstep verification of machines against their compiled networks"""

    def __init__(self, workers: Optional[int] = None, job_limit: Optional[int] = None):
        self.workers = settings.verify_workers if workers is None else workers
        self.job_limit = settings.job_limit if job_limit is None else job_limit
        self.monitor = PerformanceMonitor()

    def verify(self, scm: SCM, cycles: Optional[int] = None, normalized: bool = False, name: str = "scm") -> Outcome:
        cycles = cycles or settings.default_cycles
        logger.info(f"Verifying {name} ({scm.m} states) for {cycles} cycles, normalized={normalized}")
        with self.monitor.measure(f"verify {name}"):
            report, bounds = _verify_one(scm, cycles, normalized, self.job_limit)
        if report.ok:
            logger.info(f"{name}: all {len(report.statuses)} statuses match, no violations")
        else:
            logger.warning(
                f"{name}: first mismatch at cycle {report.first_mismatch}, {len(report.violations)} violations"
            )
        return report, bounds

    def verify_many(
        self, machines: Dict[str, SCM], cycles: Optional[int] = None, normalized: bool = False
    ) -> Dict[str, Outcome]:
        """Verify independent machines, in worker processes when workers > 1"""
        cycles = cycles or settings.default_cycles
        if self.workers <= 1 or len(machines) <= 1:
            return {name: self.verify(scm, cycles, normalized, name) for name, scm in machines.items()}
        names = list(machines)
        with self.monitor.measure(f"verify {len(names)} machines"):
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                futures = [pool.submit(_verify_one, machines[n], cycles, normalized, self.job_limit) for n in names]
                results = {n: f.result() for n, f in zip(names, futures)}
        self.monitor.log_summary()
        return results
