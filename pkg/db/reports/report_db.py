import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import pandas as pd

from app.config import settings
from app.models import LoadRow, VerifyReportFile
from app.services.simulator import EventRecord
from app.utils.rational import format_rational, to_decimal

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TRACE_COLUMNS = ["time", "time_decimal", "seq", "kind", "class", "server", "job"]


class ReportRepository:
    """Repository for verification reports and CSV exports"""

    def __init__(self, decimal_places: Optional[int] = None):
        self.decimal_places = settings.decimal_places if decimal_places is None else decimal_places

    def save_verify_report(self, report: VerifyReportFile, path: PathLike) -> None:
        try:
            Path(path).write_text(report.model_dump_json(indent=2) + "\n")
            logger.info(f"Wrote verification report for {report.machine} to {path}")
        except OSError as e:
            logger.error(f"Error writing report {path}: {e}")
            raise

    def cycle_frame(self, report: VerifyReportFile) -> pd.DataFrame:
        frame = pd.DataFrame([s.model_dump() for s in report.statuses])
        if not frame.empty:
            frame["jobs_before"] = report.left_limit_totals[: len(frame)]
        return frame

    def save_cycle_csv(self, report: VerifyReportFile, path: PathLike) -> None:
        self._write(self.cycle_frame(report), path)

    def trace_frame(self, events: Iterable[EventRecord]) -> pd.DataFrame:
        rows = [
            {
                "time": format_rational(e.time),
                "time_decimal": to_decimal(e.time, self.decimal_places),
                "seq": e.seq,
                "kind": e.kind.value,
                "class": e.class_id,
                "server": e.server_id,
                "job": e.job_id,
            }
            for e in events
        ]
        return pd.DataFrame(rows, columns=TRACE_COLUMNS)

    def save_trace_csv(self, events: Iterable[EventRecord], path: PathLike) -> None:
        self._write(self.trace_frame(events), path)

    def save_probe_csv(self, rows: List[Dict[str, object]], path: PathLike) -> None:
        self._write(pd.DataFrame(rows), path)

    def loads_frame(self, rows: List[LoadRow]) -> pd.DataFrame:
        frame = pd.DataFrame([r.model_dump() for r in rows], columns=["server", "load", "load_decimal", "ok"])
        frame["flag"] = frame["ok"].map(lambda ok: "" if ok else ">= 1")
        return frame.drop(columns=["ok"])

    def _write(self, frame: pd.DataFrame, path: PathLike) -> None:
        try:
            frame.to_csv(path, index=False)
            logger.info(f"Wrote {len(frame)} rows to {path}")
        except OSError as e:
            logger.error(f"Error writing CSV {path}: {e}")
            raise
