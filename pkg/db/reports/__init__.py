# Report exports package
from .report_db import ReportRepository

__all__ = ["ReportRepository"]
