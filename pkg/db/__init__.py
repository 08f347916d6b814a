# File storage package
from .networks import NetworkRepository
from .machines import MachineRepository
from .reports import ReportRepository

__all__ = ["NetworkRepository", "MachineRepository", "ReportRepository"]
