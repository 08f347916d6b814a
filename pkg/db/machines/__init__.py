# Machine files package
from .machine_db import MachineRepository

__all__ = ["MachineRepository"]
