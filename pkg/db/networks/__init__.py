# Network files package
from .network_db import NetworkRepository

__all__ = ["NetworkRepository"]
