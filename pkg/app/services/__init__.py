# Services package
from .simulation_service import SimulationResult, SimulationService
from .verification_service import VerificationService

__all__ = ["SimulationService", "SimulationResult", "VerificationService"]
