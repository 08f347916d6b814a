import logging
from pathlib import Path
from typing import Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from app.errors import ParseError
from app.models import CMFile, SCMFile
from app.services.counter_machine import SCM, CounterMachine

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
M = TypeVar("M", bound=BaseModel)


class MachineRepository:
    """Repository for counter machine and simplified counter machine files"""

    def _read(self, path: PathLike, model: Type[M]) -> M:
        try:
            text = Path(path).read_text()
        except OSError as e:
            logger.error(f"Error reading machine file {path}: {e}")
            raise ParseError(f"cannot read machine file: {e.strerror}", path=str(path)) from e
        try:
            return model.model_validate_json(text)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(p) for p in first["loc"])
            logger.error(f"Error parsing machine file {path}: {first['msg']} at {where}")
            raise ParseError(first["msg"], path=str(path), field=where) from e

    def load_cm(self, path: PathLike) -> CounterMachine:
        return self._read(path, CMFile).to_machine()

    def load_scm(self, path: PathLike) -> SCM:
        return self._read(path, SCMFile).to_machine()

    def save_scm(self, scm: SCM, path: PathLike) -> None:
        try:
            Path(path).write_text(SCMFile.from_machine(scm).model_dump_json(indent=2) + "\n")
            logger.info(f"Wrote {scm.m}-state machine to {path}")
        except OSError as e:
            logger.error(f"Error writing machine file {path}: {e}")
            raise
