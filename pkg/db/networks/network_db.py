import logging
from pathlib import Path
from typing import Union

from app.errors import ParseError
from app.models import parse_network, serialize_network
from app.services.compiler import CompiledNetwork

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class NetworkRepository:
    """Repository for network files"""

    def load(self, path: PathLike) -> CompiledNetwork:
        """Read and validate a network file"""
        try:
            text = Path(path).read_text()
        except OSError as e:
            logger.error(f"Error reading network file {path}: {e}")
            raise ParseError(f"cannot read network file: {e.strerror}", path=str(path)) from e
        try:
            cn = parse_network(text, str(path))
        except ParseError as e:
            logger.error(f"Error parsing network file {path}: {e}")
            raise
        logger.info(f"Loaded network {cn.spec.name} from {path}")
        return cn

    def save(self, cn: CompiledNetwork, path: PathLike) -> None:
        try:
            Path(path).write_text(serialize_network(cn))
            logger.info(f"Wrote network {cn.spec.name} ({len(cn.spec.classes)} classes) to {path}")
        except OSError as e:
            logger.error(f"Error writing network file {path}: {e}")
            raise
