"""Run-configuration and vertex-record loading."""

import json
import logging
import os
import tomllib
from pathlib import Path
from typing import Any

import pydantic
import yaml

from . import constants
from .errors import ConfigError
from .schema import VertexData

logger = logging.getLogger(__name__)


def resolve_thread_cap(default: int = constants.DEFAULT_THREADS) -> int:
    """Worker cap from MA_CORNER_THREADS, falling back to ``default``."""
    raw = os.getenv(constants.ENV_THREADS)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Ignoring non-integer %s=%r", constants.ENV_THREADS, raw)
        return default
    if value < 1:
        logger.warning("Ignoring non-positive %s=%r", constants.ENV_THREADS, raw)
        return default
    return value


def _parse(path: Path, text: str) -> Any:
    suffix = path.suffix.lower()
    if suffix in (".yaml", ".yml"):
        return yaml.safe_load(text)
    if suffix == ".json":
        return json.loads(text)
    return tomllib.loads(text)


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a flat YAML, JSON or TOML mapping of RunConfig fields.

    Keys may use dashes or underscores. An empty file yields an empty mapping.

    Raises:
        ConfigError: If the file is missing, unparseable or not a mapping
    """
    path = Path(path)
    if path.suffix.lower() not in constants.CONFIG_SUFFIXES:
        raise ConfigError(f"unsupported config format: {path.suffix or path.name}")
    try:
        data = _parse(path, path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except (yaml.YAMLError, json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        logger.error("Parsing error in '%s': %s", path, e)
        raise ConfigError(f"cannot parse {path}: {e}") from e

    if data is None:
        logger.warning("Empty config file: %s", path)
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping of settings")
    logger.debug("Loaded config from %s", path)
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def load_vertices(path: Path) -> list[VertexData]:
    """Read one vertex record or a list of them from JSON.

    Raises:
        ConfigError: If the file is missing or not valid JSON
        pydantic.ValidationError: If a record fails validation
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"vertex file not found: {path}") from e
    except json.JSONDecodeError as e:
        logger.error("Malformed vertex JSON in '%s': %s", path, e)
        raise ConfigError(f"malformed JSON in {path}: {e}") from e

    records = data if isinstance(data, list) else [data]
    if not records:
        raise ConfigError(f"{path} holds no vertex records")
    vertices = []
    for i, record in enumerate(records):
        if not isinstance(record, dict):
            raise ConfigError(f"{path}: record {i} is not an object")
        try:
            vertices.append(VertexData.model_validate(record))
        except pydantic.ValidationError:
            logger.error("Invalid vertex record %d in '%s'", i, path)
            raise
    return vertices
