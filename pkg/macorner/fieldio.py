"""CSV serialization of fields and radial profiles.

A field is written as ``x1,x2,u`` rows in row-major node order (active nodes
only) with a sidecar ``<stem>.meta.json`` holding the FieldMeta record.
"""

import csv
import json
import logging
from pathlib import Path

import numpy as np
import pydantic

from . import constants
from .errors import FieldFormatError, GridError
from .model import Grid2D, ScalarField
from .schema import FieldMeta

logger = logging.getLogger(__name__)


def meta_path_for(path: Path) -> Path:
    return path.with_name(path.stem + constants.FIELD_META_SUFFIX)


def _fmt(value: float) -> str:
    return f"{value:.{constants.FIELD_CSV_DIGITS}g}"


def write_field(field: ScalarField, path: Path) -> list[Path]:
    """Write the field CSV and its sidecar; return both paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = field.grid
    x1, x2 = grid.mesh
    mask = grid.active_mask
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(constants.FIELD_CSV_HEADER)
        for a, b, u in zip(x1[mask], x2[mask], field.values[mask], strict=True):
            writer.writerow([_fmt(a), _fmt(b), _fmt(u)])

    meta = field.meta.model_dump(mode="json", by_alias=True, exclude_none=True)
    for key in constants.SIDECAR_NULLABLE_KEYS:
        meta.setdefault(key, None)
    meta_path = meta_path_for(path)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    logger.debug("Wrote field with %d nodes to %s", int(mask.sum()), path)
    return [path, meta_path]


def read_field(path: Path) -> ScalarField:
    """Read a field CSV and its sidecar.

    Raises:
        FieldFormatError: If either file is missing, malformed, or the rows do
            not cover every active node of the grid described by the sidecar
    """
    path = Path(path)
    meta_path = meta_path_for(path)
    try:
        meta = FieldMeta.model_validate_json(meta_path.read_text())
    except FileNotFoundError as e:
        raise FieldFormatError(f"missing metadata sidecar: {meta_path}") from e
    except pydantic.ValidationError as e:
        raise FieldFormatError(f"invalid metadata in {meta_path}: {e}") from e

    try:
        grid = Grid2D.from_meta(meta)
    except GridError as e:
        raise FieldFormatError(f"invalid grid in {meta_path}: {e}") from e

    values = np.full(grid.dims, np.nan)
    seen = np.zeros(grid.dims, dtype=bool)
    try:
        with path.open(newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != (
                constants.FIELD_CSV_HEADER
            ):
                raise FieldFormatError(f"expected header x1,x2,u in {path}")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise FieldFormatError(f"{path}:{lineno}: expected 3 columns")
                a, b, u = (float(v) for v in row)
                idx = grid.node_index((a, b))
                if idx is None or not grid.active_mask[idx]:
                    raise FieldFormatError(
                        f"{path}:{lineno}: ({a}, {b}) is not an active node"
                    )
                values[idx] = u
                seen[idx] = True
    except FileNotFoundError as e:
        raise FieldFormatError(f"missing field file: {path}") from e
    except ValueError as e:
        if isinstance(e, FieldFormatError):
            raise
        raise FieldFormatError(f"non-numeric entry in {path}: {e}") from e

    missing = int((grid.active_mask & ~seen).sum())
    if missing:
        raise FieldFormatError(f"{path} is missing {missing} active nodes")
    if not np.all(np.isfinite(values[grid.active_mask])):
        raise FieldFormatError(f"{path} contains non-finite values")
    return ScalarField(grid, values, meta)


def write_profile(profile: list[tuple[float, float]], path: Path) -> Path:
    """Write ``r,value`` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(constants.PROFILE_CSV_HEADER)
        for r, value in profile:
            writer.writerow([_fmt(r), _fmt(value)])
    return path
