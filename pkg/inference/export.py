"""
Module: export
Primitive export JSON: an array of
{"type", "coeffs", "score", "inlier_patches", "points"?} objects.
"""
from pathlib import Path
from typing import List, Union

from pydantic import TypeAdapter, ValidationError

from geometry.quadric import quadric_from_coeffs
from geometry.schemas import Quadric
from inference.errors import ExportError
from inference.schemas import CandidateSet, PrimitiveRecord
from logs.project_log import main_logger

__all__ = ('to_records', 'export_primitives', 'read_export', 'record_quadric')

PathLike = Union[str, Path]
_RECORDS = TypeAdapter(List[PrimitiveRecord])


def to_records(selected: CandidateSet, include_points: bool = True) -> List[PrimitiveRecord]:
    """Export records for every selected candidate that carries a quadric."""
    records = []
    for candidate in selected:
        if candidate.quadric is None:
            main_logger.warning("candidate %d has no valid %s quadric and is not exported",
                                candidate.index, candidate.type_tag.value)
            continue
        records.append(PrimitiveRecord(
            type=candidate.type_tag, coeffs=list(candidate.quadric.coeffs), score=candidate.score,
            inlier_patches=sorted(candidate.inliers),
            points=[tuple(p) for p in candidate.points.tolist()] if include_points else None,
        ))
    return records


def export_primitives(selected: CandidateSet, path: PathLike, include_points: bool = True) \
        -> List[PrimitiveRecord]:
    """
    Writes the selection as export JSON and reads it back for validation.

    Returns:
        List[PrimitiveRecord]: The records as re-read from ``path``.

    Raises:
        ExportError: The file cannot be written or does not validate.
    """
    records = to_records(selected, include_points)
    try:
        Path(path).write_bytes(_RECORDS.dump_json(records, exclude_none=True, indent=2))
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc
    main_logger.info("exported %d primitives to %s", len(records), path)
    return read_export(path)


def read_export(path: PathLike) -> List[PrimitiveRecord]:
    """
    Reads and validates an export file.

    Raises:
        ExportError: Unreadable file or schema violation.
    """
    try:
        return _RECORDS.validate_json(Path(path).read_bytes())
    except OSError as exc:
        raise ExportError(f"cannot read {path}: {exc}") from exc
    except ValidationError as exc:
        raise ExportError(f"{path} is not a primitive export: {exc}") from None


def record_quadric(record: PrimitiveRecord) -> Quadric:
    return quadric_from_coeffs(record.coeffs, record.type)
