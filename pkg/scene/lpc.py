"""
Module: lpc
Reader and writer for the LPC labeled point cloud format.

    LPC 1
    counts N G
    prim <id> <type> <c1> ... <c10>      (G lines)
    pt <x> <y> <z> <label>               (N lines)

Reals are written with 17 significant digits. Partial scans use G = 0 and label 0.
"""
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from geometry.errors import GeometryError
from geometry.quadric import quadric_from_coeffs
from geometry.schemas import BoundedPrimitive, PrimitiveType, Quadric
from scene.errors import InvariantViolation, ParseError
from scene.schemas import LabeledCloud, PartialScan

__all__ = ('write_lpc', 'read_lpc', 'write_scan', 'read_scan', 'LPC_MAGIC')

LPC_MAGIC = "LPC 1"
PathLike = Union[str, Path]


def _real(value: float) -> str:
    return format(float(value), ".17g")


def _write(path: PathLike, points: np.ndarray, labels: np.ndarray, quadrics: List[Quadric]):
    lines = [LPC_MAGIC, f"counts {len(points)} {len(quadrics)}"]
    for i, q in enumerate(quadrics, start=1):
        lines.append(f"prim {i} {q.type_tag.value} " + " ".join(_real(c) for c in q.coeffs))
    for p, label in zip(points, labels):
        lines.append(f"pt {_real(p[0])} {_real(p[1])} {_real(p[2])} {int(label)}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def write_lpc(cloud: LabeledCloud, path: PathLike):
    _write(path, cloud.points, cloud.labels, [prim.quadric for prim in cloud.primitives])


def write_scan(scan: PartialScan, path: PathLike):
    _write(path, scan.points, np.zeros(len(scan.points), dtype=np.int64), [])


def _floats(tokens: List[str], line_no: int) -> List[float]:
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise ParseError(line_no, f"expected reals, got {' '.join(tokens)!r}") from None
    if not np.all(np.isfinite(values)):
        raise ParseError(line_no, "non-finite real")
    return values


def _parse(path: PathLike) -> Tuple[np.ndarray, np.ndarray, List[Quadric]]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            rows = f.read().split("\n")
    except UnicodeDecodeError as exc:
        raise ParseError(1, f"not a text file: {exc}") from None
    if rows and rows[-1] == "":
        rows.pop()
    if not rows or rows[0].strip() != LPC_MAGIC:
        raise ParseError(1, f"expected {LPC_MAGIC!r}")
    if len(rows) < 2:
        raise ParseError(2, "missing counts line")
    head = rows[1].split()
    if len(head) != 3 or head[0] != "counts" or not head[1].isdigit() or not head[2].isdigit():
        raise ParseError(2, "expected 'counts N G'")
    n, g = int(head[1]), int(head[2])
    if len(rows) < 2 + g + n:
        raise ParseError(len(rows) + 1, f"truncated: expected {g} primitives and {n} points")
    if len(rows) > 2 + g + n:
        raise ParseError(2 + g + n + 1, "unexpected trailing content")

    quadrics: List[Quadric] = []
    for i in range(g):
        line_no = 3 + i
        tokens = rows[2 + i].split()
        if len(tokens) != 13 or tokens[0] != "prim":
            raise ParseError(line_no, "expected 'prim <id> <type> <c1> ... <c10>'")
        if tokens[1] != str(i + 1):
            raise ParseError(line_no, f"primitive ids must run 1..{g} in order")
        try:
            type_tag = PrimitiveType(tokens[2])
        except ValueError:
            raise ParseError(line_no, f"unknown primitive type {tokens[2]!r}") from None
        if type_tag is PrimitiveType.NULL:
            raise ParseError(line_no, "null primitives cannot be stored")
        coeffs = _floats(tokens[3:], line_no)
        try:
            quadrics.append(quadric_from_coeffs(coeffs, type_tag))
        except GeometryError as exc:
            raise InvariantViolation("primitive_coeffs", f"primitive {i + 1}: {exc}") from None

    points = np.empty((n, 3))
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        line_no = 3 + g + i
        tokens = rows[2 + g + i].split()
        if len(tokens) != 5 or tokens[0] != "pt":
            raise ParseError(line_no, "expected 'pt <x> <y> <z> <label>'")
        points[i] = _floats(tokens[1:4], line_no)
        try:
            labels[i] = int(tokens[4])
        except ValueError:
            raise ParseError(line_no, f"label {tokens[4]!r} is not an integer") from None
    return points, labels, quadrics


def read_lpc(path: PathLike) -> LabeledCloud:
    """
    Reads and validates a labeled cloud.

    Raises:
        ParseError: Malformed content; carries the 1-based line number.
        InvariantViolation: Well-formed content that breaks a cloud invariant.
    """
    points, labels, quadrics = _parse(path)
    if len(quadrics) == 0:
        raise InvariantViolation("primitive_count", "a labeled cloud needs at least one primitive")
    if len(points) == 0:
        raise InvariantViolation("non_empty", "cloud has no points")
    if np.any(labels < 1) or np.any(labels > len(quadrics)):
        raise InvariantViolation("label_range", f"labels must reference primitives 1..{len(quadrics)}")
    primitives = []
    for i, q in enumerate(quadrics, start=1):
        support = points[labels == i]
        if len(support) == 0:
            raise InvariantViolation("primitive_support", f"primitive {i} has no supporting point")
        primitives.append(BoundedPrimitive(quadric=q, support=support))
    return LabeledCloud(points=points, labels=labels, primitives=primitives)


def read_scan(path: PathLike) -> PartialScan:
    """Reads a partial scan (G = 0, all labels 0); a labeled cloud file is accepted and its labels dropped."""
    points, labels, quadrics = _parse(path)
    if len(points) == 0:
        raise InvariantViolation("non_empty", "scan has no points")
    if not quadrics and np.any(labels != 0):
        raise InvariantViolation("label_range", "scan labels must be 0")
    return PartialScan(points=points)
