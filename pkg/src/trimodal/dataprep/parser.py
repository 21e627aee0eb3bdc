import json
import logging
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import MeshObject, Split
from ..errors import OffParseError

__all__ = [
    "ManifestEntry",
    "load_mesh",
    "parse_manifest",
    "parse_manifest_line",
    "parse_off",
]

log = logging.getLogger(__name__)


@dataclass
class ManifestEntry:
    """
    One object listed in a dataset manifest.

    Exactly one of ``path`` and ``generator`` is set.

    Attributes:
        object_id: Identifier, unique within the manifest.
        label: Optional integer class.
        split: Split the object belongs to.
        path: OFF file, resolved against the manifest's directory.
        generator: Procedural generator spec (``family``, ``params``, ``seed``).
    """

    object_id: str
    label: int | None = None
    split: Split = Split.TRAIN
    path: Path | None = None
    generator: dict[str, t.Any] | None = field(default=None)


def _strip_comment(line: str) -> str:
    """
    Drop an inline ``#`` comment and surrounding whitespace.

    :param line: A raw line of OFF text.
    :return: The significant part of the line (possibly empty).
    """

    return line.split("#", 1)[0].strip()


def _significant_lines(text: str) -> t.Iterator[tuple[int, list[str]]]:
    """
    Yield ``(line_number, tokens)`` for every non-blank, non-comment line.

    :param text: Full OFF file contents.
    """

    for number, raw_line in enumerate(text.splitlines(), start=1):
        content = _strip_comment(raw_line)
        if content:
            yield number, content.split()


def _parse_counts(tokens: list[str], line_number: int) -> tuple[int, int]:
    """
    Parse the ``nv nf [ne]`` counts line.

    :param tokens: Tokens of the counts line.
    :param line_number: Line the tokens came from, for error messages.
    :return: Vertex and face counts.
    :raises OffParseError: If the counts are missing or not non-negative integers.
    """

    if len(tokens) < 2:
        raise OffParseError(f"expected 'vertices faces [edges]' counts, got {tokens}", line_number)
    try:
        vertex_count, face_count = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise OffParseError(f"non-integer counts {tokens[:2]}", line_number) from None
    if vertex_count < 0 or face_count < 0:
        raise OffParseError("counts must be non-negative", line_number)
    return vertex_count, face_count


def _fan_triangulate(polygon: list[int]) -> list[tuple[int, int, int]]:
    """
    Split a polygon into triangles sharing its first vertex.

    :param polygon: Vertex indices of a face with at least 3 corners.
    :return: ``len(polygon) - 2`` triangles.
    """

    return [(polygon[0], polygon[i], polygon[i + 1]) for i in range(1, len(polygon) - 1)]


def parse_off(text: str, object_id: str = "", class_label: int | None = None) -> MeshObject:
    """
    Parse OFF mesh text into a :class:`MeshObject`.

    Accepts ``#`` comments and blank lines anywhere, and the ModelNet header
    quirk where the counts are glued to the keyword (``OFF490 518 0``).
    Polygons are fan-triangulated; triangles that repeat a vertex index
    (degenerate fans, duplicated indices in the source) are dropped.

    :param text: Contents of an OFF file.
    :param object_id: Identifier stored on the mesh.
    :param class_label: Optional class stored on the mesh.
    :return: The parsed mesh.
    :raises OffParseError: On a malformed header, wrong counts, bad vertex or
        face lines, or when no usable face remains.
    """

    lines = _significant_lines(text)

    try:
        line_number, tokens = next(lines)
    except StopIteration:
        raise OffParseError("empty file") from None
    if not tokens[0].startswith("OFF"):
        raise OffParseError(f"expected 'OFF' header, got {tokens[0]!r}", line_number)

    glued = tokens[0][len("OFF") :]
    count_tokens = ([glued] if glued else []) + tokens[1:]
    if not count_tokens:
        try:
            line_number, count_tokens = next(lines)
        except StopIteration:
            raise OffParseError("missing counts line") from None
    vertex_count, face_count = _parse_counts(count_tokens, line_number)

    vertices = np.empty((vertex_count, 3), dtype=np.float64)
    for row in range(vertex_count):
        try:
            line_number, tokens = next(lines)
        except StopIteration:
            raise OffParseError(f"expected {vertex_count} vertices, found {row}") from None
        if len(tokens) != 3:
            raise OffParseError(f"expected 3 vertex coordinates, got {len(tokens)}", line_number)
        try:
            vertices[row] = [float(token) for token in tokens]
        except ValueError:
            raise OffParseError(f"non-numeric vertex {tokens}", line_number) from None

    triangles: list[tuple[int, int, int]] = []
    dropped = 0
    for row in range(face_count):
        try:
            line_number, tokens = next(lines)
        except StopIteration:
            raise OffParseError(f"expected {face_count} faces, found {row}") from None
        try:
            corner_count = int(tokens[0])
            polygon = [int(token) for token in tokens[1 : 1 + corner_count]]
        except ValueError:
            raise OffParseError(f"non-integer face {tokens}", line_number) from None
        if corner_count < 3 or len(polygon) != corner_count:
            raise OffParseError(
                f"face declares {corner_count} corners but lists {len(polygon)}", line_number
            )
        if min(polygon) < 0 or max(polygon) >= vertex_count:
            raise OffParseError(f"face index out of range 0..{vertex_count - 1}", line_number)
        for triangle in _fan_triangulate(polygon):
            if len(set(triangle)) == 3:
                triangles.append(triangle)
            else:
                dropped += 1

    for line_number, tokens in lines:
        raise OffParseError(f"unexpected trailing data {tokens}", line_number)

    if dropped:
        log.debug(f"{object_id or 'mesh'}: dropped {dropped} triangle(s) with repeated vertices")
    if not triangles:
        raise OffParseError("mesh has no usable faces")

    return MeshObject(
        vertices=vertices,
        faces=np.asarray(triangles, dtype=np.int64),
        object_id=object_id,
        class_label=class_label,
    )


def load_mesh(path: str | Path, object_id: str | None = None, class_label: int | None = None) -> MeshObject:
    """
    Read an OFF file from disk.

    :param path: Path to the ``.off`` file.
    :param object_id: Identifier for the mesh. Defaults to the file stem.
    :param class_label: Optional class stored on the mesh.
    :return: The parsed mesh.
    :raises OSError: If the file can't be read.
    :raises OffParseError: If the contents are malformed.
    """

    path = Path(path)
    return parse_off(
        path.read_text(encoding="utf-8", errors="replace"),
        object_id=object_id if object_id is not None else path.stem,
        class_label=class_label,
    )


def parse_manifest_line(line: str, base_dir: Path, line_number: int = 0) -> ManifestEntry:
    """
    Parse one JSON line of a dataset manifest.

    Lines look like ``{"id": "chair_0001", "path": "chair_0001.off", "label": 3}``
    or ``{"id": "cyl_007", "generator": {"family": "cylinder", "seed": 7}, "label": 1,
    "split": "test"}``.

    :param line: The raw JSON text.
    :param base_dir: Directory relative mesh paths are resolved against.
    :param line_number: Line number, for error messages.
    :return: The parsed entry.
    :raises ValueError: If the line isn't a JSON object with an id and exactly
        one of ``path``/``generator``.
    """

    try:
        record = json.loads(line)
    except json.JSONDecodeError as error:
        raise ValueError(f"manifest line {line_number}: {error.msg}") from None
    if not isinstance(record, dict) or not record.get("id"):
        raise ValueError(f"manifest line {line_number}: expected an object with an 'id'")
    if ("path" in record) == ("generator" in record):
        raise ValueError(
            f"manifest line {line_number}: exactly one of 'path' and 'generator' is required"
        )

    label = record.get("label")
    path = record.get("path")
    return ManifestEntry(
        object_id=str(record["id"]),
        label=int(label) if label is not None else None,
        split=Split(record.get("split", Split.TRAIN)),
        path=(base_dir / path) if path is not None else None,
        generator=record.get("generator"),
    )


def parse_manifest(path: str | Path) -> list[ManifestEntry]:
    """
    Parse a JSON-lines manifest file.

    :param path: The manifest file.
    :return: Entries in file order.
    :raises ValueError: On a malformed line or a duplicated id.
    """

    path = Path(path)
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        entry = parse_manifest_line(line, base_dir=path.parent, line_number=line_number)
        if entry.object_id in seen:
            raise ValueError(f"manifest line {line_number}: duplicate id {entry.object_id!r}")
        seen.add(entry.object_id)
        entries.append(entry)
    return entries
