"""
On-disk dataset archives.

An archive is a directory holding:

* ``dataset.json``: the build config, its hash and the object count.
* ``manifest.jsonl``: one JSON object per record (id, label, split, blob
  paths relative to the archive root, number of stored views).
* ``records/<n>_<id>/*.bin``: one tensor blob per field.

Every blob starts with a little-endian header (dtype code ``u8``, rank
``u8``, then ``rank`` dims as ``u32``) followed by the raw little-endian
array. Rendered views are stored as ``uint8`` so a single view can be read
by seeking straight to it.
"""

import json
import logging
import re
import shutil
import struct
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .models import FaceFeatureSet, ImageView, PointCloud, SegmentationRecord, Split, TriModalSample

__all__ = [
    "ArchiveEntry",
    "ArchiveWriter",
    "DatasetArchive",
    "read_segmentation_records",
    "read_tensor",
    "read_tensor_slice",
    "write_segmentation_records",
    "write_tensor",
]

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
HEADER_NAME = "dataset.json"
SEGMENTATION_MANIFEST = "segmentation.jsonl"
SEGMENTATION_PARTS = "parts.json"

_DTYPE_CODES: dict[int, np.dtype] = {
    0: np.dtype("<f4"),
    1: np.dtype("<f8"),
    2: np.dtype("<i8"),
    3: np.dtype("u1"),
    4: np.dtype("<i4"),
}
_CODE_FOR_KIND = {(dtype.kind, dtype.itemsize): code for code, dtype in _DTYPE_CODES.items()}


def _header(array: np.ndarray) -> bytes:
    try:
        code = _CODE_FOR_KIND[(array.dtype.kind, array.dtype.itemsize)]
    except KeyError:
        raise ValueError(f"unsupported tensor dtype {array.dtype}") from None
    return struct.pack(f"<BB{array.ndim}I", code, array.ndim, *array.shape)


def _read_header(handle: t.BinaryIO, path: Path) -> tuple[np.dtype, tuple[int, ...]]:
    prefix = handle.read(2)
    if len(prefix) != 2:
        raise ValueError(f"{path}: truncated tensor header")
    code, rank = struct.unpack("<BB", prefix)
    if code not in _DTYPE_CODES:
        raise ValueError(f"{path}: unknown dtype code {code}")
    dims = handle.read(4 * rank)
    if len(dims) != 4 * rank:
        raise ValueError(f"{path}: truncated tensor header")
    return _DTYPE_CODES[code], struct.unpack(f"<{rank}I", dims)


def write_tensor(path: str | Path, array: np.ndarray) -> int:
    """
    Write one array as a tensor blob.

    :param path: Destination file (parents are created).
    :param array: Array of a supported dtype (float32/64, int32/64, uint8).
    :return: Bytes written.
    :raises ValueError: On an unsupported dtype.
    """

    array = np.asarray(array)
    header = _header(array)
    dtype = _DTYPE_CODES[header[0]]
    payload = np.ascontiguousarray(array, dtype=dtype).tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + payload)
    return len(header) + len(payload)


def read_tensor(path: str | Path) -> np.ndarray:
    """
    Read a whole tensor blob.

    :param path: Blob file.
    :return: The array in its stored dtype and shape.
    :raises ValueError: On a malformed or truncated blob.
    """

    path = Path(path)
    with path.open("rb") as handle:
        dtype, shape = _read_header(handle, path)
        count = int(np.prod(shape, dtype=np.int64))
        data = handle.read(count * dtype.itemsize)
    if len(data) != count * dtype.itemsize:
        raise ValueError(f"{path}: expected {count} elements of {dtype}, blob is truncated")
    return np.frombuffer(data, dtype=dtype).reshape(shape).copy()


def read_tensor_slice(path: str | Path, index: int) -> np.ndarray:
    """
    Read ``tensor[index]`` from a blob without loading the rest.

    :param path: Blob file of rank >= 1.
    :param index: Position along the first axis.
    :return: The selected sub-array.
    :raises IndexError: If ``index`` is out of range.
    """

    path = Path(path)
    with path.open("rb") as handle:
        dtype, shape = _read_header(handle, path)
        if not shape:
            raise ValueError(f"{path}: cannot slice a scalar tensor")
        if not 0 <= index < shape[0]:
            raise IndexError(f"{path}: index {index} outside 0..{shape[0] - 1}")
        row_shape = shape[1:]
        row_bytes = int(np.prod(row_shape, dtype=np.int64)) * dtype.itemsize
        handle.seek(2 + 4 * len(shape) + index * row_bytes)
        data = handle.read(row_bytes)
    return np.frombuffer(data, dtype=dtype).reshape(row_shape).copy()


def _quantize(pixels: np.ndarray) -> np.ndarray:
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def _dequantize(pixels: np.ndarray) -> np.ndarray:
    return pixels.astype(np.float32) / np.float32(255.0)


def _record_dir(position: int, object_id: str) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]", "_", object_id)
    return f"records/{position:06d}_{safe}"


def _clear_records(root: Path) -> None:
    records = root / "records"
    if records.is_dir():
        log.debug(f"removing stale records under {root}")
        shutil.rmtree(records)


@dataclass
class ArchiveEntry:
    """
    One line of an archive manifest.

    Attributes:
        object_id: Identifier of the object.
        label: Optional integer class.
        split: Dataset split.
        blobs: Field name to blob path, relative to the archive root.
        num_views: Number of stored views.
    """

    object_id: str
    label: int | None
    split: Split
    blobs: dict[str, str]
    num_views: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.object_id,
                "label": self.label,
                "split": str(self.split),
                "blobs": self.blobs,
                "num_views": self.num_views,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "ArchiveEntry":
        record = json.loads(line)
        return cls(
            object_id=record["id"],
            label=record.get("label"),
            split=Split(record.get("split", Split.TRAIN)),
            blobs=dict(record["blobs"]),
            num_views=int(record["num_views"]),
        )


class ArchiveWriter:
    """
    Appends records to a new archive directory.

    Record blobs left in ``root`` by an earlier build are removed first.

    Not thread-safe: callers serialize :meth:`add` (the builder does so by
    writing from its coordinating process only).

    :param root: Archive directory; existing manifest and header are replaced.
    :param config: Build config stored in ``dataset.json``.
    :param config_hash: Hash of ``config``.
    """

    def __init__(self, root: str | Path, config: dict[str, t.Any], config_hash: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        _clear_records(self.root)
        self.config = config
        self.config_hash = config_hash
        self.entries: list[ArchiveEntry] = []
        self.bytes_written = 0
        self._manifest = (self.root / MANIFEST_NAME).open("w", encoding="utf-8")

    def add(self, sample: TriModalSample, split: Split = Split.TRAIN) -> ArchiveEntry:
        """
        Write one object's tensors and its manifest line.

        :param sample: The object in all three modalities.
        :param split: Split to record.
        :return: The manifest entry written.
        """

        directory = _record_dir(len(self.entries), sample.object_id)
        fields = {
            "points": sample.point_cloud.points.astype(np.float32),
            "centers": sample.mesh.centers,
            "corners": sample.mesh.corners,
            "normals": sample.mesh.normals,
            "neighbors": sample.mesh.neighbor_index,
            "views": _quantize(np.stack([view.pixels for view in sample.views])),
            "cameras": np.stack([view.camera_position for view in sample.views]).astype(np.float64),
        }
        blobs = {}
        for name, array in fields.items():
            relative = f"{directory}/{name}.bin"
            self.bytes_written += write_tensor(self.root / relative, array)
            blobs[name] = relative

        entry = ArchiveEntry(
            object_id=sample.object_id,
            label=sample.class_label,
            split=split,
            blobs=blobs,
            num_views=len(sample.views),
        )
        self._manifest.write(entry.to_json() + "\n")
        self.entries.append(entry)
        return entry

    def close(self) -> None:
        """
        Flush the manifest and write ``dataset.json``.
        """

        self._manifest.close()
        header = {"config": self.config, "config_hash": self.config_hash, "objects": len(self.entries)}
        (self.root / HEADER_NAME).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")

    def __enter__(self) -> "ArchiveWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


@dataclass
class DatasetArchive:
    """
    Read access to a built archive, by object id.

    Attributes:
        root: Archive directory.
        entries: Manifest entries in build order.
        config: Build config from ``dataset.json``.
        config_hash: Hash of the build config.
    """

    root: Path
    entries: list[ArchiveEntry]
    config: dict[str, t.Any] = field(default_factory=dict)
    config_hash: str = ""

    def __post_init__(self):
        self._by_id = {entry.object_id: entry for entry in self.entries}

    @classmethod
    def open(cls, root: str | Path) -> "DatasetArchive":
        """
        Open an archive directory.

        :param root: Directory written by :class:`ArchiveWriter`.
        :return: The archive.
        :raises FileNotFoundError: If the manifest is missing.
        """

        root = Path(root)
        manifest = root / MANIFEST_NAME
        if not manifest.is_file():
            raise FileNotFoundError(f"no {MANIFEST_NAME} in {root}")
        entries = [
            ArchiveEntry.from_json(line)
            for line in manifest.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        header_path = root / HEADER_NAME
        header = json.loads(header_path.read_text()) if header_path.is_file() else {}
        return cls(
            root=root,
            entries=entries,
            config=header.get("config", {}),
            config_hash=header.get("config_hash", ""),
        )

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, object_id: str) -> bool:
        return object_id in self._by_id

    def entry(self, object_id: str) -> ArchiveEntry:
        try:
            return self._by_id[object_id]
        except KeyError:
            raise KeyError(f"object {object_id!r} is not in {self.root}") from None

    def ids(self, split: Split | str | None = None) -> list[str]:
        """
        Object ids in build order, optionally restricted to a split.
        """

        if split is None:
            return [entry.object_id for entry in self.entries]
        split = Split(split)
        return [entry.object_id for entry in self.entries if entry.split == split]

    @property
    def min_views(self) -> int:
        """
        The smallest number of stored views over all records.
        """

        return min((entry.num_views for entry in self.entries), default=0)

    def _blob(self, object_id: str, name: str) -> Path:
        return self.root / self.entry(object_id).blobs[name]

    def load_points(self, object_id: str) -> PointCloud:
        return PointCloud(points=read_tensor(self._blob(object_id, "points")))

    def load_faces(self, object_id: str) -> FaceFeatureSet:
        return FaceFeatureSet(
            centers=read_tensor(self._blob(object_id, "centers")),
            corners=read_tensor(self._blob(object_id, "corners")),
            normals=read_tensor(self._blob(object_id, "normals")),
            neighbor_index=read_tensor(self._blob(object_id, "neighbors")),
        )

    def load_view(self, object_id: str, index: int) -> ImageView:
        """
        Read one stored view by seeking into the views blob.

        :param object_id: Object to read.
        :param index: View index within the object's pool.
        :return: The view with pixels decoded to float32 in [0, 1].
        :raises IndexError: If the object has fewer views.
        """

        pixels = read_tensor_slice(self._blob(object_id, "views"), index)
        camera = read_tensor_slice(self._blob(object_id, "cameras"), index)
        return ImageView(pixels=_dequantize(pixels), camera_position=camera, view_index=index)

    def load_views(self, object_id: str, indices: t.Iterable[int] | None = None) -> list[ImageView]:
        """
        Read several views; all of them when ``indices`` is None.
        """

        if indices is None:
            pixels = _dequantize(read_tensor(self._blob(object_id, "views")))
            cameras = read_tensor(self._blob(object_id, "cameras"))
            return [
                ImageView(pixels=pixels[i], camera_position=cameras[i], view_index=i)
                for i in range(len(pixels))
            ]
        return [self.load_view(object_id, index) for index in indices]

    def load_sample(self, object_id: str, view_indices: t.Iterable[int] | None = None) -> TriModalSample:
        """
        Read one object in all three modalities.

        :param object_id: Object to read.
        :param view_indices: Views to load (all when None).
        :return: The sample.
        """

        entry = self.entry(object_id)
        return TriModalSample(
            mesh=self.load_faces(object_id),
            point_cloud=self.load_points(object_id),
            views=self.load_views(object_id, view_indices),
            object_id=object_id,
            class_label=entry.label,
        )


def write_segmentation_records(
    root: str | Path,
    records: t.Sequence[SegmentationRecord],
    category_parts: dict[str, list[int]],
    splits: t.Sequence[Split | str] | None = None,
) -> int:
    """
    Persist segmentation records in the tensor blob format.

    :param root: Destination directory.
    :param records: Records to write.
    :param category_parts: Category name to its global part ids.
    :param splits: Split of every record (all ``train`` when None).
    :return: Bytes written.
    """

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    _clear_records(root)
    splits = list(splits) if splits is not None else [Split.TRAIN] * len(records)
    written = 0
    lines = []
    for position, (record, split) in enumerate(zip(records, splits, strict=True)):
        directory = _record_dir(position, record.object_id or str(position))
        written += write_tensor(root / f"{directory}/points.bin", record.points.astype(np.float32))
        written += write_tensor(root / f"{directory}/labels.bin", record.labels)
        lines.append(
            json.dumps(
                {
                    "id": record.object_id,
                    "category": record.category,
                    "split": str(Split(split)),
                    "blobs": {"points": f"{directory}/points.bin", "labels": f"{directory}/labels.bin"},
                },
                sort_keys=True,
            )
        )
    (root / SEGMENTATION_MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")
    (root / SEGMENTATION_PARTS).write_text(json.dumps(category_parts, indent=2, sort_keys=True) + "\n")
    return written


def read_segmentation_records(
    root: str | Path,
) -> tuple[dict[Split, list[SegmentationRecord]], dict[str, list[int]]]:
    """
    Load segmentation records written by :func:`write_segmentation_records`.

    :param root: Directory to read.
    :return: Records grouped by split, and the category part map.
    :raises FileNotFoundError: If the directory holds no segmentation manifest.
    """

    root = Path(root)
    manifest = root / SEGMENTATION_MANIFEST
    if not manifest.is_file():
        raise FileNotFoundError(f"no {SEGMENTATION_MANIFEST} in {root}")
    category_parts = json.loads((root / SEGMENTATION_PARTS).read_text())
    grouped: dict[Split, list[SegmentationRecord]] = {Split.TRAIN: [], Split.TEST: []}
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        grouped[Split(record["split"])].append(
            SegmentationRecord(
                points=read_tensor(root / record["blobs"]["points"]),
                labels=read_tensor(root / record["blobs"]["labels"]),
                category=record["category"],
                object_id=record["id"],
            )
        )
    log.debug(f"loaded {sum(len(v) for v in grouped.values())} segmentation record(s) from {root}")
    return grouped, {name: [int(p) for p in parts] for name, parts in category_parts.items()}
