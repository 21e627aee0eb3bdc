"""
In-domain and cross-modal retrieval over universal-space features.

Features are L1-normalized, galleries are ranked by Euclidean distance
(ties go to the lower object id) and relevance means sharing the query's
class label. mAP is computed over the full ranking.
"""

import json
import logging
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataprep.archive import DatasetArchive, read_tensor, write_tensor
from .dataprep.models import Modality, Split
from .encoders.network import TriModalNetwork
from .eval.features import FeatureTable, extract_feature_table

__all__ = [
    "RETRIEVAL_DIRECTIONS",
    "RankedList",
    "RetrievalIndex",
    "RetrievalResult",
    "average_precision",
    "evaluate_retrieval",
    "l1_normalize",
    "mean_average_precision",
    "permutation_baseline",
    "rank_by_distance",
    "rank_gallery",
    "write_ranked_lists",
]

log = logging.getLogger(__name__)

RETRIEVAL_DIRECTIONS: tuple[tuple[Modality, Modality], ...] = (
    (Modality.IMAGE, Modality.IMAGE),
    (Modality.POINT, Modality.POINT),
    (Modality.MESH, Modality.MESH),
    (Modality.IMAGE, Modality.POINT),
    (Modality.IMAGE, Modality.MESH),
    (Modality.POINT, Modality.IMAGE),
    (Modality.POINT, Modality.MESH),
    (Modality.MESH, Modality.IMAGE),
    (Modality.MESH, Modality.POINT),
)


def l1_normalize(features: np.ndarray) -> np.ndarray:
    """
    Divide a vector (or every row of a matrix) by its sum of absolute values.

    :param features: ``(D,)`` or ``(n, D)`` array.
    :return: float64 array of the same shape.
    :raises ValueError: If a vector is all zeros.
    """

    features = np.asarray(features, dtype=np.float64)
    norms = np.abs(features).sum(axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot L1-normalize a zero vector")
    return features / norms


@dataclass
class RetrievalIndex:
    """
    A gallery of L1-normalized features.

    Attributes:
        object_ids: Gallery ids.
        labels: ``(n,)`` classes.
        modality: Modality of the gallery features.
        features: ``(n, D)`` float64 rows with unit L1 norm.
    """

    object_ids: list[str]
    labels: np.ndarray
    modality: Modality
    features: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.modality = Modality(self.modality)
        if len(self.object_ids) == 0:
            raise ValueError("retrieval index is empty")
        if not len(self.object_ids) == len(self.labels) == len(self.features):
            raise ValueError("retrieval index needs one id, label and feature per entry")
        if not np.allclose(np.abs(self.features).sum(axis=1), 1.0, rtol=0, atol=1e-6):
            raise ValueError("retrieval index features must be L1-normalized")

    @classmethod
    def from_table(cls, table: FeatureTable) -> "RetrievalIndex":
        return cls(
            object_ids=list(table.object_ids),
            labels=table.labels,
            modality=table.modality,
            features=l1_normalize(table.features),
        )

    def __len__(self) -> int:
        return len(self.object_ids)

    def save(self, directory: str | Path) -> Path:
        """
        Persist as a ``features.bin`` tensor blob plus ``entries.jsonl``.
        """

        directory = Path(directory)
        write_tensor(directory / "features.bin", self.features)
        lines = [
            json.dumps({"id": object_id, "label": int(label), "modality": str(self.modality)})
            for object_id, label in zip(self.object_ids, self.labels)
        ]
        (directory / "entries.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
        return directory

    @classmethod
    def load(cls, directory: str | Path) -> "RetrievalIndex":
        directory = Path(directory)
        entries = [
            json.loads(line)
            for line in (directory / "entries.jsonl").read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        return cls(
            object_ids=[entry["id"] for entry in entries],
            labels=np.array([entry["label"] for entry in entries]),
            modality=entries[0]["modality"],
            features=read_tensor(directory / "features.bin"),
        )


@dataclass
class RankedList:
    """
    A gallery ordered by distance to one query.

    Attributes:
        query_id: Id of the query object.
        query_label: Class of the query.
        gallery_ids: Gallery ids, nearest first.
        distances: Non-decreasing distances aligned with ``gallery_ids``.
        relevant: Whether each gallery entry shares the query's class.
    """

    query_id: str
    query_label: int
    gallery_ids: list[str]
    distances: np.ndarray
    relevant: np.ndarray

    def top(self, count: int = 10) -> list[dict[str, t.Any]]:
        return [
            {"id": gallery_id, "distance": float(distance), "relevant": bool(relevant)}
            for gallery_id, distance, relevant in zip(
                self.gallery_ids[:count], self.distances[:count], self.relevant[:count]
            )
        ]


def rank_by_distance(
    query: np.ndarray, gallery: np.ndarray, gallery_ids: t.Sequence[str]
) -> tuple[np.ndarray, np.ndarray]:
    """
    Order gallery rows by Euclidean distance to the query, ties by id.

    :param query: ``(D,)`` vector.
    :param gallery: ``(n, D)`` rows.
    :param gallery_ids: Id of every row.
    :return: Row order and the sorted distances.
    :raises ValueError: On a width mismatch.
    """

    query = np.asarray(query, dtype=np.float64)
    gallery = np.asarray(gallery, dtype=np.float64)
    if query.ndim != 1 or gallery.ndim != 2 or gallery.shape[1] != query.shape[0]:
        raise ValueError(f"query of shape {query.shape} doesn't match gallery of shape {gallery.shape}")
    distances = np.linalg.norm(gallery - query, axis=1)
    order = np.lexsort((np.asarray(gallery_ids, dtype=str), distances))
    return order, distances[order]


def rank_gallery(
    query: np.ndarray,
    index: RetrievalIndex,
    query_id: str = "",
    query_label: int = -1,
    exclude_self: bool = False,
) -> RankedList:
    """
    Rank an index against one L1-normalized query.

    :param query: ``(D,)`` query feature.
    :param index: Gallery.
    :param query_id: Id of the query; with ``exclude_self`` its gallery entry is dropped.
    :param query_label: Class used for relevance flags.
    :param exclude_self: Drop the gallery entry whose id equals ``query_id``.
    :return: The ranked gallery.
    :raises ValueError: On a width mismatch.
    """

    order, distances = rank_by_distance(query, index.features, index.object_ids)
    if exclude_self:
        keep = np.array([index.object_ids[i] != query_id for i in order], dtype=bool)
        order, distances = order[keep], distances[keep]
    return RankedList(
        query_id=query_id,
        query_label=int(query_label),
        gallery_ids=[index.object_ids[i] for i in order],
        distances=distances,
        relevant=index.labels[order] == query_label,
    )


def average_precision(relevance: t.Sequence[bool] | np.ndarray) -> float:
    """
    Mean of precision@r over the ranks ``r`` holding a relevant item.

    :param relevance: Relevance flags of a full ranking, best first.
    :return: AP in (0, 1].
    :raises ValueError: If nothing in the ranking is relevant.
    """

    relevance = np.asarray(relevance, dtype=bool)
    hits = np.flatnonzero(relevance)
    if hits.size == 0:
        raise ValueError("average precision is undefined without a relevant item")
    precision_at_hits = np.arange(1, hits.size + 1) / (hits + 1)
    return float(precision_at_hits.mean())


def mean_average_precision(
    queries: RetrievalIndex,
    gallery: RetrievalIndex,
    exclude_self: bool = False,
) -> tuple[float, list[RankedList]]:
    """
    Query every entry of ``queries`` against ``gallery``.

    Queries without any relevant gallery entry are skipped and logged.

    :param queries: Query features.
    :param gallery: Gallery features.
    :param exclude_self: Drop each query's own id from its ranking.
    :return: mAP over the answered queries, and every ranked list.
    :raises ValueError: If no query has a relevant gallery entry.
    """

    precisions = []
    rankings = []
    for object_id, label, feature in zip(queries.object_ids, queries.labels, queries.features):
        ranking = rank_gallery(feature, gallery, object_id, label, exclude_self=exclude_self)
        rankings.append(ranking)
        if not ranking.relevant.any():
            log.warning(f"skipping query {object_id}: no gallery entry shares class {label}")
            continue
        precisions.append(average_precision(ranking.relevant))
    if not precisions:
        raise ValueError("no query has a relevant gallery entry")
    return float(np.mean(precisions)), rankings


@dataclass
class RetrievalResult:
    """
    Attributes:
        source: Query modality.
        target: Gallery modality.
        views: Views aggregated per image feature.
        mean_ap: mAP over the answered queries.
        rankings: One ranked list per query.
    """

    source: Modality
    target: Modality
    views: int
    mean_ap: float
    rankings: list[RankedList] = field(default_factory=list)
    queries: RetrievalIndex | None = None
    gallery: RetrievalIndex | None = None


def evaluate_retrieval(
    network: TriModalNetwork,
    archive: DatasetArchive,
    source: Modality | str,
    target: Modality | str,
    split: Split | str | None = Split.TEST,
    views: int = 1,
    seed: int = 0,
) -> RetrievalResult:
    """
    Retrieve ``target`` features with ``source`` queries over one split.

    Image features average the backbone features of ``views`` views before
    projection. Every object queries once; its own entry is excluded only
    when source and target modalities coincide.

    :param network: Trained networks.
    :param archive: Dataset archive.
    :param source: Query modality.
    :param target: Gallery modality.
    :param split: Split providing both queries and gallery.
    :param views: Views per image feature.
    :param seed: Seed of the view selection.
    :return: mAP and ranked lists.
    :raises ValueError: On an unknown modality.
    """

    try:
        source, target = Modality(source), Modality(target)
    except ValueError:
        raise ValueError(f"unknown retrieval direction {source!r} -> {target!r}") from None

    def index_for(modality: Modality) -> RetrievalIndex:
        table = extract_feature_table(network, archive, split, modality, views=views, seed=seed, project=True)
        return RetrievalIndex.from_table(table)

    queries = index_for(source)
    gallery = queries if source == target else index_for(target)
    mean_ap, rankings = mean_average_precision(queries, gallery, exclude_self=source == target)
    log.info(f"retrieval {source} -> {target} (views={views}): mAP {mean_ap:.4f}")
    return RetrievalResult(
        source=source,
        target=target,
        views=views,
        mean_ap=mean_ap,
        rankings=rankings,
        queries=queries,
        gallery=gallery,
    )


def permutation_baseline(
    queries: RetrievalIndex,
    gallery: RetrievalIndex,
    exclude_self: bool = False,
    permutations: int = 100,
    seed: int = 0,
) -> tuple[float, float]:
    """
    mAP with the gallery's labels randomly reassigned to its features.

    :return: Mean and standard deviation over ``permutations`` shuffles.
    """

    rng = np.random.default_rng(seed)
    scores = []
    for _ in range(permutations):
        shuffled = RetrievalIndex(
            object_ids=gallery.object_ids,
            labels=rng.permutation(gallery.labels),
            modality=gallery.modality,
            features=gallery.features,
        )
        scores.append(mean_average_precision(queries, shuffled, exclude_self=exclude_self)[0])
    return float(np.mean(scores)), float(np.std(scores))


def write_ranked_lists(path: str | Path, rankings: t.Sequence[RankedList], top: int = 10) -> Path:
    """
    Export the head of every ranked list as JSON lines.
    """

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for ranking in rankings:
            record = {"query": ranking.query_id, "label": ranking.query_label, "results": ranking.top(top)}
            handle.write(json.dumps(record) + "\n")
    return path
