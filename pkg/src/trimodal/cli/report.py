"""
Static HTML report of evaluation results.

Every results file becomes a metric table. Retrieval results also get one
row per query: the query's thumbnail followed by its ten nearest gallery
objects, same-class results framed in green.
"""

import base64
import html
import io
import json
import logging
import typing as t
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from mpl_toolkits.mplot3d.art3d import Poly3DCollection

from ..dataprep.archive import DatasetArchive
from ..dataprep.models import Modality

__all__ = ["load_results", "thumbnail", "write_report"]

log = logging.getLogger(__name__)

THUMBNAIL_INCHES = 1.2
THUMBNAIL_DPI = 80


def load_results(source: str | Path) -> list[dict[str, t.Any]]:
    """
    Read one results file, or every ``*.json`` results file of a directory.

    Files without a ``task`` and ``metrics`` field (resolved configs, for
    instance) are ignored.

    :param source: File or directory.
    :return: Records sorted by file name.
    :raises FileNotFoundError: If ``source`` doesn't exist or holds no results.
    """

    source = Path(source)
    if not source.exists():
        raise FileNotFoundError(f"no results at {source}")
    paths = [source] if source.is_file() else sorted(source.glob("*.json"))
    records = []
    for path in paths:
        record = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(record, dict) and "task" in record and "metrics" in record:
            records.append(record)
    if not records:
        raise FileNotFoundError(f"no results files in {source}")
    return records


def _png(figure: plt.Figure) -> str:
    buffer = io.BytesIO()
    figure.savefig(buffer, format="png", dpi=THUMBNAIL_DPI)
    plt.close(figure)
    return base64.b64encode(buffer.getvalue()).decode("ascii")


def thumbnail(archive: DatasetArchive, object_id: str, modality: Modality | str) -> str:
    """
    Base64 PNG of one object as seen by one modality.

    Images show the first stored view, point clouds a scatter plot and
    meshes their (subsampled) faces.

    :param archive: Archive holding the object.
    :param object_id: Object to draw.
    :param modality: Representation to draw.
    :return: PNG bytes, base64-encoded.
    """

    modality = Modality(modality)
    size = (THUMBNAIL_INCHES, THUMBNAIL_INCHES)
    if modality == Modality.IMAGE:
        figure, axes = plt.subplots(figsize=size)
        axes.imshow(np.clip(archive.load_view(object_id, 0).pixels, 0.0, 1.0))
        axes.set_axis_off()
        figure.subplots_adjust(0, 0, 1, 1)
        return _png(figure)

    figure = plt.figure(figsize=size)
    axes = figure.add_subplot(projection="3d")
    if modality == Modality.POINT:
        points = archive.load_points(object_id).points
        # y is up in object space, matplotlib draws z up
        axes.scatter(points[:, 0], points[:, 2], points[:, 1], s=0.5, c=points[:, 1], cmap="viridis")
    else:
        faces = archive.load_faces(object_id)
        triangles = (faces.centers[:, None, :] + faces.corners)[:, :, [0, 2, 1]]
        shade = 0.35 + 0.65 * np.abs(faces.normals[:, 2])
        axes.add_collection3d(
            Poly3DCollection(triangles, facecolors=plt.cm.Greys(shade), edgecolors="none")
        )
    axes.set_xlim(-1, 1)
    axes.set_ylim(-1, 1)
    axes.set_zlim(-1, 1)
    axes.set_axis_off()
    figure.subplots_adjust(0, 0, 1, 1)
    return _png(figure)


def _metric_table(record: dict[str, t.Any]) -> list[str]:
    lines = [
        f"<h2>{html.escape(record.get('name') or record['task'])}</h2>",
        f"<p class=\"meta\">config {html.escape(record['config_hash'][:12])} · seed {record['seed']}"
        f" · {html.escape(str(record.get('timestamp', '')))}</p>",
        "<table>",
        "<thead><tr><th>Metric</th><th>Value</th></tr></thead>",
        "<tbody>",
    ]
    for name, value in record["metrics"].items():
        shown = f"{value:.4f}" if isinstance(value, float) else str(value)
        lines.append(f"<tr><td>{html.escape(name)}</td><td>{html.escape(shown)}</td></tr>")
    lines += ["</tbody>", "</table>"]
    return lines


def _gallery_rows(record: dict[str, t.Any], queries: int) -> list[str]:
    archive = DatasetArchive.open(record["data"])
    source, target = Modality(record["settings"]["source"]), Modality(record["settings"]["target"])
    lines = ['<table class="gallery">']
    for ranking in record.get("rankings", [])[:queries]:
        lines.append("<tr>")
        lines.append(
            f'<td class="query"><img alt="{html.escape(ranking["query"])}" '
            f'src="data:image/png;base64,{thumbnail(archive, ranking["query"], source)}">'
            f"<br>{html.escape(ranking['query'])}</td>"
        )
        for hit in ranking["results"][:10]:
            css = "hit" if hit["relevant"] else "miss"
            lines.append(
                f'<td class="{css}"><img alt="{html.escape(hit["id"])}" '
                f'src="data:image/png;base64,{thumbnail(archive, hit["id"], target)}">'
                f"<br>{html.escape(hit['id'])}</td>"
            )
        lines.append("</tr>")
    lines.append("</table>")
    return lines


def write_report(records: list[dict[str, t.Any]], path: str | Path, queries: int = 8) -> Path:
    """
    Render results records as a single static HTML page.

    :param records: Records from :func:`load_results`.
    :param path: HTML file to write.
    :param queries: Ranked lists drawn per retrieval result.
    :return: Path of the written file.
    """

    lines = [
        "<!DOCTYPE html>",
        "<html><head>",
        '<meta charset="utf-8">',
        "<title>trimodal report</title>",
        "<style>",
        "  body { font-family: sans-serif; margin: 2em; }",
        "  table { border-collapse: collapse; margin-bottom: 1em; }",
        "  th, td { border: 1px solid #ddd; padding: 6px; text-align: left; }",
        "  th { background-color: #f2f2f2; }",
        "  .meta { color: #777; font-size: 0.85em; }",
        "  .gallery td { text-align: center; font-size: 0.7em; vertical-align: top; }",
        "  .gallery .query { border: 3px solid #36c; }",
        "  .gallery .hit { border: 3px solid #2a2; }",
        "  .gallery .miss { border: 3px solid #fff; }",
        "</style>",
        "</head><body>",
        "<h1>trimodal report</h1>",
    ]
    for record in records:
        lines += _metric_table(record)
        if record["task"] == "retrieval" and record.get("rankings"):
            try:
                lines += _gallery_rows(record, queries)
            except (OSError, ValueError, KeyError) as error:
                log.warning(f"no gallery for {record.get('name')}: {error}")
                lines.append(f"<p class=\"meta\">gallery unavailable: {html.escape(str(error))}</p>")
    lines.append("</body></html>")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as file:
        file.write("\n".join(lines))
    return path
