import json
import typing as t
from datetime import datetime
from pathlib import Path

from rich import box
from rich.table import Table

from .console import console
from .symbols import OK, WARN
from ..dataprep.builder import BuildSummary

__all__ = [
    "print_build_summary",
    "print_losses",
    "print_metrics",
    "print_rankings",
    "results_record",
    "save_results",
]


def _make_table(
        columns: list[tuple[str, dict[str, t.Any]]], title: str | None = None, expand: bool = False
) -> Table:
    """
    Create a Rich table with the given columns.

    :param columns: List of ``(header, column_kwargs)`` tuples.
    :param title: Optional caption above the table.
    :param expand: Whether the table should expand to fill the terminal width.
    :return: A configured Rich table ready for rows.
    """

    table = Table(box=box.SIMPLE, highlight=True, expand=expand, title=title)

    for header, col_kwargs in columns:
        table.add_column(header, **col_kwargs)

    return table


def _format_value(value: t.Any) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(item) for item in value)
    return str(value)


def _byte_size(count: int) -> str:
    size = float(count)
    for unit in ("B", "KiB", "MiB", "GiB"):
        if size < 1024 or unit == "GiB":
            return f"{size:.0f} {unit}" if unit == "B" else f"{size:.1f} {unit}"
        size /= 1024
    return f"{size:.1f} GiB"


def print_build_summary(summary: BuildSummary):
    """
    Print the outcome of a dataset build, then every skipped object.

    :param summary: What :func:`~trimodal.dataprep.builder.build_dataset` returned.
    """

    table = _make_table(
        columns=[
            ("Archive", {"style": "bold"}),
            ("Objects", {"justify": "right"}),
            ("Failures", {"justify": "right"}),
            ("Size", {"justify": "right"}),
        ],
    )
    table.add_row(
        str(summary.path),
        str(summary.objects),
        str(len(summary.failures)),
        _byte_size(summary.bytes_written),
    )
    console.print(table)

    for object_id, reason in summary.failures:
        console.print(f"{WARN} {object_id}: {reason}")


def print_losses(losses: dict[str, float], iteration: int):
    """
    Print the loss components of the last training step.

    :param losses: ``LossBreakdown.as_record()`` of the step.
    :param iteration: Iterations completed.
    """

    table = _make_table(
        columns=[(name, {"justify": "right"}) for name in losses],
        title=f"Losses at iteration {iteration}",
    )
    table.add_row(*(f"{value:.6f}" for value in losses.values()))
    console.print(table)


def print_metrics(record: dict[str, t.Any]):
    """
    Print the metrics of one evaluation as a two-column table.

    :param record: A results record built by :func:`results_record`.
    """

    table = _make_table(
        columns=[("Metric", {"style": "bold"}), ("Value", {"justify": "right"})],
        title=record.get("name") or record["task"],
    )
    for name, value in record["metrics"].items():
        table.add_row(name.replace("_", " "), _format_value(value))
    console.print(table)


def print_rankings(rankings: list[dict[str, t.Any]], queries: int = 5, top: int = 5):
    """
    Print the head of the first few ranked lists, same-class hits in green.

    :param rankings: ``{"query", "label", "results"}`` records.
    :param queries: Ranked lists to show.
    :param top: Results shown per list.
    """

    table = _make_table(
        columns=[
            ("Query", {"style": "bold"}),
            ("Class", {"justify": "right"}),
            *[(f"#{rank}", {"overflow": "fold"}) for rank in range(1, top + 1)],
        ],
        title="Nearest neighbours",
        expand=True,
    )
    for ranking in rankings[:queries]:
        cells = [
            f"[green]{hit['id']}[/green]" if hit["relevant"] else f"[dim]{hit['id']}[/dim]"
            for hit in ranking["results"][:top]
        ]
        cells += [""] * (top - len(cells))
        table.add_row(ranking["query"], str(ranking["label"]), *cells)
    console.print(table)


def results_record(
        task: str,
        name: str,
        config_hash: str,
        metrics: dict[str, t.Any],
        seed: int,
        **extra: t.Any,
) -> dict[str, t.Any]:
    """
    Assemble the JSON record every evaluation writes.

    :param task: ``probe``, ``fewshot``, ``partseg`` or ``retrieval``.
    :param name: File stem of the record.
    :param config_hash: Hash of the evaluation settings.
    :param metrics: Metric name to value.
    :param seed: Seed of the evaluation.
    :param extra: Task-specific fields (settings, ranked lists, data paths).
    :return: The record, with a local timestamp.
    """

    return {
        "task": task,
        "name": name,
        "config_hash": config_hash,
        "metrics": metrics,
        "seed": seed,
        "timestamp": datetime.now().astimezone().isoformat(timespec="seconds"),
        **extra,
    }


def save_results(directory: Path, record: dict[str, t.Any]) -> Path:
    """
    Write a results record to ``<directory>/<name>.json``.

    :param directory: Output directory (created if missing).
    :param record: Record from :func:`results_record`.
    :return: Path of the written file.
    """

    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{record['name']}.json"
    with open(path, "w") as file:
        json.dump(record, file, indent=4, default=str)
    console.print(f"{OK} Results written to {path}")
    return path
