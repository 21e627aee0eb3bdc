from __future__ import annotations

import argparse
import typing as t
from datetime import datetime
from pathlib import Path

from . import __pkg__, __version__
from .config import TASKS, EvalConfig, ExperimentConfig
from .console import console
from .output import (
    print_build_summary,
    print_losses,
    print_metrics,
    print_rankings,
    results_record,
    save_results,
)
from .symbols import OK, STEP, WARN
from ..config import resolve_output, write_resolved_config
from ..dataprep.archive import DatasetArchive, read_segmentation_records, write_segmentation_records
from ..dataprep.builder import PrepConfig, build_dataset, build_part_dataset, write_toy_manifest
from ..dataprep.models import Modality, Split
from ..encoders.checkpoint import latest_checkpoint, load_checkpoint
from ..encoders.network import TriModalNetwork
from ..errors import TrimodalError
from ..eval.features import extract_feature_table
from ..eval.probe import few_shot_probe, linear_probe, probe_chance_baseline
from ..eval.segmentation import SegmentationConfig, part_segmentation
from ..retrieval import evaluate_retrieval, permutation_baseline, write_ranked_lists
from ..trainer.config import TrainConfig
from ..trainer.loop import fit

if t.TYPE_CHECKING:
    from rich.status import Status

__all__ = ["UsageError", "parse_args", "run_evaluation"]

MODALITIES = [str(modality) for modality in Modality]


class UsageError(TrimodalError):
    """
    A command was given an incomplete set of inputs (exit code 2).
    """


def existing_path(value: str) -> Path:
    """
    Argparse type for inputs that must exist; a missing one is a usage error.

    :param value: Raw argument.
    :return: The path.
    :raises argparse.ArgumentTypeError: If nothing exists at ``value``.
    """

    path = Path(value)
    if not path.exists():
        raise argparse.ArgumentTypeError(f"{value} does not exist")
    return path


def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def non_negative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return number


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """
    Parse command-line arguments and return the populated namespace.

    :param argv: Arguments to parse (``sys.argv[1:]`` when None).
    :return: Parsed arguments with the selected subcommand function in ``.func``.
    """

    parser = argparse.ArgumentParser(
        prog=__pkg__,
        description="Self-supervised mesh, point cloud and multi-view feature learning for 3D objects",
        epilog=f"© {datetime.now().year} Ritchie Mwewa",
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="enable debug logging",
    )
    parser.add_argument(
        "-v",
        "--version",
        action="version",
        version=f"{__pkg__} {__version__}",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    # toy
    toy_parser = subparsers.add_parser("toy", help="write the procedural toy manifest")
    toy_parser.add_argument("--out", required=True, type=Path, help="manifest file to write")
    toy_parser.add_argument(
        "--train-per-family",
        type=positive_int,
        default=20,
        metavar="N",
        help="training objects per shape family (default: %(default)s)",
    )
    toy_parser.add_argument(
        "--test-per-family",
        type=positive_int,
        default=10,
        metavar="N",
        help="test objects per shape family (default: %(default)s)",
    )
    toy_parser.add_argument(
        "--parts",
        type=Path,
        metavar="DIR",
        help="also write the procedural part-segmentation records to DIR",
    )
    toy_parser.add_argument("--seed", type=int, default=0, help="generator seed (default: %(default)s)")
    toy_parser.set_defaults(func=cmd_toy)

    # prep
    prep_parser = subparsers.add_parser("prep", help="build a dataset archive from a manifest")
    prep_parser.add_argument("--manifest", required=True, type=existing_path, help="JSON-lines manifest")
    prep_parser.add_argument("--out", required=True, type=Path, help="archive directory")
    prep_parser.add_argument("--views", type=positive_int, metavar="N", help="rendered views per object")
    prep_parser.add_argument("--points", type=positive_int, metavar="N", help="points per cloud")
    prep_parser.add_argument("--faces", type=positive_int, metavar="F", help="faces per mesh")
    prep_parser.add_argument("--resolution", type=positive_int, metavar="PX", help="view width and height")
    prep_parser.add_argument("--seed", type=int, help="build seed")
    prep_parser.add_argument("--workers", type=positive_int, metavar="N", help="worker processes")
    prep_parser.add_argument(
        "--toy",
        action="store_true",
        help="start from the desk-scale preset instead of the defaults",
    )
    prep_parser.set_defaults(func=cmd_prep)

    # train
    train_parser = subparsers.add_parser("train", help="pre-train the encoders on an archive")
    train_parser.add_argument("--data", type=existing_path, metavar="DIR", help="dataset archive")
    train_parser.add_argument("--config", type=existing_path, metavar="FILE", help="experiment config (JSON)")
    train_parser.add_argument(
        "--paper-scale",
        action="store_true",
        help="use the full-scale training schedule",
    )
    train_parser.add_argument(
        "--resume",
        action="store_true",
        help="continue from the latest checkpoint of the run directory",
    )
    train_parser.add_argument("--out", type=Path, metavar="DIR", help="run directory")
    train_parser.add_argument("--workers", type=non_negative_int, metavar="N", help="batch prefetch workers")
    train_parser.set_defaults(func=cmd_train)

    # eval
    eval_parser = subparsers.add_parser("eval", help="evaluate a pre-trained checkpoint")
    eval_parser.add_argument("--task", choices=TASKS, help="protocol to run (default: all of --config)")
    eval_parser.add_argument(
        "--checkpoint",
        required=True,
        type=existing_path,
        metavar="CK",
        help="checkpoint directory, or a run directory to take the latest from",
    )
    eval_parser.add_argument("--data", type=existing_path, metavar="DIR", help="dataset archive")
    eval_parser.add_argument("--config", type=existing_path, metavar="FILE", help="experiment config (JSON)")
    eval_parser.add_argument("--modality", choices=MODALITIES, help="probe/fewshot features")
    eval_parser.add_argument("--source", choices=MODALITIES, help="retrieval query modality")
    eval_parser.add_argument("--target", choices=MODALITIES, help="retrieval gallery modality")
    eval_parser.add_argument("--views", type=positive_int, help="views aggregated per image feature")
    eval_parser.add_argument("--shots", type=positive_int, help="few-shot examples per class")
    eval_parser.add_argument("--rounds", type=positive_int, help="few-shot rounds")
    eval_parser.add_argument("--fraction", type=float, help="share of labelled part-segmentation shapes")
    eval_parser.add_argument("--mode", choices=["frozen", "unfrozen", "scratch"], help="part-segmentation encoder")
    eval_parser.add_argument("--iterations", type=positive_int, help="part-segmentation head iterations")
    eval_parser.add_argument("--parts", type=existing_path, metavar="DIR", help="segmentation record archive")
    eval_parser.add_argument(
        "--baseline",
        action="store_true",
        help="also score the label-permutation chance baseline",
    )
    eval_parser.add_argument("--out", type=Path, default=Path("results"), metavar="DIR", help="results directory")
    eval_parser.add_argument("--seed", type=int, help="evaluation seed")
    eval_parser.set_defaults(func=cmd_eval)

    # report
    report_parser = subparsers.add_parser("report", help="render results as a static HTML page")
    report_parser.add_argument(
        "--from",
        dest="results",
        required=True,
        type=existing_path,
        metavar="RESULTS",
        help="results file or directory",
    )
    report_parser.add_argument("--out", required=True, type=Path, help="HTML file to write")
    report_parser.add_argument(
        "--queries",
        type=positive_int,
        default=8,
        metavar="N",
        help="ranked lists drawn per retrieval result (default: %(default)s)",
    )
    report_parser.set_defaults(func=cmd_report)

    return parser.parse_args(argv)


def _overrides(args: argparse.Namespace, names: t.Iterable[str]) -> dict[str, t.Any]:
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


def cmd_toy(args: argparse.Namespace, status: Status):
    """
    Handle the 'toy' subcommand.

    :param args: Parsed arguments with ``.out``, ``.train_per_family``,
        ``.test_per_family``, ``.parts`` and ``.seed``.
    :param status: Rich status spinner for progress updates.
    """

    path = resolve_output(args.out)
    status.update(f"[dim]Writing toy manifest to {path}…[/dim]")
    records = write_toy_manifest(
        path,
        train_per_family=args.train_per_family,
        test_per_family=args.test_per_family,
        seed=args.seed,
    )
    console.log(f"{OK} Wrote {len(records)} toy objects to {path}")

    if args.parts is not None:
        parts_dir = resolve_output(args.parts)
        status.update("[dim]Generating part-segmentation shapes…[/dim]")
        grouped, category_parts = build_part_dataset(seed=args.seed)
        records = [*grouped[Split.TRAIN], *grouped[Split.TEST]]
        splits = [Split.TRAIN] * len(grouped[Split.TRAIN]) + [Split.TEST] * len(grouped[Split.TEST])
        write_segmentation_records(parts_dir, records, category_parts, splits)
        write_resolved_config(parts_dir, {"seed": args.seed, "categories": category_parts})
        console.log(f"{OK} Wrote {len(records)} part-segmentation shapes to {parts_dir}")


def cmd_prep(args: argparse.Namespace, status: Status):
    """
    Handle the 'prep' subcommand.

    :param args: Parsed arguments with ``.manifest``, ``.out`` and the
        optional build overrides.
    :param status: Rich status spinner for progress updates.
    """

    overrides = _overrides(args, ("views", "points", "faces", "resolution", "seed", "workers"))
    config = PrepConfig.toy(**overrides) if args.toy else PrepConfig(**overrides)
    out_dir = resolve_output(args.out)
    done = {"ok": 0, "failed": 0}

    def on_object(object_id: str, succeeded: bool):
        done["ok" if succeeded else "failed"] += 1
        status.update(
            f"[dim]Prepared [cyan]{done['ok']}[/] object(s), "
            f"[yellow]{done['failed']}[/] failure(s); last: {object_id}…[/dim]"
        )

    status.update(f"[dim]Building archive from {args.manifest}…[/dim]")
    summary = build_dataset(args.manifest, out_dir, config=config, on_object=on_object)
    write_resolved_config(out_dir, config)

    status.stop()
    console.log(f"{OK} Built {summary.objects} object(s) into {summary.path}")
    print_build_summary(summary)


def cmd_train(args: argparse.Namespace, status: Status):
    """
    Handle the 'train' subcommand.

    :param args: Parsed arguments with ``.data``, ``.config``,
        ``.paper_scale``, ``.resume``, ``.out`` and ``.workers``.
    :param status: Rich status spinner for progress updates.
    :raises UsageError: If neither ``--data`` nor the config names an archive.
    """

    experiment = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.paper_scale:
        experiment = experiment.model_copy(update={"train": TrainConfig.paper_scale(seed=experiment.seed)})
    train_config = experiment.train
    if args.workers is not None:
        train_config = train_config.model_copy(update={"workers": args.workers})

    data = args.data or experiment.dataset
    if data is None:
        raise UsageError("train needs --data or a config with a dataset")
    run_dir = resolve_output(args.out or experiment.output_dir)

    console.log(
        f"{STEP} batch size {train_config.batch_size}, {train_config.iterations} iterations, "
        f"width scale {train_config.width_scale}, k={train_config.edge_k}"
    )
    archive = DatasetArchive.open(data)

    def on_step(iteration: int, losses: dict[str, float]):
        status.update(
            f"[dim]Iteration [cyan]{iteration}[/]/{train_config.iterations}, "
            f"loss [bold]{losses['total']:.4f}[/bold]…[/dim]"
        )

    status.update(f"[dim]Training on {data}…[/dim]")
    result = fit(archive, train_config, run_dir, resume=args.resume, on_step=on_step)
    run_dir.mkdir(parents=True, exist_ok=True)
    echoed = experiment.model_copy(update={"train": train_config, "dataset": str(data)})
    (run_dir / "experiment.json").write_text(echoed.model_dump_json(indent=2) + "\n", encoding="utf-8")

    status.stop()
    for path in result.checkpoints:
        console.log(f"{STEP} Checkpoint {path}")
    if result.final:
        print_losses(result.final, result.iteration)
    else:
        console.log(f"{WARN} Nothing to do: {run_dir} already holds {result.iteration} iteration(s)")
    console.log(f"{OK} Run directory: {result.run_dir}")


def _resolve_checkpoint(path: Path) -> Path:
    if (path / "meta.json").is_file():
        return path
    latest = latest_checkpoint(path)
    if latest is None:
        raise FileNotFoundError(f"no checkpoint in {path}")
    return latest


def run_evaluation(
        network: TriModalNetwork,
        archive: DatasetArchive | None,
        config: EvalConfig,
        parts: Path | None = None,
        out_dir: Path | None = None,
) -> dict[str, t.Any]:
    """
    Run one evaluation protocol and return its results record.

    :param network: Pre-trained networks.
    :param archive: Dataset archive (unused by ``partseg``).
    :param config: Protocol and settings.
    :param parts: Segmentation record archive; the procedural part dataset when None.
    :param out_dir: Where retrieval writes its ranked lists, if given.
    :return: A record from :func:`~trimodal.cli.output.results_record`.
    :raises UsageError: If a protocol other than ``partseg`` has no archive.
    """

    if archive is None and config.task != "partseg":
        raise UsageError(f"{config.task} needs --data or a config with a dataset")

    extra: dict[str, t.Any] = {"settings": config.model_dump(mode="json")}
    if archive is not None:
        extra["data"] = str(archive.root)

    match config.task:
        case "probe" | "fewshot":
            train, test = (
                extract_feature_table(
                    network,
                    archive,
                    split,
                    config.modality,
                    views=config.views,
                    aggregate="max" if config.task == "fewshot" else "mean",
                    seed=config.seed,
                )
                for split in (Split.TRAIN, Split.TEST)
            )
            if config.task == "probe":
                metrics = {"accuracy": linear_probe(train, test), "train": len(train), "test": len(test)}
            else:
                result = few_shot_probe(train, test, config.shots, rounds=config.rounds, seed=config.seed)
                metrics = {"accuracy_mean": result.mean, "accuracy_std": result.std, "accuracies": result.accuracies}
            if config.baseline:
                mean, std = probe_chance_baseline(train, test, seed=config.seed)
                metrics |= {"chance_mean": mean, "chance_std": std}

        case "partseg":
            if parts is not None:
                grouped, category_parts = read_segmentation_records(parts)
            else:
                grouped, category_parts = build_part_dataset(seed=config.seed)
            segmentation = SegmentationConfig(
                fraction=config.fraction,
                mode=config.mode,
                iterations=config.iterations,
                seed=config.seed,
            )
            scores, shapes = part_segmentation(
                network, grouped[Split.TRAIN], grouped[Split.TEST], category_parts, segmentation
            )
            metrics = {**scores.as_record(), "training_shapes": shapes}

        case _:
            result = evaluate_retrieval(
                network, archive, config.source, config.target, views=config.views, seed=config.seed
            )
            metrics = {"mAP": result.mean_ap, "queries": len(result.rankings)}
            if config.baseline:
                mean, std = permutation_baseline(
                    result.queries, result.gallery, exclude_self=config.source == config.target, seed=config.seed
                )
                metrics |= {"chance_mAP_mean": mean, "chance_mAP_std": std}
            extra["rankings"] = [
                {"query": ranking.query_id, "label": ranking.query_label, "results": ranking.top(10)}
                for ranking in result.rankings
            ]
            if out_dir is not None:
                write_ranked_lists(out_dir / f"{config.label()}.rankings.jsonl", result.rankings)

    return results_record(
        task=config.task,
        name=config.label(),
        config_hash=config.config_hash(),
        metrics=metrics,
        seed=config.seed,
        **extra,
    )


def cmd_eval(args: argparse.Namespace, status: Status):
    """
    Handle the 'eval' subcommand.

    With ``--task`` runs that protocol, configured by the task flags; without
    it runs every evaluation listed in ``--config``.

    :param args: Parsed arguments with ``.task``, ``.checkpoint``, ``.data``,
        ``.config`` and the task flags.
    :param status: Rich status spinner for progress updates.
    :raises UsageError: If neither ``--task`` nor a config with evaluations is given.
    """

    experiment = ExperimentConfig.load(args.config) if args.config else None
    if args.task is not None:
        flags = _overrides(
            args,
            ("modality", "source", "target", "views", "shots", "rounds", "fraction", "mode", "iterations", "seed"),
        )
        if "seed" not in flags and experiment is not None:
            flags["seed"] = experiment.seed
        evaluations = [EvalConfig(task=args.task, baseline=args.baseline, **flags)]
    elif experiment is not None and experiment.evaluations:
        evaluations = list(experiment.evaluations)
    else:
        raise UsageError("eval needs --task or a config listing evaluations")

    data = args.data or (experiment.dataset if experiment is not None else None)
    archive = DatasetArchive.open(data) if data is not None else None
    checkpoint = _resolve_checkpoint(args.checkpoint)
    out_dir = resolve_output(args.out)

    status.update(f"[dim]Loading {checkpoint}…[/dim]")
    network, meta = load_checkpoint(checkpoint)
    write_resolved_config(
        out_dir,
        {
            "checkpoint": str(checkpoint),
            "checkpoint_iteration": meta.get("iteration"),
            "data": str(data) if data is not None else None,
            "parts": str(args.parts) if args.parts is not None else None,
            "evaluations": [evaluation.model_dump(mode="json") for evaluation in evaluations],
        },
    )

    records = []
    for evaluation in evaluations:
        status.update(f"[dim]Running [bold]{evaluation.label()}[/bold]…[/dim]")
        record = run_evaluation(network, archive, evaluation, parts=args.parts, out_dir=out_dir)
        save_results(out_dir, record)
        records.append(record)

    status.stop()
    for record in records:
        print_metrics(record)
        if record.get("rankings"):
            print_rankings(record["rankings"])


def cmd_report(args: argparse.Namespace, status: Status):
    """
    Handle the 'report' subcommand.

    :param args: Parsed arguments with ``.results``, ``.out`` and ``.queries``.
    :param status: Rich status spinner for progress updates.
    """

    from .report import load_results, write_report

    status.update(f"[dim]Reading results from {args.results}…[/dim]")
    records = load_results(args.results)
    status.update(f"[dim]Rendering {len(records)} result(s)…[/dim]")
    path = write_report(records, resolve_output(args.out), queries=args.queries)
    console.log(f"{OK} Report written to {path}")
