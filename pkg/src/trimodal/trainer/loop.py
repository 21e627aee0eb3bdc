import contextlib
import json
import logging
import time
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .config import TrainConfig, lr_at
from .data import BatchSource, batch_loader, mesh_batch
from ..config import write_resolved_config
from ..contrastive import LossBreakdown, total_loss
from ..dataprep.archive import DatasetArchive
from ..encoders.checkpoint import CHECKPOINT_DIR, checkpoint_name, latest_checkpoint, load_checkpoint, save_checkpoint
from ..encoders.network import TriModalNetwork
from ..errors import DatasetMismatchError, NonFiniteLossError

__all__ = ["FitResult", "TrainState", "build_state", "fit", "train_step"]

log = logging.getLogger(__name__)

METRICS_NAME = "metrics.jsonl"
ABORT_NAME = "abort.json"


@dataclass
class TrainState:
    """
    Everything a training step mutates.

    Attributes:
        iteration: Steps completed.
        network: The six networks.
        optimizer: SGD with momentum over all of their parameters.
    """

    iteration: int
    network: TriModalNetwork
    optimizer: torch.optim.SGD


@dataclass
class FitResult:
    """
    Outcome of :func:`fit`.

    Attributes:
        run_dir: Directory holding checkpoints, metrics and the resolved config.
        iteration: Iterations completed.
        final: Loss components of the last step run (empty if none ran).
        checkpoints: Checkpoint directories written during this call.
    """

    run_dir: Path
    iteration: int
    final: dict[str, float] = field(default_factory=dict)
    checkpoints: list[Path] = field(default_factory=list)


def build_state(config: TrainConfig, faces: int) -> TrainState:
    """
    Fresh networks and optimizer, initialized from ``config.seed``.

    :param config: Run settings.
    :param faces: Face budget of the dataset.
    :return: State at iteration 0.
    """

    torch.manual_seed(config.seed)
    network = TriModalNetwork(config.encoder_config(faces))
    optimizer = torch.optim.SGD(
        network.parameters(),
        lr=config.lr,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )
    return TrainState(iteration=0, network=network, optimizer=optimizer)


def train_step(
    state: TrainState, batch: dict[str, t.Any], config: TrainConfig
) -> tuple[TrainState, LossBreakdown]:
    """
    One forward/backward/update over a tri-modal batch.

    :param state: State to advance (updated in place and returned).
    :param batch: A batch from :class:`BatchSource`.
    :param config: Run settings.
    :return: The advanced state and the step's losses.
    :raises NonFiniteLossError: If any loss component is NaN or infinite;
        parameters are left untouched.
    """

    lr = lr_at(state.iteration, config)
    for group in state.optimizer.param_groups:
        group["lr"] = lr

    state.network.train()
    features = state.network.embed(
        mesh_batch(batch), batch["points"], batch["first_views"], batch["second_views"]
    )
    breakdown = total_loss(*features, tau=config.temperature, weights=config.weights)
    if not breakdown.is_finite():
        raise NonFiniteLossError(state.iteration + 1, list(batch["object_ids"]), breakdown.as_record())

    state.optimizer.zero_grad(set_to_none=True)
    breakdown.total.backward()
    state.optimizer.step()
    state.iteration += 1
    return state, breakdown


@contextlib.contextmanager
def _deterministic_algorithms() -> t.Iterator[None]:
    """
    Turn on torch's deterministic algorithms (warn-only) and restore the
    previous setting on exit.
    """

    enabled = torch.are_deterministic_algorithms_enabled()
    warn_only = torch.is_deterministic_algorithms_warn_only_enabled()
    torch.use_deterministic_algorithms(True, warn_only=True)
    try:
        yield
    finally:
        torch.use_deterministic_algorithms(enabled, warn_only=warn_only)


def _truncate_metrics(path: Path, iteration: int) -> None:
    if not path.is_file():
        return
    kept = [line for line in path.read_text().splitlines() if line.strip() and json.loads(line)["iter"] <= iteration]
    path.write_text("".join(line + "\n" for line in kept))


def fit(
    archive: DatasetArchive,
    config: TrainConfig,
    run_dir: str | Path,
    resume: bool = False,
    on_step: t.Callable[[int, dict[str, float]], None] | None = None,
) -> FitResult:
    """
    Pre-train all six networks on a dataset archive.

    Writes ``resolved_config.json``, one ``metrics.jsonl`` row per iteration
    and a checkpoint every ``config.checkpoint_interval`` iterations and at
    the end. With ``resume``, continues from the latest checkpoint in
    ``run_dir`` and drops metrics rows past it.

    :param archive: Dataset archive to train on.
    :param config: Run settings.
    :param run_dir: Output directory.
    :param resume: Continue from the latest checkpoint if one exists.
    :param on_step: Called with ``(iteration, losses)`` after every step.
    :return: Summary of the run.
    :raises DatasetMismatchError: If the archive can't feed this config, or a
        resumed checkpoint was trained with a different config or dataset.
    :raises NonFiniteLossError: On a NaN/inf loss (``abort.json`` is written first).
    """

    run_dir = Path(run_dir)
    try:
        source = BatchSource(archive, config)
    except ValueError as error:
        raise DatasetMismatchError(str(error)) from None
    faces = int(archive.config.get("faces", len(archive.load_faces(archive.ids()[0]))))

    with _deterministic_algorithms():
        state = build_state(config, faces)
        metadata = {"config_hash": config.content_hash(), "dataset_hash": archive.config_hash, "seed": config.seed}
        metrics_path = run_dir / METRICS_NAME

        checkpoint = latest_checkpoint(run_dir) if resume else None
        if checkpoint is not None:
            _, meta = load_checkpoint(checkpoint, state.network, state.optimizer, restore_rng=True)
            for key in ("config_hash", "dataset_hash"):
                if meta.get(key) != metadata[key]:
                    raise DatasetMismatchError(
                        f"{checkpoint} was written with a different {key.removesuffix('_hash')} "
                        f"({meta.get(key)} != {metadata[key]})"
                    )
            state.iteration = int(meta["iteration"])
            _truncate_metrics(metrics_path, state.iteration)
            log.info(f"resuming from {checkpoint} at iteration {state.iteration}")
        else:
            if resume:
                log.warning(f"no checkpoint under {run_dir}, starting from scratch")
            run_dir.mkdir(parents=True, exist_ok=True)
            metrics_path.write_text("")

        write_resolved_config(run_dir, {"train": config.model_dump(mode="json"), **metadata})
        (run_dir / ABORT_NAME).unlink(missing_ok=True)

        result = FitResult(run_dir=run_dir, iteration=state.iteration)
        interval = config.checkpoint_interval
        with metrics_path.open("a", encoding="utf-8") as metrics:
            for batch in batch_loader(source, start=state.iteration, workers=config.workers):
                lr = lr_at(state.iteration, config)
                started = time.perf_counter()
                try:
                    state, breakdown = train_step(state, batch, config)
                except NonFiniteLossError as error:
                    dump = {
                        "iteration": error.iteration,
                        "object_ids": error.object_ids,
                        "components": error.components,
                    }
                    (run_dir / ABORT_NAME).write_text(json.dumps(dump, indent=2) + "\n")
                    log.error(f"aborting: {error}")
                    raise

                record = breakdown.as_record()
                row = {"iter": state.iteration, "lr": lr, **record, "wall_ms": (time.perf_counter() - started) * 1000.0}
                metrics.write(json.dumps(row) + "\n")
                result.final = record
                if on_step is not None:
                    on_step(state.iteration, record)

                if state.iteration % interval == 0 or state.iteration == config.iterations:
                    metrics.flush()
                    path = save_checkpoint(
                        run_dir / CHECKPOINT_DIR / checkpoint_name(state.iteration),
                        state.network,
                        state.optimizer,
                        iteration=state.iteration,
                        metadata=metadata,
                    )
                    result.checkpoints.append(path)

        result.iteration = state.iteration
        return result
