"""
Checkpoint directories.

A checkpoint is a directory with ``meta.json`` (iteration, hashes, seed,
encoder config, optimizer hyperparameters) and one tensor blob per
parameter/buffer, per momentum buffer and for the torch RNG state, in the
same blob format as dataset archives.
"""

import dataclasses
import json
import logging
import shutil
import typing as t
from pathlib import Path

import numpy as np
import torch

from .config import EncoderConfig
from .network import TriModalNetwork
from ..dataprep.archive import read_tensor, write_tensor

__all__ = [
    "CHECKPOINT_DIR",
    "checkpoint_name",
    "encoder_config_from_dict",
    "latest_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
]

log = logging.getLogger(__name__)

CHECKPOINT_DIR = "checkpoints"
META_NAME = "meta.json"


def checkpoint_name(iteration: int) -> str:
    return f"iter_{iteration:08d}"


def encoder_config_from_dict(record: dict[str, t.Any]) -> EncoderConfig:
    """
    Rebuild an :class:`EncoderConfig` from its JSON form (lists back to tuples).
    """

    def as_tuple(value):
        return tuple(as_tuple(v) for v in value) if isinstance(value, list) else value

    return EncoderConfig(**{name: as_tuple(value) for name, value in record.items()})


def _to_numpy(tensor: torch.Tensor) -> np.ndarray:
    return tensor.detach().cpu().numpy()


def save_checkpoint(
    directory: str | Path,
    network: TriModalNetwork,
    optimizer: torch.optim.Optimizer | None = None,
    iteration: int = 0,
    metadata: dict[str, t.Any] | None = None,
) -> Path:
    """
    Write a checkpoint directory, replacing any previous one at the same path.

    The directory is assembled under a temporary name and renamed into
    place, so an interrupted save never leaves a half-written checkpoint.

    :param directory: Checkpoint directory.
    :param network: Network whose state to save (BN statistics included).
    :param optimizer: Optimizer whose momentum buffers to save.
    :param iteration: Iterations completed.
    :param metadata: Extra JSON-able fields for ``meta.json``.
    :return: The checkpoint directory.
    """

    directory = Path(directory)
    staging = directory.with_name(directory.name + ".partial")
    shutil.rmtree(staging, ignore_errors=True)

    tensors = {}
    for name, tensor in network.state_dict().items():
        relative = f"params/{name}.bin"
        write_tensor(staging / relative, _to_numpy(tensor))
        tensors[name] = relative

    optimizer_meta = None
    if optimizer is not None:
        state = optimizer.state_dict()
        momentum = {}
        for index, entry in state["state"].items():
            buffer = entry.get("momentum_buffer")
            if buffer is not None:
                relative = f"momentum/{index}.bin"
                write_tensor(staging / relative, _to_numpy(buffer))
                momentum[str(index)] = relative
        optimizer_meta = {"param_groups": state["param_groups"], "momentum": momentum}

    write_tensor(staging / "rng/torch.bin", _to_numpy(torch.get_rng_state()))
    meta = {
        "iteration": iteration,
        "encoder_config": dataclasses.asdict(network.config),
        "tensors": tensors,
        "optimizer": optimizer_meta,
        **(metadata or {}),
    }
    (staging / META_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    shutil.rmtree(directory, ignore_errors=True)
    staging.rename(directory)
    log.debug(f"saved checkpoint at iteration {iteration} to {directory}")
    return directory


def load_checkpoint(
    directory: str | Path,
    network: TriModalNetwork | None = None,
    optimizer: torch.optim.Optimizer | None = None,
    restore_rng: bool = False,
) -> tuple[TriModalNetwork, dict[str, t.Any]]:
    """
    Load a checkpoint directory.

    :param directory: Directory written by :func:`save_checkpoint`.
    :param network: Network to load into; built from the stored encoder
        config when None.
    :param optimizer: Optimizer whose momentum buffers to restore.
    :param restore_rng: Also restore the global torch RNG state.
    :return: The network and the checkpoint metadata.
    :raises FileNotFoundError: If ``meta.json`` is missing.
    """

    directory = Path(directory)
    meta_path = directory / META_NAME
    if not meta_path.is_file():
        raise FileNotFoundError(f"no checkpoint at {directory}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))

    if network is None:
        network = TriModalNetwork(encoder_config_from_dict(meta["encoder_config"]))
    state = {name: torch.from_numpy(read_tensor(directory / path)) for name, path in meta["tensors"].items()}
    network.load_state_dict(state)

    if optimizer is not None and meta.get("optimizer"):
        stored = meta["optimizer"]
        optimizer_state = {
            "state": {
                int(index): {"momentum_buffer": torch.from_numpy(read_tensor(directory / path))}
                for index, path in stored["momentum"].items()
            },
            "param_groups": stored["param_groups"],
        }
        optimizer.load_state_dict(optimizer_state)

    if restore_rng:
        torch.set_rng_state(torch.from_numpy(read_tensor(directory / "rng/torch.bin")))
    return network, meta


def latest_checkpoint(run_dir: str | Path) -> Path | None:
    """
    The checkpoint with the highest iteration under ``run_dir/checkpoints``, if any.
    """

    root = Path(run_dir) / CHECKPOINT_DIR
    candidates = sorted(p for p in root.glob("iter_*") if (p / META_NAME).is_file()) if root.is_dir() else []
    return candidates[-1] if candidates else None
