import hashlib
import json
import os
from pathlib import Path

from pydantic import BaseModel, ConfigDict

__all__ = ["OUTPUT_ROOT_ENV", "HashedConfig", "resolve_output", "write_resolved_config"]

OUTPUT_ROOT_ENV = "TRIMODAL_OUTPUT_ROOT"
RESOLVED_CONFIG_NAME = "resolved_config.json"


class HashedConfig(BaseModel):
    """
    Base for run configurations: strict fields and a stable content hash.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """
        SHA-256 hex digest of the config's canonical JSON.
        """

        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def resolve_output(path: str | Path) -> Path:
    """
    Resolve an output path, rooting relative paths at ``$TRIMODAL_OUTPUT_ROOT`` when it is set.

    :param path: Path given by the user.
    :return: The path outputs go to.
    """

    path = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def write_resolved_config(directory: str | Path, config: BaseModel | dict) -> Path:
    """
    Write the exact config of a run beside its outputs.

    :param directory: Output directory (created if missing).
    :param config: A pydantic model or a plain JSON-able dict.
    :return: Path of the written file.
    """

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = config.model_dump(mode="json") if isinstance(config, BaseModel) else config
    target = directory / RESOLVED_CONFIG_NAME
    target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target
