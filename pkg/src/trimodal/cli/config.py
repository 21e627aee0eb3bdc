import typing as t
from pathlib import Path

from pydantic import Field, model_validator

from ..config import HashedConfig
from ..dataprep.models import Modality
from ..eval.segmentation import Mode
from ..trainer.config import TrainConfig

__all__ = ["TASKS", "EvalConfig", "ExperimentConfig", "Task"]

Task = t.Literal["probe", "fewshot", "partseg", "retrieval"]
TASKS: tuple[str, ...] = t.get_args(Task)


class EvalConfig(HashedConfig):
    """
    One evaluation protocol and its settings.

    Only the fields of the selected ``task`` matter: ``modality`` for
    ``probe``/``fewshot``, ``source``/``target``/``views`` for ``retrieval``,
    ``fraction``/``mode`` for ``partseg``.
    """

    task: Task
    modality: Modality = Modality.POINT
    source: Modality = Modality.IMAGE
    target: Modality = Modality.MESH
    views: int = Field(default=1, ge=1)
    shots: int = Field(default=5, ge=1)
    rounds: int = Field(default=10, ge=1)
    fraction: float = Field(default=0.01, gt=0, le=1)
    mode: Mode = "frozen"
    iterations: int = Field(default=300, ge=1)
    baseline: bool = False
    seed: int = 0

    def label(self) -> str:
        """
        Short name used for result files, e.g. ``retrieval_image-mesh_v4``.
        """

        match self.task:
            case "probe":
                return f"probe_{self.modality}"
            case "fewshot":
                return f"fewshot_{self.modality}_{self.shots}shot"
            case "partseg":
                return f"partseg_{self.mode}_{self.fraction:g}"
            case _:
                return f"retrieval_{self.source}-{self.target}_v{self.views}"


class ExperimentConfig(HashedConfig):
    """
    A whole experiment: the dataset, the pre-training run and the evaluations to run on it.

    Attributes:
        dataset: Archive directory (``--data`` overrides it).
        train: Pre-training settings.
        evaluations: Protocols ``eval --config`` runs in order.
        output_dir: Run directory, relative to ``$TRIMODAL_OUTPUT_ROOT`` when that is set.
        seed: Seed of pre-training and of every evaluation.
    """

    dataset: str | None = None
    train: TrainConfig = Field(default_factory=TrainConfig.toy)
    evaluations: tuple[EvalConfig, ...] = ()
    output_dir: str = "runs/experiment"
    seed: int = 0

    @model_validator(mode="after")
    def _share_seed(self) -> "ExperimentConfig":
        # the experiment seed wins over the seeds nested in its sections
        if self.train.seed != self.seed:
            object.__setattr__(self, "train", self.train.model_copy(update={"seed": self.seed}))
        evaluations = tuple(
            evaluation if evaluation.seed == self.seed else evaluation.model_copy(update={"seed": self.seed})
            for evaluation in self.evaluations
        )
        object.__setattr__(self, "evaluations", evaluations)
        return self

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        """
        Read and validate a JSON config file.

        :raises FileNotFoundError: If ``path`` doesn't exist.
        :raises pydantic.ValidationError: If the file doesn't match the schema.
        """

        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
