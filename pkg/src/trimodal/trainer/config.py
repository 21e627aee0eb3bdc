import typing as t

from pydantic import Field, model_validator

from ..config import HashedConfig
from ..contrastive import LossWeights, Temperature
from ..encoders.config import EncoderConfig

__all__ = ["TrainConfig", "lr_at"]


class TrainConfig(HashedConfig):
    """
    Optimization settings of a pre-training run.

    Defaults are the desk-scale setup; :meth:`paper_scale` gives the full one.
    ``checkpoint_every`` left unset resolves to ``max(100, iterations / 20)``,
    lowered to the nearest divisor of ``decay_every``.
    """

    batch_size: int = Field(default=8, ge=1)
    iterations: int = Field(default=2000, ge=1)
    lr: float = Field(default=0.001, gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    weight_decay: float = Field(default=0.0005, ge=0)
    lr_decay: float = Field(default=0.1, gt=0, le=1)
    decay_every: int = Field(default=500, ge=1)
    checkpoint_every: int | None = Field(default=None, ge=1)
    tau: float = Field(default=0.1, gt=0)
    loss_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    seed: int = 0
    width_scale: float = Field(default=0.125, gt=0)
    edge_k: int = Field(default=8, ge=1)
    embed_dim: int = Field(default=128, ge=1)
    views_per_sample: t.Literal[2] = 2
    random_view_assignment: bool = False
    jitter: float = Field(default=0.02, ge=0)
    crop_scale: tuple[float, float] = (0.8, 1.0)
    flip_probability: float = Field(default=0.5, ge=0, le=1)
    workers: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_schedule(self) -> "TrainConfig":
        if self.checkpoint_every is not None and self.decay_every % self.checkpoint_every:
            raise ValueError(
                f"checkpoint_every={self.checkpoint_every} must divide decay_every={self.decay_every}"
            )
        low, high = self.crop_scale
        if not 0 < low <= high <= 1:
            raise ValueError(f"crop_scale must satisfy 0 < low <= high <= 1, got {self.crop_scale}")
        return self

    @classmethod
    def toy(cls, **overrides) -> "TrainConfig":
        return cls(**overrides)

    @classmethod
    def paper_scale(cls, **overrides) -> "TrainConfig":
        settings = {
            "batch_size": 96,
            "iterations": 160_000,
            "decay_every": 40_000,
            "width_scale": 1.0,
            "edge_k": 20,
        }
        return cls(**{**settings, **overrides})

    def content_hash(self) -> str:
        """
        Hash of every field that changes the trained weights (``workers`` doesn't).
        """

        return self.model_copy(update={"workers": 0}).config_hash()

    @property
    def checkpoint_interval(self) -> int:
        if self.checkpoint_every is not None:
            return self.checkpoint_every
        interval = min(max(100, self.iterations // 20), self.decay_every)
        while self.decay_every % interval:
            interval -= 1
        return interval

    @property
    def temperature(self) -> Temperature:
        return Temperature(self.tau)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(*self.loss_weights)

    def encoder_config(self, faces: int) -> EncoderConfig:
        """
        Architecture for this run, given the archive's face budget.
        """

        return EncoderConfig(width_scale=self.width_scale, k=self.edge_k, faces=faces, embed_dim=self.embed_dim)


def lr_at(iteration: int, config: TrainConfig) -> float:
    """
    Step-decayed learning rate: ``lr * lr_decay ** floor(iteration / decay_every)``.

    :param iteration: Iterations completed so far (>= 0).
    :param config: Run settings.
    :return: Learning rate for the next step.
    """

    if iteration < 0:
        raise ValueError("iteration must be non-negative")
    return config.lr * config.lr_decay ** (iteration // config.decay_every)
