"""
Temperature-scaled cosine similarity and the in-batch contrastive losses.

For anchors ``A`` and positives ``P`` (row ``i`` of each from the same
object), the per-direction loss of row ``i`` is the negative log of

    exp(s(A_i, P_i)) / (sum_{j != i} exp(s(A_i, A_j)) + sum_j exp(s(A_i, P_j)))

averaged over rows, where ``s`` is cosine similarity divided by the
temperature. The positive pair sits inside its own denominator, so a batch
of one object scores exactly zero.
"""

import math
import typing as t
from dataclasses import dataclass

import torch

__all__ = [
    "LossBreakdown",
    "LossWeights",
    "Temperature",
    "pair_loss",
    "reference_pair_loss",
    "similarity",
    "similarity_matrix",
    "symmetric_pair_loss",
    "total_loss",
]

COMPONENTS = ("L_MP", "L_MI", "L_PI", "L_II")


@dataclass(frozen=True)
class Temperature:
    """
    Divisor applied to cosine similarities.
    """

    tau: float = 0.1

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")

    def __float__(self) -> float:
        return float(self.tau)


@dataclass(frozen=True)
class LossWeights:
    """
    Per-component weights of the total loss; all 1 by default.
    """

    mesh_point: float = 1.0
    mesh_image: float = 1.0
    point_image: float = 1.0
    image_image: float = 1.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.mesh_point, self.mesh_image, self.point_image, self.image_image


@dataclass
class LossBreakdown:
    """
    The four component losses and their weighted sum.

    Attributes:
        L_MP: Mesh / point-cloud loss.
        L_MI: Mesh / first-view loss.
        L_PI: Point-cloud / second-view loss.
        L_II: First-view / second-view loss.
        total: Weighted sum of the four (differentiable).
    """

    L_MP: torch.Tensor
    L_MI: torch.Tensor
    L_PI: torch.Tensor
    L_II: torch.Tensor
    total: torch.Tensor

    def as_record(self) -> dict[str, float]:
        return {name: float(getattr(self, name).detach()) for name in (*COMPONENTS, "total")}

    def is_finite(self) -> bool:
        return all(math.isfinite(value) for value in self.as_record().values())


def _tau(tau: float | Temperature) -> float:
    return float(tau if isinstance(tau, Temperature) else Temperature(tau))


def _unit_rows(features: torch.Tensor, name: str) -> torch.Tensor:
    norms = torch.linalg.vector_norm(features, dim=-1, keepdim=True)
    if bool((norms == 0).any()):
        raise ValueError(f"{name} contains a zero-norm vector")
    return features / norms


def similarity(a: torch.Tensor, p: torch.Tensor, tau: float | Temperature = 0.1) -> torch.Tensor:
    """
    Cosine similarity of two vectors divided by the temperature.

    :param a: ``(D,)`` vector.
    :param p: ``(D,)`` vector.
    :param tau: Temperature.
    :return: Scalar tensor in ``[-1/tau, 1/tau]``.
    :raises ValueError: On a zero vector or a non-positive temperature.
    """

    return (_unit_rows(a, "a") * _unit_rows(p, "p")).sum(-1) / _tau(tau)


def similarity_matrix(a: torch.Tensor, p: torch.Tensor, tau: float | Temperature = 0.1) -> torch.Tensor:
    """
    All pairwise similarities between rows of ``a`` and rows of ``p``.

    :param a: ``(k, D)`` features.
    :param p: ``(m, D)`` features.
    :param tau: Temperature.
    :return: ``(k, m)`` similarities.
    :raises ValueError: On a zero row, mismatched widths or a non-positive temperature.
    """

    if a.dim() != 2 or p.dim() != 2 or a.shape[1] != p.shape[1]:
        raise ValueError(f"cannot compare features of shape {tuple(a.shape)} and {tuple(p.shape)}")
    return _unit_rows(a, "anchors") @ _unit_rows(p, "positives").T / _tau(tau)


def pair_loss(anchors: torch.Tensor, positives: torch.Tensor, tau: float | Temperature = 0.1) -> torch.Tensor:
    """
    One-directional contrastive loss of an anchor batch against its positives.

    :param anchors: ``(k, D)`` anchor features.
    :param positives: ``(k, D)`` positive features, row-aligned with ``anchors``.
    :param tau: Temperature.
    :return: Scalar loss, ``>= 0``.
    :raises ValueError: On mismatched shapes, an empty batch or a zero row.
    """

    if anchors.shape != positives.shape or anchors.dim() != 2 or len(anchors) == 0:
        raise ValueError(
            f"anchors {tuple(anchors.shape)} and positives {tuple(positives.shape)} must be equal, non-empty (k, D)"
        )
    within = similarity_matrix(anchors, anchors, tau)
    across = similarity_matrix(anchors, positives, tau)
    own = torch.eye(len(anchors), dtype=torch.bool, device=anchors.device)
    within = within.masked_fill(own, float("-inf"))
    denominator = torch.logsumexp(torch.cat([within, across], dim=1), dim=1)
    return (denominator - across.diagonal()).mean()


def symmetric_pair_loss(a: torch.Tensor, p: torch.Tensor, tau: float | Temperature = 0.1) -> torch.Tensor:
    """
    ``pair_loss(a, p) + pair_loss(p, a)``.
    """

    return pair_loss(a, p, tau) + pair_loss(p, a, tau)


def total_loss(
    f_m: torch.Tensor,
    f_p: torch.Tensor,
    f_i1: torch.Tensor,
    f_i2: torch.Tensor,
    tau: float | Temperature = 0.1,
    weights: LossWeights = LossWeights(),
) -> LossBreakdown:
    """
    The joint loss over mesh/point, mesh/view-1, point/view-2 and view-1/view-2 pairs.

    :param f_m: ``(k, D)`` mesh features.
    :param f_p: ``(k, D)`` point-cloud features.
    :param f_i1: ``(k, D)`` first-view features.
    :param f_i2: ``(k, D)`` second-view features.
    :param tau: Temperature.
    :param weights: Component weights.
    :return: The four components and their weighted sum.
    :raises ValueError: If the four batches don't share one shape.
    """

    shapes = {tuple(f.shape) for f in (f_m, f_p, f_i1, f_i2)}
    if len(shapes) != 1:
        raise ValueError(f"feature batches disagree in shape: {sorted(shapes)}")

    components = (
        symmetric_pair_loss(f_m, f_p, tau),
        symmetric_pair_loss(f_m, f_i1, tau),
        symmetric_pair_loss(f_p, f_i2, tau),
        symmetric_pair_loss(f_i1, f_i2, tau),
    )
    total = sum(weight * component for weight, component in zip(weights.as_tuple(), components))
    return LossBreakdown(*components, total=total)


def reference_pair_loss(
    anchors: t.Sequence[t.Sequence[float]],
    positives: t.Sequence[t.Sequence[float]],
    tau: float = 0.1,
) -> float:
    """
    Scalar double-loop evaluation of :func:`pair_loss`, for cross-checking.
    """

    def cosine(u, v):
        dot = sum(x * y for x, y in zip(u, v))
        return dot / (math.sqrt(sum(x * x for x in u)) * math.sqrt(sum(y * y for y in v)))

    k = len(anchors)
    loss = 0.0
    for i in range(k):
        numerator = math.exp(cosine(anchors[i], positives[i]) / tau)
        denominator = sum(math.exp(cosine(anchors[i], anchors[j]) / tau) for j in range(k) if j != i)
        denominator += sum(math.exp(cosine(anchors[i], positives[j]) / tau) for j in range(k))
        loss -= math.log(numerator / denominator)
    return loss / k
