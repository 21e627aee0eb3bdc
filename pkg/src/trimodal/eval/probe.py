import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.svm import LinearSVC

from .features import FeatureTable

__all__ = [
    "FewShotResult",
    "few_shot_probe",
    "linear_probe",
    "probe_chance_baseline",
    "probe_predictions",
]

log = logging.getLogger(__name__)


@dataclass
class FewShotResult:
    """
    Accuracies of a few-shot protocol.

    Attributes:
        shots: Training examples per class.
        accuracies: One accuracy per round.
    """

    shots: int
    accuracies: list[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))


def _check_tables(train: FeatureTable, test: FeatureTable) -> None:
    if train.modality != test.modality:
        raise ValueError(f"train features are {train.modality}, test features are {test.modality}")
    if train.features.shape[1] != test.features.shape[1]:
        raise ValueError("train and test features differ in width")
    missing = sorted(set(test.labels.tolist()) - set(train.labels.tolist()))
    if missing:
        raise ValueError(f"class(es) {missing} have no training examples")


def probe_predictions(train: FeatureTable, test: FeatureTable, C: float = 1.0) -> np.ndarray:
    """
    Fit a one-vs-rest linear SVM (hinge loss) on ``train`` and predict ``test``.

    Features are used as-is, without standardization.

    :param train: Labelled training rows.
    :param test: Rows to classify.
    :param C: Regularization strength.
    :return: ``(len(test),)`` predicted labels.
    :raises ValueError: If the tables disagree or a test class has no training rows.
    """

    _check_tables(train, test)
    classes = np.unique(train.labels)
    if len(classes) == 1:
        return np.full(len(test), classes[0])
    classifier = LinearSVC(C=C, loss="hinge", dual=True, max_iter=100_000, random_state=0)
    classifier.fit(train.features, train.labels)
    return classifier.predict(test.features)


def linear_probe(train: FeatureTable, test: FeatureTable, C: float = 1.0) -> float:
    """
    Accuracy of a linear SVM trained on frozen features.

    :param train: Labelled training rows.
    :param test: Labelled test rows.
    :param C: Regularization strength.
    :return: Fraction of test rows classified correctly.
    """

    predictions = probe_predictions(train, test, C)
    return float(np.mean(predictions == test.labels))


def few_shot_probe(
    train: FeatureTable,
    test: FeatureTable,
    shots: int,
    rounds: int = 10,
    seed: int = 0,
    C: float = 1.0,
) -> FewShotResult:
    """
    Linear probes trained on ``shots`` examples per class, repeated over seeded rounds.

    Every round draws its examples independently and tests on the full test table.

    :param train: Pool to draw training examples from.
    :param test: Test rows.
    :param shots: Examples per class.
    :param rounds: Number of draws.
    :param seed: Seed of the draws.
    :param C: Regularization strength.
    :return: Per-round accuracies.
    :raises ValueError: If a class has fewer than ``shots`` examples.
    """

    if shots < 1 or rounds < 1:
        raise ValueError("shots and rounds must be positive")
    members = {label: np.flatnonzero(train.labels == label) for label in np.unique(train.labels)}
    short = {int(label): len(rows) for label, rows in members.items() if len(rows) < shots}
    if short:
        raise ValueError(f"{shots}-shot sampling needs {shots} examples per class, have {short}")

    result = FewShotResult(shots=shots)
    for round_index in range(rounds):
        rng = np.random.default_rng([seed, round_index])
        chosen = np.sort(np.concatenate([rng.choice(rows, size=shots, replace=False) for rows in members.values()]))
        result.accuracies.append(linear_probe(train.subset(chosen), test, C))
    log.debug(f"{shots}-shot over {rounds} round(s): {result.mean:.4f} +- {result.std:.4f}")
    return result


def probe_chance_baseline(
    train: FeatureTable,
    test: FeatureTable,
    permutations: int = 20,
    seed: int = 0,
    C: float = 1.0,
) -> tuple[float, float]:
    """
    Linear-probe accuracy with training labels randomly permuted.

    :return: Mean and standard deviation over ``permutations`` shuffles.
    """

    rng = np.random.default_rng(seed)
    accuracies = [
        linear_probe(train.with_labels(rng.permutation(train.labels)), test, C) for _ in range(permutations)
    ]
    return float(np.mean(accuracies)), float(np.std(accuracies))
