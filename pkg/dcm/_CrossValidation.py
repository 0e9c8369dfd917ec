import enum
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.model_selection import KFold

from ._ChoiceModel import UtilitySpec, as_dataset, predict_accuracy
from ._Estimation import EstimationResult, estimate

logger = logging.getLogger(__name__)


class Grouping(enum.Enum):
    BY_INDIVIDUAL = "individual"
    BY_OBSERVATION = "observation"


@dataclass
class FoldResult:
    fold: int
    held_out_groups: list
    n_train: int
    n_test: int
    estimation: EstimationResult
    accuracy: float

    @property
    def params(self):
        return self.estimation.params


@dataclass
class CVResult:
    """Per-fold fits and held-out accuracies.

    ``mean_accuracy`` averages the fold accuracies; ``pooled_accuracy`` counts
    correct predictions over all held-out observations together.
    """

    folds: list[FoldResult]
    mean_accuracy: float
    pooled_accuracy: float
    grouping: Grouping
    seed: int


def fold_assignment(groups: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle of the distinct groups into k near-equal parts."""
    distinct = np.array(sorted(set(groups.tolist()), key=lambda g: (str(type(g)), g)), dtype=object)
    if distinct.size < k:
        raise ValueError(f"Only {distinct.size} groups for {k} folds")
    splitter = KFold(n_splits=k, shuffle=True, random_state=seed)
    return [distinct[test] for _, test in splitter.split(distinct)]


def k_fold_cv(
    spec: UtilitySpec,
    observations,
    k: int = 5,
    grouping: Grouping = Grouping.BY_INDIVIDUAL,
    rng: np.random.Generator | int | None = None,
) -> CVResult:
    """Estimate on k - 1 folds and score on the held-out fold, k times.

    :param spec: Utility specification
    :param observations: List of ChoiceObservation or a ChoiceDataset
    :param k: Number of folds (at least 2)
    :param grouping: BY_INDIVIDUAL keeps all observations of one individual in one fold
    :param rng: Generator (or integer seed) that fixes the partition
    :return: CVResult
    """
    if k < 2:
        raise ValueError("k-fold cross-validation needs k >= 2")
    data = as_dataset(spec, observations)
    if isinstance(rng, np.random.Generator):
        seed = int(rng.integers(0, 2**31 - 1))
    else:
        seed = int(rng or 0)

    if grouping is Grouping.BY_INDIVIDUAL:
        groups = data.individual_ids
    else:
        groups = np.arange(len(data), dtype=object)
    partition = fold_assignment(groups, k, seed)

    folds = []
    correct = 0
    for index, held_out in enumerate(partition):
        test_mask = np.isin(groups, held_out)
        train, test = data.subset(~test_mask), data.subset(test_mask)
        fit = estimate(spec, train)
        accuracy = predict_accuracy(fit.model, test)
        correct += int(round(accuracy * len(test)))
        logger.info("Fold %d/%d: %d train, %d test, accuracy %.3f", index + 1, k, len(train), len(test), accuracy)
        folds.append(FoldResult(index, list(held_out), len(train), len(test), fit, accuracy))

    return CVResult(
        folds=folds,
        mean_accuracy=float(np.mean([f.accuracy for f in folds])),
        pooled_accuracy=correct / len(data),
        grouping=grouping,
        seed=seed,
    )
