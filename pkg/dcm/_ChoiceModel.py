import logging
import warnings
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

logger = logging.getLogger(__name__)


class DimensionError(ValueError):
    """Feature matrix or parameter vector does not match the utility specification."""


class EmptyObservationsWarning(UserWarning):
    """Raised as a warning when a likelihood is evaluated on no observations."""


@dataclass(frozen=True)
class UtilitySpec:
    """Names and shape of a linear-in-parameters utility.

    :param factor_names: Factor identifiers, one beta each (K of them)
    :param alternatives: Alternative identifiers in index order (J of them)
    :param asc_reference: Index of the alternative whose ASC is pinned to 0
    """

    factor_names: tuple[str, ...]
    alternatives: tuple[str, ...]
    asc_reference: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "factor_names", tuple(self.factor_names))
        object.__setattr__(self, "alternatives", tuple(self.alternatives))
        if len(self.factor_names) < 1:
            raise ValueError("A utility spec needs at least one factor")
        if len(self.alternatives) < 2:
            raise ValueError("A utility spec needs at least two alternatives")
        if len(set(self.factor_names)) != len(self.factor_names):
            raise ValueError(f"Duplicate factor names in {self.factor_names}")
        if len(set(self.alternatives)) != len(self.alternatives):
            raise ValueError(f"Duplicate alternatives in {self.alternatives}")
        if not 0 <= self.asc_reference < len(self.alternatives):
            raise ValueError(f"asc_reference {self.asc_reference} is not an alternative index")

    @property
    def n_factors(self) -> int:
        return len(self.factor_names)

    @property
    def n_alternatives(self) -> int:
        return len(self.alternatives)

    @property
    def n_free(self) -> int:
        """K betas plus J - 1 free ASCs."""
        return self.n_factors + self.n_alternatives - 1

    @property
    def free_asc_indices(self) -> list[int]:
        return [j for j in range(self.n_alternatives) if j != self.asc_reference]

    @property
    def parameter_names(self) -> list[str]:
        """Names of the free parameters in the order used by gradients and estimates."""
        return [f"beta_{k}" for k in self.factor_names] + [f"ASC_{self.alternatives[j]}" for j in self.free_asc_indices]

    def check_features(self, features: np.ndarray) -> np.ndarray:
        """Validate a J x K (or N x J x K) feature array and return it as float64."""
        x = np.asarray(features, dtype=np.float64)
        expected = (self.n_alternatives, self.n_factors)
        if x.ndim < 2 or x.shape[-2:] != expected:
            raise DimensionError(f"Features of shape {x.shape} do not match J x K = {expected}")
        if not np.all(np.isfinite(x)):
            raise DimensionError("Feature values must be finite")
        return x


@dataclass(frozen=True)
class ParameterVector:
    """Betas shared by all alternatives plus one ASC per alternative."""

    betas: np.ndarray
    ascs: np.ndarray

    def __post_init__(self) -> None:
        betas = np.asarray(self.betas, dtype=np.float64).reshape(-1)
        ascs = np.asarray(self.ascs, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(betas)) and np.all(np.isfinite(ascs))):
            raise ValueError("Parameter values must be finite")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "ascs", ascs)

    @classmethod
    def zeros(cls, spec: UtilitySpec) -> "ParameterVector":
        return cls(np.zeros(spec.n_factors), np.zeros(spec.n_alternatives))

    @classmethod
    def from_free(cls, spec: UtilitySpec, theta: Sequence[float]) -> "ParameterVector":
        """Build from the free-parameter vector (K betas, then the J - 1 unpinned ASCs)."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (spec.n_free,):
            raise DimensionError(f"Expected {spec.n_free} free parameters, got {theta.shape}")
        ascs = np.zeros(spec.n_alternatives)
        ascs[spec.free_asc_indices] = theta[spec.n_factors:]
        return cls(theta[: spec.n_factors].copy(), ascs)

    def free(self, spec: UtilitySpec) -> np.ndarray:
        return np.concatenate([self.betas, self.ascs[spec.free_asc_indices]])


@dataclass(frozen=True)
class ChoiceObservation:
    """One decision event: who chose, when, what they saw and what they picked."""

    individual_id: Hashable
    time: float
    features: np.ndarray
    chosen: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))


@dataclass
class ChoiceDataset:
    """Columnar form of many observations sharing one utility spec.

    ``features`` has shape N x J x K, ``chosen`` shape N.
    """

    spec: UtilitySpec
    individual_ids: np.ndarray
    times: np.ndarray
    features: np.ndarray
    chosen: np.ndarray

    def __post_init__(self) -> None:
        self.features = self.spec.check_features(self.features).reshape(
            -1, self.spec.n_alternatives, self.spec.n_factors
        )
        self.chosen = np.asarray(self.chosen, dtype=np.int64).reshape(-1)
        self.times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        self.individual_ids = np.asarray(self.individual_ids, dtype=object).reshape(-1)
        n = self.features.shape[0]
        if not (self.chosen.shape[0] == self.times.shape[0] == self.individual_ids.shape[0] == n):
            raise DimensionError("Observation columns have different lengths")
        if n and (self.chosen.min() < 0 or self.chosen.max() >= self.spec.n_alternatives):
            raise DimensionError("Chosen alternative index out of range")

    def __len__(self) -> int:
        return self.features.shape[0]

    @classmethod
    def from_observations(cls, spec: UtilitySpec, observations: Sequence[ChoiceObservation]) -> "ChoiceDataset":
        if not observations:
            return cls.empty(spec)
        return cls(
            spec,
            np.array([o.individual_id for o in observations], dtype=object),
            np.array([o.time for o in observations], dtype=np.float64),
            np.stack([spec.check_features(o.features) for o in observations]),
            np.array([o.chosen for o in observations], dtype=np.int64),
        )

    @classmethod
    def empty(cls, spec: UtilitySpec) -> "ChoiceDataset":
        return cls(
            spec,
            np.empty(0, dtype=object),
            np.empty(0),
            np.empty((0, spec.n_alternatives, spec.n_factors)),
            np.empty(0, dtype=np.int64),
        )

    def subset(self, index: np.ndarray) -> "ChoiceDataset":
        return ChoiceDataset(
            self.spec, self.individual_ids[index], self.times[index], self.features[index], self.chosen[index]
        )

    def observations(self) -> list[ChoiceObservation]:
        return [
            ChoiceObservation(self.individual_ids[i], float(self.times[i]), self.features[i].copy(), int(self.chosen[i]))
            for i in range(len(self))
        ]


@dataclass
class ChoiceModel:
    """A utility spec with its parameters. The Gumbel term is implicit in the logit formulas."""

    spec: UtilitySpec
    params: ParameterVector = field(default=None)

    def __post_init__(self) -> None:
        if self.params is None:
            self.params = ParameterVector.zeros(self.spec)
        if self.params.betas.shape != (self.spec.n_factors,) or self.params.ascs.shape != (self.spec.n_alternatives,):
            raise DimensionError("Parameter dimensions do not match the utility spec")
        if self.params.ascs[self.spec.asc_reference] != 0.0:
            raise ValueError("The reference alternative's ASC must be 0")

    @classmethod
    def from_values(
        cls,
        factor_names: Sequence[str],
        alternatives: Sequence[str],
        betas: Sequence[float],
        ascs: Sequence[float],
        asc_reference: int = 0,
    ) -> "ChoiceModel":
        spec = UtilitySpec(tuple(factor_names), tuple(alternatives), asc_reference)
        return cls(spec, ParameterVector(np.asarray(betas), np.asarray(ascs)))


def as_dataset(model_or_spec: ChoiceModel | UtilitySpec, observations) -> ChoiceDataset:
    spec = model_or_spec.spec if isinstance(model_or_spec, ChoiceModel) else model_or_spec
    if isinstance(observations, ChoiceDataset):
        if observations.spec.n_alternatives != spec.n_alternatives or observations.spec.n_factors != spec.n_factors:
            raise DimensionError("Dataset dimensions do not match the model")
        return observations
    return ChoiceDataset.from_observations(spec, list(observations))


def deterministic_utility(model: ChoiceModel, features: np.ndarray) -> np.ndarray:
    """V[j] = ASC[j] + sum_k beta[k] x[j][k]. Accepts J x K or N x J x K."""
    x = model.spec.check_features(features)
    return x @ model.params.betas + model.params.ascs


def choice_probabilities(model: ChoiceModel, features: np.ndarray) -> np.ndarray:
    """Logit probabilities of every alternative, max-shifted for stability."""
    return softmax(deterministic_utility(model, features), axis=-1)


def choice_probabilities_batch(model: ChoiceModel, observations) -> np.ndarray:
    """N x J probability matrix for a dataset."""
    data = as_dataset(model, observations)
    return choice_probabilities(model, data.features)


def _inverse_cdf(probabilities: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probabilities, axis=-1)
    index = (u[..., None] >= cdf).sum(axis=-1)
    return np.minimum(index, probabilities.shape[-1] - 1)


def sample_choice(model: ChoiceModel, features: np.ndarray, rng: np.random.Generator) -> int:
    """Draw one alternative with the model's probabilities (inverse CDF in alternative order)."""
    probabilities = choice_probabilities(model, features)
    return int(_inverse_cdf(probabilities, np.asarray(rng.random())))


def sample_choices(model: ChoiceModel, features: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized ``sample_choice`` over an N x J x K array, one uniform per row."""
    probabilities = choice_probabilities(model, features)
    return _inverse_cdf(probabilities, rng.random(probabilities.shape[0]))


def _log_probabilities(model: ChoiceModel, data: ChoiceDataset) -> np.ndarray:
    v = deterministic_utility(model, data.features)
    return v - logsumexp(v, axis=1, keepdims=True)


def log_likelihood(model: ChoiceModel, observations) -> float:
    """Sum over observations of log P(chosen). Returns 0.0 with a warning for an empty set."""
    data = as_dataset(model, observations)
    if len(data) == 0:
        logger.warning("Log-likelihood of an empty observation list is defined as 0")
        warnings.warn("No observations; log-likelihood defined as 0", EmptyObservationsWarning, stacklevel=2)
        return 0.0
    log_p = _log_probabilities(model, data)
    return float(log_p[np.arange(len(data)), data.chosen].sum())


def design_tensor(spec: UtilitySpec, features: np.ndarray) -> np.ndarray:
    """N x J x P derivative of V with respect to the free parameters."""
    n = features.shape[0]
    asc_part = np.zeros((n, spec.n_alternatives, spec.n_alternatives - 1))
    for p, j in enumerate(spec.free_asc_indices):
        asc_part[:, j, p] = 1.0
    return np.concatenate([features, asc_part], axis=2)


def ll_gradient(model: ChoiceModel, observations) -> np.ndarray:
    """Score of the log-likelihood over the free parameters (K betas, then J - 1 ASCs)."""
    data = as_dataset(model, observations)
    if len(data) == 0:
        warnings.warn("No observations; gradient defined as 0", EmptyObservationsWarning, stacklevel=2)
        return np.zeros(model.spec.n_free)
    z = design_tensor(model.spec, data.features)
    p = np.exp(_log_probabilities(model, data))
    y = np.zeros_like(p)
    y[np.arange(len(data)), data.chosen] = 1.0
    return np.einsum("nj,njp->p", y - p, z)


def ll_hessian(model: ChoiceModel, observations) -> np.ndarray:
    """Hessian of the log-likelihood over the free parameters (negative semi-definite)."""
    data = as_dataset(model, observations)
    z = design_tensor(model.spec, data.features)
    p = np.exp(_log_probabilities(model, data))
    z_bar = np.einsum("nj,njp->np", p, z)
    centered = z - z_bar[:, None, :]
    return -np.einsum("nj,njp,njq->pq", p, centered, centered)


def predict_accuracy(model: ChoiceModel, observations) -> float:
    """Share of observations whose most probable alternative was the chosen one (ties to lowest index)."""
    data = as_dataset(model, observations)
    if len(data) == 0:
        raise ValueError("predict_accuracy needs at least one observation")
    predicted = np.argmax(deterministic_utility(model, data.features), axis=1)
    return float(np.mean(predicted == data.chosen))


def expected_accuracy(model: ChoiceModel, observations) -> float:
    """Accuracy the argmax rule reaches in expectation when choices follow the model."""
    data = as_dataset(model, observations)
    if len(data) == 0:
        raise ValueError("expected_accuracy needs at least one observation")
    return float(np.mean(choice_probabilities(model, data.features).max(axis=1)))


def null_log_likelihood(spec: UtilitySpec, observations) -> float:
    """Log-likelihood of the zero-parameter model."""
    return log_likelihood(ChoiceModel(spec), as_dataset(spec, observations))
