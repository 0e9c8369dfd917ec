"""Published parameter sets and synthetic observation generators.

The measured route-choice data behind the two parameter sets is not public, so
estimation is exercised on observations sampled from these models over
representative feature distributions.
"""
import numpy as np

from ._ChoiceModel import ChoiceDataset, ChoiceModel, sample_choices

EVACUATION_FACTORS = ("DIST", "CH", "NF", "NB")
FIREWORK_FACTORS = ("DIST", "GUIDE", "ATT")
ROUTES = ("Route1", "Route2")


def evacuation_model() -> ChoiceModel:
    """Route choice at the theater exit: distance, inertia and front/back herding."""
    return ChoiceModel.from_values(EVACUATION_FACTORS, ROUTES, [-1.33, 1.13, 0.202, -0.105], [0.0, 2.33])


def firework_model() -> ChoiceModel:
    """One-shot junction choice on the way to the station: distance (km), guidance, stalls."""
    return ChoiceModel.from_values(FIREWORK_FACTORS, ROUTES, [-9.76, 1.26, 0.021], [0.0, 2.929])


def evacuation_features(n: int, rng: np.random.Generator, n_alternatives: int = 2) -> np.ndarray:
    """Feature draws for the evacuation spec (N x J x 4)."""
    x = np.zeros((n, n_alternatives, 4))
    x[:, :, 0] = rng.uniform(0.5, 4.0, size=(n, n_alternatives))
    previous = rng.integers(-1, n_alternatives, size=n)
    has_previous = previous >= 0
    x[np.flatnonzero(has_previous), previous[has_previous], 1] = 1.0
    x[:, :, 2] = rng.poisson(1.5, size=(n, n_alternatives))
    x[:, :, 3] = rng.poisson(1.5, size=(n, n_alternatives))
    return x


def firework_features(n: int, rng: np.random.Generator, n_alternatives: int = 2) -> np.ndarray:
    """Feature draws for the firework spec (N x J x 3); DIST in km, detours longer than Route 1."""
    x = np.zeros((n, n_alternatives, 3))
    base = rng.uniform(0.4, 1.2, size=n)
    x[:, 0, 0] = base
    x[:, 1:, 0] = base[:, None] + rng.uniform(0.0, 0.5, size=(n, n_alternatives - 1))
    guided = rng.integers(-1, n_alternatives, size=n)
    has_guidance = guided >= 0
    x[np.flatnonzero(has_guidance), guided[has_guidance], 1] = 1.0
    x[:, :, 2] = rng.integers(0, 2, size=(n, n_alternatives))
    return x


def synthesize_observations(
    model: ChoiceModel,
    n: int,
    rng: np.random.Generator,
    features: np.ndarray | None = None,
    per_individual: int = 1,
) -> ChoiceDataset:
    """Sample choices from ``model``.

    Features default to the generator matching the model's factors. Consecutive
    blocks of ``per_individual`` observations share one individual id.
    """
    if features is None:
        factors = model.spec.factor_names
        if factors == EVACUATION_FACTORS:
            features = evacuation_features(n, rng, model.spec.n_alternatives)
        elif factors == FIREWORK_FACTORS:
            features = firework_features(n, rng, model.spec.n_alternatives)
        else:
            features = rng.normal(size=(n, model.spec.n_alternatives, model.spec.n_factors))
    chosen = sample_choices(model, features, rng)
    ids = np.array([f"p{i // per_individual}" for i in range(n)], dtype=object)
    times = np.array([0.5 * (i % per_individual) for i in range(n)])
    return ChoiceDataset(model.spec, ids, times, features, chosen)
