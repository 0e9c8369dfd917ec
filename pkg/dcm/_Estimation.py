import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._ChoiceModel import (
    ChoiceDataset,
    ChoiceModel,
    ParameterVector,
    UtilitySpec,
    as_dataset,
    ll_gradient,
    ll_hessian,
    log_likelihood,
)

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-6
MAX_ITERATIONS = 100
SEPARATION_BOUND = 50.0
SEPARATION_LL = 1e-4
SEPARATION_THETA = 5.0


@dataclass
class EstimationResult:
    """Outcome of a maximum-likelihood fit.

    ``converged`` is False when the iteration cap was reached; ``separation`` is
    True when a parameter ran past the divergence bound. In both cases
    ``params`` holds the best parameters found.
    """

    spec: UtilitySpec
    params: ParameterVector
    log_likelihood: float
    null_log_likelihood: float
    iterations: int
    converged: bool
    gradient_norm: float
    separation: bool = False
    diagnostics: list[str] = field(default_factory=list)
    standard_errors: np.ndarray = field(default=None)
    history: list[float] = field(default_factory=list)
    n_observations: int = 0

    @property
    def model(self) -> ChoiceModel:
        return ChoiceModel(self.spec, self.params)

    @property
    def rho_squared(self) -> float:
        if self.null_log_likelihood == 0.0:
            return 0.0
        return 1.0 - self.log_likelihood / self.null_log_likelihood

    @property
    def t_statistics(self) -> np.ndarray:
        theta = self.params.free(self.spec)
        with np.errstate(divide="ignore", invalid="ignore"):
            return theta / self.standard_errors


def _identification_diagnostics(data: ChoiceDataset) -> list[str]:
    notes = []
    chosen = np.unique(data.chosen)
    if chosen.size == 1:
        notes.append(f"every observation chose alternative {data.spec.alternatives[chosen[0]]}")
    spread = np.ptp(data.features, axis=1)
    for k, name in enumerate(data.spec.factor_names):
        if np.all(spread[:, k] == 0.0):
            notes.append(f"factor {name} never varies across alternatives and cannot be identified")
    return notes


def _line_search(spec, data, theta, direction, current, gradient):
    """Backtracking (Armijo) search along an ascent direction."""
    step = 1.0
    slope = float(gradient @ direction)
    # summation round-off of the LL itself
    slack = 1e-12 * max(1.0, abs(current))
    for _ in range(60):
        candidate = theta + step * direction
        value = log_likelihood(ChoiceModel(spec, ParameterVector.from_free(spec, candidate)), data)
        if np.isfinite(value) and value >= current + 1e-4 * step * slope - slack:
            return candidate, value
        step *= 0.5
    return theta, current


def estimate(spec: UtilitySpec, observations) -> EstimationResult:
    """Fit the utility parameters by maximum likelihood.

    Newton steps are used while the Hessian is negative definite; otherwise the
    step falls back to the gradient. Every accepted step passes a backtracking
    line search, so the log-likelihood never decreases. Iteration starts at the
    zero model and stops when the gradient infinity-norm is below 1e-6 or after
    100 iterations.

    :param spec: Utility specification to estimate
    :param observations: List of ChoiceObservation or a ChoiceDataset
    :return: EstimationResult with parameters, final LL and convergence report
    """
    data = as_dataset(spec, observations)
    if len(data) == 0:
        raise ValueError("estimate needs at least one observation")
    diagnostics = _identification_diagnostics(data)
    for note in diagnostics:
        logger.warning("Identification: %s", note)

    theta = np.zeros(spec.n_free)
    current = log_likelihood(ChoiceModel(spec), data)
    null_ll = current
    history = [current]
    logger.info("Estimating %d parameters on %d observations (LL0 = %.4f)", spec.n_free, len(data), null_ll)

    converged = False
    separation = False
    iterations = 0
    gradient = ll_gradient(ChoiceModel(spec), data)
    while iterations < MAX_ITERATIONS:
        if np.max(np.abs(gradient)) < GRADIENT_TOLERANCE:
            converged = True
            break
        iterations += 1
        model = ChoiceModel(spec, ParameterVector.from_free(spec, theta))
        hessian = ll_hessian(model, data)
        try:
            # -H = L L^T exists only when H is negative definite
            factor = linalg.cho_factor(-hessian)
            direction = linalg.cho_solve(factor, gradient)
        except linalg.LinAlgError:
            logger.debug("Hessian not negative definite at iteration %d; gradient step", iterations)
            direction = gradient / max(1.0, float(np.max(np.abs(gradient))))
        new_theta, new_value = _line_search(spec, data, theta, direction, current, gradient)
        if np.array_equal(new_theta, theta):
            logger.warning("Line search made no progress at iteration %d", iterations)
            break
        theta, current = new_theta, new_value
        history.append(current)
        gradient = ll_gradient(ChoiceModel(spec, ParameterVector.from_free(spec, theta)), data)
        if np.max(np.abs(theta)) > SEPARATION_BOUND:
            separation = True
            names = [n for n, v in zip(spec.parameter_names, theta) if abs(v) > SEPARATION_BOUND]
            diagnostics.append(f"perfect separation suspected: {', '.join(names)} diverging")
            logger.warning("Perfect separation suspected for %s", names)
            break
    else:
        converged = bool(np.max(np.abs(gradient)) < GRADIENT_TOLERANCE)

    # the gradient vanishes along a diverging direction before |theta| reaches the bound
    if not separation and current > -SEPARATION_LL and np.max(np.abs(theta)) > SEPARATION_THETA:
        separation = True
        names = [n for n, v in zip(spec.parameter_names, theta) if abs(v) > SEPARATION_THETA]
        diagnostics.append(f"perfect separation suspected: every choice fitted with certainty ({', '.join(names)})")
        logger.warning("Perfect separation suspected: LL = %.3g", current)

    if not converged and not separation:
        logger.warning("Estimation did not converge after %d iterations", iterations)

    params = ParameterVector.from_free(spec, theta)
    result = EstimationResult(
        spec=spec,
        params=params,
        log_likelihood=current,
        null_log_likelihood=null_ll,
        iterations=iterations,
        converged=converged,
        gradient_norm=float(np.max(np.abs(gradient))),
        separation=separation,
        diagnostics=diagnostics,
        standard_errors=_standard_errors(ChoiceModel(spec, params), data),
        history=history,
        n_observations=len(data),
    )
    logger.info(
        "Estimation finished: LL = %.4f, iterations = %d, converged = %s", current, iterations, converged
    )
    return result


def _standard_errors(model: ChoiceModel, data: ChoiceDataset) -> np.ndarray:
    hessian = ll_hessian(model, data)
    try:
        covariance = linalg.inv(-hessian)
    except linalg.LinAlgError:
        return np.full(model.spec.n_free, np.nan)
    with np.errstate(invalid="ignore"):
        return np.sqrt(np.where(np.diag(covariance) >= 0, np.diag(covariance), np.nan))
