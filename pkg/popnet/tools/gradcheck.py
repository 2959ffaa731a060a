# -*- coding: utf-8 -*-
"""Verification of the analytical gradients of the losses against central finite differences."""
from dataclasses import dataclass
import logging
import numpy as np
import pandas as pd
import torch
import popnet.settings as settings
from popnet.exceptions import ValidationError
from popnet.losses import (structure_loss, local_smoothness_loss, wtv_loss, pop_loss, pop_out_separation,
                           separation_loss, semantic_loss, total_loss)


logger = logging.getLogger(__name__)

GRADCHECK_LOSSES = ("dep", "loc", "wtv", "pop", "sep", "sem", "separation", "total")
_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class GradcheckResult:
    loss: str
    precision: str
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def _random_grid(rng, size, low=0.1, high=0.9, min_difference=0.0) -> np.ndarray:
    """Uniform grid in ``[low, high]`` redrawn until every pair of 4-neighbors differs by ``min_difference`` at
    least."""
    while True:
        grid = rng.uniform(low, high, (size, size))
        if min_difference <= 0:
            return grid
        vertical, horizontal = np.abs(np.diff(grid, axis=0)), np.abs(np.diff(grid, axis=1))
        if min(vertical.min(), horizontal.min()) >= min_difference:
            return grid


def _random_rectangle_mask(rng, size, min_side=5) -> np.ndarray:
    height, width = rng.integers(min_side, size + 1, 2)
    top, left = rng.integers(0, size - height + 1), rng.integers(0, size - width + 1)
    mask = np.zeros((size, size))
    mask[top:top + height, left:left + width] = 1.0
    return mask


def make_instance(name: str, rng, size=settings.GRADCHECK_SIZE, step=settings.GRADCHECK_STEP) -> tuple:
    """Draw a random instance of a loss: a scalar function of one ``size x size`` (or ``2 x size x size``) tensor
    and the float64 point where its gradient is checked.

    Depths are drawn in [0.1, 0.9] with 4-neighbors at least ``10 * step`` apart, away from the kinks of the
    absolute differences; masks are random rectangles of side 5 or more; probabilities are drawn in [0.05, 0.95].

    Raises
    ------
    ValidationError
        If ``name`` is not one of ``GRADCHECK_LOSSES``.
    """
    if name not in GRADCHECK_LOSSES:
        raise ValidationError("Unknown loss '%s', expected one of %s" % (str(name), str(GRADCHECK_LOSSES)))
    gap = 10 * step
    d_sf = _random_grid(rng, size)
    d_c = _random_grid(rng, size)
    mask = _random_rectangle_mask(rng, size)
    weights = rng.uniform(-1.0, 1.0, (size, size))

    def constant(array, like):
        return torch.as_tensor(array, dtype=like.dtype)

    if name == "dep":
        return (lambda x: structure_loss(x, constant(d_sf, x))), _random_grid(rng, size)
    if name == "loc":
        return (lambda x: local_smoothness_loss(x, constant(mask, x))), _random_grid(rng, size)
    if name == "wtv":
        return (lambda x: wtv_loss(x, constant(mask, x))), _random_grid(rng, size, min_difference=gap)
    if name == "pop":
        return (lambda x: pop_loss(x, constant(d_sf, x), constant(mask, x))), _random_grid(rng, size,
                                                                                          min_difference=gap)
    if name == "sep":
        return (lambda x: separation_loss(x, constant(mask, x))), _random_grid(rng, size, 0.05, 0.95)
    if name == "sem":
        return (lambda x: semantic_loss(x, constant(mask, x))), _random_grid(rng, size, 0.05, 0.95)
    if name == "separation":
        point = np.stack([_random_grid(rng, size), d_c])
        return (lambda x: (constant(weights, x) * pop_out_separation(x[0], x[1])).sum()), point
    s_tilde = _random_grid(rng, size, 0.05, 0.95)

    def total(x):
        l_pop = pop_loss(x, constant(d_sf, x), constant(mask, x))
        l_sep = separation_loss(pop_out_separation(x, constant(d_c, x)), constant(mask, x))
        return total_loss(l_pop, l_sep, semantic_loss(constant(s_tilde, x), constant(mask, x)))
    return total, _random_grid(rng, size, min_difference=gap)


def analytical_gradient(function, point: np.ndarray, dtype=torch.float64) -> np.ndarray:
    x = torch.tensor(point, dtype=dtype, requires_grad=True)
    function(x).backward()
    return x.grad.detach().to(torch.float64).numpy()


def numerical_gradient(function, point: np.ndarray, step=settings.GRADCHECK_STEP) -> np.ndarray:
    """Central finite differences in float64 with step ``step``, refined by Richardson extrapolation with the
    half step (fourth-order accurate)."""
    point = np.asarray(point, dtype=np.float64)
    gradient = np.zeros_like(point)

    def evaluate(values):
        with torch.no_grad():
            return float(function(torch.tensor(values, dtype=torch.float64)))

    def central(index, h):
        forward, backward = point.copy(), point.copy()
        forward[index] += h
        backward[index] -= h
        return (evaluate(forward) - evaluate(backward)) / (2 * h)

    for index in np.ndindex(*point.shape):
        gradient[index] = (4 * central(index, step / 2) - central(index, step)) / 3
    return gradient


def relative_error(analytical: np.ndarray, numerical: np.ndarray, floor=1e-6) -> float:
    """``|a - n| / max(|a|, |n|, floor)`` with Euclidean norms."""
    scale = max(np.linalg.norm(analytical), np.linalg.norm(numerical), floor)
    return float(np.linalg.norm(analytical - numerical) / scale)


def run_gradcheck(names=None, precision="float64", instances=settings.GRADCHECK_INSTANCES, seed=0) -> list:
    """Check the gradient of each named loss on ``instances`` random instances.

    Returns
    -------
    list
        One ``GradcheckResult`` per loss with the largest relative error met and the tolerance of the precision.
    """
    if precision not in _DTYPES:
        raise ValidationError("Unknown precision '%s', expected one of %s" % (str(precision), str(tuple(_DTYPES))))
    names = list(GRADCHECK_LOSSES) if names is None else list(names)
    results = []
    for k, name in enumerate(names):
        rng = np.random.default_rng([seed, k])
        errors = []
        for _ in range(instances):
            function, point = make_instance(name, rng)
            errors.append(relative_error(analytical_gradient(function, point, _DTYPES[precision]),
                                         numerical_gradient(function, point)))
        results.append(GradcheckResult(name, precision, max(errors), settings.GRADCHECK_TOLERANCES[precision]))
        logger.debug("Gradient check of '%s' (%s): max relative error %.3e", name, precision, max(errors))
    return results


def results_table(results) -> pd.DataFrame:
    return pd.DataFrame([{"loss": r.loss, "precision": r.precision, "max_rel_error": r.max_relative_error,
                          "tolerance": r.tolerance, "passed": r.passed} for r in results])
