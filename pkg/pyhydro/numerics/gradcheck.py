import logging

import numpy as np

from ..exceptions import NumericalError
from .tape import Tape, Tensor

log = logging.getLogger(__name__)


class GradientReport:
    """
    Outcome of a finite-difference comparison.

    Attributes:
        analytic (np.ndarray): Reverse-mode gradient.
        numeric (np.ndarray): Central-difference gradient.
        relative_errors (np.ndarray): Per-coordinate relative error.
        tol (float): The pass threshold.
    """

    def __init__(self, analytic, numeric, relative_errors, tol):
        self.analytic = analytic
        self.numeric = numeric
        self.relative_errors = relative_errors
        self.tol = tol

    @property
    def max_relative_error(self):
        if self.relative_errors.size == 0:
            return 0.0
        return float(self.relative_errors.max())

    @property
    def worst_index(self):
        if self.relative_errors.size == 0:
            return None
        return tuple(int(i) for i in np.unravel_index(np.argmax(self.relative_errors), self.relative_errors.shape))

    @property
    def failures(self):
        return [tuple(int(i) for i in idx) for idx in np.argwhere(self.relative_errors > self.tol)]

    @property
    def passed(self):
        return self.max_relative_error <= self.tol

    def __repr__(self):
        status = "pass" if self.passed else f"fail at {self.worst_index}"
        return f"GradientReport({status}, max_rel_err={self.max_relative_error:.3e}, tol={self.tol:g})"


def _evaluate(f, theta):
    out = f(Tensor(theta))
    value = out.value if isinstance(out, Tensor) else np.asarray(out, dtype=np.float64)
    if value.size != 1:
        raise ValueError(f"gradient check needs a scalar function, got shape {value.shape}")
    value = float(value)
    if not np.isfinite(value):
        raise NumericalError(f"Non-finite function value {value} during gradient check")
    return value


def check_gradients(f, theta, step=1e-5, tol=1e-4, floor=1e-6):
    """
    Compares reverse-mode gradients with central differences.

    Args:
        f (callable): Maps a Tensor to a scalar Tensor using tape primitives.
        theta (array-like): The point to check at.
        step (float): Finite-difference step.
        tol (float): Maximum allowed relative error.
        floor (float): Lower bound of the relative-error denominator, so that
            coordinates with vanishing gradient are compared absolutely.

    Returns:
        GradientReport: Per-coordinate errors and the pass/fail verdict.

    Raises:
        NumericalError: If f is non-finite at any evaluated point.
    """
    theta = np.array(theta, dtype=np.float64)

    tape = Tape()
    variable = tape.variable(theta.copy())
    loss = f(variable)
    if not np.all(np.isfinite(loss.value)):
        raise NumericalError(f"Non-finite function value {loss.value} during gradient check")
    analytic = tape.backward(loss)[variable]

    numeric = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        plus = theta.copy()
        minus = theta.copy()
        plus[idx] += step
        minus[idx] -= step
        numeric[idx] = (_evaluate(f, plus) - _evaluate(f, minus)) / (2.0 * step)

    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    errors = np.abs(analytic - numeric) / denominator
    report = GradientReport(analytic, numeric, errors, tol)
    if not report.passed:
        log.warning(f"Gradient check failed at coordinate {report.worst_index}: {report}")
    return report
