"""Per-arm hypotheses and their importance-weighted gradient steps.

``RkhsHypothesis`` is a support-vector expansion in a Gaussian RKHS kept
inside the ball ``||f|| <= U``; ``RfHypothesis`` is a linear model over a
random feature map kept inside the box ``|w_j| <= U / sqrt(D)``.
Both are mutated in place by their step functions.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from . import core
from .errors import InvalidInputError, NumericalError
from .kernels import FeatureMap, KernelSpec, feature_vector, gram_matrix
from .losses import LossFunction

_MIN_SCALE = 1e-150


def _check_step_args(stepsize, inv_prob):
    if not stepsize > 0:
        raise InvalidInputError(f"stepsize must be positive, got {stepsize}")
    if not inv_prob >= 1.0:
        raise InvalidInputError(f"inverse probability must be >= 1, got {inv_prob}")


class RkhsHypothesis:
    """f = scale * sum_j a_j k(x_j, .) with tracked squared norm.

    The common ``scale`` factor makes the ball projection O(1); ``support``
    exposes the effective coefficients ``scale * a_j``.
    """

    def __init__(self, kernel: KernelSpec, radius: float, input_dim: int, capacity: int = 256):
        if not radius > 0:
            raise InvalidInputError(f"radius must be positive, got {radius}")
        self.kernel = kernel
        self.radius = float(radius)
        self.input_dim = int(input_dim)
        self._points = np.empty((max(capacity, 1), self.input_dim))
        self._coefs = np.empty(max(capacity, 1))
        self.n = 0
        self.scale = 1.0
        self.sq_norm = 0.0

    @property
    def support(self):
        pts = self._points[: self.n]
        return [(pts[j].copy(), float(self.scale * self._coefs[j])) for j in range(self.n)]

    @property
    def points(self) -> np.ndarray:
        return self._points[: self.n]

    @property
    def coefficients(self) -> np.ndarray:
        return self.scale * self._coefs[: self.n]

    def predict(self, x) -> float:
        if self.n == 0:
            return 0.0
        x = np.ascontiguousarray(x, dtype=np.float64)
        raw = core.expansion_predict(self._points, self._coefs, self.n, x, self.kernel.gamma)
        return self.scale * raw

    def _append(self, x, coef):
        if self.n == self._points.shape[0]:
            cap = 2 * self.n
            pts = np.empty((cap, self.input_dim))
            pts[: self.n] = self._points[: self.n]
            cfs = np.empty(cap)
            cfs[: self.n] = self._coefs[: self.n]
            self._points, self._coefs = pts, cfs
        self._points[self.n] = x
        self._coefs[self.n] = coef / self.scale
        self.n += 1

    def rescale(self, factor: float) -> None:
        self.scale *= factor
        self.sq_norm *= factor * factor
        if self.scale < _MIN_SCALE:
            self._coefs[: self.n] *= self.scale
            self.scale = 1.0

    def project(self) -> None:
        """Radial projection onto the ball of radius U (no-op inside it)."""
        if self.sq_norm > self.radius * self.radius:
            self.rescale(self.radius / math.sqrt(self.sq_norm))
            self.sq_norm = self.radius * self.radius

    def recompute_sq_norm(self) -> float:
        """||f||^2 from the full Gram quadratic form (O(n^2); for checks)."""
        if self.n == 0:
            return 0.0
        a = self.coefficients
        return float(a @ gram_matrix(self.kernel, self.points) @ a)

    def digest(self) -> str:
        h = hashlib.sha1()
        h.update(self._points[: self.n].tobytes())
        h.update(self._coefs[: self.n].tobytes())
        h.update(np.array([self.scale, self.sq_norm]).tobytes())
        return h.hexdigest()


class RfHypothesis:
    """f(x) = w . z(x) over a fixed random feature map, with ``|w_j| <= U/sqrt(D)``."""

    def __init__(self, fmap: FeatureMap, radius: float):
        if not radius > 0:
            raise InvalidInputError(f"radius must be positive, got {radius}")
        self.map = fmap
        self.radius = float(radius)
        self.weights = np.zeros(fmap.dimension)
        self._z = np.empty(fmap.dimension)

    @property
    def cap(self) -> float:
        return self.radius / math.sqrt(self.map.dimension)

    def features(self, x) -> np.ndarray:
        return feature_vector(self.map, x, out=self._z)

    def predict(self, x) -> float:
        return float(self.weights @ self.features(x))

    def project(self) -> None:
        np.clip(self.weights, -self.cap, self.cap, out=self.weights)

    def digest(self) -> str:
        return hashlib.sha1(self.weights.tobytes()).hexdigest()


class ConstantHypothesis:
    """Always predicts ``value`` and never learns; for synthetic selector streams."""

    def __init__(self, value: float):
        self.value = float(value)

    def predict(self, x) -> float:
        return self.value

    def digest(self) -> str:
        return repr(self.value)


def predict_rkhs(h: RkhsHypothesis, x) -> float:
    return h.predict(x)


def predict_rf(h: RfHypothesis, x) -> float:
    return h.predict(x)


def ogd_step_rkhs(h: RkhsHypothesis, x, y, loss: LossFunction, stepsize, inv_prob,
                  prediction=None, derivative=None) -> RkhsHypothesis:
    """One projected, importance-weighted gradient step on ``h`` (in place).

    ``prediction`` / ``derivative`` may be passed when the caller already
    has f(x) and l'(f(x), y) for this round.
    """
    _check_step_args(stepsize, inv_prob)
    x = np.ascontiguousarray(x, dtype=np.float64)
    fx = h.predict(x) if prediction is None else prediction
    g = loss.derivative(fx, y) if derivative is None else derivative
    if g == 0.0:
        return h
    c = -stepsize * inv_prob * g
    # ||f + c k(x, .)||^2 = ||f||^2 + 2 c f(x) + c^2 k(x, x), and k(x, x) = 1
    new_sq = h.sq_norm + 2.0 * c * fx + c * c
    if not (math.isfinite(c) and math.isfinite(new_sq)):
        raise NumericalError("non-finite RKHS update",
                             {"coef": c, "sq_norm": h.sq_norm, "prediction": fx, "derivative": g})
    h._append(x, c)
    h.sq_norm = max(new_sq, 0.0)
    h.project()
    return h


def ogd_step_rf(h: RfHypothesis, x, y, loss: LossFunction, stepsize, inv_prob,
                prediction=None, derivative=None, features=None) -> RfHypothesis:
    """Gradient step on the weights followed by the coordinate-wise box projection."""
    _check_step_args(stepsize, inv_prob)
    z = h.features(x) if features is None else features
    fx = float(h.weights @ z) if prediction is None else prediction
    g = loss.derivative(fx, y) if derivative is None else derivative
    if g == 0.0:
        return h
    step = stepsize * inv_prob * g
    if not math.isfinite(step):
        raise NumericalError("non-finite RF update", {"step": step, "prediction": fx, "derivative": g})
    h.weights -= step * z
    h.project()
    return h


def box_project(w, radius: float) -> np.ndarray:
    """``w_j * min(1, U / (|w_j| sqrt(D)))`` for every coordinate."""
    w = np.asarray(w, dtype=np.float64)
    cap = radius / math.sqrt(w.shape[0])
    return np.clip(w, -cap, cap)


def importance_weighted(grads, p, selected: int) -> np.ndarray:
    """Estimator ``grad_i / p_i * 1[i == selected]`` for every arm i.

    ``grads`` has one row (or scalar) per arm.
    """
    grads = np.asarray(grads, dtype=np.float64)
    out = np.zeros_like(grads)
    out[selected] = grads[selected] / p[selected]
    return out
