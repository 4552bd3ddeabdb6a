"""Scalar losses with derivatives and the constants the selectors need.

Each loss carries its smoothness order ``nu`` and constant ``c0`` (so that
``|l'|**nu <= c0 * l``), a bound ``g_scalar`` on ``|l'|`` over the
restricted hypothesis class, a bound ``g_rkhs`` on the norm of the
functional gradient, and an upper bound ``ell_max`` on the loss value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Tuple

import numpy as np


from .errors import InvalidInputError, UnsupportedError


class LossKind(str, enum.Enum):
    LOGISTIC = "logistic"
    SQUARE = "square"
    SQUARED_HINGE = "squared_hinge"
    ABSOLUTE = "absolute"
    HINGE = "hinge"


CLASSIFICATION_KINDS = frozenset({LossKind.LOGISTIC, LossKind.SQUARED_HINGE, LossKind.HINGE})
SMOOTH_KINDS = frozenset({LossKind.LOGISTIC, LossKind.SQUARE, LossKind.SQUARED_HINGE})


@dataclass(frozen=True)
class LossFunction:
    kind: LossKind
    nu: Optional[int]
    c0: Optional[float]
    ell_max: float
    g_scalar: float
    g_rkhs: float

    @property
    def is_smooth(self) -> bool:
        return self.kind in SMOOTH_KINDS

    @property
    def is_classification(self) -> bool:
        return self.kind in CLASSIFICATION_KINDS

    def value(self, prediction: float, label: float) -> float:
        return loss_value(self, prediction, label)

    def derivative(self, prediction: float, label: float) -> float:
        return loss_derivative(self, prediction, label)

    def with_ell_max(self, ell_max: float) -> "LossFunction":
        if not ell_max > 0:
            raise InvalidInputError(f"ell_max must be positive, got {ell_max}")
        return replace(self, ell_max=float(ell_max))


def make_loss(kind, radius: float = 1.0, feature_bound: float = 1.0,
              ell_max: Optional[float] = None) -> LossFunction:
    """Build a loss with constants derived from the radius U and feature bound B.

    Predictions of any hypothesis in the restricted class satisfy
    ``|f(x)| <= U * B``; ``ell_max`` and the gradient bounds follow from that.
    An explicit ``ell_max`` overrides the derived value.
    """
    try:
        kind = LossKind(kind)
    except ValueError:
        raise UnsupportedError(f"unknown loss kind {kind!r}") from None
    if not radius > 0 or not feature_bound > 0:
        raise InvalidInputError("radius and feature_bound must be positive")
    ub = radius * feature_bound
    if kind is LossKind.LOGISTIC:
        nu, c0, g, lmax = 1, 1.0, 1.0, math.log1p(math.exp(ub))
    elif kind is LossKind.SQUARE:
        nu, c0, g, lmax = 2, 4.0, 2.0 * (ub + 1.0), (ub + 1.0) ** 2
    elif kind is LossKind.SQUARED_HINGE:
        nu, c0, g, lmax = 2, 4.0, 2.0 * (ub + 1.0), (ub + 1.0) ** 2
    elif kind is LossKind.ABSOLUTE:
        nu, c0, g, lmax = None, None, 1.0, ub + 1.0
    else:
        nu, c0, g, lmax = None, None, 1.0, ub + 1.0
    if ell_max is not None:
        if not ell_max > 0:
            raise InvalidInputError(f"ell_max must be positive, got {ell_max}")
        lmax = float(ell_max)
    # ||grad_f l|| = |l'| * sqrt(k(x, x)) and sqrt(k(x, x)) <= B
    return LossFunction(kind, nu, c0, lmax, g, g * feature_bound)


def _check(loss: LossFunction, prediction: float, label: float) -> None:
    if not math.isfinite(prediction):
        raise InvalidInputError(f"non-finite prediction {prediction!r}")
    if not math.isfinite(label):
        raise InvalidInputError(f"non-finite label {label!r}")
    if loss.kind in CLASSIFICATION_KINDS and label not in (-1.0, 1.0):
        raise InvalidInputError(f"{loss.kind.value} loss needs labels in {{-1, +1}}, got {label}")


def loss_value(loss: LossFunction, prediction: float, label: float) -> float:
    _check(loss, prediction, label)
    kind = loss.kind
    if kind is LossKind.LOGISTIC:
        m = -label * prediction
        # log(1 + e^m) without overflow
        return m + math.log1p(math.exp(-m)) if m > 0 else math.log1p(math.exp(m))
    if kind is LossKind.SQUARE:
        r = prediction - label
        return r * r
    if kind is LossKind.SQUARED_HINGE:
        h = max(0.0, 1.0 - label * prediction)
        return h * h
    if kind is LossKind.ABSOLUTE:
        return abs(prediction - label)
    return max(0.0, 1.0 - label * prediction)


def loss_derivative(loss: LossFunction, prediction: float, label: float) -> float:
    """d loss / d prediction; kinks (absolute at a == y, hinge at y*a == 1) give 0."""
    _check(loss, prediction, label)
    kind = loss.kind
    if kind is LossKind.LOGISTIC:
        m = label * prediction
        if m >= 0:
            e = math.exp(-m)
            return -label * e / (1.0 + e)
        return -label / (1.0 + math.exp(m))
    if kind is LossKind.SQUARE:
        return 2.0 * (prediction - label)
    if kind is LossKind.SQUARED_HINGE:
        return -2.0 * label * max(0.0, 1.0 - label * prediction)
    if kind is LossKind.ABSOLUTE:
        r = prediction - label
        return 0.0 if r == 0 else math.copysign(1.0, r)
    return -label if 1.0 - label * prediction > 0 else 0.0


def loss_values(loss: LossFunction, predictions, labels) -> np.ndarray:
    """Vectorised ``loss_value`` over arrays of predictions and labels."""
    a = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    kind = loss.kind
    if kind is LossKind.LOGISTIC:
        return np.logaddexp(0.0, -y * a)
    if kind is LossKind.SQUARE:
        return (a - y) ** 2
    if kind is LossKind.SQUARED_HINGE:
        return np.maximum(0.0, 1.0 - y * a) ** 2
    if kind is LossKind.ABSOLUTE:
        return np.abs(a - y)
    return np.maximum(0.0, 1.0 - y * a)


def loss_derivatives(loss: LossFunction, predictions, labels) -> np.ndarray:
    """Vectorised ``loss_derivative``, with the same zero at kinks."""
    a = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    kind = loss.kind
    if kind is LossKind.LOGISTIC:
        # -y * sigmoid(-y a), via exp of a non-positive argument
        m = y * a
        e = np.exp(-np.abs(m))
        return -y * np.where(m >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
    if kind is LossKind.SQUARE:
        return 2.0 * (a - y)
    if kind is LossKind.SQUARED_HINGE:
        return -2.0 * y * np.maximum(0.0, 1.0 - y * a)
    if kind is LossKind.ABSOLUTE:
        return np.sign(a - y)
    return np.where(1.0 - y * a > 0, -y, 0.0)


def smoothness_check(loss: LossFunction, samples: Iterable[Tuple[float, float]]) -> bool:
    """True iff ``|l'(a, y)|**nu <= c0 * l(a, y)`` on every (a, y) sample."""
    if not loss.is_smooth:
        raise UnsupportedError(f"{loss.kind.value} loss has no smoothness constant")
    for a, y in samples:
        lhs = abs(loss_derivative(loss, a, y)) ** loss.nu
        rhs = loss.c0 * loss_value(loss, a, y)
        # relative slack for rounding in exp/log1p; the inequality itself is exact
        if lhs > rhs * (1.0 + 1e-12) + 1e-300:
            return False
    return True
