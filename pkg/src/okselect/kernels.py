"""Gaussian kernels and their random Fourier feature maps.

The feature map uses one phase-shifted cosine per frequency,
``phi(x, w) = sqrt(2) * cos(w.x + b)`` with ``w ~ N(0, I / sigma^2)`` and
``b ~ U[0, 2 pi)``, so that ``E[phi(x, w) phi(v, w)] = k(x, v)`` and every
feature is bounded by ``sqrt(2)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .errors import InvalidInputError, UnsupportedError

DEFAULT_WIDTHS = tuple(2.0 ** k for k in range(-2, 4))


class KernelFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    width: float
    id: int = 0
    family: KernelFamily = KernelFamily.GAUSSIAN

    def __post_init__(self):
        if not (self.width > 0 and math.isfinite(self.width)):
            raise InvalidInputError(f"kernel width must be positive, got {self.width}")

    @property
    def gamma(self) -> float:
        """Coefficient of ``||x - v||^2`` in the exponent."""
        return 1.0 / (2.0 * self.width * self.width)


def kernel_set(widths) -> list[KernelSpec]:
    return [KernelSpec(float(w), i) for i, w in enumerate(widths)]


def _as_vector(x, name="x") -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def kernel_eval(spec: KernelSpec, x, v) -> float:
    x = _as_vector(x)
    v = _as_vector(v, "v")
    if x.shape != v.shape:
        raise InvalidInputError(f"dimension mismatch: {x.shape[0]} vs {v.shape[0]}")
    diff = x - v
    return math.exp(-spec.gamma * float(diff @ diff))


def pairwise_sq_dists(A, B, chunk: int = 256) -> np.ndarray:
    """``||a_i - b_j||^2`` from explicit differences, in row chunks.

    Avoids the ``|a|^2 + |b|^2 - 2 a.b`` matrix-product form: it loses
    precision for nearby points, and some BLAS builds return wrong GEMM
    results on large operands.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise InvalidInputError(f"incompatible point sets {A.shape} and {B.shape}")
    out = np.empty((A.shape[0], B.shape[0]))
    for start in range(0, A.shape[0], chunk):
        diff = A[start:start + chunk, None, :] - B[None, :, :]
        out[start:start + chunk] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def gaussian_cross(A, B, gamma: float) -> np.ndarray:
    """``[exp(-gamma ||a_i - b_j||^2)]_{ij}``."""
    return np.exp(-gamma * pairwise_sq_dists(A, B))


def gram_matrix(spec: KernelSpec, points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return gaussian_cross(pts, pts, spec.gamma)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    kernel: KernelSpec
    dimension: int
    frequencies: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)
    feature_bound: float = math.sqrt(2.0)
    seed: int | None = None

    @property
    def input_dim(self) -> int:
        return self.frequencies.shape[1]

    @property
    def scale(self) -> float:
        return self.feature_bound / math.sqrt(self.dimension)


def sample_feature_map(spec: KernelSpec, dimension: int, seed, input_dim: int) -> FeatureMap:
    """Draw ``dimension`` random frequencies and phases for ``spec``.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``; the same
    int seed always reproduces the same map.
    """
    if spec.family is not KernelFamily.GAUSSIAN:
        raise UnsupportedError(f"no random features for kernel family {spec.family!r}")
    if int(dimension) < 1:
        raise InvalidInputError(f"feature dimension must be >= 1, got {dimension}")
    if int(input_dim) < 1:
        raise InvalidInputError(f"input dimension must be >= 1, got {input_dim}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    D, d = int(dimension), int(input_dim)
    freqs = rng.normal(0.0, 1.0 / spec.width, size=(D, d))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=D)
    freqs.setflags(write=False)
    phases.setflags(write=False)
    recorded = seed if isinstance(seed, (int, np.integer)) else None
    return FeatureMap(spec, D, freqs, phases, math.sqrt(2.0), recorded)


def feature_vector(fmap: FeatureMap, x, out: np.ndarray | None = None) -> np.ndarray:
    """``z(x) = (sqrt(2)/sqrt(D)) * cos(W x + b)``."""
    x = _as_vector(x)
    if x.shape[0] != fmap.input_dim:
        raise InvalidInputError(f"dimension mismatch: map expects {fmap.input_dim}, got {x.shape[0]}")
    if out is None:
        out = np.empty(fmap.dimension)
    core.rff_features(fmap.frequencies, fmap.phases, x, fmap.scale, out)
    return out


def approx_kernel(fmap: FeatureMap, x, v) -> float:
    return float(feature_vector(fmap, x) @ feature_vector(fmap, v))
