"""Uniform grids, trapezoidal quadrature, discrete norms and noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

#: Identifier of the bit generator behind every seeded stream in this package.
PRNG_ID = "numpy.random.PCG64"


def rng_from_seed(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor-product uniform grid on ``[0, 1]^dim`` with endpoints included.

    Nodes are ordered lexicographically (first coordinate slowest), so a
    2-D vector of values reshapes to ``(n, n)`` indexed ``[ix, iy]``.
    """

    dim: int
    points_per_axis: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @classmethod
    def uniform(cls, dim: int, points_per_axis: int) -> "Grid":
        if dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {dim}")
        if points_per_axis < 2:
            raise ValueError("need at least two points per axis")
        x = np.linspace(0.0, 1.0, points_per_axis)
        w = trapezoid_weights(points_per_axis)
        if dim == 1:
            nodes = x.reshape(-1, 1)
            weights = w
        else:
            X, Y = np.meshgrid(x, x, indexing="ij")
            nodes = np.column_stack([X.ravel(), Y.ravel()])
            weights = np.outer(w, w).ravel()
        nodes.setflags(write=False)
        weights.setflags(write=False)
        return cls(dim, points_per_axis, nodes, weights)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacing(self) -> float:
        return 1.0 / (self.points_per_axis - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.points_per_axis)

    def integrate(self, values) -> float:
        """Trapezoidal quadrature of nodal ``values`` (pairwise summation)."""
        v = np.asarray(values, dtype=float)
        if v.shape != (self.size,):
            raise ValueError(f"expected {self.size} nodal values, got shape {v.shape}")
        return float(np.sum(self.weights * v))


def trapezoid_weights(n: int) -> np.ndarray:
    h = 1.0 / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class NoisyData:
    clean: np.ndarray
    noisy: np.ndarray
    delta: float
    seed: object = None


def rms_norm(v) -> float:
    """Root-mean-square ``sqrt(mean(v**2))``; the discrete data-space norm."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("rms of an empty vector")
    return math.sqrt(np.sum(v * v) / v.size)


def relative_l2_error(approx, exact) -> float:
    approx = np.asarray(approx, dtype=float).ravel()
    exact = np.asarray(exact, dtype=float).ravel()
    if approx.shape != exact.shape:
        raise ValueError(f"shape mismatch {approx.shape} vs {exact.shape}")
    denom = math.sqrt(np.sum(exact * exact))
    if denom == 0.0:
        raise ValueError("relative error undefined for an all-zero reference")
    d = approx - exact
    return math.sqrt(np.sum(d * d)) / denom


def add_noise(clean, delta: float, seed=None, rng: np.random.Generator | None = None) -> NoisyData:
    """``g + delta * xi`` with ``xi`` iid uniform on ``[-1, 1]``.

    Pass either ``seed`` or an existing generator ``rng``.
    """
    if delta < 0:
        raise ValueError(f"noise level must be nonnegative, got {delta}")
    clean = np.array(clean, dtype=float)
    if rng is None:
        rng = rng_from_seed(seed)
    xi = rng.uniform(-1.0, 1.0, size=clean.shape)
    noisy = clean + delta * xi if delta > 0 else clean.copy()
    return NoisyData(clean, noisy, float(delta), seed)
