"""Two-layer ReLU networks with mean-field scaling.

A width-``n`` network on ``[0, 1]^d`` is

.. math:: f(x) = \\frac{1}{n} \\sum_{j=1}^n a_j \\, (b_j^T x + c_j)_+ .

Networks are immutable values. Training code works on the raw arrays
(``outer``, ``inner_weights``, ``inner_bias``) and builds a new
:class:`TwoLayerNet` when it is done.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)

#: Neurons whose ``|b|_1 + |c|`` falls below this are re-drawn on projection.
DEGENERATE_TOL = 1e-12


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TwoLayerNet:
    """Parameters ``(a_j, b_j, c_j)`` of a width-``n`` ReLU network.

    ``radius`` is ``None`` for an unconstrained net. Any other value
    (including ``math.inf``) marks the net as living in the normalized
    parameter set ``|b_j|_1 + |c_j| = 1, |a_j| <= radius``.
    """

    outer: np.ndarray
    inner_weights: np.ndarray
    inner_bias: np.ndarray
    radius: float | None = None

    def __post_init__(self):
        a = _frozen(self.outer).reshape(-1)
        B = _frozen(self.inner_weights)
        c = _frozen(self.inner_bias).reshape(-1)
        if B.ndim == 1:
            B = _frozen(B.reshape(-1, 1))
        if not (a.shape[0] == B.shape[0] == c.shape[0]):
            raise ValueError(
                f"parameter lengths differ: a={a.shape[0]}, b={B.shape[0]}, c={c.shape[0]}")
        if a.shape[0] == 0:
            raise ValueError("width must be positive")
        if B.shape[1] not in (1, 2):
            raise ValueError(f"input_dim must be 1 or 2, got {B.shape[1]}")
        object.__setattr__(self, "outer", a)
        object.__setattr__(self, "inner_weights", B)
        object.__setattr__(self, "inner_bias", c)

    @property
    def width(self) -> int:
        return self.outer.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inner_weights.shape[1]

    @property
    def constrained(self) -> bool:
        return self.radius is not None

    def replace(self, **changes) -> "TwoLayerNet":
        fields = dict(outer=self.outer, inner_weights=self.inner_weights,
                      inner_bias=self.inner_bias, radius=self.radius)
        fields.update(changes)
        return TwoLayerNet(**fields)

    def in_constraint_set(self, r: float | None = None, tol: float = 1e-12) -> bool:
        """True if every neuron is normalized within ``tol`` and ``|a_j| <= r``."""
        r = self.radius if r is None else r
        if r is None:
            return False
        s = np.abs(self.inner_weights).sum(axis=1) + np.abs(self.inner_bias)
        return bool(np.all(np.abs(s - 1.0) <= tol) and np.all(np.abs(self.outer) <= r))


class ParamGradient(NamedTuple):
    outer: np.ndarray
    inner_weights: np.ndarray
    inner_bias: np.ndarray


class NetFunctionals(NamedTuple):
    path_norm: float
    l2_norm: float
    h1_norm: float


def _as_points(points, d: int) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if d == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"points have dimension {X.shape[-1]}, network expects {d}")
    return X


def preactivation(a, B, c, X) -> np.ndarray:
    """Matrix ``Z[i, j] = b_j . x_i + c_j``."""
    if B.shape[1] == 1:
        Z = np.multiply.outer(X[:, 0], B[:, 0])
    else:
        Z = X @ B.T
    Z += c
    return Z


def forward(a, B, c, X):
    """Fast path used inside training loops.

    Returns ``(f, act)`` with ``act = relu(Z)``; ``act`` is what
    :func:`backward` and :func:`input_gradient` need.
    """
    act = preactivation(a, B, c, X)
    np.maximum(act, 0.0, out=act)
    return act @ a / a.shape[0], act


def backward(a, X, act, upstream) -> ParamGradient:
    """Closed-form parameter gradient of ``sum_i upstream_i f(x_i)``."""
    n = a.shape[0]
    # ReLU'(0) = 0
    mask = (act > 0.0).astype(float)
    U = np.column_stack([upstream, upstream[:, None] * X])
    G = mask.T @ U
    ga = act.T @ upstream / n
    gc = a * G[:, 0] / n
    gB = (a / n)[:, None] * G[:, 1:]
    return ParamGradient(ga, gB, gc)


def evaluate(net: TwoLayerNet, points) -> np.ndarray:
    """Network values at ``points`` (shape ``(m, d)``, or ``(m,)`` when d=1).

    Per point, neuron contributions are sorted before the pairwise sum, so
    the result does not depend on neuron order.
    """
    X = _as_points(points, net.input_dim)
    Z = preactivation(net.outer, net.inner_weights, net.inner_bias, X)
    terms = np.sort(np.maximum(Z, 0.0) * net.outer, axis=1)
    return terms.sum(axis=1) / net.width


def param_gradient(net: TwoLayerNet, points, upstream) -> ParamGradient:
    """Gradient of ``sum_i upstream_i * f(x_i)`` with respect to ``(a, b, c)``."""
    X = _as_points(points, net.input_dim)
    u = np.asarray(upstream, dtype=float).reshape(-1)
    if u.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} points but {u.shape[0]} upstream values")
    _, act = forward(net.outer, net.inner_weights, net.inner_bias, X)
    return backward(net.outer, X, act, u)


def input_gradient(a, B, c, X) -> np.ndarray:
    """Analytic spatial gradient ``(1/n) sum_j a_j b_j 1[z_j >= 0]``, shape ``(m, d)``.

    Unlike the parameter gradient, a node sitting exactly on a kink counts
    as active, so ``(x)_+`` has slope 1 at ``x = 0``.
    """
    mask = (preactivation(a, B, c, X) >= 0.0).astype(float)
    return mask @ (a[:, None] * B) / a.shape[0]


def input_gradient_backward(a, B, c, X, upstream) -> ParamGradient:
    """Parameter gradient of ``sum_i upstream_i . grad f(x_i)``; ``upstream`` is ``(m, d)``."""
    n = a.shape[0]
    mask = (preactivation(a, B, c, X) >= 0.0).astype(float)
    proj = mask.T @ upstream                       # (n, d)
    ga = np.einsum("jk,jk->j", proj, B) / n
    gB = a[:, None] * proj / n
    return ParamGradient(ga, gB, np.zeros_like(a))


# ---------------------------------------------------------------- functionals

def path_norm(net: TwoLayerNet) -> float:
    """Empirical Barron norm ``(1/n) sum_j |a_j| (|b_j|_1 + |c_j|)``."""
    return path_norm_arrays(net.outer, net.inner_weights, net.inner_bias)


def path_norm_arrays(a, B, c) -> float:
    s = np.abs(B).sum(axis=1) + np.abs(c)
    return float(np.sum(np.abs(a) * s) / a.shape[0])


def path_norm_gradient(a, B, c) -> ParamGradient:
    n = a.shape[0]
    s = np.abs(B).sum(axis=1) + np.abs(c)
    absa = np.abs(a)
    return ParamGradient(np.sign(a) * s / n, absa[:, None] * np.sign(B) / n,
                         absa * np.sign(c) / n)


def sobolev_norms(net: TwoLayerNet, grid) -> tuple[float, float]:
    """``(||f||_{L2}, ||f||_{H1})`` on ``grid`` by quadrature of analytic values."""
    if grid.size == 0:
        raise ValueError("empty grid")
    X = grid.nodes
    a, B, c = net.outer, net.inner_weights, net.inner_bias
    f, _ = forward(a, B, c, X)
    df = input_gradient(a, B, c, X)
    l2sq = grid.integrate(f * f)
    gradsq = grid.integrate(np.sum(df * df, axis=1))
    return math.sqrt(max(l2sq, 0.0)), math.sqrt(max(l2sq + gradsq, 0.0))


def functionals(net: TwoLayerNet, grid) -> NetFunctionals:
    l2, h1 = sobolev_norms(net, grid)
    return NetFunctionals(path_norm(net), l2, h1)


# ------------------------------------------------------ init / projection

def init_arrays(width: int, input_dim: int, rng: np.random.Generator):
    """Draw ``(a, B, c)`` uniformly on ``[-1, 1]`` and normalize ``(b, c)``.

    Draw order: a, then B, then c.
    """
    a = rng.uniform(-1.0, 1.0, size=width)
    B = rng.uniform(-1.0, 1.0, size=(width, input_dim))
    c = rng.uniform(-1.0, 1.0, size=width)
    _normalize_inner(B, c, rng)
    return a, B, c


def _normalize_inner(B, c, rng) -> int:
    """In-place rescaling to ``|b_j|_1 + |c_j| = 1``. Returns number of re-drawn neurons."""
    s = np.abs(B).sum(axis=1) + np.abs(c)
    bad = np.flatnonzero(s < DEGENERATE_TOL)
    redrawn = 0
    while bad.size:
        redrawn += bad.size
        B[bad] = rng.uniform(-1.0, 1.0, size=(bad.size, B.shape[1]))
        c[bad] = rng.uniform(-1.0, 1.0, size=bad.size)
        s = np.abs(B).sum(axis=1) + np.abs(c)
        bad = np.flatnonzero(s < DEGENERATE_TOL)
    B /= s[:, None]
    c /= s
    return redrawn


def project_arrays(a, B, c, r: float | None, rng=None) -> int:
    """In-place projection onto the normalized set with ``|a_j| <= r``.

    ``r=None`` or ``inf`` only normalizes the inner parameters.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    redrawn = _normalize_inner(B, c, rng)
    if r is not None and math.isfinite(r):
        np.clip(a, -r, r, out=a)
    return redrawn


def random_net(width: int, input_dim: int, rng: np.random.Generator,
               radius: float | None = None) -> TwoLayerNet:
    a, B, c = init_arrays(width, input_dim, rng)
    if radius is not None:
        project_arrays(a, B, c, radius, rng)
    return TwoLayerNet(a, B, c, radius=radius)


def project_constraints(net: TwoLayerNet, r: float, rng=None) -> TwoLayerNet:
    """Rescale each ``(b_j, c_j)`` to unit ``l1`` mass and clamp ``a_j`` to ``[-r, r]``."""
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    a, B, c = (np.array(x) for x in (net.outer, net.inner_weights, net.inner_bias))
    redrawn = project_arrays(a, B, c, r, rng)
    if redrawn:
        log.warning("re-initialized %d degenerate neuron(s) during projection", redrawn)
    return TwoLayerNet(a, B, c, radius=r)


def expand_width(net: TwoLayerNet, new_width: int, rng: np.random.Generator,
                 radius: float | None = None) -> TwoLayerNet:
    """Append freshly drawn neurons, keeping the existing ones bit-exact.

    If ``radius`` is given (or the net is constrained), the appended neurons
    are projected with that radius; retained neurons are untouched.
    """
    if new_width <= net.width:
        raise ValueError(f"new width {new_width} must exceed current width {net.width}")
    r = net.radius if radius is None else radius
    a, B, c = init_arrays(new_width - net.width, net.input_dim, rng)
    if r is not None:
        project_arrays(a, B, c, r, rng)
    return TwoLayerNet(np.concatenate([net.outer, a]),
                       np.concatenate([net.inner_weights, B]),
                       np.concatenate([net.inner_bias, c]),
                       radius=r)
