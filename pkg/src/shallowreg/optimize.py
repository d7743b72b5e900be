"""Projected Adam training of a fixed-width network."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import shallow_net as sn
from .discretization import rms_norm
from .operators import ForwardOperator, OperatorError

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ForwardProblem:
    """A forward operator together with exact solution and (noisy) data."""

    operator: ForwardOperator
    exact: np.ndarray          # f^dagger at solution-grid nodes
    clean: np.ndarray          # A(f^dagger)
    noisy: np.ndarray
    delta: float

    @property
    def grid(self):
        return self.operator.solution_grid


@dataclass(frozen=True)
class Penalty:
    """``none``, ``h1`` (coef * ||f||_H1), ``path_norm`` (coef * c) or
    ``path_norm_squared`` (coef * c**2)."""

    kind: str = "none"
    coef: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "h1", "path_norm", "path_norm_squared"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.coef < 0:
            raise ValueError("penalty coefficient must be nonnegative")

    @classmethod
    def h1_scaled(cls, beta: float, c_r1: float) -> "Penalty":
        return cls("h1", beta * c_r1)

    @classmethod
    def path_norm_squared(cls, alpha: float) -> "Penalty":
        return cls("path_norm_squared", alpha)


@dataclass(frozen=True)
class Objective:
    problem: ForwardProblem
    misfit: str = "rms"        # or "rms_squared"
    penalty: Penalty = field(default_factory=Penalty)

    def __post_init__(self):
        if self.misfit not in ("rms", "rms_squared"):
            raise ValueError(f"unknown misfit kind {self.misfit!r}")


class Evaluation(NamedTuple):
    total: float
    misfit: float
    penalty: float
    grad: sn.ParamGradient | None


def _evaluate(a, B, c, objective: Objective, with_grad: bool = True) -> Evaluation:
    problem = objective.problem
    grid = problem.grid
    X = grid.nodes
    f, act = sn.forward(a, B, c, X)
    if with_grad:
        g, vjp = problem.operator.linearize(f)
    else:
        g, vjp = problem.operator.apply(f), None
    r = g - problem.noisy
    J = rms_norm(r)
    if objective.misfit == "rms":
        misfit = J
        seed = r / (r.size * J) if J > 0 else np.zeros_like(r)
    else:
        misfit = J * J
        seed = 2.0 * r / r.size

    pen = objective.penalty
    penalty = 0.0
    extra = None
    upstream = vjp(seed) if with_grad else None
    if pen.kind == "h1":
        df = sn.input_gradient(a, B, c, X)
        l2sq = grid.integrate(f * f)
        h1 = math.sqrt(max(l2sq + grid.integrate(np.sum(df * df, axis=1)), 0.0))
        penalty = pen.coef * h1
        if with_grad and h1 > 0:
            w = grid.weights * (pen.coef / h1)
            upstream = upstream + w * f
            extra = sn.input_gradient_backward(a, B, c, X, w[:, None] * df)
    elif pen.kind in ("path_norm", "path_norm_squared"):
        p = sn.path_norm_arrays(a, B, c)
        if pen.kind == "path_norm":
            penalty = pen.coef * p
            scale = pen.coef
        else:
            penalty = pen.coef * (p * p)
            scale = 2.0 * pen.coef * p
        if with_grad and scale != 0:
            extra = sn.ParamGradient(*(scale * x for x in sn.path_norm_gradient(a, B, c)))

    grad = None
    if with_grad:
        grad = sn.backward(a, X, act, upstream)
        if extra is not None:
            grad = sn.ParamGradient(*(x + y for x, y in zip(grad, extra)))
    return Evaluation(misfit + penalty, misfit, penalty, grad)


def objective_value(net: sn.TwoLayerNet, objective: Objective) -> tuple[float, float, float]:
    """``(total, misfit, penalty)`` for ``net``."""
    e = _evaluate(net.outer, net.inner_weights, net.inner_bias, objective, with_grad=False)
    return e.total, e.misfit, e.penalty


def objective_gradient(net: sn.TwoLayerNet, objective: Objective) -> sn.ParamGradient:
    return _evaluate(net.outer, net.inner_weights, net.inner_bias, objective).grad


@dataclass
class AdamState:
    """Adam moments per parameter array.

    Bias correction uses a per-neuron step count so neurons appended by a
    width expansion start with fresh moments while retained neurons keep
    theirs.
    """

    m: list
    v: list
    neuron_steps: np.ndarray
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, width: int, input_dim: int, **hyper) -> "AdamState":
        shapes = [(width,), (width, input_dim), (width,)]
        return cls([np.zeros(s) for s in shapes], [np.zeros(s) for s in shapes],
                   np.zeros(width, dtype=np.int64), **hyper)

    @property
    def width(self) -> int:
        return self.neuron_steps.shape[0]

    def expanded(self, new_width: int) -> "AdamState":
        extra = new_width - self.width
        if extra < 0:
            raise ValueError("cannot shrink optimizer state")

        def pad(x):
            return np.concatenate([x, np.zeros((extra,) + x.shape[1:])])

        return AdamState([pad(x) for x in self.m], [pad(x) for x in self.v],
                         np.concatenate([self.neuron_steps, np.zeros(extra, dtype=np.int64)]),
                         self.step_count, self.learning_rate, self.beta1, self.beta2,
                         self.epsilon)

    def step(self, params, grads, frozen=()):
        """In-place Adam update of the arrays in ``params``."""
        self.step_count += 1
        self.neuron_steps += 1
        t = self.neuron_steps.astype(float)
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for k, (p, g) in enumerate(zip(params, grads)):
            if k in frozen:
                continue
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if p.ndim == 2:
                mhat = m / bc1[:, None]
                vhat = v / bc2[:, None]
            else:
                mhat = m / bc1
                vhat = v / bc2
            p -= self.learning_rate * mhat / (np.sqrt(vhat) + self.epsilon)


@dataclass
class TrainResult:
    net: sn.TwoLayerNet
    trace: list
    best_value: float
    best_misfit: float
    best_penalty: float
    adam: AdamState
    nonfinite: bool = False
    redrawn: int = 0
    error: str | None = None


def train_fixed_width(net: sn.TwoLayerNet, objective: Objective, iterations: int,
                      constraint_r: float | None = None, rng=None, *,
                      adam: AdamState | None = None, learning_rate: float = 1e-3,
                      freeze_inner: bool = False,
                      callback: Callable | None = None) -> TrainResult:
    """Run ``iterations`` projected Adam steps and return the best iterate.

    Parameters
    ----------
    net : TwoLayerNet
        Starting point. It is projected before the first step when a
        constraint applies.
    objective : Objective
    iterations : int
    constraint_r : float, optional
        Bound on ``|a_j|``; ``math.inf`` keeps only the normalization of
        ``(b_j, c_j)``. Defaults to ``net.radius``; ``None`` on both means
        unconstrained training.
    rng : numpy Generator, optional
        Used only to re-draw degenerate neurons during projection.
    adam : AdamState, optional
        Warm optimizer state (width must match). A fresh state is created
        otherwise, with ``learning_rate``.
    freeze_inner : bool
        Train only the outer weights.
    callback : callable, optional
        ``callback(step, a, B, c)`` after every (projected) step.

    Returns
    -------
    TrainResult
        ``trace[k]`` is the objective after ``k`` steps; ``net`` is the
        iterate with the smallest recorded value.
    """
    if iterations <= 0:
        raise ValueError("iterations must be positive")
    r = net.radius if constraint_r is None else constraint_r
    if rng is None:
        rng = np.random.default_rng(0)
    a, B, c = (np.array(x, dtype=float) for x in (net.outer, net.inner_weights, net.inner_bias))
    redrawn = 0
    if r is not None:
        redrawn += sn.project_arrays(a, B, c, r, rng)
    if adam is None:
        adam = AdamState.zeros(a.shape[0], B.shape[1], learning_rate=learning_rate)
    elif adam.width != a.shape[0]:
        raise ValueError(f"optimizer state width {adam.width} != net width {a.shape[0]}")
    frozen = (1, 2) if freeze_inner else ()

    trace = []
    best = None
    nonfinite = False
    error = None
    for k in range(iterations + 1):
        try:
            ev = _evaluate(a, B, c, objective, with_grad=k < iterations)
        except OperatorError as exc:
            error = str(exc)
            log.warning("operator failure at step %d: %s", k, exc)
            break
        if not math.isfinite(ev.total):
            nonfinite = True
            log.warning("non-finite objective at step %d; keeping best iterate", k)
            break
        trace.append(ev.total)
        if best is None or ev.total < best[0]:
            best = (ev.total, ev.misfit, ev.penalty, a.copy(), B.copy(), c.copy())
        if k == iterations:
            break
        if not all(np.all(np.isfinite(g)) for g in ev.grad):
            nonfinite = True
            break
        adam.step((a, B, c), ev.grad, frozen)
        if r is not None:
            redrawn += sn.project_arrays(a, B, c, r, rng)
        if callback is not None:
            callback(k + 1, a, B, c)

    if best is None:
        best = (math.nan, math.nan, math.nan, np.array(net.outer), np.array(net.inner_weights),
                np.array(net.inner_bias))
    if redrawn:
        log.warning("re-initialized %d degenerate neuron(s) during training", redrawn)
    out = sn.TwoLayerNet(best[3], best[4], best[5], radius=r)
    return TrainResult(out, trace, best[0], best[1], best[2], adam, nonfinite, redrawn, error)
