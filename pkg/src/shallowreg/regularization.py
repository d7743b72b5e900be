"""Width-expanding regularization drivers.

``run_algorithm1`` trains on the bounded set ``|a_j| <= r(n)`` with
``r(n) -> B``, ``run_algorithm2`` adds a ``beta_n``-weighted penalty and
lets ``r(n)`` grow, and ``run_tikhonov`` sweeps every width with a
squared misfit plus ``alpha * (path norm)**2``. The two expanding methods
stop at the first width whose residual satisfies ``J <= tau * delta``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from . import shallow_net as sn
from .discretization import relative_l2_error, rms_norm
from .optimize import AdamState, ForwardProblem, Objective, Penalty, train_fixed_width


@dataclass(frozen=True)
class Schedule:
    """Width schedule ``b(k) = n_start + step (k - 1)``, capped at ``n_max``,
    plus the stopping and penalty constants."""

    n_start: int = 50
    step: int = 20
    n_max: int = 1000
    tau: float = 1.0001
    iterations: int = 600
    learning_rate: float = 1e-3
    c0: float = 0.1
    theta: float = 1.0
    c_r1: float = 0.1
    eta: float = 0.8

    def __post_init__(self):
        if not self.tau > 1:
            raise ValueError("tau must exceed 1")
        if self.n_start <= 0 or self.step <= 0 or self.n_max < self.n_start:
            raise ValueError("invalid width schedule")
        if min(self.c0, self.theta, self.c_r1, self.eta, self.learning_rate) <= 0:
            raise ValueError("schedule coefficients must be positive")
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")

    def widths(self) -> list[int]:
        w = list(range(self.n_start, self.n_max + 1, self.step))
        if w[-1] != self.n_max:
            w.append(self.n_max)
        return w

    def beta(self, n: int) -> float:
        return self.c0 * n ** (-self.theta / 2.0)

    def alpha(self, delta: float, n: int) -> float:
        return (delta + 1.0 / n) ** self.eta

    def replace(self, **changes) -> "Schedule":
        d = asdict(self)
        d.update(changes)
        return Schedule(**d)


def bounded_radius(B: float) -> Callable[[int], float]:
    """``r(n) = B n / (n + 1)``: increasing, with limit ``B``."""
    return lambda n: B * n / (n + 1.0)


def growing_radius(n: int) -> float:
    return math.sqrt(n)


@dataclass
class RunRow:
    n: int
    misfit: float
    rel_l2_error: float
    path_norm: float
    wall_ms: float
    objective: float = math.nan
    net: sn.TwoLayerNet | None = field(default=None, repr=False)
    initial_net: sn.TwoLayerNet | None = field(default=None, repr=False)


@dataclass
class RunRecord:
    rows: list = field(default_factory=list)
    stop_k: int | None = None
    stop_n: int | None = None
    terminated_by: str = "budget"
    config: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def widths(self) -> list[int]:
        return [r.n for r in self.rows]

    @property
    def argmin_error_n(self) -> int | None:
        if not self.rows:
            return None
        return min(self.rows, key=lambda r: r.rel_l2_error).n

    @property
    def final_net(self):
        return self.rows[-1].net if self.rows else None


def _expanding_run(problem: ForwardProblem, schedule: Schedule, rng: np.random.Generator,
                   radius: Callable[[int], float], objective_for: Callable[[int], Objective],
                   iterations: int, stop_at_discrepancy: bool, keep_nets: bool,
                   callback, config: dict) -> RunRecord:
    record = RunRecord(config=dict(config))
    threshold = schedule.tau * problem.delta
    d = problem.grid.dim
    net = None
    adam = None
    for k, n in enumerate(schedule.widths(), start=1):
        r = radius(n)
        if net is None:
            start = sn.random_net(n, d, rng, radius=r)
            adam = AdamState.zeros(n, d, learning_rate=schedule.learning_rate)
        else:
            start = sn.expand_width(net, n, rng, radius=r)
            adam = adam.expanded(n)
        hook = None
        if callback is not None:
            hook = (lambda step, a, B, c, _n=n, _r=r: callback(_n, _r, step, a, B, c))
        t0 = time.perf_counter()
        res = train_fixed_width(start, objective_for(n), iterations, constraint_r=r, rng=rng,
                                adam=adam, callback=hook)
        wall = 1e3 * (time.perf_counter() - t0)
        adam = res.adam
        if res.error is not None or res.nonfinite:
            record.failures.append({"n": n, "error": res.error or "non-finite objective"})
            if not math.isfinite(res.best_value):
                break
        net = res.net
        f = sn.forward(net.outer, net.inner_weights, net.inner_bias, problem.grid.nodes)[0]
        J = rms_norm(problem.operator.apply(f) - problem.noisy)
        record.rows.append(RunRow(
            n=n, misfit=J, rel_l2_error=relative_l2_error(f, problem.exact),
            path_norm=sn.path_norm(net), wall_ms=wall, objective=res.best_value,
            net=net if keep_nets else None, initial_net=start if keep_nets else None))
        if record.stop_n is None and J <= threshold:
            record.stop_k, record.stop_n = k, n
            if stop_at_discrepancy:
                record.terminated_by = "discrepancy"
                break
    if not keep_nets and record.rows:
        record.rows[-1].net = net
    return record


def run_algorithm1(problem: ForwardProblem, schedule: Schedule, energy_bound: float,
                   rng: np.random.Generator, *, stop_at_discrepancy: bool = True,
                   keep_nets: bool = False, callback=None) -> RunRecord:
    """Expanding network with known bound ``B >= c_rho(f^dagger)``.

    Minimizes the plain residual norm over ``|a_j| <= B n / (n + 1)``.
    With ``stop_at_discrepancy=False`` the sweep continues to ``n_max`` and
    the discrepancy width is only recorded.
    """
    if not energy_bound > 0:
        raise ValueError("energy bound must be positive")
    objective = Objective(problem, "rms")
    config = {"algorithm": "enn1", "energy_bound": energy_bound, "radius_rule": "B*n/(n+1)",
              "delta": problem.delta, "schedule": asdict(schedule)}
    return _expanding_run(problem, schedule, rng, bounded_radius(energy_bound),
                          lambda n: objective, schedule.iterations, stop_at_discrepancy,
                          keep_nets, callback, config)


def run_algorithm2(problem: ForwardProblem, schedule: Schedule, rng: np.random.Generator,
                   penalty: str = "h1", *, stop_at_discrepancy: bool = True,
                   keep_nets: bool = False, callback=None) -> RunRecord:
    """Penalized expanding network, ``J + beta_n R(f)`` with ``r(n) = sqrt(n)``.

    ``penalty="h1"`` uses ``R = C_R1 ||f||_H1``; ``"path_norm"`` uses the
    path norm itself. Discrepancy is checked on ``J`` alone.
    """
    if penalty == "h1":
        def objective_for(n):
            return Objective(problem, "rms", Penalty.h1_scaled(schedule.beta(n), schedule.c_r1))
    elif penalty == "path_norm":
        def objective_for(n):
            return Objective(problem, "rms", Penalty("path_norm", schedule.beta(n)))
    else:
        raise ValueError(f"unknown penalty {penalty!r}")
    config = {"algorithm": "enn2", "penalty": penalty, "radius_rule": "sqrt(n)",
              "delta": problem.delta, "schedule": asdict(schedule)}
    return _expanding_run(problem, schedule, rng, growing_radius, objective_for,
                          schedule.iterations, stop_at_discrepancy, keep_nets, callback, config)


def run_tikhonov(problem: ForwardProblem, schedule: Schedule, rng: np.random.Generator, *,
                 keep_nets: bool = False, callback=None) -> RunRecord:
    """Sweep all widths minimizing ``J**2 + alpha (path norm)**2``,
    ``alpha = (delta + 1/n)**eta``, with unbounded ``a`` and normalized
    ``(b, c)``. No stopping rule; the discrepancy width is still recorded."""
    def objective_for(n):
        return Objective(problem, "rms_squared",
                         Penalty.path_norm_squared(schedule.alpha(problem.delta, n)))
    config = {"algorithm": "tikhonov", "alpha_rule": "(delta+1/n)**eta",
              "delta": problem.delta, "schedule": asdict(schedule)}
    return _expanding_run(problem, schedule, rng, lambda n: math.inf, objective_for,
                          schedule.iterations, False, keep_nets, callback, config)
