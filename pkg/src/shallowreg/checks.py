"""Fast oracle and property checks behind ``shallowreg verify``."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import shallow_net as sn
from .bench import build_problem, generate_exact
from .discretization import Grid, relative_l2_error
from .operators import AutoConvolution, EIT2D, FredholmGreen
from .optimize import Objective, Penalty, objective_gradient, objective_value


def fredholm_spectral(kmax: int = 5) -> float:
    op = FredholmGreen(101, 51)
    s, t = op.solution_grid.axis, op.data_grid.axis
    return max(relative_l2_error(op.apply(np.sin(k * np.pi * s)),
                                 np.sin(k * np.pi * t) / (k * np.pi) ** 2)
               for k in range(1, kmax + 1))


def eit_laplace() -> float:
    op = EIT2D(31)
    return relative_l2_error(op.apply(np.ones(op.solution_grid.size)), op.laplace_reference())


def gradient_error(objective: Objective, net: sn.TwoLayerNet, step: float = 1e-6,
                   kink: float = 1e-5, floor: float = 1e-6) -> float:
    """Worst relative gap between analytic and central-difference partials.

    Inner parameters of neurons with a kink within ``kink`` of a solution
    node, and partials of ``|.|`` terms at zero, are skipped. Partials
    smaller than ``floor`` times the largest one are compared against that
    floor instead of their own size (difference quotients cannot resolve
    them).
    """
    g = objective_gradient(net, objective)
    floor = floor * max(float(np.max(np.abs(x))) for x in g)
    X = objective.problem.grid.nodes
    Z = sn.preactivation(net.outer, net.inner_weights, net.inner_bias, X)
    near_kink = np.any(np.abs(Z) < kink, axis=0)
    worst = 0.0
    for name in ("outer", "inner_weights", "inner_bias"):
        arr = getattr(net, name)
        G = getattr(g, name)
        for idx in np.ndindex(arr.shape):
            if name != "outer" and near_kink[idx[0]]:
                continue
            if objective.penalty.kind.startswith("path_norm") and abs(arr[idx]) < kink:
                continue

            def value(e):
                A = np.array(arr)
                A[idx] += e
                return objective_value(net.replace(**{name: A}), objective)[0]

            fd = (value(step) - value(-step)) / (2 * step)
            worst = max(worst, abs(fd - G[idx]) / max(abs(fd), abs(G[idx]), floor))
    return worst


def barron_identity(samples: int = 100, seed: int = 2) -> int:
    """Count kernel-sum draws whose stored norm equals a rational brute-force sum."""
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(samples):
        sol = generate_exact("kernel_sum", rng)
        phi = [Fraction(p) for p in sol.coefficients.tolist()]
        total = abs(sum(phi, Fraction(0)))
        for col in sol.nodes.T.tolist():
            total += abs(sum((p * Fraction(x) for p, x in zip(phi, col)), Fraction(0)))
        hits += sol.barron_norm == float(total)
    return hits


PENALTIES = {
    "none": Penalty(),
    "h1": Penalty.h1_scaled(0.1 / np.sqrt(5), 0.1),
    "path_norm": Penalty("path_norm", 0.1 / np.sqrt(5)),
    "path_norm_squared": Penalty.path_norm_squared(0.05),
}


def gradient_suite(width: int = 5, seed: int = 0) -> dict:
    """Worst finite-difference gap per (example, penalty) on a width-``width`` net."""
    out = {}
    for example in ("fredholm", "autoconv", "eit"):
        problem, _, _ = build_problem(example, 0.01, seed)
        rng = np.random.default_rng(seed)
        net = sn.random_net(width, problem.grid.dim, rng, radius=np.inf)
        if example == "eit":
            # keep the conductivity above the clamp
            net = net.replace(outer=np.abs(net.outer) + 3.0)
        for pname, pen in PENALTIES.items():
            misfit = "rms_squared" if pname == "path_norm_squared" else "rms"
            out[(example, pname)] = gradient_error(Objective(problem, misfit, pen), net)
    return out


def run_checks():
    results = []

    err = fredholm_spectral()
    results.append(("fredholm spectral oracle", err <= 0.01, f"max rel err {err:.2e}"))

    op = AutoConvolution(101)
    f = np.random.default_rng(1).normal(size=101)
    even = np.array_equal(op.apply(f), op.apply(-f))
    ones = np.max(np.abs(op.apply(np.ones(101)) - op.solution_grid.axis))
    results.append(("autoconvolution identities", even and ones <= 1e-12,
                    f"even={even}, |A(1)-t|={ones:.1e}"))

    err = eit_laplace()
    results.append(("EIT separation-of-variables oracle", err <= 0.05, f"rel err {err:.2e}"))

    grads = gradient_suite()
    worst = {k: v for k, v in grads.items()}
    ok = all(v <= (1e-3 if k[0] == "eit" else 1e-4) for k, v in worst.items())
    results.append(("composite gradients", ok, f"worst {max(worst.values()):.1e}"))

    exact = barron_identity()
    results.append(("Barron norm identity", exact == 100, f"{exact}/100 exact"))

    g = Grid.uniform(1, 101)
    q = abs(g.integrate(np.sin(np.pi * g.nodes[:, 0])) - 2 / np.pi)
    results.append(("trapezoid sin(pi x)", q <= 1e-3, f"abs err {q:.1e}"))
    return results
