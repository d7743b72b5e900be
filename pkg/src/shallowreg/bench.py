"""Exact solutions, experiment orchestration and record serialization.

Seed pipeline: each run seed feeds ``numpy.random.SeedSequence(seed)``,
which is spawned into three independent PCG64 streams, consumed in this
order: (0) exact solution, drawing all nodes then all coefficients;
(1) noise ``xi``; (2) network initialization and expansion. The exact
solution and ``xi`` depend only on the seed, so runs at different noise
levels with the same seed share ``f^dagger`` and the noise direction.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from fractions import Fraction
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .discretization import PRNG_ID, add_noise
from .operators import make_operator
from .optimize import ForwardProblem
from .regularization import RunRecord, RunRow, Schedule, run_algorithm1, run_algorithm2, run_tikhonov

log = logging.getLogger(__name__)

CSV_COLUMNS = ("n", "misfit", "rel_l2_error", "path_norm", "wall_ms")
OUTPUT_ENV = "SHALLOWREG_OUTPUT_DIR"
EXAMPLES = ("fredholm", "autoconv", "eit")
ALGORITHMS = ("enn1", "enn2", "tikhonov")

REFERENCE_SEEDS = {"fredholm": [111, 666, 3333], "autoconv": [678, 765, 987], "eit": [20, 30, 40]}
REFERENCE_DELTAS = [0.0001, 0.001, 0.1, 0.2]


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- exact solutions

@dataclass(frozen=True, eq=False)
class ExactSolution:
    """``f(t) = sum_j phi_j (<t, l_j> + 1)``, or the affine EIT conductivity.

    Both kinds are affine, ``f(t) = u.t + v``, and carry the closed-form
    Barron norm ``|u|_1 + |v|``.
    """

    kind: str
    nodes: np.ndarray          # (T, d)
    coefficients: np.ndarray   # (T,)
    barron_norm: float
    offset: float = 0.0

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def slope(self) -> np.ndarray:
        return self.coefficients @ self.nodes

    @property
    def intercept(self) -> float:
        return float(np.sum(self.coefficients)) + self.offset

    def __call__(self, points) -> np.ndarray:
        X = np.asarray(points, dtype=float).reshape(-1, self.dim)
        K = X @ self.nodes.T + 1.0
        return K @ self.coefficients + self.offset


def kernel_sum_barron_norm(nodes, coefficients) -> float:
    """``|sum_j phi_j l_j|_1 + |sum_j phi_j|`` in exact rational arithmetic,
    rounded once, so the value does not depend on summation order."""
    nodes = np.asarray(nodes, dtype=float).reshape(len(coefficients), -1)
    phi = [Fraction(float(p)) for p in np.ravel(coefficients)]
    u = [sum((p * Fraction(float(l)) for p, l in zip(phi, col)), Fraction(0))
         for col in nodes.T]
    return float(sum(abs(x) for x in u) + abs(sum(phi, Fraction(0))))


def kernel_sum(nodes, coefficients) -> ExactSolution:
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes.reshape(-1, 1)
    phi = np.asarray(coefficients, dtype=float).ravel()
    return ExactSolution("kernel_sum", nodes, phi, kernel_sum_barron_norm(nodes, phi))


def generate_exact(kind: str, rng: np.random.Generator | None = None, *, terms: int = 10,
                   dim: int = 1, low: float = -1.0, high: float = 1.0,
                   p0: float = 1.0) -> ExactSolution:
    """Draw a kernel-sum solution (nodes then coefficients, uniform on
    ``[low, high]``) or build the affine EIT conductivity ``x + y + p0``."""
    if kind == "kernel_sum":
        nodes = rng.uniform(low, high, size=(terms, dim))
        phi = rng.uniform(low, high, size=terms)
        return kernel_sum(nodes, phi)
    if kind == "eit_affine":
        if not p0 > 0:
            raise ValueError("p0 must be positive")
        # x + y + p0 as a single kernel term with l = (1, 1), phi = 1
        return ExactSolution("eit_affine", np.ones((1, 2)), np.ones(1), 2.0 + p0, p0 - 1.0)
    raise ValueError(f"unknown exact-solution kind {kind!r}")


def exact_for_example(example: str, rng) -> ExactSolution:
    if example == "fredholm":
        return generate_exact("kernel_sum", rng, terms=10, dim=1, low=-1.0, high=1.0)
    if example == "autoconv":
        return generate_exact("kernel_sum", rng, terms=5, dim=1, low=0.0, high=1.0)
    if example == "eit":
        return generate_exact("eit_affine", p0=1.0)
    raise UsageError(f"unknown example {example!r}")


# ---------------------------------------------------------------- configuration

@dataclass
class ExperimentConfig:
    example: str
    algorithm: str
    deltas: list
    seeds: list
    out: str = "runs"
    tau: float = 1.0001
    n_max: int | None = None
    iterations: int | None = None
    penalty: str = "h1"
    energy_factor: float = 5.0
    full_sweep: bool = False

    def validate(self):
        if self.example not in EXAMPLES:
            raise UsageError(f"example must be one of {EXAMPLES}, got {self.example!r}")
        if self.algorithm not in ALGORITHMS:
            raise UsageError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        if not self.deltas or any(d < 0 for d in self.deltas):
            raise UsageError("noise levels must be given and nonnegative")
        if self.penalty not in ("h1", "path_norm"):
            raise UsageError(f"unknown penalty {self.penalty!r}")
        if not self.tau > 1:
            raise UsageError("tau must exceed 1")
        if not self.energy_factor >= 1:
            raise UsageError("energy factor must be at least 1")
        if self.n_max is not None and self.n_max < 50:
            raise UsageError("n_max must be at least 50")
        if self.iterations is not None and self.iterations <= 0:
            raise UsageError("iterations must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    def schedule(self) -> Schedule:
        base = default_schedule(self.example, self.algorithm)
        changes = {"tau": self.tau}
        if self.n_max is not None:
            changes["n_max"] = self.n_max
        if self.iterations is not None:
            changes["iterations"] = self.iterations
        return base.replace(**changes)


def default_schedule(example: str, algorithm: str) -> Schedule:
    if example == "eit":
        return Schedule(n_max=500, iterations=2500 if algorithm == "tikhonov" else 1500)
    return Schedule(n_max=1000, iterations=1200 if algorithm == "tikhonov" else 600)


def reference_defaults() -> dict:
    out = {}
    for ex in EXAMPLES:
        op = make_operator(ex)
        out[ex] = {
            "seeds": REFERENCE_SEEDS[ex],
            "deltas": REFERENCE_DELTAS,
            "solution_points": op.solution_grid.size,
            "data_points": op.data_size,
            "schedules": {alg: asdict(default_schedule(ex, alg)) for alg in ALGORITHMS},
        }
    out["exact_solution"] = {
        "fredholm": {"terms": 10, "dim": 1, "cube": [-1, 1]},
        "autoconv": {"terms": 5, "dim": 1, "cube": [0, 1]},
        "eit": {"formula": "x + y + p0", "p0": 1.0},
    }
    out["optimizer"] = {"name": "adam", "learning_rate": 1e-3, "beta1": 0.9, "beta2": 0.999,
                        "epsilon": 1e-8}
    return out


# ---------------------------------------------------------------- running

def seed_streams(seed):
    children = np.random.SeedSequence(seed).spawn(3)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def build_problem(example: str, delta: float, seed):
    """Return ``(problem, exact_solution, net_rng)`` for one cell."""
    exact_rng, noise_rng, net_rng = seed_streams(seed)
    op = make_operator(example)
    sol = exact_for_example(example, exact_rng)
    f_exact = sol(op.solution_grid.nodes)
    clean = op.apply(f_exact)
    data = add_noise(clean, delta, seed=seed, rng=noise_rng)
    return ForwardProblem(op, f_exact, data.clean, data.noisy, delta), sol, net_rng


def run_cell(config: ExperimentConfig, delta: float, seed, *, keep_nets=False,
             callback=None) -> tuple[RunRecord, ExactSolution, ForwardProblem]:
    problem, sol, rng = build_problem(config.example, delta, seed)
    schedule = config.schedule()
    stop = not config.full_sweep
    if config.algorithm == "enn1":
        rec = run_algorithm1(problem, schedule, config.energy_factor * sol.barron_norm, rng,
                             stop_at_discrepancy=stop, keep_nets=keep_nets, callback=callback)
    elif config.algorithm == "enn2":
        rec = run_algorithm2(problem, schedule, rng, config.penalty, stop_at_discrepancy=stop,
                             keep_nets=keep_nets, callback=callback)
    else:
        rec = run_tikhonov(problem, schedule, rng, keep_nets=keep_nets, callback=callback)
    rec.config.update({"example": config.example, "seed": seed,
                       "barron_norm_exact": sol.barron_norm})
    return rec, sol, problem


def cell_stem(config: ExperimentConfig, delta: float, seed) -> str:
    return f"{config.example}_{config.algorithm}_delta{delta:g}_seed{seed}"


def run_experiment(config: ExperimentConfig) -> list[Path]:
    """Run every ``(delta, seed)`` cell and write one CSV + JSON pair per cell."""
    config.validate()
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for delta in config.deltas:
        for seed in config.seeds:
            rec, sol, problem = run_cell(config, delta, seed)
            stem = cell_stem(config, delta, seed)
            manifest = {
                "config": config.to_dict(),
                "cell": {"delta": delta, "seed": seed},
                "prng": PRNG_ID,
                "seed_pipeline": ["exact_solution", "noise", "network"],
                "operator": problem.operator.settings(),
                "exact_solution": {"kind": sol.kind, "nodes": sol.nodes.tolist(),
                                   "coefficients": sol.coefficients.tolist(),
                                   "barron_norm": sol.barron_norm},
                "run": {k: v for k, v in rec.config.items()},
                "stop_k": rec.stop_k,
                "stop_n": rec.stop_n,
                "terminated_by": rec.terminated_by,
                "argmin_error_n": rec.argmin_error_n,
                "failures": rec.failures,
            }
            written.append(emit_csv(rec, out / f"{stem}.csv", manifest))
            log.info("wrote %s (stop n=%s, %s)", stem, rec.stop_n, rec.terminated_by)
    return written


# ---------------------------------------------------------------- serialization

def _fmt(x) -> str:
    return repr(float(x))


def emit_csv(record: RunRecord, path, manifest: dict | None = None) -> Path:
    """Write the per-width table and a sidecar ``.json`` manifest."""
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in record.rows:
                w.writerow([str(int(r.n)), _fmt(r.misfit), _fmt(r.rel_l2_error),
                            _fmt(r.path_norm), f"{r.wall_ms:.3f}"])
        if manifest is None:
            manifest = {"run": record.config, "stop_k": record.stop_k, "stop_n": record.stop_n,
                        "terminated_by": record.terminated_by}
        with open(manifest_path(path), "w") as fh:
            json.dump(manifest, fh, indent=2, default=_json_default)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def manifest_path(csv_path) -> Path:
    """Sidecar manifest for ``csv_path`` (stems may contain dots, e.g. ``delta0.01``)."""
    p = Path(csv_path)
    name = p.name[:-4] if p.name.endswith(".csv") else p.name
    return p.with_name(name + ".json")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def read_csv(path) -> list[RunRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for d in reader:
            rows.append(RunRow(int(d["n"]), float(d["misfit"]), float(d["rel_l2_error"]),
                               float(d["path_norm"]), float(d["wall_ms"])))
    return rows


def numeric_content(path) -> list[tuple]:
    """CSV rows without the timing column, as raw strings."""
    with open(path, newline="") as fh:
        return [tuple(row[:4]) for row in csv.reader(fh)]


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "runs")
