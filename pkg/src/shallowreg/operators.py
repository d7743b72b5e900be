"""Discretized forward operators for the three benchmark problems.

Every operator maps nodal values on its solution grid to a data vector and
provides ``pullback(f, seed)``, the gradient of ``f -> <apply(f), seed>``
with respect to the nodal values (plain Euclidean inner products). The
pullback is what the trainer chains into the network's parameter gradient.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import Grid, trapezoid_weights


class OperatorError(RuntimeError):
    """A forward or adjoint solve failed."""


class ForwardOperator:
    kind: str = ""
    solution_grid: Grid
    data_grid: Grid | None

    @property
    def data_size(self) -> int:
        return self.data_grid.size

    def _check(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float).ravel()
        if f.shape[0] != self.solution_grid.size:
            raise ValueError(
                f"{self.kind}: expected {self.solution_grid.size} nodal values, got {f.shape[0]}")
        return f

    def apply(self, f) -> np.ndarray:
        raise NotImplementedError

    def pullback(self, f, seed) -> np.ndarray:
        raise NotImplementedError

    def linearize(self, f):
        """Return ``(apply(f), vjp)`` where ``vjp(seed) == pullback(f, seed)``."""
        return self.apply(f), lambda seed: self.pullback(f, seed)

    def settings(self) -> dict:
        return {"kind": self.kind, "solution_points": self.solution_grid.size,
                "data_points": self.data_size}


class FredholmGreen(ForwardOperator):
    """First-kind integral operator with the Green's kernel of ``-u''`` on [0, 1].

    ``K(t, s) = s (1 - t)`` for ``s <= t`` and ``t (1 - s)`` otherwise;
    integrated with trapezoidal weights on the solution grid.
    """

    kind = "fredholm_green"

    def __init__(self, n_solution: int = 101, n_data: int = 51):
        self.solution_grid = Grid.uniform(1, n_solution)
        self.data_grid = Grid.uniform(1, n_data)
        t = self.data_grid.axis[:, None]
        s = self.solution_grid.axis[None, :]
        K = np.where(s <= t, s * (1.0 - t), t * (1.0 - s))
        self.matrix = K * trapezoid_weights(n_solution)[None, :]
        self.matrix.setflags(write=False)

    def apply(self, f):
        return self.matrix @ self._check(f)

    def pullback(self, f, seed):
        seed = np.asarray(seed, dtype=float).ravel()
        if seed.shape[0] != self.data_size:
            raise ValueError(f"seed must have {self.data_size} entries")
        return self.matrix.T @ seed

    def linearize(self, f):
        return self.apply(f), lambda seed: self.pullback(None, seed)


class AutoConvolution(ForwardOperator):
    """``A(f)(t) = int_0^t f(t - s) f(s) ds`` on a uniform grid, trapezoidal rule.

    With ``s_j = j h`` the reflection ``t_i - s_j = t_{i-j}`` is exact, so
    ``g_i = h (sum_{j<=i} f_{i-j} f_j - f_i f_0)``.
    """

    kind = "autoconvolution"

    def __init__(self, n: int = 101):
        self.solution_grid = Grid.uniform(1, n)
        self.data_grid = self.solution_grid
        self.h = self.solution_grid.spacing

    def apply(self, f):
        f = self._check(f)
        n = f.shape[0]
        return self.h * (np.convolve(f, f)[:n] - f * f[0])

    def pullback(self, f, seed):
        f = self._check(f)
        s = np.asarray(seed, dtype=float).ravel()
        n = f.shape[0]
        # corr[k] = sum_{i>=k} s_i f_{i-k}
        corr = np.convolve(s[::-1], f)[:n][::-1]
        out = 2.0 * corr - s * f[0]
        out[0] -= np.dot(s, f)
        return self.h * out


class EIT2D(ForwardOperator):
    """Conductivity equation ``div(f grad u) = 0`` on the unit square.

    Five-point conservative finite differences on the ``n x n`` node grid
    (face conductivity = mean of the two adjacent nodes), Dirichlet data
    ``sin(pi x)`` on ``y = 0`` and zero elsewhere. The measured current
    ``f du/dnu`` uses a second-order one-sided normal difference at each
    boundary node and is then linearly resampled, edge by edge, onto the
    ``4 (n+1) - 4`` boundary nodes of the next finer tensor grid.

    Boundary samples are ordered counter-clockwise from ``(0, 0)``: bottom
    edge (increasing x), right edge (increasing y), top edge (decreasing x),
    left edge (decreasing y). Each corner belongs to the edge that starts
    there.
    """

    kind = "eit2d"

    def __init__(self, n: int = 31, floor: float = 1e-3, rtol: float = 1e-10):
        self.n = n
        self.floor = floor
        self.rtol = rtol
        self.solution_grid = Grid.uniform(2, n)
        self.data_grid = None
        self.h = 1.0 / (n - 1)
        idx = np.arange(n * n).reshape(n, n)
        self._idx = idx
        interior = np.zeros((n, n), dtype=bool)
        interior[1:-1, 1:-1] = True
        self.interior = np.flatnonzero(interior.ravel())
        self.boundary = np.flatnonzero(~interior.ravel())
        pos = np.full(n * n, -1)
        pos[self.interior] = np.arange(self.interior.size)
        self._ipos = pos

        # faces touching at least one interior node
        p = np.concatenate([idx[:-1, :].ravel(), idx[:, :-1].ravel()])
        q = np.concatenate([idx[1:, :].ravel(), idx[:, 1:].ravel()])
        keep = interior.ravel()[p] | interior.ravel()[q]
        self.face_p, self.face_q = p[keep], q[keep]

        x = np.linspace(0.0, 1.0, n)
        h_full = np.zeros((n, n))
        h_full[:, 0] = np.sin(np.pi * x)
        h_full[0, 0] = h_full[-1, 0] = 0.0
        self.dirichlet = h_full.ravel()

        # per-edge boundary nodes, each ordered along the counter-clockwise
        # parameter, with the first and second inward neighbours
        r = np.arange(n)
        edges = [
            (idx[r, 0], idx[r, 1], idx[r, 2]),                       # bottom, +x
            (idx[-1, r], idx[-2, r], idx[-3, r]),                    # right, +y
            (idx[r[::-1], -1], idx[r[::-1], -2], idx[r[::-1], -3]),  # top, -x
            (idx[0, r[::-1]], idx[1, r[::-1]], idx[2, r[::-1]]),     # left, -y
        ]
        self.edge_nodes = np.concatenate([e[0] for e in edges])
        # outward normal derivative ~ (3 u0 - 4 u1 + u2) / (2h)
        rows = np.repeat(np.arange(4 * n), 3)
        cols = np.column_stack([np.concatenate([e[k] for e in edges]) for k in range(3)]).ravel()
        vals = np.tile([3.0, -4.0, 1.0], 4 * n) / (2.0 * self.h)
        self.normal_diff = sp.csr_matrix((vals, (rows, cols)), shape=(4 * n, n * n))

        m = n + 1
        self.n_samples = 4 * m - 4
        sample_t = np.arange(m - 1) / (m - 1)
        W = np.zeros((m - 1, n))
        for k, t in enumerate(sample_t):
            pos_ = t * (n - 1)
            j = min(int(math.floor(pos_)), n - 2)
            w = pos_ - j
            W[k, j] = 1.0 - w
            W[k, j + 1] += w
        self.resample = np.kron(np.eye(4), W)
        self.sample_points = self._sample_points(sample_t)

    def _sample_points(self, t):
        z, o = np.zeros_like(t), np.ones_like(t)
        return np.concatenate([
            np.column_stack([t, z]), np.column_stack([o, t]),
            np.column_stack([1.0 - t, o]), np.column_stack([z, 1.0 - t]),
        ])

    @property
    def data_size(self) -> int:
        return self.n_samples

    def settings(self) -> dict:
        return {"kind": self.kind, "solution_points": self.solution_grid.size,
                "data_points": self.n_samples, "conductivity_floor": self.floor,
                "linear_solver": "scipy.sparse.linalg.splu", "solver_rtol": self.rtol,
                "normal_difference": "second-order one-sided",
                "boundary_resampling": "linear, per edge"}

    # ------------------------------------------------------------------ solve

    def _solve(self, f):
        f = self._check(f)
        fc = np.maximum(f, self.floor)
        sigma = 0.5 * (fc[self.face_p] + fc[self.face_q])
        N = self.n * self.n
        p, q = self.face_p, self.face_q
        rows = np.concatenate([p, q, p, q])
        cols = np.concatenate([p, q, q, p])
        vals = np.concatenate([sigma, sigma, -sigma, -sigma])
        L = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
        A_II = L[self.interior][:, self.interior].tocsc()
        rhs = -(L[self.interior][:, self.boundary] @ self.dirichlet[self.boundary])
        try:
            lu = spla.splu(A_II)
        except RuntimeError as exc:
            raise OperatorError(f"EIT factorization failed: {exc}") from exc
        uI = lu.solve(rhs)
        res = np.linalg.norm(A_II @ uI - rhs)
        scale = max(np.linalg.norm(rhs), 1e-300)
        if not np.isfinite(res) or res > self.rtol * scale and res > 1e-14:
            raise OperatorError(f"EIT solve residual {res:.3e} exceeds tolerance")
        u = self.dirichlet.copy()
        u[self.interior] = uI
        return fc, u, lu

    def potential(self, f) -> np.ndarray:
        """Nodal potential ``u`` as an ``(n, n)`` array indexed ``[ix, iy]``."""
        return self._solve(f)[1].reshape(self.n, self.n)

    def apply(self, f):
        fc, u, _ = self._solve(f)
        edge_flux = fc[self.edge_nodes] * (self.normal_diff @ u)
        return self.resample @ edge_flux

    def linearize(self, f):
        f = self._check(f)
        fc, u, lu = self._solve(f)
        du = self.normal_diff @ u
        g = self.resample @ (fc[self.edge_nodes] * du)
        active = f > self.floor

        def vjp(seed):
            seed = np.asarray(seed, dtype=float).ravel()
            if seed.shape[0] != self.n_samples:
                raise ValueError(f"seed must have {self.n_samples} entries")
            z = self.resample.T @ seed
            grad = np.zeros(self.n * self.n)
            np.add.at(grad, self.edge_nodes, z * du)
            dJdu = self.normal_diff.T @ (fc[self.edge_nodes] * z)
            lam_I = lu.solve(dJdu[self.interior], trans="T")
            lam = np.zeros(self.n * self.n)
            lam[self.interior] = lam_I
            p, q = self.face_p, self.face_q
            dsigma = -(lam[p] - lam[q]) * (u[p] - u[q])
            np.add.at(grad, p, 0.5 * dsigma)
            np.add.at(grad, q, 0.5 * dsigma)
            return np.where(active, grad, 0.0)

        return g, vjp

    def pullback(self, f, seed):
        return self.linearize(f)[1](seed)

    # ----------------------------------------------------------- reference

    def laplace_reference(self) -> np.ndarray:
        """Exact ``du/dnu`` at the sample points for ``f = 1``.

        ``u = sin(pi x) sinh(pi (1 - y)) / sinh(pi)``.
        """
        x, y = self.sample_points[:, 0], self.sample_points[:, 1]
        m = self.n  # samples per edge
        out = np.empty(self.n_samples)
        sh = math.sinh(math.pi)
        b, r, t, l = (slice(k * m, (k + 1) * m) for k in range(4))
        out[b] = math.pi * np.sin(np.pi * x[b]) * math.cosh(math.pi) / sh
        out[r] = -math.pi * np.sinh(np.pi * (1.0 - y[r])) / sh
        out[t] = -math.pi * np.sin(np.pi * x[t]) / sh
        out[l] = -math.pi * np.sinh(np.pi * (1.0 - y[l])) / sh
        return out


def make_operator(example: str) -> ForwardOperator:
    if example == "fredholm":
        return FredholmGreen(101, 51)
    if example == "autoconv":
        return AutoConvolution(101)
    if example == "eit":
        return EIT2D(31)
    raise ValueError(f"unknown example {example!r}")
