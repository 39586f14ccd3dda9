"""One-step time discretisations used to grow trees and to simulate trajectories.

A stepper is any callable ``step(X, u, t) -> X_next`` acting on a batch of
states ``X`` of shape (k, d) with a single control vector ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import NumericalError, OCProblem

DENSE_LIMIT = 500


@dataclass(frozen=True)
class LinearAffineDynamics:
    """f(y, u) = A y + B u with ``A`` (d, d), dense or sparse, and ``B`` (d,) or (d, m)."""

    A: object
    B: np.ndarray

    def __post_init__(self):
        d = self.A.shape[0]
        if self.A.shape != (d, d):
            raise ValueError(f"A must be square, got {self.A.shape}")
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.shape[0] != d:
            raise ValueError(f"B has {B.shape[0]} rows, A has {d}")
        object.__setattr__(self, "B", B)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def control_dim(self) -> int:
        return self.B.shape[1]

    def forcing(self, u) -> np.ndarray:
        return self.B @ np.atleast_1d(np.asarray(u, dtype=float))

    def __call__(self, X: np.ndarray, u: np.ndarray, t: float = 0.0) -> np.ndarray:
        return (self.A @ X.T).T + self.forcing(u)


def _check_finite(Y: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(Y)):
        rows = np.flatnonzero(~np.all(np.isfinite(Y), axis=-1)) if Y.ndim == 2 else []
        raise NumericalError(f"{what} produced non-finite values (rows {list(rows[:10])})")
    return Y


def explicit_euler_step(problem: OCProblem, x, u, t: float, dt: float) -> np.ndarray:
    """x + dt * f(x, u, t) for a single state or a batch."""
    x = np.asarray(x, dtype=float)
    fx = problem.f(x, u, t)
    _check_finite(fx, "dynamics")
    return x + dt * fx


class ExplicitEuler:
    def __init__(self, problem: OCProblem, dt: float):
        self.problem = problem
        self.dt = dt

    def __call__(self, X: np.ndarray, u, t: float) -> np.ndarray:
        fx = self.problem.dynamics(X, np.atleast_1d(u), t)
        return X + self.dt * _check_finite(fx, "dynamics")


class ImplicitEulerSolver:
    """Factorisation of (I - dt*A), reused for every node and step.

    Sparse ``A`` (or any ``A`` above DENSE_LIMIT rows) goes through a sparse
    LU; small dense matrices use a dense LU.
    """

    def __init__(self, dynamics: LinearAffineDynamics, dt: float):
        self.dynamics = dynamics
        self.dt = dt
        A = dynamics.A
        d = dynamics.dim
        if sp.issparse(A) or d > DENSE_LIMIT:
            M = (sp.identity(d, format="csc") - dt * sp.csc_matrix(A)).tocsc()
            try:
                lu = spla.splu(M)
            except RuntimeError as exc:
                raise np.linalg.LinAlgError(f"I - dt*A is singular: {exc}") from exc
            self._solve = lu.solve
            self.sparse = True
        else:
            import scipy.linalg as sla

            M = np.eye(d) - dt * np.asarray(A, dtype=float)
            if np.linalg.cond(M) > 1e14:
                raise np.linalg.LinAlgError("I - dt*A is singular to working precision")
            factor = sla.lu_factor(M)
            self._solve = lambda rhs: sla.lu_solve(factor, rhs)
            self.sparse = False

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (I - dt*A) y = rhs; ``rhs`` is (d,) or (d, k)."""
        return self._solve(np.ascontiguousarray(rhs, dtype=float))


def implicit_euler_step(solver: ImplicitEulerSolver, x, u, dt: float) -> np.ndarray:
    """Solution y of (I - dt*A) y = x + dt*B*u, for one state or a batch of rows."""
    if abs(dt - solver.dt) > 1e-15 * max(1.0, abs(dt)):
        raise ValueError(f"solver was factorised for dt={solver.dt}, not {dt}")
    x = np.asarray(x, dtype=float)
    rhs = np.atleast_2d(x) + dt * solver.dynamics.forcing(u)
    y = solver.solve(rhs.T).T
    return _check_finite(y.reshape(x.shape), "implicit step")


class ImplicitEuler:
    def __init__(self, dynamics: LinearAffineDynamics, dt: float):
        self.solver = ImplicitEulerSolver(dynamics, dt)
        self.dt = dt

    def __call__(self, X: np.ndarray, u, t: float) -> np.ndarray:
        return implicit_euler_step(self.solver, X, u, self.dt)


def make_stepper(problem: OCProblem, dt: float, scheme: str = "explicit"):
    if scheme == "explicit":
        return ExplicitEuler(problem, dt)
    if scheme == "implicit":
        if problem.linear is None:
            raise ValueError(f"implicit stepping needs linear-affine dynamics; {problem.name or 'problem'} has none")
        return ImplicitEuler(problem.linear, dt)
    raise ValueError(f"unknown scheme {scheme!r} (expected 'explicit' or 'implicit')")
