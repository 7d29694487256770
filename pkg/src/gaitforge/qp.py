"""Dense convex quadratic programming: min 0.5 u'Hu + c'u s.t. Gu <= h.

Solved with a Mehrotra predictor-corrector primal-dual interior point
method. Chosen over operator splitting because the stance-force problems
are small (n <= ~50) and need tight KKT residuals in few iterations at a
500 Hz replan rate; a factorization-based method converges quadratically
near the central path where first-order splitting stalls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from gaitforge import engine


class QpStatus(Enum):
    OPTIMAL = "Optimal"
    MAX_ITERATIONS = "MaxIterations"
    INFEASIBLE = "Infeasible"


_STATUS_FROM_CODE = {
    engine.QP_OPTIMAL: QpStatus.OPTIMAL,
    engine.QP_MAX_ITER: QpStatus.MAX_ITERATIONS,
    engine.QP_INFEASIBLE: QpStatus.INFEASIBLE,
}


@dataclass
class QpProblem:
    """Quadratic program data. With m = 0 rows the problem is unconstrained."""

    hessian: np.ndarray
    linear: np.ndarray
    ineq_matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    ineq_bound: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.hessian = np.ascontiguousarray(self.hessian, dtype=np.float64)
        self.linear = np.ascontiguousarray(self.linear, dtype=np.float64)
        n = self.linear.shape[0]
        if self.hessian.shape != (n, n):
            raise ValueError("hessian/linear dimension mismatch")
        if np.max(np.abs(self.hessian - self.hessian.T), initial=0.0) > 1e-10:
            raise ValueError("hessian must be symmetric to 1e-10")
        G = np.asarray(self.ineq_matrix, dtype=np.float64)
        h = np.asarray(self.ineq_bound, dtype=np.float64)
        if G.size == 0:
            G = np.zeros((0, n))
        if G.ndim != 2 or G.shape[1] != n or h.shape != (G.shape[0],):
            raise ValueError("inequality dimensions inconsistent")
        self.ineq_matrix = np.ascontiguousarray(G)
        self.ineq_bound = np.ascontiguousarray(h)

    @property
    def n(self) -> int:
        return self.linear.shape[0]

    @property
    def m(self) -> int:
        return self.ineq_bound.shape[0]

    def objective(self, u: np.ndarray) -> float:
        return float(0.5 * u @ self.hessian @ u + self.linear @ u)


@dataclass
class QpSolution:
    u: np.ndarray
    status: QpStatus
    kkt_residual: float
    iterations: int
    multipliers: np.ndarray


def _regularized_hessian(H: np.ndarray, regularization: float) -> np.ndarray:
    """Apply the ridge rule: add reg*I when lambda_min is below 1e-10.

    The estimate is a Cholesky probe of H - 1e-10*I, which succeeds exactly
    when lambda_min > 1e-10 (up to roundoff).
    """
    n = H.shape[0]
    probe = H - 1e-10 * np.eye(n)
    try:
        np.linalg.cholesky(probe)
        return H
    except np.linalg.LinAlgError:
        return H + regularization * np.eye(n)


def kkt_residual(problem: QpProblem, u: np.ndarray,
                 multipliers: np.ndarray) -> float:
    """max(stationarity inf-norm, primal violation, |lam'(Gu - h)|)."""
    u = np.asarray(u, dtype=np.float64)
    lam = np.asarray(multipliers, dtype=np.float64)
    if lam.shape != (problem.m,):
        raise ValueError("multiplier dimension mismatch")
    if np.any(lam < 0):
        raise ValueError("multipliers must be nonnegative")
    return float(engine.kkt_residual_dense(
        problem.hessian, problem.linear, problem.ineq_matrix,
        problem.ineq_bound, u, lam))


class QpSolver:
    """Reusable solver workspace with cross-call warm starting.

    One instance per control loop; warm starts are applied when consecutive
    problems share dimensions (the caller is responsible for ensuring they
    are actually related, e.g. same contact pattern).
    """

    def __init__(self, tolerance: float = 1e-8, max_iterations: int = 50,
                 regularization: float = 1e-8):
        if tolerance <= 0 or max_iterations < 1 or regularization < 0:
            raise ValueError("invalid solver configuration")
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.regularization = regularization
        self._u = None
        self._lam = None
        self._s = None

    def reset(self) -> None:
        self._u = None

    def solve(self, problem: QpProblem,
              warm_start: bool = True) -> QpSolution:
        n, m = problem.n, problem.m
        H = _regularized_hessian(problem.hessian, self.regularization)
        warm = (warm_start and self._u is not None
                and self._u.shape[0] == n and self._lam.shape[0] == m)
        if not warm:
            self._u = np.zeros(n)
            self._lam = np.ones(m)
            self._s = np.ones(m)
        code, iters, kkt = engine.ipm_solve_dense(
            H, problem.linear, problem.ineq_matrix, problem.ineq_bound,
            self._u, self._lam, self._s, warm, self.tolerance,
            self.max_iterations, 0.0)
        return QpSolution(self._u.copy(), _STATUS_FROM_CODE[code],
                          float(kkt), int(iters), self._lam.copy())


def solve(problem: QpProblem, tolerance: float = 1e-8,
          max_iterations: int = 50,
          regularization: float = 1e-8) -> QpSolution:
    """One-shot cold solve."""
    return QpSolver(tolerance, max_iterations,
                    regularization).solve(problem, warm_start=False)


def dump_problem(problem: QpProblem, path) -> None:
    """Write the problem to JSON for offline reproduction."""
    Path(path).write_text(json.dumps({
        "hessian": problem.hessian.tolist(),
        "linear": problem.linear.tolist(),
        "ineq_matrix": problem.ineq_matrix.tolist(),
        "ineq_bound": problem.ineq_bound.tolist(),
    }, indent=1))


def load_problem(path) -> QpProblem:
    raw = json.loads(Path(path).read_text())
    return QpProblem(np.array(raw["hessian"]), np.array(raw["linear"]),
                     np.array(raw["ineq_matrix"]), np.array(raw["ineq_bound"]))
