"""Shared sparse linear-solve helper with a residual contract.

The bounded-flow and guidance-potential systems keep a fixed matrix and are
re-solved with fresh right-hand sides thousands of times per mission, so the
factorization is computed once and reused. Every solve is verified against
the same relative-residual tolerance an iterative solver would have been run
to; a violation raises instead of returning a silently bad field.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import SolverError


class CachedFactorSolver:
    """LU-factorized solver for a fixed sparse SPD system."""

    def __init__(self, matrix: sparse.spmatrix, tol: float = 1e-8):
        self.matrix = matrix.tocsc()
        self.tol = tol
        self.last_residual = 0.0
        self._lu = splu(self.matrix)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        norm = np.linalg.norm(rhs)
        if norm == 0.0:
            self.last_residual = 0.0
            return np.zeros_like(rhs)
        x = self._lu.solve(rhs)
        residual = np.linalg.norm(self.matrix @ x - rhs) / norm
        if not np.isfinite(residual) or residual > self.tol:
            raise SolverError(
                f"linear solve missed the {self.tol:g} residual target", residual
            )
        self.last_residual = float(residual)
        return x
