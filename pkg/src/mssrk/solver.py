"""Shared implicit-stage solver configuration and linear-algebra helpers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RCOND = 1e-10


class SolverError(RuntimeError):
    """Stage solve failed; carries the final residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SolverConfig:
    """Stage-solver tolerances: max-norm residual target and iteration cap."""

    tol: float = 1e-13
    max_iter: int = 500

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")


def lstsq_min_norm(A: np.ndarray, b: np.ndarray, rcond: float = RCOND) -> np.ndarray:
    """Minimum-norm least-squares solve; handles rank-deficient systems."""
    x, *_ = np.linalg.lstsq(A, b, rcond=rcond)
    return x


def robust_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct solve with least-squares fallback for (near-)singular systems."""
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return lstsq_min_norm(A, b)
    scale = max(1.0, float(np.abs(b).max()))
    if not np.all(np.isfinite(x)) or float(np.abs(A @ x - b).max()) > 1e-8 * scale:
        return lstsq_min_norm(A, b)
    return x


def range_projector(M: np.ndarray, rcond: float = RCOND) -> np.ndarray:
    """Orthogonal projector onto the column space of M.

    For the skew structure matrices this equals the projector onto
    (ker M)^perp, used to restrict transport relations to the components
    the conservation identities actually constrain.
    """
    u, s, _ = np.linalg.svd(M)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(M)
    r = int(np.sum(s > rcond * s[0]))
    ur = u[:, :r]
    return ur @ ur.T
