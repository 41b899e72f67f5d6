"""Truncated Q-Wiener increment sampling.

Increments dW(k, m) = sum_j sqrt(eta_j) e_j(x_m) xi_jk sqrt(tau) share the
same Brownian draws xi_jk across all spatial points, so refining the point
set never changes the underlying path.  Draws come from per-mode Philox
streams keyed on (seed, j), which makes regeneration bit-identical and
independent of how many points are requested.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

EigenFamily = Callable[[int, np.ndarray], np.ndarray]


def sine_family(domain_length: float) -> EigenFamily:
    """Orthonormal L^2(0, ell) sine basis: e_j(x) = sqrt(2) sin(j pi x / ell)."""

    def e(j: int, x: np.ndarray) -> np.ndarray:
        return np.sqrt(2.0) * np.sin(j * np.pi * np.asarray(x) / domain_length)

    return e


def tensor_sine_family(lengths: Sequence[float]) -> EigenFamily:
    """Product of per-axis sine modes with common index j, for points (..., dim)."""
    lengths = np.asarray(lengths, dtype=float)

    def e(j: int, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals = np.prod(np.sqrt(2.0) * np.sin(j * np.pi * x / lengths), axis=-1)
        return vals

    return e


@dataclass(frozen=True)
class QWienerSpec:
    """Spectral truncation of the driving Wiener process."""

    J: int
    eta: np.ndarray
    domain_length: float | Sequence[float]
    seed: int
    eigenfunctions: EigenFamily | None = None

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("truncation J must be >= 1")
        eta = np.asarray(self.eta, dtype=float)
        if eta.shape != (self.J,):
            raise ValueError(f"eta must have length J={self.J}, got {eta.shape}")
        if np.any(eta < 0):
            raise ValueError("eigenvalues must be nonnegative")
        if np.any(np.diff(eta) > 0):
            raise ValueError("eigenvalues must be listed in nonincreasing order")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        if self.eigenfunctions is None:
            lengths = np.atleast_1d(np.asarray(self.domain_length, dtype=float))
            fam = sine_family(float(lengths[0])) if lengths.size == 1 else tensor_sine_family(lengths)
            object.__setattr__(self, "eigenfunctions", fam)


@dataclass(frozen=True)
class NoisePath:
    """Pre-sampled increments, indexed (time step k, spatial point m)."""

    increments: np.ndarray
    tau: float
    points: np.ndarray

    def __post_init__(self):
        self.increments.setflags(write=False)
        self.points.setflags(write=False)


def brownian_increments(spec: QWienerSpec, num_steps: int, tau: float) -> np.ndarray:
    """xi[j, k] * sqrt(tau): mode-j Brownian increments over num_steps steps."""
    xi = np.empty((spec.J, num_steps))
    for j in range(spec.J):
        gen = np.random.Generator(np.random.Philox(key=[int(spec.seed), j]))
        xi[j] = gen.standard_normal(num_steps)
    return xi * np.sqrt(tau)


def _check_points(spec: QWienerSpec, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    lengths = np.atleast_1d(np.asarray(spec.domain_length, dtype=float))
    coords = points if points.ndim == 2 else points[:, None]
    if coords.shape[1] != lengths.size and lengths.size != 1:
        raise ValueError(
            f"points have dimension {coords.shape[1]}, domain has {lengths.size}"
        )
    upper = lengths if lengths.size > 1 else np.full(coords.shape[1], lengths[0])
    if np.any(coords < 0) or np.any(coords > upper):
        raise ValueError("point outside domain")
    return points


def sample_path(
    spec: QWienerSpec, num_steps: int, tau: float, points: np.ndarray
) -> NoisePath:
    """Sample all increments up front for the given evaluation points."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    points = _check_points(spec, points)
    dB = brownian_increments(spec, num_steps, tau)  # (J, steps)
    E = np.stack(
        [spec.eigenfunctions(j, points) for j in range(1, spec.J + 1)]
    )  # (J, M)
    dW = dB.T @ (np.sqrt(spec.eta)[:, None] * E)  # (steps, M)
    return NoisePath(increments=dW, tau=tau, points=points.copy())


def increment_at(path: NoisePath, k: int, m: int) -> float:
    """Stored increment for time step k at spatial point m."""
    steps, npts = path.increments.shape
    if not (0 <= k < steps and 0 <= m < npts):
        raise IndexError(f"(k={k}, m={m}) out of range for {steps} steps, {npts} points")
    return float(path.increments[k, m])


def path_to_csv(path: NoisePath, out) -> None:
    """Write columns k, m, x, dW (x joined with ';' for multi-d points)."""
    writer = csv.writer(out)
    writer.writerow(["k", "m", "x", "dW"])
    pts = path.points if path.points.ndim == 2 else path.points[:, None]
    for k in range(path.increments.shape[0]):
        for m in range(path.increments.shape[1]):
            x = ";".join(f"{c:.17g}" for c in pts[m])
            writer.writerow([k, m, x, f"{path.increments[k, m]:.17g}"])
