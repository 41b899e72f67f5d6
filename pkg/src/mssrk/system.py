"""Descriptors for stochastic Hamiltonian PDE instances.

A system is K dz/dt + sum_d L_d dz/dx_d = grad S1 + grad S2 o dW with
skew-symmetric K, L_d.  Gradient and Hessian evaluators must be pure and
batched: they accept state arrays of shape (..., n) and return (..., n)
respectively (..., n, n).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

FD_STEP = 1e-5
FD_TOL = 1e-6
SKEW_TOL = 1e-12


@dataclass(frozen=True)
class SystemSpec:
    """Structure matrices plus Hamiltonian gradient/Hessian evaluators."""

    n: int
    K: np.ndarray
    L: tuple
    grad_s1: Callable[[np.ndarray], np.ndarray]
    grad_s2: Callable[[np.ndarray], np.ndarray]
    hess_s1: Callable[[np.ndarray], np.ndarray]
    hess_s2: Callable[[np.ndarray], np.ndarray]
    linear_flag: bool = False
    name: str = ""

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        L = tuple(np.asarray(Ld, dtype=float) for Ld in self.L)
        if self.n < 2:
            raise ValueError("state dimension must be >= 2")
        if K.shape != (self.n, self.n):
            raise ValueError(f"K must be {self.n}x{self.n}, got {K.shape}")
        for d, Ld in enumerate(L):
            if Ld.shape != (self.n, self.n):
                raise ValueError(f"L[{d}] must be {self.n}x{self.n}, got {Ld.shape}")
        K.setflags(write=False)
        for Ld in L:
            Ld.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "L", L)


@dataclass(frozen=True)
class QuadraticSpec:
    """Quadratic Hamiltonians S1 = z'Az/2, S2 = z'Bz/2."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A, B must be square and same shape, got {A.shape}, {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)


def validate(spec: SystemSpec, num_probe_states: int = 10, seed: int = 0) -> list[str]:
    """Check the structural invariants; violations are returned, not raised."""
    violations = []
    skew = np.abs(spec.K + spec.K.T).max()
    if skew > SKEW_TOL:
        violations.append(f"K not skew-symmetric, residual {skew:.17g}")
    for d, Ld in enumerate(spec.L):
        skew = np.abs(Ld + Ld.T).max()
        if skew > SKEW_TOL:
            violations.append(f"L[{d}] not skew-symmetric, residual {skew:.17g}")

    rng = np.random.default_rng(seed)
    states = rng.standard_normal((num_probe_states, spec.n))
    for label, grad, hess in (
        ("s1", spec.grad_s1, spec.hess_s1),
        ("s2", spec.grad_s2, spec.hess_s2),
    ):
        H = np.asarray(hess(states))
        if H.shape != (num_probe_states, spec.n, spec.n):
            violations.append(
                f"hess_{label} returned shape {H.shape}, "
                f"expected {(num_probe_states, spec.n, spec.n)}"
            )
            continue
        asym = np.abs(H - np.swapaxes(H, -1, -2)).max()
        if asym > SKEW_TOL:
            violations.append(f"hess_{label} not symmetric, residual {asym:.17g}")
        # central finite differences of the gradient against the Hessian
        fd = np.empty_like(H)
        for j in range(spec.n):
            e = np.zeros(spec.n)
            e[j] = FD_STEP
            fd[..., j] = (np.asarray(grad(states + e)) - np.asarray(grad(states - e))) / (
                2.0 * FD_STEP
            )
        err = np.abs(fd - H).max()
        if err > FD_TOL:
            violations.append(
                f"hess_{label} disagrees with finite differences of grad_{label}, "
                f"residual {err:.17g}"
            )
    return violations


def make_quadratic_system(
    K: np.ndarray,
    L: Sequence[np.ndarray],
    q: QuadraticSpec,
    name: str = "",
) -> SystemSpec:
    """System with grad S1 = Az, grad S2 = Bz and constant Hessians."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if q.A.shape != (n, n):
        raise ValueError(f"A must be {n}x{n}, got {q.A.shape}")
    A = q.A.copy()
    B = q.B.copy()

    def _const_hess(M):
        def hess(z):
            z = np.asarray(z)
            return np.broadcast_to(M, z.shape[:-1] + M.shape).copy()

        return hess

    return SystemSpec(
        n=n,
        K=K,
        L=tuple(L),
        grad_s1=lambda z: np.asarray(z) @ A.T,
        grad_s2=lambda z: np.asarray(z) @ B.T,
        hess_s1=_const_hess(A),
        hess_s2=_const_hess(B),
        linear_flag=True,
        name=name,
    )


def quadratic_invariant_preconditions(K: np.ndarray, q: QuadraticSpec, tol: float = SKEW_TOL) -> list[str]:
    """Corollary preconditions: K nonsingular, K^-1 A and K^-1 B skew."""
    violations = []
    K = np.asarray(K, dtype=float)
    if abs(np.linalg.det(K)) < 1e-300 or np.linalg.cond(K) > 1e12:
        violations.append("K is singular or near-singular")
        return violations
    Kinv = np.linalg.inv(K)
    for label, M in (("K^-1 A", Kinv @ q.A), ("K^-1 B", Kinv @ q.B)):
        skew = np.abs(M + M.T).max()
        if skew > tol:
            violations.append(f"{label} not skew-symmetric, residual {skew:.17g}")
    return violations


def transport2(alpha: float = 1.0, beta: float = 0.5) -> SystemSpec:
    """2-component periodic test system with rotation-type Hamiltonians.

    K = [[0,-1],[1,0]], L = [[0,1],[-1,0]], A = alpha*I, B = beta*I; with
    this K both K^-1 A and K^-1 B are skew, so the stage-weighted squared
    norm is a conserved quantity of any multi-symplectic discretization.
    """
    K = np.array([[0.0, -1.0], [1.0, 0.0]])
    L = np.array([[0.0, 1.0], [-1.0, 0.0]])
    q = QuadraticSpec(A=alpha * np.eye(2), B=beta * np.eye(2))
    return make_quadratic_system(K, [L], q, name="transport2")


def system_from_dict(data: dict) -> SystemSpec:
    """Build a quadratic system from a JSON-style dict.

    Keys: K, L (list of matrices), A, B; "lambda" may replace B with
    lambda * identity.
    """
    unknown = set(data) - {"K", "L", "A", "B", "lambda"}
    if unknown:
        raise ValueError(f"unknown system keys: {sorted(unknown)}")
    K = np.array(data["K"], dtype=float)
    n = K.shape[0]
    L = [np.array(Ld, dtype=float) for Ld in data["L"]]
    A = np.array(data["A"], dtype=float) if "A" in data else np.zeros((n, n))
    if "B" in data:
        B = np.array(data["B"], dtype=float)
    elif "lambda" in data:
        B = float(data["lambda"]) * np.eye(n)
    else:
        B = np.zeros((n, n))
    return make_quadratic_system(K, L, QuadraticSpec(A=A, B=B), name="custom")


def system_from_json(text: str) -> SystemSpec:
    return system_from_dict(json.loads(text))


def builtin_system(name: str) -> SystemSpec:
    """CLI-addressable systems: "transport2" here, "maxwell" in maxwell3d."""
    if name == "transport2":
        return transport2()
    if name == "maxwell":
        from .maxwell3d import maxwell_system

        return maxwell_system(0.5)
    raise ValueError(f"unknown system {name!r}; valid names: maxwell, transport2")
