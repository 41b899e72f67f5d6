"""Space-time stochastic RK integrator in one spatial dimension.

Per time step the scheme couples, over all cells of a periodic grid,

  stage states     Z[i,m,k] = z[i,m] + tau * sum_j a_kj Dt[i,m,j]
  time advance     z'[i,m]  = z[i,m] + tau * sum_k b_k  Dt[i,m,k]
  space stages     Z[i,m,k] = zb[i,k] + h * sum_q ax_mq Dx[i,q,k]
  space advance    zb[i+1,k] = zb[i,k] + h * sum_m bx_m Dx[i,m,k]
  stage equation   tau*K Dt + tau*L Dx = tau*grad_s1(Z) + grad_s2(Z)*dW[i,m]

with periodic closure zb[I] = zb[0].  All cells are solved simultaneously
by Newton iteration on the packed unknowns (Dt, Dx, zb); the Jacobian is
assembled exactly from the linearized equations, so linear systems converge
in a single iteration.

When L is singular the spatial stage/advance relations are enforced only in
the (ker L)^perp projection: on even periodic grids the full set admits no
solution (checkerboard modes), while every conservation identity contracts
these relations through L and is therefore blind to the dropped components.
For invertible L the projector is the identity and the scheme is exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .noise import NoisePath
from .solver import (
    SolverConfig,
    SolverError,
    lstsq_min_norm,
    range_projector,
    robust_solve,
)
from .system import SystemSpec
from .tableau import Tableau


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic 1D grid: I cells of width h, P steps of size tau."""

    cells: int
    h: float
    steps: int
    tau: float
    periodic: bool = True

    def __post_init__(self):
        if self.cells < 2:
            raise ValueError("need at least 2 cells")
        if self.h <= 0 or self.tau <= 0:
            raise ValueError("h and tau must be positive")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if not self.periodic:
            raise ValueError("only periodic boundaries are supported")

    @property
    def domain_length(self) -> float:
        return self.cells * self.h


@dataclass
class StepState:
    """Per-cell, per-spatial-stage line values advanced in time."""

    lines: np.ndarray  # (I, s, n)
    level: int = 0


@dataclass
class StageBlock:
    """Converged stage data of one time step."""

    Z: np.ndarray    # (I, s, r, n)
    Dt: np.ndarray   # (I, s, r, n)
    Dx: np.ndarray   # (I, s, r, n)
    zb: np.ndarray   # (I, r, n) boundary stage values at left cell edges
    dW: np.ndarray   # (I, s)
    residual: float
    iterations: int


@dataclass
class TangentPair:
    """Two tangent fields propagated by the linearized scheme."""

    u_lines: np.ndarray  # (I, s, n)
    v_lines: np.ndarray  # (I, s, n)
    level: int = 0
    u_block: StageBlock | None = None
    v_block: StageBlock | None = None


def stage_points(grid: GridSpec, x_tab: Tableau) -> np.ndarray:
    """Spatial stage abscissae x_i + c_m h, flattened over (cell, stage)."""
    c = x_tab.c
    x = (np.arange(grid.cells)[:, None] + c[None, :]) * grid.h
    return x.reshape(-1)


def init_state(grid: GridSpec, x_tab: Tableau, z0: Callable[[np.ndarray], np.ndarray]) -> StepState:
    """Sample z0 at the spatial stage abscissae; z0 is batched over points."""
    pts = stage_points(grid, x_tab)
    vals = np.asarray(z0(pts))
    return StepState(lines=vals.reshape(grid.cells, x_tab.stages, -1).astype(float), level=0)


class Engine1D:
    """Assembles and solves the coupled stage system for one configuration."""

    def __init__(
        self,
        spec: SystemSpec,
        grid: GridSpec,
        t_tab: Tableau,
        x_tab: Tableau,
        solver: SolverConfig | None = None,
    ):
        self.spec = spec
        self.grid = grid
        self.t_tab = t_tab
        self.x_tab = x_tab
        self.solver = solver or SolverConfig()
        self.r = t_tab.stages
        self.s = x_tab.stages
        self.n = spec.n
        self.I = grid.cells
        (self.L,) = spec.L
        self.P = range_projector(self.L)
        sz = self.I * self.s * self.r * self.n
        self._sizes = (sz, sz, self.I * self.r * self.n)
        self.N = sum(self._sizes)
        self._newton_cap = min(self.solver.max_iter, 60)

    # -- packing ---------------------------------------------------------
    def _unpack(self, X):
        I, s, r, n = self.I, self.s, self.r, self.n
        lead = X.shape[:-1]
        c1, c2, _ = self._sizes
        Dt = X[..., :c1].reshape(lead + (I, s, r, n))
        Dx = X[..., c1 : c1 + c2].reshape(lead + (I, s, r, n))
        zb = X[..., c1 + c2 :].reshape(lead + (I, r, n))
        return Dt, Dx, zb

    def _pack(self, Dt, Dx, zb):
        lead = Dt.shape[: -4]
        return np.concatenate(
            [Dt.reshape(lead + (-1,)), Dx.reshape(lead + (-1,)), zb.reshape(lead + (-1,))],
            axis=-1,
        )

    def stage_values(self, lines, Dt):
        return lines[..., :, :, None, :] + self.grid.tau * np.einsum(
            "kj,...isjn->...iskn", self.t_tab.a, Dt
        )

    # -- residuals -------------------------------------------------------
    def residual(self, X, lines, dW):
        tau, h = self.grid.tau, self.grid.h
        Dt, Dx, zb = self._unpack(X)
        Z = self.stage_values(lines, Dt)
        R1 = Z - zb[..., :, None, :, :] - h * np.einsum("mq,...iqkn->...imkn", self.x_tab.a, Dx)
        R1 = R1 @ self.P
        G1 = np.asarray(self.spec.grad_s1(Z))
        G2 = np.asarray(self.spec.grad_s2(Z))
        R2 = (
            tau * (Dt @ self.spec.K.T)
            + tau * (Dx @ self.L.T)
            - tau * G1
            - G2 * dW[:, :, None, None]
        )
        R3 = (
            np.roll(zb, -1, axis=-3)
            - zb
            - h * np.einsum("m,...imkn->...ikn", self.x_tab.b, Dx)
        ) @ self.P
        return self._pack(R1, R2, R3)

    def tangent_residual(self, V, Z, dW, t_lines):
        """Exact linearization of :meth:`residual` around primal stages Z."""
        tau, h = self.grid.tau, self.grid.h
        dDt, dDx, dzb = self._unpack(V)
        dZ = t_lines[..., :, :, None, :] + tau * np.einsum(
            "kj,...isjn->...iskn", self.t_tab.a, dDt
        )
        T1 = dZ - dzb[..., :, None, :, :] - h * np.einsum(
            "mq,...iqkn->...imkn", self.x_tab.a, dDx
        )
        T1 = T1 @ self.P
        H1 = np.asarray(self.spec.hess_s1(Z))
        H2 = np.asarray(self.spec.hess_s2(Z))
        T2 = (
            tau * (dDt @ self.spec.K.T)
            + tau * (dDx @ self.L.T)
            - tau * np.einsum("iskab,...iskb->...iska", H1, dZ)
            - np.einsum("iskab,...iskb->...iska", H2, dZ) * dW[:, :, None, None]
        )
        T3 = (
            np.roll(dzb, -1, axis=-3)
            - dzb
            - h * np.einsum("m,...imkn->...ikn", self.x_tab.b, dDx)
        ) @ self.P
        return self._pack(T1, T2, T3)

    def jacobian(self, Z, dW):
        probes = np.eye(self.N)
        zero_lines = np.zeros((self.I, self.s, self.n))
        return self.tangent_residual(probes, Z, dW, zero_lines).T

    # -- solves ----------------------------------------------------------
    def solve_stages(self, lines, dW):
        X = np.zeros(self.N)
        residual = np.inf
        for it in range(1, self._newton_cap + 1):
            F = self.residual(X, lines, dW)
            residual = float(np.abs(F).max())
            if not np.isfinite(residual):
                raise SolverError("non-finite stage residual", residual)
            if residual <= self.solver.tol:
                return X, residual, it
            Z = self.stage_values(lines, self._unpack(X)[0])
            J = self.jacobian(Z, dW)
            self._J_cache = (J, dW)
            dX = robust_solve(J, -F)
            # non-multi-symplectic tableaux can make the periodic stage
            # system inconsistent; a stationary least-squares point is then
            # the best attainable solve and is returned with its residual
            if float(np.abs(dX).max()) <= self.solver.tol * 10.0 * max(
                1.0, float(np.abs(X).max())
            ):
                return X, residual, it
            X = X + dX
        raise SolverError("stage solver did not converge", residual)

    def step(self, state: StepState, noise: NoisePath) -> tuple[StepState, StageBlock]:
        dW = noise.increments[state.level].reshape(self.I, self.s)
        X, residual, its = self.solve_stages(state.lines, dW)
        Dt, Dx, zb = self._unpack(X)
        Z = self.stage_values(state.lines, Dt)
        new_lines = state.lines + self.grid.tau * np.einsum("k,iskn->isn", self.t_tab.b, Dt)
        block = StageBlock(Z=Z, Dt=Dt, Dx=Dx, zb=zb, dW=dW, residual=residual, iterations=its)
        return StepState(lines=new_lines, level=state.level + 1), block

    def tangent_step(self, block: StageBlock, pair: TangentPair) -> TangentPair:
        """Propagate both tangent fields through the step that produced block."""
        t_lines = np.stack([pair.u_lines, pair.v_lines])  # (2, I, s, n)
        V0 = np.zeros((2, self.N))
        F0 = self.tangent_residual(V0, block.Z, block.dW, t_lines)
        cached = getattr(self, "_J_cache", None)
        if self.spec.linear_flag and cached is not None and cached[1] is block.dW:
            J = cached[0]
        else:
            J = self.jacobian(block.Z, block.dW)
        V = robust_solve(J, -F0.T).T
        blocks = []
        new_lines = []
        for b in range(2):
            dDt, dDx, dzb = self._unpack(V[b])
            res = float(np.abs(self.tangent_residual(V[b], block.Z, block.dW, t_lines[b])).max())
            dZ = t_lines[b][:, :, None, :] + self.grid.tau * np.einsum(
                "kj,isjn->iskn", self.t_tab.a, dDt
            )
            blocks.append(
                StageBlock(Z=dZ, Dt=dDt, Dx=dDx, zb=dzb, dW=block.dW, residual=res, iterations=1)
            )
            new_lines.append(
                t_lines[b] + self.grid.tau * np.einsum("k,iskn->isn", self.t_tab.b, dDt)
            )
        return TangentPair(
            u_lines=new_lines[0],
            v_lines=new_lines[1],
            level=pair.level + 1,
            u_block=blocks[0],
            v_block=blocks[1],
        )


def step(
    spec: SystemSpec,
    grid: GridSpec,
    t_tab: Tableau,
    x_tab: Tableau,
    state: StepState,
    noise: NoisePath,
    solver: SolverConfig | None = None,
) -> tuple[StepState, StageBlock]:
    """One time step of the space-time RK scheme (convenience wrapper)."""
    return Engine1D(spec, grid, t_tab, x_tab, solver).step(state, noise)


def tangent_step(
    spec: SystemSpec,
    grid: GridSpec,
    t_tab: Tableau,
    x_tab: Tableau,
    block: StageBlock,
    pair: TangentPair,
    noise: NoisePath,
    solver: SolverConfig | None = None,
) -> TangentPair:
    """Propagate a tangent pair through a converged primal step."""
    return Engine1D(spec, grid, t_tab, x_tab, solver).tangent_step(block, pair)


def wedge(u: np.ndarray, v: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Value of the 2-form (1/2) dz ^ M dz on the pair (u, v): u' M v."""
    return np.einsum("...a,ab,...b->...", u, M, v)


def ms_residual(
    t_tab: Tableau,
    x_tab: Tableau,
    K: np.ndarray,
    L: np.ndarray,
    before: TangentPair,
    after: TangentPair,
    grid: GridSpec,
) -> np.ndarray:
    """Per-cell defect of the discrete multi-symplectic conservation law.

    R_i = (omega'_i - omega_i)/tau + (kappa_{i+1} - kappa_i)/h with the
    stage-weighted 2-forms omega (K, on line values) and kappa (L, on
    boundary stage values of the connecting step).
    """
    if after.u_block is None or after.v_block is None:
        raise ValueError("after-pair must carry the stage blocks of the connecting step")

    def omega(p: TangentPair) -> np.ndarray:
        return np.einsum("m,imn,nq,imq->i", x_tab.b, p.u_lines, K, p.v_lines)

    kappa = np.einsum(
        "k,ikn,nq,ikq->i", t_tab.b, after.u_block.zb, L, after.v_block.zb
    )
    return (omega(after) - omega(before)) / grid.tau + (
        np.roll(kappa, -1) - kappa
    ) / grid.h


def quadratic_invariant(x_tab: Tableau, state: StepState, grid: GridSpec) -> float:
    """Stage-weighted squared norm sum_i sum_m b_m |z[i,m]|^2."""
    return float(np.einsum("m,imn,imn->", x_tab.b, state.lines, state.lines))


class MidpointEngine:
    """Direct implicit midpoint (box) scheme on the one-stage layout.

    Independent of :class:`Engine1D`: unknowns are the advanced cell-center
    values u_i and the mid-time edge values e_i, with
      K (u_i - z_i)/tau + L (e_{i+1} - e_i)/h = grad_s1(Z) + grad_s2(Z) dW/tau
      (e_i + e_{i+1})/2 = Z := (z_i + u_i)/2.
    """

    def __init__(self, spec: SystemSpec, grid: GridSpec, solver: SolverConfig | None = None):
        self.spec = spec
        self.grid = grid
        self.solver = solver or SolverConfig()
        (self.L,) = spec.L
        self.n = spec.n
        self.I = grid.cells
        self.P = range_projector(self.L)
        self.N = 2 * self.I * self.n

    def _unpack(self, X):
        lead = X.shape[:-1]
        half = self.I * self.n
        u = X[..., :half].reshape(lead + (self.I, self.n))
        e = X[..., half:].reshape(lead + (self.I, self.n))
        return u, e

    def residual(self, X, z, dW):
        tau, h = self.grid.tau, self.grid.h
        u, e = self._unpack(X)
        Z = 0.5 * (z + u)
        G1 = np.asarray(self.spec.grad_s1(Z))
        G2 = np.asarray(self.spec.grad_s2(Z))
        R1 = (
            (u - z) @ self.spec.K.T
            + (tau / h) * ((np.roll(e, -1, axis=-2) - e) @ self.L.T)
            - tau * G1
            - G2 * dW[:, None]
        )
        R2 = (0.5 * (e + np.roll(e, -1, axis=-2)) - Z) @ self.P
        lead = X.shape[:-1]
        return np.concatenate([R1.reshape(lead + (-1,)), R2.reshape(lead + (-1,))], axis=-1)

    def tangent_residual(self, V, Zmid, dW):
        tau, h = self.grid.tau, self.grid.h
        du, de = self._unpack(V)
        dZ = 0.5 * du
        H1 = np.asarray(self.spec.hess_s1(Zmid))
        H2 = np.asarray(self.spec.hess_s2(Zmid))
        T1 = (
            du @ self.spec.K.T
            + (tau / h) * ((np.roll(de, -1, axis=-2) - de) @ self.L.T)
            - tau * np.einsum("iab,...ib->...ia", H1, dZ)
            - np.einsum("iab,...ib->...ia", H2, dZ) * dW[:, None]
        )
        T2 = (0.5 * (de + np.roll(de, -1, axis=-2)) - dZ) @ self.P
        lead = V.shape[:-1]
        return np.concatenate([T1.reshape(lead + (-1,)), T2.reshape(lead + (-1,))], axis=-1)

    def step(self, state: StepState, noise: NoisePath) -> StepState:
        if state.lines.shape[1] != 1:
            raise ValueError("midpoint layout requires one spatial stage")
        z = state.lines[:, 0, :]
        dW = noise.increments[state.level].reshape(self.I)
        X = np.concatenate([z.ravel(), z.ravel()])
        residual = np.inf
        for _ in range(1, min(self.solver.max_iter, 60) + 1):
            F = self.residual(X, z, dW)
            residual = float(np.abs(F).max())
            if not np.isfinite(residual):
                raise SolverError("non-finite midpoint residual", residual)
            if residual <= self.solver.tol:
                u, _ = self._unpack(X)
                return StepState(lines=u[:, None, :], level=state.level + 1)
            u, _ = self._unpack(X)
            Zmid = 0.5 * (z + u)
            J = self.tangent_residual(np.eye(self.N), Zmid, dW).T
            X = X + lstsq_min_norm(J, -F)
        raise SolverError("midpoint solver did not converge", residual)


def midpoint_step(
    spec: SystemSpec,
    grid: GridSpec,
    state: StepState,
    noise: NoisePath,
    solver: SolverConfig | None = None,
) -> StepState:
    """One step of the direct implicit midpoint scheme (one-stage layout)."""
    return MidpointEngine(spec, grid, solver).step(state, noise)


@dataclass
class RunRecord:
    """Per-step diagnostics of one realization."""

    step: list = field(default_factory=list)
    time: list = field(default_factory=list)
    ms_residual_max: list = field(default_factory=list)
    quadratic_invariant: list = field(default_factory=list)
    solver_iterations: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    final_state: StepState | None = None

    def rows(self):
        for vals in zip(
            self.step, self.time, self.ms_residual_max,
            self.quadratic_invariant, self.solver_iterations,
        ):
            yield vals


DIAGNOSTICS = ("ms_residual", "quadratic_invariant")


def run(
    spec: SystemSpec,
    grid: GridSpec,
    t_tab: Tableau,
    x_tab: Tableau,
    state: StepState,
    noise: NoisePath,
    solver: SolverConfig | None = None,
    diagnostics: Sequence[str] = DIAGNOSTICS,
    tangent_pair: TangentPair | None = None,
    snapshot_stride: int = 0,
) -> RunRecord:
    """Advance grid.steps time steps, recording the selected diagnostics."""
    unknown = set(diagnostics) - set(DIAGNOSTICS)
    if unknown:
        raise ValueError(f"unknown diagnostics: {sorted(unknown)}")
    want_ms = "ms_residual" in diagnostics
    want_qi = "quadratic_invariant" in diagnostics
    if want_ms and tangent_pair is None:
        raise ValueError("ms_residual diagnostic needs a tangent pair")
    engine = Engine1D(spec, grid, t_tab, x_tab, solver)

    record = RunRecord()

    def emit(level, ms_val, qi_state, iters):
        record.step.append(level)
        record.time.append(level * grid.tau)
        record.ms_residual_max.append(ms_val)
        record.quadratic_invariant.append(
            quadratic_invariant(x_tab, qi_state, grid) if want_qi else float("nan")
        )
        record.solver_iterations.append(iters)
        if snapshot_stride and level % snapshot_stride == 0:
            record.snapshots[level] = qi_state.lines.copy()

    emit(0, float("nan"), state, 0)
    for _ in range(grid.steps):
        state, block = engine.step(state, noise)
        ms_val = float("nan")
        if want_ms:
            next_pair = engine.tangent_step(block, tangent_pair)
            ms_val = float(
                np.abs(
                    ms_residual(t_tab, x_tab, spec.K, engine.L, tangent_pair, next_pair, grid)
                ).max()
            )
            tangent_pair = next_pair
        emit(state.level, ms_val, state, block.iterations)
    record.final_state = state
    return record
