"""3D stochastic Maxwell scheme: structure, energy, and conservation law."""
import numpy as np
import pytest

from mssrk.maxwell3d import (
    Grid3Spec,
    MaxwellEngine,
    MaxwellSpec,
    MaxwellState,
    MaxwellTangentPair,
    TableauSet,
    default_qwiener,
    discrete_energy,
    init_maxwell_state,
    maxwell_ms_residual,
    maxwell_noise_path,
    maxwell_system,
    run_maxwell,
    stage_points_3d,
)
from mssrk.solver import SolverConfig
from mssrk.system import validate
from mssrk.tableau import builtin_tableau

MIDPOINT = builtin_tableau("midpoint")
TABS = TableauSet(time=MIDPOINT, x=MIDPOINT, y=MIDPOINT, z=MIDPOINT)


def smooth_field(pts):
    x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
    out = np.empty(x.shape + (6,))
    for c in range(6):
        out[..., c] = np.sin(2.0 * np.pi * x + c) * np.cos(2.0 * np.pi * y) + 0.3 * np.sin(
            2.0 * np.pi * z + 0.2 * c
        )
    return out


def small_setup(steps=5, seed=7, lam=0.5, cells=(2, 2, 2)):
    d = tuple(1.0 / c for c in cells)
    grid = Grid3Spec(cells=cells, spacing=d, steps=steps, tau=0.01)
    spec = MaxwellSpec(lam=lam, grid3=grid, tableaux=TABS,
                       noise=default_qwiener(grid, seed=seed, J=3))
    state = init_maxwell_state(grid, TABS, smooth_field)
    return grid, spec, state


# ---------------------------------------------------------------------------
# structure
# ---------------------------------------------------------------------------

def test_system_structure():
    sys6 = maxwell_system(0.5)
    assert validate(sys6) == []
    # first curl factor couples field components 1 and 2 with unit entries
    L1 = sys6.L[0]
    assert L1[2, 1] == 1.0 and L1[1, 2] == -1.0
    assert L1[5, 4] == 1.0 and L1[4, 5] == -1.0
    # rows/columns of the invariant components vanish
    assert np.abs(L1[0]).max() == 0.0 and np.abs(L1[3]).max() == 0.0
    # K swaps the two 3-blocks with a sign
    z = np.arange(6.0)
    np.testing.assert_allclose(sys6.K @ z, np.concatenate([-z[3:], z[:3]]))


def test_gradient_is_linear_in_lambda():
    z = np.random.default_rng(0).standard_normal((4, 6))
    np.testing.assert_allclose(maxwell_system(0.7).grad_s2(z), 0.7 * z)
    np.testing.assert_allclose(maxwell_system(0.7).grad_s1(z), np.zeros_like(z))


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid3Spec(cells=(1, 2, 2), spacing=(0.5, 0.5, 0.5), steps=1, tau=0.1)
    with pytest.raises(ValueError):
        Grid3Spec(cells=(2, 2), spacing=(0.5, 0.5), steps=1, tau=0.1)
    with pytest.raises(ValueError):
        Grid3Spec(cells=(2, 2, 2), spacing=(0.5, 0.5, 0.5), steps=1, tau=-0.1)


def test_stage_points_cover_cell_midpoints():
    grid = Grid3Spec(cells=(2, 2, 2), spacing=(0.5, 0.5, 0.5), steps=1, tau=0.1)
    pts = stage_points_3d(grid, TABS)
    assert pts.shape == (8, 3)
    assert pts.min() == 0.25 and pts.max() == 0.75
    np.testing.assert_allclose(pts[0], [0.25, 0.25, 0.25])
    np.testing.assert_allclose(pts[-1], [0.75, 0.75, 0.75])


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------

def test_zero_field_stays_zero():
    grid, spec, _ = small_setup(steps=3, lam=0.5)
    shape = grid.cells + TABS.stage_shape + (6,)
    state = MaxwellState(lines=np.zeros(shape))
    record = run_maxwell(spec, state, diagnostics=("energy",))
    assert all(e == 0.0 for e in record.energy)


def test_lambda_zero_is_deterministic():
    grid, spec, state = small_setup(steps=3, lam=0.0, seed=1)
    other = MaxwellSpec(lam=0.0, grid3=grid, tableaux=TABS,
                        noise=default_qwiener(grid, seed=99, J=3))
    a = run_maxwell(spec, state, diagnostics=("energy",))
    b = run_maxwell(other, init_maxwell_state(grid, TABS, smooth_field),
                    diagnostics=("energy",))
    np.testing.assert_allclose(a.final_state.lines, b.final_state.lines, atol=1e-12)


def test_energy_conserved_per_path():
    _, spec, state = small_setup(steps=10, seed=3)
    record = run_maxwell(spec, state, diagnostics=("energy",))
    assert max(record.energy_rel_drift) <= 1e-12


def test_energy_conserved_on_odd_grid():
    # odd cell counts make the coupled stage system full-rank; conservation
    # must hold there as well
    _, spec, state = small_setup(steps=5, seed=5, cells=(3, 3, 3))
    record = run_maxwell(spec, state, diagnostics=("energy",))
    assert max(record.energy_rel_drift) <= 1e-12


def test_stage_residual_small_after_step():
    grid, spec, state = small_setup(steps=1, seed=11)
    engine = MaxwellEngine(spec, SolverConfig(tol=1e-13))
    noise = maxwell_noise_path(spec)
    _, block = engine.step(state, noise)
    assert block.residual <= 1e-13
    assert block.iterations >= 1


def test_ms_residual_small():
    grid, spec, state = small_setup(steps=5, seed=2)
    rng = np.random.default_rng(8)
    shape = grid.cells + TABS.stage_shape + (6,)
    pair = MaxwellTangentPair(u_lines=rng.standard_normal(shape),
                              v_lines=rng.standard_normal(shape))
    record = run_maxwell(spec, state, diagnostics=("energy", "ms_residual"),
                         tangent_pair=pair)
    assert np.nanmax(record.ms_residual_max) <= 1e-9


def test_ms_residual_requires_blocks():
    grid, *_ = small_setup()
    shape = grid.cells + TABS.stage_shape + (6,)
    p = MaxwellTangentPair(u_lines=np.zeros(shape), v_lines=np.zeros(shape))
    with pytest.raises(ValueError, match="stage blocks"):
        maxwell_ms_residual(TABS, grid, p, p)


def test_discrete_energy_matches_direct_sum():
    grid, _, state = small_setup()
    # midpoint weights are all one: energy is the plain sum of squares
    assert abs(discrete_energy(state, TABS) - float((state.lines**2).sum())) < 1e-12


def test_run_determinism():
    _, spec, state = small_setup(steps=4, seed=17)
    a = run_maxwell(spec, state, diagnostics=("energy",))
    b = run_maxwell(spec, init_maxwell_state(spec.grid3, TABS, smooth_field),
                    diagnostics=("energy",))
    assert a.energy == b.energy
    np.testing.assert_array_equal(a.final_state.lines, b.final_state.lines)


def test_run_rejects_unknown_diagnostics():
    _, spec, state = small_setup()
    with pytest.raises(ValueError, match="unknown diagnostics"):
        run_maxwell(spec, state, diagnostics=("divergence",))
    with pytest.raises(ValueError, match="tangent pair"):
        run_maxwell(spec, state, diagnostics=("ms_residual",))
