import numba as nb
import numpy as np
import pytest

from ..core.grid import boundary_mask, build_grid, build_stencil
from ..core.infinity_ops import OperatorKind, ScalarField, grad_field, inf_laplacian_field, normalized_field
from ..core.oracles import OracleField, sample
from ..core.models import RhsModel
from ..core.solver import (
    BoundaryData,
    SolverConfig,
    SweepOrder,
    WarmStart,
    coons_blend,
    comparison_check,
    interpolate_field,
    lipschitz_certificate,
    local_update,
    max_principle_check,
    solve,
)
from ..utils.errors import InvalidParameterError, OutOfDomainError

DIRECT = OperatorKind.direct()
CONFIG = SolverConfig(tolerance=1e-10, max_sweeps=50000)


def test_constant_boundary_is_reproduced_at_once(grid33, stencil1):
    outcome = solve(grid33, stencil1, RhsModel.zero(), BoundaryData.constant(0.75), DIRECT, CONFIG)
    assert outcome.converged
    assert outcome.sweeps_used == 1
    assert np.all(outcome.field.values == 0.75)


@pytest.mark.parametrize('width', [1, 2])
@pytest.mark.parametrize('order', [SweepOrder.RED_BLACK, SweepOrder.LEXICOGRAPHIC])
def test_affine_data_is_solved_exactly(width, order):
    grid = build_grid(33, 1.0)
    stencil = build_stencil(width)
    config = SolverConfig(tolerance=1e-10, max_sweeps=5000, sweep_order=order)
    outcome = solve(grid, stencil, RhsModel.zero(), BoundaryData.affine((0.5, -0.25), 0.125), DIRECT, config)
    X, Y = grid.coordinates()
    assert outcome.converged
    assert np.abs(outcome.field.values - (0.5 * X - 0.25 * Y + 0.125)).max() <= 1e-9


def test_coons_blend_reproduces_affine_traces(grid33):
    X, Y = grid33.coordinates()
    affine = 2.0 * X - Y + 0.5
    assert np.abs(coons_blend(grid33, affine) - affine).max() <= 1e-12
    assert np.all(coons_blend(grid33, np.full(X.shape, -0.3)) == -0.3)


@pytest.mark.parametrize('seed', range(4))
def test_max_principle_with_random_traces(grid33, stencil1, seed):
    boundary = BoundaryData.random(seed)
    outcome = solve(grid33, stencil1, RhsModel.zero(), boundary, DIRECT, CONFIG)
    assert max_principle_check(outcome)


@pytest.mark.slow
@pytest.mark.parametrize('seed', range(10))
def test_max_principle_with_random_traces_at_65(stencil1, seed):
    outcome = solve(build_grid(65, 1.0), stencil1, RhsModel.zero(), BoundaryData.random(seed), DIRECT, CONFIG)
    assert max_principle_check(outcome)


def test_max_principle_with_aronsson_trace(grid33, stencil2):
    outcome = solve(grid33, stencil2, RhsModel.zero(), BoundaryData.aronsson(), DIRECT, CONFIG)
    assert outcome.converged
    assert max_principle_check(outcome)


def test_comparison_with_ordered_boundary_data(grid33, stencil1):
    model = RhsModel.dead_core(1.0, 1.0)
    config = SolverConfig(tolerance=1e-9, max_sweeps=100000)
    lower = solve(grid33, stencil1, model, BoundaryData.constant(1.0), DIRECT, config)
    upper = solve(grid33, stencil1, model, BoundaryData.constant(1.1), DIRECT, config)
    assert comparison_check(lower, upper)
    assert comparison_check(lower, lower)


def test_comparison_with_ordered_forcing(grid33, stencil1):
    kind = OperatorKind.normalized()
    boundary = BoundaryData.aronsson()
    forced = solve(grid33, stencil1, RhsModel.general(0.0, 0.0), boundary, kind, CONFIG)
    free = solve(grid33, stencil1, RhsModel.zero(), boundary, kind, CONFIG)
    assert comparison_check(forced, free)


def test_comparison_rejects_mismatched_grids(stencil1):
    small = solve(build_grid(17, 1.0), stencil1, RhsModel.zero(), BoundaryData.constant(0.0), DIRECT, CONFIG)
    large = solve(build_grid(33, 1.0), stencil1, RhsModel.zero(), BoundaryData.constant(0.0), DIRECT, CONFIG)
    with pytest.raises(InvalidParameterError):
        comparison_check(small, large)


def test_obstacle_solution_is_nonnegative(grid33, stencil1):
    config = SolverConfig(tolerance=1e-9, max_sweeps=20000)
    outcome = solve(grid33, stencil1, RhsModel.obstacle(), BoundaryData.ramp(1.0, 0.0), DIRECT, config)
    values = outcome.field.values
    assert np.all(values >= 0.0)
    assert np.any(values[~boundary_mask(grid33)] == 0.0)


def test_dead_core_without_exponent_stays_between_zero_and_data(stencil1):
    grid = build_grid(33, 2.0)
    outcome = solve(grid, stencil1, RhsModel.dead_core(1.0, 0.0), BoundaryData.constant(1.0), DIRECT,
                    SolverConfig(tolerance=1e-10, max_sweeps=5000))
    values = outcome.field.values
    assert values.min() >= min(0.0, 1.0) - 2e-10
    assert values.max() <= 1.0 + 2e-10
    assert values[~boundary_mask(grid)].min() <= 1e-6


def test_dead_core_solve_meets_the_floored_residual(stencil1):
    grid = build_grid(33, 2.0)
    outcome = solve(grid, stencil1, RhsModel.dead_core(1.0, 1.0), BoundaryData.constant(1.0), DIRECT, CONFIG)
    assert outcome.converged
    assert outcome.final_residual_sup <= 1e-6
    assert outcome.unfloored_residual_sup >= 0.0


def test_red_black_sweeps_are_deterministic(grid33, stencil2):
    model = RhsModel.dead_core(1.0, 1.0)
    runs = [solve(grid33, stencil2, model, BoundaryData.constant(1.0), DIRECT,
                  SolverConfig(tolerance=1e-8, max_sweeps=20000, threads=threads)) for threads in (1, 2)]
    assert np.array_equal(runs[0].field.values, runs[1].field.values)
    assert runs[0].sweeps_used == runs[1].sweeps_used


def test_sweep_orders_agree(grid33, stencil2):
    boundary = BoundaryData.aronsson()
    runs = [solve(grid33, stencil2, RhsModel.zero(), boundary, DIRECT,
                  SolverConfig(tolerance=1e-10, max_sweeps=50000, sweep_order=order))
            for order in (SweepOrder.LEXICOGRAPHIC, SweepOrder.LEXICOGRAPHIC, SweepOrder.RED_BLACK)]
    assert all(run.converged for run in runs)
    assert np.array_equal(runs[0].field.values, runs[1].field.values)
    assert runs[0].sweeps_used == runs[1].sweeps_used
    assert np.abs(runs[0].field.values - runs[2].field.values).max() <= 1e-6


def test_thread_count_is_restored(grid33, stencil1):
    before = nb.get_num_threads()
    solve(grid33, stencil1, RhsModel.zero(), BoundaryData.aronsson(), DIRECT,
          SolverConfig(tolerance=1e-8, max_sweeps=100, threads=1))
    assert nb.get_num_threads() == before


def test_non_convergence_is_reported_not_raised(grid33, stencil1):
    outcome = solve(grid33, stencil1, RhsModel.zero(), BoundaryData.aronsson(), DIRECT,
                    SolverConfig(tolerance=1e-14, max_sweeps=3))
    assert not outcome.converged
    assert outcome.sweeps_used == 3
    assert outcome.final_update_norm > 1e-14


def test_local_update_midpoint(grid33, stencil1):
    X, _ = grid33.coordinates()
    field = ScalarField(grid33, X / grid33.spacing)
    value = local_update(field, stencil1, grid33.origin, RhsModel.zero(), DIRECT, CONFIG)
    assert value == pytest.approx(0.0, abs=1e-12)


def test_local_update_flat_neighborhood(grid33, stencil2):
    field = ScalarField(grid33, np.full((33, 33), -0.5))
    assert local_update(field, stencil2, (4, 7), RhsModel.zero(), DIRECT, CONFIG) == -0.5
    with pytest.raises(OutOfDomainError):
        local_update(field, stencil2, (0, 7), RhsModel.zero(), DIRECT, CONFIG)


def test_local_update_is_damped(grid33, stencil1):
    values = np.zeros((33, 33))
    values[16, 16] = 1.0
    field = ScalarField(grid33, values)
    damped = local_update(field, stencil1, (16, 16), RhsModel.zero(), DIRECT, SolverConfig(damping=0.5))
    assert damped == pytest.approx(0.5)


def test_local_update_on_the_radial_dead_core_field(stencil1):
    grid = build_grid(33, 1.0)
    model = RhsModel.dead_core(8.0, 1.0)
    field = sample(OracleField.radial_monomial(1.0, 2.0), grid)
    u = field.values
    g = grad_field(field, stencil1)
    rhs = model.evaluate_array(model.sample_weights(grid), u, g) / np.maximum(g * g, CONFIG.floor_for(grid))
    defect = np.abs(normalized_field(field, stencil1) - rhs)
    h = grid.spacing
    for i in range(1, 32):
        for j in range(1, 32):
            value = local_update(field, stencil1, (i, j), model, DIRECT, CONFIG)
            assert abs(value - u[i, j]) <= h * h * defect[i, j] + 1e-12


def test_lipschitz_certificate_of_affine_and_constant(grid33, stencil2):
    affine = solve(grid33, stencil2, RhsModel.zero(), BoundaryData.affine((0.5, 0.0)), DIRECT, CONFIG)
    certificate = lipschitz_certificate(affine, RhsModel.zero(), stencil2)
    assert certificate.seminorm == pytest.approx(0.5, abs=1e-6)
    assert certificate.rhs_cube_root == 0.0
    flat = solve(grid33, stencil2, RhsModel.zero(), BoundaryData.constant(2.0), DIRECT, CONFIG)
    certificate = lipschitz_certificate(flat, RhsModel.zero(), stencil2)
    assert certificate.seminorm == 0.0
    assert certificate.data_bound == 2.0


def test_cascade_matches_blend_start(grid33, stencil1):
    boundary = BoundaryData.aronsson()
    blend = solve(grid33, stencil1, RhsModel.zero(), boundary, DIRECT, CONFIG)
    cascade = solve(grid33, stencil1, RhsModel.zero(), boundary, DIRECT,
                    SolverConfig(tolerance=1e-10, max_sweeps=50000, warm_start=WarmStart.CASCADE))
    assert cascade.converged
    assert np.abs(cascade.field.values - blend.field.values).max() <= 1e-6


def test_initial_field_must_share_the_grid(grid33, stencil1):
    other = ScalarField(build_grid(17, 1.0), np.zeros((17, 17)))
    with pytest.raises(InvalidParameterError):
        solve(grid33, stencil1, RhsModel.zero(), BoundaryData.constant(0.0), DIRECT, CONFIG, initial=other)


def test_interpolation_is_exact_for_affine_fields():
    coarse = build_grid(17, 1.0)
    fine = build_grid(33, 1.0)
    X, Y = coarse.coordinates()
    moved = interpolate_field(ScalarField(coarse, 3.0 * X - Y), fine)
    Xf, Yf = fine.coordinates()
    assert np.abs(moved - (3.0 * Xf - Yf)).max() <= 1e-12


def test_solver_config_validation():
    for kwargs in ({'tolerance': 0.0}, {'max_sweeps': 0}, {'damping': 0.0}, {'damping': 1.5},
                   {'grad_floor': -1.0}, {'threads': 0}, {'nonlinearity_lag': 'newton'}):
        with pytest.raises(InvalidParameterError):
            SolverConfig(**kwargs)
    assert SolverConfig().floor_for(build_grid(17, 1.0)) == 0.125 ** 2
    assert SolverConfig(grad_floor=1e-3).floor_for(build_grid(17, 1.0)) == 1e-3


def test_boundary_data_factories(grid33):
    with pytest.raises(InvalidParameterError):
        BoundaryData.aronsson((1.0, 1.0))
    with pytest.raises(InvalidParameterError):
        BoundaryData.ramp(-1.0)
    first = BoundaryData.random(5).evaluate(grid33)
    second = BoundaryData.random(5).evaluate(grid33)
    assert np.array_equal(first, second)
    X, _ = grid33.coordinates()
    assert np.array_equal(BoundaryData.custom_odd(2.0).evaluate(grid33), 2.0 * X)


@pytest.mark.parametrize('n', [65, 129])
def test_radial_dead_core_field_is_nearly_fixed(stencil1, n):
    grid = build_grid(n, 1.0)
    oracle = OracleField.radial_monomial(1.0, 2.0)
    exact = sample(oracle, grid)
    X, Y = grid.coordinates()
    interior = ~boundary_mask(grid)
    defect = np.abs(inf_laplacian_field(exact, stencil1, DIRECT) - oracle.operator_array(X, Y))
    consistency = np.nanmax(defect[interior])
    outcome = solve(grid, stencil1, RhsModel.dead_core(8.0, 1.0), BoundaryData.radial(1.0, 2.0), DIRECT,
                    SolverConfig(tolerance=1e-14, max_sweeps=50), initial=exact)
    assert np.abs(outcome.field.values - exact.values).max() <= 5.0 * consistency


@pytest.mark.slow
def test_dead_core_appears_at_129():
    grid = build_grid(129, 2.0)
    outcome = solve(grid, build_stencil(1), RhsModel.dead_core(1.0, 1.0), BoundaryData.constant(1.0), DIRECT,
                    SolverConfig(tolerance=1e-10, max_sweeps=400000, warm_start=WarmStart.CASCADE))
    values = outcome.field.values
    assert outcome.converged
    assert values.min() >= -2e-10 and values.max() <= 1.0 + 2e-10
    assert np.any(np.abs(values) <= 1e-9)
