import math

import numpy as np
import pytest

from ..core.grid import (
    FieldRole,
    ball_nodes,
    boundary_mask,
    build_grid,
    build_stencil,
    color_classes,
    interior_nodes,
    shell_nodes,
)
from ..utils.errors import InvalidParameterError, OutOfDomainError


def test_grid_spacing_and_origin():
    grid = build_grid(65, 1.0)
    assert grid.spacing == 2.0 / 64
    assert grid.origin == (32, 32)
    assert grid.coordinate(grid.origin) == (0.0, 0.0)
    assert grid.coordinate((0, 64)) == (-1.0, 1.0)


@pytest.mark.parametrize('n', [15, 16, 64, 1])
def test_grid_rejects_even_or_small(n):
    with pytest.raises(InvalidParameterError):
        build_grid(n, 1.0)


@pytest.mark.parametrize('half_width', [0.0, -1.0, float('inf')])
def test_grid_rejects_bad_half_width(half_width):
    with pytest.raises(InvalidParameterError):
        build_grid(17, half_width)


def test_coordinates_match_index_arithmetic():
    grid = build_grid(17, 2.0)
    X, Y = grid.coordinates()
    assert X.shape == (17, 17)
    assert X[3, 5] == grid.coordinate((3, 5))[0]
    assert Y[3, 5] == grid.coordinate((3, 5))[1]


def test_node_of_round_trip():
    grid = build_grid(33, 1.0)
    for node in [(0, 0), (5, 17), (32, 32), (16, 16)]:
        assert grid.node_of(grid.coordinate(node)) == node
    with pytest.raises(OutOfDomainError):
        grid.node_of((1.5, 0.0))


@pytest.mark.parametrize('width, count', [(1, 8), (2, 16), (3, 32), (4, 48)])
def test_stencil_direction_counts(width, count):
    assert len(build_stencil(width)) == count


@pytest.mark.parametrize('width', [1, 2, 3, 4])
def test_stencil_is_antipodal_and_primitive(width):
    stencil = build_stencil(width)
    directions = set(stencil.directions)
    for p, q in directions:
        assert (-p, -q) in directions
        assert math.gcd(abs(p), abs(q)) == 1
        assert max(abs(p), abs(q)) <= width
    # no positive multiples: primitive vectors have distinct angles
    angles = {round(math.atan2(q, p), 12) for p, q in directions}
    assert len(angles) == len(directions)


def test_stencil_order_is_by_length_then_angle():
    stencil = build_stencil(1)
    assert stencil.directions[:4] == [(1, 0), (0, 1), (-1, 0), (0, -1)]
    assert np.allclose(stencil.unit_arms[:4], 1.0)
    assert np.allclose(stencil.unit_arms[4:], math.sqrt(2))


@pytest.mark.parametrize('width', [0, 5, 1.5])
def test_stencil_rejects_bad_width(width):
    with pytest.raises(InvalidParameterError):
        build_stencil(width)


def test_arm_lengths_scale_with_spacing():
    grid = build_grid(17, 1.0)
    stencil = build_stencil(2)
    assert np.allclose(stencil.arm_lengths(grid), grid.spacing * np.sqrt((stencil.offsets ** 2).sum(axis=1)))


def test_boundary_and_interior_partition():
    grid = build_grid(17, 1.0)
    mask = boundary_mask(grid)
    nodes = interior_nodes(grid)
    assert mask.sum() == 4 * 16
    assert len(nodes) == 15 * 15
    assert not mask[nodes[:, 0], nodes[:, 1]].any()
    assert grid.is_boundary((0, 3)) and not grid.is_boundary((1, 1))


def test_color_classes_are_race_free():
    grid = build_grid(17, 1.0)
    classes = color_classes(grid)
    assert sum(len(c) for c in classes) == 15 * 15
    for width in (1, 2, 3, 4):
        for p, q in build_stencil(width).directions:
            # an arm changes the parity class of its endpoint
            assert p % 2 == 1 or q % 2 == 1


def test_ball_membership_is_exact():
    grid = build_grid(33, 1.0)
    center = (16, 16)
    r = 0.3
    ball = ball_nodes(grid, center, r)
    X, Y = grid.coordinates()
    dist = np.hypot(X, Y)
    expected = set(zip(*np.nonzero(dist <= r)))
    assert set(map(tuple, ball.nodes.tolist())) == expected


def test_ball_errors():
    grid = build_grid(33, 1.0)
    with pytest.raises(OutOfDomainError):
        ball_nodes(grid, (16, 16), 1.0)
    with pytest.raises(InvalidParameterError):
        ball_nodes(grid, (16, 16), 0.0)
    with pytest.raises(OutOfDomainError):
        ball_nodes(grid, (40, 16), 0.1)


def test_shell_is_annulus():
    grid = build_grid(33, 1.0)
    r = 0.5
    shell = shell_nodes(grid, grid.origin, r)
    X, Y = grid.coordinates()
    dist = np.hypot(X, Y)[shell[:, 0], shell[:, 1]]
    assert len(shell) > 0
    assert np.all(dist <= r) and np.all(dist >= r - grid.spacing)


def test_field_roles():
    assert {role.value for role in FieldRole} == {'solution', 'rhs_sample', 'residual', 'oracle'}
