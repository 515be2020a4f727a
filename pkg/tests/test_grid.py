"""Grid discretization and the L2 structure built on it."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_function
from wannloc import (
    EscapedMassError,
    Grid,
    GridFunction,
    GridMismatchError,
    ensure_mass_contained,
    inner_product,
    load_grid_function,
    multiplication_operator,
    restrict_to_ball,
    save_grid_function,
)


# --- grid construction ----------------------------------------------------


def test_point_count_and_weight():
    g = Grid(d=1, L=2.0, h=0.25)
    assert g.n_per_axis == 16
    assert g.n_points == 16
    assert g.weight == 0.25
    g2 = Grid(d=2, L=2.0, h=0.25)
    assert g2.n_points == 16**2
    assert g2.weight == 0.25**2


def test_axis_is_symmetric_about_zero():
    for h in (0.25, 0.3, 1.0 / 3):
        ax = Grid(d=1, L=2.0, h=h).axis
        assert np.allclose(ax + ax[::-1], 0.0, atol=1e-15)


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        Grid(d=3, L=1.0, h=0.1)
    with pytest.raises(ValueError):
        Grid(d=1, L=0.0, h=0.1)
    with pytest.raises(ValueError):
        Grid(d=1, L=1.0, h=-0.1)
    with pytest.raises(ValueError, match="3 points"):
        Grid(d=1, L=1.0, h=1.0)  # floor(2/1) = 2 points
    with pytest.raises(ValueError):
        Grid(d=1, L=1.0, h=0.1, bc="absorbing")


def test_grid_compatibility():
    g = Grid(d=1, L=2.0, h=0.25)
    assert g.compatible(Grid(d=1, L=2.0, h=0.25))
    assert not g.compatible(Grid(d=1, L=2.0, h=0.125))
    assert not g.compatible(Grid(d=1, L=2.0, h=0.25, bc="periodic"))


# --- inner product --------------------------------------------------------


def test_normalized_ball_has_unit_inner_product(line):
    f = line.ball_indicator(np.zeros(1), 0.7, normalized=True)
    assert inner_product(f, f) == pytest.approx(1.0, abs=1e-14)


def test_disjoint_balls_are_exactly_orthogonal(line):
    f = line.ball_indicator([-1.0], 0.5, normalized=True)
    g = line.ball_indicator([1.0], 0.5, normalized=True)
    assert inner_product(f, g) == 0.0  # exact: no shared grid points


def test_odd_integrand_cancels_to_quadrature_error():
    # integral of x over [-1, 1] is 0; the midpoint rule on a symmetric
    # grid reproduces the cancellation up to roundoff, far below the 5h
    # budget a one-sided rule would need
    g = Grid(d=1, L=2.0, h=0.01)
    box = g.ball_indicator(np.zeros(1), 1.0)
    x = g.from_callable(lambda p: p[:, 0])
    assert abs(inner_product(box, x)) <= 5 * g.h


def test_inner_product_conjugate_symmetry(line, rng):
    f = random_function(line, rng)
    g = random_function(line, rng)
    assert inner_product(f, g) == pytest.approx(np.conj(inner_product(g, f)))


def test_inner_product_linear_in_second_slot(line, rng):
    f = random_function(line, rng)
    g = random_function(line, rng)
    h = random_function(line, rng)
    lhs = inner_product(f, g + h * (2.0 - 1.0j))
    rhs = inner_product(f, g) + (2.0 - 1.0j) * inner_product(f, h)
    assert lhs == pytest.approx(rhs)


def test_inner_product_rejects_grid_mismatch(line):
    other = Grid(d=1, L=2.0, h=1.0 / 32)
    with pytest.raises(GridMismatchError):
        inner_product(line.ones(), other.ones())


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_cauchy_schwarz(seed):
    g = Grid(d=1, L=1.0, h=0.125)
    r = np.random.default_rng(seed)
    f = random_function(g, r)
    k = random_function(g, r)
    assert abs(inner_product(f, k)) <= f.norm() * k.norm() * (1 + 1e-12)


# --- restriction to balls -------------------------------------------------


def test_restrict_with_huge_radius_is_identity(line, rng):
    f = random_function(line, rng)
    out = restrict_to_ball(f, np.zeros(1), 100.0)
    assert np.array_equal(out.values, f.values)


def test_restrict_with_zero_radius_is_zero(line, rng):
    f = random_function(line, rng)
    assert restrict_to_ball(f, np.zeros(1), 0.0).norm() == 0.0


def test_restrict_keeps_half_the_mass_of_a_double_ball(line):
    # cell boundaries align with +-1/2 and +-1, so the mass ratio is exact
    f = line.ball_indicator(np.zeros(1), 1.0, normalized=True)
    half = restrict_to_ball(f, np.zeros(1), 0.5)
    assert half.norm_squared() == pytest.approx(0.5, abs=2 * line.h)


def test_restrict_never_grows_norm(line, rng):
    f = random_function(line, rng)
    assert restrict_to_ball(f, [0.5], 0.8).norm() <= f.norm()


@settings(max_examples=30, deadline=None)
@given(
    r1=st.floats(0.0, 3.0),
    r2=st.floats(0.0, 3.0),
    seed=st.integers(0, 2**31 - 1),
)
def test_nested_restrictions_compose_by_min_radius(r1, r2, seed):
    g = Grid(d=1, L=2.0, h=0.125)
    f = random_function(g, np.random.default_rng(seed))
    c = np.array([0.25])
    nested = restrict_to_ball(restrict_to_ball(f, c, r1), c, r2)
    direct = restrict_to_ball(f, c, min(r1, r2))
    assert np.array_equal(nested.values, direct.values)


def test_partition_of_unity_splits_mass(line, rng):
    # disjoint cover: balls of radius 1/2 around the integers
    f = random_function(line, rng)
    pieces = [restrict_to_ball(f, [float(c)], 0.5).norm_squared()
              for c in range(-2, 3)]
    assert sum(pieces) <= f.norm_squared() + 1e-12
    # equality when the cover contains the support
    supported = restrict_to_ball(f, [1.0], 0.4)
    pieces = [restrict_to_ball(supported, [float(c)], 0.5).norm_squared()
              for c in range(-2, 3)]
    assert sum(pieces) == pytest.approx(supported.norm_squared(), rel=1e-12)


# --- multiplication operators ----------------------------------------------


def test_multiplication_by_one_is_identity(line, rng):
    f = random_function(line, rng)
    assert np.array_equal(multiplication_operator(line.ones()).apply(f).values,
                          f.values)


def test_multiplication_by_zero_annihilates(line, rng):
    f = random_function(line, rng)
    assert multiplication_operator(line.zeros()).apply(f).norm() == 0.0


def test_disjoint_indicator_multipliers_compose_to_zero(line, rng):
    a = multiplication_operator(line.ball_indicator([-1.0], 0.5))
    b = multiplication_operator(line.ball_indicator([1.0], 0.5))
    f = random_function(line, rng)
    assert a.compose(b).apply(f).norm() == 0.0


def test_multiplication_operators_commute(line, rng):
    a = multiplication_operator(random_function(line, rng))
    b = multiplication_operator(random_function(line, rng))
    f = random_function(line, rng)
    assert np.allclose(a.compose(b).apply(f).values,
                       b.compose(a).apply(f).values)


def test_multiplication_adjoint_conjugates(line, rng):
    m = multiplication_operator(random_function(line, rng))
    f = random_function(line, rng)
    g = random_function(line, rng)
    assert inner_product(m.apply(f), g) == pytest.approx(
        inner_product(f, m.adjoint().apply(g)))


# --- escaped-mass guard -----------------------------------------------------


def test_escape_guard_passes_interior_mass(line):
    f = line.ball_indicator(np.zeros(1), 0.5, normalized=True)
    assert ensure_mass_contained(f) == 0.0


def test_escape_guard_rejects_boundary_mass(line):
    f = line.ball_indicator([1.9], 0.1, normalized=True)
    with pytest.raises(EscapedMassError):
        ensure_mass_contained(f)


def test_escape_guard_weight_scaling(line):
    # interior gaussian with faint boundary mass: the raw frame mass passes,
    # a large integrand weight pushes it over the same tolerance
    f = line.from_callable(lambda p: np.exp(-2.0 * p[:, 0] ** 2)).normalized()
    raw = ensure_mass_contained(f, tol=1e-5)
    assert raw < 1e-5
    with pytest.raises(EscapedMassError):
        ensure_mass_contained(f, tol=1e-5, weight=1e6)


def test_frame_mass_of_edge_function(line):
    f = line.ball_indicator([1.95], 0.04, normalized=True)
    assert f.frame_mass() == pytest.approx(1.0)
    assert f.frame_mass(margin=0.01) == 0.0


# --- grid function algebra and serialization --------------------------------


def test_norm_is_weighted_euclidean(line):
    f = line.function(np.full(line.n_points, 2.0))
    assert f.norm_squared() == pytest.approx(4.0 * line.weight * line.n_points)


def test_normalized_gives_unit_norm(line, rng):
    f = random_function(line, rng)
    assert f.normalized().norm() == pytest.approx(1.0, abs=1e-14)


def test_delta_is_unit_norm(line):
    d = line.delta([0.3])
    assert d.norm() == pytest.approx(1.0, abs=1e-14)
    assert np.count_nonzero(d.values) == 1


def test_empty_ball_indicator_raises(line):
    with pytest.raises(ValueError):
        line.ball_indicator(np.zeros(1), line.h / 100.0)


def test_values_are_immutable(line):
    f = line.ones()
    with pytest.raises(ValueError):
        f.values[0] = 5.0


def test_save_load_round_trip(tmp_path, line, rng):
    f = random_function(line, rng)
    save_grid_function(f, tmp_path / "f")
    g = load_grid_function(tmp_path / "f")
    assert g.grid.compatible(line)
    assert np.allclose(g.values, f.values, rtol=1e-12, atol=0.0)


def test_two_dimensional_distances(plane):
    d = plane.distances_to([0.5, -0.5])
    pts = plane.points
    assert d == pytest.approx(np.hypot(pts[:, 0] - 0.5, pts[:, 1] + 0.5))
