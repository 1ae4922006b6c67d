import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fblab.mesh import (
    DiscreteFunction,
    Domain,
    GridMismatch,
    InvalidExponent,
    InvalidResolution,
    ball_nodes,
    build_grid,
    cell_gradients,
    integrate,
    lq_norm,
)


def test_interval_grid_counts():
    g = build_grid(Domain.interval(0, 1), 4)
    assert g.n_nodes == 5
    assert g.h == (0.25,)
    assert g.boundary_mask.tolist() == [True, False, False, False, True]


def test_rectangle_grid_boundary():
    g = build_grid(Domain.rectangle(0, 1, 0, 1), 2)
    assert g.n_nodes == 9
    assert int(g.boundary_mask.sum()) == 8
    assert g.n_elements == 8


def test_resolution_too_small():
    with pytest.raises(InvalidResolution):
        build_grid(Domain.interval(0, 1), 1)


def test_bad_domain():
    with pytest.raises(ValueError):
        Domain.interval(1, 1)


def test_boundary_mask_matches_geometry():
    g = build_grid(Domain.rectangle(-1, 2, 0, 1), 6)
    X = g.coords
    on_edge = np.isclose(X[:, 0], -1) | np.isclose(X[:, 0], 2) | np.isclose(X[:, 1], 0) | np.isclose(X[:, 1], 1)
    assert np.array_equal(on_edge, g.boundary_mask)


def test_gradients_exact_on_linears():
    g = build_grid(Domain.interval(0, 1), 7)
    u = DiscreteFunction.from_callable(g, lambda x: x)
    assert np.allclose(cell_gradients(u), 1.0, atol=1e-13)
    c = DiscreteFunction(g, np.full(g.n_nodes, 3.0))
    assert np.all(cell_gradients(c) == 0)


def test_gradients_exact_on_affine_2d():
    g = build_grid(Domain.rectangle(0, 1, 0, 2), 5)
    u = DiscreteFunction.from_callable(g, lambda x, y: x + 2 * y)
    G = cell_gradients(u)
    assert np.allclose(G[:, 0], 1, atol=1e-12)
    assert np.allclose(G[:, 1], 2, atol=1e-12)


def test_integrate_examples():
    g = build_grid(Domain.interval(0, 1), 10)
    assert integrate(g, np.ones(g.n_elements)) == pytest.approx(1.0)
    assert integrate(g, g.midpoints[:, 0]) == pytest.approx(0.5, abs=1e-14)
    g2 = build_grid(Domain.rectangle(0, 1, 0, 1), 4)
    assert integrate(g2, np.full(g2.n_elements, 3.0)) == pytest.approx(3.0)
    with pytest.raises(GridMismatch):
        integrate(g, np.ones(3))


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31 - 1))
def test_integrate_linear(a, b, seed):
    g = build_grid(Domain.rectangle(0, 1, 0, 1), 6)
    rng = np.random.default_rng(seed)
    g1, g2 = rng.normal(size=(2, g.n_elements))
    lhs = integrate(g, a * g1 + b * g2)
    rhs = a * integrate(g, g1) + b * integrate(g, g2)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)) * 10)


def test_lq_norm_examples():
    g = build_grid(Domain.interval(0, 1), 8)
    assert lq_norm(DiscreteFunction(g, np.full(9, 2.0)), 3) == pytest.approx(2.0)
    assert lq_norm(DiscreteFunction.zeros(g), np.inf) == 0.0
    with pytest.raises(InvalidExponent):
        lq_norm(DiscreteFunction.zeros(g), 0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1, 4), st.floats(0.1, 4))
def test_lq_norm_monotone_in_q(seed, q1, dq):
    g = build_grid(Domain.interval(0, 1), 16)
    u = DiscreteFunction(g, np.random.default_rng(seed).uniform(-1, 1, g.n_nodes))
    assert lq_norm(u, q1) <= lq_norm(u, q1 + dq) + 1e-12
    assert lq_norm(u, q1 + dq) <= lq_norm(u, np.inf) + 1e-12


def test_ball_nodes():
    g = build_grid(Domain.interval(0, 1), 10)
    assert ball_nodes(g, [0.5], 0.05).tolist() == [5]
    assert ball_nodes(g, [0.5], 2.0).size == g.n_nodes
    assert ball_nodes(g, [5.0], 1e-3).size == 0


def test_csv_roundtrip(tmp_path):
    g = build_grid(Domain.rectangle(0, 1, 0, 1), 4)
    u = DiscreteFunction.from_callable(g, lambda x, y: np.sin(x) * y)
    u.to_csv(tmp_path / "u.csv")
    assert (tmp_path / "u.csv").read_text().splitlines()[0] == "x,y,u"
    v = DiscreteFunction.from_csv(tmp_path / "u.csv", g)
    assert np.array_equal(u.values, v.values)
    with pytest.raises(GridMismatch):
        DiscreteFunction.from_csv(tmp_path / "u.csv", build_grid(Domain.rectangle(0, 1, 0, 1), 5))


def test_discrete_function_rejects_bad_values():
    g = build_grid(Domain.interval(0, 1), 4)
    with pytest.raises(GridMismatch):
        DiscreteFunction(g, np.zeros(3))
    with pytest.raises(ValueError):
        DiscreteFunction(g, [0, 1, np.nan, 0, 0])


def test_interpolation_exact_for_affine_2d():
    g = build_grid(Domain.rectangle(0, 1, 0, 1), 5)
    u = DiscreteFunction.from_callable(g, lambda x, y: 1 + x - 3 * y)
    X = np.random.default_rng(0).uniform(0, 1, (50, 2))
    assert np.allclose(u.at_points(X), 1 + X[:, 0] - 3 * X[:, 1], atol=1e-12)
    assert u.at([0.3, 0.7]) == pytest.approx(1 + 0.3 - 2.1)
