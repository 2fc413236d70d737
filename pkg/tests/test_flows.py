from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjgraph.calculus import rate_matrix
from hjgraph.errors import FreezeEventEncountered, NoExtension
from hjgraph.flows import (
    flow_jacobian,
    general_flow,
    heat_flow,
    heat_semigroup,
    lipschitz_estimate,
    matrix_exp,
    xi,
    xi_jacobian,
)
from hjgraph.graph_core import complete_graph, path_graph, random_graph, random_interior
from hjgraph.metric_tensor import ARITHMETIC, BUILTIN, HARMONIC, LOGARITHMIC, custom_tensor

seeds = st.integers(0, 2**32 - 1)


def test_matrix_exp_identity_at_zero(k3):
    assert np.array_equal(matrix_exp(rate_matrix(k3), 0.0), np.eye(3))


@pytest.mark.parametrize("t", [0.01, 0.3, 1.0, 5.0])
def test_matrix_exp_two_node_closed_form(two_node, t):
    d = math.exp(-2 * t)
    expected = 0.5 * np.array([[1 + d, 1 - d], [1 - d, 1 + d]])
    assert np.allclose(matrix_exp(rate_matrix(two_node), t), expected, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(seed=seeds, n=st.integers(2, 8), t=st.floats(0.0, 20.0))
def test_semigroup_is_stochastic(seed, n, t):
    graph = random_graph(np.random.default_rng(seed), n)
    p = heat_semigroup(graph, t)
    assert p.min() >= 0.0
    assert np.abs(p.sum(axis=0) - 1).max() <= 1e-10
    assert np.abs(p.sum(axis=1) - 1).max() <= 1e-10


@settings(max_examples=50, deadline=None)
@given(seed=seeds, n=st.integers(2, 8), s=st.floats(0.0, 3.0), t=st.floats(0.0, 3.0))
def test_semigroup_property(seed, n, s, t):
    rng = np.random.default_rng(seed)
    graph = random_graph(rng, n)
    mu = rng.dirichlet(np.ones(n))
    once = heat_flow(graph, mu, s + t)
    twice = heat_semigroup(graph, s) @ heat_flow(graph, mu, t)
    assert np.abs(once - twice).max() <= 1e-10


def test_heat_flow_examples(two_node, k3):
    assert np.allclose(heat_flow(two_node, [1.0, 0.0], math.log(2) / 2), [0.75, 0.25], atol=1e-15)
    assert np.allclose(heat_flow(k3, np.full(3, 1 / 3), 7.0), 1 / 3, atol=1e-15)
    assert np.abs(heat_flow(k3, [1.0, 0.0, 0.0], 10.0) - 1 / 3).max() <= 1e-8


def test_xi_log_mean_is_heat_generator(rng):
    graph = random_graph(rng, 6)
    a = rate_matrix(graph)
    for _ in range(1000):
        mu = rng.dirichlet(np.ones(6))
        assert np.abs(xi(graph, LOGARITHMIC, mu) - a @ mu).max() <= 1e-15


def test_xi_examples(k3):
    for g in (HARMONIC, LOGARITHMIC):
        assert np.allclose(xi(k3, g, np.full(3, 1 / 3)), 0.0, atol=1e-16)
    mu = np.array([0.6, 0.4, 0.0])
    assert xi(k3, HARMONIC, mu)[2] == 0.0
    assert xi(k3, LOGARITHMIC, mu)[2] == pytest.approx(1.0)
    with pytest.raises(NoExtension):
        xi(k3, ARITHMETIC, mu)


@pytest.mark.parametrize("g", [HARMONIC, LOGARITHMIC], ids=lambda g: g.name)
def test_xi_jacobian_against_central_difference(g, rng):
    graph = random_graph(rng, 5)
    mu = random_interior(rng, 5, 0.05)
    h = 1e-6
    fd = np.column_stack([(xi(graph, g, mu + h * e) - xi(graph, g, mu - h * e)) / (2 * h) for e in np.eye(5)])
    assert np.allclose(xi_jacobian(graph, g, mu), fd, atol=1e-7)
    assert np.allclose(xi_jacobian(graph, LOGARITHMIC, mu), rate_matrix(graph), atol=1e-15)


def test_general_flow_matches_semigroup(k3, rng):
    mu = rng.dirichlet(np.ones(3))
    traj = general_flow(k3, LOGARITHMIC, mu, 1.0, h=1e-3)
    assert traj.times[-1] == 1.0
    assert np.abs(traj.final - heat_flow(k3, mu, 1.0)).max() <= 1e-6


def test_general_flow_fourth_order(k3):
    mu = np.array([0.7, 0.2, 0.1])
    exact = heat_flow(k3, mu, 1.0)
    errs = [np.abs(general_flow(k3, LOGARITHMIC, mu, 1.0, h=h).final - exact).max() for h in (0.2, 0.1, 0.05)]
    assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12


@pytest.mark.parametrize("name", ["harmonic", "logarithmic"])
def test_uniform_start_is_stationary(k3, name):
    traj = general_flow(k3, BUILTIN[name], np.full(3, 1 / 3), 2.0, h=0.01)
    assert np.abs(traj.states - 1 / 3).max() <= 1e-15


def test_harmonic_flow_keeps_empty_vertex_empty(k3):
    traj = general_flow(k3, HARMONIC, [0.7, 0.3, 0.0], 10.0, h=1e-2)
    assert np.all(traj.states[:, 2] == 0.0)
    assert np.abs(traj.final[:2] - 0.5).max() <= 1e-6


def test_log_flow_fills_empty_vertex(k3):
    traj = general_flow(k3, LOGARITHMIC, [0.7, 0.3, 0.0], 1.0, h=1e-3)
    assert np.abs(traj.final - heat_flow(k3, [0.7, 0.3, 0.0], 1.0)).max() <= 1e-9


@settings(max_examples=20, deadline=None)
@given(seed=seeds, name=st.sampled_from(["harmonic", "logarithmic"]))
def test_flow_invariants(seed, name):
    rng = np.random.default_rng(seed)
    graph = random_graph(rng, 5)
    mu = rng.dirichlet(np.full(5, 0.5))
    traj = general_flow(graph, BUILTIN[name], mu, 0.5, h=1e-2)
    assert np.abs(traj.states.sum(axis=1) - 1).max() <= 1e-9
    assert traj.states.min() >= 0.0
    for v in np.flatnonzero(mu == 0.0):
        if name == "harmonic":
            assert np.all(traj.states[:, v] == 0.0)


def antidiffusive():
    return custom_tensor(lambda s, t: np.zeros_like(np.asarray(s, dtype=float)), name="antidiffusive",
                         gbar=lambda s, t: -(np.asarray(s, dtype=float) - t))


def test_antidiffusive_flow_freezes_at_event(two_node):
    # d mu_2 / dt = -(mu_1 - mu_2) empties vertex 2 when 0.2 exp(2t) = 1
    traj = general_flow(two_node, antidiffusive(), [0.6, 0.4], 2.0, h=1e-2)
    assert len(traj.freeze_events) == 1
    t_event, vertex = traj.freeze_events[0]
    assert vertex == 1
    assert t_event == pytest.approx(math.log(5) / 2, abs=1e-8)
    after = traj.times > t_event
    assert np.all(traj.states[after, 1] == 0.0)
    assert np.array_equal(traj.final, [1.0, 0.0])
    assert traj.times[-1] == 2.0


def test_custom_tensor_with_inflow_is_rejected(two_node):
    leaky = custom_tensor(LOGARITHMIC.func, name="leaky", gbar=lambda s, t: np.asarray(s, dtype=float) - t)
    with pytest.raises(NoExtension):
        general_flow(two_node, leaky, [1.0, 0.0], 1.0)
    with pytest.raises(NoExtension):
        general_flow(two_node, ARITHMETIC, [0.5, 0.5], 1.0)


def test_jacobian_log_is_semigroup(k3, rng):
    mu = random_interior(rng, 3, 0.05)
    traj = flow_jacobian(k3, LOGARITHMIC, mu, 1.0, h=1e-3)
    assert np.array_equal(traj.jacobians[0], np.eye(3))
    assert np.abs(traj.jacobians[-1] - heat_semigroup(k3, 1.0)).max() <= 1e-8


@pytest.mark.parametrize("g", [HARMONIC, LOGARITHMIC], ids=lambda g: g.name)
def test_jacobian_central_difference(g, rng):
    graph = path_graph(4)
    mu = random_interior(rng, 4, 0.1)
    d = rng.standard_normal(4)
    d -= d.mean()
    d /= np.abs(d).max()
    psi = flow_jacobian(graph, g, mu, 0.5, h=1e-2).jacobians[-1]
    assert np.abs(psi.sum(axis=0) - 1).max() <= 1e-9
    for eps in (1e-3, 1e-4):
        plus = general_flow(graph, g, mu + eps * d, 0.5, h=1e-2).final
        minus = general_flow(graph, g, mu - eps * d, 0.5, h=1e-2).final
        err = np.abs((plus - minus) / (2 * eps) - psi @ d).max()
        assert err <= 10.0 * eps ** 2


def test_jacobian_refuses_boundary(k3):
    with pytest.raises(FreezeEventEncountered):
        flow_jacobian(k3, HARMONIC, [0.5, 0.5, 0.0], 1.0)


def test_lipschitz_estimate_grows_near_boundary_for_harmonic():
    graph = complete_graph(3)
    near = lipschitz_estimate(graph, HARMONIC, 2000, seed=1, floor=1e-4)
    far = lipschitz_estimate(graph, HARMONIC, 2000, seed=1, floor=1e-1)
    assert near > far
    assert lipschitz_estimate(graph, LOGARITHMIC, 500, seed=1) <= np.abs(np.linalg.eigvalsh(rate_matrix(graph))).max() + 1e-6
