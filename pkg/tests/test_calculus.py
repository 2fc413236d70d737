from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjgraph.calculus import (
    divergence,
    divergence_l1_bound,
    divergence_l1_bound_check,
    gradient,
    individual_noise,
    inner,
    laplacian,
    log_gradient,
    norm,
    rate_matrix,
)
from hjgraph.errors import BoundaryPoint
from hjgraph.graph_core import build_graph, complete_graph, random_graph, random_interior
from hjgraph.metric_tensor import BUILTIN, HARMONIC, LOGARITHMIC

HALF = np.array([0.5, 0.5])
seeds = st.integers(0, 2**32 - 1)


def test_gradient_examples(two_node, k3):
    assert np.array_equal(gradient(k3, [4.0, 4.0, 4.0]), np.zeros(3))
    assert gradient(two_node, [1.0, 0.0])[0] == 1.0
    assert np.array_equal(gradient(k3, [1.0, 2.0, 3.0]), [-1.0, -2.0, -1.0])


def test_gradient_scales_with_sqrt_weight():
    g = build_graph(2, [(0, 1, 4.0)])
    assert gradient(g, [1.0, 0.0])[0] == 2.0


def test_divergence_example(two_node):
    # v_21 = 2 means the stored (1, 2) entry is -2
    div = divergence(two_node, LOGARITHMIC, HALF, np.array([-2.0]))
    assert np.allclose(div, [1.0, -1.0], atol=1e-15)


def test_divergence_vanishes_on_isolated_support(k3):
    rho = np.array([1.0, 0.0, 0.0])
    div = divergence(k3, HARMONIC, rho, np.array([1.0, 2.0, 3.0]))
    assert np.array_equal(div, np.zeros(3))


def test_norm_examples(two_node):
    v = np.array([2.0])
    assert inner(two_node, LOGARITHMIC, HALF, v, np.zeros(1)) == 0.0
    assert norm(two_node, LOGARITHMIC, HALF, v) ** 2 == pytest.approx(2.0, abs=1e-15)
    assert norm(two_node, LOGARITHMIC, np.array([1.0, 0.0]), v) == 0.0


def test_laplacian_examples(two_node, k3, rng):
    assert np.allclose(laplacian(two_node, LOGARITHMIC, HALF), [[0.5, -0.5], [-0.5, 0.5]], atol=1e-16)
    assert np.array_equal(laplacian(two_node, LOGARITHMIC, np.array([1.0, 0.0])), np.zeros((2, 2)))
    rho = random_interior(rng, 3, 0.01)
    assert np.allclose(laplacian(k3, HARMONIC, rho) @ np.ones(3), 0.0, atol=1e-15)


def test_rate_matrix_examples(two_node, k3):
    assert np.array_equal(rate_matrix(two_node), [[-1.0, 1.0], [1.0, -1.0]])
    a = rate_matrix(k3)
    assert np.array_equal(np.diag(a), [-2.0, -2.0, -2.0])
    assert np.array_equal(a - np.diag(np.diag(a)), np.ones((3, 3)) - np.eye(3))


def test_log_gradient_examples(two_node, k3):
    assert np.allclose(log_gradient(k3, np.full(3, 1 / 3)), 0.0, atol=1e-15)
    assert log_gradient(two_node, np.array([0.75, 0.25]))[0] == pytest.approx(math.log(3.0), rel=1e-15)
    with pytest.raises(BoundaryPoint):
        log_gradient(two_node, np.array([1.0, 0.0]))


def test_individual_noise_examples(two_node, k3, rng):
    rho = np.array([0.75, 0.25])
    p = log_gradient(two_node, rho)
    assert individual_noise(two_node, LOGARITHMIC, rho, p) == pytest.approx(-0.5 * math.log(3.0), rel=1e-14)
    assert individual_noise(two_node, LOGARITHMIC, rho, np.zeros(1)) == 0.0
    val = individual_noise(k3, LOGARITHMIC, np.full(3, 1 / 3), rng.standard_normal(3))
    assert abs(val) < 1e-15
    with pytest.raises(BoundaryPoint):
        individual_noise(two_node, LOGARITHMIC, np.array([1.0, 0.0]), np.ones(1))


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(2, 8), name=st.sampled_from(sorted(BUILTIN)))
def test_integration_by_parts(seed, n, name):
    rng = np.random.default_rng(seed)
    graph = random_graph(rng, n)
    g = BUILTIN[name]
    rho = rng.dirichlet(np.ones(n))
    phi = rng.standard_normal(n)
    v = rng.standard_normal(graph.n_edges)
    lhs = float(np.dot(phi, divergence(graph, g, rho, v)))
    rhs = -inner(graph, g, rho, gradient(graph, phi), v)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))
    assert abs(divergence(graph, g, rho, v).sum()) <= 1e-14 * (1 + np.abs(v).sum())


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(2, 8), name=st.sampled_from(sorted(BUILTIN)))
def test_laplacian_is_minus_div_grad_and_psd(seed, n, name):
    rng = np.random.default_rng(seed)
    graph = random_graph(rng, n)
    g = BUILTIN[name]
    rho = rng.dirichlet(np.ones(n))
    lap = laplacian(graph, g, rho)
    phi = rng.standard_normal(n)
    assert np.allclose(lap @ phi, -divergence(graph, g, rho, gradient(graph, phi)), atol=1e-13)
    assert np.array_equal(lap, lap.T)
    assert np.linalg.eigvalsh(lap).min() >= -1e-10


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(2, 8))
def test_log_mean_divergence_of_log_gradient_is_heat_generator(seed, n):
    rng = np.random.default_rng(seed)
    graph = random_graph(rng, n)
    mu = random_interior(rng, n, 1e-3)
    lhs = divergence(graph, LOGARITHMIC, mu, log_gradient(graph, mu))
    assert np.abs(lhs - rate_matrix(graph) @ mu).max() <= 1e-10


def test_divergence_l1_bound_random(k3, rng):
    assert divergence_l1_bound_check(k3, LOGARITHMIC, np.full(3, 1 / 3), np.zeros(3))
    for _ in range(1000):
        rho = rng.dirichlet(np.ones(3))
        v = rng.standard_normal(3)
        for g in BUILTIN.values():
            assert divergence_l1_bound_check(k3, g, rho, v)


def test_divergence_l1_bound_adversarial(rng):
    graph = complete_graph(4)
    worst = 0.0
    for _ in range(2000):
        rho = rng.dirichlet(np.full(4, 0.3))
        gvals = LOGARITHMIC(rho[graph.tail], rho[graph.head])
        v = np.zeros(graph.n_edges)
        v[np.argmin(gvals)] = 1.0
        v += 1e-3 * rng.standard_normal(graph.n_edges)
        lhs, bound = divergence_l1_bound(graph, LOGARITHMIC, rho, v)
        assert lhs <= bound + 1e-12
        if bound > 0:
            worst = max(worst, lhs / bound)
    assert worst < 1.0
