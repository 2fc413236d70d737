from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjgraph.calculus import gradient, log_gradient, rate_matrix
from hjgraph.elliptic import center, project_tangent
from hjgraph.errors import BoundaryPoint
from hjgraph.flows import heat_semigroup, rk4_step, xi
from hjgraph.graph_core import complete_graph, path_graph, random_graph, random_interior
from hjgraph.hje import (
    composite,
    constant,
    entropy,
    frechet,
    frechet_numeric,
    functional_from_config,
    functional_to_config,
    hje_frechet,
    hje_residual,
    hje_residuals,
    hje_value,
    individual_noise_of_value,
    linear,
    quadratic,
    solve_hje,
    time_derivative,
    wasserstein_gradient,
)
from hjgraph.metric_tensor import HARMONIC, LOGARITHMIC

MU = np.array([0.5, 0.3, 0.2])
seeds = st.integers(0, 2**32 - 1)


def test_frechet_linear_is_centered_c(rng):
    c = rng.standard_normal(4)
    rho = rng.dirichlet(np.ones(4) * 5)
    assert np.allclose(frechet_numeric(linear(c), rho), center(c), atol=1e-10)
    assert np.allclose(frechet(linear(c), rho), center(c), atol=1e-15)


def test_frechet_entropy_at_uniform_is_zero():
    assert np.allclose(frechet_numeric(entropy(), np.full(4, 0.25)), 0.0, atol=1e-10)
    assert np.allclose(frechet(entropy(), np.full(4, 0.25)), 0.0, atol=1e-15)


def test_frechet_quadratic(rng):
    q = rng.standard_normal((4, 4))
    q = q + q.T
    rho = rng.dirichlet(np.ones(4) * 5)
    assert np.allclose(frechet_numeric(quadratic(q), rho, eps=1e-4), center(q @ rho), atol=1e-6)


def test_frechet_nonsymmetric_quadratic_uses_symmetric_part(rng):
    q = rng.standard_normal((3, 3))
    rho = rng.dirichlet(np.ones(3) * 5)
    assert np.allclose(frechet(quadratic(q), rho), frechet_numeric(quadratic(q), rho), atol=1e-8)


def test_frechet_numeric_needs_room():
    with pytest.raises(BoundaryPoint):
        frechet_numeric(entropy(), [0.5, 0.5 - 1e-6, 1e-6])
    with pytest.raises(BoundaryPoint):
        frechet(entropy(), [1.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(seed=seeds, n=st.integers(2, 6))
def test_frechet_sums_to_zero(seed, n):
    rng = np.random.default_rng(seed)
    rho = random_interior(rng, n, 0.01)
    f = composite([(0.7, linear(rng.standard_normal(n))), (1.3, entropy()),
                   (0.4, quadratic(rng.standard_normal((n, n))))])
    assert abs(frechet(f, rho).sum()) <= 1e-12
    assert abs(frechet_numeric(f, rho).sum()) <= 1e-12
    assert np.allclose(frechet(f, rho), frechet_numeric(f, rho), atol=1e-8)


def test_functional_config_roundtrip(rng):
    rho = rng.dirichlet(np.ones(3))
    for cfg in ({"kind": "linear", "c": [1.0, 2.0, 3.0]}, {"kind": "quadratic", "Q": np.eye(3).tolist()},
                {"kind": "entropy"}, {"kind": "constant", "value": 2.5},
                {"kind": "composite", "terms": [{"weight": 2.0, "kind": "entropy"},
                                                {"weight": 1.0, "kind": "linear", "c": [0, 1, 0]}]}):
        f = functional_from_config(cfg)
        again = functional_from_config(functional_to_config(f))
        assert again(rho) == f(rho)
    with pytest.raises(ValueError):
        functional_from_config({"kind": "cubic"})


def test_wasserstein_gradient_examples(k3, rng):
    rho = random_interior(rng, 3, 0.05)
    c = rng.standard_normal(3)
    assert np.array_equal(wasserstein_gradient(k3, constant(3.0), rho), np.zeros(3))
    assert np.allclose(wasserstein_gradient(k3, linear(c), rho), gradient(k3, c), atol=1e-14)
    assert np.allclose(wasserstein_gradient(k3, entropy(), rho), log_gradient(k3, rho), atol=1e-14)
    numeric = gradient(k3, frechet_numeric(entropy(), rho))
    assert np.allclose(numeric, log_gradient(k3, rho), atol=1e-8)
    for g in (HARMONIC, LOGARITHMIC):
        w = wasserstein_gradient(k3, entropy(), rho)
        assert np.allclose(project_tangent(k3, g, rho, w), w, atol=1e-9)


def test_wasserstein_gradient_ignores_constant_shift(k3, rng):
    # dyadic data on four vertices keeps every centering operation exact
    graph = complete_graph(4)
    rho = np.full(4, 0.25)
    c = rng.integers(-16, 16, 4) / 8.0
    a = wasserstein_gradient(graph, linear(c), rho)
    assert np.array_equal(a, wasserstein_gradient(graph, linear(c + 3.0), rho))
    rho = random_interior(rng, 3, 0.05)
    c = rng.standard_normal(3)
    a = wasserstein_gradient(k3, linear(c), rho)
    b = wasserstein_gradient(k3, linear(c + 7.25), rho)
    assert np.allclose(a, b, rtol=0, atol=1e-14)


def test_hje_value_examples(k3, rng):
    c = rng.standard_normal(3)
    assert hje_value(k3, LOGARITHMIC, linear(c), 0.0, MU) == pytest.approx(float(c @ MU), abs=1e-15)
    expected = float(c @ (heat_semigroup(k3, 0.7) @ MU))
    assert hje_value(k3, LOGARITHMIC, linear(c), 0.7, MU) == pytest.approx(expected, abs=1e-15)
    flow_route = hje_value(k3, LOGARITHMIC, linear(c), 0.7, MU, method="flow")
    assert flow_route == pytest.approx(expected, abs=1e-10)
    for t in (0.0, 0.5, 2.0):
        assert hje_value(k3, HARMONIC, constant(1.5), t, MU) == 1.5


def test_semigroup_route_needs_log(k3):
    with pytest.raises(ValueError):
        hje_value(k3, HARMONIC, entropy(), 0.5, MU, method="semigroup")


def test_eps_scaling_semigroup(k3):
    f = entropy()
    for eps in (0.1, 0.5, 3.0):
        for t in (0.2, 1.0):
            scaled = hje_value(k3, LOGARITHMIC, f, t, MU, rate_scale=eps)
            assert scaled == pytest.approx(hje_value(k3, LOGARITHMIC, f, eps * t, MU), abs=1e-10)


def test_eps_scaling_general_flow(k3):
    # integrate the sped-up field eps * xi directly and compare with u(eps t)
    eps, t, h = 0.5, 1.0, 1e-3
    y = MU.copy()
    for _ in range(int(round(t / h))):
        y = rk4_step(lambda z: eps * xi(k3, HARMONIC, z), y, h)
    direct = entropy()(y)
    assert direct == pytest.approx(hje_value(k3, HARMONIC, entropy(), eps * t, MU), abs=1e-10)


def test_hje_frechet_examples(k3, rng):
    c = rng.standard_normal(3)
    assert np.allclose(hje_frechet(k3, HARMONIC, quadratic(np.eye(3)), 0.0, MU), center(MU), atol=1e-15)
    expected = center(heat_semigroup(k3, 0.8) @ c)
    assert np.allclose(hje_frechet(k3, LOGARITHMIC, linear(c), 0.8, MU), expected, atol=1e-14)
    flow_route = hje_frechet(k3, LOGARITHMIC, linear(c), 0.8, MU, method="flow")
    assert np.allclose(flow_route, expected, atol=1e-6)


@pytest.mark.parametrize("g", [HARMONIC, LOGARITHMIC], ids=lambda g: g.name)
def test_chain_rule(g, rng):
    graph = path_graph(4)
    mu = random_interior(rng, 4, 0.1)
    d = rng.standard_normal(4)
    d -= d.mean()
    u0 = composite([(1.0, entropy()), (0.5, quadratic(np.diag([1.0, 2.0, 3.0, 4.0])))])
    fre = hje_frechet(graph, g, u0, 0.4, mu, method="flow", flow_step=1e-2)
    for eps in (1e-3, 1e-4):
        plus = hje_value(graph, g, u0, 0.4, mu + eps * d, method="flow", flow_step=1e-2)
        minus = hje_value(graph, g, u0, 0.4, mu - eps * d, method="flow", flow_step=1e-2)
        assert abs((plus - minus) / (2 * eps) - fre @ d) <= 50 * eps ** 2


def test_residual_constant_functional(k3):
    assert hje_residual(k3, HARMONIC, constant(2.0), 0.5, MU, h=1e-2) <= 1e-12


def test_linear_log_identity_is_exact(k3, rng):
    c = rng.standard_normal(3)
    t = 0.6
    ptc = heat_semigroup(k3, t) @ c
    a = rate_matrix(k3)
    dt_exact = float(c @ (a @ heat_semigroup(k3, t) @ MU))
    noise = individual_noise_of_value(k3, LOGARITHMIC, linear(c), t, MU)
    assert noise == pytest.approx(float(ptc @ (a @ MU)), abs=1e-12)
    assert noise == pytest.approx(dt_exact, abs=1e-12)


@pytest.mark.parametrize("g", [HARMONIC, LOGARITHMIC], ids=lambda g: g.name)
def test_residual_second_order(g):
    graph = complete_graph(3)
    q = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 3.0]])
    res = hje_residuals(graph, g, quadratic(q), 0.5, MU, [1e-2, 5e-3, 2.5e-3], method="flow")
    assert res[0] / res[1] > 3.5 and res[1] / res[2] > 3.5
    assert res[2] < 1e-5


def test_time_derivative_matches_noise(k3):
    u0 = entropy()
    dt = time_derivative(k3, HARMONIC, u0, 0.5, MU, h=1e-3)
    assert dt == pytest.approx(individual_noise_of_value(k3, HARMONIC, u0, 0.5, MU), abs=1e-6)
    with pytest.raises(ValueError):
        time_derivative(k3, HARMONIC, u0, 1e-3, MU, h=1e-3)


def test_solve_hje_fields(k3):
    sol = solve_hje(k3, HARMONIC, entropy(), 0.5, MU, h=1e-3)
    assert abs(sol.frechet.sum()) <= 1e-12
    assert np.allclose(sol.wgrad, gradient(k3, sol.frechet), atol=0)
    assert sol.residual is not None and sol.residual < 1e-5
    assert math.isfinite(sol.value)
