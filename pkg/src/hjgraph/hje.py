"""Functionals on the simplex, their derivatives, and the linear
Hamilton-Jacobi equation ``d_t u = Delta_ind u`` solved by ``u(t, mu) = u0(sigma^mu(t))``.

Frechet derivatives are always returned as the zero-sum representative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .calculus import gradient, individual_noise
from .elliptic import center
from .errors import BoundaryPoint
from .flows import flow_jacobian, general_flow, heat_semigroup, rk4_step, xi
from .graph_core import Graph, validate_simplex
from .metric_tensor import LOGARITHMIC, MetricTensor

FD_STEP = 1e-5
TIME_STEP = 1e-3
FLOW_STEP = 1e-3

Vector = np.ndarray


@dataclass(frozen=True)
class Functional:
    """A real function on the simplex with an optional analytic gradient.

    ``raw_gradient`` returns any representative of the derivative (e.g. the
    Euclidean gradient); :meth:`analytic_frechet` centers it.
    """

    kind: str
    func: Callable[[Vector], float]
    raw_gradient: Callable[[Vector], Vector] | None = None
    params: dict | None = None

    def __call__(self, rho) -> float:
        return float(self.func(np.asarray(rho, dtype=float)))

    def analytic_frechet(self, rho) -> Vector | None:
        if self.raw_gradient is None:
            return None
        return center(self.raw_gradient(np.asarray(rho, dtype=float)))


def constant(value: float = 0.0) -> Functional:
    return Functional("constant", lambda rho: value, lambda rho: np.zeros(len(rho)), {"value": value})


def linear(c: Sequence[float]) -> Functional:
    """``<c, rho>``."""
    c = np.asarray(c, dtype=float)
    return Functional("linear", lambda rho: float(c @ rho), lambda rho: c.copy(), {"c": c.tolist()})


def quadratic(q: Sequence[Sequence[float]]) -> Functional:
    """``rho^T Q rho / 2``; the gradient uses the symmetric part of ``Q``."""
    q = np.asarray(q, dtype=float)
    sym = 0.5 * (q + q.T)
    return Functional("quadratic", lambda rho: 0.5 * float(rho @ q @ rho), lambda rho: sym @ rho,
                      {"Q": q.tolist()})


def _xlogx(rho: Vector) -> float:
    pos = rho > 0
    return float(np.sum(rho[pos] * np.log(rho[pos])))


def _entropy_gradient(rho: Vector) -> Vector:
    if np.min(rho) <= 0.0:
        raise BoundaryPoint("entropy derivative needs every coordinate positive")
    return np.log(rho) + 1.0


def entropy() -> Functional:
    """``sum rho_i log rho_i`` with ``0 log 0 = 0``."""
    return Functional("entropy", _xlogx, _entropy_gradient, {})


def composite(terms: Sequence[tuple[float, Functional]]) -> Functional:
    """Weighted sum of functionals; analytic gradient only if every term has one."""
    terms = tuple((float(w), f) for w, f in terms)

    def func(rho):
        return sum(w * f(rho) for w, f in terms)

    grad = None
    if all(f.raw_gradient is not None for _, f in terms):
        def grad(rho):
            return sum(w * f.raw_gradient(rho) for w, f in terms)

    return Functional("composite", func, grad,
                      {"terms": [{"weight": w, **functional_to_config(f)} for w, f in terms]})


def functional_from_config(cfg: dict) -> Functional:
    """Build from ``{"kind": "linear", "c": [...]}``, ``{"kind": "quadratic", "Q": [[...]]}``,
    ``{"kind": "entropy"}``, ``{"kind": "constant", "value": x}`` or
    ``{"kind": "composite", "terms": [{"weight": w, "kind": ...}, ...]}``."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ValueError('functional config needs a "kind" key')
    kind = cfg["kind"]
    if kind == "linear":
        return linear(cfg["c"])
    if kind == "quadratic":
        return quadratic(cfg["Q"])
    if kind == "entropy":
        return entropy()
    if kind == "constant":
        return constant(float(cfg.get("value", 0.0)))
    if kind == "composite":
        return composite([(t.get("weight", 1.0), functional_from_config(t)) for t in cfg["terms"]])
    raise ValueError(f"unknown functional kind {kind!r}")


def functional_to_config(f: Functional) -> dict:
    return {"kind": f.kind, **(f.params or {})}


# -- derivatives -------------------------------------------------------------------

def frechet_numeric(f: Functional, rho, eps: float = FD_STEP) -> Vector:
    """Zero-sum derivative from central differences along ``e_k - e_n``."""
    rho = np.asarray(rho, dtype=float)
    n = rho.size
    if np.min(rho) <= 2.0 * eps:
        raise BoundaryPoint(f"need every coordinate above 2 eps = {2 * eps:g}")
    d = np.empty(n - 1)
    for k in range(n - 1):
        step = np.zeros(n)
        step[k], step[-1] = eps, -eps
        d[k] = (f(rho + step) - f(rho - step)) / (2.0 * eps)
    last = -d.sum() / n
    return np.append(d + last, last)


def frechet(f: Functional, rho, eps: float = FD_STEP) -> Vector:
    """Analytic derivative when available, otherwise :func:`frechet_numeric`."""
    out = f.analytic_frechet(rho)
    return frechet_numeric(f, rho, eps) if out is None else out


def wasserstein_gradient(graph: Graph, f: Functional, rho, eps: float = FD_STEP) -> np.ndarray:
    """Edge field ``grad(frechet(f, rho))``."""
    rho = validate_simplex(rho, n=graph.n)
    if np.min(rho) <= 0.0:
        raise BoundaryPoint("Wasserstein gradient needs an interior point")
    return gradient(graph, frechet(f, rho, eps))


# -- the Hamilton-Jacobi equation -----------------------------------------------------

@dataclass
class HJESolution:
    value: float
    frechet: Vector
    wgrad: np.ndarray
    residual: float | None = None


def _uses_semigroup(g: MetricTensor, method: str) -> bool:
    if method not in ("auto", "semigroup", "flow"):
        raise ValueError(f"unknown method {method!r}")
    is_log = g.gbar_func is LOGARITHMIC.gbar_func
    if method == "semigroup" and not is_log:
        raise ValueError("the semigroup route needs the logarithmic tensor")
    return method == "semigroup" or (method == "auto" and is_log)


def flowed_state(graph: Graph, g: MetricTensor, t: float, mu, method: str = "auto",
                 flow_step: float = FLOW_STEP, rate_scale: float = 1.0) -> Vector:
    """``sigma^mu(t)``: the heat semigroup for the logarithmic tensor, RK4 otherwise.

    ``rate_scale`` speeds the dynamics up uniformly (rate matrix ``rate_scale * A``).
    """
    mu = validate_simplex(mu, n=graph.n)
    if _uses_semigroup(g, method):
        return heat_semigroup(graph, t, rate_scale) @ mu
    return general_flow(graph, g, mu, rate_scale * t, flow_step).final


def hje_value(graph: Graph, g: MetricTensor, u0: Functional, t: float, mu, method: str = "auto",
              flow_step: float = FLOW_STEP, rate_scale: float = 1.0) -> float:
    """``u(t, mu) = u0(sigma^mu(t))``."""
    return u0(flowed_state(graph, g, t, mu, method, flow_step, rate_scale))


def _flow_with_jacobian(graph: Graph, g: MetricTensor, t: float, mu: Vector, method: str,
                        flow_step: float) -> tuple[Vector, np.ndarray]:
    if _uses_semigroup(g, method):
        psi = heat_semigroup(graph, t)
        return psi @ mu, psi
    traj = flow_jacobian(graph, g, mu, t, flow_step)
    return traj.final, traj.jacobians[-1]


def hje_frechet(graph: Graph, g: MetricTensor, u0: Functional, t: float, mu, method: str = "auto",
                flow_step: float = FLOW_STEP, eps: float = FD_STEP) -> Vector:
    """Zero-sum derivative of ``mu -> u(t, mu)``: ``center(Psi(t)^T frechet(u0, sigma^mu(t)))``
    with ``Psi = e^{tA}`` for the semigroup route and the flow Jacobian otherwise."""
    mu = validate_simplex(mu, n=graph.n)
    state, psi = _flow_with_jacobian(graph, g, t, mu, method, flow_step)
    return center(psi.T @ frechet(u0, state, eps))


def individual_noise_of_value(graph: Graph, g: MetricTensor, u0: Functional, t: float, mu,
                              method: str = "auto", flow_step: float = FLOW_STEP) -> float:
    """``Delta_ind u(t, mu) = -(grad_W u(t, mu), grad log mu)_mu``."""
    mu = validate_simplex(mu, n=graph.n)
    wgrad = gradient(graph, hje_frechet(graph, g, u0, t, mu, method, flow_step))
    return individual_noise(graph, g, mu, wgrad)


def _shifted_values(graph: Graph, g: MetricTensor, u0: Functional, t: float, mu: Vector,
                    state: Vector, h: float, semigroup: bool, substeps: int) -> tuple[float, float]:
    """``u(t + h)`` and ``u(t - h)``. On the RK4 route both are reached from
    ``sigma(t)`` with fine steps, so the error in ``sigma(t)`` cancels in differences."""
    if semigroup:
        return u0(heat_semigroup(graph, t + h) @ mu), u0(heat_semigroup(graph, t - h) @ mu)
    if np.min(state) <= 0.0:
        raise BoundaryPoint("flowed state reached the boundary")

    def field_fn(y):
        return xi(graph, g, y)

    ahead, behind = state.copy(), state.copy()
    for _ in range(substeps):
        ahead = rk4_step(field_fn, ahead, h / substeps)
        behind = rk4_step(field_fn, behind, -h / substeps)
    return u0(ahead), u0(behind)


def time_derivative(graph: Graph, g: MetricTensor, u0: Functional, t: float, mu, h: float = TIME_STEP,
                    method: str = "auto", flow_step: float = FLOW_STEP, substeps: int = 4) -> float:
    """Central difference ``(u(t + h) - u(t - h)) / 2h``."""
    if t <= h:
        raise ValueError("need t > h")
    mu = validate_simplex(mu, n=graph.n)
    semigroup = _uses_semigroup(g, method)
    state = None if semigroup else general_flow(graph, g, mu, t, flow_step).final
    ahead, behind = _shifted_values(graph, g, u0, t, mu, state, h, semigroup, substeps)
    return (ahead - behind) / (2.0 * h)


def hje_residuals(graph: Graph, g: MetricTensor, u0: Functional, t: float, mu, hs: Sequence[float],
                  method: str = "auto", flow_step: float = FLOW_STEP, substeps: int = 4) -> list[float]:
    """``|D_t u - Delta_ind u|`` at ``(t, mu)`` for each time step in ``hs``, sharing one flow solve."""
    mu = validate_simplex(mu, n=graph.n)
    if any(t <= h for h in hs):
        raise ValueError("need t > h")
    semigroup = _uses_semigroup(g, method)
    state, psi = _flow_with_jacobian(graph, g, t, mu, method, flow_step)
    wgrad = gradient(graph, center(psi.T @ frechet(u0, state)))
    noise = individual_noise(graph, g, mu, wgrad)
    out = []
    for h in hs:
        ahead, behind = _shifted_values(graph, g, u0, t, mu, state, h, semigroup, substeps)
        out.append(abs((ahead - behind) / (2.0 * h) - noise))
    return out


def hje_residual(graph: Graph, g: MetricTensor, u0: Functional, t: float, mu, h: float = TIME_STEP,
                 method: str = "auto", flow_step: float = FLOW_STEP) -> float:
    """``|D_t u - Delta_ind u|`` at ``(t, mu)``; tends to zero like ``h^2``."""
    return hje_residuals(graph, g, u0, t, mu, [h], method, flow_step)[0]


def solve_hje(graph: Graph, g: MetricTensor, u0: Functional, t: float, mu, h: float | None = None,
              method: str = "auto", flow_step: float = FLOW_STEP) -> HJESolution:
    """Value, derivative and Wasserstein gradient of ``u(t, .)`` at ``mu``;
    the residual is filled in when a time step ``h`` is given."""
    mu = validate_simplex(mu, n=graph.n)
    value = hje_value(graph, g, u0, t, mu, method, flow_step)
    fre = hje_frechet(graph, g, u0, t, mu, method, flow_step)
    resid = None
    if h is not None:
        resid = hje_residual(graph, g, u0, t, mu, h, method, flow_step)
    return HJESolution(value, fre, gradient(graph, fre), resid)
