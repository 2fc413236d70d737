"""The heat semigroup ``e^{tA}``, the nonlinear flow ``d sigma/dt = xi(sigma)`` and
its Jacobian with respect to the starting point.

``xi_i(mu) = sum_j w_ij gbar(mu_j, mu_i)`` extends ``div_mu(grad log mu)`` to
the closed simplex. For the logarithmic mean ``gbar(s, t) = s - t`` and the
flow is the heat semigroup.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import rate_matrix
from .errors import FreezeEventEncountered, NoExtension, StepTooLarge
from .graph_core import Graph, validate_simplex
from .metric_tensor import BUILTIN, MetricTensor

TOL_EVENT = 1e-12
MAX_BISECTIONS = 60
CLAMP_TOL = 1e-12


@dataclass
class FlowTrajectory:
    """States (and optionally Jacobians ``d sigma(t) / d mu``) at the recorded times.

    ``freeze_events`` lists ``(time, vertex)`` pairs at which a coordinate
    reached zero and was frozen there.
    """

    times: np.ndarray
    states: np.ndarray
    jacobians: np.ndarray | None = None
    freeze_events: list[tuple[float, int]] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# -- heat semigroup --------------------------------------------------------------

def matrix_exp(rate: np.ndarray, t: float) -> np.ndarray:
    """``e^{t A}`` for a symmetric rate matrix ``A`` via its eigendecomposition.

    Entries in ``[-1e-12, 0)`` produced by rounding are set to zero.
    """
    if t < 0:
        raise ValueError("matrix_exp needs t >= 0")
    rate = np.asarray(rate, dtype=float)
    if t == 0:
        return np.eye(rate.shape[0])
    vals, vecs = np.linalg.eigh(0.5 * (rate + rate.T))
    out = (vecs * np.exp(t * vals)) @ vecs.T
    out[(out < 0.0) & (out >= -CLAMP_TOL)] = 0.0
    return out


def heat_flow(graph: Graph, mu, t: float, rate_scale: float = 1.0) -> np.ndarray:
    """``e^{t A} mu``, optionally with the rate matrix scaled to ``rate_scale * A``."""
    mu = validate_simplex(mu, n=graph.n)
    return matrix_exp(rate_scale * rate_matrix(graph), t) @ mu


def heat_semigroup(graph: Graph, t: float, rate_scale: float = 1.0) -> np.ndarray:
    return matrix_exp(rate_scale * rate_matrix(graph), t)


# -- the vector field xi -----------------------------------------------------------

def _require_extension(g: MetricTensor) -> None:
    if not g.has_gbar_extension:
        raise NoExtension(f"tensor {g.name!r} has no boundary extension; the flow is undefined")


def xi(graph: Graph, g: MetricTensor, mu, active: np.ndarray | None = None) -> np.ndarray:
    """``xi_i(mu) = sum_j w_ij gbar(mu_j, mu_i)``.

    ``active`` optionally masks edges (the reduced system drops edges that
    touch frozen vertices).
    """
    _require_extension(g)
    mu = np.asarray(mu, dtype=float)
    i, j, w = graph.tail, graph.head, graph.weight
    into_i = w * g.gbar(mu[j], mu[i])
    into_j = w * g.gbar(mu[i], mu[j])
    if active is not None:
        into_i = np.where(active, into_i, 0.0)
        into_j = np.where(active, into_j, 0.0)
    out = np.zeros(graph.n)
    np.add.at(out, i, into_i)
    np.add.at(out, j, into_j)
    return out


def xi_jacobian(graph: Graph, g: MetricTensor, mu, active: np.ndarray | None = None) -> np.ndarray:
    """Analytic Jacobian of :func:`xi`.

    Off-diagonal ``J_ij = w_ij d1 gbar(mu_j, mu_i)``; diagonal
    ``J_ii = sum_j w_ij d2 gbar(mu_j, mu_i)`` with ``d2 gbar(s, t) = -d1 gbar(t, s)``
    by antisymmetry of ``gbar``.
    """
    _require_extension(g)
    mu = np.asarray(mu, dtype=float)
    i, j, w = graph.tail, graph.head, graph.weight
    d_ji = w * g.dgbar(mu[j], mu[i])   # d xi_i / d mu_j
    d_ij = w * g.dgbar(mu[i], mu[j])   # d xi_j / d mu_i
    if active is not None:
        d_ji = np.where(active, d_ji, 0.0)
        d_ij = np.where(active, d_ij, 0.0)
    jac = np.zeros((graph.n, graph.n))
    jac[i, j] = d_ji
    jac[j, i] = d_ij
    np.add.at(jac, (i, i), -d_ij)
    np.add.at(jac, (j, j), -d_ji)
    return jac


def lipschitz_estimate(graph: Graph, g: MetricTensor, samples: int = 1000, seed: int = 0,
                       floor: float = 0.0) -> float:
    """Largest difference quotient ``|xi(x) - xi(y)| / |x - y|`` over random nearby pairs.

    A growing value under refinement of ``floor`` towards 0 signals that xi is
    not Lipschitz up to the boundary (the case for the harmonic mean).
    """
    _require_extension(g)
    rng = np.random.default_rng(seed)
    n = graph.n
    best = 0.0
    for _ in range(samples):
        x = floor + (1.0 - n * floor) * rng.dirichlet(np.ones(n))
        d = rng.standard_normal(n)
        d -= d.mean()
        d *= 1e-4 / np.linalg.norm(d)
        y = x + d
        if y.min() < floor:
            continue
        q = np.linalg.norm(xi(graph, g, x) - xi(graph, g, y)) / np.linalg.norm(d)
        best = max(best, float(q))
    return best


# -- integration ------------------------------------------------------------------

def _check_inflow(g: MetricTensor, rate: np.ndarray, x: np.ndarray) -> None:
    """Mass flowing into an empty vertex is only accepted for built-in tensors."""
    if BUILTIN.get(g.name) is g:
        return
    bad = (x == 0.0) & (rate > CLAMP_TOL)
    if np.any(bad):
        raise NoExtension(
            f"custom tensor {g.name!r} sends mass into empty vertices {np.flatnonzero(bad).tolist()}")


def _frozen_mask(graph: Graph, g: MetricTensor, x: np.ndarray) -> np.ndarray:
    """Vertices at zero mass that receive no inflow stay frozen."""
    rate = xi(graph, g, x)
    _check_inflow(g, rate, x)
    return (x == 0.0) & (rate <= CLAMP_TOL)


def rk4_step(field_fn, x: np.ndarray, h: float) -> np.ndarray:
    k1 = field_fn(x)
    k2 = field_fn(x + 0.5 * h * k1)
    k3 = field_fn(x + 0.5 * h * k2)
    k4 = field_fn(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _renormalize(x: np.ndarray) -> np.ndarray:
    x = np.where(x < 0.0, 0.0, x)
    return x / x.sum()


def general_flow(graph: Graph, g: MetricTensor, mu, T: float, h: float = 1e-3,
                 record_every: int = 1) -> FlowTrajectory:
    """Integrate ``d sigma/dt = xi(sigma)`` on ``[0, T]`` with classic RK4.

    Vertices at zero mass without inflow are frozen and the edges touching
    them are dropped from the field. A step that would push a coordinate
    below zero is shortened by bisection until that coordinate lands within
    ``TOL_EVENT`` of zero; it is then set to zero and frozen.
    """
    _require_extension(g)
    if T < 0 or h <= 0:
        raise ValueError("need T >= 0 and h > 0")
    x = np.array(validate_simplex(mu, n=graph.n))
    # times are base + count * h so that long runs do not accumulate drift
    base, count, t = 0.0, 0, 0.0
    times, states, events = [0.0], [x.copy()], []
    frozen = _frozen_mask(graph, g, x)
    steps = 0
    while T - t > 1e-12 * h:
        step = min(h, T - t)
        active = ~(frozen[graph.tail] | frozen[graph.head])

        def field_fn(y, active=active):
            rate = xi(graph, g, np.maximum(y, 0.0), active)
            rate[frozen] = 0.0
            return rate

        nxt = rk4_step(field_fn, x, step)
        event = nxt.min() < -TOL_EVENT
        if event:
            lo, hi = 0.0, step
            for _ in range(MAX_BISECTIONS):
                mid = 0.5 * (lo + hi)
                trial = rk4_step(field_fn, x, mid)
                low = trial.min()
                if low < -TOL_EVENT:
                    hi = mid
                elif low > TOL_EVENT:
                    lo = mid
                else:
                    break
            else:
                raise StepTooLarge(f"event bisection at t={t:.6g} did not reach {TOL_EVENT:g}")
            step, nxt = mid, trial
            hits = np.flatnonzero((np.abs(nxt) <= TOL_EVENT) & ~frozen)
            nxt[hits] = 0.0
            events.extend((t + step, int(v)) for v in hits)
        x = _renormalize(nxt)
        if event or step < h:
            base, count = t + step, 0
            t = base
        else:
            count += 1
            t = min(base + count * h, T)
        steps += 1
        frozen = _frozen_mask(graph, g, x)
        if steps % record_every == 0 or T - t <= 1e-12 * h:
            times.append(t)
            states.append(x.copy())
    return FlowTrajectory(np.array(times), np.array(states), None, events)


def flow_jacobian(graph: Graph, g: MetricTensor, mu, T: float, h: float = 1e-3,
                  record_every: int = 1) -> FlowTrajectory:
    """Flow together with ``Psi(t) = d sigma(t) / d mu`` from ``dPsi/dt = J_xi(sigma) Psi``.

    Both are advanced by the same RK4 stages, so ``Psi`` is the exact
    derivative of the discrete flow map. Refuses to continue through a
    boundary event.
    """
    _require_extension(g)
    if T < 0 or h <= 0:
        raise ValueError("need T >= 0 and h > 0")
    x = np.array(validate_simplex(mu, n=graph.n))
    if x.min() <= 0.0:
        raise FreezeEventEncountered("starting point is on the boundary")
    n = graph.n

    def field_fn(state):
        y, psi = state[:n], state[n:].reshape(n, n)
        rate = xi(graph, g, y)
        return np.concatenate([rate, (xi_jacobian(graph, g, y) @ psi).ravel()])

    state = np.concatenate([x, np.eye(n).ravel()])
    t = 0.0
    times, states, jacs = [0.0], [x.copy()], [np.eye(n)]
    steps = 0
    while T - t > 1e-12 * h:
        step = min(h, T - t)
        nxt = rk4_step(field_fn, state, step)
        if nxt[:n].min() <= 0.0:
            raise FreezeEventEncountered(f"coordinate reached zero near t={t + step:.6g}")
        state = nxt
        steps += 1
        t = min(steps * h, T)
        if steps % record_every == 0 or T - t <= 1e-12 * h:
            times.append(t)
            states.append(state[:n].copy())
            jacs.append(state[n:].reshape(n, n).copy())
    return FlowTrajectory(np.array(times), np.array(states), np.array(jacs), [])
