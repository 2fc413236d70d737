"""Kinetic action, discrete paths and the transport distance on the simplex.

A :class:`DiscretePath` with ``N`` steps stores densities ``sigma[k]`` at times
``k / N`` and one momentum field ``m[k]`` per interval. The discrete continuity
equation reads ``N (sigma[k+1] - sigma[k]) + graph_divergence(m[k]) = 0`` and
the action is ``(1/N) sum_k sum_e F(g(sigma_bar[k]), m[k])`` with the midpoint
density ``sigma_bar[k] = (sigma[k] + sigma[k+1]) / 2``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

from .calculus import gradient, graph_divergence, weighted_laplacian
from .errors import EndpointMismatch, NotConverged
from .graph_core import Graph, validate_simplex
from .metric_tensor import MetricTensor, boundary_cost, boundary_cost_inverse

TOL_CONT = 1e-8
TOL_OBJ = 1e-7
F_GUARD = 1e-14
# Interior rows of the starting path are pulled this far towards uniform, and
# the optimizer keeps every interior density at least MASS_FLOOR, so that no
# edge is dead and the objective has finite derivatives.
INIT_BLEND = 1e-3
MASS_FLOOR = 1e-10


def kinetic_F(a, b):
    """``|b|^2 / a`` for ``a > 0``, ``0`` for ``a = b = 0`` and ``+inf`` for ``a = 0, b != 0``.

    Works elementwise on arrays; returns a Python float for scalar input.
    """
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(a_arr < 0.0):
        raise ValueError("kinetic_F needs a >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a_arr > 0.0, b_arr * b_arr / np.where(a_arr > 0.0, a_arr, 1.0),
                       np.where(b_arr == 0.0, 0.0, np.inf))
    return float(out) if out.ndim == 0 else out


@dataclass
class DiscretePath:
    """Densities ``sigma`` (``N+1`` x ``n``) and interval momenta ``m`` (``N`` x ``E``)."""

    sigma: np.ndarray
    m: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if self.sigma.ndim != 2 or self.m.ndim != 2 or self.m.shape[0] != self.sigma.shape[0] - 1:
            raise ValueError(f"inconsistent path shapes {self.sigma.shape} and {self.m.shape}")

    @property
    def N(self) -> int:
        return self.m.shape[0]

    @property
    def start(self) -> np.ndarray:
        return self.sigma[0]

    @property
    def end(self) -> np.ndarray:
        return self.sigma[-1]

    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)


@dataclass
class TransportResult:
    distance: float
    path: DiscretePath
    action_history: list[float]
    converged: bool
    iterations: int = 0

    @property
    def action(self) -> float:
        return self.distance ** 2


def continuity_residual(graph: Graph, path: DiscretePath) -> float:
    """Largest vertex defect of the discrete continuity equation."""
    rate = path.N * np.diff(path.sigma, axis=0)
    div = np.array([graph_divergence(graph, mk) for mk in path.m]).reshape(rate.shape)
    return float(np.abs(rate + div).max()) if rate.size else 0.0


def mass_defect(path: DiscretePath) -> float:
    return float(np.abs(path.sigma.sum(axis=1) - 1.0).max())


def midpoints(path: DiscretePath) -> np.ndarray:
    return 0.5 * (path.sigma[1:] + path.sigma[:-1])


def action(graph: Graph, g: MetricTensor, path: DiscretePath) -> float:
    """``(1/N) sum_k sum_e F(g(sigma_bar[k]_i, sigma_bar[k]_j), m[k]_e)``; may be ``inf``."""
    bar = midpoints(path)
    ge = g(bar[:, graph.tail], bar[:, graph.head])
    return float(np.sum(kinetic_F(np.maximum(ge, 0.0), path.m)) / path.N)


def velocity(graph: Graph, g: MetricTensor, path: DiscretePath) -> np.ndarray:
    """``v = m / g(sigma_bar)`` where ``g > 0`` and ``0`` elsewhere."""
    bar = midpoints(path)
    ge = g(bar[:, graph.tail], bar[:, graph.head])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ge > 0.0, path.m / np.where(ge > 0.0, ge, 1.0), 0.0)


def constant_path(graph: Graph, rho: np.ndarray, N: int) -> DiscretePath:
    rho = np.asarray(rho, dtype=float)
    return DiscretePath(np.tile(rho, (N + 1, 1)), np.zeros((N, graph.n_edges)))


# -- constructions -----------------------------------------------------------

def _pair_profile(g: MetricTensor, r0: float, r1: float, steps: int) -> np.ndarray:
    """Share of the first vertex along the constant-G-speed profile, endpoints exact."""
    a0, a1 = boundary_cost(g, r0), boundary_cost(g, r1)
    r = np.empty(steps + 1)
    r[0], r[-1] = r0, r1
    for k in range(1, steps):
        r[k] = boundary_cost_inverse(g, a0 + (a1 - a0) * k / steps)
    return r


def two_node_geodesic(g: MetricTensor, rho0, rho1, weight: float = 1.0, N: int = 64) -> DiscretePath:
    """Constant-G-speed path between two points of the 2-vertex simplex.

    The exact distance ``|G(rho1[0]) - G(rho0[0])| / sqrt(weight)`` is stored
    in ``metadata["exact_distance"]``.
    """
    rho0 = validate_simplex(rho0, n=2)
    rho1 = validate_simplex(rho1, n=2)
    if N < 1:
        raise ValueError("N must be positive")
    r = _pair_profile(g, float(rho0[0]), float(rho1[0]), N)
    sigma = np.column_stack([r, 1.0 - r])
    sigma[0], sigma[-1] = rho0, rho1
    # vertex 0 is the tail of the single edge: N * d(sigma_0) = sqrt(w) m
    m = (N * np.diff(sigma[:, 0]) / math.sqrt(weight))[:, None]
    exact = abs(boundary_cost(g, float(rho1[0])) - boundary_cost(g, float(rho0[0]))) / math.sqrt(weight)
    return DiscretePath(sigma, m, {"exact_distance": exact, "construction": "two-node"})


def concat(p1: DiscretePath, p2: DiscretePath, tol: float = TOL_CONT) -> DiscretePath:
    """Run ``p1`` then ``p2`` on one unit time interval.

    The junction sits at time ``N1 / (N1 + N2)``; momenta are rescaled so the
    continuity equation keeps holding. For ``N1 == N2`` every momentum doubles
    and the action becomes ``2 (action(p1) + action(p2))``.
    """
    if p1.sigma.shape[1] != p2.sigma.shape[1] or p1.m.shape[1] != p2.m.shape[1]:
        raise ValueError("paths live on different graphs")
    gap = float(np.abs(p1.end - p2.start).sum())
    if gap > tol:
        raise EndpointMismatch(f"l1 gap {gap:.3e} between end of first path and start of second")
    total = p1.N + p2.N
    sigma = np.vstack([p1.sigma, p2.sigma[1:]])
    m = np.vstack([p1.m * (total / p1.N), p2.m * (total / p2.N)])
    return DiscretePath(sigma, m, {"construction": "concat"})


def reverse_path(path: DiscretePath) -> DiscretePath:
    return DiscretePath(path.sigma[::-1].copy(), -path.m[::-1], {"construction": "reverse"})


def _tree_transfers(graph: Graph, delta: np.ndarray, tol: float) -> list[tuple[int, int, float]]:
    """Net transfers ``(sender, receiver, amount)`` along a BFS spanning tree,
    in an order where each vertex sends only after all its inflows arrived."""
    n = graph.n
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in zip(graph.tail, graph.head):
        adj[int(i)].append(int(j))
        adj[int(j)].append(int(i))
    parent = [-1] * n
    order = [0]
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in sorted(adj[i]):
            if not seen[j]:
                seen[j] = True
                parent[j] = i
                order.append(j)
                queue.append(j)
    gain = delta.astype(float).copy()
    for v in reversed(order[1:]):
        gain[parent[v]] += gain[v]
    # gain[v] is the net mass that must cross from parent[v] into the subtree of v
    transfers = []
    for v in order[1:]:
        if gain[v] > tol:
            transfers.append((parent[v], v, float(gain[v])))
        elif gain[v] < -tol:
            transfers.append((v, parent[v], float(-gain[v])))
    indeg = [0] * n
    outgoing: list[list[int]] = [[] for _ in range(n)]
    for k, (s, r, _) in enumerate(transfers):
        indeg[r] += 1
        outgoing[s].append(k)
    ready = deque(sorted(v for v in range(n) if indeg[v] == 0))
    ordered = []
    while ready:
        v = ready.popleft()
        for k in outgoing[v]:
            ordered.append(transfers[k])
            r = transfers[k][1]
            indeg[r] -= 1
            if indeg[r] == 0:
                ready.append(r)
    return ordered


def _allocate_steps(costs: np.ndarray, N: int) -> np.ndarray:
    """Split ``N`` steps roughly in proportion to ``sqrt(cost)``, at least one each."""
    k = len(costs)
    weights = np.sqrt(np.maximum(costs, 0.0))
    if weights.sum() <= 0.0:
        weights = np.ones(k)
    share = (N - k) * weights / weights.sum()
    steps = 1 + np.floor(share).astype(int)
    leftover = N - steps.sum()
    for idx in np.argsort(-(share - np.floor(share)), kind="stable")[:leftover]:
        steps[idx] += 1
    return steps


def feasible_path(graph: Graph, g: MetricTensor, rho0, rho1, N: int = 64) -> DiscretePath:
    """A finite-action path from ``rho0`` to ``rho1``.

    Net mass is routed along a spanning tree, one edge at a time. Each transfer
    moves mass between the two endpoint vertices of an edge with the
    constant-G-speed profile of the two-vertex problem, scaled to the pair's
    current total mass. On a single edge this is :func:`two_node_geodesic`.
    """
    rho0 = validate_simplex(rho0, n=graph.n)
    rho1 = validate_simplex(rho1, n=graph.n)
    transfers = _tree_transfers(graph, rho1 - rho0, tol=1e-15)
    if not transfers:
        path = constant_path(graph, rho0, N)
        path.metadata["construction"] = "feasible"
        return path
    if N < len(transfers):
        raise ValueError(f"N={N} is smaller than the {len(transfers)} tree transfers needed")

    # first pass: pair profiles and their unit-time actions
    state = np.array(rho0, dtype=float)
    plans = []
    for s, r, amount in transfers:
        total = state[s] + state[r]
        amount = min(amount, state[s])
        x0 = state[s] / total
        x1 = (state[s] - amount) / total
        w = graph.weight[graph.slot[(min(s, r), max(s, r))]]
        cost = total * (boundary_cost(g, x1) - boundary_cost(g, x0)) ** 2 / w
        plans.append((s, r, total, x0, x1, cost))
        state[s] -= amount
        state[r] += amount
    steps = _allocate_steps(np.array([p[5] for p in plans]), N)

    sigma = [np.array(rho0, dtype=float)]
    m_rows = []
    for (s, r, total, x0, x1, _), k in zip(plans, steps):
        share = _pair_profile(g, x0, x1, int(k))
        e = graph.slot[(min(s, r), max(s, r))]
        sign = 1.0 if s < r else -1.0
        base = sigma[-1].copy()
        rest = base[s] + base[r]
        for step in range(1, int(k) + 1):
            nxt = base.copy()
            nxt[s] = total * share[step]
            nxt[r] = rest - nxt[s]
            row = np.zeros(graph.n_edges)
            # continuity at the sender: N d(sigma_s) = +-sqrt(w) m, plus when it is the tail
            row[e] = sign * N * (nxt[s] - sigma[-1][s]) / graph.sqrt_weight[e]
            m_rows.append(row)
            sigma.append(nxt)
    sigma_arr = np.array(sigma)
    sigma_arr[-1] = rho1
    return DiscretePath(sigma_arr, np.array(m_rows), {"construction": "feasible", "transfers": len(plans)})


# -- optimal momenta for given densities -------------------------------------

def _interval_potential(graph: Graph, cond: np.ndarray, rate: np.ndarray) -> np.ndarray | None:
    """Solve ``L phi = rate`` for conductances ``cond`` component by component.

    Returns ``None`` when ``rate`` does not balance on some component of the
    positive-conductance subgraph, i.e. when no finite-action momentum exists.
    """
    lap = weighted_laplacian(graph, cond)
    phi = np.zeros(graph.n)
    scale = max(1.0, float(np.abs(rate).sum()))
    for comp in _components(graph, cond > 0.0):
        sub_rate = rate[comp]
        if abs(sub_rate.sum()) > 1e-10 * scale:
            return None
        if comp.size > 1:
            sub = lap[np.ix_(comp, comp)] + 1.0 / comp.size
            phi[comp] = np.linalg.solve(sub, sub_rate - sub_rate.mean())
    return phi


def _components(graph: Graph, active: np.ndarray) -> list[np.ndarray]:
    labels = np.arange(graph.n)
    for i, j in zip(graph.tail[active], graph.head[active]):
        a, b = labels[i], labels[j]
        if a != b:
            labels[labels == max(a, b)] = min(a, b)
    return [np.flatnonzero(labels == v) for v in np.unique(labels)]


def optimal_momentum(graph: Graph, g: MetricTensor, sigma: np.ndarray,
                     guard: float = F_GUARD) -> np.ndarray:
    """Least-action momenta ``m[k] = g(sigma_bar) grad(phi_k)`` for fixed densities.

    ``phi_k`` solves ``L_{sigma_bar} phi = N (sigma[k+1] - sigma[k])``. When
    that has no solution (mass must cross an edge with ``g = 0``) the
    conductances are floored at ``guard``, so the continuity equation still
    holds and the action of the interval is infinite.
    """
    sigma = np.asarray(sigma, dtype=float)
    N = sigma.shape[0] - 1
    rows = np.zeros((N, graph.n_edges))
    for k in range(N):
        bar = 0.5 * (sigma[k] + sigma[k + 1])
        rate = N * (sigma[k + 1] - sigma[k])
        ge = np.maximum(g(bar[graph.tail], bar[graph.head]), 0.0)
        phi = _interval_potential(graph, graph.weight * ge, rate)
        if phi is None:
            ge = np.maximum(ge, guard)
            phi = _interval_potential(graph, graph.weight * ge, rate)
        rows[k] = ge * gradient(graph, phi)
    return rows


# -- optimizer -----------------------------------------------------------------

def _proj_simplex_rows(y: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the probability simplex."""
    n = y.shape[1]
    u = -np.sort(-y, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    last = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(y.shape[0]), last] / (last + 1)
    return np.maximum(y - theta[:, None], 0.0)


def _proj_floor_rows(y: np.ndarray, floor: float = MASS_FLOOR) -> np.ndarray:
    """Euclidean projection of each row onto ``{x >= floor, sum x = 1}``."""
    n = y.shape[1]
    span = 1.0 - n * floor
    return _proj_simplex_rows((y - floor) / span) * span + floor


class _ReducedObjective:
    """``f(sigma) = sum_k N D_k^T L_k^+ D_k`` with ``D_k = sigma[k+1] - sigma[k]``
    and ``L_k`` the Laplacian at the midpoint, conductances floored at ``guard``.

    This is the action after minimizing out the momenta interval by interval.
    """

    def __init__(self, graph: Graph, g: MetricTensor, rho0, rho1, N: int, guard: float):
        self.graph, self.g, self.N, self.guard = graph, g, N, guard
        self.rho0, self.rho1 = np.asarray(rho0, float), np.asarray(rho1, float)
        n = graph.n
        self.proj_const = np.full((n, n), 1.0 / n)

    def full(self, inner: np.ndarray) -> np.ndarray:
        return np.vstack([self.rho0, inner, self.rho1])

    def __call__(self, inner: np.ndarray):
        gr, N = self.graph, self.N
        t, h, w = gr.tail, gr.head, gr.weight
        sig = self.full(inner)
        diff = np.diff(sig, axis=0)
        bar = 0.5 * (sig[1:] + sig[:-1])
        ge = self.g(bar[:, t], bar[:, h])
        live = ge > self.guard
        cond = w * np.where(live, ge, self.guard)
        lap = np.zeros((N, gr.n, gr.n))
        lap[:, t, h] = -cond
        lap[:, h, t] = -cond
        np.add.at(lap, (slice(None), t, t), cond)
        np.add.at(lap, (slice(None), h, h), cond)
        pinv = np.linalg.inv(lap + self.proj_const) - self.proj_const
        phi = np.einsum("kij,kj->ki", pinv, N * diff)
        f = float(np.sum(diff * phi))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dgt = np.where(live, self.g.dg(bar[:, t], bar[:, h]), 0.0)
            dgh = np.where(live, self.g.dg(bar[:, h], bar[:, t]), 0.0)
        coef = -(w * (phi[:, t] - phi[:, h]) ** 2) / N
        gbar = np.zeros((N, gr.n))
        np.add.at(gbar, (slice(None), t), coef * dgt)
        np.add.at(gbar, (slice(None), h), coef * dgh)
        grad = np.zeros((N + 1, gr.n))
        grad[1:] += 2.0 * phi + 0.5 * gbar
        grad[:-1] += -2.0 * phi + 0.5 * gbar
        return f, grad[1:-1], pinv


def _banded_hessian(pinv: np.ndarray, N: int, n: int) -> np.ndarray:
    """Upper banded storage of the frozen-coefficient Hessian
    (block tridiagonal, blocks ``2N(P_{k-1} + P_k)`` and ``-2N P_k``) plus ``1 1^T / n`` per block."""
    m = N - 1
    u = 2 * n - 1
    ab = np.zeros((u + 1, m * n))
    diag = 2.0 * N * (pinv[:-1] + pinv[1:]) + 1.0 / n
    off = -2.0 * N * pinv[1:-1]
    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    upper = a <= b
    for k in range(m):
        i, j = k * n + a[upper], k * n + b[upper]
        ab[u + i - j, j] = diag[k][upper]
        if k + 1 < m:
            i, j = k * n + a, (k + 1) * n + b
            ab[u + i - j, j] = off[k]
    return ab


def _newton_direction(pinv: np.ndarray, grad: np.ndarray, N: int) -> np.ndarray | None:
    n = grad.shape[1]
    try:
        d = -solveh_banded(_banded_hessian(pinv, N, n), grad.ravel()).reshape(grad.shape)
    except np.linalg.LinAlgError:
        return None
    return d - d.mean(axis=1, keepdims=True)


def _armijo(obj, x, f, grad, direction, proj, max_halvings=40):
    lam = 1.0
    noise = 8.0 * np.finfo(float).eps * abs(f)
    for _ in range(max_halvings):
        xn = proj(x + lam * direction)
        fn, gn, extra = obj(xn)
        if np.isfinite(fn) and fn <= f + 1e-4 * float(np.sum(grad * (xn - x))) + noise:
            return xn, fn, gn, extra
        lam *= 0.5
    return None


def _solve_reduced(obj: _ReducedObjective, start: np.ndarray, max_iter: int, tol_obj: float):
    x = start
    f, grad, pinv = obj(x)
    history = [f]
    alpha = 1.0 / max(1e-12, float(np.abs(grad).max()))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        step = None
        d = _newton_direction(pinv, grad, obj.N)
        if d is not None and float(np.sum(grad * d)) < 0.0:
            step = _armijo(obj, x, f, grad, d, _proj_floor_rows)
        if step is None:
            d = _proj_floor_rows(x - alpha * grad) - x
            step = _armijo(obj, x, f, grad, d, _proj_floor_rows)
        if step is None:
            break
        xn, fn, gn, pn = step
        s, y = xn - x, gn - grad
        sy = float(np.sum(s * y))
        alpha = float(np.clip(np.sum(s * s) / sy, 1e-12, 1e12)) if sy > 0 else alpha
        decrease = f - fn
        x, f, grad, pinv = xn, fn, gn, pn
        history.append(f)
        if decrease <= tol_obj * max(f, 1e-300):
            converged = True
            break
    return x, history, converged, it


def _spg(fg, x, proj, max_iter, tol, memory=10):
    """Spectral projected gradient with a nonmonotone Armijo search."""
    x = proj(x)
    f, grad = fg(x)
    recent = [f]
    alpha = 1.0 / max(1e-12, float(np.abs(grad).max()))
    it = 0
    for it in range(1, max_iter + 1):
        d = proj(x - alpha * grad) - x
        if float(np.abs(d).max()) < tol:
            break
        fmax = max(recent[-memory:])
        gd = float(np.sum(grad * d))
        lam = 1.0
        while True:
            xn = x + lam * d
            fn, gn = fg(xn)
            if fn <= fmax + 1e-4 * lam * gd or lam < 1e-12:
                break
            lam *= 0.5
        s, y = xn - x, gn - grad
        sy = float(np.sum(s * y))
        alpha = float(np.clip(np.sum(s * s) / sy, 1e-12, 1e12)) if sy > 0 else min(1e3 * alpha, 1e12)
        x, f, grad = xn, fn, gn
        recent.append(f)
    return x, f, it


def _solve_augmented_lagrangian(graph: Graph, g: MetricTensor, start: DiscretePath,
                                max_iter: int, guard: float, outer: int = 8, penalty: float = 10.0):
    """Penalty ``10, 100, ...`` on the continuity constraint, SPG inner solves over ``(sigma, m)``."""
    N, n, E = start.N, graph.n, graph.n_edges
    t, h = graph.tail, graph.head
    inc = graph.incidence()
    rho0, rho1 = start.sigma[0], start.sigma[-1]
    ns = (N - 1) * n
    mult = np.zeros((N, n))

    def split(x):
        return x[:ns].reshape(N - 1, n), x[ns:].reshape(N, E)

    def fg(x, mu):
        inner, m = split(x)
        sig = np.vstack([rho0, inner, rho1])
        bar = 0.5 * (sig[1:] + sig[:-1])
        ge = g(bar[:, t], bar[:, h])
        live = ge > guard
        gc = np.where(live, ge, guard)
        c = N * np.diff(sig, axis=0) - m @ inc
        val = np.sum(m ** 2 / gc) / N + np.sum(mult * c) / N + mu / (2 * N) * np.sum(c * c)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            coef = np.where(live, -(m ** 2 / gc ** 2) / N, 0.0)
            dgt = np.where(live, g.dg(bar[:, t], bar[:, h]), 0.0)
            dgh = np.where(live, g.dg(bar[:, h], bar[:, t]), 0.0)
        gbar = np.zeros((N, n))
        np.add.at(gbar, (slice(None), t), coef * dgt)
        np.add.at(gbar, (slice(None), h), coef * dgh)
        y = (mult + mu * c) / N
        gm = 2 * m / gc / N - y @ inc.T
        gs = np.zeros((N + 1, n))
        gs[1:] += N * y + 0.5 * gbar
        gs[:-1] += -N * y + 0.5 * gbar
        return val, np.concatenate([gs[1:-1].ravel(), gm.ravel()])

    def proj(x):
        out = x.copy()
        out[:ns] = _proj_floor_rows(x[:ns].reshape(N - 1, n)).ravel()
        return out

    x = np.concatenate([start.sigma[1:-1].ravel(), start.m.ravel()])
    history = []
    mu = penalty
    for _ in range(outer):
        x, _, _ = _spg(lambda z: fg(z, mu), x, proj, max_iter, 1e-12)
        inner, m = split(x)
        sig = np.vstack([rho0, inner, rho1])
        c = N * np.diff(sig, axis=0) - m @ inc
        mult = mult + mu * c
        bar = 0.5 * (sig[1:] + sig[:-1])
        history.append(float(np.sum(m ** 2 / np.maximum(g(bar[:, t], bar[:, h]), guard)) / N))
        if np.abs(c).max() <= TOL_CONT:
            break
        mu *= 10.0
    inner, _ = split(x)
    return inner, history


def wasserstein_distance(graph: Graph, g: MetricTensor, rho0, rho1, N: int = 64,
                         max_iter: int = 500, tol_cont: float = TOL_CONT, tol_obj: float = TOL_OBJ,
                         method: str = "reduced", raise_on_failure: bool = False) -> TransportResult:
    """Minimize the discrete action between ``rho0`` and ``rho1``.

    ``method="reduced"`` optimizes over densities only: for fixed densities the
    best momenta come from one elliptic solve per interval, which turns the
    problem into a smooth one over products of simplices. It is solved by
    projected steps preconditioned with the block-tridiagonal Hessian of the
    frozen-coefficient quadratic, falling back to spectral projected gradient.
    ``method="augmented-lagrangian"`` optimizes over densities and momenta
    jointly with a penalty on the continuity equation.

    Both start from :func:`feasible_path`; the momenta of the final path are
    recomputed by elliptic solves so the continuity equation holds to
    rounding, and the feasible path is returned instead if it is cheaper.
    """
    rho0 = validate_simplex(rho0, n=graph.n)
    rho1 = validate_simplex(rho1, n=graph.n)
    if N < 1:
        raise ValueError("N must be positive")
    if np.array_equal(rho0, rho1):
        path = constant_path(graph, rho0, N)
        path.metadata.update({"construction": "constant", "continuity_residual": 0.0, "feasible_action": 0.0})
        return TransportResult(0.0, path, [0.0], True, 0)
    start = feasible_path(graph, g, rho0, rho1, N)
    start_action = action(graph, g, start)
    if N == 1:
        sigma = start.sigma
        history, converged, iters = [start_action], True, 0
    else:
        blend = np.vstack([rho0, (1 - INIT_BLEND) * start.sigma[1:-1] + INIT_BLEND / graph.n, rho1])
        if method == "reduced":
            obj = _ReducedObjective(graph, g, rho0, rho1, N, F_GUARD)
            inner, history, converged, iters = _solve_reduced(obj, _proj_floor_rows(blend[1:-1]),
                                                              max_iter, tol_obj)
        elif method == "augmented-lagrangian":
            init = DiscretePath(blend, optimal_momentum(graph, g, blend))
            inner, history = _solve_augmented_lagrangian(graph, g, init, max_iter, F_GUARD)
            iters = len(history)
            converged = len(history) > 1 and abs(history[-1] - history[-2]) <= tol_obj * max(history[-1], 1e-300)
        else:
            raise ValueError(f"unknown method {method!r}")
        sigma = np.vstack([rho0, inner, rho1])
    path = DiscretePath(sigma, optimal_momentum(graph, g, sigma), {"construction": method})
    value = action(graph, g, path)
    if not value <= start_action:
        path, value = start, start_action
    resid = continuity_residual(graph, path)
    converged = bool(converged and resid <= tol_cont)
    path.metadata.update({"continuity_residual": resid, "feasible_action": start_action})
    history = [float(v) for v in history] + [value]
    result = TransportResult(math.sqrt(max(value, 0.0)), path, history, converged, iters)
    if raise_on_failure and not converged:
        raise NotConverged(f"optimizer stopped after {iters} iterations (residual {resid:.2e})")
    return result
