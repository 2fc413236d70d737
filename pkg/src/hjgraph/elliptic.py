"""Poincare constant, mean-centering, the elliptic problem
``f = -div_rho(grad phi)`` and the orthogonal projection onto the tangent space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calculus import divergence, edge_weights, gradient, laplacian
from .errors import DegenerateOperator, MassNotZero
from .graph_core import Graph
from .metric_tensor import MetricTensor

GAMMA_MIN = 1e-12
MASS_TOL = 1e-10
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class PoincareResult:
    gamma: float
    minimizer: np.ndarray


def center(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return phi - phi.mean()


def mean_free_basis(n: int) -> np.ndarray:
    """Orthonormal basis (n x n-1) of the vectors with zero sum."""
    q, _ = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, : n - 1]]))
    return q[:, 1:]


def poincare_constant(graph: Graph, g: MetricTensor, rho: np.ndarray) -> PoincareResult:
    """Smallest value of ``beta^T L_rho beta`` over unit vectors with zero sum."""
    lap = laplacian(graph, g, rho)
    q = mean_free_basis(graph.n)
    vals, vecs = np.linalg.eigh(q.T @ lap @ q)
    beta = q @ vecs[:, 0]
    return PoincareResult(gamma=max(float(vals[0]), 0.0), minimizer=beta)


def _pinv_solve(lap: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Solve ``lap phi = f`` on the zero-sum subspace (kernel of lap assumed to be the constants)."""
    k = lap.shape[0]
    if k == 1:
        return np.zeros(1)
    q = mean_free_basis(k)
    vals, vecs = np.linalg.eigh(q.T @ lap @ q)
    if vals[0] <= GAMMA_MIN:
        raise DegenerateOperator(f"operator degenerate on zero-sum subspace (gamma={vals[0]:.3e})")
    coef = vecs.T @ (q.T @ f)
    return q @ (vecs @ (coef / vals))


def positive_components(graph: Graph, g: MetricTensor, rho: np.ndarray) -> list[np.ndarray]:
    """Vertex sets of the connected components of the subgraph of edges with ``g_ij(rho) > 0``."""
    active = edge_weights(graph, g, rho) > 0.0
    parent = list(range(graph.n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in zip(graph.tail[active], graph.head[active]):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for v in range(graph.n):
        groups.setdefault(find(v), []).append(v)
    return [np.array(vs) for _, vs in sorted(groups.items())]


def solve_elliptic(graph: Graph, g: MetricTensor, rho: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Zero-sum ``phi`` with ``L_rho phi = f``.

    At boundary points where the Poincare constant vanishes the operator splits
    over the components of the positive-g subgraph; the problem is then solved
    component by component, which requires ``f`` to balance on each component.
    This boundary case goes beyond the interior solvability statement.
    """
    f = np.asarray(f, dtype=float)
    scale = max(1.0, float(np.abs(f).sum()))
    if abs(f.sum()) > MASS_TOL * scale:
        raise MassNotZero(f"sum(f) = {f.sum():.3e}")
    f = f - f.mean()
    lap = laplacian(graph, g, rho)
    if poincare_constant(graph, g, rho).gamma > GAMMA_MIN:
        phi = _pinv_solve(lap, f)
    else:
        phi = np.zeros(graph.n)
        for comp in positive_components(graph, g, rho):
            fc = f[comp]
            if abs(fc.sum()) > MASS_TOL * scale:
                raise DegenerateOperator(
                    f"f does not balance on component {comp.tolist()} (sum {fc.sum():.3e})")
            if comp.size > 1:
                phi[comp] = _pinv_solve(lap[np.ix_(comp, comp)], fc - fc.mean())
        phi -= phi.mean()
    resid = np.abs(lap @ phi - f).max()
    if resid > RESIDUAL_TOL * scale:
        raise DegenerateOperator(f"elliptic residual {resid:.3e} too large")
    return phi


def project_tangent(graph: Graph, g: MetricTensor, rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``v`` onto the closure of gradient fields in ``(.,.)_rho``."""
    phi = solve_elliptic(graph, g, rho, -divergence(graph, g, rho, v))
    out = gradient(graph, phi)
    out[edge_weights(graph, g, rho) <= 0.0] = 0.0
    return out
