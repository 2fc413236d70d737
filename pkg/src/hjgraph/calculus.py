"""Discrete differential operators on a weighted graph.

Sign conventions: ``(grad phi)_ij = sqrt(w_ij) (phi_i - phi_j)`` and
``(div_rho v)_i = sum_j sqrt(w_ij) g_ij(rho) v_ji``. With these the
integration by parts identity ``<phi, div_rho v> = -(grad phi, v)_rho`` holds
exactly, and ``L_rho phi = -div_rho(grad phi)``.
"""

from __future__ import annotations

import numpy as np

from .errors import BoundaryPoint
from .graph_core import Graph
from .metric_tensor import MetricTensor

NOISE_AGREEMENT_TOL = 1e-10


def edge_weights(graph: Graph, g: MetricTensor, rho: np.ndarray) -> np.ndarray:
    """``g(rho_i, rho_j)`` for each stored edge."""
    rho = np.asarray(rho, dtype=float)
    return g(rho[graph.tail], rho[graph.head])


def gradient(graph: Graph, phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    return graph.sqrt_weight * (phi[graph.tail] - phi[graph.head])


def graph_divergence(graph: Graph, m: np.ndarray) -> np.ndarray:
    """The g-free divergence ``(grad . m)_i = sum_j sqrt(w_ij) m_ji`` used by the
    continuity equation; equals ``div_rho(v)`` when ``m = g(rho) v``."""
    flux = graph.sqrt_weight * np.asarray(m, dtype=float)
    out = np.zeros(graph.n)
    np.add.at(out, graph.tail, -flux)
    np.add.at(out, graph.head, flux)
    return out


def divergence(graph: Graph, g: MetricTensor, rho: np.ndarray, v: np.ndarray) -> np.ndarray:
    return graph_divergence(graph, edge_weights(graph, g, rho) * np.asarray(v, dtype=float))


def inner(graph: Graph, g: MetricTensor, rho: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    """``(v, w)_rho``. The half-sum over ordered pairs equals the plain sum over stored edges."""
    return float(np.sum(edge_weights(graph, g, rho) * np.asarray(v) * np.asarray(w)))


def norm(graph: Graph, g: MetricTensor, rho: np.ndarray, v: np.ndarray) -> float:
    return float(np.sqrt(max(inner(graph, g, rho, v, v), 0.0)))


def laplacian(graph: Graph, g: MetricTensor, rho: np.ndarray) -> np.ndarray:
    """Dense ``L_rho`` with ``L_rho phi = -div_rho(grad phi)``."""
    c = graph.weight * edge_weights(graph, g, rho)
    return weighted_laplacian(graph, c)


def weighted_laplacian(graph: Graph, c: np.ndarray) -> np.ndarray:
    """Graph Laplacian with conductance ``c_e`` on each stored edge."""
    n = graph.n
    lap = np.zeros((n, n))
    i, j = graph.tail, graph.head
    lap[i, j] = -c
    lap[j, i] = -c
    np.add.at(lap, (i, i), c)
    np.add.at(lap, (j, j), c)
    return lap


def rate_matrix(graph: Graph) -> np.ndarray:
    """Transition-rate matrix ``A``: off-diagonal ``w_ij``, rows summing to zero."""
    return -weighted_laplacian(graph, graph.weight)


def log_gradient(graph: Graph, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if np.min(rho) <= 0.0:
        raise BoundaryPoint("log-gradient needs every coordinate positive")
    return gradient(graph, np.log(rho))


def individual_noise(graph: Graph, g: MetricTensor, rho: np.ndarray, p: np.ndarray) -> float:
    """``O_rho(p) = <div_rho(p), log rho>``, cross-checked against ``-(p, grad log rho)_rho``."""
    rho = np.asarray(rho, dtype=float)
    lg = log_gradient(graph, rho)
    vertex_form = float(np.dot(divergence(graph, g, rho, p), np.log(rho)))
    edge_form = -inner(graph, g, rho, p, lg)
    if abs(vertex_form - edge_form) > NOISE_AGREEMENT_TOL * (1.0 + abs(vertex_form)):
        raise ArithmeticError(
            f"integration by parts mismatch: {vertex_form!r} vs {edge_form!r}")
    return vertex_form


def divergence_l1_bound(graph: Graph, g: MetricTensor, rho: np.ndarray,
                        v: np.ndarray) -> tuple[float, float]:
    """``(||div_rho v||_1, 2 n C_w ||v||_rho)``."""
    lhs = float(np.abs(divergence(graph, g, rho, v)).sum())
    return lhs, 2.0 * graph.n * graph.c_omega * norm(graph, g, rho, v)


def divergence_l1_bound_check(graph: Graph, g: MetricTensor, rho: np.ndarray,
                              v: np.ndarray, slack: float = 1e-12) -> bool:
    lhs, bound = divergence_l1_bound(graph, g, rho, v)
    return lhs <= bound + slack
