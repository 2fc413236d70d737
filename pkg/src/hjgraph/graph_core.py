"""Weighted graphs, points of the probability simplex and edge fields.

Vertices are 0-based internally. File formats (the graph JSON schema and the
CSV dumps) use 1-based vertex labels; :func:`graph_from_dict` and
:func:`graph_to_dict` do the translation.

Edge fields are stored as one float per undirected edge, holding ``v[i, j]``
for the canonical orientation ``i < j``; ``v[j, i] = -v[i, j]`` is implied.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateEdge,
    MassNotOne,
    NegativeMass,
    NonpositiveWeight,
    NotConnected,
    SelfLoop,
)

SIMPLEX_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Connected, undirected, weighted simple graph on vertices ``0..n-1``.

    Build instances with :func:`build_graph`, which validates the edge list.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    tail: np.ndarray = field(repr=False, compare=False)
    head: np.ndarray = field(repr=False, compare=False)
    weight: np.ndarray = field(repr=False, compare=False)
    sqrt_weight: np.ndarray = field(repr=False, compare=False)
    slot: dict = field(repr=False, compare=False)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def c_omega(self) -> float:
        """Largest square-rooted edge weight."""
        return float(self.sqrt_weight.max())

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b, _ in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def weight_matrix(self) -> np.ndarray:
        w = np.zeros((self.n, self.n))
        w[self.tail, self.head] = self.weight
        w[self.head, self.tail] = self.weight
        return w

    def incidence(self) -> np.ndarray:
        """Matrix ``B`` (edges x vertices) with ``(B phi)_e = sqrt(w_e) (phi_i - phi_j)``."""
        b = np.zeros((self.n_edges, self.n))
        idx = np.arange(self.n_edges)
        b[idx, self.tail] = self.sqrt_weight
        b[idx, self.head] = -self.sqrt_weight
        return b


def build_graph(n: int, edges: Iterable[Sequence[float]]) -> Graph:
    """Validate ``(i, j, w)`` triples (0-based) and return a :class:`Graph`.

    Edges may be given in either orientation; they are stored with ``i < j``
    and sorted lexicographically.
    """
    n = int(n)
    if n < 2:
        raise NotConnected(f"need at least 2 vertices, got n={n}")
    seen: dict[tuple[int, int], float] = {}
    for item in edges:
        if len(item) != 3:
            raise ValueError(f"edge {item!r} is not an (i, j, w) triple")
        i, j, w = int(item[0]), int(item[1]), float(item[2])
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) references a vertex outside 0..{n - 1}")
        if i == j:
            raise SelfLoop(f"self-loop at vertex {i}")
        if not (w > 0.0) or not np.isfinite(w):
            raise NonpositiveWeight(f"edge ({i}, {j}) has weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed twice")
        seen[key] = w

    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in seen:
        adj[i].append(j)
        adj[j].append(i)
    reached = [False] * n
    reached[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in adj[i]:
            if not reached[j]:
                reached[j] = True
                queue.append(j)
    if not all(reached):
        missing = [i for i in range(n) if not reached[i]]
        raise NotConnected(f"vertices {missing} are not reachable from vertex 0")

    ordered = tuple((i, j, seen[(i, j)]) for i, j in sorted(seen))
    tail = np.array([e[0] for e in ordered], dtype=np.intp)
    head = np.array([e[1] for e in ordered], dtype=np.intp)
    weight = np.array([e[2] for e in ordered], dtype=float)
    return Graph(
        n=n,
        edges=ordered,
        tail=_frozen(tail),
        head=_frozen(head),
        weight=_frozen(weight),
        sqrt_weight=_frozen(np.sqrt(weight)),
        slot={(i, j): k for k, (i, j, _) in enumerate(ordered)},
    )


def graph_from_dict(data: dict) -> Graph:
    """Build from the JSON schema ``{"n": int, "edges": [[i, j, w], ...]}`` (1-based)."""
    if not isinstance(data, dict) or "n" not in data or "edges" not in data:
        raise ValueError('graph description must be an object with keys "n" and "edges"')
    edges = []
    for e in data["edges"]:
        if not isinstance(e, (list, tuple)) or len(e) != 3:
            raise ValueError(f"edge {e!r} is not an [i, j, w] triple")
        edges.append((int(e[0]) - 1, int(e[1]) - 1, float(e[2])))
    return build_graph(int(data["n"]), edges)


def graph_to_dict(graph: Graph) -> dict:
    return {"n": graph.n, "edges": [[i + 1, j + 1, w] for i, j, w in graph.edges]}


def complete_graph(n: int, weight: float = 1.0) -> Graph:
    return build_graph(n, [(i, j, weight) for i in range(n) for j in range(i + 1, n)])


def path_graph(n: int, weight: float = 1.0) -> Graph:
    return build_graph(n, [(i, i + 1, weight) for i in range(n - 1)])


def random_graph(rng: np.random.Generator, n: int, p: float = 0.5,
                 wmin: float = 0.2, wmax: float = 3.0) -> Graph:
    """Random spanning tree plus Erdos-Renyi extras, uniform weights in ``[wmin, wmax]``."""
    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        pairs.add((min(a, b), max(a, b)))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in pairs and rng.random() < p:
                pairs.add((i, j))
    return build_graph(n, [(i, j, float(rng.uniform(wmin, wmax))) for i, j in sorted(pairs)])


# -- simplex ---------------------------------------------------------------

def validate_simplex(x: Sequence[float], tol: float = SIMPLEX_TOL, n: int | None = None) -> np.ndarray:
    """Return ``x`` as a read-only point of the probability simplex.

    Entries in ``[-tol, 0)`` are clamped to zero and the mass is renormalized,
    which is only done when ``|sum - 1| <= tol`` to begin with.
    """
    rho = np.array(x, dtype=float).reshape(-1)
    if n is not None and rho.size != n:
        raise ValueError(f"expected {n} entries, got {rho.size}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("non-finite entry in probability vector")
    if rho.min() < -tol:
        raise NegativeMass(f"entry {rho.min():.3e} below -{tol:g}")
    rho[rho < 0.0] = 0.0
    total = rho.sum()
    if abs(total - 1.0) > tol:
        raise MassNotOne(f"total mass {total!r} differs from 1 by more than {tol:g}")
    rho /= total
    return _frozen(rho)


def interiority(rho: np.ndarray) -> float:
    """``min_i rho_i``; ``rho`` lies in P_eps(G) iff the result exceeds ``eps``."""
    return float(np.min(rho))


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def random_interior(rng: np.random.Generator, n: int, floor: float = 0.0) -> np.ndarray:
    """Dirichlet(1) sample mixed with the uniform vector so every entry exceeds ``floor``."""
    if n * floor >= 1.0:
        raise ValueError(f"floor {floor} leaves no room on {n} vertices")
    x = rng.dirichlet(np.ones(n))
    lam = n * floor
    return (1.0 - lam) * x + lam / n


# -- edge fields -----------------------------------------------------------

def edge_entry(graph: Graph, v: np.ndarray, i: int, j: int) -> float:
    """Read ``v[i, j]`` from stored edge values; zero off the edge set."""
    if i < j:
        k = graph.slot.get((i, j))
        return 0.0 if k is None else float(v[k])
    k = graph.slot.get((j, i))
    return 0.0 if k is None else -float(v[k])


def skew_matrix(graph: Graph, v: np.ndarray) -> np.ndarray:
    m = np.zeros((graph.n, graph.n))
    m[graph.tail, graph.head] = v
    m[graph.head, graph.tail] = -np.asarray(v)
    return m


def from_skew_matrix(graph: Graph, m: np.ndarray) -> np.ndarray:
    """Stored values of a skew-symmetric matrix; entries off the edge set are dropped."""
    m = np.asarray(m, dtype=float)
    return m[graph.tail, graph.head].copy()
