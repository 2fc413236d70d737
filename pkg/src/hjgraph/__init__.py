"""Optimal transport and the linear Hamilton-Jacobi equation on the
probability simplex of a weighted graph."""

from __future__ import annotations

__version__ = "0.1.0"

from .calculus import (
    divergence,
    gradient,
    graph_divergence,
    individual_noise,
    inner,
    laplacian,
    norm,
    rate_matrix,
)
from .elliptic import center, poincare_constant, project_tangent, solve_elliptic
from .flows import flow_jacobian, general_flow, heat_flow, matrix_exp, xi
from .graph_core import Graph, build_graph, complete_graph, graph_from_dict, path_graph, validate_simplex
from .hje import (
    Functional,
    frechet_numeric,
    functional_from_config,
    hje_frechet,
    hje_residual,
    hje_value,
    wasserstein_gradient,
)
from .metric_tensor import (
    ARITHMETIC,
    HARMONIC,
    LOGARITHMIC,
    MetricTensor,
    boundary_cost,
    boundary_cost_inverse,
    check_axioms,
    get_tensor,
)
from .transport import (
    DiscretePath,
    action,
    concat,
    feasible_path,
    kinetic_F,
    two_node_geodesic,
    wasserstein_distance,
)
