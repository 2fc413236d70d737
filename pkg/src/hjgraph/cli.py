"""Command-line front end.

Every command reads its parameters from flags, optionally layered over a JSON
``--config`` file, and writes one JSON or CSV result. Output files carry the
library version and a hash of the effective configuration and contain no
timestamps, so identical inputs give byte-identical files.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(including an optimizer that did not converge).
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .elliptic import poincare_constant
from .errors import HJGraphError, NoExtension
from .flows import general_flow, heat_semigroup
from .graph_core import Graph, graph_from_dict, graph_to_dict, random_interior, uniform, validate_simplex
from .hje import functional_from_config, hje_residuals, solve_hje
from .metric_tensor import check_axioms, get_tensor
from .transport import (
    DiscretePath,
    action,
    continuity_residual,
    feasible_path,
    two_node_geodesic,
    wasserstein_distance,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

DEFAULTS: dict[str, Any] = {
    "tensor": "logarithmic",
    "format": None,
    "seed": 0,
    "jobs": 1,
    "N": 64,
    "T": 1.0,
    "step": None,
    "tol": None,
    "max_iter": 500,
    "method": None,
    "samples": None,
    "times": [0.1, 0.5, 1.0],
    "hs": [1e-3, 5e-4, 2.5e-4],
    "record_every": 1,
}

# parameters that do not change results and stay out of the config hash
UNHASHED = {"out", "jobs", "config", "path_out"}


class ConfigError(ValueError):
    pass


# -- parameter handling -----------------------------------------------------------------

def _vector(value: Any, name: str) -> list[float] | None:
    if value is None:
        return None
    if isinstance(value, str):
        text = value.strip()
        try:
            value = json.loads(text) if text.startswith("[") else [float(x) for x in text.split(",") if x]
        except ValueError as exc:
            raise ConfigError(f"--{name}: cannot parse {text!r} as a list of numbers") from exc
    try:
        return [float(x) for x in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--{name}: expected a list of numbers") from exc


def _load_json(value: Any, name: str) -> Any:
    """Inline JSON text, a path to a JSON file, or an already parsed object."""
    if not isinstance(value, str):
        return value
    text = value.strip()
    if not text.startswith(("{", "[")):
        try:
            text = Path(text).read_text()
        except OSError as exc:
            raise ConfigError(f"--{name}: cannot read {value!r}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--{name}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _params(args: argparse.Namespace) -> dict[str, Any]:
    params = dict(DEFAULTS)
    if args.config is not None:
        cfg = _load_json(str(args.config), "config")
        if not isinstance(cfg, dict):
            raise ConfigError("--config must hold a JSON object")
        params.update({k.replace("-", "_"): v for k, v in cfg.items()})
    for key, value in vars(args).items():
        if key not in ("command", "handler", "config") and value is not None:
            params[key] = value
    return params


def _graph(params: dict) -> Graph:
    if params.get("graph") is None:
        raise ConfigError("--graph is required")
    data = _load_json(params["graph"], "graph")
    try:
        return graph_from_dict(data)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed graph: {exc}") from exc


def _point(params: dict, key: str, graph: Graph, default=None) -> np.ndarray:
    vec = _vector(params.get(key), key)
    if vec is None:
        if default is None:
            raise ConfigError(f"--{key.replace('_', '-')} is required")
        return default
    return validate_simplex(vec, n=graph.n)


def config_hash(command: str, params: dict) -> str:
    payload = {k: v for k, v in params.items() if k not in UNHASHED}
    if isinstance(payload.get("graph"), str):
        payload["graph"] = _load_json(payload["graph"], "graph")
    if isinstance(payload.get("functional"), str):
        payload["functional"] = _load_json(payload["functional"], "functional")
    text = json.dumps({"command": command, "params": payload}, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# -- output ------------------------------------------------------------------------------

def _num(x: Any) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return f"{float(x):.17g}"


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], meta: dict) -> str:
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_num(x) for x in row) + "\n")
    return buf.getvalue()


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def render_json(payload: dict, meta: dict) -> str:
    return json.dumps(_jsonable({**meta, "result": payload}), indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, newline="\n")


def _meta(command: str, params: dict) -> dict:
    return {"library": "hjgraph", "version": __version__, "command": command,
            "config_hash": config_hash(command, params)}


def _path_table(graph: Graph, path: DiscretePath) -> tuple[list[str], list[list[Any]]]:
    header = ["k", "t"] + [f"sigma_{i + 1}" for i in range(graph.n)]
    header += [f"m_{i + 1}_{j + 1}" for i, j, _ in graph.edges]
    rows = []
    times = path.times()
    for k in range(path.N + 1):
        m = path.m[k] if k < path.N else [None] * graph.n_edges
        rows.append([k, times[k], *path.sigma[k], *m])
    return header, rows


# -- commands ----------------------------------------------------------------------------

def cmd_check_graph(params: dict) -> tuple[dict, int]:
    graph = _graph(params)
    return {"n": graph.n, "n_edges": graph.n_edges, "connected": True, "c_omega": graph.c_omega,
            "graph": graph_to_dict(graph)}, EXIT_OK


def cmd_check_tensor(params: dict) -> tuple[dict, int]:
    g = get_tensor(params["tensor"])
    samples = int(params["samples"] or 10_000)
    report = check_axioms(g, samples, int(params["seed"]))
    return report.to_dict(), EXIT_OK if report.ok else EXIT_NUMERIC


def _transport(params: dict):
    graph = _graph(params)
    g = get_tensor(params["tensor"])
    rho0 = _point(params, "rho0", graph)
    rho1 = _point(params, "rho1", graph)
    method = params["method"] or "reduced"
    N = int(params["N"])
    if method in ("two-node", "feasible"):
        if method == "two-node":
            if graph.n != 2:
                raise ConfigError("method two-node needs a graph with two vertices")
            path = two_node_geodesic(g, rho0, rho1, graph.weight[0], N)
        else:
            path = feasible_path(graph, g, rho0, rho1, N)
        value = action(graph, g, path)
        return graph, path, {"distance": float(np.sqrt(value)), "converged": True, "iterations": 0,
                             "action": value, "continuity_residual": continuity_residual(graph, path),
                             "N": N, "method": method}
    tol = float(params["tol"]) if params["tol"] is not None else 1e-7
    res = wasserstein_distance(graph, g, rho0, rho1, N=N, max_iter=int(params["max_iter"]),
                               tol_obj=tol, method=method)
    return graph, res.path, {"distance": res.distance, "converged": res.converged,
                             "iterations": res.iterations, "action": res.action,
                             "continuity_residual": res.path.metadata["continuity_residual"],
                             "N": N, "method": method}


def cmd_distance(params: dict) -> tuple[dict, int]:
    graph, path, summary = _transport(params)
    if params.get("path_out"):
        header, rows = _path_table(graph, path)
        _emit(render_csv(header, rows, _meta("distance", params)), params["path_out"])
    return summary, EXIT_OK if summary["converged"] else EXIT_NUMERIC


def cmd_geodesic(params: dict) -> tuple[Any, int]:
    graph, path, summary = _transport(params)
    code = EXIT_OK if summary["converged"] else EXIT_NUMERIC
    if (params["format"] or "csv") == "csv":
        return _path_table(graph, path), code
    return {**summary, "sigma": path.sigma, "m": path.m}, code


def cmd_poincare(params: dict) -> tuple[dict, int]:
    graph = _graph(params)
    g = get_tensor(params["tensor"])
    rho = _point(params, "rho", graph, default=uniform(graph.n))
    res = poincare_constant(graph, g, rho)
    return {"gamma": res.gamma, "minimizer": res.minimizer, "rho": rho}, EXIT_OK


def cmd_flow(params: dict) -> tuple[Any, int]:
    graph = _graph(params)
    g = get_tensor(params["tensor"])
    mu = _point(params, "mu", graph)
    T = float(params["T"])
    step = float(params["step"] or 1e-3)
    every = int(params["record_every"])
    method = params["method"] or "rk4"
    if method == "heat":
        if g.name != "logarithmic":
            raise ConfigError("method heat needs the logarithmic tensor")
        count = max(1, int(round(T / step)))
        times = np.linspace(0.0, T, count + 1)[::every]
        if times[-1] != T:
            times = np.append(times, T)
        states = np.array([heat_semigroup(graph, t) @ mu for t in times])
        events: list = []
    elif method == "rk4":
        traj = general_flow(graph, g, mu, T, step, every)
        times, states, events = traj.times, traj.states, traj.freeze_events
    else:
        raise ConfigError(f"unknown flow method {method!r}")
    if (params["format"] or "csv") == "csv":
        header = ["t"] + [f"sigma_{i + 1}" for i in range(graph.n)]
        return (header, [[t, *s] for t, s in zip(times, states)]), EXIT_OK
    return {"times": times, "states": states,
            "freeze_events": [{"t": t, "vertex": v + 1} for t, v in events]}, EXIT_OK


def _functional(params: dict):
    if params.get("functional") is None:
        raise ConfigError("--functional is required")
    try:
        return functional_from_config(_load_json(params["functional"], "functional"))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed functional: {exc}") from exc


def cmd_hje(params: dict) -> tuple[dict, int]:
    graph = _graph(params)
    g = get_tensor(params["tensor"])
    u0 = _functional(params)
    mu = _point(params, "mu", graph)
    t = float(params["T"])
    h = float(params["step"] or 1e-3)
    sol = solve_hje(graph, g, u0, t, mu, h if t > h else None)
    return {"t": t, "h": h, "value": sol.value, "frechet": sol.frechet, "wgrad": sol.wgrad,
            "residual": sol.residual}, EXIT_OK


def _sweep_task(task: tuple) -> list[float]:
    graph_dict, tensor, functional, t, mu, hs = task
    graph = graph_from_dict(graph_dict)
    return hje_residuals(graph, get_tensor(tensor), functional_from_config(functional), t, mu, hs)


def cmd_residual_sweep(params: dict) -> tuple[Any, int]:
    graph = _graph(params)
    get_tensor(params["tensor"])
    u0_cfg = _load_json(params["functional"], "functional") if params.get("functional") else None
    if u0_cfg is None:
        raise ConfigError("--functional is required")
    functional_from_config(u0_cfg)
    if params.get("mu") is not None:
        mus = [_point(params, "mu", graph)]
    else:
        rng = np.random.default_rng(int(params["seed"]))
        mus = [random_interior(rng, graph.n, 0.05 / graph.n) for _ in range(int(params["samples"] or 10))]
    times = _vector(params["times"], "times")
    hs = _vector(params["hs"], "hs")
    tasks = [(graph_to_dict(graph), params["tensor"], u0_cfg, t, mu.tolist(), hs)
             for t in times for mu in mus]
    jobs = max(1, int(params["jobs"]))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(task) for task in tasks]
    rows = []
    for idx, res in enumerate(results):
        t, mu_id = times[idx // len(mus)], idx % len(mus)
        rows.extend([t, mu_id, h, r] for h, r in zip(hs, res))
    if (params["format"] or "csv") == "csv":
        return (["t", "mu_id", "h", "residual"], rows), EXIT_OK
    return {"rows": rows, "mu": [m.tolist() for m in mus]}, EXIT_OK


COMMANDS = {
    "check-graph": (cmd_check_graph, "json", "validate a graph file"),
    "check-tensor": (cmd_check_tensor, "json", "sample the metric-tensor axioms"),
    "distance": (cmd_distance, "json", "transport distance between two densities"),
    "geodesic": (cmd_geodesic, "csv", "minimizing path between two densities"),
    "poincare": (cmd_poincare, "json", "Poincare constant at a density"),
    "flow": (cmd_flow, "csv", "trajectory of the nonlinear (or heat) flow"),
    "hje": (cmd_hje, "json", "Hamilton-Jacobi value, derivative and residual"),
    "residual-sweep": (cmd_residual_sweep, "csv", "residuals over a grid of times and steps"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hjgraph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hjgraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, _, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with default parameters")
        p.add_argument("--graph", help='graph JSON file or inline JSON {"n": .., "edges": [[i, j, w], ..]}')
        p.add_argument("--tensor", help="arithmetic, harmonic or logarithmic")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="worker processes for sweeps")
        p.add_argument("--N", type=int, help="time steps of a discrete path")
        p.add_argument("--T", type=float, help="final time")
        p.add_argument("--step", type=float, help="integration step or time-difference step")
        p.add_argument("--tol", type=float, help="relative objective tolerance of the optimizer")
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--method")
        p.add_argument("--rho0")
        p.add_argument("--rho1")
        p.add_argument("--rho")
        p.add_argument("--mu")
        p.add_argument("--functional", help="functional JSON or file")
        p.add_argument("--samples", type=int)
        p.add_argument("--times", help="comma-separated times")
        p.add_argument("--hs", help="comma-separated time-difference steps")
        p.add_argument("--record-every", dest="record_every", type=int)
        p.add_argument("--path-out", dest="path_out", help="also write the path as CSV")
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler, default_format, _ = COMMANDS[args.command]
    try:
        params = _params(args)
        fmt = params["format"] or default_format
        params["format"] = fmt
        result, code = handler(params)
        meta = _meta(args.command, params)
        if fmt == "csv" and isinstance(result, tuple):
            text = render_csv(result[0], result[1], meta)
        elif fmt == "csv":
            flat = _flat(result)
            text = render_csv(list(flat), [list(flat.values())], meta)
        else:
            text = render_json(result, meta)
        _emit(text, params.get("out"))
        return code
    except ArithmeticError as exc:
        print(f"hjgraph {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, HJGraphError, NoExtension, ValueError, OSError) as exc:
        print(f"hjgraph {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _flat(result: dict) -> dict:
    return {k: v for k, v in result.items() if not isinstance(v, (list, tuple, np.ndarray, dict))}


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
