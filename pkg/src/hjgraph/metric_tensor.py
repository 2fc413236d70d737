"""Metric tensors g(s, t) on [0, 1]^2, their boundary extensions and the
two-vertex cost integral G(t) = int_0^t dr / sqrt(g(r, 1 - r)).

All tensor callables are vectorized over numpy arrays and perform no domain
checks; :func:`evaluate` is the checked scalar entry point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import DivergentIntegral, DomainError, NoExtension, OutOfRange

Array = np.ndarray
BinaryFn = Callable[[Array, Array], Array]

AXIOM_SLACK = 1e-12
QUAD_TOL = 1e-10
INVERSE_TOL = 1e-12


@dataclass(frozen=True)
class MetricTensor:
    """A mean-like weight ``g`` with optional boundary data.

    ``gbar`` is the extension of ``(log s - log t) g(s, t)`` to ``[0, inf)^2``
    and ``dgbar`` its partial derivative in the first argument. ``dg`` is the
    partial derivative of ``g`` in the first argument (used by the transport
    optimizer); when absent a central difference is used.
    """

    name: str
    func: BinaryFn = field(repr=False)
    gbar_func: Optional[BinaryFn] = field(default=None, repr=False)
    dgbar_func: Optional[BinaryFn] = field(default=None, repr=False)
    dg_func: Optional[BinaryFn] = field(default=None, repr=False)
    verified: bool = True

    @property
    def has_gbar_extension(self) -> bool:
        return self.gbar_func is not None

    def __call__(self, s, t):
        return self.func(np.asarray(s, dtype=float), np.asarray(t, dtype=float))

    def dg(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.dg_func is not None:
            return self.dg_func(s, t)
        h = 1e-7
        lo = np.maximum(s - h, 0.0)
        hi = s + h
        return (self.func(hi, t) - self.func(lo, t)) / (hi - lo)

    def gbar(self, s, t):
        if self.gbar_func is None:
            raise NoExtension(f"tensor {self.name!r} has no boundary extension")
        return self.gbar_func(np.asarray(s, dtype=float), np.asarray(t, dtype=float))

    def dgbar(self, s, t):
        """Partial derivative of gbar in its first argument."""
        if self.gbar_func is None:
            raise NoExtension(f"tensor {self.name!r} has no boundary extension")
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.dgbar_func is not None:
            return self.dgbar_func(s, t)
        h = 1e-6
        lo = np.maximum(s - h, 0.0)
        hi = s + h
        return (self.gbar_func(hi, t) - self.gbar_func(lo, t)) / (hi - lo)


# -- built-in tensors ------------------------------------------------------

def _arith(s, t):
    return 0.5 * (s + t)


def _arith_ds(s, t):
    return np.full(np.broadcast(s, t).shape, 0.5)


def _harm(s, t):
    s, t = np.broadcast_arrays(s, t)
    num = 2.0 * s * t
    den = s + t
    out = np.zeros(s.shape)
    ok = num > 0
    out[ok] = num[ok] / den[ok]
    return out


def _harm_ds(s, t):
    s, t = np.broadcast_arrays(s, t)
    den = s + t
    out = np.full(s.shape, 0.5)
    ok = den > 0
    out[ok] = 2.0 * t[ok] ** 2 / den[ok] ** 2
    return out


def _logmean(s, t):
    s, t = np.broadcast_arrays(s, t)
    hi = np.maximum(s, t)
    lo = np.minimum(s, t)
    out = np.zeros(s.shape)
    pos = lo > 0
    eq = pos & (hi == lo)
    out[eq] = lo[eq]
    ne = pos & (hi > lo)
    h, l = hi[ne], lo[ne]
    d = h - l
    # log1p keeps full relative accuracy when s ~ t; the log difference avoids
    # overflow of d / l when l is tiny
    close = d <= 1e300 * l
    ratio_log = np.empty(d.shape)
    ratio_log[close] = np.log1p(d[close] / l[close])
    ratio_log[~close] = np.log(h[~close]) - np.log(l[~close])
    out[ne] = d / ratio_log
    return out


def _series_or(u, exact, coeffs, cut=1e-2):
    out = np.empty(u.shape)
    small = np.abs(u) < cut
    us = u[small]
    acc = np.zeros(us.shape)
    for c in reversed(coeffs):
        acc = acc * us + c
    out[small] = acc
    out[~small] = exact(u[~small])
    return out


def _logmean_ds(s, t):
    s, t = np.broadcast_arrays(s, t)
    out = np.empty(s.shape)
    both = (s > 0) & (t > 0)
    out[(s > 0) & (t == 0)] = 0.0
    out[(s == 0) & (t > 0)] = np.inf
    out[(s == 0) & (t == 0)] = 0.5
    u = np.log(s[both]) - np.log(t[both])
    # d/ds L = (e^{-u} - 1 + u) / u^2 with u = log(s / t)
    out[both] = _series_or(
        u,
        lambda x: (np.expm1(-x) + x) / x**2,
        [1 / 2, -1 / 6, 1 / 24, -1 / 120, 1 / 720],
    )
    return out


def _log_gbar(s, t):
    return np.asarray(s - t, dtype=float)


def _log_dgbar(s, t):
    return np.ones(np.broadcast(s, t).shape)


def _harm_gbar(s, t):
    s, t = np.broadcast_arrays(s, t)
    out = np.zeros(s.shape)
    ok = (s > 0) & (t > 0)
    ss, tt = s[ok], t[ok]
    out[ok] = (2.0 * ss * tt / (ss + tt)) * (np.log(ss) - np.log(tt))
    return out


def _harm_dgbar(s, t):
    s, t = np.broadcast_arrays(s, t)
    out = np.zeros(s.shape)
    ok = (s > 0) & (t > 0)
    ss, tt = s[ok], t[ok]
    den = ss + tt
    out[ok] = 2.0 * tt**2 * (np.log(ss) - np.log(tt)) / den**2 + 2.0 * tt / den
    out[(s == 0) & (t > 0)] = -np.inf
    return out


ARITHMETIC = MetricTensor("arithmetic", _arith, dg_func=_arith_ds)
HARMONIC = MetricTensor("harmonic", _harm, _harm_gbar, _harm_dgbar, _harm_ds)
LOGARITHMIC = MetricTensor("logarithmic", _logmean, _log_gbar, _log_dgbar, _logmean_ds)

BUILTIN = {t.name: t for t in (ARITHMETIC, HARMONIC, LOGARITHMIC)}


def get_tensor(name: str) -> MetricTensor:
    try:
        return BUILTIN[name]
    except KeyError:
        raise ValueError(f"unknown tensor {name!r}; choose from {sorted(BUILTIN)}") from None


def custom_tensor(func: BinaryFn, *, name: str = "custom", gbar: BinaryFn | None = None,
                  dgbar: BinaryFn | None = None, dg: BinaryFn | None = None) -> MetricTensor:
    """Wrap a user tensor. It stays ``verified=False`` until :func:`verify` accepts it."""
    return MetricTensor(name, func, gbar, dgbar, dg, verified=False)


def evaluate(g: MetricTensor, s: float, t: float) -> float:
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise DomainError(f"g({s}, {t}) requested outside [0, 1]^2")
    return float(g(s, t))


def gbar(g: MetricTensor, s: float, t: float) -> float:
    if s < 0 or t < 0:
        raise DomainError(f"gbar({s}, {t}) requested outside [0, inf)^2")
    return float(g.gbar(s, t))


# -- axiom sweep -----------------------------------------------------------

@dataclass
class AxiomReport:
    tensor: str
    samples: int
    has_gbar_extension: bool
    violations: dict[str, int]
    examples: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def to_dict(self) -> dict:
        return {
            "tensor": self.tensor,
            "samples": self.samples,
            "has_gbar_extension": self.has_gbar_extension,
            "violations": dict(self.violations),
            "ok": self.ok,
            "examples": self.examples,
        }


def _sample_pairs(rng: np.random.Generator, k: int) -> tuple[Array, Array]:
    s = rng.random(k)
    t = rng.random(k)
    # a slice of boundary and diagonal points so every branch is exercised
    m = max(k // 20, 1)
    s[:m] = 0.0
    t[m:2 * m] = 0.0
    t[2 * m:3 * m] = s[2 * m:3 * m]
    return s, t


def check_axioms(g: MetricTensor, sample_count: int = 10_000, seed: int = 0,
                 slack: float = AXIOM_SLACK, max_examples: int = 5) -> AxiomReport:
    """Sample symmetry, joint concavity, 1-homogeneity and the min/max bounds."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    k = sample_count
    violations: dict[str, int] = {}
    examples: list[dict] = []

    def record(name: str, bad: Array, payload: Callable[[int], dict]) -> None:
        idx = np.flatnonzero(bad)
        violations[name] = int(idx.size)
        for i in idx[:max_examples]:
            examples.append({"axiom": name, **payload(int(i))})

    s, t = _sample_pairs(rng, k)
    gst = g(s, t)
    gts = g(t, s)
    record("nonnegative", ~(gst >= 0), lambda i: {"s": s[i], "t": t[i], "g": gst[i]})
    record("symmetry", np.abs(gst - gts) > slack,
           lambda i: {"s": s[i], "t": t[i], "g(s,t)": gst[i], "g(t,s)": gts[i]})
    lo = np.minimum(s, t)
    hi = np.maximum(s, t)
    record("bounds", (gst < lo - slack) | (gst > hi + slack),
           lambda i: {"s": s[i], "t": t[i], "g": gst[i]})

    lam = rng.random(k)
    lam[0] = 1.0
    scaled = g(lam * s, lam * t)
    record("homogeneity", np.abs(scaled - lam * gst) > slack,
           lambda i: {"s": s[i], "t": t[i], "lambda": lam[i], "g(ls,lt)": scaled[i]})

    a1, a2 = _sample_pairs(rng, k)
    b1, b2 = rng.random(k), rng.random(k)
    mu = rng.uniform(0.0, 1.0, k)
    mu = np.where(mu == 0.0, 0.5, mu)
    mix = g((1 - mu) * a1 + mu * b1, (1 - mu) * a2 + mu * b2)
    chord = (1 - mu) * g(a1, a2) + mu * g(b1, b2)
    record("concavity", mix < chord - slack,
           lambda i: {"a": [a1[i], a2[i]], "b": [b1[i], b2[i]], "lambda": mu[i],
                      "gap": chord[i] - mix[i]})
    return AxiomReport(g.name, k, g.has_gbar_extension, violations,
                       [{k2: _plain(v) for k2, v in e.items()} for e in examples])


def _plain(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    return float(v)


def verify(g: MetricTensor, sample_count: int = 10_000, seed: int = 0) -> MetricTensor:
    """Return ``g`` marked verified when the axiom sweep finds nothing."""
    report = check_axioms(g, sample_count, seed)
    if not report.ok:
        raise DomainError(f"tensor {g.name!r} violates axioms: {report.violations}")
    return replace(g, verified=True)


# -- boundary cost G -------------------------------------------------------

def _sub_integrand(g: MetricTensor) -> Callable[[float], float]:
    def f(u: float) -> float:
        r = u * u
        val = float(g(r, 1.0 - r))
        if val <= 0.0:
            return math.inf
        return 2.0 * u / math.sqrt(val)
    return f


TABLE_SIZE = 128
_HALF = math.sqrt(0.5)


def _quad(f: Callable[[float], float], a: float, b: float, name: str) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, epsabs=1e-15, epsrel=QUAD_TOL, limit=200)
    if not math.isfinite(val) or err > 1e3 * QUAD_TOL * max(1.0, abs(val)):
        raise DivergentIntegral(f"G integral for {name!r} did not converge (err={err:.2e})")
    return val


@lru_cache(maxsize=64)
def _table(g: MetricTensor) -> tuple[Array, Array]:
    """Cumulative values of H(x) = int_0^x 2u / sqrt(g(u^2, 1 - u^2)) du on a grid of [0, 1/sqrt 2]."""
    f = _sub_integrand(g)
    grid = np.linspace(0.0, _HALF, TABLE_SIZE + 1)
    vals = np.zeros_like(grid)
    for k in range(TABLE_SIZE):
        vals[k + 1] = vals[k] + _quad(f, grid[k], grid[k + 1], g.name)
    return grid, vals


def _half_integral(g: MetricTensor, x: float) -> float:
    """H(x) = G(x^2) for x in [0, 1/sqrt 2]."""
    grid, vals = _table(g)
    k = min(int(np.searchsorted(grid, x, side="right")) - 1, TABLE_SIZE - 1)
    if grid[k] == x:
        return float(vals[k])
    return float(vals[k]) + _quad(_sub_integrand(g), float(grid[k]), x, g.name)


def _half_inverse(g: MetricTensor, y: float, tol: float) -> float:
    """Solve H(x) = y on [0, 1/sqrt 2]: bisection on the table bracket, with
    Newton steps taken whenever they stay inside the bracket."""
    grid, vals = _table(g)
    k = min(int(np.searchsorted(vals, y, side="right")) - 1, TABLE_SIZE - 1)
    lo, hi = float(grid[k]), float(grid[k + 1])
    if vals[k] == y:
        return lo
    f = _sub_integrand(g)
    x = lo + (hi - lo) * (y - vals[k]) / (vals[k + 1] - vals[k])
    for _ in range(200):
        r = _half_integral(g, x) - y
        if abs(r) <= tol:
            break
        if r > 0:
            hi = x
        else:
            lo = x
        if hi - lo <= 2e-16:
            break
        slope = f(x)
        cand = x - r / slope if math.isfinite(slope) and slope > 0 else math.nan
        x = cand if lo < cand < hi else 0.5 * (lo + hi)
    return x


def boundary_cost(g: MetricTensor, t: float) -> float:
    """G(t) = int_0^t dr / sqrt(g(r, 1 - r)) for ``t`` in [0, 1].

    The substitution r = u^2 near 0 (and r = 1 - u^2 near 1, using the
    symmetry of g) removes the corner singularity of the integrand.
    """
    t = float(t)
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"G({t}) requested outside [0, 1]")
    if t <= 0.5:
        return _half_integral(g, math.sqrt(t))
    return boundary_cost_total(g) - _half_integral(g, math.sqrt(1.0 - t))


def boundary_cost_total(g: MetricTensor) -> float:
    """G(1); finite for every tensor satisfying the axioms with g(r, 1 - r) > 0 inside."""
    return 2.0 * float(_table(g)[1][-1])


def boundary_cost_derivative(g: MetricTensor, t: float) -> float:
    val = float(g(t, 1.0 - t))
    return math.inf if val <= 0 else 1.0 / math.sqrt(val)


def boundary_cost_inverse(g: MetricTensor, x: float, tol: float = INVERSE_TOL) -> float:
    """The t in [0, 1] with G(t) = x, to within ``tol`` in G."""
    total = boundary_cost_total(g)
    x = float(x)
    if x < -1e-12 or x > total + 1e-12 * max(1.0, total):
        raise OutOfRange(f"x={x} outside [0, G(1)={total}]")
    if x <= 0.0:
        return 0.0
    if x >= total:
        return 1.0
    half = 0.5 * total
    if x <= half:
        return _half_inverse(g, x, tol) ** 2
    return 1.0 - _half_inverse(g, total - x, tol) ** 2
