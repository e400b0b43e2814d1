"""Pencil data model: per-edge coefficients, the loop graph, assumption (A).

Every edge is parametrised by t in [0, pi]; coefficients are Chebyshev series
in the mapped variable x = 2t/pi - 1.  Edge index m (the last one) is the loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .errors import ConfigError

DEFAULT_DEGREE = 32

IMAG_TOL = 1e-10
MOD1_TOL = 1e-8
ZERO_TOL = 1e-10


def _as_coeffs(c) -> np.ndarray:
    arr = np.array(c, dtype=complex).ravel()
    if arr.size == 0:
        arr = np.zeros(1, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError("Chebyshev coefficients must be finite")
    if np.all(arr.imag == 0):
        arr = arr.real.copy()
    arr.setflags(write=False)
    return arr


def to_unit(t):
    """Map t in [0, pi] to the Chebyshev variable x in [-1, 1]."""
    return 2.0 * np.asarray(t) / np.pi - 1.0


def compute_alpha(edge: "EdgeCoefficients") -> complex | float:
    """Mean value (1/pi) * int_0^pi p(t) dt by Gauss-Legendre quadrature.

    The node count makes the rule exact for the stored polynomial degree.
    """
    n = len(edge.p) // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    val = 0.5 * np.sum(w * cheb.chebval(x, edge.p))
    return val.real if np.isrealobj(edge.p) else complex(val)


@dataclass(frozen=True, eq=False)
class EdgeCoefficients:
    """Coefficients (p, q) of one edge as Chebyshev series on [0, pi]."""

    p: np.ndarray
    q: np.ndarray
    alpha: complex | float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", _as_coeffs(self.p))
        object.__setattr__(self, "q", _as_coeffs(self.q))
        object.__setattr__(self, "alpha", compute_alpha(self))

    @classmethod
    def zero(cls) -> "EdgeCoefficients":
        return cls([0.0], [0.0])

    @classmethod
    def constant(cls, p=0.0, q=0.0) -> "EdgeCoefficients":
        return cls([p], [q])

    @classmethod
    def from_functions(cls, p: Callable, q: Callable,
                       degree: int = DEFAULT_DEGREE) -> "EdgeCoefficients":
        """Interpolate callables of t at Chebyshev points of the given degree."""
        return cls(_interpolate(p, degree), _interpolate(q, degree))

    @classmethod
    def from_samples(cls, p_samples, q_samples,
                     degree: int = DEFAULT_DEGREE) -> "EdgeCoefficients":
        """Least-squares Chebyshev fit to values on an equispaced grid of [0, pi]
        (endpoints included)."""
        return cls(_fit_samples(p_samples, degree), _fit_samples(q_samples, degree))

    @property
    def degree(self) -> int:
        return max(len(self.p), len(self.q)) - 1

    @property
    def is_real(self) -> bool:
        return np.isrealobj(self.p) and np.isrealobj(self.q)

    def p_at(self, t):
        return cheb.chebval(to_unit(t), self.p)

    def q_at(self, t):
        return cheb.chebval(to_unit(t), self.q)

    def allclose(self, other: "EdgeCoefficients", atol=1e-12) -> bool:
        def same(a, b):
            n = max(len(a), len(b))
            return np.allclose(np.pad(a, (0, n - len(a))), np.pad(b, (0, n - len(b))),
                               rtol=0, atol=atol)
        return same(self.p, other.p) and same(self.q, other.q)

    def to_dict(self) -> dict:
        return {"p": {"cheb": _coeffs_to_json(self.p)},
                "q": {"cheb": _coeffs_to_json(self.q)}}


@dataclass(frozen=True, eq=False)
class LoopGraphPencil:
    """Problem L: m edges of length pi, edges[m-1] is the loop."""

    edges: tuple

    def __post_init__(self):
        edges = tuple(self.edges)
        if len(edges) < 2:
            raise ValueError("a loop graph needs m >= 2 edges")
        if not all(isinstance(e, EdgeCoefficients) for e in edges):
            raise TypeError("edges must be EdgeCoefficients")
        object.__setattr__(self, "edges", edges)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def loop(self) -> EdgeCoefficients:
        return self.edges[-1]

    @property
    def alphas(self) -> np.ndarray:
        return np.array([e.alpha for e in self.edges])

    def with_edge(self, j: int, edge: EdgeCoefficients) -> "LoopGraphPencil":
        """Copy with edge j (0-based) replaced."""
        edges = list(self.edges)
        edges[j] = edge
        return replace(self, edges=tuple(edges))

    def to_dict(self) -> dict:
        return {"m": self.m, "edges": [e.to_dict() for e in self.edges]}


@dataclass
class AssumptionReport:
    """Outcome of the assumption checks; ``None`` means not evaluated."""

    A_i: Optional[bool] = None
    A_ii: Optional[bool] = None
    A_iii: Optional[bool] = None
    B_holds: Optional[bool] = None
    C_holds: Optional[bool] = None
    D_holds: Optional[bool] = None
    violations: dict = field(default_factory=dict)

    @property
    def A_holds(self) -> Optional[bool]:
        parts = (self.A_i, self.A_ii, self.A_iii)
        if any(v is None for v in parts):
            return None
        return all(parts)

    def merge(self, other: "AssumptionReport") -> "AssumptionReport":
        out = AssumptionReport(**{k: getattr(self, k) for k in
                                  ("A_i", "A_ii", "A_iii", "B_holds", "C_holds", "D_holds")})
        for k in ("A_i", "A_ii", "A_iii", "B_holds", "C_holds", "D_holds"):
            if getattr(other, k) is not None:
                setattr(out, k, getattr(other, k))
        out.violations = {**self.violations, **other.violations}
        return out

    def to_dict(self) -> dict:
        return {"A_holds": self.A_holds, "A_i": self.A_i, "A_ii": self.A_ii,
                "A_iii": self.A_iii, "B_holds": self.B_holds, "C_holds": self.C_holds,
                "D_holds": self.D_holds, "violations": self.violations}


def dist_to_int(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.abs(x - np.round(x))


def normalize_shift(pencil: LoopGraphPencil):
    """Shift lambda -> lambda + C with C = -alpha_m so that the loop has zero mean p.

    p_j -> p_j + C and q_j -> q_j - 2 C p_j - C**2 on every edge.  Eigenvalues of
    the returned pencil equal the original ones plus C.
    """
    c = -pencil.loop.alpha
    if c == 0:
        return pencil, 0.0
    edges = []
    for e in pencil.edges:
        p = cheb.chebadd(e.p, [c])
        q = cheb.chebsub(cheb.chebsub(e.q, 2 * c * np.asarray(e.p)), [c * c])
        edges.append(EdgeCoefficients(p, q))
    return LoopGraphPencil(tuple(edges)), c


def check_assumption_A(pencil: LoopGraphPencil, imag_tol=IMAG_TOL, mod1_tol=MOD1_TOL,
                       zero_tol=ZERO_TOL) -> AssumptionReport:
    a = pencil.alphas.astype(complex)
    rep = AssumptionReport()
    imag_bad = [j + 1 for j in range(pencil.m) if abs(a[j].imag) > imag_tol]
    rep.A_i = not imag_bad
    re = a.real
    pairs = []
    for j in range(pencil.m):
        for k in range(j + 1, pencil.m):
            if dist_to_int(re[j] - re[k]) <= mod1_tol:
                pairs.append([j + 1, k + 1])
    rep.A_ii = not pairs
    rep.A_iii = bool(abs(a[-1]) <= zero_tol)
    if imag_bad:
        rep.violations["A_i"] = imag_bad
    if pairs:
        rep.violations["A_ii"] = pairs
    if not rep.A_iii:
        rep.violations["A_iii"] = [pencil.m]
    return rep


# construction helpers ---------------------------------------------------------

def _interpolate(f, degree):
    if np.isscalar(f):
        return [f]
    return cheb.chebinterpolate(lambda x: np.asarray(f(np.pi * (x + 1) / 2), dtype=complex)
                                if _is_complex_fn(f) else f(np.pi * (x + 1) / 2), degree)


def _is_complex_fn(f):
    return np.iscomplexobj(np.asarray(f(np.array([0.5]))))


def _fit_samples(samples, degree):
    y = np.asarray(samples)
    if y.size < 2:
        return y.ravel()
    x = np.linspace(-1.0, 1.0, y.size)
    return cheb.chebfit(x, y, min(degree, y.size - 1))


def _trim(c):
    c = np.asarray(c)
    if np.iscomplexobj(c) and np.all(c.imag == 0):
        c = c.real
    return cheb.chebtrim(c, 1e-15)


def _coeffs_to_json(c):
    c = np.asarray(c)
    if np.isrealobj(c):
        return [float(v) for v in c]
    return [[float(v.real), float(v.imag)] for v in c]


_EXPR_NAMESPACE = {name: getattr(np, name) for name in
                   ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh",
                    "abs", "arctan", "pi")}


def _function_spec(spec, degree, where):
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError(f"{where}: expected one of {{cheb|samples|expr|const}}")
    (kind, val), = spec.items()
    if kind == "cheb":
        return [complex(*v) if isinstance(v, (list, tuple)) else v for v in val]
    if kind == "samples":
        vals = [complex(*v) if isinstance(v, (list, tuple)) else v for v in val]
        return _fit_samples(vals, degree)
    if kind == "const":
        return [complex(*val) if isinstance(val, (list, tuple)) else val]
    if kind == "expr":
        def f(t):
            env = dict(_EXPR_NAMESPACE, t=t)
            return np.broadcast_to(eval(str(val), {"__builtins__": {}}, env), np.shape(t))
        try:
            return _interpolate(f, degree)
        except Exception as exc:     # any failure of a user expression is a config error
            raise ConfigError(f"{where}: cannot evaluate {val!r}: {exc}") from exc
    raise ConfigError(f"{where}: unknown coefficient kind {kind!r}")


def pencil_from_dict(d: dict) -> LoopGraphPencil:
    """Build a pencil from its config mapping.

    Schema: ``{"m": int, "degree": int (optional), "edges": [{"p": F, "q": F}, ...]}``
    where ``F`` is one of ``{"cheb": [c0, c1, ...]}``, ``{"samples": [...]}``
    (equispaced on [0, pi] including endpoints), ``{"const": c}`` or
    ``{"expr": "0.3 + 0.1*cos(t)"}``.  Complex numbers are written ``[re, im]``.
    """
    allowed = {"m", "degree", "edges"}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown pencil key(s): {sorted(extra)}")
    degree = int(d.get("degree", DEFAULT_DEGREE))
    edges_cfg = d.get("edges")
    if not isinstance(edges_cfg, list):
        raise ConfigError("pencil.edges must be a list")
    if "m" in d and int(d["m"]) != len(edges_cfg):
        raise ConfigError(f"pencil.m = {d['m']} but {len(edges_cfg)} edges given")
    edges = []
    for j, e in enumerate(edges_cfg, start=1):
        if not isinstance(e, dict) or set(e) - {"p", "q"}:
            raise ConfigError(f"edge {j}: expected keys p, q")
        p = _function_spec(e.get("p", {"const": 0.0}), degree, f"edge {j}.p")
        q = _function_spec(e.get("q", {"const": 0.0}), degree, f"edge {j}.q")
        edges.append(EdgeCoefficients(_trim(p), _trim(q)))
    if len(edges) < 2:
        raise ConfigError("pencil needs at least 2 edges")
    return LoopGraphPencil(tuple(edges))
