"""Independent oracles and builders shared by the tests.

Nothing here calls the package's characteristic or spectral code: closed
forms are written out from the constant-coefficient solutions, and roots
come from scipy/mpmath applied to those closed forms.
"""
import numpy as np

from pencilgraph.model import EdgeCoefficients, LoopGraphPencil

# PASS/FAIL lines collected by the acceptance tests, printed in the terminal summary
ACCEPTANCE_LINES = []


def reference_pencil() -> LoopGraphPencil:
    e1 = EdgeCoefficients.from_functions(lambda t: 0.3 + 0.1 * np.cos(t), lambda t: 0.2 * np.sin(t))
    e2 = EdgeCoefficients.from_functions(lambda t: 0.6 + 0.1 * np.sin(2 * t),
                                         lambda t: 0.1 + 0.5 * np.cos(t))
    loop = EdgeCoefficients.from_functions(lambda t: 0.2 * np.cos(t),
                                           lambda t: 0.1 * np.cos(2 * t) + 0.2 * np.sin(t))
    return LoopGraphPencil((e1, e2, loop))


def reflected(edge: EdgeCoefficients, degree=32) -> EdgeCoefficients:
    """The edge with t -> pi - t."""
    return EdgeCoefficients.from_functions(lambda t: edge.p_at(np.pi - t),
                                           lambda t: edge.q_at(np.pi - t), degree)


def random_smooth_pencil(rng, m=3, degree=6, scale=0.3) -> LoopGraphPencil:
    """Random Chebyshev p, q with decaying coefficients; the loop mean is not forced."""
    edges = []
    for _ in range(m):
        decay = scale / (1.0 + np.arange(degree + 1)) ** 2
        p = rng.normal(size=degree + 1) * decay
        q = rng.normal(size=degree + 1) * decay * 2
        edges.append(EdgeCoefficients(p, q))
    return LoopGraphPencil(tuple(edges))


def constant_edge_closed_form(p, q, lam):
    """S, S', C, C' at pi for constant coefficients: y'' = -(lam^2 - 2 lam p - q) y."""
    lam = np.asarray(lam, dtype=complex)
    w = np.sqrt(lam * lam - 2 * lam * p - q)
    small = np.abs(w) < 1e-12
    ws = np.where(small, 1.0, w)
    S = np.where(small, np.pi, np.sin(ws * np.pi) / ws)
    Sp = np.cos(w * np.pi)
    C = np.cos(w * np.pi)
    Cp = np.where(small, 0.0, -ws * np.sin(ws * np.pi))
    return S, Sp, C, Cp


def zero_m2_delta(lam):
    """Characteristic function of the m = 2 zero pencil, written by hand."""
    lam = np.asarray(lam, dtype=complex)
    return np.sin(lam * np.pi) * (3 * np.cos(lam * np.pi) - 2) / lam


def zero_m2_eigenvalues(re_lo, re_hi):
    """Roots of sin(lam pi)(3 cos(lam pi) - 2) in [re_lo, re_hi] (all real)."""
    a = np.arccos(2.0 / 3.0) / np.pi
    out = [float(n) for n in range(int(np.floor(re_lo)) - 1, int(np.ceil(re_hi)) + 2) if n != 0]
    for n in range(int(np.floor(re_lo / 2)) - 1, int(np.ceil(re_hi / 2)) + 2):
        out += [2 * n + a, 2 * n - a]
    return np.sort([x for x in out if re_lo <= x <= re_hi])


def delta_by_formula(S, Sp, C):
    """Characteristic function straight from the per-edge values (edge m is the loop)."""
    m = S.shape[0]
    total = (Sp[m - 1] + C[m - 1] - 2) * np.prod(S[:m - 1], axis=0)
    for j in range(m - 1):
        total = total + Sp[j] * np.prod(np.delete(S, j, axis=0), axis=0)
    return total


def rect_quadrature_inner(f, g, n=4000):
    """int_{-pi}^{pi} f(t) . conj(g(t)) dt by Gauss-Legendre, f and g returning (2, n) arrays."""
    x, w = np.polynomial.legendre.leggauss(n)
    t = np.pi * x
    return np.pi * np.sum(w * np.sum(f(t) * np.conj(g(t)), axis=0))
