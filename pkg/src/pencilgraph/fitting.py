"""Least-squares fit of Chebyshev coefficients against shooting-based targets.

The residual of a trial edge is evaluated by integrating it together with
one forward-difference perturbation per parameter in a single batched
shooting call, which also yields the Jacobian.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import FitDiverged
from .model import EdgeCoefficients
from .shooting import DEFAULT_SETTINGS, shoot

log = logging.getLogger(__name__)


@dataclass
class FitResult:
    edge: EdgeCoefficients
    residual: float              # root-mean-square of the final residual vector
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    status: str = ""             # "tolerance", "stalled" (no decreasing step) or "max_iter"


class ChebParams:
    """Maps a real parameter vector to an edge with Chebyshev p, q of a degree."""

    def __init__(self, degree: int, complex_valued: bool = False):
        self.degree = degree
        self.complex_valued = complex_valued
        self.n = 2 * (degree + 1) * (2 if complex_valued else 1)

    def edge(self, x) -> EdgeCoefficients:
        d = self.degree + 1
        if self.complex_valued:
            z = x[:2 * d] + 1j * x[2 * d:]
            return EdgeCoefficients(z[:d], z[d:])
        return EdgeCoefficients(x[:d], x[d:])

    def vector(self, edge: EdgeCoefficients) -> np.ndarray:
        d = self.degree + 1
        p = np.zeros(d, dtype=complex)
        q = np.zeros(d, dtype=complex)
        p[:min(d, len(edge.p))] = edge.p[:d]
        q[:min(d, len(edge.q))] = edge.q[:d]
        z = np.concatenate([p, q])
        if self.complex_valued:
            return np.concatenate([z.real, z.imag])
        return z.real.copy()


def _as_real(r):
    r = np.asarray(r)
    return np.concatenate([r.real.ravel(), r.imag.ravel()])


def levenberg_marquardt(residual_fn, params: ChebParams, x0, lam, max_iter=50,
                        fd_step=1e-6, tol=1e-13, settings=DEFAULT_SETTINGS) -> FitResult:
    """Minimise ||residual_fn(Y, lam)||^2 over the parameters.

    ``residual_fn(Y)`` receives the shooting output ``Y`` of shape
    ``(4, n_edges, len(lam))`` for a list of edges and returns a residual
    array with one row per edge.
    """
    x = np.asarray(x0, dtype=float).copy()
    lam = np.asarray(lam)

    def evaluate(xs):
        Y = shoot([params.edge(v) for v in xs], lam, settings=settings)
        return np.array([_as_real(r) for r in residual_fn(Y)])

    def jacobian(x):
        h = fd_step * np.maximum(1.0, np.abs(x))
        xs = [x] + [x + h[i] * np.eye(x.size)[i] for i in range(x.size)]
        R = evaluate(xs)
        return R[0], ((R[1:] - R[0]) / h[:, None]).T

    r, J = jacobian(x)
    cost = float(r @ r)
    cost0 = cost
    history = [cost]
    mu = 1e-3
    it = 0
    converged = cost <= tol ** 2 * r.size
    status = "tolerance" if converged else "max_iter"
    while not converged and it < max_iter:
        it += 1
        JTJ = J.T @ J
        g = J.T @ r
        diag = np.diag(JTJ).copy()
        diag[diag == 0] = 1.0
        improved = False
        for _ in range(12):
            try:
                step = np.linalg.solve(JTJ + mu * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                mu *= 10
                continue
            r_new = evaluate([x + step])[0]
            c_new = float(r_new @ r_new)
            if c_new < cost:
                improved = True
                rel = (cost - c_new) / max(cost, 1e-300)
                x = x + step
                mu = max(mu / 3, 1e-12)
                break
            mu *= 4
        if not improved:
            status = "stalled"
            break
        r, J = jacobian(x)
        cost = float(r @ r)
        history.append(cost)
        log.debug("fit iteration %d cost %.3e", it, cost)
        if rel < 1e-10 or np.linalg.norm(step) < 1e-12 * max(1.0, np.linalg.norm(x)):
            converged = True
            status = "tolerance"
    # below this level the residual is integrator noise and may fluctuate
    floor = max(tol, 100 * settings.rtol) ** 2 * r.size
    if cost >= cost0 and cost0 > floor and it > 0:
        raise FitDiverged(f"fit residual did not decrease (cost {cost:.3e})")
    rms = float(np.sqrt(cost / max(1, r.size)))
    converged = converged or status == "stalled" or cost <= tol ** 2 * r.size
    return FitResult(params.edge(x), rms, it, converged, history, status)
