"""Initial value problems for -y'' + q y + 2 lam p y = lam^2 y on [0, pi].

S is the solution with S(0)=0, S'(0)=1 and C the one with C(0)=1, C'(0)=0.
Many (edge, lam) members are integrated together as one vector ODE with a
shared adaptive step, which is far cheaper than one solver call per member.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import DOP853

from .errors import StepFailure
from .model import EdgeCoefficients, LoopGraphPencil


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-11
    atol: float = 1e-15
    max_steps: int = 200_000
    chunk: int = 2048


DEFAULT_SETTINGS = IntegratorSettings()


class _MaxNormDOP853(DOP853):
    # The stock error norm is an RMS over all components, so a wide batch lets
    # a few hard members hide behind many easy ones.  Use the worst component.
    def _estimate_error_norm(self, K, h, scale):
        err5 = np.abs(K.T @ self.E5) / scale
        err3 = np.abs(K.T @ self.E3) / scale
        e5 = err5 * err5
        denom = e5 + 0.01 * err3 * err3
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(denom > 0, e5 / np.sqrt(denom), 0.0)
        return np.abs(h) * float(np.max(ratio)) if ratio.size else 0.0


@dataclass
class SolutionSample:
    """Values at x = pi of the fundamental solutions on every edge.

    Arrays have shape ``(m,) + lam.shape``.  The ``d*`` fields are the
    derivatives with respect to lam and are ``None`` unless requested.
    """

    lam: np.ndarray
    S: np.ndarray
    Sp: np.ndarray
    C: np.ndarray
    Cp: np.ndarray
    dS: Optional[np.ndarray] = None
    dSp: Optional[np.ndarray] = None
    dC: Optional[np.ndarray] = None
    dCp: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return self.S.shape[0]

    @property
    def has_derivatives(self) -> bool:
        return self.dS is not None


def _integrate_members(P, Q, lam, deriv, settings):
    """Integrate a batch.  P, Q: (nk, U) Chebyshev columns; lam, col: (B,)."""
    lam, col = lam
    B = lam.size
    nk = P.shape[0]
    ns = 8 if deriv else 4
    k = np.arange(nk)

    def rhs(t, y):
        x = min(1.0, max(-1.0, 2.0 * t / np.pi - 1.0))
        T = np.cos(k * np.arccos(x))
        p = (T @ P)[col]
        q = (T @ Q)[col]
        Y = y.reshape(ns, B)
        V = q + 2.0 * lam * p - lam * lam
        out = np.empty_like(Y)
        out[0] = Y[1]
        out[1] = V * Y[0]
        out[2] = Y[3]
        out[3] = V * Y[2]
        if deriv:
            W = 2.0 * p - 2.0 * lam
            out[4] = Y[5]
            out[5] = V * Y[4] + W * Y[0]
            out[6] = Y[7]
            out[7] = V * Y[6] + W * Y[2]
        return out.ravel()

    y0 = np.zeros((ns, B), dtype=complex)
    y0[1] = 1.0
    y0[2] = 1.0
    solver = _MaxNormDOP853(rhs, 0.0, y0.ravel(), np.pi,
                            rtol=settings.rtol, atol=settings.atol)
    steps = 0
    while solver.status == "running":
        if steps >= settings.max_steps:
            raise StepFailure(f"step budget {settings.max_steps} exhausted",
                              lam=lam[np.argmax(np.abs(lam))])
        solver.step()
        steps += 1
    if solver.status != "finished":
        raise StepFailure(f"integrator failed: {solver.message}",
                          lam=lam[np.argmax(np.abs(lam))])
    return solver.y.reshape(ns, B)


def shoot(edges, lam, deriv=False, settings: IntegratorSettings = DEFAULT_SETTINGS):
    """Integrate every edge at every lam.

    Returns an array of shape ``(ns, len(edges), lam.size)`` with rows
    S, S', C, C' (and dS, dS', dC, dC' when ``deriv``).
    """
    lam = np.asarray(lam, dtype=complex).ravel()
    edges = list(edges)
    nk = max(max(len(e.p), len(e.q)) for e in edges)
    P = np.zeros((nk, len(edges)), dtype=complex)
    Q = np.zeros((nk, len(edges)), dtype=complex)
    for j, e in enumerate(edges):
        P[:len(e.p), j] = e.p
        Q[:len(e.q), j] = e.q
    ns = 8 if deriv else 4
    out = np.empty((ns, len(edges), lam.size), dtype=complex)
    if lam.size == 0:
        return out
    # members sorted by |lam| so each chunk has a similar step demand
    mem_edge = np.repeat(np.arange(len(edges)), lam.size)
    mem_lam = np.tile(np.arange(lam.size), len(edges))
    order = np.lexsort((mem_edge, np.abs(lam[mem_lam])))
    for start in range(0, order.size, settings.chunk):
        sel = order[start:start + settings.chunk]
        cols, col = np.unique(mem_edge[sel], return_inverse=True)
        try:
            Y = _integrate_members(P[:, cols], Q[:, cols], (lam[mem_lam[sel]], col),
                                   deriv, settings)
        except StepFailure as exc:
            if len(cols) == 1:
                exc.edge = int(cols[0]) + 1
            raise
        out[:, mem_edge[sel], mem_lam[sel]] = Y
    return out


def sample_pencil(pencil: LoopGraphPencil, lam, with_lambda_derivative=False,
                  settings: IntegratorSettings = DEFAULT_SETTINGS,
                  edges=None) -> SolutionSample:
    """Shoot all (or the listed 0-based) edges of ``pencil`` at the given lam values."""
    lam_arr = np.asarray(lam, dtype=complex)
    chosen = pencil.edges if edges is None else [pencil.edges[j] for j in edges]
    Y = shoot(chosen, lam_arr, with_lambda_derivative, settings)
    shape = (len(chosen),) + lam_arr.shape
    parts = [Y[i].reshape(shape) for i in range(Y.shape[0])]
    return SolutionSample(lam_arr, *parts)


def integrate_edge(edge: EdgeCoefficients, lam, with_lambda_derivative=False,
                   settings: IntegratorSettings = DEFAULT_SETTINGS) -> dict:
    """S, S', C, C' at x = pi for one edge; arrays follow the shape of ``lam``."""
    lam_arr = np.asarray(lam, dtype=complex)
    Y = shoot([edge], lam_arr, with_lambda_derivative, settings)
    names = ("S", "Sp", "C", "Cp", "dS", "dSp", "dC", "dCp")
    res = {names[i]: Y[i, 0].reshape(lam_arr.shape) for i in range(Y.shape[0])}
    if lam_arr.ndim == 0:
        res = {k: complex(v) for k, v in res.items()}
    return res


def wronskian_defect(sample, relative=False) -> np.ndarray:
    """|C S' - C' S - 1| elementwise; accepts a SolutionSample or a dict.

    With ``relative=True`` the defect is divided by |C S'| + |C' S|, the size
    of the terms that cancel.  Far off the real axis those terms grow like
    exp(2 pi |Im lam|) and the absolute defect is limited by roundoff.
    """
    if isinstance(sample, dict):
        S, Sp, C, Cp = (np.asarray(sample[k]) for k in ("S", "Sp", "C", "Cp"))
    else:
        S, Sp, C, Cp = sample.S, sample.Sp, sample.C, sample.Cp
    d = np.abs(C * Sp - Cp * S - 1.0)
    if relative:
        d = d / np.maximum(np.abs(C * Sp) + np.abs(Cp * S), 1.0)
    return d


def closed_form(p, q, lam):
    """S, S', C, C' at pi for constant coefficients, omega^2 = lam^2 - 2 lam p - q."""
    lam = np.asarray(lam, dtype=complex)
    w = np.sqrt(lam * lam - 2.0 * lam * p - q)
    small = np.abs(w) < 1e-8
    ws = np.where(small, 1.0, w)
    S = np.where(small, np.pi - w * w * np.pi ** 3 / 6, np.sin(ws * np.pi) / ws)
    C = np.cos(w * np.pi)
    Cp = -w * np.sin(w * np.pi)
    return {"S": S, "Sp": C, "C": C, "Cp": Cp}
