"""Recovery of the loop from the other edges, a subspectrum and the signs Omega.

With the loop normalized to zero mean of p, at every eigenvalue

    A_m Khat(lam) + lam B_m That(lam) = G_m(lam),

where lam S_m = sin(lam pi) + Khat and d_m = 2 cos(lam pi) - 2 + That.  The
kernels give S_m(pi, .) and d_m(.), which together with Omega pin down
the loop: at a zero nu of S_m the Wronskian gives C_m S_m' = 1, so
Q = C_m - S_m' = +-sqrt((d_m + 2)^2 - 4) and omega selects the sign.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .characteristic import gm_from_pair, loop_pair_from_sample
from .contour import find_zeros
from .errors import ConditionCViolated, NotNormalized
from .fitting import ChebParams, FitResult, levenberg_marquardt
from .inverse_edge import (DEFAULT_TRUNCATION, KernelPair, ReconstructionSystem, _expand,
                           as_known_pencil, build_rows, default_fit_grid, divided_rows,
                           solve_kernels)
from .kernels import make_basis
from .model import EdgeCoefficients, LoopGraphPencil
from .shooting import DEFAULT_SETTINGS, sample_pencil, shoot
from .spectral import SignSequence, Subspectrum, omega_of, omega_sequence

log = logging.getLogger(__name__)


@dataclass
class LoopSystem(ReconstructionSystem):
    omega: Optional[SignSequence] = None


def assemble_loop_system(known, sub: Subspectrum, omega: SignSequence,
                         truncation=DEFAULT_TRUNCATION, basis="legendre",
                         settings=DEFAULT_SETTINGS) -> LoopSystem:
    """Main equations for (K_m, T_m) from edges 1..m-1 and a subspectrum.

    ``known`` is a pencil (its loop is ignored but must have zero mean) or
    the list of edges 1..m-1.
    """
    pencil = as_known_pencil(known, -1)
    if abs(pencil.loop.alpha) > 1e-10:
        raise NotNormalized("loop mean of p must be zero; apply normalize_shift first",
                            offending=[pencil.m])
    bad = [int(n) for n, w in zip(omega.n, omega.omega) if w == 0]
    if bad:
        raise ConditionCViolated(f"omega_n = 0 for n = {bad}", offending=bad)
    if isinstance(basis, str):
        basis = make_basis(basis, truncation)
    items = _expand(sub)
    lam = np.array([e.lam for e, _ in items], dtype=complex)
    deriv = np.array([j == 1 for _, j in items])
    s = sample_pencil(pencil, lam, bool(deriv.any()), settings,
                      edges=list(range(pencil.m - 1)))
    if deriv.any():
        A, B, dA, dB = loop_pair_from_sample(s, True)
        G, dG = gm_from_pair(lam, A, B, dA, dB)
    else:
        A, B = loop_pair_from_sample(s)
        G = gm_from_pair(lam, A, B)
        dA = dB = dG = np.zeros_like(A)
    cls = np.array([e.cls for e, _ in items])
    a, b, rhs, da, db = divided_rows(lam, cls, deriv, A, B, dA, dB, G, dG, pencil.m, "_m")
    rows = build_rows(basis, lam, a, b, da, db, deriv)
    anchor = np.concatenate([basis.moments(), np.zeros(basis.size)])
    kinds = ["anchor"] + ["theta1" if c == 1 else "theta2" for c in cls]
    labels = [None] + [(e.n, e.k, j) for e, j in items]
    return LoopSystem(basis, np.vstack([anchor[None, :], rows]), np.concatenate([[0.0], rhs]),
                      kinds, labels, np.concatenate([[0.0], lam]), 0.0, ("K", "T"),
                      omega=omega)


def solve_loop_kernels(system: LoopSystem, regularization=None) -> KernelPair:
    """Same contract as ``solve_kernels``."""
    return solve_kernels(system, regularization)


def reconstruct_loop_functions(kernels: KernelPair):
    """Callables lam -> S_m(pi, lam) and lam -> d_m(lam) for the zero-mean loop."""
    K, T = kernels.first, kernels.second

    def lam_S(lam):
        lam = np.asarray(lam, dtype=complex)
        return np.sin(lam * np.pi) + K.transform(lam)

    def S_hat(lam):
        lam = np.asarray(lam, dtype=complex)
        small = np.abs(lam) < 1e-8
        safe = np.where(small, 1.0, lam)
        out = lam_S(safe) / safe
        if np.any(small):
            out = np.where(small, np.pi + K.transform(0.0, order=1), out)
        return out

    def S_hat_prime(lam):
        lam = np.asarray(lam, dtype=complex)
        num = np.pi * np.cos(lam * np.pi) + K.transform(lam, order=1)
        return num / lam - lam_S(lam) / lam ** 2

    def d_hat(lam):
        lam = np.asarray(lam, dtype=complex)
        return 2 * np.cos(lam * np.pi) - 2 + T.transform(lam)

    S_hat.lam_times = lam_S
    S_hat.derivative = S_hat_prime
    return S_hat, d_hat


def q_from_d(d, omega) -> np.ndarray:
    """Q at zeros of S_m from d_m and the sign data: the root of Q^2 = (d+2)^2 - 4 with sign omega."""
    d = np.asarray(d, dtype=complex)
    r = np.sqrt((d + 2) ** 2 - 4)
    w = omega_of(r)
    return np.where(w == np.asarray(omega), r, -r)


def reconstructed_zeros(S_hat, N, height=2.0):
    """Zeros of S_hat with |Re| <= N + 1/2, matched to nonzero integers."""
    def f(z):
        return S_hat(z)

    def fd(z):
        return S_hat(z), S_hat.derivative(z)
    roots, _ = find_zeros(f, fd, (-N - 0.5, N + 0.5, -height, height), spacing=0.2,
                          column_width=1.0)
    z = np.array([r.z for r in roots for _ in range(r.multiplicity)], dtype=complex)
    targets = np.array([n for n in range(-N - 1, N + 2) if n != 0], dtype=float)
    rows, cols = linear_sum_assignment(np.abs(z[:, None] - targets[None, :]) ** 2)
    n = targets[cols].astype(int)
    keep = np.abs(n) <= N
    order = np.argsort(n[keep])
    return n[keep][order], z[rows][keep][order]


@dataclass
class LoopVerification:
    nu_gap: float                  # max |nu_hat - nu| over shared n
    omega_consistent: bool         # reconstructed |Q| nonzero, so omega selects a branch
    q_hat_gap: Optional[float]     # max |Q_hat - Q| against the sign data's Q values
    omega_truth_agrees: Optional[bool]
    S_gap: Optional[float]
    d_gap: Optional[float]
    d_at_nu_min: float             # min |d_hat(nu_hat)|, positive under (C)
    wronskian_at_nu: Optional[float]
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("nu_gap", "omega_consistent", "q_hat_gap",
                                              "omega_truth_agrees", "S_gap", "d_gap",
                                              "d_at_nu_min", "wronskian_at_nu")}
        out.update(self.details)
        return out


def verify_loop_recovery(S_hat, d_hat, omega: SignSequence, truth: Optional[LoopGraphPencil] = None,
                         reach=20.0, n_grid=200, settings=DEFAULT_SETTINGS) -> LoopVerification:
    """Compare reconstructed loop data with the sign data and, if given, the truth."""
    N = int(np.max(np.abs(omega.n)))
    n_hat, nu_hat = reconstructed_zeros(S_hat, N)
    common = {int(n): z for n, z in zip(n_hat, nu_hat)}
    gaps = [abs(common[int(n)] - z) for n, z in zip(omega.n, omega.nu) if int(n) in common]
    missing = [int(n) for n in omega.n if int(n) not in common]
    nu_gap = float(max(gaps)) if gaps and not missing else float("inf")
    d_nu = d_hat(nu_hat)
    w_in = np.array([dict(zip(omega.n.tolist(), omega.omega.tolist())).get(int(n), 0)
                     for n in n_hat])
    r = np.sqrt((d_nu + 2) ** 2 - 4)
    consistent = bool(np.all(omega_of(r) != 0))
    q_hat = q_from_d(d_nu, w_in)
    q_gap = None
    if omega.Q is not None and np.any(omega.Q != 0):
        Qin = dict(zip(omega.n.tolist(), omega.Q))
        q_gap = float(max(abs(q - Qin[int(n)]) for n, q in zip(n_hat, q_hat) if int(n) in Qin))
    agrees = S_gap = d_gap = wr = None
    if truth is not None:
        seq = omega_sequence(truth, N, settings)
        agrees = bool(np.array_equal(seq.n, omega.n) and np.array_equal(seq.omega, omega.omega))
        lam = np.linspace(-reach, reach, n_grid) + 0.0071
        Y = shoot([truth.loop], lam, settings=settings)[:, 0]
        S_gap = float(np.max(np.abs(S_hat(lam) - Y[0])))
        d_gap = float(np.max(np.abs(d_hat(lam) - (Y[1] + Y[2] - 2))))
        Yn = shoot([truth.loop], seq.nu, settings=settings)[:, 0]
        wr = float(np.max(np.abs(Yn[2] * Yn[1] - 1)))
    return LoopVerification(nu_gap, consistent, q_gap, agrees, S_gap, d_gap,
                            float(np.min(np.abs(d_nu))), wr,
                            {"n": [int(v) for v in n_hat], "missing_n": missing})


def fit_loop_coefficients(S_hat, d_hat, omega: SignSequence, basis_degree=10, grid=None,
                          init=None, q_weight=1.0, max_iter=50,
                          settings=DEFAULT_SETTINGS) -> FitResult:
    """Fit (p_m, q_m) to the reconstructed S_m(pi, .), d_m(.) and the signed Q(nu_n).

    S_m and d_m are unchanged when the loop is reflected (t -> pi - t) while
    Q changes sign, so the Q(nu_n) terms built from Omega are what fixes the
    orientation.
    """
    lam = default_fit_grid() if grid is None else np.asarray(grid, dtype=float)
    nu = np.asarray(omega.nu, dtype=complex)
    pts = np.concatenate([lam.astype(complex), nu])
    nl = lam.size
    lamS_t = S_hat.lam_times(lam) if hasattr(S_hat, "lam_times") else lam * S_hat(lam)
    d_t = d_hat(lam)
    Q_t = q_from_d(d_hat(nu), omega.omega)
    weight = 1.0 / np.sqrt(1.0 + lam ** 2 / 100.0)

    def residual(Y):
        S, Sp, C = Y[0], Y[1], Y[2]
        r1 = weight * (lam * S[:, :nl] - lamS_t)
        r2 = weight * (Sp[:, :nl] + C[:, :nl] - 2 - d_t)
        r3 = q_weight * (C[:, nl:] - Sp[:, nl:] - Q_t)
        return np.concatenate([r1, r2, r3], axis=1)

    params = ChebParams(basis_degree)
    x0 = np.zeros(params.n) if init is None else params.vector(init)
    return levenberg_marquardt(residual, params, x0, pts, max_iter=max_iter, settings=settings)


@dataclass
class LoopInversion:
    system: LoopSystem
    kernels: KernelPair
    S_hat: object
    d_hat: object
    verification: Optional[LoopVerification] = None
    fit: Optional[FitResult] = None


def invert_loop(known, sub: Subspectrum, omega: SignSequence, truncation=DEFAULT_TRUNCATION,
                basis="legendre", truth=None, fit=True, fit_degree=10,
                settings=DEFAULT_SETTINGS, regularization=None) -> LoopInversion:
    system = assemble_loop_system(known, sub, omega, truncation, basis, settings)
    kernels = solve_loop_kernels(system, regularization)
    S_hat, d_hat = reconstruct_loop_functions(kernels)
    ver = verify_loop_recovery(S_hat, d_hat, omega, truth, settings=settings)
    result = None
    if fit:
        result = fit_loop_coefficients(S_hat, d_hat, omega, fit_degree,
                                       init=EdgeCoefficients.zero(), settings=settings)
    return LoopInversion(system, kernels, S_hat, d_hat, ver, result)
