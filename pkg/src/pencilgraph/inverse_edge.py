"""Recovery of the coefficients on boundary edge 1 from a subspectrum.

At every eigenvalue lam of the graph,

    A_1 Khat(lam) + lam B_1 Nhat(lam) = G_1(lam),

where Khat, Nhat are transforms of the kernels of edge 1 and A_1, B_1, G_1
only involve the known edges 2..m and the mean alpha_1.  Dividing by B_1
(or by A_1 where B_1 vanishes) and adding the moment condition
int K_1 = sin(alpha_1 pi) gives a linear system for the kernels.  The
kernels yield S_1(pi, .) and S_1'(pi, .), whose ratio (the Weyl function)
determines p_1, q_1; these are then fitted by least squares.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import null_space

from .characteristic import edge1_pair_from_sample, g1_from_pair
from .errors import BranchSingular, DivisionDegeneracy, MultiplicityTooHigh, RankDeficient
from .fitting import ChebParams, FitResult, levenberg_marquardt
from .kernels import KernelSeries, basis_from_dict, make_basis
from .model import EdgeCoefficients, LoopGraphPencil
from .shooting import DEFAULT_SETTINGS, sample_pencil
from .spectral import Subspectrum, kappa2

log = logging.getLogger(__name__)

DIVISION_TOL = 1e-10
DEFAULT_TRUNCATION = 32
DEFAULT_WINDOW = 24


# alpha_1 ----------------------------------------------------------------------------

def recover_alpha1(beta1: float, alphas_known) -> float:
    """alpha_1 mod 1 from one lattice offset beta and alpha_2..alpha_{m-1}.

    Solves cot((beta - alpha_1) pi) = kappa2(beta) - sum_j cot((beta - alpha_j) pi)
    and returns the representative in [0, 1).
    """
    if abs(np.sin(beta1 * np.pi)) < 1e-12:
        raise BranchSingular(f"beta = {beta1} lies on the integer lattice")
    a = np.real(np.asarray(alphas_known, dtype=complex)).ravel()
    r = kappa2(beta1) - np.sum(1.0 / np.tan((beta1 - a) * np.pi))
    alpha = beta1 - np.arctan2(1.0, r) / np.pi
    return float(alpha - np.floor(alpha))


def estimate_beta(branch, n_min=4, order=4) -> float:
    """Limit of lam_n - 2n along one branch from a tail fit in powers of 1/lam."""
    n = np.array([e.n for e in branch if abs(e.n) >= n_min])
    lam = np.array([e.lam for e in branch if abs(e.n) >= n_min], dtype=complex)
    if n.size < order + 3:
        n = np.array([e.n for e in branch if e.n != 0])
        lam = np.array([e.lam for e in branch if e.n != 0], dtype=complex)
        order = max(0, min(order, n.size - 3))
    y = lam - 2 * n
    X = np.column_stack([np.ones_like(lam)] + [lam ** -j for j in range(1, order + 1)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(coef[0].real)


def alpha1_from_subspectrum(sub: Subspectrum, alphas_known) -> tuple:
    """(alpha_1, beta used, branch label) from the first usable branch."""
    for k in (1, 2, 3, 4):
        beta = estimate_beta(sub.branch(k))
        if abs(np.sin(beta * np.pi)) > 1e-3:
            return recover_alpha1(beta, alphas_known), beta, k
    raise BranchSingular("every branch offset is too close to an integer")


# kernels and the linear system ----------------------------------------------------

@dataclass
class KernelPair:
    """The two unknown functions of one inverse problem (K and N, or K and T)."""

    first: KernelSeries
    second: KernelSeries
    alpha: float = 0.0
    names: tuple = ("K", "N")

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "names": list(self.names),
                "basis": self.first.basis.to_dict(),
                self.names[0]: self.first.to_dict()["coef"],
                self.names[1]: self.second.to_dict()["coef"]}

    @classmethod
    def from_dict(cls, d):
        basis = basis_from_dict(d["basis"])
        names = tuple(d.get("names", ("K", "N")))

        def series(c):
            return KernelSeries(basis, np.array([complex(a, b) for a, b in c]))
        return cls(series(d[names[0]]), series(d[names[1]]), float(d["alpha"]), names)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.first.coef, self.second.coef])

    def __neg__(self):
        return KernelPair(-self.first, -self.second, self.alpha, self.names)


@dataclass
class ReconstructionSystem:
    """Rows acting on the stacked coefficients [first | second] of a KernelPair."""

    basis: object
    matrix: np.ndarray
    rhs: np.ndarray
    kinds: list                 # "anchor", "theta1" or "theta2" per row
    labels: list                # (n, k, derivative order) per row; None for the anchor
    lam: np.ndarray             # eigenvalue behind each row (0 for the anchor)
    alpha: float
    names: tuple = ("K", "N")
    regularization: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def unknowns(self) -> int:
        return self.matrix.shape[1]

    @property
    def anchor(self) -> int:
        return self.kinds.index("anchor")

    def residuals(self, x) -> np.ndarray:
        """|row . x - rhs| for every row (unnormalized)."""
        x = x.vector() if isinstance(x, KernelPair) else np.asarray(x)
        return np.abs(self.matrix @ x - self.rhs)

    def subset(self, keep) -> "ReconstructionSystem":
        keep = np.asarray(keep)
        idx = np.flatnonzero(keep) if keep.dtype == bool else keep
        return ReconstructionSystem(self.basis, self.matrix[idx], self.rhs[idx],
                                    [self.kinds[i] for i in idx], [self.labels[i] for i in idx],
                                    self.lam[idx], self.alpha, self.names, self.regularization)


def as_known_pencil(known, slot: int) -> LoopGraphPencil:
    """Accept a full pencil, or the list of known edges with ``slot`` missing."""
    if isinstance(known, LoopGraphPencil):
        return known
    edges = list(known)
    edges.insert(slot if slot >= 0 else len(edges) + 1 + slot, EdgeCoefficients.zero())
    return LoopGraphPencil(tuple(edges))


def build_rows(basis, lam, a, b, da=None, db=None, deriv=None):
    """Rows of a * Fhat(lam) + b * Ghat(lam) and, for deriv rows, its lam-derivative.

    ``a, b`` are the coefficient functions at lam and ``da, db`` their
    derivatives; ``deriv`` marks rows that differentiate the relation.
    """
    E0 = basis.transform_matrix(lam, 0)
    rows = np.hstack([a[:, None] * E0, b[:, None] * E0])
    if deriv is not None and np.any(deriv):
        i = np.flatnonzero(deriv)
        E1 = basis.transform_matrix(lam[i], 1)
        rows[i] = np.hstack([da[i, None] * E0[i] + a[i, None] * E1,
                             db[i, None] * E0[i] + b[i, None] * E1])
    return rows


def divided_rows(lam, cls, deriv, A, B, dA, dB, G, dG, m, tag=""):
    """Coefficients (a, b), rhs and their lam-derivatives of the divided relation.

    From A Fhat + lam B Ghat = G: first-class rows are divided by B, second-class
    rows by A.  Derivative rows (``deriv``) get the differentiated relation;
    their rhs replaces the plain one.
    """
    t1, t2 = cls == 1, cls == 2
    scale = np.maximum(1.0, np.abs(lam))
    # B carries m-1 factors of size 1/|lam|, A one fewer
    if np.any(np.abs(B[t1]) * scale[t1] ** (m - 1) < DIVISION_TOL):
        raise DivisionDegeneracy(f"B{tag} vanishes at a first-class eigenvalue")
    if np.any(np.abs(A[t2]) * scale[t2] ** (m - 2) < DIVISION_TOL):
        raise DivisionDegeneracy(f"A{tag} vanishes at a second-class eigenvalue")
    a, b, rhs = np.empty_like(lam), np.empty_like(lam), np.empty_like(lam)
    da, db, drhs = np.zeros_like(lam), np.zeros_like(lam), np.zeros_like(lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        a[t1] = A[t1] / B[t1]
        b[t1] = lam[t1]
        rhs[t1] = G[t1] / B[t1]
        da[t1] = (dA[t1] * B[t1] - A[t1] * dB[t1]) / B[t1] ** 2
        db[t1] = 1.0
        drhs[t1] = (dG[t1] * B[t1] - G[t1] * dB[t1]) / B[t1] ** 2
        a[t2] = 1.0
        b[t2] = lam[t2] * B[t2] / A[t2]
        rhs[t2] = G[t2] / A[t2]
        db[t2] = (B[t2] + lam[t2] * dB[t2]) / A[t2] - lam[t2] * B[t2] * dA[t2] / A[t2] ** 2
        drhs[t2] = (dG[t2] * A[t2] - G[t2] * dA[t2]) / A[t2] ** 2
    rhs = np.where(deriv, drhs, rhs)
    return a, b, rhs, da, db


def _expand(sub: Subspectrum):
    """Rows to emit: (entry, derivative order) for each distinct value."""
    out = []
    for e, mult in sub.groups():
        if mult > 2:
            raise MultiplicityTooHigh(f"value {e.lam} repeated {mult} times in the subspectrum")
        for j in range(mult):
            out.append((e, j))
    return out


def assemble_system(known, sub: Subspectrum, alpha1: float, truncation=DEFAULT_TRUNCATION,
                    basis="legendre", settings=DEFAULT_SETTINGS) -> ReconstructionSystem:
    """Main equations for (K_1, N_1) from the known edges and a subspectrum."""
    pencil = as_known_pencil(known, 0)
    if isinstance(basis, str):
        basis = make_basis(basis, truncation)
    items = _expand(sub)
    lam = np.array([e.lam for e, _ in items], dtype=complex)
    deriv = np.array([j == 1 for _, j in items])
    s = sample_pencil(pencil, lam, bool(deriv.any()), settings, edges=list(range(1, pencil.m)))
    if deriv.any():
        A, B, dA, dB = edge1_pair_from_sample(s, True)
        G, dG = g1_from_pair(lam, alpha1, A, B, dA, dB)
    else:
        A, B = edge1_pair_from_sample(s)
        G = g1_from_pair(lam, alpha1, A, B)
        dA = dB = dG = np.zeros_like(A)
    cls = np.array([e.cls for e, _ in items])
    a, b, rhs, da, db = divided_rows(lam, cls, deriv, A, B, dA, dB, G, dG, pencil.m, "_1")
    rows = build_rows(basis, lam, a, b, da, db, deriv)
    anchor = np.concatenate([basis.moments(), np.zeros(basis.size)])
    matrix = np.vstack([anchor[None, :], rows])
    rhs = np.concatenate([[np.sin(alpha1 * np.pi)], rhs])
    kinds = ["anchor"] + ["theta1" if c == 1 else "theta2" for c in cls]
    labels = [None] + [(e.n, e.k, j) for e, j in items]
    return ReconstructionSystem(basis, matrix, rhs, kinds, labels,
                               np.concatenate([[0.0], lam]), alpha1, ("K", "N"))


def solve_kernels(system: ReconstructionSystem, regularization: Optional[float] = None,
                  auto_escalate=True) -> KernelPair:
    """Least-squares solution with the moment row imposed exactly.

    Rows are equilibrated to unit norm.  The constrained problem is reduced
    to the null space of the anchor row and solved through an SVD; a
    Tikhonov term is added when requested, or automatically (1e-10) when the
    smallest singular value drops below 1e-12.
    """
    M, r = system.matrix, system.rhs
    n = system.unknowns
    ia = system.anchor
    others = np.array([i for i in range(M.shape[0]) if i != ia])
    if others.size + 1 < n:
        raise RankDeficient(f"{others.size + 1} equations for {n} unknowns")
    c, d = M[ia], r[ia]
    x0 = np.conj(c) * d / np.vdot(c, c).real
    Z = null_space(c[None, :])
    W = M[others]
    w = np.linalg.norm(W, axis=1)
    w[w == 0] = 1.0
    A = (W @ Z) / w[:, None]
    b = (r[others] - W @ x0) / w
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    reg = 0.0 if regularization is None else float(regularization)
    if regularization is None and auto_escalate and s[-1] < 1e-12 * s[0]:
        reg = 1e-10
        log.info("smallest singular value %.2e; Tikhonov 1e-10 enabled", s[-1])
    noise = max(A.shape) * np.finfo(float).eps * s[0]
    if reg == 0.0 and s[-1] < noise:
        raise RankDeficient(f"smallest singular value {s[-1]:.2e} below noise level {noise:.2e}")
    if reg > 0.0:
        filt = s / (s * s + reg)
    else:
        filt = 1.0 / s
    y = Vh.conj().T @ (filt * (U.conj().T @ b))
    x = x0 + Z @ y
    system.regularization = reg
    res = system.residuals(x)
    system.diagnostics = {
        "rows": int(M.shape[0]), "unknowns": int(n),
        "singular_min": float(s[-1]), "singular_max": float(s[0]),
        "condition": float(s[0] / s[-1]) if s[-1] > 0 else float("inf"),
        "residual_max": float(res.max()), "residual_rms": float(np.sqrt(np.mean(res ** 2))),
        "anchor_residual": float(res[ia]), "regularization": reg,
    }
    half = system.basis.size
    return KernelPair(KernelSeries(system.basis, x[:half]), KernelSeries(system.basis, x[half:]),
                      system.alpha, system.names)


# reconstruction and fit ----------------------------------------------------------------

def reconstruct_edge_functions(kernels: KernelPair, alpha1: float):
    """Callables lam -> S_1(pi, lam) and lam -> S_1'(pi, lam) from the kernels."""
    K, N = kernels.first, kernels.second

    def lam_S(lam):
        lam = np.asarray(lam, dtype=complex)
        return np.sin((lam - alpha1) * np.pi) + K.transform(lam)

    def S_hat(lam):
        lam = np.asarray(lam, dtype=complex)
        small = np.abs(lam) < 1e-8
        safe = np.where(small, 1.0, lam)
        out = lam_S(safe) / safe
        if np.any(small):
            # removable singularity: the numerator vanishes at 0 by the moment condition
            limit = np.pi * np.cos(alpha1 * np.pi) + K.transform(0.0, order=1)
            out = np.where(small, limit, out)
        return out

    def Sp_hat(lam):
        lam = np.asarray(lam, dtype=complex)
        return np.cos((lam - alpha1) * np.pi) + N.transform(lam)

    S_hat.lam_times = lam_S
    return S_hat, Sp_hat


def default_fit_grid(n=121, reach=30.0):
    """Real sample points for coefficient fits, offset to avoid lattice points."""
    return np.linspace(-reach, reach, n) + 0.0137


def fit_edge_coefficients(S1_hat, S1p_hat, basis_degree=10, grid=None, init=None,
                          complex_valued=False, max_iter=50,
                          settings=DEFAULT_SETTINGS) -> FitResult:
    """Fit (p_1, q_1) so that shooting reproduces the reconstructed Weyl data.

    The residual is the cross-multiplied mismatch
    lam (Shat'(lam) S(lam) - Shat(lam) S'(lam)), which vanishes exactly when
    the Weyl functions agree and has no poles.  ``init`` is an
    EdgeCoefficients start (default: p constant equal to the mean implied by
    ``S1_hat`` if it carries one, else zero).
    """
    lam = default_fit_grid() if grid is None else np.asarray(grid, dtype=float)
    lamS_t = getattr(S1_hat, "lam_times", None)
    lamS_t = lamS_t(lam) if lamS_t is not None else lam * S1_hat(lam)
    Sp_t = S1p_hat(lam)
    weight = 1.0 / np.sqrt(1.0 + lam ** 2 / 100.0)

    def residual(Y):
        S, Sp = Y[0], Y[1]
        return weight * (Sp_t * (lam * S) - lamS_t * Sp)

    params = ChebParams(basis_degree, complex_valued)
    x0 = np.zeros(params.n) if init is None else params.vector(init)
    return levenberg_marquardt(residual, params, x0, lam, max_iter=max_iter, settings=settings)


@dataclass
class EdgeInversion:
    alpha1: float
    beta_used: float
    system: ReconstructionSystem
    kernels: KernelPair
    S_hat: object
    Sp_hat: object
    fit: Optional[FitResult] = None


def invert_edge(known, sub: Subspectrum, truncation=DEFAULT_TRUNCATION, basis="legendre",
                alpha1=None, fit_degree=10, fit=True, settings=DEFAULT_SETTINGS,
                regularization=None) -> EdgeInversion:
    """Full pipeline: alpha_1, kernels, S_1(pi,.), S_1'(pi,.) and optionally (p_1, q_1)."""
    pencil = as_known_pencil(known, 0)
    alphas_known = pencil.alphas[1:pencil.m - 1]
    beta = float("nan")
    if alpha1 is None:
        alpha1, beta, _ = alpha1_from_subspectrum(sub, alphas_known)
    system = assemble_system(pencil, sub, alpha1, truncation, basis, settings)
    kernels = solve_kernels(system, regularization)
    S_hat, Sp_hat = reconstruct_edge_functions(kernels, alpha1)
    result = None
    if fit:
        result = fit_edge_coefficients(S_hat, Sp_hat, fit_degree,
                                       init=EdgeCoefficients.constant(alpha1, 0.0),
                                       settings=settings)
    return EdgeInversion(alpha1, beta, system, kernels, S_hat, Sp_hat, result)
