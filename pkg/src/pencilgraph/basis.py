"""Numerical probes of completeness and the Riesz-basis property.

Elements are two-component functions on [-pi, pi] of the form

    v(t) = (a + b (i t)) exp(i mu t),   a, b in C^2,

which covers the eigenvalue system v(t) = [S_1'(pi, lam), -lam S_1(pi, lam)]
exp(i lam t), its lam-derivatives at double values, and the unperturbed
system [cos((beta_k - alpha_1) pi), -sin((beta_k - alpha_1) pi)] exp(i(2n + beta_k) t).
All inner products are closed forms in mu, so Gram matrices carry no
quadrature error.  The results are finite-window evidence only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SingularGram
from .kernels import exp_inner, exp_inner_dt, exp_inner_dt2
from .model import LoopGraphPencil
from .shooting import DEFAULT_SETTINGS, sample_pencil

SINGULAR_TOL = 1e-12


@dataclass
class ElementSet:
    """Elements (a + b i t) exp(i mu t) with labels."""

    a: np.ndarray               # (n, 2)
    b: np.ndarray               # (n, 2)
    mu: np.ndarray              # (n,)
    labels: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.mu.size

    def gram(self, other: Optional["ElementSet"] = None) -> np.ndarray:
        """G[r, s] = (u_r, w_s) = int u_r . conj(w_s) dt."""
        w = self if other is None else other
        mu_r, mu_s = self.mu[:, None], w.mu[None, :]
        I0 = exp_inner(mu_s, mu_r)
        I1 = exp_inner_dt(mu_s, mu_r)
        I2 = exp_inner_dt2(mu_s, mu_r)
        aa = self.a @ w.a.conj().T
        ab = self.a @ w.b.conj().T
        ba = self.b @ w.a.conj().T
        bb = self.b @ w.b.conj().T
        # conj(i t) = -(i t): terms with the conjugated factor change sign
        return aa * I0 + (ba - ab) * I1 - bb * I2

    def norms(self) -> np.ndarray:
        return np.sqrt(np.real(np.diag(self.gram())))

    def subset(self, idx) -> "ElementSet":
        idx = list(idx)
        return ElementSet(self.a[idx], self.b[idx], self.mu[idx], [self.labels[i] for i in idx])


def distances(u: ElementSet, w: ElementSet) -> np.ndarray:
    """||u_r - w_r|| for paired elements."""
    uu = np.real(np.einsum("ii->i", u.gram()))
    ww = np.real(np.einsum("ii->i", w.gram()))
    uw = np.array([u.subset([r]).gram(w.subset([r]))[0, 0] for r in range(u.size)])
    return np.sqrt(np.maximum(uu + ww - 2 * np.real(uw), 0.0))


def unperturbed_elements(index, betas, alpha1) -> ElementSet:
    """v0_{nk}(t) = [cos((beta_k - alpha_1) pi), -sin((beta_k - alpha_1) pi)] exp(i (2n + beta_k) t)."""
    betas = np.asarray(betas, dtype=float)
    n = np.array([i[0] for i in index])
    k = np.array([i[1] for i in index])
    ph = (betas[k - 1] - alpha1) * np.pi
    a = np.stack([np.cos(ph), -np.sin(ph)], axis=1).astype(complex)
    return ElementSet(a, np.zeros_like(a), (2 * n + betas[k - 1]).astype(complex),
                      [(int(a_), int(b_)) for a_, b_ in zip(n, k)])


def lattice_elements(index, betas) -> ElementSet:
    """Scalar exponentials e_{nk}(t) = exp(i (4n + 2 beta_k) t), stored in the first component."""
    betas = np.asarray(betas, dtype=float)
    n = np.array([i[0] for i in index])
    k = np.array([i[1] for i in index])
    a = np.zeros((n.size, 2), dtype=complex)
    a[:, 0] = 1.0
    return ElementSet(a, np.zeros_like(a), (4 * n + 2 * betas[k - 1]).astype(complex),
                      [(int(a_), int(b_)) for a_, b_ in zip(n, k)])


def _edge_values(source, lam, h=1e-5, settings=DEFAULT_SETTINGS):
    """S_1(pi, lam), S_1'(pi, lam) and their lam-derivatives."""
    lam = np.asarray(lam, dtype=complex)
    if isinstance(source, LoopGraphPencil):
        s = sample_pencil(source, lam, True, settings, edges=[0])
        return s.S[0], s.Sp[0], s.dS[0], s.dSp[0]
    S, Sp = source
    dS = (S(lam + h) - S(lam - h)) / (2 * h)
    dSp = (Sp(lam + h) - Sp(lam - h)) / (2 * h)
    return S(lam), Sp(lam), dS, dSp


@dataclass
class BasisProbe:
    """Eigenvalue system V, unperturbed system V0, their pairing and Gram data."""

    V: ElementSet
    V0: ElementSet
    pairs: list                 # (index into V, index into V0) for simple values
    alpha1: float
    betas: np.ndarray
    window: int

    def gram(self, which="V", normalized=True) -> np.ndarray:
        E = self.V if which == "V" else self.V0
        G = E.gram()
        if normalized:
            d = 1.0 / np.sqrt(np.real(np.diag(G)))
            G = d[:, None] * G * d[None, :]
        return G

    def closeness(self) -> dict:
        """Squared distances ||v_{nk} - v0_{nk}||^2 and their tail sums by |n|."""
        iv = [p[0] for p in self.pairs]
        i0 = [p[1] for p in self.pairs]
        d2 = distances(self.V.subset(iv), self.V0.subset(i0)) ** 2
        n = np.array([abs(self.V0.labels[j][0]) for j in i0])
        ns = np.arange(0, self.window + 1)
        per_n = np.array([d2[n == v].sum() for v in ns])
        tails = np.array([per_n[ns >= v].sum() for v in ns])
        fit = ns >= max(2, self.window // 4)
        slope = float(np.polyfit(np.log(ns[fit]), np.log(per_n[fit] + 1e-300), 1)[0]) \
            if fit.sum() >= 2 else float("nan")
        return {"n": ns, "per_n": per_n, "tail": tails, "decay_exponent": slope}


def build_probe(sub, source, alpha1, betas=None, window=None,
                settings=DEFAULT_SETTINGS) -> BasisProbe:
    """Eigenvalue and unperturbed systems over |n| <= window.

    ``source`` is a pencil (edge 1 is shot) or a pair of callables
    (S_1(pi, .), S_1'(pi, .)), e.g. a reconstruction.  ``betas`` are the
    offsets of branches k = 1..4 (default: those stored on ``sub``).
    """
    betas = np.asarray(sub.branch_betas if betas is None else betas, dtype=float)
    window = sub.N if window is None else int(window)
    groups = [(e, c) for e, c in sub.groups() if abs(e.n) <= window]
    lam = np.array([e.lam for e, _ in groups], dtype=complex)
    S, Sp, dS, dSp = _edge_values(source, lam, settings=settings)
    a_rows, b_rows, mu, labels = [], [], [], []
    simple = {}
    for i, (e, c) in enumerate(groups):
        a_rows.append([Sp[i], -lam[i] * S[i]])
        b_rows.append([0.0, 0.0])
        mu.append(lam[i])
        labels.append((e.n, e.k, 0))
        if c == 1:
            simple[(e.n, e.k)] = len(mu) - 1
        else:
            a_rows.append([dSp[i], -S[i] - lam[i] * dS[i]])
            b_rows.append([Sp[i], -lam[i] * S[i]])
            mu.append(lam[i])
            labels.append((e.n, e.k, 1))
    V = ElementSet(np.array(a_rows, dtype=complex), np.array(b_rows, dtype=complex),
                   np.array(mu, dtype=complex), labels)
    index = sorted((e.n, e.k) for e in sub.entries if abs(e.n) <= window)
    V0 = unperturbed_elements(index, betas, alpha1)
    pairs = [(simple[ix], j) for j, ix in enumerate(index) if ix in simple]
    return BasisProbe(V, V0, pairs, float(alpha1), betas, window)


def frame_bounds(probe, which="V"):
    """(M1, M2, M2/M1) from the normalized Gram matrix of the chosen system."""
    G = probe.gram(which) if isinstance(probe, BasisProbe) else np.asarray(probe)
    w = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    M1, M2 = float(w[0]), float(w[-1])
    if M1 <= SINGULAR_TOL:
        raise SingularGram(f"smallest Gram eigenvalue {M1:.3e}")
    return M1, M2, M2 / M1


def frame_bound_profile(sub, source, alpha1, windows, betas=None, which="V",
                        settings=DEFAULT_SETTINGS) -> list:
    """Frame bounds for a sequence of growing windows."""
    out = []
    probe = build_probe(sub, source, alpha1, betas, max(windows), settings)
    for w in windows:
        E = probe.V if which == "V" else probe.V0
        keep = [i for i, lab in enumerate(E.labels) if abs(lab[0]) <= w]
        G = E.subset(keep).gram()
        d = 1.0 / np.sqrt(np.real(np.diag(G)))
        M1, M2, cond = frame_bounds(d[:, None] * G * d[None, :])
        out.append({"window": int(w), "size": len(keep), "M1": M1, "M2": M2, "condition": cond})
    return out


def gram_closed_form(index, betas) -> np.ndarray:
    """Unperturbed Gram entries sin(2(b_l - b_j)pi)/(2k - 2n + b_l - b_j), diagonal 2 pi."""
    betas = np.asarray(betas, dtype=float)
    n = np.array([i[0] for i in index], dtype=float)
    b = betas[np.array([i[1] for i in index]) - 1]
    db = b[None, :] - b[:, None]
    den = 2 * (n[None, :] - n[:, None]) + db
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.sin(2 * db * np.pi) / den
    same = np.abs(den) < 1e-14
    G[same] = 2 * np.pi
    return G


def sine_type_check(betas, heights=(2.0, 4.0, 8.0), n_range=8, samples=801) -> dict:
    """Separation of {4n + 2 beta_j} and the strip bounds of prod sin((lam - 2 beta_j) pi / 4).

    The product has zeros exactly at 4n + 2 beta_j and period 4 up to sign,
    so one period of real parts is sampled on each line |Im lam| = K.
    """
    b = np.asarray(betas, dtype=float)
    pts = np.sort((4 * np.arange(-n_range, n_range + 1)[:, None] + 2 * b[None, :]).ravel())
    sep = float(np.min(np.diff(pts))) if pts.size > 1 else float("inf")
    x = np.linspace(0.0, 4.0, samples)
    lines = {}
    for K in heights:
        vals = []
        for sgn in (1.0, -1.0):
            lam = x + 1j * sgn * K
            S = np.prod(np.sin((lam[:, None] - 2 * b[None, :]) * np.pi / 4), axis=1)
            vals.append(np.abs(S) * np.exp(-np.pi * K))
        v = np.concatenate(vals)
        lines[K] = {"lower": float(v.min()), "upper": float(v.max()),
                    "ratio": float(v.max() / v.min()) if v.min() > 0 else float("inf")}
    ok = sep > 1e-12 and all(l["lower"] > 0 for l in lines.values())
    return {"separation": sep, "lines": lines, "passes": bool(ok)}


def gram_equality_gap(index, betas, alpha1) -> dict:
    """Entrywise gaps between the unperturbed Gram matrix, the lattice Gram and the closed form."""
    G0 = unperturbed_elements(index, betas, alpha1).gram()
    GE = lattice_elements(index, betas).gram()
    GC = gram_closed_form(index, betas)
    return {"v0_vs_lattice": float(np.max(np.abs(G0 - GE))),
            "v0_vs_closed_form": float(np.max(np.abs(G0 - GC))),
            "diagonal_gap": float(np.max(np.abs(np.diag(G0) - 2 * np.pi))),
            "hermitian_gap": float(np.max(np.abs(G0 - G0.conj().T)))}
