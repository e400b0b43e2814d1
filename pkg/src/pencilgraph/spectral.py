"""Eigenvalues of the loop graph, their asymptotic numbering and subspectra.

Eigenvalues are zeros of Delta and, for large |n|, sit near the lattice
2n + beta_k where beta_k are the zeros in [-1, 1) of the 2-periodic function
d(lambda) built from the means alpha_j.  The zeros nu_n of S_m(pi, .) on the
loop and the signs omega_n of Q(nu_n) form the extra data for loop recovery.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from .characteristic import delta, dm
from .contour import find_zeros
from .errors import (AssignmentAmbiguous, AssumptionBViolated, AssumptionDViolated,
                     DegenerateAlphas, LemmaViolated, NotNormalized)
from .model import MOD1_TOL, AssumptionReport, LoopGraphPencil, dist_to_int
from .shooting import DEFAULT_SETTINGS, IntegratorSettings, sample_pencil, shoot

log = logging.getLogger(__name__)

ZERO_THRESHOLD = 1e-8
OMEGA_ZERO = 1e-9


# betas ----------------------------------------------------------------------------

def kappa1(alphas, lam):
    lam = np.asarray(lam, dtype=complex)[..., None]
    return np.sum(1.0 / np.tan((lam - np.asarray(alphas)) * np.pi), axis=-1)


def kappa2(lam):
    """2(1 - cos lam pi)/sin lam pi, i.e. 2 tan(lam pi/2)."""
    return 2 * np.tan(np.asarray(lam) * np.pi / 2)


def d_function(alphas, lam):
    """Leading-order characteristic function built from the edge means.

    ``alphas`` holds alpha_1..alpha_{m-1} (the loop mean is zero).
    """
    a = np.asarray(alphas, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    s = np.sin((lam[..., None] - a) * np.pi)
    c = np.cos((lam[..., None] - a) * np.pi)
    total = 2 * (np.cos(lam * np.pi) - 1) * np.prod(s, axis=-1)
    for j in range(a.size):
        others = np.prod(np.delete(s, j, axis=-1), axis=-1)
        total = total + c[..., j] * others * np.sin(lam * np.pi)
    return total


@dataclass
class BetaSet:
    """Lattice offsets beta_1..beta_2m with beta_2m = 0.

    ``betas[k-1]`` is beta_k.  ``solve_betas`` returns them in increasing
    order; numbering a spectrum relabels them (see ``number_eigenvalues``).
    """

    betas: np.ndarray
    alphas: np.ndarray

    @property
    def m(self) -> int:
        return self.betas.size // 2

    def residuals(self) -> np.ndarray:
        return np.abs(d_function(self.alphas, self.betas))

    def to_dict(self) -> dict:
        return {"betas": [float(b) for b in self.betas],
                "alphas": [float(a) for a in self.alphas]}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["betas"], dtype=float), np.asarray(d["alphas"], dtype=float))


def reduce_alphas(alphas) -> np.ndarray:
    """Real alphas reduced into [0, 1)."""
    a = np.real(np.asarray(alphas, dtype=complex))
    return a - np.floor(a)


def solve_betas(alphas, xtol=1e-15) -> BetaSet:
    """Zeros of kappa1 - kappa2 on the 2m-1 monotonicity intervals, plus 0.

    ``alphas`` are alpha_1..alpha_{m-1}; they must be distinct mod 1 and
    not congruent to 0.
    """
    a = np.sort(reduce_alphas(alphas))
    full = np.concatenate([a, [0.0]])
    pairs = [[i + 1, j + 1] for i in range(full.size) for j in range(i + 1, full.size)
             if dist_to_int(full[i] - full[j]) <= MOD1_TOL]
    if pairs:
        raise DegenerateAlphas("edge means coincide mod 1", offending=pairs)
    edges = np.concatenate([[-1.0], a - 1, a, [1.0]])
    roots = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        eps = 1e-13 * max(1.0, hi - lo)

        def h(x):
            return float(np.real(kappa1(a, x)) - kappa2(x))
        roots.append(brentq(h, lo + eps, hi - eps, xtol=xtol, rtol=4 * np.finfo(float).eps,
                            maxiter=500))
    betas = np.array(roots + [0.0])
    if np.min(np.abs(betas[:-1])) < 1e-10:
        warnings.warn("a root of kappa1 = kappa2 coincides with beta_2m = 0",
                      AssignmentAmbiguous, stacklevel=2)
    return BetaSet(betas, np.asarray(alphas, dtype=float))


# spectrum ---------------------------------------------------------------------------

@dataclass
class Eigenvalue:
    lam: complex
    multiplicity: int = 1
    residual: float = 0.0
    n: Optional[int] = None
    k: Optional[int] = None

    @property
    def index(self):
        return None if self.n is None else (self.n, self.k)

    def to_dict(self) -> dict:
        return {"index": None if self.n is None else [self.n, self.k],
                "lambda": [float(self.lam.real), float(self.lam.imag)],
                "multiplicity": self.multiplicity, "residual": float(self.residual)}

    @classmethod
    def from_dict(cls, d):
        idx = d.get("index")
        return cls(complex(*d["lambda"]), int(d["multiplicity"]), float(d["residual"]),
                   None if idx is None else int(idx[0]), None if idx is None else int(idx[1]))


@dataclass
class Spectrum:
    """Eigenvalues found in ``window``; numbered entries repeat multiple values."""

    entries: list
    window: tuple
    betas: Optional[BetaSet] = None

    @property
    def values(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries], dtype=complex)

    def get(self, n, k) -> Eigenvalue:
        for e in self.entries:
            if e.n == n and e.k == k:
                return e
        raise KeyError((n, k))

    def indexed(self) -> dict:
        return {e.index: e for e in self.entries if e.n is not None}

    def to_dict(self) -> dict:
        return {"window": [float(w) for w in self.window],
                "betas": None if self.betas is None else self.betas.to_dict(),
                "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d):
        betas = None if d.get("betas") is None else BetaSet.from_dict(d["betas"])
        return cls([Eigenvalue.from_dict(e) for e in d["entries"]], tuple(d["window"]), betas)


COUNT_SETTINGS = IntegratorSettings(rtol=1e-8, atol=1e-12)


def locate_eigenvalues(pencil: LoopGraphPencil, window, settings=DEFAULT_SETTINGS,
                       spacing=None) -> Spectrum:
    """Zeros of Delta in ``window = (re0, re1, im0, im1)`` with multiplicities.

    Winding numbers use a looser integrator tolerance than the Newton polish.
    """
    def f(z):
        return delta(pencil, z, settings=settings)

    def f_count(z):
        return delta(pencil, z, settings=COUNT_SETTINGS)

    def fd(z):
        return delta(pencil, z, derivative=True, settings=settings)
    if spacing is None:
        spacing = min(0.25, 0.6 / pencil.m)
    roots, used = find_zeros(f, fd, tuple(float(w) for w in window), spacing=spacing,
                             f_count=f_count, column_width=1.0 / pencil.m)
    entries = [Eigenvalue(r.z, r.multiplicity, r.residual) for r in roots]
    return Spectrum(entries, used)


def spectrum_window(N, height=2.0):
    """Search rectangle covering the lattice cells |n| <= N with a margin."""
    return (-2.0 * N - 2.0, 2.0 * N + 2.0, -height, height)


def _canonical(values):
    return np.lexsort((np.round(values.imag, 9), np.round(values.real, 9)))


def number_eigenvalues(spectrum: Spectrum, betas: BetaSet, n_range=None,
                       tie_tol=1e-10) -> Spectrum:
    """Attach indices (n, k) by a minimum-total-distance matching to 2n + beta_k.

    The target (0, 2m) is excluded.  Afterwards beta labels are rearranged so
    that the m+1 branches owning an n = 0 eigenvalue are k = 1..m+1 (in
    increasing beta), the rest k = m+2..2m-1, and beta_2m = 0 stays last.
    Entries outside ``n_range`` (default: cells fully inside the window)
    are dropped.
    """
    b = np.asarray(betas.betas, dtype=float)
    m2 = b.size
    vals, mult, res = [], [], []
    for e in spectrum.entries:
        if e.n is None:
            vals.extend([e.lam] * e.multiplicity)
            mult.extend([e.multiplicity] * e.multiplicity)
            res.extend([e.residual] * e.multiplicity)
        else:
            vals.append(e.lam)
            mult.append(e.multiplicity)
            res.append(e.residual)
    vals = np.array(vals, dtype=complex)
    order = _canonical(vals)
    vals, mult, res = vals[order], np.array(mult)[order], np.array(res)[order]
    re0, re1 = spectrum.window[0], spectrum.window[1]
    n_lo = int(np.floor((re0 - 1) / 2)) - 1
    n_hi = int(np.ceil((re1 + 1) / 2)) + 1
    tn, tk = np.meshgrid(np.arange(n_lo, n_hi + 1), np.arange(m2), indexing="ij")
    tn, tk = tn.ravel(), tk.ravel()
    keep = ~((tn == 0) & (tk == m2 - 1))
    tn, tk = tn[keep], tk[keep]
    targets = 2 * tn + b[tk]
    # squared distances: plain distances tie whenever points are collinear
    cost = np.abs(vals[:, None] - targets[None, :]) ** 2
    rows, cols = linear_sum_assignment(cost)
    _check_ties(cost, rows, cols, tie_tol)
    an, ak = tn[cols], tk[cols]

    # relabel betas: branches with an n = 0 member first
    zero_branches = sorted(set(ak[an == 0].tolist()), key=lambda k: b[k])
    other = sorted((k for k in range(m2 - 1) if k not in zero_branches), key=lambda k: b[k])
    perm = zero_branches + other + [m2 - 1]
    newlabel = np.empty(m2, dtype=int)
    newlabel[perm] = np.arange(m2)
    new_betas = BetaSet(b[perm], betas.alphas)

    if n_range is None:
        # cells [2n-1, 2n+1) that lie inside the searched strip
        n_range = (int(np.ceil((re0 + 1) / 2)), int(np.floor((re1 - 1) / 2)))
    entries = []
    for i in np.argsort(rows):
        r, n, k = rows[i], int(an[i]), int(newlabel[ak[i]]) + 1
        if n_range[0] <= n <= n_range[1]:
            entries.append(Eigenvalue(complex(vals[r]), int(mult[r]), float(res[r]), n, k))
    entries.sort(key=lambda e: (e.n, e.k))
    return Spectrum(entries, spectrum.window, new_betas)


def _check_ties(cost, rows, cols, tol):
    M = cost[np.ix_(rows, cols)]
    d = np.diag(M)
    gain = d[:, None] + d[None, :] - M - M.T
    np.fill_diagonal(gain, np.inf)
    if np.any(np.abs(gain) <= tol):
        i, j = np.argwhere(np.abs(gain) <= tol)[0]
        warnings.warn(f"eigenvalue numbering ambiguous between entries {rows[i]} and {rows[j]};"
                      " the first optimal matching was taken", AssignmentAmbiguous, stacklevel=3)


def remainder_profile(spectrum: Spectrum, n_min=5, n_max=20) -> dict:
    """n (lambda_nk - 2n - beta_k) for n_min <= |n| <= n_max, per branch."""
    b = spectrum.betas.betas
    out = {}
    for e in spectrum.entries:
        if e.n is not None and n_min <= abs(e.n) <= n_max:
            out.setdefault(e.k, []).append((e.n, e.n * (e.lam - 2 * e.n - b[e.k - 1])))
    return {k: sorted(v) for k, v in out.items()}


# subspectrum ------------------------------------------------------------------------

@dataclass
class SubspectrumEntry:
    n: int
    k: int
    lam: complex
    multiplicity: int = 1          # m_theta: repetitions of lam in the subspectrum
    cls: int = 1                   # 1 or 2
    j_theta: Optional[int] = None  # 1-based edge with S_j(pi, lam) = 0 when cls == 2

    def to_dict(self) -> dict:
        return {"index": [self.n, self.k], "lambda": [float(self.lam.real), float(self.lam.imag)],
                "multiplicity": self.multiplicity, "class": self.cls, "j_theta": self.j_theta}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["index"][0]), int(d["index"][1]), complex(*d["lambda"]),
                   int(d.get("multiplicity", 1)), int(d.get("class", 1)), d.get("j_theta"))


@dataclass
class Subspectrum:
    entries: list
    N: int
    mode: str = "edge"                    # which assumption classified it: edge (B) / loop (D)
    branch_betas: Optional[np.ndarray] = None   # beta_1..beta_4 of the selected branches

    @property
    def values(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries], dtype=complex)

    def index_set(self) -> set:
        return {(e.n, e.k) for e in self.entries}

    def branch(self, k) -> list:
        return sorted((e for e in self.entries if e.k == k), key=lambda e: e.n)

    def groups(self, tol=1e-8) -> list:
        """Distinct values with their multiplicity: list of (entry, m_theta)."""
        seen = []
        for e in sorted(self.entries, key=lambda e: (e.n, e.k)):
            for g in seen:
                if abs(g[0].lam - e.lam) <= tol * max(1.0, abs(e.lam)):
                    g[1] += 1
                    break
            else:
                seen.append([e, 1])
        return [(e, c) for e, c in seen]

    def to_dict(self) -> dict:
        return {"N": self.N, "mode": self.mode,
                "branch_betas": None if self.branch_betas is None
                else [float(b) for b in self.branch_betas],
                "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d):
        bb = d.get("branch_betas")
        return cls([SubspectrumEntry.from_dict(e) for e in d["entries"]], int(d["N"]),
                   d.get("mode", "edge"), None if bb is None else np.asarray(bb, dtype=float))


def expected_index_set(N) -> set:
    return ({(n, 1) for n in range(-N, N + 1) if n != 0}
            | {(n, k) for n in range(-N, N + 1) for k in (2, 3, 4)})


def default_branches(spectrum: Spectrum) -> list:
    """Four branch labels: three (or four) with an n = 0 member, as k = 1..4.

    When only three branches have an n = 0 member (m = 2), the remaining
    branch is used as k = 1, whose n = 0 value is excluded anyway.
    """
    m2 = spectrum.betas.betas.size
    with_zero = sorted({e.k for e in spectrum.entries if e.n == 0})
    if len(with_zero) >= 4:
        return with_zero[:4]
    rest = [k for k in range(1, m2 + 1) if k not in with_zero]
    return [rest[0]] + with_zero[:3]


def classify(pencil: LoopGraphPencil, lam, mode="edge", threshold=ZERO_THRESHOLD,
             settings=DEFAULT_SETTINGS):
    """Class (1 or 2) and j_theta of each lam, by which known S_j(pi, lam) vanish.

    ``mode="edge"`` tests edges 2..m (loop included, with d_m != 0 required when
    the loop is the vanishing edge); ``mode="loop"`` tests edges 1..m-1.
    """
    m = pencil.m
    known = list(range(1, m)) if mode == "edge" else list(range(m - 1))
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    s = sample_pencil(pencil, lam, settings=settings, edges=known)
    tol = threshold / np.maximum(1.0, np.abs(lam))
    zero = np.abs(s.S) <= tol[None, :]
    exc = AssumptionBViolated if mode == "edge" else AssumptionDViolated
    classes, js = [], []
    for i in range(lam.size):
        hits = [known[r] + 1 for r in np.flatnonzero(zero[:, i])]
        if len(hits) > 1:
            raise exc(f"S_j(pi, {lam[i]:.12g}) vanishes for edges {hits}",
                      offending=[{"lambda": [lam[i].real, lam[i].imag], "edges": hits}])
        if hits and mode == "edge" and hits[0] == m:
            dval = dm(pencil, lam[i:i + 1], settings=settings)[0]
            if abs(dval) <= threshold:
                raise exc(f"S_m and d_m vanish together at {lam[i]:.12g}",
                          offending=[{"lambda": [lam[i].real, lam[i].imag], "edges": hits}])
        classes.append(2 if hits else 1)
        js.append(hits[0] if hits else None)
    return classes, js


def build_subspectrum(spectrum: Spectrum, pencil: LoopGraphPencil, N: int, mode="edge",
                      branches=None, threshold=ZERO_THRESHOLD,
                      settings=DEFAULT_SETTINGS) -> Subspectrum:
    """Select the four-branch subspectrum over |n| <= N and classify it.

    ``branches`` gives the numbered-spectrum labels used as k = 1..4.
    """
    if spectrum.betas is None:
        raise ValueError("spectrum must be numbered first")
    if branches is None:
        branches = default_branches(spectrum)
    idx = spectrum.indexed()
    picked = []
    for newk, oldk in enumerate(branches, start=1):
        for n in range(-N, N + 1):
            if newk == 1 and n == 0:
                continue
            e = idx.get((n, oldk))
            if e is None:
                raise KeyError(f"eigenvalue ({n}, {oldk}) missing from the numbered spectrum")
            picked.append(SubspectrumEntry(n, newk, e.lam))
    if any(abs(e.lam) < 1e-8 for e in picked):
        warnings.warn("zero eigenvalue in the subspectrum duplicates the moment condition",
                      stacklevel=2)
    classes, js = classify(pencil, [e.lam for e in picked], mode, threshold, settings)
    for e, c, j in zip(picked, classes, js):
        e.cls, e.j_theta = c, j
    sub = Subspectrum(picked, N, mode, np.asarray(spectrum.betas.betas)[np.asarray(branches) - 1])
    for g, c in sub.groups():
        for e in picked:
            if abs(e.lam - g.lam) <= 1e-8 * max(1.0, abs(e.lam)):
                e.multiplicity = c
    return sub


# nu_n and Omega ----------------------------------------------------------------------

@dataclass
class SignSequence:
    n: np.ndarray
    nu: np.ndarray
    Q: np.ndarray
    omega: np.ndarray
    residual: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        return {"n": [int(v) for v in self.n],
                "nu": [[float(z.real), float(z.imag)] for z in self.nu],
                "Q": [[float(z.real), float(z.imag)] for z in self.Q],
                "omega": [int(w) for w in self.omega]}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["n"], dtype=int),
                   np.array([complex(*z) for z in d["nu"]]),
                   np.array([complex(*z) for z in d.get("Q", [[0, 0]] * len(d["n"]))]),
                   np.asarray(d["omega"], dtype=int))


def omega_of(Q, zero_tol=OMEGA_ZERO, real_tol=1e-6) -> np.ndarray:
    """Sign of Q by argument: +1 on [0, pi), -1 on [pi, 2 pi), 0 when |Q| is tiny."""
    Q = np.asarray(Q, dtype=complex)
    # values that are real up to rounding take the sign of their real part;
    # the argument test is discontinuous on the real axis
    nearly_real = np.abs(Q.imag) <= real_tol * np.abs(Q)
    arg = np.mod(np.angle(Q), 2 * np.pi)
    arg = np.where(nearly_real, np.where(Q.real >= 0, 0.0, np.pi), arg)
    w = np.where(arg < np.pi, 1, -1)
    return np.where(np.abs(Q) <= zero_tol, 0, w).astype(int)


def loop_zeros(pencil: LoopGraphPencil, N: int, height=2.0, settings=DEFAULT_SETTINGS):
    """Zeros nu_n of S_m(pi, .) indexed by nearest nonzero integer, |n| <= N."""
    def f(z):
        return shoot([pencil.loop], z, settings=settings)[0, 0]

    def fd(z):
        Y = shoot([pencil.loop], z, True, settings=settings)
        return Y[0, 0], Y[4, 0]
    roots, _ = find_zeros(f, fd, (-N - 0.5, N + 0.5, -height, height), spacing=0.2,
                          column_width=1.0)
    z = np.array([r.z for r in roots for _ in range(r.multiplicity)], dtype=complex)
    targets = np.array([n for n in range(-N - 1, N + 2) if n != 0], dtype=float)
    rows, cols = linear_sum_assignment(np.abs(z[:, None] - targets[None, :]) ** 2)
    n = targets[cols].astype(int)
    keep = np.abs(n) <= N
    order = np.argsort(n[keep])
    nu = z[rows][keep][order]
    return n[keep][order], nu, np.abs(f(nu))


def omega_sequence(pencil: LoopGraphPencil, N: int, settings=DEFAULT_SETTINGS) -> SignSequence:
    if abs(pencil.loop.alpha) > 1e-10:
        raise NotNormalized("loop mean of p must be zero", offending=[pencil.m])
    n, nu, res = loop_zeros(pencil, N, settings=settings)
    Y = shoot([pencil.loop], nu, settings=settings)
    Q = Y[2, 0] - Y[1, 0]
    return SignSequence(n, nu, Q, omega_of(Q), res)


def check_condition_C(seq: SignSequence) -> AssumptionReport:
    bad = [int(n) for n, w in zip(seq.n, seq.omega) if w == 0]
    rep = AssumptionReport(C_holds=not bad)
    if bad:
        rep.violations["C"] = bad
    return rep


def verify_lemma_om(pencil: LoopGraphPencil, seq: SignSequence, tol=1e-8,
                    settings=DEFAULT_SETTINGS) -> bool:
    """Check that d_m does not vanish at the zeros of S_m (true under (C))."""
    vals = np.abs(dm(pencil, seq.nu, settings=settings))
    if np.any(vals <= tol):
        bad = [int(n) for n, v in zip(seq.n, vals) if v <= tol]
        raise LemmaViolated(f"d_m vanishes at nu_n for n = {bad}")
    return True


def lemma_om_margin(pencil, seq, settings=DEFAULT_SETTINGS) -> float:
    return float(np.min(np.abs(dm(pencil, seq.nu, settings=settings))))
