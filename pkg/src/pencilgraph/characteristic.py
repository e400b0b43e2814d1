"""Characteristic function of the loop graph and its decompositions.

With S_j, S_j', C_j evaluated at x = pi:

    Delta = sum_{j<m} S_j' prod_{k!=j} S_k + d_m prod_{k<m} S_k,
    d_m   = S_m' + C_m - 2,

    Delta = A_1 S_1 + B_1 S_1'   (edge-1 split)
    Delta = A_m S_m + B_m d_m    (loop split)

Every routine accepts an array of lam values and can return lam-derivatives,
propagated through the products with the product rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotNormalized
from .kernels import KernelSeries, basis_from_dict, make_basis
from .model import LoopGraphPencil
from .shooting import DEFAULT_SETTINGS, SolutionSample, sample_pencil

NORMALIZED_TOL = 1e-10


class Jet:
    """Value and first lam-derivative carried together."""

    __slots__ = ("v", "d")

    def __init__(self, v, d=None):
        self.v = v
        self.d = np.zeros_like(v) if d is None else d

    def __add__(self, o):
        o = o if isinstance(o, Jet) else Jet(o)
        return Jet(self.v + o.v, self.d + o.d)

    __radd__ = __add__

    def __sub__(self, o):
        o = o if isinstance(o, Jet) else Jet(o)
        return Jet(self.v - o.v, self.d - o.d)

    def __mul__(self, o):
        if not isinstance(o, Jet):
            return Jet(self.v * o, self.d * o)
        return Jet(self.v * o.v, self.d * o.v + self.v * o.d)

    __rmul__ = __mul__


def _jets(sample, name, idx):
    v = getattr(sample, name)[idx]
    d = getattr(sample, "d" + name)
    return Jet(v, None if d is None else d[idx])


def _prod(jets, like):
    out = Jet(np.ones_like(like))
    for j in jets:
        out = out * j
    return out


def _sample(pencil, lam, derivative, sample, settings, edges=None):
    if sample is None:
        return sample_pencil(pencil, lam, derivative, settings, edges=edges)
    if edges is not None and sample.m == pencil.m and len(edges) != pencil.m:
        return subsample(sample, edges)
    return sample


def subsample(sample: SolutionSample, edges) -> SolutionSample:
    """Restrict a full-pencil sample to the listed 0-based edges."""
    idx = list(edges)
    parts = {}
    for name in ("S", "Sp", "C", "Cp", "dS", "dSp", "dC", "dCp"):
        v = getattr(sample, name)
        parts[name] = None if v is None else v[idx]
    return SolutionSample(sample.lam, **parts)


def _ret(jet, derivative):
    return (jet.v, jet.d) if derivative else jet.v


# full-graph quantities ----------------------------------------------------------

def dm_jet(sample, i):
    return _jets(sample, "Sp", i) + _jets(sample, "C", i) - 2.0


def delta_from_sample(sample, derivative=False):
    m = sample.m
    S = [_jets(sample, "S", k) for k in range(m)]
    like = sample.S[0]
    total = dm_jet(sample, m - 1) * _prod(S[:m - 1], like)
    for j in range(m - 1):
        total = total + _jets(sample, "Sp", j) * _prod(
            [S[k] for k in range(m) if k != j], like)
    return _ret(total, derivative)


def delta(pencil: LoopGraphPencil, lam, derivative=False, sample=None,
          settings=DEFAULT_SETTINGS):
    """Characteristic function Delta(lam); with ``derivative`` also Delta'(lam)."""
    s = _sample(pencil, lam, derivative, sample, settings)
    return delta_from_sample(s, derivative)


def dm(pencil: LoopGraphPencil, lam, derivative=False, sample=None,
       settings=DEFAULT_SETTINGS):
    """d_m(lam) = S_m'(pi) + C_m(pi) - 2 on the loop."""
    s = _sample(pencil, lam, derivative, sample, settings, edges=[pencil.m - 1])
    return _ret(dm_jet(s, s.m - 1), derivative)


def q_func(pencil: LoopGraphPencil, lam, sample=None, settings=DEFAULT_SETTINGS):
    """Q(lam) = C_m(pi) - S_m'(pi) on the loop."""
    s = _sample(pencil, lam, False, sample, settings, edges=[pencil.m - 1])
    return s.C[-1] - s.Sp[-1]


# edge-1 split ------------------------------------------------------------------

def edge1_pair_from_sample(sample, derivative=False):
    """A_1, B_1 from a sample of edges 2..m (loop last)."""
    r = sample.m            # = m - 1 edges: 2..m
    S = [_jets(sample, "S", k) for k in range(r)]
    like = sample.S[0]
    B = _prod(S, like)
    A = dm_jet(sample, r - 1) * _prod(S[:r - 1], like)
    for j in range(r - 1):
        A = A + _jets(sample, "Sp", j) * _prod([S[k] for k in range(r) if k != j], like)
    if derivative:
        return A.v, B.v, A.d, B.d
    return A.v, B.v


def edge1_pair(pencil: LoopGraphPencil, lam, derivative=False, sample=None,
               settings=DEFAULT_SETTINGS):
    """(A_1, B_1) and with ``derivative`` also (A_1', B_1').

    Only edges 2..m of ``pencil`` are used; a passed ``sample`` may cover
    either the whole pencil or exactly those edges.
    """
    s = _sample(pencil, lam, derivative, sample, settings,
                edges=list(range(1, pencil.m)))
    return edge1_pair_from_sample(s, derivative)


def g1_from_pair(lam, alpha1, A, B, dA=None, dB=None):
    """G_1 = -A_1 sin((lam-a)pi) - lam B_1 cos((lam-a)pi), optionally with G_1'."""
    lam = np.asarray(lam, dtype=complex)
    s, c = np.sin((lam - alpha1) * np.pi), np.cos((lam - alpha1) * np.pi)
    G = -A * s - lam * B * c
    if dA is None:
        return G
    dG = -dA * s - A * np.pi * c - B * c - lam * dB * c + lam * B * np.pi * s
    return G, dG


def g1(pencil: LoopGraphPencil, lam, alpha1, derivative=False, sample=None,
       settings=DEFAULT_SETTINGS):
    pair = edge1_pair(pencil, lam, derivative, sample, settings)
    return g1_from_pair(lam, alpha1, *pair)


# loop split --------------------------------------------------------------------

def loop_pair_from_sample(sample, derivative=False):
    """A_m, B_m from a sample of edges 1..m-1."""
    r = sample.m
    S = [_jets(sample, "S", k) for k in range(r)]
    like = sample.S[0]
    B = _prod(S, like)
    A = Jet(np.zeros_like(like))
    for j in range(r):
        A = A + _jets(sample, "Sp", j) * _prod([S[k] for k in range(r) if k != j], like)
    if derivative:
        return A.v, B.v, A.d, B.d
    return A.v, B.v


def _require_normalized(pencil):
    if abs(pencil.loop.alpha) > NORMALIZED_TOL:
        raise NotNormalized(f"loop mean of p is {pencil.loop.alpha!r}, expected 0",
                            offending=[pencil.m])


def loop_pair(pencil: LoopGraphPencil, lam, derivative=False, sample=None,
              settings=DEFAULT_SETTINGS):
    """(A_m, B_m) from edges 1..m-1; requires a normalized loop."""
    _require_normalized(pencil)
    s = _sample(pencil, lam, derivative, sample, settings,
                edges=list(range(pencil.m - 1)))
    return loop_pair_from_sample(s, derivative)


def gm_from_pair(lam, A, B, dA=None, dB=None):
    """G_m = -A_m sin(lam pi) - lam B_m (2 cos(lam pi) - 2), optionally with G_m'."""
    lam = np.asarray(lam, dtype=complex)
    s, c = np.sin(lam * np.pi), np.cos(lam * np.pi)
    G = -A * s - lam * B * (2 * c - 2)
    if dA is None:
        return G
    dG = (-dA * s - A * np.pi * c - B * (2 * c - 2) - lam * dB * (2 * c - 2)
          + 2 * np.pi * lam * B * s)
    return G, dG


def gm(pencil: LoopGraphPencil, lam, derivative=False, sample=None,
       settings=DEFAULT_SETTINGS):
    pair = loop_pair(pencil, lam, derivative, sample, settings)
    return gm_from_pair(lam, *pair)


# transformation-operator kernels -----------------------------------------------

@dataclass
class KernelSet:
    """Kernels of all edges.

    ``K[j]``, ``N[j]``, ``L[j]`` are the functions whose transforms give
    lam S_j - sin((lam-a_j)pi), S_j' - cos((lam-a_j)pi) and
    C_j - cos((lam-a_j)pi); ``T`` (loop only) gives d_m + 2 - 2cos((lam-a_m)pi).
    """

    alphas: np.ndarray
    K: list
    N: list
    L: list
    T: KernelSeries
    basis: object = field(repr=False, default=None)

    @property
    def m(self):
        return len(self.K)

    def to_dict(self) -> dict:
        return {"alphas": [[float(np.real(a)), float(np.imag(a))] for a in self.alphas],
                "basis": self.basis.to_dict(),
                "K": [k.to_dict()["coef"] for k in self.K],
                "N": [k.to_dict()["coef"] for k in self.N],
                "L": [k.to_dict()["coef"] for k in self.L],
                "T": self.T.to_dict()["coef"]}

    @classmethod
    def from_dict(cls, d):
        basis = basis_from_dict(d["basis"])

        def series(c):
            return KernelSeries(basis, np.array([complex(a, b) for a, b in c]))
        return cls(np.array([complex(a, b) for a, b in d["alphas"]]),
                   [series(c) for c in d["K"]], [series(c) for c in d["N"]],
                   [series(c) for c in d["L"]], series(d["T"]), basis)


def extract_kernels(pencil: LoopGraphPencil, truncation: int = 32, basis="legendre",
                    settings=DEFAULT_SETTINGS) -> KernelSet:
    """Recover the kernels from shooting samples of each edge.

    ``basis`` is ``"legendre"`` (``truncation`` = polynomial degree),
    ``"exponential"`` (``truncation`` = L, integer samples -L..L) or a basis
    instance.
    """
    if isinstance(basis, str):
        basis = make_basis(basis, truncation)
    lam = basis.sample_points()
    s = sample_pencil(pencil, lam, False, settings)
    a = pencil.alphas[:, None]
    lam_r = lam[None, :]
    sin_a, cos_a = np.sin((lam_r - a) * np.pi), np.cos((lam_r - a) * np.pi)
    gK = lam_r * s.S - sin_a
    gN = s.Sp - cos_a
    gL = s.C - cos_a
    gT = s.Sp[-1] + s.C[-1] - 2 * cos_a[-1]
    # one factorization serves every right-hand side
    rhs = np.vstack([gK, gN, gL, gT[None, :]]).T
    coef = basis.coefficients_from_samples(lam, rhs)
    m = pencil.m

    def col(i):
        return KernelSeries(basis, coef[:, i])
    return KernelSet(pencil.alphas.copy(), [col(j) for j in range(m)],
                     [col(m + j) for j in range(m)], [col(2 * m + j) for j in range(m)],
                     col(3 * m), basis)


__all__ = ["delta", "dm", "q_func", "edge1_pair", "g1", "loop_pair", "gm",
           "extract_kernels", "KernelSet", "Jet"]
