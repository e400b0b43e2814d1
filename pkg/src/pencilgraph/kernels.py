"""Finite bases for functions on [-pi, pi] and their Fourier-type transforms.

A function f on [-pi, pi] is identified by its transform

    F(lam) = int_{-pi}^{pi} f(t) exp(i lam t) dt,

which is linear in the expansion coefficients.  Two bases are available:

* ``LegendreBasis`` (default): orthonormal Legendre polynomials in t/pi.
  Smooth kernels converge spectrally, and transforms are computed with a
  Gauss-Legendre rule that is exact to roundoff for the degrees in use.
* ``ExponentialBasis``: e^{ilt}, |l| <= L.  Transforms have the closed form
  2 pi sinc(lam + l) and coefficients follow from integer samples, but the
  kernels are not periodic, so the truncation error only decays like 1/L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as leg


def exp_inner(mu, nu):
    """int_{-pi}^{pi} conj(e^{i mu t}) e^{i nu t} dt = 2 pi sinc(nu - conj(mu)).

    Broadcasts over ``mu`` and ``nu``; equals 2 sin((nu-mu)pi)/(nu-mu) for real
    arguments and 2 pi at coincidence.
    """
    return 2 * np.pi * np.sinc(np.asarray(nu) - np.conj(np.asarray(mu)))


def _sinc_series(z, order, terms=24):
    """order-th derivative of 2 sin(pi z)/z by its Taylor series (accurate for |z| < 1)."""
    out = np.zeros_like(z, dtype=complex)
    for k in range(terms):
        p = 2 * k - order
        if p < 0:
            continue
        c = (-1) ** k * np.pi ** (2 * k + 1) * 2 / math.factorial(2 * k + 1)
        c *= math.perm(2 * k, order)
        out = out + c * z ** p
    return out


def exp_inner_dt(mu, nu):
    """int conj(e^{i mu t}) (i t) e^{i nu t} dt, the nu-derivative of exp_inner."""
    z = np.asarray(nu) - np.conj(np.asarray(mu))
    small = np.abs(z) < 0.5
    zs = np.where(small, 1.0, z)
    s, c = np.sin(zs * np.pi), np.cos(zs * np.pi)
    val = 2 * (np.pi * c * zs - s) / (zs * zs)
    return np.where(small, _sinc_series(z, 1), val)


def exp_inner_dt2(mu, nu):
    """int conj(e^{i mu t}) (i t)^2 e^{i nu t} dt, the second nu-derivative of exp_inner."""
    z = np.asarray(nu) - np.conj(np.asarray(mu))
    small = np.abs(z) < 0.5
    zs = np.where(small, 1.0, z)
    s, c = np.sin(zs * np.pi), np.cos(zs * np.pi)
    val = 2 * (-np.pi ** 2 * s * zs ** 2 - 2 * np.pi * c * zs + 2 * s) / zs ** 3
    return np.where(small, _sinc_series(z, 2), val)


class LegendreBasis:
    """phi_n(t) = sqrt((2n+1)/(2 pi)) P_n(t/pi), n = 0..degree (orthonormal)."""

    kind = "legendre"

    def __init__(self, degree: int = 32):
        if degree < 0:
            raise ValueError("degree must be non-negative")
        self.degree = int(degree)
        self._scale = np.sqrt((2 * np.arange(degree + 1) + 1) / (2 * np.pi))

    @property
    def size(self) -> int:
        return self.degree + 1

    @property
    def order(self) -> int:
        return self.degree

    def values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return leg.legvander(t / np.pi, self.degree) * self._scale

    def _nodes(self, lam):
        span = float(np.max(np.abs(np.real(lam)), initial=0.0))
        height = float(np.max(np.abs(np.imag(lam)), initial=0.0))
        nq = self.degree + int(np.pi * (span + height)) + 40
        x, w = leg.leggauss(nq)
        return np.pi * x, np.pi * w

    def transform_matrix(self, lam, order: int = 0) -> np.ndarray:
        """Rows: int phi_n(t) (i t)^order e^{i lam t} dt for each lam."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        t, w = self._nodes(lam)
        wt = w * (1j * t) ** order
        return (np.exp(1j * np.outer(lam, t)) * wt) @ self.values(t)

    def moments(self) -> np.ndarray:
        # int phi_n dt = sqrt(2 pi) for n = 0, else 0
        out = np.zeros(self.size)
        out[0] = np.sqrt(2 * np.pi)
        return out

    def sample_points(self) -> np.ndarray:
        """Real grid used to recover coefficients from transform values."""
        reach = 1.5 * self.degree / np.pi + 10.0
        return np.linspace(-reach, reach, int(round(8 * reach)) + 1)

    def coefficients_from_samples(self, lam, values) -> np.ndarray:
        """Least-squares coefficients whose transform matches ``values`` at ``lam``."""
        M = self.transform_matrix(lam)
        coef, *_ = np.linalg.lstsq(M, np.asarray(values, dtype=complex), rcond=None)
        return coef

    def to_dict(self) -> dict:
        return {"kind": self.kind, "degree": self.degree}


class ExponentialBasis:
    """e^{ilt}, l = -L..L, stored in increasing l."""

    kind = "exponential"

    def __init__(self, truncation: int = 64):
        if truncation < 0:
            raise ValueError("truncation must be non-negative")
        self.truncation = int(truncation)
        self.l = np.arange(-truncation, truncation + 1)

    @property
    def size(self) -> int:
        return self.l.size

    @property
    def order(self) -> int:
        return self.truncation

    def values(self, t) -> np.ndarray:
        return np.exp(1j * np.outer(np.asarray(t, dtype=float), self.l))

    def transform_matrix(self, lam, order: int = 0) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        # int e^{ilt} e^{i lam t} dt = (e^{-ilt}, e^{i lam t})
        if order == 0:
            return exp_inner(-self.l[None, :], lam[:, None])
        if order == 1:
            return exp_inner_dt(-self.l[None, :], lam[:, None])
        raise ValueError("only transform orders 0 and 1 are available")

    def moments(self) -> np.ndarray:
        return np.where(self.l == 0, 2 * np.pi, 0.0)

    def sample_points(self) -> np.ndarray:
        return self.l.astype(float)

    def coefficients_from_samples(self, lam, values) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        values = np.asarray(values, dtype=complex)
        if lam.shape == self.l.shape and np.all(lam == self.l):
            # the transform at integer l isolates the e^{-ilt} coefficient
            return values[::-1] / (2 * np.pi)
        M = self.transform_matrix(lam)
        coef, *_ = np.linalg.lstsq(M, values, rcond=None)
        return coef

    def to_dict(self) -> dict:
        return {"kind": self.kind, "truncation": self.truncation}


def make_basis(kind: str = "legendre", order: int = 32):
    if kind == "legendre":
        return LegendreBasis(order)
    if kind == "exponential":
        return ExponentialBasis(order)
    raise ValueError(f"unknown kernel basis {kind!r}")


def basis_from_dict(d: dict):
    if d["kind"] == "legendre":
        return LegendreBasis(d["degree"])
    return ExponentialBasis(d["truncation"])


@dataclass
class KernelSeries:
    """A function on [-pi, pi] as coefficients in a finite basis."""

    basis: object
    coef: np.ndarray

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=complex)
        if self.coef.shape != (self.basis.size,):
            raise ValueError("coefficient count does not match basis")

    def transform(self, lam, order: int = 0):
        """int f(t) (it)^order e^{i lam t} dt, shaped like ``lam``."""
        lam_arr = np.asarray(lam, dtype=complex)
        out = self.basis.transform_matrix(lam_arr.ravel(), order) @ self.coef
        return out.reshape(lam_arr.shape)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        return (self.basis.values(t_arr.ravel()) @ self.coef).reshape(t_arr.shape)

    def moment(self) -> complex:
        return complex(self.basis.moments() @ self.coef)

    def __neg__(self):
        return KernelSeries(self.basis, -self.coef)

    def __sub__(self, other):
        return KernelSeries(self.basis, self.coef - other.coef)

    def max_abs(self, n: int = 2001) -> float:
        return float(np.max(np.abs(self(np.linspace(-np.pi, np.pi, n)))))

    def to_dict(self) -> dict:
        return {"basis": self.basis.to_dict(),
                "coef": [[float(c.real), float(c.imag)] for c in self.coef]}

    @classmethod
    def from_dict(cls, d):
        c = np.array([complex(a, b) for a, b in d["coef"]])
        return cls(basis_from_dict(d["basis"]), c)
