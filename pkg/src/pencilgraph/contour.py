"""Zeros of an analytic function in a rectangle by the argument principle.

The winding number of f around a rectangle is accumulated from phase
increments along its four sides.  Sides lie on horizontal or vertical lines
whose samples are shared between neighbouring cells, so subdividing a cell
only costs evaluations on the new interior line.  Cells holding one zero are
finished with Newton's method; cells holding two zeros that cannot be
separated at the resolution limit are reported as a double zero.

``f`` must accept a 1-D complex array; everything is evaluated in batches.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import MultiplicityTooHigh, NumericalFailure

log = logging.getLogger(__name__)

PHASE_STEP = np.pi / 3
MAG_STEP = np.log(8.0)
SPLIT_FRACTIONS = (0.5 + 0.0127, 0.5 - 0.0391, 0.5 + 0.0713, 0.41, 0.59)


class OnContour(Exception):
    """A zero lies on (or numerically at) a side of the rectangle."""


@dataclass
class Root:
    z: complex
    multiplicity: int
    residual: float
    cell: tuple


class _Lines:
    """Samples of f along horizontal ('h', y) and vertical ('v', x) lines."""

    def __init__(self, f, spacing):
        self.f = f
        self.spacing = spacing
        self.data = {}
        self.evaluations = 0

    @staticmethod
    def _z(key, s):
        kind, c = key
        return s + 1j * c if kind == "h" else c + 1j * s

    def _add(self, key, s_new):
        s_new = np.unique(np.asarray(s_new, dtype=float))
        if key in self.data:
            s_old, _ = self.data[key]
            s_new = s_new[~np.isin(s_new, s_old)]
        return s_new

    def evaluate(self, requests):
        """requests: dict key -> array of parameters to add."""
        keys, chunks = [], []
        for key, s in requests.items():
            s = self._add(key, s)
            if s.size:
                keys.append(key)
                chunks.append(s)
        if not chunks:
            return
        z = np.concatenate([self._z(k, s) for k, s in zip(keys, chunks)])
        vals = np.asarray(self.f(z), dtype=complex)
        self.evaluations += z.size
        pos = 0
        for key, s in zip(keys, chunks):
            v = vals[pos:pos + s.size]
            pos += s.size
            if key in self.data:
                s0, v0 = self.data[key]
                s = np.concatenate([s0, s])
                v = np.concatenate([v0, v])
            order = np.argsort(s, kind="stable")
            self.data[key] = (s[order], v[order])

    def grid(self, a, b):
        lo, hi = min(a, b), max(a, b)
        h = self.spacing
        inner = np.arange(np.ceil(lo / h), np.floor(hi / h) + 1) * h
        inner = inner[(inner > lo) & (inner < hi)]
        return np.concatenate([[lo, hi], inner])

    def segment(self, key, a, b):
        lo, hi = min(a, b), max(a, b)
        s, v = self.data[key]
        i0, i1 = np.searchsorted(s, lo), np.searchsorted(s, hi, side="right")
        return s[i0:i1], v[i0:i1]


def _bad_pairs(s, v, min_gap):
    """Midpoints that must be added; raises OnContour if a gap is exhausted."""
    if np.any(~np.isfinite(v)):
        raise NumericalFailure("non-finite function value on contour")
    if np.any(v == 0):
        raise OnContour()
    ratio = v[1:] / v[:-1]
    bad = (np.abs(np.angle(ratio)) > PHASE_STEP) | (np.abs(np.log(np.abs(ratio))) > MAG_STEP)
    if not np.any(bad):
        return None
    gaps = s[1:] - s[:-1]
    if np.any(gaps[bad] < min_gap):
        raise OnContour()
    return 0.5 * (s[:-1] + s[1:])[bad]


def _sides(cell):
    x0, x1, y0, y1 = cell
    # (line key, start, end) traversed counterclockwise
    return [(("h", y0), x0, x1), (("v", x1), y0, y1),
            (("h", y1), x1, x0), (("v", x0), y1, y0)]


class ArgumentPrinciple:
    def __init__(self, f, fd, spacing=0.1, min_size=1e-6, newton_tol=1e-9,
                 max_newton=25, f_count=None):
        # f_count may be a cheaper, less accurate version of f: winding
        # numbers only need the phase to within a fraction of pi.
        self.lines = _Lines(f_count or f, spacing)
        self.f = f
        self.fd = fd
        self.min_size = min_size
        self.newton_tol = newton_tol
        self.max_newton = max_newton

    def _min_gap(self, cell):
        return 1e-11 * max(1.0, *(abs(c) for c in cell))

    def counts(self, cells):
        """Winding numbers for each cell; None for cells with a zero on a side."""
        sides = {}
        for ci, cell in enumerate(cells):
            for key, a, b in _sides(cell):
                sides.setdefault((key, min(a, b), max(a, b)), []).append(ci)
        req = {}
        for key, lo, hi in sides:
            req.setdefault(key, []).append(self.lines.grid(lo, hi))
        self.lines.evaluate({k: np.concatenate(v) for k, v in req.items()})
        failed = set()
        pending = dict(sides)
        while pending:
            req = {}
            for (key, lo, hi), owners in list(pending.items()):
                s, v = self.lines.segment(key, lo, hi)
                try:
                    mids = _bad_pairs(s, v, min(self._min_gap(cells[o]) for o in owners))
                except OnContour:
                    failed.update(owners)
                    del pending[(key, lo, hi)]
                    continue
                if mids is None:
                    del pending[(key, lo, hi)]
                else:
                    req.setdefault(key, []).append(mids)
            if req:
                self.lines.evaluate({k: np.concatenate(v) for k, v in req.items()})
        out = []
        for ci, cell in enumerate(cells):
            if ci in failed:
                out.append(None)
                continue
            total = 0.0
            for key, a, b in _sides(cell):
                s, v = self.lines.segment(key, a, b)
                inc = float(np.sum(np.angle(v[1:] / v[:-1])))
                total += inc if b > a else -inc
            w = total / (2 * np.pi)
            if abs(w - round(w)) > 0.05:
                log.debug("non-integer winding %.4f on %s", w, cell)
                out.append(None)
            else:
                out.append(int(round(w)))
        return out

    # --------------------------------------------------------------------------
    def _newton(self, z0, cells, mult):
        z = np.array(z0, dtype=complex)
        active = np.ones(z.size, dtype=bool)
        last = np.full(z.size, np.inf)
        for _ in range(self.max_newton):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            f, df = self.fd(z[idx])
            with np.errstate(divide="ignore", invalid="ignore"):
                step = mult[idx] * f / df
            bad = ~np.isfinite(step)
            step = np.where(bad, 0.0, step)
            z[idx] -= step
            size = np.abs(step)
            # quadratic convergence: once a step is below 1e-9 the next
            # correction is far below the noise in f itself
            done = size <= self.newton_tol * np.maximum(1.0, np.abs(z[idx]))
            last[idx] = np.where(bad, np.inf, size)
            active[idx[done | bad]] = False
        resid = np.abs(np.asarray(self.f(z), dtype=complex))
        ok = np.zeros(z.size, dtype=bool)
        for i, (x0, x1, y0, y1) in enumerate(cells):
            pad = 1e-9 * max(1.0, abs(z[i]))
            ok[i] = (x0 - pad <= z[i].real <= x1 + pad and y0 - pad <= z[i].imag <= y1 + pad
                     and last[i] < 1e-8 * max(1.0, abs(z[i])))
        return z, resid, ok

    def _split(self, cell, attempt):
        x0, x1, y0, y1 = cell
        frac = SPLIT_FRACTIONS[attempt % len(SPLIT_FRACTIONS)]
        if (x1 - x0) >= 0.25 * (y1 - y0):
            xm = x0 + frac * (x1 - x0)
            return [(x0, xm, y0, y1), (xm, x1, y0, y1)]
        ym = y0 + frac * (y1 - y0)
        return [(x0, x1, y0, ym), (x0, x1, ym, y1)]

    def solve_window(self, window, max_nudges=8, column_width=None):
        """Return (roots, window actually used)."""
        x0, x1, y0, y1 = window
        step = 1e-3 * max(1.0, x1 - x0, y1 - y0) ** 0.5
        for k in range(max_nudges):
            cell = (x0 - k * step, x1 + k * step, y0 - k * step, y1 + k * step)
            (n,) = self.counts([cell])
            if n is not None:
                break
        else:
            raise NumericalFailure(f"could not place a contour around {window} avoiding zeros")
        if n == 0:
            return [], cell
        work = self._columns(cell, n, column_width) if column_width else [(cell, n)]
        return self._resolve(work), cell

    def _columns(self, cell, n, width):
        """Split a wide cell into columns of about ``width`` in one batch."""
        x0, x1, y0, y1 = cell
        ncol = max(1, int(np.ceil((x1 - x0) / width)))
        if ncol == 1:
            return [(cell, n)]
        for attempt in range(len(SPLIT_FRACTIONS)):
            shift = (SPLIT_FRACTIONS[attempt] - 0.5) * (x1 - x0) / ncol
            cuts = x0 + (x1 - x0) * np.arange(1, ncol) / ncol + shift
            xs = [x0] + [float(c) for c in cuts] + [x1]
            cols = [(xs[i], xs[i + 1], y0, y1) for i in range(ncol)]
            counts = self.counts(cols)
            if all(c is not None for c in counts) and sum(counts) == n:
                return [(c, k) for c, k in zip(cols, counts) if k > 0]
        return [(cell, n)]

    def _resolve(self, work):
        roots = []
        while work:
            # isolate: subdivide until every cell holds one zero or is tiny
            singles, doubles = [], []
            while work:
                nxt = []
                for c, k in work:
                    size = max(c[1] - c[0], c[3] - c[2])
                    if k == 1:
                        singles.append(c)
                    elif size < self.min_size:
                        if k == 2:
                            doubles.append(c)
                        else:
                            raise MultiplicityTooHigh(
                                f"{k} zeros within {size:.1e} near {0.5*(c[0]+c[1])}"
                                f"{0.5*(c[2]+c[3]):+}j")
                    else:
                        nxt.append((c, k))
                work = self._subdivide(nxt) if nxt else []
            retry = []
            if singles:
                z0 = [0.5 * (c[0] + c[1]) + 0.5j * (c[2] + c[3]) for c in singles]
                z, res, ok = self._newton(z0, singles, np.ones(len(singles)))
                for i, c in enumerate(singles):
                    if ok[i]:
                        roots.append(Root(complex(z[i]), 1, float(res[i]), c))
                    elif max(c[1] - c[0], c[3] - c[2]) < self.min_size:
                        log.warning("Newton failed in a resolved cell; using its centre")
                        roots.append(Root(complex(z0[i]), 1, float(res[i]), c))
                    else:
                        retry.append((c, 1))
            if doubles:
                z0 = [0.5 * (c[0] + c[1]) + 0.5j * (c[2] + c[3]) for c in doubles]
                z, res, ok = self._newton(z0, doubles, np.full(len(doubles), 2.0))
                for i, c in enumerate(doubles):
                    zi = z[i] if ok[i] else z0[i]
                    roots.append(Root(complex(zi), 2, float(res[i]), c))
            work = self._subdivide(retry) if retry else []
        roots.sort(key=lambda r: (round(r.z.real, 9), round(r.z.imag, 9)))
        return roots

    def _subdivide(self, cells):
        out = []
        todo = [(c, k, 0) for c, k in cells]
        while todo:
            kids, owners = [], []
            for i, (c, k, att) in enumerate(todo):
                for child in self._split(c, att):
                    kids.append(child)
                    owners.append(i)
            counts = self.counts(kids)
            per = {}
            for child, owner, n in zip(kids, owners, counts):
                per.setdefault(owner, []).append((child, n))
            again = []
            for i, (c, k, att) in enumerate(todo):
                ch = per[i]
                if any(n is None for _, n in ch) or sum(n for _, n in ch) != k:
                    if att + 1 >= 4 * len(SPLIT_FRACTIONS):
                        raise NumericalFailure(f"cannot subdivide cell {c}")
                    again.append((c, k, att + 1))
                    continue
                out.extend((child, n) for child, n in ch if n > 0)
            todo = again
        return out


def find_zeros(f, fd, window, spacing=0.1, min_size=1e-6, f_count=None,
               column_width=None):
    """All zeros of ``f`` in ``window = (re0, re1, im0, im1)``.

    ``fd`` returns (f, f') for Newton polishing.  Returns ``(roots,
    window_used)``; the window is nudged outward when a zero sits on its
    boundary.  ``column_width`` pre-splits wide windows into columns.
    """
    ap = ArgumentPrinciple(f, fd, spacing=spacing, min_size=min_size, f_count=f_count)
    roots, used = ap.solve_window(window, column_width=column_width)
    log.debug("%d zeros from %d evaluations", len(roots), ap.lines.evaluations)
    return roots, used
