import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from pencilgraph.contour import ArgumentPrinciple, find_zeros
from pencilgraph.errors import MultiplicityTooHigh


def poly_pair(roots):
    c = P.polyfromroots(roots)
    dc = P.polyder(c)
    return (lambda z: P.polyval(z, c)), (lambda z: (P.polyval(z, c), P.polyval(z, dc)))


def test_polynomial_zeros_found():
    want = np.array([0.3 + 0.2j, -1.1 - 0.4j, 2.05 + 0.0j, 1.2 - 0.9j])
    f, fd = poly_pair(list(want) + [5 + 5j])      # one zero outside the window
    roots, _ = find_zeros(f, fd, (-2.0, 3.0, -1.0, 1.0))
    got = np.array(sorted((r.z for r in roots), key=lambda z: (z.real, z.imag)))
    want = np.array(sorted(want, key=lambda z: (z.real, z.imag)))
    assert len(got) == 4 and np.max(np.abs(got - want)) < 1e-9
    assert all(r.multiplicity == 1 for r in roots)


def test_sine_zeros_and_empty_window():
    f = lambda z: np.sin(np.pi * z)
    fd = lambda z: (np.sin(np.pi * z), np.pi * np.cos(np.pi * z))
    roots, _ = find_zeros(f, fd, (0.5, 6.5, -0.7, 0.7))
    assert np.allclose(sorted(r.z.real for r in roots), np.arange(1, 7), atol=1e-12)
    assert find_zeros(f, fd, (0.1, 0.9, -0.5, 0.5))[0] == []


def test_double_root_reported_once():
    f, fd = poly_pair([0.5, 0.5, -1.0])
    roots, _ = find_zeros(f, fd, (-2.0, 2.0, -1.0, 1.0))
    mult = {round(r.z.real, 6): r.multiplicity for r in roots}
    assert mult == {0.5: 2, -1.0: 1}


def test_triple_root_raises():
    # factored form: the expanded cubic splits into three zeros ~1e-5 apart in floating point
    f = lambda z: (z - 0.4) ** 3
    fd = lambda z: ((z - 0.4) ** 3, 3 * (z - 0.4) ** 2)
    with pytest.raises(MultiplicityTooHigh):
        find_zeros(f, fd, (-1.0, 1.0, -1.0, 1.0))


def test_zero_on_boundary_is_nudged():
    f, fd = poly_pair([1.0, 0.25j])
    roots, used = find_zeros(f, fd, (-1.0, 1.0, -0.5, 0.5))
    assert used != (-1.0, 1.0, -0.5, 0.5)
    assert len(roots) == 2


def test_cell_counts_add_up():
    f, fd = poly_pair([0.1, 0.7 + 0.3j, -0.6 - 0.2j, 0.2 + 0.9j])
    ap = ArgumentPrinciple(f, fd)
    whole = (-1.013, 1.017, -1.011, 1.019)
    quarters = [(-1.013, 0.0031, -1.011, 0.0043), (0.0031, 1.017, -1.011, 0.0043),
                (-1.013, 0.0031, 0.0043, 1.019), (0.0031, 1.017, 0.0043, 1.019)]
    (total,) = ap.counts([whole])
    parts = ap.counts(quarters)
    assert total == 4 and sum(parts) == total
