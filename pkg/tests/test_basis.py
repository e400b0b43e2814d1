import numpy as np
import pytest

from helpers import rect_quadrature_inner
from pencilgraph.basis import (ElementSet, build_probe, frame_bound_profile, frame_bounds,
                               gram_closed_form, gram_equality_gap, lattice_elements,
                               sine_type_check, unperturbed_elements)
from pencilgraph.errors import SingularGram

BETAS = np.array([-0.83, -0.41, 0.12, 0.0])
INDEX = [(n, k) for n in range(-3, 4) for k in (1, 2, 3, 4) if (n, k) != (0, 1)]


def as_function(E, r):
    """Element r of E as a callable t -> (2, len(t)) array."""
    def f(t):
        phase = np.exp(1j * E.mu[r] * t)
        return (E.a[r][:, None] + E.b[r][:, None] * (1j * t)[None, :]) * phase[None, :]
    return f


def test_unperturbed_gram_against_quadrature():
    E = unperturbed_elements(INDEX, BETAS, 0.3)
    G = E.gram()
    for r, s in [(0, 0), (0, 1), (3, 7), (5, 20), (12, 2)]:
        ref = rect_quadrature_inner(as_function(E, r), as_function(E, s))
        assert abs(G[r, s] - ref) < 1e-12
    assert np.allclose(np.diag(G), 2 * np.pi, atol=1e-13)


def test_off_diagonal_formula_holds():
    # entries sin(2(b_l - b_j)pi)/(2k - 2n + b_l - b_j), checked against quadrature
    E = unperturbed_elements(INDEX, BETAS, 0.3)
    GC = gram_closed_form(INDEX, BETAS)
    for r, s in [(1, 2), (4, 9), (10, 26), (7, 7)]:
        ref = rect_quadrature_inner(as_function(E, r), as_function(E, s))
        assert abs(GC[r, s] - ref) < 1e-12


def test_gram_equalities():
    gaps = gram_equality_gap(INDEX, BETAS, 0.3)
    assert gaps["v0_vs_lattice"] <= 1e-12
    assert gaps["v0_vs_closed_form"] <= 1e-12
    assert gaps["diagonal_gap"] <= 1e-12
    assert gaps["hermitian_gap"] <= 1e-14


def test_derivative_elements_against_quadrature(rng):
    a = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    b = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    mu = np.array([1.3 + 0.2j, 1.3 + 0.2j + 1e-3, -2.7 - 0.1j])
    E = ElementSet(a, b, mu, [0, 1, 2])
    G = E.gram()
    for r in range(3):
        for s in range(3):
            ref = rect_quadrature_inner(as_function(E, r), as_function(E, s))
            assert abs(G[r, s] - ref) < 1e-10 * max(1, abs(ref))
    assert np.max(np.abs(G - G.conj().T)) < 1e-13


def test_duplicate_element_is_singular():
    E = lattice_elements(INDEX[:6], BETAS)
    D = E.subset([0, 1, 2, 3, 4, 5, 2])
    G = D.gram()
    d = 1 / np.sqrt(np.real(np.diag(G)))
    with pytest.raises(SingularGram):
        frame_bounds(d[:, None] * G * d[None, :])


def test_orthogonal_toy_system():
    # 2 beta on a half-integer grid: the exponentials are orthogonal on [-pi, pi]
    betas = np.array([-0.75, -0.25, 0.25, 0.75])
    E = lattice_elements(INDEX, betas)
    M1, M2, cond = frame_bounds(E.gram() / (2 * np.pi))
    assert abs(cond - 1) < 1e-12


@pytest.fixture(scope="module")
def probe(ref_sub_edge, ref_pencil):
    return build_probe(ref_sub_edge, ref_pencil, 0.3)


def test_probe_gram_is_hermitian_and_positive(probe):
    G = probe.gram()
    assert np.max(np.abs(G - G.conj().T)) < 1e-12
    M1, M2, _ = frame_bounds(probe)
    assert 0 < M1 <= M2


def test_lower_frame_bound_stabilizes(ref_sub_edge, ref_pencil):
    prof = frame_bound_profile(ref_sub_edge, ref_pencil, 0.3, [6, 12, 18, 24])
    M1 = np.array([p["M1"] for p in prof])
    assert M1.min() > 0.05
    assert M1[-1] / M1[1] > 0.9           # no downward trend once the window is large


def test_closeness_tails_decay(probe):
    c = probe.closeness()
    assert c["decay_exponent"] < -1.5
    assert c["tail"][12] < 0.1 * c["tail"][2]


def test_reconstruction_gives_same_bounds(probe, ref_sub_edge, edge_inversion):
    rec = build_probe(ref_sub_edge, (edge_inversion.S_hat, edge_inversion.Sp_hat), 0.3)
    a, b = frame_bounds(probe), frame_bounds(rec)
    assert abs(a[0] - b[0]) < 1e-4 and abs(a[1] - b[1]) < 1e-4


def test_sine_type_separated_example():
    rep = sine_type_check([-0.5, -0.1, 0.4, 0.0])
    assert abs(rep["separation"] - 0.2) < 1e-12
    assert rep["passes"]
    ratios = [rep["lines"][K]["ratio"] for K in (2.0, 4.0, 8.0)]
    assert all(np.isfinite(ratios))
    assert max(ratios) / min(ratios) < 2


def test_sine_type_coincident_offsets_fail():
    rep = sine_type_check([-0.5, 0.2, 0.2, 0.0])
    assert rep["separation"] == 0
    assert not rep["passes"]
