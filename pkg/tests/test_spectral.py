import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import constant_edge_closed_form, reflected, zero_m2_eigenvalues
from pencilgraph.characteristic import delta, dm
from pencilgraph.errors import AssumptionDViolated, DegenerateAlphas, LemmaViolated
from pencilgraph.model import EdgeCoefficients, LoopGraphPencil, normalize_shift
from pencilgraph.shooting import shoot
from pencilgraph.spectral import (Eigenvalue, Spectrum, check_condition_C, classify,
                                  d_function, expected_index_set, locate_eigenvalues,
                                  number_eigenvalues, omega_of, omega_sequence,
                                  remainder_profile, solve_betas, verify_lemma_om)

ZERO2 = LoopGraphPencil((EdgeCoefficients.zero(), EdgeCoefficients.zero()))


# betas -------------------------------------------------------------------------------

def hand_d_m2(alpha, lam):
    """Leading-order function for one boundary edge and a zero-mean loop, written out."""
    return (2 * (mpmath.cos(lam * mpmath.pi) - 1) * mpmath.sin((lam - alpha) * mpmath.pi)
            + mpmath.cos((lam - alpha) * mpmath.pi) * mpmath.sin(lam * mpmath.pi))


def test_betas_m2_against_independent_roots():
    bs = solve_betas([0.3])
    assert bs.betas.size == 4 and bs.betas[-1] == 0
    # oracle: sign changes of the hand-written function, refined by bracketed mpmath
    # root finding; the trivial zero at 0 is the appended beta
    x = np.linspace(-0.999, 0.999, 4001)
    v = np.array([float(hand_d_m2(0.3, t)) for t in x])
    roots = []
    for i in np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:])):
        roots.append(float(mpmath.findroot(lambda z: hand_d_m2(0.3, z), (x[i], x[i + 1]),
                                           solver="illinois", tol=1e-30)))
    roots = [r for r in roots if abs(r) > 1e-9]
    assert len(roots) == 3
    intervals = [(-1.0, -0.7), (-0.7, 0.3), (0.3, 1.0)]
    for b, r, (lo, hi) in zip(bs.betas[:3], sorted(roots), intervals):
        assert lo < b < hi
        assert abs(r - b) < 1e-12


@pytest.mark.parametrize("alphas", [[0.3], [0.3, 0.6], [0.15, 0.45, 0.8]])
def test_betas_are_zeros_of_d(alphas):
    bs = solve_betas(alphas)
    assert bs.betas.size == 2 * (len(alphas) + 1)
    assert np.max(bs.residuals()) <= 1e-10
    assert np.min(np.diff(np.sort(bs.betas[:-1]))) > 1e-6
    # no beta congruent to an alpha
    for a in alphas:
        assert np.min(np.abs((bs.betas - a + 0.5) % 1 - 0.5)) > 1e-6


def test_d_function_properties(rng):
    a = [0.3]
    assert abs(d_function(a, 0.0)) < 1e-15
    lam = rng.uniform(-5, 5, 20) + 1j * rng.uniform(-1, 1, 20)
    assert np.allclose(d_function(a, lam + 2), d_function(a, lam), atol=1e-12)
    assert abs(d_function(a, 0.3)) > 0.1


def test_colliding_alphas_rejected():
    with pytest.raises(DegenerateAlphas):
        solve_betas([0.3, 1.3])
    with pytest.raises(DegenerateAlphas):
        solve_betas([0.0, 0.5])


# locating and numbering -----------------------------------------------------------

def test_zero_m2_window_roots():
    spec = locate_eigenvalues(ZERO2, (0.1, 1.5, -0.5, 0.5))
    assert np.allclose(np.sort(spec.values.real), zero_m2_eigenvalues(0.1, 1.5), atol=1e-10)
    assert np.allclose(spec.values.imag, 0, atol=1e-10)
    assert abs(spec.values.real.min() - np.arccos(2 / 3) / np.pi) < 1e-10


def test_eigenvalue_residuals(ref_spectrum):
    for e in ref_spectrum.entries[:40]:
        assert e.residual <= 1e-9


def test_shifted_pencil_shifts_roots():
    P = LoopGraphPencil((EdgeCoefficients.constant(0.3, 0.1), EdgeCoefficients.constant(0.25)))
    Q, c = normalize_shift(P)
    a = locate_eigenvalues(P, (0.0, 3.0, -1, 1)).values
    b = locate_eigenvalues(Q, (c, 3.0 + c, -1, 1)).values
    assert len(a) == len(b)
    assert np.allclose(np.sort_complex(a + c), np.sort_complex(b), atol=1e-9)


def test_index_set_and_cardinality(ref_sub_edge):
    N = ref_sub_edge.N
    assert ref_sub_edge.index_set() == expected_index_set(N)
    assert len(ref_sub_edge.entries) == 4 * (2 * N + 1) - 1


def test_numbering_is_permutation_stable(ref_spectrum, rng):
    plain = [Eigenvalue(e.lam, 1, e.residual) for e in ref_spectrum.entries]
    base = number_eigenvalues(Spectrum(plain, ref_spectrum.window), ref_spectrum.betas)
    for _ in range(2):
        shuffled = [plain[i] for i in rng.permutation(len(plain))]
        again = number_eigenvalues(Spectrum(shuffled, ref_spectrum.window), ref_spectrum.betas)
        assert {e.index: e.lam for e in again.entries} == {e.index: e.lam for e in base.entries}


def test_remainder_decays_like_one_over_n(ref_spectrum):
    b = ref_spectrum.betas.betas
    rows = [(abs(e.n), abs(e.lam - 2 * e.n - b[e.k - 1])) for e in ref_spectrum.entries
            if e.n is not None and 10 <= abs(e.n) <= 20]
    fit = max(n * r for n, r in rows if n <= 15)
    assert all(r <= 1.5 * fit / n for n, r in rows if n > 15)
    prof = remainder_profile(ref_spectrum, 5, 20)
    for k, pts in prof.items():
        vals = np.abs([v for _, v in pts])
        assert vals.max() < 10


def test_delta_at_lattice_points_decays(ref_pencil, ref_spectrum):
    b = ref_spectrum.betas.betas
    n = np.arange(5, 21)
    m = ref_pencil.m
    for bk in b:
        lam = 2 * n + bk
        v = np.abs(lam ** (m - 1) * delta(ref_pencil, lam))
        slope = np.polyfit(np.log(n), np.log(v + 1e-300), 1)[0]
        assert slope < -0.5


def test_zero_eigenvalue_absent_from_reference(ref_spectrum):
    assert np.min(np.abs(ref_spectrum.values)) > 1e-3


# classification ---------------------------------------------------------------------

def engineered_pencil():
    """Edges 1 and 2 share a Dirichlet eigenvalue lam* = 0.3 + sqrt(1.09)."""
    lam_star = 0.3 + np.sqrt(1.09)
    q2 = lam_star ** 2 - 1.2 * lam_star - 1
    P = LoopGraphPencil((EdgeCoefficients.constant(0.3), EdgeCoefficients.constant(0.6, q2),
                         EdgeCoefficients.zero()))
    return P, lam_star, q2


def test_engineered_second_class_entry():
    P, lam, q2 = engineered_pencil()
    # oracle: both edge values vanish in closed form, hence so does the characteristic function
    S1 = constant_edge_closed_form(0.3, 0.0, lam)[0]
    S2 = constant_edge_closed_form(0.6, q2, lam)[0]
    assert abs(S1) < 1e-14 and abs(S2) < 1e-14
    assert abs(delta(P, np.array([lam]))[0]) < 1e-10
    cls, js = classify(P, [lam, lam + 0.37], mode="edge")
    assert cls == [2, 1] and js == [2, None]
    with pytest.raises(AssumptionDViolated) as info:
        classify(P, [lam], mode="loop")
    assert info.value.offending[0]["edges"] == [1, 2]


def test_engineered_eigenvalue_found_by_search():
    P, lam, _ = engineered_pencil()
    spec = locate_eigenvalues(P, (0.9, 1.8, -0.5, 0.5))
    assert np.min(np.abs(spec.values - lam)) < 1e-9


def test_reference_subspectrum_is_first_class(ref_sub_edge, ref_sub_loop):
    assert all(e.cls == 1 for e in ref_sub_edge.entries)
    assert all(e.cls == 1 for e in ref_sub_loop.entries)


# nu_n and Omega ---------------------------------------------------------------------

def test_zero_loop_signs():
    seq = omega_sequence(ZERO2, 6)
    assert np.allclose(seq.nu, [n for n in range(-6, 7) if n != 0], atol=1e-10)
    assert np.all(seq.omega == 0)
    rep = check_condition_C(seq)
    assert rep.C_holds is False and rep.violations["C"] == list(seq.n)
    d = dm(ZERO2, seq.nu)
    even = seq.n % 2 == 0
    assert np.max(np.abs(d[even])) < 1e-10
    assert np.allclose(d[~even], -4, atol=1e-10)
    with pytest.raises(LemmaViolated):
        verify_lemma_om(ZERO2, seq)


def test_symmetric_loop_fails_condition_c():
    loop = EdgeCoefficients.from_functions(lambda t: 0.2 * np.sin(t), lambda t: 0 * t)
    P, _ = normalize_shift(LoopGraphPencil((EdgeCoefficients.constant(0.3), loop)))
    seq = omega_sequence(P, 5)
    assert np.max(np.abs(seq.Q)) < 1e-9
    assert check_condition_C(seq).C_holds is False


def test_reference_loop_signs(ref_pencil, ref_omega):
    assert check_condition_C(ref_omega).C_holds
    assert verify_lemma_om(ref_pencil, ref_omega)
    assert np.all(ref_omega.residual <= 1e-9)
    Y = shoot([ref_pencil.loop], ref_omega.nu)
    S, Sp, C = Y[0, 0], Y[1, 0], Y[2, 0]
    assert np.max(np.abs(S)) < 1e-9
    assert np.max(np.abs(C * Sp - 1)) < 1e-9
    # Q is +-sqrt((d+2)^2 - 4) at these points and omega follows the real sign
    d = Sp + C - 2
    assert np.allclose(np.abs(ref_omega.Q), np.abs(np.sqrt((d + 2) ** 2 - 4)), atol=1e-8)
    assert np.array_equal(ref_omega.omega, np.where(ref_omega.Q.real > 0, 1, -1))


def test_reflected_loop_flips_signs(ref_pencil, ref_omega):
    P = ref_pencil.with_edge(2, reflected(ref_pencil.loop))
    seq = omega_sequence(P, 10)
    assert np.allclose(seq.nu, ref_omega.nu, atol=1e-8)
    assert np.array_equal(seq.omega, -ref_omega.omega)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_omega_is_odd(re, im):
    Q = complex(re, im)
    if abs(Q) <= 1e-9 or abs(im) <= 1e-6 * abs(Q) and re == 0:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert omega_of(-Q) == -omega_of(Q)


def test_omega_table():
    assert list(omega_of([1.0, -1.0, 1j, -1j, 0.0, 1e-12, 1 - 1e-9j])) == [1, -1, 1, -1, 0, 0, 1]
