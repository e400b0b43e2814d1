import numpy as np
import pytest

from helpers import constant_edge_closed_form, random_smooth_pencil
from pencilgraph.errors import StepFailure
from pencilgraph.model import EdgeCoefficients
from pencilgraph.shooting import (IntegratorSettings, integrate_edge, sample_pencil, shoot,
                                  wronskian_defect)


def scaled_error(got, want):
    """|got - want| relative to max(1, |want|): values grow like exp(pi |Im lam|)."""
    return np.abs(got - want) / np.maximum(1.0, np.abs(want))


def test_zero_edge_closed_form(rng):
    lam = rng.uniform(-15, 15, 30) + 1j * rng.uniform(-2, 2, 30)
    r = integrate_edge(EdgeCoefficients.zero(), lam)
    want = {"S": np.sin(lam * np.pi) / lam, "Sp": np.cos(lam * np.pi),
            "C": np.cos(lam * np.pi), "Cp": -lam * np.sin(lam * np.pi)}
    for key, w in want.items():
        assert np.max(scaled_error(r[key], w)) < 1e-10, key


def test_zero_edge_at_zero():
    r = integrate_edge(EdgeCoefficients.zero(), 0.0)
    assert r["S"] == pytest.approx(np.pi, abs=1e-12)
    assert r["Sp"] == pytest.approx(1.0, abs=1e-12)
    assert r["C"] == pytest.approx(1.0, abs=1e-12)
    assert r["Cp"] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("p,q", [(0.35, 0.0), (0.2, 0.7), (-0.4, -0.3), (0.1 + 0.2j, 0.3)])
def test_constant_coefficients_against_closed_form(rng, p, q):
    lam = rng.uniform(-10, 10, 20) + 1j * rng.uniform(-1.5, 1.5, 20)
    r = integrate_edge(EdgeCoefficients.constant(p, q), lam)
    S, Sp, C, Cp = constant_edge_closed_form(p, q, lam)
    for key, want in (("S", S), ("Sp", Sp), ("C", C), ("Cp", Cp)):
        assert np.max(scaled_error(r[key], want)) < 1e-10, key


def test_lambda_derivative_matches_central_difference(rng):
    P = random_smooth_pencil(rng, m=2)
    lam = rng.uniform(-14, 14, 20) + 1j * rng.uniform(-14, 14, 20)
    lam = lam[np.abs(lam) <= 20][:20]
    lam = lam[np.abs(lam.imag) <= 4]
    h = 1e-5
    s = sample_pencil(P, lam, True)
    fd = (sample_pencil(P, lam + h).S - sample_pencil(P, lam - h).S) / (2 * h)
    rel = np.abs(s.dS - fd) / np.maximum(np.abs(s.dS), 1e-3)
    assert np.max(rel) < 1e-6


def test_wronskian_at_moderate_lambda(rng):
    P = random_smooth_pencil(rng, m=3)
    lam = rng.uniform(-10, 10, 50) + 1j * rng.uniform(-2, 2, 50)
    assert np.max(wronskian_defect(sample_pencil(P, lam))) <= 1e-9


def test_wronskian_at_ten_plus_five_i(rng):
    # the four products are of size ~1e13 here, so only the relative defect is meaningful
    P = random_smooth_pencil(rng, m=2)
    s = sample_pencil(P, np.array([10 + 5j]))
    assert np.max(wronskian_defect(s, relative=True)) <= 1e-9


def test_coarse_step_budget_raises_step_failure():
    tight = IntegratorSettings(rtol=1e-11, atol=1e-15, max_steps=5)
    with pytest.raises(StepFailure) as info:
        integrate_edge(EdgeCoefficients.constant(0.3, 0.1), 25.0 + 1j, settings=tight)
    assert info.value.lam is not None


def test_loose_tolerance_shows_in_wronskian():
    loose = IntegratorSettings(rtol=1e-3, atol=1e-3)
    s = sample_pencil(random_smooth_pencil(np.random.default_rng(1), m=2), np.array([20.0 + 0.5j]),
                      settings=loose)
    assert np.max(wronskian_defect(s)) > 1e-9


def test_shoot_shape_and_batching():
    edges = [EdgeCoefficients.zero(), EdgeCoefficients.constant(0.2, 0.1)]
    lam = np.linspace(-3, 3, 7) + 0.1j
    Y = shoot(edges, lam, True)
    assert Y.shape == (8, 2, 7)
    # the same edge shot alone gives the same numbers
    Y1 = shoot(edges[1:], lam, True)
    assert np.allclose(Y[:, 1], Y1[:, 0], atol=1e-13)
