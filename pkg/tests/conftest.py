import numpy as np
import pytest

import helpers
from helpers import reference_pencil
from pencilgraph.characteristic import extract_kernels
from pencilgraph.inverse_edge import invert_edge
from pencilgraph.inverse_loop import invert_loop
from pencilgraph.model import EdgeCoefficients
from pencilgraph.spectral import (build_subspectrum, locate_eigenvalues, number_eigenvalues,
                                  omega_sequence, solve_betas, spectrum_window)

REF_N = 24


@pytest.fixture(scope="session")
def ref_pencil():
    return reference_pencil()


@pytest.fixture(scope="session")
def ref_spectrum(ref_pencil):
    spec = locate_eigenvalues(ref_pencil, spectrum_window(REF_N))
    return number_eigenvalues(spec, solve_betas(ref_pencil.alphas[:-1]))


@pytest.fixture(scope="session")
def ref_sub_edge(ref_spectrum, ref_pencil):
    return build_subspectrum(ref_spectrum, ref_pencil, REF_N, "edge")


@pytest.fixture(scope="session")
def ref_sub_loop(ref_spectrum, ref_pencil):
    return build_subspectrum(ref_spectrum, ref_pencil, REF_N, "loop")


@pytest.fixture(scope="session")
def ref_omega(ref_pencil):
    return omega_sequence(ref_pencil, 10)


@pytest.fixture(scope="session")
def ref_kernels(ref_pencil):
    return extract_kernels(ref_pencil, 32)


@pytest.fixture(scope="session")
def edge_inversion(ref_pencil, ref_sub_edge):
    known = ref_pencil.with_edge(0, EdgeCoefficients.zero())
    return invert_edge(known, ref_sub_edge, 32, fit_degree=10)


@pytest.fixture(scope="session")
def loop_inversion(ref_pencil, ref_sub_loop, ref_omega):
    known = ref_pencil.with_edge(2, EdgeCoefficients.zero())
    return invert_loop(known, ref_sub_loop, ref_omega, 32, truth=ref_pencil, fit_degree=10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if helpers.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(helpers.ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
