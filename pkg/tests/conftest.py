import math
from pathlib import Path

import numpy as np
import pytest

from blcirk import basis, gravity, orbit, prolate, quadrature, tableau

DATA = Path(__file__).parent / "data"
C17 = 17 * math.pi
EPS = 1e-13


@pytest.fixture(scope="session")
def rule64():
    """2c rule for c = 17π with 64 nodes (paired with ε = 1e-13)."""
    return quadrature.build_quadrature(2 * C17, EPS * EPS, M=64)


@pytest.fixture(scope="session")
def prolate17():
    return prolate.build_prolate_basis(C17, 65, "extended")


@pytest.fixture(scope="session")
def basis_exact64(prolate17, rule64):
    return basis.build_basis_exact(prolate17, rule64)


@pytest.fixture(scope="session")
def basis_approx64(rule64):
    return basis.build_basis_approx(rule64, C17, eigen_route=True)


@pytest.fixture(scope="session")
def tab_colloc64(rule64):
    return tableau.build_tableau_collocation(rule64, C17, EPS)


@pytest.fixture(scope="session")
def tab_exact64(prolate17, basis_exact64):
    return tableau.build_tableau_exact_pswf(prolate17, basis_exact64, EPS)


@pytest.fixture(scope="session")
def tab_approx64(basis_approx64):
    return tableau.build_tableau_approx_pswf(basis_approx64, EPS)


@pytest.fixture(scope="session")
def tab_gl64():
    return tableau.build_tableau_gauss_legendre(64)


@pytest.fixture(scope="session")
def tab_small():
    """A cheap 16-stage [0,1] tableau for solver tests."""
    c = 4 * math.pi
    rule = quadrature.build_quadrature(2 * c, 1e-22, M=16)
    return tableau.rescale_to_unit(tableau.build_tableau_collocation(rule, c, 1e-11, check=False))


@pytest.fixture(scope="session")
def tab32():
    return orbit.orbit_tableau(32, EPS)


@pytest.fixture(scope="session")
def tab74():
    return orbit.orbit_tableau(74, EPS)


@pytest.fixture(scope="session")
def model8():
    return gravity.load_coeffs((DATA / "synthetic_degree8.txt").read_text())


@pytest.fixture(scope="session")
def egm2():
    return gravity.load_coeffs((DATA / "egm96_degree2.txt").read_text())


# -- acceptance report ----------------------------------------------------------

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}: {detail}")
