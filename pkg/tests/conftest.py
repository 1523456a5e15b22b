import cmath
import math

import numpy as np
import pytest

from polyrecon.entropy import sample_equilibrium
from polyrecon.poly import ComplexPolynomial

PSI = math.pi / math.sqrt(5)


def poly(*coeffs):
    return ComplexPolynomial(list(coeffs))


BASILICA = poly(-1, 0, 1)
ROTATED = poly(0, 0, 1j)  # i z^2
DIRAC = poly(-2j, 0, -1j)  # -i z^2 - 2i
WEAK_CUBIC = poly(0, 1j, 0, 1)  # z^3 + i z
TILTED = poly(1, 0, 1 + 1j)  # (1+i) z^2 + 1
GENERIC = poly(0.3 + 0.2j, 0.1j, 1 + 0.5j)


def cantor_poly(d, psi=PSI, c=1e4):
    coeffs = [0] * (d + 1)
    coeffs[0] = -cmath.exp(1j * psi) * c
    coeffs[-1] = 1j
    return ComplexPolynomial(coeffs)


def fixed_pair_poly(eps=0.04, phi=1.0):
    """``e^{i phi} (z^2 + eps) + z``: its fixed points are ``+-i sqrt(eps)``."""
    e = cmath.exp(1j * phi)
    return poly(e * eps, 1, e)


_CACHE = {}


def equilibrium(P, n, seed=1, depth=60):
    """Session-wide cache of equilibrium samples (they are the slow part)."""
    key = (P, n, seed, depth)
    if key not in _CACHE:
        _CACHE[key] = sample_equilibrium(P, n, depth, seed=seed)
    return _CACHE[key]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# lines recorded by the acceptance module, printed after the run
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
