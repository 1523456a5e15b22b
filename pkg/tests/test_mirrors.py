import math
import time

import mpmath
import numpy as np
import pytest

from polyrecon.errors import RadiusTooSmall
from polyrecon.mirrors import (
    PairPoint,
    asymptotic_mirror_check,
    collect_mirror_sources,
    compose_coeffs,
    diagonal_intersection,
    divided_difference,
    local_dimension,
    periodic_mirror_scan,
    periodic_points,
    psi_iterate,
    q_n,
    sample_variety,
)
from polyrecon.poly import ComplexPolynomial, Escaped, iterate, rotate_conjugate
from polyrecon.reconstruction import estimate_M, mirror_test

from conftest import BASILICA, DIRAC, GENERIC, ROTATED, TILTED, fixed_pair_poly, poly

Z2 = poly(0, 0, 1)


def mp_orbit_end(coeffs, z, n):
    with mpmath.workdps(60):
        zz = mpmath.mpc(z)
        for _ in range(n):
            acc = mpmath.mpc(0)
            for a in reversed(coeffs):
                acc = acc * zz + mpmath.mpc(a)
            zz = acc
        return zz


def mp_quotient(coeffs, n, z, w):
    """Oracle: the difference quotient of P^n at 60 digits."""
    with mpmath.workdps(60):
        return complex((mp_orbit_end(coeffs, z, n) - mp_orbit_end(coeffs, w, n)) / (mpmath.mpc(z) - mpmath.mpc(w)))


def mp_orbit_derivative(coeffs, z, n):
    """Oracle: (P^n)'(z) by the chain rule at 60 digits."""
    dc = [k * a for k, a in enumerate(coeffs)][1:]
    with mpmath.workdps(60):
        zz = mpmath.mpc(z)
        out = mpmath.mpc(1)
        for _ in range(n):
            out *= mpmath.polyval([mpmath.mpc(a) for a in reversed(dc)], zz)
            zz = mpmath.polyval([mpmath.mpc(a) for a in reversed(coeffs)], zz)
        return complex(out)


def random_cases(rng, count):
    """Random (P, n, z, w) with orbits bounded enough to stay finite in double precision."""
    out = []
    while len(out) < count:
        d = int(rng.integers(2, 5))
        c = (rng.normal(size=d + 1) + 1j * rng.normal(size=d + 1)) / 2
        c[-1] = c[-1] / abs(c[-1])
        n = int(rng.integers(1, 7))
        z, w = (rng.normal(size=2) + 1j * rng.normal(size=2)) * 0.6
        P = ComplexPolynomial(c)
        ends = [iterate(P, u, n, escape_radius=1e100)[0] for u in (z, w)]
        if any(isinstance(e, Escaped) for e in ends):
            continue
        out.append((P, n, z, w))
    return out


# -- divided differences -----------------------------------------------------


def test_divided_difference_examples():
    assert divided_difference(Z2, 1, 2, 3) == 5
    assert divided_difference(Z2, 2, 1, 2) == 15  # (1 - 16) / (1 - 2)
    assert divided_difference(Z2, 1, 2, 2) == 4
    with pytest.raises(ValueError):
        divided_difference(Z2, 0, 1, 2)


def test_divided_difference_against_extended_precision(rng):
    cases = random_cases(rng, 300)
    worst = 0.0
    for P, n, z, w in cases:
        ref = mp_quotient(P.coeffs, n, z, w)
        worst = max(worst, abs(divided_difference(P, n, z, w) - ref) / max(1.0, abs(ref)))
    assert worst < 1e-9


def test_divided_difference_on_diagonal(rng):
    for P, n, z, _ in random_cases(rng, 300):
        ref = mp_orbit_derivative(P.coeffs, z, n)
        assert abs(divided_difference(P, n, z, z) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_divided_difference_continuous_across_the_switch():
    z = 0.3 + 0.2j
    for h in (1e-6, 1e-8 * 0.99, 1e-8 * 1.01, 1e-10):
        a = divided_difference(GENERIC, 3, z, z + h)
        b = mp_quotient(GENERIC.coeffs, 3, z, z + h)
        assert abs(a - b) <= 1e-7 * abs(b)


def test_divided_difference_vectorized(rng):
    z = rng.normal(size=10) + 1j * rng.normal(size=10)
    w = rng.normal(size=10) + 1j * rng.normal(size=10)
    R = divided_difference(GENERIC, 2, z, w)
    assert R.shape == (10,)
    assert np.allclose(R, [divided_difference(GENERIC, 2, a, b) for a, b in zip(z, w)])


def test_q_linear_relation(rng):
    # along a mirrored orbit, Re(P^n z - P^n w) = 0 means Re((z - w) R_n) = 0
    z = 0.4 + 0.7j
    w = z.conjugate()
    for n in (1, 2, 3):
        R = divided_difference(BASILICA, n, z, w)
        assert abs(((z - w) * R).real) < 1e-12 * max(1.0, abs(R))
    # with Re z = Re w the relation reduces to Q_n = 0
    assert abs(q_n(BASILICA, 1, z, w)) < 1e-12
    assert q_n(BASILICA, 0, z, w) == 0.0


def test_q_zero_vanishes_on_the_dirac_line():
    y = np.linspace(-2, 2, 9)
    assert np.all(q_n(DIRAC, 0, 1j * y, -1j * y[::-1]) == 0)


def test_psi_iterate():
    p = psi_iterate(Z2, PairPoint(1j, -1j), 1)
    assert p.on_diagonal and p.z == -1
    q = PairPoint(0.4 + 0.7j, 0.4 - 0.7j)
    out = psi_iterate(BASILICA, q, 3, check_depth=8)
    assert abs(out.z - out.w.conjugate()) < 1e-12
    with pytest.raises(ValueError):
        psi_iterate(Z2, q, -1)


# -- the mirrored variety ----------------------------------------------------


@pytest.fixture(scope="module")
def basilica_variety():
    return sample_variety(BASILICA)


def test_variety_of_real_polynomial_is_conjugate_pairs(basilica_variety):
    pts = basilica_variety.points
    assert len(pts) > 100
    assert max(abs(p.w - p.z.conjugate()) for p in pts) < 1e-9
    assert basilica_variety.as_array().shape == (len(pts), 4)


def test_variety_is_two_dimensional_for_real_polynomial(basilica_variety):
    dims = local_dimension(basilica_variety.as_array())
    assert np.mean(dims == 2) > 0.9


def test_variety_points_are_mirrors_to_max_n():
    vs = sample_variety(GENERIC, grid=5)
    for p in vs.points:
        assert mirror_test(GENERIC, p.z, p.w, 2, 1e-8)


def test_diagonal_intersection_is_critical():
    rep = diagonal_intersection(GENERIC, sample=sample_variety(GENERIC, grid=5))
    assert rep.anomalies == []
    assert np.allclose(rep.critical_points, [-0.1j / (2 * (1 + 0.5j))])


# -- equipotentials ----------------------------------------------------------


def test_asymptotic_mirrors_of_tilted_quadratic():
    rep = asymptotic_mirror_check(TILTED)
    assert rep.all_break_at_one and all(c > 0 for c in rep.pair_counts)
    assert max(rep.break_residuals) < 1e-6
    assert rep.deviations[1] <= 2 * rep.deviations[0] + 1e-6


def test_asymptotic_deviation_is_bounded_but_nonzero():
    # with a linear term the offset from conjugate pairs stays at a fixed O(1) size
    rep = asymptotic_mirror_check(poly(1, 1, 1 + 1j))
    assert 0.1 < rep.constant < 1.0
    assert abs(rep.deviations[1] - rep.deviations[0]) < 1e-6


def test_asymptotic_check_preconditions():
    with pytest.raises(ValueError):
        asymptotic_mirror_check(BASILICA)
    with pytest.raises(ValueError):
        asymptotic_mirror_check(ROTATED)


def test_asymptotic_check_rejects_radius_inside_escape_region():
    with pytest.raises(RadiusTooSmall):
        asymptotic_mirror_check(TILTED, radii=(1.0, 1e3))


# -- periodic points ---------------------------------------------------------


def test_compose_coeffs():
    assert np.allclose(compose_coeffs(BASILICA, 2), [0, 0, -2, 0, 1])


def test_periodic_points_of_basilica():
    pts = periodic_points(BASILICA, 2)
    phi = (1 + math.sqrt(5)) / 2
    assert np.allclose(sorted(pts.real), sorted([-1, 0, 1 - phi, phi]))
    with pytest.raises(ValueError):
        periodic_points(BASILICA, 20)


def test_periodic_scan_finds_symmetric_fixed_pair():
    pairs = periodic_mirror_scan(fixed_pair_poly())
    assert len(pairs) == 1
    assert {round(pairs[0].z.imag, 12), round(pairs[0].w.imag, 12)} == {-0.2, 0.2}


def test_periodic_scan_equivariant_under_rotation_by_pi():
    P = fixed_pair_poly(phi=0.7)
    a = periodic_mirror_scan(P)
    b = periodic_mirror_scan(rotate_conjugate(P, math.pi))
    key = lambda pairs: sorted((round(x.real, 9), round(x.imag, 9)) for p in pairs for x in (p.z, p.w))
    assert key(b) == key([PairPoint(-p.z, -p.w) for p in a])


def test_collected_sources_contain_unbroken_fixed_pair():
    sources = collect_mirror_sources(fixed_pair_poly())
    M, unbroken = estimate_M(fixed_pair_poly(), sources)
    assert any(abs(abs(p.z) - 0.2) < 1e-9 and abs(p.z + p.w) < 1e-9 for p in unbroken)
    assert M == 1


def test_asymptotic_check_reports_missing_pairs(monkeypatch):
    from polyrecon import mirrors
    from polyrecon.errors import PrematureRadius

    monkeypatch.setattr(mirrors, "find_mirrors_on_level_curve", lambda *a, **k: [])
    with pytest.raises(PrematureRadius):
        mirrors.asymptotic_mirror_check(TILTED)
