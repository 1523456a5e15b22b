import math

import mpmath
import numpy as np
import pytest

from polyrecon.cantor import (
    branch_chains,
    cantor_polynomial,
    escape_certificate,
    itinerary_to_point,
    make_spec,
    modulus_identity_check,
    nest_diameter,
    no_mirror_certificate,
    point_to_itinerary,
    projection_disjointness,
    projection_intervals,
    sector_center,
    sector_index,
)
from polyrecon.errors import BranchMiss, CertificateFailed, CTooSmall, EscapedJulia
from polyrecon.poly import sample_julia

PSI = math.pi / math.sqrt(5)


@pytest.fixture(scope="module")
def spec():
    return make_spec(2, PSI, 1e4)


@pytest.fixture(scope="module")
def P(spec):
    return spec.polynomial()


def test_spec_values(spec):
    assert spec.R_c == pytest.approx(math.sqrt(11000), rel=1e-12)
    assert spec.r_c == pytest.approx(math.sqrt(9000), rel=1e-12)
    assert spec.R_c == pytest.approx(104.88, abs=5e-3)
    assert spec.r_c == pytest.approx(94.87, abs=5e-3)
    assert spec.half_width == pytest.approx(math.asin(spec.R_c / 1e4), rel=1e-12)
    assert len(spec.sectors) == 2
    assert spec.polynomial() == cantor_polynomial(2, PSI, 1e4)


def test_sector_centres_are_where_P_is_purely_imaginary_shifted(spec, P):
    # at the centre of each sector, i z^d points opposite to -e^{i psi} c
    for k in range(spec.d):
        t = spec.centers[k]
        u = 1j * np.exp(1j * spec.d * t)
        assert abs(u - np.exp(1j * PSI)) < 1e-12


def test_half_width_shrinks_with_c():
    hws = [make_spec(2, PSI, c).half_width for c in (1e3, 1e4, 1e5)]
    assert hws[0] > hws[1] > hws[2] > 0
    gaps = [projection_disjointness(make_spec(2, PSI, c)) for c in (1e3, 1e4, 1e5)]
    assert gaps[0] < gaps[1] < gaps[2]


def test_small_c_is_rejected():
    with pytest.raises(CTooSmall):
        make_spec(2, PSI, 1.5)
    with pytest.raises(CTooSmall):
        make_spec(2, PSI, 0.5)
    with pytest.raises(CTooSmall):
        make_spec(2, PSI, -1.0)
    with pytest.raises(ValueError):
        make_spec(1, PSI, 1e4)


def test_sector_index(spec):
    for k in range(spec.d):
        assert sector_index(spec, sector_center(spec, k)) == k
    assert sector_index(spec, 0j) == -1
    assert sector_index(spec, 1e3 + 0j) == -1


def test_modulus_identity(spec):
    rep = modulus_identity_check(spec, samples=2000)
    assert rep.max_rel_error < 1e-12
    assert rep.lower_bound_ok


def test_escape_certificate(spec):
    rep = escape_certificate(spec)
    assert rep.passed and rep.critical_escapes
    assert rep.margins["inner"] > 0 and rep.margins["outer"] > 0
    assert rep.rigorous["inner"] and rep.rigorous["outer"]
    assert rep.critical_orbit[0] == pytest.approx(4.0)


def test_escape_certificate_fails_for_cubic_at_small_c():
    spec = make_spec(3, PSI, 10.0)
    with pytest.raises(CertificateFailed):
        projection_disjointness(spec)
    assert projection_disjointness(spec, raise_on_fail=False) < 0


def test_projection_intervals_contain_sampled_sector_points(spec):
    rng = np.random.default_rng(0)
    for k, (lo, hi, rmin, rmax) in enumerate(spec.sectors):
        z = rng.uniform(rmin, rmax, 1000) * np.exp(1j * rng.uniform(lo, hi, 1000))
        a, b = projection_intervals(spec)[k]
        assert np.all((z.real >= a - 1e-9) & (z.real <= b + 1e-9))
    assert projection_disjointness(spec) > 0


def test_constant_itinerary_gives_fixed_point(spec, P):
    for k in range(spec.d):
        nest = itinerary_to_point(P, spec, [k] * 40)
        with mpmath.workdps(nest.dps):
            z = nest.z_mp
            res = abs(1j * z**2 - mpmath.expj(PSI) * spec.c - z)
        assert float(res) < 1e-30


def test_itinerary_round_trip(spec, P):
    rng = np.random.default_rng(1)
    for _ in range(20):
        prefix = list(rng.integers(0, spec.d, 15))
        nest = itinerary_to_point(P, spec, prefix)
        assert point_to_itinerary(P, spec, nest, 15) == prefix
        assert nest.diameter < 1e-6


def test_nest_diameter_decays_geometrically(spec):
    d = [nest_diameter(spec, L) for L in range(1, 6)]
    r = np.array(d[1:]) / np.array(d[:-1])
    assert np.allclose(r, r[0]) and r[0] < 1e-2


def test_itinerary_is_shift_equivariant(spec, P):
    rng = np.random.default_rng(2)
    prefix = list(rng.integers(0, spec.d, 20))
    nest = itinerary_to_point(P, spec, prefix)
    with mpmath.workdps(nest.dps):
        img = 1j * nest.z_mp**2 - mpmath.expj(PSI) * spec.c
        assert point_to_itinerary(P, spec, img, 19, dps=nest.dps) == prefix[1:]


def test_itinerary_errors(spec, P):
    with pytest.raises(ValueError):
        itinerary_to_point(P, spec, [])
    with pytest.raises(ValueError):
        itinerary_to_point(P, spec, [0, 2])
    with pytest.raises(EscapedJulia):
        point_to_itinerary(P, spec, 0j, 3)


def test_julia_samples_lie_in_the_sectors(spec, P):
    J = sample_julia(P, 2000, seed=0)
    assert np.all(sector_index(spec, J) >= 0)


def test_branch_chains_are_orbits(spec, P):
    rng = np.random.default_rng(3)
    its = rng.integers(0, spec.d, (50, 12))
    O = branch_chains(spec, its)
    assert np.max(np.abs(P(O[:, :-1]) - O[:, 1:]) / np.abs(O[:, 1:])) < 1e-12
    assert np.array_equal(sector_index(spec, O), its)


def test_no_mirror_certificate(spec, P):
    rep = no_mirror_certificate(P, spec, n_pairs=2000, K=30, seed=0)
    assert rep.passed and rep.coding_injective and rep.separates_by_first_symbol
    assert rep.max_separation_step <= 30


def test_no_mirror_negative_control(spec, P):
    with pytest.raises(CertificateFailed):
        no_mirror_certificate(P, spec, n_pairs=10, declared_gap=0.0)


def test_perturbed_polynomial_keeps_its_coding(spec):
    # a small perturbation of c keeps the sector picture and the certificates
    s2 = make_spec(2, PSI, 1e4 * (1 + 1e-3))
    assert escape_certificate(s2, grid=(64, 256)).passed
    assert projection_disjointness(s2) == pytest.approx(projection_disjointness(spec), rel=1e-2)
