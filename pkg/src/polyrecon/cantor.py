"""The Cantor family ``P(z) = i z^d - e^{i psi} c``: sectors, certificates, coding.

Writing ``z = r e^{i phi}``,

    |P(z)|^2 = r^(2d) + c^2 + 2 c r^d sin(d phi - psi),

so ``P`` is small only where ``d phi - psi`` is close to ``-pi/2 (mod 2 pi)``.
The sectors ``V_k`` are centred there:

    V_k = { r_c < |z| < R_c,  |d arg z - psi - 2 k pi + pi/2| < h },

with ``R_c = (c + c^(3/(2d)))^(1/d)``, ``r_c = (c - c^(3/(2d)))^(1/d)`` and
``h = |arccos(R_c / c) - pi/2|``.  Outside the sectors (and off the annulus)
``|P| >= R_c``, so the Julia set lies in ``V = U V_k`` and is coded by the
sequence of sectors an orbit visits.

Forward orbits of Julia points expand by about ``d R_c^(d-1)`` per step, so
anything that iterates forward from a single point runs in mpmath.  Inverse
branches contract and are computed in double precision when a whole chain is
kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np

from .errors import BranchMiss, CertificateFailed, CTooSmall, EscapedJulia
from .poly import ComplexPolynomial

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class SectorSpec:
    d: int
    psi: float
    c: float
    R_c: float
    r_c: float
    #: bound on |d arg z - centre|
    half_width: float
    #: centre arguments of the sectors, in [0, 2 pi)
    centers: tuple

    @property
    def sectors(self) -> list:
        """``(arg_lo, arg_hi, r_min, r_max)`` for each sector."""
        a = self.half_width / self.d
        return [(t - a, t + a, self.r_c, self.R_c) for t in self.centers]

    def polynomial(self) -> ComplexPolynomial:
        return cantor_polynomial(self.d, self.psi, self.c)

    def to_json_obj(self) -> dict:
        return {
            "d": self.d,
            "psi": self.psi,
            "c": self.c,
            "R_c": self.R_c,
            "r_c": self.r_c,
            "half_width": self.half_width,
            "sectors": [list(s) for s in self.sectors],
        }


def cantor_polynomial(d: int, psi: float, c: float) -> ComplexPolynomial:
    coeffs = np.zeros(d + 1, dtype=complex)
    coeffs[0] = -np.exp(1j * psi) * c
    coeffs[-1] = 1j
    return ComplexPolynomial(coeffs)


def make_spec(d: int, psi: float, c: float) -> SectorSpec:
    """Sector geometry for ``i z^d - e^{i psi} c``.

    Raises :class:`CTooSmall` when ``r_c`` is not positive or ``R_c >= c``
    (then ``arccos(R_c / c)`` is undefined and no sector exists).
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if not c > 0:
        raise CTooSmall("c must be positive")
    extra = c ** (3.0 / (2 * d))
    if c - extra <= 0:
        raise CTooSmall(f"r_c^d = c - c^(3/(2d)) = {c - extra:.3g} is not positive")
    R_c = (c + extra) ** (1.0 / d)
    r_c = (c - extra) ** (1.0 / d)
    if R_c >= c:
        raise CTooSmall(f"R_c = {R_c:.3g} >= c, sectors undefined")
    hw = abs(math.acos(R_c / c) - math.pi / 2)
    if not 0 < hw < math.pi:
        raise CTooSmall("sector half-width out of range")
    centers = tuple(((psi - math.pi / 2 + TWO_PI * k) / d) % TWO_PI for k in range(d))
    return SectorSpec(d, float(psi), float(c), R_c, r_c, hw, centers)


def _wrap(x):
    """Map angles to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(x), TWO_PI)


def sector_index(spec: SectorSpec, z) -> np.ndarray:
    """Index of the sector containing each point, ``-1`` outside ``V``."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    out = np.full(z.shape, -1, dtype=int)
    inside = (r > spec.r_c) & (r < spec.R_c)
    a = spec.half_width / spec.d
    ang = np.angle(z)
    for k, t in enumerate(spec.centers):
        out[inside & (np.abs(_wrap(ang - t)) < a)] = k
    return out


# ----------------------------------------------------------------------------
# analytic identities


@dataclass
class ModulusReport:
    samples: int
    max_rel_error: float
    #: min over samples of |P| - c |cos(d phi - psi)|
    lower_bound_margin: float
    lower_bound_ok: bool


def modulus_identity_check(spec: SectorSpec, samples: int = 10_000, seed=0, dps: int = 40) -> ModulusReport:
    """Compare ``|P(r e^{i phi})|`` with the closed form on random ``(r, phi)``.

    Both sides are evaluated in mpmath at ``dps`` digits so that points near
    the zeros of ``P`` do not lose relative accuracy to cancellation.
    """
    rng = np.random.default_rng(seed)
    rs = rng.uniform(0.0, 2.0 * spec.R_c, samples)
    phis = rng.uniform(0.0, TWO_PI, samples)
    d, c = spec.d, spec.c
    worst, margin = 0.0, math.inf
    with mpmath.workdps(dps):
        c_mp = mpmath.mpf(c)
        rot = mpmath.expj(mpmath.mpf(spec.psi)) * c_mp
        for r, ph in zip(rs, phis):
            r_mp, ph_mp = mpmath.mpf(r), mpmath.mpf(ph)
            z = r_mp * mpmath.expj(ph_mp)
            lhs = abs(1j * z**d - rot)
            s = mpmath.sin(d * ph_mp - spec.psi)
            rhs = mpmath.sqrt(r_mp ** (2 * d) + c_mp**2 + 2 * c_mp * r_mp**d * s)
            if lhs > 0:
                worst = max(worst, float(abs(lhs - rhs) / lhs))
            low = c_mp * abs(mpmath.cos(d * ph_mp - spec.psi))
            margin = min(margin, float(lhs - low))
    return ModulusReport(samples, worst, margin, margin >= 0)


# ----------------------------------------------------------------------------
# escape certificate


@dataclass
class EscapeReport:
    passed: bool
    #: min over the clause's grid of |P(z)| - R_c
    margins: dict
    #: margin exceeds Lipschitz bound x grid spacing (twice the covering radius)
    rigorous: dict
    violations: list
    #: log10 |P^k(0)| for k = 1..8
    critical_orbit: list
    critical_escapes: bool
    grid: tuple

    def to_json_obj(self) -> dict:
        return {"pass": self.passed, "margin": min(self.margins.values()), "margins": self.margins, "rigorous": self.rigorous}


def _lip(spec, r_max):
    return spec.d * r_max ** (spec.d - 1)


def escape_certificate(spec: SectorSpec, grid: tuple = (512, 2048), raise_on_fail: bool = True) -> EscapeReport:
    """Check ``|P| >= R_c`` on the disk ``|z| <= r_c``, on ``|z| >= R_c`` and on ``A \\ V``.

    ``A`` is the annulus between the two radii.  The outer clause is
    sampled on ``R_c <= |z| <= 2 R_c``; beyond that ``|P| >= |z|^d - c``
    grows.  On ``A \\ V`` the bound is attained on the sector boundary, so that
    clause has zero margin by construction and is not rigorous-at-resolution;
    it is covered instead by the identity checked in
    :func:`modulus_identity_check`.  The critical orbit is followed in mpmath.
    """
    n_r, n_t = grid
    P = spec.polynomial()
    d, R_c, r_c = spec.d, spec.R_c, spec.r_c
    t = TWO_PI * np.arange(n_t) / n_t
    dt = TWO_PI / n_t
    margins, rigorous, violations = {}, {}, []

    def sweep(name, radii, mask_fn=None):
        Z = radii[:, None] * np.exp(1j * t)[None, :]
        mod = np.abs(P(Z))
        if mask_fn is not None:
            keep = mask_fn(Z)
            mod = np.where(keep, mod, np.inf)
        m = float(mod.min() - R_c)
        margins[name] = m
        dr = float(np.max(np.diff(radii))) if radii.size > 1 else 0.0
        spacing = math.hypot(dr, radii.max() * dt)
        rigorous[name] = bool(m > _lip(spec, radii.max()) * spacing)
        if m < -1e-9 * R_c:
            i, j = np.unravel_index(np.argmin(mod), mod.shape)
            violations.append((name, complex(Z[i, j])))

    sweep("inner", np.linspace(0.0, r_c, n_r))
    sweep("outer", np.linspace(R_c, 2.0 * R_c, n_r))
    sweep("annulus", np.linspace(r_c, R_c, n_r), lambda Z: sector_index(spec, Z) < 0)
    # the annulus clause holds with equality on the sector boundaries
    tail_ok = (2.0 * R_c) ** d - spec.c >= R_c

    orbit = []
    with mpmath.workdps(30):
        w = mpmath.mpc(0)
        coeff0 = -mpmath.expj(mpmath.mpf(spec.psi)) * spec.c
        for _ in range(8):
            w = 1j * w**d + coeff0
            orbit.append(float(mpmath.log10(abs(w))))
    k0 = next((k for k, v in enumerate(orbit) if v > math.log10(R_c)), None)
    crit_ok = k0 is not None and k0 <= 1 and all(b > a for a, b in zip(orbit[k0:], orbit[k0 + 1 :]))

    passed = not violations and tail_ok and crit_ok
    report = EscapeReport(passed, margins, rigorous, violations, orbit, crit_ok, tuple(grid))
    if raise_on_fail and not passed:
        witness = violations[0][1] if violations else None
        raise CertificateFailed("escape certificate failed", witness=witness)
    return report


def projection_intervals(spec: SectorSpec) -> list:
    """Exact real projections ``[lo, hi]`` of the closed sectors."""
    a = spec.half_width / spec.d
    out = []
    for t in spec.centers:
        angs = [t - a, t + a]
        for special in (0.0, math.pi):
            if abs(_wrap(special - t)) <= a:
                angs.append(special)
        vals = [r * math.cos(th) for th in angs for r in (spec.r_c, spec.R_c)]
        out.append((min(vals), max(vals)))
    return out


def projection_disjointness(spec: SectorSpec, raise_on_fail: bool = True) -> float:
    """Smallest gap between the real projections of distinct sectors."""
    iv = projection_intervals(spec)
    gap = math.inf
    worst = None
    for i in range(len(iv)):
        for j in range(i + 1, len(iv)):
            g = max(iv[j][0] - iv[i][1], iv[i][0] - iv[j][1])
            if g < gap:
                gap, worst = g, (i, j)
    if raise_on_fail and gap <= 0:
        raise CertificateFailed(f"sectors {worst} have overlapping real projections", witness=worst)
    return float(gap)


# ----------------------------------------------------------------------------
# symbolic coding


def _dps_for(spec: SectorSpec, L: int) -> int:
    expansion = spec.d * spec.R_c ** (spec.d - 1)
    return 30 + int(math.ceil(L * math.log10(expansion)))


def _branch_mp(spec: SectorSpec, target, k: int):
    """The preimage of ``target`` under ``P`` whose argument is nearest the centre of ``V_k``."""
    rhs = -1j * (target + mpmath.expj(mpmath.mpf(spec.psi)) * spec.c)
    base = mpmath.root(rhs, spec.d)
    t = spec.centers[k]
    best = None
    for j in range(spec.d):
        w = base * mpmath.expj(2 * mpmath.pi * j / spec.d)
        dist = abs(_wrap(float(mpmath.arg(w)) - t))
        if best is None or dist < best[0]:
            best = (dist, w)
    return best[1]


def sector_center(spec: SectorSpec, k: int) -> complex:
    r = 0.5 * (spec.r_c + spec.R_c)
    return r * complex(math.cos(spec.centers[k]), math.sin(spec.centers[k]))


@dataclass
class NestPoint:
    z: complex
    #: the same point at the working precision of the nest
    z_mp: object
    #: bound on the diameter of the set of points with this prefix
    diameter: float
    dps: int


def nest_diameter(spec: SectorSpec, L: int) -> float:
    """``diam(V) * (1 / (d r_c^(d-1)))^L``: every inverse branch contracts by that factor."""
    a = spec.half_width / spec.d
    diam_v = (spec.R_c - spec.r_c) + 2.0 * spec.R_c * math.sin(a)
    lam = 1.0 / (spec.d * spec.r_c ** (spec.d - 1))
    return float(diam_v * lam**L)


def itinerary_to_point(P: ComplexPolynomial, spec: SectorSpec, prefix: Sequence[int], dps: Optional[int] = None) -> NestPoint:
    """The point of the nest coded by ``prefix`` (0-based sector symbols).

    Starts at the centre of the last symbol's sector and pulls back through
    the branches into ``V_{a_k}`` for ``k = L-1, ..., 0``.
    """
    prefix = [int(s) for s in prefix]
    L = len(prefix)
    if L < 1:
        raise ValueError("prefix must be non-empty")
    if any(not 0 <= s < spec.d for s in prefix):
        raise ValueError("symbol out of range")
    dps = _dps_for(spec, L) if dps is None else dps
    with mpmath.workdps(dps):
        w = mpmath.mpc(sector_center(spec, prefix[-1]))
        for k in range(L - 1, -1, -1):
            w = _branch_mp(spec, w, prefix[k])
            if sector_index(spec, complex(w)) != prefix[k]:
                raise BranchMiss(f"inverse branch left V_{prefix[k]} at position {k}")
        z = +w
    return NestPoint(complex(z), z, nest_diameter(spec, L), dps)


def point_to_itinerary(P: ComplexPolynomial, spec: SectorSpec, z, n: int, dps: Optional[int] = None) -> list:
    """Sector symbols of ``z, P(z), ..., P^(n-1)(z)``.

    ``z`` may be an mpmath number (used at its working precision) or a
    double, which is then iterated at a precision sufficient for ``n`` steps.
    """
    if isinstance(z, NestPoint):
        dps = z.dps if dps is None else dps
        z = z.z_mp
    dps = _dps_for(spec, n) if dps is None else dps
    out = []
    with mpmath.workdps(dps):
        w = mpmath.mpc(z)
        c0 = -mpmath.expj(mpmath.mpf(spec.psi)) * spec.c
        for k in range(n):
            s = int(sector_index(spec, complex(w)))
            if s < 0:
                raise EscapedJulia(f"orbit left V at step {k}")
            out.append(s)
            w = 1j * w**spec.d + c0
    return out


def branch_chains(spec: SectorSpec, itineraries: np.ndarray) -> np.ndarray:
    """Orbits of the nest points of many itineraries, from their pullback chains.

    ``itineraries`` has shape ``(B, L)``; the result has the same shape with
    entry ``[b, k]`` the point ``P^k(z_b)``.  The chain is computed backwards
    in double precision, where every step contracts, so each entry is
    accurate to rounding even though forward iteration would not be.
    """
    its = np.asarray(itineraries, dtype=int)
    B, L = its.shape
    d = spec.d
    centers = np.array(spec.centers)
    rot = np.exp(1j * spec.psi) * spec.c
    omega = np.exp(2j * np.pi * np.arange(d) / d)
    out = np.empty((B, L), dtype=complex)
    r_mid = 0.5 * (spec.r_c + spec.R_c)
    w = r_mid * np.exp(1j * centers[its[:, -1]])
    for k in range(L - 1, -1, -1):
        base = (-1j * (w + rot)) ** (1.0 / d)
        cand = base[:, None] * omega[None, :]
        dist = np.abs(_wrap(np.angle(cand) - centers[its[:, k]][:, None]))
        w = cand[np.arange(B), np.argmin(dist, axis=1)]
        out[:, k] = w
    if np.any(sector_index(spec, out) != its):
        raise BranchMiss("an inverse branch left its target sector")
    return out


@dataclass
class NoMirrorReport:
    passed: bool
    gap: float
    coding_injective: bool
    empirical_pairs: int
    #: largest step at which a sampled pair first shows different real parts
    max_separation_step: int
    #: every pair separates no later than its first differing symbol
    separates_by_first_symbol: bool
    K: int

    def to_json_obj(self) -> dict:
        return {
            "pass": self.passed,
            "gap": self.gap,
            "empirical_pairs": self.empirical_pairs,
            "max_separation_step": self.max_separation_step,
        }


def no_mirror_certificate(
    P: ComplexPolynomial,
    spec: SectorSpec,
    n_pairs: int = 10_000,
    K: int = 30,
    seed=0,
    tol: float = 1e-10,
    declared_gap: Optional[float] = None,
    escape: Optional[EscapeReport] = None,
) -> NoMirrorReport:
    """Julia points of the family have no mirrors.

    Distinct Julia points have distinct itineraries, and at the first
    differing symbol they sit in sectors with disjoint real projections, so
    their real parts differ by at least the projection gap.  The empirical
    part draws ``n_pairs`` pairs of random itineraries of length ``K + 1``,
    builds their orbits from pullback chains and confirms that the real
    parts separate by step ``K``.  ``declared_gap`` replaces the computed gap
    (for negative controls).
    """
    gap = projection_disjointness(spec) if declared_gap is None else float(declared_gap)
    if gap <= 0:
        raise CertificateFailed(f"projection gap {gap:.3g} is not positive", witness=gap)
    escape = escape_certificate(spec) if escape is None else escape
    if not escape.passed:
        raise CertificateFailed("escape certificate failed, coding not injective")
    rng = np.random.default_rng(seed)
    L = K + 1
    a = rng.integers(0, spec.d, size=(n_pairs, L))
    b = rng.integers(0, spec.d, size=(n_pairs, L))
    same = np.all(a == b, axis=1)
    while same.any():
        b[same] = rng.integers(0, spec.d, size=(int(same.sum()), L))
        same = np.all(a == b, axis=1)
    oa = branch_chains(spec, a)
    ob = branch_chains(spec, b)
    scale = np.maximum(1.0, np.maximum(np.abs(oa), np.abs(ob)))
    differs = np.abs(oa.real - ob.real) > tol * scale
    sep = np.where(differs.any(axis=1), np.argmax(differs, axis=1), L)
    first_sym = np.argmax(a != b, axis=1)
    max_sep = int(sep.max())
    passed = bool(max_sep <= K)
    if not passed:
        i = int(np.argmax(sep))
        raise CertificateFailed("a sampled Julia pair stayed mirrored through K", witness=(complex(oa[i, 0]), complex(ob[i, 0])))
    return NoMirrorReport(
        passed,
        gap,
        bool(escape.passed),
        n_pairs,
        max_sep,
        bool(np.all(sep <= first_sym)),
        K,
    )
