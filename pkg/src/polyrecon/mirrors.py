"""Divided differences, the mirrored variety and periodic-point mirror scans.

``R_n(z, w)`` is the polynomial with ``P^n(z) - P^n(w) = (z - w) R_n(z, w)``.
Setting ``Q_0 = Re(z - w)`` and ``Q_n = Im R_n`` for ``n >= 1``, a pair with
``Q_0 = ... = Q_n = 0`` has matching real parts through step ``n``, because
``Re(P^k z - P^k w) = Re(z - w) Re R_k - Im(z - w) Im R_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import PrematureRadius
from .poly import (
    ComplexPolynomial,
    Kind,
    bottcher,
    classify,
    critical_points,
    derivative,
    escape_radius,
)
from .reconstruction import (
    MirrorPair,
    break_time,
    find_mirrors_on_level_curve,
    matching_prefix,
    mirror_test,
    sort_pairs,
)

DIAGONAL_SWITCH = 1e-8


@dataclass(frozen=True)
class PairPoint:
    z: complex
    w: complex

    @property
    def on_diagonal(self) -> bool:
        return self.z == self.w


def _r1(P: ComplexPolynomial, z, w):
    """One-step divided difference by synthetic division of ``P`` at ``w``.

    ``b_d = a_d``, ``b_k = b_{k+1} w + a_k`` are the quotient coefficients of
    ``P(x) / (x - w)``; Horner in ``z`` over them gives ``R_1(z, w)``.
    """
    a = P._py
    d = len(a) - 1
    b = a[d]
    r = b
    for k in range(d - 1, 0, -1):
        b = b * w + a[k]
        r = r * z + b
    return r


def divided_difference(P: ComplexPolynomial, n: int, z, w):
    """``R_n(z, w)`` as the product of one-step divided differences along both orbits.

    Works elementwise on arrays.  Pairs closer than ``1e-8`` (relative) use
    ``P'`` at the orbit midpoints instead, which equals ``R_1`` up to
    ``O(|z - w|^2)`` and gives ``(P^n)'(z)`` exactly on the diagonal.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    dP = derivative(P)
    with np.errstate(all="ignore"):
        near = np.abs(z - w) < DIAGONAL_SWITCH * np.maximum(1.0, np.maximum(np.abs(z), np.abs(w)))
        out = np.ones(np.broadcast(z, w).shape, dtype=complex)
        for _ in range(n):
            step = np.where(near, dP(0.5 * (z + w)), _r1(P, z, w))
            out = out * step
            z, w = P(z), P(w)
    return out[()] if out.ndim == 0 else out


def q_n(P: ComplexPolynomial, n: int, z, w):
    """``Q_0 = Re(z - w)``; ``Q_n = Im R_n(z, w)`` for ``n >= 1``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        d = np.asarray(z, dtype=complex) - np.asarray(w, dtype=complex)
        return d.real[()] if d.ndim == 0 else d.real
    r = np.asarray(divided_difference(P, n, z, w))
    return r.imag[()] if r.ndim == 0 else r.imag


def _q_scaled(P, n, z, w):
    """``Q_n`` divided by ``max(1, |R_n|)`` (``Q_0`` unscaled)."""
    if n == 0:
        return q_n(P, 0, z, w)
    r = np.asarray(divided_difference(P, n, z, w))
    with np.errstate(all="ignore"):
        return r.imag / np.maximum(1.0, np.abs(r))


def psi_iterate(P: ComplexPolynomial, pair: PairPoint, n: int, check_depth: Optional[int] = None, tol: float = 1e-8) -> PairPoint:
    """``Psi^n(z, w) = (P^n z, P^n w)``.

    With ``check_depth = K`` and an input mirrored through ``K`` steps, the
    output is checked to stay mirrored through ``K - n`` steps.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    z, w = complex(pair.z), complex(pair.w)
    for _ in range(n):
        z, w = P(z), P(w)
    out = PairPoint(z, w)
    if check_depth is not None and pair.z != pair.w and check_depth > n:
        if matching_prefix(P, pair.z, pair.w, check_depth, tol) > check_depth:
            left = check_depth - n
            if not out.on_diagonal and matching_prefix(P, z, w, left, tol) <= left:
                raise ValueError("image pair lost the mirror prefix")
    return out


# ----------------------------------------------------------------------------
# the mirrored variety


@dataclass
class VarietySample:
    points: list
    max_n: int
    residual: float
    seeds: int = 0

    def as_array(self) -> np.ndarray:
        """``(M, 4)`` array ``z_re, z_im, w_re, w_im``."""
        if not self.points:
            return np.zeros((0, 4))
        return np.array([[p.z.real, p.z.imag, p.w.real, p.w.imag] for p in self.points])


VARIETY_CSV_HEADER = ["z_re", "z_im", "w_re", "w_im", "max_residual"]


def _system(P, u, n_eq):
    z = u[:, 0] + 1j * u[:, 1]
    w = u[:, 2] + 1j * u[:, 3]
    return np.stack([_q_scaled(P, n, z, w) for n in range(n_eq)], axis=1)


def _gauss_newton(P, u, n_eq, steps, h=1e-7):
    """Minimum-norm Gauss-Newton steps on the first ``n_eq`` equations."""
    with np.errstate(all="ignore"):
        for _ in range(steps):
            F = _system(P, u, n_eq)
            scale = np.maximum(1.0, np.abs(u).max(axis=1))
            J = np.empty((u.shape[0], n_eq, 4))
            for c in range(4):
                e = np.zeros(4)
                e[c] = 1.0
                hh = (h * scale)[:, None] * e
                J[:, :, c] = (_system(P, u + hh, n_eq) - _system(P, u - hh, n_eq)) / (2 * h * scale)[:, None]
            ok = np.all(np.isfinite(J), axis=(1, 2)) & np.all(np.isfinite(F), axis=1)
            step = np.zeros_like(u)
            if ok.any():
                step[ok] = -np.einsum("bij,bj->bi", np.linalg.pinv(J[ok]), F[ok])
            u = u + step
    return u


def sample_variety(
    P: ComplexPolynomial,
    max_n: int = 2,
    region=None,
    grid: int = 8,
    refine_steps: int = 25,
    residual: float = 1e-9,
    n_newton: int = 3,
) -> VarietySample:
    """Points of the truncated mirrored variety ``{Q_0 = ... = Q_max_n = 0}``.

    Seeds form a regular ``grid^4`` lattice over ``region x region`` (region is
    ``(xmin, xmax, ymin, ymax)``, default the escape square).  Each seed is
    refined by minimum-norm Gauss-Newton on ``Q_0, ..., Q_{n_newton - 1}``
    and kept when ``|Q_0| <= residual`` and ``|Q_n| <= residual * max(1, |R_n|)``
    for ``n <= max_n``.  Off-diagonal survivors must also pass
    :func:`mirror_test` through ``max_n`` at tolerance ``10 * residual``.
    """
    if region is None:
        r = escape_radius(P)
        region = (-r, r, -r, r)
    xmin, xmax, ymin, ymax = region
    # cell centres, so the lattice avoids the diagonal and symmetry lines
    xs = xmin + (np.arange(grid) + 0.5) * (xmax - xmin) / grid
    ys = ymin + (np.arange(grid) + 0.37) * (ymax - ymin) / grid
    g = np.stack(np.meshgrid(xs, ys, xs[::-1], ys, indexing="ij"), axis=-1).reshape(-1, 4)
    n_eq = min(n_newton, max_n + 1)
    u = _gauss_newton(P, g, n_eq, refine_steps)
    z = u[:, 0] + 1j * u[:, 1]
    w = u[:, 2] + 1j * u[:, 3]
    keep = np.all(np.isfinite(u), axis=1)
    keep &= (u[:, 0] >= xmin) & (u[:, 0] <= xmax) & (u[:, 1] >= ymin) & (u[:, 1] <= ymax)
    keep &= (u[:, 2] >= xmin) & (u[:, 2] <= xmax) & (u[:, 3] >= ymin) & (u[:, 3] <= ymax)
    with np.errstate(all="ignore"):
        for n in range(max_n + 1):
            keep &= np.abs(_q_scaled(P, n, z, w)) <= residual
    pts = []
    for zi, wi in zip(z[keep], w[keep]):
        if zi != wi and not mirror_test(P, zi, wi, max(1, max_n), 10 * residual):
            continue
        pts.append(PairPoint(complex(zi), complex(wi)))
    pts.sort(key=lambda p: (p.z.real, p.z.imag, p.w.real, p.w.imag))
    return VarietySample(pts, max_n, residual, seeds=g.shape[0])


def local_dimension(points: np.ndarray, k: int = 8, ratio: float = 10.0) -> np.ndarray:
    """Local PCA dimension of a point cloud: singular values above ``s_max / ratio``."""
    from scipy.spatial import cKDTree

    X = np.asarray(points, dtype=float)
    if X.shape[0] <= k:
        return np.zeros(0, dtype=int)
    _, idx = cKDTree(X).query(X, k=k + 1)
    dims = np.empty(X.shape[0], dtype=int)
    for i, nb in enumerate(idx):
        Y = X[nb] - X[nb].mean(axis=0)
        s = np.linalg.svd(Y, compute_uv=False)
        dims[i] = int(np.sum(s > s[0] / ratio)) if s[0] > 0 else 0
    return dims


@dataclass
class DiagonalReport:
    critical_points: list
    #: sampled variety points within tol of the diagonal but away from critical points
    anomalies: list = field(default_factory=list)


def diagonal_intersection(P: ComplexPolynomial, tol: float = 1e-4, sample: Optional[VarietySample] = None) -> DiagonalReport:
    """Critical points of ``P`` plus any off-critical near-diagonal variety samples."""
    crit = [complex(c) for c in critical_points(P)]
    anomalies = []
    if sample is not None:
        for p in sample.points:
            if abs(p.z - p.w) <= tol * max(1.0, abs(p.z)):
                m = 0.5 * (p.z + p.w)
                if all(abs(m - c) > math.sqrt(tol) for c in crit):
                    anomalies.append(p)
    return DiagonalReport(crit, anomalies)


# ----------------------------------------------------------------------------
# near infinity


@dataclass
class AsymptoticReport:
    radii: list
    pair_counts: list
    #: max |w - conj z| over the pairs at each radius
    deviations: list
    #: max |P(z) - P(w)| / scale at each radius
    break_residuals: list
    constant: float
    all_break_at_one: bool
    pairs: list = field(default_factory=list)


def asymptotic_mirror_check(P: ComplexPolynomial, radii: Sequence[float] = (1e3, 1e6), tol: float = 1e-6, grid: int = 512) -> AsymptoticReport:
    """Mirrors on far equipotentials sit at bounded distance from conjugate pairs.

    For every radius the level-curve mirrors are collected and
    ``max |w - conj z|`` is recorded; the fitted constant is the largest of
    these.  :class:`PrematureRadius` is raised when the deviation more than
    doubles from one radius to the next (beyond rounding) or a pair fails to
    break at time 1.
    """
    if abs(P.leading.imag) <= 1e-12 * abs(P.leading):
        raise ValueError("leading coefficient must be non-real")
    if classify(P).kind is not Kind.NON:
        raise ValueError("polynomial must be non-exceptional")
    counts, devs, res, allp = [], [], [], []
    ok = True
    for R in radii:
        pairs = find_mirrors_on_level_curve(P, R, grid, K=5, tol=tol)
        dev, worst = 0.0, 0.0
        for p in pairs:
            z, w = p.z, p.w
            dev = max(dev, abs(w - np.conj(z)), abs(z - np.conj(w)))
            a, b = P(z), P(w)
            worst = max(worst, abs(a - b) / max(1.0, abs(a), abs(b)))
            ok &= p.break_time == 1
        counts.append(len(pairs))
        devs.append(float(dev))
        res.append(float(worst))
        allp.extend(pairs)
    report = AsymptoticReport(list(radii), counts, devs, res, max(devs) if devs else 0.0, bool(ok), allp)
    if not ok or any(c == 0 for c in counts):
        raise PrematureRadius("level-curve pairs missing or not breaking at time 1")
    for (r0, d0), (r1, d1) in zip(zip(radii, devs), zip(radii[1:], devs[1:])):
        slack = 1e-9 * r1 ** (1.0 / P.degree)
        if d1 > 2 * d0 + slack:
            raise PrematureRadius(f"|w - conj z| grew from {d0:.3g} to {d1:.3g} between R={r0:g} and R={r1:g}")
    return report


# ----------------------------------------------------------------------------
# periodic points


def compose_coeffs(P: ComplexPolynomial, n: int) -> np.ndarray:
    """Ascending coefficients of ``P^n``."""
    pp = np.polynomial.polynomial
    cur = np.array([0.0, 1.0], dtype=complex)
    for _ in range(n):
        acc = np.array([P.coeffs[-1]])
        for a in P.coeffs[-2::-1]:
            acc = pp.polymul(acc, cur)
            acc[0] += a
        cur = acc
    return cur


def _newton_periodic(P, dP, z, n, steps=30):
    with np.errstate(all="ignore"):
        for _ in range(steps):
            w, dw = z.copy(), np.ones_like(z)
            for _ in range(n):
                dw = dw * dP(w)
                w = P(w)
            step = (w - z) / (dw - 1.0)
            ok = np.isfinite(step)
            z = np.where(ok, z - step, z)
            if np.all(np.abs(step[ok]) <= 1e-15 * np.maximum(1.0, np.abs(z[ok]))):
                break
    return z


def periodic_points(P: ComplexPolynomial, period_max: int) -> np.ndarray:
    """Distinct periodic points of period ``<= period_max``, sorted by (re, im)."""
    d = P.degree
    if period_max * d**period_max > 1_000_000:
        raise ValueError("period_max * d^period_max exceeds 1e6")
    dP = derivative(P)
    found = []
    for n in range(1, period_max + 1):
        c = compose_coeffs(P, n)
        c[1] -= 1.0
        r = np.polynomial.polynomial.polyroots(c)
        found.append(_newton_periodic(P, dP, r.astype(complex), n))
    pts = np.concatenate(found)
    pts = pts[np.lexsort((pts.imag, pts.real))]
    out = []
    for p in pts:
        if all(abs(p - q) > 1e-8 * max(1.0, abs(p)) for q in out):
            out.append(p)
    out = np.array(out, dtype=complex)
    return out[np.lexsort((out.imag, out.real))] if out.size else out


def periodic_mirror_scan(P: ComplexPolynomial, period_max: int = 2, tol: float = 1e-8) -> list:
    """Pairs of distinct periodic points whose orbits have equal real parts throughout.

    Orbits are followed by snapping each image to the nearest computed
    periodic point, so comparisons along a cycle carry no rounding drift.
    """
    pts = periodic_points(P, period_max)
    if pts.size == 0:
        return []
    img = P(pts)
    nxt = np.array([int(np.argmin(np.abs(pts - v))) for v in img])
    span = period_max * period_max
    pairs = []
    for i in range(pts.size):
        for j in range(i + 1, pts.size):
            a, b = i, j
            ok = True
            for _ in range(span + 1):
                za, zb = pts[a], pts[b]
                if abs(za.real - zb.real) > tol * max(1.0, abs(za), abs(zb)):
                    ok = False
                    break
                a, b = nxt[a], nxt[b]
            if ok:
                pairs.append(MirrorPair(pts[i], pts[j], span, None, tol, "periodic"))
    return sort_pairs(pairs)


# ----------------------------------------------------------------------------
# pooled sources


def default_level_radius(P: ComplexPolynomial) -> float:
    """A Green level ``log R`` safely outside the escape disk."""
    beta = abs(P.leading) ** (1.0 / (P.degree - 1))
    return float(max(1e3, 4.0 * escape_radius(P) * beta))


def collect_mirror_sources(
    P: ComplexPolynomial,
    radii: Optional[Sequence[float]] = None,
    grid: int = 256,
    period_max: int = 2,
    variety_grid: int = 6,
    variety_max_n: int = 2,
    tol: float = 1e-8,
    K: int = 30,
) -> list:
    """Candidate mirrored pairs from equipotentials, periodic points and the variety."""
    if radii is None:
        R = default_level_radius(P)
        radii = (R, R * R)
    out = []
    for R in radii:
        out.extend(find_mirrors_on_level_curve(P, R, grid, K=K, tol=max(tol, 1e-6)))
    if period_max >= 1 and period_max * P.degree**period_max <= 1_000_000:
        out.extend(periodic_mirror_scan(P, period_max, tol))
    if variety_grid:
        vs = sample_variety(P, variety_max_n, grid=variety_grid)
        for p in vs.points:
            if p.z != p.w:
                out.append(MirrorPair.measure(P, p.z, p.w, K, 10 * vs.residual, source="variety"))
    return out
