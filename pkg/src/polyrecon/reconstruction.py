"""Real-orbit windows, mirrored pairs and the inverse map tau.

A window is ``Phi(z) = (Re z, Re P(z), ..., Re P^N(z))``.  Two distinct points
are mirrored when all their real parts agree along the orbit; the mirror
breaks at the first time the orbits coincide.  All orbit comparisons use the
relative scale ``max(1, |P^k z|, |P^k w|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import AmbiguousImage, NoPreimage, Unstable, WitnessMismatch
from .poly import ComplexPolynomial, Escaped, escape_radius, iterate, level_points, preimages


@dataclass(frozen=True)
class RealOrbitVector:
    window: tuple
    origin_hint: Optional[complex] = None

    def __post_init__(self):
        object.__setattr__(self, "window", tuple(float(x) for x in self.window))
        if len(self.window) < 2:
            raise ValueError("a window needs N + 1 >= 2 entries")

    @property
    def N(self) -> int:
        return len(self.window) - 1

    def as_array(self) -> np.ndarray:
        return np.array(self.window)


def rho(x: RealOrbitVector, y: RealOrbitVector) -> float:
    """Max-coordinate distance between two windows of equal length."""
    if x.N != y.N:
        raise ValueError("windows differ in length")
    return float(np.max(np.abs(x.as_array() - y.as_array())))


def phi(P: ComplexPolynomial, z, N: int):
    """The window of ``z``, or :class:`Escaped` if the orbit overflows."""
    if N < 1:
        raise ValueError("N must be >= 1")
    value, orbit = iterate(P, z, N, escape_radius=1e150)
    if isinstance(value, Escaped):
        return value
    return RealOrbitVector([w.real for w in orbit], origin_hint=complex(z))


def shift(P: ComplexPolynomial, x: RealOrbitVector, z_witness, tol: float = 1e-9) -> RealOrbitVector:
    """The induced map on windows, evaluated with the help of a witness point.

    The first ``N`` entries of the result are the last ``N`` entries of ``x``.
    """
    own = phi(P, z_witness, x.N + 1)
    if isinstance(own, Escaped):
        raise WitnessMismatch("witness orbit escaped")
    head = RealOrbitVector(own.window[:-1])
    scale = max(1.0, max(abs(v) for v in head.window))
    if rho(head, x) > tol * scale:
        raise WitnessMismatch(f"witness window differs from x by {rho(head, x):.3g}")
    return RealOrbitVector(x.window[1:] + own.window[-1:], origin_hint=P(complex(z_witness)))


def _pair_orbits(P, z, w, K):
    """Orbits of ``z`` and ``w`` up to ``K`` steps (may contain inf/nan)."""
    oz = np.empty(K + 1, dtype=complex)
    ow = np.empty(K + 1, dtype=complex)
    oz[0], ow[0] = z, w
    with np.errstate(all="ignore"):
        for k in range(1, K + 1):
            oz[k] = P(oz[k - 1])
            ow[k] = P(ow[k - 1])
    return oz, ow


def _scale(a, b):
    with np.errstate(invalid="ignore"):
        return np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def matching_prefix(P: ComplexPolynomial, z, w, K: int, tol: float) -> int:
    """Number of leading steps ``k <= K`` with matching real parts.

    Steps where both orbits have overflowed count as matching: escaped orbits
    carry no further information at double precision.
    """
    oz, ow = _pair_orbits(P, complex(z), complex(w), K)
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(oz) & np.isfinite(ow) & (np.abs(oz.real - ow.real) <= tol * _scale(oz, ow))
    gone = ~np.isfinite(oz) & ~np.isfinite(ow)
    ok |= gone
    bad = np.nonzero(~ok)[0]
    return int(bad[0]) if bad.size else K + 1


def mirror_test(P: ComplexPolynomial, z, w, K: int, tol: float) -> bool:
    """True when ``Re P^k z`` and ``Re P^k w`` agree for every ``k <= K``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if complex(z) == complex(w):
        raise ValueError("diagonal pair: z == w")
    return matching_prefix(P, z, w, K, tol) > K


def break_time(P: ComplexPolynomial, z, w, max_k: int, tol: float) -> Optional[int]:
    """Least ``n <= max_k`` with ``P^n z`` equal to ``P^n w`` up to ``tol * scale``."""
    oz, ow = _pair_orbits(P, complex(z), complex(w), max_k)
    with np.errstate(invalid="ignore"):
        hit = np.isfinite(oz) & np.isfinite(ow) & (np.abs(oz - ow) <= tol * _scale(oz, ow))
    idx = np.nonzero(hit)[0]
    return int(idx[0]) if idx.size else None


@dataclass
class MirrorPair:
    z: complex
    w: complex
    prefix_len: int
    break_time: Optional[int]
    tol: float
    source: str = ""

    def __post_init__(self):
        self.z, self.w = complex(self.z), complex(self.w)
        if self.z == self.w:
            raise ValueError("diagonal pair: z == w")

    @classmethod
    def measure(cls, P, z, w, K, tol, source=""):
        """Build a pair with its prefix length (capped at ``K``) and break time."""
        pre = min(matching_prefix(P, z, w, K, tol) - 1, K)
        return cls(z, w, pre, break_time(P, z, w, K, tol), tol, source)

    def csv_row(self) -> list:
        bt = "" if self.break_time is None else self.break_time
        return [self.z.real, self.z.imag, self.w.real, self.w.imag, self.prefix_len, bt]

    def key(self):
        return (self.z.real, self.z.imag, self.w.real, self.w.imag)


MIRROR_CSV_HEADER = ["z_re", "z_im", "w_re", "w_im", "prefix_len", "break_time"]


def sort_pairs(pairs: Iterable[MirrorPair]) -> list:
    return sorted(pairs, key=MirrorPair.key)


# ----------------------------------------------------------------------------
# mirrors on equipotentials


def _track(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Reorder ``cur`` so that each entry continues the matching entry of ``prev``."""
    d = prev.size
    out = np.empty(d, dtype=complex)
    free = list(range(d))
    dist = np.abs(prev[:, None] - cur[None, :])
    for i in np.argsort(dist.min(axis=1)):
        j = min(free, key=lambda c: dist[i, c])
        out[i] = cur[j]
        free.remove(j)
    return out


def find_mirrors_on_level_curve(P: ComplexPolynomial, R: float, grid: int = 512, K: int = 20, tol: float = 1e-6) -> list:
    """Preimage pairs of the equipotential ``G = log R`` with equal real parts.

    The level curve is walked through ``grid`` angles; the ``d`` preimages of
    each point are followed by continuity and every sign change of
    ``Re w_j - Re w_k`` is refined by Brent's method.
    """
    d = P.degree
    thetas = 2 * np.pi * np.arange(grid + 1) / grid
    curve = level_points(P, R, thetas)
    pre = preimages(P, curve)
    tracked = np.empty_like(pre)
    tracked[0] = pre[0]
    for t in range(1, grid + 1):
        tracked[t] = _track(tracked[t - 1], pre[t])

    def roots_near(theta, guess):
        target = level_points(P, R, np.array([theta]))
        return _track(guess, preimages(P, target)[0])

    pairs = []
    for t in range(grid):
        a, b = tracked[t], tracked[t + 1]
        for j in range(d):
            for k in range(j + 1, d):
                fa = a[j].real - a[k].real
                fb = b[j].real - b[k].real
                if fa == 0 or fa * fb >= 0:
                    continue
                t0, t1 = thetas[t], thetas[t + 1]

                def f(th):
                    s = (th - t0) / (t1 - t0)
                    w = roots_near(th, a + s * (b - a))
                    return w[j].real - w[k].real

                th = brentq(f, t0, t1, xtol=1e-15, rtol=1e-15, maxiter=200)
                s = (th - t0) / (t1 - t0)
                w = roots_near(th, a + s * (b - a))
                z1, z2 = (w[j], w[k]) if (w[j].real, w[j].imag) <= (w[k].real, w[k].imag) else (w[k], w[j])
                pairs.append(MirrorPair.measure(P, z1, z2, K, tol, source="level_curve"))
    return sort_pairs(pairs)


# ----------------------------------------------------------------------------
# empirical constants


@dataclass
class NEstimate:
    N_hat: int
    N0: int
    #: per candidate: number of pairs agreeing through it and how many of those fail through 2x
    evidence: dict = field(default_factory=dict)

    def __int__(self):
        return self.N_hat


def _as_zw(pairs):
    for p in pairs:
        if isinstance(p, MirrorPair):
            yield p.z, p.w
        else:
            yield complex(p[0]), complex(p[1])


def estimate_N(P: ComplexPolynomial, d: Optional[int], pair_samples: Sequence, tol: float = 1e-8, cap: Optional[int] = None) -> NEstimate:
    """Smallest ``N`` in the scan ``1, 2, 4, ...`` after which sampled agreement persists.

    A candidate ``N`` is accepted when every pair whose real parts agree for
    ``k <= N`` also agrees for ``k <= 2N``.  The cap defaults to ``4 * N0`` with
    ``N0 = d^2 + 2d + 2``.
    """
    d = P.degree if d is None else int(d)
    N0 = d * d + 2 * d + 2
    cap = 4 * N0 if cap is None else cap
    pairs = list(_as_zw(pair_samples))
    evidence = {}
    n = 1
    while n <= cap:
        agree = fail = 0
        for z, w in pairs:
            pre = matching_prefix(P, z, w, 2 * n, tol) - 1
            if pre >= n:
                agree += 1
                fail += pre < 2 * n
        evidence[n] = {"agree": agree, "fail": fail}
        if fail == 0:
            return NEstimate(n, N0, evidence)
        n *= 2
    raise Unstable(f"agreement did not stabilize up to N = {cap}")


def estimate_M(P: ComplexPolynomial, mirror_sources: Sequence, max_k: int = 30, tol: float = 1e-8):
    """Largest observed break time, and the sampled mirrors that never break.

    Returns ``(M_hat, unbroken)``.  Only pairs that stay mirrored through
    ``max_k`` steps are candidates for ``unbroken``; pairs whose real parts
    separate are not mirrors and are ignored.
    """
    M_hat = 0
    unbroken = []
    for z, w in _as_zw(mirror_sources):
        if z == w:
            continue
        bt = break_time(P, z, w, max_k, tol)
        if bt == 0:
            continue  # numerically on the diagonal
        if bt is not None:
            if matching_prefix(P, z, w, bt, tol) > bt:
                M_hat = max(M_hat, bt)
        elif mirror_test(P, z, w, max_k, tol):
            unbroken.append(MirrorPair(z, w, max_k, None, tol, "unbroken"))
    return M_hat, sort_pairs(unbroken)


# ----------------------------------------------------------------------------
# the inverse map


def _vertical_line_poly(P: ComplexPolynomial, x0: float, m: int) -> np.ndarray:
    """Coefficients (ascending in v) of ``P^m(x0 + i v)`` as a complex polynomial."""
    cur = np.array([x0, 1j])
    for _ in range(m):
        acc = np.array([P.coeffs[-1]])
        for a in P.coeffs[-2::-1]:
            acc = np.polynomial.polynomial.polymul(acc, cur)
            acc[0] += a
        cur = acc
    return cur


def _real_roots(coef: np.ndarray, f, scale: float) -> list:
    """Real roots of the real polynomial ``coef`` (ascending), polished on ``f``."""
    r = np.polynomial.polynomial.polyroots(coef)
    out = []
    for v in r:
        if abs(v.imag) > 1e-6 * max(1.0, abs(v)):
            continue
        v = float(v.real)
        for _ in range(4):
            h = 1e-7 * max(1.0, abs(v))
            df = (f(v + h) - f(v - h)) / (2 * h)
            if df == 0 or not math.isfinite(df):
                break
            step = f(v) / df
            if abs(f(v - step)) >= abs(f(v)):
                break
            v -= step
        out.append(v)
    return out


def _window_ok(P, z, target, tol):
    """Window match with a tolerance that grows with the orbit's derivative."""
    x = np.asarray(target)
    w = complex(z)
    deriv = 1.0
    for k in range(x.size):
        if not math.isfinite(abs(w)):
            return False
        scale = max(1.0, abs(w))
        slack = tol * scale + 1e-13 * deriv * scale
        if abs(w.real - x[k]) > slack:
            return False
        deriv *= max(1.0, abs(P.derivative()(w)))
        w = P(w)
    return True


def preimage_windows(P: ComplexPolynomial, x: RealOrbitVector, search_region=None, tol: float = 1e-6, max_depth: int = 3) -> list:
    """All points ``z`` in the search region whose window equals ``x``.

    Because ``Re z = x_0`` pins ``z`` to a vertical line, the first nontrivial
    window equation ``Re P^m(x_0 + i v) = x_m`` is a real polynomial in ``v``;
    its real roots are the candidates, filtered by the full window.  Raises
    :class:`AmbiguousImage` with an empty value list when all equations up to
    ``max_depth`` vanish identically (a continuum of solutions).
    """
    xs = x.as_array()
    x0 = xs[0]
    if search_region is None:
        r = escape_radius(P)
        search_region = (-r, r, -r, r)
    xmin, xmax, ymin, ymax = search_region
    if not (xmin <= x0 <= xmax):
        return []
    cands = None
    for m in range(1, min(x.N, max_depth) + 1):
        coef = _vertical_line_poly(P, x0, m).real.copy()
        coef[0] -= xs[m]
        size = np.max(np.abs(coef))
        ref = max(1.0, abs(xs[m]), np.max(np.abs(_vertical_line_poly(P, x0, m))))
        if size <= 1e-12 * ref:
            continue

        def f(v, m=m):
            _, orb = iterate(P, complex(x0, v), m, escape_radius=math.inf)
            return orb[-1].real - xs[m]

        cands = _real_roots(np.trim_zeros(coef, "b"), f, ref)
        break
    if cands is None:
        raise AmbiguousImage("window equations vanish identically on the vertical line", values=())
    sols = []
    size = max(xmax - xmin, ymax - ymin)
    for v in sorted(cands):
        if not (ymin <= v <= ymax):
            continue
        z = complex(x0, v)
        if _window_ok(P, z, xs, tol) and all(abs(z - s) > 1e-6 * size for s in sols):
            sols.append(z)
    return sorted(sols, key=lambda c: (c.real, c.imag))


def tau(P: ComplexPolynomial, x: RealOrbitVector, M: int, search_region=None, tol: float = 1e-6) -> complex:
    """Recover ``P^M(z)`` from the window ``x = Phi(z)``."""
    if M > x.N:
        raise ValueError("M must not exceed the window length N")
    sols = preimage_windows(P, x, search_region, tol)
    if not sols:
        raise NoPreimage("no point of the search region has this window")
    vals = []
    for z in sols:
        _, orb = iterate(P, z, M, escape_radius=math.inf)
        vals.append(orb[-1])
    v0 = vals[0]
    for v in vals[1:]:
        if abs(v - v0) > tol * max(1.0, abs(v0)):
            raise AmbiguousImage(f"{len(vals)} solutions disagree after {M} steps", values=tuple(vals))
    return complex(v0)
