"""Complex polynomials and the one-variable machinery built on them.

Coefficients are stored in ascending order ``a_0, ..., a_d``.  Everything that
can be vectorized accepts numpy arrays of points; scalar inputs return Python
``complex`` values.  mpmath numbers are accepted by :meth:`ComplexPolynomial.__call__`
and :func:`iterate` so that the Cantor-family code can run orbits at extended
precision with the same objects.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np

from .errors import NonConvergence, RadiusTooSmall

#: Relative tolerance for deciding that a floating point coefficient is real.
REALITY_TOL = 1e-10

ROOT_TOL = 1e-12
ROOT_MAX_SWEEPS = 200
ROOT_RESIDUAL = 1e-10

_I_POW = (1, 1j, -1, -1j)


def _is_mp(z):
    return isinstance(z, (mpmath.mpc, mpmath.mpf))


class ComplexPolynomial:
    """Polynomial with complex coefficients, ascending degree.

    Trailing coefficients with modulus ``<= 1e-12 * max|a_k|`` are dropped, so
    the stored leading coefficient is always significant.
    """

    __slots__ = ("coeffs", "_py")

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex)).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        big = np.max(np.abs(c))
        keep = c.size
        while keep > 1 and abs(c[keep - 1]) <= 1e-12 * big:
            keep -= 1
        self.coeffs = c[:keep]
        self.coeffs.setflags(write=False)
        self._py = tuple(complex(a) for a in self.coeffs)

    # -- basic protocol -------------------------------------------------
    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def leading(self) -> complex:
        return self._py[-1]

    def __repr__(self):
        terms = ", ".join(repr(a) for a in self._py)
        return f"ComplexPolynomial([{terms}])"

    def __eq__(self, other):
        if not isinstance(other, ComplexPolynomial):
            return NotImplemented
        return self._py == other._py

    def __hash__(self):
        return hash(self._py)

    def __call__(self, z):
        """Horner evaluation; overflow saturates to ``inf``/``nan``."""
        if _is_mp(z):
            acc = mpmath.mpc(self._py[-1])
            for a in reversed(self._py[:-1]):
                acc = acc * z + a
            return acc
        if np.isscalar(z):
            z = complex(z)
            acc = self._py[-1]
            try:
                for a in reversed(self._py[:-1]):
                    acc = acc * z + a
            except OverflowError:
                return complex(math.inf, math.inf)
            return acc
        z = np.asarray(z, dtype=complex)
        with np.errstate(over="ignore", invalid="ignore"):
            acc = np.full(z.shape, self.coeffs[-1], dtype=complex)
            for a in self.coeffs[-2::-1]:
                acc = acc * z + a
        return acc

    def with_constant(self, shift) -> "ComplexPolynomial":
        """Return ``P - shift``."""
        c = np.array(self.coeffs)
        c[0] -= shift
        return ComplexPolynomial(c)

    def scale(self, z):
        """``sum |a_k| |z|^k``, the natural size of the terms of ``P(z)``."""
        r = np.abs(z)
        acc = np.zeros(np.shape(r)) + abs(self._py[-1])
        for a in reversed(self._py[:-1]):
            acc = acc * r + abs(a)
        return acc

    # -- serialization ---------------------------------------------------
    def to_json_obj(self) -> dict:
        return {"coeffs": [[a.real, a.imag] for a in self._py]}

    @classmethod
    def from_json_obj(cls, obj) -> "ComplexPolynomial":
        try:
            raw = obj["coeffs"]
            coeffs = [complex(float(re), float(im)) for re, im in raw]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed polynomial object: {exc}") from None
        if not coeffs:
            raise ValueError("malformed polynomial object: empty coefficient list")
        return cls(coeffs)

    # -- convenience -----------------------------------------------------
    def derivative(self) -> "ComplexPolynomial":
        return derivative(self)

    def escape_radius(self) -> float:
        return escape_radius(self)


def eval_poly(P: ComplexPolynomial, z):
    """Evaluate ``P`` at ``z`` (scalar or array) by Horner's scheme."""
    return P(z)


def derivative(P: ComplexPolynomial) -> ComplexPolynomial:
    if P.degree == 0:
        return ComplexPolynomial([0.0])
    k = np.arange(1, P.degree + 1)
    return ComplexPolynomial(P.coeffs[1:] * k)


def rotate_conjugate(P: ComplexPolynomial, phi: float) -> ComplexPolynomial:
    """Conjugate by the rotation ``z -> e^{i phi} z``: ``e^{i phi} P(z e^{-i phi})``."""
    k = np.arange(P.degree + 1)
    return ComplexPolynomial(P.coeffs * np.exp(1j * (1 - k) * phi))


def escape_radius(P: ComplexPolynomial) -> float:
    """Radius beyond which ``|P(z)| >= 2|z|``, so orbits escape monotonically.

    For ``|z| >= r`` with ``r = max(1, 2 S / |a_d|, (4 / |a_d|)^(1/(d-1)))``,
    ``S = sum_{k<d} |a_k|``, we get ``|P(z)| >= |a_d||z|^d / 2 >= 2|z|`` and
    ``|P(z) / (a_d z^d) - 1| <= 1/2``.
    """
    d = P.degree
    if d < 2:
        raise ValueError("escape radius needs degree >= 2")
    ad = abs(P.leading)
    s = sum(abs(a) for a in P._py[:-1])
    return float(max(1.0, 2.0 * s / ad, (4.0 / ad) ** (1.0 / (d - 1))))


_escape_radius_of = escape_radius


# ----------------------------------------------------------------------------
# iteration


@dataclass(frozen=True)
class Escaped:
    """Marker returned by :func:`iterate` when the orbit left the escape disk."""

    step: int


def iterate(P: ComplexPolynomial, z, n: int, escape_radius: Optional[float] = None):
    """Iterate ``n`` times.

    Returns ``(value, orbit)`` where ``orbit`` lists ``z, P(z), ...`` up to the
    last point computed and ``value`` is ``P^n(z)``, or an :class:`Escaped`
    marker carrying the first step whose modulus exceeds ``escape_radius``.
    Pass ``escape_radius=math.inf`` to disable the escape test.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    R = _escape_radius_of(P) if escape_radius is None else escape_radius
    orbit = [z if _is_mp(z) else complex(z)]
    if abs(orbit[0]) > R:
        return Escaped(0), orbit
    w = orbit[0]
    for k in range(1, n + 1):
        w = P(w)
        orbit.append(w)
        if not (abs(w) <= R):  # also catches nan
            return Escaped(k), orbit
    return w, orbit


def orbits(P: ComplexPolynomial, z, n: int) -> np.ndarray:
    """Vectorized orbits: array of shape ``z.shape + (n + 1,)`` with ``P^k(z)``."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape + (n + 1,), dtype=complex)
    out[..., 0] = z
    w = z
    for k in range(1, n + 1):
        w = P(w)
        out[..., k] = w
    return out


# ----------------------------------------------------------------------------
# roots


def _horner_pd(coeffs, c0, w):
    """P(w) and P'(w) for every entry of ``w`` (B, m), constant term per row."""
    d = coeffs.size - 1
    p = np.full(w.shape, coeffs[d], dtype=complex)
    dp = np.zeros(w.shape, dtype=complex)
    for k in range(d - 1, -1, -1):
        dp = dp * w + p
        ak = c0[:, None] if k == 0 else coeffs[k]
        p = p * w + ak
    return p, dp


def _quadratic_roots(a, b, c):
    """Stable roots of ``a w^2 + b w + c`` for an array of constants ``c``."""
    disc = b * b - 4.0 * a * c
    s = np.sqrt(disc)
    flip = (np.conj(b) * s).real < 0
    s = np.where(flip, -s, s)
    q = -0.5 * (b + s)
    out = np.empty(c.shape + (2,), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = q / a
        r2 = np.where(q != 0, c / q, r1)
    out[..., 0] = r1
    out[..., 1] = r2
    return out


def _aberth(coeffs, c0, tol=ROOT_TOL, max_sweeps=ROOT_MAX_SWEEPS):
    """Batched Aberth-Ehrlich iteration.  Returns (roots (B,d), converged (B,))."""
    d = coeffs.size - 1
    ad = coeffs[d]
    B = c0.size
    center = -coeffs[d - 1] / (d * ad)
    mags = np.empty((B, d))
    for k in range(d):
        ak = np.abs(c0) if k == 0 else np.full(B, abs(coeffs[k]))
        mags[:, k] = (ak / abs(ad)) ** (1.0 / (d - k))
    rho = 2.0 * mags.max(axis=1) + abs(center) + 1e-3
    ang = 2 * np.pi * np.arange(d) / d + 0.4
    w = center + rho[:, None] * np.exp(1j * ang)[None, :]
    active = np.ones(B, dtype=bool)
    eye = np.eye(d, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_sweeps):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            wa = w[idx]
            p, dp = _horner_pd(coeffs, c0[idx], wa)
            ratio = p / dp
            diff = wa[:, :, None] - wa[:, None, :]
            diff[:, eye] = np.inf
            s = np.sum(1.0 / diff, axis=2)
            corr = ratio / (1.0 - ratio * s)
            bad = ~np.isfinite(corr)
            corr[bad] = 0.0
            wa = wa - corr
            w[idx] = wa
            small = np.abs(corr) <= tol * np.maximum(1.0, np.abs(wa))
            done = np.all(small & ~bad, axis=1) | np.all(p == 0, axis=1)
            active[idx[done]] = False
    return w, ~active


def _polish(coeffs, c0, w, steps=2):
    with np.errstate(all="ignore"):
        for _ in range(steps):
            p, dp = _horner_pd(coeffs, c0, w)
            step = p / dp
            cand = w - step
            pc, _ = _horner_pd(coeffs, c0, cand)
            better = np.isfinite(cand) & (np.abs(pc) < np.abs(p))
            w = np.where(better, cand, w)
    return w


def preimages(P: ComplexPolynomial, targets) -> np.ndarray:
    """All ``d`` solutions of ``P(w) = t`` for each target, shape ``(B, d)``.

    Degree-2 and binomial polynomials use closed forms; everything else goes
    through batched Aberth iteration with a companion-matrix fallback.
    """
    t = np.atleast_1d(np.asarray(targets, dtype=complex)).ravel()
    a = P.coeffs
    d = P.degree
    if d < 1:
        raise ValueError("need degree >= 1")
    c0 = a[0] - t
    if d == 1:
        return (-c0 / a[1])[:, None]
    if d == 2:
        return _quadratic_roots(a[2], a[1], c0)
    if np.all(a[1:d] == 0):
        base = (-c0 / a[d]) ** (1.0 / d)
        omega = np.exp(2j * np.pi * np.arange(d) / d)
        return base[:, None] * omega[None, :]
    w, ok = _aberth(a, c0)
    for i in np.nonzero(~ok)[0]:
        cc = np.array(a)
        cc[0] = c0[i]
        w[i] = np.roots(cc[::-1])
    return _polish(a, c0, w)


def roots(P: ComplexPolynomial, target=0.0) -> np.ndarray:
    """All ``d`` roots of ``P(w) - target``, canonically sorted by (re, im).

    Raises :class:`NonConvergence` if any root fails the residual test
    ``|P(w) - target| <= 1e-10 * (sum |a_k||w|^k + |target|)``.
    """
    target = complex(target)
    w = preimages(P, [target])[0]
    if not _residual_ok(P, w, target):
        cc = np.array(P.coeffs)
        cc[0] -= target
        w = _polish(P.coeffs, np.array([cc[0]]), np.roots(cc[::-1])[None, :])[0]
        if not _residual_ok(P, w, target):
            raise NonConvergence(f"roots of P(w) = {target!r} did not converge")
    return w[np.lexsort((w.imag, w.real))]


def _residual_ok(P, w, target):
    res = np.abs(P(w) - target)
    scale = P.scale(w) + abs(target)
    return bool(np.all(np.isfinite(w)) and np.all(res <= ROOT_RESIDUAL * scale))


def critical_points(P: ComplexPolynomial) -> np.ndarray:
    dP = derivative(P)
    if dP.degree < 1:
        return np.zeros(0, dtype=complex)
    return roots(dP, 0.0)


def fixed_points(P: ComplexPolynomial) -> np.ndarray:
    return roots(ComplexPolynomial(np.asarray(P.coeffs) - np.array([0, 1] + [0] * (P.degree - 1))), 0.0)


# ----------------------------------------------------------------------------
# exceptional classification


class Kind(str, enum.Enum):
    STRONG = "StronglyExceptional"
    WEAK = "WeaklyExceptional"
    NON = "NonExceptional"


@dataclass
class Classification:
    kind: Kind
    invariant_lines: list = field(default_factory=list)
    julia_in_line: Optional[bool] = None
    a_dm1_nonzero: bool = False

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind.value,
            "invariant_lines": [float(a) for a in self.invariant_lines],
            "julia_in_line": self.julia_in_line,
            "a_dm1_nonzero": self.a_dm1_nonzero,
        }


def _line_conditions(P: ComplexPolynomial):
    """Real polynomials in ``a`` whose common roots give invariant lines.

    ``P(a + it) = sum_j c_j(a) t^j`` with ``c_j(a) = P^{(j)}(a) i^j / j!``.
    Re z = a is invariant iff ``Re c_j(a) = 0`` for ``j >= 1`` and
    ``Re c_0(a) = a``.  Returns a list of (ascending coefficient array,
    magnitude used for the relative tolerance).
    """
    a = P.coeffs
    d = P.degree
    out = []
    for j in range(d + 1):
        raw = np.array([math.comb(m + j, j) * a[m + j] for m in range(d - j + 1)])
        coef = (raw * _I_POW[j % 4]).real.copy()
        mag = max(1.0, float(np.max(np.abs(raw))))
        if j == 0:
            if coef.size < 2:
                coef = np.append(coef, 0.0)
            coef[1] -= 1.0
        out.append((coef, mag))
    return out


def _trim(coef, tol):
    c = np.where(np.abs(coef) <= tol, 0.0, coef)
    nz = np.nonzero(c)[0]
    return c[: nz[-1] + 1] if nz.size else c[:0]


def invariant_vertical_lines(P: ComplexPolynomial, tol=REALITY_TOL) -> list:
    """Real abscissas ``a`` with ``P({Re z = a}) ⊂ {Re z = a}``."""
    conds = _line_conditions(P)
    trimmed = [_trim(c, tol * m) for c, m in conds]
    if any(t.size == 1 for t in trimmed):
        return []  # a nonzero constant condition
    nonconst = [t for t in trimmed if t.size >= 2]
    if not nonconst:
        return []
    lowest = min(nonconst, key=lambda t: t.size)
    cand = np.roots(lowest[::-1])
    cand = cand[np.abs(cand.imag) <= 1e-8 * np.maximum(1.0, np.abs(cand))].real
    cand = np.sort(cand)
    clustered = []
    for x in cand:
        if not clustered or abs(x - clustered[-1]) > 1e-8 * max(1.0, abs(x)):
            clustered.append(float(x))
    lines = []
    for x in clustered:
        ok = True
        for c, m in conds:
            val = np.polynomial.polynomial.polyval(x, c)
            if abs(val) > tol * m * max(1.0, abs(x)) ** (c.size - 1):
                ok = False
                break
        if ok:
            lines.append(0.0 if x == 0 else x)
    return lines


def classify(P: ComplexPolynomial, tol=REALITY_TOL, julia_samples=2000, seed=0) -> Classification:
    """Strongly / weakly / non-exceptional classification."""
    d = P.degree
    if d < 2:
        raise ValueError("classification needs degree >= 2")
    a = P.coeffs
    big = float(np.max(np.abs(a)))
    flag = bool(abs(a[d - 1]) > tol * big)
    lines = invariant_vertical_lines(P, tol)
    if lines:
        in_line = julia_in_line_test(P, lines[0], n_points=julia_samples, seed=seed)
        return Classification(Kind.STRONG, lines, in_line, flag)
    lead = a[d] * _I_POW[(d - 1) % 4]
    if abs(lead.imag) <= tol * abs(a[d]):
        for k in range(d - 1):
            v = a[k] * _I_POW[(k - 1) % 4]
            if abs(v.imag) > tol * big:
                return Classification(Kind.WEAK, [], None, flag)
    return Classification(Kind.NON, [], None, flag)


# ----------------------------------------------------------------------------
# Green's function and Böttcher coordinate


def green_function(P: ComplexPolynomial, z, big=1e40, max_iter=2000):
    """Escape-rate Green's function ``lim d^{-n} log|P^n(z)|`` (0 on K(P))."""
    d = P.degree
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.zeros(z.shape)
    w = z.copy()
    live = np.ones(z.shape, dtype=bool)
    shift = math.log(abs(P.leading)) / (d - 1)
    for n in range(max_iter):
        r = np.abs(w)
        hit = live & (r > big)
        if hit.any():
            out[hit] = (np.log(r[hit]) + shift) / float(d) ** n
        live &= ~hit
        if not live.any():
            break
        w = np.where(live, P(np.where(live, w, 0)), w)
    return out


def _bottcher_log(P: ComplexPolynomial, z):
    """``log phi(z)`` and ``phi'(z)/phi(z)`` by the product formula.

    ``phi(z) = beta z prod_n u(P^n z)^{1/d^{n+1}}`` with ``u = P(w)/(a_d w^d)``
    and ``beta^{d-1} = a_d``; valid where every ``|u - 1| <= 1/2``, which
    holds outside :func:`escape_radius`.
    """
    d = P.degree
    ad = P.leading
    dP = derivative(P)
    z = np.asarray(z, dtype=complex)
    logphi = np.log(ad) / (d - 1) + np.log(z)
    dlog = 1.0 / z
    w = z.copy()
    dw = np.ones_like(z)
    umax = np.zeros(z.shape)
    with np.errstate(all="ignore"):
        for n in range(200):
            pw = P(w)
            u = pw / (ad * w**d)
            umax = np.maximum(umax, np.abs(u - 1))
            fac = 1.0 / d ** (n + 1)
            term = np.log(u) * fac
            dterm = (dP(w) / pw - d / w) * dw * fac
            ok = np.isfinite(term) & np.isfinite(dterm)
            logphi = logphi + np.where(ok, term, 0)
            dlog = dlog + np.where(ok, dterm, 0)
            if np.all(~ok | (np.abs(term) < 1e-18 * np.maximum(1.0, np.abs(logphi)))):
                break
            dw = dw * dP(w)
            w = pw
    return logphi, dlog, umax


def bottcher(P: ComplexPolynomial, z):
    """Böttcher coordinate near infinity (tangent to ``a_d^{1/(d-1)} z``)."""
    logphi, _, _ = _bottcher_log(P, z)
    return np.exp(logphi)


@dataclass(frozen=True)
class LevelCurvePoint:
    z: complex
    green_value: float
    angle: float


def _solve_level(P, R, theta, tol=1e-14, max_iter=60):
    d = P.degree
    beta = np.exp(np.log(P.leading) / (d - 1))
    target_log = math.log(R) + 1j * theta
    z = np.exp(target_log) / beta
    for _ in range(max_iter):
        logphi, dlog, _ = _bottcher_log(P, z)
        # Newton on log phi(z) = log R + i theta, branch of the imaginary part
        # taken modulo 2 pi.
        diff = logphi - target_log
        diff = diff.real + 1j * (np.mod(diff.imag + np.pi, 2 * np.pi) - np.pi)
        step = diff / dlog
        z = z - step
        if np.all(np.abs(step) <= tol * np.abs(z)):
            break
    else:
        raise NonConvergence("level curve Newton iteration did not converge")
    return z


def green_level_curve(P: ComplexPolynomial, R: float, samples: int):
    """Points of the equipotential ``G = log R`` at equally spaced Böttcher angles.

    Raises :class:`RadiusTooSmall` unless every sample lies outside the escape
    radius, where the product formula for the Böttcher coordinate is valid.
    """
    theta = 2 * np.pi * np.arange(samples) / samples
    z = level_points(P, R, theta)
    g = green_function(P, z)
    return [LevelCurvePoint(complex(zz), float(gg), float(t)) for zz, gg, t in zip(z, g, theta)]


def level_points(P: ComplexPolynomial, R: float, theta) -> np.ndarray:
    """Points with Böttcher coordinate ``R e^{i theta}``; certified or raises."""
    if R <= 1:
        raise RadiusTooSmall("R must exceed 1")
    r_esc = escape_radius(P)
    beta = abs(P.leading) ** (1.0 / (P.degree - 1))
    if R / beta < r_esc:
        raise RadiusTooSmall(f"level curve near |z| = {R / beta:.3g} is inside the escape radius {r_esc:.3g}")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    z = _solve_level(P, R, theta)
    if not np.all(np.abs(z) > r_esc):
        raise RadiusTooSmall(f"min |z| on curve {np.min(np.abs(z)):.3g} <= escape radius {r_esc:.3g}")
    return z


# ----------------------------------------------------------------------------
# Julia set sampling


def _start_point(P: ComplexPolynomial) -> complex:
    """A fixed starting point on J: the most repelling fixed point."""
    fp = fixed_points(P)
    mult = np.abs(derivative(P)(fp))
    return complex(fp[int(np.argmax(mult))])


def backward_orbits(P: ComplexPolynomial, n_points: int, depth: int, seed, keep: int = 0):
    """Endpoints of independent random backward orbits of length ``depth``.

    Every step picks one of the ``d`` preimages uniformly at random.  Returns
    ``(points, chains)`` where ``chains[:, k]`` is the recorded chain point
    ``k`` steps before the end, i.e. ``P^k(points)`` for ``k <= keep``.  These
    recorded forward orbits are accurate to rounding even where forward
    iteration is violently unstable.
    """
    if keep > depth:
        raise ValueError("keep must not exceed depth")
    rng = np.random.default_rng(seed)
    z = np.full(n_points, _start_point(P), dtype=complex)
    d = P.degree
    rows = np.arange(n_points)
    tail = []
    for _ in range(depth):
        pre = preimages(P, z)
        pick = rng.integers(0, d, size=n_points)
        z = pre[rows, pick]
        if keep:
            tail.append(z)
            if len(tail) > keep + 1:
                tail.pop(0)
    if not np.all(np.isfinite(z)):
        raise NonConvergence("backward iteration produced non-finite points")
    chains = np.stack(tail[::-1], axis=1) if keep else z[:, None]
    return z, chains


def sample_julia(P: ComplexPolynomial, n_points: int, depth: int = 60, seed=0) -> np.ndarray:
    """Inverse-iteration approximation of the Julia set."""
    if depth < 20:
        raise ValueError("depth must be >= 20")
    return backward_orbits(P, n_points, depth, seed)[0]


def julia_in_line_test(P: ComplexPolynomial, a: float, n_points=2000, depth=60, seed=0, tol=1e-6) -> bool:
    """True iff all Julia samples are within ``tol`` of the line ``Re z = a``."""
    pts = sample_julia(P, n_points, depth, seed)
    return bool(np.max(np.abs(pts.real - a)) < tol)
