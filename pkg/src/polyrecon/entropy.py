"""Equilibrium measure samples, their real-orbit pushforward and entropy.

Ball masses are Monte Carlo estimates over a :class:`MeasureSample`.  Real
orbits of sample points are taken from the recorded backward chains whenever
the sampler kept them, so windows stay accurate even for strongly expanding
maps where forward iteration in double precision loses every digit within a
few steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .errors import InsufficientSamples, OrbitEscaped
from .poly import ComplexPolynomial, backward_orbits, escape_radius

DEFAULT_EPS = (0.02, 0.05, 0.1)
DEFAULT_N_RANGE = tuple(range(4, 13))
MIN_BALL_COUNT = 50


@dataclass
class MeasureSample:
    """Weighted point cloud approximating a probability measure on C."""

    points: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)
    #: optional ``(M, K+1)`` array with ``orbits[:, k] = P^k(points)``
    orbits: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.points.shape != self.weights.shape:
            raise ValueError("points and weights differ in shape")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points must be finite")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")

    def __len__(self):
        return self.points.size

    @classmethod
    def uniform(cls, points, **meta):
        points = np.asarray(points, dtype=complex)
        n = points.size
        return cls(points, np.full(n, 1.0 / n), dict(meta))

    def image(self, P: ComplexPolynomial) -> "MeasureSample":
        """The pushforward sample ``P_* m`` (orbits shift by one step)."""
        orb = None if self.orbits is None or self.orbits.shape[1] < 2 else self.orbits[:, 1:]
        pts = P(self.points) if orb is None else orb[:, 0]
        return MeasureSample(pts, self.weights.copy(), dict(self.meta, image=True), orb)


@dataclass
class EntropyEstimate:
    value: float
    n_range: list
    epsilon: float
    stderr: float
    method: str
    samples: int = 0
    #: per-scale slopes, keyed by the scale (epsilon or box size)
    slopes: dict = field(default_factory=dict)
    plateau: bool = False

    def to_json_obj(self) -> dict:
        return {
            "method": self.method,
            "value": self.value,
            "stderr": self.stderr,
            "n_range": list(self.n_range),
            "epsilon": self.epsilon,
            "samples": self.samples,
        }


def sample_equilibrium(P: ComplexPolynomial, n_samples: int, depth: int = 60, seed=0, keep: int = 30) -> MeasureSample:
    """Sample the equilibrium measure by independent random backward orbits."""
    if depth < 30:
        raise ValueError("depth must be >= 30")
    keep = min(keep, depth)
    pts, chains = backward_orbits(P, n_samples, depth, seed, keep=keep)
    meta = {"depth": depth, "seed": seed, "count": n_samples}
    return MeasureSample(pts, np.full(n_samples, 1.0 / n_samples), meta, chains)


def real_orbits(P: ComplexPolynomial, m: MeasureSample, length: int) -> np.ndarray:
    """``(M, length)`` array of ``Re P^k(z)`` for ``k < length``.

    Raises :class:`OrbitEscaped` when an orbit leaves the escape disk, which
    never happens for samples of the equilibrium measure.
    """
    have = 0 if m.orbits is None else m.orbits.shape[1]
    if have >= length:
        orb = m.orbits[:, :length]
    else:
        orb = np.empty((len(m), length), dtype=complex)
        if have:
            orb[:, :have] = m.orbits
        else:
            orb[:, 0] = m.points
            have = 1
        w = orb[:, have - 1]
        for k in range(have, length):
            w = P(w)
            orb[:, k] = w
    r = escape_radius(P)
    if not np.all(np.abs(orb) <= r):
        raise OrbitEscaped("a sample orbit left the escape disk")
    return np.ascontiguousarray(orb.real)


def pushforward(P: ComplexPolynomial, m: MeasureSample, N: int) -> np.ndarray:
    """Windows ``Phi(z) = (Re z, ..., Re P^N z)`` of every sample point, one per row."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return real_orbits(P, m, N + 1)


def _support_diameter(X: np.ndarray) -> float:
    spread = X.max(axis=0) - X.min(axis=0)
    diam = float(spread.max()) if spread.size else 0.0
    return diam if diam > 0 else 1.0


def _agreement_lengths(X, refs, eps, lmin, budget, workers=1):
    """For each reference, agreement lengths with its candidate neighbours.

    Returns ``(ref_ids, lengths)`` where ``lengths[t]`` is the number of
    leading coordinates on which the pair agrees to ``< eps``.  Candidates are
    pairs that already agree on the first ``lmin`` coordinates.  References
    are consumed in order until ``budget`` candidate pairs are reached
    (at least 32 references are always kept).
    """
    tree = cKDTree(X[:, :lmin], balanced_tree=False, compact_nodes=False)
    r = np.nextafter(eps, 0)
    counts = tree.query_ball_point(X[refs, :lmin], r, p=np.inf, return_length=True, workers=workers)
    cum = np.cumsum(counts)
    n_use = max(32, int(np.searchsorted(cum, budget, side="right")))
    n_use = min(n_use, refs.size)
    refs = refs[:n_use]
    owner, lengths = [], []
    chunk_start = 0
    while chunk_start < n_use:
        # chunks of references with about 1e6 candidate pairs
        base = cum[chunk_start - 1] if chunk_start else 0
        stop = int(np.searchsorted(cum, base + 1_000_000, side="right"))
        stop = min(max(stop, chunk_start + 1), n_use)
        block = refs[chunk_start:stop]
        nb = tree.query_ball_point(X[block, :lmin], r, p=np.inf, workers=workers)
        lens = np.fromiter((len(a) for a in nb), dtype=np.int64, count=len(nb))
        j = np.concatenate([np.asarray(a, dtype=np.int64) for a in nb]) if lens.sum() else np.zeros(0, np.int64)
        i_loc = np.repeat(np.arange(chunk_start, stop), lens)
        i = refs[i_loc]
        keep = i != j
        i, j, i_loc = i[keep], j[keep], i_loc[keep]
        close = np.abs(X[i] - X[j]) < eps
        agree = np.where(close.all(axis=1), X.shape[1], np.argmin(close, axis=1))
        owner.append(i_loc)
        lengths.append(agree)
        chunk_start = stop
    return n_use, np.concatenate(owner), np.concatenate(lengths)


def _slope(ns, y):
    ns = np.asarray(ns, dtype=float)
    return float(np.polyfit(ns, y, 1)[0])


def bowen_entropy(
    P: ComplexPolynomial,
    m: MeasureSample,
    N: int = 1,
    n_range: Sequence[int] = DEFAULT_N_RANGE,
    eps_list: Sequence[float] = DEFAULT_EPS,
    n_refs: int = 4096,
    seed=0,
    pair_budget: int = 6_000_000,
    groups: int = 8,
    workers: int = 1,
) -> EntropyEstimate:
    """Entropy from the decay rate of Bowen ball masses of ``nu = Phi_* mu``.

    The ball ``B(Phi x, n, eps)`` for the shift on windows of length ``N+1``
    consists of the points whose real orbits stay ``eps``-close to that of
    ``x`` for the first ``n + N`` steps.  Its mass is averaged over reference
    points drawn from the sample, ``-log`` of the mean mass is fitted linearly
    in ``n`` and the slope is the estimate for that ``eps``.  ``eps_list``
    holds fractions of the diameter of the pushforward support.  The reported
    value is the largest slope over the scales with enough ball counts,
    standing in for the supremum over neighbourhoods of the diagonal.
    ``stderr`` is a delete-one-group jackknife over reference groups.
    """
    ns = np.asarray(sorted(n_range), dtype=int)
    if ns.size < 2 or ns[0] < 1:
        raise ValueError("n_range needs at least two positive values")
    M = len(m)
    lmax = int(ns[-1]) + N
    X = real_orbits(P, m, lmax)
    diam = _support_diameter(X[:, : N + 1])
    rng = np.random.default_rng(seed)
    refs = rng.permutation(M)[: min(n_refs, M)]
    lmin = int(ns[0]) + N
    slopes, errs, enough = {}, {}, {}
    for frac in eps_list:
        eps = frac * diam
        n_use, owner, agree = _agreement_lengths(X, refs, eps, lmin, pair_budget, workers)
        grp = owner * groups // n_use
        # counts[g, t]: pairs of group g agreeing on at least ns[t] + N coords
        counts = np.zeros((groups, ns.size))
        for t, n in enumerate(ns):
            counts[:, t] = np.bincount(grp[agree >= n + N], minlength=groups)
        sizes = np.bincount(np.arange(n_use) * groups // n_use, minlength=groups)
        total = counts.sum(axis=0)
        enough[frac] = bool(total[-1] >= MIN_BALL_COUNT)
        if total[-1] <= 0:
            continue
        slopes[frac] = _slope(ns, -np.log(total / (n_use * (M - 1))))
        jack = []
        for g in range(groups):
            c = total - counts[g]
            nref = n_use - sizes[g]
            if c[-1] > 0 and nref > 0:
                jack.append(_slope(ns, -np.log(c / (nref * (M - 1)))))
        jack = np.asarray(jack)
        errs[frac] = float(np.sqrt((len(jack) - 1) / len(jack) * np.sum((jack - jack.mean()) ** 2))) if len(jack) > 1 else math.inf
    usable = [f for f in eps_list if enough.get(f)]
    if not usable:
        raise InsufficientSamples(f"fewer than {MIN_BALL_COUNT} sample pairs remain in the balls at n = {ns[-1]}")
    best = max(usable, key=lambda f: slopes[f])
    small = sorted(usable)[:2]
    plateau = len(small) == 2 and abs(slopes[small[0]] - slopes[small[1]]) <= 3 * max(errs[small[0]], errs[small[1]], 1e-12)
    return EntropyEstimate(
        value=max(0.0, slopes[best]),
        n_range=[int(n) for n in ns],
        epsilon=float(best * diam),
        stderr=errs[best],
        method="BowenBall",
        samples=M,
        slopes={float(f * diam): s for f, s in slopes.items()},
        plateau=bool(plateau),
    )


def cell_entropies(P: ComplexPolynomial, m: MeasureSample, N: int, box_size: float, n_max: int) -> np.ndarray:
    """Empirical entropies ``H_1..H_{n_max}`` of the refined box partitions.

    A cell of the ``n``-th refinement is the sequence of box indices of the
    windows at times ``0..n-1``, i.e. of the coordinates ``Re P^k z`` for
    ``k < n + N``.  Boxes are centred on the integer multiples of ``box_size``.
    """
    if box_size <= 0:
        raise ValueError("box_size must be positive")
    X = real_orbits(P, m, n_max + N)
    codes = np.floor(X / box_size + 0.5).astype(np.int64)
    w = m.weights
    H = np.empty(n_max)
    labels = np.zeros(len(m), dtype=np.int64)
    for k in range(n_max + N):
        pair = np.stack([labels, codes[:, k]], axis=1)
        _, labels = np.unique(pair, axis=0, return_inverse=True)
        labels = labels.ravel()
        n = k - N + 1
        if n >= 1:
            mass = np.bincount(labels, weights=w)
            mass = mass[mass > 0]
            H[n - 1] = float(-np.sum(mass * np.log(mass)))
    return H


def partition_entropy(
    P: ComplexPolynomial,
    m: MeasureSample,
    N: int = 1,
    box_size: float = 0.1,
    n_max: int = 12,
    min_cell_count: float = 20.0,
) -> EntropyEstimate:
    """Entropy of a box partition of the window space from cell-mass entropies.

    The linear regime is the range of ``n`` where the number of occupied
    cells stays below ``M / min_cell_count``; the estimate is the slope of
    ``H_n`` over the last (up to four) values of that range.
    """
    H = cell_entropies(P, m, N, box_size, n_max)
    M = len(m)
    ns = np.arange(1, n_max + 1)
    limit = math.log(M / min_cell_count)
    ok = np.nonzero(H <= limit)[0]
    if ok.size < 2:
        raise InsufficientSamples("box partition saturates before two refinement steps")
    last = ok[-1]
    sel = np.arange(max(0, last - 3), last + 1)
    if H[-1] == H[0]:
        value, err = 0.0, 0.0
    else:
        fit = np.polyfit(ns[sel], H[sel], 1, full=False)
        value = float(fit[0])
        inc = np.diff(H[sel])
        err = float(np.std(inc) / math.sqrt(len(inc))) if inc.size > 1 else 0.0
    return EntropyEstimate(
        value=max(0.0, value),
        n_range=[int(n) for n in ns[sel]],
        epsilon=float(box_size),
        stderr=err,
        method="Partition",
        samples=M,
        slopes={float(box_size): value},
    )


def invariance_check(P: ComplexPolynomial, m: MeasureSample, N: int = 1) -> float:
    """Largest per-coordinate KS distance between ``Phi_* m`` and ``Phi_* P_* m``."""
    X = real_orbits(P, m, N + 2)
    worst = 0.0
    for k in range(N + 1):
        a, b = X[:, k], X[:, k + 1]
        if np.array_equal(np.sort(a), np.sort(b)):
            continue
        worst = max(worst, float(stats.ks_2samp(a, b).statistic))
    return worst


def line_mass(P: ComplexPolynomial, m: MeasureSample, a: float, tol: float) -> float:
    """Sample mass of the band ``|Re z - a| < tol``."""
    return float(np.sum(m.weights[np.abs(m.points.real - a) < tol]))


@dataclass
class BPrimeReport:
    n: int
    epsilon: float
    #: masses[l] is the mass of B'(n, l, eps), l = 0..n
    masses: list
    #: (l, mass(l-1) / mass(l)) for l = n..1
    ratios: list
    slack: float
    fraction_ok: float
    monotone: bool
    decay_ok: bool


def bprime_division_check(
    P: ComplexPolynomial,
    m: MeasureSample,
    ref,
    n: int,
    eps: float,
    N: int = 1,
    slack: float = 0.15,
    min_count: int = 20,
) -> BPrimeReport:
    """Masses of the nested sets ``B'(n, l, eps)`` and their successive ratios.

    ``ref`` is either an index into the sample or the real orbit
    ``Re P^k(z)``, ``k <= n + N``, of the reference point.  By invariance of
    ``mu``, the mass of ``B'(n, l, eps)`` equals the mass of the set of ``w``
    whose windows at times ``l..n`` are ``eps``-close to those of the
    reference at the same times; these sets grow with ``l``, so the
    empirical masses are monotone exactly.  The division step predicts
    ``mass(l-1) <= mass(l) / d``.
    """
    d = P.degree
    X = real_orbits(P, m, n + N + 1)
    if np.isscalar(ref) and float(ref).is_integer():
        x = X[int(ref)]
    else:
        x = np.asarray(ref, dtype=float)[: n + N + 1]
        if x.size < n + N + 1:
            raise ValueError("reference orbit too short")
    close = np.abs(X - x) < eps
    # window at time r matches iff coordinates r..r+N all match
    win = np.ones((len(m), n + 1), dtype=bool)
    for k in range(N + 1):
        win &= close[:, k : k + n + 1]
    inside = np.flip(np.logical_and.accumulate(np.flip(win, axis=1), axis=1), axis=1)
    masses = (m.weights[:, None] * inside).sum(axis=0)
    counts = inside.sum(axis=0)
    if counts[0] < min_count:
        raise InsufficientSamples(f"only {int(counts[0])} samples in B'(n, 0, eps)")
    ratios = [(l, float(masses[l - 1] / masses[l])) for l in range(n, 0, -1)]
    ok = sum(1 for _, r in ratios if r <= 1.0 / d + slack)
    monotone = bool(np.all(np.diff(masses) >= 0))
    decay_ok = bool(masses[0] <= (1.0 / d) ** (0.8 * n))
    return BPrimeReport(n, float(eps), [float(v) for v in masses], ratios, slack, ok / n, monotone, decay_ok)
