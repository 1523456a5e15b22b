# %% [markdown]
# Mirrored pairs
#
# Two points are mirrored when their orbits have equal real parts at every
# step.  For a real polynomial every conjugate pair is mirrored forever.  For
# a generic one, mirrors found on far equipotentials break (the orbits meet)
# after a single step.

# %%
import numpy as np

from polyrecon.mirrors import asymptotic_mirror_check, collect_mirror_sources, divided_difference, sample_variety
from polyrecon.poly import ComplexPolynomial, sample_julia
from polyrecon.reconstruction import break_time, estimate_M, estimate_N, find_mirrors_on_level_curve, mirror_test

real = ComplexPolynomial([-1, 0, 1])
tilted = ComplexPolynomial([1, 0, 1 + 1j])
shifted = ComplexPolynomial([1, 1, 1 + 1j])

# %%
z = sample_julia(real, 5, seed=0)
for a in z:
    print(f"{a:.4f}  mirrored through 50 steps: {mirror_test(real, a, a.conjugate(), 50, 1e-10)}",
          f" break: {break_time(real, a, a.conjugate(), 50, 1e-10)}")

# %% [markdown]
# Level-curve mirrors of (1+i) z^2 + 1 are exact conjugates; adding a linear
# term moves them a bounded distance away.

# %%
for P, name in ((tilted, "(1+i)z^2 + 1"), (shifted, "(1+i)z^2 + z + 1")):
    rep = asymptotic_mirror_check(P, radii=(1e3, 1e6))
    print(name, "pairs", rep.pair_counts, "max |w - conj z|", [f"{v:.2e}" for v in rep.deviations],
          "break at 1:", rep.all_break_at_one)

pairs = find_mirrors_on_level_curve(tilted, 1e3)
print(pairs[0])

# %% [markdown]
# The divided difference R_n(z, w) = (P^n z - P^n w) / (z - w) links the
# mirror equations: Re(z - w) = 0 and Im R_n = 0 for all n.

# %%
a = 0.4 + 0.7j
print("R_3 on a conjugate pair:", divided_difference(real, 3, a, a.conjugate()))
vs = sample_variety(real, max_n=2, grid=6)
print(len(vs.points), "variety points, all conjugate pairs:",
      max(abs(p.w - p.z.conjugate()) for p in vs.points) < 1e-9)

# %% [markdown]
# Pool all sources and estimate the window length N and the break bound M.
# e^{i}(z^2 + 0.04) + z has the fixed points +-0.2i, a mirror that never breaks.

# %%
P = ComplexPolynomial([np.exp(1j) * 0.04, 1, np.exp(1j)])
sources = collect_mirror_sources(P)
N = estimate_N(P, None, sources)
M, unbroken = estimate_M(P, sources)
print("N_hat", N.N_hat, "M_hat", M, "unbroken", [(f"{p.z:.3f}", f"{p.w:.3f}") for p in unbroken])

# %% [markdown]
# Perturbing that polynomial: whether the never-breaking pair survives is not
# decided by any test here, so the outcome is only recorded.

# %%
rng = np.random.default_rng(0)
for _ in range(4):
    dc = 1e-3 * (rng.normal(size=3) + 1j * rng.normal(size=3))
    Q = ComplexPolynomial(np.array(P.coeffs) + dc)
    M, unbroken = estimate_M(Q, collect_mirror_sources(Q))
    print(f"perturbation {np.max(np.abs(dc)):.1e}: M_hat {M}, unbroken pairs {len(unbroken)}")
