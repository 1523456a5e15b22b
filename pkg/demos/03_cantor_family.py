# %% [markdown]
# A certified family: P(z) = i z^d - e^{i psi} c
#
# For large c the Julia set is a Cantor set inside d thin sectors whose real
# projections are disjoint.  Distinct Julia points therefore have distinct
# itineraries and their real parts differ at the first differing symbol, so
# no mirrors exist and the window map can be inverted.

# %%
import math

import numpy as np

from polyrecon.cantor import (
    escape_certificate,
    itinerary_to_point,
    make_spec,
    modulus_identity_check,
    no_mirror_certificate,
    point_to_itinerary,
    projection_disjointness,
    projection_intervals,
)
from polyrecon.cli import tau_round_trip
from polyrecon.errors import CTooSmall

psi = math.pi / math.sqrt(5)
spec = make_spec(2, psi, 1e4)
P = spec.polynomial()
print("R_c", spec.R_c, "r_c", spec.r_c, "half width", spec.half_width)
print("real projections", projection_intervals(spec))

# %%
esc = escape_certificate(spec)
print("escape margins", esc.margins, "rigorous", esc.rigorous)
print("projection gap", projection_disjointness(spec))
print("modulus identity max rel error", modulus_identity_check(spec, samples=2000).max_rel_error)

# %% [markdown]
# Itineraries: a prefix picks a nested sequence of pullbacks.  The point comes
# back with the same symbols, and the nest shrinks geometrically.

# %%
prefix = [0, 1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 1, 0, 1, 1]
nest = itinerary_to_point(P, spec, prefix)
print(nest.z, "diameter", nest.diameter, "round trip", point_to_itinerary(P, spec, nest, 15) == prefix)

nm = no_mirror_certificate(P, spec, n_pairs=2000, K=30, seed=0)
print("sampled pairs separate by step", nm.max_separation_step)

# %% [markdown]
# Reconstruct P(z) from the window of z for points near the Julia set.

# %%
res = tau_round_trip(P, 50, seed=0, jitter=1e-3)
print(res)

# %% [markdown]
# For small c the sectors do not exist.

# %%
for c in (1e3, 1e5, 1.5):
    try:
        s = make_spec(2, psi, c)
        print(c, "gap", projection_disjointness(s))
    except CTooSmall as exc:
        print(c, "rejected:", exc)
