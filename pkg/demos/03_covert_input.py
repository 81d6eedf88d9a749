"""
The covert input law
====================

To make the output exactly N_p(0, gamma^p) the input must be the "missing
piece" X with X + Z ~ gamma/alpha * Z.  For p <= 1 it exists.
"""

# %%
import numpy as np
from scipy import stats

from covertgg import decomp, ggdist
from covertgg.ggdist import GGParams

# %%
# For Laplace noise the input is an atom at zero mixed with a wider Laplace law.
spec = decomp.decompose(GGParams(1.0), 1.5)
print(spec.representation, "atom at 0:", spec.atom_at_zero)

# %%
# For other shapes the law is tabulated by dividing characteristic functions and
# inverting on an FFT grid.  Only the atom is known in closed form.
noise = GGParams(0.5)
spec = decomp.decompose(noise, 1.5)
print(f"atom {spec.atom_at_zero:.6f} (grid estimate {spec.atom_grid_estimate:.6f}), "
      f"clipped negative mass {spec.clipped_mass:.1e}, grid of {len(spec.weights)} cells")

# %%
# Check the construction: X + Z should be indistinguishable from N_p(0, gamma^p).
rng = np.random.default_rng(0)
y = decomp.draw_input(spec, rng, 10**5) + ggdist.draw(noise, rng, 10**5)
target = GGParams(0.5, spec.gamma)
print("KS p-value:", stats.kstest(y, lambda v: ggdist.cdf(target, v)).pvalue)
print("grid L1 error of the convolution:", decomp.convolution_l1(spec))

# %%
# The table serializes to JSON for reuse.
text = spec.to_json()
print(f"{len(text) / 1e6:.1f} MB of JSON; round trip equal:",
      np.array_equal(decomp.DecompositionSpec.from_json(text).weights, spec.weights))
