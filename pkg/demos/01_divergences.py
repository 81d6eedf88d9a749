"""
Divergences between generalized Gaussian laws
=============================================

How far apart are two noise laws that differ only in scale?
"""

# %%
# N_p(0, a^p) has density proportional to exp(-|z|^p / (2 a^p)).  p = 2 is
# the Gaussian with standard deviation a, p = 1 a Laplace law.
import math

import numpy as np

from covertgg import ggdist
from covertgg.ggdist import GGParams

for p in (0.5, 1.0, 2.0, 4.0):
    params = GGParams(p)
    print(f"p={p:<4} entropy={ggdist.entropy(params):.6f}  E|Z|^p={ggdist.abs_moment_p(params):.4f}"
          f"  E[Z^2]={ggdist.second_moment(params):.4f}")

# %%
# The divergence of a slightly wider law from the noise is closed form.  We
# compare it against brute-force quadrature of the log-likelihood ratio.
noise = GGParams(1.5, 2.0)
for ratio in (1.001, 1.01, 1.1, 1.5):
    gamma = 2.0 * ratio
    closed = ggdist.kl_gg(gamma, noise)
    numeric = ggdist.kl_numeric(noise.with_alpha(gamma), noise)
    print(f"gamma/alpha={ratio:<6} closed={closed:.12e}  quad={numeric.value:.12e}  diff={abs(closed - numeric.value):.1e}")

# %%
# Close to gamma = alpha the divergence is quadratic in the relative gap, with
# curvature p/2.  That constant sets the size of the covert budget.
for p in (0.3, 1.0, 2.0, 3.0):
    eps = 1e-4
    print(f"p={p}: D / eps^2 = {ggdist.kl_gg(1 + eps, GGParams(p)) / eps**2:.5f}   p/2 = {p / 2}")

# %%
# Among all laws with a given E|Y|^p, the generalized Gaussian of the same
# shape has the largest entropy, and so the smallest divergence from the noise.
moment = 2.2
h_max, d_min = ggdist.moment_constraint_bounds(moment, GGParams(1.0))
w = 2 * moment  # uniform on [-w, w] has E|Y| = w / 2
print(f"entropy ceiling {h_max:.4f}, uniform with the same E|Y| has {math.log(2 * w):.4f}")
print(f"divergence floor {d_min:.6f}")
