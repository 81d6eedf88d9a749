"""
Noise with memory
=================

Correlated Gaussian noise is white noise seen through an invertible map.
Codes travel across that map without changing errors or detectability.
"""

# %%
import numpy as np

from covertgg import colored

model = colored.ar1_model(6, 0.9)
transport = colored.whiten(model)
np.set_printoptions(precision=3, suppress=True)
print(transport.forward_matrix)
print("condition number", transport.condition_number, " round-trip residual", transport.roundtrip_residual())

# %%
# The warden's divergence is the same on both sides of the map.
transport = colored.whiten(colored.ar1_model(64, 0.9))
kl_c, kl_w = colored.kl_invariance_check(transport, 0.01 * np.eye(64))
print(f"coloured {kl_c:.15f}\nwhite    {kl_w:.15f}")

# %%
# A covariance that is not positive definite is refused, naming the failing minor.
bad = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.5], [0.0, 1.5, 1.0]])
try:
    colored.whiten(colored.ColoredNoiseModel(mu=np.zeros(3), sigma=bad))
except colored.TransportError as exc:
    print(exc)
