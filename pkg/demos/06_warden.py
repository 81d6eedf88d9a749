"""
The warden's view
=================

The best test between "noise only" and "covert transmission" looks at
sum |y_i|^p.  Its total error cannot drop below 1 - sqrt(delta / 2).
"""

# %%
import math

from covertgg import budget, simkit
from covertgg.budget import BudgetSpec
from covertgg.ggdist import GGParams

noise = GGParams(1.0)
for delta in (0.02, 0.1, 1.0):
    spec = BudgetSpec(noise, delta, 10**4)
    gamma = budget.gamma_achievable(spec).gamma_n
    res = simkit.warden_test(noise, gamma, spec.n, 4000, seed=1, workers=4)
    print(f"delta={delta:<5} P_FA+P_MD = {res.sum_errors:.4f} [{res.ci[0]:.4f}, {res.ci[1]:.4f}]"
          f"  exact {res.exact_sum:.4f}  floor {1 - math.sqrt(delta / 2):.4f}")

# %%
# Without transmission the test can only guess.
print(simkit.warden_test(noise, 1.0, 100, 100, seed=2).sum_errors)
