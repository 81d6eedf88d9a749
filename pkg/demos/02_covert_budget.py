"""
Covert budgets and the square-root law
======================================

A warden watching n outputs tolerates a total divergence delta.  How much
wider may the output law be, and how many nats does that buy?
"""

# %%
import math

from covertgg import budget
from covertgg.budget import BudgetSpec
from covertgg.ggdist import GGParams

spec = BudgetSpec(GGParams(1.0), delta=0.01, n=10**4)
res = budget.gamma_achievable(spec)
print(f"gamma_n = {res.gamma_n:.7f}, total divergence {res.total_kl:.7f} <= {spec.delta}")
print(f"largest admissible gamma = {budget.gamma_converse_max(spec):.7f}")

# %%
# The per-symbol rate is at most ln(gamma_n / alpha), so over n uses the
# throughput grows like sqrt(n delta) times a constant L.
for p in (0.5, 1.0, 2.0, 3.0):
    noise = GGParams(p)
    L, status = budget.L_theoretical(noise)
    trend = budget.normalized_rate_trend(noise, 0.1, [10**2, 10**4, 10**6, 10**8]) if (p <= 1 or p == 2) else None
    shown = ", ".join(f"{v:.4f}" for v in trend) if trend else "(no construction for this p)"
    print(f"p={p}: L = {L:.4f} ({status});  sqrt(n/delta) ln(gamma_n/alpha) at n=1e2..1e8: {shown}")

# %%
# The gap between the achievable scale and the largest scale the budget allows
# closes as n grows.
noise = GGParams(2.0)
for n in (10**2, 10**4, 10**6, 10**8):
    spec = BudgetSpec(noise, 0.1, n)
    ach = budget.normalized_gap(budget.gamma_achievable(spec).gamma_n, spec)
    con = budget.normalized_gap(budget.gamma_converse_max(spec), spec)
    print(f"n={n:>9}: achievable {ach:.5f}  converse {con:.5f}  limit {math.sqrt(2 / noise.p):.5f}")
