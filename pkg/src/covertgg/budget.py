"""Covertness budget arithmetic for memoryless N_p(0, alpha^p) noise.

The warden sees n i.i.d. outputs, so a KL budget ``delta`` over the block
translates into ``delta / n`` per symbol.  Everything here is closed form (or a
scalar bisection), so n up to 1e9 costs nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ParameterError
from .ggdist import GGParams, _kl_scale, kl_gg

GG_MEMORYLESS = "gg_memoryless"
GAUSSIAN_MEMORY = "gaussian_memory"

EXACT = "exact"
UPPER_BOUND = "upper_bound"

N_MAX = 10**9


@dataclass(frozen=True)
class BudgetSpec:
    noise: GGParams
    delta: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ParameterError(f"delta must be positive, got {self.delta!r}")
        if int(self.n) != self.n or not 1 <= self.n <= N_MAX:
            raise ParameterError(f"n must be an integer in [1, {N_MAX}], got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "delta", float(self.delta))


@dataclass(frozen=True)
class BudgetResult:
    gamma_n: float
    per_symbol_kl: float
    total_kl: float
    rate_cap_nats: float
    normalized_rate: float


def _log_ratio_achievable(p: float, delta: float, n: int) -> float:
    return math.log1p(math.sqrt(2.0 * p * delta / n)) / p


def gamma_achievable(spec: BudgetSpec) -> BudgetResult:
    """Output scale gamma_n = alpha (1 + sqrt(2 p delta / n))^(1/p).

    Since ln(1 + a) >= a - a^2/2, the resulting block divergence
    n * D(N_p(0, gamma_n^p) || N_p(0, alpha^p)) never exceeds delta.
    """
    p, alpha = spec.noise.p, spec.noise.alpha
    x = _log_ratio_achievable(p, spec.delta, spec.n)
    gamma = alpha * math.exp(x)
    per_symbol = _kl_scale(p, x)
    return BudgetResult(
        gamma_n=gamma,
        per_symbol_kl=per_symbol,
        total_kl=spec.n * per_symbol,
        rate_cap_nats=x,
        normalized_rate=spec.n * x / math.sqrt(spec.n * spec.delta),
    )


def gamma_converse_max(spec: BudgetSpec, rtol: float = 1e-12) -> float:
    """Largest gamma >= alpha whose per-symbol divergence is at most delta / n.

    Bisection on x = ln(gamma / alpha); the divergence is zero with zero slope
    at x = 0, which is exactly where Newton steps misbehave.
    """
    p, alpha = spec.noise.p, spec.noise.alpha
    target = spec.delta / spec.n
    lo, hi = 0.0, math.sqrt(2.0 * target / p)
    while _kl_scale(p, hi) <= target:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _kl_scale(p, mid) <= target:
            lo = mid
        else:
            hi = mid
    return alpha * math.exp(lo)


def rate_cap(gamma: float, noise: GGParams, *, linear: bool = False) -> float:
    """Per-symbol mutual-information cap ln(gamma/alpha).

    With ``linear=True`` returns the looser gamma/alpha - 1.
    """
    if not (math.isfinite(gamma) and gamma >= noise.alpha):
        raise ParameterError(f"gamma must be >= alpha={noise.alpha}, got {gamma!r}")
    r = gamma / noise.alpha
    return r - 1.0 if linear else math.log(r)


def L_theoretical(noise: GGParams, channel_kind: str = GG_MEMORYLESS) -> tuple[float, str]:
    """Square-root-law constant L and whether it is exact or only an upper bound."""
    if channel_kind == GAUSSIAN_MEMORY:
        return 1.0, EXACT
    if channel_kind != GG_MEMORYLESS:
        raise ParameterError(f"unknown channel kind {channel_kind!r}")
    p = noise.p
    value = math.sqrt(2.0 / p)
    return value, EXACT if (p <= 1.0 or p == 2.0) else UPPER_BOUND


def normalized_rate_trend(noise: GGParams, delta: float, n_list: Sequence[int]) -> list[float]:
    """sqrt(n / delta) * ln(gamma_n / alpha) for each n, with the achievable gamma_n."""
    p = noise.p
    if not (p <= 1.0 or p == 2.0):
        raise ParameterError(f"the achievable trend is only established for p in (0, 1] or p = 2, got p={p}")
    return [gamma_achievable(BudgetSpec(noise, delta, n)).normalized_rate for n in n_list]


def normalized_gap(gamma: float, spec: BudgetSpec) -> float:
    """(gamma/alpha - 1) / sqrt(delta / n)."""
    return (gamma / spec.noise.alpha - 1.0) / math.sqrt(spec.delta / spec.n)


def block_divergence(gamma: float, spec: BudgetSpec) -> float:
    """n * D(N_p(0, gamma^p) || N_p(0, alpha^p))."""
    return spec.n * kl_gg(gamma, spec.noise)
