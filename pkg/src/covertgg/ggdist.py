"""Generalized Gaussian noise laws N_p(0, alpha^p).

The density is

    f(z) = (c_p / alpha) * exp(-|z|^p / (2 alpha^p)),
    c_p  = p / (2^((p+1)/p) Gamma(1/p)),

so ``p = 2`` is the normal law with standard deviation ``alpha`` and ``p = 1``
is the Laplace law with scale ``2 alpha``.  Every quantity is computed in the
log domain through ``gammaln``; divergences and entropies are in nats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .errors import ParameterError, QuadratureError

P_MIN = 1e-2
P_MAX = 1e2

__all__ = [
    "GGParams",
    "GGSample",
    "QuadResult",
    "normalizer",
    "log_normalizer",
    "log_pdf",
    "pdf",
    "cdf",
    "tail_radius",
    "abs_moment_p",
    "second_moment",
    "entropy",
    "kl_gg",
    "kl_numeric",
    "moment_constraint_bounds",
    "sample",
    "draw",
]


@dataclass(frozen=True)
class GGParams:
    """Shape ``p`` and scale ``alpha`` of N_p(0, alpha^p).

    ``p`` is restricted to [1e-2, 1e2]; outside that envelope double precision
    no longer resolves the normalizer and the moments reliably.
    """

    p: float
    alpha: float = 1.0

    def __post_init__(self):
        p, alpha = float(self.p), float(self.alpha)
        if not (math.isfinite(p) and math.isfinite(alpha)):
            raise ParameterError(f"p and alpha must be finite, got p={p!r}, alpha={alpha!r}")
        if p <= 0 or alpha <= 0:
            raise ParameterError(f"p and alpha must be positive, got p={p!r}, alpha={alpha!r}")
        if not P_MIN <= p <= P_MAX:
            raise ParameterError(f"p={p!r} outside the supported range [{P_MIN}, {P_MAX}]")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "alpha", alpha)

    def with_alpha(self, alpha: float) -> "GGParams":
        return GGParams(self.p, alpha)

    # duck-typed hooks so a GGParams can be passed wherever kl_numeric expects
    # a density description
    def logpdf(self, z):
        return log_pdf(self, z)

    def radius(self, mass: float) -> float:
        return tail_radius(self, mass)


@dataclass(frozen=True)
class GGSample:
    """Realization of i.i.d. draws together with the seed that produced it."""

    values: np.ndarray
    seed: int

    def __len__(self):
        return len(self.values)


class QuadResult(NamedTuple):
    value: float
    abserr: float


def log_normalizer(p: float) -> float:
    """Return ln c_p."""
    return math.log(p) - (p + 1.0) / p * math.log(2.0) - special.gammaln(1.0 / p)


def normalizer(params: GGParams) -> float:
    """Return c_p = p / (2^((p+1)/p) Gamma(1/p))."""
    return math.exp(log_normalizer(params.p))


def log_pdf(params: GGParams, z):
    """Log-density ln(c_p/alpha) - |z|^p / (2 alpha^p), elementwise."""
    p, alpha = params.p, params.alpha
    z = np.asarray(z, dtype=float)
    out = log_normalizer(p) - math.log(alpha) - 0.5 * (np.abs(z) / alpha) ** p
    return out if out.ndim else float(out)


def pdf(params: GGParams, z):
    return np.exp(log_pdf(params, z))


def cdf(params: GGParams, z):
    """Distribution function via the regularized lower incomplete gamma."""
    p, alpha = params.p, params.alpha
    z = np.asarray(z, dtype=float)
    g = special.gammainc(1.0 / p, 0.5 * (np.abs(z) / alpha) ** p)
    out = 0.5 + 0.5 * np.sign(z) * g
    return out if out.ndim else float(out)


def tail_radius(params: GGParams, mass: float) -> float:
    """Radius r with P(|Z| > r) = mass.

    |Z|^p / (2 alpha^p) is Gamma(1/p, 1) distributed, so the two-sided tail is
    an upper incomplete gamma function and inverts in closed form.
    """
    if not 0 < mass < 1:
        raise ParameterError(f"tail mass must lie in (0, 1), got {mass!r}")
    w = special.gammainccinv(1.0 / params.p, mass)
    return params.alpha * (2.0 * w) ** (1.0 / params.p)


def abs_moment_p(params: GGParams) -> float:
    """E|Z|^p = 2 alpha^p / p."""
    return 2.0 * params.alpha**params.p / params.p


def second_moment(params: GGParams) -> float:
    """E[Z^2] = 2^(2/p) alpha^2 Gamma(3/p) / Gamma(1/p)."""
    p = params.p
    log_m = (2.0 / p) * math.log(2.0) + special.gammaln(3.0 / p) - special.gammaln(1.0 / p)
    return params.alpha**2 * math.exp(log_m)


def entropy(params: GGParams) -> float:
    """Differential entropy ln(alpha/c_p) + 1/p in nats."""
    return math.log(params.alpha) - log_normalizer(params.p) + 1.0 / params.p


def _kl_scale(p: float, x: float) -> float:
    # D(N_p(0, g^p) || N_p(0, a^p)) with x = ln(g/a):  expm1(p x)/p - x.
    # The Taylor form sum_{k>=2} p^(k-1) x^k / k! avoids the cancellation
    # near x = 0, which is where every covert operating point sits.
    px = p * x
    if abs(px) < 1e-2:
        term = x * px / 2.0
        total = term
        for k in range(3, 12):
            term *= px / k
            total += term
        return total
    return math.expm1(px) / p - x


def kl_gg(gamma: float, noise: GGParams) -> float:
    """D(N_p(0, gamma^p) || N_p(0, alpha^p)) = ln(alpha/gamma) + (gamma^p/alpha^p - 1)/p."""
    if not (math.isfinite(gamma) and gamma > 0):
        raise ParameterError(f"output scale gamma must be positive and finite, got {gamma!r}")
    return max(_kl_scale(noise.p, math.log(gamma / noise.alpha)), 0.0)


def _radius_of(density, mass: float) -> float:
    if hasattr(density, "radius"):
        return float(density.radius(mass))
    # scipy frozen distributions
    return float(max(abs(density.ppf(mass / 2)), abs(density.isf(mass / 2))))


def kl_numeric(density_y, noise: GGParams, *, tail_mass: float = 1e-13,
               tol: float = 1e-8) -> QuadResult:
    """Quadrature estimate of D(P_Y || N_p(0, alpha^p)).

    Parameters
    ----------
    density_y : GGParams or scipy frozen distribution
        Anything exposing ``logpdf`` and either ``radius(mass)`` or
        ``ppf``/``isf``.  Must have finite E|Y|^p.
    noise : GGParams
        Reference noise law.
    tail_mass : float
        The integration window (-T, T) leaves at most this much probability
        outside, under the heavier of the two laws.
    tol : float
        Maximum accepted accumulated error estimate.

    Returns
    -------
    QuadResult
        ``value`` and the accumulated absolute error estimate ``abserr``.

    Raises
    ------
    QuadratureError
        If QUADPACK flags a subinterval or the error estimate exceeds ``tol``.
    """
    radius = max(_radius_of(density_y, tail_mass), tail_radius(noise, tail_mass))

    def integrand(y):
        ly = float(density_y.logpdf(y))
        if ly == -math.inf:
            return 0.0
        return math.exp(ly) * (ly - log_pdf(noise, y))

    # geometric breakpoints resolve the cusp at 0 (p < 1) and the slow tails
    inner = np.geomspace(radius * 1e-9, radius, 28)
    edges = np.concatenate([-inner[::-1], [0.0], inner])
    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            try:
                v, e = integrate.quad(integrand, lo, hi, epsabs=1e-15, epsrel=1e-12, limit=200)
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(f"KL quadrature failed on [{lo:.3g}, {hi:.3g}]: {exc}") from exc
            total += v
            err += e
    if err > tol:
        raise QuadratureError(f"KL quadrature error estimate {err:.2e} exceeds {tol:.0e}")
    return QuadResult(total, err)


def moment_constraint_bounds(moment_p: float, noise: GGParams) -> tuple[float, float]:
    """Entropy ceiling and divergence floor implied by E|Y|^p = ``moment_p``.

    With gamma^p = (p/2) E|Y|^p, any law Y satisfies
    h(Y) <= ln(gamma/c_p) + 1/p and
    D(P_Y || P_Z) >= ln(alpha/gamma) + (gamma^p/alpha^p - 1)/p,
    with equality in both when Y ~ N_p(0, gamma^p).
    """
    if not (math.isfinite(moment_p) and moment_p > 0):
        raise ParameterError(f"E|Y|^p must be positive and finite, got {moment_p!r}")
    p = noise.p
    gamma = (0.5 * p * moment_p) ** (1.0 / p)
    entropy_bound = math.log(gamma) - log_normalizer(p) + 1.0 / p
    return entropy_bound, kl_gg(gamma, noise)


def sample(params: GGParams, count: int, seed: int) -> GGSample:
    """Draw ``count`` i.i.d. values Z = S * alpha * (2 W)^(1/p).

    W ~ Gamma(1/p, 1) and S is an independent fair sign.  Identical
    ``(params, count, seed)`` give bit-identical output.
    """
    if int(count) != count or count < 1:
        raise ParameterError(f"count must be a positive integer, got {count!r}")
    rng = np.random.default_rng(seed)
    values = draw(params, rng, int(count))
    values.flags.writeable = False
    return GGSample(values, seed)


def draw(params: GGParams, rng: np.random.Generator, size) -> np.ndarray:
    """Gamma-transform draws from an existing generator (no seeding)."""
    w = rng.standard_gamma(1.0 / params.p, size=size)
    sign = rng.integers(0, 2, size=size, dtype=np.int8) * 2 - 1
    return sign * params.alpha * (2.0 * w) ** (1.0 / params.p)
