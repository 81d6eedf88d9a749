"""Monte Carlo checks of covert random coding over N_p(0, alpha^p) noise.

Every trial draws from its own generator, seeded by ``(seed, trial_index)``
through :class:`numpy.random.SeedSequence`, and results are reduced in trial
order.  The number of worker threads therefore never changes a result.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import special

from . import colored as colored_mod
from . import decomp
from .budget import BudgetSpec, gamma_achievable, gamma_converse_max, normalized_gap
from .errors import ParameterError, UnsupportedShapeError
from .ggdist import GGParams, draw

M_MAX_CODEBOOK = 4096
CHUNK_ROWS = 256
SYMBOL_CHUNK = 1 << 16

THRESHOLD = "threshold"
ML = "ml"


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one trial, a pure function of (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


@functools.lru_cache(maxsize=32)
def input_law(noise: GGParams, beta: float) -> decomp.DecompositionSpec:
    """Cached covert input law for (noise, beta)."""
    return decomp.decompose(noise, beta)


# ---------------------------------------------------------------------------
# information density


def info_density_terms(x, y, noise: GGParams, gamma_n: float) -> np.ndarray:
    """Per-symbol ln f(y|x) - ln f(y) for output law N_p(0, gamma_n^p)."""
    p, alpha = noise.p, noise.alpha
    return (math.log(gamma_n / alpha)
            + 0.5 * (np.abs(y) / gamma_n) ** p
            - 0.5 * (np.abs(y - x) / alpha) ** p)


def info_density(x, y, noise: GGParams, gamma_n: float) -> float:
    """Information density of a block: sum of the per-symbol terms, in nats."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ParameterError(f"x and y lengths differ: {x.shape} vs {y.shape}")
    if gamma_n < noise.alpha:
        raise ParameterError(f"gamma_n={gamma_n} is below alpha={noise.alpha}")
    return float(info_density_terms(x, y, noise, gamma_n).sum())


# ---------------------------------------------------------------------------
# confidence intervals


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def proportion_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Normal-approximation interval, Wilson when fewer than 5 successes or failures."""
    if n == 0:
        return 0.0, 1.0
    if min(k, n - k) < 5:
        return wilson_interval(k, n, z)
    phat = k / n
    half = z * math.sqrt(phat * (1 - phat) / n)
    return max(0.0, phat - half), min(1.0, phat + half)


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class CodingExperiment:
    """Random code with i.i.d. P_X codewords and information-density decoding.

    ``threshold_gamma`` is the per-symbol slack of the threshold decoder;
    ``None`` means n^(-3/4).
    """

    budget: BudgetSpec
    message_count: int
    trials: int
    seed: int
    threshold_gamma: float | None = None
    decoder: str = THRESHOLD

    def __post_init__(self):
        if int(self.message_count) != self.message_count or self.message_count < 1:
            raise ParameterError(f"message_count must be a positive integer, got {self.message_count!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ParameterError(f"trials must be a positive integer, got {self.trials!r}")
        if self.threshold_gamma is not None and not self.threshold_gamma > 0:
            raise ParameterError(f"threshold_gamma must be positive, got {self.threshold_gamma!r}")
        if self.decoder not in (THRESHOLD, ML):
            raise ParameterError(f"decoder must be {THRESHOLD!r} or {ML!r}")
        p = self.budget.noise.p
        if not (p <= 1.0 or p == 2.0):
            raise UnsupportedShapeError(f"no covert input law for p={p}")

    @property
    def noise(self) -> GGParams:
        return self.budget.noise

    @property
    def n(self) -> int:
        return self.budget.n

    @property
    def gamma_n(self) -> float:
        return gamma_achievable(self.budget).gamma_n

    @property
    def slack(self) -> float:
        """Total threshold slack n * threshold_gamma in nats."""
        g = self.threshold_gamma if self.threshold_gamma is not None else self.n ** -0.75
        return self.n * g

    def threshold(self, log_m: float | None = None) -> float:
        if log_m is None:
            log_m = math.log(self.message_count)
        return log_m + self.slack

    def with_messages(self, message_count: int) -> "CodingExperiment":
        return dataclasses.replace(self, message_count=message_count)


class TrialOutcome(NamedTuple):
    decoded_ok: bool
    info_density_sent: float


def run_coding_trial(exp: CodingExperiment, trial_index: int) -> TrialOutcome:
    """One transmission over a freshly drawn random code.

    The codewords are i.i.d., so by exchangeability the transmitted one is
    drawn first and the |M| - 1 competitors follow from the same stream; codes
    for growing |M| are therefore nested and the per-trial outcome can only
    get worse as |M| grows.
    """
    noise, n = exp.noise, exp.n
    gamma = exp.gamma_n
    law = input_law(noise, gamma / noise.alpha)
    rng = trial_rng(exp.seed, trial_index)
    x0 = decomp.draw_input(law, rng, n)
    y = x0 + draw(noise, rng, n)
    i0 = float(info_density_terms(x0, y, noise, gamma).sum())
    if exp.message_count == 1:
        return TrialOutcome(True, i0)
    thr = exp.threshold()
    if exp.decoder == THRESHOLD and i0 <= thr:
        return TrialOutcome(False, i0)
    remaining = exp.message_count - 1
    while remaining > 0:
        rows = min(remaining, CHUNK_ROWS)
        xs = decomp.draw_input(law, rng, (CHUNK_ROWS, n))[:rows]
        competitors = info_density_terms(xs, y[None, :], noise, gamma).sum(axis=1)
        bar = thr if exp.decoder == THRESHOLD else i0
        if np.any(competitors >= bar) if exp.decoder == ML else np.any(competitors > bar):
            return TrialOutcome(False, i0)
        remaining -= rows
    return TrialOutcome(True, i0)


def _map_trials(func, count: int, workers: int | None, block: int = 64) -> list:
    """Apply ``func(index)`` for 0..count-1, results in index order."""
    if not workers or workers <= 1 or count <= block:
        return [func(i) for i in range(count)]
    blocks = [range(s, min(s + block, count)) for s in range(0, count, block)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda r: [func(i) for i in r], blocks)
        return [item for part in parts for item in part]


@dataclass(frozen=True)
class ExperimentResult:
    error_rate: float
    error_ci: tuple[float, float]
    info_density_mean: float
    info_density_ci: tuple[float, float]
    info_density_var: float
    theory_mean: float
    variance_bound: float | None
    warden_sum_errors: float | None = None
    trials: int = 0
    message_count: int = 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["error_ci"] = list(self.error_ci)
        d["info_density_ci"] = list(self.info_density_ci)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _density_stats(totals: np.ndarray, n: int) -> tuple[float, tuple[float, float], float]:
    per = totals / n
    mean = float(per.mean())
    if len(per) > 1:
        se = float(per.std(ddof=1) / math.sqrt(len(per)))
        var = float(totals.var(ddof=1) / n)
    else:
        se, var = math.inf, 0.0
    return mean, (mean - 1.96 * se, mean + 1.96 * se), var


def run_experiment(exp: CodingExperiment, *, workers: int | None = None,
                   warden_trials: int = 0) -> ExperimentResult:
    """Error rate and information-density statistics over ``exp.trials`` codes."""
    outcomes = _map_trials(lambda i: run_coding_trial(exp, i), exp.trials, workers)
    ok = np.array([o.decoded_ok for o in outcomes])
    dens = np.array([o.info_density_sent for o in outcomes])
    errors = int((~ok).sum())
    mean, ci, var = _density_stats(dens, exp.n)
    gamma = exp.gamma_n
    warden = None
    if warden_trials:
        warden = warden_test(exp.noise, gamma, exp.n, warden_trials, exp.seed + 1, workers=workers).sum_errors
    return ExperimentResult(
        error_rate=errors / exp.trials,
        error_ci=proportion_interval(errors, exp.trials),
        info_density_mean=mean,
        info_density_ci=ci,
        info_density_var=var,
        theory_mean=math.log(gamma / exp.noise.alpha),
        variance_bound=variance_bound(exp.noise, gamma) if exp.noise.p <= 1.0 else None,
        warden_sum_errors=warden,
        trials=exp.trials,
        message_count=exp.message_count,
    )


def block_information_density(exp: CodingExperiment, *, workers: int | None = None) -> np.ndarray:
    """i(X^n; Y^n) of the transmitted codeword in each trial, no codebook drawn.

    Uses the same streams as :func:`run_coding_trial`, so the values coincide
    with its ``info_density_sent``.
    """
    noise, n, gamma = exp.noise, exp.n, exp.gamma_n
    law = input_law(noise, gamma / noise.alpha)

    def one(i):
        rng = trial_rng(exp.seed, i)
        x = decomp.draw_input(law, rng, n)
        y = x + draw(noise, rng, n)
        return float(info_density_terms(x, y, noise, gamma).sum())

    return np.array(_map_trials(one, exp.trials, workers))


# ---------------------------------------------------------------------------
# rate estimation


def message_grid(max_log2: float, per_octave: int = 16) -> list[int]:
    """Geometric grid of distinct message-set sizes 2^(k/per_octave) >= 2."""
    sizes = sorted({int(math.floor(2.0 ** (k / per_octave)))
                    for k in range(per_octave, int(max_log2 * per_octave) + 1)})
    return sizes


@dataclass(frozen=True)
class SweepPoint:
    message_count: int
    log_m: float
    eps_hat: float
    eps_ci: tuple[float, float]


@dataclass(frozen=True)
class RateEstimate:
    """Largest ln|M| whose measured error is at most the target."""

    n: int
    delta: float
    target_eps: float
    method: str
    k_hat: float
    k_hat_norm: float
    message_count: int
    eps_hat: float
    eps_ci: tuple[float, float]
    k_hat_ci: tuple[float, float]
    i_mean: float
    i_var: float
    points: tuple[SweepPoint, ...] = field(default=())

    @property
    def positive(self) -> bool:
        return self.k_hat > 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["eps_ci"] = list(self.eps_ci)
        d["k_hat_ci"] = list(self.k_hat_ci)
        d["points"] = [
            {"message_count": pt.message_count, "log_m": pt.log_m, "eps_hat": pt.eps_hat,
             "eps_ci": list(pt.eps_ci)} for pt in self.points]
        return d


CSV_COLUMNS = ("p", "alpha", "delta", "n", "M", "eps_hat", "eps_ci_lo", "eps_ci_hi",
               "K_hat_norm", "i_mean", "i_var", "warden_sum")


def csv_row(estimate: RateEstimate, noise: GGParams, warden_sum: float | None = None) -> dict:
    """One row of the sweep CSV contract."""
    return {
        "p": noise.p, "alpha": noise.alpha, "delta": estimate.delta, "n": estimate.n,
        "M": estimate.message_count, "eps_hat": estimate.eps_hat,
        "eps_ci_lo": estimate.eps_ci[0], "eps_ci_hi": estimate.eps_ci[1],
        "K_hat_norm": estimate.k_hat_norm, "i_mean": estimate.i_mean, "i_var": estimate.i_var,
        "warden_sum": "" if warden_sum is None else warden_sum,
    }


def _k_interval(points: Sequence[SweepPoint], target: float) -> tuple[float, float]:
    # pessimistic end: upper CI under target; optimistic end: lower CI under target
    lo = max((pt.log_m for pt in points if pt.eps_ci[1] <= target), default=0.0)
    hi = max((pt.log_m for pt in points if pt.eps_ci[0] <= target), default=0.0)
    return lo, hi


def feinstein_error(info_densities: np.ndarray, log_m: float, slack: float) -> tuple[float, tuple[float, float]]:
    """Monte Carlo value of P{i <= ln|M| + slack} + exp(-slack).

    This bounds the ensemble error of the threshold decoder with threshold
    ln|M| + slack: the transmitted codeword misses with the first probability
    and, by a union bound over |M| - 1 independent codewords, some competitor
    passes with probability at most |M| e^-(ln|M| + slack).
    """
    k = int(np.count_nonzero(info_densities <= log_m + slack))
    t = len(info_densities)
    lo, hi = proportion_interval(k, t)
    tail = math.exp(-slack)
    return k / t + tail, (min(1.0, lo + tail), min(1.0, hi + tail))


def estimate_rate(exp: CodingExperiment, target_eps: float, *, method: str = "feinstein",
                  grid: Sequence[int] | None = None, workers: int | None = None) -> RateEstimate:
    """Empirical K_n: the largest ln|M| on ``grid`` with error at most ``target_eps``.

    ``method="codebook"`` simulates the threshold (or ML) decoder with
    explicit codebooks, up to 4096 messages, and bisects the grid assuming the
    error rate is monotone in |M|.  ``method="feinstein"`` evaluates the
    decoder's Monte Carlo error bound from one sample of transmitted-codeword
    information densities, so |M| is unrestricted.
    """
    if not 0 < target_eps < 1:
        raise ParameterError(f"target_eps must lie in (0, 1), got {target_eps!r}")
    dens = block_information_density(exp, workers=workers)
    i_mean, _, i_var = _density_stats(dens, exp.n)
    if method == "feinstein":
        if grid is None:
            top = max(1.0, (dens.max() + 1.0) / math.log(2.0))
            grid = message_grid(top)
        points = []
        for m in grid:
            eps, ci = feinstein_error(dens, math.log(m), exp.slack)
            points.append(SweepPoint(m, math.log(m), eps, ci))
        passing = [pt for pt in points if pt.eps_hat <= target_eps]
        best = passing[-1] if passing else None
    elif method == "codebook":
        if grid is None:
            grid = [2**k for k in range(1, 13)]
        if max(grid) > M_MAX_CODEBOOK:
            raise ParameterError(f"codebook sweeps are limited to {M_MAX_CODEBOOK} messages")
        cache: dict[int, SweepPoint] = {}

        def point(idx):
            m = grid[idx]
            if m not in cache:
                res = run_experiment(exp.with_messages(m), workers=workers)
                cache[m] = SweepPoint(m, math.log(m), res.error_rate, res.error_ci)
            return cache[m]

        lo, hi = -1, len(grid)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if point(mid).eps_hat <= target_eps:
                lo = mid
            else:
                hi = mid
        best = point(lo) if lo >= 0 else None
        points = [cache[m] for m in sorted(cache)]
    else:
        raise ParameterError(f"method must be 'feinstein' or 'codebook', got {method!r}")
    norm = math.sqrt(exp.n * exp.budget.delta)
    k_lo, k_hi = _k_interval(points, target_eps)
    k_ci = (k_lo / norm, k_hi / norm)
    if best is None:
        # no positive rate at this n and target
        return RateEstimate(exp.n, exp.budget.delta, target_eps, method, 0.0, 0.0, 1,
                            math.nan, (math.nan, math.nan), k_ci, i_mean, i_var, tuple(points))
    return RateEstimate(exp.n, exp.budget.delta, target_eps, method, best.log_m, best.log_m / norm,
                        best.message_count, best.eps_hat, best.eps_ci, k_ci, i_mean, i_var, tuple(points))


def rate_cap_normalized(budget: BudgetSpec) -> float:
    """Converse ceiling on K_n / sqrt(n delta): the normalized gap of the largest admissible gamma."""
    return normalized_gap(gamma_converse_max(budget), budget)


# ---------------------------------------------------------------------------
# information-density variance


def variance_bound(noise: GGParams, gamma_n: float, *, as_printed: bool = False) -> float:
    """Closed-form ceiling on the per-symbol variance of the information density, p <= 1.

    (1 / (4 gamma^2p alpha^2p)) |alpha^2 E[X^2] + (alpha - gamma)^2 E[Z^2]|^p with
    E[X^2] = E[Y^2] - E[Z^2].  ``as_printed=True`` reproduces the published
    display, whose first term carries alpha instead of alpha^2; the two agree
    at alpha = 1.
    """
    p, alpha = noise.p, noise.alpha
    if p > 1.0:
        raise UnsupportedShapeError(f"the variance bound needs p <= 1 (concavity of |t|^p), got p={p}")
    if gamma_n < alpha:
        raise ParameterError(f"gamma_n={gamma_n} is below alpha={alpha}")
    g = math.exp((2.0 / p) * math.log(2.0) + special.gammaln(3.0 / p) - special.gammaln(1.0 / p))
    first = (alpha if as_printed else alpha**2) * g * (gamma_n**2 - alpha**2)
    second = (alpha - gamma_n) ** 2 * g * alpha**2
    return abs(first + second) ** p / (4.0 * gamma_n ** (2 * p) * alpha ** (2 * p))


class VarianceCheck(NamedTuple):
    empirical_var: float
    bound: float
    empirical_mean: float
    standard_error: float


def information_density_sample(noise: GGParams, gamma_n: float, sample_size: int, seed: int,
                               *, workers: int | None = None) -> np.ndarray:
    """Per-symbol information densities of i.i.d. (X, Y) pairs under the covert input law."""
    law = input_law(noise, gamma_n / noise.alpha)
    chunks = [(k, min(SYMBOL_CHUNK, sample_size - k * SYMBOL_CHUNK))
              for k in range(math.ceil(sample_size / SYMBOL_CHUNK))]

    def one(chunk):
        k, size = chunk
        rng = trial_rng(seed, k)
        x = decomp.draw_input(law, rng, size)
        y = x + draw(noise, rng, size)
        return info_density_terms(x, y, noise, gamma_n)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, chunks))
    else:
        parts = [one(c) for c in chunks]
    return np.concatenate(parts)


def variance_check(noise: GGParams, gamma_n: float, sample_size: int, seed: int,
                   *, workers: int | None = None) -> VarianceCheck:
    """Empirical per-symbol variance of the information density next to its bound."""
    bound = variance_bound(noise, gamma_n)
    terms = information_density_sample(noise, gamma_n, sample_size, seed, workers=workers)
    return VarianceCheck(float(terms.var(ddof=1)), bound, float(terms.mean()),
                         float(terms.std(ddof=1) / math.sqrt(len(terms))))


# ---------------------------------------------------------------------------
# warden


class WardenResult(NamedTuple):
    sum_errors: float
    ci: tuple[float, float]
    p_false_alarm: float
    p_missed_detection: float
    exact_sum: float


def warden_exact(noise: GGParams, gamma_n: float, n: int) -> float:
    """P_FA + P_MD of the equal-prior likelihood-ratio test, computed exactly.

    The test only sees S = sum |y_i|^p, and S / (2 s^p) is Gamma(n/p) under
    N_p(0, s^p) noise.
    """
    p, alpha = noise.p, noise.alpha
    if gamma_n == alpha:
        return 1.0
    # LLR > 0  <=>  S > s_star
    s_star = n * math.log(gamma_n / alpha) / (0.5 / alpha**p - 0.5 / gamma_n**p)
    p_fa = special.gammaincc(n / p, s_star / (2 * alpha**p))
    p_md = special.gammainc(n / p, s_star / (2 * gamma_n**p))
    return float(p_fa + p_md)


def warden_test(noise: GGParams, gamma_n: float, n: int, trials: int, seed: int,
                *, workers: int | None = None) -> WardenResult:
    """Simulated equal-prior likelihood-ratio test between noise and covert output.

    H0: y ~ N_p(0, alpha^p)^n, H1: y ~ N_p(0, gamma_n^p)^n.  The warden says H1
    when the log-likelihood ratio is strictly positive.
    """
    p, alpha = noise.p, noise.alpha
    if gamma_n < alpha:
        raise ParameterError(f"gamma_n={gamma_n} is below alpha={alpha}")
    h1 = GGParams(p, gamma_n)
    log_ratio = n * math.log(alpha / gamma_n)
    coef = 0.5 / alpha**p - 0.5 / gamma_n**p

    def one(i):
        rng = trial_rng(seed, i)
        s0 = float((np.abs(draw(noise, rng, n)) ** p).sum())
        s1 = float((np.abs(draw(h1, rng, n)) ** p).sum())
        return log_ratio + coef * s0 > 0, log_ratio + coef * s1 <= 0

    res = _map_trials(one, trials, workers)
    fa = sum(r[0] for r in res)
    md = sum(r[1] for r in res)
    p_fa, p_md = fa / trials, md / trials
    half = 1.96 * math.sqrt((p_fa * (1 - p_fa) + p_md * (1 - p_md)) / trials)
    if half == 0.0:
        # degenerate counts: fall back to the Wilson half-widths
        lo_fa, hi_fa = wilson_interval(fa, trials)
        lo_md, hi_md = wilson_interval(md, trials)
        ci = (lo_fa + lo_md, hi_fa + hi_md)
    else:
        ci = (p_fa + p_md - half, p_fa + p_md + half)
    return WardenResult(p_fa + p_md, ci, p_fa, p_md, warden_exact(noise, gamma_n, n))


def pinsker_floor(total_kl: float) -> float:
    """1 - sqrt(D/2): lower bound on P_FA + P_MD for any test."""
    return 1.0 - math.sqrt(total_kl / 2.0)


# ---------------------------------------------------------------------------
# coloured-channel equivalence


class CoupledOutcome(NamedTuple):
    white_decision: int | None
    colored_decision: int | None


def _threshold_decision(dens: np.ndarray, thr: float) -> int | None:
    passing = np.flatnonzero(dens > thr)
    return int(passing[0]) if len(passing) == 1 else None


def run_coupled_trial(exp: CodingExperiment, transport: colored_mod.CodeTransport,
                      trial_index: int) -> CoupledOutcome:
    """Same codebook, message and noise realization on the white and the coloured channel.

    White channel: codebook X~, noise Z~, threshold decoder g~ on the
    information density.  Coloured channel: codebook A X~, noise A Z~ + mu,
    decoder g(y) = g~(A^-1 (y - mu)).
    """
    noise, n, gamma = exp.noise, exp.n, exp.gamma_n
    if noise.p != 2.0 or noise.alpha != 1.0 or transport.n != n:
        raise ParameterError("coupled trials need unit Gaussian base noise and matching dimension")
    law = input_law(noise, gamma)
    rng = trial_rng(exp.seed, trial_index)
    m = exp.message_count
    book_white = decomp.draw_input(law, rng, (m, n))
    message = int(rng.integers(m))
    z_white = draw(noise, rng, n)
    thr = exp.threshold()

    y_white = book_white[message] + z_white
    white = _threshold_decision(info_density_terms(book_white, y_white[None, :], noise, gamma).sum(axis=1), thr)

    book_col = colored_mod.transport_encoder(transport, book_white)
    z_col = colored_mod.colored_observation(transport, z_white)
    y_col = book_col[message] + z_col
    y_back = colored_mod.transport_decoder(transport, y_col)
    col = _threshold_decision(info_density_terms(book_white, y_back[None, :], noise, gamma).sum(axis=1), thr)
    return CoupledOutcome(white, col)


def run_coupled(exp: CodingExperiment, transport: colored_mod.CodeTransport,
                *, workers: int | None = None) -> list[CoupledOutcome]:
    return _map_trials(lambda i: run_coupled_trial(exp, transport, i), exp.trials, workers)


def run_many(exps: Iterable[CodingExperiment], workers: int | None = None) -> list[ExperimentResult]:
    return [run_experiment(e, workers=workers) for e in exps]
