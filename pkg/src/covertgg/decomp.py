"""Covert input laws P_X with X + Z ~ N_p(0, (beta alpha)^p).

For a self-decomposable noise law, beta Z = V + U with U an independent copy
of Z, and X = V is the input that turns the noise into a wider member of the
same family.  Two shapes have closed forms:

* ``p = 2``: X ~ N(0, (beta^2 - 1) alpha^2);
* ``p = 1``: an atom of mass beta^-2 at 0 mixed with N_1(0, beta alpha).

For ``p`` in (0, 1) the characteristic function phi(beta t) / phi(t) of X is
inverted numerically.  It tends to beta^-(1+p) as |t| -> infinity (the cusp
of the noise density at 0 fixes the tail of phi), so X carries an atom of that
mass at the origin; the atom is removed before the FFT so only a decaying
remainder is inverted.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import ggdist
from .errors import DecompositionError, ParameterError, QuadratureError, UnsupportedShapeError
from .ggdist import GGParams, GGSample

CLOSED_FORM_LAPLACE = "closed_form_laplace"
CLOSED_FORM_GAUSSIAN = "closed_form_gaussian"
TABULATED = "tabulated"

# Below this shape the (1e-10, 1 - 1e-10) quantile window spans so many noise
# scales that a 2^16 grid can no longer resolve the cusp at the origin.
P_TABULATED_MIN = 0.3

CF_ABS_TOL = 1e-10
_SERIES_TERMS = 400


@dataclass(frozen=True)
class DecompositionSpec:
    """Law of the covert input X: an atom at 0 plus a continuous part.

    ``weights`` holds cell-averaged density values of the continuous part on
    the grid ``grid_min + k * grid_step`` (only for the tabulated
    representation), normalised so that
    ``atom_at_zero + weights.sum() * grid_step == 1``.
    """

    noise: GGParams
    beta: float
    representation: str
    atom_at_zero: float
    grid_min: float = 0.0
    grid_step: float = 0.0
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    clipped_mass: float = 0.0
    atom_grid_estimate: float = math.nan

    @property
    def gamma(self) -> float:
        """Scale of the output law N_p(0, gamma^p)."""
        return self.beta * self.noise.alpha

    @property
    def continuous_mass(self) -> float:
        return 1.0 - self.atom_at_zero

    def cell_edges(self) -> np.ndarray:
        k = np.arange(len(self.weights) + 1)
        return self.grid_min - 0.5 * self.grid_step + k * self.grid_step

    def continuous_cdf(self) -> np.ndarray:
        """Normalised CDF of the continuous part at the cell edges."""
        cdf = np.concatenate([[0.0], np.cumsum(self.weights)])
        return cdf / cdf[-1]

    def to_json(self) -> str:
        return json.dumps(spec_to_dict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DecompositionSpec":
        return spec_from_dict(json.loads(text))


def spec_to_dict(spec: DecompositionSpec) -> dict:
    return {
        "p": spec.noise.p,
        "alpha": spec.noise.alpha,
        "beta": spec.beta,
        "representation": spec.representation,
        "atom_at_zero": spec.atom_at_zero,
        "grid_min": spec.grid_min,
        "grid_step": spec.grid_step,
        "weights": [float(w) for w in spec.weights],
        "clipped_mass": spec.clipped_mass,
    }


def spec_from_dict(data: dict) -> DecompositionSpec:
    try:
        rep = data["representation"]
        if rep not in (CLOSED_FORM_GAUSSIAN, CLOSED_FORM_LAPLACE, TABULATED):
            raise ParameterError(f"unknown representation {rep!r}")
        weights = np.asarray(data.get("weights", []), dtype=float)
        if rep == TABULATED and (len(weights) == 0 or np.any(weights < 0)):
            raise ParameterError("tabulated spec needs a non-empty, nonnegative weights array")
        weights.flags.writeable = False
        return DecompositionSpec(
            noise=GGParams(data["p"], data["alpha"]),
            beta=float(data["beta"]),
            representation=rep,
            atom_at_zero=float(data["atom_at_zero"]),
            grid_min=float(data.get("grid_min", 0.0)),
            grid_step=float(data.get("grid_step", 0.0)),
            weights=weights,
            clipped_mass=float(data.get("clipped_mass", 0.0)),
        )
    except KeyError as exc:
        raise ParameterError(f"decomposition JSON lacks field {exc.args[0]!r}") from None


# ---------------------------------------------------------------------------
# characteristic function of N_p(0, 1)


def _series_log_coefficients(p: float, terms: int):
    k = np.arange(1, terms + 1, dtype=float)
    logmag = special.gammaln(k * p + 1) - special.gammaln(k + 1) - k * math.log(2.0)
    sign = np.where(k % 2 == 1, 1.0, -1.0) * np.sin(0.5 * math.pi * k * p)
    return k, logmag, sign


def _cf_series(p: float, t: np.ndarray):
    """Large-|t| expansion phi(t) = sum_k A_k t^-(kp+1), convergent for p < 1.

    Term-by-term Fourier transform of exp(-|z|^p / 2) = sum (-|z|^p/2)^k / k!.
    Returns values and a mask of points where the sum is trustworthy (no
    cancellation beyond 1e2 and a negligible final term).
    """
    k, logmag, sign = _series_log_coefficients(p, _SERIES_TERMS)
    two_c = 2.0 * math.exp(ggdist.log_normalizer(p))
    values = np.zeros_like(t)
    ok = np.zeros(t.shape, dtype=bool)
    for start in range(0, len(t), 2048):
        tt = t[start:start + 2048]
        with np.errstate(over="ignore"):
            mag = np.exp(logmag[None, :] - np.outer(np.log(tt), k * p + 1))
        terms = two_c * sign[None, :] * mag
        values[start:start + 2048] = terms.sum(axis=1)
        biggest = np.abs(terms).max(axis=1)
        ok[start:start + 2048] = (biggest < 1e2) & (np.abs(terms[:, -1]) < 1e-20) & np.isfinite(biggest)
    return values, ok


def _cf_quad(p: float, t: float) -> tuple[float, float]:
    """E cos(tZ) for Z ~ N_p(0, 1) by oscillatory-weight quadrature."""
    two_c = 2.0 * math.exp(ggdist.log_normalizer(p))
    zmax = ggdist.tail_radius(GGParams(p), 1e-17)

    def f(z):
        return two_c * math.exp(-0.5 * z**p)

    if zmax > 10:
        edges = np.concatenate([[0.0, 1.0], np.geomspace(10.0, zmax, 6)])
    else:
        edges = np.array([0.0, zmax])
    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(f, lo, hi, weight="cos", wvar=t,
                                  epsabs=1e-14, epsrel=1e-13, limit=500)
            total += v
            err += e
    return total, err


def _cf_unit(p: float, t, method: str = "auto") -> np.ndarray:
    """Characteristic function of N_p(0, 1) at |t| (vectorised)."""
    t = np.abs(np.atleast_1d(np.asarray(t, dtype=float)))
    if method == "auto" and p == 2.0:
        return np.exp(-0.5 * t * t)
    if method == "auto" and p == 1.0:
        return 1.0 / (1.0 + 4.0 * t * t)
    out = np.ones_like(t)
    todo = t > 0
    if method == "auto" and p < 1.0 and todo.any():
        vals, ok = _cf_series(p, t[todo])
        idx = np.nonzero(todo)[0]
        out[idx[ok]] = vals[ok]
        todo[idx[ok]] = False
    for i in np.nonzero(todo)[0]:
        v, e = _cf_quad(p, float(t[i]))
        if e > CF_ABS_TOL:
            raise QuadratureError(
                f"characteristic function quadrature at t={t[i]:.4g} (p={p}) "
                f"has error estimate {e:.2e} > {CF_ABS_TOL:.0e}")
        out[i] = v
    return out


def cf_gg(params: GGParams, t, method: str = "auto"):
    """Characteristic function E[cos(tZ)] of Z ~ N_p(0, alpha^p).

    The density is even, so the transform is real.  ``method="quad"`` always
    uses adaptive oscillatory quadrature; ``"auto"`` takes the Gaussian and
    Laplace closed forms at p = 2 and p = 1 and, for p < 1, a convergent
    large-|t| power series wherever it is numerically safe.  Either way the
    absolute error is below 1e-10.
    """
    if method not in ("auto", "quad"):
        raise ParameterError(f"method must be 'auto' or 'quad', got {method!r}")
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ParameterError("t must be finite")
    out = _cf_unit(params.p, params.alpha * arr.ravel(), method).reshape(arr.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# decomposition


def _check_supported(noise: GGParams, beta: float):
    if not (math.isfinite(beta) and beta >= 1.0):
        raise ParameterError(f"beta must be >= 1, got {beta!r}")
    p = noise.p
    if not (p <= 1.0 or p == 2.0):
        raise UnsupportedShapeError(
            f"p={p} not supported: a covert input law is only guaranteed for p in (0, 1] and p = 2")


def decompose(noise: GGParams, beta: float, *, grid_size: int | None = None,
              tail_mass: float = 1e-10, force_tabulated: bool = False) -> DecompositionSpec:
    """Input law X with X + Z ~ N_p(0, (beta alpha)^p), Z ~ N_p(0, alpha^p).

    Parameters
    ----------
    noise : GGParams
        Noise law; p must be in (0, 1] or equal to 2.
    beta : float
        Output-to-noise scale ratio gamma/alpha, at least 1.
    grid_size : int, optional
        FFT length of the tabulated branch.  Defaults to 2^16, or 2^18 for
        p < 0.5 where the output law's tails are much wider than its core.
    tail_mass : float
        Each tail of the output law beyond the grid holds this much mass.
    force_tabulated : bool
        Run the FFT branch even when a closed form exists (cross-checks).

    Raises
    ------
    UnsupportedShapeError
        For p in (1, 2) or p > 2, and for tabulated shapes below 0.3.
    DecompositionError
        If the characteristic-function ratio is not a valid input law
        numerically (vanishing denominator, or too much negative mass).
    """
    beta = float(beta)
    _check_supported(noise, beta)
    p = noise.p
    if beta == 1.0:
        return DecompositionSpec(noise, 1.0, CLOSED_FORM_GAUSSIAN if p == 2.0 else CLOSED_FORM_LAPLACE,
                                 atom_at_zero=1.0, atom_grid_estimate=1.0)
    if p == 2.0:
        return DecompositionSpec(noise, beta, CLOSED_FORM_GAUSSIAN, atom_at_zero=0.0,
                                 atom_grid_estimate=0.0)
    if p == 1.0 and not force_tabulated:
        return DecompositionSpec(noise, beta, CLOSED_FORM_LAPLACE, atom_at_zero=beta**-2,
                                 atom_grid_estimate=beta**-2)
    if p < P_TABULATED_MIN:
        raise UnsupportedShapeError(f"tabulated decomposition needs p >= {P_TABULATED_MIN}, got p={p}")
    if grid_size is None:
        grid_size = 2**16 if p >= 0.5 else 2**18
    return _tabulate(noise, beta, grid_size, tail_mass)


def _tabulate(noise: GGParams, beta: float, n: int, tail_mass: float) -> DecompositionSpec:
    p, alpha = noise.p, noise.alpha
    # work in units of alpha, rescale at the end
    half_width = ggdist.tail_radius(GGParams(p, beta), 2.0 * tail_mass)
    h = 2.0 * half_width / n
    t = 2.0 * math.pi * np.fft.rfftfreq(n, d=h)

    phi = _cf_unit(p, t)
    phi_beta = _cf_unit(p, beta * t)
    if np.any(phi <= 1e-300):
        bad = t[np.argmax(phi <= 1e-300)]
        raise DecompositionError(f"noise characteristic function vanishes near t={bad:.4g}; cannot divide")
    ratio = phi_beta / phi
    atom = beta ** -(1.0 + p)
    remainder = (ratio - atom) / (1.0 - atom)
    # cell averages: multiply by the transform of the cell indicator
    remainder *= np.sinc(t * h / (2.0 * math.pi))
    # irfft evaluates sum_k psi_k e^{+i t_k x_j}; psi is even so the sign is moot
    masses = np.fft.irfft(remainder, n=n)
    masses = np.fft.fftshift(masses)  # index j <-> x = (j - n/2) h

    negative = masses < 0
    clipped = float(-masses[negative].sum()) * (1.0 - atom)
    if clipped > 1e-4:
        raise DecompositionError(f"deconvolution left {clipped:.2e} negative mass; grid too coarse")
    masses[negative] = 0.0
    masses /= masses.sum()
    density = masses * (1.0 - atom) / (h * alpha)
    density.flags.writeable = False
    return DecompositionSpec(
        noise=noise,
        beta=beta,
        representation=TABULATED,
        atom_at_zero=atom,
        grid_min=-n / 2 * h * alpha,
        grid_step=h * alpha,
        weights=density,
        clipped_mass=clipped,
        atom_grid_estimate=float(ratio[-1]),
    )


# ---------------------------------------------------------------------------
# sampling


def draw_input(spec: DecompositionSpec, rng: np.random.Generator, size) -> np.ndarray:
    """Draws from P_X using an existing generator."""
    alpha, beta = spec.noise.alpha, spec.beta
    if spec.atom_at_zero >= 1.0:
        return np.zeros(size)
    if spec.representation == CLOSED_FORM_GAUSSIAN:
        return rng.normal(0.0, alpha * math.sqrt(beta * beta - 1.0), size=size)
    u = rng.random(size=size)
    cont = u >= spec.atom_at_zero
    out = np.zeros(np.shape(u))
    if spec.representation == CLOSED_FORM_LAPLACE:
        out[cont] = ggdist.draw(GGParams(1.0, beta * alpha), rng, int(cont.sum()))
        return out
    # reuse the uniform: conditioned on u >= atom it is uniform on [atom, 1)
    v = (u[cont] - spec.atom_at_zero) / (1.0 - spec.atom_at_zero)
    out[cont] = np.interp(v, spec.continuous_cdf(), spec.cell_edges())
    return out


def sample_input(spec: DecompositionSpec, count: int, seed: int) -> GGSample:
    """``count`` i.i.d. draws of X; deterministic in (spec, count, seed)."""
    if int(count) != count or count < 1:
        raise ParameterError(f"count must be a positive integer, got {count!r}")
    values = draw_input(spec, np.random.default_rng(seed), int(count))
    values.flags.writeable = False
    return GGSample(values, seed)


# ---------------------------------------------------------------------------
# verification helpers


def continuous_cell_masses(spec: DecompositionSpec, edges: np.ndarray) -> np.ndarray:
    """Mass of the continuous part of X in each interval of ``edges``."""
    alpha, beta = spec.noise.alpha, spec.beta
    if spec.atom_at_zero >= 1.0:
        return np.zeros(len(edges) - 1)
    if spec.representation == CLOSED_FORM_LAPLACE:
        cdf = ggdist.cdf(GGParams(1.0, beta * alpha), edges)
    elif spec.representation == CLOSED_FORM_GAUSSIAN:
        cdf = special.ndtr(edges / (alpha * math.sqrt(beta * beta - 1.0)))
    else:
        cdf = np.interp(edges, spec.cell_edges(), spec.continuous_cdf())
    return np.diff(cdf) * (1.0 - spec.atom_at_zero)


def convolution_l1(spec: DecompositionSpec, grid_size: int = 2**14) -> float:
    """L1 distance between the law of X + Z and N_p(0, gamma^p) on a grid.

    Cell masses of X and of Z are convolved discretely and compared with the
    exact cell masses of the target law.
    """
    from scipy import signal

    target = GGParams(spec.noise.p, spec.gamma)
    half = ggdist.tail_radius(target, 1e-9)
    h = 2.0 * half / grid_size
    k = np.arange(grid_size + 1) - grid_size / 2
    edges = (k - 0.5) * h
    noise_cells = np.diff(ggdist.cdf(spec.noise, edges))
    x_cells = continuous_cell_masses(spec, edges)
    x_cells[grid_size // 2] += spec.atom_at_zero
    conv = signal.fftconvolve(x_cells, noise_cells)[grid_size // 2: grid_size // 2 + grid_size]
    # the discrete convolution of two grids centred on 0 is centred on 0 again
    full = np.concatenate([[-np.inf], edges[1:-1], [np.inf]])
    exact = np.diff(ggdist.cdf(target, full))
    return float(np.abs(conv - exact).sum())
