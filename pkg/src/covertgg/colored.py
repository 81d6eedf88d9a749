"""Noise with memory reduced to white noise by an invertible affine map.

If Z = A Z~ + mu with Z~ i.i.d., then a code (f~, g~) for the white channel
becomes a code for the coloured one through f = A f~ and
g(y) = g~(A^-1 (y - mu)), and vice versa.  A decoding error happens on one
channel exactly when it happens on the other, and the warden's divergence is
unchanged because the same bijection maps outputs and noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ParameterError, TransportError
from .ggdist import GGParams

N_MAX = 4096
COND_MAX = 1e12
ROUNDTRIP_TOL = 1e-9


@dataclass(frozen=True)
class ColoredNoiseModel:
    """Gaussian N(mu, sigma), or ``mixing @ Z~ + mu`` with i.i.d. N_p base noise.

    Exactly one of ``sigma`` and ``mixing`` is set.
    """

    mu: np.ndarray
    sigma: np.ndarray | None = None
    mixing: np.ndarray | None = None
    base: GGParams = GGParams(2.0, 1.0)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or not 1 <= len(mu) <= N_MAX:
            raise ParameterError(f"mu must be a vector of length 1..{N_MAX}")
        if (self.sigma is None) == (self.mixing is None):
            raise ParameterError("give exactly one of sigma and mixing")
        mat = self.sigma if self.sigma is not None else self.mixing
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (len(mu), len(mu)):
            raise ParameterError(f"matrix shape {mat.shape} does not match mu length {len(mu)}")
        if not np.all(np.isfinite(mat)) or not np.all(np.isfinite(mu)):
            raise ParameterError("matrix and mean must be finite")
        if self.sigma is not None:
            if not np.allclose(mat, mat.T, rtol=0, atol=1e-12 * max(1.0, np.abs(mat).max())):
                raise TransportError("sigma is not symmetric")
            object.__setattr__(self, "sigma", mat)
        else:
            object.__setattr__(self, "mixing", mat)
        mu.flags.writeable = False
        mat.flags.writeable = False
        object.__setattr__(self, "mu", mu)

    @property
    def n(self) -> int:
        return len(self.mu)

    @property
    def gaussian(self) -> bool:
        return self.sigma is not None


def ar1_model(n: int, rho: float, variance: float = 1.0, mu=None) -> ColoredNoiseModel:
    """Stationary AR(1) covariance sigma_ij = variance * rho^|i-j|."""
    if not -1.0 < rho < 1.0:
        raise ParameterError(f"AR(1) needs |rho| < 1, got {rho!r}")
    if n < 1:
        raise ParameterError(f"n must be positive, got {n!r}")
    sigma = variance * linalg.toeplitz(rho ** np.arange(n))
    return ColoredNoiseModel(mu=np.zeros(n) if mu is None else mu, sigma=sigma)


@dataclass(frozen=True)
class CodeTransport:
    forward_matrix: np.ndarray
    inverse_matrix: np.ndarray
    offset: np.ndarray
    lower_triangular: bool = False
    condition_number: float = 1.0

    @property
    def n(self) -> int:
        return len(self.offset)

    def roundtrip_residual(self) -> float:
        """Spectral norm of forward @ inverse - I."""
        eye = np.eye(self.n)
        return float(np.linalg.norm(self.forward_matrix @ self.inverse_matrix - eye, 2))


def whiten(model: ColoredNoiseModel) -> CodeTransport:
    """Transport (A, A^-1, mu) with noise = A @ white + mu.

    The Gaussian branch factors sigma = A A^T by Cholesky, so A is lower
    triangular and A^-1 v is a triangular solve.  The mixing branch uses the
    given matrix as is.
    """
    if model.gaussian:
        factor, info = linalg.lapack.dpotrf(model.sigma, lower=1, clean=1)
        if info > 0:
            raise TransportError(
                f"sigma is not positive definite: leading minor of order {info} is not positive")
        if info < 0:
            raise TransportError(f"Cholesky argument {-info} is invalid")
        a = np.tril(factor)
        lower = True
    else:
        a = model.mixing
        lower = False
    try:
        cond = float(np.linalg.cond(a))
    except np.linalg.LinAlgError:
        cond = math.inf
    if not math.isfinite(cond) or cond > COND_MAX:
        raise TransportError(f"transport matrix is singular or ill-conditioned (condition number {cond:.3g})")
    if lower:
        inv = linalg.solve_triangular(a, np.eye(model.n), lower=True)
    else:
        inv = np.linalg.inv(a)
    a = np.array(a)
    for m in (a, inv):
        m.flags.writeable = False
    transport = CodeTransport(a, inv, model.mu, lower, cond)
    resid = transport.roundtrip_residual()
    if resid > ROUNDTRIP_TOL:
        raise TransportError(f"forward @ inverse deviates from identity by {resid:.2e}")
    return transport


def _check_dim(transport: CodeTransport, v: np.ndarray):
    if v.shape[-1] != transport.n:
        raise ParameterError(f"vector length {v.shape[-1]} does not match transport dimension {transport.n}")


def transport_encoder(transport: CodeTransport, codeword_white) -> np.ndarray:
    """Coloured-channel codeword A @ x~ (rows of a 2-D array are codewords)."""
    x = np.asarray(codeword_white, dtype=float)
    _check_dim(transport, x)
    return x @ transport.forward_matrix.T


def inverse_transport_encoder(transport: CodeTransport, codeword) -> np.ndarray:
    """White-channel codeword A^-1 @ x."""
    x = np.asarray(codeword, dtype=float)
    _check_dim(transport, x)
    return _apply_inverse(transport, x)


def transport_decoder(transport: CodeTransport, received) -> np.ndarray:
    """White-domain observation A^-1 (y - mu), fed to the white decoder."""
    y = np.asarray(received, dtype=float)
    _check_dim(transport, y)
    return _apply_inverse(transport, y - transport.offset)


def colored_observation(transport: CodeTransport, white_received) -> np.ndarray:
    """A @ y~ + mu: the coloured output matching a white one."""
    y = np.asarray(white_received, dtype=float)
    _check_dim(transport, y)
    return y @ transport.forward_matrix.T + transport.offset


def _apply_inverse(transport: CodeTransport, v: np.ndarray) -> np.ndarray:
    if transport.lower_triangular:
        # solve A w = v for every row of v
        return linalg.solve_triangular(transport.forward_matrix, v.T, lower=True).T
    return v @ transport.inverse_matrix.T


def gaussian_kl(mean1, cov1, mean2, cov2) -> float:
    """D(N(mean1, cov1) || N(mean2, cov2)) in nats, cov2 positive definite."""
    mean1, mean2 = np.asarray(mean1, float), np.asarray(mean2, float)
    cov1, cov2 = np.asarray(cov1, float), np.asarray(cov2, float)
    n = len(mean1)
    c2 = linalg.cho_factor(cov2, lower=True)
    diff = mean2 - mean1
    trace = float(np.trace(linalg.cho_solve(c2, cov1)))
    maha = float(diff @ linalg.cho_solve(c2, diff))
    logdet2 = 2.0 * float(np.log(np.diag(c2[0])).sum())
    sign1, logdet1 = np.linalg.slogdet(cov1)
    if sign1 <= 0:
        raise ParameterError("cov1 must be positive definite")
    return 0.5 * (trace - n + maha + logdet2 - logdet1)


def _check_psd(input_cov: np.ndarray, n: int):
    if input_cov.shape != (n, n):
        raise ParameterError(f"input covariance must be {n}x{n}, got {input_cov.shape}")
    if not np.allclose(input_cov, input_cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(input_cov).max())):
        raise ParameterError("input covariance is not symmetric")
    if np.linalg.eigvalsh(input_cov).min() < -1e-12 * max(1.0, np.abs(input_cov).max()):
        raise ParameterError("input covariance is not positive semidefinite")


def kl_invariance_check(transport: CodeTransport, input_cov) -> tuple[float, float]:
    """Warden divergences on the coloured and the white channel, Gaussian inputs.

    White side: input N(0, K), noise N(0, I).  Coloured side: input
    N(0, A K A^T), noise N(mu, A A^T).  Both are evaluated independently in
    closed form; they agree to rounding.
    """
    k = np.asarray(input_cov, dtype=float)
    _check_psd(k, transport.n)
    n = transport.n
    eye = np.eye(n)
    a = transport.forward_matrix
    kl_white = gaussian_kl(np.zeros(n), k + eye, np.zeros(n), eye)
    noise_cov = a @ a.T
    kl_colored = gaussian_kl(transport.offset, a @ k @ a.T + noise_cov, transport.offset, noise_cov)
    return kl_colored, kl_white


def sample_noise(model: ColoredNoiseModel, transport: CodeTransport, rng: np.random.Generator,
                 size: int) -> tuple[np.ndarray, np.ndarray]:
    """Coupled draws (Z, Z~) with Z = A Z~ + mu; rows are realizations."""
    from .ggdist import draw

    white = draw(model.base, rng, (size, model.n))
    return white @ transport.forward_matrix.T + transport.offset, white
