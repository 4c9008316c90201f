"""Divergences between members of a scale family as functions of the relative spectrum.

Throughout, ``spectrum`` holds the eigenvalues ``lambda_i`` of
``Sigma2 Sigma1^{-1}`` for the ordered pair ``(p_{mu,Sigma1}, p_{mu,Sigma2})``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ._validation import NumericalError, ValidationError, as_vector, check_count
from .densities import RadialDensity
from .estimators import (
    LOG_P_CUTOFF,
    LOG_RATIO_FLOOR,
    DivergenceEstimate,
    QuadratureError,
    apply_generator,
    check_truncated_tail,
    chunked_mean,
    cutoff_tail_value,
    exact,
    mc_estimate,
)
from .generators import FGenerator, affinity_generator
from .spd import LocationScaleParam, SpdMatrix, Spectrum, as_spd, relative_spectrum


@dataclass(frozen=True, eq=False)
class ScalePair:
    """Two scale-family members sharing the location ``mu``."""

    mu: np.ndarray
    sigma1: SpdMatrix
    sigma2: SpdMatrix
    spectrum: Spectrum

    @classmethod
    def make(cls, mu, sigma1, sigma2) -> "ScalePair":
        s1, s2 = as_spd(sigma1), as_spd(sigma2)
        if s1.dim != s2.dim:
            raise ValidationError(f"dimension mismatch: {s1.dim} vs {s2.dim}")
        mu = as_vector(mu, "mu", s1.dim)
        return cls(mu, s1, s2, relative_spectrum(s1, s2))

    def params(self) -> tuple[LocationScaleParam, LocationScaleParam]:
        return LocationScaleParam(self.mu, self.sigma1), LocationScaleParam(self.mu, self.sigma2)


def _as_spectrum(spectrum) -> Spectrum:
    return spectrum if isinstance(spectrum, Spectrum) else Spectrum(tuple(spectrum))


def spectral_kl(spectrum) -> float:
    """``KL(p_{mu,Sigma1} : p_{mu,Sigma2}) = sum_i (nu_i - 1 - log nu_i) / 2`` with ``nu_i = 1/lambda_i``."""
    lam = _as_spectrum(spectrum).as_array()
    x = np.log(lam)
    # nu - 1 - log nu with nu = exp(-x)
    return float(0.5 * np.sum(np.expm1(-x) + x))


def _log_rho(beta: float, s1: SpdMatrix, s2: SpdMatrix) -> float:
    try:
        mix = SpdMatrix((1.0 - beta) * s1.entries + beta * s2.entries)
    except NumericalError as exc:
        raise NumericalError(f"affinity integral diverges for beta={beta}") from exc
    return 0.5 * ((1.0 - beta) * s1.logdet + beta * s2.logdet - mix.logdet)


def bhattacharyya_rho(beta: float, sigma1, sigma2) -> float:
    """``rho_beta = int p^beta q^{1-beta}`` for centred normals, determinant form.

    ``det(S1)^{(1-b)/2} det(S2)^{b/2} / det((1-b) S1 + b S2)^{1/2}``, evaluated
    with Cholesky log-determinants.
    """
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise ValidationError(f"beta must lie in (0, 1), got {beta}")
    s1, s2 = as_spd(sigma1), as_spd(sigma2)
    if s1.dim != s2.dim:
        raise ValidationError(f"dimension mismatch: {s1.dim} vs {s2.dim}")
    return math.exp(_log_rho(beta, s1, s2))


def bhattacharyya_rho_spectral(beta: float, spectrum) -> float:
    """``prod_i sqrt(lambda_i^beta / (1 + beta (lambda_i - 1)))``."""
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise ValidationError(f"beta must lie in (0, 1), got {beta}")
    lam = _as_spectrum(spectrum).as_array()
    return math.exp(0.5 * float(np.sum(beta * np.log(lam) - np.log1p(beta * (lam - 1.0)))))


def alpha_div_scale(alpha: float, sigma1, sigma2) -> float:
    """``4/(1-a^2) (1 - rho_{(1-a)/2})`` between centred normals; ``|alpha| != 1``."""
    alpha = float(alpha)
    if abs(1.0 - alpha * alpha) < 1e-9:
        raise ValidationError("alpha = +-1 is the KL limit; use spectral_kl")
    s1, s2 = as_spd(sigma1), as_spd(sigma2)
    if s1.dim != s2.dim:
        raise ValidationError(f"dimension mismatch: {s1.dim} vs {s2.dim}")
    lr = _log_rho(0.5 * (1.0 - alpha), s1, s2)
    return -4.0 / (1.0 - alpha * alpha) * math.expm1(lr)


def alpha_div_spectral(alpha: float, spectrum) -> float:
    """Spectral form of :func:`alpha_div_scale`.

    Outside ``|alpha| < 1`` the affinity integral is finite only while every
    ``1 + beta (lambda_i - 1)`` stays positive; otherwise this raises.
    """
    alpha = float(alpha)
    if abs(1.0 - alpha * alpha) < 1e-9:
        raise ValidationError("alpha = +-1 is the KL limit; use spectral_kl")
    beta = 0.5 * (1.0 - alpha)
    lam = _as_spectrum(spectrum).as_array()
    mix = beta * (lam - 1.0)
    if np.any(mix <= -1.0):
        raise NumericalError(f"alpha-divergence is infinite for alpha={alpha} at this spectrum")
    lr = 0.5 * float(np.sum(beta * np.log(lam) - np.log1p(mix)))
    return -4.0 / (1.0 - alpha * alpha) * math.expm1(lr)


def _spectral_log_ratio(rd: RadialDensity, lam: np.ndarray, y: np.ndarray) -> np.ndarray:
    r1 = np.einsum("ij,ij->i", y, y)
    r2 = (y * y) @ (1.0 / lam)
    return -0.5 * np.sum(np.log(lam)) + rd.log_tilde_p(r2) - rd.log_tilde_p(r1)


def spectral_fdiv_generic(gen: FGenerator, rd: RadialDensity, spectrum, n: int = 1_000_000,
                          seed: int = 0x5EED, workers: int = 1, method: str = "mc") -> DivergenceEstimate:
    """``I_f`` between centred scale-family members, from the relative spectrum alone.

    Draws ``y`` from the standard density and averages
    ``f(prod(lambda)^{-1/2} p~(sum y_i^2 / lambda_i) / p~(|y|^2))``.
    ``method="quad"`` integrates the same expression deterministically
    (``d <= 2`` only).
    """
    spec = _as_spectrum(spectrum)
    if rd.dim != spec.dim:
        raise ValidationError(f"density dimension {rd.dim} does not match spectrum length {spec.dim}")
    lam = spec.as_array()
    if method == "quad":
        return _spectral_quad(gen, rd, lam)
    if method != "mc":
        raise ValidationError(f"unknown method {method!r}; expected 'mc' or 'quad'")
    n = check_count(n, "n", 100)

    def summand(rng, m):
        y = rd.standard_draws(rng, m)
        vals, clamped = apply_generator(gen, _spectral_log_ratio(rd, lam, y))
        return vals, clamped, y

    return chunked_mean(summand, n, seed, "mc", workers)


def _spectral_quad(gen: FGenerator, rd: RadialDensity, lam: np.ndarray, tol: float = 1e-8) -> DivergenceEstimate:
    d = lam.size
    if d > 2:
        raise ValidationError("tensor quadrature is only available for d <= 2")

    half_logdet = 0.5 * float(np.sum(np.log(lam)))
    inv_lam = 1.0 / lam

    def raw(*y):
        lp = float(rd.log_tilde_p(sum(v * v for v in y)))
        r2 = sum(v * v * w for v, w in zip(y, inv_lam))
        lr = float(rd.log_tilde_p(r2)) - half_logdet - lp
        return math.exp(lp) * float(gen.at_log(lr, LOG_RATIO_FLOOR))

    def integrand(*y):
        if float(rd.log_tilde_p(sum(v * v for v in y))) < LOG_P_CUTOFF:
            return 0.0
        return raw(*y)

    # even in every coordinate: integrate one orthant
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if d == 1:
            val, err = integrate.quad(integrand, 0.0, np.inf, epsabs=tol, epsrel=tol, limit=400)
        else:
            val, err = integrate.dblquad(lambda y2, y1: integrand(y1, y2), 0.0, np.inf, 0.0, np.inf,
                                         epsabs=tol, epsrel=tol)
    val *= 2.0 ** d
    err *= 2.0 ** d
    if not math.isfinite(val) or err > max(1e-7, 1e-6 * abs(val)):
        raise QuadratureError(f"tensor quadrature did not converge (value {val!r}, error estimate {err:.3g})")
    # probe along each eigen-axis, where the ratio grows fastest
    tail = 0.0
    for i in range(d):
        def axis(s, i=i):
            y = [0.0] * d
            y[i] = s
            return y
        tail = max(tail, cutoff_tail_value(lambda s: float(rd.log_tilde_p(s * s)), lambda s: raw(*axis(s)), 0.0, 1.0))
    check_truncated_tail(tail, val)
    return exact(val, "quad_nd")


def mc_affinity(beta: float, rd: RadialDensity, sigma1, sigma2, n: int, seed: int,
                workers: int = 1) -> DivergenceEstimate:
    """Monte Carlo estimate of ``int p^beta q^{1-beta}`` for centred members of ``rd``'s family."""
    s1, s2 = as_spd(sigma1), as_spd(sigma2)
    mu = np.zeros(s1.dim)
    est = mc_estimate(affinity_generator(beta), rd, LocationScaleParam(mu, s1), LocationScaleParam(mu, s2), n, seed,
                      workers)
    return DivergenceEstimate(1.0 - est.value, est.std_error, est.n_samples, est.method, est.seed, est.n_clamped)
