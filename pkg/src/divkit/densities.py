"""Spherical standard densities ``p(x) = p~(|x|^2)`` and their location-scale families."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from ._validation import ValidationError, as_vector, check_count
from .spd import LocationScaleParam

FAMILIES = ("normal", "student", "cauchy")


@dataclass(frozen=True)
class RadialDensity:
    """Standard spherical density in ``dim`` dimensions.

    ``tilde_p(r)`` is the radial profile evaluated at the squared norm
    ``r = |x|^2``. Cauchy is Student with ``nu = 1``.
    """

    family: str
    dim: int
    nu: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        check_count(self.dim, "dim")
        if self.family == "cauchy":
            object.__setattr__(self, "nu", 1.0)
        elif self.family == "student":
            if self.nu is None or not np.isfinite(self.nu) or self.nu <= 0:
                raise ValidationError(f"student family needs nu > 0, got {self.nu!r}")
            object.__setattr__(self, "nu", float(self.nu))
        elif self.nu is not None:
            raise ValidationError("normal family takes no nu")

    @property
    def label(self) -> str:
        if self.family == "student":
            return f"student:{self.nu:g}"
        return self.family

    @cached_property
    def log_norm_const(self) -> float:
        d = self.dim
        if self.family == "normal":
            return -0.5 * d * np.log(2.0 * np.pi)
        nu = self.nu
        return float(gammaln(0.5 * (nu + d)) - gammaln(0.5 * nu) - 0.5 * d * np.log(nu * np.pi))

    def log_tilde_p(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "normal":
            return self.log_norm_const - 0.5 * r
        return self.log_norm_const - 0.5 * (self.nu + self.dim) * np.log1p(r / self.nu)

    def tilde_p(self, r):
        return np.exp(self.log_tilde_p(r))

    def tilde_p_prime(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "normal":
            return -0.5 * self.tilde_p(r)
        nu, d = self.nu, self.dim
        return -0.5 * (nu + d) / nu * self.tilde_p(r) / (1.0 + r / nu)

    def with_dim(self, dim: int) -> "RadialDensity":
        return RadialDensity(self.family, dim, None if self.family != "student" else self.nu)

    def logpdf(self, param: LocationScaleParam, x) -> np.ndarray | float:
        """Log density of the family member ``param`` at ``x`` (shape ``(d,)`` or ``(n, d)``)."""
        self._check_param(param)
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValidationError(f"points have dimension {x.shape[-1]}, expected {self.dim}")
        r = param.scale.quad_form(x - param.location)
        return -0.5 * param.scale.logdet + self.log_tilde_p(r)

    def standard_draws(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` draws from the standard density, shape ``(n, dim)``."""
        z = rng.standard_normal((n, self.dim))
        if self.family == "normal":
            return z
        # one shared chi-square per draw: elliptical, not independent marginals
        w = rng.chisquare(self.nu, size=n)
        return z / np.sqrt(w / self.nu)[:, None]

    def _check_param(self, param: LocationScaleParam):
        if param.dim != self.dim:
            raise ValidationError(f"parameter dimension {param.dim} does not match density dimension {self.dim}")


def normal(dim: int) -> RadialDensity:
    return RadialDensity("normal", dim)


def student(nu: float, dim: int) -> RadialDensity:
    return RadialDensity("student", dim, nu)


def cauchy(dim: int) -> RadialDensity:
    return RadialDensity("cauchy", dim)


def parse_family(text: str, dim: int) -> RadialDensity:
    """Parse ``normal``, ``cauchy`` or ``student:<nu>``."""
    text = text.strip()
    if text.startswith("student:"):
        try:
            nu = float(text[8:])
        except ValueError as exc:
            raise ValidationError(f"bad degrees of freedom in {text!r}") from exc
        return student(nu, dim)
    if text in ("normal", "cauchy"):
        return RadialDensity(text, dim)
    raise ValidationError(f"unknown family {text!r}; expected normal, cauchy or student:<nu>")


def density_at(rd: RadialDensity, param: LocationScaleParam, x) -> float:
    """``det(Sigma)^{-1/2} p~(Delta_Sigma^2(x, mu))``."""
    x = as_vector(x, "x", rd.dim)
    return float(np.exp(rd.logpdf(param, x)))


def log_density_at(rd: RadialDensity, param: LocationScaleParam, x) -> float:
    x = as_vector(x, "x", rd.dim)
    return float(rd.logpdf(param, x))


def sample_from(rd: RadialDensity, param: LocationScaleParam, rng: np.random.Generator, n: int) -> np.ndarray:
    """``x = l + P z`` with ``z`` drawn from the standard density."""
    rd._check_param(param)
    z = rd.standard_draws(rng, n)
    return param.location + z @ param.factor.T


def sample(rd: RadialDensity, param: LocationScaleParam, n: int, seed: int) -> np.ndarray:
    """``n`` draws from ``param``'s member of the family; deterministic in ``seed``."""
    n = check_count(n, "n")
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return sample_from(rd, param, rng, n)
