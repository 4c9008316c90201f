"""Catalog of f-divergence generators.

A generator ``f`` is convex on ``(0, inf)`` with ``f(1) = 0``; the induced
divergence is ``I_f(p:q) = int p f(q/p)``. Generators that differ by
``c (u - 1)`` induce the same divergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import xlogy

from ._validation import ValidationError

ALPHA_GUARD = 1e-9


@dataclass(frozen=True)
class FGenerator:
    """An f-divergence generator with its derivative.

    ``signed`` marks generators that are not convex (odd-order chi), whose
    divergences can be negative. ``f_log``, when present, evaluates
    ``f(exp(t))`` directly from ``t``; generators that blow up as ``u -> 0``
    carry one so that vanishing ratios need no clamping.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    f_prime: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    params: tuple[tuple[str, float], ...] = ()
    signed: bool = False
    f_log: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False, compare=False)

    def __call__(self, u):
        return self.f(np.asarray(u, dtype=float))

    def at_log(self, t, floor: float):
        """``f(exp(t))``; without ``f_log`` the ratio is floored at ``exp(floor)``."""
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            if self.f_log is not None:
                return self.f_log(t)
            return self.f(np.exp(np.maximum(t, floor)))

    def derivative(self, u):
        return self.f_prime(np.asarray(u, dtype=float))

    @property
    def param_dict(self) -> dict[str, float]:
        return dict(self.params)


def _tv(u):
    return 0.5 * np.abs(u - 1.0)


def _tv_prime(u):
    # kink at u = 1: the symmetric subgradient 0
    return 0.5 * np.sign(u - 1.0)


def _js(u):
    return xlogy(u, u) - (1.0 + u) * np.log1p(u) + (1.0 + u) * np.log(2.0)


def _js_prime(u):
    return np.log(2.0 * u / (1.0 + u))


def _neyman_log(t):
    # (1 - u)^2 / u = 4 sinh(t/2)^2
    return 4.0 * np.sinh(0.5 * t) ** 2


_BUILTIN = {
    "total_variation": (_tv, _tv_prime, None),
    "squared_hellinger": (lambda u: (np.sqrt(u) - 1.0) ** 2, lambda u: 1.0 - 1.0 / np.sqrt(u), None),
    "pearson_chi2": (lambda u: (u - 1.0) ** 2, lambda u: 2.0 * (u - 1.0), None),
    "neyman_chi2": (lambda u: (1.0 - u) ** 2 / u, lambda u: 1.0 - 1.0 / (u * u), _neyman_log),
    "kl": (lambda u: -np.log(u), lambda u: -1.0 / u, lambda t: -t),
    "reverse_kl": (lambda u: xlogy(u, u), lambda u: np.log(u) + 1.0, None),
    "jeffreys": (lambda u: (u - 1.0) * np.log(u), lambda u: np.log(u) + (u - 1.0) / u, lambda t: np.expm1(t) * t),
    "jensen_shannon": (_js, _js_prime, None),
}

# short names used on the command line
ALIASES = {
    "tv": "total_variation",
    "h2": "squared_hellinger",
    "chi2:pearson": "pearson_chi2",
    "chi2:neyman": "neyman_chi2",
    "rkl": "reverse_kl",
    "js": "jensen_shannon",
    "kl": "kl",
    "jeffreys": "jeffreys",
}

SHORT_NAMES = {v: k for k, v in ALIASES.items()}


def builtin_generator(name: str) -> FGenerator:
    """Look up a catalog generator by long or short name."""
    key = ALIASES.get(name, name)
    if key not in _BUILTIN:
        raise ValidationError(f"unknown generator {name!r}; known: {sorted(_BUILTIN)}")
    f, fp, flog = _BUILTIN[key]
    return FGenerator(key, f, fp, f_log=flog)


def alpha_generator(alpha: float) -> FGenerator:
    """Amari alpha-divergence generator ``4/(1-a^2) (u - u^{(1+a)/2})``.

    ``alpha = -1`` gives KL and ``alpha = 1`` reverse KL; inside a guard band
    of ``|1 - alpha^2| < 1e-9`` the limits are returned directly.
    """
    alpha = float(alpha)
    if not np.isfinite(alpha):
        raise ValidationError("alpha must be finite")
    if abs(1.0 - alpha * alpha) < ALPHA_GUARD:
        base = builtin_generator("kl" if alpha < 0 else "reverse_kl")
        return FGenerator(f"alpha:{alpha:g}", base.f, base.f_prime, (("alpha", alpha),), f_log=base.f_log)
    c = 4.0 / (1.0 - alpha * alpha)
    expo = 0.5 * (1.0 + alpha)

    def f(u):
        # u - u^e = -u * expm1((e - 1) log u): accurate as alpha -> 1
        return -c * u * np.expm1((expo - 1.0) * np.log(u))

    def fp(u):
        return c * (1.0 - expo * u ** (expo - 1.0))

    def f_log(t):
        return -c * np.exp(t) * np.expm1((expo - 1.0) * t)

    # u^{(1+a)/2 - 1} is unbounded near 0 exactly when a < 1
    return FGenerator(f"alpha:{alpha:g}", f, fp, (("alpha", alpha),), f_log=f_log if alpha < 1.0 else None)


def chi_order_k_generator(k: int) -> FGenerator:
    """``(u - 1)^k``; odd ``k >= 3`` is flagged ``signed`` (not convex)."""
    if int(k) != k or k < 1:
        raise ValidationError(f"order k must be an integer >= 1, got {k!r}")
    k = int(k)
    return FGenerator(
        f"chik:{k}",
        lambda u: (u - 1.0) ** k,
        lambda u: k * (u - 1.0) ** (k - 1),
        (("k", float(k)),),
        signed=(k % 2 == 1 and k >= 3),
    )


def affinity_generator(beta: float) -> FGenerator:
    """``1 - u^{1-beta}``: its divergence is ``1 - int p^beta q^{1-beta}``."""
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise ValidationError(f"beta must lie in (0, 1), got {beta}")
    g = 1.0 - beta
    return FGenerator(
        f"affinity:{beta:g}",
        lambda u: -np.expm1(g * np.log(u)),
        lambda u: -g * u ** (g - 1.0),
        (("beta", beta),),
    )


def parse_generator(text: str) -> FGenerator:
    """Parse the command-line vocabulary: ``kl, rkl, tv, h2, chi2:pearson,
    chi2:neyman, chik:<k>, alpha:<float>, js, jeffreys`` (long names also work)."""
    text = text.strip()
    if text.startswith("chik:"):
        try:
            k = int(text[5:])
        except ValueError as exc:
            raise ValidationError(f"bad chi order in {text!r}") from exc
        return chi_order_k_generator(k)
    if text.startswith("alpha:"):
        try:
            a = float(text[6:])
        except ValueError as exc:
            raise ValidationError(f"bad alpha in {text!r}") from exc
        return alpha_generator(a)
    return builtin_generator(text)
