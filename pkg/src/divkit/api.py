"""Method dispatch: pick a closed form, a quadrature or Monte Carlo for a given pair."""

from __future__ import annotations

import numpy as np

from ._validation import ValidationError
from .closed_form import (
    HELLINGER_SCALE,
    NORMAL_CLOSED_FORMS,
    generator_key,
    hf_cauchy,
    hf_normal,
    kl_mvn_general,
)
from .densities import RadialDensity
from .estimators import (
    DivergenceEstimate,
    exact,
    mc_estimate,
    quad_location_1d,
    quad_pair_1d,
    reduce_location,
)
from .generators import FGenerator
from .spd import LocationScaleParam, Spectrum, relative_spectrum
from .spectral import (
    alpha_div_scale,
    alpha_div_spectral,
    spectral_fdiv_generic,
    spectral_kl,
)


def _same_scale(p1: LocationScaleParam, p2: LocationScaleParam) -> bool:
    s1, s2 = p1.scale.entries, p2.scale.entries
    return bool(np.max(np.abs(s1 - s2)) <= 1e-10 * max(np.max(np.abs(s1)), 1.0))


def _same_location(p1: LocationScaleParam, p2: LocationScaleParam) -> bool:
    return bool(np.array_equal(p1.location, p2.location))


def _no_closed_form(key: str, rd: RadialDensity) -> ValidationError:
    return ValidationError(
        f"no closed form for {key!r} in family {rd.label} for this pair; available closed forms: "
        f"normal same-scale pairs: {', '.join(NORMAL_CLOSED_FORMS)}; "
        "normal general pairs: kl, rkl, jeffreys; normal centred pairs: h2, alpha:<a> (|a| != 1); "
        "cauchy same-scale pairs: chi2:pearson with d in (1, 3)"
    )


def closed_form_divergence(gen: FGenerator, rd: RadialDensity, p1: LocationScaleParam,
                           p2: LocationScaleParam) -> DivergenceEstimate:
    key = generator_key(gen)
    if rd.family == "normal":
        if _same_scale(p1, p2):
            delta_sq, _ = reduce_location(p1, p2)
            try:
                return exact(hf_normal(key, delta_sq))
            except ValidationError:
                raise _no_closed_form(key, rd) from None
        if key == "kl":
            return exact(kl_mvn_general(p1, p2).total)
        if key == "rkl":
            return exact(kl_mvn_general(p2, p1).total)
        if key == "jeffreys":
            return exact(kl_mvn_general(p1, p2).total + kl_mvn_general(p2, p1).total)
        if _same_location(p1, p2):
            if key == "h2":
                return exact(HELLINGER_SCALE / 4.0 * alpha_div_scale(0.0, p1.scale, p2.scale))
            if key.startswith("alpha:") and abs(1.0 - float(key[6:]) ** 2) >= 1e-9:
                return exact(alpha_div_scale(float(key[6:]), p1.scale, p2.scale))
        raise _no_closed_form(key, rd)
    if rd.family == "cauchy" and _same_scale(p1, p2):
        delta_sq, _ = reduce_location(p1, p2)
        try:
            return exact(hf_cauchy(key, delta_sq, rd.dim))
        except ValidationError:
            raise _no_closed_form(key, rd) from None
    raise _no_closed_form(key, rd)


def compute_divergence(gen: FGenerator, rd: RadialDensity, p1: LocationScaleParam, p2: LocationScaleParam,
                       method: str = "closed", n: int = 1_000_000, seed: int = 0x5EED,
                       workers: int = 1) -> DivergenceEstimate:
    """``I_f(p1 : p2)`` by ``method`` in ``{"closed", "quad", "mc"}``."""
    if p1.dim != rd.dim or p2.dim != rd.dim:
        raise ValidationError(f"dimension mismatch: density {rd.dim}, parameters {p1.dim} and {p2.dim}")
    if method == "closed":
        return closed_form_divergence(gen, rd, p1, p2)
    if method == "mc":
        return mc_estimate(gen, rd, p1, p2, n, seed, workers)
    if method == "quad":
        if rd.dim == 1:
            return quad_pair_1d(gen, rd, p1, p2)
        if rd.family == "normal" and _same_scale(p1, p2):
            delta_sq, _ = reduce_location(p1, p2)
            return quad_location_1d(gen, rd, float(np.sqrt(delta_sq)))
        if _same_location(p1, p2) and rd.dim <= 2:
            return spectral_fdiv_generic(gen, rd, relative_spectrum(p1.scale, p2.scale), method="quad")
        raise ValidationError(
            "quadrature needs d = 1, a same-scale normal pair, or a same-location pair with d <= 2"
        )
    raise ValidationError(f"unknown method {method!r}; expected closed, quad or mc")


def spectral_divergence(gen: FGenerator, rd: RadialDensity, spectrum: Spectrum, method: str = "auto",
                        n: int = 1_000_000, seed: int = 0x5EED, workers: int = 1) -> DivergenceEstimate:
    """Scale-family divergence from the relative spectrum.

    ``auto`` uses a closed form when one exists (normal family: kl, rkl,
    jeffreys, h2, alpha) and Monte Carlo otherwise.
    """
    if method not in ("auto", "closed", "mc", "quad"):
        raise ValidationError(f"unknown method {method!r}")
    key = generator_key(gen)
    if method in ("auto", "closed") and rd.family == "normal":
        value = None
        if key == "kl":
            value = spectral_kl(spectrum)
        elif key == "rkl":
            value = spectral_kl(spectrum.reciprocal())
        elif key == "jeffreys":
            value = spectral_kl(spectrum) + spectral_kl(spectrum.reciprocal())
        elif key == "h2":
            value = HELLINGER_SCALE / 4.0 * alpha_div_spectral(0.0, spectrum)
        elif key.startswith("alpha:"):
            a = float(key[6:])
            if abs(1.0 - a * a) >= 1e-9:
                value = alpha_div_spectral(a, spectrum)
            else:
                # alpha -> -1 is KL(p1 : p2), alpha -> +1 the reverse
                value = spectral_kl(spectrum if a < 0 else spectrum.reciprocal())
        if value is not None:
            return exact(value)
    if method == "closed":
        raise ValidationError(f"no spectral closed form for {key!r} in family {rd.label}")
    if method == "quad":
        return spectral_fdiv_generic(gen, rd, spectrum, method="quad")
    return spectral_fdiv_generic(gen, rd, spectrum, n, seed, workers)
