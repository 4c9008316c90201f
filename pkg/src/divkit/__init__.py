"""f-divergences between members of location and scale families of densities."""

__version__ = "0.1.0"

DEFAULT_SEED = 0x5EED

from ._validation import DivkitError, NumericalError, ValidationError  # noqa: E402
from .api import closed_form_divergence, compute_divergence, spectral_divergence  # noqa: E402
from .closed_form import (  # noqa: E402
    HELLINGER_SCALE,
    JS_SCALE,
    KLDecomposition,
    burg_divergence,
    chi_order_k,
    fisher_rao_normal,
    hf_cauchy,
    hf_function,
    hf_normal,
    i_js_integral,
    jsd_normal,
    kl_mvn_general,
    tv_normal,
)
from .densities import RadialDensity, cauchy, density_at, normal, parse_family, sample, student  # noqa: E402
from .estimators import (  # noqa: E402
    DivergenceEstimate,
    NonFiniteSummandError,
    QuadratureError,
    convergence_profile,
    mc_estimate,
    mc_estimate_reduced,
    quad_fdiv_1d,
    quad_location_1d,
    quad_pair_1d,
    reduce_location,
    tabulate_runtime,
)
from .generators import (  # noqa: E402
    FGenerator,
    affinity_generator,
    alpha_generator,
    builtin_generator,
    chi_order_k_generator,
    parse_generator,
)
from .spd import (  # noqa: E402
    AffineElement,
    LocationScaleParam,
    SpdMatrix,
    Spectrum,
    act,
    affine_compose,
    affine_inverse,
    canonicalize_pair,
    mahalanobis_sq,
    relative_spectrum,
)
from .spectral import (  # noqa: E402
    ScalePair,
    alpha_div_scale,
    alpha_div_spectral,
    bhattacharyya_rho,
    bhattacharyya_rho_spectral,
    mc_affinity,
    spectral_fdiv_generic,
    spectral_kl,
)
from .tabulate import (  # noqa: E402
    HfTable,
    MonotonicityReport,
    RationalFit,
    RationalSurrogate,
    TabulationError,
    fit_rational,
    monotonicity_report,
    tabulate_hf,
)

__all__ = [
    "DEFAULT_SEED",
    "AffineElement",
    "DivergenceEstimate",
    "DivkitError",
    "FGenerator",
    "HELLINGER_SCALE",
    "HfTable",
    "JS_SCALE",
    "KLDecomposition",
    "LocationScaleParam",
    "MonotonicityReport",
    "NonFiniteSummandError",
    "NumericalError",
    "QuadratureError",
    "RadialDensity",
    "RationalFit",
    "RationalSurrogate",
    "ScalePair",
    "SpdMatrix",
    "Spectrum",
    "TabulationError",
    "ValidationError",
    "act",
    "affine_compose",
    "affine_inverse",
    "affinity_generator",
    "alpha_div_scale",
    "alpha_div_spectral",
    "alpha_generator",
    "bhattacharyya_rho",
    "bhattacharyya_rho_spectral",
    "builtin_generator",
    "burg_divergence",
    "canonicalize_pair",
    "cauchy",
    "chi_order_k",
    "chi_order_k_generator",
    "closed_form_divergence",
    "compute_divergence",
    "convergence_profile",
    "density_at",
    "fisher_rao_normal",
    "fit_rational",
    "hf_cauchy",
    "hf_function",
    "hf_normal",
    "i_js_integral",
    "jsd_normal",
    "kl_mvn_general",
    "mahalanobis_sq",
    "mc_affinity",
    "mc_estimate",
    "mc_estimate_reduced",
    "monotonicity_report",
    "normal",
    "parse_family",
    "parse_generator",
    "quad_fdiv_1d",
    "quad_location_1d",
    "quad_pair_1d",
    "reduce_location",
    "relative_spectrum",
    "sample",
    "spectral_divergence",
    "spectral_fdiv_generic",
    "spectral_kl",
    "student",
    "tabulate_hf",
    "tabulate_runtime",
    "tv_normal",
]
