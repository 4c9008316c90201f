import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from divkit import (
    LocationScaleParam,
    NumericalError,
    QuadratureError,
    ScalePair,
    Spectrum,
    ValidationError,
    alpha_div_scale,
    alpha_div_spectral,
    bhattacharyya_rho,
    bhattacharyya_rho_spectral,
    kl_mvn_general,
    mc_affinity,
    mc_estimate,
    normal,
    parse_generator,
    relative_spectrum,
    spectral_fdiv_generic,
    spectral_kl,
    student,
)

from conftest import random_orthogonal, random_spd, spd_matrices

positive = st.floats(0.05, 20.0)


def _centred(s):
    return LocationScaleParam(np.zeros(s.shape[0]), s)


class TestSpectralKL:
    def test_identity(self):
        assert spectral_kl((1.0, 1.0, 1.0)) == 0.0

    def test_example(self):
        assert spectral_kl(relative_spectrum(np.eye(2), np.diag([2.0, 0.5]))) == pytest.approx(0.25, rel=1e-14)

    def test_example_monte_carlo(self):
        est = mc_estimate(parse_generator("kl"), normal(2), _centred(np.eye(2)), _centred(np.diag([2.0, 0.5])),
                          1_000_000, 1)
        assert abs(est.value - 0.25) <= 3 * est.std_error

    @given(spd_matrices(min_dim=1, max_dim=6), st.integers(0, 2**32 - 1))
    def test_matches_gaussian_kl(self, s1, seed):
        s2 = random_spd(np.random.default_rng(seed), s1.shape[0])
        expected = kl_mvn_general(_centred(s1), _centred(s2)).total
        assert spectral_kl(relative_spectrum(s1, s2)) == pytest.approx(expected, rel=1e-8, abs=1e-12)

    @given(positive, positive)
    def test_separable(self, a, b):
        assert spectral_kl((a, b)) == spectral_kl((a,)) + spectral_kl((b,))

    def test_orientation_is_not_symmetric(self):
        spec = relative_spectrum(np.eye(1), [[4.0]])
        assert spectral_kl(spec) != pytest.approx(spectral_kl(spec.reciprocal()))


class TestBhattacharyya:
    def test_equal_matrices(self, rng):
        s = random_spd(rng, 3)
        for beta in (0.1, 0.5, 0.9):
            assert bhattacharyya_rho(beta, s, s) == pytest.approx(1.0, abs=1e-14)

    def test_small_beta_limit(self, rng):
        s1, s2 = random_spd(rng, 3), random_spd(rng, 3)
        assert bhattacharyya_rho(1e-8, s1, s2) == pytest.approx(1.0, abs=1e-6)

    def test_example_both_forms(self):
        expected = 4 ** 0.25 / 2.5 ** 0.5
        assert expected == pytest.approx(0.894427, abs=1e-6)
        assert bhattacharyya_rho(0.5, np.eye(2), np.diag([4.0, 1.0])) == pytest.approx(expected, rel=1e-14)
        assert bhattacharyya_rho_spectral(0.5, (4.0, 1.0)) == pytest.approx(expected, rel=1e-14)
        assert bhattacharyya_rho_spectral(0.5, (1.0,)) == 1.0

    def test_example_monte_carlo(self):
        est = mc_affinity(0.5, normal(2), np.eye(2), np.diag([4.0, 1.0]), 1_000_000, 2)
        assert abs(est.value - 0.894427191) <= 3 * est.std_error

    def test_beta_placement_by_quadrature(self):
        # rho_beta = int p^beta q^(1-beta), p = N(0, 1), q = N(0, 3)
        beta = 0.3
        g = lambda x: stats.norm.pdf(x) ** beta * stats.norm.pdf(x, scale=math.sqrt(3)) ** (1 - beta)
        oracle = integrate.quad(g, -np.inf, np.inf, epsabs=1e-13)[0]
        assert bhattacharyya_rho(beta, [[1.0]], [[3.0]]) == pytest.approx(oracle, rel=1e-10)

    @given(spd_matrices(min_dim=1, max_dim=6), st.integers(0, 2**32 - 1), st.floats(0.01, 0.99))
    def test_determinant_and_spectral_forms_agree(self, s1, seed, beta):
        s2 = random_spd(np.random.default_rng(seed), s1.shape[0])
        a = bhattacharyya_rho(beta, s1, s2)
        b = bhattacharyya_rho_spectral(beta, relative_spectrum(s1, s2))
        assert a == pytest.approx(b, rel=1e-12)
        assert 0.0 < a <= 1.0 + 1e-15

    @given(st.lists(positive, min_size=1, max_size=5), st.floats(0.01, 0.99))
    def test_one_only_at_unit_spectrum(self, lam, beta):
        rho = bhattacharyya_rho_spectral(beta, lam)
        assert 0.0 < rho <= 1.0
        if np.max(np.abs(np.log(lam))) > 1e-3:
            assert rho < 1.0

    def test_beta_range(self):
        for beta in (0.0, 1.0, -0.2):
            with pytest.raises(ValidationError):
                bhattacharyya_rho(beta, np.eye(1), np.eye(1))


class TestAlpha:
    def test_equal_matrices(self, rng):
        s = random_spd(rng, 3)
        for a in (-0.7, 0.0, 0.4, 2.0):
            assert alpha_div_scale(a, s, s) == pytest.approx(0.0, abs=1e-13)

    def test_example(self):
        assert alpha_div_scale(0.0, np.eye(2), np.diag([4.0, 1.0])) == pytest.approx(4 * (1 - 0.894427191), abs=1e-9)
        assert alpha_div_scale(0.0, np.eye(2), np.diag([4.0, 1.0])) == pytest.approx(0.422291, abs=1e-6)

    def test_kl_limit_rejected(self):
        with pytest.raises(ValidationError):
            alpha_div_scale(1.0, np.eye(1), np.eye(1))

    @given(spd_matrices(min_dim=1, max_dim=4), st.integers(0, 2**32 - 1), st.floats(-0.95, 0.95))
    def test_spectral_form(self, s1, seed, a):
        s2 = random_spd(np.random.default_rng(seed), s1.shape[0])
        assert alpha_div_spectral(a, relative_spectrum(s1, s2)) == pytest.approx(alpha_div_scale(a, s1, s2), rel=1e-9,
                                                                                 abs=1e-12)

    def test_outside_unit_interval_against_quadrature(self):
        a, lam = 2.0, 1.5
        gen = parse_generator(f"alpha:{a}")
        est = spectral_fdiv_generic(gen, normal(1), (lam,), method="quad")
        assert alpha_div_spectral(a, (lam,)) == pytest.approx(est.value, rel=1e-7)

    def test_infinite_alpha_divergence(self):
        with pytest.raises(NumericalError):
            alpha_div_spectral(3.0, (4.0,))

    def test_near_kl_limit(self):
        spec = Spectrum((0.5, 3.0))
        # alpha -> -1 approaches KL(p1 : p2)
        assert alpha_div_spectral(-1 + 1e-6, spec) == pytest.approx(spectral_kl(spec), rel=1e-5)
        assert alpha_div_spectral(1 - 1e-6, spec) == pytest.approx(spectral_kl(spec.reciprocal()), rel=1e-5)


class TestOrthogonalInvariance:
    @given(spd_matrices(min_dim=2, max_dim=5), st.integers(0, 2**32 - 1))
    def test_deterministic_forms(self, s1, seed):
        r = np.random.default_rng(seed)
        d = s1.shape[0]
        s2 = random_spd(r, d)
        u = random_orthogonal(r, d)
        t1, t2 = u @ s1 @ u.T, u @ s2 @ u.T
        assert spectral_kl(relative_spectrum(t1, t2)) == pytest.approx(spectral_kl(relative_spectrum(s1, s2)),
                                                                      rel=1e-8, abs=1e-12)
        assert bhattacharyya_rho(0.3, t1, t2) == pytest.approx(bhattacharyya_rho(0.3, s1, s2), rel=1e-8)
        assert alpha_div_scale(0.5, t1, t2) == pytest.approx(alpha_div_scale(0.5, s1, s2), rel=1e-8, abs=1e-12)

    @pytest.mark.parametrize("family", [normal, lambda d: student(3.0, d)], ids=["normal", "student3"])
    def test_monte_carlo(self, family, rng):
        s1, s2 = random_spd(rng, 3, cond=4), random_spd(rng, 3, cond=4)
        u = random_orthogonal(rng, 3)
        gen, rd = parse_generator("h2"), family(3)
        a = mc_estimate(gen, rd, _centred(s1), _centred(s2), 200_000, 3)
        b = mc_estimate(gen, rd, _centred(u @ s1 @ u.T), _centred(u @ s2 @ u.T), 200_000, 4)
        assert abs(a.value - b.value) <= 3 * math.hypot(a.std_error, b.std_error)


class TestMonotoneAwayFromOne:
    UP = np.linspace(1.1, 5.0, 40)
    DOWN = np.linspace(0.9, 0.1, 40)

    @pytest.mark.parametrize("grid", [UP, DOWN], ids=["above", "below"])
    def test_kl_and_hellinger(self, grid):
        kl = [spectral_kl((lam,)) for lam in grid]
        hel = [4 * (1 - bhattacharyya_rho_spectral(0.5, (lam,))) for lam in grid]
        assert np.all(np.diff(kl) > 0)
        assert np.all(np.diff(hel) > 0)


class TestGenericEvaluator:
    def test_unit_spectrum(self):
        for key in ("kl", "h2", "tv", "js"):
            for rd in (normal(2), student(2.0, 2)):
                est = spectral_fdiv_generic(parse_generator(key), rd, (1.0, 1.0), 10_000, 1)
                assert est.value == 0.0 and est.std_error == 0.0

    def test_kl_against_closed_form(self):
        est = spectral_fdiv_generic(parse_generator("kl"), normal(2), (2.0, 0.5), 1_000_000, 5)
        assert abs(est.value - 0.25) <= 3 * est.std_error

    def test_student_against_full_monte_carlo(self):
        gen, rd = parse_generator("h2"), student(2.0, 2)
        spec = spectral_fdiv_generic(gen, rd, (3.0, 1.0), 1_000_000, 6)
        full = mc_estimate(gen, rd, _centred(np.eye(2)), _centred(np.diag([3.0, 1.0])), 1_000_000, 7)
        assert abs(spec.value - full.value) <= 3 * math.hypot(spec.std_error, full.std_error)

    def test_quadrature_path(self):
        kl = parse_generator("kl")
        for spec in ((2.0, 0.5), (3.0, 1.0), (0.2,)):
            est = spectral_fdiv_generic(kl, normal(len(spec)), spec, method="quad")
            assert est.method == "quad_nd" and est.std_error == 0.0
            assert est.value == pytest.approx(spectral_kl(spec), rel=1e-7, abs=1e-9)

    def test_quadrature_path_alpha(self):
        est = spectral_fdiv_generic(parse_generator("alpha:0"), normal(2), (4.0, 1.0), method="quad")
        assert est.value == pytest.approx(0.422291236, abs=1e-7)

    def test_permutation_invariance(self):
        gen = parse_generator("h2")
        a = spectral_fdiv_generic(gen, student(3.0, 2), (3.0, 0.4), method="quad")
        b = spectral_fdiv_generic(gen, student(3.0, 2), (0.4, 3.0), method="quad")
        assert abs(a.value - b.value) < 1e-10
        m1 = spectral_fdiv_generic(gen, normal(3), (0.4, 3.0, 2.0), 100_000, 2)
        m2 = spectral_fdiv_generic(gen, normal(3), (2.0, 0.4, 3.0), 100_000, 2)
        assert m1 == m2

    def test_quadrature_limited_to_two_dimensions(self):
        with pytest.raises(ValidationError):
            spectral_fdiv_generic(parse_generator("kl"), normal(3), (1.0, 2.0, 3.0), method="quad")

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            spectral_fdiv_generic(parse_generator("kl"), normal(3), (1.0, 2.0), 1000, 1)


def test_scale_pair_cache(rng):
    for _ in range(5):
        s1, s2 = random_spd(rng, 4), random_spd(rng, 4)
        pair = ScalePair.make(np.zeros(4), s1, s2)
        np.testing.assert_allclose(relative_spectrum(pair.sigma1, pair.sigma2).as_array(), pair.spectrum.as_array(),
                                   rtol=1e-10)
        p1, p2 = pair.params()
        assert p1.location.tolist() == p2.location.tolist() == [0.0] * 4


def test_quadrature_rejects_infinite_spectra():
    gen = parse_generator("alpha:3")
    with pytest.raises(QuadratureError):
        spectral_fdiv_generic(gen, normal(2), [3.0, 1.0], method="quad")
    val = spectral_fdiv_generic(gen, normal(2), [1.5, 1.0], method="quad").value
    assert val == pytest.approx(alpha_div_spectral(3.0, [1.5, 1.0]), rel=1e-7)
