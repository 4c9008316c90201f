"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line (shown even under output capture);
the lines are repeated in the terminal summary.
"""

import io
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from divkit import (
    JS_SCALE,
    AffineElement,
    LocationScaleParam,
    act,
    bhattacharyya_rho,
    bhattacharyya_rho_spectral,
    cauchy,
    chi_order_k,
    compute_divergence,
    fisher_rao_normal,
    fit_rational,
    hf_cauchy,
    hf_normal,
    jsd_normal,
    kl_mvn_general,
    mahalanobis_sq,
    mc_affinity,
    mc_estimate,
    monotonicity_report,
    normal,
    parse_generator,
    quad_fdiv_1d,
    quad_location_1d,
    reduce_location,
    relative_spectrum,
    spectral_fdiv_generic,
    spectral_kl,
    student,
    tabulate_hf,
    tabulate_runtime,
)
from divkit.cli import main

from conftest import random_orthogonal, random_spd

RESULTS = []
LOG2 = math.log(2.0)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        RESULTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def _unit_logpdf(mu):
    return lambda x: -0.5 * (x - mu) ** 2 - 0.5 * math.log(2 * math.pi)


def _random_pair(rng, d, same_scale=True, centred=False):
    s1 = random_spd(rng, d)
    s2 = s1 if same_scale else random_spd(rng, d)
    mu1 = np.zeros(d) if centred else rng.normal(size=d)
    mu2 = mu1 if centred else mu1 + rng.normal(size=d) * 0.7
    return LocationScaleParam(mu1, s1), LocationScaleParam(mu2, s2)


def test_criterion_01_kl_location_closed_form(report):
    rng = np.random.default_rng(101)
    kl = parse_generator("kl")
    t0 = time.perf_counter()
    worst_closed, mc_fails = 0.0, []
    for i in range(20):
        d = int(rng.integers(1, 9))
        p1, p2 = _random_pair(rng, d)
        half = 0.5 * mahalanobis_sq(p1.location, p2.location, p1.scale)
        closed = compute_divergence(kl, normal(d), p1, p2, "closed").value
        worst_closed = max(worst_closed, abs(closed - half))
        est = mc_estimate(kl, normal(d), p1, p2, 1_000_000, 1000 + i)
        if abs(est.value - half) > 3 * est.std_error:
            mc_fails.append((i, d, est.value, half, est.std_error))
    elapsed = time.perf_counter() - t0
    ok = worst_closed <= 1e-10 and not mc_fails and elapsed < 10.0
    report(1, ok, f"max |closed - half Mahalanobis| = {worst_closed:.2e}, MC outside 3 se: {mc_fails}, "
                  f"{elapsed:.1f} s")


def test_criterion_02_closed_forms_against_quadrature(report):
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    for key in ("kl", "h2", "chi2:pearson", "alpha:0.5", "alpha:-0.5", "js", "tv"):
        gen = parse_generator(key)
        for u in (0.25, 1.0, 4.0, 9.0):
            t = math.sqrt(u)
            q = quad_fdiv_1d(gen, _unit_logpdf(0.0), _unit_logpdf(t), breakpoints=(0.0, 0.5 * t, t)).value
            c = hf_normal(key, u)
            tol = max(1e-6, 1e-4 * abs(q))
            worst = max(worst, abs(c - q) / tol)
            if abs(c - q) > tol:
                bad.append((key, u, c, q))
    elapsed = time.perf_counter() - t0
    # shipped constants: Hellinger 2 (1 - e^{-u/8}), Pearson e^u - 1
    consts = hf_normal("h2", 8.0) == pytest.approx(2 * (1 - math.exp(-1))) and \
        hf_normal("chi2:pearson", 1.0) == pytest.approx(math.e - 1)
    report(2, not bad and consts and elapsed < 30.0,
           f"worst error / tolerance = {worst:.3f}, failures {bad}, constants ok={consts}, {elapsed:.1f} s")


def test_criterion_03_chi_order_k(report):
    worst, bad = 0.0, []
    for k in (1, 2, 3, 4):
        for u in (0.5, 1.0, 2.0):
            t = math.sqrt(u)

            def g(x, k=k, t=t):
                return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi) * math.expm1(t * x - 0.5 * u) ** k
            q = sum(integrate.quad(g, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
                    for a, b in ((-40.0, 0.0), (0.0, t), (t, t + 40.0)))
            err = abs(chi_order_k(k, u) - q)
            worst = max(worst, err)
            if err > 1e-6:
                bad.append((k, u))
    k1_zero = all(chi_order_k(1, u) == 0.0 for u in (0.0, 0.5, 1.0, 2.0, 7.0))
    grows = chi_order_k(2, 2.0) < chi_order_k(3, 2.0) < chi_order_k(4, 2.0)
    report(3, not bad and k1_zero and grows,
           f"max error {worst:.2e}, failures {bad}, k=1 zero={k1_zero}, growth k=2..4 at u=2: {grows}")


def test_criterion_04_cauchy_three_variate(report):
    t0 = time.perf_counter()
    gen, rd, rows, ok = parse_generator("chi2:pearson"), cauchy(3), [], True
    for i, u in enumerate((0.5, 1.0, 2.0)):
        p1 = LocationScaleParam(np.zeros(3), np.eye(3))
        p2 = LocationScaleParam([math.sqrt(u), 0.0, 0.0], np.eye(3))
        est = mc_estimate(gen, rd, p1, p2, 10_000_000, 400 + i)
        target = 2 * u / 3 + u * u / 8
        assert target == hf_cauchy("chi2:pearson", u, 3)
        z = (est.value - target) / est.std_error
        ok &= abs(z) <= 3
        rows.append(f"u={u}: {est.value:.5f} vs {target:.5f} (z={z:+.2f})")
    elapsed = time.perf_counter() - t0
    report(4, ok and elapsed < 60.0, "; ".join(rows) + f", {elapsed:.1f} s")


def test_criterion_05_jsd_rational_fit(report):
    table = tabulate_hf(parse_generator("js"), normal(1), list(np.linspace(0.5, 5.0, 20)), "quad")
    fit = fit_rational(table)
    da, db = fit.a / 2.06709 - 1, fit.b / 8.27508 - 1
    ok = abs(da) < 0.02 and abs(db) < 0.02 and fit.max_rel_error < 0.005
    report(5, ok, f"a={fit.a:.5f} ({da:+.2%}), b={fit.b:.5f} ({db:+.2%}), max_rel_error={fit.max_rel_error:.4%}")


def test_criterion_06_dimension_reduction(report):
    rng = np.random.default_rng(606)
    rows, ok = [], True
    for key in ("kl", "js", "tv"):
        gen = parse_generator(key)
        for d in (3, 8):
            p1, p2 = _random_pair(rng, d)
            delta_sq, _ = reduce_location(p1, p2)
            reduced = quad_location_1d(gen, normal(1), math.sqrt(delta_sq)).value
            full = mc_estimate(gen, normal(d), p1, p2, 1_000_000, 600 + d)
            z = (full.value - reduced) / full.std_error
            ok &= abs(z) <= 3
            rows.append(f"{key}/d={d} z={z:+.2f}")
    bench = tabulate_runtime(parse_generator("kl"), [32], 1_000_000)[0]
    ok &= bench.ratio > 4
    report(6, ok, ", ".join(rows) + f"; d=32 full/reduced time ratio {bench.ratio:.1f}")


def test_criterion_07_affine_invariance(report):
    rng = np.random.default_rng(707)
    families = [("normal", normal), ("student:3", lambda d: student(3.0, d)), ("cauchy", cauchy)]
    fails, worst_same = [], 0.0
    for i in range(50):
        label, make = families[i % 3]
        key = ("kl", "h2")[(i // 3) % 2]
        d = int(rng.integers(1, 5))
        rd, gen = make(d), parse_generator(key)
        p1, p2 = _random_pair(rng, d, same_scale=bool(i % 2))
        a = rng.normal(size=(d, d)) + 2.0 * np.eye(d) * rng.choice([-1.0, 1.0])
        g = AffineElement(rng.normal(size=d) * 5, a)
        base = mc_estimate(gen, rd, p1, p2, 100_000, 7000 + i)
        moved = mc_estimate(gen, rd, act(g, p1), act(g, p2), 100_000, 9000 + i)
        same = mc_estimate(gen, rd, act(g, p1), act(g, p2), 100_000, 7000 + i)
        worst_same = max(worst_same, abs(same.value - base.value) / max(1.0, abs(base.value)))
        if abs(moved.value - base.value) > 3 * math.hypot(base.std_error, moved.std_error):
            fails.append((i, label, key))
    ok = not fails and worst_same < 1e-9
    report(7, ok, f"independent-seed failures {fails} of 50; same-seed max relative gap {worst_same:.1e}")


def test_criterion_08_scale_spectral_suite(report):
    rng = np.random.default_rng(808)
    # (a)
    worst_a = 0.0
    for _ in range(20):
        d = int(rng.integers(1, 7))
        p1, p2 = _random_pair(rng, d, same_scale=False, centred=True)
        got = spectral_kl(relative_spectrum(p1.scale, p2.scale))
        worst_a = max(worst_a, abs(got - kl_mvn_general(p1, p2).total))
    # (b)
    worst_b = 0.0
    for _ in range(20):
        d = int(rng.integers(1, 7))
        beta = float(rng.uniform(0.05, 0.95))
        s1, s2 = random_spd(rng, d), random_spd(rng, d)
        det = bhattacharyya_rho(beta, s1, s2)
        spec = bhattacharyya_rho_spectral(beta, relative_spectrum(s1, s2))
        worst_b = max(worst_b, abs(det - spec))
    # (c)
    zs = []
    for i, (beta, d) in enumerate(((0.5, 2), (0.3, 3), (0.8, 2))):
        s1, s2 = random_spd(rng, d, 6.0), random_spd(rng, d, 6.0)
        est = mc_affinity(beta, normal(d), s1, s2, 10_000_000, 800 + i)
        zs.append((est.value - bhattacharyya_rho(beta, s1, s2)) / est.std_error)
    # (d)
    worst_d = 0.0
    for _ in range(10):
        d = int(rng.integers(2, 6))
        s1, s2, o = random_spd(rng, d), random_spd(rng, d), random_orthogonal(rng, d)
        a = spectral_kl(relative_spectrum(s1, s2))
        b = spectral_kl(relative_spectrum(o @ s1 @ o.T, o @ s2 @ o.T))
        worst_d = max(worst_d, abs(a - b))
    # (e)
    mono = True
    below, above = np.linspace(0.95, 0.05, 12), np.linspace(1.05, 20.0, 12)
    for grid in (below, above):
        kl = [spectral_kl([lam, 1.0, 1.0]) for lam in grid]
        rho = [bhattacharyya_rho_spectral(0.5, [lam, 1.0, 1.0]) for lam in grid]
        mono &= bool(np.all(np.diff(kl) > 0) and np.all(np.diff(rho) < 0))
    ok = worst_a <= 1e-8 and worst_b <= 1e-12 and all(abs(z) <= 3 for z in zs) and worst_d <= 1e-8 and mono
    report(8, ok, f"(a) {worst_a:.1e} (b) {worst_b:.1e} (c) z={[round(z, 2) for z in zs]} (d) {worst_d:.1e} "
                  f"(e) monotone={mono}")


def test_criterion_09_generic_spectral_evaluator(report):
    rng = np.random.default_rng(909)
    rows, ok = [], True
    for label, rd in (("normal", normal(2)), ("student:2", student(2.0, 2))):
        for key in ("kl", "h2"):
            gen = parse_generator(key)
            for j, lam in enumerate(((2.0, 0.5), (3.0, 1.0))):
                s1 = random_spd(rng, 2)
                root = np.linalg.cholesky(s1)
                o = random_orthogonal(rng, 2)
                s2 = root @ (o * np.array(lam)) @ o.T @ root.T
                s2 = 0.5 * (s2 + s2.T)
                mu = rng.normal(size=2)
                spec = spectral_fdiv_generic(gen, rd, relative_spectrum(s1, s2), 1_000_000, 90 + j)
                full = mc_estimate(gen, rd, LocationScaleParam(mu, s1), LocationScaleParam(mu, s2), 1_000_000,
                                   190 + j)
                z = (spec.value - full.value) / math.hypot(spec.std_error, full.std_error)
                ok &= abs(z) <= 3
                rows.append(f"{label}/{key}/{lam} z={z:+.2f}")
    report(9, ok, ", ".join(rows))


def test_criterion_10_bounds_and_monotonicity(report):
    rng = np.random.default_rng(1010)
    over = []
    fams = [("normal", normal), ("student:3", lambda d: student(3.0, d)), ("cauchy", cauchy)]
    for label, make in fams:
        for d in (1, 3):
            for scale in (0.5, 3.0, 30.0):
                p1 = LocationScaleParam(np.zeros(d), np.eye(d))
                p2 = LocationScaleParam(rng.normal(size=d) * scale, random_spd(rng, d, 4.0))
                for key, bound in (("tv", 1.0), ("js", JS_SCALE * LOG2)):
                    est = mc_estimate(parse_generator(key), make(d), p1, p2, 200_000, 11)
                    if est.value > bound + 3 * est.std_error:
                        over.append((label, d, scale, key, est.value))
    for u in (0.0, 1.0, 100.0, 1e4):
        if hf_normal("tv", u) > 1.0 or jsd_normal(u) > LOG2:
            over.append(("closed", u))

    tables_ok = True
    grid = [0.25, 0.5, 1.0, 2.0, 4.0, 9.0]
    for key in ("kl", "rkl", "jeffreys", "h2", "chi2:pearson", "chi2:neyman", "chik:3", "alpha:0.5",
                "alpha:-0.5", "alpha:2", "js", "tv"):
        tables_ok &= monotonicity_report(tabulate_hf(parse_generator(key), normal(1), grid, "quad")).passed
    for key in ("kl", "h2", "js", "tv", "chi2:pearson"):
        tables_ok &= monotonicity_report(tabulate_hf(parse_generator(key), cauchy(1), grid, "quad")).passed

    shipped = ["kl", "rkl", "jeffreys", "h2", "chi2:pearson", "chi2:neyman", "js", "tv",
               *(f"chik:{k}" for k in range(1, 31)), *(f"alpha:{a}" for a in (-3, -1, -0.5, 0, 0.5, 1, 3))]
    zero_ok = all(hf_normal(k, 0.0) == 0.0 for k in shipped)
    zero_ok &= hf_cauchy("chi2:pearson", 0.0, 1) == 0.0 and hf_cauchy("chi2:pearson", 0.0, 3) == 0.0
    zero_ok &= fisher_rao_normal(0.0) == 0.0
    report(10, not over and tables_ok and zero_ok,
           f"bound violations {over}, deterministic tables monotone={tables_ok}, h(0)=0 for all={zero_ok}")


def _cli(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def test_criterion_11_cli_reproducibility(report, tmp_path):
    div = ["div", "--family", "normal", "--gen", "kl", "--mu1", "0,0", "--mu2", "1,1", "--sigma1", "1,0;0,1"]
    cases = [
        div + ["--method", "closed"],
        div + ["--method", "mc", "--n", "1000000", "--seed", "7"],
        ["div", "--family", "cauchy", "--gen", "h2", "--mu1", "0,0,0", "--mu2", "1,2,0", "--sigma1",
         "2,0,0;0,1,0.2;0,0.2,1", "--sigma2", "1,0,0;0,1,0;0,0,3", "--method", "mc", "--n", "300000"],
        ["spectral", "--gen", "js", "--eigs", "0.5,2", "--family", "student:2", "--n", "300000", "--seed", "3"],
        ["spectral", "--gen", "kl", "--eigs", "1,1,1"],
    ]
    mismatched = []
    for argv in cases:
        outs = {_cli(argv + ["--threads", t]) for t in ("1", "8", "1")}
        if len(outs) != 1 or next(iter(outs))[0] != 0:
            mismatched.append(" ".join(argv[:3]))
    files = []
    for t in ("1", "8", "1"):
        table, fit = tmp_path / f"t{t}_{len(files)}.csv", tmp_path / f"f{t}_{len(files)}.csv"
        _cli(["hf-table", "--gen", "js", "--family", "normal", "--grid", "0.5:5:8", "--method", "mc:200000",
              "--out", str(table), "--threads", t])
        _cli(["fit-rational", "--in", str(table), "--out", str(fit), "--threads", t])
        files.append((table.read_bytes(), fit.read_bytes()))
    if len(set(files)) != 1:
        mismatched.append("hf-table/fit-rational files")
    procs = {subprocess.run([sys.executable, "-m", "divkit", *cases[1], "--threads", t], capture_output=True).stdout
             for t in ("1", "8")}
    if len(procs) != 1:
        mismatched.append("subprocess div")
    report(11, not mismatched, f"{len(cases) + 2} invocation groups, mismatches: {mismatched}")
