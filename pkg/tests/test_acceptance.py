"""Acceptance gate: oracle equivalence, kernel exactness, LLN, full-scale
MC-vs-analytic PSD and EVM agreement, trend claims, PA fit suite.

Each criterion prints a single pass/fail line with the measured values and
tolerances.  The full-scale Monte Carlo sweeps are shared between criteria
through session-scoped fixtures.
"""
import time

import numpy as np
import pytest

from mimodist import analytic, mc
from mimodist.core import LinkConfig, in_band_mask, seeded_rng
from mimodist.pa import PaParams, apply_rapp, decompose, fit_hermite

pytestmark = pytest.mark.acceptance


def db(x):
    return 10.0 * np.log10(x)


def emit(capsys, line):
    with capsys.disabled():
        print(line)


def full_cfg(**kw):
    args = dict(M=100, Ns=1024, mu=4, L=20, tau_max=100, qam_order=64,
                ibo_db=8.0, trials=200, seed=1)
    args.update(kw)
    return LinkConfig(**args)


@pytest.fixture(scope="session")
def l_sweep():
    """Full-scale L-sweep (Fig.-1a/2a scale): M=100, Ns=1024, mu=4,
    tau_max=100, Rapp(1,1,2), ibo 8 dB, 200 trials per point."""
    t0 = time.time()
    res = mc.sweep(full_cfg(), "L", (1, 5, 20), threads=4)
    return res, time.time() - t0


@pytest.fixture(scope="session")
def tau_sweep():
    """Full-scale tau_max sweep at L=5 (Fig.-1b/2b scale), 100 trials."""
    res = mc.sweep(full_cfg(L=5, trials=100), "tau_max", (4, 20, 100, 400),
                   threads=4)
    return res


def test_criterion_1_oracle_equivalence_small_instance(capsys):
    ns, mu = 64, 2
    n = mu * ns
    rng = seeded_rng(11)
    t0 = time.time()
    worst_in, worst_oob = 0.0, 0.0
    mask = in_band_mask(n, ns)
    for L in (1, 2, 4):
        for tm in (1, 8, 32):
            draws = 1 if tm == 1 else 3000
            acc = np.zeros(n)
            for _ in range(draws):
                acc += analytic.distortion_psd_conditional(
                    rng.integers(0, tm, L), L, tm, n, ns, 1, 1.0).bins
            acc /= draws
            avg = analytic.distortion_psd_avg(L, tm, n, ns, 1, 1.0).bins
            worst_in = max(worst_in,
                           abs(acc[mask].mean() / avg[mask].mean() - 1.0))
            worst_oob = max(worst_oob,
                            abs(acc[~mask].mean() / avg[~mask].mean() - 1.0))
    elapsed = time.time() - t0
    ok = worst_in < 0.03 and worst_oob < 0.05 and elapsed < 120
    emit(capsys, f"[criterion 1] {'PASS' if ok else 'FAIL'} "
         f"conditional-average vs averaged PSD: max in-band gap "
         f"{100 * worst_in:.2f}% (tol 3%), max OOB gap "
         f"{100 * worst_oob:.2f}% (tol 5%), {elapsed:.0f}s (limit 120s)")
    assert ok


def test_criterion_2_kernel_exactness(capsys):
    rng = seeded_rng(21)
    t0 = time.time()
    n_draws = 100_000
    worst_xi, worst_ef = 0.0, 0.0
    for _ in range(20):
        n = int(rng.choice([64, 128, 256, 512]))
        tm = int(rng.integers(1, 65))
        delta = int(rng.integers(-n, n + 1))
        L = int(rng.integers(1, 9))
        taus = rng.integers(0, tm, size=(n_draws, 2))
        est = np.mean(np.cos(2.0 * np.pi * delta
                             * (taus[:, 0] - taus[:, 1]) / n))
        worst_xi = max(worst_xi, abs(est - analytic.xi_sq(delta, tm, n)))
        sets = rng.integers(0, tm, size=(n_draws, L))
        samples = np.abs(np.exp(-2j * np.pi * delta * sets / n)
                         .sum(axis=1)) ** 2
        kern = analytic.build_kernels(L, tm, n)
        worst_ef = max(worst_ef,
                       abs(samples.mean() - kern.eps_f[delta % n]) / L ** 2)
    exact_zero = all(
        analytic.build_kernels(L, 8, 64).eps_f[0] == L ** 2
        and analytic.build_kernels(L, 8, 64).eps_f2[0] == L ** 4
        and analytic.eps_f2_exact(0, L, 8, 64) == pytest.approx(L ** 4)
        for L in (1, 2, 3, 5, 8))
    elapsed = time.time() - t0
    ok = worst_xi < 0.005 and worst_ef < 0.005 and exact_zero and elapsed < 30
    emit(capsys, f"[criterion 2] {'PASS' if ok else 'FAIL'} kernel "
         f"exactness: xi_sq max err {worst_xi:.4f}, eps_f max rel err "
         f"{worst_ef:.4f} (tol 0.005), zero-offset exact "
         f"{exact_zero}, {elapsed:.0f}s (limit 30s)")
    assert ok


def test_criterion_3_lln_desired_power(capsys):
    cfg = LinkConfig(M=256, Ns=256, mu=4, L=4, tau_max=32, trials=100, seed=1)
    t0 = time.time()
    model = mc.fit_reference_model(cfg)
    est = mc.estimate(cfg, model, threads=4)
    measured = est.raw(est.psd_desired)[in_band_mask(cfg.N, cfg.Ns)].mean()
    expect = analytic.desired_power(cfg.M, cfg.L, model.alpha1)
    rel = measured / expect - 1.0
    elapsed = time.time() - t0
    ok = abs(rel) < 0.03 and elapsed < 120
    emit(capsys, f"[criterion 3] {'PASS' if ok else 'FAIL'} LLN desired "
         f"power: measured/|a1|^2 M^2 L - 1 = {100 * rel:+.2f}% (tol 3%), "
         f"{elapsed:.0f}s (limit 120s)")
    assert ok


def test_criterion_4_mc_vs_analytic_psd_full_scale(capsys, l_sweep):
    res, elapsed = l_sweep
    fails, parts = [], []
    for pt in res.points:
        ns = pt.cfg.Ns
        gap_in = db(pt.mc.psd_distortion.in_band_mean(ns)
                    / pt.dist_analytic.in_band_mean(ns))
        gap_oob = db(pt.mc.psd_distortion.oob_mean(ns)
                     / pt.dist_analytic.oob_mean(ns))
        tol_in, tol_oob = (1.0, 1.5) if pt.value <= 5 else (2.0, 2.0)
        parts.append(f"L={pt.value}: in {gap_in:+.2f} dB (tol {tol_in}), "
                     f"oob {gap_oob:+.2f} dB (tol {tol_oob})")
        if abs(gap_in) > tol_in:
            fails.append(f"L={pt.value} in-band {gap_in:+.2f} dB")
        if abs(gap_oob) > tol_oob:
            fails.append(f"L={pt.value} OOB {gap_oob:+.2f} dB")
    if elapsed > 1200:
        fails.append(f"runtime {elapsed:.0f}s > 1200s")
    emit(capsys, f"[criterion 4] {'PASS' if not fails else 'FAIL'} "
         f"MC vs analytic PSD ({'; '.join(parts)}), {elapsed:.0f}s "
         f"(limit 1200s)")
    assert not fails, "; ".join(fails)


def test_criterion_5_trend_claims(capsys, l_sweep, tau_sweep):
    res, _ = l_sweep
    fails = []
    # (a) In-band distortion power decreasing in L, in the normalized
    # presentation used by the PSD artifacts (total received power = 1).
    ana = [pt.dist_analytic.in_band_mean(pt.cfg.Ns) for pt in res.points]
    mc_in = [pt.mc.psd_distortion.in_band_mean(pt.cfg.Ns)
             for pt in res.points]
    if not all(a > b for a, b in zip(ana, ana[1:])):
        fails.append(f"(a) analytic in-band not decreasing in L: {ana}")
    if not all(db(a) > db(b) - 0.3 for a, b in zip(mc_in, mc_in[1:])):
        fails.append(f"(a) MC in-band not decreasing in L: {mc_in}")
    # (b) In-band minus OOB gap decreasing in tau_max.
    gaps_a, gaps_m = [], []
    for pt in tau_sweep.points:
        ns = pt.cfg.Ns
        gaps_a.append(db(pt.dist_analytic.in_band_mean(ns)
                         / pt.dist_analytic.oob_mean(ns)))
        gaps_m.append(db(pt.mc.psd_distortion.in_band_mean(ns)
                         / pt.mc.psd_distortion.oob_mean(ns)))
    if not all(a > b for a, b in zip(gaps_a, gaps_a[1:])):
        fails.append("(b) analytic in/OOB gap not decreasing in tau_max: "
                     + ", ".join(f"{g:.2f}" for g in gaps_a))
    if not all(a > b - 0.3 for a, b in zip(gaps_m, gaps_m[1:])):
        fails.append("(b) MC in/OOB gap not decreasing in tau_max: "
                     + ", ".join(f"{g:.2f}" for g in gaps_m))
    # (c) Analytic SDR bitwise identical across M.
    model = res.points[1].model
    for k in (-100, 0, 512):
        a = analytic.sdr(k, full_cfg(M=64, L=5), model)
        b = analytic.sdr(k, full_cfg(M=1024, L=5), model)
        if a != b:
            fails.append(f"(c) SDR differs across M at k={k}")
    # (d) Isotropic baseline EVM below coherent EVM, analytic and MC.
    for pt in res.points + tau_sweep.points:
        if not pt.evm_isotropic_power < pt.evm_analytic_power:
            fails.append(f"(d) analytic iso >= coherent at {pt.value}")
        if not pt.evm_isotropic_power < pt.mc.evm_power:
            fails.append(f"(d) MC iso >= coherent at {pt.value}")
    emit(capsys, f"[criterion 5] {'PASS' if not fails else 'FAIL'} trends: "
         f"(a) norm. in-band dB {[float(round(db(v), 2)) for v in ana]}; "
         f"(b) tau gaps dB {[float(round(g, 2)) for g in gaps_a]}; "
         f"(c) SDR M-invariant; (d) iso < coherent"
         + ("" if not fails else " | " + "; ".join(fails)))
    assert not fails, "; ".join(fails)


def test_criterion_6_evm_agreement_full_scale(capsys, l_sweep):
    res, _ = l_sweep
    fails, parts = [], []
    for pt in res.points:
        gap = db(pt.mc.evm_power / pt.evm_analytic_power)
        parts.append(f"L={pt.value}: {gap:+.2f} dB")
        if abs(gap) > 0.5:
            fails.append(f"L={pt.value} EVM gap {gap:+.2f} dB (tol 0.5)")
    emit(capsys, f"[criterion 6] {'PASS' if not fails else 'FAIL'} EVM "
         f"MC vs theoretical ({', '.join(parts)}; tol 0.5 dB)")
    assert not fails, "; ".join(fails)


def test_criterion_7_pa_hermite_suite(capsys):
    c, sigma = 0.05, 0.8
    fits = [fit_hermite(lambda x: x - c * x * np.abs(x) ** 2, sigma,
                        rng=seeded_rng(70 + i)) for i in range(12)]
    a1 = np.array([np.real(f.alpha1) for f in fits])
    a3 = np.array([np.real(f.alpha3) for f in fits])
    se1 = a1.std(ddof=1) / np.sqrt(a1.size)
    se3 = a3.std(ddof=1) / np.sqrt(a3.size)
    d1 = abs(a1.mean() - (1.0 - 2.0 * c * sigma ** 2))
    d3 = abs(a3.mean() - (-c))
    fit_ok = d1 < 3 * se1 and d3 < 3 * se3

    # u-d orthogonality decay across T: slope of log mean |corr| vs log T.
    model = fit_hermite(lambda x: apply_rapp(x, PaParams(1.0, 1.0, 2.0)),
                        0.4, rng=seeded_rng(0))
    sizes = (10_000, 100_000, 1_000_000)
    means = []
    for T in sizes:
        reps = 8 if T < 1_000_000 else 4
        vals = []
        for r in range(reps):
            rng = seeded_rng(75, T, r)
            z = (rng.standard_normal(T) + 1j * rng.standard_normal(T)) \
                * (0.4 / np.sqrt(2))
            u, d = decompose(z, model)
            vals.append(abs(np.mean(u * np.conj(d)))
                        / np.sqrt(np.mean(np.abs(u) ** 2)
                                  * np.mean(np.abs(d) ** 2)))
        means.append(np.mean(vals))
    slope = np.polyfit(np.log10(sizes), np.log10(means), 1)[0]
    decay_ok = means[0] > means[1] > means[2] and abs(slope + 0.5) < 0.2
    ok = fit_ok and decay_ok
    emit(capsys, f"[criterion 7] {'PASS' if ok else 'FAIL'} PA/Hermite: "
         f"cubic fit |d a1|={d1:.2e} (3se={3 * se1:.2e}), "
         f"|d a3|={d3:.2e} (3se={3 * se3:.2e}); orthogonality slope "
         f"{slope:.2f} (target -0.5 +/- 0.2)")
    assert ok
