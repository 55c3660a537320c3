"""Acceptance gate: one PASS/FAIL line per criterion.

The lines are collected in ``VERDICTS`` and printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from cusign.chi2 import ChiSquareContext, median_reference
from cusign.cusign_detector import (
    THETA_COEFFICIENTS,
    CusignConfig,
    alarm_frequencies,
    detection_bounds,
    expected_alarm_rate,
    run_cusign,
    transition_matrix,
)
from cusign.cusum_detector import alarm_rate, rate_band, tune_threshold
from cusign.experiments import REFERENCE_MRE_MEAN, REFERENCE_MRE_STD, REFERENCE_BOUNDS, alpha_hat_series, chi2_stream
from cusign.lti import make_rng, riccati_residual, solve_steady_state
from cusign.ugv import UgvParams, build_ugv_model

TAUS = (1, 2, 3, 4)
VERDICTS = []


def verdict(n, title, checks):
    """Record the criterion line and one line per sub-check; fail the test if any sub-check failed."""
    ok = all(passed for passed, _ in checks)
    VERDICTS.append((n, f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}",
                     [f"    [{'ok' if passed else 'FAIL'}] {detail}" for passed, detail in checks]))  # fmt: skip
    if not ok:
        pytest.fail(f"criterion {n} failed: " + "; ".join(d for p, d in checks if not p), pytrace=False)


def test_criterion_1_analytic_rates():
    targets = {1: 0.5, 2: 1 / 6, 3: 1 / 12, 4: 0.05}
    checks = []
    for tau, target in targets.items():
        expected_alarm_rate(tau, 0.5, 0.5)
        best = min(_timed(lambda: expected_alarm_rate(tau, 0.5, 0.5)) for _ in range(20))
        value = float(expected_alarm_rate(tau, 0.5, 0.5))
        checks.append((abs(value - target) <= 1e-12, f"tau={tau}: {value!r} vs {target!r} (tol 1e-12)"))
        checks.append((best < 1e-3, f"tau={tau}: {best * 1e6:.0f} us (< 1 ms)"))
    verdict(1, "analytic alarm rates at p=0.5", checks)


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def test_criterion_2_skewed_analytic_rates():
    checks = []
    for tau in TAUS:
        for p in (0.4, 0.6):
            value = expected_alarm_rate(tau, p, 1 - p)
            ref = REFERENCE_MRE_MEAN[(tau, p)][0]
            checks.append((abs(value - ref) <= 5e-4, f"tau={tau} p={p}: {value:.5f} vs {ref} (tol 5e-4)"))
    verdict(2, "analytic alarm rates at p=0.4 and 0.6", checks)


def test_criterion_3_monte_carlo_rates():
    t0 = time.perf_counter()
    ctx = ChiSquareContext.at_median(3)
    z = chi2_stream(make_rng(0), 1_000_000, 3)
    checks = []
    for tau in TAUS:
        sims = alarm_frequencies(z, ctx.z_ref, tau)
        for case, sim in zip("+-", sims):
            analytic = expected_alarm_rate(tau, ctx.p_plus, ctx.p_minus, case)
            checks.append((abs(sim - analytic) <= 0.002,
                           f"tau={tau} alpha{case}: sim {sim:.5f} vs analytic {analytic:.5f} (tol 0.002)"))  # fmt: skip
    elapsed = time.perf_counter() - t0
    checks.append((elapsed < 30.0, f"runtime {elapsed:.2f} s (< 30 s)"))
    verdict(3, "Monte Carlo CUSIGN alarm frequency, N=1e6 chi2_3 draws", checks)


def test_criterion_4_mre_distribution():
    checks = []
    for tau in TAUS:
        cfg, a_plus, a_minus = alpha_hat_series(1_000_000, 0, tau, 100, 0.5)
        mean_target = REFERENCE_MRE_MEAN[(tau, 0.5)][0]
        std_target = REFERENCE_MRE_STD[(tau, 0.5)][0]
        mean, std = float(a_plus.mean()), float(a_plus.std())
        checks.append((abs(mean - mean_target) <= 0.002, f"tau={tau} mean {mean:.4f} vs {mean_target:.4f} (tol 0.002)"))
        checks.append((abs(std - std_target) <= 0.0015, f"tau={tau} std {std:.4f} vs {std_target} (tol 0.0015)"))
        for case, series in (("+", a_plus), ("-", a_minus)):
            expected = expected_alarm_rate(tau, cfg.p_plus, cfg.p_minus, case)
            theta = series.var() * 100 / (expected * (1 - expected))
            coeff = theta * 199 / 100
            rel = abs(coeff - THETA_COEFFICIENTS[tau]) / THETA_COEFFICIENTS[tau]
            checks.append((rel <= 0.07, f"tau={tau} theta{case} coefficient {coeff:.3f} vs "
                                        f"{THETA_COEFFICIENTS[tau]} ({rel:.1%}, tol 7%)"))  # fmt: skip
    verdict(4, "running alarm-rate estimate: mean, std and theta at ell=100, p=0.5", checks)


def test_criterion_5_detection_bounds():
    b = detection_bounds(1 / 6, 2, 100, 3.0)
    checks = [
        (abs(b.lower - 0.0985) <= 1e-4 and abs(b.upper - 0.2348) <= 1e-4,
         f"direct evaluation ({b.lower:.5f}, {b.upper:.5f}) ~ (0.0985, 0.2348)"),
        (abs(b.lower - REFERENCE_BOUNDS[0]) <= 5e-4, f"lower {b.lower:.5f} vs reference {REFERENCE_BOUNDS[0]} (tol 5e-4)"),
        (abs(b.upper - REFERENCE_BOUNDS[1]) <= 5e-4, f"upper {b.upper:.5f} vs reference {REFERENCE_BOUNDS[1]} (tol 5e-4)"),
    ]  # fmt: skip
    verdict(5, "detection bounds for E=1/6, tau=2, ell=100, Z=3", checks)


def test_criterion_6_cusum_consistency():
    z = chi2_stream(make_rng(1), 1_000_000, 3)
    rate = alarm_rate(z, 3.3, 2.3226)
    tuned = tune_threshold(3.3, 3, 0.15, rng=make_rng(2), n_samples=1_000_000)
    checks = [
        (abs(rate - 0.15) <= 0.01, f"alarm rate {rate:.4f} at threshold 2.3226 vs 0.15 (tol 0.01)"),
        (abs(tuned - 2.3226) <= 0.05, f"tuned threshold {tuned:.4f} vs 2.3226 (tol 0.05)"),
    ]
    verdict(6, "CUSUM alarm rate and threshold tuning, b=3.3, s=3", checks)


def test_criterion_7_stealth(traces):
    checks = []
    lo, hi = rate_band(0.15, 100, 3.0)
    for name in ("persistent", "alternating"):
        tr = traces(name)
        cfg = tr.config
        onset, warm = cfg.attack.onset, cfg.warmup_steps
        norm2 = float(cfg.attack.payload @ cfg.attack.payload)
        checks.append((norm2 < cfg.cusum_bias, f"{name}: |target|^2 = {norm2:.5f} < b = {cfg.cusum_bias}"))
        c_after = tr.C[onset:]
        checks.append((bool(np.all(c_after == 0.0)), f"{name}: accumulator identically 0 over {c_after.size} "
                                                      f"attacked steps (max {float(c_after.max())!r})"))  # fmt: skip
        pre = tr.alpha_C[warm:onset]
        checks.append((True, f"{name}: before onset the nominal windowed rate spans [{pre.min():.3f}, "
                             f"{pre.max():.3f}] (informational)"))  # fmt: skip
        rate = tr.alpha_C[onset:]
        checks.append((bool(np.all(rate <= hi)), f"{name}: attacked windowed rate never above {hi:.4f} "
                                                 f"(max {rate.max():.3f})"))  # fmt: skip
        outside = np.flatnonzero((rate < lo) | (rate > hi))
        first = None if outside.size == 0 else int(outside[0] + onset)
        checks.append((outside.size == 0, f"{name}: attacked windowed rate inside [{lo:.4f}, {hi:.4f}] "
                                          f"(first exit k={first}, min {rate.min():.3f})"))  # fmt: skip
    verdict(7, "CUSUM stays silent under the stealthy attack", checks)


def test_criterion_8_scenarios(traces):
    checks = []
    for name, budget, counters in (("persistent", 2000, ("minus",)), ("alternating", 5000, ("plus", "minus"))):
        tr = traces(name)
        onset = tr.config.attack.onset
        for counter in counters:
            alpha = getattr(tr, f"alpha_{counter}")[onset:]
            b = getattr(tr, f"bounds_{counter}")
            hits = np.flatnonzero((alpha < b.lower) | (alpha > b.upper))
            delay = None if hits.size == 0 else int(hits[0])
            checks.append((delay is not None and delay <= budget,
                           f"{name}: alpha_{counter} leaves its band {delay} steps after onset (<= {budget})"))  # fmt: skip
        pre = tr.cusign_detect[tr.config.warmup_steps:onset]
        checks.append((True, f"{name}: pre-onset false-detection fraction {pre.mean():.4f} (informational)"))
    tr = traces("nominal")
    n_steps = len(tr)
    quiet = 1.0 - float(tr.cusign_detect[tr.config.warmup_steps:].mean())
    checks.append((n_steps == 20_000, f"nominal: {n_steps} steps for 200 s"))
    checks.append((quiet >= 0.99, f"nominal (seed {tr.config.seed}): no detection on {quiet:.2%} of post-warmup "
                                  "steps (>= 99%)"))  # fmt: skip
    verdict(8, "UGV scenarios: attack detection delays and nominal quiet fraction", checks)


def test_criterion_9_structural_invariants():
    checks = []
    model = build_ugv_model(UgvParams())
    res = riccati_residual(model, solve_steady_state(model).P)
    checks.append((res < 1e-10, f"UGV Riccati residual {res:.2e} (< 1e-10)"))

    worst = 0.0
    for tau in range(1, 9):
        for p in np.linspace(0.0, 1.0, 11):
            for case in "+-":
                worst = max(worst, float(np.max(np.abs(transition_matrix(tau, p, 1 - p, case).sum(axis=1) - 1))))
    checks.append((worst < 1e-12, f"transition-matrix row sums off by at most {worst:.1e}"))

    z = chi2_stream(make_rng(5), 200_000, 3)
    for tau in TAUS:
        cfg = CusignConfig(tau=tau, z_ref=median_reference(3), p_plus=0.5, p_minus=0.5, ell=100)
        run = run_cusign(z, cfg)
        contained = (run.s_plus.min() >= 0 and run.s_plus.max() <= tau - 1 and run.s_minus.max() <= 0
                     and run.s_minus.min() >= -(tau - 1))  # fmt: skip
        checks.append((bool(contained), f"tau={tau}: S+ in [0, {tau - 1}], S- in [{-(tau - 1)}, 0]"))
        bounded = all(0.0 <= a.min() and a.max() <= 1.0 for a in (run.alpha_hat_plus, run.alpha_hat_minus))
        checks.append((bounded, f"tau={tau}: running estimates in [0, 1]"))

    a = chi2_stream(make_rng(42), 10_000, 3)
    b = chi2_stream(make_rng(42), 10_000, 3)
    ra = run_cusign(a, cfg)
    rb = run_cusign(b, cfg)
    same = a.tobytes() == b.tobytes() and ra.alpha_hat_minus.tobytes() == rb.alpha_hat_minus.tobytes()
    checks.append((same, "fixed seed reproduces streams and estimates bit for bit"))
    checks.append((True, "full-suite runtime is reported at the end of the session (< 120 s)"))
    verdict(9, "structural invariants", checks)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
