"""Experiments: alarm-rate tables, theta calibration, scenarios.

Every ``cmd_*`` function returns a :class:`Report` whose rows pair a
measured value with its analytic or reference target and a tolerance.
"""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .attacks import AttackKind
from .chi2 import ChiSquareContext, median_reference, reference_for_probability, test_measure
from .config import load_config
from .cusign_detector import (
    THETA_COEFFICIENTS,
    CusignConfig,
    alarm_frequencies,
    detection_bounds,
    expected_alarm_rate,
    run_cusign,
    theta_scale,
    transition_matrix,
)
from .lti import SystemModel, make_rng, riccati_residual, solve_steady_state
from .ugv import CSV_SCHEMA_VERSION, build_ugv_model, run_scenario, UgvParams

MIN_SAMPLES = 10_000
TAUS = (1, 2, 3, 4)

# reference alarm rates at p = 0.5: analytic, and simulated at N = 5e6
REFERENCE_RATES = {1: 0.5, 2: 1 / 6, 3: 1 / 12, 4: 0.05}
REFERENCE_SIM_RATES = {1: 0.50006, 2: 0.16692, 3: 0.083291, 4: 0.050012}

# (expected, simulated) mean and std of the alarm-rate estimate, ell = 100
REFERENCE_MRE_MEAN = {
    (1, 0.4): (0.400, 0.401), (1, 0.5): (0.500, 0.500), (1, 0.6): (0.600, 0.601),
    (2, 0.4): (0.1143, 0.1142), (2, 0.5): (1 / 6, 0.1665), (2, 0.6): (0.2250, 0.2251),
    (3, 0.4): (0.0484, 0.0483), (3, 0.5): (1 / 12, 0.0832), (3, 0.6): (0.1256, 0.1258),
    (4, 0.4): (0.0244, 0.0239), (4, 0.5): (0.0500, 0.0500), (4, 0.6): (0.0835, 0.0833),
}  # fmt: skip
REFERENCE_MRE_STD = {
    (1, 0.4): (0.0346, 0.0347), (1, 0.5): (0.0354, 0.0355), (1, 0.6): (0.0346, 0.0347),
    (2, 0.4): (0.0194, 0.0204), (2, 0.5): (0.0227, 0.0226), (2, 0.6): (0.0254, 0.0238),
    (3, 0.4): (0.0127, 0.0138), (3, 0.5): (0.0163, 0.0163), (3, 0.6): (0.0196, 0.0185),
    (4, 0.4): (0.0091, 0.0099), (4, 0.5): (0.0128, 0.0128), (4, 0.6): (0.0163, 0.0153),
}  # fmt: skip

# reference bounds for E = 1/6, tau = 2, ell = 100, Z = 3 (rounded; direct evaluation gives 0.0985, 0.2348)
REFERENCE_BOUNDS = (0.0987, 0.2347)


@dataclass
class Row:
    table: str
    label: str
    target: float | None
    measured: float | None
    tolerance: float | None
    relative: bool = False
    passed: bool | None = None
    note: str = ""
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed is None and None not in (self.target, self.measured, self.tolerance):
            err = abs(self.measured - self.target)
            if self.relative:
                err /= abs(self.target)
            self.passed = bool(err <= self.tolerance)


@dataclass
class Report:
    name: str
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    histograms: dict = field(default_factory=dict)

    def add(self, *args, **kwargs):
        row = Row(*args, **kwargs)
        self.rows.append(row)
        return row

    @property
    def passed(self):
        return all(r.passed is not False for r in self.rows)

    @property
    def failures(self):
        return [r for r in self.rows if r.passed is False]

    def to_dict(self):
        return {
            "name": self.name,
            "metadata": self.metadata,
            "passed": self.passed,
            "rows": [asdict(r) for r in self.rows],
            "histograms": self.histograms,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["table", "label", "inputs", "target", "measured", "tolerance", "relative", "passed", "note"])
        for r in self.rows:
            writer.writerow(
                [
                    r.table,
                    r.label,
                    json.dumps(r.inputs, sort_keys=True, default=_json_default),
                    _fmt(r.target),
                    _fmt(r.measured),
                    _fmt(r.tolerance),
                    r.relative,
                    "" if r.passed is None else ("pass" if r.passed else "FAIL"),
                    r.note,
                ]
            )
        return buf.getvalue()

    def histograms_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["histogram", "bin_left", "bin_right", "count"])
        for name, hist in sorted(self.histograms.items()):
            edges, counts = hist["edges"], hist["counts"]
            for i, c in enumerate(counts):
                writer.writerow([name, repr(edges[i]), repr(edges[i + 1]), c])
        return buf.getvalue()

    def render(self):
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for r in self.rows:
            status = "    " if r.passed is None else ("pass" if r.passed else "FAIL")
            tol = "" if r.tolerance is None else (f" tol {r.tolerance:.3g}" + (" rel" if r.relative else ""))
            lines.append(
                f"  [{status}] {r.table:<10} {r.label:<40} target {_fmt(r.target):>12} "
                f"measured {_fmt(r.measured):>12}{tol}" + (f"  ({r.note})" if r.note else "")
            )
        return "\n".join(lines)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _metadata(command, **extra):
    return {"command": command, "version": __version__, "csv_schema_version": CSV_SCHEMA_VERSION, **extra}


def _check_samples(samples):
    if samples is None or samples < MIN_SAMPLES:
        raise ValueError(f"statistical commands need at least {MIN_SAMPLES} samples, got {samples}")


def chi2_stream(rng, n, dof):
    """``n`` test measures of unit-covariance Gaussian residuals in ``dof`` dimensions."""
    r = rng.standard_normal((n, dof))
    return test_measure(r, np.eye(dof))


def cmd_table_alarm_rates(samples=1_000_000, seed=0, taus=TAUS, dof=3):
    _check_samples(samples)
    ctx = ChiSquareContext.at_median(dof)
    z = chi2_stream(make_rng(seed), samples, dof)
    report = Report("table2", metadata=_metadata("table2", seed=seed, samples=samples, dof=dof, z_ref=ctx.z_ref))
    report.metadata["p_plus"] = ctx.p_plus
    for tau in taus:
        if tau in REFERENCE_RATES:
            report.add("analytic", f"E[alpha] tau={tau} p=0.5", REFERENCE_RATES[tau],
                       expected_alarm_rate(tau, 0.5, 0.5), 1e-12, inputs={"tau": tau})  # fmt: skip
        # the median approximation puts p_plus slightly off 0.5; simulate against that chain
        sims = alarm_frequencies(z, ctx.z_ref, tau)
        note = f"reference sim {REFERENCE_SIM_RATES[tau]}" if tau in REFERENCE_SIM_RATES else ""
        for case, sim in zip("+-", sims):
            analytic = expected_alarm_rate(tau, ctx.p_plus, ctx.p_minus, case)
            report.add("simulated", f"alpha{case} tau={tau}", analytic, sim, 0.002, note=note,
                       inputs={"tau": tau, "p_plus": ctx.p_plus})  # fmt: skip
    return report


def _batch_theta(alpha, expected, ell, n_batches=20):
    """Theta from the whole series and a batch-means standard error."""
    theta = alpha.var() * ell / (expected * (1 - expected))
    batches = np.array_split(alpha, n_batches)
    per_batch = np.array([b.var() * ell / (expected * (1 - expected)) for b in batches])
    return float(theta), float(per_batch.std(ddof=1) / math.sqrt(n_batches))


def alpha_hat_series(samples, seed, tau, ell, p_plus, dof=3, warmup_windows=10):
    """Post-warmup alarm-rate estimates (both counters) on a nominal chi2 stream."""
    z_ref = median_reference(dof) if p_plus is None else reference_for_probability(dof, 1.0 - p_plus)
    ctx = ChiSquareContext(dof, z_ref)
    cfg = CusignConfig(tau=tau, z_ref=z_ref, p_plus=ctx.p_plus, p_minus=ctx.p_minus, ell=ell)
    run = run_cusign(chi2_stream(make_rng(seed), samples, dof), cfg)
    warm = warmup_windows * ell
    return cfg, run.alpha_hat_plus[warm:], run.alpha_hat_minus[warm:]


def cmd_calibrate_theta(samples=1_000_000, seed=0, window=100, taus=TAUS, p_plus=0.5, dof=3):
    _check_samples(samples)
    report = Report(
        "theta", metadata=_metadata("theta", seed=seed, samples=samples, window=window, p_plus=p_plus, dof=dof)
    )
    if abs(p_plus - 0.5) > 0.05:
        report.metadata["warning"] = "p_plus far from 0.5: the Normal model and tabulated theta are approximate"
    for tau in taus:
        cfg, a_plus, a_minus = alpha_hat_series(samples, seed, tau, window, p_plus, dof)
        for case, series, p_adv in (("+", a_plus, cfg.p_plus), ("-", a_minus, cfg.p_minus)):
            expected = expected_alarm_rate(tau, cfg.p_plus, cfg.p_minus, case)
            theta, se = _batch_theta(series, expected, window)
            coeff = theta * (2 * window - 1) / window
            label = f"theta{case} tau={tau}"
            inputs = {"tau": tau, "ell": window, "p_advance": p_adv, "theta_se": se, "coefficient": coeff}
            if tau in THETA_COEFFICIENTS:
                tol = 0.05 if tau == 1 else 0.07
                report.add("theta", label, theta_scale(tau, window), theta, tol, relative=True, inputs=inputs)
            else:
                report.add("theta", label, None, theta, None, note="no tabulated value", inputs=inputs)
            counts, edges = np.histogram(series, bins="fd")
            report.histograms[f"alpha_hat{case}_tau{tau}"] = {"edges": edges.tolist(), "counts": counts.tolist()}
    return report


def cmd_appendix_tables(samples=1_000_000, seed=0, window=100, taus=TAUS, p_values=(0.4, 0.5, 0.6), dof=3):
    _check_samples(samples)
    report = Report("appendix", metadata=_metadata("appendix", seed=seed, samples=samples, window=window, dof=dof))
    for tau in taus:
        for p in p_values:
            cfg, series, _ = alpha_hat_series(samples, seed, tau, window, p, dof)
            expected = expected_alarm_rate(tau, cfg.p_plus, cfg.p_minus, "+")
            theta = theta_scale(tau, window) if tau in THETA_COEFFICIENTS else None
            analytic_std = math.sqrt(theta * expected * (1 - expected) / window) if theta else None
            mean, std = float(series.mean()), float(series.std())
            inputs = {"tau": tau, "p_plus": p, "ell": window}
            key = (tau, round(p, 2))
            if key in REFERENCE_MRE_MEAN:
                report.add("mean", f"tau={tau} p={p}", expected, mean, 0.002, inputs=inputs,
                           note=f"reference {REFERENCE_MRE_MEAN[key][0]}/{REFERENCE_MRE_MEAN[key][1]}")  # fmt: skip
                ref_exp, ref_sim = REFERENCE_MRE_STD[key]
                divergence = std - analytic_std
                note = f"analytic {analytic_std:.4f}, divergence {divergence:+.4f}"
                if abs(p - 0.5) > 0.05:
                    note += "; Normal model approximate off p=0.5"
                # at p = 0.5 the analytic and reference columns agree; elsewhere compare to the reference sim
                target = ref_exp if abs(p - 0.5) < 1e-9 else ref_sim
                report.add("std", f"tau={tau} p={p}", target, std, 0.0015, inputs=inputs, note=note)
            else:
                report.add("mean", f"tau={tau} p={p}", expected, mean, 0.002, inputs=inputs)
                report.add("std", f"tau={tau} p={p}", analytic_std, std, None, inputs=inputs)
    return report


def scenario_report(trace, name):
    cfg = trace.config
    summary = trace.summary()
    report = Report(f"scenario:{name}", metadata=_metadata("scenario", seed=cfg.seed, config=name, summary=summary))
    warm = cfg.warmup_steps
    attack = cfg.attack
    if attack.kind is AttackKind.NONE:
        quiet = 1.0 - summary["cusign_detection_fraction"]
        report.add("nominal", "CUSIGN no-detection fraction", None, quiet, None,
                   passed=quiet >= 0.99, note=">= 0.99 required")  # fmt: skip
        return report
    onset = attack.onset
    first = summary["cusign_first_detection_after_onset"]
    budget = 2000 if attack.kind is AttackKind.STEALTHY_PERSISTENT else 5000
    delay = None if first is None else float(first - onset)
    report.add("attack", "CUSIGN detection delay (steps)", None, delay, None,
               passed=delay is not None and delay <= budget, note=f"<= {budget} required")  # fmt: skip
    cusum_first = summary["cusum_first_detection_after_onset"]
    report.add("attack", "CUSUM detections after onset", None, float(np.sum(trace.cusum_detect[max(onset, warm):])),
               None, passed=cusum_first is None)  # fmt: skip
    if attack.kind.stealthy and float(attack.payload @ attack.payload) < cfg.cusum_bias:
        c_max = float(np.max(trace.C[onset:])) if onset < len(trace) else 0.0
        report.add("attack", "CUSUM accumulator max after onset", 0.0, c_max, 0.0)
    return report


def cmd_scenario(config, trace_path=None):
    """Run one scenario; returns ``(trace, report)`` and writes the trace CSV if asked."""
    cfg = load_config(config)
    trace = run_scenario(cfg)
    if trace_path is not None:
        trace.to_csv(trace_path)
    return trace, scenario_report(trace, str(config))


def cmd_validate(theta_table=None):
    """Analytic invariant checks (no Monte Carlo)."""
    report = Report("validate", metadata=_metadata("validate"))

    scalar = SystemModel(A=[[0.9]], B=[[0.0]], C=[[1.0]], Q=[[0.1]], R=[[0.2]])
    est = solve_steady_state(scalar)
    report.add("riccati", "scalar fixed point", (0.062 + math.sqrt(0.062**2 + 0.08)) / 2, float(est.P[0, 0]), 1e-10)
    ugv = build_ugv_model(UgvParams())
    est = solve_steady_state(ugv)
    report.add("riccati", "UGV residual", 0.0, riccati_residual(ugv, est.P), 1e-10)
    report.add("riccati", "UGV Sigma^(1/2) reconstruction", 0.0,
               float(np.max(np.abs(est.SigmaHalf @ est.SigmaHalf - est.Sigma))), 1e-8)  # fmt: skip

    for tau, target in REFERENCE_RATES.items():
        report.add("alarm_rate", f"E[alpha] tau={tau}", target, expected_alarm_rate(tau, 0.5, 0.5), 1e-12)
    for tau in TAUS:
        for p in (0.4, 0.5, 0.6):
            for case in "+-":
                T = transition_matrix(tau, p, 1 - p, case)
                report.add("stochastic", f"row sums tau={tau} p={p} {case}", 0.0,
                           float(np.max(np.abs(T.sum(axis=1) - 1.0))), 1e-12)  # fmt: skip

    try:
        b = detection_bounds(1 / 6, 2, 100, 3.0, table=theta_table)
        report.add("bounds", "lower, E=1/6 tau=2 ell=100 Z=3", REFERENCE_BOUNDS[0], b.lower, 5e-4)
        report.add("bounds", "upper, E=1/6 tau=2 ell=100 Z=3", REFERENCE_BOUNDS[1], b.upper, 5e-4)
        b1 = detection_bounds(0.5, 1, 100, 1.0, table=theta_table)
        report.add("bounds", "half-width, E=0.5 tau=1 ell=100 Z=1", 0.0354, b1.upper - 0.5, 5e-5)
    except Exception as exc:  # a broken theta table must surface as a named failure
        report.add("bounds", "detection bound arithmetic", None, None, None, passed=False, note=repr(exc))
    return report
