import json
import math
import time

import pytest

from cusign.cusign_detector import THETA_COEFFICIENTS
from cusign.experiments import (
    Report,
    cmd_appendix_tables,
    cmd_calibrate_theta,
    cmd_scenario,
    cmd_table_alarm_rates,
    cmd_validate,
)


def rows_by_label(report):
    return {(r.table, r.label): r for r in report.rows}


def test_validate_passes_quickly():
    cmd_validate()  # warm imports
    t0 = time.perf_counter()
    report = cmd_validate()
    assert time.perf_counter() - t0 < 1.0
    assert report.passed, report.render()


def test_validate_surfaces_broken_theta_table():
    broken = dict(THETA_COEFFICIENTS)
    broken[2] = 2.0
    report = cmd_validate(theta_table=broken)
    assert not report.passed
    assert any("E=1/6" in r.label for r in report.failures)


def test_validate_surfaces_missing_theta_entry():
    report = cmd_validate(theta_table={3: 0.7})
    assert [r.label for r in report.failures] == ["detection bound arithmetic"]


def test_table_rows():
    rep = rows_by_label(cmd_table_alarm_rates(samples=1_000_000, seed=0))
    assert rep[("analytic", "E[alpha] tau=1 p=0.5")].measured == 0.5
    assert rep[("analytic", "E[alpha] tau=3 p=0.5")].measured == pytest.approx(0.08333, abs=1e-5)
    for case in "+-":
        row = rep[("simulated", f"alpha{case} tau=3")]
        assert row.passed and row.measured == pytest.approx(0.0833, abs=0.002)


def test_sample_floor():
    with pytest.raises(ValueError):
        cmd_table_alarm_rates(samples=0)


def test_theta_tau2_and_seed_agreement():
    a = cmd_calibrate_theta(samples=1_000_000, seed=1, taus=(2,))
    b = cmd_calibrate_theta(samples=1_000_000, seed=2, taus=(2,))
    ra, rb = a.rows[0], b.rows[0]
    assert ra.measured == pytest.approx(0.372, rel=0.07)
    se = math.hypot(ra.inputs["theta_se"], rb.inputs["theta_se"])
    assert abs(ra.measured - rb.measured) < 2 * se
    assert "alpha_hat+_tau2" in a.histograms


def test_theta_warns_off_half():
    rep = cmd_calibrate_theta(samples=20_000, seed=0, taus=(2,), p_plus=0.7)
    assert "warning" in rep.metadata


def test_theta_untabulated_threshold_reported_without_target():
    rep = cmd_calibrate_theta(samples=20_000, seed=0, taus=(5,))
    assert rep.rows[0].target is None and rep.rows[0].passed is None and rep.rows[0].measured > 0


def test_appendix_examples():
    rep = rows_by_label(cmd_appendix_tables(samples=1_000_000, seed=0, taus=(2, 3, 4), p_values=(0.4, 0.5, 0.6)))
    assert rep[("mean", "tau=2 p=0.6")].measured == pytest.approx(0.2250, abs=0.002)
    assert rep[("std", "tau=2 p=0.6")].measured == pytest.approx(0.0238, abs=0.0015)
    assert "analytic 0.0255" in rep[("std", "tau=2 p=0.6")].note
    assert "approximate" in rep[("std", "tau=2 p=0.6")].note
    assert rep[("mean", "tau=3 p=0.5")].measured == pytest.approx(0.0833, abs=0.002)
    assert rep[("std", "tau=3 p=0.5")].measured == pytest.approx(0.0163, abs=0.0015)
    assert rep[("mean", "tau=4 p=0.4")].target == pytest.approx(0.0244, abs=1e-4)


def test_scenario_persistent(tmp_path):
    trace, rep = cmd_scenario("persistent", tmp_path / "p.csv")
    s = trace.summary()
    assert s["cusign_first_detection_after_onset"] > 10_000
    assert s["cusum_first_detection_after_onset"] is None
    assert rep.passed
    assert (tmp_path / "p.csv").stat().st_size > 0


def test_report_serialization_is_stable():
    r = Report("x", metadata={"seed": 1})
    r.add("t", "a", 1.0, 1.0005, 1e-3)
    r.add("t", "b", 1.0, 1.2, 0.1, relative=True)
    assert [row.passed for row in r.rows] == [True, False]
    assert not r.passed and len(r.failures) == 1
    assert json.loads(r.to_json())["rows"][1]["passed"] is False
    assert r.to_json() == r.to_json()
    assert r.to_csv().splitlines()[2].endswith("FAIL,")
