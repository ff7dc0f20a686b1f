from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speedmeter import closedform as cf
from speedmeter.freqsolve import FrequencyGrid
from speedmeter.scenarios import (
    CHECKS,
    GAMMA_DISSIPATIVE,
    PM_COUPLING_SCALE,
    ScenarioConfig,
    adiabatic_deviation,
    compare_meters,
    consistency_report,
    optomechanical_strength,
    position_meter_system,
    position_meter_transfers,
    run_position_meter,
    run_speed_meter,
    speed_meter_system,
    speed_meter_transfers,
)
from speedmeter.spectra import ReadoutPlan
from speedmeter.sysmodel import BeamSplitter, Optomechanical, build_drift, nonreciprocity_defect

GRID = FrequencyGrid.log(1e-3, 10, 80)


def test_default_speed_meter_is_unidirectional():
    fwd, bwd = nonreciprocity_defect(build_drift(speed_meter_system(1.0)), "A", "B")
    assert bwd == pytest.approx(0, abs=1e-14) and fwd > 0


def test_full_speed_meter_spec():
    spec = speed_meter_system(1.0, 100.0)
    assert [m.name for m in spec.modes] == ["A", "B", "C", "x"]
    assert spec.reservoir_modes == ("C",)
    rates = [abs(c.rate) for c in spec.couplings if isinstance(c, BeamSplitter) and "C" in (c.mode_a, c.mode_b)]
    assert rates == pytest.approx([np.sqrt(GAMMA_DISSIPATIVE * 100.0)] * 2)
    oms = [c for c in spec.couplings if isinstance(c, Optomechanical)]
    assert [c.sign for c in oms] == [1, -1]
    assert oms[0].strength == pytest.approx(np.sqrt(8 * 0.5**3 / 2))
    with pytest.raises(ValueError):
        speed_meter_system(1.0, 0.0)


def test_markovian_warning_for_slow_reservoir():
    with pytest.warns(UserWarning):
        speed_meter_system(1.0, 5.0)


def test_position_meter_spec():
    spec = position_meter_system(1.0)
    cavities = [m for m in spec.modes if m.kind == "cavity"]
    assert len(cavities) == 1
    mech = spec.mode("x")
    assert mech.resonance == 0.0
    (om,) = spec.couplings
    assert om.strength == pytest.approx(PM_COUPLING_SCALE * optomechanical_strength(1.0))


def test_position_meter_coupling_matches_single_cavity_matrices():
    ts = position_meter_transfers(1.0, GRID)
    pr = cf.printed_positionmeter_transfers(1.0, GRID)
    assert np.allclose(ts.scattering, pr.scattering, rtol=1e-9)
    assert np.allclose(ts.force, pr.force, rtol=1e-9)
    doubled = position_meter_transfers(1.0, GRID, coupling_scale=2.0)
    assert np.allclose(doubled.scattering[:, 1, 0], 2 * pr.scattering[:, 1, 0], rtol=1e-9)


def test_first_principles_bport_matches_printed_except_drive_entry():
    w = np.array([0.3, 1.0, 2.0])
    fp = speed_meter_transfers(1.0, w)
    pr = cf.printed_speedmeter_transfers(1.0, w, corrected=True)
    assert np.allclose(fp.select(("b",)).scattering, pr.scattering, atol=1e-12)
    assert np.allclose(fp.force_response("b"), pr.force, atol=1e-12)


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_routes_agree_at_dc(g):
    w = FrequencyGrid([1e-3, 1e-2])
    fp = run_speed_meter(ScenarioConfig(g, w)).total[0]
    closed = run_speed_meter(ScenarioConfig(g, w, route="closedForm")).total[0]
    assert abs(fp - closed) / closed < 5e-3


def test_closed_form_route_without_feedforward_uses_bport_matrices():
    w = FrequencyGrid([1e-3, 1.0])
    cfg = ScenarioConfig(1.0, w, plan=ReadoutPlan("b", "opt"), route="closedForm")
    assert run_speed_meter(cfg).total[0] > 1e3


def test_run_position_meter_angle():
    w = FrequencyGrid([0.5, 1.0])
    a = run_position_meter(ScenarioConfig(1.0, w)).total
    b = run_position_meter(ScenarioConfig(1.0, w, plan=ReadoutPlan("b", 0.0))).total
    assert np.array_equal(a, b)
    c = run_position_meter(ScenarioConfig(1.0, w, route="closedForm")).total
    assert np.allclose(a, c, rtol=1e-9)


def test_compare_examples():
    res = compare_meters(1.0, FrequencyGrid.log(0.01, 0.5, 50))
    assert np.all(res.sm_better)
    assert set(res.verdicts) == {"SM<PM"}
    cl = compare_meters(1.0, FrequencyGrid([1.0, 2.0]), route="closedForm")
    assert cl.s_pm[1] == pytest.approx(0.5 * (3 + 1 / 3))
    assert cl.s_pm[1] < cl.s_sm[1]


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_low_frequency_ratio(g):
    w = np.array([1e-4])
    res = compare_meters(g, w)
    assert res.s_sm[0] / res.s_pm[0] == pytest.approx(w[0] ** 2 / (8 * g**2), rel=1e-3)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3, 3), st.integers(2, 4))
def test_compare_verdicts_stable_under_refinement(g, factor):
    coarse = np.geomspace(1e-2, 5, 12)
    fine = np.unique(np.concatenate([coarse, np.geomspace(1e-2, 5, 12 * factor)]))
    a = compare_meters(g, coarse)
    b = compare_meters(g, fine)
    keep = np.isin(fine, coarse)
    assert a.verdicts == [v for v, k in zip(b.verdicts, keep) if k]


def test_scenario_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(0.0)
    with pytest.raises(ValueError):
        ScenarioConfig(1.0, route="other")


def test_adiabatic_deviation_decreases():
    w = FrequencyGrid.log(1e-3, 10, 60)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        devs = [adiabatic_deviation(1.0, kc, w) for kc in (25.0, 50.0, 100.0)]
    assert devs[0] > devs[1] > devs[2]


@pytest.fixture(scope="module")
def report():
    return consistency_report(1.0, FrequencyGrid.log(1e-3, 10, 120))


def test_report_has_one_record_per_check(report):
    assert len(report.records) == len(CHECKS)
    assert report.names[:5] == [
        "a_conditional_coeffs_vs_speed_spectrum",
        "b_first_principles_vs_printed_bport",
        "c_positionmeter_matrices_vs_position_spectrum",
        "d_printed_matrix_commutator_defect",
        "e_wiener_gains_vs_printed_filters",
    ]
    for r in report.records:
        assert r.verdict in ("agree", "deviate")


def test_report_check_a(report):
    a = report["a_conditional_coeffs_vs_speed_spectrum"]
    assert a.verdict == "deviate"
    assert a.details["rel_dev_at_omega_1e-3"] < 1e-5
    assert a.details["ratio_at_omega_1"] == pytest.approx(6.5 / 3.5)


def test_report_check_b(report):
    b = report["b_first_principles_vs_printed_bport"]
    assert b.verdict == "deviate"
    assert b.details["worst_entry"] == "D_d[2,2]"
    assert b.details["max_rel_dev_with_corrected_drive_entry"] < 1e-9


def test_report_check_c(report):
    c = report["c_positionmeter_matrices_vs_position_spectrum"]
    assert c.verdict == "deviate"
    assert c.details["dc_ratio_matrices_over_spectrum"] == pytest.approx(2.0, rel=1e-3)
    assert c.details["matrices_rel_dev_from_4gamma_over_omega2"] < 1e-3


def test_report_check_d(report):
    d = report["d_printed_matrix_commutator_defect"]
    assert d.verdict == "deviate"
    assert d.details["defect_with_corrected_drive_entry"] < 1e-12


def test_report_check_e(report):
    e = report["e_wiener_gains_vs_printed_filters"]
    assert e.verdict == "deviate"
    assert e.details["printed_filters_equal_zero_forcing_rel_dev"] < 1e-8
    assert e.details["wiener_never_worse"]
    assert e.details["residual_ratio_printed_over_wiener_at_omega_1"] == pytest.approx(6.5 / 3.125)


def test_report_extra_checks(report):
    assert report["f_first_principles_filtered_psd_vs_conditional_coeffs"].verdict == "agree"
    g = report["g_first_principles_vs_printed_auxiliary_ports"]
    assert g.verdict == "deviate"
    assert g.details["max_rel_dev_relabelled_and_corrected_drive_entry"] < 1e-9
    assert report["h_first_principles_vs_printed_positionmeter"].verdict == "agree"
    with pytest.raises(KeyError):
        report["z_missing"]
