"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import photonstat as ps


def test_mandel_q_hand_oracle():
    series = ps.TimestampSeries(np.array([5000, 15000, 25000, 95000], dtype=np.uint64), 100000)
    q = ps.mandel_q(series, 50000)
    assert q["q"] == -0.5
    assert q["mean"] == 2.0
    assert q["n_windows"] == 2


def test_partition_windows():
    series = ps.TimestampSeries(np.array([5000, 15000, 25000, 95000], dtype=np.uint64), 100000)
    assert ps.partition_windows(series, 50000) == [3, 1]


def test_simulation_is_deterministic_and_analysable():
    kwargs = dict(
        mode="cw",
        duration_ps=200_000_000,
        seed=11,
        tau12_ps=205_000.0,
        tau21_ps=1_600.0,
        tau23_ps=1_400.0,
        tau31_ps=420_000.0,
        efficiency=0.25,
        deadtime_ps=80_000,
    )
    a = ps.simulate(**kwargs)
    b = ps.simulate(**kwargs)
    assert len(a) == len(b) > 0
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.channels, b.channels)
    assert a.seed == 11

    merged = ps.merge_channels(a)
    q = ps.mandel_q(merged, 1_000_000)
    assert math.isfinite(q["q"])
    assert q["q"] >= -1.0

    pnd = ps.photon_number_distribution(merged, 1_000_000)
    assert abs(sum(pnd["probabilities"]) - 1.0) < 1e-12


def test_deadtime_gap_floor():
    acq = ps.simulate(
        mode="cw",
        duration_ps=500_000_000,
        seed=3,
        tau12_ps=5_000.0,
        tau21_ps=1_600.0,
        efficiency=1.0,
        deadtime_ps=80_000,
    )
    ch1 = ps.merge_channels(acq, [1]).times
    gaps = np.diff(ch1.astype(np.int64))
    assert gaps.min() >= 80_000


def test_models_spot_values():
    assert ps.g2_two_exp(0.0, a=0.7, b=0.3, tau1_ps=2700, tau2_ps=200000) == pytest.approx(-0.4)
    assert ps.background_correct(1.0, 0.987) == pytest.approx(1.0)
    raw = ps.background_uncorrect(0.33, 0.987)
    assert ps.background_correct(raw, 0.987) == pytest.approx(0.33)
    assert ps.rate_model_g2(0.0, tau12_ps=415000, tau21_ps=2700, tau23_ps=1930,
                            tau31_ps=204000) == pytest.approx(0.0, abs=1e-12)
    assert ps.pulsed_q0(1.0, 0.0) == -1.0
    # k = 1 algebraic identity of the shelving model.
    q1 = ps.pulsed_q_model(1, eta=7.5e-4, tau23_eff_ps=153000, tau31_eff_ps=665000,
                           tau_rep_ps=100000)
    assert q1 == pytest.approx(-7.5e-4 * 153 / (153 + 665))
    # Analytic CW Q crosses zero between 20 and 22 ns for the S5 parameters.
    assert ps.analytic_cw_q(20_000, a=0.3, t1_ps=2700, t2_ps=200000, mean_rate_hz=34000) < 0
    assert ps.analytic_cw_q(22_000, a=0.3, t1_ps=2700, t2_ps=200000, mean_rate_hz=34000) > 0


def test_pulsed_pipeline_and_g2_zero():
    acq = ps.simulate(
        mode="pulsed",
        duration_ps=2_000_000_000_000,
        seed=5,
        tau12_ps=100.0,
        tau21_ps=2_700.0,
        tau23_ps=2_400.0,
        tau31_ps=420_000.0,
        efficiency=0.01,
        tau_rep_ps=100_000,
    )
    assert acq.is_pulsed and acq.tau_rep_ps == 100_000
    trig = ps.merge_channels(acq, [0])
    a = ps.merge_channels(acq, [1])
    b = ps.merge_channels(acq, [2])
    g = ps.g2_zero_pulsed(a, b, trig, 100_000, 10_000)
    assert g["g2_zero"] < 0.5  # a single emitter antibunches

    kept = ps.trigger_filter(acq, 0, 5_000)
    assert len(kept) <= len(acq)
    lt = ps.lifetime_histogram(acq, 100)
    fit = ps.fit_lifetime(np.array(lt["counts"], dtype=np.uint64), 100, lt["n_triggers"])
    assert fit["tau_ps"] == pytest.approx(2_700, rel=0.1)


def test_fit_saturation_and_pulsed_q():
    powers = [20.0 * 1.4**i for i in range(12)]
    rates = [ps.saturation_rate(p, i_inf_hz=120000, p_sat_uw=240) for p in powers]
    sat = ps.fit_saturation(powers, rates)
    assert sat["converged"]
    assert sat["p_sat_uw"] == pytest.approx(240, rel=1e-3)

    ks = np.arange(1, 30, dtype=np.uint64)
    windows = (ks * 100000).astype(np.uint64)
    qs = np.array([ps.pulsed_q_model(int(k), eta=7.5e-4, tau23_eff_ps=153000,
                                     tau31_eff_ps=665000, tau_rep_ps=100000) for k in ks])
    fit = ps.fit_pulsed_q(windows, qs, 100000)
    assert fit["converged"]
    assert fit["tau23_eff_ps"] == pytest.approx(153000, rel=1e-3)
    assert fit["tau31_eff_ps"] == pytest.approx(665000, rel=1e-3)


def test_io_round_trip(tmp_path):
    acq = ps.simulate(mode="cw", duration_ps=10_000_000, seed=9, tau12_ps=5000.0,
                      tau21_ps=1600.0, efficiency=0.8)
    text = tmp_path / "acq.txt"
    binary = tmp_path / "acq.bin"
    ps.save_acquisition(acq, str(text))
    ps.save_acquisition(acq, str(binary))
    back_t = ps.load_acquisition(str(text))
    back_b = ps.load_acquisition(str(binary))
    assert np.array_equal(back_t.times, acq.times)
    assert np.array_equal(back_b.times, acq.times)
    assert np.array_equal(back_t.channels, back_b.channels)
    assert back_t.seed == 9


def test_errors_map_to_python_exceptions():
    series = ps.TimestampSeries(np.array([], dtype=np.uint64), 1000)
    with pytest.raises(ps.DataError):
        ps.mandel_q(series, 100)
    with pytest.raises(ps.ConfigError):
        ps.simulate(mode="nope", duration_ps=10, seed=1, tau12_ps=1.0, tau21_ps=1.0)
