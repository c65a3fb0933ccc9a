import numpy as np
import pytest

from tekws.raster import SpikeRaster
from tekws.tde import (TdeParams, TdeState, calibrate_w_trig, simulate_tde,
                       simulate_tde_layer, tde_response_curve, tde_step)


@pytest.fixture(scope="module")
def calibrated():
    return calibrate_w_trig(TdeParams(), target_count=10)


def test_quiescent_without_input():
    params = TdeParams()
    n = 200
    out, count = simulate_tde(params, np.zeros(n, bool), np.zeros(n, bool))
    assert count == 0


def test_state_decays_below_relative_floor():
    params = TdeParams(w_trig=50.0)
    state = TdeState()
    state, _ = tde_step(state, params, 1.0, True, False)
    state, _ = tde_step(state, params, 1.0, False, True)
    peak_gain, peak_current = state.gain, abs(state.current)
    for _ in range(400):  # 400 ms >> every time constant
        state, _ = tde_step(state, params, 1.0, False, False)
    assert state.gain < 1e-9 * peak_gain
    assert abs(state.current) < 1e-9 * peak_current


def test_trigger_with_zero_gain_injects_nothing():
    params = TdeParams(w_trig=100.0)
    state, fired = tde_step(TdeState(), params, 1.0, False, True)
    assert state.current == 0.0
    assert state.v == 0.0
    assert not fired


def test_epsc_jump_closed_form():
    params = TdeParams(w_fac=1.3, w_trig=7.0)
    for delta_bins in (1, 2, 5, 12):
        state = TdeState()
        state, _ = tde_step(state, params, 1.0, True, False)
        for _ in range(delta_bins - 1):
            state, _ = tde_step(state, params, 1.0, False, False)
        before = state.current * np.exp(-1.0 / params.tau_trig)
        state, _ = tde_step(state, params, 1.0, False, True)
        jump = state.current - before
        expected = params.w_trig * params.w_fac * np.exp(-delta_bins / params.tau_fac)
        np.testing.assert_allclose(jump, expected, rtol=1e-12)


def test_fac_only_never_fires():
    params = TdeParams(w_trig=1e6)
    fac = np.ones(100, dtype=bool)
    out, count = simulate_tde(params, fac, np.zeros(100, bool))
    assert count == 0


def test_calibrated_pair_counts(calibrated):
    counts = tde_response_curve(calibrated, [1.0, 10.0])
    assert counts[0] == 10
    assert counts[1] < counts[0]


def test_trigger_before_fac_silent(calibrated):
    counts = tde_response_curve(calibrated, [-1.0, -5.0, -10.0])
    assert (counts == 0).all()


def test_response_curve_shape(calibrated):
    deltas = list(range(1, 21))
    counts = tde_response_curve(calibrated, deltas)
    assert (np.diff(counts) <= 0).all()
    zero = tde_response_curve(calibrated, [float(d) for d in range(-10, 0)])
    assert (zero == 0).all()
    at_zero = tde_response_curve(calibrated, [0.0])[0]
    assert at_zero == counts.max() or at_zero >= counts.max()


def test_non_multiple_delta_rejected(calibrated):
    with pytest.raises(ValueError, match="multiple"):
        tde_response_curve(calibrated, [1.5])


def test_doubling_w_trig_never_reduces_count(calibrated):
    from dataclasses import replace
    doubled = replace(calibrated, w_trig=2 * calibrated.w_trig)
    deltas = [float(d) for d in range(0, 16)]
    base = tde_response_curve(calibrated, deltas)
    more = tde_response_curve(doubled, deltas)
    assert (more >= base).all()


def test_length_mismatch_rejected():
    with pytest.raises(ValueError, match="equal length"):
        simulate_tde(TdeParams(), np.zeros(5, bool), np.zeros(6, bool))


def test_layer_matches_single_unit_simulation(calibrated):
    rng = np.random.default_rng(21)
    dense = rng.random((6, 120)) < 0.08
    raster = SpikeRaster.from_dense(dense)
    pairs = [(0, 1), (1, 0), (2, 5), (4, 3)]
    layer = simulate_tde_layer(calibrated, raster, pairs)
    for u, (fac, trig) in enumerate(pairs):
        out, _ = simulate_tde(calibrated, dense[fac], dense[trig])
        np.testing.assert_array_equal(layer.dense()[u], out)


def test_refractory_blocks_and_releases():
    from dataclasses import replace
    base = calibrate_w_trig(TdeParams(), target_count=10)
    refr = replace(base, refractory=5.0)
    burst, _ = tde_response_curve(base, [1.0]), None
    counts_refr = tde_response_curve(refr, [1.0])
    assert 1 <= counts_refr[0] < 10  # refractory thins the burst


def test_param_validation():
    with pytest.raises(ValueError, match="tau_fac"):
        TdeParams(tau_fac=0.0)
    with pytest.raises(ValueError, match="theta"):
        TdeParams(theta=0.0, v_reset=0.0)
