import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pushguide.errors import ModelValidityError
from pushguide.mot_rates import MotRateParams, outgoing_flux, steady_state_number, transfer_efficiency

rate = st.floats(min_value=0.0, max_value=1e12, allow_nan=False)
positive = st.floats(min_value=1e-3, max_value=1e3)


def test_number_is_loading_times_lifetime():
    tau = 1.7
    assert steady_state_number(MotRateParams(3.9e8, 1 / tau)) == pytest.approx(3.9e8 * tau, rel=1e-15)


def test_no_loading_no_atoms():
    assert steady_state_number(MotRateParams(0.0, 0.5)) == 0.0


def test_two_body_dominated_limit():
    p = MotRateParams(1e9, 1e-6, 0.0, two_body_rate=1e-9, density=1e12)
    assert steady_state_number(p) == pytest.approx(1e9 / (1e-9 * 1e12), rel=1e-5)


def test_zero_loss_is_an_error():
    with pytest.raises(ModelValidityError):
        steady_state_number(MotRateParams(1e8, 0.0))


def test_negative_parameters_rejected():
    with pytest.raises(ValueError):
        MotRateParams(1e8, -1.0)


@given(rate, rate, positive, positive, positive)
def test_number_monotone(l1, l2, g, gp, bn):
    lo, hi = sorted((l1, l2))
    assert steady_state_number(MotRateParams(lo, g, gp)) <= steady_state_number(MotRateParams(hi, g, gp))
    base = steady_state_number(MotRateParams(hi, g, gp))
    assert steady_state_number(MotRateParams(hi, g * 2, gp)) <= base
    assert steady_state_number(MotRateParams(hi, g, gp * 2)) <= base
    assert steady_state_number(MotRateParams(hi, g, gp, 1.0, bn)) <= base


def test_flux_without_background_loss():
    assert outgoing_flux(3.9e8, 0.0, 1e9) == 3.9e8


def test_flux_balance_is_zero():
    assert outgoing_flux(2e8, 0.5, 4e8) == 0.0


def test_negative_flux_clamped_with_warning():
    with pytest.warns(UserWarning, match="clamped"):
        assert outgoing_flux(1e8, 1.0, 2e8) == 0.0


def test_flux_rejects_negative_inputs():
    with pytest.raises(ValueError):
        outgoing_flux(-1.0, 0.1, 0.0)


def test_efficiency_unity():
    assert transfer_efficiency(3e8, 3e8) == 1.0


def test_efficiency_needs_positive_flux():
    with pytest.raises(ModelValidityError):
        transfer_efficiency(1e8, 0.0)


def test_efficiency_above_one_warns():
    with pytest.warns(UserWarning, match="inconsistent"):
        assert transfer_efficiency(2.0, 1.0) == 2.0


@given(st.floats(min_value=0, max_value=1), st.floats(min_value=1.0, max_value=1e12))
def test_efficiency_in_unit_interval(frac, l_out):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        eff = transfer_efficiency(frac * l_out, l_out)
    assert 0.0 <= eff <= 1.0


@pytest.mark.parametrize("quoted", [0.70, 0.50])
def test_quoted_efficiency_bookkeeping(quoted):
    l_out = 3.9e8
    assert transfer_efficiency(quoted * l_out, l_out) == pytest.approx(quoted, rel=1e-15)


def test_quoted_transfer_rate():
    # 70 % of a 3.9e8 atoms/s extracted flux is the quoted 2.7e8 atoms/s
    l_out = outgoing_flux(3.9e8, 0.0, 0.0)
    assert 0.70 * l_out == pytest.approx(2.7e8, rel=0.02)
    assert transfer_efficiency(2.7e8, l_out) == pytest.approx(0.70, abs=0.01)
