import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from windkshmm.errors import InsufficientDataError
from windkshmm.kshmm import ForecastDistribution
from windkshmm.switching import StabilityEnvelope, envelope, is_stable, kshmm_pst_forecast


def fd(mean, var, mode=4.1, converged=True):
    return ForecastDistribution(eta=np.ones(1), mean=mean, variance=var, mode=mode, mode_converged=converged)


def test_envelope_examples():
    env = envelope([1.0, 3.0])
    assert (env.min_x2, env.max_x2, env.var_x2) == (1.0, 3.0, 1.0)
    assert envelope([2.0, 2.0, 2.0]).var_x2 == 0.0
    with pytest.raises(InsufficientDataError):
        envelope([1.0])


@given(st.lists(st.floats(0, 50), min_size=2, max_size=40))
def test_envelope_two_pass_variance(x):
    mean = sum(x) / len(x)
    var = sum((v - mean) ** 2 for v in x) / len(x)
    env = envelope(x)
    assert env.min_x2 == min(x) and env.max_x2 == max(x)
    assert env.var_x2 == pytest.approx(var, rel=1e-9, abs=1e-12)


def test_stable_forecast_uses_mode():
    env = StabilityEnvelope(1.0, 10.0, 4.0)
    assert kshmm_pst_forecast(fd(5.0, 1.0, mode=4.1), 3.0, env) == (4.1, False)


def test_unstable_mean_uses_persistence():
    env = StabilityEnvelope(1.0, 10.0, 4.0)
    f = fd(11.0, 1.0)
    assert kshmm_pst_forecast(f, 3.0, env) == (3.0, True)
    assert f.stable is False


def test_upstream_failure_uses_persistence():
    assert kshmm_pst_forecast(None, 3.0, StabilityEnvelope(1.0, 10.0, 4.0)) == (3.0, True)


def test_nonconverged_mode_uses_persistence():
    assert kshmm_pst_forecast(fd(5.0, 1.0, converged=False), 3.0, StabilityEnvelope(1.0, 10.0, 4.0)) == (3.0, True)


def test_malformed_forecast_is_still_total():
    assert kshmm_pst_forecast(object(), 3.0, StabilityEnvelope(1.0, 10.0, 4.0)) == (3.0, True)


@given(st.floats(allow_nan=True, allow_infinity=True), st.floats(allow_nan=True, allow_infinity=True),
       st.floats(allow_nan=True, allow_infinity=True), st.booleans(), st.floats(0, 30))
def test_totality_and_output_bound(mean, var, mode, conv, last):
    env = StabilityEnvelope(1.0, 10.0, 4.0)
    value, switched = kshmm_pst_forecast(fd(mean, var, mode, conv), last, env)
    assert math.isfinite(value)
    assert value == (last if switched else mode)
