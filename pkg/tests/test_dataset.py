import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import TWO_STATE
from windkshmm import dataset
from windkshmm.errors import DataFormatError, InvalidInputError
from windkshmm.spectral import stationary_distribution


def write(path, rows, header="timestamp,wind_speed"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def test_load_two_rows(tmp_path):
    p = write(tmp_path / "t2028.csv", ["2007-01-01T00:00:00Z,5.5", "2007-01-01T01:00:00Z,6.25"])
    s = dataset.load_csv(p)
    assert len(s) == 2 and s.turbine_id == "t2028"
    np.testing.assert_array_equal(s.values, [5.5, 6.25])


def test_gap_error_names_timestamp(tmp_path):
    p = write(tmp_path / "g.csv", ["2007-01-01T00:00:00Z,5", "2007-01-01T03:00:00Z,6"])
    with pytest.raises(DataFormatError, match="2007-01-01T03:00:00Z"):
        dataset.load_csv(p)


def test_gap_forward_fill(tmp_path):
    p = write(tmp_path / "g.csv", ["2007-01-01T00:00:00Z,5", "2007-01-01T02:00:00Z,6"])
    s = dataset.load_csv(p, fill="forward-fill")
    np.testing.assert_array_equal(s.values, [5, 5, 6])
    p = write(tmp_path / "m.csv", ["2007-01-01T00:00:00Z,5", "2007-01-01T01:00:00Z,", "2007-01-01T02:00:00Z,7"])
    np.testing.assert_array_equal(dataset.load_csv(p, fill="forward-fill").values, [5, 5, 7])
    with pytest.raises(DataFormatError, match=":3:"):
        dataset.load_csv(p)


@pytest.mark.parametrize("rows, message", [
    (["2007-01-01T00:00:00Z,5", "2007-01-01T01:00:00Z,abc"], ":3: bad wind speed"),
    (["2007-01-01T00:00:00Z,5", "yesterday,4"], ":3: bad timestamp"),
    (["2007-01-01T00:00:00Z,-1"], "negative"),
    (["2007-01-01T00:00:00Z,5,7"], "expected 2 fields"),
    (["2007-01-01T01:00:00Z,5", "2007-01-01T00:00:00Z,5"], "hourly grid"),
])
def test_malformed_rows(tmp_path, rows, message):
    with pytest.raises(DataFormatError, match=message):
        dataset.load_csv(write(tmp_path / "bad.csv", rows))


def test_header_and_custom_columns(tmp_path):
    with pytest.raises(DataFormatError):
        dataset.load_csv(write(tmp_path / "h.csv", ["2007-01-01T00:00:00Z,5"], header="time,speed"))
    s = dataset.load_csv(write(tmp_path / "h.csv", ["2007-01-01T00:00:00Z,5"], header="time,speed"),
                         time_col="time", value_col="speed")
    assert s.values[0] == 5


def test_write_read_round_trip_bit_exact(tmp_path):
    s = dataset.synth_hmm_series(TWO_STATE, 200, seed=9, turbine_id="x")
    dataset.write_csv(s, tmp_path / "x.csv")
    back = dataset.load_csv(tmp_path / "x.csv")
    assert back.values.tobytes() == s.values.tobytes()
    np.testing.assert_array_equal(back.timestamps, s.timestamps)


def test_year_split_lengths():
    s = dataset.synth_hmm_series(TWO_STATE, 24 * 500, seed=0)
    spec = dataset.year_split(s)
    train, test = dataset.split(s, spec)
    assert len(train) == len(test) == 3000
    assert str(train.timestamps[0]) == "2007-01-01T00:00:00"
    assert str(train.timestamps[-1]) == "2007-05-05T23:00:00"
    assert str(test.timestamps[0]) == "2008-01-01T00:00:00"
    assert str(test.timestamps[-1]) == "2008-05-04T23:00:00"


def test_split_errors_and_partition():
    s = dataset.synth_hmm_series(TWO_STATE, 30, seed=0)
    with pytest.raises(InvalidInputError):
        dataset.SplitSpec(0, 10, 5, 10)
    with pytest.raises(InvalidInputError):
        dataset.split(s, dataset.SplitSpec(0, 10, 25, 10))
    a, b = dataset.split(s, dataset.SplitSpec(0, 12, 12, 18))
    np.testing.assert_array_equal(np.concatenate([a.values, b.values]), s.values)


def test_series_validation():
    ts = np.array(["2007-01-01T00", "2007-01-01T02"], dtype="datetime64[s]")
    with pytest.raises(InvalidInputError):
        dataset.WindSeries("a", ts, np.array([1.0, 2.0]))


def test_synth_examples():
    one = dataset.GaussianHmmSpec(np.array([[1.0]]), np.array([5.0]), np.array([0.0]))
    np.testing.assert_array_equal(dataset.synth_hmm_series(one, 20, seed=1).values, 5.0)
    a = dataset.synth_hmm_series(TWO_STATE, 100, seed=4)
    b = dataset.synth_hmm_series(TWO_STATE, 100, seed=4)
    assert a.values.tobytes() == b.values.tobytes()
    with pytest.raises(InvalidInputError):
        dataset.GaussianHmmSpec(np.array([[0.5, 0.4], [0.5, 0.5]]), np.zeros(2), np.ones(2))


def test_synth_occupancy_matches_stationary():
    states = dataset.sample_hidden_chain(TWO_STATE, 10**5, np.random.default_rng(0))
    occ = np.bincount(states, minlength=2) / states.size
    np.testing.assert_allclose(occ, stationary_distribution(TWO_STATE.transition), atol=0.01)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_synth_nonnegative(seed):
    assert np.all(dataset.synth_hmm_series(TWO_STATE, 50, seed).values >= 0)
