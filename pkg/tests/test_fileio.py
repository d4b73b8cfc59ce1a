import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qmifilter import fileio

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=finite))
def test_matrix_round_trip_is_exact(M):
    assert np.array_equal(fileio.parse_matrix(fileio.format_matrix(M)), M)


def test_matrix_format_and_empty_columns(tmp_path):
    assert fileio.format_matrix([[1.0, 0.5]]) == "1,2\n1,0.5\n"
    assert fileio.parse_matrix("2,0\n").shape == (2, 0)
    fileio.write_matrix(tmp_path / "a" / "m.csv", np.eye(2))
    assert np.array_equal(fileio.read_matrix(tmp_path / "a" / "m.csv"), np.eye(2))
    assert not list((tmp_path / "a").glob("*.tmp"))


@pytest.mark.parametrize("text", ["", "x,y\n1\n", "2,2\n1,2\n", "1,2\n1,2,3\n"])
def test_malformed_matrix(text):
    with pytest.raises(fileio.FormatError):
        fileio.parse_matrix(text)


def test_config_grammar():
    text = "# scenario\n\ndata.N = 10\nprior.beta=0.1\nname = example two\nsystem.A = [[0.5, 0], [0, 0.5]]\ndata.N = 12\n"
    cfg = fileio.parse_config(text)
    assert cfg == {"data.N": 12, "prior.beta": 0.1, "name": "example two", "system.A": [[0.5, 0], [0, 0.5]]}
    assert fileio.parse_config(fileio.format_config(cfg)) == cfg


@pytest.mark.parametrize("text", ["novalue\n", " = 3\n"])
def test_config_errors(text):
    with pytest.raises(fileio.FormatError):
        fileio.parse_config(text)
