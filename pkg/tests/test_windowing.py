import itertools

import numpy as np
import pytest

from borf.windowing import ConfigurationError, WindowConfig, receptive_field_count, windowize


def brute_force_starts(m, w, d, s):
    return [j for j in range(0, m, s) if j + d * (w - 1) <= m - 1]


@pytest.mark.parametrize(
    "args, expected",
    [((5, 2, 1, 1), 4), ((5, 2, 2, 1), 3), ((16, 8, 2, 1), 2), ((3, 4, 1, 1), 0)],
)
def test_count_examples(args, expected):
    assert receptive_field_count(*args) == expected
    assert len(brute_force_starts(*args)) == expected


def test_windowize_examples():
    x = [1, 2, 3, 4, 5]
    assert [f.values.tolist() for f in windowize(x, WindowConfig(2, 1, 1))] == [[1, 2], [2, 3], [3, 4], [4, 5]]
    fields = windowize(x, WindowConfig(2, 2, 1))
    assert [f.values.tolist() for f in fields] == [[1, 3], [2, 4], [3, 5]]
    assert [f.start for f in fields] == [1, 2, 3]


def test_dilated_first_field_covers_odd_steps():
    fields = windowize(np.arange(1, 17, dtype=float), WindowConfig(8, 2, 1))
    assert fields[0].covered.tolist() == [1, 3, 5, 7, 9, 11, 13, 15]
    assert len(fields) == 2


def test_missing_values_preserved():
    fields = windowize([1.0, np.nan, 3.0], WindowConfig(2))
    assert np.isnan(fields[0].values[1]) and np.isnan(fields[1].values[0])


def test_sliding_window_reduction(rng):
    x = rng.normal(size=30)
    for w in (2, 5, 9):
        fields = windowize(x, WindowConfig(w))
        plain = [x[j : j + w] for j in range(len(x) - w + 1)]
        assert len(fields) == len(plain)
        for f, p in zip(fields, plain):
            np.testing.assert_array_equal(f.values, p)


def test_exhaustive_count_and_coverage():
    for m, w, d, s in itertools.product(range(0, 65), range(2, 10), range(1, 5), range(1, 4)):
        x = np.arange(1, m + 1, dtype=float)
        fields = windowize(x, WindowConfig(w, d, s))
        assert len(fields) == receptive_field_count(m, w, d, s) == len(brute_force_starts(m, w, d, s))
        for f in fields:
            cov = f.covered
            assert cov[0] >= 1 and cov[-1] <= m
            assert np.all(np.diff(cov) == d)
            np.testing.assert_array_equal(f.values, x[cov - 1])


@pytest.mark.parametrize("w, d, s", [(1, 1, 1), (4, 0, 1), (4, 1, 0)])
def test_invalid_config(w, d, s):
    with pytest.raises(ConfigurationError):
        WindowConfig(w, d, s)
