import math
import statistics

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from borf.approximation import (
    AlphabetSpec,
    NormalizationParams,
    approximate,
    complete_case_stats,
    gaussian_breakpoints,
    inverse_normal_cdf,
    normalize,
    pla_segment,
    quantize,
    segment_edges,
)
from borf.transform import BorfConfig, signal_sigma
from borf.windowing import ConfigurationError, WindowConfig, windowize

from .oracles import plain_sax

finite = st.floats(-1e3, 1e3, allow_nan=False)


def zscore_oracle(values):
    valid = [v for v in values if not math.isnan(v)]
    mu, sd = statistics.fmean(valid), statistics.pstdev(valid)
    return [v if math.isnan(v) else (v - mu) / sd for v in values]


class TestNormalize:
    def test_constant_field_thresholded(self):
        out = normalize([3, 3, 3, 3], NormalizationParams(0.15, 1.0))
        assert out.tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_standardization(self):
        out = normalize([0, 2, 4, 6], NormalizationParams(0.15, math.sqrt(5)))
        np.testing.assert_allclose(out, zscore_oracle([0, 2, 4, 6]), atol=1e-12)
        np.testing.assert_allclose(out, [-1.3416, -0.4472, 0.4472, 1.3416], atol=1e-4)

    def test_complete_case(self):
        vals = [0, math.nan, 4, 6]
        out = normalize(vals, NormalizationParams(0.1, 3.0))
        assert np.isnan(out[1])
        np.testing.assert_allclose(out[[0, 2, 3]], np.array(zscore_oracle(vals))[[0, 2, 3]], atol=1e-12)
        np.testing.assert_allclose(out[[0, 2, 3]], [-1.3363, 0.2673, 1.0690], atol=1e-4)

    def test_all_missing_left_as_is(self):
        out = normalize([math.nan, math.nan], NormalizationParams(0.5, 1.0))
        assert np.isnan(out).all() and out.shape == (2,)

    @pytest.mark.parametrize("sigma_x", [0.0, math.nan])
    def test_degenerate_signal_std_flattens(self, sigma_x):
        out = normalize([1.0, math.nan, 5.0], NormalizationParams(0.0, sigma_x))
        assert out[0] == 0.0 and out[2] == 0.0 and np.isnan(out[1])

    def test_receptive_field_round_trip(self):
        f = windowize([1.0, 5.0, 2.0, 8.0], WindowConfig(3, 1, 1))[1]
        out = normalize(f, NormalizationParams(0.0, 1.0))
        assert out.start == 2 and out.dilation == 1

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=2, max_size=40), st.floats(0.01, 100))
    def test_unit_moments(self, values, sigma_x):
        assume(np.std(values) > 1e-6 * max(1.0, np.max(np.abs(values))))
        out = normalize(values, NormalizationParams(0.0, sigma_x))
        assert abs(out.mean()) < 1e-9
        assert abs(out.std() - 1.0) < 1e-9

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=2, max_size=40), st.floats(0, 1), st.floats(0.01, 100))
    def test_threshold_gives_exact_zeros(self, values, beta, sigma_x):
        _, sd, _ = complete_case_stats(values)
        out = normalize(values, NormalizationParams(beta, sigma_x))
        if sd / sigma_x < beta:
            assert np.all(out == 0.0)

    def test_invalid_beta(self):
        with pytest.raises(ConfigurationError):
            NormalizationParams(1.5, 1.0)


class TestSegments:
    @pytest.mark.parametrize(
        "w, l, expected", [(8, 2, [0, 4, 8]), (10, 3, [0, 3, 6, 10]), (8, 1, [0, 8])]
    )
    def test_examples(self, w, l, expected):
        assert segment_edges(w, l) == expected

    def test_partition_for_all_small(self):
        for w in range(1, 40):
            for l in range(1, w + 1):
                e = segment_edges(w, l)
                sizes = np.diff(e)
                assert e[0] == 0 and e[-1] == w and len(e) == l + 1
                assert sizes.min() >= 1 and sizes.max() - sizes.min() <= 1

    def test_word_longer_than_window(self):
        with pytest.raises(ConfigurationError):
            segment_edges(4, 5)


class TestPLA:
    def test_exact_line(self):
        s = pla_segment([1, 2, 3], [0, 1, 2])
        assert (s.mean, s.slope, s.valid_count) == (2.0, 1.0, 3)

    def test_single_valid(self):
        s = pla_segment([5], [7])
        assert (s.mean, s.slope) == (5.0, 0.0)

    def test_all_missing(self):
        s = pla_segment([math.nan, math.nan], [0, 1])
        assert math.isnan(s.mean) and math.isnan(s.slope) and s.valid_count == 0

    def test_complete_case_least_squares(self):
        s = pla_segment([2, math.nan, 4], [0, 1, 2])
        slope, _ = np.polyfit([0, 2], [2, 4], 1)
        assert s.mean == 3.0 and s.slope == pytest.approx(slope, abs=1e-12) and s.slope == 1.0

    def test_matches_polyfit(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 20))
            t = np.sort(rng.choice(100, size=n, replace=False)).astype(float)
            v = rng.normal(size=n)
            s = pla_segment(v, t)
            assert s.slope == pytest.approx(np.polyfit(t, v, 1)[0], rel=1e-9, abs=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.one_of(finite, st.just(math.nan)), min_size=1, max_size=20), st.integers(-1000, 1000))
    def test_time_shift_invariance(self, values, shift):
        t = list(range(len(values)))
        a = pla_segment(values, t)
        b = pla_segment(values, [x + shift for x in t])
        assert a.valid_count == b.valid_count
        if a.valid_count == 0:
            assert math.isnan(b.slope)
        else:
            assert a.mean == b.mean
            assert b.slope == pytest.approx(a.slope, rel=1e-9, abs=1e-9)


class TestBreakpoints:
    def test_examples(self):
        assert gaussian_breakpoints(2, 1.0) == [0.0]
        np.testing.assert_allclose(gaussian_breakpoints(3, 1.0), [-0.43073, 0.43073], atol=1e-5)
        sigma = math.sqrt(0.03 / 8)
        np.testing.assert_allclose(
            gaussian_breakpoints(3, sigma), norm.ppf([1 / 3, 2 / 3]) * sigma, atol=1e-10
        )
        np.testing.assert_allclose(gaussian_breakpoints(3, sigma), [-0.026376, 0.026376], atol=1e-6)
        assert gaussian_breakpoints(1, 1.0) == []

    def test_against_scipy(self):
        for a in range(2, 33):
            np.testing.assert_allclose(
                gaussian_breakpoints(a), norm.ppf(np.arange(1, a) / a), rtol=0, atol=1e-8
            )

    def test_inverse_cdf_accuracy(self):
        p = np.concatenate([np.linspace(1e-6, 1 - 1e-6, 4001), [1e-9, 0.02425, 0.5, 1 - 0.02425]])
        ours = np.array([inverse_normal_cdf(x) for x in p])
        np.testing.assert_allclose(ours, norm.ppf(p), rtol=0, atol=1e-8)

    def test_symmetry(self):
        for a in range(1, 40):
            bp = gaussian_breakpoints(a, 0.37)
            assert bp == sorted(bp)
            for i in range(len(bp)):
                assert bp[i] == -bp[len(bp) - 1 - i]

    def test_zero_alphabet(self):
        with pytest.raises(ConfigurationError):
            gaussian_breakpoints(0)


class TestQuantize:
    def test_examples(self):
        assert quantize(-0.5, [-0.43073, 0.43073]) == 0
        assert quantize(0.0, [0.0]) == 1
        assert quantize(math.nan, [0.0]) is None

    def test_counts_breakpoints_at_or_below(self, rng):
        bp = sorted(rng.normal(size=6).tolist())
        for v in rng.normal(size=200).tolist() + bp:
            assert quantize(v, bp) == sum(b <= v for b in bp)


class TestApproximate:
    def test_example(self):
        alpha = AlphabetSpec.build(2, 1, 4, 1)
        w = approximate([-1.3416, -0.4472, 0.4472, 1.3416], 2, alpha)
        assert w.symbols == ((0, 0), (1, 0))

    def test_all_missing(self):
        alpha = AlphabetSpec.build(2, 3, 6, 1)
        assert approximate([math.nan] * 6, 3, alpha).symbols == (None, None, None)

    def test_prefix(self):
        alpha = AlphabetSpec.build(3, 2, 4, 1)
        w = approximate([0.0, 1.0, 2.0, 3.0], 2, alpha, config_id=4, signal_id=2)
        assert (w.config_id, w.signal_id) == (4, 2)

    def test_alphabet_size(self):
        alpha = AlphabetSpec.build(3, 2, 4, 2)
        assert alpha.size == 7 and len(alpha.mean_breakpoints) == 2 and len(alpha.slope_breakpoints) == 1

    def test_sax_reduction(self, rng):
        for _ in range(200):
            w = int(rng.integers(2, 33))
            l = int(rng.integers(1, min(w, 8) + 1))
            a = int(rng.integers(2, 9))
            x = rng.normal(size=w)
            alpha = AlphabetSpec.build(a, 1, w, 1)
            z = normalize(x, NormalizationParams(0.0, 1.0))
            word = approximate(z, l, alpha)
            assert [e[0] for e in word.symbols] == plain_sax(x.tolist(), l, norm.ppf(np.arange(1, a) / a))
            assert all(e[1] == 0 for e in word.symbols)

    def test_entry_set_bounded(self, rng):
        alpha = AlphabetSpec.build(3, 2, 8, 2)
        seen = set()
        for _ in range(2000):
            x = rng.normal(size=8) * rng.choice([0.001, 1, 100])
            x[rng.random(8) < 0.3] = np.nan
            z = normalize(x, NormalizationParams(0.1, 1.0))
            seen.update(approximate(z, 4, alpha, dilation=2).symbols)
        assert len(seen) <= alpha.size

    @settings(max_examples=150, deadline=None)
    @given(
        st.lists(st.floats(-100, 100, allow_nan=False), min_size=4, max_size=24),
        st.integers(-20, 20),
        st.integers(1, 4),
    )
    def test_scale_invariance_powers_of_two(self, values, exp, l):
        c = 2.0**exp
        alpha = AlphabetSpec.build(3, 3, len(values), 1)
        sx = complete_case_stats(values)[1]
        base = approximate(normalize(values, NormalizationParams(0.15, sx)), l, alpha)
        scaled_vals = [v * c for v in values]
        scaled = approximate(normalize(scaled_vals, NormalizationParams(0.15, sx * c)), l, alpha)
        assert base == scaled

    def test_scale_invariance_generic(self, rng):
        checked = 0
        for _ in range(300):
            w = int(rng.integers(4, 20))
            x = rng.normal(size=w)
            c = float(rng.uniform(0.01, 100))
            alpha = AlphabetSpec.build(3, 3, w, 1)
            a = approximate(normalize(x, NormalizationParams(0.15, 1.0)), 2, alpha)
            b = approximate(normalize(x * c, NormalizationParams(0.15, c)), 2, alpha)
            # skip fields with a statistic within rounding distance of a breakpoint
            z = normalize(x, NormalizationParams(0.15, 1.0))
            segs = [pla_segment(z[lo:hi], np.arange(lo, hi)) for lo, hi in zip(segment_edges(w, 2)[:-1], segment_edges(w, 2)[1:])]
            near = any(
                min(abs(s.mean - b_) for b_ in alpha.mean_breakpoints) < 1e-9
                or min(abs(s.slope - b_) for b_ in alpha.slope_breakpoints) < 1e-9
                for s in segs
            )
            if not near:
                assert a == b
                checked += 1
        assert checked > 250


def test_kernel_matches_scalar_pipeline(backend, rng):
    """The encoder kernels reproduce normalize+approximate, field by field."""
    for _ in range(60):
        m = int(rng.integers(8, 60))
        x = rng.normal(size=m).cumsum()
        x[rng.random(m) < 0.15] = np.nan
        w = int(rng.integers(2, 9))
        d = int(rng.integers(1, 4))
        s = int(rng.integers(1, 3))
        l = int(rng.integers(1, w + 1))
        cfg = BorfConfig(0, w, d, s, l, int(rng.integers(2, 5)), int(rng.integers(1, 4)), float(rng.uniform(0, 0.5)))
        sx = signal_sigma(x)
        assert sx == complete_case_stats(x.tolist())[1] or (math.isnan(sx))
        codes = cfg.encode(x, sx)
        fields = windowize(x, WindowConfig(w, d, s))
        assert len(codes) == len(fields)
        for code, f in zip(codes.tolist(), fields):
            word = approximate(normalize(f, NormalizationParams(cfg.beta, sx)), l, cfg.alphabet)
            assert word.code(cfg.alphabet) == code
