import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from amdm.signal import (
    AccumulationSpec,
    DemodMethod,
    TimeSeries,
    colored_noise,
    delayed_superposition,
    demodulate,
    read_csv,
    sample_exponential_frequencies,
    synth_accumulated,
    synth_beat_pair,
    write_csv,
)
from amdm.spectral import analyze, slope_of

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
signals = arrays(np.float64, st.integers(2, 400), elements=finite)


def _fft_power(x, rate):
    """Independent oracle: one-sided |FFT|^2 of the mean-removed series."""
    x = np.asarray(x) - np.mean(x)
    p = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(x.size, 1.0 / rate)
    return f[1:], p[1:]


# --------------------------------------------------------------------- TimeSeries


class TestTimeSeries:
    def test_read_only_and_duration(self):
        ts = TimeSeries([1.0, 2.0, 3.0, 4.0], 2.0, origin=1.0)
        assert ts.duration == 2.0
        np.testing.assert_allclose(ts.times, [1.0, 1.5, 2.0, 2.5])
        with pytest.raises(ValueError):
            ts.samples[0] = 5.0

    @pytest.mark.parametrize("rate", [0.0, -1.0, float("inf"), float("nan")])
    def test_bad_rate(self, rate):
        with pytest.raises(ValueError, match="rate"):
            TimeSeries([1.0], rate)

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            TimeSeries([], 1.0)
        with pytest.raises(ValueError, match="finite"):
            TimeSeries([1.0, np.nan], 1.0)

    def test_slice_time(self):
        ts = TimeSeries(np.arange(10.0), 10.0)
        sub = ts.slice_time(0.2, 0.5)
        np.testing.assert_array_equal(sub.samples, [2.0, 3.0, 4.0])
        assert sub.origin == pytest.approx(0.2)


# ------------------------------------------------------------------- beat pair


class TestBeatPair:
    def test_first_sample_is_zero(self):
        assert synth_beat_pair(1.0, 100.0, 1.0, 1000.0).samples[0] == 0.0

    def test_raw_peaks_at_sidebands(self):
        ts = synth_beat_pair(1.0, 100.0, 10.0, 1000.0)
        f, p = _fft_power(ts.samples, ts.rate)
        top = f[np.argsort(p)[-2:]]
        assert sorted(top) == [99.0, 101.0]
        # nothing else comes close
        rest = np.delete(p, np.argsort(p)[-2:])
        assert rest.max() < 1e-12 * p.max()

    def test_squared_peaks_at_twice_lambda(self):
        ts = synth_beat_pair(1.0, 100.0, 10.0, 1000.0)
        f, p = _fft_power(ts.samples ** 2, ts.rate)
        low = f < 50
        assert f[low][np.argmax(p[low])] == 2.0

    @given(lam=st.floats(0.1, 20.0), omega=st.floats(30.0, 200.0))
    def test_beat_identity(self, lam, omega):
        rate = 1000.0
        ts = synth_beat_pair(lam, omega, 0.5, rate)
        t = np.arange(len(ts)) / rate
        env = 2 * np.cos(2 * np.pi * lam * t) * np.sin(2 * np.pi * omega * t)
        np.testing.assert_allclose(ts.samples, env, atol=1e-10 * 2)

    def test_aliasing_rejected(self):
        with pytest.raises(ValueError, match="alias"):
            synth_beat_pair(1.0, 500.0, 1.0, 1000.0)

    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_nonpositive_lambda_rejected(self, lam):
        with pytest.raises(ValueError, match="lambda"):
            synth_beat_pair(lam, 100.0, 1.0, 1000.0)


# ---------------------------------------------------------- accumulated sines


class TestAccumulation:
    def test_zero_scale_is_pure_sine(self):
        ts = synth_accumulated(AccumulationSpec(50.0, 0.0, 1, seed=3), 1.0, 1000.0)
        t = np.arange(1000) / 1000.0
        np.testing.assert_allclose(ts.samples, np.sin(2 * np.pi * 50.0 * t), atol=1e-12)

    def test_forced_xi_zero(self):
        f = sample_exponential_frequencies(AccumulationSpec(100.0, 0.1, 1), xi=[0.0])
        assert f[0] == pytest.approx(110.0)

    def test_offsets_log_uniform(self):
        spec = AccumulationSpec(100.0, 0.01, 100_000, xi_max=10.0, seed=11)
        offsets = sample_exponential_frequencies(spec) - 100.0
        lo, hi = 100.0 * 0.01 * math.exp(-10.0), 100.0 * 0.01
        edges = np.geomspace(lo, hi, 21)
        counts, _ = np.histogram(offsets, edges)
        expected = offsets.size / 20
        assert np.all(np.abs(counts - expected) < 3 * math.sqrt(expected))

    def test_density_inverse_in_offset(self):
        # P(delta) * delta is constant for a log-uniform variable
        spec = AccumulationSpec(1.0, 1.0, 200_000, xi_max=6.0, seed=2)
        d = sample_exponential_frequencies(spec) - 1.0
        edges = np.geomspace(math.exp(-6.0), 1.0, 13)
        counts, _ = np.histogram(d, edges)
        density = counts / np.diff(edges)
        centres = np.sqrt(edges[1:] * edges[:-1])
        prod = density * centres
        assert np.std(prod) / np.mean(prod) < 0.05

    def test_deterministic_per_seed(self):
        spec = AccumulationSpec(100.0, 0.1, 50, seed=7)
        a = synth_accumulated(spec, 1.0, 1000.0)
        b = synth_accumulated(spec, 1.0, 1000.0)
        np.testing.assert_array_equal(a.samples, b.samples)
        c = synth_accumulated(AccumulationSpec(100.0, 0.1, 50, seed=8), 1.0, 1000.0)
        assert not np.array_equal(a.samples, c.samples)

    def test_aliasing_rejected(self):
        with pytest.raises(ValueError, match="alias"):
            synth_accumulated(AccumulationSpec(400.0, 0.5, 10), 1.0, 1000.0)

    @pytest.mark.parametrize("kw", [{"base_freq": 0.0}, {"count": 0}, {"xi_max": 0.0}])
    def test_spec_invariants(self, kw):
        args = dict(base_freq=100.0, scale=0.1, count=10)
        args.update(kw)
        with pytest.raises(ValueError):
            AccumulationSpec(**args)


@pytest.fixture(scope="module")
def narrow_accumulation():
    return synth_accumulated(AccumulationSpec(100.0, 0.01, 1000, xi_max=10.0, seed=0), 60.0, 1000.0)


def test_narrow_accumulation_raw_flat(narrow_accumulation):
    assert abs(slope_of(narrow_accumulation, "identity", None, 10.0)) <= 0.3


@pytest.mark.xfail(strict=True, reason="with xi_max=10 most offsets beat slower than a 60 s record; "
                                       "they leak as a trend and steepen the fit to about -1.5")
def test_narrow_accumulation_squared_two_decades(narrow_accumulation):
    fit = analyze(narrow_accumulation, "square", None, 2.0).fit
    assert fit.slope == pytest.approx(-1.0, abs=0.3) and fit.decades() >= 2


# ---------------------------------------------------------------- demodulation


class TestDemodulate:
    def test_parse_and_label(self):
        assert DemodMethod.parse("nth_power:3") == DemodMethod("nth_power", n=3)
        assert DemodMethod.parse("block_energy:50").block_len == 50
        assert DemodMethod.parse("raw").kind == "identity"
        assert DemodMethod.parse("anti_thresh_below_mean:literal").literal
        for text in ("square", "nth_power:4", "block_energy:100", "anti_thresh_below_mean:literal"):
            assert DemodMethod.parse(text).label() == text
        with pytest.raises(ValueError, match="unknown"):
            DemodMethod.parse("cube")
        with pytest.raises(ValueError, match="no argument"):
            DemodMethod.parse("abs:2")

    def test_square_of_constant(self):
        out = demodulate(TimeSeries(np.full(8, 3.0), 1.0), "square")
        np.testing.assert_array_equal(out.samples, 9.0)

    def test_cube_trig_identity(self):
        t = np.arange(4000) / 1000.0
        s = np.sin(2 * np.pi * t)  # peaks at 1, so the unit-peak rescale is a no-op
        out = demodulate(TimeSeries(s, 1000.0), DemodMethod("nth_power", n=3)).samples
        exact = (3 * np.sin(2 * np.pi * t) - np.sin(6 * np.pi * t)) / 4
        np.testing.assert_allclose(out, exact, atol=1e-12)

    def test_nth_power_normalises_peak(self):
        out = demodulate(TimeSeries([0.0, 1e3, -2e3], 1.0), DemodMethod("nth_power", n=9))
        assert np.max(np.abs(out.samples)) == pytest.approx(1.0)

    def test_block_energy_rate(self):
        ts = TimeSeries(np.ones(44100), 44100.0)
        out = demodulate(ts, "block_energy:100")
        assert out.rate == 441.0
        assert len(out) == 441

    def test_block_energy_drops_partial_block(self):
        out = demodulate(TimeSeries(np.ones(250), 1000.0), "block_energy:100")
        np.testing.assert_array_equal(out.samples, [100.0, 100.0])

    def test_block_energy_too_long(self):
        with pytest.raises(ValueError, match="block_len"):
            demodulate(TimeSeries(np.ones(50), 1000.0), "block_energy:100")

    def test_rectifiers_and_abs(self):
        ts = TimeSeries([-2.0, -0.5, 0.0, 0.5, 2.0], 1.0)
        np.testing.assert_array_equal(demodulate(ts, "abs").samples, [2, 0.5, 0, 0.5, 2])
        np.testing.assert_array_equal(demodulate(ts, "rect_pos").samples, [0, 0, 0, 0.5, 2])
        np.testing.assert_array_equal(demodulate(ts, "rect_neg").samples, [-2, -0.5, 0, 0, 0])

    def test_threshold_family(self):
        ts = TimeSeries([-3.0, -1.0, 0.5, 1.0, 2.5], 1.0)  # mu = mean|x| = 1.6
        np.testing.assert_array_equal(demodulate(ts, "timing").samples, [0, 0, 0, 0, 1])
        np.testing.assert_array_equal(demodulate(ts, "thresh_above_mean").samples, [0, 0, 0, 0, 2.5])
        np.testing.assert_array_equal(demodulate(ts, "anti_thresh_below_mean").samples,
                                      [0, 0, 0.5, 1.0, 0])
        literal = DemodMethod("anti_thresh_below_mean", literal=True)
        np.testing.assert_array_equal(demodulate(ts, literal).samples, [-3.0, -1.0, 0.5, 1.0, 0])

    @given(signals)
    def test_identity_is_identity(self, x):
        ts = TimeSeries(x, 100.0)
        assert demodulate(ts, "identity") is ts

    @given(arrays(np.float64, st.integers(1, 20).map(lambda k: 10 * k), elements=finite))
    def test_block_energy_conserves_energy(self, x):
        out = demodulate(TimeSeries(x, 1000.0), "block_energy:10")
        assert out.samples.sum() == pytest.approx(np.sum(x * x), rel=1e-12, abs=1e-9)

    @given(signals)
    def test_timing_binary_and_gates_threshold(self, x):
        ts = TimeSeries(x, 10.0)
        timing = demodulate(ts, "timing").samples
        thresh = demodulate(ts, "thresh_above_mean").samples
        assert set(np.unique(timing)) <= {0.0, 1.0}
        assert np.all(thresh[timing == 0] == 0)

    @given(signals)
    def test_demod_preserves_length_and_rate(self, x):
        ts = TimeSeries(x, 10.0)
        for kind in ("square", "abs", "rect_pos", "rect_neg", "timing", "anti_thresh_below_mean"):
            out = demodulate(ts, kind)
            assert len(out) == len(ts) and out.rate == ts.rate


class TestParity:
    """Even powers of an AM carrier expose the envelope at baseband, odd powers do not."""

    @pytest.mark.parametrize("odd,even", [(1, 2), (3, 4), (5, 6), (3, 2)])
    def test_even_power_dominates_baseband(self, odd, even):
        rate, omega = 1000.0, 100.0
        t = np.arange(20000) / rate
        env = 1.0 + 0.5 * np.sin(2 * np.pi * 0.7 * t) + 0.3 * np.sin(2 * np.pi * 2.3 * t)
        g = TimeSeries(env * np.sin(2 * np.pi * omega * t), rate)

        def baseband(n):
            y = demodulate(g, DemodMethod("nth_power", n=n)).samples
            f, p = _fft_power(y, rate)
            return p[f < omega / 4].sum()

        assert 10 * np.log10(baseband(even) / baseband(odd)) >= 20.0


# ------------------------------------------------------------ delays and noise


class TestDelayedSuperposition:
    def test_full_period_doubles(self):
        rate = 1000.0
        x = np.sin(2 * np.pi * 10.0 * np.arange(2000) / rate)
        out = delayed_superposition(TimeSeries(x, rate), 0.1)
        np.testing.assert_allclose(out.samples, 2 * x[100:], atol=1e-12)
        assert len(out) == 1900 and out.origin == pytest.approx(0.1)

    def test_half_period_cancels(self):
        rate = 1000.0
        x = np.sin(2 * np.pi * 10.0 * np.arange(2000) / rate)
        out = delayed_superposition(TimeSeries(x, rate), 0.05)
        assert np.max(np.abs(out.samples)) < 1e-12

    @pytest.mark.parametrize("tau", [0.0, -0.1, 2.0, 5.0])
    def test_bad_delay(self, tau):
        with pytest.raises(ValueError, match="delay"):
            delayed_superposition(TimeSeries(np.zeros(2000), 1000.0), tau)


def test_colored_noise_unit_variance_and_seeded():
    a = colored_noise(4096, 100.0, 1.0, seed=4)
    b = colored_noise(4096, 100.0, 1.0, seed=4)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert a.samples.std() == pytest.approx(1.0)


# ------------------------------------------------------------------------ CSV


def test_csv_round_trip(tmp_path):
    ts = synth_beat_pair(1.0, 100.0, 1.0, 1000.0)
    path = write_csv(ts, tmp_path / "s.csv", {"y": ts.samples ** 2})
    back = read_csv(path)
    np.testing.assert_array_equal(back.samples, ts.samples)
    assert back.rate == 1000.0
    np.testing.assert_array_equal(read_csv(path, "y").samples, ts.samples ** 2)
    with open(path) as fh:
        assert fh.readline().strip() == "t,x,y"


def test_csv_missing_column(tmp_path):
    path = write_csv(TimeSeries([1.0, 2.0], 1.0), tmp_path / "s.csv")
    with pytest.raises(ValueError, match="expected columns"):
        read_csv(path, "r")


def test_csv_column_length_mismatch(tmp_path):
    with pytest.raises(ValueError, match="rows"):
        write_csv(TimeSeries([1.0, 2.0], 1.0), tmp_path / "s.csv", {"y": [1.0]})
