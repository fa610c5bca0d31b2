"""Generator statistics, labeling rules, and estimator behavior."""

import numpy as np
import pytest
from scipy import stats

from rfexperts import channel
from rfexperts.errors import (
    InsufficientDataError,
    ParameterError,
    UnsupportedAttributeError,
)

from conftest import bessel_j0


def rayleigh_cdf(x):
    return 1.0 - np.exp(-np.asarray(x) ** 2)


class TestMagnitudeFeatures:
    def test_pythagorean_modulus(self):
        series = channel.ComplexSeries(samples=np.array([3 + 4j]))
        assert channel.magnitude_features(series).tolist() == [5.0]

    def test_zero_and_unit(self):
        series = channel.ComplexSeries(samples=np.array([0 + 0j, 1 + 0j]))
        assert channel.magnitude_features(series).tolist() == [0.0, 1.0]

    def test_nonnegative_and_length_preserved(self):
        series = channel.gen_rayleigh(64, 0.1, 5)
        mags = channel.magnitude_features(series)
        assert mags.shape == (64,)
        assert np.all(mags >= 0)


class TestRayleighGenerator:
    def test_single_sample_zero_mean_over_seeds(self):
        draws = np.array(
            [channel.gen_rayleigh(1, 0.0, seed).samples[0] for seed in range(4000)]
        )
        assert abs(draws.mean()) < 0.05

    def test_mean_power_near_unity(self):
        series = channel.gen_rayleigh(10**4, 0.05, 7)
        power = np.mean(np.abs(series.samples) ** 2)
        assert 0.95 <= power <= 1.05

    def test_magnitude_distribution_ks(self):
        series = channel.gen_rayleigh(10**4, 0.05, 7)
        result = stats.kstest(np.abs(series.samples), rayleigh_cdf)
        assert result.pvalue > 0.01

    def test_autocorrelation_tracks_bessel(self):
        series = channel.gen_rayleigh(10**4, 0.01, 3)
        expected = bessel_j0(np.array([2 * np.pi * 0.01 * 10]))[0]
        assert expected == pytest.approx(0.9037, abs=1e-3)
        assert channel.autocorrelation(series, 10).real == pytest.approx(
            expected, abs=0.05
        )

    def test_parameter_validation(self):
        with pytest.raises(ParameterError):
            channel.gen_rayleigh(0, 0.1, 1)
        with pytest.raises(ParameterError):
            channel.gen_rayleigh(16, 0.5, 1)
        with pytest.raises(ParameterError):
            channel.gen_rayleigh(16, -0.1, 1)


class TestRicianGenerator:
    def test_zero_k_degenerates_to_rayleigh(self):
        plain = channel.gen_rayleigh(512, 0.1, 42)
        rician = channel.gen_rician(512, 0.0, 0.1, 42)
        assert np.array_equal(plain.samples, rician.samples)

    def test_moment_estimate_recovers_k10(self):
        series = channel.gen_rician(10**4, 10.0, 0.02, 11)
        assert 8.0 <= channel.estimate_k_factor(series) <= 12.0

    def test_huge_k_limit_is_unit_magnitude(self):
        series = channel.gen_rician(1000, 1e6, 0.02, 5)
        assert np.max(np.abs(np.abs(series.samples) - 1.0)) < 1e-2

    def test_negative_k_rejected(self):
        with pytest.raises(ParameterError):
            channel.gen_rician(16, -1.0, 0.1, 1)


class TestKFactorEstimator:
    def test_constant_series_hits_cap(self):
        series = channel.ComplexSeries(samples=np.ones(1000, dtype=complex))
        assert channel.estimate_k_factor(series) == channel.K_ESTIMATE_CAP

    def test_rayleigh_estimates_near_zero(self):
        series = channel.gen_rayleigh(10**4, 0.05, 13)
        assert channel.estimate_k_factor(series) < 0.2

    def test_short_series_rejected(self):
        series = channel.ComplexSeries(samples=np.ones(99, dtype=complex))
        with pytest.raises(InsufficientDataError):
            channel.estimate_k_factor(series)


class TestAutocorrelation:
    def test_lag_zero_is_exactly_one(self):
        series = channel.gen_rayleigh(256, 0.2, 9)
        assert channel.autocorrelation(series, 0) == 1.0 + 0.0j

    def test_white_noise_decorrelates(self):
        rng = np.random.default_rng(8)
        white = (rng.standard_normal(10**4) + 1j * rng.standard_normal(10**4))
        white /= np.sqrt(2.0)
        series = channel.ComplexSeries(samples=white)
        assert abs(channel.autocorrelation(series, 50)) < 0.05

    def test_lag_bounds(self):
        series = channel.gen_rayleigh(64, 0.1, 1)
        with pytest.raises(ParameterError):
            channel.autocorrelation(series, 64)
        with pytest.raises(ParameterError):
            channel.autocorrelation(series, -1)


class TestLabeling:
    def test_strong_los_fast_scene(self):
        spec = channel.SceneSpec(k_factor=10.0, doppler_norm=0.1, seed=1)
        assert channel.label_scene(spec) == {
            "detect_los": 1,
            "detect_high_doppler": 1,
            "detect_rayleigh": 0,
            "detect_rician_k10": 1,
        }

    def test_static_rayleigh_scene(self):
        spec = channel.SceneSpec(k_factor=0.0, doppler_norm=0.001, seed=1)
        assert channel.label_scene(spec) == {
            "detect_los": 0,
            "detect_high_doppler": 0,
            "detect_rayleigh": 1,
            "detect_rician_k10": 0,
        }

    def test_thresholds_are_inclusive(self):
        spec = channel.SceneSpec(k_factor=2.0, doppler_norm=0.05, seed=1)
        labels = channel.label_scene(spec)
        assert labels["detect_los"] == 1
        assert labels["detect_high_doppler"] == 1
        edge = channel.SceneSpec(k_factor=8.0, doppler_norm=0.01, seed=1)
        assert channel.label_scene(edge)["detect_rician_k10"] == 1

    def test_unknown_attribute(self):
        spec = channel.SceneSpec(k_factor=0.0, doppler_norm=0.01, seed=1)
        with pytest.raises(UnsupportedAttributeError):
            channel.label_scene(spec, ["detect_path_loss"])


class TestSceneSynthesis:
    def test_deterministic_bytes(self):
        spec = channel.SceneSpec(k_factor=10.0, doppler_norm=0.12, seed=77)
        first = channel.synth_scene(spec)
        second = channel.synth_scene(spec)
        assert np.array_equal(first[0], second[0])
        assert first[1] == second[1]

    def test_feature_length_follows_spec(self):
        spec = channel.SceneSpec(k_factor=0.0, doppler_norm=0.2, seed=3, n=64)
        features, _, _ = channel.synth_scene(spec)
        assert features.shape == (64,)

    def test_sampler_positive_rates_balanced(self):
        specs = channel.sample_scene_specs(1000, seed=5)
        counts = {name: 0 for name in channel.ATTRIBUTES}
        for spec in specs:
            for name, label in channel.label_scene(spec).items():
                counts[name] += label
        for name, count in counts.items():
            assert 0.2 <= count / 1000 <= 0.8, name


class TestStatisticalInvariants:
    @pytest.mark.parametrize("k_factor", [0.0, 2.0, 10.0])
    @pytest.mark.parametrize("doppler", [0.02, 0.05, 0.2])
    def test_power_normalization(self, k_factor, doppler):
        series = channel.gen_rician(10**4, k_factor, doppler, 123)
        power = float(np.mean(np.abs(series.samples) ** 2))
        assert 0.9 <= power <= 1.1

    @pytest.mark.parametrize("k_factor", [5.0, 10.0])
    def test_k_recovery_within_20_percent(self, k_factor):
        series = channel.gen_rician(10**4, k_factor, 0.02, 21)
        estimate = channel.estimate_k_factor(series)
        assert 0.8 * k_factor <= estimate <= 1.2 * k_factor

    @pytest.mark.parametrize("doppler", [0.01, 0.05])
    def test_doppler_autocorrelation_rmse(self, doppler):
        series = channel.gen_rayleigh(10**4, doppler, 2)
        lags = np.arange(21)
        empirical = np.array(
            [channel.autocorrelation(series, int(lag)).real for lag in lags]
        )
        reference = bessel_j0(2 * np.pi * doppler * lags)
        rmse = np.sqrt(np.mean((empirical - reference) ** 2))
        assert rmse <= 0.05

    def test_generator_determinism(self):
        a = channel.gen_rician(256, 4.0, 0.07, 99)
        b = channel.gen_rician(256, 4.0, 0.07, 99)
        assert np.array_equal(a.samples, b.samples)
