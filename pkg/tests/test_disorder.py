"""Tests for configuration sampling, selection rules, and Monte-Carlo averages."""

import numpy as np
import pytest

from cbs2atom.atom import AtomDriveParams
from cbs2atom.disorder import (
    BookkeepingError,
    ConfigSampler,
    monte_carlo_average,
    monte_carlo_spectra,
    select_surviving,
)
from cbs2atom.twoatom import (
    CROSSED_MONOMIAL,
    LADDER_MONOMIAL,
    assemble,
    fixed_config_spectrum,
)

DRIVE = AtomDriveParams(rabi=2.0, delta=0.0)


def small_sampler(seed=3, samples=1000):
    return ConfigSampler(x_start=200.0, periods=8, samples=samples, seed=seed)


# ---- surviving-term selection ----


def test_selection_requires_monomial_tags():
    with pytest.raises(BookkeepingError):
        select_surviving({"12": 1.0}, "ladder")
    with pytest.raises(BookkeepingError):
        select_surviving({("xx",): 1.0}, "ladder")


def test_selection_rejects_unknown_channel():
    with pytest.raises(ValueError):
        select_surviving({LADDER_MONOMIAL: 1.0}, "diagonal")


def test_net_distance_phase_terms_are_dropped():
    tagged = {("12", "12"): 5.0, ("21", "21"): 7.0, ("12",): 1.0, (): 2.0}
    assert select_surviving(tagged, "ladder") == {}
    assert select_surviving(tagged, "crossed") == {}


def test_ladder_keeps_the_balanced_pair():
    tagged = {LADDER_MONOMIAL: 3.0, CROSSED_MONOMIAL: 4.0}
    assert select_surviving(tagged, "ladder") == {LADDER_MONOMIAL: 3.0}


def test_crossed_keeps_double_forward_with_detection_phase():
    tagged = {LADDER_MONOMIAL: 3.0, CROSSED_MONOMIAL: 4.0}
    phase = np.exp(0.7j)
    out = select_surviving(tagged, "crossed", phase)
    assert out == {CROSSED_MONOMIAL: 4.0 * phase}


def test_selected_channels_are_configuration_invariant():
    # the per-coupling-power selected values must not depend on distance
    # or orientation at all: distance phases cancel within the balanced
    # monomials and the detection phase cancels the crossed laser phase
    nus = np.array([0.0, 1.7])
    reference = None
    for config, _ in zip(small_sampler(seed=11).configurations(), range(6)):
        gen = assemble(config, DRIVE)
        spec = fixed_config_spectrum(gen, nus)
        power = 4.0 * abs(config.coupling) ** 2
        phase = np.exp(1j * config.phase_difference)
        values = np.concatenate([
            select_surviving(spec.autocorrelation, "ladder")[LADDER_MONOMIAL],
            select_surviving(spec.exchange, "crossed", phase)[CROSSED_MONOMIAL],
            [select_surviving(spec.elastic_autocorrelation, "ladder")[LADDER_MONOMIAL]],
            [select_surviving(spec.elastic_exchange, "crossed", phase)[CROSSED_MONOMIAL]],
        ]) / power
        if reference is None:
            reference = values
        assert np.max(np.abs(values - reference)) < 1e-12 * np.max(np.abs(reference))


# ---- geometry sampler ----


def test_sampler_validates_window_and_size():
    with pytest.raises(ValueError):
        ConfigSampler(x_start=10.0)
    with pytest.raises(ValueError):
        ConfigSampler(periods=4)
    with pytest.raises(ValueError):
        ConfigSampler(samples=10)


def test_sampler_draws_inside_window_with_isotropic_orientations():
    sampler = small_sampler(seed=5)
    seps = []
    mean_dir = np.zeros(3)
    for config in sampler.configurations():
        seps.append(config.separation)
        mean_dir += (config.r1 - config.r2) / config.separation
    seps = np.array(seps)
    assert np.all(seps >= sampler.x_start) and np.all(seps <= sampler.x_stop)
    width = sampler.x_stop - sampler.x_start
    assert abs(seps.mean() - (sampler.x_start + width / 2)) < 3 * width / np.sqrt(12 * len(seps))
    assert np.max(np.abs(mean_dir / len(seps))) < 5 / np.sqrt(len(seps))


def test_sampler_is_deterministic_given_seed():
    a = [c.r1 for c in small_sampler(seed=9).configurations()]
    b = [c.r1 for c in small_sampler(seed=9).configurations()]
    assert np.array_equal(np.array(a), np.array(b))


# ---- scalar Monte-Carlo averaging ----


def test_constant_observable_is_exact_with_zero_error():
    result = monte_carlo_average(lambda config: 2.5, small_sampler())
    assert result.mean == 2.5
    assert result.stderr == 0.0
    assert result.samples == 1000


def test_double_forward_distance_phase_averages_to_zero():
    def observable(config):
        x = config.separation
        return np.exp(-2j * x) / x ** 2
    result = monte_carlo_average(observable, small_sampler(seed=2))
    assert abs(result.mean) <= 3 * result.stderr
    # and it is genuinely small compared with the coupling-power scale
    assert abs(result.mean) < 0.05 * small_sampler().coupling_power_mean


def test_coupling_power_sample_mean_matches_window_integral():
    sampler = small_sampler(seed=4)
    result = monte_carlo_average(lambda c: abs(c.coupling) ** 2, sampler)
    analytic = sampler.coupling_power_mean / 4.0
    assert abs(result.mean - analytic) <= 3 * result.stderr
    assert analytic == pytest.approx(9.0 / (4 * sampler.x_start ** 2), rel=0.3)


def test_normalized_average_divides_by_window_power():
    sampler = small_sampler()
    result = monte_carlo_average(lambda c: 1.0, sampler, normalize=True)
    assert result.mean == pytest.approx(1.0 / sampler.coupling_power_mean, rel=0, abs=0)


def test_disjoint_seeds_agree_within_combined_errors():
    def observable(config):
        return abs(config.coupling) ** 2 * config.separation
    first = monte_carlo_average(observable, small_sampler(seed=21))
    second = monte_carlo_average(observable, small_sampler(seed=22))
    combined = np.hypot(first.stderr, second.stderr)
    assert abs(first.mean - second.mean) <= 3 * combined


# ---- spectrum Monte Carlo vs analytic selection ----


def selected_prediction(nus):
    # selected values per coupling power are configuration independent,
    # so one configuration gives the exact analytic-selection prediction
    config = next(small_sampler().configurations())
    gen = assemble(config, DRIVE)
    spec = fixed_config_spectrum(gen, nus)
    power = 4.0 * abs(config.coupling) ** 2
    phase = np.exp(1j * config.phase_difference)
    return {
        "ladder": 2 * select_surviving(spec.autocorrelation, "ladder")[LADDER_MONOMIAL] / power,
        "crossed": 2 * select_surviving(spec.exchange, "crossed", phase)[CROSSED_MONOMIAL] / power,
        "elastic_ladder": 2 * select_surviving(
            spec.elastic_autocorrelation, "ladder")[LADDER_MONOMIAL] / power,
        "elastic_crossed": 2 * select_surviving(
            spec.elastic_exchange, "crossed", phase)[CROSSED_MONOMIAL] / power,
    }


def test_monte_carlo_spectra_match_analytic_selection():
    nus = np.array([0.0, 1.7])
    prediction = selected_prediction(nus)
    averaged = monte_carlo_spectra(DRIVE, small_sampler(seed=7), nus)
    for name, field in [("ladder", averaged.ladder),
                        ("crossed", averaged.crossed),
                        ("elastic_ladder", averaged.elastic_ladder),
                        ("elastic_crossed", averaged.elastic_crossed)]:
        deviation = np.abs(field.mean - prediction[name])
        assert np.all(deviation <= 3 * field.stderr + 1e-12), name


def test_phased_monomials_carry_the_sample_variance():
    # averaging only the surviving monomial gives a configuration-free
    # estimator; the error bars of the full estimator come entirely from
    # the phased monomials that average to zero
    nus = np.array([0.5])
    full = monte_carlo_spectra(DRIVE, small_sampler(seed=7), nus)

    def filtered(config):
        gen = assemble(config, DRIVE)
        spec = fixed_config_spectrum(gen, nus)
        power = 4.0 * abs(config.coupling) ** 2
        kept = select_surviving(spec.autocorrelation, "ladder")[LADDER_MONOMIAL]
        return 2.0 * kept[0] / power

    tight = monte_carlo_average(filtered, small_sampler(seed=7))
    assert tight.stderr < full.ladder.stderr[0] / 100
    assert abs(tight.mean - full.ladder.mean[0]) <= 3 * full.ladder.stderr[0]
