"""Configuration averaging over atomic positions.

Two routes to the ensemble average of the double-scattering signal:

* analytic selection — after averaging over interatomic distances (many
  optical periods) and orientations, only coupling monomials with zero
  net distance phase and zero net laser phase survive; `select_surviving`
  filters a tagged term collection down to the surviving monomial of a
  detection channel.
* brute-force sampling — `ConfigSampler` draws random two-atom
  geometries and `monte_carlo_average` / `monte_carlo_spectra` average
  fixed-configuration observables over them, with standard errors, for
  validating the analytic route.

Averaged spectra are normalized by the window mean of four times the
squared coupling strength, which puts them on the same scale as the
closed-form per-coupling-power expressions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cbs2atom.atom import AtomDriveParams
from cbs2atom.twoatom import (
    COUPLING_TAGS,
    CROSSED_MONOMIAL,
    LADDER_MONOMIAL,
    ScatteringConfig,
    assemble,
    fixed_config_spectrum,
)


class BookkeepingError(ValueError):
    """A term without a valid coupling-monomial tag entered the average."""


def _validate_monomial(key) -> tuple:
    if not isinstance(key, tuple) or not all(tag in COUPLING_TAGS for tag in key):
        raise BookkeepingError(f"untagged or mistagged term: {key!r}")
    return key


def select_surviving(tagged, channel: str, backscatter_phase: complex = 1.0) -> dict:
    """Keep only the coupling monomial that survives configuration averaging.

    ``tagged`` maps coupling-monomial tuples to values (scalars or
    arrays).  The ladder channel keeps the forward/backward pair with
    zero net distance phase; the crossed channel keeps the
    double-forward pair, whose value must be multiplied by the
    backscattering detection phase of the configuration (it cancels the
    monomial's internal laser phase, so the product is phase-free).
    All other monomials — in particular those carrying a net e^(-2ix)
    distance phase — average to zero and are dropped.
    """
    for key in tagged:
        _validate_monomial(key)
    if channel == "ladder":
        return {LADDER_MONOMIAL: tagged[LADDER_MONOMIAL]} if LADDER_MONOMIAL in tagged else {}
    if channel == "crossed":
        if CROSSED_MONOMIAL not in tagged:
            return {}
        return {CROSSED_MONOMIAL: tagged[CROSSED_MONOMIAL] * backscatter_phase}
    raise ValueError(f"unknown channel {channel!r}")


@dataclass(frozen=True)
class ConfigSampler:
    """Random two-atom geometries: distance window plus isotropic orientation.

    Distances are uniform on ``[x_start, x_start + 2 pi periods]`` (whole
    oscillation periods, so phased monomials cancel at the window level,
    not just statistically); orientations are uniform on the sphere; the
    laser propagates along z.
    """

    x_start: float = 200.0
    periods: int = 8
    samples: int = 10_000
    seed: int = 0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.x_start < 50.0:
            raise ValueError("distance window must start at x >= 50")
        if int(self.periods) != self.periods or self.periods < 8:
            raise ValueError("need at least 8 whole distance periods")
        if self.samples < 1_000:
            raise ValueError("need at least 1000 samples")

    @property
    def x_stop(self) -> float:
        return self.x_start + 2.0 * np.pi * self.periods

    @property
    def coupling_power_mean(self) -> float:
        """Window mean of 4|T|^2 = 9 gamma^2 / x^2, evaluated analytically."""
        width = self.x_stop - self.x_start
        return 9.0 * self.gamma ** 2 * (1.0 / self.x_start - 1.0 / self.x_stop) / width

    def configurations(self):
        rng = np.random.default_rng(self.seed)
        for _ in range(self.samples):
            x = rng.uniform(self.x_start, self.x_stop)
            direction = rng.standard_normal(3)
            while np.linalg.norm(direction) < 1e-8:
                direction = rng.standard_normal(3)
            yield ScatteringConfig.from_separation(
                x, gamma=self.gamma, direction=direction)


@dataclass(frozen=True)
class MonteCarloResult:
    mean: np.ndarray
    stderr: np.ndarray
    samples: int


def _reduce(values: np.ndarray, samples: int) -> MonteCarloResult:
    mean = values.mean(axis=0)
    if samples > 1:
        spread = np.sqrt(np.sum(np.abs(values - mean) ** 2, axis=0)
                         / (samples - 1) / samples)
    else:
        spread = np.zeros_like(np.abs(mean))
    return MonteCarloResult(mean=mean, stderr=spread, samples=samples)


def monte_carlo_average(observable, sampler: ConfigSampler, *,
                        normalize: bool = False) -> MonteCarloResult:
    """Sample mean and standard error of a per-configuration observable.

    With ``normalize`` the mean and error are divided by the analytic
    window mean of the coupling power 4|T|^2 (the common prefactor of
    all double-scattering quantities).
    """
    values = np.asarray([observable(config) for config in sampler.configurations()])
    result = _reduce(values, sampler.samples)
    if normalize:
        scale = sampler.coupling_power_mean
        return MonteCarloResult(mean=result.mean / scale,
                                stderr=result.stderr / scale,
                                samples=result.samples)
    return result


@dataclass(frozen=True)
class DisorderAveragedSpectra:
    """Monte-Carlo averages of the order-two detection channels.

    ``ladder``/``crossed`` are the averaged Laplace-image channels on the
    frequency grid (complex; densities follow by Re/pi), the elastic
    fields are the averaged stationary weights; everything is normalized
    by the window mean of 4|T|^2 and includes the both-atoms factor two
    and, for the crossed channel, the backscattering phase.
    """

    nu: np.ndarray
    ladder: MonteCarloResult
    crossed: MonteCarloResult
    elastic_ladder: MonteCarloResult
    elastic_crossed: MonteCarloResult


def _tagged_sum(tagged: dict):
    total = None
    for mono, value in tagged.items():
        _validate_monomial(mono)
        total = value if total is None else total + value
    if total is None:
        raise BookkeepingError("no tagged terms to average")
    return total


def monte_carlo_spectra(drive: AtomDriveParams, sampler: ConfigSampler,
                        nus) -> DisorderAveragedSpectra:
    """Average the full fixed-configuration order-two spectra over geometry.

    For every sampled configuration the tagged second-order spectra are
    evaluated exactly and summed over all six degree-two coupling
    monomials.  No selection by monomial type is applied — the
    surviving-term prediction is exactly what this estimator validates:
    the monomials carrying net distance or laser phases average to zero
    here, at the cost of dominating the sample variance.
    """
    nus = np.asarray(nus, dtype=float)
    ladder = np.zeros((sampler.samples, len(nus)), dtype=complex)
    crossed = np.zeros((sampler.samples, len(nus)), dtype=complex)
    el_ladder = np.zeros(sampler.samples, dtype=complex)
    el_crossed = np.zeros(sampler.samples, dtype=complex)
    for i, config in enumerate(sampler.configurations()):
        gen = assemble(config, drive)
        spectra = fixed_config_spectrum(gen, nus)
        phase = np.exp(1j * config.phase_difference)
        ladder[i] = 2.0 * _tagged_sum(spectra.autocorrelation)
        crossed[i] = 2.0 * phase * _tagged_sum(spectra.exchange)
        el_ladder[i] = 2.0 * _tagged_sum(spectra.elastic_autocorrelation)
        el_crossed[i] = 2.0 * phase * _tagged_sum(spectra.elastic_exchange)

    scale = sampler.coupling_power_mean

    def reduced(values):
        res = _reduce(values, sampler.samples)
        return MonteCarloResult(mean=res.mean / scale, stderr=res.stderr / scale,
                                samples=res.samples)

    return DisorderAveragedSpectra(
        nu=nus,
        ladder=reduced(ladder),
        crossed=reduced(crossed),
        elastic_ladder=reduced(el_ladder),
        elastic_crossed=reduced(el_crossed),
    )
