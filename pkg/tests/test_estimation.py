import math

import numpy as np
import pytest

from nopo_xy.analytics import bessel_ratio
from nopo_xy.core import PhaseConfig, ring_graph, wrap_phase
from nopo_xy.errors import DataError, NumericalError, SpecError
from nopo_xy.estimation import (
    BetaEstimate,
    BetaMethod,
    DecayCurve,
    align_to_coupling,
    besselratio_inverse,
    collect_relative_phases,
    convergence_time,
    decay_curve,
    estimate_beta,
    fit_diffusion,
    mean_energy_of_samples,
    open_chain_draw,
    photon_fluctuation_diagnostics,
    relative_phases,
    sample_von_mises,
)
from nopo_xy.network import TrajectoryRecord


def make_record(phases, *, times=None, photons=None, seed=0):
    phases = np.asarray(phases, dtype=float)
    if times is None:
        times = np.arange(phases.shape[0], dtype=float)
    return TrajectoryRecord(np.asarray(times, dtype=float), phases, seed, "digest", photons)


def make_curve(values, times=None):
    values = np.asarray(values, dtype=float)
    if times is None:
        times = np.arange(values.size, dtype=float)
    return DecayCurve(np.asarray(times, dtype=float), values, np.full(values.size, 100), np.zeros(values.size))


def make_estimate(beta, std_error=0.1):
    return BetaEstimate(beta, std_error, 1000, BetaMethod.MLE, 0.0)


def test_relative_phases_close_the_ring():
    rel = relative_phases(PhaseConfig([0.0, 0.1, 0.3]))
    assert np.allclose(rel, [0.1, 0.2, -0.3])
    stacked = relative_phases(np.array([[0.0, 3.0, -3.0]] * 2))
    assert stacked.shape == (2, 3)
    assert np.allclose(stacked[0], [3.0, -6.0 + 2 * math.pi, 3.0])


@pytest.mark.parametrize("beta", [0.1, 1.0, 5.0, 31.0, 100.0])
def test_bessel_ratio_inverse(beta):
    assert besselratio_inverse(bessel_ratio(beta)) == pytest.approx(beta, rel=1e-8)


def test_bessel_ratio_inverse_domain():
    assert besselratio_inverse(0.0) == 0.0
    with pytest.raises(SpecError):
        besselratio_inverse(1.0)
    with pytest.raises(SpecError):
        besselratio_inverse(-0.1)


@pytest.mark.parametrize("beta", [2.8, 5.7, 15.0, 31.0])
@pytest.mark.parametrize("method", [BetaMethod.MLE, BetaMethod.HISTOGRAM_FIT])
def test_estimators_recover_the_concentration(rng, beta, method):
    samples = sample_von_mises(beta, 100_000, rng)
    estimate = estimate_beta(samples, method)
    assert estimate.method is method
    assert estimate.n_samples == 100_000
    assert abs(estimate.beta_eff - beta) < 3 * estimate.std_error
    assert abs(estimate.mean_direction) < 0.05


def test_uniform_samples_give_a_small_concentration(rng):
    estimate = estimate_beta(rng.uniform(-math.pi, math.pi, 100_000))
    assert estimate.beta_eff < 0.05


def test_estimator_input_checks():
    with pytest.raises(DataError):
        estimate_beta(np.zeros(5))
    with pytest.raises(NumericalError, match="degenerate"):
        estimate_beta(np.full(100, 0.2))
    with pytest.raises(ValueError):
        estimate_beta(np.zeros(100), method="moments")


def test_sample_von_mises_stays_on_the_circle(rng):
    for beta in (0.0, 0.5, 50.0):
        draws = sample_von_mises(beta, 1000, rng)
        assert draws.shape == (1000,)
        assert np.all(draws >= -math.pi) and np.all(draws < math.pi)
    with pytest.raises(SpecError):
        sample_von_mises(-1.0, 10, rng)


def test_fit_diffusion_recovers_an_exact_exponential():
    times = np.linspace(0.0, 1.0, 11)
    fit = fit_diffusion(make_curve(np.exp(-2.0 * times), times))
    assert fit.d_theta == pytest.approx(2.0)
    assert fit.std_error == pytest.approx(0.0, abs=1e-12)
    assert fit.n_points == 10


def test_fit_diffusion_stops_at_the_noise_floor():
    values = [1.0, math.exp(-1.0), math.exp(-2.0), 0.05, 0.2]
    fit = fit_diffusion(make_curve(values))
    assert fit.n_points == 2
    assert fit.d_theta == pytest.approx(1.0)


def test_fit_diffusion_input_checks():
    with pytest.raises(DataError):
        fit_diffusion(make_curve([1.0, 0.5]))
    with pytest.raises(DataError):
        fit_diffusion(make_curve([1.0, 0.05, 0.01]))


def test_decay_curve_of_a_frozen_ensemble_is_flat():
    phases = np.tile(np.linspace(-1.0, 1.0, 6), (4, 1))
    curve = decay_curve([make_record(phases), make_record(phases + 0.3)])
    assert np.allclose(curve.mean_cosine, 1.0)
    assert curve.n_samples.tolist() == [12, 12, 12, 12]


def test_decay_curve_input_checks():
    phases = np.zeros((3, 4))
    with pytest.raises(DataError):
        decay_curve([])
    with pytest.raises(DataError):
        decay_curve([make_record(phases, times=[1.0, 2.0, 3.0])])
    with pytest.raises(DataError):
        decay_curve([make_record(phases), make_record(phases, times=[0.0, 1.0, 5.0])])
    with pytest.raises(DataError):
        decay_curve([make_record(phases[:1])])


def test_collect_relative_phases_and_energies():
    aligned = make_record(np.zeros((2, 8)), times=[0.0, 1e-3])
    rel = collect_relative_phases([aligned, aligned], 1e-3)
    assert rel.shape == (16,)
    assert np.all(rel == 0.0)
    energy = mean_energy_of_samples([aligned, aligned], ring_graph(8), 1e-3)
    assert energy.mean == pytest.approx(-8.0)
    assert energy.std_dev == 0.0
    assert energy.n_samples == 2
    with pytest.raises(DataError):
        collect_relative_phases([aligned], 5e-3)
    with pytest.raises(DataError):
        collect_relative_phases([], 0.0)


def test_photon_diagnostics():
    photons = np.array([[4.0, 4.0, 4.0, 4.0], [1.0, 9.0, 1.0, 9.0]])
    record = make_record(np.zeros((2, 4)), photons=photons)
    uniform = photon_fluctuation_diagnostics([record], gamma_inj=2.0, diffusion_d=8.0, at_time=0.0)
    assert uniform.delta == pytest.approx(0.0)
    assert uniform.mean_photons == pytest.approx(4.0)
    assert uniform.beta_correction == pytest.approx(1.0)
    spread = photon_fluctuation_diagnostics([record], gamma_inj=2.0, diffusion_d=8.0, at_time=1.0)
    expected = np.sqrt(photons[1] / 5.0).std()
    assert spread.delta == pytest.approx(expected)
    assert spread.effective_j_spread == pytest.approx(2 * expected)
    assert spread.beta_correction == pytest.approx(2.0 * 5.0 / 8.0)
    assert photon_fluctuation_diagnostics([record], 2.0, 0.0).beta_correction == math.inf
    with pytest.raises(DataError, match="no photon data in trajectory 0"):
        photon_fluctuation_diagnostics([make_record(np.zeros((2, 4)))], 2.0, 8.0)


def test_convergence_time_is_start_of_final_run():
    times = [1e-3, 1e-2, 1e-1, 1.0, 10.0]
    estimates = [make_estimate(b) for b in (1.0, 3.0, 4.9, 5.05, 4.95)]
    assert convergence_time(times, estimates, 5.0) == pytest.approx(1e-1)
    drifting = [make_estimate(b) for b in (5.0, 5.0, 4.0, 5.0, 4.0)]
    assert convergence_time(times, drifting, 5.0) is None
    assert convergence_time(times, drifting, 5.0, rel_tol=0.25) == pytest.approx(1e-3)
    with pytest.raises(SpecError):
        convergence_time(times[:2], estimates, 5.0)


def test_pooled_photon_diagnostics_skip_the_initial_snapshot():
    # hand-set equal photon numbers at t = 0, noisy ones afterwards
    photons = np.array([[4.0, 4.0, 4.0, 4.0], [1.0, 9.0, 1.0, 9.0], [9.0, 1.0, 9.0, 1.0]])
    record = make_record(np.zeros((3, 4)), times=[0.0, 1.0, 2.0], photons=photons)
    pooled = photon_fluctuation_diagnostics([record], gamma_inj=2.0, diffusion_d=8.0)
    expected = np.sqrt(photons[1:].reshape(-1) / 5.0).std()
    assert pooled.mean_photons == pytest.approx(5.0)
    assert pooled.delta == pytest.approx(expected)
    only_initial = make_record(np.zeros((1, 4)), times=[0.0], photons=photons[:1])
    assert photon_fluctuation_diagnostics([only_initial], 2.0, 8.0).delta == pytest.approx(0.0)


def test_antiferromagnetic_relative_phases_are_shifted_by_pi(rng):
    draws = sample_von_mises(4.0, 50_000, rng)
    flipped = wrap_phase(draws + math.pi)
    assert np.array_equal(align_to_coupling(draws, 1.0), draws)
    aligned = align_to_coupling(flipped, -2.0)
    assert np.all((aligned >= -math.pi) & (aligned < math.pi))
    assert np.allclose(np.cos(aligned), np.cos(draws))
    assert estimate_beta(aligned).beta_eff == pytest.approx(4.0, rel=0.05)
    assert abs(estimate_beta(aligned).mean_direction) < 0.05


def test_open_chain_draw_has_independent_von_mises_bonds(rng):
    config = open_chain_draw(40_001, 5.0, rng)
    assert config.theta[0] == 0.0
    bonds = relative_phases(config)[:-1]
    assert estimate_beta(bonds).beta_eff == pytest.approx(5.0, rel=0.05)
    assert abs(np.corrcoef(np.sin(bonds[:-1]), np.sin(bonds[1:]))[0, 1]) < 0.03
    with pytest.raises(SpecError):
        open_chain_draw(0, 5.0, rng)
