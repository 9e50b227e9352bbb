import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import ks_2samp

from nopo_xy.analytics import RingSpec, bessel_ratio, relative_phase_pdf_approx, relative_phase_pdf_exact
from nopo_xy.core import PhaseConfig, chain_graph, ring_graph, wrap_phase, xy_energies
from nopo_xy.errors import DataError, SpecError
from nopo_xy.estimation import open_chain_draw, relative_phases, sample_von_mises
from nopo_xy.mcmc import (
    McmcConfig,
    SiteOrder,
    distribution_distance,
    metropolis_sweep,
    run_chain,
    run_chains,
    sample_chain,
)


def make_config(beta=1.0, **overrides):
    values = {"proposal_width": 1.0, "n_sweeps": 1000, "thin": 1, "seed": 5, "burn_in": 100}
    values.update(overrides)
    return McmcConfig(beta=beta, **values)


@pytest.mark.parametrize(
    "overrides",
    [
        {"proposal_width": 0.0},
        {"proposal_width": 4.0},
        {"thin": 0},
        {"n_sweeps": 0},
        {"burn_in": 1000},
    ],
)
def test_config_validation(overrides):
    with pytest.raises(SpecError):
        make_config(**overrides)
    with pytest.raises(SpecError):
        make_config(beta=-1.0)


def test_default_burn_in_depends_on_temperature():
    assert make_config(burn_in=None).burn_in_for(64) == 640
    assert make_config(beta=31.0, burn_in=None).burn_in_for(64) == 6400
    assert make_config(burn_in=7).burn_in_for(64) == 7


def test_infinite_temperature_accepts_every_move(rng, ring8):
    config, rate = metropolis_sweep(PhaseConfig.uniform(8, rng), ring8, make_config(beta=0.0), rng)
    assert rate == 1.0
    assert config.n_spins == 8


def test_tiny_proposals_are_almost_always_accepted(rng, ring8):
    start = PhaseConfig.uniform(8, rng)
    config, rate = metropolis_sweep(start, ring8, make_config(proposal_width=1e-6), rng)
    assert rate >= 0.99
    assert np.max(np.abs(wrap_phase(config.theta - start.theta))) <= 1e-6 + 1e-12


def test_sweep_rejects_mismatched_graph(rng, ring8):
    with pytest.raises(SpecError):
        metropolis_sweep(PhaseConfig.aligned(5), ring8, make_config(), rng)


def test_chains_are_reproducible(ring8):
    config = make_config(n_sweeps=500, thin=5)
    first, again = run_chain(config, ring8), run_chain(config, ring8)
    assert np.array_equal(first.samples, again.samples)
    assert first.n_samples == 80
    assert first.burn_in == 100
    other = run_chain(make_config(n_sweeps=500, thin=5, seed=6), ring8)
    assert not np.array_equal(first.samples, other.samples)
    assert len(sample_chain(config, ring8)) == 80


def test_random_order_chains_are_reproducible(ring8):
    config = make_config(n_sweeps=300, order="random")
    assert config.order is SiteOrder.RANDOM
    assert np.array_equal(run_chain(config, ring8).samples, run_chain(config, ring8).samples)


def test_chain_burn_in_must_leave_samples(ring8):
    with pytest.raises(SpecError):
        run_chain(make_config(burn_in=None, n_sweeps=50), ring8)


def test_acceptance_falls_with_proposal_width():
    graph = ring_graph(32)
    rates = [
        run_chain(make_config(beta=2.0, proposal_width=width, n_sweeps=600), graph).acceptance_rate
        for width in (0.2, 0.8, 2.0, math.pi)
    ]
    assert all(later < earlier for earlier, later in zip(rates, rates[1:]))


def test_width_tuning_targets_forty_percent():
    graph = ring_graph(64)
    config = make_config(beta=31.0, burn_in=None, n_sweeps=6400 + 2000, thin=10, adapt_width=True)
    chain = run_chain(config, graph, initial=PhaseConfig.aligned(64))
    assert 0.3 <= chain.acceptance_rate <= 0.5
    assert chain.proposal_width < 1.0


def test_run_chains_splits_seeds_and_matches_in_parallel(ring8):
    config = make_config(n_sweeps=300)
    serial = run_chains(config, ring8, n_chains=3)
    parallel = run_chains(config, ring8, n_chains=3, workers=2)
    assert len({chain.seed for chain in serial}) == 3
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.samples, b.samples)
    with pytest.raises(SpecError):
        run_chains(config, ring8, n_chains=0)


@pytest.mark.slow
def test_two_spin_chain_samples_the_von_mises_law():
    beta = 2.0
    chain = run_chain(make_config(beta=beta, n_sweeps=600_000 + 1000, burn_in=1000, thin=3), chain_graph(2))
    rel = wrap_phase(chain.samples[:, 1] - chain.samples[:, 0])
    report = distribution_distance(rel, pdf=lambda x: relative_phase_pdf_approx(x, beta))
    assert report.tv < 0.025


@pytest.mark.slow
def test_ring_histogram_matches_the_exact_density_bin_by_bin():
    graph = ring_graph(64)
    spec = RingSpec(64, 1.0)
    chain = run_chain(make_config(n_sweeps=20_000 + 640, burn_in=640, thin=10), graph)
    rel = relative_phases(chain.samples).reshape(-1)
    edges = np.linspace(-math.pi, math.pi, 37)
    counts, _ = np.histogram(rel, bins=edges)
    expected = np.array(
        [quad(lambda x: relative_phase_pdf_exact(x, spec), lo, hi)[0] for lo, hi in zip(edges[:-1], edges[1:])]
    )
    observed = counts / rel.size
    std_error = np.sqrt(expected * (1 - expected) / rel.size)
    assert np.all(np.abs(observed - expected) < 4.5 * std_error)


@pytest.mark.slow
def test_site_order_does_not_change_the_distribution():
    graph = ring_graph(16)
    sequential = run_chain(make_config(beta=2.0, n_sweeps=50_000, burn_in=160, thin=50), graph)
    shuffled = run_chain(make_config(beta=2.0, n_sweeps=50_000, burn_in=160, thin=50, order="random"), graph)
    result = ks_2samp(
        relative_phases(sequential.samples).reshape(-1), relative_phases(shuffled.samples).reshape(-1)
    )
    assert result.pvalue > 0.01


@pytest.mark.slow
def test_large_ring_energy_per_spin_matches_the_bessel_ratio(rng):
    graph = ring_graph(256)
    beta = 5.0
    chain = run_chain(
        make_config(beta=beta, n_sweeps=2560 + 10_000, burn_in=2560, thin=5, adapt_width=True),
        graph,
        initial=open_chain_draw(256, beta, rng),
    )
    per_spin = xy_energies(chain.samples, graph) / 256
    assert per_spin.mean() == pytest.approx(-bessel_ratio(beta), abs=5e-3)


def test_distance_of_identical_samples_is_zero(rng):
    samples = rng.uniform(-math.pi, math.pi, 2000)
    report = distribution_distance(samples, samples)
    assert report.tv == 0.0
    assert report.ks == 0.0


def test_distance_input_checks(rng):
    samples = rng.uniform(-math.pi, math.pi, 2000)
    with pytest.raises(DataError):
        distribution_distance(samples[:500], samples)
    with pytest.raises(SpecError):
        distribution_distance(samples)
    with pytest.raises(SpecError):
        distribution_distance(samples, samples, pdf=lambda x: np.full_like(x, 1 / (2 * math.pi)))


def test_distance_from_uniform_to_a_sharp_peak(rng):
    beta = 31.0
    uniform = rng.uniform(-math.pi, math.pi, 100_000)
    edges = np.linspace(-math.pi, math.pi, 37)
    peak = np.array(
        [quad(lambda x: relative_phase_pdf_approx(x, beta), lo, hi)[0] for lo, hi in zip(edges[:-1], edges[1:])]
    )
    expected = 0.5 * np.abs(1 / 36 - peak / peak.sum()).sum()
    report = distribution_distance(uniform, pdf=lambda x: relative_phase_pdf_approx(x, beta))
    assert report.tv == pytest.approx(expected, abs=0.01)
    assert report.p_value < 1e-6


def test_metropolis_and_von_mises_draws_are_close(rng):
    beta = 5.0
    chain = run_chain(make_config(beta=beta, n_sweeps=40_000, burn_in=100, thin=2), chain_graph(2))
    rel = wrap_phase(chain.samples[:, 1] - chain.samples[:, 0])
    report = distribution_distance(rel, sample_von_mises(beta, 20_000, rng))
    assert report.tv < 0.05
