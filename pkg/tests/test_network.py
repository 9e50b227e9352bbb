import logging
import math

import numpy as np
import pytest

from nopo_xy.core import PhaseConfig, ring_graph, wrap_phase, xy_energies
from nopo_xy.errors import SpecError
from nopo_xy.estimation import photon_fluctuation_diagnostics, relative_phases
from nopo_xy.network import (
    EnsembleSpec,
    FullFieldSimulator,
    KuramotoParams,
    KuramotoSimulator,
    NetworkParams,
    SplitSimulator,
    TrajectoryRecord,
    default_time_step,
    ensemble_run,
    injection_rate_from_transmittance,
    phase_diffusion_from_noise,
    simulate_amplitude_phase,
    simulate_full_network,
    simulate_kuramoto,
    trajectory_seed,
    transmittance_for_injection_rate,
)
from nopo_xy.opo import OpoParams, steady_state_photon_number


def make_network(*, gamma_inj=0.0, diffusion_d=0.0, n_spins=8):
    opo = OpoParams.from_pump_ratio(2.0, gamma_s=1e3, gamma_i=1e5, gamma_p=1e5, kappa=1.0)
    return NetworkParams(opo, gamma_inj, diffusion_d, ring_graph(n_spins))


def test_injection_rate_and_transmittance_are_inverse():
    assert injection_rate_from_transmittance(0.25, 5e-6) == pytest.approx(2e5)
    assert transmittance_for_injection_rate(2e5, 5e-6) == pytest.approx(0.25)
    assert transmittance_for_injection_rate(13.6e3) == pytest.approx((0.5 * 13.6e3 * 5e-6) ** 2)
    with pytest.raises(SpecError):
        transmittance_for_injection_rate(1e6, 5e-6)
    with pytest.raises(SpecError):
        injection_rate_from_transmittance(1.5)


def test_phase_diffusion_grows_linearly_with_noise_power():
    assert phase_diffusion_from_noise(440.0, 1200.0, 2.0) == pytest.approx(2840.0)
    with pytest.raises(SpecError):
        phase_diffusion_from_noise(440.0, 1200.0, -1.0)


def test_default_time_step_follows_fastest_rate():
    assert default_time_step(1e3, 2.0, d_theta=100.0) == pytest.approx(1e-2 / 2e3)
    assert default_time_step(0.0, 2.0, d_theta=500.0) == pytest.approx(1e-2 / 500.0)
    with pytest.raises(SpecError):
        default_time_step(0.0, 2.0)


def test_trajectory_seeds_are_stable_and_distinct():
    seeds = [trajectory_seed(7, i) for i in range(100)]
    assert len(set(seeds)) == 100
    assert trajectory_seed(7, 3) == seeds[3]
    assert trajectory_seed(8, 3) != seeds[3]


def test_kuramoto_params_validate():
    with pytest.raises(SpecError):
        KuramotoParams(-1.0, 1.0, ring_graph(4))
    assert KuramotoParams(1.0, 0.0, ring_graph(4)).beta_set == math.inf
    assert KuramotoParams(13.6e3, 440.0, ring_graph(4)).beta_set == pytest.approx(30.909, rel=1e-4)


def test_kuramoto_run_is_reproducible(ring8):
    params = KuramotoParams(1.0, 0.5, ring8)
    first = simulate_kuramoto(params, None, 0.005, [0.0, 1.0, 2.0], seed=11)
    again = simulate_kuramoto(params, None, 0.005, [0.0, 1.0, 2.0], seed=11)
    other = simulate_kuramoto(params, None, 0.005, [0.0, 1.0, 2.0], seed=12)
    assert np.array_equal(first.phases, again.phases)
    assert not np.array_equal(first.phases, other.phases)
    assert first.params_digest == again.params_digest
    assert first.phases.shape == (3, 8)
    assert np.all(first.phases >= -math.pi) and np.all(first.phases < math.pi)


def test_kuramoto_without_coupling_or_noise_is_frozen(ring8):
    initial = PhaseConfig(np.linspace(-3.0, 3.0, 8))
    record = simulate_kuramoto(KuramotoParams(0.0, 0.0, ring8), initial, 0.01, [0.0, 5.0], seed=1)
    assert np.allclose(record.phases[-1], initial.theta)


def test_kuramoto_aligned_state_is_stationary_without_noise(ring8):
    initial = PhaseConfig.aligned(8, 0.4)
    record = simulate_kuramoto(KuramotoParams(10.0, 0.0, ring8), initial, 0.001, [1.0], seed=1)
    assert np.allclose(record.phases[0], 0.4)


def test_kuramoto_phase_diffusion_has_expected_spread():
    graph = ring_graph(400)
    d_theta = 2.0
    record = simulate_kuramoto(
        KuramotoParams(0.0, d_theta, graph), PhaseConfig.aligned(400), 0.001, [0.25], seed=5
    )
    # free diffusion over t gives variance D t per spin
    assert np.var(record.phases[0]) == pytest.approx(d_theta * 0.25, rel=0.2)


def test_simulation_rejects_unstable_step(ring8):
    params = KuramotoParams(1e3, 1.0, ring8)
    with pytest.raises(SpecError) as excinfo:
        simulate_kuramoto(params, None, 1e-3, [0.0, 1.0], seed=1)
    assert excinfo.value.field == "dt"


@pytest.mark.parametrize("times", [[], [1.0, 0.5], [-1.0, 1.0], [0.0, 0.0001]])
def test_simulation_rejects_bad_sample_times(ring8, times):
    with pytest.raises(SpecError):
        simulate_kuramoto(KuramotoParams(1.0, 1.0, ring8), None, 0.001, times, seed=1)


def test_trajectory_record_lookup():
    record = TrajectoryRecord(np.array([0.0, 1e-3, 2e-3]), np.zeros((3, 4)), seed=1, params_digest="x")
    assert record.index_of(1e-3) == 1
    assert record.index_of(1.5e-3) is None
    assert not record.has_photons
    assert len(record.snapshots) == 3
    with pytest.raises(SpecError):
        TrajectoryRecord(np.array([0.0]), np.zeros((2, 4)), seed=1, params_digest="x")


def test_network_params_derive_phase_diffusion():
    params = make_network(diffusion_d=250000.0)
    assert params.steady_photons == pytest.approx(250000.0)
    assert params.d_theta == pytest.approx(1.0)
    reduced = params.kuramoto_reduction()
    assert reduced.d_theta == pytest.approx(1.0)
    assert reduced.gamma_inj == 0.0


def test_full_field_rests_at_the_steady_state_without_noise():
    params = make_network()
    n_ss = params.steady_photons
    fields = math.sqrt(n_ss) * np.exp(1j * np.linspace(-2.0, 2.0, 8))
    record = simulate_full_network(params, fields, 5e-5, [0.0, 0.05], seed=3)
    assert record.has_photons
    assert np.allclose(record.photon_numbers[-1], n_ss, rtol=1e-6)
    assert np.allclose(record.phases[-1], np.angle(fields))


def test_split_model_rests_at_the_steady_state_without_noise():
    params = make_network()
    n_ss = params.steady_photons
    phases = PhaseConfig(np.linspace(-2.0, 2.0, 8))
    record = simulate_amplitude_phase(params, np.full(8, n_ss), phases, 5e-5, [0.05], seed=3)
    assert np.allclose(record.photon_numbers[0], n_ss, rtol=1e-6)
    assert np.allclose(record.phases[0], phases.theta)


def test_split_model_needs_both_initial_parts():
    params = make_network()
    with pytest.raises(SpecError):
        simulate_amplitude_phase(params, np.full(8, 1.0), None, 5e-5, [0.05], seed=3)


def test_split_model_rejects_non_positive_photon_numbers():
    params = make_network()
    with pytest.raises(SpecError):
        simulate_amplitude_phase(params, np.zeros(8), PhaseConfig.aligned(8), 5e-5, [0.05], seed=3)


def test_serial_and_parallel_ensembles_match(ring8):
    spec = EnsembleSpec(KuramotoSimulator(KuramotoParams(1.0, 0.5, ring8)), 6, 0.005, (0.0, 0.5, 1.0), 99)
    serial = ensemble_run(spec, workers=1)
    parallel = ensemble_run(spec, workers=2)
    assert [r.seed for r in serial] == [trajectory_seed(99, i) for i in range(6)]
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.phases, b.phases)


@pytest.mark.slow
def test_full_field_phase_noise_is_diffusion_over_photon_number():
    d_theta = 1.0
    params = make_network(n_spins=64, diffusion_d=d_theta * 250000.0)
    n_ss = steady_state_photon_number(params.opo)
    spec = EnsembleSpec(
        simulator=FullFieldSimulator(params),
        n_trajectories=50,
        dt=5e-5,
        sample_times=(0.0, 1.0),
        master_seed=17,
        initial=np.full(64, math.sqrt(n_ss), dtype=complex),
    )
    ensemble = ensemble_run(spec)
    rel = np.concatenate([relative_phases(r.phases[1]) for r in ensemble])
    # a relative phase diffuses twice as fast as one oscillator
    assert np.cos(rel).mean() == pytest.approx(math.exp(-d_theta), abs=0.05)


def test_noiseless_kuramoto_never_raises_the_energy(rng, ring8):
    params = KuramotoParams(1.0, 0.0, ring8)
    times = [0.25 * j for j in range(21)]
    record = simulate_kuramoto(params, PhaseConfig.uniform(8, rng), 0.005, times, seed=1)
    energies = xy_energies(record.phases, ring8)
    assert np.all(np.diff(energies) <= 1e-12)
    assert energies[-1] < energies[0]


def shift_error(turned, base, offset):
    return float(np.max(np.abs(wrap_phase(turned - base - offset))))


def test_kuramoto_paths_commute_with_global_rotation(rng, ring8):
    params = KuramotoParams(2.0, 0.5, ring8)
    start = PhaseConfig.uniform(8, rng)
    base = simulate_kuramoto(params, start, 0.002, [0.5, 1.0], seed=9)
    turned = simulate_kuramoto(params, start.shifted(1.3), 0.002, [0.5, 1.0], seed=9)
    assert shift_error(turned.phases, base.phases, 1.3) < 1e-9


def test_split_paths_commute_with_global_rotation(rng):
    params = make_network(gamma_inj=100.0, diffusion_d=250000.0)
    photons = np.full(8, params.steady_photons)
    start = PhaseConfig.uniform(8, rng)
    base = simulate_amplitude_phase(params, photons, start, 5e-5, [0.01], seed=9)
    turned = simulate_amplitude_phase(params, photons, start.shifted(-2.0), 5e-5, [0.01], seed=9)
    assert np.allclose(turned.photon_numbers, base.photon_numbers, rtol=1e-9)
    assert shift_error(turned.phases, base.phases, -2.0) < 1e-9


def test_noiseless_full_field_commutes_with_global_rotation(rng):
    params = make_network(gamma_inj=100.0)
    fields = math.sqrt(params.steady_photons) * np.exp(1j * rng.uniform(-math.pi, math.pi, 8))
    base = simulate_full_network(params, fields, 5e-5, [0.01], seed=2)
    turned = simulate_full_network(params, fields * np.exp(0.7j), 5e-5, [0.01], seed=2)
    assert np.allclose(turned.photon_numbers, base.photon_numbers, rtol=1e-9)
    assert shift_error(turned.phases, base.phases, 0.7) < 1e-9


def test_split_model_refines_steps_that_hit_the_photon_floor(monkeypatch, caplog):
    caplog.set_level(logging.DEBUG, logger="nopo_xy")
    params = make_network(diffusion_d=250000.0)
    depths = []
    refine = SplitSimulator._refine

    def counting(self, state, args, dt, increments, rng, depth, step):
        depths.append(depth)
        return refine(self, state, args, dt, increments, rng, depth, step)

    monkeypatch.setattr(SplitSimulator, "_refine", counting)
    # a few diffusion steps' worth of photons, so the noise often pushes below zero
    record = simulate_amplitude_phase(params, np.full(8, 50.0), PhaseConfig.aligned(8), 5e-5, [1e-3], seed=4)
    assert depths
    assert np.all(record.photon_numbers > 0)
    assert np.all(np.isfinite(record.phases))
    assert "photon floor hit at step" in caplog.text
    assert "halving to dt=2.5e-05" in caplog.text


def test_split_ensemble_photon_spread_above_threshold():
    params = make_network(diffusion_d=250000.0)
    spec = EnsembleSpec(SplitSimulator(params), 4, 5e-5, (0.0, 0.02, 0.04), 3)
    ensemble = ensemble_run(spec)
    assert all(record.has_photons for record in ensemble)
    diagnostics = photon_fluctuation_diagnostics(ensemble, gamma_inj=1.0, diffusion_d=250000.0)
    assert diagnostics.mean_photons == pytest.approx(params.steady_photons, rel=0.05)
    assert 0.0 < diagnostics.delta < 0.1
    assert diagnostics.beta_correction == pytest.approx(diagnostics.mean_photons / 250000.0)


def test_ensemble_logs_its_size_and_seed(caplog, ring8):
    caplog.set_level(logging.INFO, logger="nopo_xy")
    spec = EnsembleSpec(KuramotoSimulator(KuramotoParams(1.0, 0.5, ring8)), 2, 0.005, (0.0, 0.5), 99)
    ensemble_run(spec)
    assert "ensemble: 2 kuramoto trajectories, master seed 99, 1 worker(s)" in caplog.text
