import math

import numpy as np
import pytest

from nopo_xy.core import (
    CouplingGraph,
    PhaseConfig,
    chain_graph,
    energy_gradient,
    ring_graph,
    wrap_phase,
    xy_energies,
    xy_energy,
    xy_energy_gradient,
)
from nopo_xy.errors import SpecError


def test_wrap_phase_maps_onto_half_open_interval():
    assert wrap_phase(math.pi) == -math.pi
    assert wrap_phase(-math.pi) == -math.pi
    assert wrap_phase(-7.0) == pytest.approx(-7.0 + 2 * math.pi)
    assert wrap_phase(7.0) == pytest.approx(7.0 - 2 * math.pi)
    values = wrap_phase(np.linspace(-20, 20, 401))
    assert np.all(values >= -math.pi)
    assert np.all(values < math.pi)


def test_wrap_phase_rejects_non_finite():
    with pytest.raises(SpecError):
        wrap_phase(float("nan"))


def test_phase_config_is_wrapped_and_read_only():
    config = PhaseConfig([0.0, 2 * math.pi + 0.5, -4.0])
    assert config.n_spins == 3
    assert config.theta[1] == pytest.approx(0.5)
    assert config.theta[2] == pytest.approx(-4.0 + 2 * math.pi)
    with pytest.raises(ValueError):
        config.theta[0] = 1.0
    assert config == PhaseConfig(config.theta.copy())


def test_phase_config_needs_spins():
    with pytest.raises(SpecError):
        PhaseConfig([])


def test_coupling_graph_stores_canonical_edges():
    graph = CouplingGraph(4, ((3, 1, 0.5), (0, 2, -1.0)))
    assert graph.edges == ((1, 3, 0.5), (0, 2, -1.0))
    assert graph.n_edges == 2
    assert graph.weighted_degree.tolist() == [1.0, 0.5, 1.0, 0.5]
    assert graph.max_degree == 1.0


@pytest.mark.parametrize(
    "edges",
    [
        ((0, 0, 1.0),),
        ((0, 4, 1.0),),
        ((0, 1, 1.0), (1, 0, 2.0)),
        ((0, 1, math.inf),),
    ],
)
def test_coupling_graph_rejects_bad_edges(edges):
    with pytest.raises(SpecError):
        CouplingGraph(4, edges)


def test_ring_and_chain_builders():
    ring = ring_graph(5)
    assert ring.n_edges == 5
    assert (0, 4, 1.0) in ring.edges
    assert np.all(ring.weighted_degree == 2.0)
    indptr, indices, _ = ring.neighbours
    assert np.all(np.diff(indptr) == 2)
    assert sorted(indices[indptr[0] : indptr[1]].tolist()) == [1, 4]

    chain = chain_graph(3)
    assert chain.n_edges == 2
    assert chain.weighted_degree.tolist() == [1.0, 2.0, 1.0]

    with pytest.raises(SpecError):
        ring_graph(2)
    with pytest.raises(SpecError):
        chain_graph(1)


def test_aligned_ring_has_minimum_energy():
    graph = ring_graph(16, 0.5)
    assert xy_energy(PhaseConfig.aligned(16, 1.3), graph) == pytest.approx(-8.0)


def test_quarter_turn_ring_has_zero_energy():
    graph = ring_graph(4)
    config = PhaseConfig([0.0, math.pi / 2, math.pi, 3 * math.pi / 2])
    assert xy_energy(config, graph) == pytest.approx(0.0, abs=1e-12)


def test_energy_is_invariant_under_global_rotation(rng, ring8):
    config = PhaseConfig.uniform(8, rng)
    assert xy_energy(config.shifted(2.1), ring8) == pytest.approx(xy_energy(config, ring8))


def test_stacked_energies_match_single_configurations(rng, ring8):
    thetas = rng.uniform(-math.pi, math.pi, size=(3, 5, 8))
    energies = xy_energies(thetas, ring8)
    assert energies.shape == (3, 5)
    assert energies[1, 2] == pytest.approx(xy_energy(PhaseConfig(thetas[1, 2]), ring8))


def test_energy_rejects_mismatched_size(ring8):
    with pytest.raises(SpecError):
        xy_energy(PhaseConfig.aligned(7), ring8)


def test_gradient_matches_finite_differences(rng):
    graph = CouplingGraph(5, ((0, 1, 1.0), (1, 2, -0.7), (2, 4, 2.0), (0, 3, 0.3)))
    theta = rng.uniform(-math.pi, math.pi, size=5)
    step = 1e-6
    numeric = np.empty(5)
    for k in range(5):
        up, down = theta.copy(), theta.copy()
        up[k] += step
        down[k] -= step
        numeric[k] = (xy_energies(up, graph) - xy_energies(down, graph)) / (2 * step)
    assert np.allclose(energy_gradient(theta, graph), numeric, atol=1e-7)
    assert np.allclose(xy_energy_gradient(PhaseConfig(theta), graph), numeric, atol=1e-7)


@pytest.mark.parametrize("n", [4, 16, 64])
def test_ring_gradient_matches_finite_differences_and_sums_to_zero(rng, n):
    graph = ring_graph(n)
    theta = rng.uniform(-math.pi, math.pi, size=n)
    step = 1e-6
    numeric = np.empty(n)
    for k in range(n):
        up, down = theta.copy(), theta.copy()
        up[k] += step
        down[k] -= step
        numeric[k] = (xy_energies(up, graph) - xy_energies(down, graph)) / (2 * step)
    gradient = xy_energy_gradient(PhaseConfig(theta), graph)
    assert np.allclose(gradient, numeric, atol=1e-7)
    # global rotation is a symmetry
    assert gradient.sum() == pytest.approx(0.0, abs=1e-12)


def test_gradient_of_a_quarter_turned_pair():
    gradient = xy_energy_gradient(PhaseConfig([0.0, math.pi / 2]), chain_graph(2))
    assert gradient == pytest.approx([-1.0, 1.0])
