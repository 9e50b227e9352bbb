"""XY spin configurations, coupling graphs and the XY Hamiltonian.

The Hamiltonian is ``H(theta) = -sum_{k<l} J_kl cos(theta_k - theta_l)``.
Couplings are stored once per unordered pair as an edge list, so a ring of
5000 spins costs 5000 entries instead of a dense 5000 x 5000 matrix.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, TypeAlias

import numpy as np

from .errors import SpecError

LOGGER = logging.getLogger(__name__)

Energy: TypeAlias = float

TWO_PI = 2.0 * math.pi


def wrap_phase(angle):
    """Map an angle (or array of angles) onto [-pi, pi)."""
    values = np.asarray(angle, dtype=float)
    if not np.all(np.isfinite(values)):
        raise SpecError("angle must be finite")
    wrapped = np.mod(values + math.pi, TWO_PI) - math.pi
    # mod can round up to exactly 2*pi for inputs a hair below a multiple of it
    wrapped = np.where(wrapped >= math.pi, wrapped - TWO_PI, wrapped)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class PhaseConfig:
    """N planar spins, stored wrapped onto [-pi, pi)."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.theta, dtype=float).reshape(-1)
        if values.size == 0:
            raise SpecError("a configuration needs at least one spin", field="theta")
        values = wrap_phase(values)
        values.setflags(write=False)
        object.__setattr__(self, "theta", values)

    @property
    def n_spins(self) -> int:
        return int(self.theta.size)

    @classmethod
    def aligned(cls, n_spins: int, angle: float = 0.0) -> "PhaseConfig":
        return cls(np.full(n_spins, angle))

    @classmethod
    def uniform(cls, n_spins: int, rng: np.random.Generator) -> "PhaseConfig":
        return cls(rng.uniform(-math.pi, math.pi, size=n_spins))

    def shifted(self, offset: float) -> "PhaseConfig":
        return PhaseConfig(self.theta + offset)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhaseConfig):
            return NotImplemented
        return np.array_equal(self.theta, other.theta)

    def __hash__(self) -> int:
        return hash(self.theta.tobytes())


@dataclass(frozen=True)
class CouplingGraph:
    """Sparse symmetric couplings, one ``(k, l, J_kl)`` entry per pair with ``k < l``."""

    n_spins: int
    edges: tuple[tuple[int, int, float], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.n_spins < 1:
            raise SpecError("must be positive", field="n_spins")
        canonical = []
        seen = set()
        for k, l, j in self.edges:
            k, l, j = int(k), int(l), float(j)
            if k == l:
                raise SpecError(f"self-coupling on spin {k}", field="edges")
            if k > l:
                k, l = l, k
            if k < 0 or l >= self.n_spins:
                raise SpecError(f"edge ({k}, {l}) outside [0, {self.n_spins})", field="edges")
            if (k, l) in seen:
                raise SpecError(f"duplicate edge ({k}, {l})", field="edges")
            if not math.isfinite(j):
                raise SpecError(f"coupling on ({k}, {l}) is not finite", field="edges")
            seen.add((k, l))
            canonical.append((k, l, j))
        object.__setattr__(self, "edges", tuple(canonical))

    @classmethod
    def from_edges(cls, n_spins: int, edges: Iterable[tuple[int, int, float]]) -> "CouplingGraph":
        return cls(n_spins, tuple(edges))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(k, l, J) as contiguous arrays for vectorised and compiled loops."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), np.zeros(0)
        k, l, j = zip(*self.edges)
        return (
            np.ascontiguousarray(k, dtype=np.int64),
            np.ascontiguousarray(l, dtype=np.int64),
            np.ascontiguousarray(j, dtype=float),
        )

    @cached_property
    def neighbours(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR adjacency ``(indptr, indices, weights)`` listing both directions of every edge."""
        k, l, j = self.edge_arrays
        rows = np.concatenate([k, l])
        cols = np.concatenate([l, k])
        weights = np.concatenate([j, j])
        order = np.lexsort((cols, rows))
        rows, cols, weights = rows[order], cols[order], weights[order]
        indptr = np.zeros(self.n_spins + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return np.cumsum(indptr), np.ascontiguousarray(cols), np.ascontiguousarray(weights)

    @cached_property
    def weighted_degree(self) -> np.ndarray:
        k, l, j = self.edge_arrays
        magnitude = np.abs(j)
        return np.bincount(k, magnitude, self.n_spins) + np.bincount(l, magnitude, self.n_spins)

    @property
    def max_degree(self) -> float:
        if not self.edges:
            return 0.0
        return float(self.weighted_degree.max())

    @property
    def total_coupling(self) -> float:
        return float(np.abs(self.edge_arrays[2]).sum())


def ring_graph(n: int, j: float = 1.0) -> CouplingGraph:
    """Ring with ``theta_{n} = theta_0``; each spin couples to its two neighbours."""
    if n < 3:
        raise SpecError(f"a ring needs at least 3 spins, got {n}", field="n_spins")
    return CouplingGraph(n, tuple((k, (k + 1) % n, j) for k in range(n)))


def chain_graph(n: int, j: float = 1.0) -> CouplingGraph:
    """Open chain of ``n - 1`` bonds."""
    if n < 2:
        raise SpecError(f"a chain needs at least 2 spins, got {n}", field="n_spins")
    return CouplingGraph(n, tuple((k, k + 1, j) for k in range(n - 1)))


def _check_pairing(theta: np.ndarray, graph: CouplingGraph) -> None:
    if theta.shape[-1] != graph.n_spins:
        raise SpecError(
            f"configuration has {theta.shape[-1]} spins, graph has {graph.n_spins}",
            field="n_spins",
        )


def xy_energies(thetas: np.ndarray, graph: CouplingGraph) -> np.ndarray:
    """Energies of a stack of configurations, shape ``(..., N) -> (...)``."""
    thetas = np.asarray(thetas, dtype=float)
    _check_pairing(thetas, graph)
    k, l, j = graph.edge_arrays
    return -(np.cos(thetas[..., k] - thetas[..., l]) * j).sum(axis=-1)


def xy_energy(config: PhaseConfig, graph: CouplingGraph) -> Energy:
    return float(xy_energies(config.theta, graph))


def energy_gradient(theta: np.ndarray, graph: CouplingGraph) -> np.ndarray:
    """dH/dtheta_k = sum_l J_kl sin(theta_k - theta_l) on raw (unwrapped) angles."""
    theta = np.asarray(theta, dtype=float)
    _check_pairing(theta, graph)
    k, l, j = graph.edge_arrays
    force = j * np.sin(theta[k] - theta[l])
    return np.bincount(k, force, graph.n_spins) - np.bincount(l, force, graph.n_spins)


def xy_energy_gradient(config: PhaseConfig, graph: CouplingGraph) -> np.ndarray:
    return energy_gradient(config.theta, graph)
