"""Single-site Metropolis sampler of the XY Gibbs measure.

Shares no code with the SDE integrators beyond the coupling graph, so it can
serve as an independent reference for the Langevin samplers.
"""

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import repeat
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.stats import ks_2samp, kstest

from . import kernels
from .core import CouplingGraph, PhaseConfig, wrap_phase, xy_energies
from .errors import DataError, SpecError
from .network import make_generator, trajectory_seed

LOGGER = logging.getLogger(__name__)

TARGET_ACCEPTANCE = 0.4
ADAPT_WINDOW = 50
MIN_WIDTH = 1e-3
DISTANCE_BINS = 36
MIN_DISTANCE_SAMPLES = 1000
# sweeps whose random numbers are drawn together
SWEEP_BLOCK = 256


class SiteOrder(str, enum.Enum):
    SEQUENTIAL = "sequential"
    RANDOM = "random"


@dataclass(frozen=True)
class McmcConfig:
    beta: float
    proposal_width: float
    n_sweeps: int
    thin: int = 1
    seed: int = 0
    burn_in: Optional[int] = None
    adapt_width: bool = False
    order: SiteOrder = SiteOrder.SEQUENTIAL

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise SpecError(f"must be finite and non-negative, got {self.beta}", field="beta")
        if not 0 < self.proposal_width <= math.pi:
            raise SpecError(f"must lie in (0, pi], got {self.proposal_width}", field="proposal_width")
        if self.n_sweeps < 1:
            raise SpecError("must be at least 1", field="n_sweeps")
        if self.thin < 1:
            raise SpecError("must be at least 1", field="thin")
        if self.burn_in is not None and not 0 <= self.burn_in < self.n_sweeps:
            raise SpecError(
                f"burn-in of {self.burn_in} sweeps leaves nothing of {self.n_sweeps}", field="burn_in"
            )
        object.__setattr__(self, "order", SiteOrder(self.order))

    def burn_in_for(self, n_spins: int) -> int:
        """Explicit burn-in, else 10 N sweeps up to beta = 10 and 100 N above."""
        if self.burn_in is not None:
            return self.burn_in
        return (10 if self.beta <= 10 else 100) * n_spins


@dataclass(frozen=True)
class ChainResult:
    samples: np.ndarray
    acceptance_rate: float
    proposal_width: float
    burn_in: int
    seed: int

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    def configs(self) -> list[PhaseConfig]:
        return [PhaseConfig(row) for row in self.samples]

    def energies(self, graph: CouplingGraph) -> np.ndarray:
        return xy_energies(self.samples, graph)


@dataclass(frozen=True)
class DistanceReport:
    tv: float
    ks: float
    p_value: float


def _site_orders(order: SiteOrder, n_sweeps: int, n_spins: int, rng: np.random.Generator) -> np.ndarray:
    if order is SiteOrder.SEQUENTIAL:
        return np.broadcast_to(np.arange(n_spins, dtype=np.int64), (n_sweeps, n_spins))
    return np.argsort(rng.random((n_sweeps, n_spins)), axis=1).astype(np.int64)


def metropolis_sweep(
    config: PhaseConfig,
    graph: CouplingGraph,
    mcmc: McmcConfig,
    rng: np.random.Generator,
) -> tuple[PhaseConfig, float]:
    """One sweep of N single-site updates; returns the new configuration and the accepted fraction."""
    if config.n_spins != graph.n_spins:
        raise SpecError(
            f"configuration has {config.n_spins} spins, graph has {graph.n_spins}", field="n_spins"
        )
    theta = np.array(config.theta)
    indptr, indices, weights = graph.neighbours
    order = _site_orders(mcmc.order, 1, graph.n_spins, rng)[0]
    jumps = rng.uniform(-1.0, 1.0, size=graph.n_spins)
    uniforms = rng.random(graph.n_spins)
    accepted = kernels.metropolis_sweep(
        theta, indptr, indices, weights, mcmc.beta, mcmc.proposal_width,
        np.ascontiguousarray(order), jumps, uniforms,
    )
    return PhaseConfig(theta), accepted / graph.n_spins


def _tuned(width: float, rate: float) -> float:
    factor = min(2.0, max(0.5, rate / TARGET_ACCEPTANCE))
    return min(math.pi, max(MIN_WIDTH, width * factor))


def run_chain(
    mcmc: McmcConfig,
    graph: CouplingGraph,
    initial: Optional[PhaseConfig] = None,
) -> ChainResult:
    """Burn in, then keep every ``thin``-th sweep.

    With ``adapt_width`` the proposal width is retuned toward 40% acceptance
    every few sweeps of the burn-in and frozen afterwards.
    """
    n = graph.n_spins
    burn_in = mcmc.burn_in_for(n)
    if burn_in >= mcmc.n_sweeps:
        raise SpecError(
            f"burn-in of {burn_in} sweeps leaves nothing of {mcmc.n_sweeps}", field="n_sweeps"
        )
    rng = make_generator(mcmc.seed)
    if initial is None:
        theta = rng.uniform(-math.pi, math.pi, size=n)
    else:
        if initial.n_spins != n:
            raise SpecError(f"expected {n} spins, got {initial.n_spins}", field="initial")
        theta = np.array(initial.theta)
    indptr, indices, weights = graph.neighbours
    width = mcmc.proposal_width
    samples = []
    window_accepted = 0
    sampled_accepted = 0
    sweep = 0
    while sweep < mcmc.n_sweeps:
        block = min(SWEEP_BLOCK, mcmc.n_sweeps - sweep)
        orders = _site_orders(mcmc.order, block, n, rng)
        jumps = rng.uniform(-1.0, 1.0, size=(block, n))
        uniforms = rng.random((block, n))
        for b in range(block):
            accepted = kernels.metropolis_sweep(
                theta, indptr, indices, weights, mcmc.beta, width,
                np.ascontiguousarray(orders[b]), jumps[b], uniforms[b],
            )
            if sweep < burn_in:
                window_accepted += accepted
                if mcmc.adapt_width and (sweep + 1) % ADAPT_WINDOW == 0:
                    width = _tuned(width, window_accepted / (ADAPT_WINDOW * n))
                    window_accepted = 0
            else:
                sampled_accepted += accepted
                if (sweep - burn_in) % mcmc.thin == 0:
                    samples.append(theta.copy())
            sweep += 1
    rate = sampled_accepted / ((mcmc.n_sweeps - burn_in) * n)
    LOGGER.debug(
        f"chain seed={mcmc.seed} beta={mcmc.beta:g}: {len(samples)} samples, "
        f"acceptance {rate:.3f}, width {width:.3g}"
    )
    phases = wrap_phase(np.asarray(samples))
    return ChainResult(
        samples=phases, acceptance_rate=rate, proposal_width=width, burn_in=burn_in, seed=mcmc.seed
    )


def sample_chain(mcmc: McmcConfig, graph: CouplingGraph) -> list[PhaseConfig]:
    return run_chain(mcmc, graph).configs()


def _chain_for(mcmc: McmcConfig, graph: CouplingGraph, index: int) -> ChainResult:
    return run_chain(replace(mcmc, seed=trajectory_seed(mcmc.seed, index)), graph)


def run_chains(
    mcmc: McmcConfig, graph: CouplingGraph, n_chains: int, workers: Optional[int] = None
) -> list[ChainResult]:
    """Independent chains with seeds split off ``mcmc.seed``; output order is chain order."""
    if n_chains < 1:
        raise SpecError("must be at least 1", field="n_chains")
    workers = 1 if workers is None else max(1, int(workers))
    indices = range(n_chains)
    if workers == 1 or n_chains == 1:
        return [_chain_for(mcmc, graph, index) for index in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_chain_for, repeat(mcmc), repeat(graph), indices))


def _histogram(samples: np.ndarray, edges: np.ndarray) -> np.ndarray:
    counts, _ = np.histogram(samples, bins=edges)
    return counts / samples.size


def _check_size(samples: np.ndarray, name: str) -> None:
    if samples.size < MIN_DISTANCE_SAMPLES:
        raise DataError(f"{name} has {samples.size} samples, need at least {MIN_DISTANCE_SAMPLES}")


def _analytic_cdf(pdf: Callable, n_points: int = 4097) -> Callable:
    grid = np.linspace(-math.pi, math.pi, n_points)
    cumulative = cumulative_trapezoid(pdf(grid), grid, initial=0.0)
    cumulative /= cumulative[-1]
    return lambda x: np.interp(x, grid, cumulative)


def distribution_distance(
    samples_a: Sequence[float],
    samples_b: Optional[Sequence[float]] = None,
    pdf: Optional[Callable] = None,
    n_bins: int = DISTANCE_BINS,
) -> DistanceReport:
    """Total-variation distance on equal bins over [-pi, pi) plus the KS statistic.

    Compares against a second sample set (two-sample KS) or an analytic density
    on [-pi, pi) (one-sample KS against its quadrature CDF).
    """
    if (samples_b is None) == (pdf is None):
        raise SpecError("give exactly one of a second sample set or a density", field="samples_b")
    a = np.asarray(samples_a, dtype=float).reshape(-1)
    _check_size(a, "first sample set")
    edges = np.linspace(-math.pi, math.pi, n_bins + 1)
    hist_a = _histogram(a, edges)
    if samples_b is not None:
        b = np.asarray(samples_b, dtype=float).reshape(-1)
        _check_size(b, "second sample set")
        reference = _histogram(b, edges)
        result = ks_2samp(a, b)
    else:
        reference = np.array([quad(pdf, lo, hi)[0] for lo, hi in zip(edges[:-1], edges[1:])])
        reference /= reference.sum()
        result = kstest(a, _analytic_cdf(pdf))
    tv = 0.5 * float(np.abs(hist_a - reference).sum())
    return DistanceReport(tv=tv, ks=float(result.statistic), p_value=float(result.pvalue))
