"""Stochastic simulation of the coupled NOPO network.

Three fidelity levels share one driver loop (``Simulator.simulate``):

* ``FullFieldSimulator``  complex signal fields with isotropic complex noise,
* ``SplitSimulator``      photon numbers and phases as separate variables,
* ``KuramotoSimulator``   phases only (noisy Kuramoto model).

Noise convention: the complex noise has ``<xi_k^* xi_l> = 2 delta_kl``, realised
as real and imaginary increments of variance ``D dt`` each. With it, a field of
``n`` photons diffuses in phase with ``D_theta = D / n``.
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat
from typing import Any, Optional, Sequence

import numpy as np

from . import kernels
from .core import CouplingGraph, PhaseConfig, wrap_phase
from .errors import NumericalError, SpecError
from .opo import OpoParams, saturation_photon_number, steady_state_photon_number

LOGGER = logging.getLogger(__name__)

STABILITY_LIMIT = 0.1
DEFAULT_STEP_TARGET = 1e-2
ROUND_TRIP_TIME = 5e-6
MAX_HALVINGS = 10
# noise is drawn in blocks of at most this many numbers
NOISE_BLOCK = 1 << 20
MAX_CHUNK_STEPS = 4096


def injection_rate_from_transmittance(transmittance: float, round_trip: float = ROUND_TRIP_TIME) -> float:
    """gamma_inj = 2 sqrt(T) / tau_rt for delay-line transmittance T."""
    if not 0.0 <= transmittance <= 1.0:
        raise SpecError(f"must lie in [0, 1], got {transmittance}", field="transmittance")
    if round_trip <= 0:
        raise SpecError(f"must be positive, got {round_trip}", field="round_trip")
    return 2.0 * math.sqrt(transmittance) / round_trip


def transmittance_for_injection_rate(gamma_inj: float, round_trip: float = ROUND_TRIP_TIME) -> float:
    """Delay-line transmittance that realises ``gamma_inj``."""
    if gamma_inj < 0:
        raise SpecError(f"must be non-negative, got {gamma_inj}", field="gamma_inj")
    transmittance = (0.5 * gamma_inj * round_trip) ** 2
    if transmittance > 1.0:
        raise SpecError(
            f"{gamma_inj:.6g} Hz needs transmittance {transmittance:.3g} > 1", field="gamma_inj"
        )
    return transmittance


def phase_diffusion_from_noise(d_intrinsic: float, slope: float, noise_power: float) -> float:
    """Phase diffusion grows linearly with injected incoherent-noise power."""
    if d_intrinsic < 0 or slope < 0 or noise_power < 0:
        raise SpecError("diffusion model terms must be non-negative", field="noise_power")
    return d_intrinsic + slope * noise_power


def default_time_step(
    gamma_inj: float,
    max_degree: float,
    d_theta: float = 0.0,
    gamma_s: float = 0.0,
    target: float = DEFAULT_STEP_TARGET,
) -> float:
    """dt such that the fastest rate times dt equals ``target``."""
    fastest = max(gamma_inj * max_degree, d_theta, gamma_s)
    if fastest <= 0:
        raise SpecError("no finite rate to derive a time step from", field="dt")
    return target / fastest


def trajectory_seed(master_seed: int, index: int) -> int:
    """64-bit seed of trajectory ``index``, split off ``master_seed`` by counter."""
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def _graph_digest(graph: CouplingGraph) -> str:
    return hashlib.md5(repr(graph.edges).encode()).hexdigest()


def _digest(payload: dict[str, Any]) -> str:
    return hashlib.md5(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class KuramotoParams:
    gamma_inj: float
    d_theta: float
    graph: CouplingGraph

    def __post_init__(self) -> None:
        if not self.gamma_inj >= 0:
            raise SpecError(f"must be non-negative, got {self.gamma_inj}", field="gamma_inj")
        if not self.d_theta >= 0:
            raise SpecError(f"must be non-negative, got {self.d_theta}", field="d_theta")

    @property
    def beta_set(self) -> float:
        if self.d_theta == 0:
            return math.inf
        return self.gamma_inj / self.d_theta

    def digest(self) -> str:
        return _digest(
            {
                "model": "kuramoto",
                "gamma_inj": self.gamma_inj,
                "d_theta": self.d_theta,
                "graph": _graph_digest(self.graph),
            }
        )


@dataclass(frozen=True)
class NetworkParams:
    opo: OpoParams
    gamma_inj: float
    diffusion_d: float
    graph: CouplingGraph

    def __post_init__(self) -> None:
        if not self.gamma_inj >= 0:
            raise SpecError(f"must be non-negative, got {self.gamma_inj}", field="gamma_inj")
        if not self.diffusion_d >= 0:
            raise SpecError(f"must be non-negative, got {self.diffusion_d}", field="diffusion_d")

    @property
    def steady_photons(self) -> float:
        return steady_state_photon_number(self.opo)

    @property
    def saturation_photons(self) -> float:
        return saturation_photon_number(self.opo)

    @property
    def d_theta(self) -> float:
        photons = self.steady_photons
        if photons <= 0:
            raise SpecError("the pump is not above threshold", field="pump_amplitude")
        return self.diffusion_d / photons

    @property
    def time_scale_ratio(self) -> float:
        """gamma_s / gamma_inj; the phase-only reduction needs it large."""
        if self.gamma_inj == 0:
            return math.inf
        return self.opo.gamma_s / self.gamma_inj

    def kuramoto_reduction(self) -> KuramotoParams:
        if self.time_scale_ratio < 10:
            LOGGER.warning(
                f"gamma_s/gamma_inj={self.time_scale_ratio:.3g}; "
                "the phase-only reduction assumes gamma_s >> gamma_inj"
            )
        return KuramotoParams(self.gamma_inj, self.d_theta, self.graph)

    def digest(self, model: str) -> str:
        return _digest(
            {
                "model": model,
                "opo": [
                    self.opo.gamma_s, self.opo.gamma_i, self.opo.gamma_p,
                    self.opo.kappa, self.opo.pump_amplitude,
                ],
                "gamma_inj": self.gamma_inj,
                "diffusion_d": self.diffusion_d,
                "graph": _graph_digest(self.graph),
            }
        )


@dataclass(frozen=True)
class TrajectoryRecord:
    """Snapshots of one stochastic run. ``phases`` rows are wrapped onto [-pi, pi)."""

    sample_times: np.ndarray
    phases: np.ndarray
    seed: int
    params_digest: str
    photon_numbers: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if len(self.sample_times) != len(self.phases):
            raise SpecError("one snapshot per sample time", field="phases")
        if np.any(np.diff(self.sample_times) <= 0):
            raise SpecError("sample times must increase strictly", field="sample_times")

    @property
    def n_spins(self) -> int:
        return int(self.phases.shape[1])

    @property
    def snapshots(self) -> list[PhaseConfig]:
        return [PhaseConfig(row) for row in self.phases]

    @property
    def has_photons(self) -> bool:
        return self.photon_numbers is not None

    def index_of(self, time: float) -> Optional[int]:
        hits = np.flatnonzero(np.isclose(self.sample_times, time, rtol=1e-9, atol=1e-15))
        return int(hits[0]) if hits.size else None


def _sample_steps(sample_times: Sequence[float], dt: float) -> np.ndarray:
    if not (math.isfinite(dt) and dt > 0):
        raise SpecError(f"must be positive, got {dt}", field="dt")
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise SpecError("need at least one sample time", field="sample_times")
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise SpecError("sample times must be finite and non-negative", field="sample_times")
    if np.any(np.diff(times) <= 0):
        raise SpecError("sample times must increase strictly", field="sample_times")
    steps = np.rint(times / dt).astype(np.int64)
    if np.any(np.diff(steps) <= 0):
        raise SpecError("two sample times fall on the same step; reduce dt", field="sample_times")
    return steps


class Simulator:
    """Shared driver for the network simulators.

    Subclasses supply the state layout and the integration of a block of
    steps; the base class owns seeding, chunking and snapshot recording.
    """

    model = ""
    records_photons = False

    @property
    def graph(self) -> CouplingGraph:
        raise NotImplementedError

    @property
    def params_digest(self) -> str:
        raise NotImplementedError

    def stability_rates(self) -> dict[str, float]:
        raise NotImplementedError

    def random_initial(self, rng: np.random.Generator) -> list[np.ndarray]:
        raise NotImplementedError

    def coerce_initial(self, initial: Any) -> list[np.ndarray]:
        raise NotImplementedError

    def advance(self, state: list[np.ndarray], dt: float, n_steps: int, rng: np.random.Generator, offset: int) -> None:
        raise NotImplementedError

    def phases_of(self, state: list[np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def photons_of(self, state: list[np.ndarray]) -> Optional[np.ndarray]:
        return None

    def default_dt(self) -> float:
        rates = self.stability_rates()
        return DEFAULT_STEP_TARGET / max(max(rates.values()), 1e-300)

    def check_step(self, dt: float) -> None:
        for name, rate in self.stability_rates().items():
            if dt * rate >= STABILITY_LIMIT:
                raise SpecError(
                    f"dt * {name} = {dt * rate:.3g} is not below {STABILITY_LIMIT}", field="dt"
                )

    def simulate(
        self,
        dt: float,
        sample_times: Sequence[float],
        seed: int,
        initial: Any = None,
    ) -> TrajectoryRecord:
        steps = _sample_steps(sample_times, dt)
        self.check_step(dt)
        rng = make_generator(seed)
        state = self.random_initial(rng) if initial is None else self.coerce_initial(initial)
        n = self.graph.n_spins
        chunk = max(1, min(MAX_CHUNK_STEPS, NOISE_BLOCK // (2 * n)))
        phases = np.empty((steps.size, n))
        photons = np.empty((steps.size, n)) if self.records_photons else None
        current = 0
        for index, target in enumerate(steps):
            while current < target:
                block = int(min(chunk, target - current))
                self.advance(state, dt, block, rng, current)
                current += block
            phases[index] = wrap_phase(self.phases_of(state))
            if photons is not None:
                photons[index] = self.photons_of(state)
        LOGGER.debug(f"{self.model} run seed={seed}: {current} steps, {steps.size} snapshots")
        return TrajectoryRecord(
            sample_times=np.asarray(sample_times, dtype=float),
            phases=phases,
            seed=int(seed),
            params_digest=self.params_digest,
            photon_numbers=photons,
        )


def _phases_from(initial: Any, n: int) -> np.ndarray:
    theta = initial.theta if isinstance(initial, PhaseConfig) else initial
    theta = np.array(theta, dtype=float)
    if theta.shape != (n,):
        raise SpecError(f"expected {n} phases, got shape {theta.shape}", field="initial")
    return theta


@dataclass(frozen=True)
class KuramotoSimulator(Simulator):
    params: KuramotoParams
    model = "kuramoto"

    @property
    def graph(self) -> CouplingGraph:
        return self.params.graph

    @property
    def params_digest(self) -> str:
        return self.params.digest()

    def stability_rates(self) -> dict[str, float]:
        return {
            "gamma_inj*max_degree": self.params.gamma_inj * self.graph.max_degree,
            "d_theta": self.params.d_theta,
        }

    def random_initial(self, rng: np.random.Generator) -> list[np.ndarray]:
        return [rng.uniform(-math.pi, math.pi, size=self.graph.n_spins)]

    def coerce_initial(self, initial: Any) -> list[np.ndarray]:
        return [_phases_from(initial, self.graph.n_spins)]

    def advance(self, state, dt, n_steps, rng, offset) -> None:
        (theta,) = state
        ks, ls, ws = self.graph.edge_arrays
        noise = rng.standard_normal((n_steps, theta.size))
        kernels.kuramoto_steps(
            theta, ks, ls, ws, 0.5 * self.params.gamma_inj,
            math.sqrt(self.params.d_theta * dt), dt, noise,
        )
        if not np.all(np.isfinite(theta)):
            raise NumericalError("phase became non-finite", step=offset + n_steps)

    def phases_of(self, state) -> np.ndarray:
        return state[0]


@dataclass(frozen=True)
class FullFieldSimulator(Simulator):
    params: NetworkParams
    model = "full"
    records_photons = True

    @property
    def graph(self) -> CouplingGraph:
        return self.params.graph

    @property
    def params_digest(self) -> str:
        return self.params.digest(self.model)

    def stability_rates(self) -> dict[str, float]:
        return {
            "gamma_s": self.params.opo.gamma_s,
            "gamma_inj*max_degree": self.params.gamma_inj * self.graph.max_degree,
        }

    def random_initial(self, rng: np.random.Generator) -> list[np.ndarray]:
        photons = self.params.steady_photons
        if photons <= 0:
            raise SpecError("random initial fields need a pump above threshold", field="initial")
        theta = rng.uniform(-math.pi, math.pi, size=self.graph.n_spins)
        amplitude = math.sqrt(photons)
        return [amplitude * np.cos(theta), amplitude * np.sin(theta)]

    def coerce_initial(self, initial: Any) -> list[np.ndarray]:
        fields = np.array(initial, dtype=complex)
        if fields.shape != (self.graph.n_spins,):
            raise SpecError(
                f"expected {self.graph.n_spins} fields, got shape {fields.shape}", field="initial"
            )
        return [np.ascontiguousarray(fields.real), np.ascontiguousarray(fields.imag)]

    def advance(self, state, dt, n_steps, rng, offset) -> None:
        re, im = state
        params = self.params
        ks, ls, ws = self.graph.edge_arrays
        n0 = params.saturation_photons if params.opo.pump_amplitude > 0 else math.inf
        noise = rng.standard_normal((n_steps, 2, re.size))
        done = kernels.full_field_steps(
            re, im, ks, ls, ws, n0, params.opo.pump_ratio, params.opo.gamma_s,
            0.5 * params.gamma_inj, math.sqrt(params.diffusion_d * dt), dt, noise,
        )
        if done < n_steps:
            raise NumericalError("signal field diverged", step=offset + done)

    def phases_of(self, state) -> np.ndarray:
        re, im = state
        return np.arctan2(im, re)

    def photons_of(self, state) -> np.ndarray:
        re, im = state
        return re * re + im * im


@dataclass(frozen=True)
class SplitSimulator(Simulator):
    params: NetworkParams
    model = "split"
    records_photons = True

    @property
    def graph(self) -> CouplingGraph:
        return self.params.graph

    @property
    def params_digest(self) -> str:
        return self.params.digest(self.model)

    def stability_rates(self) -> dict[str, float]:
        return {
            "gamma_s": self.params.opo.gamma_s,
            "gamma_inj*max_degree": self.params.gamma_inj * self.graph.max_degree,
        }

    def random_initial(self, rng: np.random.Generator) -> list[np.ndarray]:
        photons = self.params.steady_photons
        if photons <= 0:
            raise SpecError("random initial photon numbers need a pump above threshold", field="initial")
        theta = rng.uniform(-math.pi, math.pi, size=self.graph.n_spins)
        return [np.full(self.graph.n_spins, photons), theta]

    def coerce_initial(self, initial: Any) -> list[np.ndarray]:
        photons, phases = initial
        n = self.graph.n_spins
        photons = np.array(photons, dtype=float)
        if photons.shape != (n,):
            raise SpecError(f"expected {n} photon numbers, got shape {photons.shape}", field="initial_n")
        if np.any(photons <= 0):
            raise SpecError("photon numbers must be positive", field="initial_n")
        return [photons, _phases_from(phases, n)]

    def _kernel_args(self) -> tuple:
        params = self.params
        ks, ls, ws = self.graph.edge_arrays
        n0 = params.saturation_photons if params.opo.pump_amplitude > 0 else math.inf
        return (
            ks, ls, ws, n0, params.opo.pump_ratio, params.opo.gamma_s,
            params.gamma_inj, params.diffusion_d,
        )

    def advance(self, state, dt, n_steps, rng, offset) -> None:
        photons, theta = state
        args = self._kernel_args()
        noise = rng.standard_normal((n_steps, 2, theta.size))
        done = 0
        while done < n_steps:
            done += kernels.split_steps(photons, theta, *args, dt, noise[done:])
            if done < n_steps:
                increments = noise[done] * math.sqrt(dt)
                self._refine(state, args, dt, increments, rng, 1, offset + done)
                done += 1

    def _refine(self, state, args, dt, increments, rng, depth, step) -> None:
        """Redo one rejected step as two half steps, splitting its Wiener increment by a Brownian bridge."""
        if depth > MAX_HALVINGS:
            raise NumericalError(
                f"photon number stayed non-positive after {MAX_HALVINGS} step halvings", step=step
            )
        photons, theta = state
        half = 0.5 * dt
        first = 0.5 * increments + 0.5 * math.sqrt(dt) * rng.standard_normal(increments.shape)
        second = increments - first
        LOGGER.debug(f"photon floor hit at step {step}, halving to dt={half:.3g}")
        for part in (first, second):
            if not kernels.split_step(photons, theta, *args, half, part[0], part[1]):
                self._refine(state, args, half, part, rng, depth + 1, step)

    def phases_of(self, state) -> np.ndarray:
        return state[1]

    def photons_of(self, state) -> np.ndarray:
        return state[0].copy()


def simulate_kuramoto(
    params: KuramotoParams,
    initial: Optional[PhaseConfig],
    dt: float,
    sample_times: Sequence[float],
    seed: int,
) -> TrajectoryRecord:
    return KuramotoSimulator(params).simulate(dt, sample_times, seed, initial)


def simulate_full_network(
    params: NetworkParams,
    initial: Optional[np.ndarray],
    dt: float,
    sample_times: Sequence[float],
    seed: int,
) -> TrajectoryRecord:
    return FullFieldSimulator(params).simulate(dt, sample_times, seed, initial)


def simulate_amplitude_phase(
    params: NetworkParams,
    initial_n: Optional[np.ndarray],
    initial_theta: Optional[PhaseConfig],
    dt: float,
    sample_times: Sequence[float],
    seed: int,
) -> TrajectoryRecord:
    simulator = SplitSimulator(params)
    if initial_n is None and initial_theta is None:
        return simulator.simulate(dt, sample_times, seed)
    if initial_n is None or initial_theta is None:
        raise SpecError("give both initial photon numbers and phases, or neither", field="initial")
    return simulator.simulate(dt, sample_times, seed, (initial_n, initial_theta))


@dataclass(frozen=True)
class EnsembleSpec:
    """Independent trajectories of one simulator; trajectory i uses ``trajectory_seed(master_seed, i)``."""

    simulator: Simulator
    n_trajectories: int
    dt: float
    sample_times: tuple[float, ...]
    master_seed: int
    initial: Any = None

    def __post_init__(self) -> None:
        if self.n_trajectories < 1:
            raise SpecError("must be at least 1", field="n_trajectories")


def _run_one(spec: EnsembleSpec, seed: int) -> TrajectoryRecord:
    return spec.simulator.simulate(spec.dt, spec.sample_times, seed, spec.initial)


def ensemble_run(spec: EnsembleSpec, workers: Optional[int] = None) -> list[TrajectoryRecord]:
    """Run the ensemble, serially or across processes; output order is trajectory order."""
    seeds = [trajectory_seed(spec.master_seed, index) for index in range(spec.n_trajectories)]
    workers = 1 if workers is None else max(1, int(workers))
    LOGGER.info(
        f"ensemble: {spec.n_trajectories} {spec.simulator.model} trajectories, "
        f"master seed {spec.master_seed}, {workers} worker(s)"
    )
    if workers == 1 or spec.n_trajectories == 1:
        return [_run_one(spec, seed) for seed in seeds]
    chunksize = max(1, spec.n_trajectories // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, repeat(spec), seeds, chunksize=chunksize))
