"""Estimators applied to sampled phases.

Snapshots are treated as independent samples; no autocorrelation or
effective-sample-size correction is applied.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, curve_fit, newton
from scipy.stats import vonmises

from .analytics import bessel_ratio, relative_phase_pdf_approx
from .core import CouplingGraph, PhaseConfig, wrap_phase, xy_energies
from .errors import DataError, NumericalError, SpecError
from .network import TrajectoryRecord

LOGGER = logging.getLogger(__name__)

HISTOGRAM_BINS = 36
DECAY_FLOOR = 0.1
MIN_BETA_SAMPLES = 10
RATIO_TOLERANCE = 1e-10


class BetaMethod(str, enum.Enum):
    MLE = "mle"
    HISTOGRAM_FIT = "histogram_fit"


@dataclass(frozen=True)
class DecayCurve:
    times: np.ndarray
    mean_cosine: np.ndarray
    n_samples: np.ndarray
    std_error: np.ndarray


@dataclass(frozen=True)
class DiffusionFit:
    d_theta: float
    std_error: float
    n_points: int


@dataclass(frozen=True)
class BetaEstimate:
    beta_eff: float
    std_error: float
    n_samples: int
    method: BetaMethod
    mean_direction: float = 0.0


@dataclass(frozen=True)
class EnergyEstimate:
    mean: float
    std_dev: float
    n_samples: int

    @property
    def std_error(self) -> float:
        return self.std_dev / math.sqrt(self.n_samples)


@dataclass(frozen=True)
class PhotonDiagnostics:
    delta: float
    effective_j_spread: float
    beta_correction: float
    mean_photons: float


def relative_phases(theta) -> np.ndarray:
    """Ring relative phases ``theta_{k+1} - theta_k`` (last one wraps to spin 0), wrapped."""
    if isinstance(theta, PhaseConfig):
        theta = theta.theta
    theta = np.asarray(theta, dtype=float)
    return wrap_phase(np.roll(theta, -1, axis=-1) - theta)


def align_to_coupling(relative_phases, coupling: float) -> np.ndarray:
    """Shift antiferromagnetic relative phases by pi so they follow the J > 0 law at beta |J|."""
    samples = np.asarray(relative_phases, dtype=float)
    if coupling < 0:
        return wrap_phase(samples + math.pi)
    return samples


def _snapshot_rows(ensemble: Sequence[TrajectoryRecord], at_time: float) -> np.ndarray:
    rows = []
    for index, record in enumerate(ensemble):
        position = record.index_of(at_time)
        if position is None:
            raise DataError(f"trajectory {index} has no snapshot at t={at_time:.6g} s")
        rows.append(record.phases[position])
    if not rows:
        raise DataError("empty ensemble")
    return np.asarray(rows)


def collect_relative_phases(ensemble: Sequence[TrajectoryRecord], at_time: float) -> np.ndarray:
    """All ring relative phases of all trajectories at one acquisition time, flattened."""
    return relative_phases(_snapshot_rows(ensemble, at_time)).reshape(-1)


def decay_curve(ensemble: Sequence[TrajectoryRecord]) -> DecayCurve:
    """Mean of ``cos(rel_k(t) - rel_k(0))`` over spins and trajectories."""
    if not ensemble:
        raise DataError("empty ensemble")
    times = ensemble[0].sample_times
    if len(times) < 2:
        raise DataError("a decay curve needs at least 2 time points")
    if times[0] != 0:
        raise DataError("the first snapshot must be taken at t = 0")
    for record in ensemble[1:]:
        if not np.array_equal(record.sample_times, times):
            raise DataError("all trajectories must share their sample times")
    stacked = relative_phases(np.stack([record.phases for record in ensemble]))
    cosines = np.cos(stacked - stacked[:, :1, :])
    # (trajectory, time, spin) -> per time
    per_time = cosines.transpose(1, 0, 2).reshape(len(times), -1)
    counts = np.full(len(times), per_time.shape[1])
    spread = per_time.std(axis=1, ddof=1) if per_time.shape[1] > 1 else np.zeros(len(times))
    return DecayCurve(
        times=np.asarray(times, dtype=float),
        mean_cosine=per_time.mean(axis=1),
        n_samples=counts,
        std_error=spread / np.sqrt(counts),
    )


def fit_diffusion(curve: DecayCurve, floor: float = DECAY_FLOOR) -> DiffusionFit:
    """Fit ``exp(-D_theta t)`` in log space through the origin.

    The window is the leading run of points with mean cosine at or above
    ``floor``; later points are the noise-dominated tail.
    """
    times = np.asarray(curve.times, dtype=float)
    values = np.asarray(curve.mean_cosine, dtype=float)
    if times.size < 3:
        raise DataError("fitting a decay needs at least 3 time points")
    window = np.logical_and.accumulate(values >= floor)
    window &= times > 0
    if not np.any(window):
        raise DataError(f"no decay points above {floor} to fit")
    t = times[window]
    y = np.log(np.minimum(values[window], 1.0))
    scale = float(np.dot(t, t))
    d_theta = -float(np.dot(t, y)) / scale
    if t.size > 1:
        residual = y + d_theta * t
        std_error = math.sqrt(float(np.dot(residual, residual)) / (t.size - 1) / scale)
    else:
        std_error = 0.0
    return DiffusionFit(d_theta=d_theta, std_error=std_error, n_points=int(t.size))


def _ratio_slope(beta: float) -> float:
    """d/dbeta of I_1/I_0, the von Mises Fisher information per sample."""
    if beta < 1e-8:
        return 0.5
    ratio = bessel_ratio(beta)
    return 1.0 - ratio / beta - ratio * ratio


def besselratio_inverse(r: float) -> float:
    """The unique ``beta >= 0`` with ``I_1(beta)/I_0(beta) = r``."""
    if not 0.0 <= r < 1.0:
        raise SpecError(f"must lie in [0, 1), got {r}", field="r")
    if r == 0.0:
        return 0.0
    upper = 1.0
    while bessel_ratio(upper) < r:
        upper *= 2.0
        if upper > 1e12:
            raise NumericalError(f"no concentration reproduces r={r!r}")
    root = brentq(lambda b: bessel_ratio(b) - r, 0.0, upper, xtol=1e-12, rtol=4 * np.finfo(float).eps)
    if root > 0:
        try:
            polished = newton(
                lambda b: bessel_ratio(b) - r, root, fprime=_ratio_slope, tol=RATIO_TOLERANCE
            )
        except RuntimeError:
            polished = root
        if abs(polished - root) < 1e-6 * max(1.0, root):
            root = polished
    return float(root)


def _mle(samples: np.ndarray) -> BetaEstimate:
    resultant = np.exp(1j * samples).mean()
    length = float(abs(resultant))
    if length >= 1.0 - 1e-15:
        raise NumericalError("degenerate concentration: all samples coincide")
    beta = besselratio_inverse(length)
    std_error = 1.0 / math.sqrt(samples.size * _ratio_slope(beta))
    return BetaEstimate(
        beta_eff=beta,
        std_error=std_error,
        n_samples=int(samples.size),
        method=BetaMethod.MLE,
        mean_direction=float(np.angle(resultant)),
    )


def _binned_model(edges: np.ndarray):
    nodes, weights = np.polynomial.legendre.leggauss(8)
    half = 0.5 * np.diff(edges)
    centres = 0.5 * (edges[:-1] + edges[1:])
    points = centres[:, None] + half[:, None] * nodes[None, :]

    def model(_, beta):
        # bin-averaged density, so narrow peaks are not biased by the bin width
        return (relative_phase_pdf_approx(points, beta) * weights).sum(axis=1) * 0.5

    return model


def _histogram_fit(samples: np.ndarray, n_bins: int) -> BetaEstimate:
    seed = _mle(samples)
    edges = np.linspace(-math.pi, math.pi, n_bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    width = edges[1] - edges[0]
    density = counts / (samples.size * width)
    sigma = np.sqrt(np.maximum(counts, 1.0)) / (samples.size * width)
    centres = 0.5 * (edges[:-1] + edges[1:])
    try:
        popt, pcov = curve_fit(
            _binned_model(edges),
            centres,
            density,
            p0=[max(seed.beta_eff, 1e-3)],
            sigma=sigma,
            absolute_sigma=True,
            bounds=(0.0, np.inf),
        )
    except RuntimeError as exc:
        raise NumericalError(f"histogram fit did not converge: {exc}") from exc
    return BetaEstimate(
        beta_eff=float(popt[0]),
        std_error=float(math.sqrt(pcov[0, 0])),
        n_samples=int(samples.size),
        method=BetaMethod.HISTOGRAM_FIT,
        mean_direction=seed.mean_direction,
    )


def estimate_beta(
    relative_phases: Sequence[float],
    method: BetaMethod | str = BetaMethod.MLE,
    n_bins: int = HISTOGRAM_BINS,
) -> BetaEstimate:
    """Effective inverse temperature from relative-phase samples (zero mean direction)."""
    method = BetaMethod(method)
    samples = np.asarray(relative_phases, dtype=float).reshape(-1)
    if samples.size < MIN_BETA_SAMPLES:
        raise DataError(f"need at least {MIN_BETA_SAMPLES} samples, got {samples.size}")
    if method is BetaMethod.MLE:
        return _mle(samples)
    return _histogram_fit(samples, n_bins)


def mean_energy_of_samples(
    ensemble: Sequence[TrajectoryRecord], graph: CouplingGraph, at_time: float
) -> EnergyEstimate:
    energies = xy_energies(_snapshot_rows(ensemble, at_time), graph)
    ddof = 1 if energies.size > 1 else 0
    return EnergyEstimate(
        mean=float(energies.mean()), std_dev=float(energies.std(ddof=ddof)), n_samples=int(energies.size)
    )


def photon_fluctuation_diagnostics(
    ensemble: Sequence[TrajectoryRecord],
    gamma_inj: float,
    diffusion_d: float,
    at_time: Optional[float] = None,
) -> PhotonDiagnostics:
    """Spread of ``sqrt(n_k/<n>)`` and the couplings and temperature it implies.

    With unequal photon numbers ``J_kl -> sqrt(n_k n_l)/<n> J_kl`` and
    ``beta_set -> gamma_inj <n> / D``. Without ``at_time`` every snapshot
    after t = 0 is pooled; the initial one is set by hand, not by the noise.
    """
    blocks = []
    for index, record in enumerate(ensemble):
        if record.photon_numbers is None:
            raise DataError(f"no photon data in trajectory {index}")
        if at_time is None:
            later = record.sample_times > 0
            rows = record.photon_numbers[later] if later.any() else record.photon_numbers
            blocks.append(rows.reshape(-1))
            continue
        position = record.index_of(at_time)
        if position is None:
            raise DataError(f"trajectory {index} has no snapshot at t={at_time:.6g} s")
        blocks.append(record.photon_numbers[position])
    if not blocks:
        raise DataError("empty ensemble")
    photons = np.concatenate(blocks)
    mean_photons = float(photons.mean())
    delta = float(np.sqrt(photons / mean_photons).std())
    correction = math.inf if diffusion_d == 0 else gamma_inj * mean_photons / diffusion_d
    return PhotonDiagnostics(
        delta=delta,
        effective_j_spread=2.0 * delta,
        beta_correction=correction,
        mean_photons=mean_photons,
    )


def convergence_time(
    times: Sequence[float],
    estimates: Sequence[BetaEstimate],
    beta_set: float,
    n_se: float = 2.0,
    rel_tol: float = 0.0,
) -> Optional[float]:
    """First acquisition time from which every later estimate sits within tolerance of ``beta_set``.

    The tolerance at each time is ``n_se`` standard errors plus ``rel_tol * beta_set``.
    """
    if len(times) != len(estimates):
        raise SpecError("one estimate per acquisition time", field="estimates")
    inside = [
        abs(estimate.beta_eff - beta_set) <= n_se * estimate.std_error + rel_tol * beta_set
        for estimate in estimates
    ]
    converged_from = None
    for time, ok in zip(times, inside):
        if ok and converged_from is None:
            converged_from = float(time)
        elif not ok:
            converged_from = None
    return converged_from


def sample_von_mises(beta: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draws from the zero-mean von Mises law, wrapped onto [-pi, pi)."""
    if beta < 0:
        raise SpecError(f"must be non-negative, got {beta}", field="beta")
    if beta == 0:
        return rng.uniform(-math.pi, math.pi, size=size)
    return wrap_phase(vonmises.rvs(beta, size=size, random_state=rng))


def open_chain_draw(n_spins: int, beta: float, rng: np.random.Generator) -> PhaseConfig:
    """Exact Boltzmann draw for the open chain: independent von Mises bond angles, summed from site 0.

    On a ring only the closing bond is off, and it heals locally under the dynamics.
    """
    if n_spins < 1:
        raise SpecError("must be at least 1", field="n_spins")
    bonds = sample_von_mises(beta, n_spins - 1, rng)
    return PhaseConfig(wrap_phase(np.concatenate([[0.0], np.cumsum(bonds)])))
