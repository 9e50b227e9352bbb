"""Exact and large-N statistics of the one-dimensional XY ring (J = 1).

The transfer-matrix eigenvalues of the ring are the modified Bessel functions
``I_n(beta)``. Raw powers ``I_n(beta)^N`` overflow at once for the ring sizes
of interest, so every sum below runs on the ratios
``rho_n = I_n(beta) / I_0(beta) <= 1`` built from exponentially scaled values
``e^{-beta} I_n(beta)``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import iv, ive, logsumexp

from .errors import NumericalError, SpecError

LOGGER = logging.getLogger(__name__)

DEFAULT_N_MAX = 40
TRUNCATION_TOLERANCE = 1e-14
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RingSpec:
    n_spins: int
    beta: float

    def __post_init__(self) -> None:
        if self.n_spins < 3:
            raise SpecError(f"a ring needs at least 3 spins, got {self.n_spins}", field="n_spins")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise SpecError(f"must be finite and non-negative, got {self.beta}", field="beta")


@dataclass(frozen=True)
class QuadratureResult:
    """Brute-force Gibbs averages on a periodic grid of the bond angles."""

    log_z: float
    grid: np.ndarray
    pdf: np.ndarray
    mean_energy: float


def bessel_i(n: int, x):
    """Modified Bessel function of the first kind, ``I_n(x)`` for ``x >= 0``."""
    values = np.asarray(x, dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise SpecError("argument must be finite and non-negative", field="x")
    # I_{-n} = I_n for integer orders
    result = iv(abs(int(n)), values)
    return float(result) if result.ndim == 0 else result


def bessel_ie(n: int, x):
    """Exponentially scaled ``e^{-x} I_n(x)``; finite for any ``x >= 0``."""
    values = np.asarray(x, dtype=float)
    if np.any(values < 0):
        raise SpecError("argument must be non-negative", field="x")
    result = ive(abs(int(n)), values)
    return float(result) if result.ndim == 0 else result


def bessel_ratio(beta):
    """``I_1(beta) / I_0(beta)``, the mean resultant length of the von Mises law."""
    values = np.asarray(beta, dtype=float)
    result = ive(1, values) / ive(0, values)
    return float(result) if result.ndim == 0 else result


def _log_rho(beta: float, n_max: int) -> np.ndarray:
    """log(I_n / I_0) for n = 0..n_max + 2 (the tail bound looks two orders past n_max)."""
    orders = np.arange(n_max + 3)
    scaled = ive(orders, beta)
    with np.errstate(divide="ignore"):
        return np.log(scaled) - np.log(scaled[0])


def _check_n_max(n_max: int) -> None:
    if n_max < 1:
        raise SpecError(f"must be at least 1, got {n_max}", field="n_max")


def _log_sum_powers(log_rho: np.ndarray, power: int, n_max: int) -> float:
    """log sum_{|n| <= n_max} rho_n^power, orders n and -n counted separately."""
    terms = power * log_rho[: n_max + 1]
    return float(logsumexp(np.concatenate([terms, terms[1:]])))


def _check_truncation(spec: RingSpec, log_rho: np.ndarray, n_max: int) -> None:
    power = spec.n_spins
    log_first = power * log_rho[n_max + 1]
    if not np.isfinite(log_first):
        return
    ratio = math.exp(power * (log_rho[n_max + 2] - log_rho[n_max + 1]))
    if ratio >= 1.0:
        raise NumericalError(f"Bessel ratios no longer decay at n_max={n_max}")
    # I_{n+1}/I_n decreases in n, so the neglected tail is bounded by a geometric series
    log_tail = math.log(2.0) + log_first - math.log1p(-ratio)
    log_kept = _log_sum_powers(log_rho, power, n_max)
    if log_tail - log_kept > math.log(TRUNCATION_TOLERANCE):
        raise NumericalError(
            f"truncation at n_max={n_max} leaves a relative tail of "
            f"{math.exp(log_tail - log_kept):.3g}; increase n_max"
        )


def partition_function(spec: RingSpec, n_max: int = DEFAULT_N_MAX) -> float:
    """log Z with ``Z = sum_n I_n(beta)^N``."""
    _check_n_max(n_max)
    log_rho = _log_rho(spec.beta, n_max)
    _check_truncation(spec, log_rho, n_max)
    log_i0 = spec.beta + math.log(ive(0, spec.beta))
    return spec.n_spins * log_i0 + _log_sum_powers(log_rho, spec.n_spins, n_max)


def relative_phase_pdf_exact(theta_rel, spec: RingSpec, n_max: int = DEFAULT_N_MAX):
    """Exact density of the relative phase between ring neighbours."""
    _check_n_max(n_max)
    theta = np.asarray(theta_rel, dtype=float)
    log_rho = _log_rho(spec.beta, n_max)
    _check_truncation(spec, log_rho, n_max)
    n = spec.n_spins
    log_norm = _log_sum_powers(log_rho, n, n_max)
    orders = np.arange(1, n_max + 1)
    weights = np.exp((n - 1) * log_rho[1 : n_max + 1] - log_norm)
    series = math.exp(-log_norm) + 2.0 * np.tensordot(
        np.cos(np.multiply.outer(theta, orders)), weights, axes=([-1], [0])
    )
    density = np.exp(spec.beta * (np.cos(theta) - 1.0)) / (TWO_PI * ive(0, spec.beta)) * series
    return float(density) if density.ndim == 0 else density


def mean_energy_exact(spec: RingSpec, n_max: int = DEFAULT_N_MAX) -> float:
    """Exact ``<H>`` of the ring, ``-(N/Z) sum_n I_n^{N-1} I_{n+1}``."""
    _check_n_max(n_max)
    log_rho = _log_rho(spec.beta, n_max)
    _check_truncation(spec, log_rho, n_max)
    n = spec.n_spins
    log_norm = _log_sum_powers(log_rho, n, n_max)
    orders = np.arange(-n_max, n_max + 1)
    log_terms = (n - 1) * log_rho[np.abs(orders)] + log_rho[np.abs(orders + 1)]
    # + 0.0 turns -0.0 into 0.0 at beta = 0
    return -n * float(np.exp(logsumexp(log_terms) - log_norm)) + 0.0


def relative_phase_pdf_approx(theta_rel, beta: float):
    """von Mises density ``exp(beta cos t) / (2 pi I_0(beta))`` with zero mean direction."""
    if not beta >= 0:
        raise SpecError(f"must be non-negative, got {beta}", field="beta")
    theta = np.asarray(theta_rel, dtype=float)
    density = np.exp(beta * (np.cos(theta) - 1.0)) / (TWO_PI * ive(0, beta))
    return float(density) if density.ndim == 0 else density


def mean_energy_approx(n_spins: int, beta: float) -> float:
    if not beta >= 0:
        raise SpecError(f"must be non-negative, got {beta}", field="beta")
    return -n_spins * bessel_ratio(beta) + 0.0


def max_pdf_gap(spec: RingSpec, n_max: int = DEFAULT_N_MAX, n_points: int = 721) -> float:
    """Sup-norm distance between the exact and the large-N relative-phase densities."""
    grid = np.linspace(-math.pi, math.pi, n_points)
    gap = relative_phase_pdf_exact(grid, spec, n_max) - relative_phase_pdf_approx(grid, spec.beta)
    return float(np.max(np.abs(gap)))


def torus_quadrature(spec: RingSpec, n_points: Optional[int] = None) -> QuadratureResult:
    """Gibbs averages by direct quadrature over the bond angles, for N = 3 or 4.

    Global rotation is gauged out, leaving N - 1 free bond angles; the last bond
    closes the ring. The integrand is periodic, so the plain trapezoid rule on an
    equispaced grid converges spectrally.
    """
    n = spec.n_spins
    if n not in (3, 4):
        raise SpecError(f"quadrature oracle supports N in (3, 4), got {n}", field="n_spins")
    if n_points is None:
        n_points = 2048 if n == 3 else 128
    grid = -math.pi + TWO_PI * np.arange(n_points) / n_points
    beta = spec.beta
    cos_grid = np.cos(grid)
    # weights are scaled by exp(-N beta) to stay finite
    marginal = np.zeros(n_points)
    energy_sum = 0.0
    if n == 3:
        closing = np.cos(grid[:, None] + grid[None, :])
        bonds = cos_grid[:, None] + cos_grid[None, :] + closing
        weight = np.exp(beta * (bonds - 3.0))
        marginal = weight.sum(axis=1)
        energy_sum = float(-(weight * bonds).sum())
    else:
        pair = grid[:, None] + grid[None, :]
        for i, first in enumerate(grid):
            closing = np.cos(first + pair)
            bonds = cos_grid[i] + cos_grid[:, None] + cos_grid[None, :] + closing
            weight = np.exp(beta * (bonds - 4.0))
            marginal[i] = weight.sum()
            energy_sum -= float((weight * bonds).sum())
    total = marginal.sum()
    scaled_z = total / n_points ** (n - 1)
    log_z = math.log(scaled_z) + n * beta
    pdf = marginal / (total * TWO_PI / n_points)
    LOGGER.debug(f"torus quadrature N={n} beta={beta:g}: log Z={log_z:.12g}")
    return QuadratureResult(log_z=log_z, grid=grid, pdf=pdf, mean_energy=energy_sum / total)
