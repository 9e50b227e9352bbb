"""Single NOPO: three-field equations, adiabatic elimination, gain saturation.

Rates are in Hz and field amplitudes are photon-number normalised
(``|a|^2`` is a photon number). Only ratios of the parameters matter for the
reduced model, so the tests run in normalised units.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import SpecError

LOGGER = logging.getLogger(__name__)

ADIABATIC_RATIO = 1e-2
STABILITY_LIMIT = 0.1


@dataclass(frozen=True)
class OpoParams:
    gamma_s: float
    gamma_i: float
    gamma_p: float
    kappa: float
    pump_amplitude: float

    def __post_init__(self) -> None:
        for name in ("gamma_s", "gamma_i", "gamma_p", "kappa"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise SpecError(f"must be a positive rate, got {value}", field=name)
        if not (math.isfinite(self.pump_amplitude) and self.pump_amplitude >= 0):
            raise SpecError(
                f"must be non-negative, got {self.pump_amplitude}", field="pump_amplitude"
            )

    @classmethod
    def from_pump_ratio(
        cls,
        ratio: float,
        gamma_s: float = 1e-3,
        gamma_i: float = 1.0,
        gamma_p: float = 1.0,
        kappa: float = 1.0,
    ) -> "OpoParams":
        """Parameters whose pump sits ``ratio`` times above threshold."""
        if ratio < 0:
            raise SpecError(f"must be non-negative, got {ratio}", field="pump_ratio")
        threshold = _threshold(gamma_s, gamma_i, gamma_p, kappa)
        return cls(gamma_s, gamma_i, gamma_p, kappa, ratio * threshold)

    @property
    def threshold(self) -> float:
        return _threshold(self.gamma_s, self.gamma_i, self.gamma_p, self.kappa)

    @property
    def pump_ratio(self) -> float:
        return self.pump_amplitude / self.threshold

    @property
    def is_adiabatic(self) -> bool:
        """Signal decay much slower than pump and idler decay."""
        fast = min(self.gamma_p, self.gamma_i)
        return self.gamma_s <= ADIABATIC_RATIO * fast


@dataclass(frozen=True)
class ThreeFieldState:
    a_p: complex
    a_s: complex
    a_i: complex

    def __post_init__(self) -> None:
        for name in ("a_p", "a_s", "a_i"):
            if not np.isfinite(complex(getattr(self, name))):
                raise SpecError("field amplitude must be finite", field=name)

    def as_array(self) -> np.ndarray:
        return np.array([self.a_p, self.a_s, self.a_i], dtype=complex)

    @property
    def signal_photons(self) -> float:
        return abs(self.a_s) ** 2


@dataclass(frozen=True)
class FieldTrajectory:
    """Recorded integration output: times and one column per field."""

    times: np.ndarray
    fields: np.ndarray

    def final(self) -> ThreeFieldState:
        a_p, a_s, a_i = self.fields[-1]
        return ThreeFieldState(complex(a_p), complex(a_s), complex(a_i))


@dataclass(frozen=True)
class SignalTrajectory:
    times: np.ndarray
    a_s: np.ndarray

    @property
    def photons(self) -> np.ndarray:
        return np.abs(self.a_s) ** 2


def _threshold(gamma_s: float, gamma_i: float, gamma_p: float, kappa: float) -> float:
    return math.sqrt(gamma_p * math.sqrt(gamma_s * gamma_i) / (2.0 * kappa))


def gain_saturation(x):
    """Gain-saturation factor s(x) in (0, 1]; accepts scalars or arrays."""
    values = np.asarray(x, dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise SpecError("saturation argument must be finite and non-negative", field="x")
    if values.ndim == 0:
        return float(kernels.saturation(float(values)))
    flat = kernels.saturation_array(np.ascontiguousarray(values.reshape(-1)))
    return flat.reshape(values.shape)


def threshold_pump(params: OpoParams) -> float:
    return params.threshold


def saturation_photon_number(params: OpoParams) -> float:
    if params.pump_amplitude <= 0:
        raise SpecError("saturation photon number needs a non-zero pump", field="pump_amplitude")
    return params.gamma_p**2 * params.gamma_i / (8.0 * params.kappa**2 * params.pump_amplitude**2)


def steady_state_photon_number(params: OpoParams) -> float:
    """Signal photon number of the oscillating solution; zero at or below threshold."""
    ratio = params.pump_ratio
    if ratio <= 1.0:
        return 0.0
    excess = ratio - 1.0
    return saturation_photon_number(params) * (excess**1.5 + excess**0.5) ** 2


def threshold_curve(params: OpoParams, ratios: Sequence[float]) -> np.ndarray:
    """Steady-state photon number against pump ratio, other parameters fixed."""
    curve = []
    for ratio in ratios:
        swept = OpoParams.from_pump_ratio(
            ratio, params.gamma_s, params.gamma_i, params.gamma_p, params.kappa
        )
        curve.append(steady_state_photon_number(swept))
    return np.asarray(curve)


def _rk4(
    rhs: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    dt: float,
    n_steps: int,
    record_every: int,
) -> tuple[np.ndarray, np.ndarray]:
    if n_steps < 0:
        raise SpecError("must be non-negative", field="n_steps")
    if record_every < 1:
        raise SpecError("must be at least 1", field="record_every")
    y = np.array(y0, dtype=complex)
    times = [0.0]
    states = [y.copy()]
    for step in range(1, n_steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % record_every == 0 or step == n_steps:
            times.append(step * dt)
            states.append(y.copy())
    return np.asarray(times), np.asarray(states)


def _check_step(dt: float, rates: dict[str, float]) -> None:
    if not (math.isfinite(dt) and dt > 0):
        raise SpecError(f"must be positive, got {dt}", field="dt")
    name, rate = max(rates.items(), key=lambda item: item[1])
    if dt * rate >= STABILITY_LIMIT:
        raise SpecError(
            f"dt * {name} = {dt * rate:.3g} is not below {STABILITY_LIMIT}", field="dt"
        )


def integrate_three_field(
    initial: ThreeFieldState,
    params: OpoParams,
    dt: float,
    n_steps: int,
    record_every: int = 1,
) -> FieldTrajectory:
    """Integrate the pump/signal/idler equations with a real constant pump drive.

    The drive enters as ``sqrt(gamma_p/2) F_p`` and pump depletion carries
    ``2 kappa``: in this normalisation eliminating pump and idler gives exactly
    the published threshold, saturation photon number and steady state.
    """
    drive = math.sqrt(0.5 * params.gamma_p) * params.pump_amplitude
    # unsaturated pump amplitude sets the fastest parametric rate
    pump_level = 2.0 * drive / params.gamma_p
    _check_step(
        dt,
        {
            "gamma_p": params.gamma_p,
            "gamma_i": params.gamma_i,
            "gamma_s": params.gamma_s,
            "parametric_rate": params.kappa * pump_level**2,
        },
    )
    if not params.is_adiabatic:
        LOGGER.warning(
            f"gamma_s={params.gamma_s:g} is not much smaller than "
            f"gamma_p={params.gamma_p:g}, gamma_i={params.gamma_i:g}"
        )
    half_p, half_s, half_i = 0.5 * params.gamma_p, 0.5 * params.gamma_s, 0.5 * params.gamma_i
    kappa = params.kappa

    def rhs(y: np.ndarray) -> np.ndarray:
        a_p, a_s, a_i = y
        pump_sq = a_p * a_p
        return np.array(
            [
                -half_p * a_p - 2.0 * kappa * np.conj(a_p) * a_s * a_i + drive,
                -half_s * a_s + 0.5 * kappa * np.conj(a_i) * pump_sq,
                -half_i * a_i + 0.5 * kappa * np.conj(a_s) * pump_sq,
            ]
        )

    times, states = _rk4(rhs, initial.as_array(), dt, n_steps, record_every)
    if not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.all(np.isfinite(states), axis=1)))
        raise SpecError(f"three-field integration diverged near t={times[bad]:.6g}", field="dt")
    LOGGER.debug(f"three-field run: {n_steps} steps, final |a_s|^2={abs(states[-1, 1]) ** 2:.6g}")
    return FieldTrajectory(times, states)


def integrate_signal_scalar(
    initial: complex,
    params: OpoParams,
    dt: float,
    n_steps: int,
    record_every: int = 1,
) -> SignalTrajectory:
    """Integrate the adiabatically reduced signal equation."""
    _check_step(dt, {"gamma_s": params.gamma_s})
    above = params.pump_ratio > 1.0
    if above and initial == 0:
        raise SpecError(
            "a_s = 0 is an unstable fixed point above threshold; seed a non-zero field",
            field="initial",
        )
    ratio = params.pump_ratio
    n0 = saturation_photon_number(params) if params.pump_amplitude > 0 else math.inf
    gamma_s = params.gamma_s

    def rhs(y: np.ndarray) -> np.ndarray:
        photons = float(abs(y[0]) ** 2)
        return kernels.opo_gain(photons, n0, ratio, gamma_s) * y

    times, states = _rk4(rhs, np.array([initial], dtype=complex), dt, n_steps, record_every)
    return SignalTrajectory(times, states[:, 0])


def adiabatic_seed(params: OpoParams, amplitude: float, phase: float = 0.0) -> ThreeFieldState:
    """Small signal seed with the idler at the conjugate phase and an undepleted pump."""
    drive = math.sqrt(0.5 * params.gamma_p) * params.pump_amplitude
    a_p = 2.0 * drive / params.gamma_p
    a_s = amplitude * complex(math.cos(phase), math.sin(phase))
    a_i = (params.kappa / params.gamma_i) * np.conj(a_s) * a_p**2
    return ThreeFieldState(complex(a_p), a_s, complex(a_i))


def regime_report(params: OpoParams) -> Optional[str]:
    """Human-readable note when the parameters leave the adiabatic regime."""
    if params.is_adiabatic:
        return None
    return (
        f"gamma_s/gamma_p={params.gamma_s / params.gamma_p:.3g} and "
        f"gamma_s/gamma_i={params.gamma_s / params.gamma_i:.3g} exceed {ADIABATIC_RATIO}"
    )
