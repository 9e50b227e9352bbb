import enum
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

from ...errors import SpecError
from ...network import (
    ROUND_TRIP_TIME,
    injection_rate_from_transmittance,
    transmittance_for_injection_rate,
)
from ...opo import OpoParams, steady_state_photon_number

DESK_SPINS = 256
DESK_TRAJECTORIES = 200
FULL_SCALE_SPINS = 5000
FULL_SCALE_TRAJECTORIES = 1000


class Model(str, enum.Enum):
    KURAMOTO = "kuramoto"
    SPLIT = "split"
    FULL = "full"
    MCMC = "mcmc"


@dataclass(frozen=True)
class SweepPoint:
    """One simulated setting: both rates resolved, whichever side the sweep varied."""

    index: int
    beta_set: float
    gamma_inj: float
    d_theta: float
    transmittance: Optional[float]

    def as_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "beta_set": self.beta_set if math.isfinite(self.beta_set) else None,
            "gamma_inj": self.gamma_inj,
            "d_theta": self.d_theta,
            "transmittance": self.transmittance,
        }


@dataclass(frozen=True)
class ExperimentSpec:
    model: Model = Model.KURAMOTO
    n_spins: int = DESK_SPINS
    coupling: float = 1.0
    gamma_inj: Optional[float] = None
    transmittance: Optional[float] = None
    round_trip: float = ROUND_TRIP_TIME
    d_theta: Optional[float] = None
    diffusion_d: Optional[float] = None
    pump_ratio: float = 2.0
    gamma_s: Optional[float] = None
    gamma_i: Optional[float] = None
    gamma_p: Optional[float] = None
    kappa: Optional[float] = None
    beta_set: tuple[float, ...] = ()
    d_theta_sweep: tuple[float, ...] = ()
    t_a: tuple[float, ...] = ()
    dt: Optional[float] = None
    n_trajectories: int = DESK_TRAJECTORIES
    master_seed: int = 0
    n_sweeps: int = 20000
    thin: int = 10
    proposal_width: float = 1.0
    output_dir: Path = field(default_factory=lambda: Path("nopo-xy-out"))

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "model", Model(self.model))
        except ValueError as exc:
            choices = ", ".join(m.value for m in Model)
            raise SpecError(f"expected one of {choices}, got {self.model!r}", field="model") from exc
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        self._validate()

    @classmethod
    def from_keys(cls, keys: dict[str, Any], **defaults: Any) -> "ExperimentSpec":
        """Build from normalised flat keys (see ``settings.EXPERIMENT_KEYS``)."""
        names = {
            "model": "model",
            "graph.n_spins": "n_spins",
            "graph.coupling": "coupling",
            "rates.gamma_inj": "gamma_inj",
            "rates.transmittance": "transmittance",
            "rates.round_trip": "round_trip",
            "rates.d_theta": "d_theta",
            "rates.diffusion_d": "diffusion_d",
            "opo.pump_ratio": "pump_ratio",
            "opo.gamma_s": "gamma_s",
            "opo.gamma_i": "gamma_i",
            "opo.gamma_p": "gamma_p",
            "opo.kappa": "kappa",
            "sweep.beta_set": "beta_set",
            "sweep.d_theta": "d_theta_sweep",
            "acquisition.t_a": "t_a",
            "acquisition.dt": "dt",
            "ensemble.n_trajectories": "n_trajectories",
            "ensemble.master_seed": "master_seed",
            "mcmc.n_sweeps": "n_sweeps",
            "mcmc.thin": "thin",
            "mcmc.proposal_width": "proposal_width",
            "output.dir": "output_dir",
        }
        values = dict(defaults)
        for key, value in keys.items():
            name = names[key]
            values[name] = tuple(value) if isinstance(value, list) else value
        return cls(**values)

    def _validate(self) -> None:
        if self.n_spins < 3:
            raise SpecError(f"a ring needs at least 3 spins, got {self.n_spins}", field="graph.n_spins")
        if self.n_trajectories < 1:
            raise SpecError("must be at least 1", field="ensemble.n_trajectories")
        if not math.isfinite(self.coupling):
            raise SpecError("must be finite", field="graph.coupling")
        if self.beta_set and self.d_theta_sweep:
            raise SpecError("give sweep.beta_set or sweep.d_theta, not both", field="sweep.beta_set")
        if any(not (math.isfinite(b) and b > 0) for b in self.beta_set):
            raise SpecError("every beta_set must be positive and finite", field="sweep.beta_set")
        if self.model is Model.MCMC:
            if not self.beta_set:
                raise SpecError("the Metropolis model needs a beta_set grid", field="sweep.beta_set")
            if self.thin < 1 or self.n_sweeps < 1:
                raise SpecError("n_sweeps and thin must be at least 1", field="mcmc.thin")
            return
        if self.gamma_inj is not None and self.transmittance is not None:
            raise SpecError("give rates.gamma_inj or rates.transmittance, not both", field="rates.gamma_inj")
        if self.d_theta is not None and self.diffusion_d is not None:
            raise SpecError("give rates.d_theta or rates.diffusion_d, not both", field="rates.d_theta")
        has_rate = self.gamma_inj is not None or self.transmittance is not None
        has_diffusion = self.d_theta is not None or self.diffusion_d is not None or bool(self.d_theta_sweep)
        if self.beta_set:
            if has_rate == has_diffusion:
                raise SpecError(
                    "a beta_set sweep fixes exactly one of the injection rate and the diffusion",
                    field="sweep.beta_set",
                )
        elif not (has_rate and has_diffusion):
            missing = "rates.gamma_inj" if not has_rate else "rates.d_theta"
            raise SpecError("required without a beta_set sweep", field=missing)
        if self.d_theta_sweep and (self.d_theta is not None or self.diffusion_d is not None):
            raise SpecError("sweep.d_theta replaces rates.d_theta", field="sweep.d_theta")
        if any(value < 0 for value in self.d_theta_sweep):
            raise SpecError("must be non-negative", field="sweep.d_theta")
        if not self.t_a:
            raise SpecError("need at least one acquisition time", field="acquisition.t_a")
        if any(t < 0 for t in self.t_a) or any(b <= a for a, b in zip(self.t_a, self.t_a[1:])):
            raise SpecError("must be non-negative and strictly increasing", field="acquisition.t_a")
        if self.model is not Model.KURAMOTO and self.pump_ratio <= 1.0:
            raise SpecError("the NOPO models need a pump above threshold", field="opo.pump_ratio")

    @property
    def needs_opo(self) -> bool:
        return self.model in (Model.SPLIT, Model.FULL) or self.diffusion_d is not None

    def opo_params(self, gamma_inj_scale: float) -> OpoParams:
        """OPO parameters; unset rates follow gamma_s = 1e3 gamma_inj and pump/idler 100x faster."""
        gamma_s = self.gamma_s if self.gamma_s is not None else 1e3 * max(gamma_inj_scale, 1.0)
        gamma_i = self.gamma_i if self.gamma_i is not None else 100.0 * gamma_s
        gamma_p = self.gamma_p if self.gamma_p is not None else 100.0 * gamma_s
        kappa = self.kappa if self.kappa is not None else 1e-3 * gamma_s
        return OpoParams.from_pump_ratio(self.pump_ratio, gamma_s, gamma_i, gamma_p, kappa)

    def _fixed_gamma_inj(self) -> Optional[float]:
        if self.transmittance is not None:
            return injection_rate_from_transmittance(self.transmittance, self.round_trip)
        return self.gamma_inj

    def points(self, steady_photons: Optional[float] = None) -> list[SweepPoint]:
        """Resolve the sweep into points.

        ``steady_photons`` converts between ``diffusion_d`` and ``d_theta``
        (``d_theta = D / n_ss``) and is required when ``diffusion_d`` is given.
        """
        if self.model is Model.MCMC:
            return [SweepPoint(i, beta, math.nan, math.nan, None) for i, beta in enumerate(self.beta_set)]
        fixed_rate = self._fixed_gamma_inj()
        fixed_d_theta = self.d_theta
        if self.diffusion_d is not None:
            if not steady_photons:
                raise SpecError("diffusion_d needs the OPO steady state", field="rates.diffusion_d")
            fixed_d_theta = self.diffusion_d / steady_photons
        points = []
        if self.beta_set:
            for i, beta in enumerate(self.beta_set):
                if fixed_rate is not None:
                    gamma_inj, d_theta = fixed_rate, fixed_rate / beta
                else:
                    gamma_inj, d_theta = beta * fixed_d_theta, fixed_d_theta
                points.append(self._point(i, gamma_inj, d_theta))
        elif self.d_theta_sweep:
            for i, d_theta in enumerate(self.d_theta_sweep):
                points.append(self._point(i, fixed_rate, d_theta))
        else:
            points.append(self._point(0, fixed_rate, fixed_d_theta))
        return points

    def _point(self, index: int, gamma_inj: float, d_theta: float) -> SweepPoint:
        beta = math.inf if d_theta == 0 else gamma_inj / d_theta
        try:
            transmittance = transmittance_for_injection_rate(gamma_inj, self.round_trip)
        except SpecError:
            transmittance = None
        return SweepPoint(index, beta, gamma_inj, d_theta, transmittance)

    def resolve(self) -> tuple[Optional[OpoParams], list[SweepPoint]]:
        """OPO parameters (None when the run needs none) and the resolved sweep points."""
        if not self.needs_opo or self.model is Model.MCMC:
            return None, self.points()
        scale = 0.0
        if self.gamma_s is None:
            fixed = self._fixed_gamma_inj()
            if fixed is not None:
                scale = fixed
            elif self.diffusion_d is None:
                scale = max(p.gamma_inj for p in self.points())
            else:
                raise SpecError(
                    "required when the injection rate follows from diffusion_d", field="opo.gamma_s"
                )
        opo = self.opo_params(scale)
        return opo, self.points(steady_state_photon_number(opo))

    def as_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["model"] = self.model.value
        payload["output_dir"] = str(self.output_dir)
        payload["beta_set"] = list(self.beta_set)
        payload["d_theta_sweep"] = list(self.d_theta_sweep)
        payload["t_a"] = list(self.t_a)
        return payload
