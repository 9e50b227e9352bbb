import math
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ...analytics import (
    RingSpec,
    bessel_ratio,
    mean_energy_approx,
    mean_energy_exact,
    relative_phase_pdf_approx,
)
from ...core import CouplingGraph, ring_graph
from ...errors import NumericalError
from ...estimation import (
    BetaMethod,
    align_to_coupling,
    collect_relative_phases,
    convergence_time,
    decay_curve,
    estimate_beta,
    fit_diffusion,
    mean_energy_of_samples,
    photon_fluctuation_diagnostics,
    relative_phases,
)
from ...network import (
    EnsembleSpec,
    FullFieldSimulator,
    KuramotoParams,
    KuramotoSimulator,
    NetworkParams,
    Simulator,
    SplitSimulator,
    TrajectoryRecord,
    ensemble_run,
    trajectory_seed,
)
from ...opo import OpoParams, steady_state_photon_number
from ..config.logger import LOGGER
from ..state.models import ExperimentSpec, Model, SweepPoint

SUMMARY_SCHEMA = "nopo-xy/summary/1"
SAMPLE_COLUMNS = ("trajectory_id", "t_a_seconds", "k", "theta_k", "theta_rel_k")
REFERENCE_BINS = 36


class ExperimentRunner:
    def __init__(self, app):
        self.app = app

    def run(self, spec: ExperimentSpec) -> dict[str, Any]:
        """Simulate every sweep point, write one samples CSV per point and ``summary.json``."""
        opo, points = spec.resolve()
        graph = ring_graph(spec.n_spins, spec.coupling)
        LOGGER.info(f"experiment: {spec.model.value}, {len(points)} point(s), N={spec.n_spins}")
        results = []
        for point in points:
            seed = trajectory_seed(spec.master_seed, point.index)
            if spec.model is Model.MCMC:
                results.append(self._run_chains(spec, graph, point, seed))
            else:
                results.append(self._run_point(spec, graph, opo, point, seed))
        summary = {
            "schema": SUMMARY_SCHEMA,
            "experiment": spec.as_dict(),
            "opo": None if opo is None else _opo_dict(opo),
            "points": results,
        }
        self.app.output.write_json(spec.output_dir / "summary.json", summary)
        return summary

    def simulator_for(
        self, spec: ExperimentSpec, graph: CouplingGraph, opo: Optional[OpoParams], point: SweepPoint
    ) -> Simulator:
        if spec.model is Model.KURAMOTO:
            return KuramotoSimulator(KuramotoParams(point.gamma_inj, point.d_theta, graph))
        diffusion_d = point.d_theta * steady_state_photon_number(opo)
        params = NetworkParams(opo, point.gamma_inj, diffusion_d, graph)
        if spec.model is Model.SPLIT:
            return SplitSimulator(params)
        return FullFieldSimulator(params)

    def _run_point(
        self,
        spec: ExperimentSpec,
        graph: CouplingGraph,
        opo: Optional[OpoParams],
        point: SweepPoint,
        seed: int,
    ) -> dict[str, Any]:
        simulator = self.simulator_for(spec, graph, opo, point)
        dt = spec.dt if spec.dt is not None else simulator.default_dt()
        ensemble = ensemble_run(
            EnsembleSpec(simulator, spec.n_trajectories, dt, tuple(spec.t_a), seed),
            workers=self.app.settings.threads,
        )
        samples_path = spec.output_dir / f"samples_{point.index:02d}.csv"
        self.write_samples(samples_path, ensemble)

        target = point.beta_set * abs(spec.coupling)
        acquisitions = []
        estimates = []
        for t_a in spec.t_a:
            rel = align_to_coupling(collect_relative_phases(ensemble, t_a), spec.coupling)
            mle = estimate_beta(rel, BetaMethod.MLE)
            fitted = _histogram_fit_or_none(rel, t_a)
            energy = mean_energy_of_samples(ensemble, graph, t_a)
            estimates.append(mle)
            entry = {
                "t_a": t_a,
                "beta_eff": mle.beta_eff,
                "beta_eff_std_error": mle.std_error,
                "beta_eff_histogram_fit": None if fitted is None else fitted.beta_eff,
                "beta_eff_histogram_fit_std_error": None if fitted is None else fitted.std_error,
                "mean_direction": mle.mean_direction,
                "n_samples": mle.n_samples,
                "mean_energy": energy.mean,
                "energy_std_dev": energy.std_dev,
                "energy_std_error": energy.std_error,
            }
            if simulator.records_photons:
                diagnostics = photon_fluctuation_diagnostics(
                    ensemble, point.gamma_inj, simulator.params.diffusion_d, at_time=t_a
                )
                entry["photon_delta"] = diagnostics.delta
                entry["mean_photons"] = diagnostics.mean_photons
                entry["beta_correction"] = diagnostics.beta_correction
            acquisitions.append(entry)

        result = {
            **point.as_dict(),
            "model": spec.model.value,
            "round_trip": spec.round_trip,
            "dt": dt,
            "master_seed": seed,
            "params_digest": simulator.params_digest,
            "samples_file": samples_path.name,
            "acquisitions": acquisitions,
            "reference": self.reference(spec.n_spins, point.beta_set, spec.coupling),
        }
        if math.isfinite(target):
            result["convergence_time"] = convergence_time(spec.t_a, estimates, target)
        if point.gamma_inj == 0 and spec.t_a[0] == 0 and len(spec.t_a) >= 3:
            curve = decay_curve(ensemble)
            fit = fit_diffusion(curve)
            result["decay"] = {
                "times": curve.times,
                "mean_cosine": curve.mean_cosine,
                "std_error": curve.std_error,
                "d_theta_fit": fit.d_theta,
                "d_theta_fit_std_error": fit.std_error,
                "n_points": fit.n_points,
            }
        return result

    def _run_chains(self, spec: ExperimentSpec, graph: CouplingGraph, point: SweepPoint, seed: int) -> dict[str, Any]:
        chains = self.app.chains.run(
            graph,
            point.beta_set,
            n_chains=spec.n_trajectories,
            n_sweeps=spec.n_sweeps,
            thin=spec.thin,
            proposal_width=spec.proposal_width,
            seed=seed,
        )
        samples_path = spec.output_dir / f"samples_{point.index:02d}.csv"
        self.app.chains.write_samples(samples_path, chains)
        return {
            "index": point.index,
            "beta_set": point.beta_set,
            "model": spec.model.value,
            "master_seed": seed,
            "samples_file": samples_path.name,
            "chains": self.app.chains.summarise(graph, point.beta_set, chains, spec.coupling),
            "reference": self.reference(spec.n_spins, point.beta_set, spec.coupling),
        }

    def reference(self, n_spins: int, beta_set: float, coupling: float = 1.0) -> Optional[dict[str, Any]]:
        """Large-N and exact ring references at concentration ``beta_set |J|``.

        For J < 0 the relative-phase law is the J > 0 one shifted by pi; the
        exact energy is omitted on odd rings, which are frustrated.
        """
        beta = beta_set * abs(coupling)
        if not math.isfinite(beta):
            return None
        centres = -math.pi + (np.arange(REFERENCE_BINS) + 0.5) * (2.0 * math.pi / REFERENCE_BINS)
        reference = {
            "beta": beta,
            "bessel_ratio": bessel_ratio(beta),
            "mean_energy_approx": abs(coupling) * mean_energy_approx(n_spins, beta),
            "mean_energy_exact": None,
            "pdf_bin_centres": centres,
            "pdf_approx": relative_phase_pdf_approx(align_to_coupling(centres, coupling), beta),
        }
        if coupling < 0 and n_spins % 2:
            LOGGER.info(f"odd antiferromagnetic ring {n_spins}: no exact energy reference")
            return reference
        try:
            reference["mean_energy_exact"] = abs(coupling) * mean_energy_exact(RingSpec(n_spins, beta))
        except NumericalError as exc:
            LOGGER.warning(f"exact ring energy unavailable at beta={beta:g}: {exc}")
        return reference

    def write_samples(self, path: Path, ensemble: list[TrajectoryRecord]) -> Path:
        """One row per (trajectory, acquisition time, spin); photon numbers when recorded."""
        phases = np.stack([record.phases for record in ensemble])
        n_traj, n_times, n_spins = phases.shape
        trajectory_id, time_index, k = np.meshgrid(
            np.arange(n_traj), np.arange(n_times), np.arange(n_spins), indexing="ij"
        )
        times = ensemble[0].sample_times[time_index]
        header = list(SAMPLE_COLUMNS)
        columns = [
            trajectory_id.reshape(-1),
            times.reshape(-1),
            k.reshape(-1),
            phases.reshape(-1),
            relative_phases(phases).reshape(-1),
        ]
        if ensemble[0].has_photons:
            header.append("n_k")
            columns.append(np.stack([record.photon_numbers for record in ensemble]).reshape(-1))
        return self.app.output.write_table(path, header, columns, integer_columns=("trajectory_id", "k"))


def _histogram_fit_or_none(rel: np.ndarray, t_a: float):
    try:
        return estimate_beta(rel, BetaMethod.HISTOGRAM_FIT)
    except NumericalError as exc:
        LOGGER.warning(f"histogram fit skipped at t_a={t_a:g}: {exc}")
        return None


def _opo_dict(opo: OpoParams) -> dict[str, Any]:
    return {
        "gamma_s": opo.gamma_s,
        "gamma_i": opo.gamma_i,
        "gamma_p": opo.gamma_p,
        "kappa": opo.kappa,
        "pump_amplitude": opo.pump_amplitude,
        "pump_ratio": opo.pump_ratio,
        "threshold": opo.threshold,
        "is_adiabatic": opo.is_adiabatic,
    }
