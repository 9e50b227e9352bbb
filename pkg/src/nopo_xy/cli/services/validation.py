"""Property suites behind ``nopo-xy validate``.

Every suite runs at pinned seeds and desk scale and returns a list of named
checks; a suite passes when all of its checks pass.
"""

import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Callable, Optional

import numpy as np
from scipy.stats import chisquare, ks_2samp, linregress

from ...analytics import (
    RingSpec,
    max_pdf_gap,
    mean_energy_approx,
    mean_energy_exact,
    partition_function,
    relative_phase_pdf_exact,
    torus_quadrature,
)
from ...core import CouplingGraph, ring_graph, xy_energies
from ...errors import SpecError
from ...estimation import (
    BetaEstimate,
    BetaMethod,
    collect_relative_phases,
    convergence_time,
    decay_curve,
    estimate_beta,
    fit_diffusion,
    open_chain_draw,
    relative_phases,
    sample_von_mises,
)
from ...mcmc import McmcConfig, distribution_distance, run_chain
from ...network import (
    EnsembleSpec,
    FullFieldSimulator,
    KuramotoParams,
    KuramotoSimulator,
    NetworkParams,
    SplitSimulator,
    TrajectoryRecord,
    default_time_step,
    ensemble_run,
    make_generator,
    phase_diffusion_from_noise,
    trajectory_seed,
)
from ...opo import (
    OpoParams,
    adiabatic_seed,
    gain_saturation,
    integrate_signal_scalar,
    integrate_three_field,
    regime_report,
    saturation_photon_number,
    steady_state_photon_number,
    threshold_curve,
)
from ..config.logger import LOGGER
from ..presets import ACQUISITION_TIMES, BETA_GRID, D_THETA_SETUP, GAMMA_INJ_SETUP
from ..state.models import DESK_SPINS, DESK_TRAJECTORIES

FIXED_POINT_RATIOS = (1.1, 1.5, 2.0, 5.0)
QUADRATURE_BETAS = (0.5, 1.0, 2.0)
COLLAPSE_BETAS = (0.5, 1.0, 2.8, 5.7, 15.0, 31.0)
BOLTZMANN_SPINS = 256
BOLTZMANN_BETAS = (2.8, 5.7, 15.0)
BOLTZMANN_STEP_TARGET = 2e-3
BURN_IN_TIME = 20.0
CHAIN_THIN = 10
ORACLE_SPINS = 64
ORACLE_BETAS = (1.0, 3.0, 10.0)
COLD_BETA = 31.0
COLD_START_TIMES = (1.0, 10.0, 100.0, 1000.0)
CONVERGENCE_BETA_LIMIT = 10.0
ASYMMETRY_BETA = 5.0
ASYMMETRY_SCALE = 4.0
# 0.125 ms to 0.5 s in half-octave steps
ASYMMETRY_TIMES = tuple(0.125e-3 * 2.0 ** (k / 2) for k in range(25))
UNIFORMITY_BINS = 50
DIFFUSION_RATES = (0.44e3, 1e3, 2e3, 4e3)
ESTIMATION_BETAS = (2.8, 5.7, 15.0, 31.0)
KS_LEVEL = 0.01


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""


def _check(name: str, value: float, limit: float, detail: str = "", below: bool = True) -> Check:
    passed = bool(value < limit) if below else bool(value >= limit)
    return Check(name, passed, float(value), float(limit), detail)


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


class ValidationSuites:
    def __init__(self, app):
        self.app = app

    @property
    def suites(self) -> dict[str, Callable[[], list[Check]]]:
        return {
            "opo": self.opo,
            "reduction": self.reduction,
            "boltzmann": self.boltzmann,
            "analytics": self.analytics,
            "estimation": self.estimation,
            "convergence": self.convergence,
            "asymmetry": self.asymmetry,
            "uniformity": self.uniformity,
        }

    def run(self, suite: str) -> dict[str, Any]:
        if suite not in self.suites:
            raise SpecError(f"unknown suite {suite!r}; expected one of {', '.join(self.suites)}", field="suite")
        LOGGER.info(f"validation suite {suite}")
        checks = self.suites[suite]()
        for check in checks:
            LOGGER.debug(f"{suite}/{check.name}: {'ok' if check.passed else 'FAIL'} {check.value:.6g}")
        return {
            "suite": suite,
            "seed": self.app.settings.seed,
            "passed": all(check.passed for check in checks),
            "checks": [asdict(check) for check in checks],
        }

    def opo(self) -> list[Check]:
        return self.opo_checks(OpoParams.from_pump_ratio(2.0))

    def opo_checks(self, params: OpoParams, ratios=FIXED_POINT_RATIOS, integrate: bool = True) -> list[Check]:
        """Closed-form consistency plus the approach of both integrators to the steady state."""
        checks = []
        for ratio in ratios:
            swept = OpoParams.from_pump_ratio(ratio, params.gamma_s, params.gamma_i, params.gamma_p, params.kappa)
            n_ss = steady_state_photon_number(swept)
            residual = abs(gain_saturation(n_ss / saturation_photon_number(swept)) * ratio - 1.0)
            checks.append(_check(f"fixed_point_r{ratio:g}", residual, 1e-10))
        below = threshold_curve(params, [0.0, 0.5, 1.0])
        checks.append(Check("no_oscillation_below_threshold", bool(np.all(below == 0)), float(np.max(below)), 0.0))
        curve = threshold_curve(params, np.linspace(1.0, 5.0, 41))
        checks.append(
            _check("threshold_curve_monotone", float(np.min(np.diff(curve))), 0.0, below=False)
        )
        note = regime_report(params)
        checks.append(Check("adiabatic_regime", note is None, params.gamma_s / params.gamma_p, 1e-2, note or ""))
        if not integrate or params.pump_ratio <= 1.0:
            return checks

        n_ss = steady_state_photon_number(params)
        excess = params.pump_ratio - 1.0
        # linear relaxation rate of the photon number toward n_ss
        relaxation = 4.0 * params.gamma_s * excess / (3.0 * excess + 1.0)
        dt = 0.05 / max(params.gamma_p, params.gamma_i)
        n_steps = int(math.ceil(8.0 / relaxation / dt))
        seed = adiabatic_seed(params, 0.95 * math.sqrt(n_ss))
        three = integrate_three_field(seed, params, dt, n_steps, record_every=n_steps)
        checks.append(
            _check("three_field_steady_state", _relative(three.final().signal_photons, n_ss), 0.01,
                   f"{n_steps} steps of dt={dt:.3g}")
        )
        scalar_dt = 1e-3 / params.gamma_s
        scalar_steps = int(math.ceil(20.0 / relaxation / scalar_dt))
        scalar = integrate_signal_scalar(complex(math.sqrt(0.1 * n_ss)), params, scalar_dt, scalar_steps,
                                         record_every=scalar_steps)
        checks.append(_check("scalar_steady_state", _relative(scalar.photons[-1], n_ss), 1e-6))
        return checks

    def reduction(self) -> list[Check]:
        """Full, split and phase-only networks against each other (two-sample KS)."""
        graph = ring_graph(8)
        gamma_inj, d_theta = 1.0, 0.5
        opo = OpoParams.from_pump_ratio(2.0, gamma_s=1e3 * gamma_inj, gamma_i=1e5, gamma_p=1e5, kappa=1.0)
        diffusion_d = d_theta * steady_state_photon_number(opo)
        network = NetworkParams(opo, gamma_inj, diffusion_d, graph)
        times = tuple(10.0 + 2.0 * j for j in range(20))
        dt = 0.05 / opo.gamma_s
        seed = self.app.settings.seed
        samples = {}
        for index, simulator in enumerate(
            (
                FullFieldSimulator(network),
                SplitSimulator(network),
                KuramotoSimulator(network.kuramoto_reduction()),
            )
        ):
            spec = EnsembleSpec(simulator, 64, dt, times, trajectory_seed(seed, index))
            ensemble = ensemble_run(spec, workers=self.app.settings.threads)
            samples[simulator.model] = np.concatenate([collect_relative_phases(ensemble, t) for t in times])
        checks = []
        for first, second in (("full", "split"), ("split", "kuramoto"), ("full", "kuramoto")):
            result = ks_2samp(samples[first], samples[second])
            checks.append(
                _check(f"ks_{first}_vs_{second}", result.pvalue, KS_LEVEL, f"D={result.statistic:.4g}", below=False)
            )
        return checks

    def boltzmann(
        self, n_spins: int = BOLTZMANN_SPINS, n_trajectories: int = 40, n_times: int = 20
    ) -> list[Check]:
        """Phase-only Langevin sampler against the Boltzmann law and the Metropolis chain.

        On ring(n_spins) at the sweep temperatures the pooled relative phases must give
        beta_eff within 5%, a mean energy per spin within 3 standard errors of -I1/I0 and a
        total variation distance to the Metropolis samples below 0.01. The ring(64) checks
        repeat the distance test at lower temperatures, and the coldest sweep point must
        approach beta_set from below when started from random phases.
        """
        graph = ring_graph(n_spins)
        times = tuple(BURN_IN_TIME + 2.0 * j for j in range(n_times))
        checks = []
        for index, beta in enumerate(BOLTZMANN_BETAS):
            ensemble, langevin, metropolis = self._equilibrium_pair(graph, beta, index, n_trajectories, times)
            estimate = estimate_beta(langevin)
            checks.append(
                _check(f"beta_eff_beta{beta:g}", _relative(estimate.beta_eff, beta), 0.05,
                       f"estimate {estimate.beta_eff:.4g} +- {estimate.std_error:.2g}")
            )
            per_spin = xy_energies(np.concatenate([record.phases for record in ensemble]), graph) / n_spins
            std_error = float(per_spin.std(ddof=1)) / math.sqrt(per_spin.size)
            expected = mean_energy_approx(n_spins, beta) / n_spins
            checks.append(
                _check(f"energy_beta{beta:g}", abs(float(per_spin.mean()) - expected) / std_error, 3.0,
                       f"{per_spin.mean():.5f} vs {expected:.5f} per spin")
            )
            report = distribution_distance(langevin, metropolis)
            checks.append(
                _check(f"tv_beta{beta:g}", report.tv, 0.01,
                       f"{langevin.size} vs {metropolis.size} samples, KS={report.ks:.4g}")
            )

        small = ring_graph(ORACLE_SPINS)
        small_times = tuple(BURN_IN_TIME + j for j in range(125))
        for index, beta in enumerate(ORACLE_BETAS):
            _, langevin, metropolis = self._equilibrium_pair(small, beta, 10 + index, 50, small_times)
            report = distribution_distance(langevin, metropolis)
            checks.append(
                _check(f"tv_n{ORACLE_SPINS}_beta{beta:g}", report.tv, 0.01,
                       f"{langevin.size} vs {metropolis.size} samples, KS={report.ks:.4g}")
            )
        return checks + self.cold_start_checks(graph, max(1, n_trajectories // 4))

    def cold_start_checks(self, graph: CouplingGraph, n_trajectories: int, beta: float = COLD_BETA) -> list[Check]:
        """From random phases the coldest point is still climbing toward beta_set at the last time."""
        params = KuramotoParams(1.0, 1.0 / beta, graph)
        dt = default_time_step(params.gamma_inj, graph.max_degree, params.d_theta)
        ensemble = ensemble_run(
            EnsembleSpec(KuramotoSimulator(params), n_trajectories, dt, COLD_START_TIMES,
                         trajectory_seed(self.app.settings.seed, 60)),
            workers=self.app.settings.threads,
        )
        estimates = _estimates_over_time(ensemble, COLD_START_TIMES)
        betas = [estimate.beta_eff for estimate in estimates]
        final = estimates[-1]
        trail = ", ".join(f"{value:.3g}" for value in betas)
        return [
            _check(f"from_below_beta{beta:g}", max(betas) / beta, 1.0, trail),
            _check(f"rising_beta{beta:g}", betas[-1] - betas[0], 0.0, trail, below=False),
            _check(f"unconverged_beta{beta:g}", (beta - final.beta_eff) / final.std_error, 2.0,
                   f"final {final.beta_eff:.4g} +- {final.std_error:.2g}", below=False),
        ]

    def _equilibrium_pair(
        self, graph: CouplingGraph, beta: float, index: int, n_trajectories: int, times: tuple[float, ...]
    ) -> tuple[list[TrajectoryRecord], np.ndarray, np.ndarray]:
        """Langevin ensemble and a Metropolis chain of matching size, both started from an open-chain draw."""
        seed = self.app.settings.seed
        rng = make_generator(trajectory_seed(seed, 2 * index))
        start = open_chain_draw(graph.n_spins, beta, rng)
        params = KuramotoParams(1.0, 1.0 / beta, graph)
        dt = default_time_step(params.gamma_inj, graph.max_degree, params.d_theta, target=BOLTZMANN_STEP_TARGET)
        spec = EnsembleSpec(
            KuramotoSimulator(params), n_trajectories, dt, times, trajectory_seed(seed, 2 * index), initial=start
        )
        ensemble = ensemble_run(spec, workers=self.app.settings.threads)
        langevin = np.concatenate([collect_relative_phases(ensemble, t) for t in times])
        n_samples = n_trajectories * len(times)
        mcmc = McmcConfig(beta=beta, proposal_width=1.0, n_sweeps=1, thin=CHAIN_THIN,
                          seed=trajectory_seed(seed, 2 * index + 1), adapt_width=True)
        burn_in = mcmc.burn_in_for(graph.n_spins)
        chain = run_chain(replace(mcmc, n_sweeps=burn_in + n_samples * CHAIN_THIN), graph, initial=start)
        metropolis = relative_phases(chain.samples).reshape(-1)
        return ensemble, langevin, metropolis

    def convergence(self, n_spins: int = DESK_SPINS, n_trajectories: int = 24) -> list[Check]:
        """From random phases at the setup injection rate, beta_eff reaches beta_set within a second below beta 10."""
        graph = ring_graph(n_spins)
        seed = self.app.settings.seed
        times = tuple(ACQUISITION_TIMES)
        checks = []
        for index, beta in enumerate(b for b in BETA_GRID if b < CONVERGENCE_BETA_LIMIT):
            params = KuramotoParams(GAMMA_INJ_SETUP, GAMMA_INJ_SETUP / beta, graph)
            estimates = self._random_start_estimates(params, n_trajectories, times, trajectory_seed(seed, 30 + index))
            final = estimates[-1]
            reached = convergence_time(times, estimates, beta)
            since = "never" if reached is None else f"{reached:g} s"
            checks.append(
                _check(
                    f"converged_beta{beta:g}",
                    abs(final.beta_eff - beta) / final.std_error,
                    2.0,
                    f"final {final.beta_eff:.4g} +- {final.std_error:.2g}, within 2 SE from {since}",
                )
            )
        return checks

    def asymmetry(self, n_spins: int = DESK_SPINS, n_trajectories: int = 24) -> list[Check]:
        """Scaling both rates down by the same factor slows convergence by more than half that factor.

        The two runs share their seeds and their time step scales with the rates, so the slow
        run is a time-stretched copy of the fast one on the same acquisition grid.
        """
        graph = ring_graph(n_spins)
        beta = ASYMMETRY_BETA
        seed = trajectory_seed(self.app.settings.seed, 40)
        reached = {}
        for label, scale in (("fast", 1.0), ("slow", 1.0 / ASYMMETRY_SCALE)):
            gamma_inj = GAMMA_INJ_SETUP * scale
            params = KuramotoParams(gamma_inj, gamma_inj / beta, graph)
            estimates = self._random_start_estimates(params, n_trajectories, ASYMMETRY_TIMES, seed)
            reached[label] = convergence_time(ASYMMETRY_TIMES, estimates, beta, n_se=2.0, rel_tol=0.05)
            LOGGER.info(f"asymmetry {label}: converged from {reached[label]}")
        fast, slow = reached["fast"], reached["slow"]
        ratio = 0.0 if fast is None or slow is None else slow / fast
        return [
            _check("slowdown_ratio", ratio, ASYMMETRY_SCALE / 2.0,
                   f"fast from {fast} s, slow from {slow} s", below=False)
        ]

    def uniformity(self, n_spins: int = BOLTZMANN_SPINS, n_trajectories: int = 40) -> list[Check]:
        """Without injection the relative phases stay uniform at every acquisition time."""
        graph = ring_graph(n_spins)
        params = KuramotoParams(0.0, D_THETA_SETUP, graph)
        times = tuple(ACQUISITION_TIMES)
        dt = default_time_step(0.0, graph.max_degree, params.d_theta)
        ensemble = ensemble_run(
            EnsembleSpec(KuramotoSimulator(params), n_trajectories, dt, times,
                         trajectory_seed(self.app.settings.seed, 50)),
            workers=self.app.settings.threads,
        )
        checks = []
        for time in times:
            rel = collect_relative_phases(ensemble, time)
            counts, _ = np.histogram(rel, bins=UNIFORMITY_BINS, range=(-math.pi, math.pi))
            result = chisquare(counts)
            checks.append(
                _check(f"chi2_t{time:g}", result.pvalue, KS_LEVEL, f"chi2={result.statistic:.4g}", below=False)
            )
            estimate = estimate_beta(rel)
            checks.append(_check(f"beta_eff_t{time:g}", estimate.beta_eff, 0.05))
        return checks

    def _random_start_estimates(
        self, params: KuramotoParams, n_trajectories: int, times: tuple[float, ...], seed: int
    ) -> list[BetaEstimate]:
        dt = default_time_step(params.gamma_inj, params.graph.max_degree, params.d_theta)
        ensemble = ensemble_run(
            EnsembleSpec(KuramotoSimulator(params), n_trajectories, dt, times, seed),
            workers=self.app.settings.threads,
        )
        return _estimates_over_time(ensemble, times)

    def analytics(self) -> list[Check]:
        checks = []
        for n in (3, 4):
            for beta in QUADRATURE_BETAS:
                spec = RingSpec(n, beta)
                oracle = torus_quadrature(spec)
                label = f"N{n}_beta{beta:g}"
                checks.append(_check(f"log_z_{label}", _relative(partition_function(spec), oracle.log_z), 1e-6))
                checks.append(
                    _check(f"energy_{label}", _relative(mean_energy_exact(spec), oracle.mean_energy), 1e-6)
                )
                exact = relative_phase_pdf_exact(oracle.grid, spec)
                checks.append(
                    _check(f"pdf_{label}", float(np.max(np.abs(exact - oracle.pdf) / oracle.pdf)), 1e-6)
                )
        for beta in COLLAPSE_BETAS:
            spec = RingSpec(5000, beta)
            gap = abs(mean_energy_exact(spec) - mean_energy_approx(5000, beta)) / 5000
            checks.append(_check(f"collapse_energy_beta{beta:g}", gap, 1e-10))
            checks.append(_check(f"collapse_pdf_beta{beta:g}", max_pdf_gap(spec), 1e-10))
        gaps = [max_pdf_gap(RingSpec(n, 1.0)) for n in range(3, 34)]
        checks.append(_check("pdf_gap_shrinks_with_n", float(np.max(np.diff(gaps))), 0.0))
        return checks

    def estimation(self, n_spins: int = DESK_SPINS, n_trajectories: int = DESK_TRAJECTORIES) -> list[Check]:
        """Diffusion fits of free-running ensembles and concentration estimates of von Mises draws."""
        graph = ring_graph(n_spins)
        seed = self.app.settings.seed
        checks = []
        for index, d_theta in enumerate(DIFFUSION_RATES):
            fitted = self._fit_free_diffusion(graph, d_theta, n_trajectories, trajectory_seed(seed, index))
            checks.append(_check(f"diffusion_{d_theta / 1e3:g}kHz", _relative(fitted, d_theta), 0.05))

        powers = np.array([0.0, 1.0, 2.0, 3.0])
        fits = []
        for index, power in enumerate(powers):
            d_theta = phase_diffusion_from_noise(0.44e3, 1.2e3, power)
            fits.append(
                self._fit_free_diffusion(graph, d_theta, n_trajectories, trajectory_seed(seed, 100 + index))
            )
        line = linregress(powers, fits)
        checks.append(_check("diffusion_linear_in_noise_power", line.rvalue**2, 0.99, below=False))

        rng = make_generator(seed)
        for beta in ESTIMATION_BETAS:
            draws = sample_von_mises(beta, 100_000, rng)
            for method in BetaMethod:
                estimate = estimate_beta(draws, method)
                checks.append(
                    _check(
                        f"{method.value}_beta{beta:g}",
                        abs(estimate.beta_eff - beta) / estimate.std_error,
                        3.0,
                        f"estimate {estimate.beta_eff:.4g} +- {estimate.std_error:.2g}",
                    )
                )
        return checks

    def _fit_free_diffusion(self, graph, d_theta: float, n_trajectories: int, seed: int) -> float:
        params = KuramotoParams(0.0, d_theta, graph)
        times = tuple(j * 0.1 / d_theta for j in range(31))
        dt = default_time_step(0.0, graph.max_degree, d_theta)
        ensemble = ensemble_run(
            EnsembleSpec(KuramotoSimulator(params), n_trajectories, dt, times, seed),
            workers=self.app.settings.threads,
        )
        return fit_diffusion(decay_curve(ensemble)).d_theta

    def report_for(self, suite: str, report_path: Optional[str]) -> dict[str, Any]:
        report = self.run(suite)
        if report_path:
            self.app.output.write_json(report_path, report)
        return report


def _estimates_over_time(ensemble: list[TrajectoryRecord], times) -> list[BetaEstimate]:
    return [estimate_beta(collect_relative_phases(ensemble, time)) for time in times]
