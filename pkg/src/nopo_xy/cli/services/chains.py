from pathlib import Path
from typing import Any

import numpy as np

from ...analytics import RingSpec, mean_energy_approx, relative_phase_pdf_exact
from ...core import CouplingGraph, ring_graph
from ...errors import NumericalError
from ...estimation import align_to_coupling, estimate_beta, relative_phases
from ...mcmc import ChainResult, McmcConfig, SiteOrder, distribution_distance, run_chains
from ..config.logger import LOGGER

CHAIN_COLUMNS = ("chain_id", "sample_index", "k", "theta_k", "theta_rel_k")


class ChainRunner:
    """Metropolis chains for the ``mcmc`` subcommand and the Metropolis experiment model."""

    def __init__(self, app):
        self.app = app

    def run(
        self,
        graph: CouplingGraph,
        beta: float,
        n_chains: int,
        n_sweeps: int,
        thin: int,
        proposal_width: float,
        seed: int,
        order: SiteOrder = SiteOrder.SEQUENTIAL,
        adapt_width: bool = True,
        burn_in: int | None = None,
    ) -> list[ChainResult]:
        config = McmcConfig(
            beta=beta,
            proposal_width=proposal_width,
            n_sweeps=n_sweeps,
            thin=thin,
            seed=seed,
            burn_in=burn_in,
            adapt_width=adapt_width,
            order=order,
        )
        LOGGER.info(f"{n_chains} Metropolis chain(s) at beta={beta:g}, N={graph.n_spins}")
        return run_chains(config, graph, n_chains, workers=self.app.settings.threads)

    def write_samples(self, path: Path, chains: list[ChainResult]) -> Path:
        stacked = np.stack([chain.samples for chain in chains])
        n_chains, n_samples, n_spins = stacked.shape
        chain_id, sample_index, k = np.meshgrid(
            np.arange(n_chains), np.arange(n_samples), np.arange(n_spins), indexing="ij"
        )
        columns = [
            chain_id.reshape(-1),
            sample_index.reshape(-1),
            k.reshape(-1),
            stacked.reshape(-1),
            relative_phases(stacked).reshape(-1),
        ]
        return self.app.output.write_table(
            path, CHAIN_COLUMNS, columns, integer_columns=("chain_id", "sample_index", "k")
        )

    def summarise(
        self, graph: CouplingGraph, beta: float, chains: list[ChainResult], coupling: float = 1.0
    ) -> dict[str, Any]:
        stacked = np.stack([chain.samples for chain in chains])
        rel = align_to_coupling(relative_phases(stacked).reshape(-1), coupling)
        energies = np.concatenate([chain.energies(graph) for chain in chains])
        estimate = estimate_beta(rel)
        summary = {
            "beta": beta,
            "n_chains": len(chains),
            "n_samples": int(energies.size),
            "acceptance_rates": [chain.acceptance_rate for chain in chains],
            "proposal_widths": [chain.proposal_width for chain in chains],
            "burn_in": chains[0].burn_in,
            "beta_eff": estimate.beta_eff,
            "beta_eff_std_error": estimate.std_error,
            "mean_energy": float(energies.mean()),
            "energy_std_dev": float(energies.std(ddof=1)) if energies.size > 1 else 0.0,
            "mean_energy_approx": abs(coupling) * mean_energy_approx(graph.n_spins, beta * abs(coupling)),
        }
        if rel.size >= 1000 and graph == ring_graph(graph.n_spins):
            spec = RingSpec(graph.n_spins, beta)
            try:
                report = distribution_distance(rel, pdf=lambda x: relative_phase_pdf_exact(x, spec))
            except NumericalError as exc:
                LOGGER.warning(f"no exact reference density: {exc}")
            else:
                summary["distance_to_exact"] = {
                    "tv": report.tv, "ks": report.ks, "p_value": report.p_value,
                }
        return summary
