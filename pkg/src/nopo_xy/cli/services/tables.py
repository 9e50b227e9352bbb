from pathlib import Path
from typing import Sequence

import numpy as np

from ...analytics import (
    DEFAULT_N_MAX,
    RingSpec,
    max_pdf_gap,
    mean_energy_approx,
    mean_energy_exact,
    partition_function,
)
from ...errors import SpecError
from ..config.logger import LOGGER

ANALYTICS_COLUMNS = ("N", "beta", "log_Z", "mean_energy_exact", "mean_energy_approx", "max_pdf_gap")


class AnalyticsTables:
    def __init__(self, app):
        self.app = app

    def analytics_table(
        self, betas: Sequence[float], sizes: Sequence[int], n_max: int = DEFAULT_N_MAX
    ) -> list[tuple[int, float, float, float, float, float]]:
        """Exact against large-N statistics of the unit ring, one row per (N, beta)."""
        if not betas or not sizes:
            raise SpecError("need at least one N and one beta", field="grid")
        rows = []
        for n in sizes:
            for beta in betas:
                spec = RingSpec(int(n), float(beta))
                rows.append(
                    (
                        spec.n_spins,
                        spec.beta,
                        partition_function(spec, n_max),
                        mean_energy_exact(spec, n_max),
                        mean_energy_approx(spec.n_spins, spec.beta),
                        max_pdf_gap(spec, n_max),
                    )
                )
        LOGGER.debug(f"analytics table: {len(rows)} rows")
        return rows

    def write(self, path: Path, rows) -> Path:
        columns = list(np.asarray(rows, dtype=float).T)
        return self.app.output.write_table(path, ANALYTICS_COLUMNS, columns, integer_columns=("N",))
