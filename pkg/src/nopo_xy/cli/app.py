import argparse
import sys
from dataclasses import asdict, replace
from pathlib import Path

from rich.console import Console
from rich.table import Table

from ..core import ring_graph
from ..errors import DataError, NumericalError, SpecError
from ..mcmc import SiteOrder
from ..network import trajectory_seed
from ..opo import OpoParams
from .config.logger import LOGGER, configure_logging
from .config.settings import (
    Settings,
    load_experiment_file,
    normalise_keys,
    parse_overrides,
    parse_rate,
)
from .presets import PRESETS
from .services.validation import FIXED_POINT_RATIOS
from .state.models import FULL_SCALE_SPINS, FULL_SCALE_TRAJECTORIES, ExperimentSpec
from .workbench import Workbench

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

SUITES = ("opo", "reduction", "boltzmann", "analytics", "estimation", "convergence", "asymmetry", "uniformity")


def build_spec(args: argparse.Namespace, settings: Settings) -> ExperimentSpec:
    """Preset, then experiment file, then --set pairs, then dedicated flags; later sources win."""
    keys = {}
    if args.preset:
        keys.update(normalise_keys(PRESETS[args.preset]))
    if args.experiment:
        keys.update(load_experiment_file(Path(args.experiment)))
    keys.update(parse_overrides(args.set or []))
    if args.seed is not None:
        keys["ensemble.master_seed"] = args.seed
    if args.out:
        keys["output.dir"] = args.out
    if args.paper_scale:
        LOGGER.warning(
            f"full scale: N={FULL_SCALE_SPINS}, {FULL_SCALE_TRAJECTORIES} trajectories per point; expect hours"
        )
        keys["graph.n_spins"] = FULL_SCALE_SPINS
        keys["ensemble.n_trajectories"] = FULL_SCALE_TRAJECTORIES
    return ExperimentSpec.from_keys(keys, master_seed=settings.seed)


def cmd_run(app: Workbench, args: argparse.Namespace) -> int:
    spec = build_spec(args, app.settings)
    summary = app.experiments.run(spec)
    table = Table(title=f"{spec.model.value} experiment -> {spec.output_dir}")
    for column in ("point", "beta_set", "t_a [s]", "beta_eff", "+-", "energy / spin"):
        table.add_column(column, justify="right")
    for point in summary["points"]:
        beta_set = point["beta_set"]
        label = "inf" if beta_set is None else f"{beta_set:g}"
        if "acquisitions" not in point:
            chains = point["chains"]
            table.add_row(
                str(point["index"]), label, "-", f"{chains['beta_eff']:.4g}",
                f"{chains['beta_eff_std_error']:.2g}", f"{chains['mean_energy'] / spec.n_spins:.5g}",
            )
            continue
        for entry in point["acquisitions"]:
            table.add_row(
                str(point["index"]), label, f"{entry['t_a']:g}", f"{entry['beta_eff']:.4g}",
                f"{entry['beta_eff_std_error']:.2g}", f"{entry['mean_energy'] / spec.n_spins:.5g}",
            )
    app.console.print(table)
    return EXIT_OK


def _print_checks(app: Workbench, report: dict) -> None:
    table = Table(title=f"suite {report['suite']}: {'passed' if report['passed'] else 'FAILED'}")
    for column in ("check", "result", "value", "limit", "detail"):
        table.add_column(column)
    for check in report["checks"]:
        table.add_row(
            check["name"],
            "ok" if check["passed"] else "FAIL",
            f"{check['value']:.4g}",
            f"{check['limit']:.4g}",
            check["detail"],
        )
    app.console.print(table)


def cmd_validate(app: Workbench, args: argparse.Namespace) -> int:
    report = app.validation.report_for(args.suite, args.report)
    _print_checks(app, report)
    return EXIT_OK if report["passed"] else EXIT_INVALID


def cmd_validate_opo(app: Workbench, args: argparse.Namespace) -> int:
    params = OpoParams.from_pump_ratio(
        args.operating_ratio,
        gamma_s=parse_rate(args.gamma_s, "--gamma-s"),
        gamma_i=parse_rate(args.gamma_i, "--gamma-i"),
        gamma_p=parse_rate(args.gamma_p, "--gamma-p"),
        kappa=parse_rate(args.kappa, "--kappa"),
    )
    checks = app.validation.opo_checks(params, ratios=tuple(args.pump_ratio), integrate=not args.no_integrate)
    report = {
        "suite": "validate-opo",
        "seed": app.settings.seed,
        "passed": all(check.passed for check in checks),
        "threshold": params.threshold,
        "checks": [asdict(check) for check in checks],
    }
    if args.report:
        app.output.write_json(Path(args.report), report)
    _print_checks(app, report)
    return EXIT_OK if report["passed"] else EXIT_INVALID


def cmd_analytics(app: Workbench, args: argparse.Namespace) -> int:
    rows = app.tables.analytics_table(args.beta, args.n, args.n_max)
    if args.out:
        app.tables.write(Path(args.out), rows)
        return EXIT_OK
    table = Table(title="XY ring: exact vs large-N")
    for column in ("N", "beta", "log Z", "<H> exact", "<H> approx", "max pdf gap"):
        table.add_column(column, justify="right")
    for n, beta, log_z, exact, approx, gap in rows:
        table.add_row(str(n), f"{beta:g}", f"{log_z:.10g}", f"{exact:.10g}", f"{approx:.10g}", f"{gap:.3g}")
    app.console.print(table)
    return EXIT_OK


def cmd_mcmc(app: Workbench, args: argparse.Namespace) -> int:
    graph = ring_graph(args.n_spins)
    out = Path(args.out)
    seed = app.settings.seed
    summaries = []
    for index, beta in enumerate(args.beta):
        chains = app.chains.run(
            graph,
            beta,
            n_chains=args.chains,
            n_sweeps=args.sweeps,
            thin=args.thin,
            proposal_width=args.width,
            seed=trajectory_seed(seed, index),
            order=SiteOrder(args.order),
            adapt_width=not args.fixed_width,
            burn_in=args.burn_in,
        )
        app.chains.write_samples(out / f"chains_{index:02d}.csv", chains)
        summaries.append(app.chains.summarise(graph, beta, chains))
    app.output.write_json(out / "mcmc_summary.json", {"n_spins": args.n_spins, "seed": seed, "runs": summaries})
    table = Table(title=f"Metropolis chains, ring({args.n_spins})")
    for column in ("beta", "beta_eff", "+-", "energy / spin", "approx", "acceptance"):
        table.add_column(column, justify="right")
    for summary in summaries:
        rates = summary["acceptance_rates"]
        table.add_row(
            f"{summary['beta']:g}",
            f"{summary['beta_eff']:.4g}",
            f"{summary['beta_eff_std_error']:.2g}",
            f"{summary['mean_energy'] / args.n_spins:.5g}",
            f"{summary['mean_energy_approx'] / args.n_spins:.5g}",
            f"{sum(rates) / len(rates):.3f}",
        )
    app.console.print(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nopo-xy",
        description="Boltzmann sampling of the XY model with simulated NOPO networks",
        epilog="Environment: NOPO_XY_THREADS (default 1), NOPO_XY_SEED (default 20190101), "
        "NOPO_XY_LOG_LEVEL (default WARNING), NOPO_XY_LOG_FILE. A .env file is read if present.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--seed", type=int, help="master seed (default: NOPO_XY_SEED)")
        sub.add_argument("--threads", type=int, help="worker processes (default: NOPO_XY_THREADS)")

    run = commands.add_parser("run", help="simulate an experiment and write samples and a summary")
    run.add_argument("experiment", nargs="?", help="YAML experiment file")
    run.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one experiment key")
    run.add_argument("--out", help="output directory (default: nopo-xy-out)")
    run.add_argument("--paper-scale", action="store_true", help=f"N={FULL_SCALE_SPINS}, {FULL_SCALE_TRAJECTORIES} trajectories")
    add_common(run)
    run.set_defaults(handler=cmd_run)

    validate = commands.add_parser("validate", help="run a property suite")
    validate.add_argument("suite", help=f"one of {', '.join(SUITES)}")
    validate.add_argument("--report", help="write the JSON report here")
    add_common(validate)
    validate.set_defaults(handler=cmd_validate)

    analytics = commands.add_parser("analytics", help="exact vs large-N ring statistics table")
    analytics.add_argument("--n", type=int, nargs="+", default=[3, 4, 16, 64, 256, 5000], help="ring sizes")
    analytics.add_argument("--beta", type=float, nargs="+", default=[0.0, 0.5, 1.0, 2.8, 5.7, 15.0, 31.0])
    analytics.add_argument("--n-max", type=int, default=40, help="Bessel order cutoff (default 40)")
    analytics.add_argument("--out", help="CSV path; prints a table when omitted")
    analytics.set_defaults(handler=cmd_analytics)

    mcmc = commands.add_parser("mcmc", help="Metropolis reference chains on a unit ring")
    mcmc.add_argument("--beta", type=float, nargs="+", required=True)
    mcmc.add_argument("--n-spins", type=int, default=64)
    mcmc.add_argument("--sweeps", type=int, default=20000, help="sweeps per chain, burn-in included")
    mcmc.add_argument("--burn-in", type=int, help="default 10 N sweeps (100 N above beta = 10)")
    mcmc.add_argument("--thin", type=int, default=10)
    mcmc.add_argument("--width", type=float, default=1.0, help="initial proposal half-width, radians")
    mcmc.add_argument("--fixed-width", action="store_true", help="do not tune the width during burn-in")
    mcmc.add_argument("--order", choices=[o.value for o in SiteOrder], default=SiteOrder.SEQUENTIAL.value)
    mcmc.add_argument("--chains", type=int, default=4)
    mcmc.add_argument("--out", default="nopo-xy-mcmc", help="output directory")
    add_common(mcmc)
    mcmc.set_defaults(handler=cmd_mcmc)

    opo = commands.add_parser("validate-opo", help="closed-form and integrator checks for one NOPO")
    opo.add_argument("--pump-ratio", type=float, nargs="+", default=list(FIXED_POINT_RATIOS))
    opo.add_argument("--operating-ratio", type=float, default=2.0, help="pump ratio of the integration runs")
    opo.add_argument("--gamma-s", default="1e-3", help="signal decay rate (units accepted, e.g. 10kHz)")
    opo.add_argument("--gamma-i", default="1", help="idler decay rate")
    opo.add_argument("--gamma-p", default="1", help="pump decay rate")
    opo.add_argument("--kappa", default="1", help="nonlinear coupling rate")
    opo.add_argument("--no-integrate", action="store_true", help="closed forms only")
    opo.add_argument("--report", help="write the JSON report here")
    add_common(opo)
    opo.set_defaults(handler=cmd_validate_opo)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    errors = Console(stderr=True)
    try:
        settings = Settings.from_env()
        configure_logging(args.verbose)
        seed = getattr(args, "seed", None)
        threads = getattr(args, "threads", None)
        if seed is not None:
            settings = replace(settings, seed=seed)
        if threads is not None:
            if threads < 1:
                raise SpecError("must be at least 1", field="--threads")
            settings = replace(settings, threads=threads)
        return args.handler(Workbench(settings), args)
    except (SpecError, DataError) as exc:
        LOGGER.debug("invalid input", exc_info=True)
        errors.print(f"Error: {exc}", style="red", markup=False, highlight=False)
        return EXIT_INVALID
    except NumericalError as exc:
        LOGGER.debug("numerical failure", exc_info=True)
        errors.print(f"Numerical failure: {exc}", style="red", markup=False, highlight=False)
        return EXIT_NUMERICAL
    except OSError as exc:
        LOGGER.debug("I/O failure", exc_info=True)
        errors.print(f"I/O error: {exc}", style="red", markup=False, highlight=False)
        return EXIT_IO


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
