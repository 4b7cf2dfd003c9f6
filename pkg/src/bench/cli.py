import logging
import os
import sys
from pathlib import Path

import click
from dotenv import load_dotenv

from src.bench.report import plot_curves, report_final
from src.bench.suite import load_suite, run_suite
from src.bench.trainer import run_training
from src.core.config import make_config, read_key_values
from src.core.constants import (
    DATA_DIR_ENV,
    EXIT_NUMERICAL,
    NORM_KINDS,
    OUT_DIR_ENV,
    STD_CENTER_MODES,
)
from src.core.errors import NormBenchError
from src.data.mnist import load_mnist
from src.utils.gradcheck import stats_sweep, verify_suite

logger = logging.getLogger(__name__)


def setup_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _default_data_dir():
    return Path(os.getenv(DATA_DIR_ENV, "data/mnist"))


def _default_out_dir():
    return Path(os.getenv(OUT_DIR_ENV, "runs"))


def _print_report(label, report):
    click.echo(
        f"{label}: final-5 accuracy {report.final_accuracy * 100:.2f}%, "
        f"best {report.best_accuracy * 100:.2f}% at epoch {report.best_epoch}, "
        f"epoch-to-epoch std {report.stability * 100:.3f} pp"
    )


def _verify():
    """Gradient and statistics oracles; returns an exit code"""
    results = verify_suite()
    failed = [r for r in results if not r[3].passed]
    worst = max(r[3].max_rel_error for r in results)
    click.echo(
        f"gradient checks: {len(results) - len(failed)}/{len(results)} passed, "
        f"worst rel error {worst:.3g}"
    )
    for label, shape, seed, report in failed:
        click.echo(f"  FAIL {label} shape={shape} seed={seed} at {report.worst_coordinate}")

    mismatches = stats_sweep()
    click.echo(f"statistics oracle: {len(mismatches)} mismatches")
    for mismatch in mismatches:
        click.echo(f"  FAIL {mismatch}")
    return EXIT_NUMERICAL if failed or mismatches else 0


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--config", "config_file", type=click.Path(dir_okay=False), help="key=value config file"
)
@click.option("--norm", type=click.Choice(NORM_KINDS, case_sensitive=False))
@click.option("--groups", type=int, help="GN group count G")
@click.option("--std-center", type=click.Choice(STD_CENTER_MODES), help="EBN std centering")
@click.option("--batch-size", type=int)
@click.option("--lr", type=float, help="base learning rate at the reference batch (128)")
@click.option("--epochs", type=int)
@click.option("--momentum", type=float, help="SGD momentum")
@click.option("--weight-decay", type=float)
@click.option("--rho", type=float, help="running-statistics momentum")
@click.option("--eps", type=float)
@click.option("--seed", type=int)
@click.option("--hidden-layers", type=int)
@click.option("--hidden-units", type=int)
@click.option("--test-batch-size", type=int)
@click.option("--data-dir", type=click.Path(file_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="metrics CSV path")
@click.option("--fuse/--no-fuse", default=None, help="evaluate the fused model after training")
@click.option("--suite", "suite_file", type=click.Path(dir_okay=False), help="suite matrix file")
@click.option(
    "--report",
    "report_csv",
    type=click.Path(exists=True, dir_okay=False),
    help="summarize a metrics CSV and exit",
)
@click.option(
    "--plot",
    "plot_path",
    type=click.Path(dir_okay=False),
    help="write accuracy curves to this image",
)
@click.option("--verify", is_flag=True, help="run the gradient and statistics oracles and exit")
@click.option("-v", "--verbose", is_flag=True)
@click.option("-q", "--quiet", is_flag=True)
def main(config_file, suite_file, report_csv, plot_path, verify, verbose, quiet, **options):
    """Train the MNIST MLP with BN, EBN, LN, IN or GN and report accuracy."""
    load_dotenv()
    setup_logging(verbose, quiet)
    try:
        sys.exit(_dispatch(config_file, suite_file, report_csv, plot_path, verify, quiet, options))
    except NormBenchError as e:
        logger.error("%s", e)
        sys.exit(e.exit_code)


def _dispatch(config_file, suite_file, report_csv, plot_path, verify, quiet, options):
    if verify:
        return _verify()

    if report_csv:
        _print_report(Path(report_csv).stem, report_final(report_csv))
        if plot_path:
            plot_curves([report_csv], plot_path)
        return 0

    if suite_file:
        return _suite(config_file, suite_file, plot_path, quiet, options)

    config = make_config(config_file, **options)
    updates = {}
    if config.data_dir is None:
        updates["data_dir"] = _default_data_dir()
    if config.out is None:
        updates["out"] = _default_out_dir() / f"{config.run_name()}.csv"
    config = config.model_copy(update=updates)

    result = run_training(config, progress=not quiet)
    _print_report(config.run_name(), report_final(result.rows))
    click.echo(f"metrics written to {result.csv_path}")

    if result.fusion is not None:
        fusion = result.fusion
        click.echo(
            f"fused model: accuracy {fusion.fused_accuracy * 100:.2f}% "
            f"(unfused {fusion.accuracy * 100:.2f}%), max |logit diff| "
            f"{fusion.max_abs_logit_diff:.3g}, {fusion.fused_norm_layers} norm layers left"
        )
    if plot_path:
        plot_curves([result.csv_path], plot_path, title=config.run_name())
    return 0


def _suite(config_file, suite_file, plot_path, quiet, options):
    matrix = load_suite(suite_file)
    base = make_config(config_file, **options)
    data_dir = base.data_dir or _default_data_dir()
    out_dir = base.out.parent if base.out else _default_out_dir()

    # Matrix defaults < config file < CLI; norm, batch size and seed come from the matrix
    overrides = read_key_values(config_file) if config_file else {}
    overrides.update({k: v for k, v in options.items() if v is not None})
    overrides.pop("out", None)
    overrides["data_dir"] = data_dir
    datasets = load_mnist(data_dir)
    result = run_suite(matrix, datasets, out_dir=out_dir, overrides=overrides, progress=not quiet)

    click.echo(result.table.to_string())
    if plot_path:
        csvs = sorted(out_dir.glob("*_seed*.csv"))
        plot_curves(csvs, plot_path)
    return 0
