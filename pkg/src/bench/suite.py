import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from src.bench.report import report_final
from src.bench.trainer import run_training
from src.core.config import make_config, read_key_values
from src.core.errors import ConfigError, NormBenchError

logger = logging.getLogger(__name__)

FAILED = "failed"


@dataclass
class SuiteMatrix:
    """Grid of norm kinds x batch sizes, each cell averaged over seeds"""

    norms: list
    batch_sizes: list
    seeds: list = field(default_factory=lambda: [0])
    base: dict = field(default_factory=dict)


@dataclass
class SuiteResult:
    table: pd.DataFrame
    drops: pd.DataFrame
    failures: dict


def _split(value):
    return [item.strip() for item in str(value).split(",") if item.strip()]


def load_suite(path):
    """
    Matrix file in the config key=value format.

    `norms`, `batch_sizes` and `seeds` are comma-separated lists; every
    other key is an override applied to all cells.
    """
    values = read_key_values(path)
    missing = [key for key in ("norms", "batch_sizes") if key not in values]
    if missing:
        raise ConfigError(f"suite file {path} is missing {', '.join(missing)}")

    try:
        batch_sizes = [int(v) for v in _split(values.pop("batch_sizes"))]
        seeds = [int(v) for v in _split(values.pop("seeds", "0"))]
    except ValueError as e:
        raise ConfigError(f"suite file {path}: {e}") from e
    norms = [v.lower() for v in _split(values.pop("norms"))]
    return SuiteMatrix(norms=norms, batch_sizes=batch_sizes, seeds=seeds, base=values)


def _run_cell(matrix, norm, batch_size, datasets, out_dir, overrides, progress):
    accuracies = []
    for seed in matrix.seeds:
        options = {**matrix.base, **overrides}
        options.update(norm=norm, batch_size=batch_size, seed=seed)
        config = make_config(**options)
        if out_dir is not None:
            out = Path(out_dir) / f"{config.run_name()}.csv"
            config = config.model_copy(update={"out": out})
        result = run_training(config, datasets=datasets, progress=progress)
        accuracies.append(report_final(result.rows).final_accuracy)
    return float(np.mean(accuracies))


def run_suite(matrix, datasets, out_dir=None, overrides=None, progress=False):
    """
    Final-5-epoch accuracy for every (batch size, norm) cell.

    One row per batch size, one column per norm. A failing cell is logged
    and marked "failed"; the remaining cells still run.
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    table = pd.DataFrame(
        index=pd.Index(matrix.batch_sizes, name="batch_size"),
        columns=matrix.norms,
        dtype=object,
    )
    failures = {}

    for batch_size in matrix.batch_sizes:
        for norm in matrix.norms:
            try:
                table.loc[batch_size, norm] = _run_cell(
                    matrix, norm, batch_size, datasets, out_dir, overrides, progress
                )
            except NormBenchError as e:
                logger.error("cell batch_size=%s norm=%s failed: %s", batch_size, norm, e)
                failures[(batch_size, norm)] = str(e)
                table.loc[batch_size, norm] = FAILED

    result = SuiteResult(table=table, drops=accuracy_drops(table), failures=failures)
    if out_dir is not None:
        write_suite(result, out_dir)
    return result


def accuracy_drops(table):
    """Per norm: accuracy at the largest batch size minus at the smallest"""
    numeric = table.apply(pd.to_numeric, errors="coerce")
    largest, smallest = max(table.index), min(table.index)
    drops = numeric.loc[largest] - numeric.loc[smallest]
    return pd.DataFrame(
        {"largest_batch": largest, "smallest_batch": smallest, "drop": drops}
    ).rename_axis("norm")


def write_suite(result, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = result.table.map(lambda v: v if isinstance(v, str) else f"{v:.6g}")
    table.to_csv(out_dir / "suite.csv", lineterminator="\n")
    result.drops.to_csv(out_dir / "suite_drops.csv", float_format="%.6g", lineterminator="\n")
    logger.info("wrote suite tables to %s", out_dir)
