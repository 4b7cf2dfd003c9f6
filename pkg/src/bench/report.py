import logging
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from src.core.constants import FINAL_EPOCH_WINDOW, STABILITY_WINDOW
from src.core.errors import UsageError
from src.utils.math_utils import step_std, tail_mean

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FinalReport:
    """Summary of one run's test-accuracy curve"""

    final_accuracy: float
    best_epoch: int
    best_accuracy: float
    stability: float
    epochs: int


def read_metrics(path):
    """Metrics CSV as a DataFrame; the leading `#` run description is skipped"""
    return pd.read_csv(path, comment="#")


def _as_frame(source):
    if isinstance(source, pd.DataFrame):
        return source
    if isinstance(source, (str, Path)):
        return read_metrics(source)
    # A list of MetricRow
    return pd.DataFrame(
        {"epoch": [r.epoch for r in source], "test_acc": [r.test_accuracy for r in source]}
    )


def report_final(source, window=FINAL_EPOCH_WINDOW):
    """
    Mean test accuracy of the final `window` epochs, plus the best epoch.

    `stability` is the std of epoch-to-epoch accuracy changes over the last
    STABILITY_WINDOW epochs (or all of them when fewer were run).
    """
    frame = _as_frame(source)
    if len(frame) < window:
        raise UsageError(f"need at least {window} epochs to report, got {len(frame)}")

    accuracy = frame["test_acc"].to_numpy(dtype=float)
    best = int(accuracy.argmax())
    return FinalReport(
        final_accuracy=tail_mean(accuracy, window),
        best_epoch=int(frame["epoch"].iloc[best]),
        best_accuracy=float(accuracy[best]),
        stability=step_std(accuracy, STABILITY_WINDOW),
        epochs=len(frame),
    )


def plot_curves(csv_paths, out_path, labels=None, title=None):
    """Test accuracy vs epoch for each run, one line per CSV"""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = labels or [Path(p).stem for p in csv_paths]
    fig, ax = plt.subplots(figsize=(6, 4))
    for path, label in zip(csv_paths, labels):
        frame = read_metrics(path)
        ax.plot(frame["epoch"], frame["test_acc"] * 100.0, label=label)

    ax.set_xlabel("epoch")
    ax.set_ylabel("test accuracy (%)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    logger.info("wrote %s", out_path)
    return out_path
