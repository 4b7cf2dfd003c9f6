import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.bench.model import build_model
from src.core.constants import CSV_COLUMNS, CSV_FLOAT_FORMAT
from src.core.errors import ConfigError, NumericalFailure
from src.core.ops import softmax_cross_entropy
from src.core.optim import SGD
from src.core.tape import Tape, backward
from src.data.mnist import BatchIterator, batches, load_mnist
from src.inference.fusion import fuse_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricRow:
    """Metrics of one finished epoch"""

    epoch: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float
    wall_seconds: float


@dataclass
class FusionCheck:
    """Unfused vs fused evaluation of the final model on the test split"""

    accuracy: float
    fused_accuracy: float
    max_abs_logit_diff: float
    changed_predictions: int
    fused_norm_layers: int


@dataclass
class TrainingResult:
    config: object
    rows: list
    model: object
    csv_path: Optional[Path] = None
    fusion: Optional[FusionCheck] = field(default=None)


def evaluate(model, dataset, batch_size):
    """Eval-mode accuracy and logits over a dataset in its stored order"""
    model.eval()
    iterator = BatchIterator(seed=0, batch_size=batch_size, shuffle=False)
    chunks = [model(x).as_nc() for x, _ in batches(dataset, iterator)]
    logits = np.concatenate(chunks, axis=0)
    accuracy = float((logits.argmax(axis=1) == dataset.labels).mean())
    return accuracy, logits


def csv_header_comment(config):
    return (
        f"# norm={config.norm} batch_size={config.batch_size} "
        f"effective_lr={config.effective_lr:.6g} test_batch_size={config.test_batch_size} "
        f"seed={config.seed} epochs={config.epochs} momentum={config.momentum} "
        f"weight_decay={config.weight_decay} rho={config.rho} eps={config.eps} "
        f"std_center={config.std_center} groups={config.groups}\n"
    )


def write_metrics_csv(rows, path, config):
    """Leading `#` run description, then epoch,train_loss,train_acc,test_acc,wall_seconds"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [
            (r.epoch, r.train_loss, r.train_accuracy, r.test_accuracy, r.wall_seconds)
            for r in rows
        ],
        columns=list(CSV_COLUMNS),
    )
    with open(path, "w", newline="") as handle:
        handle.write(csv_header_comment(config))
        frame.to_csv(handle, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path


class Trainer:
    """Runs the training protocol for one config on loaded train/test splits"""

    def __init__(self, config, train, test, progress=True):
        self.config = config
        self.train_set = train
        self.test_set = test
        self.progress = progress

        self.model = build_model(config, in_features=train.num_features)
        self.optimizer = SGD(
            self.model.parameters(),
            lr=config.effective_lr,
            momentum=config.momentum,
            weight_decay=config.weight_decay,
        )
        self.iterator = BatchIterator(seed=config.seed, batch_size=config.batch_size)
        self.rows = []

    def train_epoch(self, epoch):
        """One pass over the training split; returns (mean loss, accuracy)"""
        self.model.train()
        total_loss = 0.0
        correct = 0
        seen = 0

        progress = tqdm(
            batches(self.train_set, self.iterator),
            total=self.iterator.num_batches(len(self.train_set)),
            desc=f"epoch {epoch}",
            leave=False,
            disable=None if self.progress else True,
        )
        for index, (x, labels) in enumerate(progress):
            tape = Tape()
            logits = self.model(x, tape)
            loss = softmax_cross_entropy(logits, labels, tape)

            value = loss.item()
            if not np.isfinite(value):
                raise NumericalFailure(epoch, index, value)

            grads = backward(tape, loss)
            self.optimizer.step(grads)

            total_loss += value * len(labels)
            correct += int((logits.as_nc().argmax(axis=1) == labels).sum())
            seen += len(labels)

        return total_loss / seen, correct / seen

    def run(self):
        """Train for config.epochs epochs, evaluating after each one"""
        config = self.config
        logger.info(
            "training %s: batch %d, effective lr %.6g, %d epochs",
            config.kind.label(),
            config.batch_size,
            config.effective_lr,
            config.epochs,
        )

        for epoch in range(1, config.epochs + 1):
            start = time.monotonic()
            train_loss, train_acc = self.train_epoch(epoch)
            test_acc, _ = evaluate(self.model, self.test_set, config.test_batch_size)
            row = MetricRow(epoch, train_loss, train_acc, test_acc, time.monotonic() - start)
            self.rows.append(row)
            logger.info(
                "epoch %d: loss %.4f, train acc %.4f, test acc %.4f (%.1fs)",
                epoch,
                train_loss,
                train_acc,
                test_acc,
                row.wall_seconds,
            )

        result = TrainingResult(config=config, rows=list(self.rows), model=self.model)
        if config.out is not None:
            result.csv_path = write_metrics_csv(self.rows, config.out, config)
        if config.fuse:
            result.fusion = self.check_fusion()
        return result

    def check_fusion(self):
        """Evaluate the fused model and compare it with the unfused one"""
        accuracy, logits = evaluate(self.model, self.test_set, self.config.test_batch_size)
        fused = fuse_model(self.model)
        fused_accuracy, fused_logits = evaluate(fused, self.test_set, self.config.test_batch_size)

        check = FusionCheck(
            accuracy=accuracy,
            fused_accuracy=fused_accuracy,
            max_abs_logit_diff=float(np.abs(logits - fused_logits).max()),
            changed_predictions=int((logits.argmax(axis=1) != fused_logits.argmax(axis=1)).sum()),
            fused_norm_layers=fused.count_norm_layers(),
        )
        logger.info(
            "fused model: accuracy %.4f (unfused %.4f), max |logit diff| %.3g, "
            "%d changed predictions",
            check.fused_accuracy,
            check.accuracy,
            check.max_abs_logit_diff,
            check.changed_predictions,
        )
        return check


def run_training(config, datasets=None, progress=True):
    """Load MNIST unless (train, test) are given, then train and evaluate"""
    if datasets is None:
        if config.data_dir is None:
            raise ConfigError("no data directory configured (--data-dir)")
        datasets = load_mnist(config.data_dir)
    train, test = datasets
    return Trainer(config, train, test, progress=progress).run()
