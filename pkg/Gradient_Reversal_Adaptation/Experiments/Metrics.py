from typing import Final, Optional

import csv
import logging
import os

import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions
from Gradient_Reversal_Adaptation.Visualizations.Visualize import AccuracyTrajectory

logger = logging.getLogger(__name__)

METRICS_FIELDS: Final[tuple[str, ...]] = (
    "epoch",
    "split",
    "task",
    "accuracy",
    "loss",
    "lambda_effective",
    "learning_rate",
)

_COLUMNS: Final[dict[tuple[str, str], tuple[str, str]]] = {
    ("train", "senone"): ("senone_acc_train", "senone_loss"),
    ("valid", "senone"): ("senone_acc_valid", "senone_loss_valid"),
    ("train", "domain"): ("domain_acc_train", "domain_loss"),
    ("valid", "domain"): ("domain_acc_valid", "domain_loss_valid"),
}
"""Record fields (accuracy, loss) of every split and task."""


def _rows(records: list[Types.MetricsRecord]) -> list[list]:
    rows = []
    for record in records:
        for (split, task), (accuracy, loss) in _COLUMNS.items():
            if task == "domain" and not record.has_domain_metrics:
                continue
            rows.append(
                [
                    record.epoch,
                    split,
                    task,
                    repr(float(getattr(record, accuracy))),
                    repr(float(getattr(record, loss))),
                    repr(float(record.lambda_effective)),
                    repr(float(record.learning_rate)),
                ]
            )
    return rows


def write_metrics(records: list[Types.MetricsRecord], path: str) -> None:
    """
    Writes one CSV line per epoch, split and task.
    """
    with open(path, "w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(METRICS_FIELDS)
        writer.writerows(_rows(records))


def read_metrics(path: str) -> list[Types.MetricsRecord]:
    """
    Reads a file written by write_metrics.

    Raises
    ------
    Gradient_Reversal_Adaptation.Models.Exceptions.FormatError
        If the columns differ or a line is malformed.
    """
    with open(path, newline="") as file:
        reader = csv.DictReader(file)
        if tuple(reader.fieldnames or ()) != METRICS_FIELDS:
            raise Exceptions.FormatError(f"{path}: expected the columns {', '.join(METRICS_FIELDS)}")
        epochs: dict[int, dict] = {}
        for line, row in enumerate(reader, start=2):
            key = (row["split"], row["task"])
            if key not in _COLUMNS:
                raise Exceptions.FormatError(f"{path}:{line}: unknown split/task {key}")
            try:
                values = epochs.setdefault(int(row["epoch"]), {"epoch": int(row["epoch"])})
                accuracy, loss = _COLUMNS[key]
                values[accuracy] = float(row["accuracy"])
                values[loss] = float(row["loss"])
                values["lambda_effective"] = float(row["lambda_effective"])
                values["learning_rate"] = float(row["learning_rate"])
            except ValueError as error:
                raise Exceptions.FormatError(f"{path}:{line}: {error}") from error
    return [Types.MetricsRecord(**epochs[epoch]) for epoch in sorted(epochs)]


def emit_metrics(
    records: list[Types.MetricsRecord], path: str, title: Optional[str] = None
) -> tuple[str, str]:
    """
    Writes the metrics of a run as CSV file and plots the accuracy curves into a PNG file next to it.

    Parameters
    ----------
    records: list[Gradient_Reversal_Adaptation.Models.Types.MetricsRecord]
        One record per epoch, at least one.
    path: str
        Path of the CSV file; the plot replaces the extension with .png.
    title: Optional[str]
        Title of the plot.

    Returns
    -------
    str
        Path of the CSV file.
    str
        Path of the plot.
    """
    if len(records) == 0:
        raise Exceptions.DataError("No metrics to emit")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    write_metrics(records, path)
    plot_path = os.path.splitext(path)[0] + ".png"
    kwargs = {"lambda_axis": records[0].has_domain_metrics}
    if title is not None:
        kwargs["title"] = title
    AccuracyTrajectory(records).save(plot_path, **kwargs)
    logger.debug("Wrote %d epochs of metrics to %s", len(records), path)
    return path, plot_path
