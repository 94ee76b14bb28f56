from dataclasses import dataclass
from typing import Optional, Union

import csv
import io
import logging
import numpy as np
import scipy.stats

import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)

Key = Union[int, float, str]
CSV_FIELDS: tuple[str, ...] = ("key_1", "key_2", "seed", "error", "baseline_error")


def rerr(baseline_err: float, adapted_err: float) -> float:
    """
    Relative error rate reduction in percent, $100 \\cdot (e_{base} - e_{adapted}) / e_{base}$, at full precision.

    Use display for the rounded value of a table.

    Raises
    ------
    Gradient_Reversal_Adaptation.Models.Exceptions.DivisionError
        If the baseline error is not positive.
    """
    if baseline_err <= 0:
        raise Exceptions.DivisionError(f"Baseline error has to be positive (got {baseline_err})")
    return 100.0 * (baseline_err - adapted_err) / baseline_err


def display(value: float, digits: int = 1) -> str:
    return f"{value:.{digits}f}"


@dataclass(frozen=True)
class ResultCell:
    """
    Error rate (in percent) of one adapted model and of the unadapted model it started from.
    """

    key_1: Key
    key_2: Key
    seed: int
    error: float
    baseline_error: float

    @property
    def key(self) -> tuple[Key, Key]:
        return self.key_1, self.key_2

    @property
    def rerr(self) -> float:
        return rerr(self.baseline_error, self.error)


@dataclass(frozen=True)
class ResultRow:
    """
    Aggregate over the seeds of one table row.
    """

    key: tuple[Key, Key]
    errors: dict[int, float]
    """Error per seed."""
    mean_error: float
    standard_error: float
    mean_baseline: float
    is_best: bool

    @property
    def rerr(self) -> float:
        """
        Relative reduction of the mean error with respect to the mean baseline error.
        """
        return rerr(self.mean_baseline, self.mean_error)


def _parse_key(value: str) -> Key:
    for parser in [int, float]:
        try:
            return parser(value)
        except ValueError:
            pass
    return value


def _sort_key(cell: ResultCell):
    return tuple((isinstance(k, str), k if isinstance(k, str) else float(k)) for k in cell.key) + (cell.seed,)


class ResultTable:
    """
    Results of an experiment grid, rows keyed by two values (e.g. ($\\lambda$, f) or (hours, language)).

    The table stores the raw error of every seed together with the baseline error; means, standard errors and the
    relative error rate reductions are always derived, never stored. The order in which cells are added does not
    matter.
    """

    def __init__(self, key_names: tuple[str, str], cells: Optional[list[ResultCell]] = None, title: str = ""):
        self.key_names = tuple(key_names)
        self.title = title
        self._cells: dict[tuple, ResultCell] = {}
        for cell in cells or []:
            self.add(cell)

    def add(self, cell: ResultCell) -> None:
        index = cell.key + (cell.seed,)
        if index in self._cells:
            raise Exceptions.IntegrityError(f"Duplicate result for {cell.key} with seed {cell.seed}")
        self._cells[index] = cell

    @property
    def cells(self) -> list[ResultCell]:
        return sorted(self._cells.values(), key=_sort_key)

    def keys(self) -> list[tuple[Key, Key]]:
        keys = []
        for cell in self.cells:
            if cell.key not in keys:
                keys.append(cell.key)
        return keys

    def rows(self) -> list[ResultRow]:
        """
        Aggregated rows in key order; the row with the lowest mean error is flagged as best.
        """
        grouped: dict[tuple, list[ResultCell]] = {}
        for cell in self.cells:
            grouped.setdefault(cell.key, []).append(cell)
        means = {key: float(np.mean([c.error for c in cells])) for key, cells in grouped.items()}
        best = min(means, key=means.get) if means else None
        return [
            ResultRow(
                key=key,
                errors={c.seed: c.error for c in cells},
                mean_error=means[key],
                standard_error=float(scipy.stats.sem([c.error for c in cells])) if len(cells) > 1 else 0.0,
                mean_baseline=float(np.mean([c.baseline_error for c in cells])),
                is_best=key == best,
            )
            for key, cells in grouped.items()
        ]

    def row(self, key_1: Key, key_2: Key) -> ResultRow:
        for row in self.rows():
            if row.key == (key_1, key_2):
                return row
        raise KeyError((key_1, key_2))

    def argmin(self) -> tuple[Key, Key]:
        """
        Key of the row with the lowest mean error.
        """
        for row in self.rows():
            if row.is_best:
                return row.key
        raise Exceptions.DataError("Empty result table")

    def to_csv_string(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for cell in self.cells:
            writer.writerow(
                [cell.key_1, cell.key_2, cell.seed, repr(float(cell.error)), repr(float(cell.baseline_error))]
            )
        return buffer.getvalue()

    def to_csv(self, path: str) -> None:
        """
        Writes one line per cell: key_1,key_2,seed,error,baseline_error.
        """
        with open(path, "w", newline="") as file:
            file.write(self.to_csv_string())

    @staticmethod
    def from_csv(path: str, key_names: tuple[str, str] = ("key_1", "key_2"), title: str = "") -> "ResultTable":
        with open(path, newline="") as file:
            reader = csv.DictReader(file)
            if tuple(reader.fieldnames or ()) != CSV_FIELDS:
                raise Exceptions.FormatError(f"{path}: expected the columns {', '.join(CSV_FIELDS)}")
            cells = [
                ResultCell(
                    key_1=_parse_key(row["key_1"]),
                    key_2=_parse_key(row["key_2"]),
                    seed=int(row["seed"]),
                    error=float(row["error"]),
                    baseline_error=float(row["baseline_error"]),
                )
                for row in reader
            ]
        return ResultTable(key_names, cells, title)

    def __eq__(self, other) -> bool:
        return isinstance(other, ResultTable) and self.cells == other.cells

    def format(self) -> str:
        """
        Markdown rendering with the per-seed errors, mean $\\pm$ standard error and RERR (1 decimal); the mean of the best
        row is printed bold.
        """
        seeds = sorted({cell.seed for cell in self.cells})
        header = list(self.key_names) + [f"seed {s}" for s in seeds] + ["error (%)", "baseline (%)", "RERR (%)"]
        lines = [f"### {self.title}" if self.title else "", "| " + " | ".join(header) + " |"]
        lines.append("|" + "---|" * len(header))
        for row in self.rows():
            values = [str(k) for k in row.key]
            values += [display(row.errors[s]) if s in row.errors else "" for s in seeds]
            mean = f"{display(row.mean_error)} ± {display(row.standard_error)}"
            values += [f"**{mean}**" if row.is_best else mean, display(row.mean_baseline), display(row.rerr)]
            lines.append("| " + " | ".join(values) + " |")
        return "\n".join(line for line in lines if line) + "\n"
