from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from functools import lru_cache
from typing import Final, Optional

import importlib
import json
import logging
import os
import numpy as np

import Gradient_Reversal_Adaptation.Configurations.StoreConfig as StoreConfig
import Gradient_Reversal_Adaptation.Configurations.LoadConfig as LoadConfig
import Gradient_Reversal_Adaptation.Corpus.Builder as Builder
import Gradient_Reversal_Adaptation.Corpus.Dataset as Dataset
import Gradient_Reversal_Adaptation.Experiments.Metrics as Metrics
import Gradient_Reversal_Adaptation.Experiments.Tables as Tables
import Gradient_Reversal_Adaptation.Models.Adaptation as Adaptation
Checkpoint = importlib.import_module("Gradient_Reversal_Adaptation.Models.Checkpoint")
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions
import Gradient_Reversal_Adaptation.Models.Network as Network
import Gradient_Reversal_Adaptation.Models.Optimizers as Optimizers
from Gradient_Reversal_Adaptation.Experiments.RunDirectory import RunDirectory
from Gradient_Reversal_Adaptation.Visualizations.VisualizeResults import GridHeatmap, HoursSweep

__all__ = ["CellError", "CellJob", "Experiment", "adapt_model", "error_rate", "read_cells", "run_cell"]

logger = logging.getLogger(__name__)

CORPUS_DIR: Final[str] = "corpus"
GRID_TABLE: Final[str] = "grid"
EVAL_TABLE: Final[str] = "eval"
SWEEP_PREFIX: Final[str] = "sweep_"
GRID_KEYS: Final[tuple[str, str]] = ("lambda", "f")
SWEEP_KEYS: Final[tuple[str, str]] = ("hours", "language")
HOURS_DIGITS: Final[int] = 6


class CellError(RuntimeError):
    """
    Raised if a grid or sweep cell fails; the message names the cell, the attribute cell holds its description.
    """

    def __init__(self, message: str, cell: Optional[dict] = None):
        super(CellError, self).__init__(message, cell)
        self.cell = cell

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class CellJob:
    """
    One adaptation of an experiment grid: coefficient, feature layer, seed and the amount of adaptation data.
    """

    table: str
    lambda_base: float
    feature_layer_index: int
    seed: int
    adapt_split: str = Builder.TARGET_ADAPT
    fraction: float = 1.0
    """Share of the adaptation split used."""
    key_1: Tables.Key = None
    key_2: Tables.Key = None

    @property
    def name(self) -> str:
        return f"{self.key_1}_{self.key_2}_seed{self.seed}"

    @property
    def cell_file(self) -> tuple[str, str, str]:
        return "cells", self.table, f"{self.name}.json"

    @property
    def metrics_file(self) -> tuple[str, str, str]:
        return "metrics", self.table, f"{self.name}.csv"


def error_rate(accuracy: float) -> float:
    """
    Frame classification error in percent.
    """
    return 100.0 * (1.0 - accuracy)


def stage_one_file(seed: int) -> tuple[str, str]:
    return "checkpoints", f"stage1_seed{seed}.npz"


def adapted_file(seed: int) -> tuple[str, str]:
    return "checkpoints", f"adapted_seed{seed}.npz"


def table_file(name: str) -> tuple[str, str]:
    return "tables", f"{name}.csv"


@lru_cache(maxsize=2)
def _load_corpus(path: str) -> Builder.SyntheticCorpus:
    return Builder.load_corpus(path)


def _adaptation_data(
    corpus: Builder.SyntheticCorpus, job: CellJob
) -> Dataset.FrameDataset:
    data = corpus[job.adapt_split]
    if job.fraction >= 1.0:
        return data
    return Dataset.subset_hours(
        data, job.fraction * data.hours_equivalent, np.random.default_rng(job.seed)
    )


def adapt_model(
    cfg: StoreConfig.ExperimentConfig,
    corpus: Builder.SyntheticCorpus,
    net: Network.NetworkParams,
    job: CellJob,
    rng: Optional[np.random.Generator] = None,
) -> (Network.NetworkParams, list):
    """
    Attaches a fresh domain classifier to a trained network and runs the adaptation stage of a job.

    The generator, if set, draws the data order in place of the seed of the job.
    """
    attached = Network.attach_domain_head(
        net,
        job.feature_layer_index,
        cfg.get("adversary"),
        slope=cfg.get("slope"),
        seed=job.seed,
    )
    adapt_config = cfg.adapt_config(job.lambda_base, job.feature_layer_index, job.seed)
    scheduler = (
        Optimizers.NewBobState(
            cfg.get("learning_rate"), cfg.get("halving_factor"), cfg.get("improvement_threshold")
        )
        if cfg.get("newbob_adapt")
        else None
    )
    return Adaptation.adapt_adversarial(
        attached,
        corpus[Builder.SOURCE_TRAIN],
        _adaptation_data(corpus, job),
        corpus.validation,
        adapt_config,
        scheduler=scheduler,
        rng=rng,
    )


def run_cell(cfg: StoreConfig.ExperimentConfig, run_path: str, job: CellJob) -> Tables.ResultCell:
    """
    Runs one job against the corpus and the stage-1 checkpoint of a run directory and stores its result.

    Module level function, therefore the jobs can be handed to worker processes.

    Raises
    ------
    CellError
        If anything fails, annotated with the job.
    """
    run = RunDirectory(run_path)
    try:
        corpus = _load_corpus(os.path.join(run_path, CORPUS_DIR))
        net = Checkpoint.load_checkpoint(run.file(*stage_one_file(job.seed))).net
        test = corpus[Builder.TARGET_TEST]
        baseline = error_rate(Adaptation.evaluate(net, test)[0])
        adapted, records = adapt_model(cfg, corpus, net, job)
        cell = Tables.ResultCell(
            key_1=job.key_1,
            key_2=job.key_2,
            seed=job.seed,
            error=error_rate(Adaptation.evaluate(adapted, test)[0]),
            baseline_error=baseline,
        )
        Metrics.emit_metrics(records, run.file(*job.metrics_file), title=f"{job.table} {job.name}")
        with open(run.file(*job.cell_file), "w") as file:
            json.dump(asdict(cell), file, sort_keys=True, indent=2)
    except Exception as error:
        raise CellError(f"Cell {job.table}/{job.name} failed: {error}", asdict(job)) from error
    logger.info(
        "Cell %s/%s: error %.2f%% (unadapted %.2f%%)", job.table, job.name, cell.error, cell.baseline_error
    )
    return cell


def read_cells(run: RunDirectory, table: str) -> list[Tables.ResultCell]:
    """
    Reads the stored cell results of a table (in file name order).
    """
    directory = os.path.join(run.path, "cells", table)
    cells = []
    if not os.path.isdir(directory):
        return cells
    for name in sorted(os.listdir(directory)):
        if name.endswith(".json"):
            with open(os.path.join(directory, name)) as file:
                cells.append(Tables.ResultCell(**json.load(file)))
    return cells


class Experiment:
    """
    Drives the experiments of one run directory: corpus generation, training stage per seed, adaptation, the
    ($\\lambda$, f) grid and the sweeps over the amount of adaptation data.

    Every output is written into the run directory; an existing output is only replaced if force is set. Checkpoints
    of the training stage are reused by grids and sweeps.
    """

    def __init__(self, cfg: StoreConfig.ExperimentConfig, run: RunDirectory, force: bool = False):
        self.cfg = cfg
        self.run = run
        self.force = force
        run.store_config(cfg, force=force)

    @property
    def corpus_path(self) -> str:
        return os.path.join(self.run.path, CORPUS_DIR)

    def corpus(self) -> Builder.SyntheticCorpus:
        return _load_corpus(self.corpus_path)

    def generate_corpus(self) -> Builder.SyntheticCorpus:
        path = self.run.claim(CORPUS_DIR, force=self.force)
        _load_corpus.cache_clear()
        spec = self.cfg.corpus_spec(LoadConfig.load_channels())
        corpus = Builder.build_corpus(spec)
        Builder.save_corpus(corpus, path)
        return corpus

    def train(self, seed: int, reuse: bool = False) -> Network.NetworkParams:
        """
        Training stage of one seed; the network is stored as stage-1 checkpoint.

        Parameters
        ----------
        seed: int
            Seed of the weight initialization and the data order.
        reuse: bool
            If true, an existing checkpoint is loaded instead of training again.
        """
        if reuse and self.run.exists(*stage_one_file(seed)):
            return Checkpoint.load_checkpoint(self.run.file(*stage_one_file(seed))).net
        path = self.run.claim(*stage_one_file(seed), force=self.force)
        corpus = self.corpus()
        source = corpus[Builder.SOURCE_TRAIN]
        net = Network.build_main_network(source.dims, self.cfg.get("n_classes"), self.cfg.get("hidden"), seed)
        optimizer = Optimizers.AdamState(self.cfg.get("learning_rate"))
        scheduler = (
            Optimizers.NewBobState(
                self.cfg.get("learning_rate"),
                self.cfg.get("halving_factor"),
                self.cfg.get("improvement_threshold"),
            )
            if self.cfg.get("newbob_train")
            else None
        )
        logger.info("Training stage, seed %d", seed)
        rng = np.random.default_rng(seed)
        trained, records = Adaptation.train_supervised(
            net,
            source,
            corpus[Builder.SOURCE_VALID],
            optimizer,
            scheduler,
            epochs=self.cfg.get("train_epochs"),
            batch_size=self.cfg.get("batch_size"),
            seed=seed,
            rng=rng,
        )
        Checkpoint.save_checkpoint(
            path, Checkpoint.Checkpoint(
                trained,
                optimizer,
                rng_state=rng.bit_generator.state,
                epoch=len(records),
                stage="train",
            )
        )
        Metrics.emit_metrics(
            records,
            self.run.claim("metrics", f"train_seed{seed}.csv", force=self.force),
            title="Accuracy during the training stage",
        )
        return trained

    def train_all(self, reuse: bool = False) -> None:
        for seed in self.cfg.get("seeds"):
            self.train(seed, reuse=reuse)

    def adapt(self, seed: int) -> Network.NetworkParams:
        """
        Adapts the stage-1 network of a seed with the best ($\\lambda$, f) of the configuration.
        """
        net = self.train(seed, reuse=True)
        path = self.run.claim(*adapted_file(seed), force=self.force)
        job = CellJob(
            table="adapt",
            lambda_base=self.cfg.get("best_lambda"),
            feature_layer_index=self.cfg.get("best_f"),
            seed=seed,
        )
        rng = np.random.default_rng(seed)
        adapted, records = adapt_model(self.cfg, self.corpus(), net, job, rng=rng)
        Checkpoint.save_checkpoint(
            path,
            Checkpoint.Checkpoint(
                adapted, rng_state=rng.bit_generator.state, epoch=len(records), stage="adapt"
            ),
        )
        Metrics.emit_metrics(
            records,
            self.run.claim("metrics", f"adapt_seed{seed}.csv", force=self.force),
            title="Accuracy during the adaptation stage",
        )
        return adapted

    def evaluate(self) -> Tables.ResultTable:
        """
        Error of the unadapted and the adapted network of every seed on the target test data.
        """
        path = self.run.claim(*table_file(EVAL_TABLE), force=self.force)
        test = self.corpus()[Builder.TARGET_TEST]
        table = Tables.ResultTable(GRID_KEYS, title="Adapted with the best configuration")
        for seed in self.cfg.get("seeds"):
            if not self.run.exists(*adapted_file(seed)):
                raise Exceptions.StateError(f"No adapted network for seed {seed} (run adapt first)")
            baseline = Checkpoint.load_checkpoint(self.run.file(*stage_one_file(seed))).net
            adapted = Checkpoint.load_checkpoint(self.run.file(*adapted_file(seed))).net
            table.add(
                Tables.ResultCell(
                    key_1=self.cfg.get("best_lambda"),
                    key_2=self.cfg.get("best_f"),
                    seed=seed,
                    error=error_rate(Adaptation.evaluate(adapted, test)[0]),
                    baseline_error=error_rate(Adaptation.evaluate(baseline, test)[0]),
                )
            )
        table.to_csv(path)
        return table

    def _run_jobs(self, name: str, jobs: list[CellJob], key_names: tuple[str, str], title: str) -> Tables.ResultTable:
        table_path = self.run.claim(*table_file(name), force=self.force)
        self.run.claim("cells", name, force=self.force)
        self.run.claim("metrics", name, force=self.force)
        self.train_all(reuse=True)
        workers = min(self.cfg.get("workers"), len(jobs))
        logger.info("Running %d cells of %s with %d worker(s)", len(jobs), name, workers)
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                cells = list(
                    executor.map(run_cell, [self.cfg] * len(jobs), [self.run.path] * len(jobs), jobs)
                )
        else:
            cells = [run_cell(self.cfg, self.run.path, job) for job in jobs]
        table = Tables.ResultTable(key_names, cells, title=title)
        table.to_csv(table_path)
        return table

    def run_grid(self) -> Tables.ResultTable:
        """
        Adapts every seed for every combination of the coefficient and feature layer grids.

        Returns
        -------
        Gradient_Reversal_Adaptation.Experiments.Tables.ResultTable
            Errors keyed by ($\\lambda$, f); also stored as tables/grid.csv with a heatmap under plots/.
        """
        jobs = [
            CellJob(GRID_TABLE, float(lambda_base), int(f), int(seed), key_1=float(lambda_base), key_2=int(f))
            for lambda_base in self.cfg.get("lambda_grid")
            for f in self.cfg.get("f_grid")
            for seed in self.cfg.get("seeds")
        ]
        table = self._run_jobs(GRID_TABLE, jobs, GRID_KEYS, "Gradient reversal coefficient and feature layer")
        logger.info("Best grid cell %s", table.argmin())
        GridHeatmap(table).save(self.run.claim("plots", "grid.png", force=self.force))
        return table

    def adaptation_split(self, language: str) -> str:
        if language == self.cfg.get("source_language"):
            return Builder.TARGET_ADAPT
        if language == self.cfg.get("crosslingual_language"):
            return Builder.CROSSLINGUAL_ADAPT
        raise Exceptions.ConfigError(
            f"Unknown language {language!r} (expected {self.cfg.get('source_language')} or "
            f"{self.cfg.get('crosslingual_language')})"
        )

    def run_hours_sweep(self, language: str) -> Tables.ResultTable:
        """
        Adapts every seed with growing, nested shares of the adaptation data of a language, using the best
        ($\\lambda$, f) of the configuration.

        Returns
        -------
        Gradient_Reversal_Adaptation.Experiments.Tables.ResultTable
            Errors keyed by (hours, language); also stored as tables/sweep_<language>.csv.
        """
        split = self.adaptation_split(language)
        available = self.corpus()[split].hours_equivalent
        jobs = [
            CellJob(
                SWEEP_PREFIX + language,
                self.cfg.get("best_lambda"),
                self.cfg.get("best_f"),
                int(seed),
                adapt_split=split,
                fraction=float(fraction),
                key_1=round(float(fraction * available), HOURS_DIGITS),
                key_2=language,
            )
            for fraction in self.cfg.get("hours_ladder")
            for seed in self.cfg.get("seeds")
        ]
        return self._run_jobs(
            SWEEP_PREFIX + language, jobs, SWEEP_KEYS, f"Amount of adaptation data ({language})"
        )

    def stored_tables(self) -> dict[str, Tables.ResultTable]:
        tables = {}
        directory = os.path.join(self.run.path, "tables")
        if not os.path.isdir(directory):
            return tables
        for name in sorted(os.listdir(directory)):
            if not name.endswith(".csv"):
                continue
            name = name[: -len(".csv")]
            key_names = SWEEP_KEYS if name.startswith(SWEEP_PREFIX) else GRID_KEYS
            tables[name] = Tables.ResultTable.from_csv(self.run.file(*table_file(name)), key_names, title=name)
        return tables

    def report(self) -> str:
        """
        Rebuilds the grid and sweep tables from the stored cells, checks them against the stored tables and writes
        tables/report.md together with the sweep plot.

        Raises
        ------
        Gradient_Reversal_Adaptation.Models.Exceptions.IntegrityError
            If a rebuilt table differs from the stored one.
        """
        tables = self.stored_tables()
        if not tables:
            raise Exceptions.StateError(f"{self.run.path} holds no result tables")
        sections = []
        for name, table in tables.items():
            if name != EVAL_TABLE:
                rebuilt = Tables.ResultTable(table.key_names, read_cells(self.run, name))
                if rebuilt != table:
                    raise Exceptions.IntegrityError(f"Stored table {name} differs from its cells")
            sections.append(table.format())
        sweeps = {name[len(SWEEP_PREFIX) :]: t for name, t in tables.items() if name.startswith(SWEEP_PREFIX)}
        if sweeps:
            HoursSweep(sweeps).save(self.run.claim("plots", "sweep.png", force=True))
        text = "\n".join(sections)
        with open(self.run.claim("tables", "report.md", force=True), "w") as file:
            file.write(text)
        return text
