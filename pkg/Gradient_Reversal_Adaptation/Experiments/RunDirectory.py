from typing import Final, Optional

import json
import logging
import os
import shutil

import Gradient_Reversal_Adaptation.Configurations.StoreConfig as StoreConfig

logger = logging.getLogger(__name__)

CONFIG_SNAPSHOT: Final[str] = "config.csv"
RUN_MANIFEST: Final[str] = "run.json"
LOG_FILE: Final[str] = "run.log"


class RunExistsError(FileExistsError):
    """
    Raised if an output of a run directory already exists and overwriting was not forced.
    """

    pass


class RunDirectory:
    """
    Directory holding everything a run produces.

    | Path                            | Content                                          |
    |---------------------------------|--------------------------------------------------|
    | config.csv                      | snapshot of the experiment configuration         |
    | run.json                        | executed commands                                |
    | run.log                         | log messages                                     |
    | corpus/                         | synthetic corpus                                 |
    | checkpoints/                    | networks after training and adaptation           |
    | metrics/                        | per-epoch metrics (CSV) and accuracy plots       |
    | cells/                          | result of every grid and sweep cell (JSON)       |
    | tables/                         | result tables (CSV), report.md                   |
    | plots/                          | grid heatmaps and sweep plots                    |
    """

    def __init__(self, path: str):
        self.path = path

    def file(self, *parts: str) -> str:
        """
        Absolute path of an entry; missing parent directories are created.
        """
        path = os.path.join(self.path, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def exists(self, *parts: str) -> bool:
        return os.path.exists(os.path.join(self.path, *parts))

    def claim(self, *parts: str, force: bool = False) -> str:
        """
        Returns the path of an output that is about to be written.

        Raises
        ------
        RunExistsError
            If the output exists and force is not set (with force, the existing output is removed).
        """
        path = self.file(*parts)
        if os.path.exists(path):
            if not force:
                raise RunExistsError(f"{path} already exists (use --force to overwrite)")
            logger.warning("Overwriting %s", path)
            if os.path.isdir(path):
                shutil.rmtree(path)
            else:
                os.remove(path)
        return path

    def store_config(self, cfg: StoreConfig.ExperimentConfig, force: bool = False) -> None:
        """
        Writes the configuration snapshot; an existing snapshot has to match unless force is set.
        """
        path = self.file(CONFIG_SNAPSHOT)
        if os.path.exists(path) and not force:
            if StoreConfig.ExperimentConfig.from_csv(path) != cfg:
                raise RunExistsError(
                    f"{self.path} was created with a different configuration (use --force to replace it)"
                )
            return
        cfg.to_csv(path)

    def load_config(self) -> Optional[StoreConfig.ExperimentConfig]:
        path = os.path.join(self.path, CONFIG_SNAPSHOT)
        return StoreConfig.ExperimentConfig.from_csv(path) if os.path.exists(path) else None

    def record_command(self, command: str, arguments: dict) -> None:
        """
        Appends a command to the run manifest.
        """
        path = self.file(RUN_MANIFEST)
        manifest = {"commands": []}
        if os.path.exists(path):
            with open(path) as file:
                manifest = json.load(file)
        manifest["commands"].append({"command": command, "arguments": arguments})
        with open(path, "w") as file:
            json.dump(manifest, file, indent=2, sort_keys=True)
