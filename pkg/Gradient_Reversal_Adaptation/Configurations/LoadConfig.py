import csv
import os.path
from typing import Optional

import Gradient_Reversal_Adaptation.Configurations.StoreConfig as StoreConfig
import Gradient_Reversal_Adaptation.Configurations.ConfigExceptions as Exceptions
import Gradient_Reversal_Adaptation.Speech.Channels as Channels


def _packaged(file_name: str, file_path: Optional[str]) -> str:
    return os.path.join(os.path.dirname(__file__), file_name) if file_path is None else file_path


def _read_rows(file_path: str, key: str) -> list[dict[str, str]]:
    with open(file=file_path, newline="") as f:
        return [
            {k: (v or "").strip() for k, v in row.items() if k is not None}
            for row in csv.DictReader(f, skipinitialspace=True)
            if row[key].strip() != "#"
        ]


class LoadParameters:
    """
    Selects one row of an experiment configuration file.
    """

    file_name: str = "experiments.csv"
    """Configuration file shipped with the package."""

    def __init__(self, config_id: int, file_path: Optional[str] = None):
        """
        Parameters
        ----------
        config_id: int
            Value of the id column (see Gradient_Reversal_Adaptation.Configurations).
        file_path: Optional[str]
            Configuration file to read instead of the packaged experiments.csv (for example a run snapshot).

        Raises
        ------
        Gradient_Reversal_Adaptation.Configurations.ConfigExceptions.IDNotAvailableError
            If no row carries the id.
        """
        self._id = config_id
        self._file_path = _packaged(LoadParameters.file_name, file_path)
        self.params: StoreConfig.ExperimentConfig = self._select_configuration()

    def adjust_parameters(self, **kwargs) -> None:
        """
        Overrides fields of the loaded configuration, e.g. adjust_parameters(adapt_epochs=5, seeds="0;1").

        Values are validated one after another; an invalid value leaves the previous one in place.
        """
        for key, value in kwargs.items():
            self.params.set(key, value)

    def _select_configuration(self) -> StoreConfig.ExperimentConfig:
        for row in _read_rows(self._file_path, "id"):
            if int(row["id"]) == self._id:
                return StoreConfig.ExperimentConfig(**{k: v for k, v in row.items() if k != "id"})
        raise Exceptions.IDNotAvailableError(f"No configuration with id {self._id} in {self._file_path}")

    def __call__(self, *args, **kwargs) -> dict:
        """
        Returns a dict containing all the fields and their values.
        """
        return self.params()


def load_channels(file_path: Optional[str] = None) -> dict[str, Channels.ChannelProfile]:
    """
    Loads the channel profiles (channels.csv next to this module by default), keyed by name.
    """
    return {
        row["name"]: Channels.ChannelProfile(
            name=row["name"],
            snr_db=float(row["snr_db"]),
            reverb_decay_s=float(row["reverb_decay_s"]),
            reverb_taps=int(row["reverb_taps"]),
            gain=float(row["gain"]),
        )
        for row in _read_rows(_packaged("channels.csv", file_path), "name")
    }
