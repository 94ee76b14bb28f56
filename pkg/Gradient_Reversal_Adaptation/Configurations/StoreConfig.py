import csv
import math
from typing import Any, Callable, Final

import Gradient_Reversal_Adaptation.Configurations.ConfigExceptions as ConfigExceptions
import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions
import Gradient_Reversal_Adaptation.Corpus.Builder as Builder
import Gradient_Reversal_Adaptation.Speech.Channels as Channels
import Gradient_Reversal_Adaptation.Speech.Features as Features

LIST_SEPARATOR: Final[str] = ";"
"""Separator of the entries of list valued fields."""


def _parse_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if str(value).strip().lower() in ["true", "1", "yes"]:
        return True
    if str(value).strip().lower() in ["false", "0", "no"]:
        return False
    raise Exceptions.ConfigError(f"{value!r} is no boolean")


def _list_of(parser: Callable) -> Callable:
    def parse(value) -> tuple:
        if isinstance(value, (list, tuple)):
            return tuple(parser(v) for v in value)
        return tuple(parser(v.strip()) for v in str(value).split(LIST_SEPARATOR) if v.strip())

    return parse


FIELDS: Final[dict[str, Callable[[Any], Any]]] = {
    "name": str,
    "n_classes": int,
    "source_hours": float,
    "target_hours": float,
    "crosslingual_hours": float,
    "valid_hours": float,
    "test_hours": float,
    "utterance_length_s": float,
    "segment_s": float,
    "source_channel": str,
    "target_channels": _list_of(str),
    "source_language": str,
    "crosslingual_language": str,
    "template_overlap": float,
    "n_mel": int,
    "context_frames": int,
    "include_deltas": _parse_bool,
    "hidden": _list_of(int),
    "adversary": _list_of(int),
    "slope": float,
    "learning_rate": float,
    "batch_size": int,
    "train_epochs": int,
    "adapt_epochs": int,
    "newbob_train": _parse_bool,
    "newbob_adapt": _parse_bool,
    "halving_factor": float,
    "improvement_threshold": float,
    "lambda_grid": _list_of(float),
    "f_grid": _list_of(int),
    "best_lambda": float,
    "best_f": int,
    "hours_ladder": _list_of(float),
    "seeds": _list_of(int),
    "corpus_seed": int,
    "workers": int,
}
"""Fields of an experiment configuration and the parser of their textual value."""


class ExperimentConfig:
    """
    Holds every constant of an experiment: corpus, front end, network, optimizer and scheduler settings, the grids
    of the gradient reversal coefficient and the feature layer index, the ladder of adaptation data amounts
    (fractions of the available adaptation data) and the seeds.
    """

    def __init__(self, **params):
        unknown = sorted(set(params) - set(FIELDS))
        if unknown:
            raise ConfigExceptions.UnknownFieldError(f"Unknown configuration fields: {', '.join(unknown)}")
        missing = [key for key in FIELDS if key not in params]
        if missing:
            raise ConfigExceptions.MissingFieldError(f"Missing configuration fields: {', '.join(missing)}")
        self.params = {}
        for key, value in params.items():
            self.params[key] = self._parse(key, value)
        self.validate()

    @staticmethod
    def _parse(key: str, value):
        try:
            return FIELDS[key](value)
        except (TypeError, ValueError) as error:
            raise Exceptions.ConfigError(f"Invalid value {value!r} for {key}: {error}") from error

    def validate(self) -> None:
        """
        Checks the consistency of the values.

        Raises
        ------
        Gradient_Reversal_Adaptation.Models.Exceptions.ConfigError
            If a value is out of range.
        """
        p = self.params
        if len(p["seeds"]) < 1:
            raise Exceptions.ConfigError("At least one seed is required")
        for key in ["lambda_grid", "f_grid", "hours_ladder", "hidden", "target_channels"]:
            if len(p[key]) < 1:
                raise Exceptions.ConfigError(f"{key} must not be empty")
        if any(not math.isfinite(value) or value < 0 for value in p["lambda_grid"]):
            raise Exceptions.ConfigError("lambda_grid has to hold finite non-negative values")
        for f in list(p["f_grid"]) + [p["best_f"]]:
            if not 1 <= f <= len(p["hidden"]):
                raise Exceptions.ConfigError(
                    f"Feature layer index {f} outside of [1, {len(p['hidden'])}]"
                )
        if any(not 0 < fraction <= 1 for fraction in p["hours_ladder"]):
            raise Exceptions.ConfigError("hours_ladder holds fractions in (0, 1]")
        if p["batch_size"] < 2:
            raise Exceptions.ConfigError("Minibatches need at least two frames")
        if not p["learning_rate"] > 0:
            raise Exceptions.ConfigError("The learning rate has to be positive")
        if p["workers"] < 1:
            raise Exceptions.ConfigError("At least one worker is required")
        if p["train_epochs"] < 1 or p["adapt_epochs"] < 1:
            raise Exceptions.ConfigError("Epoch counts have to be positive")

    def get(self, key: str):
        """
        Returns the value of a specific field.
        """
        if key not in self.params:
            raise ConfigExceptions.UnknownFieldError(f"Unknown configuration field: {key}")
        return self.params[key]

    def set(self, key: str, value) -> None:
        """
        Sets the value of a specific field; textual values are parsed like the values of a configuration file.
        """
        if key not in FIELDS:
            raise ConfigExceptions.UnknownFieldError(f"Unknown configuration field: {key}")
        previous = self.params[key]
        self.params[key] = self._parse(key, value)
        try:
            self.validate()
        except Exceptions.ConfigError:
            self.params[key] = previous
            raise

    def __call__(self, *args, **kwargs) -> dict:
        """
        Returns a dict containing all the fields and their values.
        """
        return self.params

    def __eq__(self, other) -> bool:
        return isinstance(other, ExperimentConfig) and self.params == other.params

    def feature_config(self) -> Features.FeatureConfig:
        return Features.FeatureConfig(
            n_mel=self.get("n_mel"),
            context_frames=self.get("context_frames"),
            include_deltas=self.get("include_deltas"),
        )

    def corpus_spec(self, channels: dict[str, Channels.ChannelProfile]) -> Builder.CorpusSpec:
        """
        Settings of the synthetic corpus.

        Parameters
        ----------
        channels: dict[str, Gradient_Reversal_Adaptation.Speech.Channels.ChannelProfile]
            Available channel profiles keyed by name (see LoadConfig.load_channels).
        """
        names = [self.get("source_channel")] + list(self.get("target_channels"))
        unknown = [name for name in names if name not in channels]
        if unknown:
            raise Exceptions.ConfigError(f"Unknown channel profiles: {', '.join(unknown)}")
        return Builder.CorpusSpec(
            n_classes=self.get("n_classes"),
            source_hours=self.get("source_hours"),
            target_hours=self.get("target_hours"),
            crosslingual_hours=self.get("crosslingual_hours"),
            valid_hours=self.get("valid_hours"),
            test_hours=self.get("test_hours"),
            utterance_length_s=self.get("utterance_length_s"),
            segment_s=self.get("segment_s"),
            source_channel=channels[self.get("source_channel")],
            target_channels=tuple(channels[name] for name in self.get("target_channels")),
            source_language=self.get("source_language"),
            crosslingual_language=self.get("crosslingual_language"),
            template_overlap=self.get("template_overlap"),
            seed=self.get("corpus_seed"),
            feature_config=self.feature_config(),
        )

    def adapt_config(self, lambda_base: float, feature_layer_index: int, seed: int) -> Types.AdaptConfig:
        return Types.AdaptConfig(
            lambda_base=lambda_base,
            feature_layer_index=feature_layer_index,
            epochs=self.get("adapt_epochs"),
            learning_rate=self.get("learning_rate"),
            batch_size=self.get("batch_size"),
            seed=seed,
            newbob=self.get("newbob_adapt"),
        )

    @staticmethod
    def format_value(value) -> str:
        if isinstance(value, tuple):
            return LIST_SEPARATOR.join(ExperimentConfig.format_value(v) for v in value)
        if isinstance(value, bool):
            return "true" if value else "false"
        return repr(value) if isinstance(value, float) else str(value)

    def to_csv(self, path: str, config_id: int = 0) -> None:
        """
        Writes the configuration as single-row CSV file (same layout as the preset file).
        """
        with open(path, "w", newline="") as file:
            writer = csv.DictWriter(file, fieldnames=["id"] + list(FIELDS))
            writer.writeheader()
            row = {key: self.format_value(value) for key, value in self.params.items()}
            writer.writerow({"id": config_id, **row})

    @staticmethod
    def from_csv(path: str) -> "ExperimentConfig":
        """
        Reads a configuration written by to_csv.
        """
        with open(path, newline="") as file:
            rows = [row for row in csv.DictReader(file, skipinitialspace=True) if row["id"].strip() != "#"]
        if len(rows) != 1:
            raise Exceptions.ConfigError(f"{path} has to hold exactly one configuration (found {len(rows)})")
        return ExperimentConfig(**{k: v for k, v in rows[0].items() if k != "id"})
