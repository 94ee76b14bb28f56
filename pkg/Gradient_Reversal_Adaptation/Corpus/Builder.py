from dataclasses import asdict, dataclass, field
from typing import Final

import json
import logging
import os
import zlib
import numpy as np

import Gradient_Reversal_Adaptation.Models.Types as Types
import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions
import Gradient_Reversal_Adaptation.Corpus.Dataset as Dataset
import Gradient_Reversal_Adaptation.Corpus.Storage as Storage
import Gradient_Reversal_Adaptation.Speech.Channels as Channels
import Gradient_Reversal_Adaptation.Speech.Features as Features
import Gradient_Reversal_Adaptation.Speech.Generator as Generator

logger = logging.getLogger(__name__)

SOURCE_TRAIN: Final[str] = "source_train"
SOURCE_VALID: Final[str] = "source_valid"
TARGET_VALID: Final[str] = "target_valid"
TARGET_ADAPT: Final[str] = "target_adapt"
CROSSLINGUAL_ADAPT: Final[str] = "crosslingual_adapt"
TARGET_TEST: Final[str] = "target_test"
SPLITS: Final[tuple[str, ...]] = (
    SOURCE_TRAIN,
    SOURCE_VALID,
    TARGET_VALID,
    TARGET_ADAPT,
    CROSSLINGUAL_ADAPT,
    TARGET_TEST,
)
"""Splits of a synthetic corpus. Adaptation splits are stored without labels."""
CORPUS_FILE: Final[str] = "corpus.json"
NORMALIZATION_FILE: Final[str] = "normalization.json"


@dataclass(frozen=True)
class CorpusSpec:
    """
    Sizes and recording conditions of a synthetic corpus.

    The source domain is recorded with the close-talk channel, the target domain with the far-field channel(s); with
    more than one target channel the utterances cycle through them.
    """

    n_classes: int = 10
    source_hours: float = 2.0
    target_hours: float = 2.0
    crosslingual_hours: float = 2.0
    valid_hours: float = 0.2
    """Size of the validation set of each domain."""
    test_hours: float = 0.5
    utterance_length_s: float = 3.0
    segment_s: float = 0.3
    source_channel: Channels.ChannelProfile = Channels.CHANNEL_PRESETS["channel1"]
    target_channels: tuple[Channels.ChannelProfile, ...] = (Channels.CHANNEL_PRESETS["channel4"],)
    source_language: str = "it"
    crosslingual_language: str = "fr"
    template_overlap: float = 0.5
    seed: int = 0
    feature_config: Features.FeatureConfig = field(default_factory=Features.FeatureConfig)

    def __post_init__(self):
        if len(self.target_channels) == 0:
            raise Exceptions.ConfigError("At least one target channel is required")
        for name in ["source_hours", "target_hours", "crosslingual_hours", "valid_hours", "test_hours"]:
            if getattr(self, name) <= 0:
                raise Exceptions.ConfigError(f"{name} has to be positive")

    def utterance_count(self, hours: float) -> int:
        return int(np.ceil(hours * 3600 / self.utterance_length_s))

    @staticmethod
    def from_dict(values: dict) -> "CorpusSpec":
        values = dict(values)
        values["source_channel"] = Channels.ChannelProfile(**values["source_channel"])
        values["target_channels"] = tuple(Channels.ChannelProfile(**c) for c in values["target_channels"])
        values["feature_config"] = Features.FeatureConfig(**values["feature_config"])
        return CorpusSpec(**values)


@dataclass
class SyntheticCorpus:
    """
    All splits of a corpus, with features standardized by the statistics of the source training data.
    """

    splits: dict[str, Dataset.FrameDataset]
    stats: Dataset.FeatureStats
    spec: CorpusSpec

    def __getitem__(self, name: str) -> Dataset.FrameDataset:
        if name not in self.splits:
            raise Exceptions.DataError(f"Corpus has no split {name}")
        return self.splits[name]

    @property
    def validation(self) -> Dataset.FrameDataset:
        """
        Validation set of the adaptation stage: source and target validation data in equal proportions.
        """
        return Dataset.concatenate([self[SOURCE_VALID], self[TARGET_VALID]])


def _utterance_rng(seed: int, split: str, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(split.encode()), index]))


def generate_split(
    name: str,
    spec: CorpusSpec,
    generator: Generator.GeneratorSpec,
    channels: tuple[Channels.ChannelProfile, ...],
    domain: Types.Domain,
    hours: float,
) -> Dataset.FrameDataset:
    """
    Generates the utterances of one split (labeled, raw features).

    Every utterance draws from its own generator seeded by (corpus seed, split name, utterance index).
    """
    cfg = spec.feature_config
    features, labels, utterance_index, ids, used_channels = [], [], [], [], []
    for index in range(spec.utterance_count(hours)):
        rng = _utterance_rng(spec.seed, name, index)
        waveform, frame_labels = Generator.generate_utterance(
            generator,
            Generator.random_class_sequence(generator, rng),
            rng,
            cfg.frame_length_ms,
            cfg.frame_shift_ms,
        )
        channel = channels[index % len(channels)]
        degraded = Channels.apply_channel(waveform, channel, rng, cfg.sample_rate_hz)
        matrix = Features.extract_features(degraded, cfg)
        features.append(matrix)
        labels.append(frame_labels)
        utterance_index.append(np.full(matrix.shape[0], index))
        ids.append(f"{name}-{index:06d}")
        used_channels.append(channel.name)
    logger.info("Generated %s: %d utterances (%s)", name, len(ids), ", ".join(sorted(set(used_channels))))
    return Dataset.FrameDataset(
        features=np.concatenate(features),
        labels=np.concatenate(labels),
        domain=domain,
        language=generator.language_tag,
        frame_shift_ms=cfg.frame_shift_ms,
        n_classes=spec.n_classes,
        utterance_index=np.concatenate(utterance_index),
        utterance_ids=ids,
        channels=used_channels,
    )


def build_corpus(spec: CorpusSpec) -> SyntheticCorpus:
    """
    Generates every split of SPLITS, fits the feature statistics on the source training data and standardizes all
    splits with them. The adaptation splits keep their true classes only as reference labels.

    Parameters
    ----------
    spec: CorpusSpec
        Corpus settings.

    Returns
    -------
    SyntheticCorpus
        Generated corpus.
    """
    source_generator = Generator.make_generator_spec(
        spec.n_classes,
        seed=spec.seed,
        language_tag=spec.source_language,
        utterance_length_s=spec.utterance_length_s,
        segment_s=spec.segment_s,
        sample_rate_hz=spec.feature_config.sample_rate_hz,
    )
    foreign_generator = Generator.language_variant(
        source_generator, spec.crosslingual_language, spec.template_overlap
    )
    source, target = (spec.source_channel,), spec.target_channels
    plan = [
        (SOURCE_TRAIN, source_generator, source, Types.Domain.Source, spec.source_hours),
        (SOURCE_VALID, source_generator, source, Types.Domain.Source, spec.valid_hours),
        (TARGET_VALID, source_generator, target, Types.Domain.Target, spec.valid_hours),
        (TARGET_ADAPT, source_generator, target, Types.Domain.Target, spec.target_hours),
        (CROSSLINGUAL_ADAPT, foreign_generator, target, Types.Domain.Target, spec.crosslingual_hours),
        (TARGET_TEST, source_generator, target, Types.Domain.Target, spec.test_hours),
    ]
    raw = {name: generate_split(name, spec, *rest) for name, *rest in plan}
    stats = Dataset.FeatureStats.fit(raw[SOURCE_TRAIN])
    splits = {name: stats.apply(data) for name, data in raw.items()}
    for name in [TARGET_ADAPT, CROSSLINGUAL_ADAPT]:
        splits[name] = splits[name].strip_labels()
    return SyntheticCorpus(splits=splits, stats=stats, spec=spec)


def save_corpus(corpus: SyntheticCorpus, path: str) -> None:
    """
    Writes every split into a sub-directory named after it, the corpus settings to corpus.json and the feature
    statistics to normalization.json.
    """
    os.makedirs(path, exist_ok=True)
    for name, data in corpus.splits.items():
        Storage.save_dataset(data, os.path.join(path, name))
    with open(os.path.join(path, CORPUS_FILE), "w") as file:
        json.dump({"splits": list(corpus.splits), "spec": asdict(corpus.spec)}, file, sort_keys=True, indent=2)
    with open(os.path.join(path, NORMALIZATION_FILE), "w") as file:
        json.dump(
            {"mean": corpus.stats.mean.tolist(), "scale": corpus.stats.scale.tolist()},
            file,
            indent=2,
        )
    logger.info("Saved corpus with splits %s to %s", ", ".join(corpus.splits), path)


def load_corpus(path: str) -> SyntheticCorpus:
    """
    Reads a corpus written by save_corpus.
    """
    if not os.path.isfile(os.path.join(path, CORPUS_FILE)):
        raise Exceptions.DataError(f"{path} contains no corpus (run gen-data first)")
    with open(os.path.join(path, CORPUS_FILE)) as file:
        header = json.load(file)
    with open(os.path.join(path, NORMALIZATION_FILE)) as file:
        normalization = json.load(file)
    return SyntheticCorpus(
        splits={name: Storage.load_dataset(os.path.join(path, name)) for name in header["splits"]},
        stats=Dataset.FeatureStats(
            mean=np.asarray(normalization["mean"], dtype=np.float64),
            scale=np.asarray(normalization["scale"], dtype=np.float64),
        ),
        spec=CorpusSpec.from_dict(header["spec"]),
    )
