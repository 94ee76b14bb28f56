from dataclasses import dataclass, replace
from typing import Sequence

import logging
import zlib
import numpy as np
import scipy.signal

import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassTemplate:
    """
    Acoustic template of a synthetic senone class: a harmonic stack shaped by one resonance plus band-limited noise.
    """

    fundamental_hz: float
    harmonic_weights: tuple[float, ...]
    formant_hz: float
    formant_bandwidth_hz: float
    noise_low_hz: float
    noise_high_hz: float
    noise_level: float

    @staticmethod
    def draw(rng: np.random.Generator, n_harmonics: int = 12) -> "ClassTemplate":
        noise_low = rng.uniform(300.0, 5000.0)
        return ClassTemplate(
            fundamental_hz=float(rng.uniform(90.0, 320.0)),
            harmonic_weights=tuple(
                float(w) for w in rng.uniform(0.2, 1.0, n_harmonics) / np.arange(1, n_harmonics + 1)
            ),
            formant_hz=float(rng.uniform(300.0, 3500.0)),
            formant_bandwidth_hz=float(rng.uniform(100.0, 400.0)),
            noise_low_hz=float(noise_low),
            noise_high_hz=float(noise_low + rng.uniform(500.0, 2000.0)),
            noise_level=float(rng.uniform(0.05, 0.3)),
        )


def _template_rng(seed: int, language_tag: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(language_tag.encode())]))


@dataclass(frozen=True)
class GeneratorSpec:
    """
    Settings of the synthetic speech generator of one language.
    """

    n_classes: int
    class_signal_params: tuple[ClassTemplate, ...]
    utterance_length_s: float = 3.0
    seed: int = 0
    language_tag: str = "it"
    sample_rate_hz: int = 16000
    segment_s: float = 0.3
    """Duration of one class segment."""

    def __post_init__(self):
        if self.n_classes < 1:
            raise Exceptions.ConfigError("At least one class is required")
        if len(self.class_signal_params) != self.n_classes:
            raise Exceptions.ConfigError(
                f"{len(self.class_signal_params)} templates for {self.n_classes} classes"
            )
        if self.utterance_length_s <= 0 or self.segment_s <= 0:
            raise Exceptions.ConfigError("Utterance and segment durations have to be positive")

    @property
    def segment_samples(self) -> int:
        return int(round(self.segment_s * self.sample_rate_hz))

    @property
    def segments_per_utterance(self) -> int:
        return max(1, int(round(self.utterance_length_s / self.segment_s)))


def make_generator_spec(
    n_classes: int,
    seed: int = 0,
    language_tag: str = "it",
    utterance_length_s: float = 3.0,
    segment_s: float = 0.3,
    sample_rate_hz: int = 16000,
) -> GeneratorSpec:
    """
    Draws the class templates of a language deterministically from the seed and the language tag.
    """
    rng = _template_rng(seed, language_tag)
    return GeneratorSpec(
        n_classes=n_classes,
        class_signal_params=tuple(ClassTemplate.draw(rng) for _ in range(n_classes)),
        utterance_length_s=utterance_length_s,
        seed=seed,
        language_tag=language_tag,
        sample_rate_hz=sample_rate_hz,
        segment_s=segment_s,
    )


def language_variant(spec: GeneratorSpec, language_tag: str, overlap: float = 0.5) -> GeneratorSpec:
    """
    Derives the generator of another language: the first round(overlap * n_classes) classes keep their templates,
    the others are drawn from the stream of the new language tag.

    Parameters
    ----------
    spec: GeneratorSpec
        Generator of the base language.
    language_tag: str
        Tag of the new language (has to differ from the base language).
    overlap: float
        Share of classes with the same acoustic template in both languages, in [0, 1).
    """
    if language_tag == spec.language_tag:
        raise Exceptions.ConfigError("Variant needs a different language tag")
    if not 0 <= overlap < 1:
        raise Exceptions.ConfigError("Template overlap has to be in [0, 1)")
    shared = int(round(overlap * spec.n_classes))
    rng = _template_rng(spec.seed, language_tag)
    fresh = [ClassTemplate.draw(rng) for _ in range(spec.n_classes)]
    return replace(
        spec,
        class_signal_params=tuple(spec.class_signal_params[:shared]) + tuple(fresh[shared:]),
        language_tag=language_tag,
    )


def random_class_sequence(spec: GeneratorSpec, rng: np.random.Generator) -> list[int]:
    """
    Draws the classes of the segments of one utterance uniformly.
    """
    return [int(c) for c in rng.integers(0, spec.n_classes, spec.segments_per_utterance)]


def _segment(
    template: ClassTemplate, n: int, sample_rate_hz: int, rng: np.random.Generator
) -> np.ndarray:
    t = np.arange(n) / sample_rate_hz
    fundamental = template.fundamental_hz * (1 + 0.02 * rng.standard_normal())
    segment = np.zeros(n)
    for k, weight in enumerate(template.harmonic_weights, start=1):
        frequency = k * fundamental
        if frequency >= sample_rate_hz / 2:
            break
        resonance = 1 + 4 / (1 + ((frequency - template.formant_hz) / template.formant_bandwidth_hz) ** 2)
        segment += weight * resonance * np.sin(2 * np.pi * frequency * t + rng.uniform(0, 2 * np.pi))
    nyquist = sample_rate_hz / 2
    high = min(template.noise_high_hz, 0.45 * sample_rate_hz)
    low = template.noise_low_hz if template.noise_low_hz < high else 0.5 * high
    b, a = scipy.signal.butter(2, [low / nyquist, high / nyquist], btype="band")
    noise = scipy.signal.lfilter(b, a, rng.standard_normal(n))
    segment += template.noise_level * noise / max(np.std(noise), 1e-12) * np.std(segment)
    fade = min(n // 2, int(0.005 * sample_rate_hz))
    if fade:
        ramp = np.linspace(0.0, 1.0, fade)
        segment[:fade] *= ramp
        segment[n - fade :] *= ramp[::-1]
    return segment * rng.uniform(0.8, 1.2) * 0.1


def generate_utterance(
    spec: GeneratorSpec,
    class_seq: Sequence[int],
    rng: np.random.Generator,
    frame_length_ms: float = 25.0,
    frame_shift_ms: float = 10.0,
) -> (np.ndarray, np.ndarray):
    """
    Synthesizes the close-talk waveform of an utterance, one segment per entry of the class sequence.

    Parameters
    ----------
    spec: GeneratorSpec
        Generator of the language.
    class_seq: Sequence[int]
        Class of every segment.
    rng: numpy.random.Generator
        Source of the per-segment variation.
    frame_length_ms: float
        Frame length of the front end.
    frame_shift_ms: float
        Frame shift of the front end.

    Returns
    -------
    numpy.ndarray
        Waveform.
    numpy.ndarray
        Label of every complete frame: the class of the segment containing the frame center.
    """
    classes = np.asarray(class_seq, dtype=np.int64)
    if classes.size == 0:
        raise Exceptions.DataError("Utterance needs at least one segment")
    if classes.min() < 0 or classes.max() >= spec.n_classes:
        raise Exceptions.DataError(f"Classes have to be in [0, {spec.n_classes})")
    n = spec.segment_samples
    waveform = np.concatenate(
        [_segment(spec.class_signal_params[c], n, spec.sample_rate_hz, rng) for c in classes]
    )
    length = int(round(spec.sample_rate_hz * frame_length_ms / 1000))
    shift = int(round(spec.sample_rate_hz * frame_shift_ms / 1000))
    n_frames = 0 if waveform.size < length else 1 + (waveform.size - length) // shift
    centers = np.arange(n_frames) * shift + length // 2
    return waveform, classes[centers // n]
