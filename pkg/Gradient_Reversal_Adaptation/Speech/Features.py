from dataclasses import dataclass
from typing import Optional

import logging
import numpy as np
import scipy.signal

import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureConfig:
    """
    Settings of the log Mel filterbank front end.

    With the default settings (23 bands, deltas and delta-deltas, 5 context frames on both sides) a frame has
    $23 \\cdot 3 \\cdot 11 = 759$ dimensions.
    """

    sample_rate_hz: int = 16000
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    n_mel: int = 23
    context_frames: int = 5
    include_deltas: bool = True
    delta_window: int = 2
    n_fft: int = 512
    pre_emphasis: float = 0.97
    log_floor: float = 1e-10
    """Smallest filterbank energy passed to the logarithm."""
    low_hz: float = 0.0
    high_hz: Optional[float] = None
    """Upper edge of the filterbank, defaults to the Nyquist frequency."""

    def __post_init__(self):
        if self.n_mel < 1:
            raise Exceptions.ConfigError("At least one Mel band is required")
        if self.context_frames < 0:
            raise Exceptions.ConfigError("Context has to be non-negative")
        if self.delta_window < 1:
            raise Exceptions.ConfigError("Delta window has to be at least 1")
        if self.frame_length < 1 or self.frame_shift < 1:
            raise Exceptions.ConfigError("Frame length and shift have to span at least one sample")
        if self.frame_length > self.n_fft:
            raise Exceptions.ConfigError(
                f"Frame of {self.frame_length} samples does not fit an FFT of size {self.n_fft}"
            )
        if self.log_floor <= 0:
            raise Exceptions.ConfigError("Log floor has to be positive")

    @property
    def frame_length(self) -> int:
        """
        Frame length in samples.
        """
        return int(round(self.sample_rate_hz * self.frame_length_ms / 1000))

    @property
    def frame_shift(self) -> int:
        """
        Frame shift in samples.
        """
        return int(round(self.sample_rate_hz * self.frame_shift_ms / 1000))

    @property
    def static_dims(self) -> int:
        return self.n_mel * (3 if self.include_deltas else 1)

    @property
    def output_dims(self) -> int:
        """
        Dimension of a spliced frame, $n_{mel} \\cdot (1 + 2 \\cdot deltas) \\cdot (2 \\cdot context + 1)$.
        """
        return self.static_dims * (2 * self.context_frames + 1)

    def frame_count(self, n_samples: int) -> int:
        """
        Number of complete frames of a signal.
        """
        if n_samples < self.frame_length:
            return 0
        return 1 + (n_samples - self.frame_length) // self.frame_shift


def hz_to_mel(frequency):
    """
    Mel scale $m = 1127 \\ln(1 + f/700)$.
    """
    return 1127.0 * np.log1p(np.asarray(frequency, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * np.expm1(np.asarray(mel, dtype=np.float64) / 1127.0)


def mel_filterbank(
    n_mel: int, n_fft: int, sample_rate_hz: int, low_hz: float = 0.0, high_hz: Optional[float] = None
) -> np.ndarray:
    """
    Triangular filters with centers equally spaced on the Mel scale.

    Returns
    -------
    numpy.ndarray
        Weights of shape (n_mel, n_fft // 2 + 1).
    """
    high_hz = sample_rate_hz / 2 if high_hz is None else high_hz
    if not 0 <= low_hz < high_hz <= sample_rate_hz / 2:
        raise Exceptions.ConfigError(f"Invalid filterbank range [{low_hz}, {high_hz}] Hz")
    edges = mel_to_hz(np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), n_mel + 2))
    bins = np.arange(n_fft // 2 + 1) * sample_rate_hz / n_fft
    left, center, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins - left) / (center - left)
    falling = (right - bins) / (right - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def frame_signal(waveform: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """
    Splits a signal into overlapping frames of shape (frames, frame_length); an incomplete last frame is dropped.
    """
    n_frames = cfg.frame_count(waveform.size)
    if n_frames == 0:
        raise Exceptions.DataError(
            f"Waveform of {waveform.size} samples is shorter than one frame ({cfg.frame_length} samples)"
        )
    starts = np.arange(n_frames)[:, None] * cfg.frame_shift
    return waveform[starts + np.arange(cfg.frame_length)[None, :]]


def log_mel_energies(waveform: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """
    Static features: pre-emphasis, Hamming window, power spectrum, Mel filterbank, logarithm.
    """
    signal = np.asarray(waveform, dtype=np.float64).reshape(-1)
    emphasized = scipy.signal.lfilter([1.0, -cfg.pre_emphasis], [1.0], signal)
    frames = frame_signal(emphasized, cfg) * scipy.signal.get_window(
        "hamming", cfg.frame_length
    )
    power = np.abs(np.fft.rfft(frames, n=cfg.n_fft, axis=1)) ** 2
    bank = mel_filterbank(cfg.n_mel, cfg.n_fft, cfg.sample_rate_hz, cfg.low_hz, cfg.high_hz)
    return np.log(np.maximum(power @ bank.T, cfg.log_floor))


def delta_features(static: np.ndarray, window: int = 2) -> np.ndarray:
    """
    Regression deltas
    $\\Delta_t = \\frac{\\sum_{n=1}^{W} n (x_{t+n} - x_{t-n})}{2 \\sum_{n=1}^{W} n^2}$
    with the first and last frame replicated beyond the edges.

    Parameters
    ----------
    static: numpy.ndarray
        Frames of shape (frames, dims).
    window: int
        ($W$) Number of neighbours on each side.

    Returns
    -------
    numpy.ndarray
        Deltas of the same shape.
    """
    if window < 1:
        raise Exceptions.ConfigError("Delta window has to be at least 1")
    static = np.asarray(static, dtype=np.float64)
    if static.shape[0] == 0:
        return static.copy()
    n_frames = static.shape[0]
    padded = np.pad(static, ((window, window), (0, 0)), mode="edge")
    deltas = np.zeros_like(static)
    for n in range(1, window + 1):
        deltas += n * (padded[window + n : window + n + n_frames] - padded[window - n : window - n + n_frames])
    return deltas / (2 * sum(n * n for n in range(1, window + 1)))


def splice(frames: np.ndarray, context: int) -> np.ndarray:
    """
    Concatenates every frame with its context frames $t-c, \\dots, t+c$; frames beyond the edges are replaced by the
    first or last frame.
    """
    if context < 0:
        raise Exceptions.ConfigError("Context has to be non-negative")
    frames = np.asarray(frames, dtype=np.float64)
    if context == 0:
        return frames.copy()
    n_frames = frames.shape[0]
    padded = np.pad(frames, ((context, context), (0, 0)), mode="edge")
    return np.hstack([padded[offset : offset + n_frames] for offset in range(2 * context + 1)])


def extract_features(waveform: np.ndarray, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """
    Computes the network input of an utterance: log Mel energies, optionally extended by deltas and delta-deltas,
    spliced with the context frames.

    Parameters
    ----------
    waveform: numpy.ndarray
        1-D signal of at least one frame.
    cfg: FeatureConfig
        Front end settings.

    Returns
    -------
    numpy.ndarray
        Matrix of shape (frames, cfg.output_dims).
    """
    static = log_mel_energies(waveform, cfg)
    if cfg.include_deltas:
        deltas = delta_features(static, cfg.delta_window)
        static = np.hstack([static, deltas, delta_features(deltas, cfg.delta_window)])
    return splice(static, cfg.context_frames)
