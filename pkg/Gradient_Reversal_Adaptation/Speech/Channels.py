from dataclasses import dataclass
from typing import Final

import logging
import numpy as np
import scipy.signal

import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions

logger = logging.getLogger(__name__)

NOISE_CUTOFF_HZ: Final[float] = 4000.0
"""Cutoff of the low-pass filter colouring the environmental noise."""


@dataclass(frozen=True)
class ChannelProfile:
    """
    Recording condition of a microphone channel.

    The signal is convolved with an exponentially decaying random impulse response, mixed with coloured noise at the
    given signal to noise ratio and finally scaled by the gain. The close-talk channel has no reverberation and an
    infinite signal to noise ratio.
    """

    name: str
    snr_db: float
    """Signal to noise ratio in dB, inf for no noise."""
    reverb_decay_s: float
    """Time constant of the exponential envelope of the impulse response."""
    reverb_taps: int
    """Length of the impulse response in samples (0 for no reverberation)."""
    gain: float

    def __post_init__(self):
        if self.gain <= 0:
            raise Exceptions.ConfigError(f"Gain of channel {self.name} has to be positive")
        if self.reverb_decay_s < 0:
            raise Exceptions.ConfigError(f"Reverberation decay of channel {self.name} has to be non-negative")
        if self.reverb_taps < 0:
            raise Exceptions.ConfigError(f"Reverberation taps of channel {self.name} have to be non-negative")
        if np.isnan(self.snr_db):
            raise Exceptions.ConfigError(f"SNR of channel {self.name} is not a number")

    @property
    def has_noise(self) -> bool:
        return np.isfinite(self.snr_db)

    @property
    def has_reverb(self) -> bool:
        return self.reverb_taps > 1 and self.reverb_decay_s > 0

    @property
    def is_clean(self) -> bool:
        return not (self.has_noise or self.has_reverb)


CHANNEL_PRESETS: Final[dict[str, ChannelProfile]] = {
    profile.name: profile
    for profile in [
        ChannelProfile("channel1", float("inf"), 0.0, 0, 1.0),
        ChannelProfile("channel2", 25.0, 0.02, 320, 0.9),
        ChannelProfile("channel3", 15.0, 0.06, 960, 0.6),
        ChannelProfile("channel4", 10.0, 0.1, 1600, 0.4),
    ]
}
"""
Emulation of the four channels of the corpus: close-talk headset, lavalier, medium distance and far distance
omni-directional microphone. The same values are shipped in Configurations/channels.csv.
"""


def impulse_response(
    profile: ChannelProfile, sample_rate_hz: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Draws a room impulse response: direct path followed by white noise with an exponential envelope
    $e^{-t/\\tau}$, normalized to unit energy.
    """
    if not profile.has_reverb:
        return np.ones(1)
    t = np.arange(profile.reverb_taps) / sample_rate_hz
    response = rng.standard_normal(profile.reverb_taps) * np.exp(-t / profile.reverb_decay_s)
    response[0] = 1.0
    return response / np.linalg.norm(response)


def _noise(n: int, sample_rate_hz: int, rng: np.random.Generator) -> np.ndarray:
    b, a = scipy.signal.butter(2, NOISE_CUTOFF_HZ / (sample_rate_hz / 2), btype="low")
    return scipy.signal.lfilter(b, a, rng.standard_normal(n))


def apply_channel(
    waveform: np.ndarray,
    profile: ChannelProfile,
    rng: np.random.Generator,
    sample_rate_hz: int = 16000,
) -> np.ndarray:
    """
    Degrades a close-talk waveform with the given channel.

    Parameters
    ----------
    waveform: numpy.ndarray
        1-D signal.
    profile: ChannelProfile
        Channel to emulate.
    rng: numpy.random.Generator
        Source of the impulse response and the noise.
    sample_rate_hz: int
        Sample rate of the signal.

    Returns
    -------
    numpy.ndarray
        Degraded signal of the same length (the tail of the reverberation is cut off).
    """
    signal = np.asarray(waveform, dtype=np.float64)
    if profile.is_clean:
        return signal * profile.gain
    if profile.has_reverb:
        response = impulse_response(profile, sample_rate_hz, rng)
        signal = scipy.signal.fftconvolve(signal, response)[: signal.size]
    if profile.has_noise and signal.size:
        noise = _noise(signal.size, sample_rate_hz, rng)
        signal_power = np.mean(signal**2)
        noise_power = np.mean(noise**2)
        if signal_power > 0 and noise_power > 0:
            noise *= np.sqrt(signal_power / (noise_power * 10 ** (profile.snr_db / 10)))
            signal = signal + noise
    return signal * profile.gain
