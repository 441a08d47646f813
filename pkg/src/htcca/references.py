"""Sine-cosine harmonic reference matrices."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy import ndarray

from .errors import EmptyFrequencyList, NyquistViolation

DEFAULT_HARMONICS = 5


@dataclass(frozen=True)
class ReferenceSet:
    """Harmonic references for a list of stimulus frequencies.

    ``signals[i]`` has shape (2*n_harmonics, n_samples); row 2k is
    sin(2*pi*(k+1)*f_i*t + phase_i) and row 2k+1 the matching cosine.
    """

    signals: ndarray
    frequencies: tuple
    sample_rate: float
    n_harmonics: int

    def __len__(self):
        return len(self.frequencies)

    def __getitem__(self, i):
        return self.signals[i]

    @property
    def n_samples(self) -> int:
        return self.signals.shape[-1]


def make_references(
        frequencies: Sequence[float],
        sample_rate: float,
        n_samples: int,
        n_harmonics: int = DEFAULT_HARMONICS,
        phases: Optional[Sequence[float]] = None) -> ReferenceSet:
    """Build a :class:`ReferenceSet`.

    Args:
        frequencies: Stimulus frequencies in Hz.
        sample_rate: Hz.
        n_samples: Samples per reference (>= 2).
        n_harmonics: Harmonics per frequency, fundamental included.
        phases: Optional per-stimulus phase offsets in radians.

    Raises:
        EmptyFrequencyList: no frequencies given.
        NyquistViolation: the top harmonic reaches sample_rate / 2.
    """
    freqs = np.asarray(frequencies, dtype=float).ravel()
    if freqs.size == 0:
        raise EmptyFrequencyList("at least one stimulus frequency is required")
    if np.any(freqs <= 0):
        raise ValueError("frequencies must be positive")
    if n_harmonics < 1:
        raise ValueError("n_harmonics must be >= 1")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    top = n_harmonics * freqs.max()
    if top >= sample_rate / 2:
        raise NyquistViolation(
            f"harmonic {n_harmonics} of {freqs.max()} Hz ({top} Hz) is not "
            f"below Nyquist ({sample_rate / 2} Hz)")
    if phases is None:
        phases = np.zeros_like(freqs)
    phases = np.asarray(phases, dtype=float).ravel()
    if phases.shape != freqs.shape:
        raise ValueError("phases must match frequencies in length")

    t = np.arange(n_samples) / sample_rate
    k = np.arange(1, n_harmonics + 1)
    # (Nf, Nh, Ns)
    arg = 2 * np.pi * k[None, :, None] * freqs[:, None, None] * t + phases[:, None, None]
    signals = np.empty((freqs.size, 2 * n_harmonics, n_samples))
    signals[:, 0::2] = np.sin(arg)
    signals[:, 1::2] = np.cos(arg)
    signals.setflags(write=False)
    return ReferenceSet(signals, tuple(float(f) for f in freqs),
                        float(sample_rate), int(n_harmonics))
