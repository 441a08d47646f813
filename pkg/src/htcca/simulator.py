"""Seeded synthetic multi-subject SSVEP generator.

Each subject sees the same stimuli. A trial for stimulus ``i`` is::

    x(t) = sum_k P_s[k] * decay**(k-1) * sin(2*pi*k*f_i*(t - L) + phi_{s,i,k} + j) + noise(t)

for ``t >= L`` (the visual latency) and noise only before it. ``P_s[k]`` is
the channel pattern of harmonic ``k``, blended between a pattern shared by all
subjects and a subject-specific one by ``subject_similarity``; the phases
``phi_{s,i,k}`` are blended the same way. ``j`` is a per-trial phase jitter.

Noise is 1/f^alpha (power spectral density) background with an optional
Gaussian alpha-band peak, band-limited to ``[noise_low_hz, noise_high_hz]``
and generated per source in the frequency domain with random phases. Each
channel gets its own source plus a share ``noise_correlation`` of one common
source whose channel pattern is blended across subjects like the signal
patterns. ``subject_delay_sd`` adds a per-subject response delay, which
rotates every harmonic phase by ``2*pi*k*f*delay``. Signal power is normalised so the mean
per-channel power of the steady-state response is 1, and the noise is scaled
so the mean per-channel noise power is ``10**(-snr_db/10)``; ``snr_db`` is
therefore the average per-channel signal-to-noise power ratio.

Every trial draws from its own generator stream keyed on (seed, subject,
block, target), so output does not depend on generation order.
"""

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from numpy import ndarray

from .dataset import EpochedDataset, _round_half_up
from .errors import ConfigInvalid, IndexOutOfRange

SAN_DIEGO_FREQUENCIES = tuple(9.25 + 0.5 * k for k in range(12))
SAN_DIEGO_CHANNELS = ("PO7", "PO3", "POz", "PO4", "PO8", "O1", "Oz", "O2")
TSINGHUA_FREQUENCIES = tuple(round(8.0 + 0.2 * k, 1) for k in range(40))
TSINGHUA_CHANNELS = ("Pz", "PO5", "PO3", "POz", "PO4", "PO6", "O1", "Oz", "O2")


@dataclass(frozen=True)
class SimConfig:
    n_subjects: int = 10
    n_blocks: int = 15
    frequencies: tuple = SAN_DIEGO_FREQUENCIES
    n_channels: int = 8
    sample_rate: float = 256.0
    trial_seconds: float = 4.0
    n_harmonics: int = 3
    harmonic_decay: float = 0.6
    subject_similarity: float = 0.85
    snr_db: float = -8.0
    noise_exponent: float = 1.0
    phase_jitter_rad: float = 0.3
    alpha_peak_hz: float = 10.0
    alpha_peak_width_hz: float = 2.0
    alpha_peak_gain: float = 60.0
    noise_correlation: float = 0.7
    subject_delay_sd: float = 0.015
    noise_low_hz: float = 6.0
    noise_high_hz: Optional[float] = 48.0  # None: no upper limit
    seed: int = 0
    latency_seconds: float = 0.135
    signal_amplitude: float = 1.0
    channels: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        if self.channels is None:
            labels = (SAN_DIEGO_CHANNELS if self.n_channels == len(SAN_DIEGO_CHANNELS)
                      else tuple(f"ch{c}" for c in range(self.n_channels)))
            object.__setattr__(self, "channels", labels)
        else:
            object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))

    def validate(self) -> None:
        """Raise :class:`ConfigInvalid` on any inconsistent setting."""
        problems = []
        if self.n_subjects < 2:
            problems.append("n_subjects must be >= 2")
        if self.n_blocks < 2:
            problems.append("n_blocks must be >= 2")
        if not self.frequencies:
            problems.append("frequencies is empty")
        elif min(self.frequencies) <= 0:
            problems.append("frequencies must be positive")
        if self.n_channels < 1:
            problems.append("n_channels must be >= 1")
        if len(self.channels) != self.n_channels:
            problems.append("channels must list one label per channel")
        if not self.sample_rate > 0:
            problems.append("sample_rate must be positive")
        if not self.trial_seconds > 0:
            problems.append("trial_seconds must be positive")
        if self.n_harmonics < 1:
            problems.append("n_harmonics must be >= 1")
        if not 0 < self.harmonic_decay <= 1:
            problems.append("harmonic_decay must be in (0, 1]")
        if not 0 <= self.subject_similarity <= 1:
            problems.append("subject_similarity must be in [0, 1]")
        if not math.isfinite(self.snr_db):
            problems.append("snr_db must be finite")
        if not self.noise_exponent >= 0:
            problems.append("noise_exponent must be >= 0")
        if not 0 <= self.noise_correlation <= 1:
            problems.append("noise_correlation must be in [0, 1]")
        if not self.phase_jitter_rad >= 0:
            problems.append("phase_jitter_rad must be >= 0")
        if not self.subject_delay_sd >= 0:
            problems.append("subject_delay_sd must be >= 0")
        if not self.alpha_peak_gain >= 0:
            problems.append("alpha_peak_gain must be >= 0")
        high = math.inf if self.noise_high_hz is None else self.noise_high_hz
        if not 0 <= self.noise_low_hz < high:
            problems.append("noise band must satisfy 0 <= noise_low_hz < noise_high_hz")
        if not self.latency_seconds >= 0:
            problems.append("latency_seconds must be >= 0")
        if not self.signal_amplitude >= 0:
            problems.append("signal_amplitude must be >= 0")
        if self.frequencies and self.n_harmonics * max(self.frequencies) >= self.sample_rate / 2:
            problems.append("n_harmonics * max(frequencies) must be below sample_rate / 2")
        if problems:
            raise ConfigInvalid("; ".join(problems))

    @property
    def onset_sample(self) -> int:
        return _round_half_up(self.latency_seconds * self.sample_rate)

    @property
    def epoch_samples(self) -> int:
        return self.onset_sample + _round_half_up(self.trial_seconds * self.sample_rate)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frequencies"] = list(self.frequencies)
        d["channels"] = list(self.channels)
        return d


PRESETS = {
    "san-diego-like": SimConfig(),
    "tsinghua-like": SimConfig(
        n_subjects=35, n_blocks=6, frequencies=TSINGHUA_FREQUENCIES, n_channels=9,
        channels=TSINGHUA_CHANNELS, sample_rate=250.0, trial_seconds=5.0,
        latency_seconds=0.14),
    "small": SimConfig(n_subjects=4, n_blocks=4, frequencies=(8.0, 10.0, 12.0, 15.0),
                       n_channels=4, trial_seconds=1.5, snr_db=-5.0),
}


def preset(name: str, **overrides) -> SimConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigInvalid(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


@dataclass(frozen=True)
class SimDataset:
    """Generated dataset plus ground-truth labels of shape (subject, block, target)."""

    dataset: EpochedDataset
    labels: ndarray
    config: SimConfig


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _draw_jitter(rng: np.random.Generator, config: SimConfig) -> float:
    # first draw of each trial stream, so it can be regenerated on its own
    return rng.normal(0.0, config.phase_jitter_rad) if config.phase_jitter_rad else 0.0


def noise_psd(freqs: ndarray, exponent: float, peak_hz: float = 10.0,
              peak_width_hz: float = 2.0, peak_gain: float = 0.0,
              band: tuple = (0.0, math.inf)) -> ndarray:
    """1/f**exponent shape times an optional Gaussian spectral peak.

    Zero at DC and outside ``band``.
    """
    psd = np.zeros_like(freqs, dtype=float)
    keep = (freqs > 0) & (freqs >= band[0]) & (freqs <= band[1])
    f = freqs[keep]
    bump = 1.0 + peak_gain * np.exp(-0.5 * ((f - peak_hz) / peak_width_hz) ** 2)
    psd[keep] = f ** (-exponent) * bump
    return psd


def colored_noise(rng: np.random.Generator, n_sources: int, n_samples: int,
                  sample_rate: float, exponent: float, peak_hz: float = 10.0,
                  peak_width_hz: float = 2.0, peak_gain: float = 0.0,
                  band: tuple = (0.0, math.inf)) -> ndarray:
    """Unit-variance noise with power spectral density given by :func:`noise_psd`."""
    freqs = np.fft.rfftfreq(n_samples, d=1.0 / sample_rate)
    amp = np.sqrt(noise_psd(freqs, exponent, peak_hz, peak_width_hz, peak_gain, band))
    spec = amp * (rng.standard_normal((n_sources, freqs.size))
                  + 1j * rng.standard_normal((n_sources, freqs.size)))
    noise = np.fft.irfft(spec, n=n_samples, axis=-1)
    noise -= noise.mean(axis=-1, keepdims=True)
    return noise / noise.std(axis=-1, keepdims=True)


def _subject_state(config: SimConfig, subject: int, shared_patterns: ndarray,
                   shared_phases: ndarray, shared_common: ndarray) -> tuple:
    rng = _rng(config.seed, 1, subject)
    n_h, n_c = config.n_harmonics, config.n_channels
    own_patterns = rng.standard_normal((n_h, n_c))
    own_phase_dev = rng.uniform(-np.pi, np.pi, size=shared_phases.shape)
    # independent sensor noise plus one volume-conducted common source
    sim = config.subject_similarity
    common = sim * shared_common + (1 - sim) * rng.standard_normal(n_c)
    common /= np.sqrt(np.mean(common ** 2))
    rho = config.noise_correlation
    noise_mix = np.hstack([np.sqrt(1 - rho) * np.eye(n_c), np.sqrt(rho) * common[:, None]])

    patterns = sim * shared_patterns + (1 - sim) * own_patterns
    decay = config.harmonic_decay ** np.arange(n_h)
    patterns = patterns * decay[:, None]
    # mean per-channel power of the steady-state response -> 1
    patterns /= np.sqrt(np.mean(np.sum(patterns ** 2, axis=0) / 2))
    phases = shared_phases + (1 - sim) * own_phase_dev
    # subject-specific response delay shifts every harmonic by 2*pi*k*f*delay
    delay = rng.normal(0.0, config.subject_delay_sd)
    k = np.arange(1, n_h + 1)
    phases = phases - 2 * np.pi * np.outer(config.frequencies, k) * delay
    return patterns, phases, noise_mix


def simulate(config: SimConfig) -> SimDataset:
    """Generate a :class:`SimDataset`; a pure function of ``config``.

    Raises:
        ConfigInvalid: see :meth:`SimConfig.validate`.
    """
    config.validate()
    n_s, n_b = config.n_subjects, config.n_blocks
    freqs = np.asarray(config.frequencies)
    n_t, n_c, n_h = freqs.size, config.n_channels, config.n_harmonics
    sr = config.sample_rate
    onset, n_samples = config.onset_sample, config.epoch_samples

    shared = _rng(config.seed, 0)
    shared_patterns = shared.standard_normal((n_h, n_c))
    shared_phases = shared.uniform(-np.pi, np.pi, size=(n_t, n_h))
    shared_common = shared.standard_normal(n_c)

    t = (np.arange(n_samples) - onset) / sr
    active = t >= 0
    k = np.arange(1, n_h + 1)
    noise_scale = 10.0 ** (-config.snr_db / 20.0)
    band = (config.noise_low_hz,
            math.inf if config.noise_high_hz is None else config.noise_high_hz)

    data = np.empty((n_s, n_b, n_t, n_c, n_samples), dtype=np.float32)
    for s in range(n_s):
        patterns, phases, noise_mix = _subject_state(
            config, s, shared_patterns, shared_phases, shared_common)
        for b in range(n_b):
            for i in range(n_t):
                rng = _rng(config.seed, 2, s, b, i)
                jitter = _draw_jitter(rng, config)
                # (Nh, n) harmonic sources
                src = np.sin(2 * np.pi * k[:, None] * freqs[i] * t + phases[i][:, None] + jitter)
                src[:, ~active] = 0.0
                signal = config.signal_amplitude * (patterns.T @ src)
                noise = noise_mix @ colored_noise(
                    rng, n_c + 1, n_samples, sr, config.noise_exponent, config.alpha_peak_hz,
                    config.alpha_peak_width_hz, config.alpha_peak_gain, band)
                data[s, b, i] = signal + noise_scale * noise

    dataset = EpochedDataset(data, config.channels, sr, config.frequencies,
                             config.latency_seconds, source="simulator")
    labels = np.broadcast_to(np.arange(n_t), (n_s, n_b, n_t)).copy()
    return SimDataset(dataset, labels, config)


def snr_measured(dataset, stimulus: int, n_harmonics: int = 5, half_band: int = 2) -> float:
    """Estimate the SNR (dB) of one stimulus's trials from their spectra.

    The response is phase-locked across a subject's blocks and the noise is
    not. Per Hann-windowed frequency bin, deviations from the block mean give
    the noise power, ``sum_b |X_b - mean|**2 / (B - 1)``, and the block mean
    gives the response power, ``|mean|**2 - noise / B``; neither needs a model
    of the noise spectrum. Response power within ``half_band`` bins of each
    harmonic is the signal and noise power over all bins (DC excluded) is the
    noise. Only samples after the latency are used, and sums run over subjects
    and channels. For a :class:`SimDataset` each trial's phase jitter is
    regenerated from its seed stream and undone first; on a plain
    :class:`EpochedDataset` jitter leaks response power into the noise term.

    Args:
        dataset: :class:`SimDataset` or :class:`EpochedDataset` with >= 2 blocks.
        stimulus: Target index.
        n_harmonics: Harmonics counted as signal (those below Nyquist).
        half_band: Half-width of each harmonic band, in bins.
    """
    ds = dataset.dataset if isinstance(dataset, SimDataset) else dataset
    if not 0 <= stimulus < ds.n_targets:
        raise IndexOutOfRange(f"stimulus {stimulus} out of range (0..{ds.n_targets - 1})")
    n_s, n_b = ds.n_subjects, ds.n_blocks
    if n_b < 2:
        raise ValueError("SNR estimation needs at least two blocks")
    onset = _round_half_up(ds.latency_seconds * ds.sample_rate)
    x = ds.data[:, :, stimulus, :, onset:].astype(np.float64)
    n = x.shape[-1]
    x = x - x.mean(axis=-1, keepdims=True)
    spec = np.fft.rfft(x * np.hanning(n), axis=-1)  # (S, B, C, F)
    if isinstance(dataset, SimDataset):
        jitter = np.array([[_draw_jitter(_rng(dataset.config.seed, 2, s, b, stimulus),
                                         dataset.config) for b in range(n_b)]
                           for s in range(n_s)])
        spec = spec * np.exp(-1j * jitter)[:, :, None, None]

    mean = spec.mean(axis=1)
    noise_bins = np.sum(np.abs(spec - mean[:, None]) ** 2, axis=1) / (n_b - 1)
    signal_bins = np.abs(mean) ** 2 - noise_bins / n_b
    noise_bins = noise_bins.reshape(-1, noise_bins.shape[-1]).sum(axis=0)
    signal_bins = signal_bins.reshape(-1, signal_bins.shape[-1]).sum(axis=0)

    df = ds.sample_rate / n
    nyq_bin = noise_bins.size - 1
    in_band = np.zeros(noise_bins.size, dtype=bool)
    for h in range(1, n_harmonics + 1):
        centre = int(round(h * ds.frequencies[stimulus] / df))
        if centre + half_band >= nyq_bin:
            break
        in_band[max(centre - half_band, 1):centre + half_band + 1] = True
    signal = max(float(signal_bins[in_band].sum()), 0.0)
    noise = float(noise_bins[1:].sum())
    tiny = np.finfo(float).tiny
    return float(10.0 * np.log10(max(signal, tiny) / max(noise, tiny)))
