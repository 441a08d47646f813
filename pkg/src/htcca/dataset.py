"""Epoched multi-subject SSVEP datasets and their on-disk format.

A dataset on disk is a pair of files sharing a base path:

``<name>.manifest``
    UTF-8 ``key = value`` lines: version, subjects, blocks, targets,
    channels (comma list), sample_rate, epoch_samples, latency_seconds,
    frequencies (comma list) and an optional ``source`` tag.
``<name>.f32``
    Raw little-endian float32 samples in (subject, block, target, channel,
    sample) order, subject-major.
"""

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from numpy import ndarray

from .errors import (ManifestMalformed, NonIntegerFactor, SizeMismatch,
                     UnknownChannel, UnsupportedVersion, WindowOutOfRange)

FORMAT_VERSION = 1
AXES = ("subject", "block", "target", "channel", "sample")

_REQUIRED_KEYS = ("version", "subjects", "blocks", "targets", "channels",
                  "sample_rate", "epoch_samples", "latency_seconds", "frequencies")
_OPTIONAL_KEYS = ("source",)


@dataclass(frozen=True)
class TrialTensor:
    """One epoched trial, channels x samples."""

    data: ndarray
    sample_rate: float

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class EpochedDataset:
    """Subjects x blocks x targets grid of epoched trials.

    ``data`` is float32 with axes (subject, block, target, channel, sample);
    values are in microvolts by convention.
    """

    data: ndarray
    channels: tuple
    sample_rate: float
    frequencies: tuple
    latency_seconds: float = 0.0
    source: Optional[str] = None

    def __post_init__(self):
        data = self.data
        if not (isinstance(data, np.ndarray) and data.dtype == np.float32
                and not data.flags.writeable):
            data = np.array(data, dtype=np.float32)
            data.setflags(write=False)
        if data.ndim != 5:
            raise ValueError(f"data must have 5 axes {AXES}, got shape {data.shape}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channels", tuple(str(c) for c in self.channels))
        object.__setattr__(self, "frequencies", tuple(float(f) for f in self.frequencies))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "latency_seconds", float(self.latency_seconds))
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if len(self.channels) != data.shape[3]:
            raise ValueError(f"{len(self.channels)} channel labels for {data.shape[3]} channels")
        if len(self.frequencies) != data.shape[2]:
            raise ValueError(f"{len(self.frequencies)} frequencies for {data.shape[2]} targets")

    @property
    def n_subjects(self) -> int:
        return self.data.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.data.shape[1]

    @property
    def n_targets(self) -> int:
        return self.data.shape[2]

    @property
    def n_channels(self) -> int:
        return self.data.shape[3]

    @property
    def epoch_samples(self) -> int:
        return self.data.shape[4]

    def trial(self, subject: int, block: int, target: int) -> TrialTensor:
        return TrialTensor(self.data[subject, block, target], self.sample_rate)

    def header(self) -> dict:
        out = {
            "version": FORMAT_VERSION,
            "subjects": self.n_subjects,
            "blocks": self.n_blocks,
            "targets": self.n_targets,
            "channels": list(self.channels),
            "sample_rate": self.sample_rate,
            "epoch_samples": self.epoch_samples,
            "latency_seconds": self.latency_seconds,
            "frequencies": list(self.frequencies),
        }
        if self.source is not None:
            out["source"] = self.source
        return out


# ---------------------------------------------------------------- file format

def _base_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    if path.suffix in (".manifest", ".f32"):
        return path.with_suffix("")
    return path


def manifest_text(dataset: EpochedDataset) -> str:
    h = dataset.header()
    lines = [
        f"version = {h['version']}",
        f"subjects = {h['subjects']}",
        f"blocks = {h['blocks']}",
        f"targets = {h['targets']}",
        f"channels = {','.join(h['channels'])}",
        f"sample_rate = {h['sample_rate']!r}",
        f"epoch_samples = {h['epoch_samples']}",
        f"latency_seconds = {h['latency_seconds']!r}",
        f"frequencies = {','.join(repr(f) for f in h['frequencies'])}",
    ]
    if dataset.source is not None:
        lines.append(f"source = {dataset.source}")
    return "\n".join(lines) + "\n"


def write_dataset(dataset: EpochedDataset, path: Union[str, Path]) -> Path:
    """Write ``<path>.manifest`` and ``<path>.f32``; returns the base path."""
    base = _base_path(path)
    base.parent.mkdir(parents=True, exist_ok=True)
    if any("," in c or "\n" in c for c in dataset.channels):
        raise ValueError("channel labels may not contain commas or newlines")
    base.with_suffix(".f32").write_bytes(dataset.data.astype("<f4").tobytes(order="C"))
    base.with_suffix(".manifest").write_text(manifest_text(dataset), encoding="utf-8")
    return base


def parse_manifest(text: str) -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ManifestMalformed(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in raw:
            raise ManifestMalformed(f"line {lineno}: duplicate key {key!r}")
        if key not in _REQUIRED_KEYS and key not in _OPTIONAL_KEYS:
            raise ManifestMalformed(f"line {lineno}: unknown key {key!r}")
        raw[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in raw]
    if missing:
        raise ManifestMalformed(f"missing keys: {', '.join(missing)}")

    try:
        version = int(raw["version"])
    except ValueError:
        raise ManifestMalformed(f"bad version {raw['version']!r}") from None
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"manifest version {version} (supported: {FORMAT_VERSION})")

    try:
        header = {
            "version": version,
            "subjects": int(raw["subjects"]),
            "blocks": int(raw["blocks"]),
            "targets": int(raw["targets"]),
            "channels": [c.strip() for c in raw["channels"].split(",")] if raw["channels"] else [],
            "sample_rate": float(raw["sample_rate"]),
            "epoch_samples": int(raw["epoch_samples"]),
            "latency_seconds": float(raw["latency_seconds"]),
            "frequencies": ([float(f) for f in raw["frequencies"].split(",")]
                            if raw["frequencies"] else []),
        }
    except ValueError as exc:
        raise ManifestMalformed(f"unparseable value: {exc}") from None
    if "source" in raw:
        header["source"] = raw["source"]

    for key in ("subjects", "blocks", "targets", "epoch_samples"):
        if header[key] < 1:
            raise ManifestMalformed(f"{key} must be >= 1")
    if not header["channels"]:
        raise ManifestMalformed("channel list is empty")
    if len(header["frequencies"]) != header["targets"]:
        raise ManifestMalformed(
            f"targets = {header['targets']} but {len(header['frequencies'])} frequencies listed")
    if not header["sample_rate"] > 0:
        raise ManifestMalformed("sample_rate must be positive")
    if header["latency_seconds"] < 0:
        raise ManifestMalformed("latency_seconds must be >= 0")
    return header


def read_dataset(path: Union[str, Path]) -> EpochedDataset:
    """Load a dataset written by :func:`write_dataset`.

    Raises:
        ManifestMalformed: manifest missing keys or internally inconsistent.
        UnsupportedVersion: unknown format version.
        SizeMismatch: tensor byte length disagrees with the manifest.
    """
    base = _base_path(path)
    try:
        text = base.with_suffix(".manifest").read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ManifestMalformed("manifest is not valid UTF-8") from None
    header = parse_manifest(text)
    shape = (header["subjects"], header["blocks"], header["targets"],
             len(header["channels"]), header["epoch_samples"])
    tensor_path = base.with_suffix(".f32")
    expected = math.prod(shape) * 4
    actual = tensor_path.stat().st_size
    if actual != expected:
        raise SizeMismatch(
            f"{tensor_path.name}: {actual} bytes, manifest implies {expected} "
            f"({'x'.join(map(str, shape))} float32)")
    data = np.fromfile(tensor_path, dtype="<f4").reshape(shape).astype(np.float32, copy=False)
    return EpochedDataset(data, header["channels"], header["sample_rate"],
                          header["frequencies"], header["latency_seconds"],
                          header.get("source"))


# ------------------------------------------------------------------ windowing

def _round_half_up(x: float) -> int:
    # guard against 34.4999999... from binary representation of e.g. 0.135*256
    return int(math.floor(x + 0.5 + 1e-9))


def window_bounds(sample_rate: float, epoch_samples: int, window_seconds: float,
                  latency_seconds: float = 0.0) -> tuple:
    """Sample range ``[start, stop)`` of a window after the latency offset.

    Both the offset and the length are rounded half-up to whole samples.

    Raises:
        WindowOutOfRange: the window does not fit inside the epoch.
    """
    if window_seconds <= 0:
        raise WindowOutOfRange(f"window must be positive, got {window_seconds}")
    start = _round_half_up(latency_seconds * sample_rate)
    length = _round_half_up(window_seconds * sample_rate)
    if length < 2 or start + length > epoch_samples:
        raise WindowOutOfRange(
            f"window {window_seconds} s after {latency_seconds} s latency needs samples "
            f"{start}..{start + length - 1}, epoch has {epoch_samples}")
    return start, start + length


def extract_window(dataset: EpochedDataset, subject: int, block: int, target: int,
                   window_seconds: float, apply_latency: bool = True) -> TrialTensor:
    """Cut one trial to ``window_seconds``, skipping the visual latency if asked."""
    latency = dataset.latency_seconds if apply_latency else 0.0
    start, stop = window_bounds(dataset.sample_rate, dataset.epoch_samples,
                                window_seconds, latency)
    return TrialTensor(dataset.data[subject, block, target, :, start:stop], dataset.sample_rate)


def window_all(dataset: EpochedDataset, window_seconds: float,
               apply_latency: bool = True) -> ndarray:
    """Every trial cut to the same window, as float64 (S, B, T, C, n)."""
    latency = dataset.latency_seconds if apply_latency else 0.0
    start, stop = window_bounds(dataset.sample_rate, dataset.epoch_samples,
                                window_seconds, latency)
    return dataset.data[..., start:stop].astype(np.float64)


# ------------------------------------------------------- channels / filtering

def select_channels(dataset: EpochedDataset,
                    channels: Sequence[Union[str, int]]) -> EpochedDataset:
    """Restrict and reorder channels by label or index.

    Label matching is case-insensitive.
    """
    lookup = {c.upper(): i for i, c in enumerate(dataset.channels)}
    idx = []
    for ch in channels:
        if isinstance(ch, (int, np.integer)):
            if not 0 <= ch < dataset.n_channels:
                raise UnknownChannel(f"channel index {ch} out of range")
            idx.append(int(ch))
        else:
            key = str(ch).strip().upper()
            if key not in lookup:
                raise UnknownChannel(f"unknown channel {ch!r}")
            idx.append(lookup[key])
    if not idx:
        raise UnknownChannel("empty channel selection")
    return replace(dataset, data=dataset.data[:, :, :, idx, :],
                   channels=tuple(dataset.channels[i] for i in idx))


def _spectral_mask(data: ndarray, sample_rate: float, low: float, high: float) -> ndarray:
    spec = np.fft.rfft(data, axis=-1)
    freqs = np.fft.rfftfreq(data.shape[-1], d=1.0 / sample_rate)
    spec[..., (freqs < low) | (freqs > high)] = 0
    return np.fft.irfft(spec, n=data.shape[-1], axis=-1)


def bandpass(dataset: EpochedDataset, low: float, high: float) -> EpochedDataset:
    """Zero-phase brick-wall band-pass in the frequency domain, per epoch."""
    if not 0 <= low < high:
        raise ValueError("need 0 <= low < high")
    out = _spectral_mask(dataset.data.astype(np.float64), dataset.sample_rate, low, high)
    return replace(dataset, data=out.astype(np.float32))


def resample(dataset: EpochedDataset, target_rate: float) -> EpochedDataset:
    """Integer decimation behind a brick-wall low-pass at 0.45 * target_rate.

    A factor of 1 still applies the low-pass.

    Raises:
        NonIntegerFactor: ``sample_rate / target_rate`` is not an integer.
    """
    ratio = dataset.sample_rate / target_rate
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9:
        raise NonIntegerFactor(
            f"{dataset.sample_rate} Hz -> {target_rate} Hz is not an integer decimation")
    filtered = _spectral_mask(dataset.data.astype(np.float64), dataset.sample_rate,
                              0.0, 0.45 * target_rate)
    return replace(dataset, data=filtered[..., ::factor].astype(np.float32),
                   sample_rate=float(target_rate))


# ----------------------------------------------------------------- ingestion

def stack_subjects(arrays: Sequence[ndarray], axes: Sequence[str]) -> ndarray:
    """Reorder per-subject arrays to (block, target, channel, sample) and stack.

    Args:
        arrays: One array per subject.
        axes: Names of each array's axes, a permutation of
            ``block, target, channel, sample``.
    """
    want = AXES[1:]
    axes = [a.strip().lower() for a in axes]
    if sorted(axes) != sorted(want):
        raise ValueError(f"axes must be a permutation of {want}, got {axes}")
    perm = [axes.index(a) for a in want]
    out = []
    for arr in arrays:
        arr = np.asarray(arr)
        if arr.ndim != 4:
            raise ValueError(f"expected 4-D subject array, got shape {arr.shape}")
        out.append(np.transpose(arr, perm))
    shapes = {a.shape for a in out}
    if len(shapes) != 1:
        raise ValueError(f"subject arrays disagree in shape: {sorted(shapes)}")
    return np.stack(out).astype(np.float32)
