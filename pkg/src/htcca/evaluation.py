"""Leave-one-block-out evaluation, ITR and paired significance tests.

For each subject every block is held out once. The training pool is the
subject's remaining blocks, from which ``n_training_trials`` trials per
stimulus are selected. Transfer data for tt-CCA and HTCCA come from all
blocks of every other subject; the target subject's data never enter them.
"""

import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy import ndarray
from scipy import stats

from .classifiers import (cca_classify, htcca_classify, htcca_fit, tdcca_classify,
                          tdcca_fit, ttcca_classify, ttcca_fit)
from .dataset import EpochedDataset, select_channels, window_all, window_bounds
from .errors import (ConfigInvalid, DegenerateDifferences, LengthMismatch,
                     OutOfRange, TooFewBlocks, WindowOutOfRange)
from .numerics import DEFAULT_RIDGE
from .references import DEFAULT_HARMONICS, make_references
from .templates import transfer_trials

METHODS = ("cca", "ttcca", "tdcca", "htcca")
TRAINED_METHODS = ("tdcca", "htcca")
POLICIES = ("first-k", "seeded-random")


# ------------------------------------------------------------------------ ITR

def itr(p: float, n_targets: int, t_seconds: float, clamp: bool = False) -> float:
    """Wolpaw information transfer rate in bits/min.

    Written as ``P*log2(P*N) + (1-P)*log2((1-P)*N/(N-1))``, which is the
    usual form rearranged so chance accuracy gives exactly 0. The rate is a
    divergence from uniform guessing, so it is never negative in exact
    arithmetic and rises again below chance; ``clamp`` floors any rounding
    residue at 0.

    Raises:
        OutOfRange: p outside [0, 1], N < 2 or T <= 0.
    """
    if not 0.0 <= p <= 1.0:
        raise OutOfRange(f"accuracy must be in [0, 1], got {p}")
    if n_targets < 2:
        raise OutOfRange(f"need at least 2 targets, got {n_targets}")
    if not t_seconds > 0:
        raise OutOfRange(f"selection time must be positive, got {t_seconds}")
    n = n_targets
    # p = 1/N is not exact in binary; treat a few ulps either side as chance
    if math.isclose(p * n, 1.0, rel_tol=4 * sys.float_info.epsilon, abs_tol=0.0):
        return 0.0
    bits = 0.0
    if p > 0:
        bits += p * math.log2(p * n)
    if p < 1:
        bits += (1 - p) * math.log2((1 - p) * n / (n - 1))
    rate = 60.0 / t_seconds * bits
    return max(rate, 0.0) if clamp else rate


# ------------------------------------------------------------- paired t test

@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    p_value: float
    n: int


def paired_t_test(a: Sequence[float], b: Sequence[float],
                  alternative: str = "two-sided") -> TTestResult:
    """Paired t test on ``a - b``.

    Args:
        alternative: "two-sided", "greater" (mean of a exceeds b) or "less".

    Raises:
        LengthMismatch: unequal lengths or fewer than 2 pairs.
        DegenerateDifferences: every difference is zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise LengthMismatch(f"paired samples differ in shape: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise LengthMismatch("need at least 2 pairs")
    if alternative not in ("two-sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    d = a - b
    if np.all(d == 0):
        raise DegenerateDifferences("all paired differences are zero")
    n = d.size
    mean = d.mean()
    sd = d.std(ddof=1)
    # constant nonzero shift: infinite t
    if sd <= 1e-14 * abs(mean):
        t = math.copysign(math.inf, mean)
    else:
        t = mean / (sd / math.sqrt(n))
    dist = stats.t(n - 1)
    if alternative == "two-sided":
        p = 2.0 * dist.sf(abs(t))
    elif alternative == "greater":
        p = dist.sf(t)
    else:
        p = dist.cdf(t)
    return TTestResult(float(t), float(min(p, 1.0)), n)


# ----------------------------------------------------------------- config

@dataclass(frozen=True)
class EvalConfig:
    """Settings for one leave-one-block-out run.

    ``n_transfer_trials`` of None uses every transferred trial;
    ``channel_subset`` of None keeps all channels.
    """

    method: str = "htcca"
    n_training_trials: int = 2
    window_seconds: tuple = (1.0,)
    gaze_shift_seconds: float = 0.5
    ridge: float = DEFAULT_RIDGE
    n_harmonics: int = DEFAULT_HARMONICS
    channel_subset: Optional[tuple] = None
    trial_subset_policy: str = "first-k"
    seed: int = 0
    n_transfer_trials: Optional[int] = None
    apply_latency: bool = True
    clamp_negative_itr: bool = False

    def __post_init__(self):
        object.__setattr__(self, "window_seconds",
                           tuple(float(w) for w in np.atleast_1d(self.window_seconds)))
        if self.channel_subset is not None:
            object.__setattr__(self, "channel_subset", tuple(self.channel_subset))

    def validate(self, dataset: Optional[EpochedDataset] = None) -> None:
        if self.method not in METHODS:
            raise ConfigInvalid(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.method in TRAINED_METHODS and self.n_training_trials < 2:
            raise ConfigInvalid(
                f"{self.method} needs at least 2 training trials per stimulus "
                f"(got {self.n_training_trials}); averaging requires two")
        if self.trial_subset_policy not in POLICIES:
            raise ConfigInvalid(f"unknown trial subset policy {self.trial_subset_policy!r}")
        if not self.window_seconds or min(self.window_seconds) <= 0:
            raise ConfigInvalid("window lengths must be positive")
        if self.gaze_shift_seconds < 0:
            raise ConfigInvalid("gaze shift time must be >= 0")
        if not (math.isfinite(self.ridge) and self.ridge >= 0):
            raise ConfigInvalid("ridge must be finite and >= 0")
        if self.n_harmonics < 1:
            raise ConfigInvalid("n_harmonics must be >= 1")
        if self.n_transfer_trials is not None and self.n_transfer_trials < 1:
            raise ConfigInvalid("n_transfer_trials must be >= 1")
        if dataset is None:
            return
        if dataset.n_blocks < 2:
            raise TooFewBlocks(f"leave-one-block-out needs >= 2 blocks, got {dataset.n_blocks}")
        if self.method in TRAINED_METHODS and self.n_training_trials > dataset.n_blocks - 1:
            raise ConfigInvalid(
                f"n_training_trials={self.n_training_trials} exceeds the "
                f"{dataset.n_blocks - 1} training blocks available per fold")
        if self.method in ("ttcca", "htcca") and dataset.n_subjects < 2:
            raise ConfigInvalid(f"{self.method} needs at least two subjects for transfer")
        if (self.n_transfer_trials is not None
                and self.n_transfer_trials > dataset.n_blocks):
            raise ConfigInvalid("n_transfer_trials exceeds the transferred trials available")
        latency = dataset.latency_seconds if self.apply_latency else 0.0
        for w in self.window_seconds:
            try:
                window_bounds(dataset.sample_rate, dataset.epoch_samples, w, latency)
            except WindowOutOfRange as exc:
                raise ConfigInvalid(str(exc)) from None
        if self.n_harmonics * max(dataset.frequencies) >= dataset.sample_rate / 2:
            raise ConfigInvalid("n_harmonics * max frequency reaches Nyquist")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_training_trials": self.n_training_trials,
            "window_seconds": list(self.window_seconds),
            "gaze_shift_seconds": self.gaze_shift_seconds,
            "ridge": self.ridge,
            "n_harmonics": self.n_harmonics,
            "channel_subset": None if self.channel_subset is None else list(self.channel_subset),
            "trial_subset_policy": self.trial_subset_policy,
            "seed": self.seed,
            "n_transfer_trials": self.n_transfer_trials,
            "apply_latency": self.apply_latency,
            "clamp_negative_itr": self.clamp_negative_itr,
        }


# ----------------------------------------------------------------- decoders

@dataclass(frozen=True)
class Fold:
    """Everything a decoder may learn from in one fold.

    Attributes:
        train (ndarray): (Nf, Nt, C, n). Target subject's selected trials;
            empty along Nt for untrained methods.
        transfer (ndarray or None): (Nf, Nt', C, n). Trial-aligned averages
            over the other subjects.
        refs: Sine-cosine references for this window length.
        ridge (float)
    """

    train: ndarray
    transfer: Optional[ndarray]
    refs: object
    ridge: float


Decoder = Callable[[Fold], Callable[[ndarray], int]]


def _cca_decoder(fold: Fold):
    return lambda x: cca_classify(x, fold.refs, fold.ridge).decided_index


def _ttcca_decoder(fold: Fold):
    model = ttcca_fit(fold.refs, fold.transfer.mean(axis=1), fold.ridge)
    return lambda x: ttcca_classify(x, fold.refs, model).decided_index


def _tdcca_decoder(fold: Fold):
    model = tdcca_fit(fold.train, fold.ridge)
    return lambda x: tdcca_classify(x, model).decided_index


def _htcca_decoder(fold: Fold):
    model = htcca_fit(fold.train, fold.transfer, fold.ridge)
    return lambda x: htcca_classify(x, model).decided_index


DECODERS = {"cca": _cca_decoder, "ttcca": _ttcca_decoder,
            "tdcca": _tdcca_decoder, "htcca": _htcca_decoder}


# ------------------------------------------------------------------ report

@dataclass(frozen=True)
class SubjectResult:
    """Predictions for one (subject, window); arrays are (block, target)."""

    subject: int
    window: float
    predicted: ndarray
    true: ndarray
    accuracy: float
    itr: float


@dataclass(frozen=True)
class EvalReport:
    method: str
    n_training_trials: int
    n_targets: int
    windows: tuple
    gaze_shift_seconds: float
    results: tuple
    config: dict = field(default_factory=dict)

    @property
    def subjects(self) -> list:
        return sorted({r.subject for r in self.results})

    def result(self, subject: int, window: float) -> SubjectResult:
        for r in self.results:
            if r.subject == subject and r.window == window:
                return r
        raise KeyError((subject, window))

    def accuracy_matrix(self) -> ndarray:
        """(subjects, windows) accuracy."""
        return np.array([[self.result(s, w).accuracy for w in self.windows]
                         for s in self.subjects])

    def itr_matrix(self) -> ndarray:
        return np.array([[self.result(s, w).itr for w in self.windows]
                         for s in self.subjects])

    def aggregate(self) -> list:
        """Mean and standard error across subjects, per window."""
        acc, rate = self.accuracy_matrix(), self.itr_matrix()
        rows = []
        for j, w in enumerate(self.windows):
            rows.append({
                "window": w,
                "mean_accuracy": float(np.mean(acc[:, j])),
                "se_accuracy": _standard_error(acc[:, j]),
                "mean_itr": float(np.mean(rate[:, j])),
                "se_itr": _standard_error(rate[:, j]),
            })
        return rows

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_training_trials": self.n_training_trials,
            "n_targets": self.n_targets,
            "windows": list(self.windows),
            "gaze_shift_seconds": self.gaze_shift_seconds,
            "config": self.config,
            "results": [{
                "subject": r.subject,
                "window": r.window,
                "accuracy": r.accuracy,
                "itr": r.itr,
                "predicted": r.predicted.tolist(),
                "true": r.true.tolist(),
            } for r in self.results],
            "aggregate": self.aggregate(),
        }


def _standard_error(values: ndarray) -> float:
    values = np.sort(np.asarray(values, dtype=float))
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


# ------------------------------------------------------------ cross-validate

def _select_training(pool: list, n_train: int, policy: str, seed: int,
                     subject: int, block: int) -> list:
    if policy == "first-k":
        return pool[:n_train]
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(subject, block)))
    return sorted(rng.choice(pool, size=n_train, replace=False).tolist())


def loo_cross_validate(dataset: EpochedDataset, config: EvalConfig, *,
                       decoder: Optional[Decoder] = None, threads: int = 1,
                       leak_test_block: bool = False) -> EvalReport:
    """Leave-one-block-out evaluation of one method.

    Args:
        dataset: Epoched data; trial (s, b, t) has true label t.
        config: Method and protocol settings.
        decoder: Optional replacement for the built-in decoder of
            ``config.method``; called once per fold with a :class:`Fold` and
            must return a trial -> predicted index function.
        threads: Subjects evaluated in parallel; results do not depend on it.
        leak_test_block: Diagnostic only. Puts the held-out block first in the
            training pool so it is used for training.

    Raises:
        TooFewBlocks, ConfigInvalid
    """
    config.validate(dataset)
    if config.channel_subset is not None:
        dataset = select_channels(dataset, config.channel_subset)
    fit = decoder or DECODERS[config.method]
    trained = config.method in TRAINED_METHODS
    uses_transfer = config.method in ("ttcca", "htcca")
    n_s, n_b, n_t = dataset.n_subjects, dataset.n_blocks, dataset.n_targets
    n_train = config.n_training_trials if trained else 0

    per_window = []
    for w in config.window_seconds:
        data = window_all(dataset, w, config.apply_latency)
        refs = make_references(dataset.frequencies, dataset.sample_rate,
                               data.shape[-1], config.n_harmonics)
        per_window.append((w, data, refs))

    def run_subject(s: int) -> list:
        out = []
        for w, data, refs in per_window:
            transfer = None
            if uses_transfer and n_s > 1:
                transfer = transfer_trials(data, s)
                if config.n_transfer_trials is not None:
                    transfer = transfer[:, :config.n_transfer_trials]
            predicted = np.empty((n_b, n_t), dtype=int)
            for b in range(n_b):
                pool = [k for k in range(n_b) if k != b]
                if leak_test_block:
                    pool = [b] + pool
                chosen = _select_training(pool, n_train, config.trial_subset_policy,
                                          config.seed, s, b) if n_train else []
                train = data[s][chosen].transpose(1, 0, 2, 3)
                predict = fit(Fold(train, transfer, refs, config.ridge))
                for t in range(n_t):
                    predicted[b, t] = predict(data[s, b, t])
            true = np.broadcast_to(np.arange(n_t), (n_b, n_t)).copy()
            acc = float(np.count_nonzero(predicted == true)) / predicted.size
            rate = itr(acc, n_t, w + config.gaze_shift_seconds, config.clamp_negative_itr)
            out.append(SubjectResult(s, w, predicted, true, acc, rate))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(run_subject, range(n_s)))
    else:
        chunks = [run_subject(s) for s in range(n_s)]
    results = tuple(r for chunk in chunks for r in chunk)
    return EvalReport(config.method, n_train, n_t, config.window_seconds,
                      config.gaze_shift_seconds, results, config.to_dict())


# ------------------------------------------------------------------ tables

TABLE_FIELDS = ("method", "subject", "window", "n_training_trials", "accuracy", "itr")


def accuracy_table(report: EvalReport) -> list:
    """One row per (subject, window), ordered by subject then window."""
    rows = [{
        "method": report.method,
        "subject": r.subject,
        "window": r.window,
        "n_training_trials": report.n_training_trials,
        "accuracy": r.accuracy,
        "itr": r.itr,
    } for r in report.results]
    return sorted(rows, key=lambda row: (row["subject"], row["window"]))


def format_cell(value) -> str:
    # repr round-trips floats exactly
    return repr(value) if isinstance(value, float) else str(value)


def table_to_csv(rows: Sequence[dict], fields: Sequence[str] = TABLE_FIELDS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([format_cell(row[f]) for f in fields])
    return buf.getvalue()


def table_from_csv(text: str) -> list:
    """Parse :func:`table_to_csv` output for the default fields."""
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        out.append({
            "method": row["method"],
            "subject": int(row["subject"]),
            "window": float(row["window"]),
            "n_training_trials": int(row["n_training_trials"]),
            "accuracy": float(row["accuracy"]),
            "itr": float(row["itr"]),
        })
    return out


# ------------------------------------------------------------ multi-report

SUMMARY_FIELDS = ("method", "n_training_trials", "window", "mean_accuracy", "se_accuracy",
                  "mean_itr", "se_itr")
TRIALS_FIELDS = ("method", "n_training_trials", "mean_accuracy", "se_accuracy",
                 "mean_itr", "se_itr")
TTEST_FIELDS = ("method_a", "method_b", "n_training_trials", "window", "mean_difference",
                "t_statistic", "p_value")


def summary_rows(reports: Sequence[EvalReport]) -> list:
    """Across-subject mean and standard error per (method, N_t, window)."""
    rows = []
    for rep in reports:
        for agg in rep.aggregate():
            rows.append({"method": rep.method, "n_training_trials": rep.n_training_trials,
                         **agg})
    return rows


def series_by_trials(reports: Sequence[EvalReport]) -> list:
    """Accuracy/ITR per (method, N_t), averaged over windows then subjects."""
    rows = []
    for rep in reports:
        acc = rep.accuracy_matrix().mean(axis=1)
        rate = rep.itr_matrix().mean(axis=1)
        rows.append({"method": rep.method, "n_training_trials": rep.n_training_trials,
                     "mean_accuracy": float(np.mean(acc)), "se_accuracy": _standard_error(acc),
                     "mean_itr": float(np.mean(rate)), "se_itr": _standard_error(rate)})
    return rows


def pairwise_tests(reports: Sequence[EvalReport], alternative: str = "two-sided") -> list:
    """Paired t tests on per-subject accuracy between every pair of methods.

    Pairs are formed at equal N_t and window; an untrained method (N_t = 0)
    is paired with every N_t. Identical accuracy vectors give t = 0, p = 1.
    """
    rows = []
    for i, a in enumerate(reports):
        for b in reports[i + 1:]:
            if a.method == b.method:
                continue
            if 0 not in (a.n_training_trials, b.n_training_trials) \
                    and a.n_training_trials != b.n_training_trials:
                continue
            nt = max(a.n_training_trials, b.n_training_trials)
            for j, w in enumerate(a.windows):
                if w not in b.windows:
                    continue
                xa = a.accuracy_matrix()[:, j]
                xb = b.accuracy_matrix()[:, b.windows.index(w)]
                try:
                    res = paired_t_test(xa, xb, alternative)
                    t, p = res.t_statistic, res.p_value
                except DegenerateDifferences:
                    t, p = 0.0, 1.0
                except LengthMismatch:
                    continue
                rows.append({"method_a": a.method, "method_b": b.method,
                             "n_training_trials": nt, "window": w,
                             "mean_difference": float(np.mean(xa - xb)),
                             "t_statistic": t, "p_value": p})
    return rows
