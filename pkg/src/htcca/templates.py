"""Trial averaging, concatenation and cross-subject transfer templates."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy import ndarray

from .dataset import EpochedDataset, TrialTensor
from .errors import (EmptyList, IndexOutOfRange, ShapeMismatch,
                     SingleSubjectDataset, TooFewTrials)


def _stack(trials) -> ndarray:
    if isinstance(trials, ndarray):
        arr = np.asarray(trials, dtype=float)
        if arr.ndim != 3:
            raise ShapeMismatch(f"expected (n_trials, channels, samples), got {arr.shape}")
        if arr.shape[0] == 0:
            raise EmptyList("no trials given")
        return arr
    trials = list(trials)
    if not trials:
        raise EmptyList("no trials given")
    rates = {t.sample_rate for t in trials if isinstance(t, TrialTensor)}
    if len(rates) > 1:
        raise ShapeMismatch(f"trials mix sample rates {sorted(rates)}")
    arrays = [np.asarray(t, dtype=float) for t in trials]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1 or arrays[0].ndim != 2:
        raise ShapeMismatch(f"trials must share one 2-D shape, got {sorted(shapes)}")
    return np.stack(arrays)


def average_trials(trials):
    """Elementwise mean of equally shaped trials.

    Returns a :class:`TrialTensor` when given TrialTensors, else an ndarray.
    """
    mean = _stack(trials).mean(axis=0)
    if not isinstance(trials, ndarray):
        first = next(iter(trials))
        if isinstance(first, TrialTensor):
            return TrialTensor(mean, first.sample_rate)
    return mean


def concat_trials(trials) -> ndarray:
    """Horizontal concatenation ``[X^1, X^2, ...]`` -> (channels, samples * n)."""
    arr = _stack(trials)
    return np.concatenate(list(arr), axis=1)


def split_trials(concatenated: ndarray, n_trials: int) -> ndarray:
    """Inverse of :func:`concat_trials`."""
    concatenated = np.asarray(concatenated)
    if concatenated.shape[1] % n_trials:
        raise ShapeMismatch(f"{concatenated.shape[1]} columns do not split into {n_trials}")
    return np.stack(np.split(concatenated, n_trials, axis=1))


def transfer_average(dataset: EpochedDataset, excluded_subject: int, stimulus: int,
                     trial_index: int) -> TrialTensor:
    """Mean of trial ``trial_index`` for ``stimulus`` over all other subjects."""
    if dataset.n_subjects < 2:
        raise SingleSubjectDataset("transfer needs at least two subjects")
    if not 0 <= excluded_subject < dataset.n_subjects:
        raise IndexOutOfRange(f"subject {excluded_subject} out of range")
    if not 0 <= stimulus < dataset.n_targets:
        raise IndexOutOfRange(f"stimulus {stimulus} out of range")
    if not 0 <= trial_index < dataset.n_blocks:
        raise IndexOutOfRange(f"trial index {trial_index} out of range")
    others = [s for s in range(dataset.n_subjects) if s != excluded_subject]
    mean = dataset.data[others, trial_index, stimulus].astype(np.float64).mean(axis=0)
    return TrialTensor(mean, dataset.sample_rate)


def transfer_trials(windowed: ndarray, excluded_subject: int) -> ndarray:
    """Trial-aligned cross-subject averages for every stimulus.

    Args:
        windowed (ndarray): (S, B, T, C, n) data, already windowed.
        excluded_subject (int): The target subject.

    Returns:
        ndarray: (T, B, C, n); entry [i, n] is the n-th trial of stimulus i
            averaged over every subject except ``excluded_subject``.
    """
    if windowed.shape[0] < 2:
        raise SingleSubjectDataset("transfer needs at least two subjects")
    others = [s for s in range(windowed.shape[0]) if s != excluded_subject]
    return windowed[others].mean(axis=0).transpose(1, 0, 2, 3)


@dataclass(frozen=True)
class TemplateBank:
    """Per-stimulus templates for one target subject.

    Attributes:
        specific_mean (ndarray): (Nf, C, n). S_i, mean of the subject's trials.
        independent_mean (ndarray): (Nf, C, n). K_i, mean of transferred trials.
        specific_concat (ndarray): (Nf, C, n*Nt). E_i.
        independent_concat (ndarray): (Nf, C, n*Nt'). Transferred trials concatenated.
        specific_concat_template (ndarray): (Nf, C, n*Nt). [S_i, ..., S_i].
        independent_concat_template (ndarray): (Nf, C, n*Nt'). [K_i, ..., K_i].
    """

    specific_mean: ndarray
    independent_mean: ndarray
    specific_concat: ndarray
    independent_concat: ndarray
    specific_concat_template: ndarray
    independent_concat_template: ndarray
    n_trials_specific: int
    n_trials_independent: int


def _per_stimulus(trials, min_trials: int, what: str) -> ndarray:
    if isinstance(trials, ndarray):
        arr = np.asarray(trials, dtype=float)
        if arr.ndim != 4:
            raise ShapeMismatch(f"{what}: expected (Nf, Nt, C, n), got {arr.shape}")
    else:
        stacked = [_stack(t) for t in trials]
        if not stacked:
            raise EmptyList(f"{what}: no stimuli")
        counts = {s.shape[0] for s in stacked}
        if min(counts) < min_trials:
            raise TooFewTrials(f"{what}: need >= {min_trials} trials per stimulus")
        if len({s.shape for s in stacked}) != 1:
            raise ShapeMismatch(f"{what}: stimuli must share trial count and shape")
        arr = np.stack(stacked)
    if arr.shape[1] < min_trials:
        raise TooFewTrials(
            f"{what}: {arr.shape[1]} trials per stimulus, need >= {min_trials}")
    return arr


def specific_templates(specific_trials, min_trials: int = 2) -> tuple:
    """S_i, E_i and [S_i, ..., S_i] from per-stimulus training trials."""
    spec = _per_stimulus(specific_trials, min_trials, "specific trials")
    n_t = spec.shape[1]
    mean = spec.mean(axis=1)
    concat = np.concatenate([spec[:, k] for k in range(n_t)], axis=-1)
    repeated = np.tile(mean, (1, 1, n_t))
    return mean, concat, repeated


def build_template_bank(specific_trials, independent_trials) -> TemplateBank:
    """Assemble all templates for one subject.

    Args:
        specific_trials: (Nf, Nt, C, n) array or per-stimulus trial lists from
            the target subject; Nt >= 2.
        independent_trials: (Nf, Nt', C, n) array or per-stimulus lists of
            cross-subject averaged trials; Nt' >= 1.

    Raises:
        TooFewTrials: fewer than 2 specific or 1 independent trial.
        ShapeMismatch: stimulus count or trial shapes disagree.
    """
    s_mean, s_concat, s_rep = specific_templates(specific_trials)
    ind = _per_stimulus(independent_trials, 1, "independent trials")
    if ind.shape[0] != s_mean.shape[0] or ind.shape[2:] != s_mean.shape[1:]:
        raise ShapeMismatch(
            f"independent trials {ind.shape} do not match specific templates {s_mean.shape}")
    n_ind = ind.shape[1]
    k_mean = ind.mean(axis=1)
    k_concat = np.concatenate([ind[:, k] for k in range(n_ind)], axis=-1)
    k_rep = np.tile(k_mean, (1, 1, n_ind))
    return TemplateBank(s_mean, k_mean, s_concat, k_concat, s_rep, k_rep,
                        s_concat.shape[-1] // s_mean.shape[-1], n_ind)
