"""CCA-family SSVEP decoders: standard CCA, tt-CCA, TDCCA and HTCCA.

All models are immutable after fitting and every ``*_classify`` function is
pure. A spatial filter is always the data-side canonical weight and is applied
to both arguments of each Pearson correlation, so every score is invariant to
the sign of the filter.
"""

from dataclasses import dataclass

import numpy as np
from numpy import ndarray

from .errors import OutOfRange, RankDeficient, ShapeMismatch, ZeroVariance
from .numerics import DEFAULT_RIDGE, cca, pearson_rows
from .references import ReferenceSet
from .templates import build_template_bank, specific_templates


@dataclass(frozen=True)
class ScoreVector:
    """Per-stimulus scores; ``decided_index`` is the first argmax."""

    scores: ndarray
    decided_index: int


def _decide(scores: ndarray) -> ScoreVector:
    scores = np.asarray(scores, dtype=float)
    return ScoreVector(scores, int(np.argmax(scores)))


def _trial(x, shape=None) -> ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatch(f"trial must be (channels, samples), got {x.shape}")
    if shape is not None and x.shape != tuple(shape):
        raise ShapeMismatch(f"trial shape {x.shape} does not match model {tuple(shape)}")
    return x


def _filters(data: ndarray, targets: ndarray, ridge: float) -> ndarray:
    # data-side leading canonical weight for each stimulus
    return np.stack([cca(d, t, ridge).weight_a for d, t in zip(data, targets)])


# --------------------------------------------------------------- standard CCA

def cca_classify(x, refs: ReferenceSet, ridge: float = DEFAULT_RIDGE) -> ScoreVector:
    """Score each stimulus by the canonical correlation of ``x`` with its references."""
    x = _trial(x)
    if x.shape[1] != refs.n_samples:
        raise ShapeMismatch(f"trial has {x.shape[1]} samples, references {refs.n_samples}")
    return _decide([cca(x, y, ridge).correlation for y in refs.signals])


# --------------------------------------------------------------------- tt-CCA

@dataclass(frozen=True)
class TtccaModel:
    """Transferred templates and their reference-fitted filters.

    ``filters[i]`` is NaN when ``cca(templates[i], Y_i)`` is degenerate.
    """

    templates: ndarray
    filters: ndarray
    refs: ReferenceSet
    ridge: float


def ttcca_fit(refs: ReferenceSet, transferred, ridge: float = DEFAULT_RIDGE) -> TtccaModel:
    """Fit the template-side filters from cross-subject averaged templates.

    Args:
        refs: Sine-cosine references, one per stimulus.
        transferred: (Nf, C, n). Cross-subject average per stimulus.
    """
    templates = np.asarray(transferred, dtype=float)
    if templates.ndim != 3 or templates.shape[0] != len(refs):
        raise ShapeMismatch(f"transferred templates {templates.shape} for {len(refs)} stimuli")
    if templates.shape[2] != refs.n_samples:
        raise ShapeMismatch("transferred templates and references differ in length")
    filters = np.full(templates.shape[:2], np.nan)
    for i, (tpl, y) in enumerate(zip(templates, refs.signals)):
        try:
            filters[i] = cca(tpl, y, ridge).weight_a
        except (RankDeficient, ZeroVariance):
            pass
    return TtccaModel(templates, filters, refs, ridge)


def ttcca_correlations(x, model: TtccaModel) -> ndarray:
    """(Nf, 3) array of the three tt-CCA correlations per stimulus."""
    x = _trial(x, model.templates.shape[1:])
    out = np.zeros((len(model.refs), 3))
    for i, (tpl, y, w_t) in enumerate(zip(model.templates, model.refs.signals, model.filters)):
        sol = cca(x, y, model.ridge)
        w_x = sol.weight_a
        out[i, 0] = pearson_rows(w_x @ tpl, w_x @ x)
        if not np.isnan(w_t[0]):
            out[i, 1] = pearson_rows(w_t @ tpl, w_t @ x)
        out[i, 2] = sol.correlation
    return out


def ttcca_classify(x, refs: ReferenceSet, transferred,
                   ridge: float = DEFAULT_RIDGE) -> ScoreVector:
    """Sum of the two transferred-template correlations and the reference CCA.

    ``transferred`` is either the (Nf, C, n) template array or a fitted
    :class:`TtccaModel`; filters depend only on training data, so fitting
    once and reusing the model is the efficient path.
    """
    model = transferred if isinstance(transferred, TtccaModel) else ttcca_fit(
        refs, transferred, ridge)
    return _decide(ttcca_correlations(x, model).sum(axis=1))


# ---------------------------------------------------------------------- TDCCA

@dataclass(frozen=True)
class TdccaModel:
    """Averaged templates (Nf, C, n) and one spatial filter per stimulus (Nf, C)."""

    templates: ndarray
    filters: ndarray
    ridge: float


def tdcca_fit(specific_trials, ridge: float = DEFAULT_RIDGE) -> TdccaModel:
    """Learn filters from the subject's own trials.

    Args:
        specific_trials: (Nf, Nt, C, n) or per-stimulus trial lists, Nt >= 2.
        ridge: Passed to :func:`cca`. With 0 a singular covariance raises
            :class:`RankDeficient`.
    """
    mean, concat, repeated = specific_templates(specific_trials)
    return TdccaModel(mean, _filters(concat, repeated, ridge), ridge)


def tdcca_correlations(x, model: TdccaModel) -> ndarray:
    x = _trial(x, model.templates.shape[1:])
    w = model.filters
    return pearson_rows(w @ x, np.einsum("ic,icn->in", w, model.templates))


def tdcca_classify(x, model: TdccaModel) -> ScoreVector:
    return _decide(tdcca_correlations(x, model))


# ---------------------------------------------------------------------- HTCCA

@dataclass(frozen=True)
class HtccaModel:
    """Fitted hybrid-template state.

    Attributes:
        specific_mean (ndarray): (Nf, C, n). S_i.
        independent_mean (ndarray): (Nf, C, n). K_i.
        specific_filters (ndarray): (Nf, C). w_i, from the subject's own trials.
        independent_filters (ndarray): (Nf, C). w_ii, from transferred trials.
        ridge (float)
    """

    specific_mean: ndarray
    independent_mean: ndarray
    specific_filters: ndarray
    independent_filters: ndarray
    ridge: float


def htcca_fit(specific_trials, independent_trials, ridge: float = DEFAULT_RIDGE) -> HtccaModel:
    """Fit both filter sets.

    Args:
        specific_trials: (Nf, Nt, C, n), Nt >= 2, from the target subject.
        independent_trials: (Nf, Nt', C, n), Nt' >= 1; entry n is the n-th
            trial averaged over the other subjects.
    """
    bank = build_template_bank(specific_trials, independent_trials)
    w_spec = _filters(bank.specific_concat, bank.specific_concat_template, ridge)
    w_ind = _filters(bank.independent_concat, bank.independent_concat_template, ridge)
    return HtccaModel(bank.specific_mean, bank.independent_mean, w_spec, w_ind, ridge)


def htcca_correlations(x, model: HtccaModel) -> ndarray:
    """(Nf, 4) correlations per stimulus.

    Columns: (w_i, S_i), (w_i, K_i), (w_ii, S_i), (w_ii, K_i); each filter is
    applied to both the test trial and the template.
    """
    x = _trial(x, model.specific_mean.shape[1:])
    out = np.empty((model.specific_mean.shape[0], 4))
    for col, (w, tpl) in enumerate([
            (model.specific_filters, model.specific_mean),
            (model.specific_filters, model.independent_mean),
            (model.independent_filters, model.specific_mean),
            (model.independent_filters, model.independent_mean)]):
        out[:, col] = pearson_rows(w @ x, np.einsum("ic,icn->in", w, tpl))
    return out


def fuse_scores(rho) -> float:
    """Sum of sign(r) * r**2 over the last axis.

    Accepts a length-4 vector (returns a float) or an (..., 4) array.

    Raises:
        OutOfRange: any coefficient outside [-1, 1].
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape[-1:] != (4,):
        raise ValueError(f"expected 4 coefficients on the last axis, got {rho.shape}")
    if np.any(~np.isfinite(rho)) or np.any(np.abs(rho) > 1):
        raise OutOfRange("correlation coefficients must lie in [-1, 1]")
    fused = np.sum(np.sign(rho) * rho * rho, axis=-1)
    return float(fused) if fused.ndim == 0 else fused


def htcca_classify(x, model: HtccaModel) -> ScoreVector:
    return _decide(fuse_scores(htcca_correlations(x, model)))
