"""Correlation and CCA kernels shared by every decoder.

CCA is solved by symmetric whitening of both sample covariances followed by
an SVD of the whitened cross-covariance. Only the leading canonical pair is
returned because every decoder in the package uses a single spatial filter.
"""

from dataclasses import dataclass

import numpy as np
from numpy import ndarray

from .errors import LengthMismatch, RankDeficient, ZeroVariance

DEFAULT_RIDGE = 1e-10

# relative tolerance below which a centered series counts as constant
_FLAT_RTOL = 1e-12


@dataclass(frozen=True)
class CcaSolution:
    """Leading canonical pair.

    Attributes:
        weight_a (ndarray): (p,). Unit-norm weight on the first input.
        weight_b (ndarray): (q,). Unit-norm weight on the second input.
        correlation (float): Canonical correlation in [0, 1].
    """

    weight_a: ndarray
    weight_b: ndarray
    correlation: float


def _flat_rows(centered: ndarray, raw: ndarray) -> ndarray:
    n = raw.shape[-1]
    scale = np.max(np.abs(raw), axis=-1) * np.sqrt(n)
    norm = np.sqrt(np.sum(centered * centered, axis=-1))
    return norm <= _FLAT_RTOL * scale


def pearson(a, b) -> float:
    """Sample Pearson correlation of two 1-D series.

    Raises:
        LengthMismatch: lengths differ or are below 2.
        ZeroVariance: either series is constant.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"series lengths differ: {a.size} vs {b.size}")
    if a.size < 2:
        raise LengthMismatch("pearson needs at least 2 samples")
    ac = a - a.mean()
    bc = b - b.mean()
    if _flat_rows(ac, a) or _flat_rows(bc, b):
        raise ZeroVariance("pearson of a constant series is undefined")
    r = np.dot(ac, bc) / np.sqrt(np.dot(ac, ac) * np.dot(bc, bc))
    return float(np.clip(r, -1.0, 1.0))


def pearson_rows(a: ndarray, b: ndarray) -> ndarray:
    """Row-wise Pearson correlation of two equally shaped arrays.

    Rows that are constant in either input yield 0 instead of raising; the
    decoders treat a degenerate projection as carrying no evidence.

    Args:
        a (ndarray): (..., n).
        b (ndarray): (..., n).

    Returns:
        r (ndarray): (...,).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    ac = a - a.mean(axis=-1, keepdims=True)
    bc = b - b.mean(axis=-1, keepdims=True)
    num = np.sum(ac * bc, axis=-1)
    den = np.sqrt(np.sum(ac * ac, axis=-1) * np.sum(bc * bc, axis=-1))
    flat = _flat_rows(ac, a) | _flat_rows(bc, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(flat, 0.0, num / np.where(flat, 1.0, den))
    return np.clip(r, -1.0, 1.0)


def center_rows(m) -> ndarray:
    """Subtract each row's mean."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return m - m.mean(axis=1, keepdims=True)


def _inv_sqrt(cov: ndarray, ridge: float) -> ndarray:
    p = cov.shape[0]
    scale = np.trace(cov) / p
    if ridge > 0:
        cov = cov + ridge * scale * np.eye(p)
    evals, evecs = np.linalg.eigh(cov)
    tol = max(p * np.finfo(float).eps * max(evals[-1], 0.0), np.finfo(float).tiny)
    if evals[0] <= tol:
        raise RankDeficient(
            f"covariance is singular (min eigenvalue {evals[0]:.3e}, ridge={ridge})")
    return (evecs / np.sqrt(evals)) @ evecs.T


def cca(a, b, ridge: float = DEFAULT_RIDGE) -> CcaSolution:
    """Leading canonical pair between the rows of ``a`` and ``b``.

    Args:
        a (ndarray): (p, n). First multichannel series, channels on rows.
        b (ndarray): (q, n). Second multichannel series.
        ridge (float): Shrinkage added to each covariance as
            ``ridge * mean(diag(C)) * I``. Pass 0 for the exact problem.

    Returns:
        CcaSolution: weights are unit norm and the largest-magnitude entry of
            ``weight_a`` is non-negative.

    Raises:
        LengthMismatch: column counts differ or are below 2.
        RankDeficient: a covariance cannot be whitened.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    n = a.shape[1]
    if b.shape[1] != n:
        raise LengthMismatch(f"sample counts differ: {n} vs {b.shape[1]}")
    if n < 2:
        raise LengthMismatch("cca needs at least 2 samples")
    if not np.isfinite(ridge) or ridge < 0:
        raise ValueError(f"ridge must be finite and >= 0, got {ridge}")

    ac = center_rows(a)
    bc = center_rows(b)
    c_aa = ac @ ac.T / (n - 1)
    c_bb = bc @ bc.T / (n - 1)
    c_ab = ac @ bc.T / (n - 1)

    wa = _inv_sqrt(c_aa, ridge)
    wb = _inv_sqrt(c_bb, ridge)
    u, s, vt = np.linalg.svd(wa @ c_ab @ wb)
    weight_a = wa @ u[:, 0]
    weight_b = wb @ vt[0]
    weight_a /= np.linalg.norm(weight_a)
    weight_b /= np.linalg.norm(weight_b)
    if weight_a[np.argmax(np.abs(weight_a))] < 0:
        weight_a = -weight_a
        weight_b = -weight_b
    return CcaSolution(weight_a, weight_b, float(np.clip(s[0], 0.0, 1.0)))
