"""Eigen-based certification and comparison of designs and bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .designs import DesignMatrix
from .errors import LayoutMismatchError, ValidationError

DEFAULT_PSD_TOL = 1e-8
PSD_ABS_FLOOR = 1e-10


@dataclass(eq=False)
class EigenReport:
    """Full symmetric eigendecomposition with a PSD verdict.

    Eigenvalues are sorted descending; eigenvector columns match that
    order.  psd is judged against a relative threshold (tol times the
    dominant eigenvalue magnitude, floored at 1 and at an absolute 1e-10).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    min_eig: float
    max_eig: float
    psd: bool
    tol: float


def psd_threshold(max_eig: float, tol: float) -> float:
    return max(tol * max(1.0, abs(max_eig)), PSD_ABS_FLOOR)


def eigen_psd_check(m: np.ndarray, tol: float = DEFAULT_PSD_TOL) -> EigenReport:
    """Symmetric eigendecomposition with a tolerance-based PSD verdict.

    The input must be symmetric to within 1e-10 and is symmetrized as
    (M + M') / 2 before decomposition.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix entries must be finite")
    if np.max(np.abs(m - m.T)) > 1e-10:
        raise ValidationError("matrix is not symmetric within 1e-10")
    sym = (m + m.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    max_eig = float(vals[0]) if vals.size else 0.0
    min_eig = float(vals[-1]) if vals.size else 0.0
    psd = min_eig >= -psd_threshold(max_eig, tol)
    return EigenReport(vals, vecs, min_eig, max_eig, psd, tol)


@dataclass(eq=False)
class DesignComparison:
    """Spectrum of the difference of two design matrices.

    Eigenvectors attached to nonzero eigenvalues are reshaped into one
    n-vector per arm; positive eigenvalues point at outcome profiles where
    the second design has smaller variance, negative ones the reverse.
    """

    report: EigenReport
    extremal: list[tuple[float, np.ndarray]]  # (eigenvalue, k x n profile)


def compare_designs(
    d_a: DesignMatrix, d_b: DesignMatrix, tol: float = DEFAULT_PSD_TOL
) -> DesignComparison:
    """Eigendecompose d_a - d_b and extract extremal outcome directions."""
    if d_a.layout != d_b.layout:
        raise LayoutMismatchError("design matrices use different layouts")
    layout = d_a.layout
    report = eigen_psd_check(d_a.d - d_b.d, tol)
    thresh = psd_threshold(report.max_eig, tol)
    extremal = []
    for j, lam in enumerate(report.eigenvalues):
        if abs(lam) > thresh:
            profile = report.eigenvectors[:, j].reshape(layout.k, layout.n)
            extremal.append((float(lam), profile))
    return DesignComparison(report, extremal)


@dataclass(eq=False)
class ComparisonVerdict:
    """Outcome of comparing two candidate bounding matrices.

    relation is "a-tighter", "b-tighter", "equal", or "incomparable";
    evidence holds the eigen report of (b - a).
    """

    relation: str
    evidence: EigenReport


def compare_bounds(
    a: np.ndarray, b: np.ndarray, tol: float = DEFAULT_PSD_TOL
) -> ComparisonVerdict:
    """Which of two bounding matrices dominates, judged spectrally.

    a is tighter when b - a is PSD and nonzero; symmetric for b; an
    indefinite difference means the bounds are incomparable.
    """
    a = np.asarray(getattr(a, "dtilde", a), dtype=float)
    b = np.asarray(getattr(b, "dtilde", b), dtype=float)
    if a.shape != b.shape:
        raise LayoutMismatchError("bound matrices have different shapes")
    report = eigen_psd_check(b - a, tol)
    scale = max(abs(report.max_eig), abs(report.min_eig))
    thresh = psd_threshold(scale, tol)
    has_pos = report.max_eig > thresh
    has_neg = report.min_eig < -thresh
    if not has_pos and not has_neg:
        relation = "equal"
    elif has_pos and not has_neg:
        relation = "a-tighter"
    elif has_neg and not has_pos:
        relation = "b-tighter"
    else:
        relation = "incomparable"
    return ComparisonVerdict(relation, report)
