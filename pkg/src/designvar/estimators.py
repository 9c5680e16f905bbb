"""Linear estimators of arm-mean contrasts and their linearizations.

Every estimator here has the form c' W(R) R y for a weight matrix W that
may depend on the realized assignment R.  The weighted-least-squares
family covers contrast-of-means (identity weights, intercept-only),
Hajek (inverse-probability weights, intercept-only), and OLS (identity
weights) as special cases; Horvitz-Thompson has a nonrandom W and is
handled on its own.

Each family member also has a population linearization vector z such
that the estimator behaves, to first order around R = E[R], like an
inverse-probability weighted sum of z.  Quadratic forms of z in the
design matrix then give exact variances for Horvitz-Thompson and
first-order variances for everything else.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .designs import (
    Assignment,
    Design,
    DesignMatrix,
    IndexLayout,
    PiDiagonal,
    inclusion_probabilities,
)
from .errors import (
    EstimationInfeasibleError,
    IllConditionedWarning,
    InfeasiblePointsWarning,
    LayoutMismatchError,
    ValidationError,
)

KINDS = ("ht", "cm", "hj", "ols", "wls")

COND_WARN = 1e12
COND_FAIL = 1e15


def intercept_matrix(layout: IndexLayout) -> np.ndarray:
    """kn x k block matrix with a ones-column per arm."""
    return np.kron(np.eye(layout.k), np.ones((layout.n, 1)))


def expand_covariates(x: np.ndarray | None, layout: IndexLayout) -> np.ndarray:
    """Per-arm intercept columns followed by the covariates tiled per arm.

    With l covariate columns the result is kn x (k + l); l = 0 reduces to
    the plain intercept matrix.
    """
    base = intercept_matrix(layout)
    if x is None:
        return base
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] != layout.n:
        raise LayoutMismatchError(
            f"covariate matrix has {x.shape[0]} rows, expected n={layout.n}"
        )
    if not np.all(np.isfinite(x)):
        raise ValidationError("covariates must be finite")
    if x.shape[1] == 0:
        return base
    return np.hstack([base, np.tile(x, (layout.k, 1))])


@dataclass(frozen=True, eq=False)
class EstimatorSpec:
    """Which linear estimator to use and with what contrast.

    kind is one of "ht", "cm", "hj", "ols", "wls".  The contrast has one
    entry per arm; covariate-adjusted estimators pad it internally with
    zeros.  WLS additionally takes the diagonal of its weighting matrix
    (length kn, positive).
    """

    kind: str
    contrast: np.ndarray
    covariates: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValidationError(f"unknown estimator kind {self.kind!r}")
        c = np.asarray(self.contrast, dtype=float)
        object.__setattr__(self, "contrast", c)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValidationError("contrast must be a finite 1-d vector")
        if self.covariates is not None:
            if kind not in ("ols", "wls"):
                raise ValidationError(f"{kind} does not take covariates")
            object.__setattr__(
                self, "covariates", np.atleast_2d(np.asarray(self.covariates, float))
            )
        if kind == "wls":
            if self.weights is None:
                raise ValidationError("wls requires the weighting diagonal")
            w = np.asarray(self.weights, dtype=float)
            object.__setattr__(self, "weights", w)
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ValidationError("wls weights must be positive and finite")
        elif self.weights is not None:
            raise ValidationError(f"{kind} does not take a weighting diagonal")

    def padded_contrast(self, layout: IndexLayout) -> np.ndarray:
        if self.contrast.shape != (layout.k,):
            raise LayoutMismatchError(
                f"contrast has length {self.contrast.size}, expected k={layout.k}"
            )
        l = 0 if self.covariates is None else self.covariates.shape[1]
        if self.kind in ("ols", "wls") and l:
            return np.concatenate([self.contrast, np.zeros(l)])
        return self.contrast.copy()

    def design_x(self, layout: IndexLayout) -> np.ndarray:
        if self.kind in ("ols", "wls"):
            return expand_covariates(self.covariates, layout)
        return intercept_matrix(layout)

    def weight_diag(self, pi: PiDiagonal) -> np.ndarray:
        """Diagonal of the weighting matrix for the WLS-family members."""
        kn = pi.layout.kn
        if self.kind in ("cm", "ols"):
            return np.ones(kn)
        if self.kind == "hj":
            return 1.0 / pi.probs
        if self.kind == "wls":
            w = pi.layout.check_vector(self.weights, "wls weights")
            if not np.all(np.isfinite(pi.probs * w)):
                raise ValidationError("pi times the wls weighting diagonal must be finite")
            return w
        raise ValidationError("horvitz-thompson has no weighting diagonal")


@dataclass(eq=False)
class ObservedData:
    """A realized assignment and the outcomes it reveals.

    y_obs is the full-length kn vector with zeros at unobserved positions.
    """

    assignment: Assignment
    y_obs: np.ndarray

    def __post_init__(self):
        layout = self.assignment.layout
        self.y_obs = layout.check_vector(self.y_obs, "observed outcomes")
        ind = self.assignment.indicators()
        if np.any(self.y_obs[ind == 0.0] != 0.0):
            raise ValidationError(
                "observed outcome vector must be zero at unobserved positions"
            )


def observe(assignment: Assignment, y: np.ndarray) -> ObservedData:
    """Project a full potential-outcome vector onto one assignment."""
    y = assignment.layout.check_vector(y, "potential outcomes")
    return ObservedData(assignment, assignment.indicators() * y)


@dataclass(eq=False)
class LinearizationVector:
    """First-order linearization vector z for an estimator.

    provenance records whether it was built from full potential outcomes
    and exact probabilities ("population") or from one realized assignment
    ("plug-in"); only population vectors enter variance quadratics.
    """

    layout: IndexLayout
    z: np.ndarray
    kind: str
    provenance: str

    def __post_init__(self):
        self.z = self.layout.check_vector(self.z, "linearization vector")


def _checked_solve(denom: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(denom)
    if not np.isfinite(cond) or cond > COND_FAIL:
        raise EstimationInfeasibleError(
            f"singular {what} (condition number {cond:.3g}); "
            "likely an arm with no assigned units"
        )
    if cond > COND_WARN:
        warnings.warn(
            f"{what} is ill conditioned (condition number {cond:.3g})",
            IllConditionedWarning,
            stacklevel=3,
        )
    try:
        return np.linalg.solve(denom, rhs)
    except np.linalg.LinAlgError as exc:
        raise EstimationInfeasibleError(f"singular {what}: {exc}") from exc


def weight_matrix_at(
    spec: EstimatorSpec, rdiag: np.ndarray, pi: PiDiagonal
) -> np.ndarray:
    """The estimator's weight matrix W evaluated at a given diagonal R.

    rdiag may be any nonnegative vector, not just 0/1 indicators; the
    population version W(pi) is the special case rdiag = pi.
    """
    layout = pi.layout
    rdiag = layout.check_vector(rdiag, "assignment diagonal")
    if spec.kind == "ht":
        ones = intercept_matrix(layout)
        return ones.T / (layout.n * pi.probs)[None, :]
    m = spec.weight_diag(pi)
    xx = spec.design_x(layout)
    denom = (xx * (m * rdiag)[:, None]).T @ xx
    return _checked_solve(denom, (xx * m[:, None]).T, "realized denominator")


def point_estimate(spec: EstimatorSpec, data: ObservedData, pi: PiDiagonal) -> float:
    """Evaluate c' W(R) R y at the realized assignment."""
    layout = pi.layout
    if data.assignment.layout != layout:
        raise LayoutMismatchError("data and probabilities use different layouts")
    fc = spec.padded_contrast(layout)
    w = weight_matrix_at(spec, data.assignment.indicators(), pi)
    return float(fc @ (w @ data.y_obs))


def linearization_vector(
    spec: EstimatorSpec, y: np.ndarray, pi: PiDiagonal
) -> LinearizationVector:
    """Population linearization vector for the spec'd estimator.

    Horvitz-Thompson: z = y scaled by its arm's contrast weight over n.
    WLS family: z = pi * (y - xx b) * (m xx (xx' m pi xx)^{-1} c) with
    b the population weighted-least-squares coefficient.
    """
    layout = pi.layout
    y = layout.check_vector(y, "potential outcomes")
    if not np.all(np.isfinite(y)):
        raise ValidationError("potential outcomes must be finite")
    fc = spec.padded_contrast(layout)
    if spec.kind == "ht":
        carm = np.repeat(spec.contrast, layout.n)
        z = y * carm / layout.n
        return LinearizationVector(layout, z, "ht", "population")
    m = spec.weight_diag(pi)
    xx = spec.design_x(layout)
    mpi = m * pi.probs
    denom = (xx * mpi[:, None]).T @ xx
    b = _checked_solve(denom, xx.T @ (mpi * y), "population denominator")
    resid = y - xx @ b
    right = m * (xx @ _checked_solve(denom, fc, "population denominator"))
    z = pi.probs * resid * right
    return LinearizationVector(layout, z, spec.kind, "population")


def taylor_variance(z: LinearizationVector, dmat: DesignMatrix) -> float:
    """Quadratic form z' d z; the exact variance of the linearized estimator.

    Values in [-1e-10, 0) are rounding residue of a PSD quadratic and are
    clamped to zero; anything more negative is returned as-is so broken
    inputs stay visible.
    """
    if z.provenance != "population":
        raise ValidationError(
            "variance quadratics need a population linearization vector, "
            f"got provenance {z.provenance!r}"
        )
    if z.layout != dmat.layout:
        raise LayoutMismatchError("linearization vector and design matrix disagree")
    val = float(z.z @ dmat.d @ z.z)
    if -1e-10 <= val < 0.0:
        return 0.0
    return val


def ht_linearization(y: np.ndarray, c: np.ndarray, layout: IndexLayout) -> LinearizationVector:
    """z for the Horvitz-Thompson estimator, free of any probabilities."""
    y = layout.check_vector(y, "potential outcomes")
    c = np.asarray(c, dtype=float)
    if c.shape != (layout.k,):
        raise LayoutMismatchError(f"contrast must have length k={layout.k}")
    z = y * np.repeat(c, layout.n) / layout.n
    return LinearizationVector(layout, z, "ht", "population")


def ht_exact_variance(y: np.ndarray, c: np.ndarray, dmat: DesignMatrix) -> float:
    """Exact variance of the Horvitz-Thompson contrast estimator."""
    return taylor_variance(ht_linearization(y, c, dmat.layout), dmat)


def linearized_estimator(spec: EstimatorSpec, y: np.ndarray, pi: PiDiagonal):
    """Closure evaluating the first-order linearization at any indicator vector.

    For the WLS family this is the coefficient-anchored expansion
    c'b + c'w R (y - xx b) around R = pi; Horvitz-Thompson is linear in R
    already, so its closure reproduces the estimator itself.
    """
    layout = pi.layout
    y = layout.check_vector(y, "potential outcomes")
    fc = spec.padded_contrast(layout)
    if spec.kind == "ht":
        w = weight_matrix_at(spec, pi.probs, pi)

        def linearized(r: np.ndarray) -> float:
            return float(fc @ (w @ (r * y)))

        return linearized
    m = spec.weight_diag(pi)
    xx = spec.design_x(layout)
    mpi = m * pi.probs
    denom = (xx * mpi[:, None]).T @ xx
    b = _checked_solve(denom, xx.T @ (mpi * y), "population denominator")
    resid = y - xx @ b
    q = m * (xx @ _checked_solve(denom, fc, "population denominator"))
    anchor = float(fc @ b)

    def linearized(r: np.ndarray) -> float:
        return anchor + float(q @ (r * resid))

    return linearized


def taylor_gap(spec: EstimatorSpec, design: Design, y: np.ndarray) -> float:
    """Worst-case gap between the estimator and its linearization.

    Scans the whole support and returns max |point - linearized|; support
    points where the realized denominator is singular are excluded and
    reported through a warning.
    """
    if design.support is None:
        raise ValidationError("taylor_gap requires an exact (enumerated) design")
    layout = design.layout
    pi = inclusion_probabilities(design)
    y = layout.check_vector(y, "potential outcomes")
    linearized = linearized_estimator(spec, y, pi)

    worst = 0.0
    skipped = 0
    for assignment, _prob in design.assignments():
        try:
            point = point_estimate(spec, observe(assignment, y), pi)
        except EstimationInfeasibleError:
            skipped += 1
            continue
        worst = max(worst, abs(point - linearized(assignment.indicators())))
    if skipped:
        warnings.warn(
            f"{skipped} of {design.support_size} support points were "
            "estimation-infeasible and excluded from the gap",
            InfeasiblePointsWarning,
            stacklevel=2,
        )
    return worst


def plug_in_rz(spec: EstimatorSpec, data: ObservedData, pi: PiDiagonal) -> np.ndarray:
    """Observed projection R z-hat of the plug-in linearization vector.

    Population denominators are replaced by their realized counterparts
    and residuals use the fitted coefficient from the observed data, so
    only observed coordinates are ever touched.
    """
    layout = pi.layout
    if data.assignment.layout != layout:
        raise LayoutMismatchError("data and probabilities use different layouts")
    fc = spec.padded_contrast(layout)
    r = data.assignment.indicators()
    if spec.kind == "ht":
        return data.y_obs * np.repeat(spec.contrast, layout.n) / layout.n
    m = spec.weight_diag(pi)
    xx = spec.design_x(layout)
    denom = (xx * (m * r)[:, None]).T @ xx
    bhat = _checked_solve(denom, xx.T @ (m * data.y_obs), "realized denominator")
    resid_obs = data.y_obs - r * (xx @ bhat)
    right = m * (xx @ _checked_solve(denom, fc, "realized denominator"))
    return pi.probs * resid_obs * right
