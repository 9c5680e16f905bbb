"""Construction and certification of variance-bound matrices.

A candidate bounding matrix dominates the design matrix in quadratic
form exactly when their difference is positive semidefinite; it yields
an *identified* bound when it vanishes wherever a joint assignment is
impossible.  Three constructions are provided: the block-diagonal
(generalized Neyman) bound, the Aronow-Samii bound, and an iterative
projection scheme that alternates PSD projection with re-forcing the
impossible positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .designs import DesignMatrix, ImpossibilityMask, IndexLayout
from .errors import (
    LayoutMismatchError,
    NeymanPreconditionError,
    NonConvergenceError,
    ValidationError,
)
from .estimators import ht_linearization
from .spectral import DEFAULT_PSD_TOL, eigen_psd_check, psd_threshold


@dataclass(eq=False)
class BoundMatrix:
    """A candidate variance-bound matrix with its certification state.

    certified_bounding / certified_identified are tri-state strings
    ("yes", "no", "unchecked"); iterations is set by the projection
    algorithm only.
    """

    layout: IndexLayout
    dtilde: np.ndarray
    method: str  # "neyman" | "aronow-samii" | "algorithm-m" | "user"
    frac: list[list[Fraction]] | None = None
    certified_bounding: str = "unchecked"
    certified_identified: str = "unchecked"
    iterations: int | None = None
    diff_min_eig: float | None = None

    def __post_init__(self):
        self.dtilde = self.layout.check_matrix(self.dtilde, "bounding matrix")

    def block(self, r: int, s: int) -> np.ndarray:
        n = self.layout.n
        return self.dtilde[r * n : (r + 1) * n, s * n : (s + 1) * n]


def user_bound(matrix: np.ndarray, layout: IndexLayout) -> BoundMatrix:
    """Wrap a user-supplied matrix for certification."""
    return BoundMatrix(layout, np.asarray(matrix, dtype=float), "user")


def derive_mask(dmat: DesignMatrix) -> ImpossibilityMask:
    """Impossible-assignment positions read off the design matrix.

    Rational-backed matrices are checked exactly; float-backed ones rely
    on the construction invariant that impossible positions hold exactly
    -1.0 (they are set analytically, never by rounding).
    """
    kn = dmat.layout.kn
    if dmat.frac is not None:
        mask = np.array(
            [[1.0 if dmat.frac[a][b] == -1 else 0.0 for b in range(kn)] for a in range(kn)]
        )
    else:
        mask = (dmat.d == -1.0).astype(float)
    return ImpossibilityMask(dmat.layout, mask)


def certify(
    bound: BoundMatrix,
    dmat: DesignMatrix,
    mask: ImpossibilityMask | None = None,
    tol: float = DEFAULT_PSD_TOL,
) -> BoundMatrix:
    """Run both certifications and update the bound's tri-states.

    Bounding: the difference dtilde - d must be PSD within tolerance.
    Identified: dtilde must be exactly zero at every masked position.
    """
    if bound.layout != dmat.layout:
        raise LayoutMismatchError("bound and design matrix use different layouts")
    if mask is None:
        mask = derive_mask(dmat)
    report = eigen_psd_check(bound.dtilde - dmat.d, tol)
    bound.certified_bounding = "yes" if report.psd else "no"
    bound.diff_min_eig = report.min_eig
    masked = mask.mask == 1.0
    bound.certified_identified = (
        "yes" if np.all(bound.dtilde[masked] == 0.0) else "no"
    )
    return bound


def _check_neyman_preconditions(
    dmat: DesignMatrix, c: np.ndarray, mask: ImpossibilityMask
) -> None:
    layout = dmat.layout
    k, n = layout.k, layout.n
    if abs(float(c.sum())) > 1e-12:
        raise NeymanPreconditionError(
            f"contrast entries must sum to zero (got {c.sum()})"
        )
    if np.any(c == 0.0):
        raise NeymanPreconditionError(
            "every contrast entry must be nonzero for the block-diagonal bound"
        )
    bad = [
        r
        for r in range(k)
        if np.any(mask.mask[r * n : (r + 1) * n, r * n : (r + 1) * n] == 1.0)
    ]
    if bad:
        raise NeymanPreconditionError(
            "the block-diagonal bound does not apply: diagonal block(s) "
            f"{bad} contain -1 entries (impossible same-arm joint assignments)"
        )
    for r in range(k):
        for s in range(k):
            if r == s or (r, s) == (0, 1):
                continue
            if dmat.frac is not None:
                ref_ok = all(
                    dmat.frac[r * n + i][s * n + j] == dmat.frac[i][n + j]
                    for i in range(n)
                    for j in range(n)
                )
            else:
                ref_ok = np.max(np.abs(dmat.block(r, s) - dmat.block(0, 1))) <= 1e-12
            if not ref_ok:
                raise NeymanPreconditionError(
                    f"off-diagonal blocks ({r},{s}) and (0,1) differ; the "
                    "block-diagonal bound needs them all equal"
                )


def neyman_bound(
    dmat: DesignMatrix,
    c: np.ndarray,
    mask: ImpossibilityMask | None = None,
    tol: float = DEFAULT_PSD_TOL,
) -> BoundMatrix:
    """Block-diagonal bound moving cross-arm mass onto the diagonal blocks.

    Block (r, r) of the result is sum_s (c_s / c_r) d_rs; off-diagonal
    blocks are zero.  With that ratio the bound's quadratic form exceeds
    the design matrix's by exactly sum_{r<s} c_r c_s tau_rs' d_01 tau_rs,
    a nonnegative quantity (see neyman_identity_check).  Applies only when
    no diagonal block of d contains a -1 entry, all off-diagonal blocks
    coincide, the contrast sums to zero, and no contrast entry vanishes.
    """
    layout = dmat.layout
    k, n = layout.k, layout.n
    c = np.asarray(c, dtype=float)
    if c.shape != (k,):
        raise LayoutMismatchError(f"contrast must have length k={k}")
    if mask is None:
        mask = derive_mask(dmat)
    _check_neyman_preconditions(dmat, c, mask)

    dt = np.zeros((layout.kn, layout.kn))
    frac = None
    if dmat.frac is not None:
        zero = Fraction(0)
        frac = [[zero] * layout.kn for _ in range(layout.kn)]
        cf = [Fraction(float(x)) for x in c]
        for r in range(k):
            for i in range(n):
                for j in range(n):
                    acc = Fraction(0)
                    for s in range(k):
                        acc += (cf[s] / cf[r]) * dmat.frac[r * n + i][s * n + j]
                    frac[r * n + i][r * n + j] = acc
                    dt[r * n + i, r * n + j] = float(acc)
    else:
        for r in range(k):
            block = np.zeros((n, n))
            for s in range(k):
                block += (c[s] / c[r]) * dmat.block(r, s)
            dt[r * n : (r + 1) * n, r * n : (r + 1) * n] = block

    bound = BoundMatrix(layout, dt, "neyman", frac=frac)
    return certify(bound, dmat, mask, tol)


def neyman_identity_check(
    dmat: DesignMatrix, c: np.ndarray, y: np.ndarray
) -> tuple[float, float]:
    """Two independent evaluations of the block-diagonal bound's slack.

    Returns (lhs_gap, rhs_sum): the quadratic-form gap
    n^2 (z' dtilde z - z' d z) for the Horvitz-Thompson linearization of
    y, and the direct double sum over arm pairs of
    c_r c_s tau_rs' d_01 tau_rs with tau_rs the arm-r-minus-arm-s effect
    vector.  The two agree identically and the sum is nonnegative because
    the shared off-diagonal block is negative semidefinite.
    """
    layout = dmat.layout
    k, n = layout.k, layout.n
    c = np.asarray(c, dtype=float)
    y = layout.check_vector(y, "potential outcomes")
    bound = neyman_bound(dmat, c)
    z = ht_linearization(y, c, layout).z
    lhs_gap = float(n**2 * (z @ bound.dtilde @ z - z @ dmat.d @ z))
    d01 = dmat.block(0, 1)
    arm = [y[r * n : (r + 1) * n] for r in range(k)]
    rhs_sum = 0.0
    for r in range(k - 1):
        for s in range(r + 1, k):
            tau = arm[r] - arm[s]
            rhs_sum += c[r] * c[s] * float(tau @ d01 @ tau)
    return lhs_gap, rhs_sum


def aronow_samii_bound(
    dmat: DesignMatrix,
    mask: ImpossibilityMask | None = None,
    tol: float = DEFAULT_PSD_TOL,
) -> BoundMatrix:
    """Zero out impossible positions and absorb them into the diagonal.

    dtilde = d + mask + diag(mask row sums).  The added part has each
    diagonal entry equal to its row's absolute off-diagonal sum, so it is
    PSD by Gershgorin discs for any identified design; the eigen
    certification is still executed.
    """
    layout = dmat.layout
    if mask is None:
        mask = derive_mask(dmat)
    if mask.layout != layout:
        raise LayoutMismatchError("mask and design matrix use different layouts")
    rowsums = mask.mask.sum(axis=1)
    dt = dmat.d + mask.mask + np.diag(rowsums)
    frac = None
    if dmat.frac is not None:
        frac = [
            [
                dmat.frac[a][b]
                + int(mask.mask[a, b])
                + (int(rowsums[a]) if a == b else 0)
                for b in range(layout.kn)
            ]
            for a in range(layout.kn)
        ]
        dt = np.array([[float(x) for x in row] for row in frac])
    bound = BoundMatrix(layout, dt, "aronow-samii", frac=frac)
    return certify(bound, dmat, mask, tol)


def algorithm_m_bound(
    dmat: DesignMatrix,
    mask: ImpossibilityMask | None = None,
    init: np.ndarray | None = None,
    tol: float = DEFAULT_PSD_TOL,
    max_iter: int = 10000,
) -> BoundMatrix:
    """Alternating projection: PSD-project, then re-force masked entries.

    Starts from the mask itself (or a caller-supplied matrix, e.g. the
    block-diagonal bound's additive part when that bound applies) and
    iterates until the working matrix is PSD within tolerance while
    keeping exact ones at every masked position.  The converged additive
    part t gives dtilde = d + t, which is identified by construction.
    """
    layout = dmat.layout
    if mask is None:
        mask = derive_mask(dmat)
    if mask.layout != layout:
        raise LayoutMismatchError("mask and design matrix use different layouts")
    m = mask.mask
    if init is None:
        t = m.copy()
    else:
        t = layout.check_matrix(np.array(init, dtype=float), "initial matrix").copy()
        t = m + (1.0 - m) * t  # masked entries must start at one
    last_min = None
    for iteration in range(1, max_iter + 1):
        t = (t + t.T) / 2.0
        vals, vecs = np.linalg.eigh(t)
        last_min = float(vals[0])
        if last_min >= -psd_threshold(float(vals[-1]), tol):
            bound = BoundMatrix(layout, dmat.d + t, "algorithm-m", iterations=iteration)
            return certify(bound, dmat, mask, tol)
        t = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        t = m + (1.0 - m) * t
    raise NonConvergenceError(
        f"projection did not converge within {max_iter} iterations "
        f"(last minimum eigenvalue {last_min:.3e})",
        iterations=max_iter,
        last_min_eig=last_min,
    )


BOUND_METHOD_ALIASES = {
    "neyman": "neyman",
    "as": "aronow-samii",
    "aronow-samii": "aronow-samii",
    "algm": "algorithm-m",
    "algorithm-m": "algorithm-m",
}


def build_bound(
    method: str,
    dmat: DesignMatrix,
    mask: ImpossibilityMask | None = None,
    contrast: np.ndarray | None = None,
    tol: float = DEFAULT_PSD_TOL,
    init: np.ndarray | None = None,
    max_iter: int = 10000,
) -> BoundMatrix:
    """Construct a bound by method name ("neyman", "as", "algm")."""
    canonical = BOUND_METHOD_ALIASES.get(method.lower())
    if canonical is None:
        raise ValidationError(f"unknown bound method {method!r}")
    if canonical == "neyman":
        if contrast is None:
            raise ValidationError("the block-diagonal bound needs a contrast vector")
        return neyman_bound(dmat, contrast, mask, tol)
    if canonical == "aronow-samii":
        return aronow_samii_bound(dmat, mask, tol)
    return algorithm_m_bound(dmat, mask, init=init, tol=tol, max_iter=max_iter)


def is_invariant_bounding(
    dtilde: np.ndarray | BoundMatrix, layout: IndexLayout, tol: float = 1e-10
) -> bool:
    """True when every n x n arm-pair partition has zero row sums.

    Quadratic forms of such matrices are unchanged by adding a constant
    within each arm of the outcome vector.
    """
    dt = np.asarray(getattr(dtilde, "dtilde", dtilde), dtype=float)
    dt = layout.check_matrix(dt, "bounding matrix")
    k, n = layout.k, layout.n
    for r in range(k):
        for s in range(k):
            block = dt[r * n : (r + 1) * n, s * n : (s + 1) * n]
            if np.max(np.abs(block.sum(axis=1))) > tol:
                return False
    return True
