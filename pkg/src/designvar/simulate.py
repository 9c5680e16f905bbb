"""Exact-enumeration and Monte Carlo validation harness.

Exact mode walks the whole support with its probabilities and therefore
returns deterministic numbers: bias, variance, mean bound estimate, and
normal-interval coverage are all probability-weighted sums.  Monte Carlo
mode replays the same computation over seeded replicate draws, with one
deterministic child seed per replicate, and reports Monte Carlo standard
errors alongside each metric.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bounds import build_bound
from .bound_estimation import ipw_bound_matrix, plugin_bound_estimate
from .conditions import first_order_condition_norm
from .designs import (
    Assignment,
    Design,
    complete_design,
    first_order_design_matrix,
    inclusion_probabilities,
    joint_probabilities,
)
from .errors import (
    EstimationInfeasibleError,
    InfeasiblePointsWarning,
    SupportOverflowError,
    ValidationError,
)
from .estimators import (
    EstimatorSpec,
    linearization_vector,
    linearized_estimator,
    observe,
    point_estimate,
    taylor_gap,
    taylor_variance,
)

Z_95 = 1.96


@dataclass(eq=False)
class SimScenario:
    """One simulation: a design, fixed potential outcomes, an estimator,
    and optionally a bound method whose estimates are tracked."""

    design: Design
    y: np.ndarray
    estimator: EstimatorSpec
    bound_method: str | None = "as"
    mode: str = "exact"
    replicates: int = 0
    seed: int | None = None

    def __post_init__(self):
        self.y = self.design.layout.check_vector(self.y, "potential outcomes")
        if self.mode not in ("exact", "mc"):
            raise ValidationError(f"unknown scenario mode {self.mode!r}")
        if self.mode == "exact" and self.design.support is None:
            raise ValidationError("exact scenarios need an enumerable design")
        if self.mode == "mc":
            if self.seed is None:
                raise ValidationError("monte-carlo scenarios require an explicit seed")
            if self.replicates < 1:
                raise ValidationError("monte-carlo scenarios need replicates >= 1")


@dataclass(eq=False)
class SimReport:
    """Summary metrics of a scenario run.

    Metrics conditional on feasibility exclude support points where the
    realized denominator was singular; their count and probability weight
    are reported.  Negative plug-in bound estimates are floored at zero
    inside the coverage intervals and counted.
    """

    estimand: float
    mean_estimate: float
    bias: float
    empirical_variance: float
    taylor_variance: float
    bound_value: float | None
    mean_bound_estimate: float | None
    coverage_95: float | None
    infeasible_count: int
    infeasible_weight: float
    negative_bound_count: int
    mode: str
    replicates: int
    mc_se: dict[str, float] | None = None


def _contrast_estimand(y: np.ndarray, contrast: np.ndarray, layout) -> float:
    means = y.reshape(layout.k, layout.n).mean(axis=1)
    return float(contrast @ means)


def run_scenario(scenario: SimScenario) -> SimReport:
    """Run one scenario, exactly or by seeded replication."""
    design = scenario.design
    layout = design.layout
    spec = scenario.estimator
    y = scenario.y
    pi = inclusion_probabilities(design)
    estimand = _contrast_estimand(y, spec.contrast, layout)

    z = linearization_vector(spec, y, pi)
    dmat, mask = first_order_design_matrix(design)
    t_var = taylor_variance(z, dmat)

    ipw = None
    bound_value = None
    if scenario.bound_method is not None:
        bound = build_bound(scenario.bound_method, dmat, mask, contrast=spec.contrast)
        bound_value = float(z.z @ bound.dtilde @ z.z)
        ipw = ipw_bound_matrix(bound, joint_probabilities(design))

    def one_draw(assignment: Assignment):
        data = observe(assignment, y)
        est = point_estimate(spec, data, pi)
        if ipw is None:
            return est, None, None
        best = plugin_bound_estimate(
            spec, data, pi, ipw, bound_method=scenario.bound_method
        ).value
        half = Z_95 * math.sqrt(max(best, 0.0))
        covered = abs(estimand - est) <= half
        return est, best, covered

    draws: list[tuple[float, float | None, bool | None, float]] = []
    infeasible_count = 0
    infeasible_weight = 0.0
    if scenario.mode == "exact":
        for assignment, prob in design.assignments():
            try:
                est, best, covered = one_draw(assignment)
            except EstimationInfeasibleError:
                infeasible_count += 1
                infeasible_weight += float(prob)
                continue
            draws.append((est, best, covered, float(prob)))
    else:
        for rep in range(scenario.replicates):
            rng = np.random.default_rng((scenario.seed, rep))
            assignment = Assignment(layout, design.draw(rng))
            try:
                est, best, covered = one_draw(assignment)
            except EstimationInfeasibleError:
                infeasible_count += 1
                continue
            draws.append((est, best, covered, 1.0))
    if infeasible_count:
        warnings.warn(
            f"{infeasible_count} draws were estimation-infeasible and excluded "
            "from conditional metrics",
            InfeasiblePointsWarning,
            stacklevel=2,
        )
    if not draws:
        raise EstimationInfeasibleError("estimation failed on every draw")

    ests = np.array([d[0] for d in draws])
    weights = np.array([d[3] for d in draws])
    wsum = weights.sum()
    wnorm = weights / wsum
    mean_est = float(wnorm @ ests)
    emp_var = float(wnorm @ (ests - mean_est) ** 2)

    mean_bound = coverage = None
    negative_bounds = 0
    if ipw is not None:
        bounds_arr = np.array([d[1] for d in draws])
        cover_arr = np.array([1.0 if d[2] else 0.0 for d in draws])
        mean_bound = float(wnorm @ bounds_arr)
        coverage = float(np.clip(wnorm @ cover_arr, 0.0, 1.0))
        negative_bounds = int(np.sum(bounds_arr < 0.0))

    mc_se = None
    if scenario.mode == "mc":
        n_eff = len(draws)
        centered = ests - mean_est
        mc_se = {
            "mean_estimate": float(ests.std(ddof=1) / math.sqrt(n_eff)),
            "empirical_variance": float(
                math.sqrt(max((centered**4).mean() - emp_var**2, 0.0) / n_eff)
            ),
        }
        if ipw is not None:
            mc_se["mean_bound_estimate"] = float(
                bounds_arr.std(ddof=1) / math.sqrt(n_eff)
            )
            mc_se["coverage_95"] = float(
                math.sqrt(max(coverage * (1 - coverage), 0.0) / n_eff)
            )

    return SimReport(
        estimand=estimand,
        mean_estimate=mean_est,
        bias=mean_est - estimand,
        empirical_variance=emp_var,
        taylor_variance=t_var,
        bound_value=bound_value,
        mean_bound_estimate=mean_bound,
        coverage_95=coverage,
        infeasible_count=infeasible_count,
        infeasible_weight=infeasible_weight,
        negative_bound_count=negative_bounds,
        mode=scenario.mode,
        replicates=scenario.replicates if scenario.mode == "mc" else len(draws),
        mc_se=mc_se,
    )


def _tiled_outcomes(base_y: np.ndarray, copies: int) -> np.ndarray:
    """Stack `copies` repeats of each arm's base outcomes (unit i is a copy
    of base unit i mod B)."""
    return np.concatenate([np.tile(row, copies) for row in base_y])


def _tiled_complete_gap(
    spec: EstimatorSpec, design: Design, base_y: np.ndarray, copies: int
) -> float:
    """Exact max linearization gap for two-arm complete designs on tiled
    populations, enumerating treated-copy count classes instead of the
    full support (the estimator value depends only on how many copies of
    each base unit land in each arm)."""
    layout = design.layout
    pi = inclusion_probabilities(design)
    n_treat = int(round(pi.probs[layout.n] * layout.n))
    n_base = base_y.shape[1]
    y = _tiled_outcomes(base_y, copies)
    linearized = linearized_estimator(spec, y, pi)
    worst = 0.0
    skipped = 0
    for counts in itertools.product(range(copies + 1), repeat=n_base):
        if sum(counts) != n_treat:
            continue
        arms = np.zeros(layout.n, dtype=int)
        for b, g in enumerate(counts):
            # copies of base unit b sit at indices b, b + n_base, b + 2 n_base, ...
            arms[b + n_base * np.arange(g)] = 1
        assignment = Assignment(layout, arms)
        try:
            point = point_estimate(spec, observe(assignment, y), pi)
        except EstimationInfeasibleError:
            skipped += 1
            continue
        worst = max(worst, abs(point - linearized(assignment.indicators())))
    if skipped:
        warnings.warn(
            f"{skipped} count classes were estimation-infeasible and excluded",
            InfeasiblePointsWarning,
            stacklevel=2,
        )
    return worst


def consistency_sweep(
    spec: EstimatorSpec,
    base_y: np.ndarray,
    n_list: list[int],
    *,
    support_cap: int = 10**5,
) -> list[dict]:
    """Rate diagnostics along a sequence of growing balanced designs.

    The population is grown by tiling base_y (one row per arm); each n
    uses a balanced two-arm complete design.  Rows report n * Var of the
    linearized estimator, the max linearization gap (times n), and the
    first-order condition norm, all of which should stay bounded.
    """
    base_y = np.atleast_2d(np.asarray(base_y, dtype=float))
    if base_y.shape[0] != 2:
        raise ValidationError("the sweep uses two-arm designs; base_y needs 2 rows")
    n_base = base_y.shape[1]
    rows = []
    for n in n_list:
        if n % n_base:
            raise ValidationError(
                f"n={n} is not a multiple of the base population size {n_base}"
            )
        if n % 2:
            raise ValidationError(f"balanced design needs even n, got {n}")
        copies = n // n_base
        y = _tiled_outcomes(base_y, copies)
        try:
            design = complete_design([n // 2, n // 2], support_cap=support_cap)
            gap = taylor_gap(spec, design, y)
        except SupportOverflowError:
            design = complete_design([n // 2, n // 2], mode="mc")
            gap = _tiled_complete_gap(spec, design, base_y, copies)
        pi = inclusion_probabilities(design)
        dmat, _ = first_order_design_matrix(design)
        z = linearization_vector(spec, y, pi)
        var = taylor_variance(z, dmat)
        rows.append(
            {
                "n": n,
                "n_times_var": n * var,
                "taylor_gap": gap,
                "gap_times_n": gap * n,
                "first_order_norm": first_order_condition_norm(dmat),
            }
        )
    return rows
