"""Command-line interface.

Subcommands: design, bound, estimate, compare, simulate.  All input and
output is file-based (CSV matrices, JSON sidecars); see docs/formats.md.
Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import serialization as ser
from .bounds import build_bound, certify, user_bound
from .bound_estimation import ipw_bound_matrix, plugin_bound_estimate
from .designs import (
    DesignMatrix,
    ImpossibilityMask,
    IndexLayout,
    build_design,
    first_order_design_matrix,
    inclusion_probabilities,
    joint_probabilities,
)
from .errors import NumericalError, ValidationError
from .estimators import EstimatorSpec, point_estimate
from .simulate import SimScenario, consistency_sweep, run_scenario
from .spectral import compare_bounds, compare_designs


def _parse_contrast(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError as exc:
        raise ValidationError(f"bad contrast {text!r}: {exc}") from exc


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def _layout_for_matrix(matrix: np.ndarray, k: int) -> IndexLayout:
    kn = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {matrix.shape}")
    if kn % k:
        raise ValidationError(f"matrix size {kn} is not divisible by k={k}")
    return IndexLayout(k, kn // k)


def cmd_design(args) -> int:
    spec = _load_json(args.spec)
    design = build_design(spec, support_cap=args.support_cap)
    pi = inclusion_probabilities(design)
    p = joint_probabilities(design)
    dmat, mask = first_order_design_matrix(design)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ser.write_vector_csv(out / "pi.csv", pi.probs)
    ser.write_matrix_csv(out / "p.csv", p.p)
    ser.write_matrix_csv(out / "d.csv", dmat.d)
    ser.write_matrix_csv(out / "mask.csv", mask.mask.astype(int))
    summary = ser.design_summary(design)
    summary["estimated"] = bool(pi.estimated)
    ser.write_json(out / "design.json", summary)
    print(f"wrote pi.csv, p.csv, d.csv, mask.csv, design.json to {out}")
    return 0


def cmd_bound(args) -> int:
    d = ser.read_matrix_csv(args.d)
    layout = _layout_for_matrix(d, args.k)
    dmat = DesignMatrix(layout, d)
    mask = ImpossibilityMask(layout, ser.read_matrix_csv(args.mask))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.method == "verify":
        if args.candidate is None:
            raise ValidationError("--method verify requires --candidate")
        bound = user_bound(ser.read_matrix_csv(args.candidate), layout)
        certify(bound, dmat, mask, tol=args.tol)
    else:
        contrast = _parse_contrast(args.contrast) if args.contrast else None
        init = None
        if args.init == "neyman":
            neyman = build_bound("neyman", dmat, mask, contrast=contrast, tol=args.tol)
            init = neyman.dtilde - dmat.d
        bound = build_bound(
            args.method,
            dmat,
            mask,
            contrast=contrast,
            tol=args.tol,
            init=init,
            max_iter=args.max_iter,
        )
        ser.write_matrix_csv(out / "dtilde.csv", bound.dtilde)
    ser.write_json(out / "certification.json", ser.bound_sidecar(bound, args.tol))
    print(
        f"bound method={bound.method} bounding={bound.certified_bounding} "
        f"identified={bound.certified_identified}"
    )
    return 0


def _estimator_from_args(kind, contrast, covariates, weights, pi) -> EstimatorSpec:
    kw = {}
    if covariates is not None:
        kw["covariates"] = covariates
    if kind == "wls":
        if weights in (None, "identity"):
            kw["weights"] = np.ones(pi.layout.kn)
        elif weights == "invpi":
            kw["weights"] = 1.0 / pi.probs
        else:
            kw["weights"] = ser.read_vector_csv(weights)
    return EstimatorSpec(kind, contrast, **kw)


def cmd_estimate(args) -> int:
    design = build_design(_load_json(args.design))
    layout = design.layout
    data = ser.read_observed(args.data, layout)
    pi = inclusion_probabilities(design)
    covariates = ser.read_covariates(args.covariates, layout.n) if args.covariates else None
    spec = _estimator_from_args(
        args.estimator, _parse_contrast(args.contrast), covariates, args.weights, pi
    )
    estimate = point_estimate(spec, data, pi)
    dmat, mask = first_order_design_matrix(design)
    bound = build_bound(args.bound, dmat, mask, contrast=spec.contrast)
    ipw = ipw_bound_matrix(bound, joint_probabilities(design))
    best = plugin_bound_estimate(spec, data, pi, ipw, bound_method=bound.method)
    report = {
        "point_estimate": estimate,
        "bound_estimate": best.value,
        "bound_method": bound.method,
        "estimator": spec.kind,
        "se": math.sqrt(max(best.value, 0.0)),
    }
    ser.write_json(args.out, report)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    a = ser.read_matrix_csv(args.a)
    b = ser.read_matrix_csv(args.b)
    layout = _layout_for_matrix(a, args.k)
    if args.as_what == "designs":
        comparison = compare_designs(
            DesignMatrix(layout, a), DesignMatrix(layout, b), tol=args.tol
        )
        report = ser.eigen_report_dict(comparison.report)
        report["extremal_eigenvalues"] = [lam for lam, _ in comparison.extremal]
        if args.vectors:
            ser.write_matrix_csv(args.vectors, comparison.report.eigenvectors)
            report["vectors_csv"] = str(args.vectors)
    else:
        verdict = compare_bounds(a, b, tol=args.tol)
        report = ser.eigen_report_dict(verdict.evidence)
        report["relation"] = verdict.relation
    ser.write_json(args.out, report)
    print(json.dumps({k: v for k, v in report.items() if k != "eigenvalues"}, sort_keys=True))
    return 0


def _scenario_from_json(doc: dict) -> SimScenario | dict:
    if "sweep" in doc:
        return doc["sweep"]
    design = build_design(doc["design"])
    pi = inclusion_probabilities(design)
    y_doc = doc["y"]
    if isinstance(y_doc, dict):
        base = np.asarray(y_doc["base"], dtype=float)
        y = np.concatenate([np.tile(row, int(y_doc["copies"])) for row in base])
    else:
        y = np.asarray(y_doc, dtype=float)
    est = doc["estimator"]
    covariates = est.get("covariates")
    spec = _estimator_from_args(
        est["kind"],
        np.asarray(est["contrast"], dtype=float),
        np.asarray(covariates, dtype=float) if covariates is not None else None,
        est.get("weights"),
        pi,
    )
    return SimScenario(
        design=design,
        y=y,
        estimator=spec,
        bound_method=doc.get("bound", "as"),
        mode=doc.get("mode", "exact"),
        replicates=int(doc.get("replicates", 0)),
        seed=doc.get("seed"),
    )


def cmd_simulate(args) -> int:
    doc = _load_json(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenario = _scenario_from_json(doc)
    if isinstance(scenario, dict):
        spec = EstimatorSpec(
            scenario["estimator"]["kind"],
            np.asarray(scenario["estimator"]["contrast"], dtype=float),
        )
        rows = consistency_sweep(
            spec,
            np.asarray(scenario["base_y"], dtype=float),
            [int(n) for n in scenario["n_list"]],
        )
        with open(out / "trend.csv", "w") as fh:
            cols = list(rows[0].keys())
            fh.write(",".join(cols) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(row[c])) for c in cols) + "\n")
        print(f"wrote trend.csv to {out}")
        return 0
    report = run_scenario(scenario)
    ser.write_json(out / "report.json", asdict(report))
    print(json.dumps({"bias": report.bias, "empirical_variance": report.empirical_variance}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="designvar",
        description="Design-based variances, variance bounds, and bound estimators "
        "for linear estimators under enumerable experimental designs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="emit pi, p, d, and mask for a design spec")
    p.add_argument("spec", help="design spec JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--support-cap", type=int, default=None, dest="support_cap")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("bound", help="construct or verify a variance-bound matrix")
    p.add_argument("--d", required=True, help="design matrix CSV")
    p.add_argument("--mask", required=True, help="impossibility mask CSV")
    p.add_argument("--method", required=True, choices=["neyman", "as", "algm", "verify"])
    p.add_argument("--candidate", help="candidate bound CSV (verify only)")
    p.add_argument("--contrast", help="comma-separated contrast (neyman)")
    p.add_argument("--init", choices=["mask", "neyman"], default="mask",
                   help="initialization for the projection algorithm")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10000, dest="max_iter")
    p.add_argument("--k", type=int, default=2, help="arm count (default 2)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("estimate", help="point estimate plus bound estimate from one draw")
    p.add_argument("--design", required=True, help="design spec JSON")
    p.add_argument("--data", required=True, help="observed data CSV")
    p.add_argument("--covariates", help="covariate CSV (ols/wls)")
    p.add_argument("--estimator", required=True, choices=["ht", "cm", "hj", "ols", "wls"])
    p.add_argument("--contrast", required=True)
    p.add_argument("--weights", help='wls weights: "identity", "invpi", or a CSV path')
    p.add_argument("--bound", default="as", choices=["neyman", "as", "algm"])
    p.add_argument("--out", required=True, help="output report JSON path")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("compare", help="spectral comparison of designs or bounds")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--as", dest="as_what", required=True, choices=["designs", "bounds"])
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--k", type=int, default=2, help="arm count (default 2)")
    p.add_argument("--vectors", help="optional CSV sidecar for eigenvectors")
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="run a scenario or a consistency sweep")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(
            f"error: malformed JSON: line {exc.lineno} column {exc.colno}: {exc.msg}",
            file=sys.stderr,
        )
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
