"""Command line entry point: ``specsysid <subcommand> [options]``.

Exit status: 0 on success, 1 when ``selftest`` finds a failing criterion,
2 on invalid input, 3 on numerical failure (rank deficiency, overflow) and
64 for an unknown subcommand. Errors are printed to stdout as a JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from ._validation import NumericalOverflowError, RankDeficientError
from .concentration import (
    curse_of_dim_sweep,
    distance_mc,
    littlewood_offord,
    sigma1_mc,
    talagrand_constant,
)
from .covariance import build_sigma, expected_distance, frobenius_formula, moment_norm_bounds, trace_formulas
from .io import load_blocks, make_report, read_matrix_csv, to_jsonable, write_matrix_csv, write_report
from .ols import elementwise_error, inverse_cov_constraints, ols_estimate
from .power_bounds import certificate, global_threshold, lower_bound_witness
from .simulation import lipschitz_constant, simulate
from .spectral import build_structured, decompose, invariant_residuals, structured_decomposition

EXIT_OK, EXIT_FAILED, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 3, 64
SEED_ENV = "SPECSYSID_SEED"


def _jobs_default():
    return os.cpu_count() or 1


def _matrix_from_args(args, need_dec=False):
    """Return ``(A, dec_or_None)`` from ``--blocks`` or ``--matrix``."""
    if getattr(args, "blocks", None):
        blocks, basis = load_blocks(args.blocks)
        A = build_structured(blocks, basis)
        dec = structured_decomposition(blocks, basis) if need_dec else None
        return A, dec
    if getattr(args, "matrix", None):
        path = Path(args.matrix)
        if not path.exists():
            raise ValueError(f"matrix file {path} does not exist")
        A = read_matrix_csv(path)
        return A, (decompose(A) if need_dec else None)
    raise ValueError("one of --blocks or --matrix is required")


def _real_if_possible(A):
    A = np.asarray(A)
    return A.real if np.iscomplexobj(A) and np.all(A.imag == 0) else A


def _config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def _seed(args):
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError as exc:
            raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return args.seed


def _write_samples(path, values):
    if path:
        np.savetxt(path, np.asarray(values), fmt="%.17g", header="value", comments="")


def cmd_decompose(args):
    A, _ = _matrix_from_args(args)
    dec = decompose(A, cluster_tol=args.cluster_tol)
    result = {
        "eigen": dec.summary(),
        "orthogonality_defect": dec.orthogonality_defect,
        "reliable": dec.reliable,
        "residuals": invariant_residuals(A, dec),
        "notes": list(dec.notes),
    }
    return make_report("decompose", _config(args), result)


def cmd_power_bounds(args):
    if args.blocks:
        blocks, basis = load_blocks(args.blocks)
        cert = certificate(K=args.horizon, blocks=blocks, basis=basis)
    else:
        A, _ = _matrix_from_args(args)
        cert = certificate(A, K=args.horizon)
    th = cert.threshold
    result = {
        "horizon": cert.horizon,
        "exact_norms": cert.exact_norms,
        "records": cert.to_records(),
        "per_block_thresholds": cert.per_block_thresholds,
        "global_threshold": None if th is None else {
            "k_hat": th.k_hat, "gamma": th.gamma, "sound_k": th.sound_k,
            "verified": th.verified, "failures": th.failures, "warnings": th.warnings,
        },
        "operator_norm_bounds": cert.operator_norm_bounds,
        "orthogonality_defect": cert.orthogonality_defect,
        "violations": cert.violations,
        "eigen": cert.eigen,
    }
    claims = [{"claim": "sound bounds dominate exact norms", "ref": "block power-norm bounds",
               "passed": not cert.sound_violations()}]
    return make_report("power-bounds", _config(args), result, claims=claims)


def cmd_gamma(args):
    result = {}
    if args.blocks or args.matrix:
        A, dec = _matrix_from_args(args, need_dec=True)
        th = global_threshold(dec, A, check_span=args.check_span)
        result["threshold"] = {"k_hat": th.k_hat, "gamma": th.gamma, "sound_k": th.sound_k,
                               "verified": th.verified, "failures": th.failures,
                               "warnings": th.warnings}
    if args.dim is not None:
        if args.rho is None:
            raise ValueError("--dim requires --rho")
        w = lower_bound_witness(args.dim, args.rho)
        n = args.dim
        result["witness"] = {"n": n, "rho": args.rho, "vector": w.vector, "norm": w.norm,
                             "gamma": (n - 1) * np.log(n) / np.log(1 / args.rho)}
    if not result:
        raise ValueError("give --blocks/--matrix and/or --dim with --rho")
    return make_report("gamma", _config(args), result)


def cmd_simulate(args):
    A, _ = _matrix_from_args(args)
    A = _real_if_possible(A)
    seed = _seed(args)
    bundle = simulate(A, args.steps, seed=seed, stationary_start=args.stationary_start)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(out / "X_minus.csv", bundle.X_minus)
    write_matrix_csv(out / "X_plus.csv", bundle.X_plus)
    write_matrix_csv(out / "E.csv", bundle.E)
    write_matrix_csv(out / "A.csv", bundle.A)
    (out / "meta.json").write_text(json.dumps(to_jsonable(bundle.meta), indent=2, sort_keys=True) + "\n")
    return make_report("simulate", _config(args), {"directory": str(out), "meta": bundle.meta}, seed=seed)


def cmd_ols(args):
    d = Path(args.bundle)
    if not d.is_dir():
        raise ValueError(f"bundle directory {d} does not exist")
    Xm = read_matrix_csv(d / "X_minus.csv")
    Xp = read_matrix_csv(d / "X_plus.csv")
    A = read_matrix_csv(d / "A.csv") if (d / "A.csv").exists() else None
    E = read_matrix_csv(d / "E.csv") if (d / "E.csv").exists() else None
    data = (Xm, Xp, A, E)
    diag = ols_estimate(data)
    cons = inverse_cov_constraints(data)
    result = {
        "A_hat": diag.A_hat,
        "frob_error": diag.frob_error,
        "identity_error": diag.identity_error,
        "singular_values": diag.singular_values,
        "distances": diag.distances,
        "inv_cov": diag.inv_cov,
        "sandwich_neg": diag.sandwich_neg,
        "sandwich_mart": diag.sandwich_mart,
        "constraints": {"off_diagonal_sum": cons.off_diagonal_sum, "orthogonality": cons.orthogonality,
                        "diagonal": cons.diagonal, "threshold": cons.threshold,
                        "off_diagonal_values": cons.off_diagonal_values, "passed": cons.passed},
    }
    if E is not None:
        w = elementwise_error(data)
        result["walk"] = {"walk_residual": w.walk_residual, "normal_residual": w.normal_residual,
                          "null_residual": w.null_residual,
                          "frob_squared_expansion": w.frob_squared_expansion,
                          "frob_squared": w.frob_squared, "supports": w.supports}
    return make_report("ols", _config(args), result)


def cmd_covariance(args):
    S = build_sigma(args.length, args.lam)
    tr = trace_formulas(args.length, args.lam)
    fr = frobenius_formula(args.length, args.lam)
    result = {
        "trace": {"exact": tr.exact, "lower": tr.lower, "upper": tr.upper, "valid": tr.valid,
                  "c1": tr.c1, "c2": tr.c2, "c3": tr.c3, "stationary_slope": tr.stationary_slope},
        "frobenius": {"closed_form": fr.closed_form, "direct": fr.direct,
                      "relative_gap": fr.relative_gap, "slope": fr.slope,
                      "fitted_slope": fr.fitted_slope, "fitted_offset": fr.fitted_offset},
        "moment_bounds": moment_norm_bounds(S, args.kmax),
        "lambda_max": float(np.linalg.eigvalsh(S.matrix)[-1]),
    }
    if args.subspace:
        V = np.real(read_matrix_csv(args.subspace))
        val, cap = expected_distance(S, V)
        result["expected_distance"] = {"value": val, "cap": cap}
    return make_report("covariance", _config(args), result)


def _mc_report(name, args, rep, seed):
    _write_samples(getattr(args, "samples_csv", None), rep.samples)
    claims = [{"claim": c.name, "ref": name, "value": c.value, "reference": c.reference,
               "tolerance": c.tolerance, "verdict": c.verdict, "note": c.note} for c in rep.claims]
    body = rep.to_dict()
    body.pop("claims")
    return make_report(name, _config(args), body, seed=seed, claims=claims)


def cmd_distance_mc(args):
    seed = _seed(args)
    rep = distance_mc(args.length, args.dim, args.trials, seed, lam=args.lam,
                      v_seed=args.v_seed, jobs=args.jobs)
    return _mc_report("distance-mc", args, rep, seed)


def cmd_sigma1_mc(args):
    A, _ = _matrix_from_args(args)
    A = _real_if_possible(A)
    seed = _seed(args)
    rep = sigma1_mc(A, args.steps, args.trials, seed, jobs=args.jobs)
    const, regime = talagrand_constant(A, args.steps)
    rep.details["talagrand"] = {"constant": const, "regime": regime}
    rep.details["lipschitz_plus"] = lipschitz_constant(A, args.steps, data="plus")
    return _mc_report("sigma1-mc", args, rep, seed)


def cmd_lwo(args):
    if args.weights:
        a = [float(v) for v in args.weights.split(",")]
    elif args.ramp:
        a = list(range(1, args.ramp + 1))
    else:
        raise ValueError("give --weights or --ramp")
    seed = _seed(args)
    r = littlewood_offord(a, args.trials, seed)
    result = {"weights": a, "p_hat": r.p_hat, "exact": r.exact, "method": r.method,
              "band": r.band, "within": r.within, "p_hat_scaled": r.p_hat * len(a) ** 1.5}
    claims = [{"claim": "p_hat within 5/sqrt(T) of exact", "ref": "maximal atom probability",
               "verdict": "not-available" if r.within is None else ("pass" if r.within else "fail")}]
    return make_report("lwo", _config(args), result, seed=seed, claims=claims)


def _dims(text):
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def cmd_curse_sweep(args):
    rep = curse_of_dim_sweep(args.lam, _dims(args.dims), args.length)
    return _mc_report("curse-sweep", args, rep, None)


def cmd_selftest(args):
    seed = _seed(args)
    results, report = acceptance.run_selftest(seed=seed, jobs=args.jobs, repeat=not args.once,
                                              echo=lambda s: print(s, file=sys.stderr))
    report["config"] = _config(args)
    args.exit_status = EXIT_OK if all(r.passed for r in results) else EXIT_FAILED
    return report


def _add_matrix_source(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--blocks", help="block description JSON (inline or path)")
    g.add_argument("--matrix", help="matrix CSV path")


def _add_mc(p, trials):
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.add_argument("--samples-csv", dest="samples_csv")
    p.add_argument("--jobs", type=int, default=_jobs_default())


def build_parser():
    parser = argparse.ArgumentParser(prog="specsysid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="subcommand")

    p = sub.add_parser("decompose", help="invariant subspaces and projections")
    _add_matrix_source(p)
    p.add_argument("--cluster-tol", dest="cluster_tol", type=float, default=1e-7)
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("power-bounds", help="exact power norms and analytic bounds")
    _add_matrix_source(p)
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_power_bounds)

    p = sub.add_parser("gamma", help="closed-form horizon and lower-bound witness")
    _add_matrix_source(p, required=False)
    p.add_argument("--dim", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--check-span", dest="check_span", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("simulate", help="seeded trajectory and data matrices")
    _add_matrix_source(p)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.add_argument("--stationary-start", dest="stationary_start", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ols", help="least-squares diagnostics for a bundle directory")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ols)

    p = sub.add_parser("covariance", help="AR(1) covariance formulas")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--subspace")
    p.add_argument("--out")
    p.set_defaults(func=cmd_covariance)

    p = sub.add_parser("distance-mc", help="distance-to-subspace Monte Carlo")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--v-seed", dest="v_seed", type=int, default=0)
    _add_mc(p, 100_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_distance_mc)

    p = sub.add_parser("sigma1-mc", help="largest singular value Monte Carlo")
    _add_matrix_source(p)
    p.add_argument("--steps", type=int, required=True)
    _add_mc(p, 10_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sigma1_mc)

    p = sub.add_parser("lwo", help="maximal atom probability of signed sums")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--weights", help="comma separated weights")
    g.add_argument("--ramp", type=int, help="weights 1..N")
    _add_mc(p, 100_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lwo)

    p = sub.add_parser("curse-sweep", help="first-row variance growth with dimension")
    p.add_argument("--lambda", dest="lam", type=float, default=0.6)
    p.add_argument("--dims", default="2:12", help="range lo:hi or comma list")
    p.add_argument("--length", type=int, default=64)
    p.add_argument("--out")
    p.set_defaults(func=cmd_curse_sweep)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=_jobs_default())
    p.add_argument("--once", action="store_true", help="skip the determinism rerun")
    p.add_argument("--out")
    p.set_defaults(func=cmd_selftest)
    return parser


def _error(kind, message, status, **extra):
    print(json.dumps({"error": {"type": kind, "message": message, **to_jsonable(extra)}}))
    return status


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    commands = set(parser._subparsers._group_actions[0].choices)
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is None and not any(a in ("-h", "--help") for a in argv):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    if first is not None and first not in commands:
        print(f"specsysid: unknown subcommand {first!r}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        report = args.func(args)
    except RankDeficientError as exc:
        return _error("rank", str(exc), EXIT_NUMERICAL, sigma_min=exc.sigma_min, sigma_max=exc.sigma_max)
    except (NumericalOverflowError, OverflowError) as exc:
        return _error("overflow", str(exc), EXIT_NUMERICAL,
                      last_finite=getattr(exc, "last_finite", None))
    except ArithmeticError as exc:
        return _error("numerical", str(exc), EXIT_NUMERICAL)
    except (ValueError, KeyError, OSError) as exc:
        return _error("validation", str(exc), EXIT_VALIDATION)
    out = getattr(args, "out", None)
    if args.command == "simulate":
        out = Path(args.out) / "report.json"
    write_report(out, report)
    return getattr(args, "exit_status", EXIT_OK)


if __name__ == "__main__":
    sys.exit(main())
