"""Acceptance suite shared by ``specsysid selftest`` and the test-suite.

Each criterion returns a :class:`CriterionResult` whose ``details`` are fully
deterministic given the master seed, so two runs can be compared verbatim.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .concentration import (
    arma_covariance_mc,
    curse_of_dim_sweep,
    distance_mc,
    littlewood_offord,
    max_atom_enumeration,
    max_atom_integer,
    sigma1_mc,
)
from .covariance import build_sigma, exact_trace, moment_norm_bounds
from .io import dumps, make_report, strip_volatile
from .ols import (
    elementwise_error,
    error_sandwiches,
    inverse_cov_constraints,
    negative_second_moment,
    ols_estimate,
)
from .power_bounds import (
    VIOLATION_RTOL,
    binomial_sum_bound,
    geometric_sum_bound,
    global_threshold,
    log_power_norms,
    lower_bound_witness,
    power_shift_bound,
)
from .simulation import simulate
from .spectral import (
    build_structured,
    jordan_block,
    random_orthogonal,
    random_unitary,
    structured_decomposition,
)

DEFAULT_SEED = 20240917
GRID_MODULI = (0.3, 0.5, 0.7, 0.9, 0.99)
GRID_SIZES = range(1, 7)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _below(bound, exact):
    return bound < exact * (1 - VIOLATION_RTOL)


@_timed
def power_bound_soundness(seed=DEFAULT_SEED, horizon=200):
    """Sound block bounds never fall below the exact norm; printed variants are enumerated."""
    sound = {"binomial_sum": 0, "geometric_corrected": 0, "power_shift_corrected": 0}
    printed = []
    for r in GRID_MODULI:
        for m in GRID_SIZES:
            exact = np.exp(log_power_norms(jordan_block(r, m), horizon))
            for k in range(1, horizon + 1):
                x = exact[k - 1]
                vals = {
                    "binomial_sum": binomial_sum_bound(r, m, k),
                    "geometric_corrected": geometric_sum_bound(r, m, k),
                    "power_shift_corrected": power_shift_bound(r, m, k),
                }
                for key, v in vals.items():
                    sound[key] += int(_below(v, x))
                for key, fn in (("geometric_as_printed", geometric_sum_bound),
                                ("power_shift_as_printed", power_shift_bound)):
                    v = fn(r, m, k, as_printed=True)
                    if _below(v, x):
                        printed.append((key, r, m, k))
    known = ("geometric_as_printed", 0.5, 2, 1) in printed
    ok = all(v == 0 for v in sound.values()) and known
    by_name = {}
    for key, *_ in printed:
        by_name[key] = by_name.get(key, 0) + 1
    return CriterionResult(
        1, "power-bound soundness", ok,
        f"sound violations {sound}; printed-variant violations {by_name}",
        {"sound_violations": sound, "printed_violations": by_name,
         "printed_examples": [list(p) for p in printed[:10]], "known_case_recorded": known},
    )


def threshold_grid():
    """Structured stable matrices with mutually orthogonal invariant subspaces."""
    grid = [(f"J{m}({r})", [(r, m)]) for r in GRID_MODULI for m in GRID_SIZES]
    grid.append(("diag(J2(0.5),J3(0.7))", [(0.5, 2), (0.7, 3)]))
    grid.append(("diag(J2(0.5),0.95)", [(0.5, 2), (0.95, 1)]))
    return grid


@_timed
def threshold_theorem(seed=DEFAULT_SEED):
    """Closed-form horizon claim on the grid, plus the lower-bound witness."""
    failures, sound_fail, rows = [], [], []
    for label, blocks in threshold_grid():
        dec = structured_decomposition(blocks)
        A = build_structured(blocks)
        res = global_threshold(dec, A)
        rows.append({"matrix": label, "k_hat": res.k_hat, "sound_k": res.sound_k})
        if dec.orthogonality_defect <= 1e-8 and not res.verified:
            failures.append({"matrix": label, "k_hat": res.k_hat,
                             "first_failure": list(res.failures[0]),
                             "count": len(res.failures)})
        norms = np.exp(log_power_norms(A, res.sound_k + 10))
        if np.any(norms[res.sound_k:] >= 1.0):
            sound_fail.append(label)
    witness_fail = []
    rhos = tuple(round(0.1 * i, 1) for i in range(1, 10)) + (0.99,)
    for n in range(2, 51):
        for rho in rhos:
            w = lower_bound_witness(n, rho)
            direct = np.linalg.norm(np.linalg.matrix_power(jordan_block(rho, n), n - 1)[:, -1]) if n <= 12 else w.norm
            if not (w.norm > 1.0 and math.isclose(direct, w.norm, rel_tol=1e-10)):
                witness_fail.append((n, rho))
    ok = not failures and not witness_fail
    return CriterionResult(
        2, "threshold theorem", ok,
        f"{len(failures)} grid matrices violate ||A^k|| < 1 beyond k_hat; "
        f"witness failures {len(witness_fail)}; sound per-block threshold failures {len(sound_fail)}",
        {"violations": failures, "witness_failures": witness_fail,
         "sound_threshold_failures": sound_fail, "thresholds": rows},
    )


def ols_families():
    return {
        "diag": np.diag([0.9, 0.5, 0.3]),
        "J2": jordan_block(0.5, 2),
        "J5": jordan_block(0.9, 5),
        "mixed": build_structured([(0.5, 2), (0.3, 1), (0.8, 2)]),
    }


@_timed
def ols_exactness(seed=DEFAULT_SEED, bundles=100):
    """Exact error identities on seeded single-trajectory fits."""
    fam = ols_families()
    combos = [(name, N) for name in fam for N in (50, 200)]
    worst = {"frob_identity": 0.0, "walk": 0.0, "normal": 0.0, "null": 0.0,
             "expansion": 0.0, "neg_moment": 0.0, "constraints_over_threshold": 0.0}
    fails, sign_max = [], -np.inf
    for b in range(bundles):
        name, N = combos[b % len(combos)]
        bundle = simulate(fam[name], N, seed=seed + 3 + b)
        d = ols_estimate(bundle)
        w = elementwise_error(bundle)
        lhs, rhs = negative_second_moment(bundle.X_minus)
        c = inverse_cov_constraints(bundle)
        try:
            error_sandwiches(bundle)
            ordered = True
        except AssertionError:
            ordered = False
        r = {
            "frob_identity": abs(d.frob_error - d.identity_error) / d.identity_error,
            "walk": w.walk_residual,
            "normal": w.normal_residual,
            "null": w.null_residual,
            "expansion": abs(w.frob_squared_expansion - w.frob_squared) / w.frob_squared,
            "neg_moment": abs(lhs - rhs) / lhs,
            "constraints_over_threshold": max(c.off_diagonal_sum, c.orthogonality, c.diagonal) / c.threshold,
        }
        for k, v in r.items():
            worst[k] = max(worst[k], float(v))
        sign_max = max(sign_max, float(np.max(c.off_diagonal_values)))
        ok = (r["frob_identity"] <= 1e-8 and r["walk"] <= 1e-10 and r["normal"] <= 1e-10
              and r["null"] <= 1e-10 and r["expansion"] <= 1e-8 and r["neg_moment"] <= 1e-9
              and c.passed and ordered)
        if not ok:
            fails.append({"bundle": b, "family": name, "N": N, **r, "sandwich_ordered": ordered})
    return CriterionResult(
        3, "OLS exactness", not fails,
        f"{bundles - len(fails)}/{bundles} bundles satisfy every identity",
        {"worst": worst, "failures": fails, "max_off_diagonal_sum": sign_max},
    )


@_timed
def basis_invariance(seed=DEFAULT_SEED):
    """Unitary conjugation leaves power norms and the OLS error unchanged."""
    worst_norm, worst_ols = 0.0, 0.0
    cases = [[(0.5, 2), (0.3, 1)], [(0.9, 3)], [(0.7, 2), (0.95, 1), (0.2 + 0.3j, 2)]]
    for idx, blocks in enumerate(cases):
        A = build_structured(blocks)
        n = A.shape[0]
        for U in (random_orthogonal(n, seed + idx), random_unitary(n, seed + 100 + idx)):
            B = U @ A @ U.conj().T
            a = log_power_norms(A, 60)
            b = log_power_norms(B, 60)
            worst_norm = max(worst_norm, float(np.max(np.abs(np.expm1(b - a)))))
            bundle = simulate(A, 120, seed=seed + 7 + idx)
            rot = simulate(B, 120, noise=U @ bundle.E)
            e0 = ols_estimate(bundle).identity_error
            e1 = ols_estimate(rot)
            worst_ols = max(worst_ols, abs(e1.identity_error - e0) / e0,
                            abs(e1.frob_error - e0) / e0)
    ok = worst_norm <= 1e-8 and worst_ols <= 1e-8
    return CriterionResult(
        4, "basis invariance", ok,
        f"max relative change: power norms {worst_norm:.2e}, OLS error {worst_ols:.2e}",
        {"power_norm": worst_norm, "ols_error": worst_ols},
    )


@_timed
def covariance_formulas(seed=DEFAULT_SEED, trials=100_000):
    """Exact AR(1) covariance against Monte Carlo, trace formulas and moment brackets."""
    _, _, dev = arma_covariance_mc(6, 0.5, trials, seed + 50)
    band = 5.0 / math.sqrt(trials)
    tr_a = build_sigma(3, 0.5).trace
    tr_b = exact_trace(3, 0.5)
    S = build_sigma(50, 0.9)
    lmax = float(np.linalg.eigvalsh(S.matrix)[-1])
    br = moment_norm_bounds(S, 8)
    contain = all(lo <= lmax * (1 + 1e-10) and lmax <= hi * (1 + 1e-10) for lo, hi in br)
    mono = all(br[k + 1][1] <= br[k][1] * (1 + 1e-10) for k in range(len(br) - 1))
    ok = dev <= band and tr_a == 3.5625 and tr_b == 3.5625 and contain and mono
    return CriterionResult(
        5, "covariance formulas", ok,
        f"MC deviation {dev:.2e} (band {band:.2e}); traces {tr_a}, {tr_b}; brackets contain lambda_max: {contain}",
        {"mc_max_normalized_deviation": dev, "band": band, "trace_matrix": tr_a, "trace_sum": tr_b,
         "lambda_max": lmax, "brackets": [list(b) for b in br], "upper_monotone": mono},
    )


@_timed
def distance_concentration(seed=DEFAULT_SEED, trials=100_000, jobs=1):
    """Squared distance to a random subspace: white and AR(1) rows."""
    reps = [
        ("white(10,3)", distance_mc(10, 3, trials, seed + 60, jobs=jobs)),
        ("white(100,10)", distance_mc(100, 10, trials, seed + 61, jobs=jobs)),
        ("arma(0.5;10,3)", distance_mc(10, 3, trials, seed + 62, lam=0.5, jobs=jobs)),
    ]
    asserted = {"mean", "variance"}
    ok = all(c.verdict == "pass" for _, r in reps for c in r.claims if c.name in asserted)
    details = {label: {c.name: [c.value, c.reference, c.tolerance, c.verdict] for c in r.claims}
               for label, r in reps}
    return CriterionResult(6, "distance concentration", ok,
                           "; ".join(f"{lab}: mean {r.mean:.4f}" for lab, r in reps), details)


@_timed
def sigma1_behaviour(seed=DEFAULT_SEED, trials=10_000, jobs=1):
    """Largest singular value of the data matrix against Gordon and Lipschitz tail bounds."""
    reps = [
        ("0", sigma1_mc(np.zeros((5, 5)), 100, trials, seed + 70, jobs=jobs)),
        ("J5(0.9)", sigma1_mc(jordan_block(0.9, 5), 100, trials, seed + 71, jobs=jobs)),
    ]
    asserted = {"mean_below_lipschitz_gordon", "tail_delta_1", "tail_delta_2", "tail_delta_3"}
    ok = all(c.verdict == "pass" for _, r in reps for c in r.claims if c.name in asserted)
    details = {label: {c.name: [c.value, c.reference, c.verdict] for c in r.claims}
               for label, r in reps}
    return CriterionResult(7, "sigma_1 behaviour", ok,
                           "; ".join(f"A={lab}: mean {r.mean:.4g}" for lab, r in reps), details)


@_timed
def littlewood_offord_check(seed=DEFAULT_SEED, trials=100_000):
    """Exact atom probabilities by enumeration and Monte-Carlo agreement."""
    e1 = max_atom_enumeration([1, 1, 1, 1])
    e2 = max_atom_enumeration([1, 2, 4, 8])
    r1 = littlewood_offord([1, 1, 1, 1], trials, seed + 80)
    r2 = littlewood_offord([1, 2, 4, 8], trials, seed + 81)
    ramp = {}
    for N in (20, 40, 80):
        r = littlewood_offord(np.arange(1, N + 1), trials, seed + 82 + N)
        ramp[str(N)] = {"p_hat_scaled": r.p_hat * N**1.5,
                        "exact_scaled": max_atom_integer(range(1, N + 1)) * N**1.5,
                        "within": bool(r.within)}
    ok = e1 == 0.375 and e2 == 1 / 16 and r1.within and r2.within
    return CriterionResult(
        8, "Littlewood-Offord", bool(ok),
        f"exact {e1}, {e2}; p_hat {r1.p_hat:.4f}, {r2.p_hat:.4f} (band {r1.band:.3g})",
        {"exact": [e1, e2], "p_hat": [r1.p_hat, r2.p_hat], "band": r1.band,
         "ramp_scaled_not_asserted": ramp},
    )


@_timed
def curse_of_dimensionality(seed=DEFAULT_SEED):
    """Exact first-row variance bracketed per covariate; fitted base at least 4 lam^2."""
    rep = curse_of_dim_sweep(0.6, range(2, 13), 64)
    ok = rep.claim("sandwich_violations").verdict == "pass" and rep.claim("fitted_log_base").verdict == "pass"
    base = rep.details["fitted_base"]
    return CriterionResult(
        9, "curse-of-dimensionality sweep", ok,
        f"sandwich violations {rep.claim('sandwich_violations').value}; fitted base {base:.4f} vs 4*lam^2 = 1.44",
        {"fitted_base": base, "std_base": rep.claim("std_base").value,
         "rows": rep.details["rows"], "violations": rep.details["violations"]},
    )


CRITERIA = (
    power_bound_soundness,
    threshold_theorem,
    ols_exactness,
    basis_invariance,
    covariance_formulas,
    distance_concentration,
    sigma1_behaviour,
    littlewood_offord_check,
    curse_of_dimensionality,
)


def run_criteria(seed=DEFAULT_SEED, jobs=1):
    out = []
    for fn in CRITERIA:
        if fn in (distance_concentration, sigma1_behaviour):
            out.append(fn(seed=seed, jobs=jobs))
        else:
            out.append(fn(seed=seed))
    return out


def selftest_report(results, seed, config=None):
    claims = [{"criterion": r.number, "name": r.name, "passed": r.passed,
               "summary": r.summary, "ref": r.name} for r in results]
    body = {str(r.number): r.details for r in results}
    return make_report("selftest", config or {"seed": seed}, body, seed=seed, claims=claims)


def determinism(report_a, report_b):
    same = dumps(strip_volatile(report_a)) == dumps(strip_volatile(report_b))
    return CriterionResult(10, "determinism", same,
                           "two runs produce identical reports" if same else "reports differ")


def format_line(r):
    status = "PASS" if r.passed else "FAIL"
    return f"[{status}] criterion {r.number:2d} {r.name}: {r.summary} ({r.seconds:.1f}s)"


def run_selftest(seed=DEFAULT_SEED, jobs=1, repeat=True, echo=print):
    """Run every criterion (twice when ``repeat``) and return ``(results, report)``."""
    results = run_criteria(seed, jobs)
    for r in results:
        echo(format_line(r))
    report = selftest_report(results, seed)
    if repeat:
        again = selftest_report(run_criteria(seed, jobs), seed)
        det = determinism(report, again)
        results.append(det)
        echo(format_line(det))
        report["claims"].append({"criterion": 10, "name": det.name, "passed": det.passed,
                                 "summary": det.summary, "ref": det.name})
    return results, report
