"""Monte-Carlo experiments for the probabilistic statements about trajectory data.

Seeding rule
------------
Trials are processed in fixed chunks of :data:`CHUNK` trials. Chunk ``c`` uses
``Generator(PCG64(SeedSequence(entropy=seed, spawn_key=(c,))))``, so results
depend only on ``(seed, trials)`` and not on how many worker threads run.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from ._validation import check_positive_int, check_square_matrix, maybe_real
from .covariance import build_sigma, exact_trace, orthonormal_complement_projector
from .simulation import covariate_variance, lipschitz_constant, log_covariate_variance

CHUNK = 10_000
QUANTILES = (1, 5, 50, 95, 99)
SE_BAND = 3.0


def chunk_rng(seed, chunk):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,))))


def run_chunks(fn, trials, seed, jobs=1):
    """Evaluate ``fn(rng, size)`` over all chunks and concatenate in chunk order."""
    trials = check_positive_int(trials, "trials")
    sizes = [min(CHUNK, trials - s) for s in range(0, trials, CHUNK)]
    tasks = [(chunk_rng(seed, c), size) for c, size in enumerate(sizes)]
    if jobs and jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda t: fn(*t), tasks))
    else:
        parts = [fn(*t) for t in tasks]
    return np.concatenate(parts)


@dataclass
class Claim:
    name: str
    value: float
    reference: float | None
    tolerance: float | None
    verdict: str  # "pass", "fail" or "not-asserted"
    note: str = ""


@dataclass
class ConcentrationReport:
    experiment: str
    trials: int
    seed: int
    mean: float
    variance: float
    quantiles: dict
    claims: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def passed(self):
        return all(c.verdict != "fail" for c in self.claims)

    def claim(self, name):
        for c in self.claims:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        d = asdict(self)
        d.pop("samples")
        return d


def _summary(name, x, trials, seed):
    return ConcentrationReport(
        experiment=name,
        trials=trials,
        seed=seed,
        mean=float(np.mean(x)),
        variance=float(np.var(x, ddof=1)),
        quantiles={str(q): float(v) for q, v in zip(QUANTILES, np.percentile(x, QUANTILES))},
        samples=x,
    )


def _within(name, value, reference, se, band=SE_BAND, note=""):
    tol = band * se
    ok = abs(value - reference) <= tol
    return Claim(name, float(value), float(reference), float(tol), "pass" if ok else "fail", note)


def _var_se(x):
    """Standard error of the sample variance from the fourth central moment."""
    c = x - x.mean()
    m2 = np.mean(c**2)
    m4 = np.mean(c**4)
    return math.sqrt(max(m4 - m2**2, 0.0) / x.size)


def distance_mc(N, n, trials, seed, lam=None, v_seed=0, jobs=1, tail_deltas=(1.0, 2.0, 3.0)):
    """Squared distance of a random row to a fixed random ``(n-1)``-dimensional subspace.

    The row is white (``lam=None``) or an AR(1) trajectory of length ``N``.
    ``d^2`` is sampled as the quadratic form ``z^T S^{1/2} P S^{1/2} z``;
    for AR rows an independent sample is also drawn by running the recursion,
    and the two samples are compared with a two-sample KS test.
    """
    N = check_positive_int(N, "N")
    n = check_positive_int(n, "n")
    if n - 1 >= N:
        raise ValueError("need n - 1 < N")
    V = np.random.Generator(np.random.PCG64(v_seed)).standard_normal((N, n - 1))
    P = orthonormal_complement_projector(V, N)
    if lam is None:
        S = np.eye(N)
        root = np.eye(N)
    else:
        cov = build_sigma(N, lam)
        S, root = cov.matrix, cov.sqrt()
    M = root @ P @ root

    def quad(rng, size):
        Z = rng.standard_normal((size, N))
        return np.einsum("ti,ij,tj->t", Z, M, Z)

    x = run_chunks(quad, trials, seed, jobs)
    rep = _summary("distance-mc", x, trials, seed)
    se = math.sqrt(rep.variance / trials)
    codim = N - n + 1
    expected = float(np.trace(S @ P))
    rep.claims.append(_within("mean", rep.mean, expected, se))
    if lam is None:
        rep.claims.append(_within("variance", rep.variance, 2.0 * codim, _var_se(x)))
    else:

        def recursion(rng, size):
            W = rng.standard_normal((size, N))
            X = np.zeros((size, N))
            prev = np.zeros(size)
            for i in range(N):
                prev = lam * prev + W[:, i]
                X[:, i] = prev
            return np.sum((X @ P) * X, axis=1)

        alt = run_chunks(recursion, trials, seed + 1, jobs)
        ks = stats.ks_2samp(x, alt)
        crit = 1.63 * math.sqrt(2.0 / trials)  # 1% two-sample critical value
        rep.claims.append(Claim("ks_recursion_vs_quadratic", float(ks.statistic), 0.0, crit,
                                "pass" if ks.statistic <= crit else "fail"))
    cap = float(np.linalg.norm(S) * math.sqrt(codim))
    rep.claims.append(Claim("mean_below_frobenius_cap", expected, cap, None,
                            "pass" if expected <= cap else "fail"))
    sd = math.sqrt(rep.variance)
    tails, fitted = {}, []
    for d in tail_deltas:
        p = float(np.mean(np.abs(x - rep.mean) >= d * sd))
        tails[str(d)] = p
        if p > 0:
            fitted.append(-math.log(p) / d**2)
    rep.claims.append(Claim("tail_exponent", float(min(fitted)) if fitted else float("inf"),
                            None, None, "not-asserted", "fitted c in P(|d2-mean| >= delta sd) ~ exp(-c delta^2)"))
    rep.details = {"N": N, "n": n, "lambda": lam, "v_seed": v_seed, "expected_mean": expected,
                   "codimension": codim, "tail_frequencies": tails}
    return rep


def _batch_states(A, size, N, rng):
    n = A.shape[0]
    W = rng.standard_normal((size, N, n))
    X = np.zeros((size, n, N), dtype=np.result_type(A, float))
    prev = np.zeros((size, n), dtype=X.dtype)
    AT = A.T
    for i in range(1, N):
        prev = prev @ AT + W[:, i - 1]
        X[:, :, i] = prev
    return X


def sigma1_mc(A, N, trials, seed, jobs=1, deltas=(1.0, 2.0, 3.0)):
    """Largest singular value of ``X_minus`` versus its Lipschitz deviation bounds."""
    A = maybe_real(check_square_matrix(A))
    N = check_positive_int(N, "N")
    n = A.shape[0]
    L = lipschitz_constant(A, N)

    def draw(rng, size):
        X = _batch_states(A, size, N, rng)
        return np.linalg.svd(X, compute_uv=False)[:, 0]

    x = run_chunks(draw, trials, seed, jobs)
    rep = _summary("sigma1-mc", x, trials, seed)
    for d in deltas:
        freq = float(np.mean(np.abs(x - rep.mean) >= math.sqrt(2.0) * d * L))
        bound = 2.0 * math.exp(-d * d)
        rep.claims.append(Claim(f"tail_delta_{d:g}", freq, bound, None,
                                "pass" if freq <= bound else "fail"))
    gordon = L * math.sqrt(n) * (math.sqrt(N) + math.sqrt(n))
    rep.claims.append(Claim("mean_below_lipschitz_gordon", rep.mean, gordon, None,
                            "pass" if rep.mean <= gordon else "fail"))
    cap = L * (math.sqrt(2.0) + math.sqrt(n * N) + n)
    violations = int(np.sum(x > cap))
    rep.claims.append(Claim("cap_violations", violations, 0, None,
                            "pass" if violations == 0 else "fail"))
    if np.allclose(A, 0):
        shifted = math.sqrt(N) + math.sqrt(n)
        rep.claims.append(Claim("gaussian_gordon", rep.mean, shifted, None,
                                "pass" if rep.mean <= shifted else "fail"))
    if n == 1:
        lam = complex(A[0, 0]).real
        sq = x**2
        ref = exact_trace(N - 1, lam) if N > 1 and 0 < abs(lam) < 1 else float(N - 1)
        rep.claims.append(_within("mean_sigma1_squared", float(sq.mean()), ref,
                                  float(sq.std(ddof=1) / math.sqrt(trials))))
        rep.claims.append(Claim("mean_sigma1_then_squared", rep.mean**2, ref, None, "not-asserted",
                                "Jensen gap; only E[sigma1^2] is exact"))
    rep.details = {"N": N, "n": n, "lipschitz": L}
    return rep


def talagrand_constant(A, N, tol=1e-12):
    """Transport-inequality constant of the trajectory law, by norm regime.

    Returns ``(constant, regime)`` with regimes ``"contractive"`` (``1/(1-||A||)^2``),
    ``"marginal"`` (``N(N+1)``) and ``"norm-unstable"`` (``||A||^N N``).
    """
    A = check_square_matrix(A)
    N = check_positive_int(N, "N")
    norm = float(np.linalg.norm(A, 2))
    if abs(norm - 1.0) <= tol:
        return float(N * (N + 1)), "marginal"
    if norm < 1.0:
        return 1.0 / (1.0 - norm) ** 2, "contractive"
    return float(math.exp(N * math.log(norm)) * N), "norm-unstable"


def _group_max(sums, tol):
    s = np.sort(sums)
    breaks = np.nonzero(np.diff(s) > tol)[0]
    edges = np.concatenate(([0], breaks + 1, [s.size]))
    return int(np.max(np.diff(edges)))


def max_atom_enumeration(a, tol=1e-9, max_n=20):
    a = np.asarray(a, dtype=float)
    if a.size > max_n:
        raise ValueError(f"enumeration limited to N <= {max_n}")
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=a.size)))
    return _group_max(signs @ a, tol) / 2.0**a.size


def max_atom_integer(a):
    """Exact maximal atom probability for integer weights by convolving counts."""
    a = [abs(int(v)) for v in a]
    total = sum(a)
    counts = np.zeros(2 * total + 1, dtype=object)
    counts[total] = 1
    for v in a:
        new = np.zeros_like(counts)
        new[: counts.size - v] += counts[v:]
        new[v:] += counts[: counts.size - v]
        counts = new
    return float(max(counts) / 2 ** len(a))


@dataclass(frozen=True)
class AtomResult:
    p_hat: float
    exact: float | None
    method: str | None
    band: float
    within: bool | None


def littlewood_offord(a, trials, seed, tol=1e-9):
    """Empirical and (when available) exact maximal atom probability of ``<x, a>``."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0 or np.any(a == 0):
        raise ValueError("weights must be a non-empty vector of nonzero entries")
    trials = check_positive_int(trials, "trials")
    rng = np.random.Generator(np.random.PCG64(seed))
    signs = rng.integers(0, 2, size=(trials, a.size), dtype=np.int8) * 2 - 1
    integer = np.all(a == np.round(a))
    sums = signs @ a
    if integer:
        _, counts = np.unique(np.round(sums).astype(np.int64), return_counts=True)
        p_hat = counts.max() / trials
    else:
        p_hat = _group_max(sums, tol) / trials
    exact, method = None, None
    N = a.size
    if np.all(np.abs(a) == abs(a[0])) and N % 2 == 0:
        exact, method = math.comb(N, N // 2) / 2.0**N, "central-binomial"
    elif integer:
        exact, method = max_atom_integer(a), "integer-convolution"
    elif N <= 20:
        exact, method = max_atom_enumeration(a, tol), "enumeration"
    band = 5.0 / math.sqrt(trials)
    within = None if exact is None else abs(p_hat - exact) <= band
    return AtomResult(float(p_hat), exact, method, band, within)


def _log_central_binomial_lower(p):
    return p * math.log(4.0) - 0.5 * math.log(math.pi * (p + 1.0 / 3.0))


def _log_central_binomial_upper(p):
    return p * math.log(4.0) - 0.5 * math.log(math.pi * (p + 0.25))


def _log_falling_square_lower(q, m):
    """Lower bound on ``log prod_{p<m} (1 - p/q)^2`` (exact product when ``m-1 > q/2``)."""
    if m <= 1:
        return 0.0
    if m - 1 <= q / 2:
        return -m * (m - 1) / q - (m - 1) * m * (2 * m - 1) / (3.0 * q * q)
    return 2.0 * sum(math.log1p(-p / q) for p in range(1, m))


def covariate_variance_bounds(lam, n, i):
    """``(log_lower, log_upper)`` bracketing ``log Var([x_i]_1)`` for ``A = J_n(lam)``.

    Both split the sum over ``l`` at ``i - n``: the early terms use the
    ``(q^m/m!)^2`` form of ``binom(q, m)^2`` with exponential estimates of the
    falling-factorial correction, the last ``min(i, n)`` terms use central
    binomial estimates ``4^p/sqrt(pi(p + c))``.
    """
    lr = math.log(lam)
    lo_terms, hi_terms = [], []
    for l in range(1, i - n + 1):
        q = i - l
        for m in range(n):
            base = 2 * m * math.log(q) - 2 * math.lgamma(m + 1)
            lo_terms.append(base + _log_falling_square_lower(q, m) + 2 * (i - l - m) * lr)
            hi_terms.append(base - m * (m - 1) / q + 2 * (i - n + 1 - l) * lr)
    for p in range(min(i, n)):
        lo_terms.append(_log_central_binomial_lower(p) + 2 * p * lr)
        hi_terms.append(_log_central_binomial_upper(p) - 2 * lr)
    return float(logsumexp(lo_terms)), float(logsumexp(hi_terms))


def curse_of_dim_sweep(lam, n_range, N):
    """Total first-row variance of ``X_minus`` for ``A = J_n(lam)`` across ``n``.

    For each ``n`` sums the exact variances of ``[x_i]_1``, ``i = 1..N-1``, in
    log space and brackets every covariate with
    :func:`covariate_variance_bounds`. The slope of the log total against
    ``n`` is fitted and compared with ``log(4 lam^2)``.
    """
    lam = float(lam)
    n_range = [check_positive_int(v, "n") for v in n_range]
    if not 0.5 < lam < 1.0:
        raise ValueError("lambda must lie in (1/2, 1)")
    if N <= max(n_range):
        raise ValueError("N must exceed every n")
    rows, violations = [], []
    for n in n_range:
        logs, lows, highs = [], [], []
        for i in range(1, N):
            lv = log_covariate_variance(lam, n, i)
            lo, hi = covariate_variance_bounds(lam, n, i)
            logs.append(lv)
            lows.append(lo)
            highs.append(hi)
            slack = 1e-12 * max(1.0, abs(lv))
            if not (lo <= lv + slack and lv <= hi + slack):
                violations.append({"n": n, "i": i, "log_lower": lo, "log_exact": lv, "log_upper": hi})
        rows.append({
            "n": n,
            "log_total": float(logsumexp(logs)),
            "log_total_lower": float(logsumexp(lows)),
            "log_total_upper": float(logsumexp(highs)),
        })
    totals = np.array([r["log_total"] for r in rows])
    ns = np.array(n_range, dtype=float)
    slope = float(np.polyfit(ns, totals, 1)[0]) if len(ns) > 1 else float("nan")
    ref = math.log(4 * lam * lam)
    rep = ConcentrationReport(
        experiment="curse-sweep", trials=0, seed=0,
        mean=float(np.mean(totals)), variance=float(np.var(totals)) if len(totals) > 1 else 0.0,
        quantiles={},
    )
    rep.claims.append(Claim("sandwich_violations", len(violations), 0, None,
                            "pass" if not violations else "fail"))
    rep.claims.append(Claim("fitted_log_base", slope, ref, None,
                            "pass" if slope >= ref else "fail", "variance base exp(slope) vs 4 lam^2"))
    rep.claims.append(Claim("std_base", math.exp(slope / 2), math.e, None, "not-asserted",
                            "fitted growth base of the standard deviation, compared with e"))
    rep.details = {"lambda": lam, "N": N, "rows": rows, "violations": violations[:20],
                   "fitted_base": math.exp(slope)}
    return rep


def arma_covariance_mc(N, lam, trials, seed, jobs=1):
    """Empirical covariance of ``x_1..x_N`` next to the exact matrix.

    Returns ``(empirical, exact, max_normalized_deviation)``; deviations are
    scaled by ``sqrt(S_kk S_jj)`` so the ``5/sqrt(T)`` band is uniform.
    """
    exact = build_sigma(N, lam).matrix

    def draw(rng, size):
        W = rng.standard_normal((size, N))
        X = np.zeros((size, N))
        prev = np.zeros(size)
        for i in range(N):
            prev = lam * prev + W[:, i]
            X[:, i] = prev
        return X

    X = run_chunks(draw, trials, seed, jobs)
    emp = X.T @ X / trials
    sd = np.sqrt(np.diag(exact))
    dev = float(np.max(np.abs(emp - exact) / np.outer(sd, sd)))
    return emp, exact, dev


def scalar_first_row_variance(lam, N):
    """Total variance of ``x_1..x_{N-1}`` for a scalar chain (the ``n = 1`` case)."""
    return float(sum(covariate_variance(lam, 1, i) for i in range(1, N)))


__all__ = [
    "AtomResult",
    "Claim",
    "ConcentrationReport",
    "arma_covariance_mc",
    "covariate_variance_bounds",
    "curse_of_dim_sweep",
    "distance_mc",
    "littlewood_offord",
    "max_atom_enumeration",
    "max_atom_integer",
    "run_chunks",
    "scalar_first_row_variance",
    "sigma1_mc",
    "talagrand_constant",
]
