"""Monte-Carlo checks of the probabilistic statements about sphere matrices, and
the prediction-error experiment.

Every suite takes a :class:`TrialPlan`; trial ``i`` draws its sphere matrix
from substream ``(master_seed, i)`` and any further randomness from
``(master_seed, i, k)`` for a fixed small ``k`` per purpose, so a report is a
deterministic function of the plan.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import augment, lasso
from .errors import Exhausted, Infeasible, NotConverged, OutOfRange
from .gamma import (
    KAPPA_DEFAULT,
    GammaParams,
    abs_dots,
    gamma_estimate,
    greedy_outer_set,
    outer_set_size,
)
from .matrix import (
    DesignMatrix,
    IndexSet,
    coherence,
    coherence_sigma_bounds,
    concat,
    spectral_norm,
    submatrix_extremes,
)
from .sphere import DotLaw, dot_cdf, random_unit_vector, rng_for, sample_sphere_matrix, sub_seed

DEFAULT_THRESHOLDS = {
    "order_stat_exceedance": 0.01,
    "gamma_fail_fraction": 0.0,
    "coherence_max": 1.0 - 1e-9,
    "norm_multiple": 1.0,
    "norm_margin": 0.5,
    "extraction_confidence": 0.99,
    "probability_slack": 0.05,
    "ci_level": 0.95,
}

# substream keys below the trial index
_VEC, _GAMMA, _DRAW, _NOISE, _AUG = 1, 2, 3, 4, 5


@dataclass
class TrialPlan:
    n: int
    p0: int
    s: int = 2
    rho_minus: float = 0.5
    kappa: float = KAPPA_DEFAULT
    trials: int = 100
    master_seed: int = 0
    thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise OutOfRange(f"trials must be >= 1, got {self.trials}")
        if self.n < 1 or self.p0 < 0 or self.s < 1:
            raise OutOfRange("need n >= 1, p0 >= 0, s >= 1")
        unknown = set(self.thresholds) - set(DEFAULT_THRESHOLDS)
        if unknown:
            raise OutOfRange(f"unknown thresholds: {sorted(unknown)}")

    def threshold(self, key):
        return self.thresholds.get(key, DEFAULT_THRESHOLDS[key])

    def matrix(self, i, p0=None) -> DesignMatrix:
        return sample_sphere_matrix(self.n, self.p0 if p0 is None else p0,
                                    sub_seed(self.master_seed, i))

    def rng(self, i, key):
        return rng_for(self.master_seed, i, key)


@dataclass
class SuiteReport:
    suite: str
    passed: bool
    status: str
    statistics: dict
    threshold: dict
    plan: dict
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    runtime: float = 0.0

    def to_dict(self, include_runtime=False):
        d = {
            "suite": self.suite,
            "pass": self.passed,
            "status": self.status,
            "statistics": to_jsonable(self.statistics),
            "threshold": to_jsonable(self.threshold),
            "plan": to_jsonable(self.plan),
        }
        if include_runtime:
            d["runtime"] = self.runtime
        return d

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_csv_cell(row.get(c)) for c in self.columns])


def to_jsonable(obj):
    """Convert numpy scalars/arrays inside nested containers to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _csv_cell(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def binomial_ci(k: int, n: int, level: float = 0.95):
    """Clopper-Pearson interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="exact")
    return (float(ci.low), float(ci.high))


def _quantiles(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return {}
    q = np.quantile(x, [0.0, 0.1, 0.5, 0.9, 0.99, 1.0])
    return dict(zip(["min", "q10", "median", "q90", "q99", "max"], q.tolist()))


def _finish(name, plan, t0, passed, status, statistics, threshold, columns, rows):
    return SuiteReport(name, bool(passed), status, statistics, threshold, asdict(plan),
                       columns, rows, time.perf_counter() - t0)


def sphere_gamma_bound(p0: int) -> float:
    return augment.gamma_sphere_bound(p0)


# -- suites ----------------------------------------------------------------------

def verify_dot_law(plan: TrialPlan, reference_n: int | None = None) -> SuiteReport:
    """One-sample KS test of ``|<X_j, v>|`` against its exact law.

    Uses ``trials * p0`` samples (trial i contributes the p0 columns of its
    matrix against a fixed v).  ``reference_n`` tests the samples against the
    law of a different dimension (negative control, expected to fail).
    """
    t0 = time.perf_counter()
    if plan.n < 2:
        raise OutOfRange("the dot-product law needs n >= 2")
    law = DotLaw(plan.n if reference_n is None else reference_n)
    v = np.ones(plan.n) / math.sqrt(plan.n)
    z = np.concatenate([abs_dots(plan.matrix(i), v) for i in range(plan.trials)])
    z = np.clip(z, 0.0, 1.0)
    N = z.size
    res = stats.kstest(z, lambda t: dot_cdf(law, np.clip(t, 0.0, 1.0)))
    limit = 1.63 / math.sqrt(N)
    passed = res.statistic <= limit
    stats_ = {"ks_distance": float(res.statistic), "p_value": float(res.pvalue),
              "samples": N, "sample_dimension": plan.n, "law_dimension": law.n,
              "quantiles": _quantiles(z)}
    status = "KS distance within the 1% critical value" if passed else "KS distance too large"
    return _finish("dot-law", plan, t0, passed, status, stats_, {"ks_max": limit}, [], [])


def verify_order_statistic(plan: TrialPlan) -> SuiteReport:
    """Exceedance frequency of ``80 log(p0)/p0`` by the m-th smallest ``|<X_j, v>|``."""
    t0 = time.perf_counter()
    if plan.n < 6:
        raise OutOfRange("the simplified quantile bound needs n >= 6")
    n, p0 = plan.n, plan.p0
    m = outer_set_size(p0, plan.kappa, plan.s)
    bound = sphere_gamma_bound(p0)
    rows = []
    for i in range(plan.trials):
        X = plan.matrix(i)
        v = random_unit_vector(plan.rng(i, _VEC), n)
        outer = greedy_outer_set(X, v, plan.kappa, plan.s)
        z_m = float(abs_dots(X, v)[outer.tolist()].max())
        rows.append({"trial": i, "m": m, "z_m": z_m, "bound": bound, "exceeds": z_m >= bound})
    k = sum(r["exceeds"] for r in rows)
    frac = k / plan.trials
    thr = plan.threshold("order_stat_exceedance")
    passed = frac <= thr
    unsimplified = (8 * math.sqrt(math.pi) / math.exp(2 * math.log(2))
                    * math.sqrt(n - 2) / (n - 3) ** 1.5 * n / p0 * math.log(p0))
    stats_ = {
        "m": m, "bound": bound, "exceedances": k, "exceedance_fraction": frac,
        "exceedance_ci": binomial_ci(k, plan.trials, plan.threshold("ci_level")),
        "z_m_quantiles": _quantiles([r["z_m"] for r in rows]),
        "claimed_exceedance_probability": float(p0) ** (-n),
        "unsimplified_quantile": unsimplified,
    }
    status = f"{k}/{plan.trials} exceedances"
    return _finish("order-stat", plan, t0, passed, status, stats_,
                   {"order_stat_exceedance": thr}, ["trial", "m", "z_m", "bound", "exceeds"], rows)


def verify_gamma_bound(plan: TrialPlan, directions: int = 200, max_tries: int = 100) -> SuiteReport:
    """Compare the Monte-Carlo gamma estimate of sphere matrices with 80 log(p0)/p0."""
    t0 = time.perf_counter()
    params = GammaParams(plan.s, plan.rho_minus)
    bound = sphere_gamma_bound(plan.p0)
    rows = []
    for i in range(plan.trials):
        X = plan.matrix(i)
        try:
            est = gamma_estimate(X, params, directions, plan.kappa,
                                 sub_seed(plan.master_seed, i, _GAMMA), max_tries)
        except Exhausted:
            rows.append({"trial": i, "gamma_hat": None, "bound": bound, "ok": False,
                         "failed_directions": directions})
            continue
        rows.append({"trial": i, "gamma_hat": est.value, "bound": bound,
                     "ok": est.value <= bound, "failed_directions": len(est.failed_directions)})
    ok = sum(r["ok"] for r in rows)
    fail_frac = 1.0 - ok / plan.trials
    thr = plan.threshold("gamma_fail_fraction")
    passed = fail_frac <= thr
    vals = [r["gamma_hat"] for r in rows if r["gamma_hat"] is not None]
    stats_ = {
        "bound": bound, "pass_fraction": ok / plan.trials,
        "pass_ci": binomial_ci(ok, plan.trials, plan.threshold("ci_level")),
        "gamma_hat_quantiles": _quantiles(vals),
        "all_at_most_one": all(x <= 1.0 + 1e-12 for x in vals),
        "directions": directions,
        "note": "estimates are maxima over sampled directions (lower-biased for the supremum)",
    }
    status = f"{ok}/{plan.trials} trials within the bound"
    return _finish("gamma", plan, t0, passed, status, stats_, {"gamma_fail_fraction": thr},
                   ["trial", "gamma_hat", "bound", "ok", "failed_directions"], rows)


def verify_cap_coherence(plan: TrialPlan, inject_duplicate: bool = False) -> SuiteReport:
    """Empirical coherence of sphere matrices and of their greedy outer sets.

    Pass/fail uses only the configurable ``coherence_max`` threshold on the
    99th percentile (and exact-duplicate detection); the much smaller
    ``0.5 p0^-2`` level and the classical sqrt(2 log p0 / n) scale are
    reported for comparison.
    """
    t0 = time.perf_counter()
    n, p0 = plan.n, plan.p0
    if p0 < 2:
        raise OutOfRange("coherence needs p0 >= 2")
    m = outer_set_size(p0, plan.kappa, plan.s)
    rows = []
    for i in range(plan.trials):
        X = plan.matrix(i)
        if inject_duplicate:
            a = X.values.copy()
            a[:, 1] = a[:, 0]
            X = DesignMatrix(a, normalized=True)
        mu = coherence(X)
        mu_outer = None
        if m >= max(2, plan.s):
            v = random_unit_vector(plan.rng(i, _VEC), n)
            outer = greedy_outer_set(X, v, plan.kappa, plan.s)
            mu_outer = coherence(DesignMatrix(X.values[:, outer.tolist()], normalized=True))
        rows.append({"trial": i, "coherence": mu, "outer_coherence": mu_outer,
                     "contaminated": mu >= 1.0 - 1e-12})
    mus = np.array([r["coherence"] for r in rows])
    outer_mus = [r["outer_coherence"] for r in rows if r["outer_coherence"] is not None]
    contaminated = sum(r["contaminated"] for r in rows)
    cap_level = 0.5 * float(p0) ** -2
    thr = plan.threshold("coherence_max")
    q99 = float(np.quantile(mus, 0.99))
    passed = contaminated == 0 and q99 <= thr
    stats_ = {
        "coherence_quantiles": _quantiles(mus),
        "outer_coherence_quantiles": _quantiles(outer_mus),
        "outer_size": m,
        "cap_level_half_p0_pow_minus2": cap_level,
        "fraction_outer_below_cap_level": (
            float(np.mean(np.array(outer_mus) <= cap_level)) if outer_mus else None),
        "classical_scale": min(1.0, math.sqrt(2.0 * math.log(p0) / n)),
        "contaminated_trials": contaminated,
    }
    if p0 == 2 and n >= 2:
        ks = stats.kstest(np.clip(mus, 0, 1), lambda t: dot_cdf(DotLaw(n), np.clip(t, 0, 1)))
        stats_["ks_vs_dot_law"] = float(ks.statistic)
    status = ("duplicate columns detected" if contaminated
              else f"q99 coherence {q99:.4f} vs threshold {thr:.4f}")
    return _finish("cap-coherence", plan, t0, passed, status, stats_, {"coherence_max": thr},
                   ["trial", "coherence", "outer_coherence", "contaminated"], rows)


def verify_norm_bound(plan: TrialPlan) -> SuiteReport:
    """Spectral norm of greedy-selected submatrices against ``mult*(sqrt(m/n)+1)+margin``."""
    t0 = time.perf_counter()
    n = plan.n
    m = outer_set_size(plan.p0, plan.kappa, plan.s)
    mult, margin = plan.threshold("norm_multiple"), plan.threshold("norm_margin")
    limit = mult * (math.sqrt(m / n) + 1.0) + margin
    rows = []
    for i in range(plan.trials):
        X = plan.matrix(i)
        v = random_unit_vector(plan.rng(i, _VEC), n)
        outer = greedy_outer_set(X, v, plan.kappa, plan.s)
        rows.append({"trial": i, "m": m, "norm": spectral_norm(X.values[:, outer.tolist()])})
    norms = np.array([r["norm"] for r in rows])
    q99 = float(np.quantile(norms, 0.99))
    passed = q99 <= limit
    stats_ = {
        "m": m, "norm_quantiles": _quantiles(norms), "q99": q99, "limit": limit,
        "log_scale_without_constants": (n + m) / n * math.log(plan.p0) if plan.p0 > 1 else None,
    }
    status = f"q99 norm {q99:.4f} vs limit {limit:.4f}"
    return _finish("norm-bound", plan, t0, passed, status, stats_,
                   {"norm_multiple": mult, "norm_margin": margin}, ["trial", "m", "norm"], rows)


def _outer_block(plan, i, mode):
    n = plan.n
    m = outer_set_size(plan.p0, plan.kappa, plan.s)
    if mode == "greedy":
        X = plan.matrix(i)
        v = random_unit_vector(plan.rng(i, _VEC), n)
        return X, greedy_outer_set(X, v, plan.kappa, plan.s)
    if mode == "orthonormal":
        return DesignMatrix.identity(n), IndexSet(tuple(range(n)))
    if mode == "near-duplicates":
        rng = plan.rng(i, _VEC)
        base = random_unit_vector(rng, n)
        A = base[:, None] + 0.01 * rng.standard_normal((n, max(m, plan.s)))
        A /= np.linalg.norm(A, axis=0)
        return DesignMatrix(A, normalized=True), IndexSet(tuple(range(A.shape[1])))
    raise OutOfRange(f"unknown outer mode {mode!r}")


def verify_submatrix_extraction(plan: TrialPlan, outer_mode: str = "greedy") -> SuiteReport:
    """Acceptance rate of a single uniform s-subset draw from the outer set.

    The tracked event is ``||X_S^t X_S - I|| <= 1 - rho`` (Gram deviation), the
    test the extractor accepts on; sigma_min(X_S) >= rho is reported alongside.
    The suite passes when the event probability is positive at the configured
    confidence.  With ``outer_mode='near-duplicates'`` it only reports.
    """
    t0 = time.perf_counter()
    r = 1.0 - plan.rho_minus
    rows = []
    for i in range(plan.trials):
        X, outer = _outer_block(plan, i, outer_mode)
        if len(outer) < plan.s:
            raise OutOfRange(f"outer set of size {len(outer)} is smaller than s={plan.s}")
        S = np.sort(plan.rng(i, _DRAW).choice(np.array(outer.tolist()), plan.s, replace=False))
        A = X.values[:, S]
        ev = np.linalg.eigvalsh(A.T @ A)
        dev = float(np.max(np.abs(ev - 1.0)))
        smin = math.sqrt(max(ev[0], 0.0))
        rows.append({"trial": i, "gram_deviation": dev, "sigma_min": smin,
                     "gram_ok": dev <= r, "sigma_ok": smin >= plan.rho_minus})
    k = sum(row["gram_ok"] for row in rows)
    k_sig = sum(row["sigma_ok"] for row in rows)
    conf = plan.threshold("extraction_confidence")
    lo, hi = binomial_ci(k, plan.trials, conf)
    stats_ = {
        "gram_acceptance": k / plan.trials, "gram_acceptance_ci": (lo, hi),
        "sigma_acceptance": k_sig / plan.trials,
        "sigma_acceptance_ci": binomial_ci(k_sig, plan.trials, conf),
        "radius": r, "outer_mode": outer_mode,
    }
    if outer_mode == "near-duplicates":
        passed, status = True, f"reported only: acceptance {k}/{plan.trials}"
    else:
        passed = lo > 0.0
        status = f"acceptance {k}/{plan.trials}, {conf:.0%} lower bound {lo:.4f}"
    return _finish("extraction", plan, t0, passed, status, stats_,
                   {"extraction_confidence": conf},
                   ["trial", "gram_deviation", "sigma_min", "gram_ok", "sigma_ok"], rows)


# -- prediction experiment ---------------------------------------------------------

def correlated_pairs_design(n: int, p: int, seed, corr: float = 0.999) -> DesignMatrix:
    """Sphere columns each followed by a partner with inner product exactly ``corr``."""
    if p % 2:
        raise OutOfRange("correlated-pairs design needs an even p")
    rng = rng_for(seed)
    base = sample_sphere_matrix(n, p // 2, sub_seed(seed, 0)).values
    cols = []
    for x in base.T:
        u = rng.standard_normal(n)
        u -= (u @ x) * x
        u /= np.linalg.norm(u)
        partner = corr * x + math.sqrt(1.0 - corr * corr) * u
        cols += [x, partner / np.linalg.norm(partner)]
    return DesignMatrix(np.column_stack(cols), normalized=True)


def sparse_signal(p: int, s: int, rng) -> tuple:
    """s-sparse vector with +1, -1, +1, ... on a uniformly random support."""
    support = np.sort(rng.choice(p, size=s, replace=False))
    beta = np.zeros(p)
    beta[support] = [1.0 if k % 2 == 0 else -1.0 for k in range(s)]
    return beta, IndexSet(tuple(int(j) for j in support))


def _fallback_lambda(sigma, alpha, p_eff, y_scale):
    lam = sigma * math.sqrt((2 * alpha + 1) * math.log(p_eff) + math.log(2))
    return lam if lam > 0 else 1e-8 * max(y_scale, 1.0)


EXPERIMENT_COLUMNS = [
    "trial", "lambda", "nu_ok", "sigma_min_S", "sigma_max_star", "gamma_hat",
    "error_plain", "bound_plain", "holds_plain", "converged_plain",
    "p0", "p0_rule_ok", "aug_nu_ok", "lambda_aug", "error_aug", "error_aug_split",
    "bound_aug", "holds_aug", "converged_aug",
]


def _bound_verdict(rows, flag, holds, target, level):
    flagged = [r for r in rows if r[flag]]
    if not flagged:
        return True, "preconditions unmet", {"flagged": 0}
    k = sum(bool(r[holds]) for r in flagged)
    lo, hi = binomial_ci(k, len(flagged), level)
    ok = hi >= target
    return ok, f"bound held in {k}/{len(flagged)} flagged trials", {
        "flagged": len(flagged), "held": k, "fraction": k / len(flagged), "ci": (lo, hi)}


def experiment_prediction(plan: TrialPlan, design: str = "sphere", p: int = 64, s: int | None = None,
                          sigma: float = 0.1, alpha: float = 1.0, lambda_rule: str = "theorem",
                          lam: float | None = None, X_user: DesignMatrix | None = None,
                          nu: float | None = None, L: float = 0.5, directions: int = 200,
                          max_tries: int = 100) -> SuiteReport:
    """Plain and augmented LASSO prediction errors against the theoretical bounds.

    Per trial: design, s-sparse signal with alternating signs, Gaussian noise,
    plain fit and augmented fit.  sigma_min(X_S) is exact (the support is
    known here); max_{|T|<=n} sigma_max(X_T) is replaced by the smaller of
    ||X|| and the coherence bound 1 + mu sqrt(n), both upper bounds; gamma at
    subset size nu*n is the Monte-Carlo estimate.  The augmented block has the
    p0 chosen by the p0 selection rule when that fits under ``plan.p0``,
    otherwise ``plan.p0`` columns with the rule flagged as unmet.
    """
    t0 = time.perf_counter()
    s = plan.s if s is None else s
    n = plan.n
    if design == "user-matrix":
        if X_user is None:
            raise OutOfRange("design 'user-matrix' needs X_user")
        p = X_user.p
        if X_user.n != n:
            raise OutOfRange(f"user matrix has {X_user.n} rows, plan says n={n}")
    if s > n or s > p:
        raise OutOfRange(f"s={s} must not exceed n={n} or p={p}")
    if lambda_rule not in ("theorem", "fixed"):
        raise OutOfRange(f"unknown lambda rule {lambda_rule!r}")
    if lambda_rule == "fixed" and not (lam and lam > 0):
        raise OutOfRange("the fixed lambda rule needs lam > 0")
    nu = s / n if nu is None else nu
    k_gamma = math.ceil(nu * n - 1e-9)
    if k_gamma > min(n, p):
        raise OutOfRange(f"nu*n={nu * n} exceeds min(n, p)")

    rows = []
    for i in range(plan.trials):
        seed_i = sub_seed(plan.master_seed, i)
        if design == "sphere":
            X = sample_sphere_matrix(n, p, seed_i)
        elif design == "correlated-pairs":
            X = correlated_pairs_design(n, p, seed_i)
        elif design == "user-matrix":
            X = X_user
        else:
            raise OutOfRange(f"unknown design {design!r}")
        rng = plan.rng(i, _NOISE)
        beta, S = sparse_signal(p, s, rng)
        y = X.values @ beta + sigma * rng.standard_normal(n)
        y_scale = float(np.abs(X.values.T @ y).max())

        smin_S = submatrix_extremes(X, S).sigma_min
        mu = coherence(X) if p >= 2 else 0.0
        smax_star = min(spectral_norm(X.values), coherence_sigma_bounds(mu, n).sigma_max)
        try:
            g = gamma_estimate(X, GammaParams(k_gamma, plan.rho_minus), directions, plan.kappa,
                               sub_seed(plan.master_seed, i, _GAMMA), max_tries).value
        except Exhausted:
            g = None

        rep = None
        if g is not None:
            inputs = lasso.TheoremInputs(sigma, alpha, p, nu, n, plan.rho_minus, smin_S,
                                         smax_star, g, source="exact sigma_min(X_S); "
                                         "sigma_max* = min(||X||, 1 + mu sqrt(n))")
            rep = lasso.lambda_min_theorem(inputs)
        nu_ok = bool(rep and rep.precondition_nu_ok)
        if lambda_rule == "fixed":
            lam_i = lam
        elif nu_ok and rep.lambda_min > 0:
            lam_i = rep.lambda_min
        else:
            lam_i = _fallback_lambda(sigma, alpha, p, y_scale)
        try:
            f = lasso.fit(X, y, lam_i)
        except NotConverged as e:
            f = e.fit
        d = X.values @ (f.beta_hat - beta)
        err = float(0.5 * d @ d)
        bound = lasso.prediction_bound(inputs, lam_i, s) if nu_ok else None

        # augmented design
        cfg = augment.AugmentConfig(nu=nu, rho_minus=plan.rho_minus,
                                    sigma_min_star=min(smin_S, smax_star),
                                    sigma_max_star=smax_star, L=L, p0_cap=max(plan.p0, 11),
                                    seed=sub_seed(plan.master_seed, i, _AUG))
        try:
            p0 = augment.choose_p0(cfg, n)
            rule_ok = True
        except Infeasible:
            p0, rule_ok = plan.p0, False
        aug_rep = augment.lambda_min_augmented(cfg, None, n, p, p0, sigma, alpha) if p0 >= 2 else None
        aug_ok = bool(rule_ok and aug_rep and aug_rep.precondition_nu_ok)
        if lambda_rule == "fixed":
            lam_a = lam
        elif aug_ok and aug_rep.lambda_min > 0:
            lam_a = aug_rep.lambda_min
        else:
            lam_a = _fallback_lambda(sigma, alpha, p + p0, y_scale)
        cfg_fit = augment.AugmentConfig(**{**asdict(cfg), "p0_override": p0})
        try:
            af = augment.fit_augmented(X, y, lam_a, cfg_fit)
        except NotConverged as e:
            # same block the fit drew; keep the partial solution
            X0 = sample_sphere_matrix(n, p0, cfg_fit.seed)
            b = e.fit.beta_hat
            af = augment.AugmentedFit(e.fit, b[:p].copy(), b[p:].copy(), p0, cfg_fit.seed, X0)
        X_sharp = concat(X, af.X0)
        err_aug = augment.augmented_prediction_error(
            X_sharp, af.beta_hat, np.concatenate([beta, np.zeros(p0)]))
        err_split = augment.split_prediction_error(X, af.X0, af.beta_X, af.beta_0, beta)
        bound_aug = None
        if aug_ok:
            bound_aug = s * lasso.constant_C(_inputs_of(aug_rep), lam_a, p + p0)

        rows.append({
            "trial": i, "lambda": lam_i, "nu_ok": nu_ok, "sigma_min_S": smin_S,
            "sigma_max_star": smax_star, "gamma_hat": g,
            "error_plain": err, "bound_plain": bound,
            "holds_plain": (err <= bound) if bound is not None else None,
            "converged_plain": f.converged,
            "p0": p0, "p0_rule_ok": rule_ok, "aug_nu_ok": aug_ok, "lambda_aug": lam_a,
            "error_aug": err_aug, "error_aug_split": err_split, "bound_aug": bound_aug,
            "holds_aug": (err_aug <= bound_aug) if bound_aug is not None else None,
            "converged_aug": af.fit.converged,
        })

    slack = plan.threshold("probability_slack")
    level = plan.threshold("ci_level")
    target_plain = 1.0 - 3.0 * p ** (-alpha) - slack
    ok_plain, msg_plain, st_plain = _bound_verdict(rows, "nu_ok", "holds_plain", target_plain, level)
    p0s = [r["p0"] for r in rows]
    target_aug = 1.0 - 3.0 * (p + max(p0s)) ** (-alpha) - slack
    ok_aug, msg_aug, st_aug = _bound_verdict(rows, "aug_nu_ok", "holds_aug", target_aug, level)
    stats_ = {
        "plain": {**st_plain, "target": target_plain,
                  "mean_error": float(np.mean([r["error_plain"] for r in rows]))},
        "augmented": {**st_aug, "target": target_aug,
                      "mean_error": float(np.mean([r["error_aug"] for r in rows]))},
        "design": design, "p": p, "s": s, "sigma": sigma, "alpha": alpha, "nu": nu,
        "lambda_rule": lambda_rule,
        "unconverged_fits": sum((not r["converged_plain"]) + (not r["converged_aug"]) for r in rows),
        "gamma_hat_quantiles": _quantiles([r["gamma_hat"] for r in rows
                                           if r["gamma_hat"] is not None]),
    }
    status = f"plain: {msg_plain}; augmented: {msg_aug}"
    return _finish("experiment", plan, t0, ok_plain and ok_aug, status, stats_,
                   {"probability_slack": slack, "ci_level": level},
                   EXPERIMENT_COLUMNS, rows)


def _inputs_of(rep: lasso.BoundReport) -> lasso.TheoremInputs:
    fields_ = {k: rep.inputs[k] for k in
               ("sigma", "alpha", "p", "nu", "n", "rho_minus", "sigma_min_S",
                "sigma_max_star", "gamma", "source")}
    return lasso.TheoremInputs(**fields_)


SUITES = {
    "dot-law": verify_dot_law,
    "order-stat": verify_order_statistic,
    "gamma": verify_gamma_bound,
    "cap-coherence": verify_cap_coherence,
    "norm-bound": verify_norm_bound,
    "extraction": verify_submatrix_extraction,
}
