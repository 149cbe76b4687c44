"""Command-line front end.

    auglasso audit      --matrix X.csv --s 3 --rho 0.5
    auglasso fit        --matrix X.csv --y y.csv --lambda 0.3
    auglasso fit-aug    --matrix X.csv --y y.csv --lambda 0.3 --s 3 --rho 0.5 --nu 0.1
    auglasso gamma      --matrix X.csv --s 2 --rho 0.5 --directions 200
    auglasso verify     --suite gamma --n 8 --p0 500 --s 2 --rho 0.5 --trials 50 --seed 7
    auglasso experiment --design sphere --n 32 --p 64 --s 3 --sigma 0.1 --trials 100

Exit status: 0 on success, 1 when a suite fails (or a fit does not converge),
2 on usage or input errors.  JSON goes to ``--out`` (stdout by default) and
per-trial tables to ``--csv``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import __version__, augment, lasso, verify
from .errors import AuglassoError, DimensionMismatch, NotConverged, OutOfRange
from .gamma import KAPPA_DEFAULT, GammaParams, gamma_estimate, gamma_exact
from .matrix import (
    DesignMatrix,
    coherence,
    coherence_sigma_bounds,
    load_design,
    load_vector,
    spectral_norm,
)
from .sphere import MAX_SEED

OUTPUT_ARGS = ("out", "csv", "func")


class UsageError(Exception):
    pass


def _require(cond, flag, valid, value):
    if not cond:
        raise UsageError(f"{flag} must be {valid}, got {value!r}")


def _check_common(a):
    if hasattr(a, "seed"):
        _require(0 <= a.seed <= MAX_SEED, "--seed", "a 64-bit unsigned integer", a.seed)
    if getattr(a, "rho", None) is not None:
        _require(0 < a.rho < 1, "--rho", "in (0, 1)", a.rho)
    if getattr(a, "s", None) is not None:
        _require(a.s >= 1, "--s", ">= 1", a.s)
    if getattr(a, "directions", None) is not None:
        _require(a.directions >= 1, "--directions", ">= 1", a.directions)
    if getattr(a, "trials", None) is not None:
        _require(a.trials >= 1, "--trials", ">= 1", a.trials)
    if getattr(a, "lam", None) is not None:
        _require(a.lam > 0, "--lambda", "> 0", a.lam)
    if getattr(a, "nu", None) is not None:
        _require(a.nu > 0, "--nu", "> 0", a.nu)
    if getattr(a, "L", None) is not None:
        _require(0 < a.L < 1, "--L", "in (0, 1)", a.L)
    if getattr(a, "sigma", None) is not None:
        _require(a.sigma >= 0, "--sigma", ">= 0", a.sigma)
    if getattr(a, "alpha", None) is not None:
        _require(a.alpha > 0, "--alpha", "> 0", a.alpha)
    if getattr(a, "kappa", None) is not None:
        _require(a.kappa >= 1, "--kappa", ">= 1", a.kappa)
    if getattr(a, "epsilon", None) is not None:
        _require(0 < a.epsilon <= 2, "--epsilon", "in (0, 2]", a.epsilon)
    if getattr(a, "tol", None) is not None:
        _require(a.tol > 0, "--tol", "> 0", a.tol)


def _sigma_stars(X: DesignMatrix, s: int):
    mu = coherence(X) if X.p >= 2 else 0.0
    lo = coherence_sigma_bounds(mu, min(s, X.p)).sigma_min
    hi = min(spectral_norm(X.values), coherence_sigma_bounds(mu, X.n).sigma_max)
    return mu, lo, hi


# -- commands -------------------------------------------------------------------

def cmd_audit(a):
    X = load_design(a.matrix)
    _require(a.s <= min(X.n, X.p), "--s", f"<= min(n, p) = {min(X.n, X.p)}", a.s)
    nu = a.nu if a.nu is not None else a.s / X.n
    k = math.ceil(nu * X.n - 1e-9)
    _require(k <= min(X.n, X.p), "--nu", f"such that nu*n <= {min(X.n, X.p)}", a.nu)
    mu, smin_star, smax_star = _sigma_stars(X, a.s)
    est = gamma_estimate(X, GammaParams(k, a.rho), a.directions, a.kappa, a.seed)
    out = {
        "n": X.n, "p": X.p, "coherence": mu,
        "sandwich_s": _interval(coherence_sigma_bounds(mu, a.s)),
        "sandwich_n": _interval(coherence_sigma_bounds(mu, X.n)),
        "spectral_norm": spectral_norm(X.values),
        "sigma_min_star": smin_star, "sigma_max_star": smax_star,
        "gamma": est.to_dict(with_certificates=False), "gamma_subset_size": k,
    }
    if X.n <= 3 and a.epsilon is not None:
        lo, hi, _ = gamma_exact(X, GammaParams(k, a.rho), a.epsilon)
        out["gamma_exact"] = {"lo": lo, "hi": hi, "epsilon": a.epsilon}
    denom = a.rho * smin_star - nu * X.n * est.value * smax_star
    out["condition_nu"] = {"ok": denom > 0, "margin": denom, "nu": nu,
                           "note": "uses coherence/norm proxies and the Monte-Carlo gamma"}
    return out, True


def _interval(iv):
    return {"sigma_min": iv.sigma_min, "sigma_max": iv.sigma_max}


def cmd_fit(a):
    X = load_design(a.matrix)
    y = _load_y(a.y, X)
    try:
        f = lasso.fit(X, y, a.lam, tol=a.tol, max_sweeps=a.max_sweeps)
    except NotConverged as exc:
        return {"fit": exc.fit.to_dict(), "error": str(exc)}, False
    if a.sparsify:
        f = lasso.sparsify_support(f, X, y)
    return {"fit": f.to_dict()}, True


def cmd_fit_aug(a):
    X = load_design(a.matrix)
    y = _load_y(a.y, X)
    nu = a.nu if a.nu is not None else a.s / X.n
    _, smin_star, smax_star = _sigma_stars(X, a.s)
    if a.sigma_min_star is not None:
        smin_star = a.sigma_min_star
    if a.sigma_max_star is not None:
        smax_star = a.sigma_max_star
    _require(0 <= smin_star <= smax_star and smax_star > 0, "--sigma-min-star/--sigma-max-star",
             "0 <= min <= max with max > 0", (smin_star, smax_star))
    cfg = augment.AugmentConfig(nu=nu, rho_minus=a.rho, sigma_min_star=smin_star,
                                sigma_max_star=smax_star, L=a.L, p0_cap=a.p0_cap,
                                seed=a.seed, p0_override=a.p0)
    try:
        af = augment.fit_augmented(X, y, a.lam, cfg, tol=a.tol, max_sweeps=a.max_sweeps)
    except NotConverged as exc:
        return {"fit": exc.fit.to_dict(), "error": str(exc)}, False
    out = {"augmented_fit": af.to_dict(), "threshold": cfg.threshold(X.n),
           "sigma_min_star": smin_star, "sigma_max_star": smax_star, "nu": nu}
    if a.sigma is not None and af.p0 >= 2:
        out["bound"] = augment.lambda_min_augmented(
            cfg, None, X.n, X.p, af.p0, a.sigma, a.alpha).to_dict()
    return out, True


def cmd_gamma(a):
    X = load_design(a.matrix)
    _require(a.s <= min(X.n, X.p), "--s", f"<= min(n, p) = {min(X.n, X.p)}", a.s)
    params = GammaParams(a.s, a.rho)
    if a.exact:
        _require(X.n <= 3, "--exact", "used with n <= 3", X.n)
        lo, hi, est = gamma_exact(X, params, a.epsilon if a.epsilon is not None else 0.05)
        return {"lo": lo, "hi": hi, "estimate": est.to_dict()}, True
    est = gamma_estimate(X, params, a.directions, a.kappa, a.seed)
    return {"estimate": est.to_dict()}, True


def _thresholds(items):
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        _require(sep and key in verify.DEFAULT_THRESHOLDS, "--threshold",
                 f"KEY=VALUE with KEY in {sorted(verify.DEFAULT_THRESHOLDS)}", item)
        try:
            out[key] = float(val)
        except ValueError:
            raise UsageError(f"--threshold value for {key} must be a number, got {val!r}")
    return out


def _plan(a, p0):
    return verify.TrialPlan(n=a.n, p0=p0, s=a.s, rho_minus=a.rho, kappa=a.kappa,
                            trials=a.trials, master_seed=a.seed,
                            thresholds=_thresholds(a.threshold))


def cmd_verify(a):
    _require(a.n >= 1, "--n", ">= 1", a.n)
    _require(a.p0 >= 0, "--p0", ">= 0", a.p0)
    if a.suite == "dot-law":
        _require(a.n >= 2, "--n", ">= 2 for the dot-law suite", a.n)
    if a.suite == "order-stat":
        _require(a.n >= 6, "--n", ">= 6 for the order-stat suite", a.n)
    plan = _plan(a, a.p0)
    fn = verify.SUITES[a.suite]
    kw = {}
    if a.suite == "dot-law" and a.reference_n is not None:
        _require(a.reference_n >= 2, "--reference-n", ">= 2", a.reference_n)
        kw["reference_n"] = a.reference_n
    if a.suite == "gamma":
        kw["directions"] = a.directions
    if a.suite == "cap-coherence":
        kw["inject_duplicate"] = a.inject_duplicate
    if a.suite == "extraction":
        kw["outer_mode"] = a.outer_mode
    rep = fn(plan, **kw)
    return rep, rep.passed


def cmd_experiment(a):
    X_user = None
    if a.design == "user-matrix":
        _require(a.matrix is not None, "--matrix", "given with --design user-matrix", None)
        X_user = load_design(a.matrix)
        a.n, a.p = X_user.n, X_user.p
    _require(a.n >= 1, "--n", ">= 1", a.n)
    _require(a.p >= 1, "--p", ">= 1", a.p)
    _require(a.s <= min(a.n, a.p), "--s", f"<= min(n, p) = {min(a.n, a.p)}", a.s)
    if a.lambda_rule == "fixed":
        _require(a.lam is not None, "--lambda", "given with --lambda-rule fixed", a.lam)
    if a.design == "correlated-pairs":
        _require(a.p % 2 == 0, "--p", "even for the correlated-pairs design", a.p)
    plan = _plan(a, a.p0)
    rep = verify.experiment_prediction(
        plan, design=a.design, p=a.p, s=a.s, sigma=a.sigma, alpha=a.alpha,
        lambda_rule=a.lambda_rule, lam=a.lam, X_user=X_user, nu=a.nu, L=a.L,
        directions=a.directions)
    return rep, rep.passed


def _load_y(path, X):
    y = load_vector(path)
    if y.shape[0] != X.n:
        raise DimensionMismatch(f"y has {y.shape[0]} entries, matrix has {X.n} rows")
    return y


# -- parser -----------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="auglasso", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"auglasso {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, csv=False):
        sp.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
        sp.add_argument("--out", help="JSON report path (default: stdout)")
        if csv:
            sp.add_argument("--csv", help="per-trial CSV table path")

    def fitting(sp):
        sp.add_argument("--matrix", required=True)
        sp.add_argument("--y", required=True)
        sp.add_argument("--lambda", dest="lam", type=float, required=True)
        sp.add_argument("--tol", type=float, default=lasso.DEFAULT_TOL)
        sp.add_argument("--max-sweeps", type=int, default=lasso.DEFAULT_MAX_SWEEPS)

    sp = sub.add_parser("audit", help="coherence, sandwich bounds, gamma and the nu precondition")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--rho", type=float, required=True)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--directions", type=int, default=200)
    sp.add_argument("--kappa", type=float, default=KAPPA_DEFAULT)
    sp.add_argument("--epsilon", type=float, help="also compute the net interval (n <= 3)")
    common(sp)
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("fit", help="plain LASSO fit")
    fitting(sp)
    sp.add_argument("--sparsify", action="store_true", help="reduce the support to <= n columns")
    common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("fit-aug", help="LASSO on the design with a random sphere block appended")
    fitting(sp)
    sp.add_argument("--s", type=int, required=True, help="sparsity used for the sigma bounds")
    sp.add_argument("--rho", type=float, required=True)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--L", type=float, default=0.5)
    sp.add_argument("--sigma-min-star", type=float)
    sp.add_argument("--sigma-max-star", type=float)
    sp.add_argument("--p0", type=int, help="bypass the p0 rule")
    sp.add_argument("--p0-cap", type=int, default=augment.DEFAULT_P0_CAP)
    sp.add_argument("--sigma", type=float, help="noise level; adds the bound report")
    sp.add_argument("--alpha", type=float, default=1.0)
    common(sp)
    sp.set_defaults(func=cmd_fit_aug)

    sp = sub.add_parser("gamma", help="estimate the design index")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--rho", type=float, required=True)
    sp.add_argument("--directions", type=int, default=200)
    sp.add_argument("--kappa", type=float, default=KAPPA_DEFAULT)
    sp.add_argument("--exact", action="store_true", help="epsilon-net interval (n <= 3)")
    sp.add_argument("--epsilon", type=float)
    common(sp)
    sp.set_defaults(func=cmd_gamma)

    def plan_args(sp, p0_default, n_default=None):
        sp.add_argument("--n", type=int, required=n_default is None, default=n_default)
        sp.add_argument("--p0", type=int, default=p0_default)
        sp.add_argument("--s", type=int, default=2)
        sp.add_argument("--rho", type=float, default=0.5)
        sp.add_argument("--kappa", type=float, default=KAPPA_DEFAULT)
        sp.add_argument("--trials", type=int, default=100)
        sp.add_argument("--directions", type=int, default=200)
        sp.add_argument("--threshold", action="append", metavar="KEY=VALUE")

    sp = sub.add_parser("verify", help="run a Monte-Carlo verification suite")
    sp.add_argument("--suite", required=True, choices=sorted(verify.SUITES))
    plan_args(sp, 1000)
    sp.add_argument("--reference-n", type=int, help="dot-law negative control dimension")
    sp.add_argument("--inject-duplicate", action="store_true")
    sp.add_argument("--outer-mode", default="greedy",
                    choices=["greedy", "orthonormal", "near-duplicates"])
    common(sp, csv=True)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("experiment", help="prediction-error experiment")
    sp.add_argument("--design", default="sphere",
                    choices=["sphere", "correlated-pairs", "user-matrix"])
    sp.add_argument("--matrix")
    plan_args(sp, 2000, n_default=32)
    sp.add_argument("--p", type=int, default=64)
    sp.add_argument("--sigma", type=float, default=0.1)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--lambda-rule", default="theorem", choices=["theorem", "fixed"])
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--nu", type=float)
    sp.add_argument("--L", type=float, default=0.5)
    common(sp, csv=True)
    sp.set_defaults(func=cmd_experiment)
    return p


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    try:
        _check_common(a)
        result, ok = a.func(a)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, DimensionMismatch, OutOfRange) as exc:
        print(f"auglasso {a.command}: {exc}", file=sys.stderr)
        return 2
    except AuglassoError as exc:
        print(f"auglasso {a.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    if isinstance(result, verify.SuiteReport):
        if getattr(a, "csv", None) and result.columns:
            result.write_csv(a.csv)
        print(f"[{result.suite}] {'PASS' if result.passed else 'FAIL'}: {result.status} "
              f"({result.runtime:.2f}s)", file=sys.stderr)
        result = result.to_dict()
    config = {k: v for k, v in sorted(vars(a).items()) if k not in OUTPUT_ARGS}
    doc = {"tool": "auglasso", "version": __version__, "command": a.command,
           "config": config, "result": verify.to_jsonable(result)}
    _emit(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", a.out)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
