"""LASSO by cyclic coordinate descent, KKT certification and the prediction-bound constants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .errors import (
    DimensionMismatch,
    NotConverged,
    NotNormalized,
    OutOfRange,
    ReductionFailed,
    SparsityTooLarge,
)
from .matrix import DesignMatrix, IndexSet

SUPPORT_THRESHOLD = 1e-9
DEFAULT_TOL = 1e-8
DEFAULT_MAX_SWEEPS = 10**5
# relative slack when asserting the objective does not go up between sweeps
MONOTONE_SLACK = 1e-12


@numba.njit(cache=True)
def _sweep(Xt, colsq, r, beta, lam, order):
    # one pass of exact coordinate minimization over the indices in `order`
    n = Xt.shape[1]
    for j in order:
        c = 0.0
        for i in range(n):
            c += Xt[j, i] * r[i]
        z = c + colsq[j] * beta[j]
        if z > lam:
            new = (z - lam) / colsq[j]
        elif z < -lam:
            new = (z + lam) / colsq[j]
        else:
            new = 0.0
        d = new - beta[j]
        if d != 0.0:
            for i in range(n):
                r[i] -= d * Xt[j, i]
            beta[j] = new


def soft_threshold(z, lam):
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def objective(X, y, beta, lam) -> float:
    A = X.values if isinstance(X, DesignMatrix) else np.asarray(X)
    r = np.asarray(y) - A @ beta
    return float(0.5 * r @ r + lam * np.abs(beta).sum())


def kkt_residual(X, y, beta, lam) -> float:
    """Worst violation of the subgradient optimality condition at ``beta``."""
    A = X.values if isinstance(X, DesignMatrix) else np.asarray(X)
    beta = np.asarray(beta, dtype=float)
    if beta.size == 0:
        return 0.0
    c = A.T @ (np.asarray(y) - A @ beta)
    nz = beta != 0.0
    res = np.where(nz, np.abs(c - lam * np.sign(beta)), np.maximum(0.0, np.abs(c) - lam))
    return float(res.max())


@dataclass
class LassoFit:
    beta_hat: np.ndarray
    lam: float
    objective: float
    kkt_residual: float
    support: IndexSet
    sweeps: int
    converged: bool = True
    objective_trace: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "beta_hat": [float(b) for b in self.beta_hat],
            "lambda": self.lam,
            "objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "support": self.support.tolist(),
            "sweeps": self.sweeps,
            "converged": self.converged,
        }


def _support(beta) -> IndexSet:
    return IndexSet(tuple(int(j) for j in np.flatnonzero(np.abs(beta) > SUPPORT_THRESHOLD)))


def _make_fit(A, y, beta, lam, sweeps, converged, trace) -> LassoFit:
    return LassoFit(beta, float(lam), objective(A, y, beta, lam), kkt_residual(A, y, beta, lam),
                    _support(beta), sweeps, converged, trace)


def fit(X: DesignMatrix, y, lam: float, tol: float = DEFAULT_TOL,
        max_sweeps: int = DEFAULT_MAX_SWEEPS, beta0=None) -> LassoFit:
    """Minimize ``0.5 ||y - X b||^2 + lam ||b||_1`` by cyclic coordinate descent.

    Full sweeps over all coordinates alternate with sweeps restricted to the
    current nonzeros; every sweep is exact coordinate minimization so the
    objective never increases.  Stops once the KKT residual is <= ``tol``.

    Raises
    ------
    NotConverged
        If ``max_sweeps`` is reached first; the partial fit is attached.
    """
    if not X.normalized:
        raise NotNormalized("fit requires a column-normalized design matrix")
    if not lam > 0:
        raise OutOfRange(f"lambda must be > 0, got {lam}")
    y = np.asarray(y, dtype=float)
    if y.shape != (X.n,):
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({X.n},)")
    A = X.values
    p = X.p
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    if p == 0:
        return _make_fit(A, y, beta, lam, 0, True, [objective(A, y, beta, lam)])

    Xt = np.ascontiguousarray(A.T)
    colsq = np.einsum("ij,ij->j", A, A)
    r = y - A @ beta
    everything = np.arange(p)
    obj = objective(A, y, beta, lam)
    trace = [obj]
    sweeps = 0

    def after_sweep():
        nonlocal obj
        new = 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())
        if new > obj + MONOTONE_SLACK * max(1.0, abs(obj)):
            raise RuntimeError(f"objective increased across a sweep: {obj!r} -> {new!r}")
        obj = new
        trace.append(new)

    while sweeps < max_sweeps:
        _sweep(Xt, colsq, r, beta, lam, everything)
        sweeps += 1
        after_sweep()
        if kkt_residual(A, y, beta, lam) <= tol:
            return _make_fit(A, y, beta, lam, sweeps, True, trace)
        active = np.flatnonzero(beta)
        while active.size and sweeps < max_sweeps:
            _sweep(Xt, colsq, r, beta, lam, active)
            sweeps += 1
            after_sweep()
            c = Xt[active] @ r
            if np.max(np.abs(c - lam * np.sign(beta[active]))) <= 0.5 * tol:
                break
            active = np.flatnonzero(beta)

    raise NotConverged(_make_fit(A, y, beta, lam, sweeps, False, trace))


def sparsify_support(fit_: LassoFit, X: DesignMatrix, y, n: int | None = None,
                     tol: float = 1e-10) -> LassoFit:
    """Move an optimal solution onto a support of at most ``n`` columns.

    While the support is larger than n, its columns are linearly dependent: take
    a null vector z of X_A (||X_A z|| <= tol), slide beta_A along z until the
    first coordinate hits zero, drop that column and re-solve the LASSO on the
    remaining ones from that warm start.  Optimality forces sign(beta_A)^t z = 0,
    so the fitted values and the l1 norm, hence the objective, are unchanged.
    """
    if n is None:
        n = X.n
    y = np.asarray(y, dtype=float)
    lam = fit_.lam
    support = fit_.support.tolist()
    if len(support) <= n:
        return fit_
    A = X.values
    beta = np.array(fit_.beta_hat, dtype=float)
    while len(support) > n:
        XA = A[:, support]
        _, svals, Vt = np.linalg.svd(XA, full_matrices=True)
        z = Vt[-1]
        if np.linalg.norm(XA @ z) > tol:
            raise ReductionFailed("active columns are not linearly dependent within tolerance")
        bA = beta[support]
        nz = np.flatnonzero(np.abs(z) > 1e-14)
        ratios = np.abs(bA[nz] / z[nz])
        k = int(nz[np.argmin(ratios)])
        bA = bA - (bA[k] / z[k]) * z
        bA[k] = 0.0
        keep = [j for i, j in enumerate(support) if i != k]
        sub = DesignMatrix(A[:, keep], normalized=X.normalized)
        warm = np.array([bA[i] for i in range(len(support)) if i != k])
        refit = fit(sub, y, lam, tol=tol, beta0=warm)
        beta = np.zeros_like(beta)
        beta[keep] = refit.beta_hat
        support = [j for j in keep if abs(beta[j]) > SUPPORT_THRESHOLD]
    new = _make_fit(A, y, beta, lam, fit_.sweeps, True, [])
    if abs(new.objective - fit_.objective) > tol * max(1.0, abs(fit_.objective)):
        raise ReductionFailed(
            f"objective moved from {fit_.objective!r} to {new.objective!r} during reduction")
    return new


# -- prediction bound constants ------------------------------------------------

@dataclass(frozen=True)
class TheoremInputs:
    """Quantities entering the lambda rule and the prediction bound.

    ``sigma_min_S`` and ``sigma_max_star`` are either exact values (small
    instances) or proxies such as the coherence sandwich; ``source`` records
    which.  ``gamma`` is the index at subset size nu*n, or an upper bound.
    """

    sigma: float
    alpha: float
    p: int
    nu: float
    n: int
    rho_minus: float
    sigma_min_S: float
    sigma_max_star: float
    gamma: float
    source: str = "exact"

    def __post_init__(self):
        checks = [
            (self.sigma >= 0, "sigma must be >= 0"),
            (self.alpha > 0, "alpha must be > 0"),
            (self.p >= 1, "p must be >= 1"),
            (self.nu > 0, "nu must be > 0"),
            (self.n >= 1, "n must be >= 1"),
            (0 < self.rho_minus < 1, "rho_minus must lie in (0, 1)"),
            (self.sigma_min_S >= 0, "sigma_min_S must be >= 0"),
            (self.sigma_max_star > 0, "sigma_max_star must be > 0"),
            (self.gamma >= 0, "gamma must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise OutOfRange(msg)

    @property
    def nu_n(self) -> float:
        return self.nu * self.n


@dataclass
class BoundReport:
    precondition_nu_ok: bool
    B: float | None
    lambda_min: float | None
    C: float | None
    probability_headline: float
    probability_union: float
    inputs: dict
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _sqrt_checked(x, what):
    if x < 0:
        raise OutOfRange(f"{what} has a negative radicand ({x}); need larger p or nu*n")
    return math.sqrt(x)


def noise_level_terms(alpha: float, p: float, nu_n: float):
    """``(sqrt((2a+1) log p + log 2), sqrt(2a log p + log(2 nu n)))``."""
    t_full = _sqrt_checked((2 * alpha + 1) * math.log(p) + math.log(2), "(2a+1)log p + log 2")
    t_sub = _sqrt_checked(2 * alpha * math.log(p) + math.log(2 * nu_n), "2a log p + log(2 nu n)")
    return t_full, t_sub


def constant_C(inputs: TheoremInputs, lam: float, p_eff: float | None = None) -> float:
    p_eff = inputs.p if p_eff is None else p_eff
    t_full, t_sub = noise_level_terms(inputs.alpha, p_eff, inputs.nu_n)
    denom = inputs.rho_minus * inputs.sigma_min_S
    if denom <= 0:
        return math.inf
    return (lam + inputs.sigma * t_full) * (inputs.sigma * t_sub + lam) / denom


def lambda_min_theorem(inputs: TheoremInputs, p_eff: float | None = None) -> BoundReport:
    """Evaluate the nu precondition, B, the smallest admissible lambda and C there.

    ``p_eff`` replaces p inside the logarithms (used for the augmented design).
    """
    p_eff = inputs.p if p_eff is None else p_eff
    nn, g = inputs.nu_n, inputs.gamma
    denom = inputs.rho_minus * inputs.sigma_min_S - nn * g * inputs.sigma_max_star
    ok = denom > 0
    notes = []
    t_full, t_sub = noise_level_terms(inputs.alpha, p_eff, nn)
    if ok:
        B = nn * g / denom
        lam = inputs.sigma * (B * inputs.sigma_max_star * t_sub + t_full)
        C = constant_C(inputs, lam, p_eff) if lam > 0 else None
    else:
        B = lam = C = None
        notes.append("nu precondition fails: rho*sigma_min(X_S) <= nu*n*gamma*sigma_max")
    notes.append(f"sigma bounds source: {inputs.source}")
    d = asdict(inputs)
    d["p_effective"] = p_eff
    return BoundReport(
        precondition_nu_ok=bool(ok),
        B=B,
        lambda_min=lam,
        C=C,
        probability_headline=1.0 - p_eff ** (-inputs.alpha),
        probability_union=1.0 - 3.0 * p_eff ** (-inputs.alpha),
        inputs=d,
        notes=notes,
    )


def prediction_bound(inputs: TheoremInputs, lam: float, s: int, p_eff: float | None = None) -> float:
    """``s * C``: bound on half the squared prediction error."""
    if s > inputs.nu_n + 1e-12:
        raise SparsityTooLarge(f"s={s} exceeds nu*n={inputs.nu_n}")
    return s * constant_C(inputs, lam, p_eff)
