"""Appending a uniform-sphere block to a design and fitting the LASSO on the result."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lasso
from .errors import DimensionMismatch, Infeasible, OutOfRange
from .matrix import DesignMatrix, coherence, coherence_sigma_bounds, concat
from .sphere import check_seed, sample_sphere_matrix

# smallest allowed column count: ceil(exp(6 / sqrt(2 pi))) = ceil(10.95...) = 11
P0_FLOOR = math.ceil(math.exp(6.0 / math.sqrt(2.0 * math.pi)))
DEFAULT_P0_CAP = 10**6
_SCAN_CHUNK = 4096


def gamma_sphere_bound(p0: int) -> float:
    """``80 log(p0) / p0``, the high-probability bound on gamma for sphere matrices."""
    return 80.0 * math.log(p0) / p0


@dataclass(frozen=True)
class AugmentConfig:
    nu: float
    rho_minus: float
    sigma_min_star: float
    sigma_max_star: float
    L: float = 0.5
    p0_cap: int = DEFAULT_P0_CAP
    seed: int = 0
    p0_override: int | None = None

    def __post_init__(self):
        if not 0.0 < self.L < 1.0:
            raise OutOfRange(f"L must lie in (0, 1), got {self.L}")
        if not self.nu > 0:
            raise OutOfRange(f"nu must be > 0, got {self.nu}")
        if not 0.0 < self.rho_minus < 1.0:
            raise OutOfRange(f"rho_minus must lie in (0, 1), got {self.rho_minus}")
        if not 0.0 <= self.sigma_min_star <= self.sigma_max_star:
            raise OutOfRange("need 0 <= sigma_min_star <= sigma_max_star")
        if self.sigma_max_star <= 0:
            raise OutOfRange("sigma_max_star must be > 0")
        if self.p0_override is not None and self.p0_override < 0:
            raise OutOfRange("p0_override must be >= 0")
        check_seed(self.seed)

    def threshold(self, n: int) -> float:
        return self.L * self.rho_minus * self.sigma_min_star / (self.nu * n * self.sigma_max_star)

    @classmethod
    def from_coherence(cls, X: DesignMatrix, s: int, nu: float, rho_minus: float, **kw):
        """Config whose sigma bounds come from the coherence sandwich of X.

        sigma_min_star uses subsets of size s, sigma_max_star subsets of size n.
        """
        mu = coherence(X)
        lo = coherence_sigma_bounds(mu, s).sigma_min
        hi = coherence_sigma_bounds(mu, X.n).sigma_max
        return cls(nu=nu, rho_minus=rho_minus, sigma_min_star=lo, sigma_max_star=hi, **kw)


def choose_p0(config: AugmentConfig, n: int) -> int:
    """Smallest integer p0 >= 11 with ``80 log(p0)/p0 < threshold``.

    A linear scan (in vectorized chunks); valid because 80 log(x)/x decreases
    for x >= 3.
    """
    thr = config.threshold(n)
    if not thr > 0:
        raise Infeasible(f"augmentation threshold is {thr}; no p0 can satisfy it")
    start = P0_FLOOR
    while start <= config.p0_cap:
        stop = min(start + _SCAN_CHUNK, config.p0_cap + 1)
        x = np.arange(start, stop, dtype=float)
        hit = np.flatnonzero(80.0 * np.log(x) / x < thr)
        if hit.size:
            return int(start + hit[0])
        start = stop
    raise Infeasible(f"required p0 exceeds the cap {config.p0_cap} (threshold {thr:.4g})")


@dataclass
class AugmentedFit:
    fit: lasso.LassoFit
    beta_X: np.ndarray
    beta_0: np.ndarray
    p0: int
    seed: int
    X0: DesignMatrix

    @property
    def beta_hat(self):
        return self.fit.beta_hat

    def to_dict(self):
        return {
            "beta_X": [float(b) for b in self.beta_X],
            "beta_0": [float(b) for b in self.beta_0],
            "p0": self.p0,
            "seed": self.seed,
            "lambda": self.fit.lam,
            "objective": self.fit.objective,
            "kkt_residual": self.fit.kkt_residual,
            "support": self.fit.support.tolist(),
            "sweeps": self.fit.sweeps,
        }


def fit_augmented(X: DesignMatrix, y, lam: float, config: AugmentConfig,
                  tol: float = lasso.DEFAULT_TOL, max_sweeps: int = lasso.DEFAULT_MAX_SWEEPS):
    """Fit the LASSO on ``[X, X0]`` with X0 drawn uniformly on the sphere."""
    p0 = config.p0_override if config.p0_override is not None else choose_p0(config, X.n)
    X0 = sample_sphere_matrix(X.n, p0, config.seed)
    f = lasso.fit(concat(X, X0), y, lam, tol=tol, max_sweeps=max_sweeps)
    return AugmentedFit(f, f.beta_hat[:X.p].copy(), f.beta_hat[X.p:].copy(), p0, config.seed, X0)


def lambda_min_augmented(config: AugmentConfig, gamma_bound: float | None, n: int, p: int,
                         p0: int, sigma: float, alpha: float) -> lasso.BoundReport:
    """B', the lambda rule and C' for the augmented design.

    Logarithms use p + p0.  ``gamma_bound=None`` means the sphere bound
    80 log(p0)/p0, which bounds the index of [X, X0] because appending columns
    cannot raise it.
    """
    if gamma_bound is None:
        if p0 < 2:
            raise OutOfRange("the sphere bound needs p0 >= 2")
        gamma_bound = gamma_sphere_bound(p0)
    inputs = lasso.TheoremInputs(
        sigma=sigma, alpha=alpha, p=p, nu=config.nu, n=n, rho_minus=config.rho_minus,
        sigma_min_S=config.sigma_min_star, sigma_max_star=config.sigma_max_star,
        gamma=gamma_bound, source="a-priori sigma bounds",
    )
    rep = lasso.lambda_min_theorem(inputs, p_eff=p + p0)
    rep.inputs["p0"] = p0
    rep.notes.append(f"p0 threshold {config.threshold(n):.6g}; "
                     f"80 log(p0)/p0 = {gamma_sphere_bound(p0) if p0 >= 2 else float('nan'):.6g}")
    return rep


def augmented_prediction_error(X_sharp: DesignMatrix, beta_hat_sharp, beta_true_padded) -> float:
    """``0.5 ||X_sharp (beta_hat - beta_pad)||^2``."""
    b = np.asarray(beta_hat_sharp, dtype=float)
    t = np.asarray(beta_true_padded, dtype=float)
    if b.shape != (X_sharp.p,) or t.shape != (X_sharp.p,):
        raise DimensionMismatch(
            f"coefficient lengths {b.shape}, {t.shape} do not match p={X_sharp.p}")
    d = X_sharp.values @ (b - t)
    return float(0.5 * d @ d)


def split_prediction_error(X: DesignMatrix, X0: DesignMatrix, beta_X, beta_0, beta_true) -> float:
    """``0.5 ||X (beta_X - beta) + X0 beta_0||^2``, computed block by block."""
    d = X.values @ (np.asarray(beta_X) - np.asarray(beta_true))
    if X0.p:
        d = d + X0.values @ np.asarray(beta_0)
    return float(0.5 * d @ d)
