"""The design index gamma_{s, rho}(X).

For a unit direction v, the inner problem looks for the s-column subset I with
sigma_min(X_I) >= rho that is "most orthogonal" to v, i.e. minimizes
``max_{j in I} |<X_j, v>|``; the index is the supremum of that minimum over
the unit sphere.  Two estimators live here:

* exhaustive inner minimization over the admissible family, maximized over a
  deterministic epsilon-net (certified interval, n <= 3 only);
* a Monte-Carlo estimator over random directions that, per direction, builds
  a greedy outer set of nearly-orthogonal columns and extracts a
  well-conditioned s-subset from it by random draws.  Each per-direction
  value is an upper bound on the exact inner minimum because the extracted
  subset is admissible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DimensionUnsupported,
    Exhausted,
    NoAdmissibleSubset,
    OutOfRange,
    TargetTooSmall,
    TooLarge,
)
from .matrix import DesignMatrix, IndexSet
from .sphere import random_unit_vector, rng_for

# 4 / e^{2(ln 2 - 1)}, which simplifies to e^2 ~ 7.389
KAPPA_DEFAULT = 4.0 * math.exp(-2.0 * (math.log(2.0) - 1.0))
ENUMERATION_CAP = 10**5
UNIT_TOL = 1e-10


@dataclass(frozen=True)
class GammaParams:
    s: int
    rho_minus: float

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise OutOfRange(f"s must be a positive integer, got {self.s}")
        if not 0.0 < self.rho_minus < 1.0:
            raise OutOfRange(f"rho_minus must lie in (0, 1), got {self.rho_minus}")

    def check(self, X: DesignMatrix):
        if self.s > min(X.n, X.p):
            raise OutOfRange(f"s={self.s} exceeds min(n, p)={min(X.n, X.p)}")


@dataclass(frozen=True)
class Certificate:
    """Record of one direction: the chosen subset and its inner value."""

    direction: int
    v: np.ndarray
    subset: IndexSet
    value: float
    sigma_min: float
    tries: int = 1

    def to_dict(self):
        return {
            "direction": self.direction,
            "v": [float(x) for x in self.v],
            "subset": self.subset.tolist(),
            "value": self.value,
            "sigma_min": self.sigma_min,
            "tries": self.tries,
        }


@dataclass
class GammaEstimate:
    value: float
    method: str
    directions: int
    certificates: list
    epsilon: float | None = None
    failed_directions: list = field(default_factory=list)
    notes: str = ""

    def to_dict(self, with_certificates=True):
        d = {
            "value": self.value,
            "method": self.method,
            "epsilon": self.epsilon,
            "directions": self.directions,
            "failed_directions": list(self.failed_directions),
            "notes": self.notes,
        }
        if with_certificates:
            d["certificates"] = [c.to_dict() for c in self.certificates]
        return d


@dataclass(frozen=True)
class EpsilonNet:
    dimension: int
    epsilon: float
    points: np.ndarray  # shape (count, dimension)

    def __len__(self):
        return self.points.shape[0]

    def covering_radius_probe(self, probes: int = 10_000, seed=0) -> float:
        """Largest distance from a random sphere point to its nearest net point."""
        U = random_unit_vectors_rows(rng_for(seed), self.dimension, probes)
        # |u - w|^2 = 2 - 2<u, w> for unit vectors
        best = (U @ self.points.T).max(axis=1)
        return float(np.sqrt(np.clip(2.0 - 2.0 * best, 0.0, None)).max())


class GammaInterval(NamedTuple):
    lo: float
    hi: float
    estimate: GammaEstimate


class Extraction(NamedTuple):
    subset: IndexSet
    tries: int
    gram_deviation: float
    sigma_min: float


def random_unit_vectors_rows(rng, d, count):
    G = rng.standard_normal((count, d))
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def _check_unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise OutOfRange("direction v must be a unit vector")
    return v


def abs_dots(X: DesignMatrix, v: np.ndarray) -> np.ndarray:
    """``|<X_j, v>|`` for every column, with a per-column fixed summation order.

    Each column's value does not depend on what other columns sit in the
    matrix, which keeps comparisons between X and [X, X'] exact.
    """
    return np.abs((X.values * v[:, None]).sum(axis=0))


def _subset_sigma_min(A_stack: np.ndarray) -> np.ndarray:
    G = np.einsum("kni,knj->kij", A_stack, A_stack)
    ev = np.linalg.eigvalsh(G)
    return np.sqrt(np.clip(ev[:, 0], 0.0, None))


def admissible_subsets(X: DesignMatrix, params: GammaParams, cap: int = ENUMERATION_CAP) -> list:
    """All s-subsets with sigma_min(X_I) >= rho_minus, in lexicographic order."""
    params.check(X)
    total = math.comb(X.p, params.s)
    if total > cap:
        raise TooLarge(f"C({X.p}, {params.s}) = {total} exceeds the enumeration cap {cap}")
    combos = np.array(list(itertools.combinations(range(X.p), params.s)), dtype=int)
    A = np.transpose(X.values[:, combos], (1, 0, 2))  # (K, n, s)
    keep = _subset_sigma_min(A) >= params.rho_minus
    return [IndexSet(tuple(int(i) for i in c)) for c in combos[keep]]


def inner_inf_exact(X: DesignMatrix, v, params: GammaParams, family=None):
    """Minimize ``||X_I^t v||_inf`` over the admissible family.

    Returns ``(value, subset)``; ties go to the lexicographically first subset.
    ``family`` may be passed to reuse an enumeration across many directions.
    """
    v = _check_unit(v)
    if family is None:
        family = admissible_subsets(X, params)
    if len(family) == 0:
        raise NoAdmissibleSubset(
            f"no {params.s}-subset has sigma_min >= {params.rho_minus}")
    idx = np.array([I.indices for I in family], dtype=int)
    vals = abs_dots(X, v)[idx].max(axis=1)
    k = int(np.argmin(vals))
    return float(vals[k]), family[k]


def epsilon_net(d: int, epsilon: float) -> EpsilonNet:
    """Deterministic epsilon-net (Euclidean distance) of the unit sphere of R^d, d <= 3.

    d=2 uses an angular grid with spacing at most 2 asin(eps/2).  d=3 uses
    latitude bands: with geodesic budget a = 2 asin(eps/2), band half-width
    and the longitude half-gap (scaled by the band's largest sin(theta)) are
    each at most a/2, so every point is within geodesic a, hence chord eps.
    """
    if not 0.0 < epsilon <= 2.0:
        raise OutOfRange(f"epsilon must lie in (0, 2], got {epsilon}")
    if d == 1:
        pts = np.array([[1.0], [-1.0]])
    elif d == 2:
        step = 2.0 * math.asin(epsilon / 2.0)
        k = max(2, math.ceil(2.0 * math.pi / step - 1e-12))
        th = 2.0 * math.pi * np.arange(k) / k
        pts = np.column_stack([np.cos(th), np.sin(th)])
    elif d == 3:
        a = 2.0 * math.asin(epsilon / 2.0)
        bands = max(1, math.ceil(math.pi / a - 1e-12))
        delta = math.pi / bands
        rows = []
        for i in range(bands):
            lo, hi = i * delta, (i + 1) * delta
            theta = lo + delta / 2.0
            smax = 1.0 if lo <= math.pi / 2 <= hi else max(math.sin(lo), math.sin(hi))
            k = max(1, math.ceil(2.0 * math.pi * smax / a - 1e-12))
            phi = 2.0 * math.pi * np.arange(k) / k
            st = math.sin(theta)
            rows.append(np.column_stack([st * np.cos(phi), st * np.sin(phi),
                                         np.full(k, math.cos(theta))]))
        pts = np.vstack(rows)
    else:
        raise DimensionUnsupported(
            f"epsilon nets are built for d <= 3 only (got d={d}); use random directions")
    return EpsilonNet(d, float(epsilon), pts)


def net_cardinality_bound(d: int, epsilon: float) -> float:
    return 2 * d * (1.0 + 2.0 / epsilon) ** (d - 1)


def gamma_exact(X: DesignMatrix, params: GammaParams, epsilon: float, net=None) -> GammaInterval:
    """Certified interval ``[lo, lo + eps]`` for gamma on a matrix with n <= 3 rows."""
    if X.n > 3:
        raise DimensionUnsupported(f"gamma_exact needs n <= 3, got n={X.n}")
    if net is None:
        net = epsilon_net(X.n, epsilon)
    family = admissible_subsets(X, params)
    certs = []
    for k, v in enumerate(net.points):
        val, I = inner_inf_exact(X, v, params, family=family)
        smin = float(_subset_sigma_min(X.values[:, I.tolist()][None])[0])
        certs.append(Certificate(k, v.copy(), I, val, smin))
    lo = max(c.value for c in certs)
    est = GammaEstimate(lo, "exact-net", len(net), certs, epsilon=net.epsilon)
    return GammaInterval(lo, lo + net.epsilon, est)


def outer_set_size(p: int, kappa: float, s: int) -> int:
    return min(math.ceil(kappa * s - 1e-12), p // 2)


def greedy_outer_set(X: DesignMatrix, v, kappa: float, s: int) -> IndexSet:
    """The m columns least aligned with v, picked one at a time.

    m = min(ceil(kappa * s), floor(p / 2)).  Each step takes the argmin of
    ``|<X_j, v>|`` over the columns not yet chosen; ties go to the lowest index.
    """
    v = _check_unit(v)
    m = outer_set_size(X.p, kappa, s)
    if m < s:
        raise TargetTooSmall(f"outer set size {m} is smaller than s={s}")
    z = abs_dots(X, v)
    chosen = []
    for _ in range(m):
        j = int(np.argmin(z))
        chosen.append(j)
        z[j] = np.inf
    return IndexSet.of(chosen)


def draw_conditioned_subset(X: DesignMatrix, outer: IndexSet, params: GammaParams,
                            rng: np.random.Generator, max_tries: int = 100) -> Extraction:
    """Draw uniform s-subsets of ``outer`` until one is well conditioned.

    A draw is accepted when its Gram deviation ``||X_S^t X_S - I||`` is at most
    r = 1 - rho and, as an explicit second check, sigma_min(X_S) >= rho.
    """
    s = params.s
    pool = np.asarray(outer.tolist(), dtype=int)
    if pool.size < s:
        raise TargetTooSmall(f"outer set has {pool.size} columns, need s={s}")
    r = 1.0 - params.rho_minus
    for t in range(1, max_tries + 1):
        S = np.sort(rng.choice(pool, size=s, replace=False))
        A = X.values[:, S]
        ev = np.linalg.eigvalsh(A.T @ A)
        dev = float(np.max(np.abs(ev - 1.0)))
        smin = math.sqrt(max(ev[0], 0.0))
        if dev <= r and smin >= params.rho_minus:
            return Extraction(IndexSet(tuple(int(i) for i in S)), t, dev, smin)
    raise Exhausted(max_tries)


def extract_conditioned_subset(X: DesignMatrix, outer: IndexSet, params: GammaParams,
                               max_tries: int, seed) -> IndexSet:
    return draw_conditioned_subset(X, outer, params, rng_for(seed), max_tries).subset


def gamma_estimate(X: DesignMatrix, params: GammaParams, directions: int,
                   kappa: float = KAPPA_DEFAULT, seed=0, max_tries: int = 100) -> GammaEstimate:
    """Monte-Carlo estimate of gamma over random directions.

    Direction k uses the substream ``(seed, k)`` both for v and for the subset
    draws.  The result is a maximum over finitely many directions, so it tends
    to underestimate the supremum; each per-direction value, however, is an
    upper bound on the exact inner minimum at that direction.
    """
    if directions < 1:
        raise OutOfRange(f"directions must be >= 1, got {directions}")
    params.check(X)
    certs, failed = [], []
    for k in range(directions):
        rng = rng_for(seed, k)
        v = random_unit_vector(rng, X.n)
        outer = greedy_outer_set(X, v, kappa, params.s)
        try:
            ext = draw_conditioned_subset(X, outer, params, rng, max_tries)
        except Exhausted:
            failed.append(k)
            continue
        val = float(abs_dots(X, v)[ext.subset.tolist()].max())
        certs.append(Certificate(k, v, ext.subset, val, ext.sigma_min, ext.tries))
    if not certs:
        raise Exhausted(max_tries)
    value = max(c.value for c in certs)
    return GammaEstimate(
        value, "monte-carlo-greedy", directions, certs, failed_directions=failed,
        notes="maximum over sampled directions; may underestimate the supremum",
    )


def verify_certificate(X: DesignMatrix, cert: Certificate, params: GammaParams,
                       tol: float = 1e-12) -> bool:
    I = cert.subset.tolist()
    if len(I) != params.s:
        return False
    val = float(np.abs(X.values[:, I].T @ cert.v).max())
    smin = math.sqrt(max(np.linalg.eigvalsh(X.values[:, I].T @ X.values[:, I])[0], 0.0))
    return abs(val - cert.value) <= tol and smin >= params.rho_minus - tol
