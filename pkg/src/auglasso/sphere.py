"""Uniform-on-the-sphere random matrices and the law of ``|<X_j, v>|``.

Randomness
----------
Every random stream is a PCG64 bit generator seeded through
:class:`numpy.random.SeedSequence`.  Gaussians come from
``Generator.standard_normal`` (numpy's ziggurat sampler).  Batch work derives
independent substreams from ``(master_seed, *keys)`` via the seed sequence
spawn key, so results do not depend on the order in which trials run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, gammaln

from .errors import OutOfRange
from .matrix import DesignMatrix

MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise OutOfRange(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def rng_for(seed, *keys) -> np.random.Generator:
    """Generator for the substream ``keys`` of ``seed``.

    ``rng_for(s)`` and ``rng_for(s, 3, 1)`` are statistically independent
    streams; both are fully determined by their arguments.
    """
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def sub_seed(seed, *keys) -> int:
    """A 64-bit integer seed for the substream ``keys`` of ``seed``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def random_unit_vectors(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    """``n x count`` array whose columns are i.i.d. uniform on the unit sphere."""
    G = rng.standard_normal((n, count))
    norms = np.linalg.norm(G, axis=0)
    # a Gaussian column of exact zeros has probability zero; redraw defensively
    while np.any(norms == 0.0):
        bad = norms == 0.0
        G[:, bad] = rng.standard_normal((n, int(bad.sum())))
        norms = np.linalg.norm(G, axis=0)
    return G / norms


def random_unit_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    return random_unit_vectors(rng, n, 1)[:, 0]


def sample_sphere_matrix(n: int, p0: int, seed) -> DesignMatrix:
    """``n x p0`` matrix with i.i.d. columns uniform on the unit sphere of R^n."""
    if n < 1:
        raise OutOfRange(f"n must be >= 1, got {n}")
    if p0 < 0:
        raise OutOfRange(f"p0 must be >= 0, got {p0}")
    if p0 == 0:
        return DesignMatrix.empty(n)
    X = random_unit_vectors(rng_for(seed), n, p0)
    return DesignMatrix(X, normalized=True)


@dataclass(frozen=True)
class DotLaw:
    """Law of ``|<X_j, v>|`` for X_j uniform on the sphere of R^n and a fixed unit v.

    ``<X_j, v>^2`` follows Beta(1/2, (n-1)/2), which gives the CDF in closed
    form through the regularized incomplete beta function.
    """

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise OutOfRange(f"DotLaw needs an integer dimension n >= 2, got {self.n}")

    @property
    def log_norm_const(self) -> float:
        # log of Gamma(n/2) / (sqrt(pi) Gamma((n-1)/2))
        n = self.n
        return gammaln(n / 2) - gammaln((n - 1) / 2) - 0.5 * math.log(math.pi)

    def density(self, z):
        """One-sided density of ``|<X_j, v>|`` on [0, 1) (twice the signed density)."""
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            out = 2.0 * np.exp(self.log_norm_const) * (1.0 - z * z) ** ((self.n - 3) / 2)
        return np.where((z >= 0) & (z <= 1), out, 0.0)

    def cdf(self, z):
        return dot_cdf(self, z)


def dot_cdf(law: DotLaw, z):
    """CDF ``G(z)`` of ``|<X_j, v>|``; accepts scalars or arrays in [0, 1]."""
    arr = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise OutOfRange("dot_cdf is defined on [0, 1]")
    out = betainc(0.5, (law.n - 1) / 2.0, arr * arr)
    return float(out) if out.ndim == 0 else out
