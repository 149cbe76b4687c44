"""Dense design matrices, coherence and restricted extreme singular values."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyIndexSet,
    NotNormalized,
    OutOfRange,
    RowMismatch,
    TooFewColumns,
    ZeroColumn,
)

NORM_TOL = 1e-12


@dataclass(frozen=True)
class DesignMatrix:
    """An ``n x p`` real matrix plus a flag recording unit-norm columns.

    The array is copied and made read-only, so instances can be shared freely.
    ``p == 0`` is allowed and denotes an empty block (used for concatenation
    identities and for appending zero random columns).
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        a = np.array(self.values, dtype=float, copy=True)
        if a.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D array, got shape {a.shape}")
        if a.shape[0] < 1:
            raise DimensionMismatch("a design matrix needs at least one row")
        if not np.all(np.isfinite(a)):
            raise OutOfRange("design matrix contains non-finite entries")
        if self.normalized and a.shape[1]:
            norms = np.linalg.norm(a, axis=0)
            if np.max(np.abs(norms - 1.0)) > NORM_TOL:
                raise NotNormalized("normalized flag set but columns are not unit norm")
        a.flags.writeable = False
        object.__setattr__(self, "values", a)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def columns(self, T) -> np.ndarray:
        return self.values[:, list(T)]

    @classmethod
    def identity(cls, n: int) -> "DesignMatrix":
        return cls(np.eye(n), normalized=True)

    @classmethod
    def empty(cls, n: int) -> "DesignMatrix":
        return cls(np.zeros((n, 0)), normalized=True)


@dataclass(frozen=True)
class IndexSet:
    """Strictly increasing tuple of 0-based column indices."""

    indices: tuple = field(default_factory=tuple)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise OutOfRange(f"indices must be strictly increasing: {idx}")
        if idx and idx[0] < 0:
            raise OutOfRange(f"negative index in {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, indices, p: int | None = None) -> "IndexSet":
        """Build from any iterable of distinct ints, sorting them first."""
        idx = sorted(int(i) for i in indices)
        if len(set(idx)) != len(idx):
            raise OutOfRange(f"duplicate indices in {idx}")
        if p is not None and idx and idx[-1] >= p:
            raise OutOfRange(f"index {idx[-1]} out of range for p={p}")
        return cls(tuple(idx))

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def __contains__(self, j):
        return j in self.indices

    def tolist(self) -> list:
        return list(self.indices)


@dataclass(frozen=True)
class SpectralInterval:
    sigma_min: float
    sigma_max: float

    def __post_init__(self):
        if not 0.0 <= self.sigma_min <= self.sigma_max:
            raise OutOfRange(
                f"need 0 <= sigma_min <= sigma_max, got ({self.sigma_min}, {self.sigma_max})"
            )

    def contains(self, other: "SpectralInterval", tol: float = 1e-12) -> bool:
        return (self.sigma_min <= other.sigma_min + tol
                and other.sigma_max <= self.sigma_max + tol)


def normalize_columns(M: DesignMatrix) -> DesignMatrix:
    a = M.values
    norms = np.linalg.norm(a, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroColumn(int(zero[0]))
    return DesignMatrix(a / norms, normalized=True)


def _require_normalized(X: DesignMatrix):
    if not X.normalized:
        raise NotNormalized("operation requires a column-normalized design matrix")


def coherence(X: DesignMatrix) -> float:
    """Largest absolute inner product between two distinct columns."""
    _require_normalized(X)
    if X.p < 2:
        raise TooFewColumns(f"coherence needs at least 2 columns, got {X.p}")
    G = np.abs(X.values.T @ X.values)
    np.fill_diagonal(G, 0.0)
    return float(min(G.max(), 1.0))


def gram_eigenvalues(A: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of ``A^t A``, clipped at zero."""
    return np.clip(np.linalg.eigvalsh(A.T @ A), 0.0, None)


def submatrix_extremes(X: DesignMatrix, T) -> SpectralInterval:
    T = list(T)
    if not T:
        raise EmptyIndexSet("submatrix_extremes needs a non-empty index set")
    ev = gram_eigenvalues(X.values[:, T])
    return SpectralInterval(math.sqrt(ev[0]), math.sqrt(ev[-1]))


def coherence_sigma_bounds(mu: float, t: int) -> SpectralInterval:
    """Bracket on the singular values of any t-column submatrix given coherence mu.

    The lower end is clamped at zero.
    """
    if not 0.0 <= mu <= 1.0:
        raise OutOfRange(f"coherence must lie in [0, 1], got {mu}")
    if t < 1:
        raise OutOfRange(f"t must be >= 1, got {t}")
    r = mu * math.sqrt(t)
    return SpectralInterval(max(0.0, 1.0 - r), 1.0 + r)


def concat(X: DesignMatrix, X0: DesignMatrix) -> DesignMatrix:
    if X.n != X0.n:
        raise RowMismatch(f"row counts differ: {X.n} vs {X0.n}")
    _require_normalized(X)
    _require_normalized(X0)
    return DesignMatrix(np.hstack([X.values, X0.values]), normalized=True)


def spectral_norm(A: np.ndarray) -> float:
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


# -- CSV I/O -----------------------------------------------------------------

def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless numeric CSV into a 2-D float array.

    Rows must all have the same length and every entry must parse to a finite
    float (decimal point is always ``.``).
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise OutOfRange(f"{path}:{lineno}: {exc}") from None
            rows.append(vals)
    if not rows:
        raise DimensionMismatch(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DimensionMismatch(f"{path}: rows have differing lengths {sorted(widths)}")
    a = np.array(rows, dtype=float)
    if not np.all(np.isfinite(a)):
        raise OutOfRange(f"{path}: non-finite entry")
    return a


def load_design(path, normalize: bool = True) -> DesignMatrix:
    M = DesignMatrix(read_matrix_csv(path))
    return normalize_columns(M) if normalize else M


def load_vector(path) -> np.ndarray:
    a = read_matrix_csv(path)
    if a.shape[1] != 1:
        raise DimensionMismatch(f"{path}: expected a single column, got {a.shape[1]}")
    return a[:, 0]


def write_matrix_csv(path, a) -> None:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        for row in a:
            w.writerow([repr(float(x)) for x in row])
