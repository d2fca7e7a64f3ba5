"""Dataset containers, standardization, norms, and permutation machinery."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Dataset:
    """Design matrix X (n x p) with response vector Y (length n)."""

    X: np.ndarray
    Y: np.ndarray
    feature_names: Sequence[str] | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float).ravel()
        if X.ndim != 2:
            raise ValueError("X must be a 2-d matrix")
        n, p = X.shape
        if n < 2 or p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if Y.shape[0] != n:
            raise ValueError(f"X has {n} rows but Y has length {Y.shape[0]}")
        if not np.isfinite(X).all():
            raise ValueError("X contains non-finite entries")
        if not np.isfinite(Y).all():
            raise ValueError("Y contains non-finite entries")
        if self.feature_names is not None and len(self.feature_names) != p:
            raise ValueError("feature_names length does not match p")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class Standardizer:
    """Affine column/response transform recorded by :func:`standardize`."""

    x_means: np.ndarray
    x_scales: np.ndarray
    y_mean: float
    y_scale: float

    def __post_init__(self):
        if np.any(self.x_scales <= 0) or self.y_scale <= 0:
            raise ValueError("scales must be strictly positive")

    def apply(self, d: Dataset) -> Dataset:
        X = (d.X - self.x_means) / self.x_scales
        Y = (d.Y - self.y_mean) / self.y_scale
        return Dataset(X, Y, d.feature_names)

    def invert(self, d: Dataset) -> Dataset:
        X = d.X * self.x_scales + self.x_means
        Y = d.Y * self.y_scale + self.y_mean
        return Dataset(X, Y, d.feature_names)

    def coef_to_original(self, beta_std: np.ndarray) -> tuple[np.ndarray, float]:
        """Map standardized-space coefficients to original units plus intercept."""
        beta = np.asarray(beta_std, dtype=float) * (self.y_scale / self.x_scales)
        intercept = self.y_mean - float(self.x_means @ beta)
        return beta, intercept


@dataclass(frozen=True)
class PermutationSet:
    """A batch of T permutations of {0..n-1}, optionally all derangements."""

    perms: np.ndarray
    derangement_flag: bool = False

    def __post_init__(self):
        perms = np.atleast_2d(np.asarray(self.perms, dtype=np.intp))
        T, n = perms.shape
        ref = np.arange(n)
        for t in range(T):
            if not np.array_equal(np.sort(perms[t]), ref):
                raise ValueError(f"row {t} is not a permutation of 0..{n - 1}")
            if self.derangement_flag and np.any(perms[t] == ref):
                raise ValueError(f"row {t} has a fixed point but derangement_flag is set")
        object.__setattr__(self, "perms", perms)

    @property
    def T(self) -> int:
        return self.perms.shape[0]

    @property
    def n(self) -> int:
        return self.perms.shape[1]


def standardize(d: Dataset, with_x: bool = True) -> tuple[Dataset, Standardizer]:
    """Center and rescale the data; sample (n-1 divisor) standard deviations.

    Constant columns are centered and assigned scale 1. With ``with_x=False``
    the X columns are centered only (scale 1); Y is always standardized.
    """
    if d.n < 2:
        raise ValueError("standardize requires n >= 2")
    x_means = d.X.mean(axis=0)
    if with_x:
        x_scales = d.X.std(axis=0, ddof=1)
        x_scales = np.where(x_scales > 0, x_scales, 1.0)
    else:
        x_scales = np.ones(d.p)
    y_mean = float(d.Y.mean())
    y_scale = float(d.Y.std(ddof=1))
    if y_scale == 0.0:
        y_scale = 1.0
    stz = Standardizer(x_means, x_scales, y_mean, y_scale)
    return stz.apply(d), stz


def sample_permutations(n: int, T: int, derangements: bool, seed: int) -> PermutationSet:
    """Sample T uniform permutations (or derangements, by rejection) of size n."""
    if n < 2:
        raise ValueError("need n >= 2")
    if T < 1:
        raise ValueError("need T >= 1")
    rng = np.random.default_rng(seed)
    ref = np.arange(n)
    rows = np.empty((T, n), dtype=np.intp)
    for t in range(T):
        while True:
            perm = rng.permutation(n)
            if not derangements or not np.any(perm == ref):
                rows[t] = perm
                break
    return PermutationSet(rows, derangement_flag=derangements)


def apply_permutation(y: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Return the vector with entries reordered as out[i] = y[perm[i]]."""
    y = np.asarray(y, dtype=float)
    perm = np.asarray(perm, dtype=np.intp)
    if y.shape[0] != perm.shape[0]:
        raise ValueError("length mismatch between vector and permutation")
    return y[perm]


def norm_n(v: np.ndarray) -> float:
    """Root-mean-square norm (1/n sum v_i^2)^(1/2)."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("empty vector")
    return float(np.sqrt(np.mean(v * v)))
