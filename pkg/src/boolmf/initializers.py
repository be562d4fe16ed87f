"""Initial factors for alternating optimization.

Two strategies: copy r random columns (or rows) of the input, or compute a
rough nonnegative factorization, balance the scale between each column of W
and row of H, and threshold at a random level in [0.3, 0.7].  A third
pseudo-strategy alternates between the two across multistart runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .matrices import BinaryMatrix, Matrix, RealMatrix


class InitKind(str, Enum):
    RANDOM_SLICES = "random"
    NMF_BASED = "nmf"
    ALTERNATE = "alternate"


@dataclass(frozen=True)
class InitStrategy:
    """Which initializer a multistart loop draws from, and its seed."""

    kind: InitKind = InitKind.ALTERNATE
    seed: int = 0


@dataclass(frozen=True)
class NmfConfig:
    max_iterations: int = 500
    rel_tolerance: float = 1e-4
    inner_updates: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.rel_tolerance <= 0:
            raise ValueError("rel_tolerance must be > 0")
        if self.inner_updates < 1:
            raise ValueError("inner_updates must be >= 1")


def init_random_slices(X: Matrix, r: int, seed) -> tuple[str, BinaryMatrix]:
    """Initial factor made of r random columns or rows of X.

    The side is drawn uniformly when both fit (columns need r <= n, rows
    need r <= m); the indices are drawn uniformly without replacement.
    Real-valued inputs are thresholded at 0.5 so the factor stays binary.

    Returns
    -------
    (side, factor) : (str, BinaryMatrix)
        ``("columns", W0)`` with W0 = X[:, K], or ``("rows", H0)`` with
        H0 = X[K, :].
    """
    m, n = X.shape
    can_cols = r <= n
    can_rows = r <= m
    if not (can_cols or can_rows):
        raise ValueError("rank %d exceeds both dimensions of a %dx%d input" % (r, m, n))
    rng = np.random.default_rng(seed)
    if can_cols and can_rows:
        side = "columns" if rng.integers(2) == 0 else "rows"
    else:
        side = "columns" if can_cols else "rows"
    arr = X.to_array()
    if isinstance(X, RealMatrix):
        arr = (arr >= 0.5).astype(np.uint8)
    if side == "columns":
        idx = rng.choice(n, size=r, replace=False)
        return side, BinaryMatrix(arr[:, idx])
    idx = rng.choice(m, size=r, replace=False)
    return side, BinaryMatrix(arr[idx, :])


def nmf(X: Matrix, r: int, cfg: NmfConfig | None = None, seed=0,
        return_history: bool = False):
    """Nonnegative factorization X ~ WH by exact coordinate (HALS) updates.

    Both factors start uniform in [0, 1].  One sweep updates every column
    of W then every row of H (``cfg.inner_updates`` passes each); the
    squared Frobenius objective never increases across sweeps.  Stops after
    ``cfg.max_iterations`` sweeps or when the relative objective decrease
    falls below ``cfg.rel_tolerance``.

    Returns ``(W, H)`` as RealMatrix, plus the per-sweep objective list
    when ``return_history`` is set.
    """
    cfg = cfg or NmfConfig()
    if r < 1:
        raise ValueError("rank must be >= 1")
    Xa = X.to_array().astype(np.float64)
    m, n = Xa.shape
    rng = np.random.default_rng(seed)
    W = rng.random((m, r))
    H = rng.random((r, n))
    guard = 1e-12
    history = []
    prev = None
    for _ in range(cfg.max_iterations):
        for _ in range(cfg.inner_updates):
            HHt = H @ H.T
            XHt = Xa @ H.T
            for k in range(r):
                denom = HHt[k, k]
                if denom <= guard:
                    continue
                W[:, k] = np.maximum(0.0, W[:, k] + (XHt[:, k] - W @ HHt[:, k]) / denom)
        for _ in range(cfg.inner_updates):
            WtW = W.T @ W
            WtX = W.T @ Xa
            for k in range(r):
                denom = WtW[k, k]
                if denom <= guard:
                    continue
                H[k, :] = np.maximum(0.0, H[k, :] + (WtX[k, :] - WtW[k, :] @ H) / denom)
        diff = Xa - W @ H
        obj = float(np.dot(diff.ravel(), diff.ravel()))
        history.append(obj)
        if obj == 0.0 or (prev is not None and prev - obj < cfg.rel_tolerance * prev):
            break
        prev = obj
    Wm, Hm = RealMatrix(W), RealMatrix(H)
    if return_history:
        return Wm, Hm, history
    return Wm, Hm


def normalize_scale(W: RealMatrix, H: RealMatrix) -> tuple[RealMatrix, RealMatrix]:
    """Balance each component so max(W[:, k]) equals max(H[k, :]).

    Uses the scaling freedom of a factorization: column k of W is scaled by
    alpha_k = sqrt(max(H[k, :]) / max(W[:, k])) and row k of H by its
    inverse, so the product WH is unchanged.  Components with an all-zero
    column or row are left alone.
    """
    if W.cols != H.rows:
        raise ValueError("factor shapes %s, %s do not conform" % (W.shape, H.shape))
    Wa = W.to_array().copy()
    Ha = H.to_array().copy()
    for k in range(W.cols):
        a = Wa[:, k].max()
        b = Ha[k, :].max()
        if a > 0 and b > 0:
            alpha = math.sqrt(b / a)
            Wa[:, k] *= alpha
            Ha[k, :] /= alpha
    return RealMatrix(Wa), RealMatrix(Ha)


def binarize_at(W: RealMatrix, H: RealMatrix, delta: float):
    """Threshold both factors at delta (entry >= delta becomes 1)."""
    W0 = BinaryMatrix((W.to_array() >= delta).astype(np.uint8))
    H0 = BinaryMatrix((H.to_array() >= delta).astype(np.uint8))
    return W0, H0


def binarize(W: RealMatrix, H: RealMatrix, seed):
    """Threshold both factors at one shared delta ~ Uniform[0.3, 0.7].

    Returns ``(W0, H0, delta)``.
    """
    rng = np.random.default_rng(seed)
    delta = float(rng.uniform(0.3, 0.7))
    W0, H0 = binarize_at(W, H, delta)
    return W0, H0, delta


def init_nmf(X: Matrix, r: int, cfg: NmfConfig | None = None, seed=0) -> BinaryMatrix:
    """NMF-based initial left factor: factorize, balance scales, threshold.

    The NMF randomness and the threshold draw come from independent streams
    split off the given seed, so one seed pins the whole initialization.
    The thresholded right factor is discarded; the first AO half-step
    recomputes H exactly.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    nmf_seed, delta_seed = ss.spawn(2)
    W, H = nmf(X, r, cfg, seed=nmf_seed)
    W, H = normalize_scale(W, H)
    W0, _, _ = binarize(W, H, seed=delta_seed)
    return W0
