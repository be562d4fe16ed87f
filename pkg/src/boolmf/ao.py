"""Alternating exact Boolean least-squares updates of H and W.

One sweep solves all columns of H for fixed W, repairs any all-zero rows of
H from the residual, then solves all rows of W for fixed H (via the
transposed problem).  Sweeps are accepted only on strict error decrease, so
the trace is strictly decreasing and, for binary inputs, the loop provably
halts.  The best accepted pair is returned.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from .boolls import SolveBudget, solve_matrix
from .matrices import (
    BinaryMatrix,
    FactorMeta,
    Factorization,
    Matrix,
    RealMatrix,
    boolean_product,
)


@dataclass(frozen=True)
class AoConfig:
    """Knobs for one alternating-optimization run."""

    max_iterations: int = 50
    subproblem_budget: SolveBudget = field(default_factory=SolveBudget.exact)
    record_trace: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class AoTrace:
    """Accepted per-sweep errors plus where the zero-row repair fired.

    ``errors`` is strictly decreasing; ``safety_triggers`` holds
    ``(iteration, repaired_row_indices)`` pairs.
    """

    errors: list = field(default_factory=list)
    safety_triggers: list = field(default_factory=list)


def safety_reinit(X: Matrix, W: BinaryMatrix, H: BinaryMatrix) -> BinaryMatrix:
    """Replace all-zero rows of H with the largest uncovered residual rows.

    The residual is ``max(0, X - min(1, WH))`` entrywise.  Its rows are
    ranked by row sum (ties toward the smallest row index) and assigned, in
    decreasing-sum order, to the zero rows of H in increasing index order.
    The inserted row is the 0/1 support of the residual row, so a row stays
    zero only when fewer nonzero residual rows exist than zero rows of H.
    """
    Ha = H.to_array()
    zero_rows = np.flatnonzero(~Ha.any(axis=1))
    if zero_rows.size == 0:
        return H
    Z = boolean_product(W, H)
    R = np.maximum(0.0, X.to_array().astype(np.float64) - Z.to_array())
    sums = R.sum(axis=1)
    ranked = sorted(range(X.rows), key=lambda i: (-sums[i], i))
    out = Ha.copy()
    for k, src in zip(zero_rows, ranked):
        out[k, :] = (R[src, :] > 0).astype(np.uint8)
    return BinaryMatrix(out)


def _check_bmf_input(X: Matrix):
    if isinstance(X, RealMatrix) and X.max_entry() > 1.0:
        raise ValueError("real-valued inputs to BMF must lie in [0, 1]")


def ao_bmf(X: Matrix, W0: BinaryMatrix, cfg: AoConfig | None = None,
           meta: FactorMeta | None = None) -> tuple[Factorization, AoTrace]:
    """Alternating optimization from an initial left factor.

    Parameters
    ----------
    X : BinaryMatrix or RealMatrix
        Input to factorize; real entries must lie in [0, 1].
    W0 : BinaryMatrix
        Initial m x r left factor.  An all-zero W0 is fine: the first
        H-solve returns zero rows and the safety repair re-seeds them from
        the residual.
    cfg : AoConfig
    meta : FactorMeta, optional
        Provenance to carry through (init strategy and seed); the engine
        fills in the iteration count and wall time.

    Returns
    -------
    (Factorization, AoTrace)
        The best (W, H) over all accepted sweeps and the error trace.
    """
    cfg = cfg or AoConfig()
    _check_bmf_input(X)
    if X.rows != W0.rows:
        raise ValueError("W0 has %d rows but X has %d" % (W0.rows, X.rows))
    start = time.monotonic()
    trace = AoTrace()
    W = W0
    best: tuple[BinaryMatrix, BinaryMatrix] | None = None
    best_err = np.inf
    executed = 0
    Xt = X.transpose()
    for iteration in range(1, cfg.max_iterations + 1):
        executed = iteration
        H, _, _ = solve_matrix(X, W, cfg.subproblem_budget)
        repaired = safety_reinit(X, W, H)
        if repaired is not H and cfg.record_trace:
            zero_rows = np.flatnonzero(~H.to_array().any(axis=1))
            trace.safety_triggers.append((iteration, tuple(int(k) for k in zero_rows)))
        H = repaired
        Wt, err, _ = solve_matrix(Xt, H.transpose(), cfg.subproblem_budget)
        W = Wt.transpose()
        if err < best_err:
            best = (W, H)
            best_err = err
            if cfg.record_trace:
                trace.errors.append(err)
            if best_err == 0:
                break
        else:
            break

    meta = meta or FactorMeta()
    meta = dataclasses.replace(
        meta, ao_iterations=executed, wall_time=time.monotonic() - start
    )
    fact = Factorization.fitted(X, best[0], best[1], meta)
    assert fact.error == best_err
    return fact, trace


def ao_bmf_row_init(X: Matrix, H0: BinaryMatrix, cfg: AoConfig | None = None,
                    meta: FactorMeta | None = None) -> tuple[Factorization, AoTrace]:
    """Alternating optimization starting from an initial right factor.

    Runs on the transposed problem (the objective is symmetric under
    transposition), so W is updated first.
    """
    fact, trace = ao_bmf(X.transpose(), H0.transpose(), cfg, meta)
    swapped = Factorization.fitted(
        X, fact.H.transpose(), fact.W.transpose(), fact.meta
    )
    assert swapped.error == fact.error
    return swapped, trace
