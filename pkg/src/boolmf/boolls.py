"""Exact solver for the Boolean least-squares column subproblem.

Given a fixed binary factor W (m x r) and a target column x, find binary h
minimizing ``sum_i (x_i - c_i)^2`` where ``c = min(1, W h)``, i.e. row i is
"covered" as soon as any selected column of W has a one there.  The
objective depends on h only through its support: a covered row costs
``(x_i - 1)^2``, an uncovered row costs ``x_i^2``, so selecting columns is
a set-cover-like search over at most 2^r supports.

Two engines share the same tie-breaking contract (fewest ones in h, then
lexicographically smallest h):

* vectorized exhaustive enumeration over all supports, batched so memory
  stays bounded, used while ``2^r * m`` is small;
* best-first branch and bound on column inclusion, with the lower bound
  "penalties already locked in": zeros already covered plus ones no
  remaining column can reach.

Both are anytime: the incumbent starts at the empty support and a greedy
solution, and the best incumbent is returned if the budget runs out.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np

from .matrices import BinaryMatrix, Matrix, RealMatrix, _pack_bits, _unpack_bits

# Enumeration is used while 2^r * (m + 1) stays below this; beyond it the
# branch-and-bound engine takes over.
_ENUM_WORK_LIMIT = 1 << 24
# Masks per enumeration batch, shrunk for wide rows so scratch arrays stay
# within a few MB.
_MAX_CHUNK = 1 << 16
_DEADLINE_CHECK_EVERY = 64


@dataclass(frozen=True)
class SolveBudget:
    """Resource budget for one exact solve.

    Exactly one of two shapes is valid: an anytime budget with a deadline
    (``time.monotonic`` instant) and/or a node limit, or an unbounded exact
    solve with ``require_proof=True`` and no limits.
    """

    deadline: float | None = None
    node_limit: int | None = None
    require_proof: bool = False

    def __post_init__(self):
        has_limit = self.deadline is not None or self.node_limit is not None
        if self.require_proof and has_limit:
            raise ValueError("a proof-required budget cannot carry a deadline or node limit")
        if not self.require_proof and not has_limit:
            raise ValueError("budget needs a deadline, a node limit, or require_proof=True")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be >= 1")

    @classmethod
    def exact(cls) -> "SolveBudget":
        """Unbounded solve that must prove optimality."""
        return cls(require_proof=True)

    @classmethod
    def timed(cls, seconds: float, now: float | None = None) -> "SolveBudget":
        """Anytime solve with a wall-clock allowance from now."""
        start = time.monotonic() if now is None else now
        return cls(deadline=start + seconds)

    @classmethod
    def nodes(cls, count: int) -> "SolveBudget":
        """Anytime solve capped at a node count (machine-independent)."""
        return cls(node_limit=count)

    def expired(self, nodes_used: int = 0) -> bool:
        if self.deadline is not None and time.monotonic() >= self.deadline:
            return True
        return self.node_limit is not None and nodes_used >= self.node_limit


class BoolLsInstance:
    """One column subproblem: fixed factor W and target column x.

    Precomputes the per-column bitsets of W (bit i of ``column_bitsets[k]``
    is W[i, k]) and the per-row cost deltas used by both engines.
    """

    def __init__(self, W: BinaryMatrix, x):
        xa = np.asarray(x)
        if xa.ndim != 1 or xa.shape[0] != W.rows:
            raise ValueError(
                "target column has length %s but W has %d rows" % (xa.shape, W.rows)
            )
        self.W = W
        self.m = W.rows
        self.r = W.cols
        self.column_bitsets = W.col_masks()
        self.is_binary = np.issubdtype(xa.dtype, np.integer) or np.all(
            (xa == 0) | (xa == 1)
        )
        if self.is_binary:
            if np.any((xa != 0) & (xa != 1)):
                raise ValueError("binary target column must contain only 0/1")
            self.x = xa.astype(np.uint8)
            self.ones_mask = _pack_bits(self.x)
            self.base = int(self.ones_mask.bit_count())
        else:
            if np.any(xa < 0) or np.any(xa > 1):
                raise ValueError("real target column entries must lie in [0, 1]")
            self.x = xa.astype(np.float64)
            self.ones_mask = _pack_bits((self.x > 0.5).astype(np.uint8))
            self.base = float(np.dot(self.x, self.x))
        self.full_mask = (1 << self.m) - 1
        self.zeros_mask = self.full_mask ^ self.ones_mask
        # Cost delta when a row flips from uncovered to covered.
        self.gains = 1.0 - 2.0 * self.x.astype(np.float64)

    def coverage_delta(self, newly: int) -> int | float:
        """Error change when the rows in bitset ``newly`` become covered."""
        if self.is_binary:
            return (newly & self.zeros_mask).bit_count() - (newly & self.ones_mask).bit_count()
        if newly == 0:
            return 0.0
        return float(np.dot(self.gains, _unpack_bits(newly, self.m)))

    def error_of_cov(self, cov: int) -> int | float:
        """Error of a coverage bitset, computed canonically.

        Canonical means the float result depends only on the coverage set,
        never on the order columns were accumulated, so supports with equal
        coverage tie bit-exactly and the (ones, lex) tie rules apply.
        """
        return self.base + self.coverage_delta(cov)

    def error_of_mask(self, sel_mask: int) -> int | float:
        """Error of the support encoded by ``sel_mask`` (bit k = h_k)."""
        cov = 0
        k = 0
        mask = sel_mask
        while mask:
            if mask & 1:
                cov |= self.column_bitsets[k]
            mask >>= 1
            k += 1
        return self.error_of_cov(cov)


@dataclass(frozen=True)
class BoolLsResult:
    h: np.ndarray
    error: int | float
    proven_optimal: bool
    nodes_explored: int


def _revkey(sel_mask: int, r: int) -> int:
    """Integer whose order matches lexicographic order of the h vector."""
    key = 0
    for k in range(r):
        if sel_mask >> k & 1:
            key |= 1 << (r - 1 - k)
    return key


class _Incumbent:
    """Best support so far, ordered by (error, number of ones, lex key)."""

    __slots__ = ("error", "ones", "revkey", "mask")

    def __init__(self, error, ones, revkey, mask):
        self.error = error
        self.ones = ones
        self.revkey = revkey
        self.mask = mask

    def offer(self, error, ones, revkey, mask) -> bool:
        if (error, ones, revkey) < (self.error, self.ones, self.revkey):
            self.error, self.ones, self.revkey, self.mask = error, ones, revkey, mask
            return True
        return False


def _seed_incumbent(inst: BoolLsInstance, with_greedy: bool = True) -> _Incumbent:
    """Empty support plus greedy column additions (largest error decrease).

    The greedy error is re-evaluated canonically from its coverage so tie
    comparisons against search leaves are exact.
    """
    inc = _Incumbent(inst.base, 0, 0, 0)
    if not with_greedy:
        return inc
    cov = 0
    sel = 0
    while True:
        best_delta = None
        best_k = -1
        for k in range(inst.r):
            if sel >> k & 1:
                continue
            delta = inst.coverage_delta(inst.column_bitsets[k] & ~cov)
            if best_delta is None or delta < best_delta:
                best_delta = delta
                best_k = k
        if best_delta is None or best_delta >= 0:
            break
        sel |= 1 << best_k
        cov |= inst.column_bitsets[best_k]
    if sel:
        inc.offer(inst.error_of_cov(cov), sel.bit_count(), _revkey(sel, inst.r), sel)
    return inc


def _chunk_size(m: int) -> int:
    return int(min(_MAX_CHUNK, max(256, (1 << 22) // max(m, 1))))


def _enumerate_column(inst: BoolLsInstance, budget: SolveBudget, inc: _Incumbent):
    """Exhaustive scan of all 2^r supports in vectorized batches."""
    r = inst.r
    total = 1 << r
    chunk = _chunk_size(inst.m)
    Wf = inst.W.to_array().astype(np.float32)
    shifts = np.arange(r, dtype=np.int64)
    revw = (1 << (r - 1 - shifts)).astype(np.float64)
    nodes = 0
    while nodes < total:
        if budget.expired(nodes):
            break
        lo = nodes
        hi = min(lo + chunk, total)
        if budget.node_limit is not None:
            hi = min(hi, budget.node_limit)
        if hi <= lo:
            break
        masks = np.arange(lo, hi, dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(np.float32)
        covered = (bits @ Wf.T) > 0.5
        errs = inst.base + covered.astype(np.float64) @ inst.gains
        ones = bits.sum(axis=1).astype(np.int64)
        revs = (bits @ revw).astype(np.int64)
        emin = errs.min()
        cand = np.flatnonzero(errs == emin)
        omin = ones[cand].min()
        cand = cand[ones[cand] == omin]
        pick = cand[revs[cand].argmin()]
        err_val = int(round(emin)) if inst.is_binary else float(emin)
        inc.offer(err_val, int(omin), int(revs[pick]), int(masks[pick]))
        nodes = hi
    return nodes, nodes == total


def _branch_and_bound_column(inst: BoolLsInstance, budget: SolveBudget, inc: _Incumbent):
    """Best-first search on column inclusion.

    The bound of a node is the canonical error of its current coverage
    minus the most optimistic remaining gain (every reachable,
    still-uncovered row with negative delta covered for free).  Bounds,
    leaf errors, and incumbents are all functions of the coverage set
    alone, so mathematical ties compare bit-exactly and the (ones, lex)
    tie rules hold in this engine too.
    """
    r = inst.r
    cols = inst.column_bitsets
    # Branch on columns in decreasing order of potential gain; ties by index.
    if inst.is_binary:
        potential = [-((cols[k] & inst.ones_mask).bit_count()) for k in range(r)]
    else:
        neg = np.minimum(inst.gains, 0.0)
        potential = [
            float(np.dot(neg, _unpack_bits(cols[k], inst.m))) for k in range(r)
        ]
    order = sorted(range(r), key=lambda k: (potential[k], k))
    reach = [0] * (r + 1)
    for d in range(r - 1, -1, -1):
        reach[d] = reach[d + 1] | cols[order[d]]
    neg_rows_mask = inst.ones_mask if inst.is_binary else _pack_bits(
        (inst.gains < 0).astype(np.uint8)
    )
    neg_gains = None if inst.is_binary else np.minimum(inst.gains, 0.0)

    def bound_of(cov, depth):
        open_rows = neg_rows_mask & ~cov & reach[depth]
        err = inst.error_of_cov(cov)
        if inst.is_binary:
            return err - open_rows.bit_count()
        if open_rows == 0:
            return err
        return err + float(np.dot(neg_gains, _unpack_bits(open_rows, inst.m)))

    if inst.is_binary:
        # Integer arithmetic is exact: equality tie-pruning is sound.
        def pruned(bound, sel, ones):
            if bound > inc.error:
                return True
            if bound == inc.error:
                if ones > inc.ones:
                    return True
                if ones == inc.ones and _revkey(sel, r) >= inc.revkey:
                    return True
            return False
    else:
        # Float bounds can exceed a mathematically equal leaf error by an
        # ulp; prune only with slack and let the search visit exact ties.
        slack = 1e-9 * (1.0 + inst.base)

        def pruned(bound, sel, ones):
            return bound > inc.error + slack

    seq = 0
    heap = [(bound_of(0, 0), seq, 0, 0, 0, 0)]
    nodes = 0
    while heap:
        if nodes % _DEADLINE_CHECK_EVERY == 0 and budget.expired(nodes):
            return nodes, False
        if budget.node_limit is not None and nodes >= budget.node_limit:
            return nodes, False
        bound, _, depth, sel, cov, ones = heapq.heappop(heap)
        nodes += 1
        if pruned(bound, sel, ones):
            continue
        if depth == r:
            inc.offer(inst.error_of_cov(cov), ones, _revkey(sel, r), sel)
            continue
        k = order[depth]
        cov_in = cov | cols[k]
        sel_in = sel | (1 << k)
        b_in = bound_of(cov_in, depth + 1)
        if not pruned(b_in, sel_in, ones + 1):
            seq += 1
            heapq.heappush(heap, (b_in, seq, depth + 1, sel_in, cov_in, ones + 1))
        b_out = bound_of(cov, depth + 1)
        if not pruned(b_out, sel, ones):
            seq += 1
            heapq.heappush(heap, (b_out, seq, depth + 1, sel, cov, ones))
    return nodes, True


def _pick_method(method: str, r: int, m: int) -> str:
    if method not in ("auto", "enumerate", "branch-and-bound"):
        raise ValueError("unknown method %r" % (method,))
    if method != "auto":
        return method
    if (1 << r) * (m + 1) <= _ENUM_WORK_LIMIT:
        return "enumerate"
    return "branch-and-bound"


def solve_column(inst: BoolLsInstance, budget: SolveBudget,
                 method: str = "auto") -> BoolLsResult:
    """Minimize ``sum_i (x_i - min(1, (W h)_i))^2`` over binary h.

    Parameters
    ----------
    inst : BoolLsInstance
        The fixed factor and target column.
    budget : SolveBudget
        Deadline/node allowance, or an unbounded exact solve.
    method : str
        "auto" (default), "enumerate", or "branch-and-bound".

    Returns
    -------
    BoolLsResult
        Optimal h when the search completed (``proven_optimal=True``),
        otherwise the best incumbent found.  Ties are broken by fewest ones
        in h, then by the lexicographically smallest h.
    """
    engine = _pick_method(method, inst.r, inst.m)
    # Under a complete scan the greedy seed is redundant and, for real
    # targets, its differently-accumulated float could out-tie an equal
    # coverage found by the scan; seed it only where it can matter.
    with_greedy = engine == "branch-and-bound" or not budget.require_proof
    inc = _seed_incumbent(inst, with_greedy=with_greedy)
    if engine == "enumerate":
        nodes, proven = _enumerate_column(inst, budget, inc)
    else:
        nodes, proven = _branch_and_bound_column(inst, budget, inc)
    h = _unpack_bits(inc.mask, inst.r)
    err = int(inc.error) if inst.is_binary else float(inc.error)
    return BoolLsResult(h=h, error=err, proven_optimal=proven, nodes_explored=nodes)


def _batch_enumerate_matrix(X: Matrix, W: BinaryMatrix, budget: SolveBudget):
    """Enumerate supports once and select per-column optima for every column.

    All columns share the coverage table of W, so one pass over the 2^r
    supports scores the whole matrix.  Errors are tracked relative to the
    per-column base cost sum(x^2) and shifted back at the end.  The node
    budget counts supports scanned (shared across columns).
    """
    m, n = X.shape
    r = W.cols
    binary = isinstance(X, BinaryMatrix)
    Xf = X.to_array().astype(np.float64)
    G = 1.0 - 2.0 * Xf  # (m, n) per-column row gains
    if binary:
        bases = np.count_nonzero(X.to_array(), axis=0).astype(np.int64)
    else:
        bases = np.einsum("ij,ij->j", Xf, Xf)

    if budget.require_proof:
        # A full scan subsumes any seed; start from the empty support.
        best_err = np.zeros(n, dtype=np.float64)
        best_ones = np.zeros(n, dtype=np.int64)
        best_rev = np.zeros(n, dtype=np.int64)
        best_mask = np.zeros(n, dtype=np.int64)
    else:
        seeds = [_seed_incumbent(BoolLsInstance(W, X.to_array()[:, j])) for j in range(n)]
        best_err = np.array([s.error for s in seeds], dtype=np.float64) - bases
        best_ones = np.array([s.ones for s in seeds], dtype=np.int64)
        best_rev = np.array([s.revkey for s in seeds], dtype=np.int64)
        best_mask = np.array([s.mask for s in seeds], dtype=np.int64)

    total = 1 << r
    chunk = _chunk_size(max(m, n))
    Wf = W.to_array().astype(np.float32)
    shifts = np.arange(r, dtype=np.int64)
    revw = (1 << (r - 1 - shifts)).astype(np.float64)
    nodes = 0
    while nodes < total:
        if budget.expired(nodes):
            break
        lo = nodes
        hi = min(lo + chunk, total)
        if budget.node_limit is not None:
            hi = min(hi, budget.node_limit)
        if hi <= lo:
            break
        masks = np.arange(lo, hi, dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(np.float32)
        covered = (bits @ Wf.T) > 0.5
        E = covered.astype(np.float64) @ G  # (B, n)
        ones = bits.sum(axis=1).astype(np.int64)
        revs = (bits @ revw).astype(np.int64)
        if binary:
            Ei = np.rint(E).astype(np.int64)
            # Composite key makes one argmin apply the tie rules exactly.
            k_ones = 1 << r
            k_err = k_ones * (r + 1)
            comp = Ei * k_err + (ones * k_ones + revs)[:, None]
            picks = comp.argmin(axis=0)
            cand_err = Ei[picks, np.arange(n)].astype(np.float64)
            cand_ones = ones[picks]
            cand_rev = revs[picks]
            cand_mask = masks[picks]
            improve = (
                (cand_err < best_err)
                | ((cand_err == best_err) & (cand_ones < best_ones))
                | ((cand_err == best_err) & (cand_ones == best_ones) & (cand_rev < best_rev))
            )
            np.copyto(best_err, cand_err, where=improve)
            np.copyto(best_ones, cand_ones, where=improve)
            np.copyto(best_rev, cand_rev, where=improve)
            np.copyto(best_mask, cand_mask, where=improve)
        else:
            for j in range(n):
                col = E[:, j]
                emin = col.min()
                cidx = np.flatnonzero(col == emin)
                omin = ones[cidx].min()
                cidx = cidx[ones[cidx] == omin]
                pick = cidx[revs[cidx].argmin()]
                if (emin, omin, int(revs[pick])) < (
                    best_err[j],
                    best_ones[j],
                    best_rev[j],
                ):
                    best_err[j] = emin
                    best_ones[j] = omin
                    best_rev[j] = int(revs[pick])
                    best_mask[j] = int(masks[pick])
        nodes = hi

    proven = nodes == total
    H_cols = np.stack([_unpack_bits(int(mk), r) for mk in best_mask], axis=1)
    if binary:
        total_err = int((best_err.astype(np.int64) + bases).sum())
    else:
        total_err = float((best_err + bases).sum())
    return BinaryMatrix(H_cols), total_err, proven


def solve_matrix(X: Matrix, W: BinaryMatrix, budget: SolveBudget,
                 method: str = "auto"):
    """Solve every column subproblem of ``min ||X - min(1, W H)||_F^2``.

    The columns are independent; while enumeration applies they are scored
    jointly against one shared coverage table, otherwise each column gets an
    even share of the remaining budget.

    Returns
    -------
    (H, error, all_proven) : (BinaryMatrix, int | float, bool)
        Stacked per-column solutions, their total error (equal to the
        reconstruction error of (W, H) against X), and whether every column
        was solved to proven optimality.
    """
    if X.rows != W.rows:
        raise ValueError(
            "X has %d rows but W has %d" % (X.rows, W.rows)
        )
    n = X.cols
    engine = _pick_method(method, W.cols, X.rows)
    if engine == "enumerate":
        return _batch_enumerate_matrix(X, W, budget)

    cols = []
    errors = []
    all_proven = True
    nodes_left = budget.node_limit
    for j in range(n):
        if budget.deadline is not None:
            remaining = max(0.0, budget.deadline - time.monotonic())
            col_budget = SolveBudget(
                deadline=time.monotonic() + remaining / (n - j),
                node_limit=None if nodes_left is None else max(1, nodes_left // (n - j)),
            )
        elif nodes_left is not None:
            col_budget = SolveBudget(node_limit=max(1, nodes_left // (n - j)))
        else:
            col_budget = budget
        res = solve_column(BoolLsInstance(W, X.to_array()[:, j]), col_budget, method)
        if nodes_left is not None:
            nodes_left = max(0, nodes_left - res.nodes_explored)
        cols.append(res.h)
        errors.append(res.error)
        all_proven = all_proven and res.proven_optimal
    H = BinaryMatrix(np.stack(cols, axis=1))
    total = sum(errors)
    if isinstance(X, BinaryMatrix):
        total = int(total)
    return H, total, all_proven


def brute_force_column(W: BinaryMatrix, x) -> tuple[np.ndarray, int | float]:
    """Reference oracle: try every support via the definitional formula.

    Kept deliberately independent of the solver paths (dense arithmetic on
    min(1, W h), no bitsets, no shared selection code).
    """
    Wa = W.to_array().astype(np.int64)
    xa = np.asarray(x, dtype=np.float64)
    best_h = None
    best = None
    r = W.cols
    for mask in range(1 << r):
        h = np.array([(mask >> k) & 1 for k in range(r)], dtype=np.int64)
        z = np.minimum(1, Wa @ h)
        err = float(np.sum((xa - z) ** 2))
        key = (err, int(h.sum()), tuple(h))
        if best is None or key < best:
            best = key
            best_h = h
    err = best[0]
    if np.all((xa == 0) | (xa == 1)):
        err = int(round(err))
    return best_h.astype(np.uint8), err
