"""Pooling rank-one factors from many factorizations and recombining them.

Every rank-r factorization contributes r binary rank-one factors (a column
of W with the matching row of H).  Deduplicated and ranked by the error of
their parent solution, those factors form a pool from which an exact
depth-first branch-and-bound picks the best subset of exactly r, warm
started with the factor sets of the input solutions so the recombined
error can never be worse than any of them.

The multistart drivers live here too: ``ms_ao`` (many independently
initialized alternating-optimization runs, keep the best) and
``ms_comb_ao`` (spend 3/4 of the budget generating solutions, 1/4
recombining their pooled factors, then polish with one more AO pass).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .ao import AoConfig, ao_bmf, ao_bmf_row_init
from .boolls import SolveBudget
from .initializers import (
    InitKind,
    InitStrategy,
    NmfConfig,
    init_nmf,
    init_random_slices,
)
from .matrices import (
    BinaryMatrix,
    FactorMeta,
    Factorization,
    Matrix,
    RealMatrix,
    _pack_bits,
    _unpack_bits,
)

_BUDGET_CHECK_EVERY = 256


class RankOneFactor:
    """A binary rank-one matrix u v^T tagged with its parent's error."""

    __slots__ = ("u", "v", "parent_error", "_cells_mask")

    def __init__(self, u: np.ndarray, v: np.ndarray, parent_error):
        self.u = np.ascontiguousarray(u, dtype=np.uint8)
        self.v = np.ascontiguousarray(v, dtype=np.uint8)
        if not self.u.any() or not self.v.any():
            raise ValueError("rank-one factors must have nonzero u and v")
        self.parent_error = parent_error
        self._cells_mask = None

    @property
    def key(self) -> tuple[bytes, bytes]:
        return (self.u.tobytes(), self.v.tobytes())

    def dense(self) -> BinaryMatrix:
        return BinaryMatrix(np.outer(self.u, self.v))

    def cells_mask(self) -> int:
        """Flattened (row-major) support as a bitset over m*n cells."""
        if self._cells_mask is None:
            n = self.v.shape[0]
            vmask = _pack_bits(self.v)
            mask = 0
            for i in np.flatnonzero(self.u):
                mask |= vmask << (int(i) * n)
            self._cells_mask = mask
        return self._cells_mask


class RankOnePool:
    """Deduplicated rank-one factors, best parents first.

    Factors are ordered by parent error ascending (ties by insertion
    order) and the pool is truncated to ``max_size`` after each insertion,
    dropping factors of the worst parents.
    """

    def __init__(self, max_size: int | None = None):
        if max_size is not None and max_size < 1:
            raise ValueError("max_size must be >= 1")
        self.max_size = max_size
        self.factors: list[RankOneFactor] = []
        self._orders: dict[tuple, int] = {}
        self._counter = 0
        self._key_index: dict[tuple, int] | None = None

    def insert(self, W: BinaryMatrix, H: BinaryMatrix, error) -> "RankOnePool":
        """Add the rank-one factors of one factorization.

        Components with an all-zero column of W or row of H are dropped;
        exact duplicates of pooled factors are skipped.
        """
        if W.cols != H.rows:
            raise ValueError("factor shapes %s, %s do not conform" % (W.shape, H.shape))
        Wa, Ha = W.to_array(), H.to_array()
        added = False
        for k in range(W.cols):
            u, v = Wa[:, k], Ha[k, :]
            if not u.any() or not v.any():
                continue
            key = (u.tobytes(), v.tobytes())
            if key in self._orders:
                continue
            factor = RankOneFactor(u, v, error)
            self._orders[key] = self._counter
            self._counter += 1
            self.factors.append(factor)
            added = True
        if added:
            self.factors.sort(key=lambda f: (f.parent_error, self._orders[f.key]))
            if self.max_size is not None and len(self.factors) > self.max_size:
                for dropped in self.factors[self.max_size:]:
                    del self._orders[dropped.key]
                del self.factors[self.max_size:]
            self._key_index = None
        return self

    def index_of(self, key: tuple) -> int | None:
        if self._key_index is None:
            self._key_index = {f.key: i for i, f in enumerate(self.factors)}
        return self._key_index.get(key)

    def __len__(self) -> int:
        return len(self.factors)

    def __getitem__(self, i: int) -> RankOneFactor:
        return self.factors[i]

    def __iter__(self):
        return iter(self.factors)


def pool_insert(pool: RankOnePool, W: BinaryMatrix, H: BinaryMatrix, error) -> RankOnePool:
    """Functional alias for :meth:`RankOnePool.insert`."""
    return pool.insert(W, H, error)


@dataclass(frozen=True)
class CombineResult:
    selected: tuple[int, ...]
    error: int | float
    proven_optimal: bool
    nodes_explored: int


class _BinaryCells:
    """Popcount-based coverage costs over the flattened cells of binary X."""

    def __init__(self, X: BinaryMatrix):
        flat = X.to_array().reshape(-1)
        self.ones = _pack_bits(flat)
        full = (1 << flat.shape[0]) - 1
        self.zeros = full ^ self.ones
        self.base = int(self.ones.bit_count())

    def error(self, cov: int):
        return self.base - (cov & self.ones).bit_count() + (cov & self.zeros).bit_count()

    def delta(self, cov: int, fmask: int):
        new = fmask & ~cov
        return (new & self.zeros).bit_count() - (new & self.ones).bit_count()

    def bound(self, cov: int, reach: int):
        reachable_ones = ((cov | reach) & self.ones).bit_count()
        return (self.base - reachable_ones) + (cov & self.zeros).bit_count()


class _GenericCells:
    """Gain-vector coverage costs; exact for real-valued (and binary) X."""

    def __init__(self, X: Matrix):
        flat = X.to_array().reshape(-1).astype(np.float64)
        self.ncells = flat.shape[0]
        self.gains = 1.0 - 2.0 * flat
        self.neg_gains = np.minimum(self.gains, 0.0)
        self.neg_mask = _pack_bits((self.gains < 0).astype(np.uint8))
        self.base = float(np.dot(flat, flat))

    def _sum(self, vec: np.ndarray, cells: int):
        if cells == 0:
            return 0.0
        return float(np.dot(vec, _unpack_bits(cells, self.ncells)))

    def error(self, cov: int):
        return self.base + self._sum(self.gains, cov)

    def delta(self, cov: int, fmask: int):
        return self._sum(self.gains, fmask & ~cov)

    def bound(self, cov: int, reach: int):
        open_cells = self.neg_mask & reach & ~cov
        return self.error(cov) + self._sum(self.neg_gains, open_cells)


def _greedy_selection(cells, masks: list[int], r: int) -> tuple[int, ...]:
    """Grow a size-r selection by repeatedly adding the min-delta factor.

    While negative deltas exist this is "largest error decrease first";
    once they run out it degrades to padding with the least harmful
    remaining factors, which keeps the selection at exactly r.
    """
    chosen: list[int] = []
    taken = set()
    cov = 0
    while len(chosen) < r and len(taken) < len(masks):
        best_i = -1
        best_delta = None
        for i, fmask in enumerate(masks):
            if i in taken:
                continue
            d = cells.delta(cov, fmask)
            if best_delta is None or d < best_delta:
                best_delta = d
                best_i = i
        chosen.append(best_i)
        taken.add(best_i)
        cov |= masks[best_i]
    return tuple(sorted(chosen))


def combine(X: Matrix, pool: RankOnePool, r: int, budget: SolveBudget,
            warm_starts=()) -> CombineResult:
    """Pick exactly r pool factors minimizing the OR-reconstruction error.

    Depth-first branch and bound over factor inclusion in pool order.  The
    lower bound charges the zeros already covered plus the ones that no
    remaining candidate can reach.  The incumbent starts from a greedy
    selection and every warm start, so the result never scores worse than
    any warm start, budget-limited or not.

    Parameters
    ----------
    X : BinaryMatrix or RealMatrix
    pool : RankOnePool
        Needs at least r factors.
    r : int
    budget : SolveBudget
    warm_starts : iterable of index sets
        Each must contain exactly r distinct valid pool indices.

    Returns
    -------
    CombineResult
        Selected indices (sorted), their error, whether optimality was
        proven, and the node count.
    """
    N = len(pool)
    if N < r:
        raise ValueError("pool holds %d factors, fewer than rank %d" % (N, r))
    cells = _BinaryCells(X) if isinstance(X, BinaryMatrix) else _GenericCells(X)
    masks = [f.cells_mask() for f in pool]
    suffix = [0] * (N + 1)
    for i in range(N - 1, -1, -1):
        suffix[i] = suffix[i + 1] | masks[i]

    def eval_selection(sel) -> tuple:
        cov = 0
        for i in sel:
            cov |= masks[i]
        return cells.error(cov)

    inc_sel = _greedy_selection(cells, masks, r)
    if len(inc_sel) != r:
        raise ValueError("greedy selection could not assemble %d distinct factors" % r)
    inc_err = eval_selection(inc_sel)
    for ws in warm_starts:
        sel = tuple(sorted(ws))
        if len(sel) != r or len(set(sel)) != r:
            raise ValueError("warm start must contain exactly %d distinct indices" % r)
        if sel[0] < 0 or sel[-1] >= N:
            raise ValueError("warm start index out of range")
        err = eval_selection(sel)
        if err < inc_err:
            inc_err, inc_sel = err, sel

    nodes = 0
    proven = True
    stack = [(0, 0, 0, ())]
    while stack:
        if nodes % _BUDGET_CHECK_EVERY == 0 and budget.expired(nodes):
            proven = False
            break
        if budget.node_limit is not None and nodes >= budget.node_limit:
            proven = False
            break
        idx, s, cov, sel = stack.pop()
        nodes += 1
        if s == r:
            err = cells.error(cov)
            if err < inc_err:
                inc_err, inc_sel = err, tuple(sorted(sel))
            continue
        if idx == N or s + (N - idx) < r:
            continue
        if cells.bound(cov, suffix[idx]) >= inc_err:
            continue
        # Exclude first onto the stack so the include branch pops first.
        stack.append((idx + 1, s, cov, sel))
        stack.append((idx + 1, s + 1, cov | masks[idx], sel + (idx,)))

    return CombineResult(
        selected=tuple(sorted(inc_sel)),
        error=inc_err,
        proven_optimal=proven,
        nodes_explored=nodes,
    )


def selection_to_factors(pool: RankOnePool, selected) -> tuple[BinaryMatrix, BinaryMatrix]:
    """Stack the chosen rank-one factors into a (W, H) pair."""
    us = [pool[i].u for i in selected]
    vs = [pool[i].v for i in selected]
    return BinaryMatrix(np.stack(us, axis=1)), BinaryMatrix(np.stack(vs, axis=0))


def _resolve_strategy(strategy) -> InitKind:
    if isinstance(strategy, InitStrategy):
        return strategy.kind
    return InitKind(strategy)


def _run_kind(kind: InitKind, run_index: int) -> InitKind:
    if kind is not InitKind.ALTERNATE:
        return kind
    return InitKind.RANDOM_SLICES if run_index % 2 == 0 else InitKind.NMF_BASED


def ms_ao(X: Matrix, r: int, total_time: float | None = None,
          num_runs: int | None = None,
          strategy=InitStrategy(), master_seed: int | None = None,
          ao_config: AoConfig | None = None,
          nmf_config: NmfConfig | None = None,
          collect_traces: bool = False):
    """Multistart AO: run independently seeded AO rounds, keep the best.

    Budget is either wall-clock (``total_time`` seconds; the in-flight run
    completes, and at least one run always executes) or a fixed
    ``num_runs`` (deterministic across machines).  Per-run seeds derive
    from ``master_seed`` through a splittable stream, so a run's
    initialization is pinned by (master_seed, run_index) alone.

    Returns
    -------
    (best, runs) : (Factorization, list[Factorization])
        Ties in the best error go to the earliest run.  With
        ``collect_traces``, returns ``(best, runs, traces)``.
    """
    if total_time is None and num_runs is None:
        raise ValueError("need a total_time or a num_runs budget")
    if total_time is not None and total_time <= 0:
        raise ValueError("total_time must be > 0")
    kind = _resolve_strategy(strategy)
    if master_seed is None:
        master_seed = strategy.seed if isinstance(strategy, InitStrategy) else 0
    start = time.monotonic()
    runs: list[Factorization] = []
    traces = []
    idx = 0
    while True:
        if num_runs is not None and idx >= num_runs:
            break
        if total_time is not None and idx > 0 and time.monotonic() - start >= total_time:
            break
        run_kind = _run_kind(kind, idx)
        ss = np.random.SeedSequence(master_seed, spawn_key=(idx,))
        meta = FactorMeta(
            init_strategy=run_kind.value, seed=int(ss.generate_state(1, np.uint64)[0])
        )
        if run_kind is InitKind.RANDOM_SLICES:
            side, M0 = init_random_slices(X, r, ss)
            if side == "columns":
                fact, trace = ao_bmf(X, M0, ao_config, meta)
            else:
                fact, trace = ao_bmf_row_init(X, M0, ao_config, meta)
        else:
            W0 = init_nmf(X, r, nmf_config, seed=ss)
            fact, trace = ao_bmf(X, W0, ao_config, meta)
        runs.append(fact)
        if collect_traces:
            traces.append(trace)
        idx += 1
    best = min(runs, key=lambda f: f.error)
    if collect_traces:
        return best, runs, traces
    return best, runs


@dataclass
class MsCombDetails:
    """What happened inside one ms_comb_ao call, for reporting."""

    phase1_best_error: int | float = 0
    ao_runs_completed: int = 0
    ao_iteration_counts: tuple[int, ...] = ()
    pool_size: int = 0
    combine_error: int | float | None = None
    combine_proven: bool = False
    combine_nodes: int = 0
    polish_error: int | float | None = None


def ms_comb_ao_detailed(X: Matrix, r: int, total_time: float | None = None,
                        num_runs: int | None = None,
                        strategy=InitStrategy(), master_seed: int | None = None,
                        ao_config: AoConfig | None = None,
                        nmf_config: NmfConfig | None = None,
                        combine_node_limit: int = 500_000,
                        pool_cap: int | None = None):
    """ms_comb_ao plus a details record (see :func:`ms_comb_ao`)."""
    details = MsCombDetails()
    phase1_time = None if total_time is None else total_time * 0.75
    best1, runs = ms_ao(
        X, r, total_time=phase1_time, num_runs=num_runs, strategy=strategy,
        master_seed=master_seed, ao_config=ao_config, nmf_config=nmf_config,
    )
    details.phase1_best_error = best1.error
    details.ao_runs_completed = len(runs)
    details.ao_iteration_counts = tuple(f.meta.ao_iterations for f in runs)

    pool = RankOnePool(max_size=pool_cap if pool_cap is not None else 64 * r)
    for f in runs:
        pool.insert(f.W, f.H, f.error)
    details.pool_size = len(pool)

    candidates = [best1]
    if len(pool) >= r:
        warm = []
        for f in runs:
            keys = []
            Wa, Ha = f.W.to_array(), f.H.to_array()
            for k in range(r):
                if Wa[:, k].any() and Ha[k, :].any():
                    keys.append((Wa[:, k].tobytes(), Ha[k, :].tobytes()))
            idxs = {pool.index_of(key) for key in keys}
            if len(idxs) == r and None not in idxs:
                warm.append(tuple(sorted(idxs)))
        if total_time is not None:
            budget = SolveBudget(deadline=time.monotonic() + total_time * 0.25)
        else:
            budget = SolveBudget(node_limit=combine_node_limit)
        comb = combine(X, pool, r, budget, warm)
        details.combine_error = comb.error
        details.combine_proven = comb.proven_optimal
        details.combine_nodes = comb.nodes_explored
        W2, H2 = selection_to_factors(pool, comb.selected)
        combined = Factorization.fitted(
            X, W2, H2, FactorMeta(init_strategy="combine", seed=best1.meta.seed)
        )
        assert combined.error == comb.error
        candidates.append(combined)
        polish, _ = ao_bmf(
            X, W2, ao_config,
            FactorMeta(init_strategy="combine+ao", seed=best1.meta.seed),
        )
        details.polish_error = polish.error
        candidates.append(polish)

    best = min(candidates, key=lambda f: f.error)
    assert best.error <= best1.error
    return best, details


def ms_comb_ao(X: Matrix, r: int, total_time: float | None = None,
               num_runs: int | None = None,
               strategy=InitStrategy(), master_seed: int | None = None,
               ao_config: AoConfig | None = None,
               nmf_config: NmfConfig | None = None,
               combine_node_limit: int = 500_000,
               pool_cap: int | None = None) -> Factorization:
    """Generate solutions with multistart AO, recombine, then polish.

    Phase 1 runs :func:`ms_ao` for 3/4 of the time budget (or all of
    ``num_runs`` in count mode).  Phase 2 pools every phase-1 rank-one
    factor and solves the exact selection problem for the remaining 1/4
    (count mode uses a node limit so reruns are bit-identical), warm
    started with each phase-1 solution's own factors.  Phase 3 polishes
    the recombined factors with one more AO pass.  Returns the best
    factorization seen anywhere, which therefore never scores worse than
    the phase-1 best.  When the pool cannot supply r distinct factors the
    phase-1 best is returned as is.
    """
    best, _ = ms_comb_ao_detailed(
        X, r, total_time=total_time, num_runs=num_runs, strategy=strategy,
        master_seed=master_seed, ao_config=ao_config, nmf_config=nmf_config,
        combine_node_limit=combine_node_limit, pool_cap=pool_cap,
    )
    return best
