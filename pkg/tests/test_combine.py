import itertools

import numpy as np
import pytest

from boolmf import (
    BinaryMatrix,
    RankOnePool,
    RealMatrix,
    SolveBudget,
    boolean_product,
    combine,
    ms_ao,
    ms_comb_ao,
    ms_comb_ao_detailed,
    pool_insert,
    reconstruction_error,
    selection_to_factors,
)
from boolmf.initializers import InitKind, InitStrategy
from conftest import planted, random_binary


def exhaustive_combine(X, pool, r):
    """Oracle: score every r-subset through the definitional formula."""
    Xa = X.to_array().astype(np.float64)
    best = None
    for sel in itertools.combinations(range(len(pool)), r):
        Z = np.zeros(X.shape, dtype=np.int64)
        for i in sel:
            Z |= np.outer(pool[i].u, pool[i].v).astype(np.int64)
        err = float(np.sum((Xa - np.minimum(1, Z)) ** 2))
        if best is None or err < best[0]:
            best = (err, sel)
    return best


def make_pool(rng, m, n, count, max_size=None):
    """Pool built from `count` distinct random rank-one factors."""
    pool = RankOnePool(max_size=max_size)
    seen = set()
    while len(seen) < count:
        u = rng.integers(0, 2, m)
        v = rng.integers(0, 2, n)
        if not (u.any() and v.any()):
            continue
        key = (u.tobytes(), v.tobytes())
        if key in seen:
            continue
        seen.add(key)
        pool.insert(
            BinaryMatrix(u.reshape(-1, 1)), BinaryMatrix(v.reshape(1, -1)),
            float(rng.uniform(0, 20)),
        )
    return pool


class TestRankOnePool:
    def test_insert_counts_components(self, rng):
        X, W, H = planted(rng, 10, 8, 3)
        pool = RankOnePool()
        pool_insert(pool, W, H, 5)
        assert len(pool) <= 3

    def test_duplicate_factorization_is_noop(self, rng):
        _, W, H = planted(rng, 10, 8, 3)
        pool = RankOnePool()
        pool.insert(W, H, 5)
        size = len(pool)
        keys = [f.key for f in pool]
        pool.insert(W, H, 5)
        assert len(pool) == size
        assert [f.key for f in pool] == keys

    def test_zero_component_skipped(self, rng):
        W = BinaryMatrix([[1, 0], [1, 0]])
        H = BinaryMatrix([[1, 1], [0, 0]])  # second row all-zero
        pool = RankOnePool().insert(W, H, 1)
        assert len(pool) == 1

    def test_collision_free_pool_has_rp_factors(self, rng):
        pool = RankOnePool()
        p, r = 4, 3
        inserted = 0
        while inserted < p:
            W = random_binary(rng, 12, r)
            H = random_binary(rng, r, 12)
            ok = all(
                W.to_array()[:, k].any() and H.to_array()[k, :].any() for k in range(r)
            )
            if ok:
                before = len(pool)
                pool.insert(W, H, inserted)
                if len(pool) == before + r:  # no collisions for this one
                    inserted += 1
                else:
                    pool = RankOnePool()
                    inserted = 0
        assert len(pool) == p * r

    def test_sorted_by_parent_error_then_insertion(self, rng):
        pool = RankOnePool()
        for err in (5.0, 1.0, 3.0):
            u = rng.integers(0, 2, 6)
            u[0] = 1
            v = rng.integers(0, 2, 6)
            v[0] = 1
            pool.insert(BinaryMatrix(u.reshape(-1, 1)), BinaryMatrix(v.reshape(1, -1)), err)
        errors = [f.parent_error for f in pool]
        assert errors == sorted(errors)

    def test_truncation_keeps_best_parents(self, rng):
        pool = make_pool(rng, 6, 6, 10, max_size=4)
        assert len(pool) == 4
        errors = [f.parent_error for f in pool]
        assert errors == sorted(errors)

    def test_dense_matches_outer_product(self, rng):
        pool = make_pool(rng, 5, 7, 3)
        for f in pool:
            assert np.array_equal(f.dense().to_array(), np.outer(f.u, f.v))


class TestCombine:
    def test_unique_feasible_point(self, rng):
        X, W, H = planted(rng, 9, 9, 3)
        pool = RankOnePool().insert(W, H, reconstruction_error(X, W, H))
        if len(pool) == 3:
            res = combine(X, pool, 3, SolveBudget.exact())
            assert res.selected == (0, 1, 2)
            assert res.error == reconstruction_error(X, W, H)
            assert res.proven_optimal

    def test_exact_factors_beat_distractors(self, rng):
        X, W, H = planted(rng, 10, 10, 3)
        pool = RankOnePool()
        pool.insert(W, H, 0)
        for _ in range(5):
            u = rng.integers(0, 2, 10)
            v = rng.integers(0, 2, 10)
            if u.any() and v.any():
                pool.insert(BinaryMatrix(u.reshape(-1, 1)), BinaryMatrix(v.reshape(1, -1)), 9.0)
        res = combine(X, pool, 3, SolveBudget.exact())
        assert res.error == 0

    @pytest.mark.parametrize("real", [False, True])
    def test_matches_exhaustive_enumeration(self, rng, real):
        for _ in range(15):
            m = n = int(rng.integers(4, 7))
            N = int(rng.integers(5, 11))
            r = int(rng.integers(1, 5))
            pool = make_pool(rng, m, n, N)
            if real:
                X = RealMatrix(rng.uniform(0, 1, (m, n)))
            else:
                X = random_binary(rng, m, n)
            res = combine(X, pool, r, SolveBudget.exact())
            err, _ = exhaustive_combine(X, pool, r)
            assert res.proven_optimal
            assert res.error == pytest.approx(err, abs=1e-9)

    def test_result_no_worse_than_any_warm_start(self, rng):
        for _ in range(10):
            pool = make_pool(rng, 7, 7, 9)
            X = random_binary(rng, 7, 7)
            starts = [
                tuple(sorted(rng.choice(9, 4, replace=False).tolist()))
                for _ in range(4)
            ]
            res = combine(X, pool, 4, SolveBudget.nodes(1), warm_starts=starts)
            for ws in starts:
                Z = np.zeros((7, 7), dtype=np.int64)
                for i in ws:
                    Z |= np.outer(pool[i].u, pool[i].v).astype(np.int64)
                werr = int(np.sum(X.to_array() != np.minimum(1, Z)))
                assert res.error <= werr

    def test_selection_matches_stacked_factorization(self, rng):
        pool = make_pool(rng, 8, 6, 7)
        X = random_binary(rng, 8, 6)
        res = combine(X, pool, 3, SolveBudget.exact())
        W, H = selection_to_factors(pool, res.selected)
        assert reconstruction_error(X, W, H) == res.error
        # Dense-sum representation agrees with the stacked factorization.
        Z = np.zeros((8, 6), dtype=np.int64)
        for i in res.selected:
            Z |= np.outer(pool[i].u, pool[i].v).astype(np.int64)
        assert np.array_equal(boolean_product(W, H).to_array(), Z)

    def test_pool_too_small(self, rng):
        pool = make_pool(rng, 5, 5, 2)
        with pytest.raises(ValueError):
            combine(random_binary(rng, 5, 5), pool, 3, SolveBudget.exact())

    def test_bad_warm_start_rejected(self, rng):
        pool = make_pool(rng, 5, 5, 4)
        X = random_binary(rng, 5, 5)
        with pytest.raises(ValueError):
            combine(X, pool, 2, SolveBudget.exact(), warm_starts=[(0,)])
        with pytest.raises(ValueError):
            combine(X, pool, 2, SolveBudget.exact(), warm_starts=[(0, 9)])

    def test_budget_limited_still_feasible(self, rng):
        pool = make_pool(rng, 8, 8, 12)
        X = random_binary(rng, 8, 8)
        res = combine(X, pool, 4, SolveBudget.nodes(3))
        assert len(res.selected) == 4
        assert not res.proven_optimal


class TestMsAo:
    def test_deterministic_in_count_mode(self, rng):
        X, _, _ = planted(rng, 20, 14, 3)
        a_best, a_runs = ms_ao(X, 3, num_runs=6, master_seed=5)
        b_best, b_runs = ms_ao(X, 3, num_runs=6, master_seed=5)
        assert a_best.error == b_best.error
        assert [f.error for f in a_runs] == [f.error for f in b_runs]
        assert [f.meta.seed for f in a_runs] == [f.meta.seed for f in b_runs]

    def test_alternate_strategy_toggles(self, rng):
        X, _, _ = planted(rng, 16, 12, 2)
        _, runs = ms_ao(X, 2, num_runs=4, master_seed=1)
        assert [f.meta.init_strategy for f in runs] == ["random", "nmf", "random", "nmf"]

    def test_fixed_strategy_respected(self, rng):
        X, _, _ = planted(rng, 16, 12, 2)
        _, runs = ms_ao(X, 2, num_runs=3, master_seed=1,
                        strategy=InitStrategy(kind=InitKind.NMF_BASED))
        assert all(f.meta.init_strategy == "nmf" for f in runs)

    def test_best_is_min_with_earliest_tie(self, rng):
        X, _, _ = planted(rng, 15, 15, 2)
        best, runs = ms_ao(X, 2, num_runs=8, master_seed=9)
        errors = [f.error for f in runs]
        assert best.error == min(errors)
        assert runs.index(best) == errors.index(min(errors))

    def test_time_budget_runs_at_least_once(self, rng):
        X, _, _ = planted(rng, 12, 10, 2)
        _, runs = ms_ao(X, 2, total_time=1e-9, master_seed=0)
        assert len(runs) == 1

    def test_requires_some_budget(self, rng):
        with pytest.raises(ValueError):
            ms_ao(random_binary(rng, 5, 5), 2)


class TestMsCombAo:
    def test_never_worse_than_phase1(self, rng):
        for seed in range(4):
            X = random_binary(rng, 18, 14, p=0.35)
            best, details = ms_comb_ao_detailed(X, 4, num_runs=5, master_seed=seed)
            assert best.error <= details.phase1_best_error

    def test_deterministic_in_count_mode(self, rng):
        X = random_binary(rng, 16, 12, p=0.4)
        a = ms_comb_ao(X, 3, num_runs=5, master_seed=3)
        b = ms_comb_ao(X, 3, num_runs=5, master_seed=3)
        assert a.error == b.error
        assert a.W == b.W and a.H == b.H

    def test_planted_instance_reaches_zero(self, rng):
        X, _, _ = planted(rng, 20, 16, 3)
        best = ms_comb_ao(X, 3, num_runs=8, master_seed=2)
        assert best.error == 0

    def test_degenerate_pool_falls_back_to_phase1(self):
        X = BinaryMatrix(np.ones((4, 4), dtype=np.uint8))
        # every AO run collapses to the same single rank-one factor, so the
        # pool stays below r and phase 2 is skipped
        best, details = ms_comb_ao_detailed(X, 2, num_runs=2, master_seed=0)
        assert best.error == details.phase1_best_error
        if details.pool_size < 2:
            assert details.combine_error is None

    def test_combined_error_consistency(self, rng):
        X = random_binary(rng, 14, 11, p=0.3)
        best, details = ms_comb_ao_detailed(X, 3, num_runs=6, master_seed=4)
        if details.combine_error is not None:
            assert details.polish_error <= details.combine_error
            assert best.error <= details.combine_error
