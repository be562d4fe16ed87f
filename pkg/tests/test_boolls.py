import time

import numpy as np
import pytest

from boolmf import (
    BinaryMatrix,
    BoolLsInstance,
    RealMatrix,
    SolveBudget,
    brute_force_column,
    reconstruction_error,
    solve_column,
    solve_matrix,
)
from conftest import noisy_column_instance, random_binary


class TestSolveBudget:
    def test_rejects_empty_budget(self):
        with pytest.raises(ValueError):
            SolveBudget()

    def test_rejects_proof_with_limits(self):
        with pytest.raises(ValueError):
            SolveBudget(node_limit=5, require_proof=True)

    def test_helpers(self):
        assert SolveBudget.exact().require_proof
        assert SolveBudget.nodes(3).node_limit == 3
        assert SolveBudget.timed(10).deadline > time.monotonic()


class TestInstance:
    def test_column_bitsets_match_columns(self, rng):
        W = random_binary(rng, 11, 4)
        inst = BoolLsInstance(W, rng.integers(0, 2, 11))
        for k, mask in enumerate(inst.column_bitsets):
            for i in range(W.rows):
                assert (mask >> i) & 1 == W.to_array()[i, k]

    def test_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            BoolLsInstance(random_binary(rng, 5, 2), [1, 0])

    def test_real_out_of_range(self, rng):
        with pytest.raises(ValueError):
            BoolLsInstance(random_binary(rng, 2, 2), [0.5, 1.5])

    def test_per_row_cost_decomposition(self, rng):
        # error(h) == sum over covered of (x_i - 1)^2 + uncovered of x_i^2
        for _ in range(25):
            m, r = rng.integers(2, 15), rng.integers(1, 6)
            W = random_binary(rng, m, r)
            x = rng.uniform(0, 1, m)
            inst = BoolLsInstance(W, x)
            h = rng.integers(0, 2, r)
            covered = np.minimum(1, W.to_array().astype(int) @ h) == 1
            by_rows = np.sum((x[covered] - 1.0) ** 2) + np.sum(x[~covered] ** 2)
            mask = int(sum(int(b) << k for k, b in enumerate(h)))
            assert inst.error_of_mask(mask) == pytest.approx(by_rows)


class TestSolveColumnExamples:
    def test_exact_cover(self):
        W = BinaryMatrix([[1, 0], [0, 1], [1, 1]])
        res = solve_column(BoolLsInstance(W, [1, 0, 1]), SolveBudget.exact())
        assert res.error == 0
        assert res.h.tolist() == [1, 0]
        assert res.proven_optimal

    def test_tie_prefers_fewer_ones(self):
        W = BinaryMatrix([[1], [1]])
        res = solve_column(BoolLsInstance(W, [1, 0]), SolveBudget.exact())
        assert res.error == 1
        assert res.h.tolist() == [0]

    def test_noiseless_support_condition(self, rng):
        # x equal to one column, no other column inside supp(x): that column
        # alone is selected at error 0.
        x = np.array([1, 1, 0, 0, 1], dtype=np.uint8)
        others = np.array([[0, 1], [0, 0], [1, 0], [0, 1], [0, 0]], dtype=np.uint8)
        W = BinaryMatrix(np.column_stack([others[:, 0], x, others[:, 1]]))
        res = solve_column(BoolLsInstance(W, x), SolveBudget.exact())
        assert res.error == 0
        assert res.h.tolist() == [0, 1, 0]

    def test_real_valued_target(self):
        W = BinaryMatrix([[1], [1]])
        res = solve_column(BoolLsInstance(W, np.array([0.9, 0.2])), SolveBudget.exact())
        assert res.h.tolist() == [1]
        assert res.error == pytest.approx(0.65)


class TestOracleEquivalence:
    @pytest.mark.parametrize("method", ["enumerate", "branch-and-bound"])
    def test_matches_brute_force(self, rng, method):
        for t in range(120):
            m = int(rng.integers(1, 16))
            r = int(rng.integers(1, 8))
            W = random_binary(rng, m, r, p=rng.uniform(0.2, 0.8))
            x = rng.integers(0, 2, m) if t % 2 else rng.uniform(0, 1, m)
            hb, eb = brute_force_column(W, x)
            res = solve_column(BoolLsInstance(W, x), SolveBudget.exact(), method=method)
            assert res.proven_optimal
            assert res.error == pytest.approx(eb)
            assert np.array_equal(res.h, hb)

    def test_engines_agree_at_moderate_rank(self, rng):
        # Same (error, h) from both engines, including tie resolution.
        for _ in range(15):
            m, r = int(rng.integers(5, 40)), int(rng.integers(9, 14))
            W = random_binary(rng, m, r, p=0.3)
            x = rng.integers(0, 2, m)
            a = solve_column(BoolLsInstance(W, x), SolveBudget.exact(), method="enumerate")
            b = solve_column(BoolLsInstance(W, x), SolveBudget.exact(), method="branch-and-bound")
            assert a.error == b.error
            assert np.array_equal(a.h, b.h)


def _linearization_equivalence(m, r):
    """(Wh/r <= z <= Wh) iff z = min(1, Wh), exhaustively for one shape."""
    nw, nh, nz = 1 << (m * r), 1 << r, 1 << m
    W_all = ((np.arange(nw)[:, None] >> np.arange(m * r)) & 1).reshape(nw, m, r)
    h_all = (np.arange(nh)[:, None] >> np.arange(r)) & 1
    z_all = (np.arange(nz)[:, None] >> np.arange(m)) & 1
    counts = np.einsum("wmr,hr->whm", W_all, h_all)
    clipped = np.minimum(1, counts)
    # Wh/r <= z  <=>  Wh <= r z for binary z and integer Wh in {0..r}.
    lhs = (
        (counts[:, :, None, :] <= r * z_all[None, None, :, :])
        & (z_all[None, None, :, :] <= counts[:, :, None, :])
    ).all(axis=3)
    rhs = (z_all[None, None, :, :] == clipped[:, :, None, :]).all(axis=3)
    return bool((lhs == rhs).all())


class TestLinearization:
    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    @pytest.mark.parametrize("r", [1, 2, 3, 4])
    def test_exhaustive_small(self, m, r):
        assert _linearization_equivalence(m, r)

    def test_randomized_larger(self, rng):
        for _ in range(200):
            m, r = int(rng.integers(1, 30)), int(rng.integers(1, 12))
            W = random_binary(rng, m, r).to_array().astype(np.int64)
            h = rng.integers(0, 2, r)
            z = rng.integers(0, 2, m)
            wh = W @ h
            lhs = bool(np.all(wh <= r * z) and np.all(z <= wh))
            rhs = bool(np.array_equal(z, np.minimum(1, wh)))
            assert lhs == rhs


class TestBudgets:
    def test_anytime_dominates_empty_support(self, rng):
        for _ in range(40):
            W = random_binary(rng, 18, 9)
            x = rng.integers(0, 2, 18)
            inst = BoolLsInstance(W, x)
            res = solve_column(inst, SolveBudget.nodes(1))
            assert res.error <= inst.base

    def test_expired_deadline_still_returns(self, rng):
        W = random_binary(rng, 10, 5)
        inst = BoolLsInstance(W, rng.integers(0, 2, 10))
        res = solve_column(inst, SolveBudget(deadline=time.monotonic() - 1.0))
        assert res.error <= inst.base
        assert not res.proven_optimal

    def test_proof_stable_under_larger_budget(self, rng):
        for _ in range(10):
            W = random_binary(rng, 14, 6)
            x = rng.integers(0, 2, 14)
            first = solve_column(BoolLsInstance(W, x), SolveBudget.nodes(10**6))
            again = solve_column(BoolLsInstance(W, x), SolveBudget.exact())
            assert first.proven_optimal
            assert first.error == again.error

    def test_bnb_node_limit_is_anytime(self, rng):
        W = random_binary(rng, 30, 12, p=0.3)
        x = rng.integers(0, 2, 30)
        inst = BoolLsInstance(W, x)
        res = solve_column(inst, SolveBudget.nodes(5), method="branch-and-bound")
        assert not res.proven_optimal
        assert res.error <= inst.base


class TestSolveMatrix:
    def test_single_column_reduces_to_solve_column(self, rng):
        W = random_binary(rng, 12, 4)
        x = rng.integers(0, 2, 12)
        col = solve_column(BoolLsInstance(W, x), SolveBudget.exact())
        H, err, proven = solve_matrix(BinaryMatrix(x.reshape(-1, 1)), W, SolveBudget.exact())
        assert proven
        assert err == col.error
        assert H.to_array()[:, 0].tolist() == col.h.tolist()

    def test_planted_reaches_zero(self, rng):
        W = random_binary(rng, 15, 4)
        Hs = random_binary(rng, 4, 9)
        from boolmf import boolean_product

        X = boolean_product(W, Hs)
        _, err, proven = solve_matrix(X, W, SolveBudget.exact())
        assert err == 0 and proven

    def test_matches_columnwise_enumeration(self, rng):
        W = random_binary(rng, 20, 6)
        X = random_binary(rng, 20, 10)
        H, err, proven = solve_matrix(X, W, SolveBudget.exact())
        expect = sum(brute_force_column(W, X.to_array()[:, j])[1] for j in range(10))
        assert proven
        assert err == expect
        assert err == reconstruction_error(X, W, H)

    def test_real_input_matches_columnwise(self, rng):
        W = random_binary(rng, 10, 5)
        X = RealMatrix(rng.uniform(0, 1, (10, 6)))
        H, err, proven = solve_matrix(X, W, SolveBudget.exact())
        expect = sum(brute_force_column(W, X.to_array()[:, j])[1] for j in range(6))
        assert err == pytest.approx(expect)
        assert err == pytest.approx(reconstruction_error(X, W, H))

    def test_per_column_path_agrees_with_batch(self, rng):
        W = random_binary(rng, 16, 7)
        X = random_binary(rng, 16, 5)
        Hb, eb, _ = solve_matrix(X, W, SolveBudget.exact(), method="enumerate")
        Hc, ec, _ = solve_matrix(X, W, SolveBudget.exact(), method="branch-and-bound")
        assert eb == ec
        assert Hb == Hc

    def test_budgeted_matrix_solve_returns_valid_h(self, rng):
        W = random_binary(rng, 25, 10)
        X = random_binary(rng, 25, 8)
        H, err, proven = solve_matrix(X, W, SolveBudget.nodes(4))
        assert H.shape == (10, 8)
        assert err == reconstruction_error(X, W, H)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            solve_matrix(random_binary(rng, 5, 3), random_binary(rng, 4, 2), SolveBudget.exact())

    def test_deterministic_rerun(self, rng):
        W = random_binary(rng, 18, 6)
        X = random_binary(rng, 18, 7)
        a = solve_matrix(X, W, SolveBudget.exact())
        b = solve_matrix(X, W, SolveBudget.exact())
        assert a[1] == b[1] and a[0] == b[0]
