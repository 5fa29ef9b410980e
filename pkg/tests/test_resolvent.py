import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandloc.ensemble import (BandMatrixSpec, BlockBandMatrix, ScalarDensity, gaussian_band_spec, sample_batch,
                              sample_block_band, to_dense)
from bandloc.moments import resolvent_columns
from bandloc.resolvent import (Resolvent, SingularBlock, SingularShift, backward_ghat_chain, batched_chains,
                               batched_column, dense_resolvent_oracle, diag_block, entry, forward_gamma_chain,
                               offdiag_block, reverse_blocks)

from conftest import random_spec


def _rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def _truncate(M: BlockBandMatrix, k: int, lower: bool = False) -> BlockBandMatrix:
    if lower:
        return BlockBandMatrix.from_blocks(M.V[k - 1:], M.T[k - 1:])
    return BlockBandMatrix.from_blocks(M.V[:k], M.T[:k - 1])


class TestSmallCases:
    def test_single_scalar(self):
        M = BlockBandMatrix.from_blocks(np.array([[[2.0]]]))
        assert diag_block(M, 0.0, 1)[0, 0] == 0.5
        assert entry(M, 0.0, 1, 1).value == 0.5

    def test_two_by_two(self):
        M = BlockBandMatrix.from_blocks(np.array([[[2.0]], [[2.0]]]), np.array([[[1.0]]]))
        ch = forward_gamma_chain(M, 0.0)
        assert np.allclose(ch.gamma[:, 0, 0], [2.0, 1.5])
        assert diag_block(M, 0.0, 1)[0, 0] == pytest.approx(2 / 3)
        assert offdiag_block(M, 0.0, 1, 2)[0, 0] == pytest.approx(-1 / 3)
        want = np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3
        assert np.allclose(dense_resolvent_oracle(M, 0.0), want, atol=1e-15)
        assert np.allclose(Resolvent(M, 0.0).dense(), want, atol=1e-15)

    def test_first_gamma_includes_shift(self):
        M = BlockBandMatrix.from_blocks(np.array([[[2.0]], [[2.0]]]), np.array([[[1.0]]]))
        assert forward_gamma_chain(M, 0.5).gamma[0, 0, 0] == 1.5

    def test_width_one_scalar_recursion(self):
        spec = BandMatrixSpec(W=1, n=30, diag_law=ScalarDensity("gaussian"), seed=5)
        M = sample_block_band(spec)
        v, t = M.V[:, 0, 0], M.T[:, 0, 0]
        g = [v[0] - 0.3]
        for k in range(1, 30):
            g.append(v[k] - 0.3 - abs(t[k - 1]) ** 2 / g[-1])
        assert np.array_equal(forward_gamma_chain(M, 0.3).gamma[:, 0, 0], np.array(g))

    def test_diagonal_matrix_offdiag_zero(self):
        M = sample_block_band(gaussian_band_spec(1, 5, seed=2))
        R = Resolvent(M, 0.1)
        for x in range(1, 6):
            for y in range(1, 6):
                v = R.entry(x, y).value
                if x == y:
                    assert v == pytest.approx(1 / (M.V[x - 1, 0, 0].real - 0.1), rel=1e-14)
                else:
                    assert v == 0

    def test_identity_oracle(self):
        G = dense_resolvent_oracle(np.eye(4), 0.0)
        assert np.allclose(G, np.eye(4))

    def test_oracle_guards(self):
        with pytest.raises(ValueError):
            dense_resolvent_oracle(np.eye(5), 0.0, cap=4)
        with pytest.raises(SingularShift):
            dense_resolvent_oracle(np.eye(3), 1.0)

    def test_singular_block_reported(self):
        M = BlockBandMatrix.from_blocks(np.array([[[0.0]], [[1.0]]]), np.array([[[1.0]]]))
        with pytest.raises(SingularBlock) as exc:
            forward_gamma_chain(M, 0.0)
        assert exc.value.k == 1
        V = np.zeros((3, 2, 2))
        V[:] = np.eye(2)
        V[2] = [[1.0, 0.0], [0.0, 0.0]]
        with pytest.raises(SingularBlock) as exc:
            backward_ghat_chain(BlockBandMatrix.from_blocks(V, np.zeros((2, 2, 2))), 0.0)
        assert exc.value.k == 3


class TestAgainstOracle:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_all_blocks(self, seed):
        g = np.random.default_rng(seed)
        spec = random_spec(g)
        M = sample_block_band(spec)
        lam = float(g.uniform(-0.5, 0.5))
        G = dense_resolvent_oracle(M, lam)
        R = Resolvent(M, lam)
        assert R.max_cond < 1e10
        assert _rel(R.dense(), G) < 1e-8

    def test_corner_blocks_all_truncations(self, rng):
        M = sample_block_band(gaussian_band_spec(4, 40, seed=11))
        fwd = forward_gamma_chain(M, 0.2)
        bwd = backward_ghat_chain(M, 0.2)
        W = 4
        for k in range(1, 11):
            G_up = dense_resolvent_oracle(_truncate(M, k), 0.2)
            assert _rel(fwd.corner_inverse(k), G_up[-W:, -W:]) < 1e-8
            G_lo = dense_resolvent_oracle(_truncate(M, k, lower=True), 0.2)
            assert _rel(bwd.corner_inverse(k), G_lo[:W, :W]) < 1e-8

    def test_backward_chain_of_single_block(self):
        M = sample_block_band(gaussian_band_spec(3, 3, seed=1))
        bwd = backward_ghat_chain(M, 0.4)
        assert np.allclose(bwd.gamma[0], M.V[0] - 0.4 * np.eye(3))

    def test_reversal_exchanges_chains(self):
        M = sample_block_band(gaussian_band_spec(3, 18, seed=4))
        a = backward_ghat_chain(M, -0.1).gamma
        b = forward_gamma_chain(reverse_blocks(M), -0.1).gamma[::-1]
        assert np.array_equal(a, b)

    def test_residual(self):
        M = sample_block_band(gaussian_band_spec(8, 128, seed=9))
        G = Resolvent(M, 0.05).dense()
        X = to_dense(M) - 0.05 * np.eye(128)
        assert np.max(np.abs(X @ G - np.eye(128))) < 1e-9

    def test_adjoint_symmetry(self):
        M = sample_block_band(gaussian_band_spec(2, 12, seed=8))
        R = Resolvent(M, 0.0)
        for x, y in ((1, 7), (3, 12), (5, 6)):
            assert R.entry(x, y).value == pytest.approx(np.conj(R.entry(y, x).value), rel=1e-12)


class TestBatched:
    @pytest.mark.parametrize("W,n,sym", [(1, 16, "real"), (1, 10, "complex"), (3, 6, "complex"), (2, 7, "real")])
    def test_column_matches_single_matrix(self, W, n, sym):
        spec = gaussian_band_spec(W, W * n, seed=21, symmetry=sym)
        V, T = sample_batch(spec, 0, 5)
        lam = 0.15
        for x in (1, W * n // 2 + 1, W * n):
            col = batched_column(batched_chains(V, T, lam), x)
            for s in range(5):
                G = dense_resolvent_oracle(BlockBandMatrix(spec, V[s], T[s]), lam)
                assert _rel(col[s], G[:, x - 1]) < 1e-8

    def test_singular_sample_flagged(self):
        V = np.ones((3, 2, 1, 1))
        T = np.zeros((3, 1, 1, 1))
        V[1, 0, 0, 0] = 0.0
        ch = batched_chains(V, T, 0.0)
        assert ch.ok.tolist() == [True, False, True]

    def test_almost_sure_invertibility(self):
        spec = gaussian_band_spec(2, 16, seed=0)
        cols, rejected = resolvent_columns(spec, 0.0, 1, 10_000)
        assert rejected < 100
        assert np.isfinite(cols).all()
