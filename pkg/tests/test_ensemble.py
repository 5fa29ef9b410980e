import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from bandloc.ensemble import (BandMatrixSpec, BlockBandMatrix, BoxWigner, DegenerateDensity, Deterministic,
                              GaussianTriangular, GaussianWigner, HolderWigner, ScalarDensity, Symmetry,
                              UniformTriangular, bulk_row_variance, density_ratio, gaussian_band_spec,
                              law_from_dict, law_to_dict, operator_norm_statistic, sample_batch,
                              sample_block_band, sample_gaussian_band, to_dense)
from bandloc.rng import substream

from conftest import random_spec

HALF_NORMAL_MEAN = 0.7978845608028654  # sqrt(2/pi), mpmath


def _band_mask(W, n):
    b = np.arange(n * W) // W
    return np.abs(b[:, None] - b[None, :]) >= 2


class TestSampling:
    def test_width_one_is_diagonal(self):
        M = sample_gaussian_band(gaussian_band_spec(1, 3, seed=4))
        X = to_dense(M)
        assert np.all(X[~np.eye(3, dtype=bool)] == 0)
        assert np.any(np.diag(X) != 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_hermitian_and_banded(self, seed):
        spec = random_spec(np.random.default_rng(seed))
        X = to_dense(sample_block_band(spec, 0))
        assert np.array_equal(X, np.conj(X.T))
        assert np.all(X[_band_mask(spec.W, spec.n)] == 0)

    def test_real_class_has_real_entries(self):
        spec = gaussian_band_spec(3, 12, seed=1, symmetry="real")
        M = sample_block_band(spec)
        assert not np.iscomplexobj(M.V) and not np.iscomplexobj(M.T)

    def test_coupling_blocks_strictly_lower(self, rng):
        for law in (GaussianTriangular(), UniformTriangular(2.0)):
            spec = BandMatrixSpec(W=5, n=4, offdiag_law=law, seed=9)
            T = sample_block_band(spec).T
            assert np.all(np.triu(T) == 0)
            assert np.any(T != 0)

    def test_entry_scale(self):
        # E|M_{1,2}|^2 = 1/W for the Gaussian band ensemble
        spec = gaussian_band_spec(4, 32, seed=2, symmetry="complex")
        V, _ = sample_batch(spec, 0, 100_000)
        a = np.abs(V[:, 0, 0, 1]) ** 2
        se = a.std(ddof=1) / math.sqrt(a.size)
        assert abs(a.mean() - 0.25) < 3 * se

    def test_centered_entries_large_block(self):
        spec = BandMatrixSpec(W=64, n=1, diag_law=GaussianWigner(), seed=3)
        V, _ = sample_batch(spec, 0, 1000)
        a = V[:, 0, 0, 1]
        for part in (a.real, a.imag):
            assert abs(part.mean()) < 3 * part.std(ddof=1) / math.sqrt(a.size)

    def test_reproducible(self):
        spec = gaussian_band_spec(3, 15, seed=77)
        A = sample_block_band(spec, 5)
        B = sample_block_band(spec, 5)
        assert np.array_equal(A.V, B.V) and np.array_equal(A.T, B.T)
        V, T = sample_batch(spec, 3, 7)
        assert np.array_equal(V[2], A.V) and np.array_equal(T[2], A.T)
        C = sample_block_band(spec, 6)
        assert not np.array_equal(A.V, C.V)

    def test_jacobi_case(self):
        spec = BandMatrixSpec(W=1, n=6, symmetry="real", diag_law=ScalarDensity("uniform"),
                              offdiag_law=Deterministic(np.eye(1)), seed=0)
        X = to_dense(sample_block_band(spec))
        assert np.all(np.abs(np.diag(X)) <= 1)
        assert np.all(np.diag(X, 1) == 1) and np.all(np.diag(X, -1) == 1)
        assert np.all(np.triu(X, 2) == 0)

    def test_identity_couplings(self):
        spec = BandMatrixSpec(W=3, n=5, offdiag_law=Deterministic.identity(3), seed=0)
        T = sample_block_band(spec).T
        assert np.array_equal(T, np.broadcast_to(np.eye(3), T.shape))

    def test_gaussian_sampler_requires_gaussian_laws(self):
        with pytest.raises(ValueError):
            sample_gaussian_band(BandMatrixSpec(W=2, n=2, diag_law=BoxWigner()))

    def test_blocks_are_immutable(self):
        M = sample_block_band(gaussian_band_spec(2, 4))
        with pytest.raises(ValueError):
            M.V[0, 0, 0] = 1.0


class TestToDense:
    def test_single_block(self):
        V = np.array([[[1.0, 2.0], [2.0, -1.0]]])
        M = BlockBandMatrix.from_blocks(V)
        assert np.array_equal(to_dense(M), V[0])

    def test_two_by_two(self):
        M = BlockBandMatrix.from_blocks(np.zeros((2, 1, 1)), np.ones((1, 1, 1)))
        assert np.array_equal(to_dense(M), [[0.0, 1.0], [1.0, 0.0]])

    def test_block_layout(self, rng):
        spec = random_spec(rng, W=3, n=4)
        M = sample_block_band(spec)
        X = to_dense(M)
        W = 3
        for i in range(4):
            for j in range(4):
                B = X[i * W:(i + 1) * W, j * W:(j + 1) * W]
                if i == j:
                    assert np.array_equal(B, M.V[i])
                elif j == i + 1:
                    assert np.array_equal(B, M.T[i])
                elif i == j + 1:
                    assert np.array_equal(B, np.conj(M.T[j].T))
                else:
                    assert np.all(B == 0)


class TestSpecValidation:
    def test_from_size(self):
        assert gaussian_band_spec(4, 32).n == 8
        with pytest.raises(ValueError):
            gaussian_band_spec(5, 32)
        with pytest.raises(ValueError):
            gaussian_band_spec(8, 4)

    def test_positive_sizes(self):
        for W, n in ((0, 3), (2, 0), (-1, 1)):
            with pytest.raises(ValueError):
                BandMatrixSpec(W=W, n=n)

    def test_scalar_law_needs_width_one(self):
        with pytest.raises(ValueError):
            BandMatrixSpec(W=2, n=2, diag_law=ScalarDensity("cauchy"))

    def test_law_parameters(self):
        for bad in (lambda: HolderWigner(0.0), lambda: HolderWigner(1.5), lambda: BoxWigner(0, 1),
                    lambda: ScalarDensity("uniform", 1, 1), lambda: ScalarDensity("laplace")):
            with pytest.raises(ValueError):
                bad()

    def test_symmetry_parse(self):
        assert Symmetry.parse("GUE") is Symmetry.COMPLEX
        assert Symmetry.parse(1) is Symmetry.REAL
        assert Symmetry.REAL.beta == 1 and Symmetry.COMPLEX.beta == 2

    def test_json_round_trip(self):
        for spec in (gaussian_band_spec(2, 8, seed=3),
                     BandMatrixSpec(W=3, n=2, symmetry="real", diag_law=HolderWigner(0.5),
                                    offdiag_law=Deterministic(np.arange(9.0).reshape(3, 3)), seed=11),
                     BandMatrixSpec(W=1, n=4, diag_law=ScalarDensity("uniform", -2, 3),
                                    offdiag_law=UniformTriangular(0.4))):
            back = BandMatrixSpec.from_dict(spec.to_dict())
            assert back == spec

    def test_identity_payload_from_dict(self):
        law = law_from_dict({"kind": "deterministic", "payload": "identity"}, W=3)
        assert np.array_equal(law.payload, np.eye(3))
        assert law_to_dict(law)["payload"] == np.eye(3).tolist()


class TestLaws:
    @pytest.mark.parametrize("law", [ScalarDensity("gaussian"), ScalarDensity("cauchy"),
                                     ScalarDensity("uniform", -1.0, 2.0), HolderWigner(0.5),
                                     HolderWigner(1.0), BoxWigner(0.7, 1.0), GaussianWigner()])
    def test_diagonal_density_integrates_to_one(self, law):
        total = integrate.quad(lambda x: float(law.diag_pdf(x)), -np.inf, np.inf, limit=200)[0]
        assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8, 1.0])
    def test_holder_normalization_closed_form(self, alpha):
        law = HolderWigner(alpha)
        assert law.c_real == pytest.approx(alpha / (2 * special.gamma(1 / alpha)), rel=1e-8)
        assert law.c_complex == pytest.approx(alpha / (2 * math.pi * special.gamma(2 / alpha)), rel=1e-8)

    def test_holder_constant_frozen(self):
        # c_{1/2} = 1/4 and the complex constant, both from mpmath quadrature
        law = HolderWigner(0.5)
        assert law.c_real == pytest.approx(0.25, rel=1e-10)
        assert law.c_complex == pytest.approx(0.013262911924324611, rel=1e-8)

    @pytest.mark.parametrize("law", [HolderWigner(0.6), BoxWigner(1.3, 0.9), GaussianWigner(),
                                     GaussianWigner("trace")])
    @pytest.mark.parametrize("sym", [Symmetry.REAL, Symmetry.COMPLEX])
    def test_second_moments(self, law, sym):
        W = 6
        V = law.draw(substream(5, 0), W, sym, 20_000) * math.sqrt(W)
        d = V[:, 0, 0].real
        a = V[:, 0, 1]
        ed2, ea2 = law.second_moments(sym)
        for x, m in ((d**2, ed2), (np.abs(a) ** 2, ea2)):
            se = x.std(ddof=1) / math.sqrt(x.size)
            assert abs(x.mean() - m) < 4 * se

    def test_bulk_row_variance_gbe(self):
        for W in (1, 2, 8, 16):
            spec = gaussian_band_spec(W, 4 * W)
            assert bulk_row_variance(spec) == pytest.approx((2 * W - 1) / W)

    def test_bulk_row_variance_empirical(self):
        spec = BandMatrixSpec(W=4, n=6, diag_law=BoxWigner(1.0, 2.0), offdiag_law=UniformTriangular(1.5), seed=1)
        V, T = sample_batch(spec, 0, 4000)
        from bandloc.ensemble import dense_batch
        X = dense_batch(V, T)
        rows = np.sum(np.abs(X[:, 8:16, :]) ** 2, axis=2).mean()
        assert rows == pytest.approx(bulk_row_variance(spec), rel=0.03)


class TestDensityRatio:
    def test_identical_arguments(self, rng):
        for law in (GaussianWigner(), HolderWigner(0.5), BoxWigner()):
            V = law.draw(rng, 3, Symmetry.COMPLEX, 1)[0]
            assert density_ratio(law, V, V) == 1.0

    def test_trace_normalized_gue(self):
        r = density_ratio(GaussianWigner("trace"), [[0.1]], [[0.2]], symmetry="complex")
        assert r == pytest.approx(1.0618365465453596, rel=1e-12)

    def test_unit_gaussian_scalar(self):
        r = density_ratio(GaussianWigner(), [[0.1]], [[0.2]], symmetry="real")
        assert r == pytest.approx(math.exp(-0.5 * (0.01 - 0.04)), rel=1e-12)

    def test_box_inside_and_outside(self):
        law = BoxWigner(1.0, 1.0)
        V1 = np.array([[0.3, 0.1], [0.1, -0.4]]) / math.sqrt(2)
        V2 = np.array([[-0.5, 0.2], [0.2, 0.6]]) / math.sqrt(2)
        assert density_ratio(law, V1, V2) == 1.0
        out = np.array([[3.0, 0.0], [0.0, 0.0]])
        assert density_ratio(law, out, V2) == 0.0
        with pytest.raises(DegenerateDensity):
            density_ratio(law, V1, out)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(["gaussian", "holder", "trace"]))
    def test_reciprocity(self, seed, kind):
        law = {"gaussian": GaussianWigner(), "holder": HolderWigner(0.7), "trace": GaussianWigner("trace")}[kind]
        g = np.random.default_rng(seed)
        V1, V2 = law.draw(g, 3, Symmetry.COMPLEX, 2)
        a = density_ratio(law, V1, V2)
        b = density_ratio(law, V2, V1)
        if 0 < a < np.inf and 0 < b < np.inf:
            assert a * b == pytest.approx(1.0, rel=1e-9)


class TestOperatorNorm:
    def test_width_one_half_normal(self):
        s = operator_norm_statistic(GaussianWigner(), 1, 40_000, seed=1)
        assert abs(s.mean - HALF_NORMAL_MEAN) < 3 * s.std / math.sqrt(s.samples)
        assert s.reference == 2.0

    def test_identity_norm(self):
        s = operator_norm_statistic(Deterministic.identity(5), 5, 10)
        assert np.all(s.norms == 1.0) and s.reference == 1.0

    def test_large_block_near_two(self):
        s = operator_norm_statistic(GaussianWigner(), 128, 10, seed=2)
        assert 1.8 < s.mean < 2.1
