import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from bandloc.ensemble import (BandMatrixSpec, BlockBandMatrix, GaussianWigner, ScalarDensity, Symmetry,
                              gaussian_band_spec, sample_block_band, to_dense)
from bandloc.spectra import (InsufficientStatistics, dos_histogram, eigen_decompose, eigenvector_correlator,
                             minami_pair_rate, poisson_cdf, rescale_near, sample_spectra, semicircle_cdf,
                             semicircle_density, simplicity_check, spacing_distribution, surmise_cdf,
                             surmise_pdf, unfold, wegner_block_tail)

from conftest import random_spec


class TestEigen:
    def test_diagonal(self):
        s = eigen_decompose(np.diag([3.0, 1.0, 2.0]))
        assert np.array_equal(s.eigenvalues, [1.0, 2.0, 3.0])

    def test_swap_matrix(self):
        s = eigen_decompose(np.array([[0.0, 1.0], [1.0, 0.0]]), want_vectors=True)
        assert np.allclose(s.eigenvalues, [-1.0, 1.0])
        assert np.allclose(np.abs(s.eigenvectors), 1 / math.sqrt(2))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_residual_orthonormality_trace(self, seed):
        M = sample_block_band(random_spec(np.random.default_rng(seed)))
        X = to_dense(M)
        s = eigen_decompose(M, want_vectors=True)
        v, w = s.eigenvectors, s.eigenvalues
        assert np.max(np.abs(X @ v - v * w)) < 1e-10 * max(1.0, np.abs(w).max())
        assert np.allclose(np.conj(v.T) @ v, np.eye(X.shape[0]), atol=1e-10)
        assert np.sum(w) == pytest.approx(np.trace(X).real, abs=1e-10)

    def test_batch_matches_single(self):
        spec = gaussian_band_spec(2, 10, seed=6)
        ev = sample_spectra(spec, 4)
        for k in range(4):
            assert np.allclose(ev[k], eigen_decompose(sample_block_band(spec, k)).eigenvalues)

    def test_worker_invariance(self):
        spec = gaussian_band_spec(4, 64, seed=1)
        assert np.array_equal(sample_spectra(spec, 300, 1), sample_spectra(spec, 300, 3))


class TestSemicircle:
    def test_values(self):
        assert semicircle_density(0.0) == pytest.approx(1 / math.pi)
        assert semicircle_density(2.0) == 0.0 and semicircle_density(-2.5) == 0.0
        assert semicircle_density(1.0) == pytest.approx(math.sqrt(3) / (2 * math.pi))

    def test_cdf_integrates_density(self):
        for x in (-1.5, 0.0, 0.7, 2.0):
            assert semicircle_cdf(x) == pytest.approx(integrate.quad(semicircle_density, -2, x)[0], abs=1e-9)

    def test_scaling(self):
        assert semicircle_density(0.0, 2.0) == pytest.approx(1 / (2 * math.pi))

    def test_dos_matches_semicircle(self):
        h = dos_histogram(gaussian_band_spec(16, 256, seed=3), 50, bins=24, lim=1.8)
        assert h.sigma == pytest.approx(math.sqrt(31 / 16))
        assert h.sup_deviation < 0.03
        assert np.sum(h.density * np.diff(h.edges)) <= 1.0 + 1e-12

    def test_count_rate_matches_histogram(self):
        spec = gaussian_band_spec(4, 64, seed=6)
        ev = sample_spectra(spec, 400)
        h = dos_histogram(spec, 400, bins=20)
        lo, hi = h.edges[8] * h.sigma, h.edges[12] * h.sigma
        counts = ((ev >= lo) & (ev < hi)).sum(axis=1) / spec.N
        integrated = np.sum(h.density[8:12] * np.diff(h.edges)[8:12])
        assert abs(counts.mean() - integrated) < 1e-12
        ones = minami_pair_rate(spec, [hi - lo], 0.5 * (lo + hi), spectra=ev, fit_range=(0, 1)).single_rate
        assert ones[0] <= counts.mean() + 1e-12

    def test_dos_symmetry(self):
        h = dos_histogram(gaussian_band_spec(4, 64, seed=4), 200, bins=20)
        asym = np.abs(h.density - h.density[::-1])
        assert np.all(asym <= 4 * np.hypot(h.stderr, h.stderr[::-1]) + 1e-12)


class TestLocalStatistics:
    def test_rescale_eigenvalue_at_center(self):
        w = rescale_near(np.array([-1.0, 0.25, 1.0]), 0.25)
        assert 0.0 in w.rescaled

    def test_rescale_single_point(self):
        assert rescale_near(np.array([3.0]), 1.0).rescaled.tolist() == [2.0]

    def test_rescale_linear_in_size(self):
        ev = np.array([-0.4, 0.1, 0.3])
        a = rescale_near(ev, 0.05).rescaled
        b = rescale_near(np.repeat(ev, 2), 0.05).rescaled
        assert np.allclose(b[::2], 2 * a)

    def test_rescale_window(self):
        assert rescale_near(np.linspace(-1, 1, 5), 0.0, window=2.5).rescaled.tolist() == [-2.5, 0.0, 2.5]

    def test_surmise_pdf_cdf_consistent(self):
        s = np.linspace(0, 4, 2001)
        num = np.concatenate([[0.0], integrate.cumulative_trapezoid(surmise_pdf(s), s)])
        assert np.allclose(num, surmise_cdf(s), atol=1e-6)
        assert integrate.quad(lambda x: x * surmise_pdf(x), 0, np.inf)[0] == pytest.approx(1.0)
        assert poisson_cdf(0.0) == 0.0

    def test_equal_spacing(self):
        spectra = [np.arange(2000, dtype=float) for _ in range(3)]
        res = spacing_distribution(spectra, lambda0=1000.0, window=900.0)
        assert np.allclose(res.spacings, 1.0)
        assert res.mean_spacing == pytest.approx(1.0)

    def test_too_few_spacings(self):
        with pytest.raises(InsufficientStatistics):
            spacing_distribution([np.arange(10.0)], window=100.0)

    def test_histogram_normalized(self):
        ev = sample_spectra(gaussian_band_spec(1, 200, seed=2), 40)
        res = spacing_distribution(ev)
        assert np.sum(res.density * np.diff(res.edges)) == pytest.approx(1.0)
        assert 0.95 <= res.mean_spacing <= 1.05
        assert res.ks_poisson < res.ks_surmise

    def test_unfold_modes(self):
        ev = [np.sort(np.random.default_rng(k).standard_normal(50)) for k in range(4)]
        u = unfold(ev)
        assert all(np.all(np.diff(x) >= 0) for x in u)
        with pytest.raises(ValueError):
            unfold(ev, "semicircle")
        with pytest.raises(ValueError):
            unfold(ev, "other")


class TestMinami:
    def test_zero_length(self):
        res = minami_pair_rate(gaussian_band_spec(2, 16), [0.0, 0.5], samples=50, fit_range=(0.1, 1))
        assert res.rate[0] == 0.0 and res.single_rate[0] == 0.0

    def test_deterministic_spectrum(self):
        ev = np.tile([-0.3, -0.1, 0.2, 0.5], (10, 1))
        res = minami_pair_rate(None, [0.1, 0.3, 0.5, 0.7], spectra=ev, fit_range=(0.5, 0.7))
        # pairs appear once the interval covers two points
        assert res.pair_events.tolist() == [0, 0, 10, 10]

    def test_pair_rate_below_single_rate(self):
        res = minami_pair_rate(gaussian_band_spec(2, 32, seed=3), np.geomspace(0.05, 2, 8), samples=300)
        N = 32
        assert np.all(res.rate * N**2 <= res.single_rate * N + 1e-15)

    def test_insufficient(self):
        ev = np.tile([-1.0, 1.0], (5, 1))
        with pytest.raises(InsufficientStatistics):
            minami_pair_rate(None, [0.1, 3.0], spectra=ev)


class TestEigenvectors:
    def test_diagonal_ensemble(self):
        res = eigenvector_correlator(gaussian_band_spec(1, 8, seed=1), 10.0, [(1, 1), (1, 2), (3, 7)],
                                     samples=20, fit_window=3)
        assert res.values[0] == 1.0
        assert np.all(res.values[1:] == 0.0)

    def test_bounded(self):
        res = eigenvector_correlator(gaussian_band_spec(2, 16, seed=2), 0.5, samples=30)
        assert np.all((res.values >= 0) & (res.values <= 1))

    def test_empty_window_counted(self):
        spec = BandMatrixSpec(W=1, n=3, diag_law=ScalarDensity("uniform", 1.0, 2.0), seed=0)
        res = eigenvector_correlator(spec, 0.5, [(1, 1)], samples=10, fit_window=3)
        assert res.empty_draws == 10 and res.values[0] == 0.0

    def test_decays(self):
        res = eigenvector_correlator(gaussian_band_spec(2, 100, seed=5), 1.0, samples=300)
        assert res.fit is not None and res.fit.slope < 0
        assert res.fit.r_squared > 0.85


class TestSimplicity:
    def test_gap(self):
        rep = simplicity_check([np.linalg.eigvalsh([[0.0, 1.0], [1.0, 0.0]])])
        assert rep.min_gaps[0] == pytest.approx(2.0) and rep.below == 0

    def test_degenerate_counted(self):
        assert simplicity_check([np.linalg.eigvalsh(np.eye(3))]).below == 1

    def test_random_spectra_simple(self):
        ev = sample_spectra(gaussian_band_spec(4, 64, seed=8), 100)
        assert simplicity_check(ev).below == 0


class TestWegner:
    def test_uniform_scalar_exact(self):
        t = np.array([0.5, 1.0, 2.0, 5.0, 20.0])
        c = wegner_block_tail(ScalarDensity("uniform"), 1, [[0.0]], t, samples=100_000, symmetry="real")
        want = np.minimum(1.0, 1.0 / t)
        # five correlated grid points: 4 SE keeps the family-wise error near 3 SE for one point
        assert np.all(np.abs(c.prob - want) <= 4 * np.sqrt(want * (1 - want) / c.samples) + 1e-12)
        assert c.kappa == pytest.approx(math.pi)
        assert np.all(c.prob <= c.reference)

    def test_small_threshold_certain(self):
        c = wegner_block_tail(GaussianWigner(), 2, np.zeros((2, 2)), [1e-6], samples=200)
        assert c.prob[0] == 1.0

    def test_random_shift_bound(self):
        sym = Symmetry.COMPLEX
        A = GaussianWigner().draw(np.random.default_rng(1), 8, sym, 1)[0]
        t = np.geomspace(1, 50, 6)
        c = wegner_block_tail(GaussianWigner(), 8, A, t, samples=100_000, seed=2)
        assert np.all(c.prob <= c.reference + 3 * c.stderr)
        assert np.all(c.prob <= c.trace_bound + 1e-12)

    def test_two_block(self):
        g = np.random.default_rng(3)
        A = GaussianWigner().draw(g, 3, Symmetry.COMPLEX, 1)[0]
        C = 0.3 * (g.standard_normal((3, 3)) + 1j * g.standard_normal((3, 3)))
        t = np.geomspace(1, 20, 5)
        c = wegner_block_tail(GaussianWigner(), 3, A, t, samples=20_000, coupling_C=C)
        one = wegner_block_tail(GaussianWigner(), 3, A, t, samples=20_000)
        assert np.allclose(c.reference, 2 * one.reference)
        assert np.all(c.prob <= c.reference + 3 * c.stderr)

    def test_shift_validation(self):
        with pytest.raises(ValueError):
            wegner_block_tail(GaussianWigner(), 2, [[0.0, 1.0], [0.0, 0.0]], [1.0], samples=10)
        with pytest.raises(ValueError):
            wegner_block_tail(GaussianWigner(), 2, np.zeros((3, 3)), [1.0], samples=10)
