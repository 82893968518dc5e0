"""Random vector quantization, distortion statistics and cell-approximation laws."""

import math

import numpy as np
import pytest
from scipy import stats

from modesim import (
    CapacityError,
    RngStream,
    cell_approx_interference_sample,
    expected_sq_distortion,
    generate_rvq,
    quantization_delta,
    quantize,
    sample_complex_gaussian_vec,
)
from modesim.codebook import (
    Codebook,
    cell_approx_quantized_dirs,
    cell_approx_sin_sq,
    rvq_best_sin_sq,
    rvq_quantized_dirs,
)

from mc_oracles import explicit_rvq_sin_sq


class TestGenerateRvq:
    def test_zero_bits_single_unit_vector(self):
        cb = generate_rvq(4, 0, 0, RngStream(1, 0))
        assert cb.vectors.shape == (1, 4)
        assert np.linalg.norm(cb.vectors[0]) == pytest.approx(1.0, abs=1e-12)

    def test_unit_norm_rows(self):
        cb = generate_rvq(4, 6, 0, RngStream(1, 0))
        assert np.allclose(np.linalg.norm(cb.vectors, axis=1), 1.0, atol=1e-12)
        assert cb.vectors.shape == (64, 4)

    def test_isotropy_pairwise_alignment(self):
        # E|u^* v|^2 = 1/Nt for independent isotropic unit vectors
        cb = generate_rvq(4, 7, 0, RngStream(2, 0))
        gen = RngStream(2, 1).generator()
        i = gen.integers(0, 128, size=10_000)
        j = gen.integers(0, 128, size=10_000)
        keep = i != j
        dots = np.abs(np.sum(cb.vectors[i[keep]].conj() * cb.vectors[j[keep]], axis=1)) ** 2
        assert dots.mean() == pytest.approx(0.25, abs=0.01)

    def test_deterministic_per_seed_and_user(self):
        a = generate_rvq(4, 5, 3, RngStream(9, 0))
        b = generate_rvq(4, 5, 3, RngStream(9, 0))
        c = generate_rvq(4, 5, 4, RngStream(9, 0))
        assert np.array_equal(a.vectors, b.vectors)
        assert not np.allclose(a.vectors, c.vectors)

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            generate_rvq(4, 25, 0, RngStream(0, 0))


class TestQuantize:
    def test_exact_codeword_match(self):
        cb = generate_rvq(4, 4, 0, RngStream(3, 0))
        res = quantize(cb.vectors[7], cb)
        assert res.index == 7
        assert res.sin_sq == pytest.approx(0.0, abs=1e-12)
        assert res.cos_sq + res.sin_sq == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_single_codeword(self):
        vec = np.array([1.0, 0.0], dtype=complex)
        cb = Codebook(user=0, vectors=vec[None, :], bits=0)
        res = quantize(np.array([0.0, 1.0 + 0.0j]), cb)
        assert res.cos_sq == pytest.approx(0.0, abs=1e-12)

    def test_phase_and_scale_invariance(self):
        cb = generate_rvq(4, 6, 0, RngStream(3, 1))
        h = sample_complex_gaussian_vec(4, 1.0, RngStream(3, 2).generator())
        base = quantize(h, cb)
        for factor in (np.exp(1j * 0.7), 3.5, 0.2 * np.exp(-1j * 2.0)):
            res = quantize(factor * h, cb)
            assert res.index == base.index
            assert res.sin_sq == pytest.approx(base.sin_sq, abs=1e-12)

    def test_zero_vector_rejected(self):
        cb = generate_rvq(2, 1, 0, RngStream(3, 3))
        with pytest.raises(ValueError):
            quantize(np.zeros(2, dtype=complex), cb)

    def test_mean_distortion_nt2_b1(self):
        # E[sin^2] = 2 * beta(2, 2) = 1/3 for Nt=2, B=1
        gen = RngStream(4, 0).generator()
        total = 0.0
        n = 100_000
        cbs = sample_complex_gaussian_vec(2, 1.0, gen, count=2 * n).reshape(n, 2, 2)
        cbs /= np.linalg.norm(cbs, axis=2, keepdims=True)
        hs = sample_complex_gaussian_vec(2, 1.0, gen, count=n)
        hs /= np.linalg.norm(hs, axis=1, keepdims=True)
        best = np.max(np.abs(np.einsum("nlk,nk->nl", cbs, hs.conj())) ** 2, axis=1)
        sin_sq = 1.0 - best
        assert sin_sq.mean() == pytest.approx(1.0 / 3.0, abs=0.01)


class TestExpectedSqDistortion:
    def test_nt2_b1(self):
        exact, (lower, upper) = expected_sq_distortion(2, 1)
        assert exact == pytest.approx(1.0 / 3.0, rel=1e-12)
        assert (lower, upper) == (pytest.approx(0.25), pytest.approx(0.5))

    def test_b0(self):
        exact, (lower, upper) = expected_sq_distortion(4, 0)
        assert exact == pytest.approx(0.75, rel=1e-12)  # beta(1, 4/3) = 3/4
        assert (lower, upper) == (pytest.approx(0.75), pytest.approx(1.0))

    def test_large_b_containment(self):
        exact, (lower, upper) = expected_sq_distortion(4, 18)
        assert 0.75 * 2.0**-6 <= exact <= 2.0**-6
        assert lower == pytest.approx(0.75 * 2.0**-6) and upper == pytest.approx(2.0**-6)

    @pytest.mark.parametrize("n_tx", range(2, 9))
    def test_sandwich_all_bits(self, n_tx):
        for bits in range(21):
            exact, (lower, upper) = expected_sq_distortion(n_tx, bits)
            # equality at B=0 up to log-gamma rounding
            assert lower - 1e-12 <= exact <= upper + 1e-12

    @pytest.mark.parametrize("n_tx,bits", [(2, 4), (4, 8)])
    def test_matches_rvq_monte_carlo(self, n_tx, bits):
        # the heavier (4, 12) point runs in the acceptance suite
        sin_sq = explicit_rvq_sin_sq(n_tx, bits, 100_000, RngStream(11, bits))
        exact, _ = expected_sq_distortion(n_tx, bits)
        se = sin_sq.std(ddof=1) / math.sqrt(sin_sq.size)
        assert abs(sin_sq.mean() - exact) < 3.0 * se

    def test_scalar_channel_rejected(self):
        with pytest.raises(ValueError):
            expected_sq_distortion(1, 4)


class TestCellApproximation:
    def test_interference_mean(self):
        gen = RngStream(12, 0).generator()
        draws = cell_approx_interference_sample(4, 10, gen, count=100_000)
        delta = 2.0 ** (-10.0 / 3.0)
        assert draws.mean() == pytest.approx(delta, rel=0.02)

    def test_interference_is_exponential(self):
        gen = RngStream(12, 1).generator()
        draws = cell_approx_interference_sample(4, 10, gen, count=100_000)
        delta = quantization_delta(4, 10)
        ks = stats.kstest(draws, lambda z: 1.0 - np.exp(-z / delta)).statistic
        assert ks < 0.01

    def test_product_matches_direct_exponential(self):
        gen = RngStream(12, 2).generator()
        product = cell_approx_interference_sample(4, 10, gen, count=100_000)
        direct = gen.exponential(quantization_delta(4, 10), size=100_000)
        assert stats.ks_2samp(product, direct).statistic < 0.015

    def test_nt2_degenerate_beta(self):
        # Nt=2: Beta(1, 0) is the point mass, Gamma(1, delta) = Exp(delta)
        gen = RngStream(12, 3).generator()
        draws = cell_approx_interference_sample(2, 6, gen, count=50_000)
        delta = quantization_delta(2, 6)
        ks = stats.kstest(draws, lambda z: 1.0 - np.exp(-z / delta)).statistic
        assert ks < 0.012

    def test_sin_sq_law(self):
        gen = RngStream(12, 4).generator()
        delta = quantization_delta(4, 10)
        draws = cell_approx_sin_sq(4, 10, gen, count=100_000)
        assert draws.max() <= delta
        ks = stats.kstest(draws, lambda s: np.clip(s / delta, 0, 1) ** 3).statistic
        assert ks < 0.01

    def test_norm_times_sin_sq_is_gamma(self):
        # ||h||^2 sin^2(theta) with the cell law is Gamma(Nt-1, delta)
        gen = RngStream(12, 5).generator()
        n, n_tx, bits = 100_000, 4, 10
        delta = quantization_delta(n_tx, bits)
        h = sample_complex_gaussian_vec(n_tx, 1.0, gen, count=n)
        z = (np.abs(h) ** 2).sum(axis=1) * cell_approx_sin_sq(n_tx, bits, gen, count=n)
        ks = stats.kstest(z, stats.gamma(a=n_tx - 1, scale=delta).cdf).statistic
        assert ks < 0.01


class TestSampledQuantizedDirs:
    def test_rvq_law_matches_exact_distortion(self):
        gen = RngStream(13, 0).generator()
        draws = rvq_best_sin_sq(4, 10, gen, count=200_000)
        exact, _ = expected_sq_distortion(4, 10)
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - exact) < 3.5 * se

    def test_rvq_law_matches_explicit_search(self):
        # distributional equivalence with explicit codeword search
        n, n_tx, bits = 20_000, 3, 6
        gen = RngStream(13, 1).generator()
        law = rvq_best_sin_sq(n_tx, bits, gen, count=n)
        cbs = sample_complex_gaussian_vec(n_tx, 1.0, gen, count=n * (1 << bits))
        cbs = cbs.reshape(n, 1 << bits, n_tx)
        cbs /= np.linalg.norm(cbs, axis=2, keepdims=True)
        hs = sample_complex_gaussian_vec(n_tx, 1.0, gen, count=n)
        hs /= np.linalg.norm(hs, axis=1, keepdims=True)
        best = np.max(np.abs(np.einsum("nlk,nk->nl", cbs, hs.conj())) ** 2, axis=1)
        explicit = 1.0 - np.minimum(best, 1.0)
        assert stats.ks_2samp(law, explicit).statistic < 0.02

    @pytest.mark.parametrize("sampler", [rvq_quantized_dirs, cell_approx_quantized_dirs])
    def test_direction_geometry(self, sampler):
        gen = RngStream(13, 2).generator()
        hdirs = sample_complex_gaussian_vec(4, 1.0, gen, count=200).reshape(50, 4, 4)
        hdirs /= np.linalg.norm(hdirs, axis=2, keepdims=True)
        qdirs = sampler(hdirs, 8, gen)
        assert np.allclose(np.linalg.norm(qdirs, axis=2), 1.0, atol=1e-12)
        cos_sq = np.abs(np.sum(hdirs.conj() * qdirs, axis=2)) ** 2
        assert np.all(cos_sq <= 1.0 + 1e-12)
        # B=8 keeps directions close: every angle within the support bound
        assert np.all(1.0 - cos_sq <= 1.0)
