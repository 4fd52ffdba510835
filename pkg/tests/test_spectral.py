import numpy as np
import pytest
import warnings
from hypothesis import given
from hypothesis import strategies as st

from delayflock.errors import DegenerateConnectivityWarning
from delayflock.model import ModelParams, PotentialSpec
from delayflock.spectral import (
    augment_self_weights,
    eigenvalues_sym,
    fiedler_number,
    jacobi_eigh,
    laplacian,
    pairwise_mixing_min,
)


def uniform_params(n, lam=1.0, psi0=1.0):
    return ModelParams(n=n, d=1, lam=lam, variant="main_delay",
                       potential=PotentialSpec.constant(psi0))


def random_laplacian(gen, n, lam=1.0):
    w = gen.uniform(0.05, 1.0, size=(n, n))
    w = 0.5 * (w + w.T)
    np.fill_diagonal(w, 0.0)
    lap = -(lam / n) * w
    np.fill_diagonal(lap, (lam / n) * w.sum(axis=1))
    return lap


class TestLaplacian:
    def test_two_agent_hand_value(self):
        params = uniform_params(2, psi0=0.5)
        lap = laplacian(params, np.zeros((2, 1)))
        assert np.allclose(lap, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-15)

    def test_coincident_complete_graph(self):
        params = uniform_params(4)
        lap = laplacian(params, np.zeros((4, 1)))
        expected = (1.0 / 4) * (4 * np.eye(4) - np.ones((4, 4)))
        assert np.allclose(lap, expected, atol=1e-15)

    @given(st.integers(0, 10_000))
    def test_row_sums_and_psd(self, seed):
        gen = np.random.default_rng(seed)
        params = ModelParams(n=5, d=2, lam=1.3, variant="main_delay",
                             potential=PotentialSpec.cucker_smale(2.0))
        lap = laplacian(params, gen.normal(scale=2.0, size=(5, 2)))
        scale = np.linalg.norm(lap)
        assert np.abs(lap.sum(axis=1)).max() <= 1e-13 * max(1.0, scale)
        vals = eigenvalues_sym(lap)
        assert vals[0] >= -1e-10 * max(1.0, scale)
        # consensus direction in the kernel
        assert np.abs(lap @ np.ones(5)).max() <= 1e-13 * max(1.0, scale)

    @given(st.integers(0, 10_000))
    def test_quadratic_form_identity(self, seed):
        gen = np.random.default_rng(seed)
        n, d = 5, 3
        params = ModelParams(n=n, d=d, lam=0.7, variant="main_delay",
                             potential=PotentialSpec.cucker_smale(1.5))
        x = gen.normal(size=(n, d))
        v = gen.normal(size=(n, d))
        lap = laplacian(params, x)
        lhs = float(np.sum(v * (lap @ v)))
        from delayflock.model import weight_matrix
        w = weight_matrix(params, x)
        diff = v[:, None, :] - v[None, :, :]
        rhs = 0.5 * (params.lam / n) * float(np.einsum("ij,ijk->", w, diff * diff))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-13)


class TestJacobi:
    def test_two_agent_spectrum(self):
        lap = laplacian(uniform_params(2, psi0=0.5), np.zeros((2, 1)))
        assert np.allclose(eigenvalues_sym(lap), [0.0, 0.5], atol=1e-12)

    def test_complete_graph_spectrum(self):
        lap = laplacian(uniform_params(3), np.zeros((3, 1)))
        assert np.allclose(eigenvalues_sym(lap), [0.0, 1.0, 1.0], atol=1e-12)

    def test_zero_matrix(self):
        assert np.array_equal(eigenvalues_sym(np.zeros((4, 4))), np.zeros(4))

    def test_asymmetric_rejected(self):
        m = np.eye(3)
        m[0, 1] = 1e-6
        with pytest.raises(ValueError):
            jacobi_eigh(m)

    @given(st.integers(0, 10_000))
    def test_against_lapack(self, seed):
        gen = np.random.default_rng(seed)
        n = int(gen.integers(2, 9))
        a = gen.normal(size=(n, n))
        a = 0.5 * (a + a.T)
        vals, vecs = jacobi_eigh(a)
        ref = np.linalg.eigvalsh(a)
        assert np.allclose(vals, ref, atol=1e-11 * max(1.0, np.abs(ref).max()))
        assert np.allclose(vecs @ vecs.T, np.eye(n), atol=1e-12)

    @given(st.integers(0, 10_000))
    def test_reconstruction_and_trace(self, seed):
        gen = np.random.default_rng(seed)
        lap = random_laplacian(gen, int(gen.integers(2, 9)))
        vals, vecs = jacobi_eigh(lap)
        recon = vecs @ np.diag(vals) @ vecs.T
        scale = np.linalg.norm(lap)
        assert np.linalg.norm(recon - lap) <= 1e-9 * max(1.0, scale)
        assert vals.sum() == pytest.approx(np.trace(lap), rel=1e-10, abs=1e-12)


class TestFiedler:
    def test_uniform_examples(self):
        assert fiedler_number(laplacian(uniform_params(3), np.zeros((3, 1)))) == pytest.approx(1.0, abs=1e-12)
        assert fiedler_number(laplacian(uniform_params(2, psi0=0.5), np.zeros((2, 1)))) == pytest.approx(0.5, abs=1e-12)
        assert fiedler_number(laplacian(uniform_params(3, lam=2.0, psi0=0.5), np.zeros((3, 1)))) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", range(2, 9))
    def test_complete_graph_closed_form(self, n):
        lam, psi0 = 1.7, 0.35
        lap = laplacian(uniform_params(n, lam=lam, psi0=psi0), np.zeros((n, 1)))
        assert abs(fiedler_number(lap) - lam * psi0) <= 1e-10

    def test_rank_one_shift_leaves_fiedler(self, rng):
        lap = random_laplacian(rng, 5)
        mu = fiedler_number(lap)
        shift = mu / (4 * 5)  # keeps the shifted kernel eigenvalue smallest
        mu2 = fiedler_number(lap + shift * np.ones((5, 5)) / 5)
        assert mu2 == pytest.approx(mu, abs=1e-10)

    def test_degenerate_warning(self):
        # One agent fully decoupled: the kernel is two-dimensional.
        lap = np.array([[0.5, -0.5, 0.0], [-0.5, 0.5, 0.0], [0.0, 0.0, 0.0]])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            mu = fiedler_number(lap)
        assert abs(mu) <= 1e-12
        assert any(issubclass(w.category, DegenerateConnectivityWarning) for w in caught)


class TestMixing:
    def test_two_agent_hand_case(self):
        a = np.array([[1.5, 0.5], [0.5, 1.5]])
        # Brute-force oracle, independent of the vectorized implementation.
        best = np.inf
        for p in range(2):
            for q in range(2):
                total = 0.0
                for i in range(2):
                    for j in range(2):
                        total += min(a[q, i] * a[p, j], a[q, j] * a[p, i])
                best = min(best, total / 4.0)
        assert best == pytest.approx(0.5)
        assert pairwise_mixing_min(a) == pytest.approx(best, abs=1e-15)

    def test_augmentation(self):
        a = np.full((2, 2), 0.5)
        aug = augment_self_weights(a)
        assert np.allclose(np.diag(aug), 1.5)
        assert aug[0, 1] == 0.5

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_constant_weights_dominate_square(self, n):
        psi0 = 0.5
        a = augment_self_weights(np.full((n, n), psi0))
        assert pairwise_mixing_min(a) >= psi0 ** 2 - 1e-14

    def test_same_row_pair_gives_one(self):
        a = augment_self_weights(np.full((3, 3), 0.4))
        p = 1
        prod = np.outer(a[p], a[p])
        val = np.minimum(prod, prod.T).sum() / 9.0
        assert val == pytest.approx(1.0, abs=1e-13)

    @given(st.integers(0, 10_000))
    def test_matches_bruteforce(self, seed):
        gen = np.random.default_rng(seed)
        n = int(gen.integers(2, 6))
        a = augment_self_weights(gen.uniform(0.05, 0.9, size=(n, n)))
        best = np.inf
        for p in range(n):
            for q in range(n):
                total = 0.0
                for i in range(n):
                    for j in range(n):
                        total += min(a[q, i] * a[p, j], a[q, j] * a[p, i])
                best = min(best, total / (n * n))
        assert pairwise_mixing_min(a) == pytest.approx(best, rel=1e-12)
