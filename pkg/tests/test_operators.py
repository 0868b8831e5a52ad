import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_dft, dft_matrix
from polyfw.operators import (
    CountingOperator,
    DenseOperator,
    FourierOperator,
    FrequencySampleSet,
    dft_adjoint,
    dft_forward,
    hermitian_inner,
    operator_norm_sq,
    restrict_columns,
)
from polyfw.problems import sample_frequencies


def random_freqs(n, L, seed):
    return sample_frequencies(n, L, seed)


class TestFrequencySampleSet:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            FrequencySampleSet(4, [[0, 4]])
        with pytest.raises(ValueError):
            FrequencySampleSet(4, [[-1, 0]])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError, match="distinct"):
            FrequencySampleSet(4, [[1, 2], [0, 0], [1, 2]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            FrequencySampleSet(4, np.zeros((0, 2)))

    def test_json_round_trip(self):
        fs = random_freqs(7, 11, 3)
        back = FrequencySampleSet.from_json(fs.to_json())
        assert back.n == 7
        np.testing.assert_array_equal(back.coords, fs.coords)
        assert fs.to_dict() == {"n": 7, "coords": fs.coords.tolist()}


class TestForward:
    def test_single_pixel(self):
        fs = FrequencySampleSet(1, [[0, 0]])
        np.testing.assert_allclose(dft_forward([2.5], fs), [2.5])

    def test_delta_is_flat(self):
        fs = FrequencySampleSet(2, [[0, 0], [0, 1], [1, 0], [1, 1]])
        x = np.array([1.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(dft_forward(x, fs), np.full(4, 0.5), atol=1e-15)

    def test_matches_brute_force_sum(self):
        fs = random_freqs(4, 5, 0)
        x = np.random.default_rng(1).standard_normal(16)
        expected = brute_force_dft(x, 4, fs.coords).astype(complex)
        np.testing.assert_allclose(dft_forward(x, fs), expected, rtol=0, atol=1e-14)

    def test_dimension_mismatch(self):
        fs = random_freqs(4, 5, 0)
        with pytest.raises(ValueError):
            dft_forward(np.zeros(15), fs)

    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_agrees_with_explicit_matrix(self, n):
        fs = random_freqs(n, n * n // 2, n)
        G = dft_matrix(n, fs.coords).astype(complex)
        x = np.random.default_rng(n).standard_normal(n * n)
        got = dft_forward(x, fs)
        ref = G @ x
        assert np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1.0)) <= 1e-12


class TestAdjoint:
    def test_zero_frequency_constant_image(self):
        n = 5
        fs = FrequencySampleSet(n, [[0, 0]])
        np.testing.assert_allclose(dft_adjoint([1 + 0j], fs), np.full(n * n, 1 / n))

    def test_zero_input(self):
        fs = random_freqs(4, 6, 2)
        np.testing.assert_array_equal(dft_adjoint(np.zeros(6, complex), fs), np.zeros(16))

    def test_matches_conjugate_transpose(self):
        fs = random_freqs(4, 5, 4)
        rng = np.random.default_rng(5)
        z = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        G = dft_matrix(4, fs.coords).astype(complex)
        ref = np.real(np.conj(G).T @ z)
        np.testing.assert_allclose(dft_adjoint(z, fs), ref, rtol=0, atol=1e-14)
        np.testing.assert_allclose(DenseOperator(G).adjoint(z), ref, rtol=0, atol=1e-14)

    def test_output_is_real(self):
        fs = random_freqs(4, 5, 4)
        assert dft_adjoint(np.ones(5, complex), fs).dtype == np.float64

    def test_length_mismatch(self):
        fs = random_freqs(4, 5, 4)
        with pytest.raises(ValueError):
            dft_adjoint(np.zeros(4, complex), fs)

    def test_adjoint_identity(self):
        op = FourierOperator(random_freqs(9, 30, 8))
        rng = np.random.default_rng(9)
        for _ in range(100):
            x = rng.standard_normal(op.N)
            z = rng.standard_normal(op.L) + 1j * rng.standard_normal(op.L)
            lhs = hermitian_inner(op.forward(x), z)
            rhs = float(x @ op.adjoint(z))
            assert abs(lhs - rhs) <= 1e-9 * abs(lhs) + 1e-12


class TestHermitianInner:
    def test_example(self):
        assert hermitian_inner([1 + 2j], [3 + 4j]) == pytest.approx(11.0)

    def test_self_product_is_squared_norm(self):
        a = np.array([1 + 1j, -2 + 0.5j, 3j])
        assert hermitian_inner(a, a) == pytest.approx(np.linalg.norm(a) ** 2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            hermitian_inner([1, 2], [1, 2, 3])

    @given(st.integers(0, 2**32 - 1))
    def test_real_pair_identity(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        expected = a.real @ b.real + a.imag @ b.imag
        assert hermitian_inner(a, b) == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestRestrictColumns:
    def setup_method(self):
        self.op = FourierOperator(random_freqs(4, 7, 10))
        self.G = dft_matrix(4, self.op.freqs.coords).astype(complex)

    def test_full_support_is_identity_restriction(self):
        x = np.random.default_rng(0).standard_normal(16)
        sub = restrict_columns(self.op, np.arange(16))
        np.testing.assert_allclose(sub.forward(x), self.op.forward(x), rtol=0, atol=1e-12)

    def test_single_column(self):
        sub = restrict_columns(self.op, [6])
        np.testing.assert_allclose(sub.forward(np.array([1.0])), self.G[:, 6], rtol=0, atol=1e-15)

    def test_zero_padding_consistency(self):
        S = np.array([0, 5, 9])
        xt = np.random.default_rng(3).standard_normal(3)
        emb = np.zeros(16)
        emb[S] = xt
        sub = restrict_columns(self.op, S)
        np.testing.assert_allclose(sub.forward(xt), self.op.forward(emb), rtol=0, atol=1e-12)
        z = np.random.default_rng(4).standard_normal(7) + 1j
        np.testing.assert_allclose(sub.adjoint(z), self.op.adjoint(z)[S], rtol=0, atol=1e-12)

    def test_invalid_supports(self):
        with pytest.raises(ValueError):
            restrict_columns(self.op, [0, 16])
        with pytest.raises(ValueError):
            restrict_columns(self.op, [-1])
        with pytest.raises(ValueError):
            restrict_columns(self.op, [3, 3])

    def test_dense_restriction(self):
        dense = DenseOperator(self.G)
        np.testing.assert_array_equal(restrict_columns(dense, [2, 7]).entries, self.G[:, [2, 7]])

    @settings(max_examples=30, deadline=None)
    @given(st.sets(st.integers(0, 15), min_size=1))
    def test_restricted_norm_is_bounded(self, S):
        S = sorted(S)
        full = operator_norm_sq(self.op)
        assert operator_norm_sq(restrict_columns(self.op, S)) <= full * (1 + 1e-6)


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm_sq(DenseOperator(np.eye(4))) == pytest.approx(1.0, rel=1e-6)

    def test_diagonal(self):
        assert operator_norm_sq(DenseOperator(np.diag([3.0, 1.0]))) == pytest.approx(9.0, rel=1e-6)

    def test_matches_dense_eigensolve(self):
        fs = random_freqs(4, 8, 12)
        G = dft_matrix(4, fs.coords).astype(complex)
        # real adjoint => G*G = Re(G^H G) on R^N
        ref = np.linalg.eigvalsh(np.real(np.conj(G).T @ G)).max()
        assert operator_norm_sq(FourierOperator(fs)) == pytest.approx(ref, rel=1e-5)

    def test_zero_operator(self):
        assert operator_norm_sq(DenseOperator(np.zeros((3, 5)))) == 0.0

    def test_deterministic(self):
        op = FourierOperator(random_freqs(6, 10, 1))
        assert operator_norm_sq(op) == operator_norm_sq(op)

    def test_rejects_bad_tol(self):
        with pytest.raises(ValueError):
            operator_norm_sq(DenseOperator(np.eye(2)), tol=0)


def test_counting_operator_counts_each_application():
    op = CountingOperator(FourierOperator(random_freqs(4, 3, 0)))
    for _ in range(3):
        op.forward(np.zeros(16))
    op.adjoint(np.zeros(3, complex))
    op.columns([1, 2])
    assert (op.n_forward, op.n_adjoint) == (3, 1)


def test_fourier_columns_match_matrix():
    fs = random_freqs(5, 9, 2)
    G = dft_matrix(5, fs.coords).astype(complex)
    np.testing.assert_allclose(FourierOperator(fs).todense(), G, rtol=0, atol=1e-15)
