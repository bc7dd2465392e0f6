import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_orthonormal, random_pd
from regcca.linalg import (
    LinalgError,
    canonical_angles,
    compact_svd,
    gram_schmidt_metric,
    gram_schmidt_reduce,
    sym_eig,
    sym_matrix_power,
)


class TestCompactSvd:
    def test_diagonal_matrix(self):
        dec = compact_svd(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(dec.singular_values, [2.0, 1.0])
        np.testing.assert_allclose(dec.left, np.eye(2))
        np.testing.assert_allclose(dec.right, np.eye(2))

    def test_permutation_matrix(self):
        dec = compact_svd(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(dec.singular_values, [1.0, 1.0])

    def test_singular_values_match_gram_eigenvalues(self, rng):
        # independent oracle: eigenvalues of A.T A via eigvalsh
        a = rng.standard_normal((5, 3))
        dec = compact_svd(a)
        gram_eigs = np.sort(np.linalg.eigvalsh(a.T @ a))[::-1]
        np.testing.assert_allclose(dec.singular_values**2, gram_eigs, atol=1e-10)

    @pytest.mark.parametrize("shape", [(4, 4), (6, 3), (3, 7), (5, 5)])
    def test_invariants_on_random_matrices(self, rng, shape):
        a = rng.standard_normal(shape)
        dec = compact_svd(a)
        s = dec.singular_values
        assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
        np.testing.assert_allclose(dec.left.T @ dec.left, np.eye(dec.rank), atol=1e-10)
        np.testing.assert_allclose(dec.right.T @ dec.right, np.eye(dec.rank), atol=1e-10)
        rel_err = np.linalg.norm(a - dec.reconstruct()) / np.linalg.norm(a)
        assert rel_err <= 1e-10

    def test_rank_deficient_input_truncated(self, rng):
        b = rng.standard_normal((6, 2))
        a = b @ b.T  # rank 2
        dec = compact_svd(a)
        assert dec.rank == 2
        assert np.linalg.norm(a - dec.reconstruct()) <= 1e-10 * np.linalg.norm(a)

    def test_sign_canonicalisation(self, rng):
        a = rng.standard_normal((5, 4))
        dec = compact_svd(a)
        for k in range(dec.rank):
            col = dec.left[:, k]
            assert col[np.argmax(np.abs(col))] > 0

    def test_nonfinite_rejected(self):
        a = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(LinalgError):
            compact_svd(a)

    def test_zero_matrix_rank_zero(self):
        dec = compact_svd(np.zeros((3, 2)))
        assert dec.rank == 0


class TestSymMatrixPower:
    def test_identity(self):
        np.testing.assert_allclose(sym_matrix_power(np.eye(3), -0.5), np.eye(3))

    def test_diagonal_inverse_sqrt(self):
        out = sym_matrix_power(np.diag([4.0, 9.0]), -0.5)
        np.testing.assert_allclose(out, np.diag([0.5, 1.0 / 3.0]), atol=1e-12)

    @pytest.mark.parametrize("exponent", [-1.0, -0.5, 0.5])
    def test_power_identity_against_spectral_oracle(self, rng, exponent):
        a = random_pd(rng, 6)
        out = sym_matrix_power(a, exponent)
        # oracle: out @ out @ a should equal a^(2*exponent + 1), computed by
        # an independent eigendecomposition
        w, q = np.linalg.eigh(a)
        target = (q * w ** (2 * exponent + 1)) @ q.T
        np.testing.assert_allclose(out @ out @ a, target, atol=1e-9)

    def test_result_symmetric(self, rng):
        a = random_pd(rng, 5)
        out = sym_matrix_power(a, -0.5)
        np.testing.assert_allclose(out, out.T, atol=1e-14)

    def test_asymmetric_rejected(self, rng):
        a = rng.standard_normal((4, 4))
        with pytest.raises(LinalgError):
            sym_matrix_power(a, -0.5)

    def test_unsupported_exponent_rejected(self):
        with pytest.raises(LinalgError):
            sym_matrix_power(np.eye(2), 2.0)

    def test_flooring_keeps_inverse_finite(self):
        a = np.diag([1.0, 0.0])
        out = sym_matrix_power(a, -1.0, floor_eps=1e-8)
        assert np.all(np.isfinite(out))


class TestCanonicalAngles:
    def test_identical_subspaces(self, rng):
        z = random_orthonormal(rng, 6, 2)
        ang = canonical_angles(z, z)
        np.testing.assert_allclose(ang.cosines, [1.0, 1.0], atol=1e-12)

    def test_orthogonal_subspaces(self):
        e = np.eye(3)
        ang = canonical_angles(e[:, [0]], e[:, [1]])
        np.testing.assert_allclose(ang.cosines, [0.0], atol=1e-14)

    def test_tilted_plane(self):
        # span{e1, e2} against span{e1, cos(t) e2 + sin(t) e3}
        t = 0.3
        z = np.eye(3)[:, :2]
        w = np.column_stack([np.eye(3)[:, 0],
                             np.cos(t) * np.eye(3)[:, 1] + np.sin(t) * np.eye(3)[:, 2]])
        ang = canonical_angles(z, w)
        np.testing.assert_allclose(ang.cosines, [1.0, np.cos(t)], atol=1e-12)

    def test_symmetry(self, rng):
        for _ in range(20):
            z = random_orthonormal(rng, 8, 3)
            w = random_orthonormal(rng, 8, 3)
            a = canonical_angles(z, w).cosines
            b = canonical_angles(w, z).cosines
            np.testing.assert_allclose(np.sort(a), np.sort(b), atol=1e-12)

    def test_cos2_plus_sin2_is_k(self, rng):
        for k in (1, 2, 3):
            z = random_orthonormal(rng, 9, k)
            w = random_orthonormal(rng, 9, k)
            ang = canonical_angles(z, w)
            assert abs(ang.cos2 + ang.sin2 - k) <= 1e-10

    def test_projection_identity(self, rng):
        # sin^2 Theta equals the squared Frobenius norm of P_Z (I - P_W)
        for _ in range(20):
            z = random_orthonormal(rng, 10, 3)
            w = random_orthonormal(rng, 10, 3)
            sin2 = canonical_angles(z, w).sin2
            pz = z @ z.T
            pw = w @ w.T
            frob = np.linalg.norm(pz @ (np.eye(10) - pw)) ** 2
            assert abs(sin2 - frob) <= 1e-9

    def test_non_orthonormal_rejected_with_deviation(self, rng):
        z = rng.standard_normal((6, 2))
        w = random_orthonormal(rng, 6, 2)
        with pytest.raises(LinalgError, match="Gram deviation"):
            canonical_angles(z, w)


class TestGramSchmidtMetric:
    def test_already_orthonormal_unchanged(self):
        m = np.eye(5)[:, :3]
        np.testing.assert_allclose(gram_schmidt_metric(m), m, atol=1e-14)

    def test_two_step_example(self):
        m = np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]])
        out = gram_schmidt_metric(m)
        np.testing.assert_allclose(out, np.eye(3)[:, :2], atol=1e-14)

    def test_metric_gram_is_identity(self, rng):
        m = rng.standard_normal((6, 3))
        g = random_pd(rng, 6)
        out = gram_schmidt_metric(m, g)
        np.testing.assert_allclose(out.T @ g @ out, np.eye(3), atol=1e-10)

    def test_span_is_nested(self, rng):
        m = rng.standard_normal((5, 3))
        out = gram_schmidt_metric(m)
        for k in range(1, 4):
            # column k lies in the span of the first k input columns
            proj, *_ = np.linalg.lstsq(m[:, :k], out[:, k - 1], rcond=None)
            np.testing.assert_allclose(m[:, :k] @ proj, out[:, k - 1], atol=1e-8)

    def test_rank_deficiency_reports_column(self):
        m = np.column_stack([np.eye(4)[:, 0], np.eye(4)[:, 1], np.eye(4)[:, 0]])
        with pytest.raises(LinalgError, match="column 2"):
            gram_schmidt_metric(m)

    def test_reduce_drops_dependent_columns(self):
        m = np.column_stack([np.eye(4)[:, 0], np.eye(4)[:, 0], np.eye(4)[:, 1]])
        q, kept = gram_schmidt_reduce(m)
        assert kept == [0, 2]
        np.testing.assert_allclose(q.T @ q, np.eye(2), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(2, 7))
def test_sym_eig_reconstructs(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    a = a + a.T
    dec = sym_eig(a)
    assert np.all(np.diff(dec.eigenvalues) <= 1e-12)
    err = np.linalg.norm(a - dec.reconstruct())
    assert err <= 1e-10 * max(np.linalg.norm(a), 1.0)
