import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from multiharmonic.fem import assemble_forms, assemble_helmholtz
from multiharmonic.sparse_linalg import (NearSingularWarning, SingularMatrixError, as_csr, check_csr,
                                         dump_matrix_market, factor, matvec, relative_residual, solve)


def test_matvec_identity(rng):
    x = rng.standard_normal(5) + 1j
    np.testing.assert_array_equal(matvec(sp.identity(5, format="csr"), x), x)


def test_matvec_hand():
    A = as_csr(np.array([[1, 1j], [0, 2]]))
    np.testing.assert_array_equal(matvec(A, np.array([1, 1])), [1 + 1j, 2])


def test_matvec_dense_oracle(rng):
    D = rng.standard_normal((50, 50)) + 1j * rng.standard_normal((50, 50))
    D[np.abs(D) < 1.0] = 0
    x = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    diff = np.abs(matvec(as_csr(D), x) - D @ x).max()
    assert diff <= 1e-13 * np.linalg.norm(D) * np.linalg.norm(x)


def test_matvec_mismatch():
    with pytest.raises(ValueError):
        matvec(sp.identity(3, format="csr"), np.ones(4))


def test_csr_invariants(coarse_mesh):
    A = as_csr(assemble_forms(coarse_mesh).K)
    check_csr(A)
    bad = A.copy()
    bad.indices[[0, 1]] = bad.indices[[1, 0]]
    with pytest.raises(ValueError):
        check_csr(bad)


def test_diagonal_solve():
    d = np.array([1 + 1j, 2, -3j, 0.5])
    x = factor(sp.diags(d)).solve(np.ones(4))
    np.testing.assert_allclose(x, 1 / d, rtol=1e-15)


def test_dense_oracle(rng):
    D = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10)) + 5 * np.eye(10)
    b = rng.standard_normal(10) + 0j
    np.testing.assert_allclose(factor(as_csr(D)).solve(b), np.linalg.solve(D, b), rtol=1e-10)


def test_recover_ill_conditioned(rng):
    n = 40
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    D = U @ np.diag(np.logspace(0, -8, n)) @ V.T
    x0 = rng.standard_normal(n)
    x = factor(as_csr(D)).solve(D @ x0)
    assert np.linalg.norm(x - x0) / np.linalg.norm(x0) <= 1e-9


def test_recover_moderate(rng):
    n = 40
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    D = U @ np.diag(np.logspace(0, -4, n)) @ U.T
    x0 = rng.standard_normal(n)
    x = factor(as_csr(D)).solve(D @ x0)
    assert np.linalg.norm(x - x0) / np.linalg.norm(x0) <= 1e-9


def test_singular():
    A = sp.csr_matrix(np.array([[1.0, 0], [0, 0]]))
    with pytest.raises(SingularMatrixError):
        factor(A)


def test_near_singular_warning():
    A = sp.diags([1.0, 1e-16, 1.0]).tocsr()
    with pytest.warns(NearSingularWarning):
        factor(A)


def test_repeated_solves_bitwise(coarse_mesh, base_params, dc, rng):
    A = assemble_helmholtz(1, base_params.omega, base_params, dc, assemble_forms(coarse_mesh)).A
    F = factor(A)
    b = rng.standard_normal(A.shape[0]) + 0j
    x1, x2 = solve(F, b), solve(F, b)
    assert np.array_equal(x1, x2)
    assert relative_residual(A, x1, b) <= 1e-10


@pytest.mark.parametrize("m", range(1, 7))
def test_helmholtz_residual(coarse_mesh, base_params, dc, rng, m):
    A = assemble_helmholtz(m, base_params.omega, base_params, dc, assemble_forms(coarse_mesh)).A
    b = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    assert relative_residual(A, factor(A).solve(b), b) <= 1e-10


def test_matrix_market_dump(tmp_path):
    A = as_csr(np.array([[1, 2j], [0, 3]]))
    p = tmp_path / "a.mtx"
    dump_matrix_market(A, p)
    import scipy.io
    assert abs(scipy.io.mmread(str(p)) - A).max() == 0
