"""Factorization backends against dense linear-algebra references."""

import numpy as np
import pytest
from scipy import fft as sfft

from specwin.errors import JointNullSpaceError, KernelSymmetryError
from specwin.spectral import (
    dct_decompose,
    diag_to_gsvd_check,
    filter_factors,
    gsvd,
    laplacian_spectrum,
    reflexive_kernel,
)

from oracles import (
    dense_laplacian_2d,
    laplacian_1d,
    make_diag_system,
    reflexive_blur_matrix,
    symmetric_kernel,
    tik_matrices,
)

SIZES = [(6, 4), (8, 8), (12, 7), (16, 12)]
PENALTIES = ["identity", "laplacian", "random"]


def _seed(m: int, n: int, penalty: str) -> int:
    return m * 1009 + n * 13 + PENALTIES.index(penalty)


def _reconstruct(sys, q: int):
    A = sys.U[:, : sys.n] @ np.diag(sys.delta) @ sys.Xt
    Lam = np.zeros((q, sys.n))
    k = min(q, sys.n)
    Lam[np.arange(k), np.arange(k)] = sys.lam[:k]
    L = sys.V @ Lam @ sys.Xt
    return A, L


@pytest.mark.parametrize("m,n", SIZES)
@pytest.mark.parametrize("penalty", PENALTIES)
def test_gsvd_reconstructs_both_factors(m, n, penalty):
    rng = np.random.default_rng(_seed(m, n, penalty))
    A, L = tik_matrices(rng, m, n, penalty)
    sys = gsvd(A, L)
    Ar, Lr = _reconstruct(sys, L.shape[0])
    assert np.linalg.norm(Ar - A) <= 1e-10 * np.linalg.norm(A)
    assert np.linalg.norm(Lr - L) <= 1e-10 * max(np.linalg.norm(L), 1.0)


@pytest.mark.parametrize("m,n", SIZES)
def test_gsvd_factors_are_orthonormal(m, n):
    rng = np.random.default_rng(_seed(m, n, "random") + 71)
    A, L = tik_matrices(rng, m, n, "random")
    sys = gsvd(A, L)
    assert np.abs(sys.U.T @ sys.U - np.eye(m)).max() <= 1e-12
    assert np.abs(sys.V.T @ sys.V - np.eye(L.shape[0])).max() <= 1e-12
    assert np.abs(sys.Y @ sys.Xt - np.eye(n)).max() <= 1e-8


@pytest.mark.parametrize("m,n", SIZES)
@pytest.mark.parametrize("penalty", PENALTIES)
def test_gsvd_value_contract(m, n, penalty):
    rng = np.random.default_rng(_seed(m, n, penalty) + 142)
    A, L = tik_matrices(rng, m, n, penalty)
    sys = gsvd(A, L)
    report = diag_to_gsvd_check(sys)
    assert report.passed
    assert report.unit_defect <= 1e-12
    assert np.all(np.diff(sys.delta) >= 0.0)
    assert np.all(np.diff(sys.lam) <= 0.0)
    assert sys.ell == np.count_nonzero(sys.delta == 0.0)
    assert sys.q_star == sys.n - np.count_nonzero(sys.lambda_zero)
    # zeros of delta lead, zeros of lam trail
    assert not np.any(sys.delta[sys.ell:] == 0.0)
    assert not np.any(sys.lambda_zero[: sys.q_star])
    assert np.all(sys.lambda_zero[sys.q_star:])
    assert np.all(sys.gamma[sys.lambda_zero] == 0.0)


def test_gsvd_rank_deficient_forward_operator():
    rng = np.random.default_rng(3)
    m, n, r = 12, 9, 6
    A = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    L = np.eye(n)
    sys = gsvd(A, L)
    assert sys.ell == n - r
    assert sys.q_star == n
    Ar, _ = _reconstruct(sys, n)
    assert np.linalg.norm(Ar - A) <= 1e-10 * np.linalg.norm(A)
    # annihilated directions pass nothing through the pseudo-inverse
    assert np.all(sys.delta_pinv()[: sys.ell] == 0.0)


def test_gsvd_singular_penalty_tail():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((10, 7))
    sys = gsvd(A, laplacian_1d(7))
    assert sys.q_star == 6
    assert np.count_nonzero(sys.lambda_zero) == 1
    assert sys.lambda_zero[-1]
    assert sys.delta[-1] > 0.0


def test_gsvd_rejects_wide_and_mismatched_inputs():
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError):
        gsvd(rng.standard_normal((3, 5)), np.eye(5))
    with pytest.raises(ValueError):
        gsvd(rng.standard_normal((6, 4)), np.eye(5))


def test_gsvd_rejects_joint_null_space():
    rng = np.random.default_rng(6)
    n = 8
    A0 = rng.standard_normal((12, n))
    A = A0 - A0.mean(axis=1, keepdims=True)  # constants in null(A)
    with pytest.raises(JointNullSpaceError):
        gsvd(A, laplacian_1d(n))  # constants in null(L) too


# ---------------------------------------------------------------------------
# reflexive-boundary DCT backend
# ---------------------------------------------------------------------------


def _gauss_psf(dims, width):
    n1, n2 = dims
    r = np.arange(n1) - (n1 - 1) / 2.0
    c = np.arange(n2) - (n2 - 1) / 2.0
    g = np.exp(-(r[:, None] ** 2 + c[None, :] ** 2) / (2.0 * width))
    return g / g.sum()


def test_reflexive_kernel_matches_independent_coding():
    rng = np.random.default_rng(7)
    for shape in [(3, 3), (5, 5), (4, 4), (2, 5), (5, 2), (1, 1)]:
        psf = rng.standard_normal(shape)
        k = reflexive_kernel(psf)
        assert np.array_equal(k, symmetric_kernel(psf))
        assert k.shape[0] % 2 == 1 and k.shape[1] % 2 == 1
        assert np.allclose(k, k[::-1, :]) and np.allclose(k, k[:, ::-1])
        assert np.isclose(k.sum(), psf.sum())


def test_reflexive_kernel_fixes_symmetric_odd_input():
    psf = _gauss_psf((5, 5), 1.3)
    assert np.allclose(reflexive_kernel(psf), psf, atol=1e-16)


@pytest.mark.parametrize("dims", [(4, 4), (8, 8), (6, 9)])
def test_dct_backend_diagonalizes_the_dense_blur(dims):
    psf = _gauss_psf(dims, 2.0)
    sys = dct_decompose(psf, penalty="identity")
    T = reflexive_blur_matrix(psf, dims)
    assert np.abs(T - T.T).max() <= 1e-12
    # every DCT basis vector is an eigenvector; recover its eigenvalue and
    # cross it against the normalized spectral pair (delta, lam)
    n1, n2 = dims
    a = np.zeros(dims)
    for i in range(n1):
        for j in range(n2):
            e = np.zeros(dims)
            e[i, j] = 1.0
            v = sfft.idctn(e, type=2, norm="ortho").ravel()
            Tv = T @ v
            a[i, j] = v @ Tv
            assert np.linalg.norm(Tv - a[i, j] * v) <= 1e-10
    scale = np.hypot(a.ravel(), 1.0)
    delta_dense = np.sort(np.abs(a.ravel()) / scale)
    lam_dense = np.sort(1.0 / scale)[::-1]
    assert np.abs(delta_dense - sys.delta).max() <= 1e-9
    assert np.abs(lam_dense - sys.lam).max() <= 1e-9


def test_dct_backend_transforms_are_orthonormal_and_consistent():
    dims = (7, 5)
    psf = _gauss_psf(dims, 1.1)
    sys = dct_decompose(psf, penalty="identity")
    rng = np.random.default_rng(8)
    x = rng.standard_normal(dims)
    c = sys.analyze(x)
    assert c.shape == (sys.m,)
    assert np.isclose(np.linalg.norm(c), np.linalg.norm(x))
    back = sys.analyze_adjoint(c)
    assert back.shape == dims
    assert np.abs(back - x).max() <= 1e-12


def test_dct_backend_applies_the_blur_spectrally():
    dims = (8, 8)
    psf = _gauss_psf(dims, 3.0)
    sys = dct_decompose(psf, penalty="identity")
    T = reflexive_blur_matrix(psf, dims)
    rng = np.random.default_rng(9)
    x = rng.standard_normal(dims)
    # analyze diagonalizes the dense operator: the per-coefficient multiplier
    # it implies must equal gamma in magnitude (gamma de-normalizes to the
    # raw blur eigenvalue when the penalty is the identity)
    y = sys.analyze(T @ x.ravel())
    z = sys.analyze(x)
    nz = sys.delta > 0
    implied = y[nz] / z[nz]
    assert np.abs(np.abs(implied) - sys.gamma[nz]).max() <= 1e-8
    # unfiltered inversion through the transform pair recovers the image
    # (all blur eigenvalues are nonzero for this kernel)
    assert sys.ell == 0
    x_rec = sys.synthesize(sys.delta_pinv() * y)
    assert np.abs(x_rec - x).max() <= 1e-8


def test_dct_backend_laplacian_penalty_nullspace():
    dims = (6, 6)
    psf = _gauss_psf(dims, 1.5)
    sys = dct_decompose(psf, penalty="laplacian")
    assert sys.q_star == sys.n - 1
    assert np.count_nonzero(sys.lambda_zero) == 1
    # the unpenalized direction is the constant image
    coef = np.zeros(sys.n)
    coef[-1] = 1.0
    img = sys.synthesize(coef)
    assert np.abs(img - img.ravel()[0]).max() <= 1e-12
    report = diag_to_gsvd_check(sys)
    assert report.passed


def test_laplacian_spectrum_matches_dense_eigendecomposition():
    for dims in [(4, 4), (5, 3), (8, 8)]:
        lap = laplacian_spectrum(dims)
        dense = dense_laplacian_2d(dims)
        assert np.abs(np.sort(lap.ravel())
                      - np.sort(np.linalg.eigvalsh(dense))).max() <= 1e-10
        # eigenpair check for a few basis vectors
        n1, n2 = dims
        for (i, j) in [(0, 0), (1, 0), (n1 - 1, n2 - 1)]:
            e = np.zeros(dims)
            e[i, j] = 1.0
            v = sfft.idctn(e, type=2, norm="ortho").ravel()
            assert np.linalg.norm(dense @ v - lap[i, j] * v) <= 1e-10
    assert laplacian_spectrum((6, 6))[0, 0] == 0.0


def test_dct_decompose_rejects_asymmetric_kernels():
    psf = _gauss_psf((6, 6), 2.0).copy()
    psf[0, 1] += 1e-3
    with pytest.raises(KernelSymmetryError):
        dct_decompose(psf)


def test_dct_decompose_rejects_joint_null_space():
    # zero-sum symmetric kernel kills the constant mode, as does the
    # Laplacian penalty
    k = np.array([[0.0, -1.0, 0.0], [-1.0, 4.0, -1.0], [0.0, -1.0, 0.0]])
    psf = np.zeros((7, 7))
    psf[2:5, 2:5] = k
    with pytest.raises(JointNullSpaceError):
        dct_decompose(psf, penalty="laplacian")
    dct_decompose(psf, penalty="identity")  # fine with a full-rank penalty


# ---------------------------------------------------------------------------
# filter factors and system accessors
# ---------------------------------------------------------------------------


def test_filter_factors_piecewise_definition():
    sys = make_diag_system([0.0, 0.0, 0.6, 0.8, 1.0, 1.0],
                           [1.0, 0.9, 0.8, 0.6, 0.0, 0.0])
    alpha = 0.7
    ff = filter_factors(sys, alpha)
    expected_mid = np.array([0.6 ** 2 / (0.6 ** 2 + alpha ** 2 * 0.8 ** 2),
                             0.8 ** 2 / (0.8 ** 2 + alpha ** 2 * 0.6 ** 2)])
    assert np.all(ff.phi[:2] == 0.0)
    assert np.all(ff.phi[4:] == 1.0)
    assert np.abs(ff.phi[2:4] - expected_mid).max() <= 1e-15
    assert np.array_equal(ff.psi, 1.0 - ff.phi)
    assert np.all((ff.phi >= 0.0) & (ff.phi <= 1.0))


def test_filter_factors_monotone_in_alpha():
    rng = np.random.default_rng(10)
    A, L = tik_matrices(rng, 10, 8, "random")
    sys = gsvd(A, L)
    alphas = np.geomspace(1e-3, 10.0, 12)
    stack = np.array([filter_factors(sys, a).phi for a in alphas])
    assert np.all(np.diff(stack, axis=0) <= 1e-15)


def test_system_accessors_on_explicit_values():
    sys = make_diag_system([0.0, 0.3, 0.8, 1.0], [1.0, 0.9, 0.5, 0.0])
    assert sys.gamma_max_finite == pytest.approx(0.8 / 0.5)
    assert sys.gamma_min_positive == pytest.approx(0.3 / 0.9)
    pinv = sys.delta_pinv()
    assert pinv[0] == 0.0
    assert pinv[1:] == pytest.approx([1 / 0.3, 1 / 0.8, 1.0])


def test_diag_to_gsvd_check_flags_unnormalized_values():
    sys = make_diag_system([0.5, 1.2], [2.0, 1.0])
    report = diag_to_gsvd_check(sys)
    assert not report.passed
    assert report.unit_defect > 1.0
