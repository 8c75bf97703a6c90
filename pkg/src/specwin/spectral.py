"""Mutual spectral decompositions of a (forward, penalty) operator pair.

Two backends produce the same `SpectralSystem` interface:

* `gsvd` factors a dense pair (A, L) as A = U diag(delta) Xt, L = V diag(lam) Xt
  via QR of the stacked pair followed by an SVD of the top block (the CS
  decomposition of the stacked orthonormal factor).
* `dct_decompose` simultaneously diagonalizes a symmetric convolution operator
  under reflexive (half-sample symmetric) boundary conditions and an
  identity/Laplacian penalty with the orthonormal 2D DCT-II, then rescales so
  that delta_j**2 + lam_j**2 == 1.

Either way the solution of  min ||A x - d||^2 + alpha^2 ||L x||^2  is
x = synthesize(phi * pinv(delta) * analyze(d)[:n]) with the filter factors
phi from `filter_factors`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import fft as sfft

from .errors import JointNullSpaceError, KernelSymmetryError

__all__ = [
    "SpectralSystem",
    "FilterDiagonal",
    "DiagonalizationReport",
    "gsvd",
    "dct_decompose",
    "filter_factors",
    "diag_to_gsvd_check",
    "laplacian_spectrum",
    "reflexive_kernel",
]

# Relative threshold below which a spectral value counts as an exact zero.
ZERO_RTOL = 1e-14


@dataclass(frozen=True)
class SpectralSystem:
    """A mutual diagonalization of a forward operator and a penalty operator.

    delta is nondecreasing, lam nonincreasing; gamma[j] = delta[j]/lam[j]
    where lam[j] > 0.  Entries of gamma under the `lambda_zero` mask are
    placeholders (0.0) and must not be used without consulting the mask.
    analyze maps data vectors to spectral coefficients (length m, sorted
    order); synthesize maps filtered coefficients (length n) back to the
    solution space.
    """

    m: int
    n: int
    q_star: int
    ell: int
    delta: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray
    lambda_zero: np.ndarray
    _analyze: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    _synthesize: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    _analyze_adjoint: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    backend: str = "dense"
    dims: Optional[Tuple[int, int]] = None
    # Dense factors, kept for reconstruction and oracles; None for the DCT backend.
    U: Optional[np.ndarray] = field(default=None, repr=False)
    V: Optional[np.ndarray] = field(default=None, repr=False)
    Xt: Optional[np.ndarray] = field(default=None, repr=False)
    Y: Optional[np.ndarray] = field(default=None, repr=False)

    def analyze(self, v: np.ndarray) -> np.ndarray:
        """Spectral coefficients of a data vector (2D input is flattened)."""
        return self._analyze(np.asarray(v, dtype=float))

    def synthesize(self, c: np.ndarray) -> np.ndarray:
        """Solution-space vector from length-n filtered coefficients."""
        return self._synthesize(np.asarray(c, dtype=float))

    def analyze_adjoint(self, c: np.ndarray) -> np.ndarray:
        """Adjoint of analyze; analyze_adjoint(analyze(v)) == v."""
        return self._analyze_adjoint(np.asarray(c, dtype=float))

    @property
    def gamma_max_finite(self) -> float:
        """Largest finite generalized spectral value."""
        finite = self.gamma[~self.lambda_zero]
        return float(finite.max())

    @property
    def gamma_min_positive(self) -> float:
        """Smallest strictly positive finite generalized spectral value."""
        finite = self.gamma[~self.lambda_zero]
        pos = finite[finite > 0]
        return float(pos.min())

    def delta_pinv(self) -> np.ndarray:
        """Entrywise pseudo-inverse of delta (zero where delta is zero)."""
        out = np.zeros(self.n)
        nz = self.delta > 0
        out[nz] = 1.0 / self.delta[nz]
        return out


@dataclass(frozen=True)
class FilterDiagonal:
    """Diagonal spectral filter: phi shrinks, psi = 1 - phi is the residual part."""

    phi: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class DiagonalizationReport:
    """Diagnostics for a normalized system: unit-circle defect and ordering."""

    unit_defect: float
    ordering_defect: float
    passed: bool


def _finalize_values(delta: np.ndarray, lam: np.ndarray):
    """Zero-snap tiny values and build the gamma array plus lambda_zero mask."""
    delta = delta.copy()
    lam = lam.copy()
    dmax = delta.max() if delta.size else 0.0
    lmax = lam.max() if lam.size else 0.0
    delta[delta <= ZERO_RTOL * dmax] = 0.0
    lam[lam <= ZERO_RTOL * lmax] = 0.0
    if np.any((delta == 0.0) & (lam == 0.0)):
        raise JointNullSpaceError("joint null space nonempty")
    lambda_zero = lam == 0.0
    gamma = np.zeros_like(delta)
    nz = ~lambda_zero
    gamma[nz] = delta[nz] / lam[nz]
    ell = int(np.count_nonzero(delta == 0.0))
    return delta, lam, gamma, lambda_zero, ell


def gsvd(A: np.ndarray, L: np.ndarray) -> SpectralSystem:
    """Dense mutual factorization of the pair (A, L).

    Requires m >= n and full column rank of the stacked pair [A; L].  The
    returned values satisfy delta nondecreasing, lam nonincreasing and
    delta**2 + lam**2 == 1 (CS normalization); A == U[:, :n] @ diag(delta) @ Xt
    and L == V @ Lam @ Xt with Lam the q-by-n diagonal carrying lam.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    L = np.atleast_2d(np.asarray(L, dtype=float))
    m, n = A.shape
    q, nL = L.shape
    if nL != n:
        raise ValueError(f"column counts differ: A has {n}, L has {nL}")
    if m < n:
        raise ValueError(f"need at least as many rows as columns, got {m} < {n}")

    stacked = np.vstack((A, L))
    Q, R = np.linalg.qr(stacked, mode="reduced")
    sv = np.linalg.svd(R, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-12 * sv[0]:
        raise JointNullSpaceError("joint null space nonempty")

    Q1, Q2 = Q[:m], Q[m:]
    Uf, dvals, Zt = np.linalg.svd(Q1, full_matrices=True)
    # Reverse the singular-value order so delta is nondecreasing; columns of U
    # beyond n span the data-space complement of range(A) union range under Q1.
    delta = np.clip(dvals[::-1], 0.0, 1.0)
    U = np.concatenate((Uf[:, :n][:, ::-1], Uf[:, n:]), axis=1)
    Ztr = Zt[::-1, :]
    Xt = Ztr @ R

    lam_cols = Q2 @ Ztr.T  # columns are orthogonal with norms lam_j
    lam = np.linalg.norm(lam_cols, axis=0) if q > 0 else np.zeros(n)
    lam = np.clip(lam, 0.0, 1.0)

    delta, lam, gamma, lambda_zero, ell = _finalize_values(delta, lam)
    # lam is nonincreasing, so penalty-null directions occupy the tail; the
    # filter passes components beyond q_star unchanged
    q_star = n - int(np.count_nonzero(lambda_zero))

    # Orthonormal V: normalized nonzero columns, completed on the zero columns.
    V = np.zeros((q, q))
    nz_idx = np.flatnonzero(lam[: min(q, n)] > 0.0)
    if nz_idx.size:
        V[:, nz_idx] = lam_cols[:, nz_idx] / lam[nz_idx]
    k = nz_idx.size
    if k < q:
        Vnz = V[:, nz_idx]
        proj = np.eye(q) - Vnz @ Vnz.T if k else np.eye(q)
        Uc, sc, _ = np.linalg.svd(proj)
        comp = Uc[:, : q - k]
        fill = [j for j in range(q) if j not in set(nz_idx.tolist())]
        V[:, fill] = comp

    Y = np.linalg.inv(Xt)

    def _an(v: np.ndarray, U=U) -> np.ndarray:
        return U.T @ v.ravel()

    def _syn(c: np.ndarray, Y=Y) -> np.ndarray:
        return Y @ c

    def _adj(c: np.ndarray, U=U) -> np.ndarray:
        return U @ c

    return SpectralSystem(
        m=m, n=n, q_star=q_star, ell=ell,
        delta=delta, lam=lam, gamma=gamma, lambda_zero=lambda_zero,
        _analyze=_an, _synthesize=_syn, _analyze_adjoint=_adj,
        backend="dense", dims=None, U=U, V=V, Xt=Xt, Y=Y,
    )


def reflexive_kernel(psf: np.ndarray) -> np.ndarray:
    """Symmetrized integer-shift kernel defining the reflexive blur operator.

    The PSF array is averaged with its three reflections about the array
    center (h-1)//2; for odd sizes this returns the PSF itself.  The result
    has odd size, is exactly even in both axes, and keeps the kernel sum.
    """
    p = np.asarray(psf, dtype=float)
    h, w = p.shape
    ch, cw = (h - 1) // 2, (w - 1) // 2
    Sh, Sw = max(ch, h - 1 - ch), max(cw, w - 1 - cw)
    canvas = np.zeros((2 * Sh + 1, 2 * Sw + 1))
    canvas[Sh - ch: Sh - ch + h, Sw - cw: Sw - cw + w] = p
    return 0.25 * (canvas + canvas[::-1, :] + canvas[:, ::-1] + canvas[::-1, ::-1])


def _dct2(img: np.ndarray) -> np.ndarray:
    return sfft.dctn(img, type=2, norm="ortho")


def _idct2(coef: np.ndarray) -> np.ndarray:
    return sfft.idctn(coef, type=2, norm="ortho")


def _first_column_spectrum(kernel: np.ndarray, dims: Tuple[int, int]) -> np.ndarray:
    """Eigenvalues of the reflexive-boundary convolution in DCT-II order.

    Applies the operator to the impulse at index (0, 0) -- whose reflexive
    extension carries unit images at the four indices {0,-1} x {0,-1} -- and
    divides the transformed column by the transform of the impulse.
    """
    n1, n2 = dims
    Sh, Sw = kernel.shape[0] // 2, kernel.shape[1] // 2
    kpos = np.zeros((n1 + 1, n2 + 1))
    smax, tmax = min(Sh, n1), min(Sw, n2)
    kpos[: smax + 1, : tmax + 1] = kernel[Sh: Sh + smax + 1, Sw: Sw + tmax + 1]
    col = (kpos[0:n1, 0:n2] + kpos[1:n1 + 1, 0:n2]
           + kpos[0:n1, 1:n2 + 1] + kpos[1:n1 + 1, 1:n2 + 1])
    impulse = np.zeros(dims)
    impulse[0, 0] = 1.0
    return _dct2(col) / _dct2(impulse)


def laplacian_spectrum(dims: Tuple[int, int]) -> np.ndarray:
    """Eigenvalues of the 2D negative Laplacian with reflexive boundaries.

    In DCT-II order: l[i, j] = (2 - 2 cos(pi i / n1)) + (2 - 2 cos(pi j / n2)),
    with exactly one zero at (0, 0) for the constant mode.
    """
    n1, n2 = dims
    l1 = 2.0 - 2.0 * np.cos(np.pi * np.arange(n1) / n1)
    l2 = 2.0 - 2.0 * np.cos(np.pi * np.arange(n2) / n2)
    return l1[:, None] + l2[None, :]


def dct_decompose(psf: np.ndarray, penalty: str = "identity") -> SpectralSystem:
    """Simultaneous DCT-II diagonalization of a symmetric blur and a penalty.

    The PSF must be doubly symmetric and share the image dimensions.  The
    spectral values are normalized so delta**2 + lam**2 == 1 and sorted so
    that delta is nondecreasing; the sorting permutation is folded into the
    analyze/synthesize transforms.
    """
    psf = np.asarray(psf, dtype=float)
    if psf.ndim != 2:
        raise ValueError("psf must be a 2D array")
    tol = 1e-12 * np.abs(psf).max()
    if (np.abs(psf - psf[::-1, :]).max() > tol
            or np.abs(psf - psf[:, ::-1]).max() > tol):
        raise KernelSymmetryError("kernel not diagonalizable by DCT")
    dims = psf.shape
    n1, n2 = dims
    n = n1 * n2

    a = _first_column_spectrum(reflexive_kernel(psf), dims).ravel()
    if penalty == "identity":
        l = np.ones(n)
    elif penalty == "laplacian":
        l = laplacian_spectrum(dims).ravel()
    else:
        raise ValueError(f"unknown penalty kind: {penalty!r}")

    a_abs, l_abs = np.abs(a), np.abs(l)
    a_abs[a_abs <= ZERO_RTOL * a_abs.max()] = 0.0
    l_abs[l_abs <= ZERO_RTOL * l_abs.max()] = 0.0
    if np.any((a_abs == 0.0) & (l_abs == 0.0)):
        raise JointNullSpaceError("joint null space nonempty")

    scale = np.hypot(a_abs, l_abs)
    sign = np.where(a < 0.0, -1.0, 1.0)
    d_un = a_abs / scale
    l_un = l_abs / scale
    perm = np.argsort(d_un, kind="stable")

    delta, lam, gamma, lambda_zero, ell = _finalize_values(d_un[perm], l_un[perm])
    scale_sorted = scale[perm]
    q_star = n - int(np.count_nonzero(lambda_zero))

    def _an(v: np.ndarray, perm=perm, sign=sign, dims=dims) -> np.ndarray:
        c = _dct2(v.reshape(dims)).ravel()
        return (sign * c)[perm]

    def _syn(c: np.ndarray, perm=perm, ssorted=scale_sorted, dims=dims) -> np.ndarray:
        z = np.zeros(dims[0] * dims[1])
        z[perm] = c / ssorted
        return _idct2(z.reshape(dims))

    def _adj(c: np.ndarray, perm=perm, sign=sign, dims=dims) -> np.ndarray:
        z = np.zeros(dims[0] * dims[1])
        z[perm] = c
        return _idct2((sign * z).reshape(dims))

    return SpectralSystem(
        m=n, n=n, q_star=q_star, ell=ell,
        delta=delta, lam=lam, gamma=gamma, lambda_zero=lambda_zero,
        _analyze=_an, _synthesize=_syn, _analyze_adjoint=_adj,
        backend="dct", dims=dims,
    )


def filter_factors(sys: SpectralSystem, alpha: float) -> FilterDiagonal:
    """Spectral shrinkage factors phi for one regularization parameter.

    phi[j] = delta[j]**2 / (delta[j]**2 + alpha**2 lam[j]**2) in the middle
    band, 0 where delta[j] == 0, 1 where lam[j] == 0; psi = 1 - phi exactly.
    """
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise ValueError(f"regularization parameter must be positive, got {alpha}")
    phi = np.zeros(sys.n)
    # lam > 0 throughout the middle band: penalty-null directions sort past
    # q_star and rank-deficient forward directions sort below ell
    mid = slice(sys.ell, sys.q_star)
    d2 = sys.delta[mid] ** 2
    phi[mid] = d2 / (d2 + alpha ** 2 * sys.lam[mid] ** 2)
    phi[sys.q_star:] = 1.0
    psi = 1.0 - phi
    return FilterDiagonal(phi=phi, psi=psi)


def diag_to_gsvd_check(sys: SpectralSystem) -> DiagonalizationReport:
    """Verify the normalized-diagonalization contract of a system.

    Reports max |delta**2 + lam**2 - 1| and the worst ordering violation
    (delta must be nondecreasing, lam nonincreasing); passes when both are
    at most 1e-12.
    """
    unit = float(np.abs(sys.delta ** 2 + sys.lam ** 2 - 1.0).max())
    d_viol = float(np.maximum(sys.delta[:-1] - sys.delta[1:], 0.0).max()) if sys.n > 1 else 0.0
    l_viol = float(np.maximum(sys.lam[1:] - sys.lam[:-1], 0.0).max()) if sys.n > 1 else 0.0
    ordering = max(d_viol, l_viol)
    return DiagonalizationReport(
        unit_defect=unit,
        ordering_defect=ordering,
        passed=(unit <= 1e-12 and ordering <= 1e-12),
    )
