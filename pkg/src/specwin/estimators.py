"""Parameter-selection objectives.

Every estimator is evaluated in the spectral domain from cached data
coefficients dhat = analyze(d):

* predictive-risk (UPRE) objectives, scalar and multi-data windowed, plus the
  per-window separable form valid for non-overlapping windows;
* cross-validation (GCV) objectives: scalar, multi-data scalar, the coupled
  windowed form, and the per-window decoupled approximation;
* the supervised learning objective (mean squared solution error against
  known truths).

Scalar forms keep their constant terms; the multi-data windowed UPRE drops
alpha-independent constants, so cross-form tests must compare minimizers
rather than values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyWindowError, SaturatedTraceError
from .solver import ParamVector, phi_windowed
from .spectral import SpectralSystem, filter_factors
from .windows import WindowSet

__all__ = [
    "SATURATION_FLOOR",
    "NoiseModel",
    "WindowedGcvTerms",
    "upre_scalar",
    "upre_md_windowed",
    "upre_window_separable",
    "gcv_scalar",
    "gcv_md_scalar",
    "gcv_windowed_true",
    "gcv_windowed_true_md",
    "gcv_windowed_decoupled",
    "windowed_gcv_terms",
    "mse_learning",
    "estimate_sigma2",
]

# Squared GCV denominators (and per-window trace complements) below this are
# treated as poles: raise instead of returning huge finite garbage.
SATURATION_FLOOR = 1e-14


@dataclass(frozen=True)
class NoiseModel:
    """Per-data-set white-noise variances sigma_r^2.

    Zero is accepted so noiseless reductions stay expressible; negative or
    non-finite variances are rejected.
    """

    sigma2: np.ndarray

    def __init__(self, sigma2) -> None:
        arr = np.atleast_1d(np.asarray(sigma2, dtype=float)).copy()
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("sigma2 must be a scalar or nonempty 1D sequence")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise ValueError(f"noise variances must be finite and >= 0, got {arr}")
        object.__setattr__(self, "sigma2", arr)

    def __len__(self) -> int:
        return self.sigma2.size


@dataclass(frozen=True)
class WindowedGcvTerms:
    """Per-window trace complements for the coupled windowed GCV.

    mu[p] = 1 - (1/m) sum_j phi_j(alpha_p)          (unweighted)
    nu[p] = 1 - (1/m) sum_j w_j^(p) phi_j(alpha_p)  (window weighted)

    Both live in (0, 1] away from saturation, and nu >= mu whenever the
    weights are <= 1.
    """

    mu: np.ndarray
    nu: np.ndarray


def _vec(alphas) -> ParamVector:
    return alphas if isinstance(alphas, ParamVector) else ParamVector(alphas)


def _sigma2_scalar(noise) -> float:
    if isinstance(noise, NoiseModel):
        if len(noise) != 1:
            raise ValueError("scalar estimator needs a single-entry NoiseModel")
        return float(noise.sigma2[0])
    s2 = float(noise)
    if not np.isfinite(s2) or s2 < 0.0:
        raise ValueError(f"noise variance must be finite and >= 0, got {s2}")
    return s2


def _noise_for(noise, R: int) -> np.ndarray:
    model = noise if isinstance(noise, NoiseModel) else NoiseModel(noise)
    if len(model) == 1:
        return np.full(R, model.sigma2[0])
    if len(model) != R:
        raise ValueError(f"noise model has {len(model)} entries for {R} data sets")
    return model.sigma2


def _windows_for(windows, R: int) -> list[WindowSet]:
    """Broadcast one shared WindowSet to R systems, or validate a sequence."""
    if isinstance(windows, WindowSet):
        return [windows] * R
    wlist = list(windows)
    if len(wlist) != R:
        raise ValueError(f"{len(wlist)} window sets for {R} systems")
    if any(w.P != wlist[0].P for w in wlist):
        raise ValueError("window sets must share the same window count P")
    return wlist


def _check_md_shapes(systems, dhats) -> None:
    if len(systems) != len(dhats):
        raise ValueError("systems and dhats must have equal lengths")
    for sys, dhat in zip(systems, dhats):
        if dhat.size != sys.m:
            raise ValueError(f"data length {dhat.size} does not match m={sys.m}")


def _residual_head(sys: SpectralSystem, dhat: np.ndarray, psi: np.ndarray) -> float:
    q = sys.q_star
    return float(np.sum((psi[:q] * dhat[:q]) ** 2))


def _scalar_trace(sys: SpectralSystem, phi: np.ndarray) -> float:
    return (sys.n - sys.q_star) + float(np.sum(phi[sys.ell: sys.q_star]))


# ---------------------------------------------------------------------------
# UPRE family
# ---------------------------------------------------------------------------

def upre_scalar(sys: SpectralSystem, dhat: np.ndarray, alpha: float, noise) -> float:
    """Unbiased predictive-risk objective for one system, one parameter.

    (1/m) ||r(alpha)||^2 + (2 sigma^2 / m) trace(influence) - sigma^2,
    constants included.
    """
    s2 = _sigma2_scalar(noise)
    ff = filter_factors(sys, alpha)
    rnorm = _residual_head(sys, dhat, ff.psi) + float(np.sum(dhat[sys.n:] ** 2))
    tr = _scalar_trace(sys, ff.phi)
    m = sys.m
    return rnorm / m + 2.0 * s2 * tr / m - s2


def upre_md_windowed(systems: Sequence[SpectralSystem], dhats: Sequence[np.ndarray],
                     windows, alphas, noise) -> float:
    """Multi-data windowed UPRE with a shared parameter vector.

    (1/M) sum_r [ sum_j (sum_p w_j psi_j(alpha_p))^2 dhat_j^2
                  + 2 sigma_r^2 sum_j sum_p w_j phi_j(alpha_p) ],
    M = sum_r m_r.  Terms independent of alpha (the beyond-n residual tail
    and the -sigma^2 offsets) are dropped.
    """
    alphas = _vec(alphas)
    _check_md_shapes(systems, dhats)
    R = len(systems)
    wlist = _windows_for(windows, R)
    s2 = _noise_for(noise, R)
    M = sum(sys.m for sys in systems)
    total = 0.0
    for sys, dhat, wset, s in zip(systems, dhats, wlist, s2):
        if wset.P != alphas.P:
            raise ValueError(
                f"parameter/window count mismatch: {alphas.P} vs {wset.P}")
        swin = np.zeros(sys.n)
        tr = 0.0
        for p in range(wset.P):
            ff = filter_factors(sys, alphas.values[p])
            swin += wset.weights[p] * ff.psi
            tr += float(np.sum(wset.weights[p] * ff.phi))
        total += _residual_head(sys, dhat, swin) + 2.0 * s * tr
    return total / M


def upre_window_separable(systems: Sequence[SpectralSystem],
                          dhats: Sequence[np.ndarray], windows, p: int,
                          alpha: float, noise) -> float:
    """Window p's share of the multi-data windowed UPRE.

    Valid for non-overlapping windows only; summing over p = 0..P-1
    reproduces upre_md_windowed at the assembled parameter vector exactly.
    """
    _check_md_shapes(systems, dhats)
    R = len(systems)
    wlist = _windows_for(windows, R)
    s2 = _noise_for(noise, R)
    P = wlist[0].P
    if not 0 <= p < P:
        raise IndexError(f"window index {p} out of range for P={P}")
    for wset in wlist:
        if not wset.nonoverlapping:
            raise ValueError("separable form invalid for overlapping windows")
    M = sum(sys.m for sys in systems)
    members = 0
    total = 0.0
    for sys, dhat, wset, s in zip(systems, dhats, wlist, s2):
        idx = wset.member_indices(p)
        members += idx.size
        if idx.size == 0:
            continue
        ff = filter_factors(sys, alpha)
        total += float(np.sum((ff.psi[idx] * dhat[idx]) ** 2))
        total += 2.0 * s * float(np.sum(ff.phi[idx]))
    if members == 0:
        raise EmptyWindowError(f"window {p} has no members in any system")
    return total / M


# ---------------------------------------------------------------------------
# GCV family
# ---------------------------------------------------------------------------

def gcv_scalar(sys: SpectralSystem, dhat: np.ndarray, alpha: float) -> float:
    """[(1/m) ||r(alpha)||^2] / [1 - trace(influence)/m]^2."""
    ff = filter_factors(sys, alpha)
    rnorm = _residual_head(sys, dhat, ff.psi) + float(np.sum(dhat[sys.n:] ** 2))
    tr = _scalar_trace(sys, ff.phi)
    m = sys.m
    den = (1.0 - tr / m) ** 2
    if den < SATURATION_FLOOR:
        raise SaturatedTraceError(
            f"saturated trace: influence trace {tr:.6g} ~ m={m} at alpha={alpha:.3g}")
    return (rnorm / m) / den


def gcv_md_scalar(systems: Sequence[SpectralSystem], dhats: Sequence[np.ndarray],
                  alpha: float) -> float:
    """Multi-data scalar GCV: pooled residual over pooled trace complement."""
    _check_md_shapes(systems, dhats)
    M = sum(sys.m for sys in systems)
    rsum = 0.0
    trsum = 0.0
    for sys, dhat in zip(systems, dhats):
        ff = filter_factors(sys, alpha)
        rsum += _residual_head(sys, dhat, ff.psi) + float(np.sum(dhat[sys.n:] ** 2))
        trsum += _scalar_trace(sys, ff.phi)
    den = (1.0 - trsum / M) ** 2
    if den < SATURATION_FLOOR:
        raise SaturatedTraceError(
            f"saturated trace: pooled trace {trsum:.6g} ~ M={M} at alpha={alpha:.3g}")
    return (rsum / M) / den


def _true_gcv_filters(sys: SpectralSystem, windows: WindowSet,
                      alphas: ParamVector) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack phi(alpha_p) rows and the per-window trace complements mu, nu."""
    if windows.P != alphas.P:
        raise ValueError(
            f"parameter/window count mismatch: {alphas.P} vs {windows.P}")
    phi = np.stack([filter_factors(sys, a).phi for a in alphas.values])
    mu = 1.0 - phi.sum(axis=1) / sys.m
    nu = 1.0 - np.sum(windows.weights * phi, axis=1) / sys.m
    if np.any(mu <= SATURATION_FLOOR):
        bad = int(np.argmin(mu))
        raise SaturatedTraceError(
            f"saturated window trace: mu[{bad}] <= {SATURATION_FLOOR:g} at "
            f"alpha={alphas.values[bad]:.3g}")
    return phi, mu, nu


def windowed_gcv_terms(sys: SpectralSystem, windows: WindowSet,
                       alphas) -> WindowedGcvTerms:
    """Trace complements mu_p, nu_p entering the coupled windowed GCV."""
    _, mu, nu = _true_gcv_filters(sys, windows, _vec(alphas))
    return WindowedGcvTerms(mu=mu, nu=nu)


def gcv_windowed_true(sys: SpectralSystem, dhat: np.ndarray, windows: WindowSet,
                      alphas) -> float:
    """Coupled windowed GCV for a single data set.

    With S = sum_p (1 - nu_p)/mu_p the value is

      (1/m) [ sum_{j<=n} (1 + S - sum_p w_j phi_j(alpha_p)/mu_p)^2 dhat_j^2
              + sum_{j>n} (1 + S)^2 dhat_j^2 ].

    The leave-one-out derivation pins the weighted form of nu_p and the
    per-index weighted correction; with P = 1 the expression collapses to
    gcv_scalar exactly, including rank-deficient systems.
    """
    alphas = _vec(alphas)
    if dhat.size != sys.m:
        raise ValueError(f"data length {dhat.size} does not match m={sys.m}")
    phi, mu, nu = _true_gcv_filters(sys, windows, alphas)
    S = float(np.sum((1.0 - nu) / mu))
    coef = 1.0 + S - np.sum(windows.weights * phi / mu[:, None], axis=0)
    head = float(np.sum((coef * dhat[: sys.n]) ** 2))
    tail = (1.0 + S) ** 2 * float(np.sum(dhat[sys.n:] ** 2))
    return (head + tail) / sys.m


def gcv_windowed_true_md(systems: Sequence[SpectralSystem],
                         dhats: Sequence[np.ndarray], windows, alphas) -> float:
    """Average of the per-set coupled windowed GCV values.

    A pragmatic surrogate: the coupled form does not pool across data sets
    the way the scalar GCV does, so multi-data use averages per-set values.
    """
    _check_md_shapes(systems, dhats)
    wlist = _windows_for(windows, len(systems))
    vals = [gcv_windowed_true(sys, dhat, wset, alphas)
            for sys, dhat, wset in zip(systems, dhats, wlist)]
    return float(np.mean(vals))


def gcv_windowed_decoupled(systems: Sequence[SpectralSystem],
                           dhats: Sequence[np.ndarray], windows, p: int,
                           alpha: float) -> float:
    """Per-window decoupled GCV approximation (non-overlapping windows).

    Numerator: pooled window-masked squared residual, with the beyond-n data
    tail charged to the last window so P = 1 reduces to gcv_md_scalar.
    Denominator: squared complement of the pooled single-window trace.
    """
    _check_md_shapes(systems, dhats)
    R = len(systems)
    wlist = _windows_for(windows, R)
    P = wlist[0].P
    if not 0 <= p < P:
        raise IndexError(f"window index {p} out of range for P={P}")
    for wset in wlist:
        if not wset.nonoverlapping:
            raise ValueError("decoupled GCV requires non-overlapping windows")
    M = sum(sys.m for sys in systems)
    members = 0
    num = 0.0
    trsum = 0.0
    for sys, dhat, wset in zip(systems, dhats, wlist):
        idx = wset.member_indices(p)
        members += idx.size
        ff = filter_factors(sys, alpha)
        if idx.size:
            num += float(np.sum((ff.psi[idx] * dhat[idx]) ** 2))
            trsum += float(np.sum(ff.phi[idx]))
        if p == P - 1:
            num += float(np.sum(dhat[sys.n:] ** 2))
    if members == 0:
        raise EmptyWindowError(f"window {p} has no members in any system")
    den = (1.0 - trsum / M) ** 2
    if den < SATURATION_FLOOR:
        raise SaturatedTraceError(
            f"saturated trace: window {p} trace {trsum:.6g} ~ M={M} at "
            f"alpha={alpha:.3g}")
    return (num / M) / den


# ---------------------------------------------------------------------------
# Supervised learning objective
# ---------------------------------------------------------------------------

def mse_learning(systems: Sequence[SpectralSystem], data: Sequence[np.ndarray],
                 truths: Sequence[np.ndarray], windows, alphas,
                 dhats: Sequence[np.ndarray] | None = None) -> float:
    """(1/R) sum_r ||x_win^(r)(alphas) - x_true^(r)||^2.

    Pass precomputed dhats to skip the per-call analyze transforms inside
    optimization loops.
    """
    alphas = _vec(alphas)
    if truths is None:
        raise ValueError("missing truths: the learning objective needs x_true")
    R = len(systems)
    if not (len(data) == len(truths) == R):
        raise ValueError("systems, data, and truths must have equal lengths")
    wlist = _windows_for(windows, R)
    if dhats is None:
        dhats = [sys.analyze(d) for sys, d in zip(systems, data)]
    total = 0.0
    for sys, dhat, truth, wset in zip(systems, dhats, truths, wlist):
        phiw = phi_windowed(sys, wset, alphas)
        x = sys.synthesize(phiw * sys.delta_pinv() * dhat[: sys.n])
        total += float(np.sum((x - truth) ** 2))
    return total / R


# ---------------------------------------------------------------------------
# Noise-variance fallback
# ---------------------------------------------------------------------------

def estimate_sigma2(sys: SpectralSystem, dhat: np.ndarray) -> float:
    """Median-absolute-deviation variance estimate from noise-dominated
    spectral coefficients.

    Uses the beyond-n coefficients when m > n; otherwise the quarter of the
    spectrum with the smallest signal-to-penalty ratio gamma.  Not part of
    the selection theory (UPRE assumes sigma known); provided as a practical
    fallback.
    """
    if dhat.size != sys.m:
        raise ValueError(f"data length {dhat.size} does not match m={sys.m}")
    if sys.m > sys.n:
        pool = dhat[sys.n:]
    else:
        k = max(16, sys.n // 4)
        k = min(k, sys.n)
        # penalty-null directions carry a gamma placeholder of 0 but are
        # signal-dominated: push them to the back of the ordering
        geff = np.where(sys.lambda_zero, np.inf, sys.gamma)
        order = np.argsort(geff, kind="stable")
        pool = dhat[order[:k]]
    sigma = np.median(np.abs(pool)) / 0.6745
    return float(sigma ** 2)
