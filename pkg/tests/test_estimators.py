"""Selection objectives against dense references, the leave-one-out oracle,
and their documented reductions."""

import numpy as np
import pytest

from specwin.errors import EmptyWindowError, SaturatedTraceError
from specwin.estimators import (
    NoiseModel,
    estimate_sigma2,
    gcv_md_scalar,
    gcv_scalar,
    gcv_windowed_decoupled,
    gcv_windowed_true,
    gcv_windowed_true_md,
    mse_learning,
    upre_md_windowed,
    upre_scalar,
    upre_window_separable,
    windowed_gcv_terms,
)
from specwin.solver import solve_windowed
from specwin.spectral import filter_factors, gsvd
from specwin.windows import cosine_windows, indicator_windows, make_partitions, trivial_window

from oracles import (
    dense_gcv_scalar,
    dense_influence_scalar,
    dense_influence_windowed,
    dense_solve_scalar,
    dense_solve_windowed,
    dense_upre_scalar,
    make_diag_system,
    press_windowed_gcv,
    tik_matrices,
    windows_from_members,
    windows_from_weights,
)

ALPHA_GRID = np.geomspace(5e-3, 8.0, 9)


def _problem(m, n, penalty, seed):
    rng = np.random.default_rng(seed)
    A, L = tik_matrices(rng, m, n, penalty)
    d = rng.standard_normal(m)
    sys = gsvd(A, L)
    return A, L, d, sys, sys.analyze(d)


def _md_problems(seed, specs=((8, 6, "identity"), (10, 7, "laplacian"))):
    rng = np.random.default_rng(seed)
    systems, dhats, data, mats = [], [], [], []
    for m, n, penalty in specs:
        A, L = tik_matrices(rng, m, n, penalty)
        d = rng.standard_normal(m)
        sys = gsvd(A, L)
        systems.append(sys)
        data.append(d)
        dhats.append(sys.analyze(d))
        mats.append((A, L))
    return systems, data, dhats, mats


# ---------------------------------------------------------------------------
# scalar UPRE
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("m,n,penalty", [(8, 6, "identity"), (12, 9, "laplacian"),
                                         (10, 10, "random")])
def test_upre_scalar_matches_dense(m, n, penalty):
    A, L, d, sys, dhat = _problem(m, n, penalty, seed=m + n)
    s2 = 0.04
    for alpha in ALPHA_GRID:
        val = upre_scalar(sys, dhat, alpha, s2)
        ref = dense_upre_scalar(A, L, d, alpha, s2)
        assert abs(val - ref) <= 1e-10 * max(abs(ref), 1.0)


def test_upre_scalar_noiseless_reduces_to_residual():
    _, _, _, sys, dhat = _problem(9, 7, "identity", seed=41)
    vals = np.array([upre_scalar(sys, dhat, a, 0.0) for a in ALPHA_GRID])
    # with sigma = 0 the objective is the pure residual, decreasing toward 0+
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.argmin(vals) == 0


def test_upre_scalar_large_alpha_limit():
    _, _, d, sys, dhat = _problem(8, 8, "identity", seed=43)
    s2 = 0.1
    val = upre_scalar(sys, dhat, 1e8, s2)
    lim = float(d @ d) / sys.m - s2
    assert abs(val - lim) <= 1e-6 * abs(lim)


def test_upre_scalar_rejects_bad_alpha_and_noise():
    _, _, _, sys, dhat = _problem(6, 5, "identity", seed=47)
    with pytest.raises(ValueError):
        upre_scalar(sys, dhat, 0.0, 0.1)
    with pytest.raises(ValueError):
        upre_scalar(sys, dhat, -1.0, 0.1)
    with pytest.raises(ValueError):
        upre_scalar(sys, dhat, 1.0, -0.5)


def test_noise_model_validation():
    nm = NoiseModel([0.1, 0.2])
    assert len(nm) == 2
    NoiseModel(0.0)  # noiseless is representable
    with pytest.raises(ValueError):
        NoiseModel([-0.1])
    with pytest.raises(ValueError):
        NoiseModel([np.nan])
    with pytest.raises(ValueError):
        NoiseModel([np.inf])


# ---------------------------------------------------------------------------
# MD windowed UPRE and its separable form
# ---------------------------------------------------------------------------

def test_upre_md_windowed_offset_from_scalar_is_constant():
    _, _, _, sys, dhat = _problem(11, 7, "laplacian", seed=53)
    s2 = 0.03
    win = trivial_window(sys)
    tail = float(np.sum(dhat[sys.n:] ** 2))
    expected_offset = s2 - tail / sys.m
    for alpha in ALPHA_GRID:
        md = upre_md_windowed([sys], [dhat], win, [alpha], s2)
        sc = upre_scalar(sys, dhat, alpha, s2)
        assert abs((md - sc) - expected_offset) <= 1e-12
    grid = [upre_md_windowed([sys], [dhat], win, [a], s2) for a in ALPHA_GRID]
    ref = [upre_scalar(sys, dhat, a, s2) for a in ALPHA_GRID]
    assert int(np.argmin(grid)) == int(np.argmin(ref))


def test_upre_md_windowed_matches_dense_assembly():
    systems, data, dhats, mats = _md_problems(seed=59)
    sigma2 = [0.02, 0.05]
    M = sum(s.m for s in systems)
    parts = [make_partitions(s, 2, spacing="log") for s in systems]
    wins = [indicator_windows(pt, s, spacing="log")
            for pt, s in zip(parts, systems)]
    alphas = [0.6, 0.09]
    val = upre_md_windowed(systems, dhats, wins, alphas, NoiseModel(sigma2))
    ref = 0.0
    for (A, L), sys, d, dhat, win, s2 in zip(mats, systems, data, dhats, wins, sigma2):
        x = dense_solve_windowed(A, L, sys, win, alphas, d)
        tail = float(np.sum(dhat[sys.n:] ** 2))
        tr = float(np.trace(dense_influence_windowed(A, L, sys, win, alphas)))
        ref += float(np.sum((A @ x - d) ** 2)) - tail + 2.0 * s2 * tr
    ref /= M
    assert abs(val - ref) <= 1e-10 * max(abs(ref), 1.0)


def test_upre_md_windowed_equal_systems_average():
    _, _, _, sys, dhat = _problem(9, 6, "identity", seed=61)
    win = trivial_window(sys)
    one = upre_md_windowed([sys], [dhat], win, [0.4], 0.02)
    three = upre_md_windowed([sys] * 3, [dhat] * 3, win, [0.4], 0.02)
    assert abs(three - one) <= 1e-12 * max(abs(one), 1.0)


def test_upre_separable_sums_to_the_coupled_value():
    systems, _, dhats, _ = _md_problems(seed=67)
    for P in (2, 3):
        wins = []
        ok = True
        for s in systems:
            try:
                wins.append(indicator_windows(
                    make_partitions(s, P, spacing="log"), s, spacing="log"))
            except EmptyWindowError:
                ok = False
        if not ok:
            continue
        alphas = list(np.geomspace(0.08, 1.5, P))
        noise = NoiseModel([0.01, 0.04])
        total = sum(upre_window_separable(systems, dhats, wins, p, alphas[p], noise)
                    for p in range(P))
        coupled = upre_md_windowed(systems, dhats, wins, alphas, noise)
        assert abs(total - coupled) <= 1e-14 * max(abs(coupled), 1.0)


def test_upre_separable_rejects_overlap_and_empty_windows():
    _, _, _, sys, dhat = _problem(10, 8, "identity", seed=71)
    cos = cosine_windows(make_partitions(sys, 2, spacing="log"), sys, spacing="log")
    with pytest.raises(ValueError, match="separable form invalid"):
        upre_window_separable([sys], [dhat], cos, 0, 0.5, 0.01)
    empty = windows_from_weights(np.vstack([np.ones(sys.n), np.zeros(sys.n)]))
    with pytest.raises(EmptyWindowError):
        upre_window_separable([sys], [dhat], empty, 1, 0.5, 0.01)


def test_md_shape_mismatches_are_rejected():
    systems, _, dhats, _ = _md_problems(seed=73)
    win = trivial_window(systems[0])
    with pytest.raises(ValueError):
        upre_md_windowed(systems, dhats[:1], win, [0.5], 0.01)
    with pytest.raises(ValueError):
        upre_md_windowed(systems, dhats, win, [0.5], NoiseModel([0.1, 0.1, 0.1]))
    with pytest.raises(ValueError):
        upre_md_windowed(systems, dhats, win, [0.5, 0.7], 0.01)


# ---------------------------------------------------------------------------
# GCV family
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("m,n,penalty", [(8, 6, "identity"), (12, 9, "laplacian"),
                                         (11, 11, "random")])
def test_gcv_scalar_matches_dense(m, n, penalty):
    A, L, d, sys, dhat = _problem(m, n, penalty, seed=m * n)
    for alpha in ALPHA_GRID:
        val = gcv_scalar(sys, dhat, alpha)
        ref = dense_gcv_scalar(A, L, d, alpha)
        assert abs(val - ref) <= 1e-10 * max(abs(ref), 1.0)


def test_gcv_scalar_limits_and_saturation():
    _, _, d, sys, dhat = _problem(9, 9, "identity", seed=79)
    lim = float(d @ d) / sys.m
    assert abs(gcv_scalar(sys, dhat, 1e8) - lim) <= 1e-6 * lim
    with pytest.raises(SaturatedTraceError, match="saturated trace"):
        gcv_scalar(sys, dhat, 1e-12)  # m == n full rank: trace -> m


def test_gcv_md_scalar_reductions_and_dense():
    systems, data, dhats, mats = _md_problems(seed=83)
    one = gcv_md_scalar(systems[:1], dhats[:1], 0.7)
    assert one == gcv_scalar(systems[0], dhats[0], 0.7)
    rep = gcv_md_scalar([systems[0]] * 3, [dhats[0]] * 3, 0.7)
    assert abs(rep - one) <= 1e-12 * abs(one)
    # dense assembly for two distinct systems
    M = sum(s.m for s in systems)
    for alpha in [0.09, 0.8]:
        rsum = trsum = 0.0
        for (A, L), d in zip(mats, data):
            x = dense_solve_scalar(A, L, d, alpha)
            rsum += float(np.sum((A @ x - d) ** 2))
            trsum += float(np.trace(dense_influence_scalar(A, L, alpha)))
        ref = (rsum / M) / (1.0 - trsum / M) ** 2
        val = gcv_md_scalar(systems, dhats, alpha)
        assert abs(val - ref) <= 1e-10 * max(abs(ref), 1.0)


def test_windowed_gcv_terms_bounds():
    _, _, _, sys, _ = _problem(12, 9, "identity", seed=89)
    win = cosine_windows(make_partitions(sys, 3, spacing="log"), sys, spacing="log")
    terms = windowed_gcv_terms(sys, win, [0.3, 0.9, 2.7])
    assert terms.mu.shape == (3,) and terms.nu.shape == (3,)
    assert np.all(terms.mu > 0.0) and np.all(terms.mu <= 1.0)
    assert np.all(terms.nu >= terms.mu) and np.all(terms.nu <= 1.0)
    single = windowed_gcv_terms(sys, trivial_window(sys), [0.5])
    assert single.mu[0] == pytest.approx(single.nu[0], abs=1e-15)


def _normalized(delta, lam):
    delta = np.asarray(delta, float)
    lam = np.asarray(lam, float)
    s = np.hypot(delta, lam)
    return delta / s, lam / s


PRESS_CASES = [
    # (delta, lam, m, window member lists, alphas)
    ([0.1, 0.5, 0.9, 1.3], [1.0, 0.8, 0.6, 0.4], 4, [[2, 3], [0, 1]], [0.3, 1.7]),
    ([0.1, 0.3, 0.7, 1.1, 1.6], [1.2, 1.0, 0.8, 0.5, 0.3], 8,
     [[3, 4], [0, 1, 2]], [0.5, 2.2]),
    # penalty-null tail: q* < n
    ([0.1, 0.4, 0.9, 1.0, 1.0], [1.1, 0.7, 0.5, 0.0, 0.0], 8,
     [[2, 3, 4], [0, 1]], [0.4, 1.9]),
    # forward-null head: ell > 0
    ([0.0, 0.0, 0.5, 0.9, 1.4], [1.0, 0.9, 0.8, 0.6, 0.3], 8,
     [[3, 4], [0, 1, 2]], [0.6, 1.4]),
    # both deficiencies, three windows
    ([0.0, 0.2, 0.6, 1.0, 1.0, 1.0], [1.0, 0.9, 0.7, 0.5, 0.0, 0.0], 8,
     [[3, 4, 5], [1, 2], [0]], [0.2, 0.9, 3.0]),
]


@pytest.mark.parametrize("case", range(len(PRESS_CASES)))
def test_gcv_windowed_true_equals_leave_one_out(case):
    delta, lam, m, members, alphas = PRESS_CASES[case]
    delta, lam = _normalized(delta, lam)
    sys = make_diag_system(delta, lam, m=m)
    rng = np.random.default_rng(100 + case)
    dhat = rng.standard_normal(m)
    win = windows_from_members(members, sys.n)
    val = gcv_windowed_true(sys, dhat, win, alphas)
    ref = press_windowed_gcv(sys.delta, sys.lam, win.weights, alphas, dhat)
    assert abs(val - ref) <= 1e-12 * max(abs(ref), 1.0)


def test_gcv_windowed_true_equals_leave_one_out_overlapping():
    delta, lam = _normalized([0.2, 0.5, 0.8, 1.1, 1.5], [1.2, 1.0, 0.7, 0.5, 0.2])
    sys = make_diag_system(delta, lam, m=8)
    rng = np.random.default_rng(131)
    dhat = rng.standard_normal(8)
    w = np.array([[0.0, 0.25, 0.5, 0.75, 1.0], [1.0, 0.75, 0.5, 0.25, 0.0]])
    win = windows_from_weights(w)
    val = gcv_windowed_true(sys, dhat, win, [0.7, 2.5])
    ref = press_windowed_gcv(sys.delta, sys.lam, w, [0.7, 2.5], dhat)
    assert abs(val - ref) <= 1e-12 * max(abs(ref), 1.0)


def test_gcv_windowed_true_collapses_to_scalar():
    for seed, (m, n, penalty) in enumerate([(8, 6, "identity"), (10, 7, "laplacian"),
                                            (9, 9, "random")]):
        _, _, _, sys, dhat = _problem(m, n, penalty, seed=140 + seed)
        win = trivial_window(sys)
        for alpha in ALPHA_GRID:
            ref = gcv_scalar(sys, dhat, alpha)
            val = gcv_windowed_true(sys, dhat, win, [alpha])
            assert abs(val - ref) <= 1e-12 * max(abs(ref), 1.0)


def test_gcv_windowed_true_single_index_toy():
    # one spectral value gamma = 1 at alpha = 1: the leave-one-out coefficient
    # collapses to 1 and the value is exactly the squared data coefficient
    delta, lam = _normalized([1.0], [1.0])
    sys = make_diag_system(delta, lam)
    win = windows_from_members([[0]], 1)
    for c in [0.3, -1.7]:
        val = gcv_windowed_true(sys, np.array([c]), win, [1.0])
        assert val == pytest.approx(c * c, rel=1e-15)


def test_gcv_windowed_true_large_alpha_limit():
    _, _, d, sys, dhat = _problem(10, 10, "identity", seed=149)
    win = indicator_windows(make_partitions(sys, 2, spacing="log"), sys,
                            spacing="log")
    val = gcv_windowed_true(sys, dhat, win, [1e8, 1e8])
    lim = float(d @ d) / sys.m
    assert abs(val - lim) <= 1e-6 * lim


def test_gcv_windowed_true_saturates_on_vanishing_mu():
    delta, lam = _normalized([0.5, 0.9, 1.2], [1.0, 0.7, 0.3])
    sys = make_diag_system(delta, lam)
    win = windows_from_members([[1, 2], [0]], 3)
    with pytest.raises(SaturatedTraceError, match="saturated window trace"):
        gcv_windowed_true(sys, np.ones(3), win, [1e-12, 1e-12])


def test_gcv_windowed_true_md_averages_per_set_values():
    systems, _, dhats, _ = _md_problems(seed=151)
    wins = [indicator_windows(make_partitions(s, 2, spacing="log"), s,
                              spacing="log") for s in systems]
    alphas = [0.4, 1.2]
    vals = [gcv_windowed_true(s, dh, w, alphas)
            for s, dh, w in zip(systems, dhats, wins)]
    md = gcv_windowed_true_md(systems, dhats, wins, alphas)
    assert md == pytest.approx(np.mean(vals), rel=1e-15)


def test_gcv_windowed_decoupled_reduction_and_masked_residual():
    systems, _, dhats, _ = _md_problems(seed=157)
    # P = 1 is exactly the pooled scalar GCV
    trivials = [trivial_window(s) for s in systems]
    for alpha in [0.07, 0.9]:
        assert gcv_windowed_decoupled(systems, dhats, trivials, 0, alpha) \
            == gcv_md_scalar(systems, dhats, alpha)
    # window-masked numerator assembled by hand from the filter factors
    wins = [indicator_windows(make_partitions(s, 2, spacing="log"), s,
                              spacing="log") for s in systems]
    M = sum(s.m for s in systems)
    for p, alpha in [(0, 0.5), (1, 0.12)]:
        num = 0.0
        tr = 0.0
        for s, dh, w in zip(systems, dhats, wins):
            ff = filter_factors(s, alpha)
            idx = w.member_indices(p)
            num += float(np.sum((ff.psi[idx] * dh[idx]) ** 2))
            tr += float(np.sum(ff.phi[idx]))
            if p == w.P - 1:
                num += float(np.sum(dh[s.n:] ** 2))
        ref = (num / M) / (1.0 - tr / M) ** 2
        val = gcv_windowed_decoupled(systems, dhats, wins, p, alpha)
        assert val == pytest.approx(ref, rel=1e-14)


def test_gcv_windowed_decoupled_rejects_overlap():
    _, _, _, sys, dhat = _problem(10, 8, "identity", seed=163)
    cos = cosine_windows(make_partitions(sys, 2, spacing="log"), sys, spacing="log")
    with pytest.raises(ValueError, match="non-overlapping"):
        gcv_windowed_decoupled([sys], [dhat], cos, 0, 0.5)


# ---------------------------------------------------------------------------
# learning objective and the variance fallback
# ---------------------------------------------------------------------------

def test_mse_learning_zero_at_truth_and_plain_error():
    rng = np.random.default_rng(167)
    A, L = tik_matrices(rng, 9, 7, "identity")
    sys = gsvd(A, L)
    d = rng.standard_normal(9)
    win = trivial_window(sys)
    sol = solve_windowed(sys, d, win, [0.3])
    assert mse_learning([sys], [d], [sol.x], win, [0.3]) <= 1e-28
    truth = rng.standard_normal(7)
    val = mse_learning([sys], [d], [truth], win, [0.3])
    assert val == pytest.approx(float(np.sum((sol.x - truth) ** 2)), rel=1e-12)


def test_mse_learning_averages_and_validates():
    systems, data, dhats, _ = _md_problems(seed=173)
    wins = [trivial_window(s) for s in systems]
    rng = np.random.default_rng(0)
    truths = [rng.standard_normal(s.n) for s in systems]
    per_set = [mse_learning([s], [d], [t], w, [0.4])
               for s, d, t, w in zip(systems, data, truths, wins)]
    both = mse_learning(systems, data, truths, wins, [0.4])
    assert both == pytest.approx(np.mean(per_set), rel=1e-14)
    # precomputed spectral data takes the same path
    fast = mse_learning(systems, data, truths, wins, [0.4], dhats=dhats)
    assert fast == both
    with pytest.raises(ValueError, match="missing truths"):
        mse_learning(systems, data, None, wins, [0.4])
    with pytest.raises(ValueError):
        mse_learning(systems, data, truths[:1], wins, [0.4])


def test_estimate_sigma2_from_spectral_tail():
    rng = np.random.default_rng(179)
    m, n = 200, 50
    delta = np.sort(rng.uniform(0.3, 0.9, n))
    lam = np.sqrt(1.0 - delta ** 2)
    sys = make_diag_system(delta, np.sort(lam)[::-1], m=m)
    sigma = 0.25
    dhat = np.zeros(m)
    dhat[:n] = rng.standard_normal(n) * 3.0      # signal-bearing head
    dhat += rng.standard_normal(m) * sigma       # white noise everywhere
    est = estimate_sigma2(sys, dhat)
    assert 0.7 * sigma ** 2 <= est <= 1.3 * sigma ** 2


def test_estimate_sigma2_square_system_uses_smallest_gamma_band():
    rng = np.random.default_rng(181)
    n = 64
    g = np.geomspace(1e-3, 10.0, n)
    delta = g / np.hypot(g, 1.0)
    lam = 1.0 / np.hypot(g, 1.0)
    sys = make_diag_system(delta, lam)
    sigma = 0.1
    dhat = rng.standard_normal(n) * sigma
    dhat[n // 2:] += rng.standard_normal(n - n // 2) * 2.0  # signal on large gamma
    est = estimate_sigma2(sys, dhat)
    assert 0.3 * sigma ** 2 <= est <= 2.5 * sigma ** 2


# ---------------------------------------------------------------------------
# noise-covariance structure behind the whitening assumption
# ---------------------------------------------------------------------------

def test_residual_second_moment_tracks_covariance_trace():
    # E||(I - M) d||^2 = ||(I - M) b||^2 + trace((I - M) Sigma (I - M)^T)
    # for d = b + e with e ~ N(0, Sigma); Monte-Carlo on a small dense system
    rng = np.random.default_rng(191)
    A, L = tik_matrices(rng, 10, 8, "identity")
    b = A @ rng.standard_normal(8)
    B = rng.standard_normal((10, 10)) * 0.1
    Sigma = B @ B.T + 0.05 * np.eye(10)
    Rm = np.eye(10) - dense_influence_scalar(A, L, 0.6)
    analytic = float(np.sum((Rm @ b) ** 2) + np.trace(Rm @ Sigma @ Rm.T))
    chol = np.linalg.cholesky(Sigma)
    N = 4000
    draws = b[:, None] + chol @ rng.standard_normal((10, N))
    samples = np.sum((Rm @ draws) ** 2, axis=0)
    se = samples.std(ddof=1) / np.sqrt(N)
    assert abs(samples.mean() - analytic) <= 3.0 * se
