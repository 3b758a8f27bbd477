"""One test per acceptance criterion, each printing a PASS/FAIL line."""

import time
import warnings

import numpy as np
import pytest

from colorgrade import stats
from colorgrade.cli import main
from colorgrade.evalreport import run_suite
from colorgrade.imagecore import ColorSpace, ImagePlanar, convert, rgb_to_lalphabeta
from colorgrade.nst_loss import (content_gradient, content_loss, gram, style_layer_gradient,
                                 style_layer_loss, total_variation_loss, tv_gradient)
from colorgrade.regrain import SolverConfig, regrain, solve_channel
from colorgrade.transfer_hist import (cdf_distance, equalize, equalize_channel, luminance_transfer,
                                      match_histogram)
from colorgrade.transfer_idt import idt_pixels, pdf_transfer_1d
from colorgrade.transfer_linear import ChannelStats, matched_affine, reinhard_transfer

from conftest import dense_regrain, palette_image, record


def random_spd(rng):
    M = rng.standard_normal((3, 3))
    return M @ M.T + 0.05 * np.eye(3)


def test_c1_moment_matching():
    r = np.random.default_rng(1)
    src = ImagePlanar(r.uniform(0.05, 0.7, (256, 256, 3)))
    tgt = ImagePlanar(r.beta(2, 2, (256, 256, 3)) * [0.9, 0.6, 0.8] + 0.05)
    t0 = time.perf_counter()
    out = rgb_to_lalphabeta(reinhard_transfer(src, tgt)).pixels()
    lum = luminance_transfer(src, tgt, "Lab")
    elapsed = time.perf_counter() - t0
    t = rgb_to_lalphabeta(tgt).pixels()
    err_r = max(np.abs(out.mean(0) - t.mean(0)).max(), np.abs(out.std(0) - t.std(0)).max())
    lo, lc = convert(lum, ColorSpace.LAB).plane(0), convert(tgt, ColorSpace.LAB).plane(0)
    err_l = max(abs(lo.mean() - lc.mean()), abs(lo.std() - lc.std()))
    ok = err_r < 1e-6 and err_l < 1e-6 and elapsed < 1.0
    assert record(1, ok, f"reinhard moment err {err_r:.1e}, luminance err {err_l:.1e}, "
                         f"{elapsed:.2f}s")


def test_c2_covariance_constraint():
    r = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst, worst_sym, worst_id, min_eig = 0.0, 0.0, 0.0, np.inf
    for _ in range(1000):
        cs, ct = random_spd(r), random_spd(r)
        s, t = ChannelStats(np.zeros(3), cs, 1), ChannelStats(np.zeros(3), ct, 1)
        for m in ("cholesky", "sqrt", "mkl"):
            A = matched_affine(s, t, m).A
            worst = max(worst, np.linalg.norm(A @ cs @ A.T - ct) / np.linalg.norm(ct))
            if m == "mkl":
                worst_sym = max(worst_sym, np.abs(A - A.T).max())
                min_eig = min(min_eig, np.linalg.eigvalsh(A).min())
        A_id = matched_affine(s, s, "mkl").A
        worst_id = max(worst_id, np.abs(A_id - np.eye(3)).max())
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and worst_sym == 0 and min_eig > 0 and worst_id < 1e-10 and elapsed < 5
    assert record(2, ok, f"max rel residual {worst:.1e}, mkl min eig {min_eig:.1e}, "
                         f"identity err {worst_id:.1e}, {elapsed:.2f}s")


def idt_pair(trial, n=10_000):
    """Even trials: two clusters vs an anisotropic Gaussian; odd: anisotropic Gaussian vs a mixture."""
    r = np.random.default_rng(trial)
    x, y = np.zeros((n, 3)), np.zeros((n, 3))
    if trial % 2 == 0:
        c = r.integers(0, 2, n)[:, None]
        x[:, :2] = np.where(c == 0, [0.2, 0.3], [0.7, 0.6]) + 0.01 * r.standard_normal((n, 2))
        L = np.array([[0.15, 0.0], [0.08, 0.03]])
        y[:, :2] = [0.5, 0.5] + r.standard_normal((n, 2)) @ L.T
    else:
        A = 0.08 * r.standard_normal((3, 3))
        x = [0.3, 0.4, 0.5] + r.standard_normal((n, 3)) @ A.T
        c = r.integers(0, 2, n)[:, None]
        y = np.where(c == 0, [0.3, 0.6, 0.4], [0.7, 0.3, 0.6]) + 0.05 * r.standard_normal((n, 3))
    return x, y


def test_c3_idt_convergence():
    t0 = time.perf_counter()
    failures = []
    for trial in range(10):
        x, y = idt_pair(trial)
        _, trace = idt_pixels(x, y, iterations=20, seed=42)
        kl = np.array(trace.kl)
        avg = np.convolve(kl, np.ones(5) / 5, mode="valid")
        if not (kl[-1] < min(0.05, kl[0] / 10) and np.all(np.diff(avg) <= 0)):
            failures.append(trial)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 30
    assert record(3, ok, f"{10 - len(failures)}/10 pairs converged, {elapsed:.1f}s")


def test_c4_pdf_transfer_oracle():
    r = np.random.default_rng(4)
    lut = pdf_transfer_1d(r.standard_normal(100_000), 5 + 2 * r.standard_normal(100_000))
    u = np.linspace(-2, 2, 401)
    err = np.abs(lut(u) - (2 * u + 5)).max()
    assert record(4, err < 0.1, f"max deviation from 2u+5 on [-2, 2]: {err:.3f}")


def test_c5_regrain_oracle():
    r = np.random.default_rng(5)
    t0 = time.perf_counter()
    cfg = SolverConfig(max_sweeps=20000, tolerance=1e-13)
    worst = 0.0
    for _ in range(25):
        I, T = r.random((4, 4)), r.random((4, 4))
        phi, psi = r.uniform(0.1, 30), r.uniform(0.01, 5)
        A, b = dense_regrain(I, T, phi, psi)
        J, _, _, _ = solve_channel(I, T, np.full((4, 4), phi), np.full((4, 4), psi), cfg)
        worst = max(worst, np.abs(J.ravel() - np.linalg.solve(A, b)).max())
    I, T = ImagePlanar(r.random((4, 4, 3))), ImagePlanar(r.random((4, 4, 3)))
    J, _ = regrain(I, T, cfg, weight_override=(1.0, 1e6))
    psi_err = np.abs(J.data - T.data).max()
    J, _ = regrain(I, T, SolverConfig(tolerance=1e-12, levels=2), weight_override=(1e6, 1.0))
    phi_err = max(np.abs(np.diff(J.data, axis=a) - np.diff(I.data, axis=a)).max() for a in (0, 1))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and psi_err < 1e-3 and phi_err < 1e-3 and elapsed < 5
    assert record(5, ok, f"dense err {worst:.1e}, psi limit {psi_err:.1e}, "
                         f"phi limit {phi_err:.1e}, {elapsed:.2f}s")


def test_c6_histogram_machinery():
    two = np.zeros(100)
    two[75:] = 0.5
    _, emap = equalize_channel(two)
    exact = emap.table[0] == 0 and emap.table[128] == 255
    r = np.random.default_rng(6)
    bound_ok, idem = True, 0.0
    for _ in range(10):
        src, ref = palette_image(r, 48, 48), ImagePlanar(r.beta(2, 3, (40, 40, 3)))
        out = match_histogram(src, ref)
        for c in range(3):
            largest = stats.histogram(src.plane(c)).counts.max() / src.plane(c).size
            bound_ok &= cdf_distance(out.plane(c), ref.plane(c)) <= 2 / 256 + largest
        e1 = equalize(src)
        idem = max(idem, np.abs(np.round(e1.data * 255) - np.round(equalize(e1).data * 255)).max())
    ok = exact and bound_ok and idem <= 1
    assert record(6, ok, f"two-level example {'exact' if exact else 'wrong'}, CDF bound "
                         f"{'held' if bound_ok else 'violated'}, idempotence {idem:.0f} level(s)")


def test_c7_kl_machinery():
    def kl_closed(m1, s1, m2, s2):
        return np.log(s2 / s1) + (s1 ** 2 + (m1 - m2) ** 2) / (2 * s2 ** 2) - 0.5

    grid = stats.make_grid()
    r = np.random.default_rng(7)
    worst = 0.0
    for m1, s1, m2, s2 in ((0.4, 0.05, 0.6, 0.05), (0.4, 0.05, 0.55, 0.1), (0.5, 0.1, 0.45, 0.08)):
        pdf = lambda m, s: np.exp(-0.5 * ((grid - m) / s) ** 2) / (s * np.sqrt(2 * np.pi))
        exact = kl_closed(m1, s1, m2, s2)
        disc = stats.kl_divergence(stats.density_from_values(grid, pdf(m1, s1)),
                                   stats.density_from_values(grid, pdf(m2, s2)))
        worst = max(worst, abs(disc - exact) / exact)
    p = stats.channel_density(r.random(5000))
    self_kl = stats.kl_divergence(p, p)
    spike = stats.channel_density(np.zeros(100))
    far = stats.channel_density(np.ones(100))
    finite = np.isfinite(stats.kl_divergence(spike, far)) and np.isfinite(stats.kl_divergence(far, spike))
    ok = worst < 0.05 and self_kl < 1e-12 and finite
    assert record(7, ok, f"worst rel err vs closed form {worst:.3f}, D(p,p) {self_kl:.1e}, "
                         f"disjoint KL {'finite' if finite else 'infinite'}")


def test_c8_method_ranking():
    t0 = time.perf_counter()
    wins = 0
    for seed in range(5):
        r = np.random.default_rng(seed)
        src, tgt = palette_image(r), palette_image(r)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run_suite(src, tgt, tgt, ["histmatch", "cholesky", "pca"])
        hm, ch, pca = (rep.kl for rep in res.reports)
        wins += sum(hm[c] <= ch[c] and hm[c] <= pca[c] for c in "rgb")
    elapsed = time.perf_counter() - t0
    ok = wins >= 14 and elapsed < 60
    assert record(8, ok, f"histmatch best in {wins}/15 channel comparisons, {elapsed:.1f}s")


def central_diff(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def test_c9_nst_loss_algebra():
    r = np.random.default_rng(9)
    worst = 0.0
    props = True
    for _ in range(100):
        F, P = r.standard_normal((3, 4)), r.standard_normal((3, 4))
        A = gram(r.standard_normal((3, 4)))
        img = r.random((4, 5))
        for analytic, numeric in (
            (content_gradient(F, P), central_diff(lambda x: content_loss(x, P), F)),
            (style_layer_gradient(F, A), central_diff(lambda x: style_layer_loss(gram(x), A, 3, 4), F)),
            (tv_gradient(img, 0.5, 2), central_diff(lambda x: total_variation_loss(x, 0.5, 2), img)),
        ):
            worst = max(worst, np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-8))
        props &= content_loss(F, F) == 0 and content_loss(F, P) > 0
        props &= style_layer_loss(gram(F), gram(F), 3, 4) == 0 and style_layer_loss(gram(F), A, 3, 4) > 0
        props &= total_variation_loss(np.full((3, 3), r.random()), 1, 2) == 0
        props &= total_variation_loss(img, 1, 1) > 0
    exact = np.array_equal(gram(np.array([[1.0, 2.0], [3.0, 4.0]])), [[5, 11], [11, 25]])
    ok = worst < 1e-5 and props and exact
    assert record(9, ok, f"max gradient rel err {worst:.1e}, properties "
                         f"{'hold' if props else 'violated'}, Gram example {'exact' if exact else 'wrong'}")


def test_c10_determinism(png_pair, tmp_path):
    a, b = png_pair
    for run in ("1", "2"):
        assert main(["transfer", str(a), str(b), "--method", "idt", "--seed", "7",
                     "-o", str(tmp_path / f"idt{run}.png")]) == 0
        assert main(["evaluate", str(a), str(b), "--report", str(tmp_path / f"r{run}" / "r.json"),
                     "--out-dir", str(tmp_path / "out"), "--no-timing"]) == 0
        (tmp_path / "out").rename(tmp_path / f"out{run}")
    same_idt = (tmp_path / "idt1.png").read_bytes() == (tmp_path / "idt2.png").read_bytes()
    same_report = (tmp_path / "r1" / "r.json").read_bytes() == (tmp_path / "r2" / "r.json").read_bytes()
    files = sorted(p.name for p in (tmp_path / "out1").iterdir())
    same_files = all((tmp_path / "out1" / f).read_bytes() == (tmp_path / "out2" / f).read_bytes()
                     for f in files)
    ok = same_idt and same_report and same_files and len(files) > 8
    assert record(10, ok, f"idt PNG {'identical' if same_idt else 'differs'}, report "
                          f"{'identical' if same_report else 'differs'}, {len(files)} suite "
                          f"artifacts {'identical' if same_files else 'differ'}")
