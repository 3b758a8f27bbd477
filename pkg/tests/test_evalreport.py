import json
import warnings

import numpy as np
import pytest

from colorgrade import stats
from colorgrade.evalreport import (METHOD_IDS, REGISTRY, MethodOutput, MethodRegistry, SuiteConfig,
                                   export_artifacts, export_report, run_suite, score)
from colorgrade.exceptions import ContractError
from colorgrade.imagecore import ImagePlanar, load_image, quantize

from conftest import palette_image


@pytest.fixture(scope="module")
def pair():
    r = np.random.default_rng(3)
    return palette_image(r, 32, 32), palette_image(r, 32, 32)


def test_registry_contents():
    assert METHOD_IDS == ("reinhard", "idt", "idt_regrain", "mkl", "luminance", "histmatch",
                          "cholesky", "pca")
    with pytest.raises(ContractError):
        REGISTRY.get("nosuch")
    reg = MethodRegistry()
    reg.register("a", lambda s, t, c: MethodOutput(s))
    with pytest.raises(ContractError):
        reg.register("a", lambda s, t, c: MethodOutput(s))


def test_histmatch_identity(pair):
    src = quantize(pair[0])  # byte-exact, as loaded from a PNG
    res = run_suite(src, src, src, ["histmatch"])
    assert all(v < 1e-6 for v in res.reports[0].kl.values())


def test_kl_matches_saved_image(pair, tmp_path):
    src, tgt = pair
    res = run_suite(src, tgt, tgt, ["reinhard", "mkl", "histmatch"], output_dir=tmp_path)
    for rep in res.reports:
        saved = load_image(rep.output)
        for c, ch in enumerate("rgb"):
            p = stats.channel_density(tgt.plane(c))
            q = stats.channel_density(saved.plane(c))
            assert rep.kl[ch] == stats.kl_divergence(p, q)


def test_all_methods_finite(pair):
    res = run_suite(*pair, pair[1])
    assert [r.method for r in res.reports] == list(METHOD_IDS)
    for r in res.reports:
        assert not r.failed, r.flags
        assert all(np.isfinite(v) for v in r.kl.values())


def test_failure_isolated(pair):
    flat = ImagePlanar(np.full((16, 16, 3), 0.5))
    tgt = pair[1]
    both = run_suite(flat, tgt, tgt, ["mkl", "histmatch"])
    alone = run_suite(flat, tgt, tgt, ["histmatch"])
    mkl, hm = both.reports
    assert mkl.failed and mkl.output is None
    assert any(f.startswith("error: ") for f in mkl.flags)
    assert hm.kl == alone.reports[0].kl and hm.flags == alone.reports[0].flags


def test_warnings_become_flags(pair):
    flat = ImagePlanar(np.full((16, 16, 3), 0.5))
    rep = run_suite(flat, pair[1], pair[1], ["reinhard"]).reports[0]
    assert any(f.startswith("degenerate_input: ") for f in rep.flags)


def test_density_floor_flag(pair):
    dark = ImagePlanar(np.full((16, 16, 3), 0.05) + np.linspace(0, 0.01, 16)[:, None, None])
    bright = ImagePlanar(np.full((16, 16, 3), 0.9) + np.linspace(0, 0.01, 16)[:, None, None])
    rep = run_suite(dark, dark, bright, ["histmatch"]).reports[0]
    assert {"density_floor: r", "density_floor: g", "density_floor: b"} <= set(rep.flags)
    assert all(np.isfinite(v) for v in rep.kl.values())
    ok = run_suite(*pair, pair[1], ["histmatch"]).reports[0]
    assert not any(f.startswith("density_floor") for f in ok.flags)


def test_empty_methods_rejected(pair):
    with pytest.raises(ContractError):
        run_suite(*pair, pair[1], [])


def test_empty_report(tmp_path):
    doc = export_report([], tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text()) == doc
    assert doc["methods"] == []


def test_report_round_trip(pair, tmp_path):
    res = run_suite(*pair, pair[1], ["reinhard", "idt"], SuiteConfig(timing=False))
    export_report(res.reports, tmp_path / "r.json", "a.png", "b.png", "b.png", seed=42)
    doc = json.loads((tmp_path / "r.json").read_text())
    assert list(doc) == ["source", "target", "reference", "seed", "methods"]
    assert list(doc["methods"][0]) == ["id", "kl", "flags", "wall_time_s", "output"]
    for rep, entry in zip(res.reports, doc["methods"]):
        for ch in "rgb":
            assert float(f"{entry['kl'][ch]:.12g}") == float(f"{rep.kl[ch]:.12g}")
            assert entry["kl"][ch] == rep.kl[ch]


def test_symmetric_option(pair, tmp_path):
    res = run_suite(*pair, pair[1], ["histmatch"])
    doc = export_report(res.reports, tmp_path / "r.json", symmetric=True)
    entry = doc["methods"][0]
    _, rev, _ = score(res.reference_densities, res.reports[0].image)
    assert entry["kl_reverse"] == rev


def test_artifacts(pair, tmp_path):
    res = run_suite(*pair, pair[1], ["idt", "mkl"])
    names = {p.name for p in export_artifacts(res, tmp_path)}
    assert {"reference_hist.csv", "reference_density.csv", "idt_hist.csv", "idt_density.csv",
            "idt_trace.csv", "mkl_hist.csv", "mkl_density.csv"} == names
    back = stats.read_density_csv(tmp_path / "mkl_density.csv")
    assert np.allclose(back[0].density, res.reports[1].densities[0].density)


def test_deterministic(pair, tmp_path):
    cfg = SuiteConfig(timing=False)
    a = run_suite(*pair, pair[1], config=cfg, output_dir=tmp_path / "a")
    b = run_suite(*pair, pair[1], config=cfg, output_dir=tmp_path / "b")
    for x, y in zip(a.reports, b.reports):
        assert x.kl == y.kl and x.flags == y.flags
        assert (tmp_path / "a" / f"{x.method}.png").read_bytes() == \
               (tmp_path / "b" / f"{y.method}.png").read_bytes()


def test_sharpen_changes_scores(pair):
    plain = run_suite(*pair, pair[1], ["reinhard"]).reports[0]
    sharp = run_suite(*pair, pair[1], ["reinhard"], SuiteConfig(sharpen=True)).reports[0]
    assert plain.kl != sharp.kl


@pytest.mark.parametrize("seed", range(5))
def test_histmatch_ranks_above_linear(seed):
    r = np.random.default_rng(seed)
    src, tgt = palette_image(r), palette_image(r)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_suite(src, tgt, tgt, ["histmatch", "cholesky", "pca"])
    hm, ch, pca = (rep.kl for rep in res.reports)
    wins = sum(hm[c] <= min(ch[c], pca[c]) for c in "rgb")
    assert wins >= 2
