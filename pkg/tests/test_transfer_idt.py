import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from colorgrade import stats
from colorgrade.exceptions import ContractError
from colorgrade.imagecore import ImagePlanar
from colorgrade.transfer_idt import (idt, idt_pixels, pdf_transfer_1d, random_rotation,
                                     transfer_along_axis)


def axes_rotation(seed, index, dim=3):
    return np.eye(dim)


class TestPdfTransfer:
    def test_identity(self, rng):
        x = rng.random(5000)
        lut = pdf_transfer_1d(x, x)
        inside = (lut.knots > x.min()) & (lut.knots < x.max())
        assert np.max(np.abs(lut(lut.knots[inside]) - lut.knots[inside])) < lut.step

    def test_shifted_uniform(self, rng):
        lut = pdf_transfer_1d(rng.random(20000), 2 + rng.random(20000))
        u = np.linspace(0.01, 0.99, 99)
        assert np.max(np.abs(lut(u) - (u + 2))) < 2 * lut.step

    def test_gaussian_quantile_map(self):
        rng = np.random.default_rng(0)
        lut = pdf_transfer_1d(rng.normal(0, 1, 100_000), rng.normal(5, 2, 100_000))
        u = np.linspace(-2, 2, 401)
        assert np.max(np.abs(lut(u) - (2 * u + 5))) < 0.1

    def test_has_300_knots(self, rng):
        assert pdf_transfer_1d(rng.random(10), rng.random(10)).knots.size == 300

    def test_empty(self):
        with pytest.raises(ContractError):
            pdf_transfer_1d([], [1.0])

    def test_constant_target(self, rng):
        lut = pdf_transfer_1d(rng.random(100), np.full(50, 0.4))
        assert np.allclose(lut(rng.random(10)), 0.4, atol=lut.step)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 80), elements=st.floats(-5, 5)),
       arrays(np.float64, st.integers(1, 80), elements=st.floats(-5, 5)))
def test_lookup_monotone(a, b):
    assert np.all(np.diff(pdf_transfer_1d(a, b).values) >= 0)


class TestRotation:
    def test_deterministic(self):
        assert np.array_equal(random_rotation(42, 3), random_rotation(42, 3))

    def test_orthogonal(self):
        for i in range(20):
            R = random_rotation(7, i)
            assert np.max(np.abs(R @ R.T - np.eye(3))) < 1e-12
            assert abs(abs(np.linalg.det(R)) - 1) < 1e-12

    def test_distinct_indices(self):
        mats = [random_rotation(42, i) for i in range(10)]
        for i in range(10):
            for j in range(i + 1, 10):
                assert np.linalg.norm(mats[i] - mats[j]) > 1e-3


class TestIdt:
    def test_same_target_near_identity(self, rng):
        img = ImagePlanar(rng.random((40, 40, 3)))
        out, _ = idt(img, img, iterations=3, seed=1)
        # each 1-D step moves a point by less than two knot spacings of a ~sqrt(3)-wide range
        assert np.max(np.abs(out.data - img.data)) < 3 * 2 * np.sqrt(3) / 299

    def test_embedded_one_dimensional(self, rng):
        src = np.zeros((5000, 3))
        src[:, 0] = rng.random(5000) ** 2
        tgt = np.zeros((4000, 3))
        tgt[:, 0] = rng.normal(0.5, 0.1, 4000)
        out, _ = idt_pixels(src, tgt, iterations=1, rotation=axes_rotation, trace=False)
        expect = pdf_transfer_1d(src[:, 0], tgt[:, 0])(src[:, 0])
        assert np.allclose(out[:, 0], expect, atol=1e-12)
        assert np.max(np.abs(out[:, 1:])) < 1e-5  # constant axes move by under one knot step

    def test_marginal_matching_one_axis(self, rng):
        x = rng.normal(0, 1, (10_000, 3)) * [1, 0.3, 0.5]
        y = rng.standard_normal((10_000, 3)) @ np.array([[1, .5, 0], [0, 1, 0], [.2, 0, .4]]) + 2
        e = random_rotation(3, 0)[1]
        moved = transfer_along_axis(x, y, e)
        px, py = moved @ e, y @ e
        lo, hi = min(px.min(), py.min()), max(px.max(), py.max())
        h = stats.silverman_bandwidth(py)
        p = stats.kde_epanechnikov(py, h, 256, lo - h, hi + h)
        q = stats.kde_epanechnikov(px, h, 256, lo - h, hi + h)
        assert stats.kl_divergence(p, q) < 0.02

    def test_deterministic(self, rng):
        a = ImagePlanar(rng.random((20, 20, 3)))
        b = ImagePlanar(rng.random((20, 20, 3)) ** 2)
        o1, t1 = idt(a, b, 4, seed=9)
        o2, t2 = idt(a, b, 4, seed=9)
        assert np.array_equal(o1.data, o2.data) and t1.kl == t2.kl

    def test_single_color_target(self, rng):
        src = ImagePlanar(rng.random((20, 20, 3)))
        tgt = ImagePlanar(np.full((5, 5, 3), [0.2, 0.5, 0.7]))
        out, _ = idt(src, tgt, 5, seed=0)
        assert np.max(np.abs(out.pixels() - [0.2, 0.5, 0.7])) < 0.05

    def test_trace(self, rng, tmp_path):
        a = ImagePlanar(rng.random((16, 16, 3)))
        b = ImagePlanar(rng.random((16, 16, 3)) * 0.3)
        _, trace = idt(a, b, 6, seed=2)
        assert len(trace.kl) == 7 and trace.iterations == 6 and trace.seed == 2
        assert trace.kl[-1] < trace.kl[0]
        trace.write_csv(tmp_path / "t.csv")
        rows = (tmp_path / "t.csv").read_text().splitlines()
        assert rows[0] == "iteration,kl" and len(rows) == 8 and rows[1].startswith("0,")

    def test_output_unclamped(self, rng):
        a = ImagePlanar(rng.random((10, 10, 3)) * 0.1)
        b = ImagePlanar(rng.random((10, 10, 3)))
        out, _ = idt(a, b, 2, trace=False)
        assert out.space.value == "RGB"

    def test_iterations_positive(self, rng):
        img = ImagePlanar(rng.random((4, 4, 3)))
        with pytest.raises(ContractError):
            idt(img, img, 0)
