import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from psi_lab.synthesis import (
    FringeImage,
    PixelGrid,
    Truth,
    allocate_atoms,
    cloud_profile,
    expected_counts,
    integrate_y,
    read_image,
    sample_image,
    sidecar_path,
    synthesize,
    write_image,
)
from oracles import gaussian_pixel_mass


class TestGrid:
    def test_centred(self):
        g = PixelGrid(4, 3, 2.0)
        np.testing.assert_allclose(g.x, [-3, -1, 1, 3])
        np.testing.assert_allclose(g.y, [-2, 0, 2])

    def test_origin(self):
        g = PixelGrid(3, 1, 1.0, origin=(10.0, -1.0))
        np.testing.assert_allclose(g.x, [9, 10, 11])
        assert g.y[0] == -1.0

    @pytest.mark.parametrize("args", [(0, 4, 1.0), (4, 0, 1.0), (4, 4, 0.0)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            PixelGrid(*args)

    def test_dict_round_trip(self):
        g = PixelGrid(8, 2, 3e-5, (1e-4, 0.0))
        assert PixelGrid.from_dict(json.loads(json.dumps(g.to_dict()))) == g


class TestCloudProfile:
    def test_matches_quadrature(self):
        g = PixelGrid(24, 10, 0.5)
        sigma = 2.3
        f = cloud_profile(1000.0, sigma, g)
        mx = np.array([gaussian_pixel_mass(x - 0.25, x + 0.25, sigma) for x in g.x])
        my = np.array([gaussian_pixel_mass(y - 0.25, y + 0.25, sigma) for y in g.y])
        want = 1000.0 * np.outer(mx / mx.sum(), my / my.sum())
        np.testing.assert_allclose(f, want, rtol=1e-9, atol=1e-12)

    @given(st.floats(1.0, 1e7), st.floats(0.5, 40.0), st.integers(4, 64), st.integers(1, 16))
    def test_sums_to_n(self, N, sigma, nx, ny):
        f = cloud_profile(N, sigma, PixelGrid(nx, ny, 1.0))
        assert f.sum() == pytest.approx(N, rel=1e-12)
        assert np.all(f >= 0)

    def test_symmetric(self):
        f = cloud_profile(1e4, 5.0, PixelGrid(32, 8, 1.0))
        np.testing.assert_allclose(f, f[::-1, ::-1], rtol=1e-12)

    def test_under_resolved_warns(self):
        with pytest.warns(UserWarning, match="under-resolved"):
            cloud_profile(100.0, 0.01, PixelGrid(8, 8, 1.0))

    def test_rejects_zero_atoms(self):
        with pytest.raises(ValueError):
            cloud_profile(0.0, 1.0, PixelGrid(8, 8, 1.0))


class TestAllocation:
    @given(hnp.arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 8)), elements=st.floats(0, 500)))
    def test_properties(self, f):
        a = allocate_atoms(f)
        assert a.dtype == np.int64 and a.shape == f.shape
        assert np.all(a >= 0)
        assert a.sum() == round(f.sum())
        assert np.all(np.abs(a.sum(axis=1) - f.sum(axis=1)) < 1.0 + 1e-9)
        np.testing.assert_array_equal(a, allocate_atoms(f))

    def test_integers_unchanged(self):
        f = np.array([[3.0, 0.0], [1.0, 7.0]])
        np.testing.assert_array_equal(allocate_atoms(f), f.astype(int))

    def test_one_dimensional(self):
        a = allocate_atoms(np.array([0.4, 0.4, 0.2, 1.0]))
        assert a.tolist() == [1, 1, 0, 1] or a.sum() == 2
        assert a.sum() == 2


class TestExpectedCounts:
    def test_bernoulli_moments(self):
        x = np.linspace(-1, 1, 11)
        f = np.full(11, 40.0)
        mean, var = expected_counts(f, x, 3.0, 0.2, 0.7)
        p = 0.5 * (1 + 0.7 * np.cos(3.0 * x + 0.2))
        np.testing.assert_allclose(mean, p * f)
        np.testing.assert_allclose(var, p * (1 - p) * f)

    def test_rejects_contrast(self):
        with pytest.raises(ValueError):
            expected_counts(np.ones(3), np.zeros(3), 1.0, 0.0, 1.2)


class TestSampling:
    def test_deterministic(self):
        g = PixelGrid(64, 8, 1.0)
        a = synthesize(g, 5000, 10.0, 0.5, 0.1, 0.6, seed=11)
        b = synthesize(g, 5000, 10.0, 0.5, 0.1, 0.6, seed=11)
        c = synthesize(g, 5000, 10.0, 0.5, 0.1, 0.6, seed=12)
        np.testing.assert_array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, c.counts)
        assert a.truth == Truth(0.5, 0.1, 0.6, 5000, 10.0)

    def test_counts_bounded_by_atoms(self):
        img = synthesize(PixelGrid(32, 4, 1.0), 2000, 6.0, 0.9, 0.0, 1.0, seed=3)
        assert np.all(img.counts <= img.atoms)
        assert img.atoms.sum() == 2000

    def test_moments_over_many_draws(self):
        g = PixelGrid(8, 2, 1.0)
        f = np.full((8, 2), 25.0)
        k, phi, c = 0.7, 0.3, 0.8
        draws = np.array([sample_image(g, f, k, phi, c, seed=s).counts for s in range(10_000)], dtype=float)
        atoms = allocate_atoms(f)
        p = (0.5 * (1 + c * np.cos(k * g.x + phi)))[:, None]
        mu, var = p * atoms, p * (1 - p) * atoms
        mean = draws.mean(axis=0)
        assert np.all(np.abs(mean - mu) <= 4 * np.sqrt(var / draws.shape[0]))
        np.testing.assert_allclose(draws.var(axis=0, ddof=1), var, rtol=0.10)

    def test_integrate_y(self):
        img = synthesize(PixelGrid(16, 5, 1.0), 800, 4.0, 1.0, 0.0, 0.5, seed=1)
        np.testing.assert_array_equal(integrate_y(img), img.counts.sum(axis=1))
        np.testing.assert_array_equal(img.atoms_1d, img.atoms.sum(axis=1))

    def test_image_shape_checked(self):
        with pytest.raises(ValueError, match="shape"):
            FringeImage(PixelGrid(4, 4, 1.0), np.zeros((4, 3)))


class TestIO:
    def test_round_trip(self, tmp_path):
        img = synthesize(PixelGrid(20, 6, 3e-5), 3000, 1.5e-4, 2e4, -0.4, 0.5, seed=5)
        path, side = write_image(img, tmp_path / "shot.csv", {"seed": 5})
        assert side == sidecar_path(path) and side.exists()
        back = read_image(path)
        np.testing.assert_array_equal(back.counts, img.counts)
        assert back.grid == img.grid and back.truth == img.truth
        assert back.meta["seed"] == 5
        # y rows outer, x along each line
        first = path.read_text().splitlines()[0].split(",")
        assert len(first) == 20

    def test_no_sidecar_uses_pixel_units(self, tmp_path):
        p = tmp_path / "raw.csv"
        p.write_text("1,2,3\n4,5,6\n")
        img = read_image(p)
        assert img.grid == PixelGrid(3, 2, 1.0)
        assert img.counts[:, 0].tolist() == [1, 2, 3]
        assert img.truth is None

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            read_image(p)
