import numpy as np
import pytest

from pefno.backends import voronoi_labels, voronoi_labels_numpy
from pefno.grid import GridSpec
from pefno.materials import (
    E_RANGE,
    NU_RANGE,
    MaterialError,
    MaterialField,
    lame_from_engineering,
    voronoi_microstructure,
)


class TestLame:
    def test_steel_like_values(self):
        lam, mu = lame_from_engineering(200.0, 0.3)
        assert lam == pytest.approx(115.3846, abs=5e-5)
        assert mu == pytest.approx(76.9231, abs=5e-5)

    def test_equal_moduli_case(self):
        lam, mu = lame_from_engineering(50.0, 0.25)
        assert lam == pytest.approx(20.0, rel=1e-14)
        assert mu == pytest.approx(20.0, rel=1e-14)

    def test_vanishing_poisson_limit(self):
        lam, mu = lame_from_engineering(120.0, 1e-12)
        assert abs(lam) < 1e-9
        assert mu == pytest.approx(60.0, rel=1e-10)

    @pytest.mark.parametrize("nu", [0.5, 0.6, 0.0, -0.1])
    def test_out_of_domain_poisson_rejected(self, nu):
        with pytest.raises(MaterialError):
            lame_from_engineering(100.0, nu)

    def test_nonpositive_modulus_rejected(self):
        with pytest.raises(MaterialError):
            lame_from_engineering(0.0, 0.3)

    def test_array_form_matches_scalar(self, rng):
        E = rng.uniform(*E_RANGE, size=(4, 4))
        nu = rng.uniform(*NU_RANGE, size=(4, 4))
        lam, mu = lame_from_engineering(E, nu)
        ls, ms = lame_from_engineering(float(E[1, 2]), float(nu[1, 2]))
        assert lam[1, 2] == ls and mu[1, 2] == ms
        assert np.all(lam > 0) and np.all(mu > 0)


class TestMaterialField:
    def test_derived_moduli_consistent(self, rng):
        g = GridSpec(8, 8)
        m = voronoi_microstructure(g, 4, 11)
        lam, mu = lame_from_engineering(m.E, m.nu)
        assert np.array_equal(m.lam, lam)
        assert np.array_equal(m.mu, mu)

    def test_out_of_range_properties_rejected(self):
        g = GridSpec(4, 4)
        with pytest.raises(MaterialError):
            MaterialField(g, np.full(g.shape, 10.0), np.full(g.shape, 0.3))
        with pytest.raises(MaterialError):
            MaterialField(g, np.full(g.shape, 100.0), np.full(g.shape, 0.5))


class TestVoronoi:
    def test_single_grain_is_uniform(self):
        g = GridSpec(16, 16)
        m = voronoi_microstructure(g, 1, 3)
        assert np.unique(m.E).size == 1
        assert np.unique(m.nu).size == 1

    def test_same_seed_reproduces_bitwise(self):
        g = GridSpec(32, 32)
        a = voronoi_microstructure(g, 12, 42)
        b = voronoi_microstructure(g, 12, 42)
        assert a.E.tobytes() == b.E.tobytes()
        assert a.nu.tobytes() == b.nu.tobytes()

    def test_different_seed_differs(self):
        g = GridSpec(32, 32)
        a = voronoi_microstructure(g, 12, 1)
        b = voronoi_microstructure(g, 12, 2)
        assert a.E.tobytes() != b.E.tobytes()

    def test_properties_within_sampling_ranges(self):
        g = GridSpec(32, 32)
        m = voronoi_microstructure(g, 20, 7)
        assert m.E.min() >= E_RANGE[0] and m.E.max() <= E_RANGE[1]
        assert m.nu.min() >= NU_RANGE[0] and m.nu.max() <= NU_RANGE[1]

    def test_grain_count_bounds(self):
        g = GridSpec(4, 4)
        with pytest.raises(MaterialError):
            voronoi_microstructure(g, 0, 1)
        with pytest.raises(MaterialError):
            voronoi_microstructure(g, 17, 1)

    def test_assignment_periodic_under_seed_shift(self, rng):
        seeds = rng.uniform(0.0, 1.0, size=(9, 2))
        base = voronoi_labels(16, 16, seeds, 1.0)
        for shift in ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (-1.0, 0.0)):
            moved = voronoi_labels(16, 16, seeds + np.asarray(shift), 1.0)
            assert np.array_equal(base, moved)

    def test_backend_paths_agree(self, rng):
        seeds = rng.uniform(0.0, 2.0, size=(7, 2))
        a = voronoi_labels(12, 10, seeds, 2.0)
        b = voronoi_labels_numpy(12, 10, seeds, 2.0)
        assert np.array_equal(a, b)
