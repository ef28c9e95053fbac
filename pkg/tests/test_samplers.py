import numpy as np
import pytest

from fomo.core import gaussian_distribution, seeded_rng, uniform_distribution
from fomo.errors import ConfigError
from fomo.samplers import (
    DesignSpec,
    density_at,
    design_matrix,
    gaussian_design,
    latin_hypercube,
    uniform_design,
)


@pytest.fixture
def box2():
    return uniform_distribution(2, lo=-1.0, hi=3.0)


class TestDesignSpec:
    def test_validation(self, box2):
        with pytest.raises(ConfigError):
            DesignSpec(0, "lhs", box2)
        with pytest.raises(ConfigError):
            DesignSpec(10, "sobol", box2)
        assert DesignSpec(10, "lhs", box2).dims == 2


class TestLatinHypercube:
    def test_one_point_per_stratum_every_dimension(self, box2):
        n = 32
        x = latin_hypercube(DesignSpec(n, "lhs", box2), seeded_rng(0, "lhs"))
        assert x.shape == (n, 2)
        for j, (lo, hi) in enumerate([(-1.0, 3.0), (-1.0, 3.0)]):
            strata = np.floor((x[:, j] - lo) / (hi - lo) * n).astype(int)
            assert sorted(strata) == list(range(n))

    def test_within_box_and_deterministic(self, box2):
        spec = DesignSpec(50, "lhs", box2)
        a = latin_hypercube(spec, seeded_rng(3, "lhs"))
        b = latin_hypercube(spec, seeded_rng(3, "lhs"))
        np.testing.assert_array_equal(a, b)
        assert np.all((a >= -1.0) & (a <= 3.0))

    def test_gaussian_box_is_cutoff_sigmas(self):
        dist = gaussian_distribution(1, mean=2.0, stdev=0.5, cutoff_sigmas=4.0)
        x = latin_hypercube(DesignSpec(200, "lhs", dist), seeded_rng(0, "lhs"))
        assert np.all((x >= 0.0) & (x <= 4.0))


class TestOtherDesigns:
    def test_uniform_fills_box(self, box2):
        x = uniform_design(DesignSpec(500, "uniform", box2), seeded_rng(1, "u"))
        assert np.all((x >= -1.0) & (x <= 3.0))
        # both halves of each dimension get visited
        assert np.all(np.sum(x < 1.0, axis=0) > 100)

    def test_gaussian_respects_truncation(self):
        dist = gaussian_distribution(2, cutoff_sigmas=1.0)
        x = gaussian_design(DesignSpec(300, "gaussian", dist), seeded_rng(2, "g"))
        assert np.all(np.abs(x) <= 1.0)

    def test_gaussian_matches_moments_roughly(self):
        dist = gaussian_distribution(1, mean=5.0, stdev=2.0)
        x = gaussian_design(DesignSpec(4000, "gaussian", dist), seeded_rng(4, "g"))
        assert abs(x.mean() - 5.0) < 0.15
        assert abs(x.std() - 2.0) < 0.15

    def test_design_matrix_dispatch(self, box2):
        for scheme in ("lhs", "uniform", "gaussian"):
            dist = box2 if scheme != "gaussian" else gaussian_distribution(2)
            x = design_matrix(DesignSpec(20, scheme, dist), seeded_rng(0, scheme))
            assert x.shape == (20, 2)

    def test_lhs_scheme_requires_lhs_call_agreement(self, box2):
        spec = DesignSpec(20, "lhs", box2)
        a = design_matrix(spec, seeded_rng(9, "d"))
        b = latin_hypercube(spec, seeded_rng(9, "d"))
        np.testing.assert_array_equal(a, b)


class TestDensityAt:
    def test_delegates_to_distribution(self, box2):
        pts = np.array([[0.0, 0.0], [1.0, 2.0]])
        np.testing.assert_array_equal(density_at(box2, pts), box2.density(pts))
