import numpy as np
import pytest
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

from uqbench.lowdisc import (
    SobolSequence,
    UnsupportedDimensionError,
    default_table,
    gaussian_plan,
    inverse_normal_cdf,
    qmc_mean,
    sobol_points,
)


class TestSobolPoints:
    def test_index_zero_is_origin(self):
        assert np.array_equal(sobol_points(3, 1, 0), np.zeros((1, 3)))

    def test_dim1_reference_values(self):
        # frozen from the published generator's output
        got = sobol_points(1, 4, skip=1).ravel()
        assert np.array_equal(got, [0.5, 0.75, 0.25, 0.375])

    def test_first_four_2d_points_stratify_quadrants(self):
        pts = sobol_points(2, 4, 0)
        cells = {(int(2 * x), int(2 * y)) for x, y in pts}
        assert cells == {(0, 0), (0, 1), (1, 0), (1, 1)}

    @pytest.mark.parametrize("dim", [1, 2, 5, 8])
    @pytest.mark.parametrize("m", [4, 8, 10])
    def test_net_property_1d_projections(self, dim, m):
        pts = sobol_points(dim, 2**m, 0)
        for j in range(dim):
            cells = np.floor(pts[:, j] * 2**m).astype(int)
            assert np.array_equal(np.sort(cells), np.arange(2**m))

    @pytest.mark.parametrize("dim", [1, 2, 9, 40, 120])
    def test_bit_identical_with_scipy(self, dim):
        ref = qmc.Sobol(d=dim, scramble=False).random(256)
        assert np.array_equal(sobol_points(dim, 256, 0), ref)

    def test_skip_fast_forward(self):
        whole = sobol_points(5, 200, 0)
        assert np.array_equal(sobol_points(5, 120, 80), whole[80:])

    def test_regeneration_bit_identical(self):
        a = sobol_points(7, 500, skip=13)
        b = sobol_points(7, 500, skip=13)
        assert np.array_equal(a, b)

    def test_points_in_half_open_cube(self):
        pts = sobol_points(6, 1000, 0)
        assert pts.min() >= 0.0 and pts.max() < 1.0

    def test_unsupported_dimension(self):
        table = default_table()
        with pytest.raises(UnsupportedDimensionError):
            sobol_points(table.max_dimension + 1, 4)

    def test_table_covers_at_least_64_dimensions(self):
        assert default_table().max_dimension >= 64

    def test_zero_count_empty(self):
        assert sobol_points(3, 0).shape == (0, 3)

    def test_index_range_limit(self):
        with pytest.raises(ValueError):
            sobol_points(1, 2**30, skip=2**30)

    def test_sequence_cursor(self):
        seq = SobolSequence(3, skip=2)
        first = seq.next(10)
        second = seq.next(5)
        assert np.array_equal(np.vstack([first, second]), sobol_points(3, 15, 2))


class TestInverseNormalCdf:
    def test_center(self):
        assert inverse_normal_cdf(0.5) == 0.0

    def test_two_sigma_values(self):
        assert inverse_normal_cdf(0.977249868) == pytest.approx(2.0, abs=1e-6)
        assert inverse_normal_cdf(0.001349898) == pytest.approx(-3.0, abs=1e-6)

    def test_round_trip_on_log_grid(self):
        u = np.concatenate([np.logspace(-12, np.log10(0.5), 500),
                            1.0 - np.logspace(-12, np.log10(0.5), 500)])
        x = inverse_normal_cdf(u)
        assert np.abs(ndtr(x) - u).max() < 1e-9

    def test_against_scipy_oracle(self):
        u = np.linspace(1e-6, 1 - 1e-6, 2001)
        assert np.abs(inverse_normal_cdf(u) - ndtri(u)).max() < 1e-9

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.7])
    def test_domain_error(self, bad):
        with pytest.raises(ValueError):
            inverse_normal_cdf(bad)


class TestGaussianPlan:
    def test_mid_cube_row_maps_to_zero(self):
        # index 1 in every dimension is u = 0.5
        plan = gaussian_plan(4, 1, skip=1)
        assert np.array_equal(plan.points, np.zeros((1, 4)))

    def test_paper_scale_budget(self):
        plan = gaussian_plan(9, 420)
        assert plan.points.shape == (420, 9)
        assert np.isfinite(plan.points).all()

    def test_skip_zero_promoted(self):
        plan = gaussian_plan(3, 8, skip=0)
        assert plan.skip == 1
        assert np.isfinite(plan.points).all()
        assert np.array_equal(plan.points, gaussian_plan(3, 8, skip=1).points)

    def test_empirical_mean_small(self):
        plan = gaussian_plan(3, 10**6)
        assert np.abs(plan.points.mean(axis=0)).max() < 0.005

    def test_plan_is_immutable(self):
        plan = gaussian_plan(2, 4)
        with pytest.raises(ValueError):
            plan.points[0, 0] = 7.0

    def test_continuation_skip(self):
        plan = gaussian_plan(2, 10, skip=5)
        assert plan.continuation_skip() == 15


class TestQmcMean:
    def test_constant(self):
        assert qmc_mean(np.full(17, 3.25)) == 3.25

    def test_three_values(self):
        assert qmc_mean([1.0, 2.0, 3.0]) == 2.0

    def test_gaussian_second_moment(self, plan_1m_1d):
        assert qmc_mean(plan_1m_1d.points[:, 0] ** 2) == pytest.approx(1.0, abs=0.01)

    def test_first_moment_converges(self):
        plan = gaussian_plan(1, 10**4)
        assert abs(qmc_mean(plan.points[:, 0])) < 1e-2

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            qmc_mean([])
