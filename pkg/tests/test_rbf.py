import numpy as np
import pytest

from uqbench import rbf
from uqbench.lowdisc import gaussian_plan
from uqbench.models import QuadExpSpec, quad_exp_model


class TestImqKernel:
    def test_at_zero_distance(self):
        value, deriv = rbf.imq_kernel(0.0, 0.5)
        assert value == 2.0 and deriv == 0.0

    def test_unit_values(self):
        value, _ = rbf.imq_kernel(1.0, 1.0)
        assert value == pytest.approx(1.0 / np.sqrt(2.0), rel=1e-12)

    def test_derivative_matches_finite_differences(self):
        r, a, h = 0.3, 0.7, 1e-7
        _, deriv = rbf.imq_kernel(r, a)
        fd = (rbf.imq_kernel(r + h, a)[0] - rbf.imq_kernel(r - h, a)[0]) / (2 * h)
        assert deriv == pytest.approx(fd, rel=1e-7)

    def test_invalid_shape(self):
        with pytest.raises(ValueError):
            rbf.imq_kernel(1.0, 0.0)


class TestExtraCenters:
    def test_zero_count(self):
        plan = gaussian_plan(3, 5)
        assert rbf.choose_extra_centers(plan, 0).shape == (0, 3)

    def test_system_size_constraint(self):
        plan = gaussian_plan(9, 10)
        extra = rbf.choose_extra_centers(plan, 90)
        assert extra.shape == (90, 9)
        assert plan.count * (1 + plan.dimension) == 100

    def test_minimum_separation(self):
        plan = gaussian_plan(2, 40)
        extra = rbf.choose_extra_centers(plan, 80)
        from scipy.spatial.distance import cdist
        assert cdist(extra, plan.points).min() > rbf.MIN_CENTER_SEPARATION

    def test_deterministic_continuation(self):
        plan = gaussian_plan(4, 12, skip=9)
        a = rbf.choose_extra_centers(plan, 48)
        b = rbf.choose_extra_centers(plan, 48)
        assert np.array_equal(a, b)


class TestAssemble:
    def test_single_sample_one_extra(self):
        samples = np.zeros((1, 1))
        centers = np.array([[0.0], [2.0]])
        a_mat, rhs = rbf.assemble_gerbf(samples, np.array([3.0]),
                                        np.array([[1.0]]), centers, a=0.25)
        assert a_mat.shape == (2, 2)
        assert a_mat[0, 0] == 4.0  # 1/a at zero distance
        assert np.array_equal(rhs, [3.0, 1.0])

    def test_kernel_decay_dominates_row_sum(self):
        samples = np.array([[0.0], [50.0], [100.0]])
        centers = np.vstack([samples, [[200.0], [300.0], [400.0]]])
        values = np.zeros(3)
        grads = np.zeros((3, 1))
        a_mat, _ = rbf.assemble_gerbf(samples, values, grads, centers, a=0.01)
        value_block = a_mat[:3]
        row_sums = value_block.sum(axis=1)
        assert np.all(row_sums <= value_block.max(axis=1) * 1.01)

    def test_reproduces_linear_function_exactly(self):
        plan = gaussian_plan(1, 3, skip=4)
        values = plan.points[:, 0].copy()
        grads = np.ones((3, 1))
        centers = np.vstack([plan.points, rbf.choose_extra_centers(plan, 3)])
        a_mat, rhs = rbf.assemble_gerbf(plan.points, values, grads, centers, a=1.0)
        w, rank = rbf.solve_truncated_svd(a_mat, rhs)
        assert np.abs(a_mat @ w - rhs).max() < 1e-8

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            rbf.assemble_gerbf(np.zeros((2, 2)), np.zeros(2), np.zeros((2, 2)),
                               np.zeros((5, 2)), a=1.0)


class TestTruncatedSvd:
    def test_identity(self):
        rhs = np.arange(4.0)
        w, rank = rbf.solve_truncated_svd(np.eye(4), rhs)
        assert np.array_equal(w, rhs) and rank == 4

    def test_duplicated_row_minimum_norm(self):
        a_mat = np.array([[1.0, 0.0], [1.0, 0.0]])
        w, rank = rbf.solve_truncated_svd(a_mat, np.array([2.0, 2.0]))
        assert rank == 1
        assert np.isfinite(w).all()
        assert w == pytest.approx([2.0, 0.0])

    def test_well_conditioned_against_lu_oracle(self):
        rng = np.random.default_rng(42)
        a_mat = rng.standard_normal((50, 50)) + 10 * np.eye(50)
        rhs = rng.standard_normal(50)
        w, rank = rbf.solve_truncated_svd(a_mat, rhs)
        oracle = np.linalg.solve(a_mat, rhs)
        assert rank == 50
        assert np.abs(w - oracle).max() < 1e-9 * np.abs(oracle).max()

    def test_cutoff_boundary(self):
        # relative cutoff for a 3x3 system is 3e-13; the footnote discards
        # singular values at or below it
        cutoff = 3 * rbf.SVD_CUTOFF_PER_SIZE
        for factor, kept in ((2.0, 3), (0.5, 2), (1.0, 2)):
            s = np.array([1.0, 0.5, factor * cutoff])
            a_mat = np.diag(s)
            _, rank = rbf.solve_truncated_svd(a_mat, np.ones(3))
            assert rank == kept, factor

    def test_degenerate_system(self):
        with pytest.raises(rbf.DegenerateSystemError):
            rbf.solve_truncated_svd(np.zeros((3, 3)), np.ones(3))


class TestShapeTuning:
    def test_single_candidate_returned(self):
        plan = gaussian_plan(2, 5)
        values = np.ones(5)
        grads = np.zeros((5, 2))
        assert rbf.tune_shape_loo(plan.points, values, grads, candidates=[0.7]) == 0.7

    def test_recovers_planted_shape(self):
        # data drawn from an IMQ bump centred at the origin, which is one of
        # the samples: the fit can represent it exactly at the true shape
        a0 = 1.0
        plan = gaussian_plan(2, 9, skip=3)
        samples = np.vstack([np.zeros((1, 2)), plan.points[:8]])
        r2 = (samples**2).sum(axis=1)
        values = 1.0 / np.sqrt(r2 + a0**2)
        grads = -samples / ((r2 + a0**2) ** 1.5)[:, None]
        grid = a0 * np.array([0.25, 0.5, 1.0, 2.0, 4.0])
        extra = rbf._stream_centers(samples, samples.size, skip=64)
        best = rbf.tune_shape_loo(samples, values, grads, candidates=grid,
                                  extra_centers=extra)
        assert best == a0

    def test_loo_profile_is_unimodal_near_optimum(self):
        plan = gaussian_plan(2, 10, skip=11)
        values = np.sin(plan.points[:, 0]) + plan.points[:, 1] ** 2
        grads = np.column_stack([np.cos(plan.points[:, 0]), 2 * plan.points[:, 1]])
        extra = rbf.choose_extra_centers(plan, 20)
        grid = np.logspace(-1, 1, 9)
        errors = [rbf._loo_error(plan.points, values, grads, extra, float(a))
                  for a in grid]
        best = int(np.argmin(errors))
        assert 0 < best < len(grid) - 1  # interior optimum on this scan
        left, right = errors[:best + 1], errors[best:]
        assert all(b <= a * 1.05 for a, b in zip(left, left[1:]))
        assert all(b >= a * 0.95 for a, b in zip(right, right[1:]))

    def test_fast_path_matches_refits(self):
        plan = gaussian_plan(3, 7, skip=23)
        rng = np.random.default_rng(1)
        values = rng.standard_normal(7)
        grads = rng.standard_normal((7, 3))
        extra = rbf.choose_extra_centers(plan, 21)
        for a in (0.8, 2.0):
            fast = rbf._loo_error(plan.points, values, grads, extra, a)
            slow = rbf._loo_error_refit(plan.points, values, grads, extra, a)
            assert fast == pytest.approx(slow, rel=1e-6)

    def test_all_candidates_degenerate(self):
        samples = np.zeros((3, 1)) + np.array([[0.0], [1e-9], [2e-9]])
        values = np.zeros(3)
        grads = np.zeros((3, 1))
        with pytest.raises((rbf.TuningError, rbf.DegenerateSystemError)):
            rbf.tune_shape_loo(samples, values, grads, candidates=[1e9, 2e9],
                               extra_centers=np.full((3, 1), 1e-9))


class TestFittedSurrogate:
    @pytest.fixture(scope="class")
    def fitted(self):
        plan = gaussian_plan(2, 12, skip=2)
        model = quad_exp_model(QuadExpSpec(
            c0=0.3, a=np.array([0.5, -0.2]), b=np.array([[0.4, 0.1], [0.1, 0.2]])))
        values, grads = model.evaluate_batch(plan.points, want_gradients=True)
        surrogate = rbf.fit_gerbf(plan, values[:, 0], grads[:, 0], a=1.5)
        return plan, values[:, 0], grads[:, 0], surrogate

    def test_interpolates_values(self, fitted):
        plan, values, _, surrogate = fitted
        rel = np.abs(surrogate(plan.points) - values) / np.abs(values).max()
        assert rel.max() < 1e-6

    def test_gradient_at_samples(self, fitted):
        plan, _, grads, surrogate = fitted
        h = 1e-6
        for i in range(3):
            xi = plan.points[i]
            fd = np.array([
                (surrogate(xi + h * e) - surrogate(xi - h * e)) / (2 * h)
                for e in np.eye(2)])
            assert np.abs(fd - grads[i]).max() / np.abs(grads[i]).max() < 1e-4

    def test_analytic_gradient_matches_fd(self, fitted):
        plan, _, _, surrogate = fitted
        xi = np.array([0.37, -0.21])
        h = 1e-6
        fd = np.array([(surrogate(xi + h * e) - surrogate(xi - h * e)) / (2 * h)
                       for e in np.eye(2)])
        assert np.abs(surrogate.gradient(xi[None, :])[0] - fd).max() < 1e-6

    def test_far_field_decay(self, fitted):
        *_, surrogate = fitted
        far = surrogate(np.array([[300.0, 400.0]]))
        assert abs(far[0]) < np.abs(surrogate.weights).sum() / 499.0

    def test_serialization_roundtrip(self, fitted):
        *_, surrogate = fitted
        again = rbf.GerbfSurrogate.from_text(surrogate.to_text())
        pts = gaussian_plan(2, 50, skip=99).points
        assert np.allclose(surrogate(pts), again(pts), rtol=1e-12)
        assert again.shape == surrogate.shape

    def test_convergence_on_d9_model(self):
        model = quad_exp_model(QuadExpSpec(
            c0=0.0, a=np.full(9, 0.3), b=0.3 * np.eye(9), gamma=0.5, width=2.0))
        test_points = gaussian_plan(9, 1000, skip=4096).points
        truth, _ = model.evaluate_batch(test_points)
        rms = []
        for n in (10, 20, 40, 80):
            plan = gaussian_plan(9, n)
            values, grads = model.with_fresh_ledger().evaluate_batch(
                plan.points, want_gradients=True)
            sur = rbf.fit_gerbf(plan, values[:, 0], grads[:, 0], a=3.0)
            rms.append(np.sqrt(np.mean((sur(test_points) - truth[:, 0]) ** 2)))
        for a, b in zip(rms, rms[1:]):
            assert b < 1.2 * a
        assert rms[-1] < rms[0]
