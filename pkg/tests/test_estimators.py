import numpy as np
import pytest

from regcca.cca_core import cca_from_covariance, sample_cca
from regcca.datamodel import CovarianceModel, PairedDataset, center_and_covariance, make_folds
from regcca.estimators import (
    EstimatorSpec,
    _l1_ball_unit_vector,
    _pmd_pair,
    fit_estimator,
    gcca_fit,
    load_estimate,
    rcca_fit,
    save_estimate,
    scca_fit,
    spls_fit,
    sweep_trajectory,
)
from regcca.linalg import sin2_theta, thin_svd
from regcca.synth import canonical_pair_covariance, mvn_sample


@pytest.fixture
def toy_data(rng):
    cov, _ = canonical_pair_covariance(6, 5, [0.8, 0.5], 2, seed=21)
    data = mvn_sample(cov, 120, seed=22)
    data, _ = center_and_covariance(data)
    return data


def variate_angle(data, est_a, est_b, k=1):
    return sin2_theta(data.x @ est_a.u_dirs[:, :k], data.x @ est_b.u_dirs[:, :k])


class TestRcca:
    def test_penalty_off_equals_sample_cca(self, toy_data):
        ridge = rcca_fit(toy_data, 0.0, 2)
        classic = sample_cca(toy_data, 2)
        np.testing.assert_allclose(ridge.rho, classic.rho, atol=1e-8)
        np.testing.assert_allclose(ridge.u_dirs, classic.u_dirs, atol=1e-8)

    def test_full_penalty_is_pls(self, toy_data):
        # c=1 drops the within-view metric: an SVD of the cross-covariance
        est = rcca_fit(toy_data, 1.0, 2)
        _, cov = center_and_covariance(toy_data)
        dec = thin_svd(cov.sxy)
        np.testing.assert_allclose(est.rho, dec.singular_values[:2], atol=1e-10)
        for k in range(2):
            cos = abs(est.u_dirs[:, k] @ dec.left[:, k]) / np.linalg.norm(est.u_dirs[:, k])
            assert cos >= 1 - 1e-10

    def test_matches_plugin_construction(self, toy_data):
        # oracle: build the regularised model by hand and decompose it
        c = 0.5
        est = rcca_fit(toy_data, c, 2)
        _, cov = center_and_covariance(toy_data)
        reg = CovarianceModel(
            sxx=(1 - c) * cov.sxx + c * np.eye(toy_data.p),
            sxy=cov.sxy,
            syy=(1 - c) * cov.syy + c * np.eye(toy_data.q),
        )
        oracle = cca_from_covariance(reg, 2)
        np.testing.assert_allclose(est.rho, oracle.rho, atol=1e-12)
        for k in range(2):
            cos = abs(est.u_dirs[:, k] @ oracle.u_dirs[:, k]) / (
                np.linalg.norm(est.u_dirs[:, k]) * np.linalg.norm(oracle.u_dirs[:, k])
            )
            assert cos >= 1 - 1e-12

    def test_penalty_out_of_range_rejected(self, toy_data):
        with pytest.raises(ValueError):
            rcca_fit(toy_data, 1.5, 1)

    def test_rho_continuous_in_penalty(self, toy_data):
        for c in (0.1, 0.5, 0.9):
            a = rcca_fit(toy_data, c, 2).rho
            b = rcca_fit(toy_data, c + 1e-3, 2).rho
            assert np.max(np.abs(a - b)) <= 0.05


class TestSpls:
    def test_slack_constraint_recovers_svd(self, toy_data):
        s = float(np.sqrt(max(toy_data.p, toy_data.q)))
        est = spls_fit(toy_data, s, 1)
        _, cov = center_and_covariance(toy_data)
        dec = thin_svd(cov.sxy)
        cos = abs(est.u_dirs[:, 0] @ dec.left[:, 0]) / np.linalg.norm(est.u_dirs[:, 0])
        assert cos >= 1 - 1e-6

    def test_rank_one_axis_aligned(self, rng):
        # sample cross-covariance proportional to e1 e1': columns drawn
        # mean-zero and mutually orthogonal, with only the first shared
        n = 40
        raw = rng.standard_normal((n, 5))
        raw -= raw.mean(axis=0)
        basis, _ = np.linalg.qr(raw)
        x = np.column_stack([basis[:, 0], basis[:, 1], basis[:, 2]])
        y = np.column_stack([basis[:, 0], basis[:, 3], basis[:, 4]])
        data = PairedDataset(x=x, y=y)
        data, cov = center_and_covariance(data)
        for s in (1.0, 1.5, 2.0):
            est = spls_fit(data, s, 1)
            u = est.u_dirs[:, 0] / np.linalg.norm(est.u_dirs[:, 0])
            assert abs(abs(u[0]) - 1.0) <= 1e-6

    def test_pmd_pair_unit_norm_and_objective(self, rng):
        # the solver-level pair honours the unit l2 constraint, and beats a
        # large random sample of feasible points on the objective
        a = rng.standard_normal((4, 4))
        cmat = a / np.max(np.abs(a))
        s = 1.2
        u, v, d, ok = _pmd_pair(cmat, s)
        assert ok
        assert abs(np.linalg.norm(u) - 1.0) <= 1e-8
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-8
        assert np.sum(np.abs(u)) <= s + 1e-8

        rng2 = np.random.default_rng(7)
        best = -np.inf
        for _ in range(100_000 // 200):
            g = rng2.standard_normal((200, 4))
            deltas = rng2.uniform(0, np.max(np.abs(g), axis=1))[:, None]
            cand = np.sign(g) * np.maximum(np.abs(g) - deltas, 0.0)
            norms = np.linalg.norm(cand, axis=1, keepdims=True)
            cand = np.divide(cand, norms, out=np.zeros_like(cand), where=norms > 0)
            cand = cand[np.sum(np.abs(cand), axis=1) <= s]
            if len(cand) < 2:
                continue
            half = len(cand) // 2
            scores = cand[:half] @ cmat @ cand[half:].T
            best = max(best, float(np.max(scores)))
        assert u @ cmat @ v >= best - 1e-9

    def test_l1_ball_solver_binds_constraint(self, rng):
        z = rng.standard_normal(6)
        u = _l1_ball_unit_vector(z, 1.3)
        assert abs(np.linalg.norm(u) - 1.0) <= 1e-10
        assert abs(np.sum(np.abs(u)) - 1.3) <= 1e-8

    def test_radius_below_one_rejected(self, toy_data):
        with pytest.raises(ValueError):
            spls_fit(toy_data, 0.5, 1)

    def test_nonconvergence_flagged(self, toy_data):
        est = spls_fit(toy_data, 1.5, 1, max_sweeps=1, tol=1e-15)
        assert not est.provenance.converged

    def test_no_covariance_metric_orthogonality_enforced(self, toy_data):
        # spls constrains Euclidean norms, not the within-view metric; the
        # returned columns are only rescaled to unit variance
        est = spls_fit(toy_data, 1.5, 2)
        _, cov = center_and_covariance(toy_data)
        gram = est.u_dirs.T @ cov.sxx @ est.u_dirs
        np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-6)


def _scca_objective(cov, tau, u, v):
    return float(-u @ cov.sxy @ v + tau * (np.sum(np.abs(u)) + np.sum(np.abs(v))))


def _scca_polar_oracle(cov, tau, n_grid=720):
    """Brute force over direction angles with exact radius optimisation.

    For fixed directions the objective is bilinear in the radii, so the
    optimum sits at a corner of the feasible box; scanning all angle pairs
    at the grid resolution bounds the true optimum from above.
    """
    angles = np.linspace(0, 2 * np.pi, n_grid, endpoint=False)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    ru = 1.0 / np.sqrt(np.einsum("ij,jk,ik->i", dirs, cov.sxx, dirs))
    rv = 1.0 / np.sqrt(np.einsum("ij,jk,ik->i", dirs, cov.syy, dirs))
    g = dirs @ cov.sxy @ dirs.T
    l1u = np.sum(np.abs(dirs), axis=1) * ru
    l1v = np.sum(np.abs(dirs), axis=1) * rv
    corner = -g * np.outer(ru, rv) + tau * (l1u[:, None] + l1v[None, :])
    return min(0.0, float(np.min(corner)))


class TestScca:
    def test_unpenalised_matches_sample_cca(self, toy_data):
        est = scca_fit(toy_data, 0.0, 1)
        classic = sample_cca(toy_data, 1)
        assert variate_angle(toy_data, est, classic) <= 1e-4

    def test_over_penalisation_flags_degenerate(self, toy_data):
        est = scca_fit(toy_data, 50.0, 1)
        assert est.provenance.degenerate
        np.testing.assert_array_equal(est.u_dirs, 0.0)

    def test_objective_matches_polar_grid_brute_force(self, rng):
        n, tau = 50, 0.05
        x = rng.standard_normal((n, 2))
        y = 0.6 * x + 0.8 * rng.standard_normal((n, 2))
        data, cov = center_and_covariance(PairedDataset(x=x, y=y))
        est = scca_fit(data, tau, 1, tol=1e-8)
        ours = _scca_objective(cov, tau, est.u_dirs[:, 0], est.v_dirs[:, 0])
        oracle = _scca_polar_oracle(cov, tau)
        assert ours <= oracle + 1e-3

    def test_successive_pairs_metric_orthogonal(self, rng):
        cov, _ = canonical_pair_covariance(10, 8, [0.85, 0.6, 0.4], 2, seed=31)
        data = mvn_sample(cov, 150, seed=32)
        data, c = center_and_covariance(data)
        est = scca_fit(data, 0.02, 3)
        gram = est.u_dirs.T @ c.sxx @ est.u_dirs
        off = np.max(np.abs(gram - np.diag(np.diag(gram))))
        assert off <= 1e-5
        gram_v = est.v_dirs.T @ c.syy @ est.v_dirs
        assert np.max(np.abs(gram_v - np.diag(np.diag(gram_v)))) <= 1e-5

    def test_dual_recycling_halves_inner_iterations(self, toy_data):
        fast = scca_fit(toy_data, 0.02, 1, n_steps_admm=5, recycle_duals=True)
        slow = scca_fit(toy_data, 0.02, 1, n_steps_admm=1000, recycle_duals=False)
        fi = fast.provenance.info["total_inner_iterations"]
        si = slow.provenance.info["total_inner_iterations"]
        assert fi <= 0.5 * si
        assert variate_angle(toy_data, fast, slow) <= 1e-6

    def test_nonconvergence_flagged_with_residuals(self, toy_data):
        est = scca_fit(toy_data, 0.02, 1, max_outer=1, tol=1e-14)
        assert not est.provenance.converged
        moves = est.provenance.info["last_outer_moves"]
        assert len(moves) == 1 and moves[0][0] > 1e-14


class TestGcca:
    def test_vanishing_penalty_matches_sample_cca(self, rng):
        cov, _ = canonical_pair_covariance(5, 4, [0.8], 2, seed=41)
        data = mvn_sample(cov, 400, seed=42)
        data, _ = center_and_covariance(data)
        est = gcca_fit(data, 1e-5, 1)
        classic = sample_cca(data, 1)
        assert variate_angle(data, est, classic) <= 1e-3

    def test_support_exclusion_from_sparse_precision(self, rng):
        # a block of x-variables with no cross-view precision entries can
        # never enter the canonical directions
        p, q = 6, 4
        d = p + q
        excluded = [1, 4]
        mask = np.ones((d, d), dtype=bool)
        for a in excluded:
            mask[a, p:] = mask[p:, a] = False
        raw = rng.standard_normal((d, d)) * 0.3
        raw = 0.5 * (raw + raw.T)
        raw[~mask] = 0.0
        omega = raw + np.diag(1.1 * np.sum(np.abs(raw), axis=1) + 0.5)
        for a in excluded:
            assert np.all(omega[a, p:] == 0)
        sigma = np.linalg.inv(omega)
        cov = CovarianceModel(sxx=sigma[:p, :p], sxy=sigma[:p, p:], syy=sigma[p:, p:])
        est = cca_from_covariance(cov, min(p, q))
        for k in range(est.k):
            if est.rho[k] > 1e-6:
                assert np.max(np.abs(est.u_dirs[excluded, k])) <= 1e-8

    def test_heavy_penalty_flags_degenerate(self, rng):
        cov, _ = canonical_pair_covariance(4, 3, [0.7], 1, seed=43)
        data = mvn_sample(cov, 100, seed=44)
        data, c = center_and_covariance(data)
        lam = float(np.max(np.abs(c.joint()))) * 1.1
        est = gcca_fit(data, lam, 1)
        assert est.provenance.degenerate
        np.testing.assert_allclose(est.rho, 0.0, atol=1e-10)


class TestCommonContract:
    @pytest.mark.parametrize(
        "kind,penalty", [("rcca", 0.3), ("spls", 1.5), ("scca", 0.02), ("gcca", 0.05)]
    )
    def test_unit_variance_variates(self, toy_data, kind, penalty):
        est = fit_estimator(EstimatorSpec(kind=kind, penalty=penalty, K=2), toy_data)
        if est.provenance.degenerate:
            pytest.skip("degenerate estimate")
        for k in range(est.k):
            var = np.sum((toy_data.x @ est.u_dirs[:, k]) ** 2) / toy_data.n
            assert abs(var - 1.0) <= 1e-6
            var = np.sum((toy_data.y @ est.v_dirs[:, k]) ** 2) / toy_data.n
            assert abs(var - 1.0) <= 1e-6

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            EstimatorSpec(kind="rcca", penalty=2.0, K=1)
        with pytest.raises(ValueError):
            EstimatorSpec(kind="gcca", penalty=0.0, K=1)
        with pytest.raises(ValueError):
            EstimatorSpec(kind="nope", penalty=0.5, K=1)


class TestSweep:
    def test_cell_count(self, toy_data):
        folds = make_folds(toy_data.n, 2, seed=0)
        traj = sweep_trajectory("rcca", toy_data, [0.5], folds, 1)
        assert len(traj.estimates) == 3  # 2 folds + full sample
        assert traj.full_estimate(0) is not None

    def test_rerun_bit_identical(self, toy_data):
        folds = make_folds(toy_data.n, 3, seed=5)
        a = sweep_trajectory("scca", toy_data, [0.01, 0.05], folds, 1, seed=9)
        b = sweep_trajectory("scca", toy_data, [0.01, 0.05], folds, 1, seed=9)
        for key in a.estimates:
            np.testing.assert_array_equal(a.estimates[key].rho, b.estimates[key].rho)
            np.testing.assert_array_equal(a.estimates[key].u_dirs, b.estimates[key].u_dirs)

    def test_gcca_precision_support_shrinks_along_grid(self, rng):
        cov, _ = canonical_pair_covariance(6, 5, [0.8], 2, seed=51)
        data = mvn_sample(cov, 200, seed=52)
        data, _ = center_and_covariance(data)
        folds = make_folds(data.n, 2, seed=0)
        traj = sweep_trajectory("gcca", data, [1e-3, 1e-2, 1e-1], folds, 1)
        nnz = []
        for i in range(3):
            est = traj.full_estimate(i)
            # support size is not exposed directly; refit the precision
            from regcca.glasso import glasso_fit
            _, c = center_and_covariance(data)
            prec = glasso_fit(c.joint(), traj.grid[i])
            off = prec.omega - np.diag(np.diagonal(prec.omega))
            nnz.append(int(np.sum(off != 0)))
        assert nnz[0] >= nnz[1] >= nnz[2]

    def test_cell_failures_recorded_not_raised(self, toy_data):
        folds = make_folds(toy_data.n, 2, seed=0)
        traj = sweep_trajectory(
            "gcca", toy_data, [0.05], folds, 1, options={"glasso_max_iter": 1}
        )
        assert len(traj.failures) == 3
        assert len(traj.estimates) == 0

    def test_non_monotone_grid_rejected(self, toy_data):
        folds = make_folds(toy_data.n, 2, seed=0)
        with pytest.raises(ValueError):
            sweep_trajectory("rcca", toy_data, [0.5, 0.1, 0.7], folds, 1)


class TestPersistence:
    def test_round_trip(self, toy_data, tmp_path):
        est = rcca_fit(toy_data, 0.4, 2)
        est.provenance.fold = 1
        est.provenance.seed = 77
        save_estimate(est, tmp_path, "demo", x_names=toy_data.x_names, y_names=toy_data.y_names)
        back = load_estimate(tmp_path, "demo")
        np.testing.assert_array_equal(back.u_dirs, est.u_dirs)
        np.testing.assert_array_equal(back.v_dirs, est.v_dirs)
        np.testing.assert_array_equal(back.rho, est.rho)
        assert back.provenance.algorithm == "rcca"
        assert back.provenance.fold == 1
        assert back.provenance.seed == 77
