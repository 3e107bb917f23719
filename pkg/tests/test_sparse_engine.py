import numpy as np
import pytest

from sparse_shortener import (
    SparseProblem,
    assemble_sparse_cse,
    assemble_sparse_tir,
    build_cse_problem,
    build_tir_problem,
    cse_mse,
    exhaustive_sparsest,
    loss_budget,
    omp_backend,
    omp_solve,
    optimal_cse,
    optimal_tir,
    optimal_unit_tap,
    significant_taps_baseline,
    tir_mse,
)
from sparse_shortener.spectral_factors import (
    circulant_rdelta_spectrum,
    circulant_ryy_spectrum,
)

from conftest import make_corr

BACKENDS = ["python"] + (["compiled"] if omp_backend() == "compiled" else [])


def identity_problem(d, eps):
    n = len(d)
    return SparseProblem(phi=np.eye(n, dtype=complex), d=np.asarray(d, dtype=complex),
                        epsilon=eps)


class TestSparseProblem:
    def test_rejects_fat_dictionary(self):
        with pytest.raises(ValueError):
            SparseProblem(phi=np.ones((2, 3), dtype=complex),
                          d=np.ones(2, dtype=complex), epsilon=0.0)

    def test_rejects_negative_tolerance(self):
        with pytest.raises(ValueError):
            identity_problem([1.0, 0.0], -1.0)

    def test_rejects_mismatched_weight(self):
        with pytest.raises(ValueError):
            SparseProblem(phi=np.eye(3, dtype=complex), d=np.ones(3, dtype=complex),
                          epsilon=0.0, k_weight=np.eye(2, dtype=complex))


class TestOmpBasics:
    @pytest.mark.parametrize("backend", BACKENDS)
    def test_identity_single_atom(self, backend):
        prob = identity_problem([1.0, 0.0], 1e-12)
        sol = omp_solve(prob, backend=backend)
        assert sol.support == (0,)
        np.testing.assert_allclose(sol.weights, [1.0])
        assert sol.converged
        assert len(sol.pre_trace) == 1

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_zero_data_converges_empty(self, backend):
        prob = identity_problem([0.0, 0.0, 0.0], 0.0)
        sol = omp_solve(prob, backend=backend)
        assert sol.support == ()
        assert sol.converged
        assert len(sol.pre_trace) == 0

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_fixed_k_selects_exactly_k(self, backend):
        rng = np.random.default_rng(3)
        phi = rng.standard_normal((8, 6)) + 1j * rng.standard_normal((8, 6))
        d = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        prob = SparseProblem(phi=phi, d=d, epsilon=0.0)
        sol = omp_solve(prob, mode="fixed_k", k=3, backend=backend)
        assert len(sol.support) == 3
        assert sol.converged

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_fixed_k_zero_selects_nothing(self, backend):
        prob = identity_problem([1.0, 2.0], 0.0)
        sol = omp_solve(prob, mode="fixed_k", k=0, backend=backend)
        assert sol.support == () and sol.converged

    def test_fixed_k_supports_are_nested(self):
        # the pursuit is incremental, so growing k extends the same support
        # and the achieved shortening MSE never worsens
        for seed in range(10):
            _, _, corr = make_corr(v=4, n_f=16, snr_db=20.0, seed=seed)
            i_opt, _ = optimal_unit_tap(corr)
            prob = build_tir_problem("cholesky", corr, i_opt, 0.0)
            prev_support: tuple = ()
            prev_xi = np.inf
            for k in range(1, 6):
                sol = omp_solve(prob, mode="fixed_k", k=k)
                assert sol.support[: len(prev_support)] == prev_support
                xi = tir_mse(corr, assemble_sparse_tir(sol, i_opt, corr.n))
                assert xi <= prev_xi + 1e-12
                prev_support, prev_xi = sol.support, xi

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_tolerance_unmet_reports_not_converged(self, backend):
        # tall dictionary orthogonal to part of d: no support can reach 0
        phi = np.zeros((3, 1), dtype=complex)
        phi[0, 0] = 1.0
        d = np.array([1.0, 1.0, 0.0], dtype=complex)
        prob = SparseProblem(phi=phi, d=d, epsilon=1e-12)
        sol = omp_solve(prob, backend=backend)
        assert not sol.converged
        assert len(sol.support) == 1

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_trace_strictly_decreasing(self, backend):
        for seed in range(5):
            _, _, corr = make_corr(v=3, n_f=12, snr_db=18.0, seed=seed)
            i_opt, _ = optimal_unit_tap(corr)
            b = optimal_tir(corr, i_opt)
            prob = build_cse_problem("cholesky", corr, corr.r_yx @ b.coeffs, 0.0)
            sol = omp_solve(prob, mode="fixed_k", k=10, backend=backend)
            trace = sol.pre_trace
            assert np.all(trace[1:] <= trace[:-1] + 1e-12 * np.maximum(trace[:-1], 1.0))
            assert np.all(trace[1:] < trace[:-1] + 1e-12)

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_converged_solution_feasible_by_recomputation(self, backend):
        for seed in range(5):
            _, _, corr = make_corr(v=2, n_f=10, snr_db=15.0, seed=seed)
            i_opt, mmse = optimal_unit_tap(corr)
            b = optimal_tir(corr, i_opt)
            eps = 20 * mmse * 0.05
            prob = build_cse_problem("cholesky", corr, corr.r_yx @ b.coeffs, eps)
            sol = omp_solve(prob, backend=backend)
            assert sol.converged
            z = sol.dense(prob.n_atoms)
            assert prob.weighted_residual_sq(z) <= eps * (1 + 1e-9)
            assert abs(prob.weighted_residual_sq(z) - sol.pre_trace[-1]) <= 1e-9 * max(eps, 1e-30)

    def test_backends_agree(self):
        if omp_backend() != "compiled":
            pytest.skip("compiled kernel unavailable")
        for seed in range(8):
            _, _, corr = make_corr(v=3, n_f=14, snr_db=20.0, seed=seed)
            i_opt, mmse = optimal_unit_tap(corr)
            b = optimal_tir(corr, i_opt)
            t = corr.r_yx @ b.coeffs
            for kind in ("cholesky", "eigen", "gram"):
                prob = build_cse_problem(kind, corr, t, mmse * 0.1)
                a = omp_solve(prob, backend="python")
                c = omp_solve(prob, backend="compiled")
                assert a.support == c.support
                assert a.converged == c.converged
                np.testing.assert_allclose(a.weights, c.weights, rtol=1e-8, atol=1e-12)
                np.testing.assert_allclose(a.pre_trace, c.pre_trace, rtol=1e-7, atol=1e-13)


class TestTirProblems:
    def test_identity_covariance_zero_data(self):
        # diagonal error covariance: the removed column has no off-diagonal
        # mass, so the data vector is zero and the empty support is feasible
        # whenever the tolerance admits the unit tap alone.
        from sparse_shortener import Cir, NoiseSpec, build_channel_matrix, build_correlations

        cir = Cir(taps=np.array([1.0 + 0j]), memory=0)
        corr = build_correlations(build_channel_matrix(cir, 4), NoiseSpec(snr=1.0))
        prob = build_tir_problem("cholesky", corr, 1, delta_cs=0.6)
        assert np.linalg.norm(prob.phi.conj().T @ prob.d) < 1e-12
        sol = omp_solve(prob)
        assert sol.support == ()
        assert sol.converged

    def test_objective_matches_quadratic_form(self):
        # fitting the reduced taps reproduces the shortening MSE exactly
        for kind in ("cholesky", "ldl", "eigen"):
            _, _, corr = make_corr(v=3, n_f=10, snr_db=18.0, seed=4)
            i = 6
            prob = build_tir_problem(kind, corr, i, 0.0)
            rng = np.random.default_rng(5)
            reduced = rng.standard_normal(corr.n - 1) + 1j * rng.standard_normal(corr.n - 1)
            full = np.insert(reduced, i, 1.0)
            from sparse_shortener import Tir

            xi_direct = tir_mse(corr, Tir.from_coeffs(full, unit_index=i))
            objective = np.linalg.norm(prob.phi @ reduced - prob.d) ** 2
            assert abs(objective - xi_direct) <= 1e-9 * xi_direct

    def test_tight_tolerance_recovers_dense_optimum(self):
        _, _, corr = make_corr(v=3, n_f=10, snr_db=18.0, seed=12)
        i_opt, mmse = optimal_unit_tap(corr)
        prob = build_tir_problem("cholesky", corr, i_opt, mmse * (1 + 1e-9))
        sol = omp_solve(prob)
        assert sol.converged
        b = assemble_sparse_tir(sol, i_opt, corr.n)
        assert tir_mse(corr, b) <= mmse * (1 + 1e-6)

    def test_single_tap_span_has_no_free_columns(self):
        # n = 1 leaves nothing to optimize: the unit tap is the whole target
        from sparse_shortener import Cir, NoiseSpec, build_channel_matrix, build_correlations

        cir = Cir(taps=np.array([1.0 + 0j]), memory=0)
        corr = build_correlations(build_channel_matrix(cir, 1), NoiseSpec(snr=1.0))
        prob = build_tir_problem("cholesky", corr, 0, delta_cs=1.0)
        assert prob.phi.shape == (1, 0)
        sol = omp_solve(prob)
        assert sol.support == () and sol.converged
        b = assemble_sparse_tir(sol, 0, 1)
        np.testing.assert_array_equal(b.coeffs, [1.0 + 0j])

    def test_circulant_kind_needs_spectrum(self):
        _, _, corr = make_corr(v=2, n_f=8, snr_db=10.0, seed=1)
        with pytest.raises(TypeError):
            build_tir_problem("circulant", corr, 3, 0.1)

    def test_circulant_kind_builds_from_spectrum(self):
        cir, noise, corr = make_corr(v=2, n_f=8, snr_db=10.0, seed=1)
        spec = circulant_rdelta_spectrum(cir, 8, noise)
        prob = build_tir_problem("circulant", spec, 3, 0.1)
        assert prob.phi.shape == (10, 9)
        assert prob.label == "tir_circulant"


class TestCseProblems:
    def test_optimal_taps_reach_zero_objective(self):
        for kind in ("cholesky", "eigen", "gram"):
            _, _, corr = make_corr(v=3, n_f=9, snr_db=15.0, seed=2)
            b = optimal_tir(corr, 5)
            t = corr.r_yx @ b.coeffs
            w = optimal_cse(corr, b)
            prob = build_cse_problem(kind, corr, t, 0.0)
            assert prob.weighted_residual_sq(w.coeffs) < 1e-10

    def test_scalar_consistency_across_kinds(self):
        from sparse_shortener import Cir, NoiseSpec, build_channel_matrix, build_correlations

        cir = Cir(taps=np.array([1.0 + 0j]), memory=0)
        corr = build_correlations(build_channel_matrix(cir, 1), NoiseSpec(snr=1.0))
        b = optimal_tir(corr, 0)
        t = corr.r_yx @ b.coeffs
        w = np.array([0.3 + 0.1j])
        values = []
        for kind in ("cholesky", "eigen", "gram"):
            prob = build_cse_problem(kind, corr, t, 0.0)
            values.append(prob.weighted_residual_sq(w))
        ref = abs(np.sqrt(2.0) * w[0] - t[0] / np.sqrt(2.0)) ** 2
        np.testing.assert_allclose(values, ref)

    def test_objective_equals_excess_mse_across_kinds(self):
        from sparse_shortener import Cse

        _, _, corr = make_corr(v=3, n_f=10, snr_db=20.0, seed=6)
        b = optimal_tir(corr, 6)
        t = corr.r_yx @ b.coeffs
        rng = np.random.default_rng(8)
        w = rng.standard_normal(corr.n_f) + 1j * rng.standard_normal(corr.n_f)
        xi_ex = cse_mse(corr, Cse.from_coeffs(w), b).xi_excess
        for kind in ("cholesky", "eigen", "gram"):
            prob = build_cse_problem(kind, corr, t, 0.0)
            assert abs(prob.weighted_residual_sq(w) - xi_ex) <= 1e-9 * xi_ex

    def test_circulant_kind_objective_approximates_excess(self):
        cir, noise, corr = make_corr(v=3, n_f=24, snr_db=10.0, seed=6)
        b = optimal_tir(corr, corr.n // 2)
        t = corr.r_yx @ b.coeffs
        spec = circulant_ryy_spectrum(cir, 24, noise)
        prob = build_cse_problem("circulant", spec, t, 0.0)
        w = optimal_cse(corr, b).coeffs
        # small but not zero: the circulant objective is an approximation
        assert prob.weighted_residual_sq(w) < 0.1


class TestExhaustive:
    def test_identity_needs_two(self):
        prob = identity_problem([1.0, 1.0, 0.0], 1e-12)
        sol = exhaustive_sparsest(prob, max_k=3)
        assert sol.converged
        assert len(sol.support) == 2

    def test_zero_feasible(self):
        prob = identity_problem([0.5, 0.5], 1.0)  # ||d||^2 = 0.5 <= 1
        sol = exhaustive_sparsest(prob, max_k=2)
        assert sol.converged
        assert sol.support == ()

    def test_guard(self):
        prob = identity_problem(np.ones(21), 0.1)
        with pytest.raises(ValueError):
            exhaustive_sparsest(prob, max_k=2)

    def test_oracle_never_beaten_by_pursuit(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            m = int(rng.integers(6, 11))
            n = int(rng.integers(4, m + 1))
            phi = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
            d = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            eps = float(rng.uniform(0.05, 0.5)) * float(np.real(np.vdot(d, d)))
            prob = SparseProblem(phi=phi, d=d, epsilon=eps)
            omp = omp_solve(prob)
            oracle = exhaustive_sparsest(prob, max_k=n)
            if omp.converged and oracle.converged:
                assert len(oracle.support) <= len(omp.support)


class TestAssembly:
    def test_empty_support(self):
        from sparse_shortener import SparseSolution

        sol = SparseSolution(support=(), weights=np.zeros(0, dtype=complex),
                             pre_trace=np.zeros(0), converged=True)
        b = assemble_sparse_tir(sol, 2, 4)
        np.testing.assert_array_equal(b.coeffs, [0, 0, 1, 0])

    def test_shift_rule(self):
        from sparse_shortener import SparseSolution

        sol = SparseSolution(support=(0,), weights=np.array([2.0 + 1j]),
                             pre_trace=np.array([0.1]), converged=True)
        b = assemble_sparse_tir(sol, 0, 3)
        np.testing.assert_array_equal(b.coeffs, [1.0, 2.0 + 1j, 0.0])

    def test_round_trip_objective(self):
        _, _, corr = make_corr(v=3, n_f=10, snr_db=16.0, seed=9)
        i_opt, _ = optimal_unit_tap(corr)
        prob = build_tir_problem("cholesky", corr, i_opt, 0.0)
        sol = omp_solve(prob, mode="fixed_k", k=3)
        b = assemble_sparse_tir(sol, i_opt, corr.n)
        assert abs(tir_mse(corr, b) - sol.pre_trace[-1]) <= 1e-9 * sol.pre_trace[-1]

    def test_cse_assembly_identity_positions(self):
        from sparse_shortener import SparseSolution

        sol = SparseSolution(support=(4, 1), weights=np.array([1j, 2.0]),
                             pre_trace=np.array([0.5, 0.2]), converged=False)
        w = assemble_sparse_cse(sol, 6)
        assert w.coeffs[4] == 1j and w.coeffs[1] == 2.0
        assert w.support == (1, 4)


class TestSignificantTaps:
    def test_keep_everything_matches_dense(self):
        _, _, corr = make_corr(v=3, n_f=8, snr_db=14.0, seed=3)
        i_opt, _ = optimal_unit_tap(corr)
        dense = optimal_tir(corr, i_opt)
        kept = significant_taps_baseline(corr, i_opt, corr.n - 1)
        np.testing.assert_allclose(kept.coeffs, dense.coeffs, atol=1e-10)

    def test_zero_extra_taps(self):
        _, _, corr = make_corr(v=2, n_f=7, snr_db=12.0, seed=4)
        b = significant_taps_baseline(corr, 4, 0)
        e = np.zeros(corr.n, dtype=complex)
        e[4] = 1.0
        np.testing.assert_array_equal(b.coeffs, e)
        assert abs(tir_mse(corr, b) - np.real(corr.r_delta[4, 4])) < 1e-12

    def test_pursuit_never_loses_on_average(self):
        # 50 channels at the fig4 operating point; the greedy design should
        # beat prune-and-refit on average at every target span
        for n_b in (1, 3, 5):
            gains = []
            for seed in range(50):
                _, _, corr = make_corr(v=5, n_f=20, snr_db=20.0, seed=100 + seed)
                i_opt, _ = optimal_unit_tap(corr)
                prob = build_tir_problem("cholesky", corr, i_opt, 0.0)
                sol = omp_solve(prob, mode="fixed_k", k=n_b)
                b_omp = assemble_sparse_tir(sol, i_opt, corr.n)
                b_sig = significant_taps_baseline(corr, i_opt, n_b)
                gains.append(tir_mse(corr, b_sig) - tir_mse(corr, b_omp))
            assert np.mean(gains) >= 0.0


class TestLossGuarantee:
    def test_by_tolerance_respects_budget(self):
        for seed in range(20):
            _, _, corr = make_corr(v=4, n_f=16, snr_db=18.0, seed=seed)
            i_opt, _ = optimal_unit_tap(corr)
            prob_t = build_tir_problem("cholesky", corr, i_opt, 0.0)
            b = assemble_sparse_tir(omp_solve(prob_t, mode="fixed_k", k=2), i_opt, corr.n)
            xi_min = tir_mse(corr, b)
            eta = 0.25
            d_eq = loss_budget(eta, xi_min)
            prob = build_cse_problem("cholesky", corr, corr.r_yx @ b.coeffs, d_eq)
            sol = omp_solve(prob)
            assert sol.converged
            w = assemble_sparse_cse(sol, corr.n_f)
            rep = cse_mse(corr, w, b)
            loss = 10 * np.log10(rep.xi_total / rep.xi_min)
            assert loss <= eta + 1e-9
