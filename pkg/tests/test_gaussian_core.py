import numpy as np
import pytest
import scipy.integrate
from hypothesis import given
from hypothesis import strategies as st

from colmode.errors import NegativeTimeError, UnstableDriftError, ValidationError
from colmode.gaussian_core import (
    OMEGA,
    ModelParams,
    Preset,
    build_diffusion,
    build_drift,
    check_physicality,
    closed_form_covariance,
    closed_form_dynamics,
    evolve_covariance,
    infer_diffusion,
    is_stable,
    mat_from_list,
    mat_to_list,
    solve_steady_lyapunov,
    steady_dynamics,
)
from colmode.entanglement import ppt_nu_minus

from conftest import evolve_by_vanloan, random_stable_params


def sym_params(G=0.25, kappa=1.0, n=0.0, **kw):
    return ModelParams(G=G, kappa_a=kappa, kappa_b=kappa, n_a=n, n_b=n, **kw)


class TestSymplecticForm:
    def test_omega_squares_to_minus_identity(self):
        assert np.array_equal(OMEGA @ OMEGA, -np.eye(4))

    def test_omega_antisymmetric(self):
        assert np.array_equal(OMEGA.T, -OMEGA)


class TestBuildDrift:
    def test_decoupled_damping(self):
        A = build_drift(sym_params(G=0.0))
        assert np.allclose(A, -0.5 * np.eye(4), atol=0)

    def test_eigenvalues_split_by_coupling(self):
        # at resonance the eigenvalues are -kappa/2 +- G, each twice
        A = build_drift(sym_params(G=0.25))
        eigs = np.sort(np.linalg.eigvals(A).real)
        assert np.allclose(eigs, [-0.75, -0.75, -0.25, -0.25], atol=1e-12)

    def test_detuning_rotates_upper_block(self):
        p = ModelParams(G=0.0, kappa_a=1.0, kappa_b=1.0, n_a=0, n_b=0, delta_a=0.3)
        A = build_drift(p)
        assert np.allclose(A[:2, :2], [[-0.5, 0.3], [-0.3, -0.5]], atol=0)

    def test_matrix_layout(self):
        p = ModelParams(G=0.1, kappa_a=1.0, kappa_b=2.0, n_a=0, n_b=0,
                        delta_a=0.2, delta_b=-0.4)
        A = build_drift(p)
        expected = np.array(
            [
                [-0.5, 0.2, 0.0, -0.1],
                [-0.2, -0.5, -0.1, 0.0],
                [0.0, -0.1, -1.0, -0.4],
                [-0.1, 0.0, 0.4, -1.0],
            ]
        )
        assert np.allclose(A, expected, atol=0)

    def test_rejects_nonfinite_parameters(self):
        with pytest.raises(ValidationError):
            ModelParams(G=float("nan"), kappa_a=1, kappa_b=1, n_a=0, n_b=0)
        with pytest.raises(ValidationError):
            ModelParams(G=float("inf"), kappa_a=1, kappa_b=1, n_a=0, n_b=0)


class TestBuildDiffusion:
    def test_vacuum_noise(self):
        assert np.allclose(build_diffusion(sym_params()), 0.5 * np.eye(4), atol=0)

    def test_direct_substitution(self):
        p = ModelParams(G=0.0, kappa_a=2.0, kappa_b=1.0, n_a=1.0, n_b=0.0)
        assert np.allclose(build_diffusion(p), np.diag([3.0, 3.0, 0.5, 0.5]), atol=0)

    def test_symmetric_case_is_isotropic(self, rng):
        for _ in range(10):
            kappa = rng.uniform(0.3, 3.0)
            n = rng.uniform(0.0, 5.0)
            D = build_diffusion(sym_params(kappa=kappa, n=n))
            assert np.allclose(D, kappa * (2 * n + 1) / 2 * np.eye(4), rtol=1e-15)

    @given(n=st.floats(0.0, 50.0), kappa=st.floats(0.1, 10.0))
    def test_always_psd(self, n, kappa):
        D = build_diffusion(sym_params(kappa=kappa, n=n))
        assert np.min(np.linalg.eigvalsh(D)) >= 0.0


class TestIsStable:
    def test_below_boundary(self):
        assert is_stable(build_drift(sym_params(G=0.25)))

    def test_at_boundary(self):
        assert not is_stable(build_drift(sym_params(G=0.5)))

    def test_within_tolerance_of_boundary(self):
        assert not is_stable(build_drift(sym_params(G=0.49999999999)))


class TestSolveSteadyLyapunov:
    def test_vacuum_equilibrium(self):
        p = sym_params(G=0.0)
        V = solve_steady_lyapunov(build_drift(p), build_diffusion(p))
        assert np.allclose(V, 0.5 * np.eye(4), atol=1e-14)

    def test_thermal_equilibrium(self):
        p = sym_params(G=0.0, n=2.0)
        V = solve_steady_lyapunov(build_drift(p), build_diffusion(p))
        assert np.allclose(V, 2.5 * np.eye(4), atol=1e-13)

    def test_tms_oracle_nu_minus(self):
        # squeezed-pair variance kappa(2n+1)/(2(kappa+2G)) from diagonalizing
        # the coupled quadrature pairs; equals the smallest PT eigenvalue
        p = sym_params(G=0.25)
        V = solve_steady_lyapunov(build_drift(p), build_diffusion(p))
        assert ppt_nu_minus(V) == pytest.approx(1.0 / 3.0, abs=1e-12)
        # cross-check by long-time evolution from an arbitrary start
        V_t = evolve_covariance(np.eye(4), build_drift(p), build_diffusion(p), 100.0)
        assert np.max(np.abs(V_t - V)) < 1e-10

    def test_residual_bound_random(self, rng):
        for _ in range(25):
            p = random_stable_params(rng)
            A, D = build_drift(p), build_diffusion(p)
            V = solve_steady_lyapunov(A, D)
            assert np.max(np.abs(A @ V + V @ A.T + D)) < 1e-10
            assert np.max(np.abs(V - V.T)) == 0.0

    def test_unstable_drift_rejected(self):
        p = sym_params(G=0.5)
        with pytest.raises(UnstableDriftError):
            solve_steady_lyapunov(build_drift(p), build_diffusion(p))


class TestEvolveCovariance:
    def test_zero_time_identity(self):
        p = sym_params()
        V0 = np.diag([1.0, 2.0, 3.0, 4.0])
        out = evolve_covariance(V0, build_drift(p), build_diffusion(p), 0.0)
        assert np.array_equal(out, V0)

    def test_long_time_converges_to_steady_state(self):
        p = sym_params(G=0.2, n=0.5)
        A, D = build_drift(p), build_diffusion(p)
        Vinf = solve_steady_lyapunov(A, D)
        V_t = evolve_covariance(10.0 * np.eye(4), A, D, 1000.0)
        assert np.max(np.abs(V_t - Vinf)) < 1e-8

    def test_long_time_convergence_random_draws(self, rng):
        for _ in range(100):
            p = random_stable_params(rng)
            A, D = build_drift(p), build_diffusion(p)
            Vinf = solve_steady_lyapunov(A, D)
            V_t = evolve_covariance(5.0 * np.eye(4), A, D, 1000.0)
            assert np.max(np.abs(V_t - Vinf)) < 1e-8

    def test_steady_state_is_fixed_point(self):
        p = sym_params(G=0.3, n=1.0)
        A, D = build_drift(p), build_diffusion(p)
        Vinf = solve_steady_lyapunov(A, D)
        for t in (0.1, 1.0, 10.0):
            assert np.max(np.abs(evolve_covariance(Vinf, A, D, t) - Vinf)) < 1e-12

    def test_negative_time_rejected(self):
        p = sym_params()
        with pytest.raises(NegativeTimeError):
            evolve_covariance(np.eye(4), build_drift(p), build_diffusion(p), -1.0)

    def test_rk4_matches_exact_branch(self):
        p = sym_params(G=0.2, n=0.3)
        A, D = build_drift(p), build_diffusion(p)
        V0 = np.diag([1.0, 0.7, 0.9, 1.1])
        exact = evolve_covariance(V0, A, D, 2.0, method="exact")
        rk4 = evolve_covariance(V0, A, D, 2.0, method="rk4")
        assert np.max(np.abs(exact - rk4)) < 1e-10

    def test_unstable_drift_takes_rk4_branch(self):
        # beyond the instability threshold the covariance grows without a
        # steady state; check the integrator against the stepped oracle
        p = sym_params(G=0.6)
        A, D = build_drift(p), build_diffusion(p)
        V0 = 0.5 * np.eye(4)
        got = evolve_covariance(V0, A, D, 2.0)
        want = evolve_by_vanloan(V0, A, D, 2.0, steps=4)
        assert np.max(np.abs(got - want)) < 1e-8
        assert np.max(np.abs(got)) > 1.0  # actually grew

    def test_vanloan_oracle_agrees_with_ivp(self, rng):
        # validate the test oracle itself once against an adaptive integrator
        p = random_stable_params(rng)
        A, D = build_drift(p), build_diffusion(p)
        V0 = np.eye(4)
        got = evolve_by_vanloan(V0, A, D, 3.0, steps=3)

        def rhs(_, v):
            V = v.reshape(4, 4)
            return (A @ V + V @ A.T + D).reshape(16)

        sol = scipy.integrate.solve_ivp(
            rhs, (0.0, 3.0), V0.reshape(16), rtol=1e-11, atol=1e-13
        )
        assert np.max(np.abs(got.reshape(16) - sol.y[:, -1])) < 1e-8

    def test_evolution_matches_vanloan(self, rng):
        p = random_stable_params(rng)
        A, D = build_drift(p), build_diffusion(p)
        V0 = 2.0 * np.eye(4)
        assert np.max(
            np.abs(evolve_covariance(V0, A, D, 5.0) - evolve_by_vanloan(V0, A, D, 5.0, 5))
        ) < 1e-10


class TestClosedForm:
    def test_uncoupled_thermal(self):
        for n in (0.0, 0.7, 3.0):
            V = closed_form_covariance(0.0, 1.0, n)
            assert np.allclose(V, (2 * n + 1) / 2 * np.eye(4), atol=0)

    def test_reference_point(self):
        V = closed_form_covariance(0.25, 1.0, 0.0)
        assert V[0, 0] == pytest.approx(5.0 / 6.0, abs=1e-15)
        assert V[0, 2] == pytest.approx(2.0 / 3.0, abs=1e-15)
        assert V[1, 3] == pytest.approx(-2.0 / 3.0, abs=1e-15)
        assert ppt_nu_minus(V) == pytest.approx(1.0 / 6.0, abs=1e-12)

    @given(g=st.floats(0.0, 0.49), n=st.floats(0.0, 10.0))
    def test_determinant_invariant(self, g, n):
        V = closed_form_covariance(g, 1.0, n)
        assert np.linalg.det(V) == pytest.approx(((2 * n + 1) / 2) ** 4, rel=1e-10)

    @given(g=st.floats(0.0, 0.495), n=st.floats(0.0, 20.0))
    def test_always_physical(self, g, n):
        assert check_physicality(closed_form_covariance(g, 1.0, n))

    def test_boundary_rejected(self):
        with pytest.raises(UnstableDriftError):
            closed_form_covariance(0.5, 1.0, 0.0)

    def test_dynamics_realization(self):
        # damping into a correlated reservoir holds the closed form steady
        A, D = closed_form_dynamics(0.25, 1.0, 0.5)
        V = closed_form_covariance(0.25, 1.0, 0.5)
        assert np.max(np.abs(A @ V + V @ A.T + D)) < 1e-12
        assert np.min(np.linalg.eigvalsh(D)) > 0.0
        assert np.max(np.abs(solve_steady_lyapunov(A, D) - V)) < 1e-12


class TestCheckPhysicality:
    def test_vacuum(self):
        assert check_physicality(0.5 * np.eye(4))

    def test_sub_heisenberg_isotropic(self):
        assert not check_physicality(0.4 * np.eye(4))

    def test_all_steady_states_physical(self, rng):
        for _ in range(40):
            p = random_stable_params(rng)
            V = solve_steady_lyapunov(build_drift(p), build_diffusion(p))
            assert check_physicality(V)


class TestInferDiffusion:
    def test_vacuum_fixed_point(self):
        D, psd = infer_diffusion(-0.5 * np.eye(4), 0.5 * np.eye(4))
        assert np.allclose(D, 0.5 * np.eye(4), atol=0)
        assert psd

    def test_round_trip_recovers_diffusion(self, rng):
        for _ in range(10):
            p = random_stable_params(rng)
            A, D = build_drift(p), build_diffusion(p)
            V = solve_steady_lyapunov(A, D)
            D_rec, psd = infer_diffusion(A, V)
            assert np.max(np.abs(D_rec - D)) < 1e-10
            assert psd

    def test_coupled_drift_with_closed_form_target(self):
        # regression artifact: the noise input required for the coupled
        # drift to hold the closed-form state steady is PSD but heavily
        # cross-correlated, nothing like the local-bath diagonal diffusion
        p = sym_params(G=0.25)
        V = closed_form_covariance(0.25, 1.0, 0.0)
        D, psd = infer_diffusion(build_drift(p), V)
        assert psd
        expected = (
            np.array(
                [
                    [20, 0, 16, 10],
                    [0, 20, 10, -16],
                    [16, 10, 20, 0],
                    [10, -16, 0, 20],
                ]
            )
            / 24.0
        )
        assert np.allclose(D, expected, atol=1e-12)


class TestSymmetryAndSerialization:
    def test_label_swap_invariance(self, rng):
        # swapping the mode labels in symmetric parameters permutes V into itself
        P = np.zeros((4, 4))
        P[0, 2] = P[1, 3] = P[2, 0] = P[3, 1] = 1.0
        for _ in range(10):
            g = rng.uniform(0.0, 0.45)
            n = rng.uniform(0.0, 2.0)
            p = sym_params(G=g, n=n)
            V = solve_steady_lyapunov(build_drift(p), build_diffusion(p))
            assert np.max(np.abs(P @ V @ P.T - V)) < 1e-12

    def test_params_json_round_trip(self):
        p = ModelParams(G=0.2, kappa_a=1.0, kappa_b=1.5, n_a=0.3, n_b=0.1,
                        delta_a=0.05, delta_b=-0.02)
        assert ModelParams.from_json(p.to_json()) == p

    def test_closed_form_preset_requires_symmetry(self):
        with pytest.raises(ValidationError):
            ModelParams(G=0.1, kappa_a=1.0, kappa_b=2.0, n_a=0, n_b=0,
                        preset=Preset.CLOSED_FORM)

    def test_unknown_json_field_rejected(self):
        with pytest.raises(ValidationError):
            ModelParams.from_dict({"G": 0.1, "kappa_a": 1, "kappa_b": 1,
                                   "n_a": 0, "n_b": 0, "bogus": 1})

    def test_matrix_wire_format_round_trip(self):
        V = closed_form_covariance(0.2, 1.0, 0.4)
        assert np.array_equal(mat_from_list(mat_to_list(V)), V)

    def test_steady_dynamics_dispatch(self):
        p_tms = sym_params(G=0.2)
        A, D = steady_dynamics(p_tms)
        assert np.array_equal(A, build_drift(p_tms))
        p_cf = sym_params(G=0.2, preset=Preset.CLOSED_FORM)
        A_cf, D_cf = steady_dynamics(p_cf)
        assert np.allclose(A_cf, -0.5 * np.eye(4), atol=0)
        V = solve_steady_lyapunov(A_cf, D_cf)
        assert np.max(np.abs(V - closed_form_covariance(0.2, 1.0, 0.0))) < 1e-12
