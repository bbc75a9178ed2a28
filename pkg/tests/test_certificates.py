import numpy as np
import pytest

from lowrank_split import (
    HankelApprox,
    InputError,
    ObjectiveSpec,
    Relaxation,
    SolverConfig,
    ZeroTerm,
    attraction_ball_test,
    build_triangle_hankel,
    dr_limit_point_check,
    dual_from_primal,
    numerical_rank,
    primal_radius,
    prox_envelope,
    prox_equivalence_conditions,
    rank_bound_check,
    solve_dr,
    subgradient_test_for,
)

HANKEL = HankelApprox(build_triangle_hankel(10))


@pytest.fixture(scope="module")
def hankel_runs():
    out = {}
    for r in range(1, 10):
        spec = ObjectiveSpec(r=r)
        out[r] = (
            solve_dr(HANKEL, spec, Relaxation.CONVEX, SolverConfig(record_trace=False)),
            solve_dr(HANKEL, spec, Relaxation.NONCONVEX, SolverConfig(record_trace=False)),
        )
    return out


def test_dual_from_primal_examples():
    Z = np.diag([3.0, 1.0, 0.5])
    cert = dual_from_primal(Z, Z, 1.0, 1)
    assert cert.sigma_r == 0 and cert.low_rank_guarantee
    for gamma in (0.5, 2.0):
        M = np.diag([1.0, 1.0])
        cert = dual_from_primal(M + gamma * np.diag([3.0, 1.0]), M, gamma, 1)
        assert cert.epsilon == pytest.approx(2 * gamma) and cert.low_rank_guarantee
        assert cert.tie_multiplicity == 0
        cert = dual_from_primal(M + gamma * np.diag([2.0, 2.0]), M, gamma, 1)
        assert cert.epsilon == 0 and not cert.low_rank_guarantee and cert.tie_multiplicity == 1
    assert "low_rank_guarantee = false" in cert.report()
    with pytest.raises(InputError):
        dual_from_primal(np.eye(2), np.eye(3), 1.0, 1)
    with pytest.raises(InputError):
        dual_from_primal(np.eye(2), np.eye(2), 1.0, 3)


def test_certificate_invariants(rng):
    for _ in range(50):
        Z, M = rng.standard_normal((2, 4, 3))
        cert = dual_from_primal(Z, M, float(rng.choice([0.1, 1.0, 10.0])), int(rng.integers(1, 4)))
        assert cert.epsilon >= 0
        if cert.low_rank_guarantee:
            assert cert.epsilon > 0 or cert.sigma_r <= cert.tau_tie


def test_rank_bound_check_examples(hankel_runs):
    Z = np.diag([3.0, 0.0])
    assert rank_bound_check(Z, dual_from_primal(Z, Z, 1.0, 1))
    # sigma_r(D*) = 0 tightens the bound to rank <= r
    assert not rank_bound_check(np.diag([3.0, 1.0]), dual_from_primal(np.diag([3.0, 1.0]), np.diag([3.0, 1.0]), 1.0, 1))
    assert not rank_bound_check(np.eye(3), dual_from_primal(np.eye(3), np.eye(3), 1.0, 1))
    for r in (1, 2, 3):
        conv = hankel_runs[r][0]
        cert = dual_from_primal(conv.Z, conv.X, 1.0, r)
        assert cert.low_rank_guarantee and cert.tie_multiplicity == 0
        assert rank_bound_check(conv.X, cert) and numerical_rank(conv.X) <= r
    conv = hankel_runs[5][0]
    cert = dual_from_primal(conv.Z, conv.X, 1.0, 5)
    assert numerical_rank(conv.X) > 5
    assert rank_bound_check(conv.X, cert) == (numerical_rank(conv.X) <= 5 + cert.tie_multiplicity)


def test_epsilon_two_formulas(hankel_runs):
    for r in range(1, 10):
        conv = hankel_runs[r][0]
        cert = dual_from_primal(conv.Z, conv.X, 1.0, r)
        if cert.epsilon > 0:
            assert abs(cert.epsilon - primal_radius(conv.Z, conv.X, r)) <= 1e-8


def test_sigma_next_matches_dual_under_condition_iv(hankel_runs):
    for r in range(1, 10):
        conv = hankel_runs[r][0]
        rep = prox_equivalence_conditions(ObjectiveSpec(r=r), conv.Z)
        if rep.cond_iv:
            cert = dual_from_primal(conv.Z, conv.X, 1.0, r)
            sz = np.linalg.svd(conv.Z, compute_uv=False)
            assert abs(sz[r] - cert.sigma_r_plus_1) <= 1e-8


def test_attraction_ball(hankel_runs):
    nonc = hankel_runs[2][1]
    cert = dual_from_primal(nonc.Z, prox_envelope(ObjectiveSpec(r=2), nonc.Z), 1.0, 2)
    assert cert.epsilon > 0
    rep = attraction_ball_test(HANKEL, cert, nonc.Z, trials=0)
    assert rep.passed and rep.trials == []
    rep = attraction_ball_test(HANKEL, cert, nonc.Z, trials=5, seed=3)
    assert rep.reached_solution
    assert all(t.start_distance <= 0.9 * cert.epsilon for t in rep.trials)
    assert "trials" in rep.summary()
    wide = attraction_ball_test(HANKEL, cert, nonc.Z, trials=3, radius_factor=10.0, seed=4)
    assert len(wide.trials) == 3
    with pytest.raises(InputError):
        attraction_ball_test(HANKEL, dual_from_primal(np.eye(2), np.eye(2) + np.eye(2), 1.0, 1), np.eye(2), 1)


def test_limit_point_zero():
    rep = dr_limit_point_check(np.zeros((3, 3)), np.zeros((3, 3)), 1.0, 1, Relaxation.NONCONVEX,
                               subgradient_test_for(ZeroTerm((3, 3))))
    assert np.all(rep.R == 0) and rep.passed()


def test_limit_point_rank_precondition():
    with pytest.raises(InputError):
        dr_limit_point_check(np.eye(3), np.eye(3), 1.0, 2, Relaxation.CONVEX, lambda X, G: 0.0)


def test_limit_point_nonconvex_runs(hankel_runs):
    for r in range(1, 10):
        nonc = hankel_runs[r][1]
        assert nonc.converged
        rep = dr_limit_point_check(nonc.X, nonc.Z, 1.0, r, "nonconvex", HANKEL.subgradient_residual)
        assert rep.passed(1e-6), (r, rep.max_residual(), rep.sigma_1_R, rep.sigma_bound)


def test_limit_point_convex_runs_both_modes(hankel_runs):
    for r in (1, 2, 3):
        conv = hankel_runs[r][0]
        for mode in Relaxation:
            rep = dr_limit_point_check(conv.X, conv.Z, 1.0, r, mode, HANKEL.subgradient_residual)
            assert rep.passed(1e-6), (r, mode)


def test_limit_point_detects_wrong_point(hankel_runs):
    nonc = hankel_runs[3][1]
    rep = dr_limit_point_check(nonc.X, nonc.Z + 0.1, 1.0, 3, Relaxation.NONCONVEX, HANKEL.subgradient_residual)
    assert not rep.passed(1e-6)
