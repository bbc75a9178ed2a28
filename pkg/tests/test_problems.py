import math

import numpy as np
import pytest

from lowrank_split import (
    CapabilityError,
    Completion,
    HankelApprox,
    InputError,
    ObjectiveSpec,
    QuadraticFit,
    Relaxation,
    SolverConfig,
    ZeroTerm,
    build_triangle_hankel,
    f2_grad,
    f2_prox,
    f2_value,
    hankel_from_sequence,
    hankel_project,
    lower_bound,
    objective_eval,
    read_problem,
    solve_dr,
    write_problem,
)
from lowrank_split.problems import parse_problem


def hankel_basis(n):
    B = np.zeros((2 * n - 1, n, n))
    for i in range(n):
        for j in range(n):
            B[i + j, i, j] = 1.0
    return B


def hankel_prox_oracle(H, gamma, Z):
    """Minimise ``gamma (-<M, H>) + 1/2 ||M - Z||**2`` over Hankel M by least squares."""
    n = H.shape[0]
    B = hankel_basis(n).reshape(2 * n - 1, -1).T
    # objective = 1/2 ||M - (Z + gamma H)||**2 + const
    coef, *_ = np.linalg.lstsq(B, (Z + gamma * H).ravel(), rcond=None)
    return (B @ coef).reshape(n, n)


def test_build_triangle_hankel():
    np.testing.assert_array_equal(build_triangle_hankel(2), [[1, 1], [1, 0]])
    np.testing.assert_array_equal(build_triangle_hankel(1), [[1]])
    H = build_triangle_hankel(10)
    assert np.sum(H**2) == 55
    assert np.all(H[0] == 1) and np.all(H[:, 0] == 1) and H[9, 9] == 0 and H[1, 8] == 1
    with pytest.raises(InputError):
        build_triangle_hankel(0)


def test_hankel_from_sequence():
    np.testing.assert_array_equal(hankel_from_sequence([1, 2, 3]), [[1, 2], [2, 3]])
    np.testing.assert_array_equal(hankel_from_sequence([1, 2], n=2), [[1, 2], [2, 0]])
    with pytest.raises(InputError):
        hankel_from_sequence([1, 2])
    with pytest.raises(InputError):
        hankel_from_sequence([1, 2, 3, 4], n=2)
    with pytest.raises(InputError):
        HankelApprox(np.array([[1.0, 2.0], [3.0, 4.0]]))


def test_hankel_prox_examples(rng):
    H = build_triangle_hankel(4)
    p = HankelApprox(H)
    for gamma in (0.5, 1.0, 3.0):
        assert np.all(f2_prox(p, gamma, -gamma * H) == 0)
    for _ in range(50):
        gamma = float(rng.choice([0.1, 1.0, 10.0]))
        Z = rng.standard_normal((4, 4))
        Y = f2_prox(p, gamma, Z)
        np.testing.assert_allclose(Y, hankel_prox_oracle(H, gamma, Z), atol=1e-12)
        # variational inequality against random feasible points
        for _ in range(5):
            W = hankel_project(rng.standard_normal((4, 4)))
            assert np.vdot(Z + gamma * H - Y, W - Y) <= 1e-10
        assert np.array_equal(Y, hankel_project(Y))


def test_completion_prox(rng):
    mask = rng.random((4, 5)) < 0.5
    data = rng.standard_normal((4, 5))
    p = Completion(mask, data)
    Z = np.where(mask, data, rng.standard_normal((4, 5)))
    np.testing.assert_array_equal(f2_prox(p, 1.0, Z), Z)
    Y = f2_prox(p, 2.0, rng.standard_normal((4, 5)))
    assert np.array_equal(Y[mask], data[mask])
    assert f2_value(p, Y) == 0.0
    assert f2_value(p, Y + mask) == math.inf
    with pytest.raises(InputError):
        Completion(mask[:2], data)
    with pytest.raises(InputError):
        Completion(np.full((4, 5), 2.0), data)


def test_quadratic_prox_and_grad(rng):
    A = rng.standard_normal((3, 4))
    p = QuadraticFit(A)
    np.testing.assert_allclose(f2_prox(p, 0.7, A), A)
    g, L = f2_grad(p, A)
    assert np.all(g == 0) and L == 1.0
    D = rng.standard_normal((3, 4))
    np.testing.assert_allclose(f2_grad(p, A + D)[0], D, atol=1e-14)


def test_quadratic_gradient_finite_differences(rng):
    p = QuadraticFit(rng.standard_normal((3, 3)))
    X = rng.standard_normal((3, 3))
    g, _ = f2_grad(p, X)
    h = 1e-6
    fd = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        E = np.zeros_like(X)
        E[idx] = h
        fd[idx] = (f2_value(p, X + E) - f2_value(p, X - E)) / (2 * h)
    assert np.max(np.abs(fd - g) / np.maximum(np.abs(g), 1e-3)) <= 1e-6


def test_grad_rejects_nonsmooth():
    with pytest.raises(CapabilityError):
        f2_grad(HankelApprox(build_triangle_hankel(3)), np.zeros((3, 3)))
    with pytest.raises(InputError):
        f2_prox(ZeroTerm((2, 2)), 1.0, np.zeros((3, 3)))
    with pytest.raises(InputError):
        f2_prox(ZeroTerm((2, 2)), 0.0, np.zeros((2, 2)))


def test_objective_eval_examples(rng):
    H = hankel_from_sequence(0.5 ** np.arange(7))  # rank one
    p = HankelApprox(H)
    spec = ObjectiveSpec(r=1)
    nc, env = objective_eval(p, spec, H)
    assert nc == pytest.approx(0.0, abs=1e-12) and env == pytest.approx(0.0, abs=1e-12)

    M = np.outer(0.7 ** np.arange(4), 0.7 ** np.arange(4))  # rank-one Hankel
    nc, env = objective_eval(p, ObjectiveSpec(r=1), M)
    assert math.isfinite(nc) and nc == pytest.approx(env, rel=1e-12)
    M2 = hankel_project(rng.standard_normal((4, 4)))
    nc, env = objective_eval(p, ObjectiveSpec(r=1), M2)
    assert nc == math.inf and math.isfinite(env)
    assert objective_eval(p, spec, rng.standard_normal((4, 4)))[1] == math.inf


def test_lower_bound_examples():
    H = build_triangle_hankel(10)
    p = HankelApprox(H)
    cfg = SolverConfig()
    for r, positive_gap in ((2, False), (4, True)):
        spec = ObjectiveSpec(r=r)
        conv = solve_dr(p, spec, Relaxation.CONVEX, cfg)
        nonc = solve_dr(p, spec, Relaxation.NONCONVEX, cfg)
        lb = lower_bound(p, spec, conv.X)
        best = objective_eval(p, spec, nonc.X)[0]
        assert lb <= best + 1e-8
        if positive_gap:
            assert best - lb > 1e-6
        else:
            assert best - lb <= 1e-6
    spec = ObjectiveSpec(r=1)
    z = ZeroTerm((3, 3))
    conv = solve_dr(z, spec, Relaxation.CONVEX, SolverConfig(z0=np.ones((3, 3))))
    assert lower_bound(z, spec, conv.X) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(
    "problem",
    [
        HankelApprox(build_triangle_hankel(4)),
        Completion(np.eye(3, dtype=bool), np.diag([1.5, -2.0, 1e-17])),
        QuadraticFit(np.arange(6.0).reshape(2, 3) / 7),
        ZeroTerm((2, 5)),
    ],
)
def test_problem_file_round_trip(tmp_path, problem):
    path = tmp_path / "p.prob"
    write_problem(path, problem)
    back = read_problem(path)
    assert type(back) is type(problem) and tuple(back.shape) == tuple(problem.shape)
    for attr in ("H", "mask", "data", "A"):
        if hasattr(problem, attr):
            assert np.array_equal(getattr(back, attr), getattr(problem, attr))


def test_problem_file_generators():
    p = parse_problem("# triangle\nvariant hankel\ntriangle 3\n")
    np.testing.assert_array_equal(p.H, build_triangle_hankel(3))
    p = parse_problem("variant hankel\nsequence 1,2,3\n")
    np.testing.assert_array_equal(p.H, [[1, 2], [2, 3]])
    p = parse_problem("variant hankel\nsequence 1,1\nn 3\n")
    assert p.shape == (3, 3)
    for bad in ("variant nope\n", "variant hankel\n", "variant hankel\nmatrix H\n2 2\n1 2\n", "variant zero\nshape x\n"):
        with pytest.raises(InputError):
            parse_problem(bad)
    with pytest.raises(InputError):
        read_problem("/nonexistent/problem")
