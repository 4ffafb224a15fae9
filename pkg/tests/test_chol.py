import warnings

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from spg_scls import (ConfigError, DimensionMismatch, FactorPath, NotPositiveDefinite, NumericalWarning,
                      SolverConfig, compile_problem, generate, GenSpec)
from spg_scls.admm import solve, solve_admm
from spg_scls.chol import (choose_path, factorization_count, prepare, shifted_matrix, shifted_residual, solve_cd_admm,
                           solve_shifted)

from conftest import make_problem, random_problem


def test_zero_hessian_gives_identity_factor():
    ps = prepare(make_problem(np.zeros((2, 2)), np.zeros(2)), 2.0, FactorPath.DENSE)

    np.testing.assert_array_equal(ps.factor, np.eye(2))


def test_diagonal_factor():
    ps = prepare(make_problem(np.diag([3.0, 0.0]), np.zeros(2)), 2.0, FactorPath.DENSE)

    np.testing.assert_allclose(ps.factor, np.diag([2.0, 1.0]))
    np.testing.assert_allclose(ps.reconstruct(), np.diag([4.0, 1.0]))


@pytest.mark.parametrize("path", [FactorPath.DENSE, FactorPath.SPARSE])
def test_factor_reconstructs_shifted_matrix(path):
    prob = random_problem(50, 20, seed=6)
    ps = prepare(prob, 5.0, path)

    F = shifted_matrix(prob, 5.0)
    assert np.linalg.norm(ps.reconstruct() - F) / np.linalg.norm(F) <= 1e-10
    assert ps.path is path


def test_sparse_path_exposes_permutation():
    prob = random_problem(50, 20, seed=6)

    assert prepare(prob, 5.0, FactorPath.DENSE).permutation is None
    assert sorted(prepare(prob, 5.0, FactorPath.SPARSE).permutation) == list(range(prob.dim))


def test_solve_zero_right_hand_side():
    ps = prepare(random_problem(10, 4, seed=1), 5.0)

    np.testing.assert_array_equal(solve_shifted(ps, np.zeros(5)), np.zeros(5))


@pytest.mark.parametrize("path", [FactorPath.DENSE, FactorPath.SPARSE])
def test_solve_diagonal_system(path):
    ps = prepare(make_problem(np.diag([3.0, 0.0]), np.zeros(2)), 2.0, path)

    np.testing.assert_allclose(solve_shifted(ps, np.array([4.0, 1.0])), [1.0, 1.0])


@pytest.mark.parametrize("path", [FactorPath.DENSE, FactorPath.SPARSE])
def test_solve_matches_dense_reference(path, rng):
    prob = random_problem(80, 30, seed=8)
    ps = prepare(prob, 5.0, path)

    for _ in range(5):
        b = rng.standard_normal(prob.dim)
        x = solve_shifted(ps, b)
        reference = scipy.linalg.solve(shifted_matrix(prob, 5.0), b, assume_a="pos")

        np.testing.assert_allclose(x, reference, rtol=1e-10, atol=1e-10 * np.abs(reference).max())
        assert shifted_residual(prob, 5.0, b, x) <= 1e-9 * np.linalg.norm(b)


def test_solves_are_counted():
    ps = prepare(random_problem(10, 4, seed=1), 5.0)

    for _ in range(3):
        ps.solve_shifted(np.ones(5))

    assert ps.triangular_solves == 6


def test_solve_rejects_wrong_shape():
    ps = prepare(random_problem(10, 4, seed=1), 5.0)

    with pytest.raises(DimensionMismatch):
        ps.solve_shifted(np.ones(4))


def test_prepare_rejects_nonpositive_rho():
    with pytest.raises(ConfigError):
        prepare(make_problem(np.eye(2), np.zeros(2)), 0.0)


@pytest.mark.parametrize("path", [FactorPath.DENSE, FactorPath.SPARSE])
def test_prepare_detects_corrupted_hessian(path):
    corrupted = make_problem(-10 * np.eye(3), np.zeros(3))

    with pytest.raises(NotPositiveDefinite):
        prepare(corrupted, 2.0, path)


def test_auto_path_follows_density():
    sparse_h = make_problem(np.diag(np.arange(1.0, 101.0)), np.zeros(100))
    dense_h = random_problem(30, 10, seed=2)

    assert choose_path(sparse_h) is FactorPath.SPARSE
    assert choose_path(dense_h) is FactorPath.DENSE
    assert choose_path(dense_h, FactorPath.SPARSE) is FactorPath.SPARSE
    assert choose_path(sparse_h, threshold=0.005) is FactorPath.DENSE


def test_prepare_counts_factorizations():
    prob = random_problem(10, 4, seed=1)
    before = factorization_count()

    ps = prepare(prob, 5.0)

    assert factorization_count() == before + 1
    assert ps.factor_count == before + 1


def test_report_takes_factorizations_from_the_solver():
    prob = random_problem(10, 4, seed=1)
    cfg = SolverConfig(rho=5.0)
    ps = prepare(prob, cfg.rho, FactorPath.DENSE)

    assert ps.factorizations == 1
    assert solve(prob, cfg, ps).factorizations == 1

    ps.factorize(shifted_matrix(prob, cfg.rho))

    assert ps.factorizations == 2
    assert solve(prob, cfg, ps).factorizations == 2


def test_solve_takes_no_factorization_count():
    prob = random_problem(10, 4, seed=1)

    with pytest.raises(TypeError):
        solve(prob, SolverConfig(), prepare(prob, 5.0), factorizations=7)


def test_cd_admm_agrees_with_admm(toy):
    cfg = SolverConfig(rho=2.0, eps=1e-10)

    admm = solve(toy, cfg, prepare(toy, cfg.rho, FactorPath.DENSE))
    cd = solve_cd_admm(toy, cfg)

    assert cd.method == "cd-admm"
    assert cd.converged and admm.converged
    assert cd.objective == pytest.approx(admm.objective, rel=1e-12, abs=1e-12)


def test_one_factorization_per_run():
    prob = random_problem(60, 20, seed=4)
    cfg = SolverConfig(eps=1e-300, max_iters=200)
    before = factorization_count()

    with pytest.warns(NumericalWarning):
        report = solve_cd_admm(prob, cfg)

    assert report.iterations == 200
    assert report.factorizations == 1
    assert factorization_count() == before + 1
    assert report.triangular_solves == 400
    assert report.prepare_time <= report.solve_time


def test_sparse_path_matches_dense_path():
    data = generate(GenSpec(m=1500, n=400, density=1e-3, seed=2))
    prob = compile_problem(data)
    assert choose_path(prob) is FactorPath.SPARSE

    cfg = SolverConfig(eps=1e-300, max_iters=60)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalWarning)
        sparse = solve_cd_admm(prob, cfg.replace(path=FactorPath.SPARSE))
        dense = solve_cd_admm(prob, cfg.replace(path=FactorPath.DENSE))

    assert sparse.objective == pytest.approx(dense.objective, rel=1e-9)
    np.testing.assert_allclose(sparse.s_star, dense.s_star, atol=1e-8)
    assert sparse.factorizations == dense.factorizations == 1


def test_sparse_hessian_above_threshold():
    data = generate(GenSpec(m=300, n=60, density=0.02, seed=3))
    prob = compile_problem(data, dense_threshold=10)
    assert sp.issparse(prob.H)

    b = np.linspace(-1.0, 1.0, prob.dim)
    for path in (FactorPath.SPARSE, FactorPath.DENSE):
        x = prepare(prob, 5.0, path).solve_shifted(b)
        assert shifted_residual(prob, 5.0, b, x) <= 1e-10 * np.linalg.norm(b) * max(1.0, prob.norm_H)
