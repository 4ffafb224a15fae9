import dataclasses

import numpy as np
import pytest

from spg_scls import GenSpec, SclsProblem, compile_problem, generate


def make_problem(H, g, p: float = 0.0, gamma: float = 1.0) -> SclsProblem:
    """An SCLS problem straight from ``(H, g, p)``; ``Lhat`` is the symmetric square root of ``H``."""
    g = np.asarray(g, dtype=np.float64)

    if isinstance(H, np.ndarray):
        H = np.asarray(H, dtype=np.float64)
        eigvals, Q = np.linalg.eigh(H)
        Lhat = (Q * np.sqrt(np.clip(eigvals, 0, None))) @ Q.T
        target = np.linalg.lstsq(Lhat.T, -g, rcond=None)[0]
    else:
        Lhat, target = None, None

    return SclsProblem(Lhat=Lhat, H=H, g=g, p=float(p), gamma=gamma, target=target)


def random_problem(m: int, n: int, seed: int, **spec) -> SclsProblem:
    return compile_problem(generate(GenSpec(m=m, n=n, seed=seed, **spec)))


def scaled(prob: SclsProblem, rho: float, ratio: float = 50.0) -> SclsProblem:
    """The same minimizer with ``f`` rescaled so that ``||H|| = rho / ratio``."""
    c = rho / ratio / prob.norm_H
    root = np.sqrt(c)

    return dataclasses.replace(
        prob,
        Lhat=prob.Lhat * root,
        H=prob.H * c,
        g=prob.g * c,
        p=prob.p * c,
        target=prob.target * root,
    )


@pytest.fixture
def toy() -> SclsProblem:
    """``f(r) = ||r||^2 - 4 r_1 + 4``; on the sphere ``5 - 4 r_1``, minimized at ``e_1`` with value 1."""
    return make_problem(np.eye(3), [-2.0, 0.0, 0.0], p=4.0)


@pytest.fixture
def diag() -> SclsProblem:
    return make_problem(np.diag([1.0, 2.0, 3.0]), np.zeros(3))


@pytest.fixture
def one_by_one_data():
    from spg_scls import ProblemData

    return ProblemData(X=np.array([[1.0]]), y=np.array([1.0]), z=np.array([0.0]), gamma=4.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
