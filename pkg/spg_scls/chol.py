"""One-time factorization of ``F = H + (rho/2) I`` and the two triangular solves per r-update."""

import logging
import threading

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import FactorPath, SclsProblem, SolverConfig
from .exceptions import ConfigError, DimensionMismatch, NotPositiveDefinite
from .tools import Stopwatch

_log = logging.getLogger(__name__)

TRIANGULAR_SOLVES_PER_CALL = 2

_factor_lock = threading.Lock()
_factor_count = 0


def factorization_count() -> int:
    """Number of factorizations built by :func:`prepare` in this process."""
    return _factor_count


def _count_factorization() -> int:
    global _factor_count

    with _factor_lock:
        _factor_count += 1
        return _factor_count


def choose_path(prob: SclsProblem, requested: FactorPath = FactorPath.AUTO, threshold: float = 0.05) -> FactorPath:
    if requested is not FactorPath.AUTO:
        return requested

    density = prob.nnz_H() / prob.dim ** 2
    return FactorPath.SPARSE if density < threshold else FactorPath.DENSE


class PreparedSolver:
    """Holds the factorization of ``H + (rho/2) I`` and counts the factorizations and triangular solves it performed.

    Dense path: upper Cholesky factor ``U`` with ``F = U^T U``.
    Sparse path: SuperLU factorization of ``F`` under a minimum-degree ordering of ``F^T + F``;
    diagonal pivoting keeps it a symmetric factorization ``Pr^T L U Pc^T``.
    """

    def __init__(self, path: FactorPath, dim: int, rho: float):
        self.path = path
        self.dim = dim
        self.rho = rho

        self.factorizations = 0
        self.factor_count: int | None = None

        self._upper: np.ndarray | None = None
        self._lu = None

        self._count_lock = threading.Lock()
        self._triangular_solves = 0

    def factorize(self, F):
        """Factor ``F = H + (rho/2) I`` along this solver's path, replacing any previous factor."""
        if self.path is FactorPath.DENSE:
            F = F.toarray() if sp.issparse(F) else F
            try:
                self._upper = scipy.linalg.cholesky(F, lower=False, check_finite=False)
            except np.linalg.LinAlgError as e:
                raise NotPositiveDefinite("H + (rho/2) I is not positive definite; H is corrupted") from e
        else:
            try:
                lu = splu(sp.csc_matrix(F), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                          options={"SymmetricMode": True})
            except RuntimeError as e:
                raise NotPositiveDefinite("sparse factorization of H + (rho/2) I failed") from e

            if not np.all(lu.U.diagonal() > 0):
                raise NotPositiveDefinite("H + (rho/2) I has a nonpositive pivot; H is corrupted")
            self._lu = lu

        self.factorizations += 1
        self.factor_count = _count_factorization()

    @property
    def triangular_solves(self) -> int:
        return self._triangular_solves

    @property
    def permutation(self) -> np.ndarray | None:
        """The fill-reducing column permutation of the sparse path."""
        return None if self._lu is None else self._lu.perm_c

    @property
    def factor(self):
        return self._upper if self.path is FactorPath.DENSE else self._lu

    def reconstruct(self) -> np.ndarray:
        if self.path is FactorPath.DENSE:
            return self._upper.T @ self._upper

        lu = self._lu
        Pr = sp.csc_matrix((np.ones(self.dim), (lu.perm_r, np.arange(self.dim))))
        Pc = sp.csc_matrix((np.ones(self.dim), (np.arange(self.dim), lu.perm_c)))

        return (Pr.T @ (lu.L @ lu.U) @ Pc.T).toarray()

    def solve_shifted(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if b.shape != (self.dim,):
            raise DimensionMismatch(f"right-hand side has shape {b.shape}, expected ({self.dim},)")

        if self.path is FactorPath.DENSE:
            # U^T y = b, then U x = y
            y = scipy.linalg.solve_triangular(self._upper, b, trans="T", lower=False, check_finite=False)
            x = scipy.linalg.solve_triangular(self._upper, y, lower=False, check_finite=False)
        else:
            # SuperLU applies the permutations around one forward and one back substitution
            x = self._lu.solve(b)

        with self._count_lock:
            self._triangular_solves += TRIANGULAR_SOLVES_PER_CALL

        return x

    def __repr__(self):
        return f"{self.__class__.__name__}(path={self.path.value}, dim={self.dim}, rho={self.rho})"


def shifted_matrix(prob: SclsProblem, rho: float):
    if prob.h_is_sparse:
        return (prob.H + (rho / 2) * sp.identity(prob.dim, format="csc")).tocsc()

    return prob.H + (rho / 2) * np.eye(prob.dim)


def shifted_residual(prob: SclsProblem, rho: float, b: np.ndarray, x: np.ndarray) -> float:
    """``||(H + (rho/2) I) x - b||`` without forming the shifted matrix."""
    return float(np.linalg.norm(prob.hess_dot(x) + (rho / 2) * x - b))


def prepare(prob: SclsProblem, rho: float, path: FactorPath = FactorPath.AUTO,
            sparse_density: float = 0.05) -> PreparedSolver:
    if not rho > 0:
        raise ConfigError(f"rho must be positive, got {rho!r}")

    solver = PreparedSolver(choose_path(prob, path, sparse_density), prob.dim, rho)
    solver.factorize(shifted_matrix(prob, rho))

    _log.debug("prepared %r", solver)

    return solver


def solve_shifted(ps: PreparedSolver, b: np.ndarray) -> np.ndarray:
    return ps.solve_shifted(b)


def solve_cd_admm(prob: SclsProblem, cfg: SolverConfig) -> "SolveReport":
    with Stopwatch() as watch:
        ps = prepare(prob, cfg.rho, cfg.path, cfg.sparse_density)

    return _admm_solve(prob, cfg, ps, method="cd-admm", prepare_time=watch.elapsed)


from .admm import solve as _admm_solve, SolveReport
