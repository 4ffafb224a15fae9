import dataclasses
import enum
import functools
import logging
import typing

import numpy as np
import scipy.sparse as sp

from .exceptions import ConfigError, DimensionMismatch, NonFiniteEntry, NonPositiveGamma

_log = logging.getLogger(__name__)

Matrix = typing.Union[np.ndarray, sp.spmatrix, sp.sparray]

DEFAULT_DENSE_THRESHOLD = 4096


def _finite(matrix: Matrix) -> bool:
    if sp.issparse(matrix):
        return bool(np.all(np.isfinite(matrix.data)))

    return bool(np.all(np.isfinite(matrix)))


@dataclasses.dataclass(frozen=True, eq=False)
class ProblemData:
    """A game instance: features ``X`` (m x n), true labels ``y``, provider targets ``z`` and the
    manipulation weight ``gamma``. ``X`` may be dense or a scipy sparse matrix."""

    X: Matrix
    y: np.ndarray
    z: np.ndarray
    gamma: float

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.X)

    def dense_X(self) -> np.ndarray:
        return self.X.toarray() if self.is_sparse else np.asarray(self.X)


def validate(data: ProblemData) -> None:
    if data.X.ndim != 2:
        raise DimensionMismatch(f"X must be a matrix, got {data.X.ndim} dimensions")

    m, n = data.X.shape
    if m < 1 or n < 1:
        raise DimensionMismatch(f"X must have at least one row and one column, got {m}x{n}")

    for name, vector in (("y", data.y), ("z", data.z)):
        if np.ndim(vector) != 1 or len(vector) != m:
            raise DimensionMismatch(f"{name} has shape {np.shape(vector)}, expected ({m},) to match X")

    if not data.gamma > 0:
        raise NonPositiveGamma(f"gamma must be positive, got {data.gamma!r}")

    for name, value in (("X", data.X), ("y", data.y), ("z", data.z)):
        if not _finite(value):
            raise NonFiniteEntry(f"{name} contains NaN or infinite entries")

    if not np.isfinite(data.gamma):
        raise NonFiniteEntry(f"gamma is not finite: {data.gamma!r}")


@dataclasses.dataclass(frozen=True, eq=False)
class SclsProblem:
    """The compact quadratic ``f(r) = r.H.r + 2 g.r + p = ||Lhat r - (y - z/2)||^2`` on the unit sphere.

    ``Lhat`` is ``[sqrt(gamma)/2 X, z/2]``; ``H`` is dense up to the dense threshold and a CSC matrix above it.
    """

    Lhat: Matrix
    H: Matrix
    g: np.ndarray
    p: float
    gamma: float
    target: np.ndarray  # y - z/2

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.dim - 1

    @property
    def h_is_sparse(self) -> bool:
        return sp.issparse(self.H)

    @functools.cached_property
    def dense_H(self) -> np.ndarray:
        return self.H.toarray() if self.h_is_sparse else self.H

    @functools.cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.dense_H)

    @functools.cached_property
    def norm_H(self) -> float:
        """Spectral norm of ``H`` (its largest eigenvalue, since ``H`` is PSD)."""
        if self.h_is_sparse and self.dim > 200:
            from scipy.sparse.linalg import eigsh

            return float(abs(eigsh(self.H, k=1, which="LA", return_eigenvectors=False)[0]))

        return float(max(self.eigenvalues[-1], 0.0))

    def nnz_H(self) -> int:
        return self.H.nnz if self.h_is_sparse else int(np.count_nonzero(self.H))

    def hess_dot(self, r: np.ndarray) -> np.ndarray:
        return np.asarray(self.H @ r).ravel()


def compile_problem(data: ProblemData, dense_threshold: int = DEFAULT_DENSE_THRESHOLD) -> SclsProblem:
    validate(data)

    half_z = np.asarray(data.z, dtype=np.float64) / 2
    scale = np.sqrt(data.gamma) / 2

    if data.is_sparse:
        Lhat = sp.hstack([data.X.astype(np.float64) * scale, sp.csr_matrix(half_z[:, None])], format="csr")
    else:
        Lhat = np.hstack([np.asarray(data.X, dtype=np.float64) * scale, half_z[:, None]])

    H = Lhat.T @ Lhat
    dim = data.n + 1
    if dim <= dense_threshold:
        if sp.issparse(H):
            H = H.toarray()
        H = (H + H.T) / 2
    else:
        if not sp.issparse(H):
            H = sp.csc_matrix(H)
        H = ((H + H.T) / 2).tocsc()

    target = np.asarray(data.y, dtype=np.float64) - half_z
    c = -target
    g = np.asarray(Lhat.T @ c).ravel()
    p = float(c @ c)

    _log.debug("compiled SCLS problem: m=%d dim=%d sparse_H=%s", data.m, dim, sp.issparse(H))

    return SclsProblem(Lhat=Lhat, H=H, g=g, p=p, gamma=float(data.gamma), target=target)


class InitPolicy(enum.Enum):
    LAST_AXIS = "last-axis"
    RANDOM_UNIT = "random-unit"


class FactorPath(enum.Enum):
    DENSE = "dense"
    SPARSE = "sparse"
    AUTO = "auto"


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    rho: float = 5.0
    eps: float = 1e-8
    max_iters: int = 10_000
    init: InitPolicy = InitPolicy.LAST_AXIS
    init_seed: int = 0
    record_trace: bool = False
    record_states: bool = False
    check_theory: bool = False
    path: FactorPath = FactorPath.AUTO
    sparse_density: float = 0.05

    def __post_init__(self):
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho!r}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not 0 < self.sparse_density <= 1:
            raise ConfigError(f"sparse_density must be in (0, 1], got {self.sparse_density!r}")

        # accept the string spellings used on the command line
        if not isinstance(self.init, InitPolicy):
            object.__setattr__(self, "init", InitPolicy(self.init))
        if not isinstance(self.path, FactorPath):
            object.__setattr__(self, "path", FactorPath(self.path))

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


from .exceptions import *
from . import tools
from .reformulate import (FractionalPoint, SpherePoint, best_response, fractional_objective, scls_objective,
                          to_sphere, from_sphere, leader_objective, recover)
from .chol import PreparedSolver, prepare, solve_shifted, solve_cd_admm
from .admm import AdmmState, SolveReport, init_state, update_r, update_s, update_v, solve, assert_descent
from .oracle import OracleSolution, solve_trs, grid_search, check_kkt
from .data import GenSpec, Scenario, CsvSchema, generate, generate_planted, load_csv, load_sparse
