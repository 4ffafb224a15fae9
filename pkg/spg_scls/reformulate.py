"""Maps between the bilevel game, its quadratic-fractional form and the sphere-constrained form."""

import dataclasses

import numpy as np

from . import ProblemData, SclsProblem
from .exceptions import DegeneratePole, InfeasibleInput

FEASIBILITY_RTOL = 1e-6
POLE_TOL = 1e-9


@dataclasses.dataclass(frozen=True, eq=False)
class FractionalPoint:
    """A learner model ``w`` together with the auxiliary scalar ``alpha``; feasible when ``w.w = gamma alpha``."""

    w: np.ndarray
    alpha: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InfeasibleInput(f"alpha must be nonnegative, got {self.alpha!r}")

    @classmethod
    def from_model(cls, w: np.ndarray, gamma: float) -> "FractionalPoint":
        w = np.asarray(w, dtype=np.float64)
        return cls(w, float(w @ w) / gamma)

    def infeasibility(self, gamma: float) -> float:
        return abs(float(self.w @ self.w) - gamma * self.alpha)

    def is_feasible(self, gamma: float, rtol: float = 1e-8) -> bool:
        return self.infeasibility(gamma) <= rtol * max(1.0, gamma * self.alpha)


@dataclasses.dataclass(frozen=True, eq=False)
class SpherePoint:
    wt: np.ndarray
    at: float

    @property
    def r(self) -> np.ndarray:
        return np.append(self.wt, self.at)

    @classmethod
    def from_r(cls, r: np.ndarray) -> "SpherePoint":
        r = np.asarray(r, dtype=np.float64)
        return cls(r[:-1].copy(), float(r[-1]))

    def sphere_defect(self) -> float:
        return abs(float(self.wt @ self.wt) + self.at ** 2 - 1)

    def is_feasible(self, tol: float = 1e-10) -> bool:
        return self.sphere_defect() <= tol


def best_response(data: ProblemData, w: np.ndarray) -> np.ndarray:
    """Rows ``x_i + (z_i - w.x_i) / (gamma + w.w) w``: each minimizes ``(w.x - z_i)^2 + gamma ||x - x_i||^2``."""
    w = np.asarray(w, dtype=np.float64)
    X = data.dense_X()

    step = (data.z - X @ w) / (data.gamma + w @ w)

    return X + np.outer(step, w)


def leader_objective(data: ProblemData, w: np.ndarray) -> float:
    residual = best_response(data, w) @ w - data.y
    return float(residual @ residual)


def fractional_prediction(data: ProblemData, pt: FractionalPoint) -> np.ndarray:
    return (pt.alpha * data.z + np.asarray(data.X @ pt.w).ravel()) / (1 + pt.alpha)


def fractional_objective(data: ProblemData, pt: FractionalPoint) -> float:
    residual = fractional_prediction(data, pt) - data.y
    return float(residual @ residual)


def scls_objective(prob: SclsProblem, r: np.ndarray) -> float:
    r = np.asarray(r, dtype=np.float64)
    return float(r @ prob.hess_dot(r) + 2 * prob.g @ r + prob.p)


def to_sphere(pt: FractionalPoint, gamma: float) -> SpherePoint:
    if pt.infeasibility(gamma) > FEASIBILITY_RTOL * max(1.0, gamma * pt.alpha):
        raise InfeasibleInput(f"point violates w.w = gamma alpha by {pt.infeasibility(gamma):.3e}")

    alpha = pt.alpha
    wt = 2 * np.asarray(pt.w, dtype=np.float64) / (np.sqrt(gamma) * (1 + alpha))

    return SpherePoint(wt, (alpha - 1) / (alpha + 1))


def from_sphere(point: SpherePoint, gamma: float) -> FractionalPoint:
    if abs(1 - point.at) < POLE_TOL:
        raise DegeneratePole(f"alpha~ = {point.at!r} is at the pole; alpha is unbounded")

    if point.sphere_defect() > FEASIBILITY_RTOL:
        raise InfeasibleInput(f"point is off the unit sphere by {point.sphere_defect():.3e}")

    w = np.sqrt(gamma) * point.wt / (1 - point.at)
    alpha = (1 + point.at) / (1 - point.at)

    return FractionalPoint(w, max(alpha, 0.0))


def recover(prob: SclsProblem, r: np.ndarray) -> FractionalPoint:
    return from_sphere(SpherePoint.from_r(r), prob.gamma)
