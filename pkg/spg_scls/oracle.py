"""Independent global solver for ``min r.H.r + 2 g.r + p  s.t. ||r|| = 1`` (equality-constrained trust region).

A point is globally optimal iff some ``lam`` satisfies ``(H + lam I) r = -g`` with ``H + lam I`` PSD.
:func:`solve_trs` finds that ``lam`` from the secular equation in the eigenbasis of ``H``;
:func:`grid_search` is a brute-force cross-check for two and three dimensions.
"""

import dataclasses
import logging

import numpy as np
import scipy.linalg
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import SclsProblem
from .exceptions import (DimensionTooLarge, InfeasibleInput, NotGloballyCertified, NotStationary,
                         UnsupportedDimension)
from .reformulate import scls_objective
from .tools import unit

_log = logging.getLogger(__name__)

MAX_DIM = 2000
EIG_RTOL = 1e-12
HARD_CASE_RTOL = 1e-12
SECULAR_RTOL = 1e-14
SECULAR_MAXITER = 200
POLISH_STEPS = 20
SINGULAR_RTOL = 1e-10
GRID_NEIGHBOURS = 6
GRID_CANDIDATES = 8


@dataclasses.dataclass(frozen=True, eq=False)
class OracleSolution:
    r_star: np.ndarray
    objective: float
    multiplier: float
    hard_case: bool


def _spectrum(prob: SclsProblem) -> tuple[np.ndarray, np.ndarray]:
    return scipy.linalg.eigh(prob.dense_H)


def _secular_norm(eigvals: np.ndarray, gp: np.ndarray, lmin: float, shift: float) -> float:
    """``||(H + lam I)^-1 g||`` in the eigenbasis, with ``lam = shift - lmin``; zero components are skipped."""
    denom = eigvals - lmin + shift
    terms = np.divide(gp, denom, out=np.zeros_like(gp), where=gp != 0)
    return float(np.linalg.norm(terms))


def solve_trs(prob: SclsProblem) -> OracleSolution:
    if prob.dim > MAX_DIM:
        raise DimensionTooLarge(f"oracle handles dim <= {MAX_DIM}, got {prob.dim}")

    eigvals, Q = _spectrum(prob)
    gp = Q.T @ prob.g
    lmin = eigvals[0]
    scale = max(1.0, abs(eigvals[-1]))
    g_norm = float(np.linalg.norm(prob.g))

    bottom = eigvals - lmin <= EIG_RTOL * scale
    g_bottom = float(np.linalg.norm(gp[bottom]))
    rest = -gp[~bottom] / (eigvals[~bottom] - lmin)
    rest_norm = float(np.linalg.norm(rest))

    if g_bottom <= HARD_CASE_RTOL * max(1.0, g_norm) and rest_norm <= 1:
        # g has no weight on the bottom eigenspace: lam = -lmin, and a bottom eigenvector fills the norm deficit
        coeff = np.zeros(prob.dim)
        coeff[~bottom] = rest
        coeff[np.flatnonzero(bottom)[0]] = np.sqrt(max(0.0, 1 - rest_norm ** 2))
        multiplier = -lmin
        hard_case = True

        _log.info("oracle: hard case (|g_bottom| = %.3e, off-bottom norm %.6f)", g_bottom, rest_norm)
    else:
        def psi(shift: float) -> float:
            return 1 / _secular_norm(eigvals, gp, lmin, shift) - 1

        lo = g_bottom
        for _ in range(SECULAR_MAXITER):
            if psi(lo) <= 0 or lo == 0:
                break
            lo /= 2

        hi = max(g_norm, lo)
        if psi(lo) >= 0:
            shift = lo
        else:
            shift = brentq(psi, lo, hi, xtol=np.finfo(float).tiny, rtol=SECULAR_RTOL, maxiter=SECULAR_MAXITER)

        multiplier = shift - lmin
        coeff = -np.divide(gp, eigvals + multiplier, out=np.zeros_like(gp), where=gp != 0)
        hard_case = False

    r = unit(Q @ coeff)

    return OracleSolution(r_star=r, objective=scls_objective(prob, r), multiplier=float(multiplier),
                          hard_case=hard_case)


def _sphere_grid(dim: int, resolution: int) -> np.ndarray:
    if dim == 2:
        theta = 2 * np.pi * np.arange(resolution) / resolution
        return np.column_stack([np.cos(theta), np.sin(theta)])

    # spherical Fibonacci lattice
    i = np.arange(resolution) + 0.5
    z = 1 - 2 * i / resolution
    radius = np.sqrt(1 - z ** 2)
    phi = np.pi * (1 + np.sqrt(5)) * i

    return np.column_stack([radius * np.cos(phi), radius * np.sin(phi), z])


def _polish(prob: SclsProblem, r: np.ndarray, steps: int = POLISH_STEPS) -> np.ndarray:
    """Projected Newton refinement on the sphere with a monotone safeguard."""
    H = prob.dense_H
    f = scls_objective(prob, r)

    for _ in range(steps):
        half_grad = H @ r + prob.g
        lam = -float(r @ half_grad)
        tangent_grad = half_grad + lam * r

        if np.linalg.norm(tangent_grad) <= 1e-15 * max(1.0, np.linalg.norm(half_grad)):
            break

        basis = scipy.linalg.null_space(r[None, :])
        reduced = basis.T @ (H + lam * np.eye(prob.dim)) @ basis
        rhs = basis.T @ tangent_grad

        if np.all(np.linalg.eigvalsh(reduced) > 0):
            step = -basis @ np.linalg.solve(reduced, rhs)
        else:
            step = -tangent_grad / (2 * (prob.norm_H + abs(lam)) + 1)

        for _ in range(30):
            candidate = unit(r + step)
            f_candidate = scls_objective(prob, candidate)
            if f_candidate <= f:
                r, f = candidate, f_candidate
                break
            step /= 2
        else:
            break

    return r


def _grid_minima(points: np.ndarray, values: np.ndarray, dim: int) -> np.ndarray:
    """Indices of grid points no worse than their neighbours, best first."""
    if dim == 2:
        neighbours = np.column_stack([np.roll(np.arange(len(points)), 1), np.roll(np.arange(len(points)), -1)])
    else:
        neighbours = cKDTree(points).query(points, k=GRID_NEIGHBOURS + 1)[1][:, 1:]

    minima = np.flatnonzero(np.all(values[:, None] <= values[neighbours], axis=1))

    return minima[np.argsort(values[minima])][:GRID_CANDIDATES]


def grid_search(prob: SclsProblem, resolution: int = 4096) -> OracleSolution:
    if prob.dim not in (2, 3):
        raise UnsupportedDimension(f"grid search supports dim 2 and 3, got {prob.dim}")

    H = prob.dense_H
    points = _sphere_grid(prob.dim, resolution)
    values = np.einsum("ij,jk,ik->i", points, H, points) + 2 * points @ prob.g + prob.p

    # at most one non-global local minimizer exists; polish every grid basin and keep the best
    polished = [_polish(prob, points[i]) for i in _grid_minima(points, values, prob.dim)]
    r = min(polished, key=lambda candidate: scls_objective(prob, candidate))

    multiplier = -float(r @ (H @ r + prob.g))
    hard_case = abs(multiplier + prob.eigenvalues[0]) <= 1e-8 * max(1.0, prob.norm_H)

    return OracleSolution(r_star=r, objective=scls_objective(prob, r), multiplier=multiplier,
                          hard_case=bool(hard_case))


def smallest_eigenvalue(prob: SclsProblem) -> float:
    if prob.h_is_sparse and prob.dim > MAX_DIM:
        from scipy.sparse.linalg import eigsh

        return float(eigsh(prob.H, k=1, which="SA", return_eigenvectors=False)[0])

    return float(prob.eigenvalues[0])


def check_kkt(prob: SclsProblem, r: np.ndarray, tol: float) -> float:
    """Return the multiplier ``lam`` certifying ``r`` as a global minimizer, or raise.

    The PSD condition ``lmin(H) + lam >= -tol`` is measured relative to ``max(1, ||H||)``.
    """
    r = np.asarray(r, dtype=np.float64)
    if abs(np.linalg.norm(r) - 1) > tol:
        raise InfeasibleInput(f"r is off the unit sphere by {abs(np.linalg.norm(r) - 1):.3e}")

    half_grad = prob.hess_dot(r) + prob.g
    lam = -float(r @ half_grad)
    residual = float(np.linalg.norm(half_grad + lam * r))

    if residual > tol * (1 + np.linalg.norm(prob.g)):
        raise NotStationary(f"stationarity residual {residual:.3e} exceeds tolerance")

    curvature = smallest_eigenvalue(prob) + lam
    if curvature < -tol * max(1.0, prob.norm_H):
        raise NotGloballyCertified(f"H + lam I has eigenvalue {curvature:.3e}; r is a non-global KKT point", lam)

    return lam


def dual_view(prob: SclsProblem, r: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """The consensus dual ``u = grad f(r) = 2 H r + 2 g`` and sphere multiplier ``nu``.

    From ``s = -u / (2 nu)`` and ``(H + lam I) r = -g`` one gets ``nu = lam``.
    """
    return 2 * prob.hess_dot(r) + 2 * prob.g, lam


def dual_value(prob: SclsProblem, u: np.ndarray, nu: float) -> float:
    """``p - g.H^-1 g + u.H^-1 g - u.H^-1 u / 4 - u.u / (4 nu) - nu`` (requires nonsingular ``H``)."""
    a = u / 2 - prob.g
    x = scipy.linalg.solve(prob.dense_H, a, assume_a="pos")

    return float(prob.p - a @ x - (u @ u) / (4 * nu) - nu)


def duality_gap(prob: SclsProblem, sol: OracleSolution) -> float | None:
    """Relative gap between the dual value at the solution's multipliers and its objective.

    Returns ``None`` when the dual function is undefined (singular ``H`` or a zero multiplier).
    """
    lmin = smallest_eigenvalue(prob)
    if lmin < SINGULAR_RTOL * max(1.0, prob.norm_H):
        _log.info("duality-gap check skipped: H is singular to working precision (lmin = %.3e)", lmin)
        return None

    if abs(sol.multiplier) <= SINGULAR_RTOL * max(1.0, prob.norm_H):
        _log.info("duality-gap check skipped: sphere multiplier is zero")
        return None

    u, nu = dual_view(prob, sol.r_star, sol.multiplier)
    dual = dual_value(prob, u, nu)

    return abs(dual - sol.objective) / max(1.0, abs(sol.objective))
