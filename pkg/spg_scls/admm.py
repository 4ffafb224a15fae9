"""ADMM over the consensus split ``min f(r) s.t. s = r, ||s|| = 1``.

Each iteration performs, in this order,

    r <- (H + rho/2 I)^-1 (-g + rho/2 (s + v))
    s <- (r - v) / ||r - v||
    v <- v + s - r

and stops once ``max(||s - r||, rho ||s_new - s_old||) <= eps``. The linear solve is delegated to a prepared
solver from :mod:`spg_scls.chol`; no inverse is ever formed.
"""

import dataclasses
import logging
import typing

import numpy as np

from . import FactorPath, InitPolicy, SclsProblem, SolverConfig
from .exceptions import (ConfigError, DegeneratePole, DescentViolation, NumericalWarning, SingularSystem,
                         ZeroDirection, issue_warning)
from .reformulate import recover, scls_objective
from .tools import Stopwatch

_log = logging.getLogger(__name__)

ZERO_DIRECTION_TOL = 1e-300
DESCENT_BURN_IN = 2
DESCENT_RTOL = 1e-9
LYAPUNOV_RHO_RATIO = 50.0


class LinearSolver(typing.Protocol):
    dim: int
    rho: float
    factorizations: int
    triangular_solves: int

    def solve_shifted(self, b: np.ndarray) -> np.ndarray: ...


@dataclasses.dataclass(frozen=True, eq=False)
class AdmmState:
    r: np.ndarray
    s: np.ndarray
    v: np.ndarray
    iter: int = 0
    r_pri: float = 0.0
    r_dual: float = 0.0


TraceRow = tuple[int, float, float, float]


@dataclasses.dataclass(eq=False)
class SolveReport:
    r_star: np.ndarray
    s_star: np.ndarray
    v_star: np.ndarray
    objective: float
    w_recovered: np.ndarray | None
    alpha_recovered: float | None
    iterations: int
    converged: bool
    r_pri: float
    r_dual: float
    kkt_residual: float
    factorizations: int
    triangular_solves: int
    solve_time: float
    prepare_time: float = 0.0
    method: str = "admm"
    residual_trace: list[TraceRow] | None = None
    states: list[AdmmState] | None = None

    @property
    def recoverable(self) -> bool:
        return self.w_recovered is not None

    @property
    def iterate_time(self) -> float:
        return self.solve_time - self.prepare_time


def init_state(prob: SclsProblem, cfg: SolverConfig) -> AdmmState:
    if cfg.init is InitPolicy.LAST_AXIS:
        s = np.zeros(prob.dim)
        s[-1] = 1.0
    else:
        s = np.random.default_rng(cfg.init_seed).standard_normal(prob.dim)
        s /= np.linalg.norm(s)

    return AdmmState(r=s.copy(), s=s, v=np.zeros(prob.dim))


def update_r(prob: SclsProblem, state: AdmmState, cfg: SolverConfig, lin_solver: LinearSolver) -> np.ndarray:
    if not cfg.rho > 0:
        raise SingularSystem(f"H + (rho/2) I is singular for rho = {cfg.rho!r}")
    if lin_solver.rho != cfg.rho:
        raise ConfigError(f"linear solver was prepared for rho = {lin_solver.rho}, config has rho = {cfg.rho}")

    return lin_solver.solve_shifted(-prob.g + (cfg.rho / 2) * (state.s + state.v))


def update_s(state: AdmmState, keep_on_tie: bool = False) -> np.ndarray:
    """Project ``r - v`` onto the unit sphere.

    If ``r - v`` vanishes every unit vector is optimal; with ``keep_on_tie`` the previous ``s`` is returned,
    otherwise :class:`ZeroDirection` is raised.
    """
    direction = state.r - state.v
    norm = np.linalg.norm(direction)

    if norm < ZERO_DIRECTION_TOL:
        if keep_on_tie:
            _log.info("r - v vanished at iteration %d; keeping the previous s", state.iter)
            return state.s

        raise ZeroDirection(f"r - v vanished at iteration {state.iter}")

    return direction / norm


def update_v(state: AdmmState) -> np.ndarray:
    return state.v + state.s - state.r


def augmented_lagrangian(prob: SclsProblem, r: np.ndarray, s: np.ndarray, v: np.ndarray, rho: float) -> float:
    """Scaled augmented Lagrangian ``f(r) + rho/2 ||s - r + v||^2 - rho/2 ||v||^2``."""
    gap = s - r + v
    return scls_objective(prob, r) + rho / 2 * float(gap @ gap) - rho / 2 * float(v @ v)


def lyapunov(prob: SclsProblem, states: typing.Sequence[AdmmState], rho: float, k: int) -> float:
    """``L(r^k, s^k, v^k) + rho/2 ||s^k - s^(k-1)||^2``, defined for ``k >= 1``."""
    cur, prev = states[k], states[k - 1]
    step = cur.s - prev.s

    return augmented_lagrangian(prob, cur.r, cur.s, cur.v, rho) + rho / 2 * float(step @ step)


def kkt_residual(prob: SclsProblem, s: np.ndarray, v: np.ndarray, rho: float) -> float:
    """``||2 H s + 2 g - rho v||_inf``; zero at a fixed point of the iteration."""
    return float(np.max(np.abs(2 * prob.hess_dot(s) + 2 * prob.g - rho * v)))


def assert_descent(prob: SclsProblem, cfg: SolverConfig, states: typing.Sequence[AdmmState],
                   burn_in: int = DESCENT_BURN_IN, rtol: float = DESCENT_RTOL,
                   lyapunov_ratio: float = LYAPUNOV_RHO_RATIO) -> None:
    """Check the dual-update identity at every step and Lyapunov monotonicity after ``burn_in`` iterations.

    ``states[0]`` is the initial state. The dual step adds exactly ``rho ||s - r||^2`` to the augmented
    Lagrangian, since ``v`` moves by ``d = s - r``. The identity holds for any ``rho``. Monotone descent is
    only guaranteed for a large penalty, so the Lyapunov check runs when ``rho >= lyapunov_ratio * ||H||``
    and is skipped otherwise.
    """
    rho = cfg.rho

    for k in range(1, len(states)):
        cur, prev = states[k], states[k - 1]

        before = augmented_lagrangian(prob, cur.r, cur.s, prev.v, rho)
        after = augmented_lagrangian(prob, cur.r, cur.s, cur.v, rho)
        d = cur.s - cur.r
        expected = rho * float(d @ d)

        if abs(after - before - expected) > rtol * (1 + abs(before) + abs(after)):
            raise DescentViolation(k, f"dual update changed the Lagrangian by {after - before:.6e}, "
                                      f"expected {expected:.6e}")

    if rho < lyapunov_ratio * prob.norm_H * (1 - rtol):
        _log.info("Lyapunov check skipped: rho=%g is below %g * ||H|| = %g",
                  rho, lyapunov_ratio, lyapunov_ratio * prob.norm_H)
        return

    for k in range(burn_in + 1, len(states) - 1):
        phi, phi_next = lyapunov(prob, states, rho, k), lyapunov(prob, states, rho, k + 1)

        if phi_next > phi + rtol * (1 + abs(phi)):
            raise DescentViolation(k + 1, f"Lyapunov value rose from {phi:.12e} to {phi_next:.12e}")


def solve(prob: SclsProblem, cfg: SolverConfig, lin_solver: LinearSolver, *, method: str = "admm",
          prepare_time: float = 0.0) -> SolveReport:
    if lin_solver.dim != prob.dim:
        raise ConfigError(f"linear solver has dimension {lin_solver.dim}, problem has {prob.dim}")

    state = init_state(prob, cfg)
    keep_states = cfg.record_states or cfg.check_theory

    trace: list[TraceRow] | None = [] if cfg.record_trace else None
    states: list[AdmmState] | None = [state] if keep_states else None

    solves_before = lin_solver.triangular_solves
    converged = False

    with Stopwatch() as watch:
        for k in range(1, cfg.max_iters + 1):
            r = update_r(prob, state, cfg, lin_solver)
            s = update_s(AdmmState(r, state.s, state.v, state.iter), keep_on_tie=True)
            v = update_v(AdmmState(r, s, state.v, state.iter))

            r_pri = float(np.linalg.norm(s - r))
            r_dual = cfg.rho * float(np.linalg.norm(s - state.s))

            state = AdmmState(r, s, v, k, r_pri, r_dual)

            if trace is not None:
                trace.append((k, r_pri, r_dual, scls_objective(prob, r)))
            if states is not None:
                states.append(state)

            _log.debug("iter %5d  r_pri %.3e  r_dual %.3e", k, r_pri, r_dual)

            if max(r_pri, r_dual) <= cfg.eps:
                converged = True
                break

    if cfg.check_theory:
        assert_descent(prob, cfg, states)

    try:
        point = recover(prob, state.s)
        w_recovered, alpha_recovered = point.w, point.alpha
    except DegeneratePole as e:
        issue_warning(NumericalWarning(f"solution is not recoverable as a learner model: {e}"))
        w_recovered, alpha_recovered = None, None

    report = SolveReport(
        r_star=state.r,
        s_star=state.s,
        v_star=state.v,
        objective=scls_objective(prob, state.r),
        w_recovered=w_recovered,
        alpha_recovered=alpha_recovered,
        iterations=state.iter,
        converged=converged,
        r_pri=state.r_pri,
        r_dual=state.r_dual,
        kkt_residual=kkt_residual(prob, state.s, state.v, cfg.rho),
        factorizations=lin_solver.factorizations,
        triangular_solves=lin_solver.triangular_solves - solves_before,
        solve_time=prepare_time + watch.elapsed,
        prepare_time=prepare_time,
        method=method,
        residual_trace=trace,
        states=states if cfg.record_states else None,
    )

    _log.info("%s: %d iterations, converged=%s, objective=%.12e, factorizations=%d",
              method, report.iterations, converged, report.objective, report.factorizations)

    if not converged:
        issue_warning(NumericalWarning(
            f"{method} stopped at max_iters={cfg.max_iters} with residuals "
            f"({state.r_pri:.3e}, {state.r_dual:.3e}) above eps={cfg.eps:.1e}"
        ))

    return report


def solve_admm(prob: SclsProblem, cfg: SolverConfig) -> SolveReport:
    """The standard variant: dense, unpermuted Cholesky factor regardless of the configured path."""
    with Stopwatch() as watch:
        lin_solver = prepare(prob, cfg.rho, FactorPath.DENSE)

    return solve(prob, cfg, lin_solver, method="admm", prepare_time=watch.elapsed)


from .chol import prepare
