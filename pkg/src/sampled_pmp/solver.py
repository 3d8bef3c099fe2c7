"""Indirect shooting for optimal sampled-data control.

The outer loop is a damped Newton iteration on the unknown initial adjoint
(plus the initial state for periodic problems and the final time when it is
free).  Each residual evaluation propagates the coupled state/adjoint system
forward interval by interval; on every interval the frozen control solves
the averaged-gradient variational inequality by a projected fixed-point
iteration, re-integrating the interval at each trial control so that the
implicit dependence of the arc on the control is resolved exactly.

The shooting map is piecewise smooth: it kinks where a control changes
saturation status and, for free final times, where the horizon crosses a
multiple of the sampling period.  The backtracking line search absorbs the
first kind; the second is handled by nudging the horizon off the multiple
and restarting the Jacobian (see ``SolverConfig.max_kink_restarts``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .certificate import Certificate, check_certificate
from .errors import (IntegrationBlowUp, InternalInconsistency, NonConvergence,
                     UnsupportedCase)
from .problem import (ControlSequence, FixedEndpoints, FixedInitialFreeFinal,
                      FreeTime, GeneralTerminal, Periodic, ProblemDefinition,
                      SamplingGrid, build_grid, final_control_index, GRID_SNAP)
from .simulate import (DEFAULT_SUBSTEPS, Extremal, _rk4, _simpson,
                       integrate_extremal_forward)


@dataclass(frozen=True)
class SolverConfig:
    """Tunable constants of the inner and outer iterations (all positive)."""

    inner_step: Optional[float] = None    # projected-ascent step; None = 1/(2 L)
    inner_tol: float = 1e-12
    inner_max_iter: int = 200
    newton_tol: float = 1e-10
    newton_max_iter: int = 100
    fd_step: float = 1e-6                 # scaled by (1 + |unknowns|)
    max_halvings: int = 30
    substeps: int = 16
    use_broyden: bool = False
    max_kink_restarts: int = 3

    def __post_init__(self):
        for name in ("inner_tol", "inner_max_iter", "newton_tol",
                     "newton_max_iter", "fd_step", "max_halvings", "substeps",
                     "max_kink_restarts"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.inner_step is not None and self.inner_step <= 0:
            raise ValueError("inner_step must be positive")
        if self.substeps % 2 != 0:
            raise ValueError("substeps must be even")


@dataclass(frozen=True)
class ShootingUnknowns:
    """Unknowns of the square shooting system.

    Always the initial adjoint; additionally the initial state for periodic
    problems and the final time when it is free.
    """

    p_init: np.ndarray
    q_init: Optional[np.ndarray] = None
    t_f: Optional[float] = None

    def pack(self) -> np.ndarray:
        parts = [np.asarray(self.p_init, dtype=float)]
        if self.q_init is not None:
            parts.append(np.asarray(self.q_init, dtype=float))
        if self.t_f is not None:
            parts.append(np.array([self.t_f]))
        return np.concatenate(parts)


def _unknown_layout(problem: ProblemDefinition):
    """(has_q0, has_tf, total unknown dimension) for the problem's variant."""
    if isinstance(problem.terminal, GeneralTerminal):
        raise UnsupportedCase("shooting supports the three canonical terminal "
                              "variants; general terminal data is check-only")
    has_q0 = isinstance(problem.terminal, Periodic)
    has_tf = isinstance(problem.final_time, FreeTime)
    dim = problem.n * (2 if has_q0 else 1) + (1 if has_tf else 0)
    return has_q0, has_tf, dim


def _unpack(problem: ProblemDefinition, x: np.ndarray) -> ShootingUnknowns:
    n = problem.n
    has_q0, has_tf, dim = _unknown_layout(problem)
    if x.shape != (dim,):
        raise ValueError(f"unknown vector must have shape ({dim},), got {x.shape}")
    p_init = x[:n]
    q_init = x[n:2 * n] if has_q0 else None
    t_f = float(x[-1]) if has_tf else None
    return ShootingUnknowns(p_init=p_init, q_init=q_init, t_f=t_f)


# ---------------------------------------------------------------------------
# inner solve: one interval's control from the averaged-gradient condition
# ---------------------------------------------------------------------------

def _interval_average_gradient(problem, t_k, delta, q_k, p_k, p0, u, substeps):
    """Average of dH/du over one interval, re-integrating the coupled arc at u."""
    n = problem.n

    def rhs(t, zz):
        qq, pp = zz[:n], zz[n:]
        dq = np.asarray(problem.f(t, qq, u), dtype=float)
        dp = -problem.hamiltonian_q(t, qq, pp, p0, u)
        return np.concatenate([dq, dp])

    z0 = np.concatenate([q_k, p_k])
    times, nodes = _rk4(rhs, t_k, delta, z0, substeps)
    vals = np.array([problem.hamiltonian_u(times[i], nodes[i, :n], nodes[i, n:],
                                           p0, u)
                     for i in range(len(times))])
    gbar = _simpson(vals, delta / substeps) / delta
    return gbar, nodes[-1]


def estimate_inner_step(problem, t_k, delta, q_k, p_k, p0,
                        substeps=DEFAULT_SUBSTEPS, probe=1e-4) -> float:
    """Step size 1/(2 L) from a finite-difference Lipschitz estimate of the
    averaged gradient in the control (guaranteed contraction for strongly
    concave quadratic-in-u Hamiltonians)."""
    m = problem.m
    u0 = problem.control_set.project(np.zeros(m))
    g0, _ = _interval_average_gradient(problem, t_k, delta, q_k, p_k, p0, u0,
                                       substeps)
    cols = []
    for i in range(m):
        e = np.zeros(m); e[i] = probe
        gi, _ = _interval_average_gradient(problem, t_k, delta, q_k, p_k, p0,
                                           u0 + e, substeps)
        cols.append((gi - g0) / probe)
    lip = float(np.linalg.norm(np.column_stack(cols), 2))
    if lip < 1e-8:
        return 1.0
    return 1.0 / (2.0 * lip)


def solve_interval_control(problem: ProblemDefinition, t_k: float, delta: float,
                           q_k: np.ndarray, p_k: np.ndarray, p0: float,
                           u_init: np.ndarray, config: SolverConfig,
                           callback=None) -> np.ndarray:
    """Control value satisfying the interval's variational inequality.

    Runs the projected fixed point u <- project(u + alpha * Gbar(u)), where
    Gbar re-integrates the interval arc at the trial control, until the
    fixed-point residual falls below the inner tolerance.

    ``callback(u, gbar)`` is invoked once per iterate when given; used by
    diagnostics and the monotonicity tests.
    """
    q_k = np.asarray(q_k, dtype=float)
    p_k = np.asarray(p_k, dtype=float)
    u = problem.control_set.project(np.atleast_1d(np.asarray(u_init, dtype=float)))
    alpha = config.inner_step
    if alpha is None:
        alpha = estimate_inner_step(problem, t_k, delta, q_k, p_k, p0,
                                    config.substeps)
    res = np.inf
    for _ in range(config.inner_max_iter):
        gbar, _ = _interval_average_gradient(problem, t_k, delta, q_k, p_k,
                                             p0, u, config.substeps)
        if callback is not None:
            callback(u.copy(), gbar.copy())
        u_next = problem.control_set.project(u + alpha * gbar)
        res = float(np.linalg.norm(u_next - u))
        u = u_next
        if res <= config.inner_tol:
            return u
    raise NonConvergence(
        f"interval control fixed point stalled at residual {res:.3e}",
        iterate=u, residual_norm=res)


# ---------------------------------------------------------------------------
# forward propagation with inner solves, and the shooting residual
# ---------------------------------------------------------------------------

def _propagate(problem: ProblemDefinition, grid: SamplingGrid,
               unknowns: ShootingUnknowns, config: SolverConfig,
               initial_controls=None):
    """Integrate the extremal forward, solving each interval's control.

    Returns (residual_vector, controls, extremal).  Controls are warm-started
    from the previous interval (the first from ``initial_controls[0]`` or the
    projected origin).
    """
    n = problem.n
    if isinstance(problem.terminal, Periodic):
        q = np.asarray(unknowns.q_init, dtype=float)
    else:
        q = problem.initial_state()
    p = np.asarray(unknowns.p_init, dtype=float)
    p0 = -1.0

    if unknowns.t_f is not None:
        if unknowns.t_f <= 0:
            raise IntegrationBlowUp(0.0, "trial final time is nonpositive")
        grid = build_grid(unknowns.t_f, grid.period)

    if initial_controls is not None:
        u_prev = np.atleast_1d(np.asarray(initial_controls, dtype=float))
        if u_prev.ndim == 2:
            u_prev = u_prev[0]
    else:
        u_prev = np.zeros(problem.m)

    us = []
    for k in range(grid.n_intervals):
        try:
            u_k = solve_interval_control(
                problem, float(grid.times[k]), float(grid.lengths[k]), q, p,
                p0, u_prev, config)
        except NonConvergence as exc:
            exc.interval = k
            raise
        us.append(u_k)
        _, z_end = _interval_average_gradient(problem, float(grid.times[k]),
                                              float(grid.lengths[k]), q, p,
                                              p0, u_k, config.substeps)
        q, p = z_end[:n], z_end[n:]
        u_prev = u_k

    controls = ControlSequence(np.vstack(us))
    extremal = integrate_extremal_forward(problem, grid, controls,
                                          _initial_state(problem, unknowns),
                                          unknowns.p_init, p0, config.substeps)

    parts = []
    q_start = extremal.trajectory.initial_state
    q_end = extremal.trajectory.final_state
    p_start = extremal.adjoint.initial
    p_end = extremal.adjoint.final
    term = problem.terminal
    if isinstance(term, FixedEndpoints):
        parts.append(q_end - term.qf)
    elif isinstance(term, Periodic):
        parts.append(q_end - q_start)
        parts.append(p_end - p_start)
    elif isinstance(term, FixedInitialFreeFinal):
        parts.append(p_end)
    if unknowns.t_f is not None:
        k_f = final_control_index(grid.t_f, grid.period)
        k_f_h = problem.hamiltonian(grid.t_f, q_end, p_end, p0, controls[k_f])
        parts.append(np.array([k_f_h]))
    return np.concatenate(parts), controls, extremal


def _initial_state(problem, unknowns):
    if isinstance(problem.terminal, Periodic):
        return np.asarray(unknowns.q_init, dtype=float)
    return problem.initial_state()


def shooting_residual(problem: ProblemDefinition, grid: SamplingGrid,
                      unknowns, config: Optional[SolverConfig] = None,
                      initial_controls=None) -> np.ndarray:
    """Residual of the shooting system at the given unknowns.

    Terminal-constraint violation, concatenated with the transversality
    components of the variant and the terminal Hamiltonian value for free
    final times.  ``unknowns`` may be a ShootingUnknowns or a packed vector.
    """
    config = config or SolverConfig()
    if not isinstance(unknowns, ShootingUnknowns):
        unknowns = _unpack(problem, np.asarray(unknowns, dtype=float))
    r, _, _ = _propagate(problem, grid, unknowns, config, initial_controls)
    return r


# ---------------------------------------------------------------------------
# outer Newton iteration
# ---------------------------------------------------------------------------

def _default_guess(problem: ProblemDefinition, grid: SamplingGrid) -> np.ndarray:
    has_q0, has_tf, dim = _unknown_layout(problem)
    x = np.zeros(dim)
    if has_tf:
        x[-1] = problem.final_time.t_f_guess
    return x


def _active_set_signature(problem, controls: ControlSequence) -> str:
    """One symbol per control component per interval: -, 0 or + saturation.

    Ball sets get B for a boundary point and 0 otherwise.  Newton failure
    reports carry this per iteration because saturation flips are exactly
    where the piecewise-affine shooting map kinks.
    """
    cs = problem.control_set
    syms = []
    for k in range(len(controls)):
        u = controls[k]
        if hasattr(cs, "lower"):
            for i in range(len(u)):
                if abs(u[i] - cs.lower[i]) <= 1e-9:
                    syms.append("-")
                elif abs(u[i] - cs.upper[i]) <= 1e-9:
                    syms.append("+")
                else:
                    syms.append("0")
        else:
            on_boundary = np.linalg.norm(u - cs.center) >= cs.radius - 1e-9
            syms.append("B" if on_boundary else "0")
    return "".join(syms)


def _near_period_multiple(t_f: float, T: float) -> bool:
    r = t_f / T
    return abs(r - round(r)) <= GRID_SNAP and round(r) >= 1


def solve(problem: ProblemDefinition, grid: SamplingGrid,
          initial_unknowns=None, config: Optional[SolverConfig] = None,
          initial_controls=None, stats: Optional[dict] = None):
    """Solve the sampled-data problem by indirect shooting.

    Damped Newton with a forward-difference Jacobian (optionally Broyden
    updates between refreshes) and backtracking on the residual norm.  On
    success returns ``(Extremal, Certificate)`` with the cost multiplier
    normalized to -1 and a passing certificate; a certificate failure after
    convergence raises InternalInconsistency.

    ``initial_unknowns`` may be a ShootingUnknowns, a packed vector, or None
    for the generic origin guess (which gets a regularized first step).
    When a ``stats`` dict is supplied it receives the iteration count, the
    final residual norm, the per-iteration history and the solved unknowns.
    """
    config = config or SolverConfig()
    has_q0, has_tf, dim = _unknown_layout(problem)

    generic_guess = initial_unknowns is None
    if generic_guess:
        x = _default_guess(problem, grid)
    elif isinstance(initial_unknowns, ShootingUnknowns):
        x = initial_unknowns.pack()
    else:
        x = np.asarray(initial_unknowns, dtype=float).copy()
    if x.shape != (dim,):
        raise ValueError(f"initial unknowns must have dimension {dim}")

    if config.inner_step is None:
        u0 = _unpack(problem, x)
        q_probe = (np.asarray(u0.q_init) if has_q0 else problem.initial_state())
        alpha = estimate_inner_step(problem, float(grid.times[0]),
                                    float(grid.lengths[0]), q_probe, u0.p_init,
                                    -1.0, config.substeps)
        config = dataclasses.replace(config, inner_step=alpha)

    def residual(vec):
        return _propagate(problem, grid, _unpack(problem, vec), config,
                          initial_controls)

    history = []
    r, controls, extremal = residual(x)
    rnorm = float(np.linalg.norm(r))
    best = (rnorm, x.copy())
    J = None
    J_fresh = False
    kink_restarts = 0

    for iteration in range(config.newton_max_iter):
        history.append({
            "iteration": iteration,
            "residual_norm": rnorm,
            "active_set": _active_set_signature(problem, controls),
            **({"t_f": float(x[-1])} if has_tf else {}),
        })
        if rnorm <= config.newton_tol:
            cert = check_certificate(problem, extremal)
            if not cert.passed:
                raise InternalInconsistency(
                    "converged shooting produced a failing certificate: "
                    + "; ".join(cert.violations))
            if stats is not None:
                stats.update(iterations=iteration, residual_norm=rnorm,
                             history=history, unknowns=x.tolist())
            return extremal, cert

        if J is None or not config.use_broyden:
            J = _fd_jacobian(residual, x, r, config)
            J_fresh = True

        step = _newton_step(J, r, regularize=(generic_guess and iteration == 0))
        found = _search_decrease(residual, x, rnorm, step, config)
        if found is None and config.use_broyden and not J_fresh:
            # stale Broyden Jacobian: refresh once, then retry the step
            J = _fd_jacobian(residual, x, r, config)
            J_fresh = True
            step = _newton_step(J, r, regularize=False)
            found = _search_decrease(residual, x, rnorm, step, config)
        if found is None:
            for mu in FALLBACK_DAMPINGS:
                found = _search_decrease(residual, x, rnorm,
                                         _damped_step(J, r, mu), config)
                if found is not None:
                    break
        if found is None:
            raise NonConvergence(
                f"no step direction decreased the residual (at {rnorm:.3e})",
                iterate=best[1], residual_norm=best[0], history=history)
        x_new, r_new, rn_new, controls, extremal = found
        if config.use_broyden:
            dx = x_new - x
            dr = r_new - r
            J = J + np.outer((dr - J @ dx) / (dx @ dx), dx)
            J_fresh = False
        x, r, rnorm = x_new, r_new, rn_new

        if rnorm < best[0]:
            best = (rnorm, x.copy())

        # free-time kink: an iterate on a period multiple straddles the k_f
        # discontinuity; nudge just below it and refresh the Jacobian
        if (has_tf and rnorm > config.newton_tol
                and _near_period_multiple(x[-1], grid.period)
                and kink_restarts < config.max_kink_restarts):
            kink_restarts += 1
            x = x.copy()
            x[-1] -= 1e-8 * grid.period
            r, controls, extremal = residual(x)
            rnorm = float(np.linalg.norm(r))
            J = None

    raise NonConvergence(
        f"Newton did not reach tolerance {config.newton_tol:.1e} in "
        f"{config.newton_max_iter} iterations (best residual {best[0]:.3e})",
        iterate=best[1], residual_norm=best[0], history=history)


def _search_decrease(residual, x, rnorm, step, config: SolverConfig):
    """Backtrack along ``step`` until the residual norm decreases.

    Integration failures on a trial point count as rejected trials.  Returns
    (x, r, rnorm, controls, extremal) or None when no scale helped.
    """
    scale = 1.0
    for _ in range(config.max_halvings):
        x_try = x + scale * step
        try:
            r_try, c_try, e_try = residual(x_try)
        except (IntegrationBlowUp, NonConvergence):
            scale *= 0.5
            continue
        rn_try = float(np.linalg.norm(r_try))
        if rn_try < rnorm:
            return x_try, r_try, rn_try, c_try, e_try
        scale *= 0.5
    return None


def _fd_jacobian(residual, x, r, config: SolverConfig) -> np.ndarray:
    h = config.fd_step * (1.0 + float(np.linalg.norm(x)))
    J = np.empty((r.size, x.size))
    for i in range(x.size):
        e = np.zeros(x.size); e[i] = h
        r_i, _, _ = residual(x + e)
        J[:, i] = (r_i - r) / h
    return J


def _newton_step(J: np.ndarray, r: np.ndarray, regularize: bool) -> np.ndarray:
    if not regularize:
        try:
            step = np.linalg.solve(J, -r)
            if np.all(np.isfinite(step)) and np.linalg.norm(step) <= 1e8 * (1 + np.linalg.norm(r)):
                return step
        except np.linalg.LinAlgError:
            pass
    return _damped_step(J, r, 1e-10)


def _damped_step(J: np.ndarray, r: np.ndarray, mu_rel: float) -> np.ndarray:
    mu = mu_rel * (1.0 + float(np.trace(J.T @ J)) / J.shape[1])
    return np.linalg.solve(J.T @ J + mu * np.eye(J.shape[1]), -J.T @ r)


# Escalating Levenberg damping tried when the plain Newton direction finds no
# decrease.  Where the shooting map kinks (a control changing saturation
# status between the FD probes), the one-sided Jacobian can mix regions and
# point uphill; heavy damping rotates the step toward steepest descent of
# |r|^2, which is region-independent.
FALLBACK_DAMPINGS = (1e-6, 1e-3, 1.0, 1e3)
