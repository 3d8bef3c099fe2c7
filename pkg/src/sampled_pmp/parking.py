"""Minimum-energy parking of a double integrator, permanent and sampled.

A car at position M > 0 with zero velocity must reach the origin at rest at
time t_f, with |acceleration| <= 1, minimizing the integrated squared
acceleration.  Existence requires t_f^2 > 4M.  The permanent-control solution
is classical and closed-form in two regimes:

* constrained, 4M < t_f^2 < 6M: full braking until the switching time t1,
  then an affine ramp, then full acceleration from t_f - t1;
* unconstrained, t_f^2 >= 6M: the affine ramp 6M/t_f^3 (2t - t_f) alone.

In the sampled version the control is frozen on each period-T interval.  The
adjoint is affine (p_1 constant, p_2 of slope -p_1), so each interval's
averaged-gradient condition reduces to the sign pattern of a decreasing
affine function Gamma_k, and the whole problem collapses to two unknowns
(p_1, p_2(t_f)) shot at the two terminal constraints through exact
closed-form propagation.

This module also carries an independent brute-force oracle: the sampled
problem is a convex QP in the K control values, solved by active-set
enumeration (box active) or weighted least-norm normal equations (box
inactive).  The test suite certifies the shooting solver against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .certificate import check_certificate
from .errors import Infeasible, NonConvergence
from .problem import (Box, ControlSequence, FixedEndpoints,
                      FixedInitialFreeFinal, FixedTime, FreeTime, Periodic,
                      ProblemDefinition, SamplingGrid, build_grid, GRID_SNAP)
from .simulate import integrate_extremal_forward
from . import solver as _solver


# ---------------------------------------------------------------------------
# problem factory
# ---------------------------------------------------------------------------

def parking_problem(M: float, t_f: float, terminal: str = "fixed_endpoints",
                    position_weight: float = 0.0,
                    free_time_guess: Optional[float] = None) -> ProblemDefinition:
    """Double-integrator energy problem as a generic ProblemDefinition.

    ``terminal`` selects the boundary variant: "fixed_endpoints" is the
    parking problem proper; "free_final" leaves q(t_f) free; "periodic"
    imposes q(0) = q(t_f).  ``position_weight`` adds w*q_1^2 to the running
    cost (used by tests that need a state-coupled adjoint).
    """
    w = float(position_weight)

    def f(t, q, u):
        return np.array([q[1], u[0]])

    def f_q(t, q, u):
        return np.array([[0.0, 1.0], [0.0, 0.0]])

    def f_u(t, q, u):
        return np.array([[0.0], [1.0]])

    def f0(t, q, u):
        return float(u[0] * u[0] + w * q[0] * q[0])

    def f0_q(t, q, u):
        return np.array([2.0 * w * q[0], 0.0])

    def f0_u(t, q, u):
        return np.array([2.0 * u[0]])

    q0 = np.array([float(M), 0.0])
    if terminal == "fixed_endpoints":
        term = FixedEndpoints(q0=q0, qf=np.zeros(2))
    elif terminal == "free_final":
        term = FixedInitialFreeFinal(q0=q0)
    elif terminal == "periodic":
        term = Periodic()
    else:
        raise ValueError(f"unknown terminal variant {terminal!r}")

    if free_time_guess is not None:
        mode = FreeTime(free_time_guess)
    else:
        mode = FixedTime(t_f)

    return ProblemDefinition(
        n=2, m=1, f=f, f_q=f_q, f_u=f_u, f0=f0, f0_q=f0_q, f0_u=f0_u,
        control_set=Box(lower=np.array([-1.0]), upper=np.array([1.0])),
        terminal=term, final_time=mode, name="parking")


@dataclass(frozen=True)
class ParkingInstance:
    """Initial position M > 0, horizon t_f, sampling period T."""

    M: float
    t_f: float
    T: float

    def __post_init__(self):
        if self.M <= 0:
            raise ValueError(f"initial position must be positive, got {self.M}")
        if self.T <= 0:
            raise ValueError(f"sampling period must be positive, got {self.T}")
        if self.t_f <= 0:
            raise ValueError(f"final time must be positive, got {self.t_f}")
        if self.t_f ** 2 <= 4.0 * self.M:
            raise ValueError(
                f"existence needs t_f^2 > 4M (got t_f^2={self.t_f**2:.6g}, "
                f"4M={4*self.M:.6g})")

    @property
    def regime(self) -> str:
        return "constrained" if self.t_f ** 2 < 6.0 * self.M else "unconstrained"


# ---------------------------------------------------------------------------
# permanent-control closed forms
# ---------------------------------------------------------------------------

def switching_time(M: float, t_f: float) -> float:
    """First switching time t1 of the constrained regime, in (0, t_f/2)."""
    if not (4.0 * M < t_f ** 2 < 6.0 * M):
        raise ValueError("switching time exists only for 4M < t_f^2 < 6M")
    return 0.5 * (t_f - math.sqrt(3.0 * (t_f ** 2 - 4.0 * M)))


def permanent_control(M: float, t_f: float, t):
    """Optimal permanent control u*(t); accepts scalar or array times."""
    if t_f ** 2 <= 4.0 * M:
        raise ValueError("existence needs t_f^2 > 4M")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-9) or np.any(t_arr > t_f + 1e-9):
        raise ValueError("time outside [0, t_f]")
    if t_f ** 2 >= 6.0 * M:
        out = (6.0 * M / t_f ** 3) * (2.0 * t_arr - t_f)
    else:
        t1 = switching_time(M, t_f)
        ramp = (2.0 * t_arr - t_f) / math.sqrt(3.0 * (t_f ** 2 - 4.0 * M))
        out = np.where(t_arr <= t1, -1.0, np.where(t_arr >= t_f - t1, 1.0, ramp))
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out)
    return out


def permanent_cost(M: float, t_f: float) -> float:
    """Energy of the permanent optimum (closed form in both regimes)."""
    if t_f ** 2 >= 6.0 * M:
        return 12.0 * M ** 2 / t_f ** 3
    sigma = math.sqrt(3.0 * (t_f ** 2 - 4.0 * M))
    t1 = 0.5 * (t_f - sigma)
    return 2.0 * t1 + sigma / 3.0


def permanent_multipliers(M: float, t_f: float):
    """(p_1, p_2(t_f)) of the unconstrained permanent solution.

    These seed the sampled shooting iteration, in both regimes.
    """
    return -24.0 * M / t_f ** 3, 12.0 * M / t_f ** 2


def initial_adjoint_guess(M: float, t_f: float) -> np.ndarray:
    """p(0) built from the permanent multipliers, for the generic solver."""
    p1, p2f = permanent_multipliers(M, t_f)
    return np.array([p1, p1 * t_f + p2f])


# ---------------------------------------------------------------------------
# sampled closed forms
# ---------------------------------------------------------------------------

def gamma(k: int, x: float, p1: float, p2f: float, t_f: float, T: float) -> float:
    """Decreasing affine function whose sign pattern selects u(kT).

    gamma_k(x) = -2x + p1 (t_f - kT - T/2) + p2f; the interval's control is
    -1 when gamma_k(-1) < 0, +1 when gamma_k(1) > 0, and the root otherwise.
    """
    return -2.0 * x + p1 * (t_f - k * T - T / 2.0) + p2f


def _midpoint_coeffs(grid: SamplingGrid) -> np.ndarray:
    """c_k = t_f - kT - Delta_k/2 (reduces to t_f - kT - T/2 on full intervals)."""
    return grid.t_f - grid.times - grid.lengths / 2.0


def sampled_control_from_multipliers(p1: float, p2f: float,
                                     grid: SamplingGrid) -> ControlSequence:
    """Per-interval controls from the affine-adjoint sign rule (clamped roots)."""
    c = _midpoint_coeffs(grid)
    u = np.clip(0.5 * (p1 * c + p2f), -1.0, 1.0)
    return ControlSequence(u[:, None])


def parking_shooting_map(p1: float, p2f: float, M: float, grid: SamplingGrid):
    """Exact terminal state (q_1(t_f), q_2(t_f)) of the double integrator
    under the controls generated by the multipliers."""
    u = sampled_control_from_multipliers(p1, p2f, grid).values[:, 0]
    c = _midpoint_coeffs(grid)
    d = np.asarray(grid.lengths)
    q2f = float(np.sum(d * u))
    q1f = float(M + np.sum(d * u * c))
    return q1f, q2f


def sampled_cost(grid: SamplingGrid, controls: ControlSequence) -> float:
    """Energy of a sampled control: sum of Delta_k |u_k|^2."""
    v = controls.values
    return float(np.sum(np.asarray(grid.lengths) * np.sum(v * v, axis=1)))


# ---------------------------------------------------------------------------
# dedicated 2-unknown shooting solve
# ---------------------------------------------------------------------------

def solve_parking(M: float, t_f: float, T: float,
                  config: Optional[_solver.SolverConfig] = None,
                  stats: Optional[dict] = None):
    """Solve the sampled parking instance.

    Returns ``(controls, (p1, p2f), certificate)``.  When t_f is an exact
    multiple of T the 2x2 shooting system on (p1, p2(t_f)) is solved through
    the closed-form propagation; otherwise the instance is delegated to the
    generic indirect-shooting solver on the partial-interval grid.
    """
    ParkingInstance(M=M, t_f=t_f, T=T)
    config = config or _solver.SolverConfig()
    grid = build_grid(t_f, T)
    problem = parking_problem(M, t_f)

    ratio = t_f / T
    if not (abs(ratio - round(ratio)) <= GRID_SNAP and round(ratio) >= 1):
        extremal, cert = _solver.solve(problem, grid,
                                       initial_unknowns=initial_adjoint_guess(M, t_f),
                                       config=config, stats=stats)
        p1 = float(extremal.adjoint.initial[0])
        p2f = float(extremal.adjoint.final[1])
        return extremal.controls, (p1, p2f), cert

    x = np.array(permanent_multipliers(M, t_f))

    def residual(vec):
        return np.array(parking_shooting_map(vec[0], vec[1], M, grid))

    def search(x0, rn0, step):
        scale = 1.0
        for _ in range(config.max_halvings):
            x_try = x0 + scale * step
            r_try = residual(x_try)
            rn = float(np.linalg.norm(r_try))
            if rn < rn0:
                return x_try, r_try, rn
            scale *= 0.5
        return None

    r = residual(x)
    rnorm = float(np.linalg.norm(r))
    best = (rnorm, x.copy())
    history = []
    for iteration in range(config.newton_max_iter):
        history.append({"iteration": iteration, "residual_norm": rnorm})
        if rnorm <= config.newton_tol:
            break
        h = config.fd_step * (1.0 + float(np.linalg.norm(x)))
        J = np.empty((2, 2))
        for i in range(2):
            e = np.zeros(2); e[i] = h
            J[:, i] = (residual(x + e) - r) / h
        found = search(x, rnorm, _solver._newton_step(J, r, regularize=False))
        if found is None:
            # saturation kinks between the FD probes can point plain Newton
            # uphill; damped steps bend toward steepest descent of |r|^2
            for mu in _solver.FALLBACK_DAMPINGS:
                found = search(x, rnorm, _solver._damped_step(J, r, mu))
                if found is not None:
                    break
        if found is None:
            raise NonConvergence(
                f"parking shooting stalled at residual {rnorm:.3e} "
                f"(K={grid.n_intervals} may make the target unreachable)",
                iterate=best[1], residual_norm=best[0], history=history)
        x, r, rnorm = found
        if rnorm < best[0]:
            best = (rnorm, x.copy())
    else:
        raise NonConvergence(
            f"parking shooting did not reach {config.newton_tol:.1e}",
            iterate=best[1], residual_norm=best[0], history=history)

    p1, p2f = float(x[0]), float(x[1])
    controls = sampled_control_from_multipliers(p1, p2f, grid)
    p_init = np.array([p1, p1 * t_f + p2f])
    extremal = integrate_extremal_forward(problem, grid, controls,
                                          np.array([M, 0.0]), p_init, -1.0,
                                          config.substeps)
    cert = check_certificate(problem, extremal)
    if stats is not None:
        stats.update(iterations=history[-1]["iteration"], residual_norm=rnorm,
                     history=history, unknowns=[p1, p2f])
    return controls, (p1, p2f), cert


# ---------------------------------------------------------------------------
# brute-force oracle: the sampled problem as a convex QP
# ---------------------------------------------------------------------------

MAX_ENUMERATION_K = 12


def qp_oracle(M: float, t_f: float, T: float, box=(-1.0, 1.0)) -> ControlSequence:
    """Global optimum of the discretized problem, independent of the solver.

    Minimizes sum Delta_k u_k^2 under the two linear terminal constraints.
    With ``box`` active every pattern in {lower, free, upper}^K is tried:
    the free components solve the bordered KKT system of the pattern, and
    the cheapest feasible candidate wins (K <= 12).  ``box=None`` solves the
    weighted least-norm problem by 2x2 normal equations for any K.
    """
    if T <= 0 or t_f <= 0 or M <= 0:
        raise ValueError("qp_oracle needs positive M, t_f, T")
    ratio = t_f / T
    if not (abs(ratio - round(ratio)) <= GRID_SNAP and round(ratio) >= 1):
        raise ValueError("qp_oracle requires t_f to be a multiple of T")
    grid = build_grid(t_f, T)
    K = grid.n_intervals
    d = np.asarray(grid.lengths)
    c = _midpoint_coeffs(grid)
    A = np.vstack([d, d * c])          # q2(t_f) and q1(t_f) - M rows
    b = np.array([0.0, -M])

    if box is None:
        G = A @ np.diag(1.0 / d) @ A.T
        mu = np.linalg.solve(G, b)
        u = mu[0] + mu[1] * c
        return ControlSequence(u[:, None])

    lo, hi = float(box[0]), float(box[1])
    if M > t_f ** 2 / 4.0:
        raise Infeasible(
            f"target unreachable: M={M:.6g} exceeds t_f^2/4={t_f**2/4:.6g} "
            f"with unit acceleration bound")
    if K > MAX_ENUMERATION_K:
        raise ValueError(f"active-set enumeration bounded at K <= "
                         f"{MAX_ENUMERATION_K}, got K={K}")

    # all 3^K saturation patterns, visited in order of the cost their fixed
    # entries already commit to; once that sunk cost reaches the incumbent,
    # every remaining pattern is provably worse (free entries only add cost)
    patterns = np.stack(np.meshgrid(*([np.array([-1, 0, 1], dtype=np.int8)] * K),
                                    indexing="ij")).reshape(K, -1).T
    sunk = (patterns < 0) @ (d * lo * lo) + (patterns > 0) @ (d * hi * hi)
    order = np.argsort(sunk, kind="stable")

    best_cost = np.inf
    best_u = None
    feas_tol = 1e-9
    for idx in order:
        if sunk[idx] >= best_cost - 1e-15:
            break
        pattern = patterns[idx]
        fixed = pattern != 0
        u = np.where(pattern < 0, lo, np.where(pattern > 0, hi, 0.0))
        b_eff = b - A[:, fixed] @ u[fixed]
        free_idx = np.nonzero(~fixed)[0]
        nf = len(free_idx)
        if nf == 0:
            if np.linalg.norm(b_eff) > feas_tol:
                continue
        else:
            # bordered KKT of min sum d u^2 s.t. A_F u = b_eff
            Af = A[:, free_idx]
            kkt = np.zeros((nf + 2, nf + 2))
            kkt[:nf, :nf] = 2.0 * np.diag(d[free_idx])
            kkt[:nf, nf:] = Af.T
            kkt[nf:, :nf] = Af
            rhs = np.concatenate([np.zeros(nf), b_eff])
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            uf = sol[:nf]
            if np.linalg.norm(Af @ uf - b_eff) > feas_tol:
                continue
            if np.any(uf < lo - 1e-12) or np.any(uf > hi + 1e-12):
                continue
            u[free_idx] = uf
        cost = float(np.sum(d * u * u))
        if cost < best_cost - 1e-15:
            best_cost = cost
            best_u = u.copy()
    if best_u is None:
        raise Infeasible(
            f"no admissible sampled control parks M={M:.6g} in t_f={t_f:.6g} "
            f"with K={K} intervals")
    return ControlSequence(best_u[:, None])


# ---------------------------------------------------------------------------
# sampling-period sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    """One sampling period's outcome in a convergence sweep."""

    T: float
    K: int
    sup_dev: float
    terminal_residual: float
    max_pmp_residual: float
    cost_sampled: float
    cost_permanent: float
    status: str = "ok"
    error: str = ""


def sweep_row(M: float, t_f: float, T: float,
              config: Optional[_solver.SolverConfig] = None) -> SweepRow:
    """Solve one instance and compare it against the permanent optimum.

    The deviation is measured at interval midpoints kT + Delta_k/2, where the
    unsaturated sampled law samples an affine function of time and the
    comparison is free of the O(T) offset that a comparison at kT carries.
    """
    grid = build_grid(t_f, T)
    try:
        controls, (p1, p2f), cert = solve_parking(M, t_f, T, config)
    except (NonConvergence, ValueError, Infeasible) as exc:
        return SweepRow(T=T, K=grid.n_intervals, sup_dev=np.nan,
                        terminal_residual=np.nan, max_pmp_residual=np.nan,
                        cost_sampled=np.nan,
                        cost_permanent=permanent_cost(M, t_f),
                        status="failed", error=str(exc))
    mids = np.asarray(grid.times) + np.asarray(grid.lengths) / 2.0
    u_star = np.asarray(permanent_control(M, t_f, mids))
    sup_dev = float(np.max(np.abs(controls.values[:, 0] - u_star)))
    q1f, q2f = parking_shooting_map(p1, p2f, M, grid)
    residual = float(np.hypot(q1f, q2f))
    max_r = max(cert.max_interval_residual, cert.transversality)
    return SweepRow(T=T, K=grid.n_intervals, sup_dev=sup_dev,
                    terminal_residual=residual, max_pmp_residual=max_r,
                    cost_sampled=sampled_cost(grid, controls),
                    cost_permanent=permanent_cost(M, t_f))


def sweep_periods(M: float, t_f: float, T_list,
                  config: Optional[_solver.SolverConfig] = None):
    """Sweep the sampling period over ``T_list``; one SweepRow per period."""
    return [sweep_row(M, t_f, float(T), config) for T in T_list]
