"""Acceptance gate: one test per criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every line.  Each
test times itself against the criterion's runtime budget and asserts the
stated tolerances; expected values were fixed from the closed forms or from
the independent brute-force oracle before the solver existed.
"""

import math
import time

import numpy as np
import pytest

import sampled_pmp as sp
from sampled_pmp import parking as pk


def _line(n, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")


def test_criterion_1_permanent_closed_forms():
    t0 = time.perf_counter()
    u0 = pk.permanent_control(2.0, 4.0, 0.0)
    u4 = pk.permanent_control(2.0, 4.0, 4.0)
    t1 = pk.switching_time(2.0, 3.0)
    ut1 = pk.permanent_control(2.0, 3.0, t1)
    elapsed = time.perf_counter() - t0
    errs = [abs(u0 + 0.75), abs(u4 - 0.75),
            abs(t1 - (3 - math.sqrt(3)) / 2), abs(ut1 + 1.0)]
    ok = max(errs) <= 1e-12 and elapsed < 1e-3
    _line(1, ok, f"closed-form errors max {max(errs):.2e} (tol 1e-12), "
                 f"{elapsed*1e3:.3f} ms")
    assert max(errs) <= 1e-12
    assert elapsed < 1e-3


def test_criterion_2_sampled_exact_small_cases():
    results = []
    for (M, tf, T, expected) in [(2.0, 4.0, 2.0, [-0.5, 0.5]),
                                 (2.0, 3.0, 1.0, [-1.0, 0.0, 1.0])]:
        # oracle first: the expected controls are the QP optimum
        oracle = pk.qp_oracle(M, tf, T).values.ravel()
        assert np.max(np.abs(oracle - expected)) <= 1e-9

        t0 = time.perf_counter()
        controls, (p1, p2f), cert = pk.solve_parking(M, tf, T)
        elapsed = time.perf_counter() - t0
        grid = sp.build_grid(tf, T)
        term = math.hypot(*pk.parking_shooting_map(p1, p2f, M, grid))
        du = float(np.max(np.abs(controls.values.ravel() - expected)))
        results.append((du, term, cert.max_interval_residual, elapsed))
    ok = all(du <= 1e-7 and term <= 1e-10 and r <= 1e-8 and el < 0.1
             for du, term, r, el in results)
    _line(2, ok, "; ".join(
        f"du={du:.1e} term={term:.1e} cert={r:.1e} {el*1e3:.0f}ms"
        for du, term, r, el in results))
    for du, term, r, el in results:
        assert du <= 1e-7
        assert term <= 1e-10
        assert r <= 1e-8
        assert el < 0.1


def test_criterion_3_oracle_equivalence():
    t0 = time.perf_counter()
    worst_u = worst_c = 0.0
    for tf in (3.0, 3.2, 4.0, 5.0):
        for K in range(2, 9):
            T = tf / K
            grid = sp.build_grid(tf, T)
            u_solve, _, _ = pk.solve_parking(2.0, tf, T)
            u_qp = pk.qp_oracle(2.0, tf, T)
            worst_u = max(worst_u, float(np.max(np.abs(u_solve.values - u_qp.values))))
            worst_c = max(worst_c, abs(pk.sampled_cost(grid, u_solve)
                                       - pk.sampled_cost(grid, u_qp)))
    elapsed = time.perf_counter() - t0
    ok = worst_u <= 1e-7 and worst_c <= 1e-8 and elapsed < 10.0
    _line(3, ok, f"28 instances: max |du|={worst_u:.1e} (tol 1e-7), "
                 f"max |dcost|={worst_c:.1e} (tol 1e-8), {elapsed:.1f}s")
    assert worst_u <= 1e-7
    assert worst_c <= 1e-8
    assert elapsed < 10.0


def test_criterion_4_sweep_reproduction():
    # NOTE: the strict-decrease clause is provably unattainable for
    # (M,t_f)=(2,3): at T=1 the sampled optimum (-1, 0, 1) coincides with the
    # permanent control at the interval midpoints (0.5 < t1 ~ 0.634 lies in
    # the full-braking piece, 1.5 is the odd-symmetry zero, 2.5 lies in the
    # full-acceleration piece), so the deviation sequence starts at ~1e-11
    # and then rises to 3.4e-2 at T=0.5.  The clause is asserted as stated
    # and fails honestly on that single comparison; every other clause holds.
    t0 = time.perf_counter()
    periods = [1.0, 0.5, 0.1, 0.01]
    failures = []
    details = []
    for (M, tf, final_bound) in [(2.0, 3.0, 2e-2), (2.0, 4.0, 1e-3)]:
        rows = pk.sweep_periods(M, tf, periods)
        for row in rows:
            if row.status != "ok" or row.terminal_residual > 1e-9:
                failures.append(f"(M={M},tf={tf},T={row.T}) did not converge")
        devs = [row.sup_dev for row in rows]
        details.append(f"(2,{tf:g}): devs=" +
                       "/".join(f"{d:.2e}" for d in devs))
        for i, (a, b) in enumerate(zip(devs, devs[1:])):
            if not a > b:
                failures.append(
                    f"(M={M},tf={tf}): sup_dev not strictly decreasing at "
                    f"T={periods[i]}->{periods[i+1]} ({a:.3e} -> {b:.3e})")
        if not devs[-1] <= final_bound:
            failures.append(f"(M={M},tf={tf}): T=0.01 deviation {devs[-1]:.3e} "
                            f"> {final_bound}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 30.0:
        failures.append(f"runtime {elapsed:.1f}s >= 30s")
    _line(4, not failures, "; ".join(details) + f", {elapsed:.1f}s"
          + ("" if not failures else " | " + "; ".join(failures)))
    assert not failures, "; ".join(failures)


def test_criterion_5_certificate_soundness():
    t0 = time.perf_counter()
    instances = [(2.0, 4.0, 2.0), (2.0, 3.0, 1.0), (2.0, 4.0, 1.0),
                 (2.0, 3.2, 0.8)]
    checked = flipped = 0
    for (M, tf, T) in instances:
        controls, (p1, p2f), cert = pk.solve_parking(M, tf, T)
        assert cert.passed and cert.tol == 1e-8
        checked += 1
        prob = pk.parking_problem(M, tf)
        grid = sp.build_grid(tf, T)
        p_init = np.array([p1, p1 * tf + p2f])
        for k in range(len(controls)):
            u_k = controls[k][0]
            if abs(u_k) >= 0.9:           # keep the bumped value admissible
                continue
            bumped = controls.values.copy()
            bumped[k, 0] += 0.1
            ext = sp.integrate_extremal_forward(prob, grid, bumped,
                                                np.array([M, 0.0]), p_init,
                                                -1.0)
            bad = sp.check_certificate(prob, ext)
            assert not bad.passed, (M, tf, T, k)
            assert bad.interval_residuals[k] > 0.0, (M, tf, T, k)
            flipped += 1
    elapsed = time.perf_counter() - t0
    ok = elapsed < 5.0
    _line(5, ok, f"{checked} solves certified, {flipped} single-control bumps "
                 f"all flipped to fail, {elapsed:.1f}s")
    assert flipped >= 8
    assert elapsed < 5.0


def test_criterion_6_adjoint_gradient_identity():
    t0 = time.perf_counter()
    worst = 0.0
    # literal variant (pure control-energy cost) and a position-weighted one
    # whose adjoint arc is nontrivial
    for weight in (0.0, 1.0):
        prob = pk.parking_problem(2.0, 3.0, terminal="free_final",
                                  position_weight=weight)
        grid = sp.build_grid(3.0, 0.6)        # K = 5
        rng = np.random.default_rng(7)
        ctrl = rng.uniform(-0.9, 0.9, size=(grid.n_intervals, 1))
        q0 = np.array([2.0, 0.0])
        p_init = sp.match_terminal_adjoint(prob, grid, ctrl, q0, np.zeros(2),
                                           -1.0)
        ext = sp.integrate_extremal_forward(prob, grid, ctrl, q0, p_init, -1.0)
        assert np.linalg.norm(ext.adjoint.final) <= 1e-10
        h = 1e-5
        for k in range(grid.n_intervals):
            gbar = sp.average_u_gradient(prob, ext, k)
            up, um = ctrl.copy(), ctrl.copy()
            up[k, 0] += h
            um[k, 0] -= h
            _, cp = sp.simulate(prob, grid, up, q0)
            _, cm = sp.simulate(prob, grid, um, q0)
            fd = (cp - cm) / (2 * h)
            pred = -grid.lengths[k] * gbar[0]
            worst = max(worst, abs(fd - pred) / abs(fd))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 1.0
    _line(6, ok, f"max relative mismatch {worst:.2e} (tol 1e-6) over 2x5 "
                 f"controls, {elapsed:.2f}s")
    assert worst <= 1e-6
    assert elapsed < 1.0


def test_criterion_7_integrator_order():
    t0 = time.perf_counter()
    prob = sp.lti_problem(
        np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([[0.0], [0.0]]),
        control_set=sp.Box(lower=np.array([-1.0]), upper=np.array([1.0])),
        terminal=sp.FixedEndpoints(q0=np.array([1.0, 0.0]), qf=np.zeros(2)),
        final_time=sp.FixedTime(np.pi / 2))
    exact = np.array([0.0, -1.0])
    errs = []
    for s in (8, 16, 32, 64):
        _, states = sp.integrate_interval(prob, 0.0, np.pi / 2,
                                          np.array([1.0, 0.0]),
                                          np.array([0.0]), s)
        errs.append(float(np.linalg.norm(states[-1] - exact)))
    factors = [a / b for a, b in zip(errs, errs[1:])]
    elapsed = time.perf_counter() - t0
    ok = all(14.0 <= f <= 18.0 for f in factors) and elapsed < 1.0
    _line(7, ok, "halving factors " + "/".join(f"{f:.2f}" for f in factors)
          + f" (need [14,18]), {elapsed:.2f}s")
    for f in factors:
        assert 14.0 <= f <= 18.0
    assert elapsed < 1.0


def test_criterion_8_structural_invariants():
    t0 = time.perf_counter()
    # adjoint structure on a solved instance
    controls, (p1, p2f), _ = pk.solve_parking(2.0, 4.0, 0.5)
    prob = pk.parking_problem(2.0, 4.0)
    grid = sp.build_grid(4.0, 0.5)
    ext = sp.integrate_extremal_forward(prob, grid, controls,
                                        np.array([2.0, 0.0]),
                                        np.array([p1, p1 * 4.0 + p2f]), -1.0)
    all_t = np.concatenate(ext.trajectory.times)
    all_p = np.vstack(ext.adjoint.values)
    p1_dev = float(np.max(np.abs(all_p[:, 0] - all_p[0, 0])))
    p2_dev = float(np.max(np.abs(all_p[:, 1] - (all_p[0, 1] - all_p[0, 0] * all_t))))

    # affine law of unsaturated controls
    fit_dev = 0.0
    for (M, tf, T) in [(2.0, 4.0, 1.0), (2.0, 3.0, 0.5)]:
        ctl, _, _ = pk.solve_parking(M, tf, T)
        g = sp.build_grid(tf, T)
        u = ctl.values[:, 0]
        c = tf - np.asarray(g.times) - np.asarray(g.lengths) / 2
        interior = np.abs(u) < 1.0 - 1e-9
        A = np.column_stack([np.ones(interior.sum()), c[interior]])
        coef, *_ = np.linalg.lstsq(A, u[interior], rcond=None)
        fit_dev = max(fit_dev, float(np.max(np.abs(A @ coef - u[interior]))))
    elapsed = time.perf_counter() - t0
    ok = p1_dev <= 1e-12 and p2_dev <= 1e-12 and fit_dev <= 1e-10 and elapsed < 1.0
    _line(8, ok, f"p1 const dev {p1_dev:.1e}, p2 affine dev {p2_dev:.1e} "
                 f"(tol 1e-12); affine-fit residual {fit_dev:.1e} (tol 1e-10), "
                 f"{elapsed:.2f}s")
    assert p1_dev <= 1e-12
    assert p2_dev <= 1e-12
    assert fit_dev <= 1e-10
    assert elapsed < 1.0
