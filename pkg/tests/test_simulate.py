"""Sample-and-hold integration, adjoint arcs, quadrature, CSV export."""

import numpy as np
import pytest

import sampled_pmp as sp
from sampled_pmp.parking import parking_problem

PARKING = parking_problem(2.0, 4.0)
Q0 = np.array([2.0, 0.0])


def _oscillator():
    return sp.lti_problem(
        np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([[0.0], [0.0]]),
        control_set=sp.Box(lower=np.array([-1.0]), upper=np.array([1.0])),
        terminal=sp.FixedEndpoints(q0=np.array([1.0, 0.0]), qf=np.zeros(2)),
        final_time=sp.FixedTime(2 * np.pi))


# ---------------------------------------------------------------------------
# single-interval integration
# ---------------------------------------------------------------------------

def test_interval_double_integrator_is_exact():
    # polynomial flow: RK4 reproduces it to roundoff
    _, states = sp.integrate_interval(PARKING, 0.0, 1.0, np.zeros(2),
                                      np.array([1.0]), 16)
    np.testing.assert_allclose(states[-1], [0.5, 1.0], rtol=0, atol=1e-15)

    _, states = sp.integrate_interval(PARKING, 0.0, 0.5, np.array([1.0, 2.0]),
                                      np.array([0.0]), 16)
    np.testing.assert_allclose(states[-1], [2.0, 2.0], rtol=0, atol=1e-15)


def test_interval_oscillator_accuracy():
    # oracle: analytic rotation; measured RK4 error at 16 substeps is 1.22e-6
    _, states = sp.integrate_interval(_oscillator(), 0.0, np.pi / 2,
                                      np.array([1.0, 0.0]), np.array([0.0]), 16)
    assert np.linalg.norm(states[-1] - np.array([0.0, -1.0])) <= 2e-6
    _, states = sp.integrate_interval(_oscillator(), 0.0, np.pi / 2,
                                      np.array([1.0, 0.0]), np.array([0.0]), 32)
    assert np.linalg.norm(states[-1] - np.array([0.0, -1.0])) <= 1e-6


def test_interval_argument_validation():
    with pytest.raises(ValueError):
        sp.integrate_interval(PARKING, 0.0, -1.0, Q0, np.array([0.0]), 16)
    with pytest.raises(ValueError):
        sp.integrate_interval(PARKING, 0.0, 1.0, Q0, np.array([0.0]), 0)


def test_blowup_raises_structured_error():
    def f(t, q, u):
        return np.array([40.0 * q[0]])

    prob = sp.ProblemDefinition(
        n=1, m=1, f=f, f_q=lambda t, q, u: np.array([[40.0]]),
        f_u=lambda t, q, u: np.array([[0.0]]),
        f0=lambda t, q, u: 0.0, f0_q=lambda t, q, u: np.zeros(1),
        f0_u=lambda t, q, u: np.zeros(1),
        control_set=sp.Box(lower=np.array([-1.0]), upper=np.array([1.0])),
        terminal=sp.FixedEndpoints(q0=np.ones(1), qf=np.zeros(1)),
        final_time=sp.FixedTime(1.0))
    with pytest.raises(sp.IntegrationBlowUp) as exc:
        sp.integrate_interval(prob, 0.0, 1.0, np.array([1.0]), np.array([0.0]), 16)
    assert 0.0 < exc.value.time <= 1.0


# ---------------------------------------------------------------------------
# full simulation
# ---------------------------------------------------------------------------

def test_simulate_parks_exactly():
    grid = sp.build_grid(4.0, 2.0)
    traj, cost = sp.simulate(PARKING, grid, np.array([[-0.5], [0.5]]), Q0)
    np.testing.assert_allclose(traj.final_state, [0.0, 0.0], atol=1e-12)
    assert cost == pytest.approx(1.0, abs=1e-13)


def test_simulate_zero_controls():
    grid = sp.build_grid(4.0, 2.0)
    traj, cost = sp.simulate(PARKING, grid, np.zeros((2, 1)), Q0)
    np.testing.assert_allclose(traj.final_state, [2.0, 0.0], atol=0)
    assert cost == 0.0


def test_simulate_single_interval_constant_acceleration():
    grid = sp.build_grid(1.0, 1.0)
    traj, cost = sp.simulate(PARKING, grid, np.array([[-1.0]]), Q0)
    np.testing.assert_allclose(traj.final_state, [1.5, -1.0], atol=1e-14)
    assert cost == pytest.approx(1.0, abs=1e-14)


def test_simulate_input_validation():
    grid = sp.build_grid(4.0, 2.0)
    with pytest.raises(ValueError, match="intervals"):
        sp.simulate(PARKING, grid, np.array([[0.1]]), Q0)
    with pytest.raises(ValueError, match="control set"):
        sp.simulate(PARKING, grid, np.array([[1.5], [0.0]]), Q0)
    with pytest.raises(ValueError, match="even"):
        sp.simulate(PARKING, grid, np.zeros((2, 1)), Q0, substeps=15)


# ---------------------------------------------------------------------------
# coupled extremal integration
# ---------------------------------------------------------------------------

def test_extremal_state_matches_simulate_bitwise():
    grid = sp.build_grid(4.0, 2.0)
    ctrl = np.array([[-0.5], [0.5]])
    traj, cost = sp.simulate(PARKING, grid, ctrl, Q0)
    ext = sp.integrate_extremal_forward(PARKING, grid, ctrl, Q0,
                                        np.array([-1.0, -2.0]), -1.0)
    for a, b in zip(traj.states, ext.trajectory.states):
        assert np.array_equal(a, b)
    assert ext.trajectory.cost == cost


def test_extremal_adjoint_values():
    grid = sp.build_grid(4.0, 2.0)
    ctrl = np.array([[-0.5], [0.5]])
    # p(0) = (-1, -2) corresponds to p1 = -1, p2(t_f) = 2: p2 crosses 0 at t=2
    ext = sp.integrate_extremal_forward(PARKING, grid, ctrl, Q0,
                                        np.array([-1.0, -2.0]), -1.0)
    p_mid = ext.adjoint.values[0][-1]     # node at t = 2
    assert p_mid[1] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(ext.adjoint.final, [-1.0, 2.0], atol=1e-12)

    # p1 = 0 freezes the whole adjoint
    ext = sp.integrate_extremal_forward(PARKING, grid, ctrl, Q0,
                                        np.array([0.0, 3.0]), -1.0)
    for block in ext.adjoint.values:
        np.testing.assert_allclose(block, np.broadcast_to([0.0, 3.0], block.shape),
                                   atol=0)

    # p(0) = (1, 0): slope of p2 is -p1 = -1
    ext = sp.integrate_extremal_forward(PARKING, grid, ctrl, Q0,
                                        np.array([1.0, 0.0]), -1.0)
    for times, block in zip(ext.trajectory.times, ext.adjoint.values):
        np.testing.assert_allclose(block[:, 1], -times, atol=1e-12)


def test_continuity_across_interval_boundaries():
    grid = sp.build_grid(3.0, 0.7)
    rng = np.random.default_rng(6)
    ctrl = rng.uniform(-1, 1, size=(grid.n_intervals, 1))
    ext = sp.integrate_extremal_forward(PARKING, grid, ctrl, Q0,
                                        np.array([0.3, -0.4]), -1.0)
    for k in range(grid.n_intervals - 1):
        dq = np.abs(ext.trajectory.states[k][-1] - ext.trajectory.states[k + 1][0])
        dp = np.abs(ext.adjoint.values[k][-1] - ext.adjoint.values[k + 1][0])
        dt = abs(ext.trajectory.times[k][-1] - ext.trajectory.times[k + 1][0])
        assert np.max(dq) <= 1e-12 and np.max(dp) <= 1e-12 and dt <= 1e-12


def test_parking_adjoint_structure():
    # p1 constant, p2 affine with slope -p1, on every node
    grid = sp.build_grid(4.0, 0.5)
    rng = np.random.default_rng(7)
    ctrl = rng.uniform(-1, 1, size=(grid.n_intervals, 1))
    p0v = np.array([-0.8, 1.7])
    ext = sp.integrate_extremal_forward(PARKING, grid, ctrl, Q0, p0v, -1.0)
    all_t = np.concatenate(ext.trajectory.times)
    all_p = np.vstack(ext.adjoint.values)
    assert np.max(np.abs(all_p[:, 0] - p0v[0])) <= 1e-12
    expected_p2 = p0v[1] - p0v[0] * all_t
    assert np.max(np.abs(all_p[:, 1] - expected_p2)) <= 1e-12


# ---------------------------------------------------------------------------
# interval averages
# ---------------------------------------------------------------------------

def test_average_u_gradient_closed_form():
    # Gbar_k = p1 (t_f - kT - T/2) + p2f - 2 u_k for the parking adjoint
    grid = sp.build_grid(4.0, 2.0)
    ext = sp.integrate_extremal_forward(PARKING, grid, np.array([[-0.5], [0.5]]),
                                        Q0, np.array([-1.0, -2.0]), -1.0)
    assert sp.average_u_gradient(PARKING, ext, 0)[0] == pytest.approx(0.0, abs=1e-12)
    assert sp.average_u_gradient(PARKING, ext, 1)[0] == pytest.approx(0.0, abs=1e-12)

    ext0 = sp.integrate_extremal_forward(PARKING, grid, np.array([[0.0], [0.5]]),
                                         Q0, np.array([-1.0, -2.0]), -1.0)
    assert sp.average_u_gradient(PARKING, ext0, 0)[0] == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(IndexError):
        sp.average_u_gradient(PARKING, ext0, 2)


def test_average_gradient_uses_partial_interval_length():
    # last interval of t_f=2.5, T=1 has length 0.5: average over it, not T
    grid = sp.build_grid(2.5, 1.0)
    ctrl = np.array([[0.1], [0.2], [0.3]])
    p0v = np.array([-1.0, -0.5])
    ext = sp.integrate_extremal_forward(PARKING, grid, ctrl, Q0, p0v, -1.0)
    # p2(t) = p2(0) - p1 t = -0.5 + t; mean over [2, 2.5] = 1.75
    g = sp.average_u_gradient(PARKING, ext, 2)
    assert g[0] == pytest.approx(1.75 - 2 * 0.3, abs=1e-12)


def test_adjoint_gradient_identity():
    # free final point forces p(t_f) = 0; then dcost/du_k = -Delta_k Gbar_k
    prob = parking_problem(2.0, 3.0, terminal="free_final", position_weight=1.0)
    grid = sp.build_grid(3.0, 0.6)
    rng = np.random.default_rng(7)
    ctrl = rng.uniform(-0.9, 0.9, size=(grid.n_intervals, 1))
    q0 = np.array([2.0, 0.0])
    p_init = sp.match_terminal_adjoint(prob, grid, ctrl, q0, np.zeros(2), -1.0)
    ext = sp.integrate_extremal_forward(prob, grid, ctrl, q0, p_init, -1.0)
    assert np.linalg.norm(ext.adjoint.final) <= 1e-12
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
        assert abs(fd - pred) <= 1e-6 * abs(fd)


def test_rk4_fourth_order_convergence():
    prob = _oscillator()
    exact = np.array([0.0, -1.0])
    errs = []
    for s in (8, 16, 32):
        _, states = sp.integrate_interval(prob, 0.0, np.pi / 2,
                                          np.array([1.0, 0.0]), np.array([0.0]), s)
        errs.append(np.linalg.norm(states[-1] - exact))
    for a, b in zip(errs, errs[1:]):
        assert 14.0 <= a / b <= 18.0


def test_average_hamiltonian_concave_maximum():
    grid = sp.build_grid(4.0, 2.0)
    ext = sp.integrate_extremal_forward(PARKING, grid, np.array([[-0.5], [0.5]]),
                                        Q0, np.array([-1.0, -2.0]), -1.0)
    # H average is strictly concave in y; the certified control maximizes it
    ys = np.linspace(-1, 1, 201)
    for k in range(2):
        vals = np.array([sp.average_hamiltonian(PARKING, ext, k, np.array([y]))
                         for y in ys])
        at_u = sp.average_hamiltonian(PARKING, ext, k, ext.controls[k])
        assert at_u >= np.max(vals) - 1e-10


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def test_trajectory_csv_format(tmp_path):
    grid = sp.build_grid(4.0, 2.0)
    ext = sp.integrate_extremal_forward(PARKING, grid, np.array([[-0.5], [0.5]]),
                                        Q0, np.array([-1.0, -2.0]), -1.0)
    path = tmp_path / "traj.csv"
    sp.write_trajectory_csv(ext, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,q_1,q_2,p_1,p_2,k,u_1"
    assert len(lines) == 1 + 2 * 17          # two intervals, 16 substeps each
    first = lines[1].split(",")
    assert first[0] == "%.12e" % 0.0
    assert first[5] == "0"
    # deterministic: a second write is byte-identical
    path2 = tmp_path / "traj2.csv"
    sp.write_trajectory_csv(ext, path2)
    assert path.read_bytes() == path2.read_bytes()
