"""Generic built-in problem factories (linear dynamics, quadratic cost)."""

from __future__ import annotations

import numpy as np

from .problem import (ControlSet, FinalTimeMode, ProblemDefinition,
                      TerminalCondition)


def lti_problem(A, B, Q=None, R=None, *, control_set: ControlSet,
                terminal: TerminalCondition, final_time: FinalTimeMode,
                name: str = "lti") -> ProblemDefinition:
    """dq/dt = A q + B u with running cost q'Qq + u'Ru.

    Q defaults to zero (pure control energy) and R to the identity.  Q and R
    are symmetrized, so only their symmetric parts matter.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    n = A.shape[0]
    if B.ndim != 2 or B.shape[0] != n:
        raise ValueError(f"B must have {n} rows")
    m = B.shape[1]
    Q = np.zeros((n, n)) if Q is None else np.asarray(Q, dtype=float)
    R = np.eye(m) if R is None else np.asarray(R, dtype=float)
    if Q.shape != (n, n) or R.shape != (m, m):
        raise ValueError("Q and R must match the state/control dimensions")
    Q = 0.5 * (Q + Q.T)
    R = 0.5 * (R + R.T)

    def f(t, q, u):
        return A @ q + B @ u

    def f_q(t, q, u):
        return A

    def f_u(t, q, u):
        return B

    def f0(t, q, u):
        return float(q @ Q @ q + u @ R @ u)

    def f0_q(t, q, u):
        return 2.0 * (Q @ q)

    def f0_u(t, q, u):
        return 2.0 * (R @ u)

    return ProblemDefinition(n=n, m=m, f=f, f_q=f_q, f_u=f_u, f0=f0,
                             f0_q=f0_q, f0_u=f0_u, control_set=control_set,
                             terminal=terminal, final_time=final_time,
                             name=name)
