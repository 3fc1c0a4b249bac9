"""Independent reference computations used by the tests.

Nothing here imports the stepping or kernel code of the package: the
variable-step BDF2 reference derives its weights from Lagrange
interpolation on the raw time levels.
"""

import numpy as np


def lagrange_derivative_weights(nodes, at):
    """Weights w with p'(at) = sum_i w_i v_i for the interpolant through (nodes, v)."""
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.size
    w = np.zeros(n)
    for i in range(n):
        total = 0.0
        for m in range(n):
            if m == i:
                continue
            term = 1.0 / (nodes[i] - nodes[m])
            for l in range(n):
                if l not in (i, m):
                    term *= (at - nodes[l]) / (nodes[i] - nodes[l])
            total += term
        w[i] = total
    return w


def bdf2_reference(A, levels, u0, f):
    """Variable-step BDF2 with a backward Euler first step for u' + A u = f(t).

    ``A`` is a square matrix; ``f`` a callable returning vectors.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    I = np.eye(A.shape[0])
    t = np.asarray(levels, dtype=float)
    us = [np.atleast_1d(np.asarray(u0, dtype=float))]
    h = t[1] - t[0]
    us.append(np.linalg.solve(I / h + A, us[0] / h + f(t[1])))
    for n in range(2, t.size):
        w = lagrange_derivative_weights(t[n - 2 : n + 1], t[n])
        rhs = f(t[n]) - w[0] * us[n - 2] - w[1] * us[n - 1]
        us.append(np.linalg.solve(w[2] * I + A, rhs))
    return np.array(us)


def trapezoidal_reference(A, tau, N, u0, f):
    """Uniform-step trapezoidal rule with node-sampled forcing."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    I = np.eye(A.shape[0])
    us = [np.atleast_1d(np.asarray(u0, dtype=float))]
    lhs = I + 0.5 * tau * A
    expl = I - 0.5 * tau * A
    for n in range(1, N + 1):
        rhs = expl @ us[-1] + 0.5 * tau * (f(n * tau) + f((n - 1) * tau))
        us.append(np.linalg.solve(lhs, rhs))
    return np.array(us)


def dirichlet_eigs_1d(count):
    """Exact eigenvalues of -d2/dx2 on (-1, 1) with zero boundary values."""
    k = np.arange(1, count + 1)
    return (k * np.pi / 2.0) ** 2


def relative_deviation(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), np.finfo(float).tiny))
