"""Variable-step WSBDF2 time stepping for ``u' + A u = f``.

Step 1 uses BDF1 for the difference quotient; every step ``n`` solves

    (b0[n] I + theta A) u^n = b0[n] u^{n-1} - b1[n] (u^{n-1} - u^{n-2})
                              - (1 - theta) A u^{n-1} + theta f^n + (1 - theta) f^{n-1}

with ``b1[1] = 0``.  Diagnostics (energy, L2 stability bound, consistency
error) are computed from the stored trace.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .kernels import apply_D2, build_doc_recursive, build_kernels
from .mesh import Mesh

class SpatialProblem(Protocol):
    """Discrete positive (semi-)definite operator ``A`` with its geometry."""

    def apply(self, v: np.ndarray) -> np.ndarray: ...

    def solve_shifted(self, sigma: float, mu: float, rhs: np.ndarray) -> np.ndarray: ...

    def inner(self, v: np.ndarray, w: np.ndarray) -> float: ...

    def grad_norm(self, v: np.ndarray) -> float: ...

    def dof_count(self) -> int: ...


class ScalarProblem:
    """``A = lam`` on a single degree of freedom (or a vector of them)."""

    def __init__(self, lam: float, size: int = 1):
        if not lam >= 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)
        self.size = size

    def apply(self, v):
        return self.lam * np.asarray(v, dtype=float)

    def solve_shifted(self, sigma, mu, rhs):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        return np.asarray(rhs, dtype=float) / (sigma + mu * self.lam)

    def inner(self, v, w):
        return float(np.vdot(v, w))

    def norm(self, v):
        return float(np.sqrt(self.inner(v, v)))

    def grad_norm(self, v):
        return float(np.sqrt(self.lam * self.inner(v, v)))

    def dof_count(self):
        return self.size


class DenseProblem:
    """Symmetric positive definite matrix ``A`` with Euclidean inner product."""

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        self.A = A

    def apply(self, v):
        return self.A @ v

    def solve_shifted(self, sigma, mu, rhs):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        return np.linalg.solve(sigma * np.eye(self.A.shape[0]) + mu * self.A, rhs)

    def inner(self, v, w):
        return float(np.dot(v, w))

    def norm(self, v):
        return float(np.sqrt(self.inner(v, v)))

    def grad_norm(self, v):
        return float(np.sqrt(max(self.inner(v, self.A @ v), 0.0)))

    def dof_count(self):
        return self.A.shape[0]


class DivergenceError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite solution at step {step}")
        self.step = step


def _norm(problem, v) -> float:
    if hasattr(problem, "norm"):
        return float(problem.norm(v))
    return float(np.sqrt(max(problem.inner(v, v), 0.0)))


@dataclass
class SolutionTrace:
    """States and per-level scalars of one integration.

    ``states`` is ``None`` in low-memory mode; ``final_state`` is always
    kept.  ``rate_norms[k-1]`` holds ``||(u^k - u^{k-1}) / tau_k||``; the
    forcing norms are ``||f^n||`` for
    ``n = 0..N`` and ``||theta f^n + (1-theta) f^{n-1}||`` for ``n = 1..N``.
    """

    mesh: Mesh
    theta: float
    states: np.ndarray | None
    l2_norms: np.ndarray
    grad_norms: np.ndarray
    rate_norms: np.ndarray
    forcing_norms: np.ndarray
    combined_forcing_norms: np.ndarray
    final_state: np.ndarray


def _forcing_sampler(forcing, mesh: Mesh, shape):
    if forcing is None:
        zero = np.zeros(shape)
        return lambda n: zero
    if callable(forcing):
        return lambda n: np.asarray(forcing(float(mesh.levels[n])), dtype=float).reshape(shape)
    samples = np.asarray(forcing, dtype=float)
    if samples.shape[0] != mesh.N + 1:
        raise ValueError(f"need {mesh.N + 1} forcing samples, got {samples.shape[0]}")
    return lambda n: samples[n].reshape(shape)


def wsbdf2_solve(
    problem: SpatialProblem,
    mesh: Mesh,
    theta: float,
    u0,
    forcing: Callable[[float], np.ndarray] | np.ndarray | None = None,
    keep_states: bool = True,
) -> SolutionTrace:
    if not 0.5 <= theta <= 1.0:
        warnings.warn(f"theta={theta} outside [1/2, 1]: no stability guarantee", stacklevel=2)
    kern = build_kernels(mesh, theta)
    u_prev = np.array(u0, dtype=float)
    f_at = _forcing_sampler(forcing, mesh, u_prev.shape)
    N = mesh.N

    states = np.empty((N + 1,) + u_prev.shape) if keep_states else None
    l2 = np.empty(N + 1)
    grad = np.empty(N + 1)
    rate = np.empty(N)
    fnorm = np.empty(N + 1)
    fcomb = np.empty(N)

    if keep_states:
        states[0] = u_prev
    l2[0] = _norm(problem, u_prev)
    grad[0] = problem.grad_norm(u_prev)
    f_prev = f_at(0)
    fnorm[0] = _norm(problem, f_prev)

    A_prev = problem.apply(u_prev)
    u_older = None
    for n in range(1, N + 1):
        b0 = kern.b0[n - 1]
        f_now = f_at(n)
        fmix = theta * f_now + (1.0 - theta) * f_prev
        rhs = b0 * u_prev - (1.0 - theta) * A_prev + fmix
        if n >= 2:
            rhs -= kern.b1[n - 1] * (u_prev - u_older)
        u_now = problem.solve_shifted(b0, theta, rhs)
        if not np.all(np.isfinite(u_now)):
            raise DivergenceError(n)

        if keep_states:
            states[n] = u_now
        l2[n] = _norm(problem, u_now)
        grad[n] = problem.grad_norm(u_now)
        rate[n - 1] = _norm(problem, u_now - u_prev) / mesh.steps[n - 1]
        fnorm[n] = _norm(problem, f_now)
        fcomb[n - 1] = _norm(problem, fmix)

        u_older, u_prev, f_prev = u_prev, u_now, f_now
        A_prev = problem.apply(u_prev)

    return SolutionTrace(mesh, float(theta), states, l2, grad, rate, fnorm, fcomb, u_prev)


@dataclass(frozen=True)
class EnergyTrace:
    """``values[k] = E^k`` for ``k = 0..N-1``."""

    values: np.ndarray

    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def energy_trace(trace: SolutionTrace, problem: SpatialProblem | None = None) -> EnergyTrace:
    """Modified discrete energy.

    The rate term of ``E^k`` uses ``r_{k+1}``, so the last level ``k = N``
    has no energy.  Norms are recomputed from the states when both the
    states and the problem are available.
    """
    mesh, theta = trace.mesh, trace.theta
    N = mesh.N
    if N < 2:
        raise ValueError("energy needs at least two steps")
    if trace.states is not None and problem is not None:
        grad = np.array([problem.grad_norm(u) for u in trace.states[:N]])
        rate = np.array(
            [_norm(problem, trace.states[k] - trace.states[k - 1]) / mesh.steps[k - 1] for k in range(1, N)]
        )
    else:
        grad = trace.grad_norms[:N]
        rate = trace.rate_norms[: N - 1]
    r_next = mesh.ratios  # r_{k+1} for k = 1..N-1
    tau = mesh.steps[: N - 1]
    weight = (2.0 * theta - 1.0) * r_next**1.5 / (1.0 + r_next)
    E = np.empty(N)
    E[0] = grad[0] ** 2
    E[1:] = weight * tau * rate**2 + grad[1:] ** 2
    return EnergyTrace(E)


@dataclass(frozen=True)
class DissipationResult:
    passed: bool
    worst_violation: float
    worst_step: int | None


def check_dissipation(energy: EnergyTrace, tol: float = 1e-12) -> DissipationResult:
    """Check ``E^k <= E^{k-1}`` relative to ``max(E^0, tiny)``."""
    E = energy.values
    scale = max(float(E[0]), np.finfo(float).tiny)
    rel = np.diff(E) / scale
    if rel.size == 0:
        return DissipationResult(True, 0.0, None)
    k = int(np.argmax(rel))
    worst = float(rel[k])
    return DissipationResult(worst <= tol, worst, k + 1)


@dataclass(frozen=True)
class StabilityResult:
    passed: bool
    min_slack: float
    bound: np.ndarray
    doc_bound: np.ndarray


def check_l2_stability(trace: SolutionTrace, f_norms=None, rtol: float = 1e-12) -> StabilityResult:
    """Evaluate ``||u^n|| <= ||u^0|| + 2 t_n max_{1<=j<=n} ||f^j||`` for all n.

    ``doc_bound`` holds the sharper intermediate bound that weights the
    combined forcing norms by the DOC kernels.
    """
    mesh, theta = trace.mesh, trace.theta
    fn = trace.forcing_norms if f_norms is None else np.asarray(f_norms, dtype=float)
    running_max = np.maximum.accumulate(fn[1:])
    bound = trace.l2_norms[0] + 2.0 * mesh.levels[1:] * running_max
    doc = build_doc_recursive(build_kernels(mesh, theta))
    if f_norms is None:
        fcomb = trace.combined_forcing_norms
    else:
        fcomb = theta * fn[1:] + (1.0 - theta) * fn[:-1]
    doc_bound = trace.l2_norms[0] + 2.0 * np.cumsum(doc.d @ fcomb)
    slack = bound - trace.l2_norms[1:]
    scale = max(float(trace.l2_norms[0]), 1.0)
    return StabilityResult(bool(np.all(slack >= -rtol * scale)), float(slack.min()), bound, doc_bound)


@dataclass(frozen=True)
class ConsistencyReport:
    eta_norms: np.ndarray
    aggregate: float
    partial_aggregates: np.ndarray


def consistency_error(mesh: Mesh, theta: float, u, du, norm=None) -> ConsistencyReport:
    """Truncation error ``eta^j = D2 u(t_j) - theta u'(t_j) - (1-theta) u'(t_{j-1})``.

    ``partial_aggregates[n-1] = sum_{k<=n} sum_{j<=k} d_{k-j}^{(k)} ||eta^j||``;
    ``aggregate`` is its value at ``n = N``.
    """
    norm = norm or (lambda v: float(np.linalg.norm(np.ravel(v))))
    t = mesh.levels
    vals = np.array([np.asarray(u(ti), dtype=float) for ti in t])
    ders = np.array([np.asarray(du(ti), dtype=float) for ti in t])
    eta = apply_D2(mesh, theta, vals) - theta * ders[1:] - (1.0 - theta) * ders[:-1]
    eta_norms = np.array([norm(e) for e in eta])
    doc = build_doc_recursive(build_kernels(mesh, theta))
    partial = np.cumsum(doc.d @ eta_norms)
    return ConsistencyReport(eta_norms, float(partial[-1]), partial)


def trace_to_csv(trace: SolutionTrace, energy: EnergyTrace | None = None, errors=None) -> str:
    """Rows ``n,t_n,l2_norm,grad_norm,energy,error_vs_exact``."""
    lines = ["n,t_n,l2_norm,grad_norm,energy,error_vs_exact"]
    for n in range(trace.mesh.N + 1):
        e = repr(float(energy.values[n])) if energy is not None and n < energy.values.size else ""
        err = repr(float(errors[n])) if errors is not None else ""
        lines.append(
            f"{n},{trace.mesh.levels[n]!r},{trace.l2_norms[n]!r},{trace.grad_norms[n]!r},{e},{err}"
        )
    return "\n".join(lines) + "\n"
