"""Step-ratio thresholds for positive semi-definiteness of the WSBDF2 kernels.

``r_p(theta)`` is the simple sufficient bound, ``r_s(theta)`` the sharp one:
the unique positive root of ``(1-2θ)^2 r^3 - 4θ^2 r^2 - 4θ r - 1 = 0``.
Both are infinite at ``theta = 1/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import build_kernels
from .mesh import Mesh


class ConsistencyError(ArithmeticError):
    """Two independent evaluations of the same quantity disagree."""


def _check_theta(theta: float):
    if not theta >= 0.5:
        raise ValueError(f"ratio bounds need theta >= 1/2, got {theta}")


def r_suboptimal(theta: float) -> float:
    _check_theta(theta)
    if theta == 0.5:
        return math.inf
    return (2.0 + 2.0 * math.sqrt(2.0 * theta)) / (2.0 * theta - 1.0)


def optimal_cubic(theta: float, r):
    """Left side of the cubic whose positive root is ``r_s(theta)``."""
    return (1.0 - 2.0 * theta) ** 2 * r**3 - 4.0 * theta**2 * r**2 - 4.0 * theta * r - 1.0


def _cubic_root(theta: float) -> float:
    a = (1.0 - 2.0 * theta) ** 2
    p = lambda r: ((a * r - 4.0 * theta**2) * r - 4.0 * theta) * r - 1.0
    dp = lambda r: (3.0 * a * r - 8.0 * theta**2) * r - 4.0 * theta
    lo, hi = 0.0, 1.0
    while p(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
    # p(lo) < 0 < p(hi); Newton steps that leave the bracket fall back to bisection
    r = hi
    for _ in range(200):
        fr = p(r)
        if fr == 0.0:
            return r
        if fr < 0.0:
            lo = r
        else:
            hi = r
        d = dp(r)
        step = r - fr / d if d != 0.0 else math.nan
        r_new = step if lo < step < hi else 0.5 * (lo + hi)
        if abs(r_new - r) <= 4e-16 * r_new:
            return r_new
        r = r_new
    return r


def r_optimal_closed_form(theta: float) -> float:
    """Cardano-type closed form using real cube roots."""
    _check_theta(theta)
    if theta == 0.5:
        return math.inf
    t = theta
    E = 16 * t**4 + 48 * t**3 - 48 * t**2 + 12 * t
    F = 16 * t**3 + 36 * t**2 - 36 * t + 9
    G = 384 * t**5 + 912 * t**4 - 2496 * t**3 + 1944 * t**2 - 648 * t + 81
    a = (1.0 - 2.0 * t) ** 2
    if G < 0:
        return math.nan
    sg = math.sqrt(G)
    c1 = np.cbrt(-4 * t**2 * E + 3 * a * (-F + sg) / 2)
    c2 = np.cbrt(-4 * t**2 * E + 3 * a * (-F - sg) / 2)
    return float((4 * t**2 - c1 - c2) / (3 * a))


def r_optimal(theta: float, check: bool = True) -> float:
    """Optimal ratio bound ``r_s(theta)``.

    Computed by safeguarded Newton on the cubic; with ``check`` the closed
    form is evaluated too and a relative mismatch above 1e-6 raises.
    """
    _check_theta(theta)
    if theta == 0.5:
        return math.inf
    root = _cubic_root(theta)
    if check:
        closed = r_optimal_closed_form(theta)
        if not abs(closed - root) <= 1e-6 * root:
            raise ConsistencyError(f"r_s({theta}): root {root!r} vs closed form {closed!r}")
    return root


@dataclass(frozen=True)
class LkTrace:
    theta: float
    ratios: np.ndarray
    values: np.ndarray
    truncated: bool = False

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.values > 0)) and not self.truncated

    def first_nonpositive(self) -> int | None:
        """1-based index of the first ``l_k <= 0``, or None."""
        idx = np.flatnonzero(self.values <= 0)
        return int(idx[0]) + 1 if idx.size else None


def lk_recursion(theta: float, ratios) -> LkTrace:
    """Scaled pivots ``l_1 .. l_n`` of ``B + B^T``; ``ratios`` are ``r_2..r_n``."""
    r = np.asarray(ratios, dtype=float)
    vals = np.empty(r.size + 1)
    vals[0] = 2.0
    c = (2.0 * theta - 1.0) ** 2
    for i, rk in enumerate(r, start=1):
        prev = vals[i - 1]
        if prev == 0.0:
            return LkTrace(theta, r, vals[:i].copy(), truncated=True)
        vals[i] = 2.0 / (1.0 + rk) ** 2 * ((1.0 + rk) * (1.0 + 2.0 * theta * rk) - c * rk**3 / (2.0 * prev))
    return LkTrace(theta, r, vals)


def lk_first_negative(theta: float, r: float, kmax: int) -> int | None:
    """First k <= kmax with ``l_k < 0`` for the constant ratio sequence ``r``."""
    c = (2.0 * theta - 1.0) ** 2
    base = (1.0 + r) * (1.0 + 2.0 * theta * r)
    scale = 2.0 / (1.0 + r) ** 2
    tail = c * r**3 / 2.0
    l = 2.0
    for k in range(2, kmax + 1):
        l = scale * (base - tail / l)
        if l < 0:
            return k
    return None


def h_function(theta: float, x: float, y: float) -> float:
    if x < 0 or y < 0:
        raise ValueError("h is defined for nonnegative arguments")
    return (2 * (1 + 2 * theta * x) + (1 - 2 * theta) * x**1.5) / (1 + x) - (2 * theta - 1) * y**1.5 / (1 + y)


@dataclass(frozen=True)
class PsdResult:
    passed: bool
    min_eigenvalue: float
    threshold: float


def balanced_symmetric_part(theta: float, ratios) -> np.ndarray:
    """``S^{1/2} (B + B^T)/2 S^{1/2}`` with ``S = diag(tau)``, from the ratios alone.

    The entries depend only on theta and ``r_2..r_N``, so the matrix can be
    formed for ratio sequences whose steps would over- or underflow.
    """
    r = np.asarray(ratios, dtype=float)
    diag = np.ones(r.size + 1)
    diag[1:] = (1.0 + 2.0 * theta * r) / (1.0 + r)
    off = 0.5 * (1.0 - 2.0 * theta) * r**1.5 / (1.0 + r)
    return np.diag(diag) + np.diag(off, -1) + np.diag(off, 1)


def _min_eig(H) -> float:
    try:
        return float(np.linalg.eigvalsh(H)[0])
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("symmetric eigensolver did not converge") from exc


def psd_oracle(mesh: Mesh, theta: float, tol: float = 1e-10, balanced: bool = False) -> PsdResult:
    """Dense eigenvalue check that ``(B + B^T)/2`` is positive semi-definite.

    With ``balanced=True`` the symmetric part is congruence-scaled by
    ``diag(sqrt(tau))`` first.  Sylvester's law of inertia keeps the
    eigenvalue signs, and the scaled matrix has O(1) entries even when the
    steps span many orders of magnitude.  The pass threshold is
    ``-tol * ||B||_inf`` of whichever matrix was decomposed.
    """
    if balanced:
        return psd_oracle_ratios(theta, mesh.ratios, tol)
    B = build_kernels(mesh, theta).dense()
    lam = _min_eig(0.5 * (B + B.T))
    threshold = -tol * float(np.abs(B).sum(axis=1).max())
    return PsdResult(lam >= threshold, lam, threshold)


def psd_oracle_ratios(theta: float, ratios, tol: float = 1e-10) -> PsdResult:
    """Balanced check for a bare ratio sequence ``r_2..r_N``."""
    H = balanced_symmetric_part(theta, ratios)
    # the scaled B is H's lower triangle doubled off the diagonal
    norm = float((np.abs(np.diag(H)) + 2.0 * np.abs(np.concatenate(([0.0], np.diag(H, -1))))).max())
    lam = _min_eig(H)
    threshold = -tol * norm
    return PsdResult(lam >= threshold, lam, threshold)


def a_stability_root(theta: float) -> float:
    """Modulus of the nonzero root of ``theta xi^2 + (1-theta) xi``."""
    if theta == 0:
        raise ValueError("theta = 0 leaves a degenerate characteristic polynomial")
    return abs((1.0 - theta) / theta)
