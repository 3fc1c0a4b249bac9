"""Nonuniform time grids.

A :class:`Mesh` stores the step sizes ``tau[0..N-1]`` (``tau[k-1]`` is the
k-th step) and the time levels ``t[0..N]``.  Adjacent step ratios are kept
in ``ratios`` with ``ratios[k-2] = tau_k / tau_{k-1}`` for ``k = 2..N``.

Random meshes are drawn from :class:`numpy.random.Generator` backed by the
PCG64 bit generator, so a given seed reproduces the same mesh on any
platform running the same numpy major version.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Invalid mesh construction arguments."""


@dataclass(frozen=True)
class Mesh:
    """Immutable nonuniform time grid on ``[0, T]``."""

    steps: np.ndarray
    final_time: float
    levels: np.ndarray = field(init=False, repr=False)
    ratios: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        steps = np.array(self.steps, dtype=float)
        if steps.ndim != 1 or steps.size < 1:
            raise MeshError("a mesh needs at least one step")
        if not np.all(steps > 0) or not np.all(np.isfinite(steps)):
            raise MeshError("all steps must be positive and finite")
        T = float(self.final_time)
        if not T > 0:
            raise MeshError("final time must be positive")
        levels = np.concatenate(([0.0], np.cumsum(steps)))
        if abs(levels[-1] - T) > 1e-12 * T:
            raise MeshError(f"steps sum to {levels[-1]!r}, expected {T!r}")
        levels[-1] = T
        steps.setflags(write=False)
        levels.setflags(write=False)
        ratios = steps[1:] / steps[:-1]
        ratios.setflags(write=False)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "final_time", T)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "ratios", ratios)

    @property
    def N(self) -> int:
        return self.steps.size

    @property
    def tau(self) -> np.ndarray:
        return self.steps

    @property
    def t(self) -> np.ndarray:
        return self.levels

    @property
    def max_step(self) -> float:
        return float(self.steps.max())

    def ratio(self, k: int) -> float:
        """Return ``r_k = tau_k / tau_{k-1}`` for ``2 <= k <= N``."""
        if not 2 <= k <= self.N:
            raise IndexError(f"ratio index {k} outside 2..{self.N}")
        return float(self.ratios[k - 2])

    def max_ratio(self) -> float:
        return float(self.ratios.max()) if self.ratios.size else 1.0

    def to_csv(self) -> str:
        """Serialize as ``k,t_k,tau_k,r_k`` rows for k = 1..N (r_1 empty)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "t_k", "tau_k", "r_k"])
        for k in range(1, self.N + 1):
            r = repr(self.ratio(k)) if k >= 2 else ""
            writer.writerow([k, repr(float(self.levels[k])), repr(float(self.steps[k - 1])), r])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Mesh":
        rows = list(csv.DictReader(io.StringIO(text)))
        steps = [float(row["tau_k"]) for row in rows]
        return cls(np.array(steps), float(rows[-1]["t_k"]))


@dataclass(frozen=True)
class MeshReport:
    max_ratio: float
    violating_indices: list[int]
    r_s_used: float
    theta_out_of_range: bool = False

    @property
    def ok(self) -> bool:
        return not self.violating_indices


def _check_T_N(T, N):
    if not T > 0:
        raise MeshError(f"final time must be positive, got {T}")
    if int(N) != N or N < 1:
        raise MeshError(f"number of steps must be a positive integer, got {N}")


def uniform_mesh(T: float, N: int) -> Mesh:
    _check_T_N(T, N)
    return Mesh(np.full(int(N), T / N), T)


def case1_mesh(T: float, N: int) -> Mesh:
    """Alternating ratios 4, 1/4, 4, ... (steps tau_1, 4 tau_1, tau_1, ...)."""
    _check_T_N(T, N)
    if N % 2:
        raise MeshError(f"the alternating mesh needs an even N, got {N}")
    pattern = np.tile([1.0, 4.0], N // 2)
    tau1 = T / (5.0 * (N // 2))
    return Mesh(tau1 * pattern, T)


def geometric_mesh(T: float, N: int, r: float) -> Mesh:
    """Constant ratio ``r``: ``tau_k = tau_1 r**(k-1)``."""
    _check_T_N(T, N)
    if not r > 0:
        raise MeshError(f"ratio must be positive, got {r}")
    if r == 1.0:
        return uniform_mesh(T, N)
    powers = float(r) ** np.arange(N)
    # expm1 keeps tau_1 accurate for r near 1
    tau1 = T * np.expm1(np.log(r)) / np.expm1(N * np.log(r))
    return Mesh(tau1 * powers, T)


def random_mesh(T: float, N: int, seed: int, low: float = 0.0) -> Mesh:
    """Random steps ``tau_k = T eps_k / sum(eps)`` with ``eps_k ~ U(low, 1)``.

    ``low = 0`` gives the fully random meshes of the third experiment; a
    positive ``low`` caps every adjacent ratio at ``1/low``.
    """
    _check_T_N(T, N)
    if not 0.0 <= low < 1.0:
        raise MeshError(f"lower bound must lie in [0, 1), got {low}")
    rng = np.random.Generator(np.random.PCG64(seed))
    eps = rng.uniform(low, 1.0, size=int(N))
    while np.any(eps <= 0.0):
        bad = eps <= 0.0
        eps[bad] = rng.uniform(low, 1.0, size=int(bad.sum()))
    return Mesh(T * eps / eps.sum(), T)


def validate_mesh(mesh: Mesh, theta: float) -> MeshReport:
    """Flag every step whose ratio exceeds the optimal bound r_s(theta)."""
    from .ratio_bounds import r_optimal

    out_of_range = not 0.5 <= theta <= 1.0
    if out_of_range:
        warnings.warn(f"theta={theta} is outside [1/2, 1]; no ratio bound applies", stacklevel=2)
        r_s = r_optimal(min(max(theta, 0.5), 1.0))
    else:
        r_s = r_optimal(theta)
    bad = [k for k in range(2, mesh.N + 1) if mesh.ratios[k - 2] > r_s]
    return MeshReport(mesh.max_ratio(), bad, r_s, out_of_range)
