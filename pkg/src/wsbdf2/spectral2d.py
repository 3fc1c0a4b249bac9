"""Chebyshev collocation for ``-Laplace`` on ``(-1, 1)^2`` with zero Dirichlet data.

Grid functions live on the interior nodes as arrays of shape
``(Mx - 1, My - 1)``; boundary values are identically zero.  Nodes are
ordered ascending, ``x_0 = -1 < ... < x_M = 1``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


def cgl_nodes(M: int) -> np.ndarray:
    if int(M) != M or M < 1:
        raise ValueError(f"need M >= 1, got {M}")
    k = np.arange(M + 1)
    # sin form is exactly antisymmetric about the midpoint
    return np.sin(np.pi * (2 * k - M) / (2 * M))


def cheb_diff_matrix(M: int) -> np.ndarray:
    """First-derivative collocation matrix on the ascending CGL nodes."""
    x = cgl_nodes(M)
    k = np.arange(M + 1)
    c = np.where((k == 0) | (k == M), 2.0, 1.0) * (-1.0) ** k
    i, j = np.meshgrid(k, k, indexing="ij")
    # x_i - x_j = 2 cos((i+j-M) pi / 2M) sin((i-j) pi / 2M) for ascending nodes
    dx = 2.0 * np.cos(np.pi * (i + j - M) / (2 * M)) * np.sin(np.pi * (i - j) / (2 * M))
    D = np.outer(c, 1.0 / c) / (dx + np.eye(M + 1))
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def clenshaw_curtis_weights(M: int) -> np.ndarray:
    """Clenshaw-Curtis weights on the CGL nodes (symmetric, sum to 2)."""
    if M < 1:
        raise ValueError("need M >= 1")
    theta = np.pi * np.arange(M + 1) / M
    w = np.zeros(M + 1)
    inner = np.arange(1, M)
    v = np.ones(M - 1)
    if M % 2 == 0:
        w[0] = w[M] = 1.0 / (M**2 - 1)
        for k in range(1, M // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
        v -= np.cos(M * theta[inner]) / (M**2 - 1)
    else:
        w[0] = w[M] = 1.0 / M**2
        for k in range(1, (M - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
    w[inner] = 2.0 * v / M
    return w


@dataclass(frozen=True)
class ChebGrid:
    Mx: int
    My: int
    x: np.ndarray
    y: np.ndarray
    wx: np.ndarray
    wy: np.ndarray

    @classmethod
    def build(cls, Mx: int, My: int | None = None) -> "ChebGrid":
        My = Mx if My is None else My
        return cls(Mx, My, cgl_nodes(Mx), cgl_nodes(My), clenshaw_curtis_weights(Mx), clenshaw_curtis_weights(My))

    def sample(self, fn) -> np.ndarray:
        """Evaluate ``fn(X, Y)`` on the full tensor grid (``indexing='ij'``)."""
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.asarray(fn(X, Y), dtype=float)

    def sample_interior(self, fn) -> np.ndarray:
        return self.sample(fn)[1:-1, 1:-1]

    def embed(self, interior: np.ndarray) -> np.ndarray:
        full = np.zeros((self.Mx + 1, self.My + 1))
        full[1:-1, 1:-1] = interior
        return full


def discrete_l2_norm(grid: ChebGrid, values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(np.einsum("i,j,ij->", grid.wx, grid.wy, v * v)))


def rms_norm(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(v * v)))


def max_norm(values) -> float:
    return float(np.max(np.abs(values)))


NORMS = {"cc": discrete_l2_norm, "rms": lambda grid, v: rms_norm(v), "max": lambda grid, v: max_norm(v)}


def _interior_second_derivative(M: int) -> np.ndarray:
    D = cheb_diff_matrix(M)
    return (D @ D)[1:-1, 1:-1]


class SpectralLaplacian:
    """Collocation ``A = -Laplace_h`` as the Kronecker sum of 1-D operators.

    ``A U = Ax U + U Ay^T`` for interior arrays ``U``.  The 1-D operators are
    diagonalized once; shifted solves then cost four dense matrix products.
    """

    def __init__(self, Mx: int, My: int | None = None):
        My = Mx if My is None else My
        if Mx < 2 or My < 2:
            raise ValueError("need at least one interior node per direction")
        self.grid = ChebGrid.build(Mx, My)
        self.Ax = -_interior_second_derivative(Mx)
        self.Ay = self.Ax if My == Mx else -_interior_second_derivative(My)
        self.lam_x, self.Vx, self.Vx_inv = self._eig(self.Ax)
        if My == Mx:
            self.lam_y, self.Vy, self.Vy_inv = self.lam_x, self.Vx, self.Vx_inv
        else:
            self.lam_y, self.Vy, self.Vy_inv = self._eig(self.Ay)
        self._wx = self.grid.wx[1:-1]
        self._wy = self.grid.wy[1:-1]

    @staticmethod
    def _eig(A):
        try:
            lam, V = np.linalg.eig(A)
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError("1-D eigendecomposition failed") from exc
        if np.max(np.abs(lam.imag)) > 1e-8 * np.max(np.abs(lam.real)):
            raise ArithmeticError("collocation operator has complex eigenvalues")
        lam, V = lam.real, V.real
        order = np.argsort(lam)
        lam, V = lam[order], V[:, order]
        return lam, V, np.linalg.inv(V)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.grid.Mx - 1, self.grid.My - 1)

    def dof_count(self) -> int:
        return (self.grid.Mx - 1) * (self.grid.My - 1)

    def eigenvalues(self) -> np.ndarray:
        return np.sort(np.add.outer(self.lam_x, self.lam_y).ravel())

    def apply(self, v):
        v = np.asarray(v, dtype=float).reshape(self.shape)
        return self.Ax @ v + v @ self.Ay.T

    def solve_shifted(self, sigma: float, mu: float, rhs):
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        if mu < 0:
            raise ValueError(f"mu must be nonnegative, got {mu}")
        r = np.asarray(rhs, dtype=float).reshape(self.shape)
        if mu == 0:
            return r / sigma
        hat = self.Vx_inv @ r @ self.Vy_inv.T
        hat /= sigma + mu * np.add.outer(self.lam_x, self.lam_y)
        return self.Vx @ hat @ self.Vy.T

    def solve_shifted_dense(self, sigma: float, mu: float, rhs):
        """Reference solve through the assembled Kronecker-sum matrix."""
        nx, ny = self.shape
        K = np.kron(self.Ax, np.eye(ny)) + np.kron(np.eye(nx), self.Ay)
        S = sigma * np.eye(nx * ny) + mu * K
        return np.linalg.solve(S, np.asarray(rhs, dtype=float).ravel()).reshape(self.shape)

    def inner(self, v, w) -> float:
        v = np.asarray(v, dtype=float).reshape(self.shape)
        w = np.asarray(w, dtype=float).reshape(self.shape)
        return float(np.einsum("i,j,ij->", self._wx, self._wy, v * w))

    def norm(self, v) -> float:
        return float(np.sqrt(max(self.inner(v, v), 0.0)))

    def grad_norm(self, v) -> float:
        return float(np.sqrt(max(self.inner(v, self.apply(v)), 0.0)))


def build_laplacian(Mx: int, My: int | None = None) -> SpectralLaplacian:
    return SpectralLaplacian(Mx, My)


def solve_shifted(op: SpectralLaplacian, sigma: float, mu: float, rhs):
    return op.solve_shifted(sigma, mu, rhs)


def grid_to_csv(grid: ChebGrid, values) -> str:
    """Rows ``i,j,x_i,y_j,value`` for a full-grid (or interior) array."""
    v = np.asarray(values, dtype=float)
    if v.shape == (grid.Mx - 1, grid.My - 1):
        v = grid.embed(v)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["i", "j", "x_i", "y_j", "value"])
    for i in range(grid.Mx + 1):
        for j in range(grid.My + 1):
            writer.writerow([i, j, repr(float(grid.x[i])), repr(float(grid.y[j])), repr(float(v[i, j]))])
    return buf.getvalue()
