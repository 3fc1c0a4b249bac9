"""Discrete convolution kernels of the variable-step WSBDF2 operator.

The operator is ``D2 v^n = b0[n] (v^n - v^{n-1}) + b1[n] (v^{n-1} - v^{n-2})``
with ``D2 v^1 = (v^1 - v^0) / tau_1``.  Arrays are 0-based: ``b0[n-1]`` holds
the coefficient of step ``n`` and ``b1[0] = 0``.

The DOC kernels are the entries of ``D = B^{-1}`` where ``B`` is the lower
bidiagonal matrix with diagonal ``b0`` and subdiagonal ``b1[1:]``.  They are
stored densely: ``d[n-1, k-1] = d_{n-k}^{(n)}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .mesh import Mesh


class DegenerateKernelError(ArithmeticError):
    pass


@dataclass(frozen=True)
class KernelTable:
    theta: float
    b0: np.ndarray
    b1: np.ndarray

    @property
    def N(self) -> int:
        return self.b0.size

    def dense(self) -> np.ndarray:
        """Materialize the bidiagonal matrix ``B`` (testing and small N only)."""
        B = np.diag(self.b0)
        B[np.arange(1, self.N), np.arange(self.N - 1)] = self.b1[1:]
        return B


@dataclass(frozen=True)
class DocTable:
    d: np.ndarray

    @property
    def N(self) -> int:
        return self.d.shape[0]

    def row(self, n: int) -> np.ndarray:
        """Kernels ``d_{n-k}^{(n)}`` for ``k = 1..n`` (1-based ``n``)."""
        return self.d[n - 1, :n]

    def row_sums(self) -> np.ndarray:
        return self.d.sum(axis=1)


def build_kernels(mesh: Mesh, theta: float) -> KernelTable:
    tau = mesh.steps
    r = mesh.ratios
    b0 = np.empty(mesh.N)
    b1 = np.zeros(mesh.N)
    b0[0] = 1.0 / tau[0]
    b0[1:] = (1.0 + 2.0 * theta * r) / (tau[1:] * (1.0 + r))
    b1[1:] = (1.0 - 2.0 * theta) * r**2 / (tau[1:] * (1.0 + r))
    b0.setflags(write=False)
    b1.setflags(write=False)
    return KernelTable(float(theta), b0, b1)


def _check_b0(kernels: KernelTable):
    if np.any(kernels.b0 == 0.0):
        k = int(np.flatnonzero(kernels.b0 == 0.0)[0]) + 1
        raise DegenerateKernelError(f"b0 vanishes at step {k}")


def doc_rows(kernels: KernelTable) -> Iterator[np.ndarray]:
    """Yield the DOC rows one at a time (``O(N)`` memory per row)."""
    _check_b0(kernels)
    b0, b1 = kernels.b0, kernels.b1
    # multiplier linking column k to column k+1 (0-based): -b1[k+1] / b0[k]
    link = -b1[1:] / b0[:-1]
    for n in range(1, kernels.N + 1):
        row = np.empty(n)
        row[n - 1] = 1.0 / b0[n - 1]
        for k in range(n - 2, -1, -1):
            row[k] = link[k] * row[k + 1]
        yield row


def build_doc_recursive(kernels: KernelTable) -> DocTable:
    N = kernels.N
    d = np.zeros((N, N))
    for n, row in enumerate(doc_rows(kernels), start=1):
        d[n - 1, :n] = row
    d.setflags(write=False)
    return DocTable(d)


def build_doc_explicit(kernels: KernelTable, mesh: Mesh) -> DocTable:
    """Closed-form DOC kernels: ``(1/b0[k]) prod_{i=k+1}^{n} q_i``.

    ``q_i = (2 theta - 1) r_i^2 / (1 + 2 theta r_i)`` is taken from the mesh
    ratios, not from the stored kernels.
    """
    _check_b0(kernels)
    theta = kernels.theta
    N = mesh.N
    r = mesh.ratios
    q = np.zeros(N)
    q[1:] = (2.0 * theta - 1.0) * r**2 / (1.0 + 2.0 * theta * r)
    d = np.zeros((N, N))
    for n in range(1, N + 1):
        # tail[k] = prod_{i=k+1}^{n} q_i over 0-based positions k+1..n-1
        tail = np.ones(n)
        if n > 1:
            tail[:-1] = np.cumprod(q[1:n][::-1])[::-1]
        d[n - 1, :n] = tail / kernels.b0[:n]
    d.setflags(write=False)
    return DocTable(d)


def orthogonality_residual(kernels: KernelTable, doc: DocTable) -> np.ndarray:
    """Matrix of ``sum_j d_{n-j}^{(n)} b_{j-k}^{(j)} - delta_{nk}`` for k <= n.

    Each entry is divided by ``max(1, largest summand)`` so that rows whose
    kernels are large still compare at the rounding level.
    """
    if doc.N != kernels.N:
        raise ValueError("kernel and DOC tables have different sizes")
    d = doc.d
    N = kernels.N
    diag_term = d * kernels.b0[None, :]
    off_term = np.zeros_like(d)
    off_term[:, :-1] = d[:, 1:] * kernels.b1[None, 1:]
    res = diag_term + off_term - np.eye(N)
    scale = np.maximum(1.0, np.maximum(np.abs(diag_term), np.abs(off_term)))
    return np.tril(res / scale)


def check_orthogonality(kernels: KernelTable, doc: DocTable, tol: float = 1e-12) -> tuple[bool, float]:
    worst = float(np.abs(orthogonality_residual(kernels, doc)).max())
    return worst <= tol, worst


def apply_D2(mesh: Mesh, theta: float, values) -> np.ndarray:
    """WSBDF2 difference quotients ``D2 v^1 .. D2 v^N``.

    ``values`` has shape ``(N+1,)`` or ``(N+1, ...)``; trailing axes are
    treated as grid-function components.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[0] != mesh.N + 1:
        raise ValueError(f"expected {mesh.N + 1} values, got {v.shape[0]}")
    kern = build_kernels(mesh, theta)
    grad = np.diff(v, axis=0)
    shape = (-1,) + (1,) * (v.ndim - 1)
    out = kern.b0.reshape(shape) * grad
    out[1:] += kern.b1[1:].reshape(shape) * grad[:-1]
    return out


def doc_apply(doc: DocTable, seq) -> np.ndarray:
    """Return ``sum_{j=1}^{k} d_{k-j}^{(k)} seq^j`` for every ``k``."""
    s = np.asarray(seq, dtype=float)
    return np.tensordot(doc.d, s, axes=(1, 0))
