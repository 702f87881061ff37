"""Forward problems in diagonalised form.

A problem is stored by its singular values and the coefficients of the
true solution and exact data in the singular bases. The deriv2 test
problem (Green's function of the second derivative, Galerkin
discretisation with box functions) can be symmetrised into this form.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateOperatorError, InvalidArgument, NumericalFailure

SVD_TOL = 1e-9
RANK_TOL = 1e-14


@dataclass(frozen=True)
class DenseOperator:
    entries: np.ndarray
    h: float

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class SymmetrizedFactor:
    """The factor A of K = A^T A together with its SVD and right-hand side b."""

    A: DenseOperator
    b: np.ndarray
    sigma: np.ndarray
    U: np.ndarray
    V: np.ndarray

    def project(self, z: np.ndarray) -> np.ndarray:
        """Coefficients (A^T z, v_j) = sigma_j(A) (z, u_j) for rows of `z`."""
        return (np.asarray(z) @ self.U) * self.sigma


@dataclass(frozen=True)
class SpectralProblem:
    sigma: np.ndarray
    xhat: np.ndarray
    yhat: np.ndarray
    decay_q: Optional[float] = None
    factor: Optional[SymmetrizedFactor] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("sigma", "xhat", "yhat"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.sigma.shape == self.xhat.shape == self.yhat.shape):
            raise InvalidArgument("sigma, xhat and yhat must have equal length")
        if self.sigma.ndim != 1 or self.sigma.size == 0:
            raise InvalidArgument("problem needs at least one component")
        if np.any(self.sigma <= 0) or np.any(np.diff(self.sigma) > 0):
            raise InvalidArgument("sigma must be positive and nonincreasing")

    @property
    def m(self) -> int:
        return self.sigma.size


def _problem_from_sigma(sigma, xhat, decay_q=None, factor=None):
    xhat = np.asarray(xhat, dtype=float)
    return SpectralProblem(sigma=sigma, xhat=xhat, yhat=sigma * xhat,
                           decay_q=decay_q, factor=factor)


def make_diagonal_problem(m: int, q: float, scale: float, xhat) -> SpectralProblem:
    """Diagonal operator with sigma_j = scale * j^(-q/2)."""
    if m < 1 or q <= 0 or scale <= 0:
        raise InvalidArgument(f"need m >= 1, q > 0, scale > 0 (got {m}, {q}, {scale})")
    xhat = np.asarray(xhat, dtype=float)
    if xhat.shape != (m,):
        raise InvalidArgument(f"xhat must have length {m}")
    j = np.arange(1, m + 1, dtype=float)
    sigma = scale * j ** (-q / 2)
    return _problem_from_sigma(sigma, xhat, decay_q=q)


# Continuous antiderivatives of the exact solution x(t) and data y(s) for
# the three deriv2 examples. Box-function Galerkin coefficients are
# differences of these over each cell, scaled by 1/sqrt(h).
def _case1():
    return (lambda t: t ** 2 / 2,
            lambda s: (s ** 4 / 4 - s ** 2 / 2) / 6)


def _case2():
    e = np.e
    return (np.exp,
            lambda s: np.exp(s) + (1 - e) * s ** 2 / 2 - s)


def _case3():
    def xint(t):
        return np.where(t < 0.5, t ** 2 / 2, t - t ** 2 / 2 - 0.25)

    def yint(s):
        left = (s ** 4 - 1.5 * s ** 2) / 24
        right = (-s ** 4 + 4 * s ** 3 - 4.5 * s ** 2 + s - 0.125) / 24
        return np.where(s < 0.5, left, right)

    return xint, yint


_DERIV2_CASES = {1: _case1, 2: _case2, 3: _case3}


def deriv2_kernel(s, t):
    """Green's function of d^2/ds^2 on [0, 1] with zero boundary values."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.where(s <= t, s * (t - 1), t * (s - 1))


def make_deriv2(m: int, case: int = 1):
    """Galerkin discretisation of the deriv2 integral equation.

    Returns ``(A, x_true, b)``. Entries are the exact cell-pair integrals of
    the kernel against normalised box functions; the kernel is bilinear on
    each off-diagonal cell pair, and the diagonal cells are integrated over
    both triangles in closed form.

    Parameters
    ----------
    m : int
        Number of cells on [0, 1], at least 2.
    case : {1, 2, 3}
        1: x(t) = t; 2: x(t) = exp(t); 3: hat function peaking at 1/2.
    """
    if m < 2:
        raise InvalidArgument("deriv2 needs m >= 2")
    if case not in _DERIV2_CASES:
        raise InvalidArgument(f"unknown deriv2 case {case!r}")
    h = 1.0 / m
    i = np.arange(1, m + 1, dtype=float)
    I, J = np.meshgrid(i, i, indexing="ij")
    lo = np.minimum(I, J)
    hi = np.maximum(I, J)
    A = h * h * (lo - 0.5) * ((hi - 0.5) * h - 1)
    diag = h * h * ((i * i - i + 0.25) * h - (i - 2.0 / 3.0))
    A[np.diag_indices(m)] = diag

    xint, yint = _DERIV2_CASES[case]()
    grid = np.arange(m + 1) * h
    sqh = np.sqrt(h)
    x_true = np.diff(xint(grid)) / sqh
    b = np.diff(yint(grid)) / sqh
    return DenseOperator(entries=A, h=h), x_true, b


def svd(A: DenseOperator):
    """Thin SVD with sigma nonincreasing and V columns sign-normalised.

    The first entry of each right singular vector whose magnitude exceeds
    1e-12 of the column maximum is made positive; U follows.
    """
    M = np.asarray(A.entries if isinstance(A, DenseOperator) else A, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InvalidArgument("operator has non-finite entries")
    try:
        U, sigma, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}", residual=np.inf) from exc
    V = Vt.T.copy()
    for c in range(V.shape[1]):
        col = V[:, c]
        big = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())
        if big.size and col[big[0]] < 0:
            V[:, c] = -col
            U[:, c] = -U[:, c]

    scale = sigma[0] if sigma.size and sigma[0] > 0 else 1.0
    residual = np.abs(M @ V - U * sigma).max(initial=0.0)
    gram = max(np.abs(U.T @ U - np.eye(U.shape[1])).max(initial=0.0),
               np.abs(V.T @ V - np.eye(V.shape[1])).max(initial=0.0))
    if residual > SVD_TOL * scale or gram > SVD_TOL:
        raise NumericalFailure(
            f"SVD accuracy check failed (residual {residual:.3e}, gram {gram:.3e})",
            residual=residual)
    return sigma, U, V


def symmetrize(A: DenseOperator, x_true, b) -> SpectralProblem:
    """Problem for K = A^T A with the singular basis of A kept for projections."""
    sigma_a, U, V = svd(A)
    if sigma_a[-1] < RANK_TOL * sigma_a[0]:
        raise DegenerateOperatorError(
            f"sigma_min/sigma_max = {sigma_a[-1] / sigma_a[0]:.3e} below {RANK_TOL}")
    x_true = np.asarray(x_true, dtype=float)
    factor = SymmetrizedFactor(A=A, b=np.asarray(b, dtype=float),
                               sigma=sigma_a, U=U, V=V)
    sigma_k = sigma_a ** 2
    return _problem_from_sigma(sigma_k, V.T @ x_true, decay_q=8.0, factor=factor)


def deriv2_problem(m: int, case: int = 1) -> SpectralProblem:
    return symmetrize(*make_deriv2(m, case))


def export_problem(problem: SpectralProblem, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "sigma", "xhat", "yhat"])
        for j, (s, x, y) in enumerate(zip(problem.sigma, problem.xhat, problem.yhat), 1):
            w.writerow([j, f"{s:.17g}", f"{x:.17g}", f"{y:.17g}"])


def import_problem(path) -> SpectralProblem:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["j", "sigma", "xhat", "yhat"]:
            raise InvalidArgument(f"{path}: unexpected header {header}")
        rows = [[float(v) for v in row[1:]] for row in r if row]
    data = np.array(rows, dtype=float).reshape(-1, 3)
    return SpectralProblem(sigma=data[:, 0], xhat=data[:, 1], yhat=data[:, 2])
