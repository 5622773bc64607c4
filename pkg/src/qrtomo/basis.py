"""Orthonormal exponential-polynomial basis and the PDE coupling matrices.

The basis of L^2(-d, d) is obtained by orthonormalizing the degree-graded
family {alpha^(n-1) e^alpha}: each element has the form
Psi_n(alpha) = P_{n-1}(alpha) e^alpha with deg P_{n-1} = n-1 exactly.  Its
distinguishing property is that the derivative Gram matrix
M_N[m, n] = <Psi_n', Psi_m> is unit upper triangular, hence has determinant 1
and is invertible at every truncation order.

Orthonormalization is done by a Householder QR of the quadrature-weighted
sample matrix, with the polynomial parts represented in a scaled Legendre
basis.  QR keeps the computed basis orthonormal to machine precision at
N ~ 15, where triangular (Cholesky/Gram-Schmidt) factorizations of the
moment matrix break down: that matrix has condition number ~1e19 and is not
numerically positive definite in double precision.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import ConditioningError, DomainError
from .geometry import Grid

#: Gauss-Legendre node count for every alpha-integral in the pipeline
QUAD_ORDER = 256


@dataclass(frozen=True)
class BasisSet:
    """Truncated orthonormal basis with quadrature and cached samples.

    ``leg_coeffs[:, n]`` are the scaled-Legendre coefficients of the
    polynomial part of Psi_{n+1}: Psi_{n+1}(alpha) = e^alpha *
    sum_k leg_coeffs[k, n] * L_k(alpha / d), L_k the k-th Legendre polynomial.
    """

    N: int
    d: float
    leg_coeffs: np.ndarray        # (N, N), upper triangular
    nodes: np.ndarray             # quadrature nodes on (-d, d)
    weights: np.ndarray
    #: samples of Psi_n and Psi_n' at the quadrature nodes, shape (len(nodes), N)
    samples: np.ndarray = field(repr=False)
    dsamples: np.ndarray = field(repr=False)

    def evaluate(self, alpha) -> np.ndarray:
        """Psi_n(alpha) for all n; returns shape (len(alpha), N)."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        V = npleg.legvander(alpha / self.d, self.N - 1)
        return (V @ self.leg_coeffs) * np.exp(alpha)[:, None]

    def evaluate_derivative(self, alpha) -> np.ndarray:
        """Psi_n'(alpha) = (P_{n-1}' + P_{n-1}) e^alpha for all n."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        dcoeffs = np.vstack([npleg.legder(self.leg_coeffs, axis=0) / self.d,
                             np.zeros((1, self.N))])
        V = npleg.legvander(alpha / self.d, self.N - 1)
        return (V @ self.leg_coeffs + V @ dcoeffs) * np.exp(alpha)[:, None]

    def poly_monomial_coeffs(self, n: int) -> np.ndarray:
        """Monomial coefficients (ascending) of P_{n-1} for 1-based n."""
        leg = self.leg_coeffs[:, n - 1]
        mono_scaled = npleg.leg2poly(leg)                 # polynomial in t = alpha/d
        k = np.arange(len(mono_scaled))
        return mono_scaled / self.d ** k

    def inner_products(self) -> np.ndarray:
        """Gram matrix <Psi_m, Psi_n> under the stored quadrature."""
        return (self.samples * self.weights[:, None]).T @ self.samples


def build_basis(N: int, d: float, quad_order: int = QUAD_ORDER) -> BasisSet:
    """Orthonormalize {alpha^(n-1) e^alpha} on (-d, d).

    quad_order must resolve products of two basis elements (degree <= 2N-2
    polynomials times e^{2 alpha}); the default 256-node rule is far beyond
    that for any practical N and keeps all downstream integrals on one rule.
    """
    if N < 1:
        raise ConditioningError(f"need N >= 1, got {N}")
    if d <= 0:
        raise DomainError(f"need d > 0, got {d}")
    t, w = npleg.leggauss(quad_order)
    nodes = t * d
    weights = w * d
    raw = npleg.legvander(nodes / d, N - 1) * np.exp(nodes)[:, None]
    Q, R = np.linalg.qr(np.sqrt(weights)[:, None] * raw)
    diag = np.diag(R)
    if np.min(np.abs(diag)) < np.finfo(float).eps * np.max(np.abs(diag)) * quad_order:
        raise ConditioningError(
            f"orthonormalization lost rank at N={N}, d={d}: "
            f"min |R_nn| = {np.min(np.abs(diag)):.3e} vs max {np.max(np.abs(diag)):.3e}")
    signs = np.sign(diag)
    signs[signs == 0] = 1.0
    coeffs = np.linalg.solve(signs[:, None] * R, np.eye(N))
    basis = BasisSet(N=N, d=d, leg_coeffs=coeffs, nodes=nodes, weights=weights,
                     samples=np.empty(0), dsamples=np.empty(0))
    samples = basis.evaluate(nodes)
    dsamples = basis.evaluate_derivative(nodes)
    object.__setattr__(basis, "samples", samples)
    object.__setattr__(basis, "dsamples", dsamples)
    return basis


def gram_derivative_matrix(basis: BasisSet) -> np.ndarray:
    """M_N[m, n] = <Psi_n', Psi_m>: unit diagonal, zero below, det 1."""
    return (basis.samples * basis.weights[:, None]).T @ basis.dsamples


def assemble_D1_D2(basis: BasisSet, point) -> tuple[np.ndarray, np.ndarray]:
    """Coupling matrices of the first-order system at one point (x, y), y > 0.

    D1[m, n] = int (x-a)/|x-x_a|^2 Psi_m Psi_n da  (symmetric),
    D2[m, n] = int [-(x-a)/y Psi_m Psi_n' + y/|x-x_a|^2 Psi_m Psi_n] da,
    both over the stored quadrature rule; |x-x_a|^2 = (x-a)^2 + y^2 never
    vanishes for y > 0.
    """
    x, y = float(point[0]), float(point[1])
    if y <= 0:
        raise DomainError(f"point must lie strictly above the source line: y = {y}")
    al = basis.nodes
    w = basis.weights
    dx = x - al
    rho2 = dx ** 2 + y ** 2
    V, Vd = basis.samples, basis.dsamples
    D1 = (V * (w * dx / rho2)[:, None]).T @ V
    D2 = (V * (w * (-dx / y))[:, None]).T @ Vd + (V * (w * y / rho2)[:, None]).T @ V
    return D1, D2


@dataclass(frozen=True)
class OperatorMatrices:
    """Per-grid-point matrices of the coupled system A U_x + B U_y = 0.

    Fields are flattened over grid points in row-major (i, j) order:
    shape (n_points, N, N).  A = -D2 and B = M_N - D1 pointwise.
    """

    M_N: np.ndarray
    D1_field: np.ndarray
    D2_field: np.ndarray
    A_field: np.ndarray
    B_field: np.ndarray
    grid_shape: tuple[int, int]

    @property
    def n_points(self) -> int:
        return self.A_field.shape[0]


def assemble_A_B(grid: Grid, basis: BasisSet) -> OperatorMatrices:
    """Assemble D1, D2 and A = -D2, B = M_N - D1 at every lattice point."""
    X, Y = grid.meshgrid()
    xf, yf = X.ravel(), Y.ravel()
    if np.any(yf <= 0):
        raise DomainError("grid extends to y <= 0; the source line must lie outside")
    al, w = basis.nodes, basis.weights
    V, Vd = basis.samples, basis.dsamples
    dx = xf[:, None] - al[None, :]                       # (P, Q)
    rho2 = dx ** 2 + yf[:, None] ** 2
    D1 = np.einsum("pq,qm,qn->pmn", w[None, :] * dx / rho2, V, V, optimize=True)
    D2 = (np.einsum("pq,qm,qn->pmn", w[None, :] * (-dx / yf[:, None]), V, Vd, optimize=True)
          + np.einsum("pq,qm,qn->pmn", w[None, :] * (yf[:, None] / rho2), V, V, optimize=True))
    M_N = gram_derivative_matrix(basis)
    return OperatorMatrices(M_N=M_N, D1_field=D1, D2_field=D2,
                            A_field=-D2, B_field=M_N[None, :, :] - D1,
                            grid_shape=(grid.n, grid.n))


@dataclass(frozen=True)
class InvertibilityReport:
    """Smallest singular values / condition numbers of B over the grid."""

    min_singular_values: np.ndarray      # per grid point
    condition_numbers: np.ndarray
    near_singular: np.ndarray            # bool mask, sigma_min < tol
    tol: float

    @property
    def worst(self) -> float:
        return float(self.min_singular_values.min())

    def summary(self) -> str:
        n_bad = int(self.near_singular.sum())
        return (f"min sigma(B) = {self.worst:.3e}, max cond(B) = "
                f"{self.condition_numbers.max():.3e}, "
                f"{n_bad} point(s) within {self.tol:.0e} of singular")


def check_invertibility(ops: OperatorMatrices, tol: float = 1e-8) -> InvertibilityReport:
    """SVD-based pointwise invertibility report for the B field."""
    sv = np.linalg.svd(ops.B_field, compute_uv=False)
    smin, smax = sv[:, -1], sv[:, 0]
    with np.errstate(divide="ignore"):
        cond = np.where(smin > 0, smax / smin, np.inf)
    return InvertibilityReport(min_singular_values=smin, condition_numbers=cond,
                               near_singular=smin < tol, tol=tol)


def dump_matrices_csv(path, basis: BasisSet, points) -> None:
    """Debug dump of M_N and D1/D2 at selected (x, y) points as one CSV."""
    M_N = gram_derivative_matrix(basis)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["matrix", "x", "y", "m", "n", "value"])
        for m in range(basis.N):
            for n in range(basis.N):
                wr.writerow(["M_N", "", "", m + 1, n + 1, repr(M_N[m, n])])
        for (x, y) in points:
            D1, D2 = assemble_D1_D2(basis, (x, y))
            for name, mat in (("D1", D1), ("D2", D2)):
                for m in range(basis.N):
                    for n in range(basis.N):
                        wr.writerow([name, x, y, m + 1, n + 1, repr(mat[m, n])])
