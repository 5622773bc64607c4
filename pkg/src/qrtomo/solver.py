"""Discrete quasi-reversibility functional and the constrained normal solve.

The unknown is the stacked coefficient field u_n(x_i, y_j).  The PDE residual
matrix M applies, at every interior stencil point (i, j), the forward-difference
form of A U_x + B U_y: weight -(A/h_x + B/h_y) at (i, j), A/h_x at (i+1, j)
and B/h_y at (i, j+1).  The regularized normal matrix is

    C = M^T M + eps1 * Id + eps2 * (Dx^T Dx + Dy^T Dy)

with Dx, Dy forward-difference approximations of the partial derivatives.
Boundary unknowns are eliminated (never penalized), so the returned field
matches the imposed boundary values exactly.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import BasisSet, OperatorMatrices
from .errors import ConditioningError, ConfigurationError, SolverError
from .geometry import DomainConfig, Grid

#: above this many free unknowns the solver switches from a direct sparse
#: factorization to block-Jacobi preconditioned CG (memory-bound choice)
DIRECT_LIMIT = 60_000


@dataclass(frozen=True)
class SolverConfig:
    eps1: float = 0.1
    eps2: float = 0.01
    tol: float = 1e-10
    maxiter: int = 50_000
    method: str = "auto"          # "auto" | "direct" | "cg"

    def __post_init__(self):
        if self.eps1 < 0 or self.eps2 < 0:
            raise ConfigurationError(
                f"regularization weights must be >= 0, got ({self.eps1}, {self.eps2})")
        if self.method not in ("auto", "direct", "cg"):
            raise ConfigurationError(f"unknown solver method {self.method!r}")


@dataclass(frozen=True)
class SparseSystem:
    """Functional matrix, difference matrices and layout metadata."""

    M: sp.csr_matrix
    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    T_x: int
    N: int
    h_x: float
    h_y: float

    @property
    def n_unknowns(self) -> int:
        return (self.T_x + 1) ** 2 * self.N


@dataclass(frozen=True)
class CoefficientField:
    """u_n(x_i, y_j) indexed [i, j, n]; flattening matches the solver layout."""

    values: np.ndarray

    @property
    def N(self) -> int:
        return self.values.shape[2]

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class SolveDiagnostics:
    method: str
    iterations: int
    residual: float              # final relative residual of the reduced system
    functional_value: float
    pde_term: float
    l2_term: float
    grad_term: float


def _flat0(i, j, n, T_x, N):
    # 0-based layout: (i * (T_x+1) + j) * N + n
    return (i * (T_x + 1) + j) * N + n


def assemble_functional_matrix(config: DomainConfig, ops: OperatorMatrices) -> SparseSystem:
    """Build M from the interior stencil and the forward-difference matrices.

    Rows cover interior stencil points i, j in {2..T_x} (1-based) times the N
    components; every row touches the 3N unknowns of its three stencil points.
    """
    T, N = config.T_x, config.N
    NN = config.n_unknowns
    h_x, h_y = config.h_x, config.h_y

    ii, jj = np.meshgrid(np.arange(1, T), np.arange(1, T), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    pidx = ii * (T + 1) + jj
    nrows = len(ii)
    Ah = ops.A_field[pidx] / h_x
    Bh = ops.B_field[pidx] / h_y
    row_base = np.arange(nrows, dtype=np.int64) * N
    mrow = row_base[:, None, None] + np.arange(N)[None, :, None] + np.zeros((1, 1, N), np.int64)

    rows, cols, data = [], [], []

    def block(ci, cj, blk):
        c0 = _flat0(ci.astype(np.int64), cj, 0, T, N)
        ccol = c0[:, None, None] + np.zeros((1, N, 1), np.int64) + np.arange(N)[None, None, :]
        rows.append(np.broadcast_to(mrow, blk.shape).ravel())
        cols.append(np.broadcast_to(ccol, blk.shape).ravel())
        data.append(blk.ravel())

    block(ii, jj, -(Ah + Bh))
    block(ii + 1, jj, Ah)
    block(ii, jj + 1, Bh)
    M = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nrows * N, NN)).tocsr()

    def diff_matrix(axis):
        iD, jD = np.meshgrid(np.arange(T), np.arange(T), indexing="ij")
        iD, jD = iD.ravel().astype(np.int64), jD.ravel().astype(np.int64)
        nr = len(iD)
        rD = np.repeat(np.arange(nr, dtype=np.int64) * N, N) + np.tile(np.arange(N), nr)
        plus = _flat0(iD + 1, jD, 0, T, N) if axis == 0 else _flat0(iD, jD + 1, 0, T, N)
        minus = _flat0(iD, jD, 0, T, N)
        h = h_x if axis == 0 else h_y
        rr = np.concatenate([rD, rD])
        cc = np.concatenate([np.repeat(plus, N) + np.tile(np.arange(N), nr),
                             np.repeat(minus, N) + np.tile(np.arange(N), nr)])
        dd = np.concatenate([np.full(nr * N, 1.0 / h), np.full(nr * N, -1.0 / h)])
        return sp.coo_matrix((dd, (rr, cc)), shape=(nr * N, NN)).tocsr()

    return SparseSystem(M=M, Dx=diff_matrix(0), Dy=diff_matrix(1),
                        T_x=T, N=N, h_x=h_x, h_y=h_y)


def assemble_normal_matrix(system: SparseSystem, cfg: SolverConfig) -> sp.csr_matrix:
    """C = M^T M + eps1 Id + eps2 (Dx^T Dx + Dy^T Dy), exactly symmetric."""
    NN = system.n_unknowns
    C = system.M.T @ system.M
    if cfg.eps1 != 0.0:
        C = C + cfg.eps1 * sp.identity(NN, format="csr")
    if cfg.eps2 != 0.0:
        C = C + cfg.eps2 * (system.Dx.T @ system.Dx)
        C = C + cfg.eps2 * (system.Dy.T @ system.Dy)
    C = C.tocsr()
    return (C + C.T) * 0.5


def boundary_flat_indices(config: DomainConfig, bi, bj) -> np.ndarray:
    """0-based flat indices of all N components at boundary points (bi, bj)."""
    base = _flat0(np.asarray(bi, np.int64), np.asarray(bj, np.int64), 0,
                  config.T_x, config.N)
    return (base[:, None] + np.arange(config.N)[None, :]).ravel()


def _block_jacobi(Cff: sp.csr_matrix, N: int):
    coo = Cff.tocoo()
    keep = coo.row // N == coo.col // N
    nblk = Cff.shape[0] // N
    blocks = np.zeros((nblk, N, N))
    blocks[coo.row[keep] // N, coo.row[keep] % N, coo.col[keep] % N] = coo.data[keep]
    try:
        chol = np.linalg.cholesky(blocks)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError("block-Jacobi preconditioner is not positive "
                                "definite; the normal matrix is singular") from exc

    def apply(v):
        z = np.linalg.solve(chol, v.reshape(nblk, N, 1))
        z = np.linalg.solve(np.transpose(chol, (0, 2, 1)), z)
        return z.ravel()

    return spla.LinearOperator(Cff.shape, matvec=apply)


def solve_constrained(C: sp.csr_matrix, boundary_idx, boundary_values,
                      config: DomainConfig, cfg: SolverConfig | None = None,
                      system: SparseSystem | None = None
                      ) -> tuple[CoefficientField, SolveDiagnostics]:
    """Minimize the quadratic form of C subject to fixed boundary unknowns.

    Boundary entries are eliminated, so the reduced SPD system on the free
    unknowns is C_FF u_F = -C_FB g_B and the constraints hold exactly in the
    returned field.  Small systems are factorized directly; large ones use
    conjugate gradients with a per-lattice-point block-Jacobi preconditioner.
    """
    cfg = cfg or SolverConfig()
    NN = C.shape[0]
    free = np.ones(NN, dtype=bool)
    free[boundary_idx] = False
    full = np.zeros(NN)
    full[np.asarray(boundary_idx).ravel()] = np.asarray(boundary_values).ravel()
    Cf = C[free]
    rhs = -(Cf[:, ~free] @ full[~free])
    Cff = Cf[:, free]

    method = cfg.method
    if method == "auto":
        method = "direct" if Cff.shape[0] <= DIRECT_LIMIT else "cg"

    iterations = 0
    if method == "direct":
        try:
            lu = spla.splu(Cff.tocsc())
        except RuntimeError as exc:
            raise ConditioningError(f"normal matrix factorization failed: {exc}") from exc
        u_free = lu.solve(rhs)
    else:
        prec = _block_jacobi(Cff, config.N)
        counter = [0]

        def cb(_):
            counter[0] += 1

        u_free, info = spla.cg(Cff, rhs, rtol=cfg.tol, atol=0.0,
                               maxiter=cfg.maxiter, M=prec, callback=cb)
        iterations = counter[0]
        if info > 0:
            resid = float(np.linalg.norm(Cff @ u_free - rhs) / max(np.linalg.norm(rhs), 1e-300))
            raise SolverError(
                f"conjugate gradients did not reach rtol={cfg.tol} within "
                f"{cfg.maxiter} iterations (relative residual {resid:.3e})",
                residual=resid, iterations=iterations)

    rnorm = float(np.linalg.norm(rhs))
    residual = float(np.linalg.norm(Cff @ u_free - rhs) / (rnorm if rnorm > 0 else 1.0))
    full[free] = u_free
    field = CoefficientField(values=full.reshape(config.T_x + 1, config.T_x + 1, config.N))

    pde = l2 = grad = np.nan
    if system is not None:
        pde = float(np.sum((system.M @ full) ** 2))
        l2 = float(np.sum(full ** 2))
        grad = float(np.sum((system.Dx @ full) ** 2) + np.sum((system.Dy @ full) ** 2))
    functional = pde + cfg.eps1 * l2 + cfg.eps2 * grad if system is not None else np.nan
    return field, SolveDiagnostics(method=method, iterations=iterations,
                                   residual=residual, functional_value=functional,
                                   pde_term=pde, l2_term=l2, grad_term=grad)


def functional_value(system: SparseSystem, cfg: SolverConfig, flat_u) -> float:
    """J(u) = |M u|^2 + eps1 |u|^2 + eps2 (|Dx u|^2 + |Dy u|^2)."""
    flat_u = np.asarray(flat_u).ravel()
    return float(np.sum((system.M @ flat_u) ** 2)
                 + cfg.eps1 * np.sum(flat_u ** 2)
                 + cfg.eps2 * (np.sum((system.Dx @ flat_u) ** 2)
                               + np.sum((system.Dy @ flat_u) ** 2)))


def evaluate_u(field: CoefficientField, basis: BasisSet, grid: Grid, x, y, alpha):
    """Truncated series u(x, y, alpha) = sum_n u_n(x, y) Psi_n(alpha) at a lattice point."""
    i = int(np.argmin(np.abs(grid.xs - x)))
    j = int(np.argmin(np.abs(grid.ys - y)))
    if abs(grid.xs[i] - x) > 1e-9 * max(1.0, abs(x)) + 1e-12 or \
       abs(grid.ys[j] - y) > 1e-9 * max(1.0, abs(y)) + 1e-12:
        raise ConfigurationError(f"({x}, {y}) is not a lattice point")
    psi = basis.evaluate(np.atleast_1d(alpha))
    out = psi @ field.values[i, j]
    return float(out[0]) if np.isscalar(alpha) else out


def discrete_h1_norm(values: np.ndarray, h_x: float, h_y: float) -> float:
    """Semi-discrete H^1 norm: sum over interior x-lines of
    h_x * int_a^b [ (central-x diff)^2 + (d/dy)^2 + (.)^2 ] dy, summed over
    components, with the y-integral by the trapezoid rule on the lattice."""
    if values.ndim == 2:
        values = values[:, :, None]
    ux = (values[2:, :, :] - values[:-2, :, :]) / (2.0 * h_x)
    uy = np.gradient(values, h_y, axis=1)[1:-1, :, :]
    u = values[1:-1, :, :]
    integrand = ux ** 2 + uy ** 2 + u ** 2
    line = np.trapezoid(integrand, dx=h_y, axis=1)
    return float(np.sqrt(h_x * line.sum()))


def write_diagnostics_csv(path, diag: SolveDiagnostics, label="") -> None:
    """Append one diagnostics row per run (header written on creation)."""
    new = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        wr = csv.writer(fh)
        if new:
            wr.writerow(["label", "method", "iterations", "residual",
                         "functional", "pde_term", "l2_term", "grad_term"])
        wr.writerow([label, diag.method, diag.iterations, repr(diag.residual),
                     repr(diag.functional_value), repr(diag.pde_term),
                     repr(diag.l2_term), repr(diag.grad_term)])
