"""Numerical checks of the analytical backbone.

Two statements admit direct numerical verification: the weighted energy
inequality underpinning uniqueness of the regularized solve (for functions
on [a, b] vanishing at b, the weighted derivative energy dominates half of
itself plus half of lambda^2 times the weighted mass), and the linear
convergence rate of the regularized solution as the data noise goes to zero
with the regularization tied to the noise level squared.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson, trapezoid

from . import forward, solver
from .basis import assemble_A_B, build_basis
from .errors import DomainError
from .geometry import DomainConfig, build_grid, source_positions


@dataclass(frozen=True)
class CarlemanEntry:
    lam: float
    lhs: float
    rhs: float
    slack: float
    quad_tolerance: float


@dataclass
class CarlemanReport:
    entries: list

    def all_nonnegative(self, tol: float = -1e-8) -> bool:
        return all(e.slack >= tol for e in self.entries)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["lambda", "lhs", "rhs", "slack", "quad_tolerance"])
            for e in self.entries:
                wr.writerow([repr(e.lam), repr(e.lhs), repr(e.rhs),
                             repr(e.slack), repr(e.quad_tolerance)])

    def summary(self) -> str:
        ok = self.all_nonnegative()
        worst = min(e.slack for e in self.entries) if self.entries else 0.0
        return f"carleman: {'PASS' if ok else 'FAIL'} ({len(self.entries)} cases, min slack {worst:.3e})"


def carleman_check(y, w, lam, boundary_tol=1e-9) -> CarlemanEntry:
    """Evaluate both sides of the weighted inequality for one test function.

    ``w`` holds samples on the uniform grid ``y`` over [a, b] and must vanish
    at the right endpoint; the derivative is taken by central differences and
    both sides integrated with composite Simpson.  The returned quadrature
    tolerance is the Simpson-vs-trapezoid discrepancy, a cheap error gauge.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    scale = float(np.abs(w).max()) or 1.0
    if abs(w[-1]) > boundary_tol * scale:
        raise DomainError(f"test function must vanish at b: w(b) = {w[-1]!r}")
    weight = np.exp(2.0 * lam * y)
    dw = np.gradient(w, y)
    f_deriv = dw ** 2 * weight
    f_mass = w ** 2 * weight
    lhs = simpson(f_deriv, x=y)
    rhs = 0.5 * simpson(f_deriv, x=y) + 0.5 * lam ** 2 * simpson(f_mass, x=y)
    lhs_t = trapezoid(f_deriv, x=y)
    rhs_t = 0.5 * lhs_t + 0.5 * lam ** 2 * trapezoid(f_mass, x=y)
    quad_tol = abs(lhs - lhs_t) + abs(rhs - rhs_t)
    return CarlemanEntry(lam=float(lam), lhs=float(lhs), rhs=float(rhs),
                         slack=float(lhs - rhs), quad_tolerance=float(quad_tol))


def random_admissible_polynomials(a, b, count, max_degree=6, seed=0, n_grid=2001):
    """Random polynomials with the w(b) = 0 constraint imposed by subtracting
    the boundary value; returns (y, list of sample vectors)."""
    rng = np.random.default_rng(seed)
    y = np.linspace(a, b, n_grid)
    out = []
    for _ in range(count):
        deg = int(rng.integers(1, max_degree + 1))
        coeffs = rng.normal(size=deg + 1)
        w = np.polyval(coeffs, y)
        w = w - np.polyval(coeffs, b)
        out.append(w)
    return y, out


@dataclass(frozen=True)
class ConvergenceRow:
    delta: float
    eps: float
    error: float


@dataclass
class ConvergenceTable:
    rows: list
    reference_eps: float

    def errors(self):
        return np.array([r.error for r in self.rows])

    def ratios(self):
        e = self.errors()
        return e[:-1] / e[1:]

    def loglog_slope(self) -> float:
        d = np.array([r.delta for r in self.rows])
        e = self.errors()
        keep = (d > 0) & (e > 0)
        if keep.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log(d[keep]), np.log(e[keep]), 1)[0])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["delta", "eps", "h1_error"])
            for r in self.rows:
                wr.writerow([repr(r.delta), repr(r.eps), repr(r.error)])

    def summary(self, ratio_band=(1.3, 3.0), slope_band=(0.5, 1.5)) -> str:
        ratios = self.ratios()
        slope = self.loglog_slope()
        ok = all(ratio_band[0] <= r <= ratio_band[1] for r in ratios) and \
            slope_band[0] <= slope <= slope_band[1]
        return (f"convergence: {'PASS' if ok else 'FAIL'} "
                f"(ratios {np.array2string(ratios, precision=2)}, slope {slope:.2f})")


def convergence_study(test_id, deltas, config: DomainConfig | None = None,
                      seed=0, reference_eps=1e-6) -> ConvergenceTable:
    """Solve the full pipeline at decreasing noise with eps1 = eps2 = delta^2.

    The error for each noise level is the semi-discrete H^1 distance between
    that solve and a clean-data reference solve run at ``reference_eps``
    (standing in for the vanishing-regularization limit, which is not
    computable directly: the unregularized normal matrix is numerically
    singular).  delta = 0 rows reuse the reference regularization and hence
    report an exactly zero error.
    """
    from .geometry import test_domain

    config = config or test_domain(test_id)
    grid = build_grid(config)
    sources = source_positions(config)
    basis = build_basis(config.N, config.d)
    phantom = forward.phantom_for_test(test_id, config)
    clean = forward.compute_boundary_data(phantom, grid, sources)
    ops = assemble_A_B(grid, basis)
    system = solver.assemble_functional_matrix(config, ops)
    bidx = solver.boundary_flat_indices(config, clean.bi, clean.bj)

    def run(delta, eps):
        data = forward.add_noise(clean, delta, seed) if delta > 0 else clean
        g = forward.boundary_coefficients(data, basis, sources).g
        cfg = solver.SolverConfig(eps1=eps, eps2=eps)
        C = solver.assemble_normal_matrix(system, cfg)
        field, _ = solver.solve_constrained(C, bidx, g, config, cfg)
        return field

    reference = run(0.0, reference_eps)
    rows = []
    for delta in deltas:
        eps = delta ** 2 if delta > 0 else reference_eps
        field = run(float(delta), eps)
        err = solver.discrete_h1_norm(field.values - reference.values,
                                      config.h_x, config.h_y)
        rows.append(ConvergenceRow(delta=float(delta), eps=float(eps), error=err))
    return ConvergenceTable(rows=rows, reference_eps=reference_eps)
