import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from qrtomo.basis import (OperatorMatrices, assemble_A_B, assemble_D1_D2,
                          build_basis, check_invertibility,
                          gram_derivative_matrix)
from qrtomo.errors import DomainError
from qrtomo.geometry import build_grid, test_domain

D = 3.5


@pytest.fixture(scope="module")
def basis15():
    return build_basis(15, D)


def exact_weighted_moments(kmax, d):
    """int_-d^d a^k e^{2a} da by the integration-by-parts recurrence."""
    m = np.empty(kmax + 1)
    m[0] = (np.exp(2 * d) - np.exp(-2 * d)) / 2.0
    for k in range(1, kmax + 1):
        m[k] = (d ** k * np.exp(2 * d) - (-d) ** k * np.exp(-2 * d)) / 2.0 - k * m[k - 1] / 2.0
    return m


class TestBasis:
    def test_single_function_is_normalized_exponential(self):
        b = build_basis(1, D)
        norm2 = exact_weighted_moments(0, D)[0]
        alphas = np.linspace(-D, D, 7)
        np.testing.assert_allclose(b.evaluate(alphas)[:, 0],
                                   np.exp(alphas) / np.sqrt(norm2), rtol=1e-12)

    def test_quadrature_integrates_weighted_powers_exactly(self, basis15):
        # the stored rule must handle poly(2N-2) * e^{2a}; compare with the
        # closed-form recurrence
        exact = exact_weighted_moments(28, D)
        for k in range(29):
            got = np.sum(basis15.weights * basis15.nodes ** k * np.exp(2 * basis15.nodes))
            assert got == pytest.approx(exact[k], rel=1e-13)

    def test_orthonormality_against_independent_quadrature(self, basis15):
        nodes, weights = leggauss(2000)
        psi = basis15.evaluate(nodes * D)
        gram = (psi * (weights * D)[:, None]).T @ psi
        assert np.abs(gram - np.eye(15)).max() < 1e-10

    def test_orthonormality_under_stored_rule(self, basis15):
        assert np.abs(basis15.inner_products() - np.eye(15)).max() < 1e-10

    def test_polynomial_part_has_exact_degree(self, basis15):
        for n in range(1, 16):
            coeffs = basis15.poly_monomial_coeffs(n)
            assert len(coeffs) == n
            assert coeffs[-1] != 0.0

    def test_derivative_matches_finite_difference(self, basis15):
        alphas = np.linspace(-3.0, 3.0, 11)
        h = 1e-6
        fd = (basis15.evaluate(alphas + h) - basis15.evaluate(alphas - h)) / (2 * h)
        np.testing.assert_allclose(basis15.evaluate_derivative(alphas), fd,
                                   rtol=1e-6, atol=1e-6)


class TestDerivativeGram:
    def test_unit_diagonal(self, basis15):
        M = gram_derivative_matrix(basis15)
        assert np.abs(np.diag(M) - 1.0).max() < 1e-8

    def test_vanishing_below_diagonal(self, basis15):
        M = gram_derivative_matrix(basis15)
        assert np.abs(np.tril(M, -1)).max() < 1e-8

    def test_unit_determinant(self, basis15):
        M = gram_derivative_matrix(basis15)
        assert abs(np.linalg.det(M) - 1.0) < 1e-6


class TestCouplingMatrices:
    def test_d1_symmetric(self, basis15):
        D1, _ = assemble_D1_D2(basis15, (0.37, 1.9))
        assert np.abs(D1 - D1.T).max() < 1e-12

    def test_below_source_line_rejected(self, basis15):
        with pytest.raises(DomainError):
            assemble_D1_D2(basis15, (0.0, 0.0))
        with pytest.raises(DomainError):
            assemble_D1_D2(basis15, (0.0, -1.0))

    def test_against_adaptive_quadrature(self):
        b = build_basis(4, D)
        rng = np.random.default_rng(7)
        for _ in range(5):
            x = rng.uniform(-1, 1)
            y = rng.uniform(1.0, 3.0)
            D1, D2 = assemble_D1_D2(b, (x, y))
            for m in range(4):
                for n in range(4):
                    psi_m = lambda a: b.evaluate(np.array([a]))[0, m]
                    psi_n = lambda a: b.evaluate(np.array([a]))[0, n]
                    dpsi_n = lambda a: b.evaluate_derivative(np.array([a]))[0, n]
                    d1_ref = quad(lambda a: (x - a) / ((x - a) ** 2 + y ** 2)
                                  * psi_m(a) * psi_n(a), -D, D, limit=200)[0]
                    d2_ref = quad(lambda a: -(x - a) / y * psi_m(a) * dpsi_n(a)
                                  + y / ((x - a) ** 2 + y ** 2) * psi_m(a) * psi_n(a),
                                  -D, D, limit=200)[0]
                    assert D1[m, n] == pytest.approx(d1_ref, rel=1e-8, abs=1e-10)
                    assert D2[m, n] == pytest.approx(d2_ref, rel=1e-8, abs=1e-10)

    def test_norm_decays_with_height(self, basis15):
        # doubling the height shrinks the norm by roughly the bound's 1/a^2
        for x in (-0.5, 0.0, 0.7):
            n_low = np.linalg.norm(assemble_D1_D2(basis15, (x, 2.0))[0])
            n_high = np.linalg.norm(assemble_D1_D2(basis15, (x, 4.0))[0])
            assert n_low >= 3.0 * n_high

    def test_quadrature_order_converged(self):
        b1 = build_basis(8, D, quad_order=256)
        b2 = build_basis(8, D, quad_order=512)
        for point in [(-0.3, 1.2), (0.8, 2.9)]:
            for got, ref in zip(assemble_D1_D2(b1, point), assemble_D1_D2(b2, point)):
                assert np.abs(got - ref).max() < 1e-10


class TestOperatorFields:
    @pytest.fixture(scope="class")
    def ops(self):
        config = test_domain(1, T_x=12, N=15)
        return assemble_A_B(build_grid(config), build_basis(15, D))

    def test_A_is_minus_D2(self, ops):
        assert np.array_equal(ops.A_field, -ops.D2_field)

    def test_B_plus_D1_is_MN(self, ops):
        np.testing.assert_array_equal(ops.B_field + ops.D1_field,
                                      np.broadcast_to(ops.M_N, ops.B_field.shape))

    def test_first_benchmark_geometry_invertible(self, ops):
        report = check_invertibility(ops)
        assert report.worst > 0.0

    def test_identity_field_report(self):
        n = 5
        eye = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
        ops = OperatorMatrices(M_N=np.eye(3), D1_field=np.zeros((n, 3, 3)),
                               D2_field=np.zeros((n, 3, 3)), A_field=eye.copy(),
                               B_field=eye, grid_shape=(n, 1))
        report = check_invertibility(ops)
        assert report.worst == pytest.approx(1.0)
        assert not report.near_singular.any()

    def test_taller_standoff_better_conditioned(self):
        b = build_basis(8, D)
        near = assemble_A_B(build_grid(test_domain(1, T_x=8, N=8)), b)
        far = assemble_A_B(build_grid(test_domain(2, T_x=8, N=8)), b)
        assert check_invertibility(far).worst > check_invertibility(near).worst

    def test_longer_source_segment_degrades_conditioning(self):
        worsts = []
        for d in (3.5, 7.0, 12.0):
            b = build_basis(8, d)
            config = test_domain(1, T_x=8, N=8, d=d)
            worsts.append(check_invertibility(assemble_A_B(build_grid(config), b)).worst)
        assert worsts[0] > worsts[1] > worsts[2]
