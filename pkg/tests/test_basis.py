import numpy as np
import pytest

from dngalerkin.basis import (
    BoxDomain,
    build_basis,
    default_quadrature_order,
    project_l2,
    tensor_quadrature,
)

UNIT_INTERVAL = BoxDomain(np.array([0.0]), np.array([1.0]))
UNIT_SQUARE = BoxDomain(np.zeros(2), np.ones(2))


class TestBoxDomain:
    def test_validation(self):
        with pytest.raises(ValueError):
            BoxDomain(np.array([0.0]), np.array([0.0]))
        with pytest.raises(ValueError):
            BoxDomain(np.zeros(4), np.ones(4))
        with pytest.raises(ValueError):
            BoxDomain(np.array([0.0, 1.0]), np.array([1.0, 0.5]))

    def test_volume_and_contains(self):
        box = BoxDomain(np.array([0.0, -1.0]), np.array([2.0, 1.0]))
        assert box.volume == pytest.approx(4.0)
        assert box.contains([1.0, 0.0])
        assert box.contains([0.0, -1.0])  # closed box
        assert not box.contains([3.0, 0.0])


class TestQuadrature:
    def test_weights_sum_to_volume(self):
        for box in (UNIT_INTERVAL, UNIT_SQUARE,
                    BoxDomain(np.array([-2.0, 0.0]), np.array([1.0, 0.5]))):
            quad = tensor_quadrature(box, 6)
            assert np.sum(quad.weights) == pytest.approx(box.volume, rel=1e-12)
            assert np.all(quad.weights > 0)

    def test_two_point_rule(self):
        quad = tensor_quadrature(UNIT_INTERVAL, 2)
        assert quad.nodes.shape == (2, 1)
        assert np.sum(quad.weights) == pytest.approx(1.0, rel=1e-14)
        # degree-3 exactness: int_0^1 x^3 dx = 1/4
        val = np.sum(quad.weights * quad.nodes[:, 0] ** 3)
        assert val == pytest.approx(0.25, rel=1e-14)

    def test_unit_square_constant(self):
        quad = tensor_quadrature(UNIT_SQUARE, 3)
        assert np.sum(quad.weights) == pytest.approx(1.0, rel=1e-14)

    def test_polynomial_exactness(self):
        quad = tensor_quadrature(UNIT_INTERVAL, 5)  # exact through degree 9
        for deg in range(10):
            val = np.sum(quad.weights * quad.nodes[:, 0] ** deg)
            assert val == pytest.approx(1.0 / (deg + 1), rel=1e-13)

    def test_rejects_low_order(self):
        with pytest.raises(ValueError):
            tensor_quadrature(UNIT_INTERVAL, 1)


class TestBasis:
    def test_single_mode_normalization(self):
        basis = build_basis(UNIT_INTERVAL, 1)
        quad = tensor_quadrature(UNIT_INTERVAL, 12)
        V, _, w = basis.tables(quad)
        assert V.shape == (12, 1)
        norm = np.sqrt(np.sum(w * V[:, 0] ** 2))
        assert norm == pytest.approx(1.0, rel=1e-12)
        # center value sqrt(2) sin(pi/2) = sqrt(2)
        assert basis.eval_modes([0.5])[0] == pytest.approx(np.sqrt(2.0), rel=1e-14)

    def test_rescaled_box_mode(self):
        box = BoxDomain(np.array([0.0]), np.array([2.0]))
        basis = build_basis(box, 1)
        quad = tensor_quadrature(box, 12)
        V, _, w = basis.tables(quad)
        assert np.sum(w * V[:, 0] ** 2) == pytest.approx(1.0, rel=1e-12)
        x = np.array([[0.7]])
        expected = np.sqrt(2.0 / 2.0) * np.sin(np.pi * 0.7 / 2.0)
        assert basis.eval_matrix(x)[0, 0] == pytest.approx(expected, rel=1e-14)

    def test_gram_identity_unit_square_order16(self):
        basis = build_basis(UNIT_SQUARE, 2)
        quad = tensor_quadrature(UNIT_SQUARE, 16)
        V, _, w = basis.tables(quad)
        gram = (V * w[:, None]).T @ V
        assert basis.size == 4
        assert np.max(np.abs(gram - np.eye(4))) < 1e-12

    @pytest.mark.parametrize("m,dim", [(4, 1), (8, 1), (3, 2), (6, 2), (2, 3)])
    def test_gram_identity_default_order(self, m, dim):
        box = BoxDomain(np.zeros(dim), np.ones(dim))
        basis = build_basis(box, m)
        quad = tensor_quadrature(box, default_quadrature_order(m))
        V, _, w = basis.tables(quad)
        gram = (V * w[:, None]).T @ V
        assert np.max(np.abs(gram - np.eye(basis.size))) < 1e-10

    def test_boundary_vanishing(self):
        basis = build_basis(UNIT_SQUARE, 3)
        for pt in ([0.0, 0.3], [1.0, 0.7], [0.2, 0.0], [0.9, 1.0]):
            assert np.max(np.abs(basis.eval_modes(pt))) == 0.0

    def test_outside_point_rejected(self):
        basis = build_basis(UNIT_INTERVAL, 2)
        with pytest.raises(ValueError):
            basis.eval_modes([1.5])
        with pytest.raises(ValueError):
            basis.grad_modes([-0.2])

    def test_gradient_center_first_mode(self):
        basis = build_basis(UNIT_INTERVAL, 1)
        grad = basis.grad_modes([0.5])
        assert grad[0, 0] == pytest.approx(0.0, abs=1e-14)

    def test_gradient_matches_finite_differences(self):
        basis = build_basis(UNIT_SQUARE, 3)
        rng = np.random.default_rng(0)
        pts = 0.1 + 0.8 * rng.random((5, 2))
        errors = []
        for h in (1e-3, 5e-4):
            worst = 0.0
            for x in pts:
                grad = basis.grad_modes(x)
                for d in range(2):
                    e = np.zeros(2)
                    e[d] = h
                    fd = (basis.eval_modes(x + e) - basis.eval_modes(x - e)) / (2 * h)
                    worst = max(worst, np.max(np.abs(fd - grad[:, d])))
            errors.append(worst)
        order = np.log2(errors[0] / errors[1]) / np.log2(2.0)
        assert order >= 1.9

    def test_stiffness_eigenvalues(self):
        basis = build_basis(UNIT_SQUARE, 2)
        lams = basis.stiffness_eigenvalues()
        expected = {
            (1, 1): 2 * np.pi**2,
            (1, 2): 5 * np.pi**2,
            (2, 1): 5 * np.pi**2,
            (2, 2): 8 * np.pi**2,
        }
        for idx, lam in zip(map(tuple, basis.indices), lams):
            assert lam == pytest.approx(expected[idx], rel=1e-14)


class TestProjection:
    def test_projects_basis_vector_to_unit_coefficient(self):
        basis = build_basis(UNIT_SQUARE, 2)
        quad = tensor_quadrature(UNIT_SQUARE, default_quadrature_order(2))
        V, _, _ = basis.tables(quad)
        coeffs = project_l2(V[:, 1], basis, quad)
        expected = np.zeros(basis.size)
        expected[1] = 1.0
        assert np.max(np.abs(coeffs - expected)) < 1e-10

    def test_zero_field(self):
        basis = build_basis(UNIT_INTERVAL, 4)
        quad = tensor_quadrature(UNIT_INTERVAL, default_quadrature_order(4))
        coeffs = project_l2(lambda X: np.zeros(X.shape[0]), basis, quad)
        assert np.max(np.abs(coeffs)) == 0.0

    def test_parabola_fourier_coefficients(self):
        # x(1-x) = sum_k b_k sin(k pi x), b_k = 8/(k pi)^3 for odd k; against
        # the normalized modes the coefficients are b_k / sqrt(2)
        basis = build_basis(UNIT_INTERVAL, 8)
        quad = tensor_quadrature(UNIT_INTERVAL, default_quadrature_order(8))
        coeffs = project_l2(lambda X: X[:, 0] * (1 - X[:, 0]), basis, quad)
        for k in range(1, 9):
            expected = 8.0 / (k * np.pi) ** 3 / np.sqrt(2.0) if k % 2 else 0.0
            assert coeffs[k - 1] == pytest.approx(expected, abs=1e-12)

    def test_idempotent_on_span(self):
        basis = build_basis(UNIT_SQUARE, 3)
        quad = tensor_quadrature(UNIT_SQUARE, default_quadrature_order(3))
        rng = np.random.default_rng(1)
        c = rng.standard_normal(basis.size)
        V, _, _ = basis.tables(quad)
        back = project_l2(V @ c, basis, quad)
        assert np.max(np.abs(back - c)) < 1e-10

    def test_residual_orthogonal_to_modes(self):
        basis = build_basis(UNIT_INTERVAL, 6)
        quad = tensor_quadrature(UNIT_INTERVAL, default_quadrature_order(6))
        V, _, w = basis.tables(quad)
        f = np.exp(quad.nodes[:, 0])
        coeffs = project_l2(f, basis, quad)
        residual = f - V @ coeffs
        assert np.max(np.abs(V.T @ (w * residual))) < 1e-10

    def test_rejects_nonfinite_field(self):
        basis = build_basis(UNIT_INTERVAL, 2)
        quad = tensor_quadrature(UNIT_INTERVAL, 8)
        bad = np.full(quad.nodes.shape[0], np.nan)
        with pytest.raises(ValueError):
            project_l2(bad, basis, quad)
