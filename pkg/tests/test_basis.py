import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from galerkin_branches.basis import (
    DomainSpec,
    Field,
    GridValues,
    basis_matrix,
    cofactor,
    constant,
    det_from_hessian,
    eval_field,
    evaluate,
    exact_quad_order,
    grid_function,
    grid_points,
    hessian_determinant,
    hessian_determinant_directional,
    integrate,
    spatial_mean_weights,
)


def test_defaults():
    d = DomainSpec()
    assert d.dim == 1 and d.modes == 8
    assert d.lengths == (np.pi,)
    assert d.quad_order == exact_quad_order(8, 4)
    assert d.size == 8 and d.grid_size == d.quad_order


@pytest.mark.parametrize("kwargs", [
    {"dim": 4}, {"modes": 0}, {"lengths": (1.0, -1.0), "dim": 2}, {"modes": 8, "quad_order": 15},
])
def test_domain_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        DomainSpec(**kwargs)


def test_indices_lexicographic_first_axis_slowest():
    d = DomainSpec(dim=2, modes=3)
    ks = d.indices()
    assert ks.tolist()[:4] == [[1, 1], [1, 2], [1, 3], [2, 1]]
    assert not ks.flags.writeable


@given(dim=st.integers(1, 3), modes=st.integers(1, 5), data=st.data())
def test_flat_index_bijection(dim, modes, data):
    d = DomainSpec(dim=dim, modes=modes)
    i = data.draw(st.integers(0, d.size - 1))
    assert d.flat_index(d.indices()[i]) == i


def test_flat_index_out_of_range():
    with pytest.raises(IndexError):
        DomainSpec(dim=2, modes=3).flat_index((0, 1))


def test_field_arithmetic_and_domain_check():
    d = DomainSpec(modes=4)
    a = Field.mode(d, 1, 2.0)
    b = Field.mode(d, 3)
    assert np.allclose((a + b).coeffs, [2, 0, 1, 0])
    assert np.allclose((a - 2 * b).coeffs, [2, 0, -2, 0])
    assert np.allclose((-a).coeffs, [-2, 0, 0, 0])
    with pytest.raises(ValueError):
        a + Field.zeros(DomainSpec(modes=5))
    with pytest.raises(ValueError):
        Field(d, [np.nan, 0, 0, 0])
    with pytest.raises(ValueError):
        Field(d, np.zeros(3))
    with pytest.raises(ValueError):
        a.coeffs[0] = 1.0


def test_grid_values_shape_checked():
    d = DomainSpec(modes=4)
    with pytest.raises(ValueError):
        GridValues(d, np.zeros(d.grid_size + 1))


@pytest.mark.parametrize("order,fn", [
    (0, lambda x, k: np.sin(k * x)),
    (1, lambda x, k: k * np.cos(k * x)),
    (2, lambda x, k: -k * k * np.sin(k * x)),
])
def test_derivatives_match_closed_form_1d(order, fn):
    d = DomainSpec(modes=5)
    x = grid_points(d)[0]
    for k in range(1, 6):
        vals = eval_field(Field.mode(d, k), (order,)).values
        assert np.allclose(vals, fn(x, k), atol=1e-12)


def test_nonstandard_length():
    d = DomainSpec(modes=3, lengths=2.0)
    x = grid_points(d)[0]
    vals = eval_field(Field.mode(d, 2), (2,)).values
    assert np.allclose(vals, -(np.pi) ** 2 * np.sin(np.pi * x), atol=1e-12)


def test_order_above_two_refused():
    d = DomainSpec(modes=3)
    with pytest.raises(ValueError, match="X Gram"):
        eval_field(Field.mode(d, 1), (3,))


@given(st.lists(st.floats(-1, 1), min_size=9, max_size=9), st.integers(0, 2), st.integers(0, 2))
def test_grid_and_pointwise_evaluation_agree_2d(coeffs, ox, oy):
    d = DomainSpec(dim=2, modes=3)
    f = Field(d, coeffs)
    on_grid = eval_field(f, (ox, oy)).values
    assert np.allclose(evaluate(f, grid_points(d), (ox, oy)), on_grid, atol=1e-12)


def test_quadrature_default_integrates_quartic_products():
    # int_0^pi sin^4(Mx) = 3 pi / 8 for every M >= 1
    for M in (4, 16):
        d = DomainSpec(modes=M)
        s = eval_field(Field.mode(d, M)).values
        assert abs(integrate(GridValues(d, s ** 4)) - 3 * np.pi / 8) < 1e-13


def test_minimum_quadrature_is_not_exact_for_quartic_products():
    d = DomainSpec(modes=16, quad_order=32)
    s = eval_field(Field.mode(d, 16)).values
    assert abs(integrate(GridValues(d, s ** 4)) - 3 * np.pi / 8) > 1e-3


def test_basis_matrix_read_only_and_cached():
    d = DomainSpec(modes=3)
    assert basis_matrix(d) is basis_matrix(d)
    assert not basis_matrix(d).flags.writeable


def test_hessian_determinant_1d_is_second_derivative():
    d = DomainSpec(modes=4)
    f = Field(d, [1.0, 0.5, 0.0, -0.2])
    assert np.allclose(hessian_determinant(f).values, eval_field(f, (2,)).values)


def test_hessian_determinant_2d_closed_form():
    d = DomainSpec(dim=2, modes=2)
    x, y = grid_points(d)
    det = hessian_determinant(Field.mode(d, (1, 1))).values
    expected = np.sin(x) ** 2 * np.sin(y) ** 2 - np.cos(x) ** 2 * np.cos(y) ** 2
    assert np.allclose(det, expected, atol=1e-13)


def test_cofactor_3d_matches_numpy_determinant():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 3, 7))
    A = A + A.transpose(1, 0, 2)
    ref = np.linalg.det(np.moveaxis(A, -1, 0))
    assert np.allclose(det_from_hessian(A), ref)
    C = cofactor(A)
    adj_ref = np.moveaxis(np.linalg.inv(np.moveaxis(A, -1, 0)) * ref[:, None, None], 0, -1)
    assert np.allclose(np.swapaxes(C, 0, 1), adj_ref)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_directional_determinant_matches_finite_difference(dim):
    rng = np.random.default_rng(dim)
    d = DomainSpec(dim=dim, modes=2, quad_order=6)
    f = Field(d, rng.standard_normal(d.size))
    v = Field(d, rng.standard_normal(d.size))
    h = 1e-6
    fd = (hessian_determinant(f + h * v).values - hessian_determinant(f - h * v).values) / (2 * h)
    assert np.allclose(hessian_determinant_directional(f, v).values, fd, atol=1e-7)


def test_spatial_mean_weights_match_quadrature():
    d = DomainSpec(dim=2, modes=4)
    exact = spatial_mean_weights(d)
    quad = np.array([integrate(eval_field(Field(d, e))) for e in np.eye(d.size)])
    assert np.allclose(exact, quad, atol=1e-13)


def test_grid_function_and_constant():
    d = DomainSpec(dim=2, modes=2)
    g = grid_function(d, lambda x, y: 1 + 0 * x)
    assert np.array_equal(g.values, constant(d).values)
    assert abs(integrate(g) - np.pi ** 2) < 1e-12
