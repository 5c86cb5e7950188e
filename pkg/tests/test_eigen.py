import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from galerkin_branches.basis import DomainSpec, constant, grid_function
from galerkin_branches.eigen import (
    aux_spectrum,
    compactness_probe,
    decompose,
    decompose_curve,
    pencil_simplicity,
    perturbed_curve,
    perturbed_eigenpair,
    principal_eigenpair,
    second_eigenvalue,
    simplicity_check,
    stability_window,
    verify_bounds,
    window_from_spectrum,
)
from galerkin_branches.errors import DegenerateGapError, InadmissibleWeightError, InconsistentInputError
from galerkin_branches.gram import gram_x, mass

D1 = DomainSpec(modes=16)
D2 = DomainSpec(dim=2, modes=6)


def sin_weight(d, n):
    return grid_function(d, lambda x: 1 + np.sin(x) / n)


def test_unweighted_principal_pairs():
    p = principal_eigenpair(D1, constant(D1))
    assert abs(p.lam - 1) < 1e-13
    assert np.allclose(p.coeffs[1:], 0, atol=1e-14)
    assert np.isclose(p.coeffs[0], 1 / np.sqrt(4 * np.pi))
    p2 = principal_eigenpair(D2, constant(D2))
    assert abs(p2.lam - 2) < 1e-13
    assert np.isclose(gram_x(D2).norm(p2.coeffs), 1.0)


def test_second_eigenvalues():
    assert abs(second_eigenvalue(D1, constant(D1)) - 4) < 1e-12
    assert abs(second_eigenvalue(D2, constant(D2)) - 5) < 1e-12


@pytest.mark.parametrize("n,key", [(1, "1+sin"), (2, "1+sin/2")])
def test_weighted_pairs_against_shooting(n, key):
    g = sin_weight(D1, n)
    lam1, lam2 = oracles.SHOOTING[key]
    assert abs(principal_eigenpair(D1, g).lam - lam1) < 1e-8
    assert abs(second_eigenvalue(D1, g) - lam2) < 1e-7


def test_shooting_oracle_is_reproducible():
    lam = oracles.dirichlet_eigenvalue(lambda t: 1 + np.sin(t), (0.3, 0.9))
    assert abs(lam - oracles.SHOOTING["1+sin"][0]) < 1e-13


@pytest.mark.parametrize("eps", [1e-4, 1e-3, 1e-2, 1e-1])
def test_exceptional_case_is_affine(eps):
    assert abs(perturbed_eigenpair(D1, constant(D1), eps).lam - (1 + 8 * eps)) < 1e-10
    assert abs(perturbed_eigenpair(D2, constant(D2), eps).lam - (2 + 30 * eps)) < 1e-9


def test_perturbed_at_zero_equals_principal():
    g = sin_weight(D1, 1)
    assert abs(perturbed_eigenpair(D1, g, 0.0).lam - principal_eigenpair(D1, g).lam) < 1e-10


def test_eigenpair_normalization_sign_and_residual():
    g = sin_weight(D1, 2)
    for eps in (0.0, 1e-3):
        p = perturbed_eigenpair(D1, g, eps)
        assert np.isclose(gram_x(D1).norm(p.coeffs), 1.0, atol=1e-13)
        assert p.coeffs[0] > 0
        assert p.residual <= 1e-10


def test_negative_eps_rejected():
    with pytest.raises(ValueError):
        perturbed_eigenpair(D1, constant(D1), -1e-3)


def test_nonpositive_weight_fails_with_name():
    with pytest.raises(InadmissibleWeightError, match="minus_one"):
        principal_eigenpair(D1, constant(D1, -1.0), name="minus_one")


def test_indefinite_weight_has_positive_principal_value():
    d = DomainSpec(modes=12)
    g = grid_function(d, lambda x: np.cos(x) + 0.2)
    p = principal_eigenpair(d, g)
    assert p.lam > 0
    assert p.residual < 1e-10
    assert not mass(d, g).is_positive_definite()


def test_perturbed_curve_closed_form():
    c = perturbed_curve(D1, constant(D1), [0, 0.01, 0.05, 0.1])
    assert np.allclose(c.lambdas, [1, 1.08, 1.4, 1.8], atol=1e-12)
    assert c.monotone
    single = perturbed_curve(D1, constant(D1), [0])
    assert len(single.pairs) == 1


def test_perturbed_curve_requires_zero():
    with pytest.raises(ValueError):
        perturbed_curve(D1, constant(D1), [0.01, 0.02])


def test_curve_continuity_improves_with_refinement():
    g = sin_weight(D1, 2)
    coarse = perturbed_curve(D1, g, np.linspace(0, 1e-3, 3)).continuity_steps().max()
    fine = perturbed_curve(D1, g, np.linspace(0, 1e-3, 9)).continuity_steps().max()
    assert fine < coarse


def test_aux_spectrum_unweighted():
    a = aux_spectrum(D1, constant(D1), count=3)
    assert np.allclose(a.lambdas[:2], [8, 5465], rtol=1e-12)
    assert a.exceptional and a.exceptional_index == 1
    assert np.isclose(a.kappa0, 8.0)


def test_aux_spectrum_weighted_not_exceptional():
    a = aux_spectrum(D1, sin_weight(D1, 1))
    assert not a.exceptional
    i = a.bracket_index
    assert a.lambdas[i - 1] < a.kappa0 < a.lambdas[i]


def test_aux_spectrum_count_checked():
    with pytest.raises(ValueError):
        aux_spectrum(D1, constant(D1), count=17)


def test_decompose_exceptional_case():
    g = constant(D1)
    p0 = principal_eigenpair(D1, g)
    d = decompose(perturbed_eigenpair(D1, g, 0.05), p0, D1, g)
    assert np.isclose(d.alpha, 1.0, atol=1e-12)
    assert abs(d.beta) < 1e-12 and d.eta_normX < 1e-9 and d.xi_normX < 1e-9
    assert np.isclose(d.kappa_eps, 8.0) and np.isclose(d.kappa0, 8.0)
    assert d.exceptional


def test_decompose_at_zero_is_trivial():
    g = sin_weight(D1, 1)
    p0 = principal_eigenpair(D1, g)
    d = decompose(p0, p0, D1, g)
    assert d.alpha == pytest.approx(1.0, abs=1e-14)
    assert d.beta == pytest.approx(0.0, abs=1e-14)
    assert d.kappa_eps == d.kappa0


def test_decompose_weighted_signs():
    g = sin_weight(D1, 1)
    p0 = principal_eigenpair(D1, g)
    d = decompose(perturbed_eigenpair(D1, g, 0.05), p0, D1, g)
    assert 0 < d.alpha <= 1
    assert d.beta > 0
    assert abs(d.alpha ** 2 + d.eta_normX ** 2 - 1) < 1e-10
    assert abs(d.kappa_eps - d.kappa_from_split) <= 1e-8 * d.kappa0


def test_decompose_inconsistent_input():
    g = sin_weight(D1, 1)
    p0 = principal_eigenpair(D1, g)
    other = principal_eigenpair(D1, constant(D1))
    with pytest.raises(InconsistentInputError):
        decompose(other, p0, D1, g)
    with pytest.raises(InconsistentInputError):
        decompose(p0, perturbed_eigenpair(D1, g, 0.1), D1, g)


def test_stability_window_closed_forms():
    g = constant(D1)
    assert stability_window(D1, g, delta=0.75).s_star == pytest.approx(3 / 28, rel=1e-12)
    assert stability_window(D1, g, delta=0.5).s_star == pytest.approx(1 / 6, rel=1e-12)
    w = stability_window(D1, g)
    assert w.delta == pytest.approx(0.75)


def test_stability_window_degenerate_and_invalid():
    with pytest.raises(DegenerateGapError, match="multiplicity"):
        window_from_spectrum(1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        window_from_spectrum(1.0, 4.0, 0.1, delta=2.0)


def test_verify_bounds_unweighted_saturates_upper_bounds():
    g = constant(D1)
    w = stability_window(D1, g)
    c = perturbed_curve(D1, g, np.linspace(0, w.s_star, 6))
    rep = verify_bounds(c, decompose_curve(c, D1, g), w)
    assert rep.passed
    assert abs(rep.min_slack("rayleigh_bracket")) < 1e-12
    assert abs(rep.min_slack("kappa_upper")) < 1e-12


def test_verify_bounds_weighted_strict():
    g = sin_weight(D1, 1)
    w = stability_window(D1, g)
    c = perturbed_curve(D1, g, np.linspace(0, w.s_star, 8))
    rep = verify_bounds(c, decompose_curve(c, D1, g), w)
    assert rep.passed, rep.failures()
    assert rep.min_slack("uniform_lambda_bound") > 0
    for row in rep.rows[1:]:
        assert row["checks"]["eta_bound"][1] > 0
        assert row["checks"]["beta_sign"][1] > 0


def test_verify_bounds_rejects_grid_beyond_window():
    g = constant(D1)
    w = stability_window(D1, g)
    c = perturbed_curve(D1, g, [0, 2 * w.s_star])
    with pytest.raises(ValueError):
        verify_bounds(c, decompose_curve(c, D1, g), w)


@given(a=st.floats(0.0, 0.9), k=st.integers(1, 3), eps=st.floats(0.0, 0.05))
def test_rayleigh_bracket_for_random_weights(a, k, eps):
    d = DomainSpec(modes=10)
    g = grid_function(d, lambda x: 1 + a * np.sin(k * x))
    p0 = principal_eigenpair(d, g)
    pe = perturbed_eigenpair(d, g, eps)
    l2g = mass(d, g).inner(p0.coeffs, p0.coeffs)
    assert p0.lam - 1e-9 <= pe.lam <= p0.lam + eps / l2g + 1e-9


@given(a=st.floats(0.05, 0.9), eps=st.floats(1e-4, 0.05))
def test_normalization_split_and_orthogonality_transfer(a, eps):
    d = DomainSpec(modes=10)
    g = grid_function(d, lambda x: 1 + a * np.cos(x) ** 2)
    p0 = principal_eigenpair(d, g)
    dec = decompose(perturbed_eigenpair(d, g, eps), p0, d, g, exceptional=False)
    assert abs(dec.alpha ** 2 + dec.eta_normX ** 2 - 1) < 1e-10
    assert abs(dec.xi_l2g_inner) < 1e-10
    assert abs(dec.kappa_eps - dec.kappa_from_split) <= 1e-8 * dec.kappa0


def test_simplicity_closed_form_gap():
    eps = 0.01
    rep = simplicity_check(D1, constant(D1), eps)
    assert rep.simple
    # diagonal pencil: lam_k = (|k|^2 + eps * X_k / (pi/2)) at k = 2 minus k = 1
    assert rep.gap == pytest.approx((4 + 5465 * eps) - (1 + 8 * eps), rel=1e-10)
    assert rep.obstruction == pytest.approx(1.0)


def test_synthetic_double_eigenvalue_not_simple():
    rep = pencil_simplicity([2.0, 2.0, 5.0], np.eye(3))
    assert not rep.simple and rep.gap == 0.0


def test_weighted_simplicity_gap():
    assert simplicity_check(D1, sin_weight(D1, 1), 0.0).gap > 0.1


def test_compactness_constant_sequence_is_zero():
    g = constant(D1)
    rep = compactness_probe(D1, [g, g], g, [0.0, 0.05])
    assert np.all(rep.deviations < 1e-12)


def test_compactness_decreasing_for_sin_family():
    g0 = constant(D1)
    ws = [sin_weight(D1, n) for n in (1, 2, 4, 8)]
    w = stability_window(D1, g0)
    rep = compactness_probe(D1, ws, g0, np.linspace(0, w.s_star, 4), w)
    assert rep.decreasing
    only_zero = compactness_probe(D1, ws, g0, [0.0], w)
    assert np.all(np.diff(only_zero.headline) < 0)


def test_compactness_grid_checked():
    g0 = constant(D1)
    with pytest.raises(ValueError):
        compactness_probe(D1, [g0], g0, [0.0, 1.0])
