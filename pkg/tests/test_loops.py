import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from twistloop.errors import ParameterViolation, SingularSample, TruncationResidual
from twistloop.loops import (
    LaurentLoop,
    evaluate,
    exp_loop,
    from_samples,
    invert,
    multiply,
    sample_count,
    star,
    sup_norm,
    to_samples,
    truncate,
    winding_det,
)

CIRCLE = np.exp(2j * np.pi * np.arange(16) / 16)


def random_loop(seed, low=-2, high=2, size=2):
    rng = np.random.default_rng(seed)
    shape = (high - low + 1, size, size)
    return LaurentLoop(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), low)


def unitary_loop(seed, size=2, scale=0.3):
    """exp of a degree-1 loop with anti-Hermitian values on the circle."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    a *= scale / np.linalg.norm(a, 2)
    h = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    h = scale * (h - h.conj().T) / np.linalg.norm(h, 2)
    xi = LaurentLoop.from_terms({-1: a, 0: h, 1: -a.conj().T}, size)
    return exp_loop(xi)


def test_evaluate_constant_and_monomials():
    """Test evaluation of constant and monomial loops."""
    c = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert_allclose(evaluate(LaurentLoop.constant(c), 0.3 + 2j), c)

    x = LaurentLoop.diagonal_monomials([1, -1])
    assert_allclose(evaluate(x, 1j), np.diag([1j, -1j]), atol=1e-15)


def test_evaluate_matches_direct_sum():
    """Test evaluation against a brute-force sum over coefficients."""
    x = random_loop(1, -3, 3)
    lam = np.exp(1j * np.pi / 5)
    expected = sum(c * lam ** d for d, c in zip(x.degrees, x.coeffs))
    assert_allclose(evaluate(x, lam), expected, atol=1e-12)


def test_evaluate_rejects_zero():
    """Test that evaluation at zero is refused."""
    with pytest.raises(ValueError) as exc_info:
        evaluate(LaurentLoop.identity(2), 0)
    assert "nonzero" in str(exc_info.value)


def test_multiply_identity_and_cancellation():
    """Test the identity loop and monomial cancellation."""
    a = random_loop(2)
    product = multiply(a, LaurentLoop.identity(2))
    assert product.window == a.window
    assert_allclose(product.coeffs, a.coeffs)

    x = LaurentLoop.diagonal_monomials([1, -1])
    y = LaurentLoop.diagonal_monomials([-1, 1])
    assert_allclose((x @ y).trimmed().coeffs, LaurentLoop.identity(2).coeffs)


def test_multiply_window_and_pointwise_product():
    """Test the Cauchy product window and pointwise agreement."""
    a = random_loop(3, -2, 2)
    b = random_loop(4, -3, 3)
    product = multiply(a, b)
    assert product.window == (-5, 5)
    for lam in np.exp(2j * np.pi * np.arange(32) / 32):
        expected = evaluate(a, lam) @ evaluate(b, lam)
        assert_allclose(evaluate(product, lam), expected, rtol=1e-12, atol=1e-12)


def test_multiply_size_mismatch():
    """Test that loops of different sizes cannot be multiplied."""
    with pytest.raises(ValueError) as exc_info:
        multiply(LaurentLoop.identity(2), LaurentLoop.identity(3))
    assert "sizes differ" in str(exc_info.value)


def test_invert_exact_cases():
    """Test inversion of the identity and of diag(lam, 1/lam)."""
    identity = invert(LaurentLoop.identity(2), (-2, 2))
    assert_allclose(identity.coeff(0), np.eye(2), atol=1e-14)
    assert sup_norm(identity - LaurentLoop.identity(2)) < 1e-14

    inverse = invert(LaurentLoop.diagonal_monomials([1, -1]), (-2, 2))
    expected = LaurentLoop.diagonal_monomials([-1, 1])
    assert sup_norm(inverse - expected) < 1e-14


def test_invert_unitary_exponential():
    """Test inversion of an exponential within the requested residual."""
    x = unitary_loop(5)
    y = invert(x, (-12, 12), tol=1e-10)
    assert sup_norm(x @ y - LaurentLoop.identity(2)) <= 1e-10


def test_invert_twice_returns_input():
    """Test that inverting twice gives the original loop."""
    x = unitary_loop(6)
    twice = invert(invert(x, (-12, 12)), (-12, 12))
    assert sup_norm(twice - x) <= 2e-10


def test_invert_singular_sample():
    """Test that a singular sample is reported."""
    with pytest.raises(SingularSample) as exc_info:
        invert(LaurentLoop.constant(np.diag([1.0, 0.0])), (-1, 1))
    assert exc_info.value.index == 0


def test_invert_truncation_residual():
    """Test that a too narrow output window is reported with its residual."""
    x = LaurentLoop.from_terms({0: np.eye(2), 1: 0.9 * np.eye(2)}, 2)
    with pytest.raises(TruncationResidual) as exc_info:
        invert(x, (0, 2), tol=1e-10)
    assert exc_info.value.residual > 1e-10


def test_star_examples():
    """Test the star operation on fixed points and the sign rule."""
    h = np.array([[2.0, 1 - 1j], [1 + 1j, 3.0]])
    assert_allclose(star(LaurentLoop.constant(h)).coeffs, LaurentLoop.constant(h).coeffs)

    a = np.array([[1 + 2j, 3.0], [0.5j, -1.0]])
    result = star(LaurentLoop.monomial(a, 1), eps=-1)
    assert result.window == (1, 1)
    assert_allclose(result.coeff(1), -a.conj().T)


@pytest.mark.parametrize("eps", [1, -1])
def test_star_evaluation_identity(eps):
    """Test star(x)(lam) = conj(x(eps conj(lam)))^T on the circle."""
    x = random_loop(7)
    y = star(x, eps)
    for lam in CIRCLE:
        expected = evaluate(x, eps * np.conj(lam)).conj().T
        assert_allclose(evaluate(y, lam), expected, atol=1e-12)


def test_winding_examples():
    """Test winding numbers of the standard examples."""
    assert winding_det(LaurentLoop.identity(2)) == 0
    assert winding_det(LaurentLoop.diagonal_monomials([3, 0])) == 3
    assert winding_det(LaurentLoop.diagonal_monomials([1, -1])) == 0
    assert winding_det(unitary_loop(8)) == 0


def test_sup_norm_and_truncate():
    """Test the sup-norm convention and truncation bookkeeping."""
    assert sup_norm(LaurentLoop.identity(3)) == pytest.approx(1.0)

    x = random_loop(9)
    same, discarded = truncate(x, x.window)
    assert discarded == 0.0
    assert_allclose(same.coeffs, x.coeffs)

    with pytest.raises(TruncationResidual) as exc_info:
        truncate(x, (0, 0), tol=1e-3)
    assert "discards" in str(exc_info.value)


def test_sample_round_trip():
    """Test that samples and coefficients are a transform pair."""
    x = random_loop(10, -3, 4)
    grid = to_samples(x)
    assert grid.count == sample_count(x.width)
    back = from_samples(grid, x.window)
    assert np.max(np.abs(back.coeffs - x.coeffs)) <= 1e-13


def test_exp_loop_constant():
    """Test the exponential of a constant diagonal generator."""
    xi = LaurentLoop.constant(np.diag([0.5j, -0.5j]))
    x = exp_loop(xi)
    assert_allclose(evaluate(x, 1.0), np.diag(np.exp([0.5j, -0.5j])), atol=1e-13)


def test_exp_loop_off_circle():
    """Test that a widened annulus keeps values accurate off the unit circle."""
    xi = LaurentLoop.from_terms({-1: np.array([[1j]]), 1: np.array([[1j]])}, 1)
    x = exp_loop(xi, 1e-12, radius=2.0)
    assert evaluate(x, 0.5j)[0, 0] == pytest.approx(np.exp(1.5), rel=1e-10)
    assert evaluate(x, 2j)[0, 0] == pytest.approx(np.exp(-1.5), rel=1e-8)


def test_exp_loop_radius_below_one():
    """Test that the annulus radius is at least one."""
    with pytest.raises(ParameterViolation) as exc_info:
        exp_loop(LaurentLoop.identity(2), radius=0.5)
    assert "radius" in str(exc_info.value)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 2 ** 31))
def test_evaluation_homomorphism(seed_a, seed_b):
    """Test eval(ab) = eval(a) eval(b) at circle points."""
    a, b = random_loop(seed_a), random_loop(seed_b, -1, 3)
    product = multiply(a, b)
    for lam in CIRCLE:
        expected = evaluate(a, lam) @ evaluate(b, lam)
        assert np.max(np.abs(evaluate(product, lam) - expected)) <= 1e-11 * max(
            1.0, np.max(np.abs(expected))
        )


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(0, 2 ** 31))
def test_star_anti_homomorphism(seed_a, seed_b):
    """Test star(ab) = star(b) star(a) coefficient-wise."""
    a, b = random_loop(seed_a), random_loop(seed_b)
    left = star(multiply(a, b))
    right = multiply(star(b), star(a))
    assert left.window == right.window
    assert np.max(np.abs(left.coeffs - right.coeffs)) <= 1e-12 * max(
        1.0, np.max(np.abs(left.coeffs))
    )


@settings(max_examples=20, deadline=None)
@given(
    st.integers(-3, 3), st.integers(-3, 3),
    st.integers(-3, 3), st.integers(-3, 3),
    st.integers(0, 2 ** 31),
)
def test_winding_additivity(k1, k2, l1, l2, seed):
    """Test winding(ab) = winding(a) + winding(b)."""
    a = LaurentLoop.diagonal_monomials([k1, k2]) @ unitary_loop(seed)
    b = unitary_loop(seed + 1) @ LaurentLoop.diagonal_monomials([l1, l2])
    assert winding_det(a @ b) == winding_det(a) + winding_det(b)
    assert winding_det(a) == k1 + k2
