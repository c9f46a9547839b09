import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from twistloop.errors import ParameterViolation
from twistloop.involutions import (
    FiniteAutomorphism,
    InvolutionSpec,
    RealFormSpec,
    algebra_project,
    algebra_residual,
    apply,
    builtin_forms,
    commutation_residual,
    constant_part,
    curved_flat_form,
    fixed_residual,
    form_by_name,
    generated_group,
    random_constant,
    random_loop,
    real_linear_form,
    substitute,
    unitary_entry,
    unitary_form,
)
from twistloop.loops import LaurentLoop, evaluate


def random_unitary(seed, size=2):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    return scipy.linalg.expm(a - a.conj().T)


def random_hermitian(seed, size=2):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))
    return a + a.conj().T


class TestAutomorphisms:
    """Finite automorphisms in normal form."""

    def test_inverse_conjugate_transpose_fixes_unitary(self):
        """Test that unitary matrices are fixed by g -> (g^*)^-1."""
        auto = FiniteAutomorphism.inverse_conjugate_transpose(2)
        u = random_unitary(1)
        assert_allclose(auto.on_matrix(u), u, atol=1e-12)

    def test_linear_automorphisms_are_not_inverting(self):
        """Test that adjoint, conjugation and identity keep the plain flag."""
        for auto in (
            FiniteAutomorphism.adjoint(np.diag([1.0, -1.0])),
            FiniteAutomorphism.entrywise_conjugation(2),
            FiniteAutomorphism.identity(2),
        ):
            assert auto.inverse_transpose is False
        assert FiniteAutomorphism.transpose_inverse(2).inverse_transpose is True

    def test_adjoint_action(self):
        """Test that Ad_J acts by conjugation only."""
        j = np.diag([1.0, -1.0])
        g = np.array([[2.0, 1.0], [0.0, 1.0]])
        assert_allclose(FiniteAutomorphism.adjoint(j).on_matrix(g), j @ g @ j, atol=1e-14)

    def test_composition_normal_form(self):
        """Test that composition agrees with applying both maps."""
        q = np.diag([1.0, -1.0])
        outer = FiniteAutomorphism.adjoint(q)
        inner = FiniteAutomorphism.inverse_conjugate_transpose(2)
        g = random_unitary(2) @ np.diag([2.0, 0.5])
        composed = outer.then(inner)
        assert composed.conjugate and composed.inverse_transpose
        assert_allclose(composed.on_matrix(g), outer.on_matrix(inner.on_matrix(g)), atol=1e-12)

    def test_adjoint_needs_involutive_matrix(self):
        """Test that Ad_Q requires Q^2 = I."""
        with pytest.raises(ParameterViolation) as exc_info:
            FiniteAutomorphism.adjoint(np.diag([1.0, 2.0]))
        assert "Q^2 = I" in str(exc_info.value)

    def test_orders(self):
        """Test automorphism orders, including a root-of-unity rotation."""
        assert FiniteAutomorphism.entrywise_conjugation(2).order == 2
        cycle = np.roll(np.eye(3), 1, axis=0)
        spec = InvolutionSpec(FiniteAutomorphism(cycle), "first", np.exp(2j * np.pi / 3))
        assert spec.automorphism.order == 3
        assert spec.order == 3


class TestLoopInvolutions:
    """Action of first- and second-kind involutions on loops."""

    @pytest.fixture(autouse=True)
    def setup(self):
        """Set up test fixtures."""
        self.entry = curved_flat_form(2, 1)
        self.form = self.entry.form
        self.x = random_loop(self.form, 2, 0.5, seed=11)

    def test_unitary_constant_is_fixed(self):
        """Test that a constant unitary is fixed by the U(n) involution."""
        form = unitary_form(2, 1)
        assert fixed_residual(form, LaurentLoop.constant(random_unitary(3))) < 1e-12

    def test_non_unitary_constant_is_not_fixed(self):
        """Test that i times a Hermitian matrix violates the U(n) form."""
        form = unitary_form(2, 1)
        x = LaurentLoop.constant(1j * random_hermitian(4))
        assert fixed_residual(form, x) > 1e-3

    def test_diagonal_monomial_loop_is_real(self):
        """Test that diag(lam, 1/lam) is fixed by entrywise conjugation."""
        form = real_linear_form(2)
        assert fixed_residual(form, LaurentLoop.diagonal_monomials([1, -1])) == 0.0

    def test_second_kind_reflects_window(self):
        """Test that the second kind moves degree d to -d."""
        y = substitute(self.entry.tau, LaurentLoop.monomial(np.eye(4), 2))
        assert y.window == (-2, -2)

    def test_linear_involution_is_involutive(self):
        """Test that applying sigma twice returns the loop."""
        sigma = self.form.involutions[2]
        twice = apply(sigma, apply(sigma, self.x))
        assert_allclose(twice.coeffs, self.x.coeffs, atol=1e-14)

    def test_random_loop_in_form(self):
        """Test that seeded random loops lie in their form and are reproducible."""
        assert fixed_residual(self.form, self.x) <= 1e-9
        again = random_loop(self.form, 2, 0.5, seed=11)
        assert np.array_equal(again.coeffs, self.x.coeffs)

    def test_random_loop_minus_side(self):
        """Test that minus-side loops have no positive degrees."""
        g = random_loop(self.form, 1, 0.5, seed=12, side="minus")
        assert g.d_max <= 0
        assert fixed_residual(self.form, g) <= 1e-9

    def test_reality_at_imaginary_unit(self):
        """Test that values at lam = i are real orthogonal."""
        value = evaluate(self.x, 1j)
        assert np.max(np.abs(value.imag)) <= 1e-9
        assert_allclose(value.T @ value, np.eye(4), atol=1e-9)

    def test_partner_commutes(self):
        """Test that tau commutes with every involution of the form."""
        for spec in self.form.involutions:
            assert commutation_residual(spec, self.entry.tau) <= 1e-12

    def test_algebra_projection(self):
        """Test that the projection lands in the fixed algebra."""
        rng = np.random.default_rng(5)
        shape = (3, 4, 4)
        xi = LaurentLoop(rng.standard_normal(shape) + 1j * rng.standard_normal(shape), -1)
        projected = algebra_project(self.form, xi)
        assert algebra_residual(self.form, projected) <= 1e-12
        assert len(generated_group(self.form.involutions)) == 8

    def test_random_constant_with_partner(self):
        """Test constants fixed by the form and by tau."""
        h = random_constant(self.form, 6, extra=(self.entry.tau,))
        assert fixed_residual(self.form, LaurentLoop.constant(h)) <= 1e-12
        assert_allclose(self.entry.tau.automorphism.on_matrix(h), h, atol=1e-12)
        assert_allclose(constant_part(self.form, LaurentLoop.constant(h)), h)


def test_non_commuting_family_is_rejected():
    """Test that a real form needs commuting involutions."""
    rho = InvolutionSpec(FiniteAutomorphism.inverse_conjugate_transpose(2), "first", 1, "rho")
    q = np.array([[1.0, 1.0], [0.0, -1.0]])
    sigma = InvolutionSpec(FiniteAutomorphism.adjoint(q), "first", 1, "sigma")
    with pytest.raises(ParameterViolation) as exc_info:
        RealFormSpec("broken", (rho, sigma), 2)
    assert "do not commute" in str(exc_info.value)


def test_real_form_needs_antilinear_base():
    """Test that a purely linear family is not a real form."""
    sigma = InvolutionSpec(FiniteAutomorphism.adjoint(np.diag([1.0, -1.0])), "first", -1)
    with pytest.raises(ParameterViolation) as exc_info:
        RealFormSpec("linear", (sigma,), 2)
    assert "antilinear" in str(exc_info.value)


def test_curved_flat_parameters():
    """Test the admissible range of the curved-flat family."""
    with pytest.raises(ParameterViolation) as exc_info:
        curved_flat_form(3, 1)
    assert "k >= n - 1" in str(exc_info.value)


def test_catalog_names():
    """Test catalog lookup by name."""
    forms = builtin_forms(2, 1)
    assert set(forms) == {"un(2,1)", "un(2,-1)", "glr(2)", "so-curved-flat(2,1)"}

    entry = form_by_name("un(3,-1)")
    assert entry.form.size == 3
    assert entry.name == "un(3,-1)"
    assert form_by_name("so-curved-flat", n=3, k=2).form.size == 6
    assert unitary_entry(2).tau is not None

    with pytest.raises(ParameterViolation) as exc_info:
        form_by_name("sp(4)")
    assert "Unknown form" in str(exc_info.value)
