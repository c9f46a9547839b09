from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from twistloop.errors import (
    DegenerateMetric,
    GridPointFailure,
    NoAbelianFamily,
    NotInBigCell,
    ParameterViolation,
    SymmetryResidual,
    TruncationResidual,
    WrongSidedInput,
)
from twistloop import integrable
from twistloop.integrable import (
    GridFrame,
    SurfaceSample,
    annulus_radius,
    coset_gap,
    curvature_report,
    dress,
    expected_curvature,
    extract_immersion,
    frame_residual,
    invariant_hermitian_form,
    maurer_cartan,
    vacuum_frame,
    vacuum_generators,
)
from twistloop.involutions import curved_flat_form, random_loop
from twistloop.loops import LaurentLoop, sup_norm


def patch_sample(func, counts=(21, 21), h=0.02, origin=(-0.2, 0.0)):
    """Sample a parametrized surface on a regular grid."""
    u = origin[0] + h * np.arange(counts[0])
    v = origin[1] + h * np.arange(counts[1])
    uu, vv = np.meshgrid(u, v, indexing="ij")
    return SurfaceSample(0.5j, "sphere", func(uu, vv), origin, h, counts, 0.0)


class TestVacuum:
    """Vacuum curved flats and their Maurer-Cartan forms."""

    @pytest.fixture(autouse=True)
    def setup(self):
        """Set up test fixtures."""
        self.frame = vacuum_frame(2, 1, (3, 3), 1e-3)

    def test_frame_in_twisted_group(self):
        """Test that vacuum values lie in the form and are tau-fixed."""
        assert frame_residual(self.frame) <= 1e-8
        assert self.frame.size == 4
        assert len(self.frame.values) == 9

    def test_maurer_cartan_is_linear_in_lambda(self):
        """Test leakage and the degree -1 coefficient of the vacuum."""
        sample = maurer_cartan(self.frame)
        assert sample.interior_leakage <= 1e-5
        a0 = np.zeros((4, 4))
        a0[0, 2], a0[2, 0] = 1.0, -1.0
        assert_allclose(sample.alphas[1, 1, 0, 0], 1j * a0, atol=1e-5)

    def test_too_many_generators(self):
        """Test that the abelian family has dimension min(n, k + 1)."""
        with pytest.raises(NoAbelianFamily) as exc_info:
            vacuum_generators(2, 1, count=3)
        assert "dimension 2" in str(exc_info.value)

    def test_grid_shape_is_checked(self):
        """Test that a frame needs one value per grid point."""
        with pytest.raises(ParameterViolation) as exc_info:
            GridFrame((0.0,), 0.1, (3,), self.frame.values[:2], self.frame.entry, 2, 1)
        assert "needs 3 values" in str(exc_info.value)


class TestDressing:
    """Dressing vacuum frames by minus loops."""

    @pytest.fixture(autouse=True)
    def setup(self):
        """Set up test fixtures."""
        self.frame = vacuum_frame(2, 1, (2, 2), 0.05)
        self.form = self.frame.form

    def test_identity_dressing(self):
        """Test that dressing by the identity returns the frame."""
        dressed = dress(self.frame, LaurentLoop.identity(4))
        for before, after in zip(self.frame.values, dressed.values):
            assert sup_norm(before - after) <= 1e-9

    def test_dressed_frame_stays_in_group(self):
        """Test that dressed values are in the form and tau-fixed."""
        g = random_loop(self.form, 1, 0.5, 41, side="minus")
        assert frame_residual(dress(self.frame, g)) <= 1e-7

    def test_composition(self):
        """Test that dressing by h then g equals dressing by gh up to cosets."""
        g = random_loop(self.form, 1, 0.5, 42, side="minus")
        h = random_loop(self.form, 1, 0.5, 43, side="minus")
        stepwise = dress(dress(self.frame, h), g)
        direct = dress(self.frame, g @ h)
        for a, b in zip(stepwise.values, direct.values):
            assert coset_gap(a, b) <= 1e-6

    def test_wrong_side(self):
        """Test that the dressing element must have no positive degrees."""
        with pytest.raises(WrongSidedInput) as exc_info:
            dress(self.frame, LaurentLoop.monomial(np.eye(4), 1))
        assert "degrees <= 0" in str(exc_info.value)

    def test_worker_pool_matches_sequential(self):
        """Test that a process pool gives the same dressed frame."""
        g = random_loop(self.form, 1, 0.5, 45, side="minus")
        sequential = dress(self.frame, g)
        pooled = dress(self.frame, g, workers=2)
        for a, b in zip(sequential.values, pooled.values):
            assert a.window == b.window
            assert_allclose(a.coeffs, b.coeffs, atol=1e-14)

    def test_dressed_frame_is_checked(self, monkeypatch):
        """Test that a dressed frame outside the form is refused."""
        broken = SimpleNamespace(z_tau=LaurentLoop.constant(2.0 * np.eye(4)))
        monkeypatch.setattr(integrable, "iwasawa_factor", lambda *args: broken)
        with pytest.raises(SymmetryResidual) as exc_info:
            dress(self.frame, LaurentLoop.identity(4))
        assert "leaves the form or tau" in str(exc_info.value)

    def test_leakage_tolerance(self):
        """Test the optional Maurer-Cartan check on the dressed frame."""
        frame = vacuum_frame(2, 1, (3, 3), 0.05)
        g = random_loop(self.form, 1, 0.5, 46, side="minus")
        dress(frame, g, leakage_tol=1.0)
        with pytest.raises(TruncationResidual) as exc_info:
            dress(frame, g, leakage_tol=0.0)
        assert "leaks" in str(exc_info.value)

    def test_grid_point_failure_names_point(self, monkeypatch):
        """Test that a failing split reports its grid point."""

        def fail(*args):
            raise NotInBigCell("singular Toeplitz system")

        monkeypatch.setattr(integrable, "iwasawa_factor", fail)
        with pytest.raises(GridPointFailure) as exc_info:
            dress(self.frame, LaurentLoop.identity(4))
        assert exc_info.value.point == (0, 0)
        assert isinstance(exc_info.value.cause, NotInBigCell)


class TestImmersions:
    """Column extraction and the induced metric."""

    def test_expected_curvature(self):
        """Test the curvature law and its degenerate fibre."""
        assert expected_curvature(0.5j) == pytest.approx(-4.0 / 2.25)
        assert expected_curvature(2j) == pytest.approx(-4.0 / 2.25)
        assert expected_curvature(1j) is None
        assert expected_curvature(1.0) is None

    def test_round_sphere_control(self):
        """Test the curvature stencil on a unit sphere patch."""
        sample = patch_sample(lambda u, v: np.stack(
            [np.cos(u) * np.cos(v), np.cos(u) * np.sin(v), np.sin(u)], axis=-1
        ))
        report = curvature_report(sample)
        assert report.mean == pytest.approx(1.0, abs=1e-2)
        assert report.relative_spread <= 1e-2
        assert report.excluded == 0

    def test_flat_torus_control(self):
        """Test the curvature stencil on a flat torus in S^3."""
        sample = patch_sample(lambda u, v: np.stack(
            [np.cos(u), np.sin(u), np.cos(v), np.sin(v)], axis=-1
        ) / np.sqrt(2.0))
        report = curvature_report(sample)
        assert abs(report.mean) <= 1e-6

    def test_small_grid(self):
        """Test that the curvature stencil needs five points per axis."""
        sample = patch_sample(lambda u, v: np.stack([u, v, u * v], axis=-1), counts=(3, 3))
        with pytest.raises(ParameterViolation) as exc_info:
            curvature_report(sample)
        assert "too small" in str(exc_info.value)

    def test_vacuum_surface_is_degenerate(self):
        """Test that the undressed vacuum does not immerse."""
        frame = vacuum_frame(2, 1, (7, 7), 0.05, radius=annulus_radius(0.5j))
        sample = extract_immersion(frame, 0.5j)
        with pytest.raises(DegenerateMetric) as exc_info:
            curvature_report(sample)
        assert "non-immersed" in str(exc_info.value)

    @pytest.mark.parametrize("lam0", [0.5j, 2j])
    def test_dressed_surface_curvature(self, lam0):
        """Test unit sphere points and the constant negative curvature."""
        frame = vacuum_frame(2, 1, (9, 9), 0.02, radius=annulus_radius(lam0))
        g = random_loop(frame.form, 1, 0.5, 44, side="minus")
        sample = extract_immersion(dress(frame, g), lam0)
        assert sample.path == "sphere"
        assert_allclose(np.linalg.norm(sample.points, axis=-1), 1.0, atol=1e-8)
        report = curvature_report(sample)
        assert report.expected == pytest.approx(-4.0 / 2.25)
        assert report.mean < 0
        assert report.relative_spread <= 1e-2
        assert report.mean == pytest.approx(report.expected, rel=5e-2)

    def test_degenerate_fibre_is_refused(self):
        """Test that lambda0 = i has no curvature even on a dressed frame."""
        frame = vacuum_frame(2, 1, (5, 5), 0.05)
        g = random_loop(frame.form, 1, 0.5, 44, side="minus")
        sample = extract_immersion(dress(frame, g), 1j)
        assert sample.expected_curvature is None
        with pytest.raises(DegenerateMetric) as exc_info:
            curvature_report(sample)
        assert "degenerate fibre" in str(exc_info.value)

    def test_metric_floor(self):
        """Test that a nearly constant map counts as non-immersed."""
        sample = patch_sample(lambda u, v: np.stack(
            [np.ones_like(u), 1e-9 * u, 1e-9 * v], axis=-1
        ))
        with pytest.raises(DegenerateMetric) as exc_info:
            curvature_report(sample)
        assert "non-immersed" in str(exc_info.value)

    def test_annulus_radius(self):
        """Test the truncation radius for a spectral parameter."""
        assert annulus_radius(0.5j) == pytest.approx(2.0)
        assert annulus_radius(2j) == pytest.approx(2.0)
        assert annulus_radius(1.0) == 1.0
        with pytest.raises(ParameterViolation):
            annulus_radius(0)

    def test_hyperbolic_fibre(self):
        """Test the invariant indefinite form on the unit circle."""
        frame = vacuum_frame(2, 1, (3, 3), 0.05)
        form = invariant_hermitian_form(frame.entry)
        assert_allclose(np.diag(form).real, [1.0, 1.0, -1.0, 1.0])
        sample = extract_immersion(frame, 1.0)
        assert sample.path == "hyperbolic"
        assert sample.certificate <= 1e-7
        assert_allclose(sample.form_values, -1.0, atol=1e-7)

    def test_off_axis_parameter(self):
        """Test that lambda0 must lie on iR or on the unit circle."""
        frame = vacuum_frame(2, 1, (2, 2), 0.05)
        with pytest.raises(ParameterViolation) as exc_info:
            extract_immersion(frame, 0.3 + 0.3j)
        assert "neither" in str(exc_info.value)


def test_curved_flat_entry_has_partner():
    """Test that the frames carry the second-kind partner."""
    assert curved_flat_form(2, 1).tau is not None
