"""
Tests for graded meshes, cone densities, quadrature and averaging.
"""

import mpmath
import numpy as np
import pytest

from core.cones import is_in_C1, is_in_C2
from core.density import (
    C1Observable,
    ConeDensity,
    GradedMesh,
    average_op,
    c1_shift,
    cell_weights,
    cumulative,
    indicator,
    integrate_against,
    l1_distance,
    l1_norm,
    mass,
    mixture,
    sample_cone_density,
    shift_pair,
)
from core.errors import DomainError, MeshMismatchError


class TestGradedMesh:
    """Tests for GradedMesh."""

    def test_default_grading(self):
        mesh = GradedMesh(0.5, 16)
        assert mesh.grading == pytest.approx(4.0)
        assert mesh.nodes[0] == 0.0
        assert mesh.nodes[-1] == 1.0
        assert np.all(np.diff(mesh.nodes) > 0.0)

    def test_grading_threshold(self):
        GradedMesh(0.5, 16, grading=2.0)
        with pytest.raises(DomainError):
            GradedMesh(0.5, 16, grading=1.5)

    def test_alpha_range(self):
        with pytest.raises(DomainError):
            GradedMesh(1.0, 16)

    def test_equal_meshes_compare_equal(self):
        assert GradedMesh(0.5, 64) == GradedMesh(0.5, 64)
        assert GradedMesh(0.5, 64) != GradedMesh(0.5, 128)

    def test_locate(self, mesh):
        x = np.array([0.0, 0.3, 1.0])
        i = mesh.locate(x)
        assert np.all(mesh.nodes[i] <= x)
        assert np.all(x <= mesh.nodes[i + 1])


class TestCellWeights:
    """Tests for the closed-form cell integrals."""

    def test_constant_h_integrates_singularity(self):
        xa = np.array([0.0, 0.1, 0.5])
        xb = np.array([0.1, 0.5, 1.0])
        wl, wr = cell_weights(xa, xb, 0.5)
        expected = 2.0 * (np.sqrt(xb) - np.sqrt(xa))
        np.testing.assert_allclose(wl + wr, expected, rtol=1e-13)

    def test_narrow_cell_is_stable(self):
        """Relative width 1e-9 against an extended-precision evaluation."""
        alpha = 0.3
        xa, xb = 0.4, 0.4 * (1.0 + 1e-9)
        with mpmath.workdps(50):
            a, b, al = mpmath.mpf(xa), mpmath.mpf(xb), mpmath.mpf(alpha)
            ua, ub = a ** al, b ** al

            def integrand(x):
                t = (x ** al - ua) / (ub - ua)
                return x ** (-al) * t

            wr_exact = mpmath.quad(integrand, [a, b])
        _, wr = cell_weights(np.array([xa]), np.array([xb]), alpha)
        assert float(wr[0]) == pytest.approx(float(wr_exact), rel=1e-7)
        assert wr[0] > 0.0

    def test_weights_nonnegative(self, mesh):
        wl, wr = mesh.weights
        assert np.all(wl >= 0.0)
        assert np.all(wr >= 0.0)


class TestConeDensity:
    """Tests for ConeDensity."""

    def test_shape_checked(self, mesh):
        with pytest.raises(MeshMismatchError):
            ConeDensity(mesh, np.ones(5))

    def test_finite_values(self, mesh):
        h = np.ones(mesh.n_cells + 1)
        h[3] = np.nan
        with pytest.raises(DomainError):
            ConeDensity(mesh, h)

    def test_evaluate_constant(self, mesh):
        f = ConeDensity.constant(mesh)
        np.testing.assert_allclose(f.evaluate(np.array([0.01, 0.5, 1.0])), 1.0, rtol=1e-12)
        assert f.evaluate(0.0) == pytest.approx(1.0, rel=1e-9)

    def test_evaluate_singular_at_zero(self, mesh):
        f = ConeDensity.power(mesh, mesh.alpha)
        assert f.evaluate(0.0) == np.inf
        assert f.evaluate(0.25) == pytest.approx(0.5 * 0.25 ** -0.5, rel=1e-12)

    def test_power_unit_mass(self, mesh):
        for theta in (0.0, 0.1, 0.25, 0.5):
            assert mass(ConeDensity.power(mesh, theta)) == pytest.approx(1.0, abs=1e-14)

    def test_power_range(self, mesh):
        with pytest.raises(DomainError):
            ConeDensity.power(mesh, 0.7)

    def test_arithmetic(self, mesh):
        one = ConeDensity.constant(mesh)
        two = one + one
        assert mass(two) == pytest.approx(2.0, rel=1e-12)
        assert mass(two - one) == pytest.approx(1.0, rel=1e-12)
        assert mass(3.0 * one) == pytest.approx(3.0, rel=1e-12)

    def test_mesh_mismatch(self, mesh):
        other = ConeDensity.constant(GradedMesh(0.5, 32))
        with pytest.raises(MeshMismatchError):
            ConeDensity.constant(mesh) + other

    def test_rows(self, mesh):
        rows = ConeDensity.constant(mesh).rows()
        assert len(rows) == mesh.n_cells + 1
        x, h, f = rows[-1]
        assert (x, h) == (1.0, 1.0)
        assert f == pytest.approx(1.0)


class TestMass:
    """Tests for mass, l1_distance and integrate_against."""

    def test_unit_mass(self):
        mesh = GradedMesh(0.5, 2 ** 12)
        assert mass(ConeDensity.constant(mesh)) == pytest.approx(1.0, abs=1e-10)

    def test_singular_density_mass(self, fine_mesh):
        f = ConeDensity.power(fine_mesh, fine_mesh.alpha)
        assert mass(f) == pytest.approx(1.0, abs=1e-6)

    def test_zero(self, mesh):
        assert mass(ConeDensity.zero(mesh)) == 0.0

    def test_l1_trivial(self, mesh):
        one = ConeDensity.constant(mesh)
        assert l1_distance(one, one) == 0.0
        assert l1_distance(one, ConeDensity.zero(mesh)) == pytest.approx(1.0, abs=1e-12)

    def test_l1_with_crossing(self, fine_mesh):
        """|1 - 0.75 x^(-1/4)| crosses at 0.75^4; the integral is 2 (0.75^3 - 0.75^4)."""
        one = ConeDensity.constant(fine_mesh)
        power = ConeDensity.power(fine_mesh, 0.25)
        assert l1_distance(one, power) == pytest.approx(2.0 * (0.75 ** 3 - 0.75 ** 4), abs=1e-4)

    def test_l1_mesh_mismatch(self, mesh):
        with pytest.raises(MeshMismatchError):
            l1_distance(ConeDensity.constant(mesh), ConeDensity.constant(GradedMesh(0.5, 32)))

    def test_l1_norm_of_signed(self, mesh):
        d = ConeDensity.constant(mesh) - ConeDensity.constant(mesh, 3.0)
        assert l1_norm(d) == pytest.approx(2.0, rel=1e-12)

    def test_integrate_against_polynomial(self, mesh):
        f = ConeDensity.power(mesh, mesh.alpha)
        # (1 - alpha) * integral of x^(1 - alpha) = (1 - alpha) / (2 - alpha)
        assert integrate_against(f, lambda x: x) == pytest.approx(0.5 / 1.5, rel=1e-12)
        assert integrate_against(f, lambda x: np.ones_like(x)) == pytest.approx(1.0, rel=1e-12)

    def test_cumulative_reaches_mass(self, mesh, cone):
        f = sample_cone_density(3, cone, mesh)
        assert cumulative(f, np.array([1.0]))[0] == pytest.approx(mass(f), rel=1e-12)
        assert cumulative(f, np.array([0.0]))[0] == 0.0


class TestAverageOp:
    """Tests for average_op and indicator."""

    def test_constants_fixed(self, mesh):
        out = average_op(ConeDensity.constant(mesh), 0.05)
        np.testing.assert_allclose(out.fvals[1:], 1.0, rtol=1e-9)

    def test_indicator_across_wrap(self, mesh):
        """Half of the window around 0 lies in [0, 0.1]."""
        f = indicator(mesh, 0.0, 0.1)
        out = average_op(f, 0.05)
        assert out.evaluate(0.0) == pytest.approx(0.5, abs=1e-2)

    def test_preserves_mass(self, mesh, cone):
        f = sample_cone_density(8, cone, mesh)
        assert mass(average_op(f, 2.0 ** -6)) == pytest.approx(mass(f), rel=1e-12)

    def test_eps_range(self, mesh):
        with pytest.raises(DomainError):
            average_op(ConeDensity.constant(mesh), 0.5)

    def test_indicator_mass_is_length(self, mesh):
        assert mass(indicator(mesh, 0.95, 1.05)) == pytest.approx(0.1, rel=1e-12)

    def test_indicator_rejects_empty(self, mesh):
        with pytest.raises(DomainError):
            indicator(mesh, 0.3, 0.3)


class TestC1Shift:
    """Tests for C1Observable, c1_shift and shift_pair."""

    def test_zero_observable(self, mesh, cone):
        f, lam, nu = c1_shift(C1Observable(lambda x: 0.0 * x, 0.0, 0.0), cone, mesh)
        assert lam == -1.0
        values = f.fvals[1:]
        assert np.all(values > 0.0)
        assert np.all(np.diff(values) < 0.0)

    def test_identity_observable(self, mesh, cone):
        f, lam, _ = c1_shift(C1Observable(lambda x: x, 1.0, 1.0), cone, mesh)
        assert lam == -2.0
        assert np.all(np.diff(f.fvals[1:]) < 0.0)

    def test_sine_lands_in_cone(self, mesh, cone):
        psi = C1Observable(lambda x: np.sin(2.0 * np.pi * x) / 10.0, 0.1, 0.2 * np.pi)
        f, _, _ = c1_shift(psi, cone, mesh)
        assert is_in_C2(f, cone, tol=1e-9)

    def test_measured_norms(self):
        obs = C1Observable.from_function(lambda x: np.sin(2.0 * np.pi * x), name="sin")
        assert obs.sup_norm == pytest.approx(1.0, abs=1e-6)
        assert obs.deriv_sup_norm == pytest.approx(2.0 * np.pi, rel=1e-3)

    def test_shift_pair_keeps_means(self, fine_mesh, cone):
        sin = C1Observable(lambda x: np.sin(2.0 * np.pi * x), 1.0, 2.0 * np.pi)
        cos = C1Observable(lambda x: np.cos(2.0 * np.pi * x), 1.0, 2.0 * np.pi)
        phi, psi, _, _ = shift_pair(sin, cos, cone, fine_mesh)
        assert mass(phi) == pytest.approx(mass(psi), abs=1e-5)
        assert is_in_C2(phi, cone) and is_in_C2(psi, cone)


class TestSampling:
    """Tests for mixture and sample_cone_density."""

    def test_unit_mass(self, mesh, cone):
        for seed in range(20):
            assert mass(sample_cone_density(seed, cone, mesh)) == pytest.approx(1.0, abs=1e-8)

    def test_deterministic(self, mesh, cone):
        a = sample_cone_density(5, cone, mesh)
        b = sample_cone_density(5, cone, mesh)
        np.testing.assert_array_equal(a.hvals, b.hvals)

    def test_single_component(self, mesh, cone):
        f = sample_cone_density(0, cone, mesh, thetas=[mesh.alpha])
        np.testing.assert_allclose(f.hvals, 1.0 - mesh.alpha, rtol=1e-12)

    def test_samples_lie_in_cone(self, mesh, cone):
        for seed in range(200):
            f = sample_cone_density(seed, cone, mesh)
            assert is_in_C1(f), f"seed {seed}"
            assert is_in_C2(f, cone), f"seed {seed}"

    def test_mixture_length_mismatch(self, mesh):
        with pytest.raises(DomainError):
            mixture(mesh, [0.1, 0.2], [1.0])
