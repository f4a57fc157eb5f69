"""
Tests for cone constants and membership checks.
"""

import json
import math

import numpy as np
import pytest

from core.cones import (
    MAX_REPORTED,
    ConeParams,
    a_min,
    c3_bound,
    is_in_C1,
    is_in_C2,
    lower_bound_gap,
)
from core.density import ConeDensity, sample_cone_density
from core.errors import DomainError


class TestConstants:
    """Tests for a_min, ConeParams and c3."""

    def test_a_min_half(self):
        assert a_min(0.5) == pytest.approx(5.0 * math.sqrt(2.0), rel=1e-12)

    def test_a_min_large_alpha(self):
        assert a_min(0.8) == pytest.approx(24.3754, rel=1e-5)

    def test_a_min_range(self):
        with pytest.raises(DomainError):
            a_min(0.0)

    def test_default_a(self):
        assert ConeParams(0.5).a == pytest.approx(a_min(0.5))

    def test_a_below_floor(self):
        with pytest.raises(DomainError):
            ConeParams(0.5, a=1.0)

    def test_c3_value(self):
        cone = ConeParams(0.5, a=5.0 * math.sqrt(2.0))
        assert cone.c3 == pytest.approx(0.0795495, rel=1e-5)
        assert c3_bound(cone) == pytest.approx(cone.c3, rel=1e-14)

    def test_c3_never_exceeds_a(self):
        for alpha in (0.1, 0.3, 0.5, 0.7, 0.9):
            cone = ConeParams(alpha)
            assert 0.0 < cone.c3 <= cone.a


class TestMembership:
    """Tests for is_in_C1 and is_in_C2."""

    def test_constant_in_both(self, mesh, cone):
        f = ConeDensity.constant(mesh)
        assert is_in_C1(f)
        assert is_in_C2(f, cone)

    def test_singular_density_in_both(self, mesh, cone):
        f = ConeDensity.power(mesh, mesh.alpha)
        assert is_in_C1(f)
        assert is_in_C2(f, cone)

    def test_increasing_fails(self, mesh):
        report = is_in_C1(ConeDensity.from_function(mesh, lambda x: x))
        assert not report
        assert {v.check for v in report.violations} == {"decreasing"}

    def test_negative_fails(self, mesh):
        report = is_in_C1(ConeDensity.constant(mesh, -1.0))
        assert not report
        assert "nonnegative" in {v.check for v in report.violations}

    def test_steep_drop_fails_weighted_monotonicity(self, mesh):
        f = ConeDensity.from_function(mesh, lambda x: np.where(x < 0.5, 1.0, 0.1))
        report = is_in_C1(f)
        assert not report
        assert "x_pow_increasing" in {v.check for v in report.violations}

    def test_mislabeled_mass_fails(self, mesh, cone):
        """h = 10 exceeds a * 1 = 5 sqrt(2) once the mass is claimed to be 1."""
        f = 20.0 * ConeDensity.power(mesh, mesh.alpha)
        assert is_in_C2(f, cone)
        report = is_in_C2(f, cone, mass_value=1.0)
        assert not report
        assert {v.check for v in report.violations} == {"upper_bound"}

    def test_report_is_capped(self, mesh):
        report = is_in_C1(ConeDensity.from_function(mesh, lambda x: x))
        assert len(report.violations) <= MAX_REPORTED
        magnitudes = [v.magnitude for v in report.violations]
        assert magnitudes == sorted(magnitudes, reverse=True)

    def test_report_serializes(self, mesh):
        report = is_in_C1(ConeDensity.from_function(mesh, lambda x: x))
        entries = json.loads(report.to_json())
        assert set(entries[0]) == {"check", "node_index", "x", "magnitude"}

    def test_alpha_mismatch(self, mesh):
        with pytest.raises(DomainError):
            is_in_C2(ConeDensity.constant(mesh), ConeParams(0.3))


class TestLowerBound:
    """Tests for lower_bound_gap."""

    def test_constant(self, mesh, cone):
        gap = lower_bound_gap(ConeDensity.constant(mesh), cone)
        assert gap == pytest.approx(1.0 - cone.c3, rel=1e-9)

    def test_sampled_members(self, mesh, cone):
        for seed in range(50):
            assert lower_bound_gap(sample_cone_density(seed, cone, mesh), cone) >= -1e-12
