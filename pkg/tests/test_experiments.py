"""
Tests for the experiment drivers.

Runs marked slow use the acceptance mesh; the rest stay on the small mesh.
"""

import math

import numpy as np
import pytest

from core.cones import ConeParams, is_in_C2
from core.density import ConeDensity, GradedMesh, c1_shift, mass
from core.errors import (
    ConeMembershipError,
    ConfigError,
    ConvergenceError,
    DomainError,
    MassMismatchError,
)
from core.maps import ArcSet, MapSequence, iter_betas
from experiments.averaging import averaging_scan
from experiments.cone_suite import cone_invariance_suite, lower_bound_scan
from experiments.covering import cover_time, covering_time_scan
from experiments.distortion import distortion_scan
from experiments.fitting import DecaySeries, FitResult
from experiments.memory_loss import (
    MemoryLossRun,
    correlation_experiment,
    epsilon_schedule,
    memory_loss_batch,
    memory_loss_experiment,
    telescoped_bound,
)
from experiments.observables import parse_c1, parse_density, parse_initial, parse_pair
from experiments.preimages import an_asymptotics


class TestMemoryLoss:
    """Tests for memory_loss_experiment and memory_loss_batch."""

    def test_distance_shrinks(self, mesh):
        phi = ConeDensity.constant(mesh)
        psi = ConeDensity.power(mesh, 0.25)
        run = memory_loss_experiment(0.5, 0, "constant", phi, psi, 100, policy_params={"beta": 0.5})
        values = run.series.values
        assert run.series.ns[-1] == 100
        assert values[-1] < values[0]
        assert mass(run.final) == pytest.approx(1.0, abs=1e-8)
        assert run.envelope > 0.0

    def test_mass_mismatch(self, mesh):
        with pytest.raises(MassMismatchError):
            memory_loss_experiment(
                0.5, 0, "uniform", ConeDensity.constant(mesh), ConeDensity.constant(mesh, 2.0), 10,
            )

    def test_input_outside_cone(self, mesh):
        # 2 - (1/2) x^(-1/2) has unit mass but is negative near 0
        bad = 2.0 * ConeDensity.constant(mesh) - ConeDensity.power(mesh, 0.5)
        with pytest.raises(ConeMembershipError) as exc_info:
            memory_loss_experiment(0.5, 0, "uniform", ConeDensity.constant(mesh), bad, 10)
        assert exc_info.value.violations

    def test_short_run_has_no_fit(self, mesh):
        run = memory_loss_experiment(
            0.5, 0, "uniform", ConeDensity.constant(mesh), ConeDensity.power(mesh, 0.25), 5,
        )
        assert run.fit is None
        assert not run.within_band()
        assert not run.meets_bound()
        assert not run.accepts(mode="two-sided")

    def test_band_modes(self, mesh):
        series = DecaySeries(np.array([10, 100]), np.array([1e-2, 1e-5]))
        run = MemoryLossRun(series=series, fit=None, envelope=1.0, norm_sum=2.0)
        run.fit = FitResult(slope=-1.6, intercept=0.0, log_log_correction_used=True,
                            residual_rms=0.0, fit_window=(10.0, 100.0))
        # Faster than the envelope: meets the bound, misses the two-sided band
        assert run.meets_bound()
        assert not run.within_band()
        assert run.accepts((-1.25, -0.85), "upper")
        assert not run.accepts((-1.25, -0.85), "two-sided")
        run.fit.slope = -0.5
        assert not run.accepts(mode="upper")
        run.fit.slope = -1.0
        assert run.accepts(mode="two-sided")
        with pytest.raises(DomainError):
            run.accepts(mode="sideways")

    def test_identical_inputs(self, mesh):
        f = ConeDensity.power(mesh, 0.25)
        run = memory_loss_experiment(0.5, 0, "uniform", f, f, 40)
        assert np.all(run.series.values == 0.0)
        assert run.fit is None
        assert run.envelope == 0.0

    def test_linear_branch_forgets_exponentially(self, mesh):
        phi = ConeDensity.constant(mesh)
        psi = ConeDensity.power(mesh, 0.25)
        run = memory_loss_experiment(
            0.5, 0, "constant", phi, psi, 300,
            checkpoints=range(1, 301), policy_params={"beta": 0.0},
        )
        values = run.series.values
        assert values[-1] < 1e-10
        assert values[-1] < 1e-6 * values[0]
        assert np.isfinite(run.envelope)
        # n^(-1) (log n)^2 stays far above an exponential tail
        assert values[-1] < run.envelope * run.norm_sum * 300.0 ** -1.0 * math.log(300.0) ** 2

    def test_psi_rescaled_to_phi_mass(self, mesh):
        phi = ConeDensity.constant(mesh)
        psi = ConeDensity.power(mesh, 0.25)
        run = memory_loss_experiment(
            0.5, 0, "constant", phi, psi * (1.0 + 5e-9), 200, policy_params={"beta": 0.0},
        )
        # A mass gap would floor D_n near 5e-9
        assert run.series.values[-1] < 1e-10

    def test_shifted_c1_input(self, mesh, cone):
        phi, _, _ = c1_shift(parse_c1("sin:0.1"), cone, mesh)
        assert is_in_C2(phi, cone)
        psi = ConeDensity.constant(mesh, mass(phi))
        run = memory_loss_experiment(0.5, 1, "uniform", phi, psi, 100)
        assert np.isfinite(run.envelope)
        assert run.series.values[-1] < run.series.values[0]

    def test_batch(self, mesh):
        batch = memory_loss_batch(
            0.5, [0, 1], "uniform", ConeDensity.constant(mesh), ConeDensity.power(mesh, 0.25), 60,
        )
        assert len(batch.runs) == 2
        assert batch.envelope_spread >= 1.0
        assert batch.runs[0].sequence["seed"] == 0

    @pytest.mark.slow
    def test_rate_at_half(self, fine_mesh):
        phi = ConeDensity.constant(fine_mesh)
        psi = ConeDensity.power(fine_mesh, 0.25)
        run = memory_loss_experiment(0.5, 7, "constant", phi, psi, 1000, policy_params={"beta": 0.5})
        assert run.fit is not None
        assert run.meets_bound()
        assert np.isfinite(run.envelope) and run.envelope > 0.0

    @pytest.mark.slow
    def test_random_sequences_share_the_envelope(self, fine_mesh):
        phi = ConeDensity.constant(fine_mesh)
        psi = ConeDensity.power(fine_mesh, 0.25)
        batch = memory_loss_batch(0.5, [0, 1, 2], "uniform", phi, psi, 1000)
        for run in batch.runs:
            assert run.meets_bound()
        slowest = memory_loss_experiment(0.5, 0, "constant", phi, psi, 1000, policy_params={"beta": 0.5})
        constants = [r.envelope for r in batch.runs] + [slowest.envelope]
        assert min(constants) > 0.0
        assert max(constants) / min(constants) <= 10.0


class TestCorrelation:
    """Tests for correlation_experiment and the schedules."""

    def test_slack_nonnegative(self, mesh, cone):
        psi = ConeDensity.power(mesh, 0.25)
        run = correlation_experiment(0.5, 3, "uniform", psi, parse_c1("sin:1"), 50)
        assert run.series.meta["method"] == "orbit"
        assert run.resolved[0]
        assert np.all(run.resolved_slack >= -1e-12)
        assert len(run.rows()[0]) == 4

    def test_transfer_method_resolved(self, mesh):
        psi = ConeDensity.power(mesh, 0.25)
        run = correlation_experiment(0.5, 3, "uniform", psi, parse_c1("sin"), 50, method="transfer")
        assert run.resolved.all()
        assert np.all(run.errors == 0.0)
        assert np.all(run.slack >= -1e-12)

    def test_constant_psi_is_uncorrelated(self, mesh):
        run = correlation_experiment(0.5, 3, "uniform", ConeDensity.constant(mesh), parse_c1("cos"), 20)
        assert np.all(run.series.values < 1e-10)

    def test_orbit_method(self, mesh):
        run = correlation_experiment(
            0.5, 3, "uniform", ConeDensity.power(mesh, 0.25), parse_c1("sin"), 3,
            checkpoints=[1, 2, 3], method="orbit",
        )
        assert run.series.ns.tolist() == [1, 2, 3]
        assert np.all(run.errors >= 0.0)

    def test_unknown_method(self, mesh):
        with pytest.raises(DomainError):
            correlation_experiment(0.5, 0, "uniform", ConeDensity.constant(mesh), parse_c1("sin"), 5,
                                   method="monte-carlo")

    def test_epsilon_schedule(self):
        assert epsilon_schedule(100, 0.5) == pytest.approx(math.log(100.0) ** 2 / 1e4, rel=1e-12)
        with pytest.raises(DomainError):
            epsilon_schedule(2, 0.5)

    def test_telescoped_bound_decreases(self):
        assert telescoped_bound(10 ** 6, 0.5) < telescoped_bound(10 ** 3, 0.5)
        assert telescoped_bound(10 ** 3, 0.5) > 0.0


class TestLadderFit:
    """Tests for an_asymptotics."""

    def test_rate(self):
        ladder = an_asymptotics(0.5, 500)
        assert ladder.fit.slope == pytest.approx(-2.0, rel=0.05)
        assert ladder.c_alpha > 0.0
        assert len(ladder.rows()) == 500

    def test_linear_ladder(self):
        ladder = an_asymptotics(0.5, 100, beta=0.0)
        assert ladder.log_step == pytest.approx(math.log(2.0 / 3.0), abs=1e-9)

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", [0.3, 0.8])
    def test_rate_other_alpha(self, alpha):
        ladder = an_asymptotics(alpha, 10 ** 4)
        assert ladder.fit.slope == pytest.approx(-1.0 / alpha, rel=0.05)

    def test_minimum_length(self):
        with pytest.raises(DomainError):
            an_asymptotics(0.5, 20)


class TestCovering:
    """Tests for cover_time and covering_time_scan."""

    def test_full_circle(self):
        assert cover_time(iter_betas(0.5, "uniform"), ArcSet.full_circle()) == 0

    def test_step_limit(self):
        with pytest.raises(ConvergenceError):
            cover_time(iter_betas(0.5, "uniform"), ArcSet.from_arc(0.0, 1e-6), max_steps=1)

    def test_scan(self):
        scan = covering_time_scan(0.5, 0, "uniform", [2.0 ** -k for k in range(4, 8)], ladder_length=200)
        assert scan.eps.tolist() == sorted(scan.eps.tolist(), reverse=True)
        # Nested arcs under one sequence cover in nondecreasing time
        assert np.all(np.diff(scan.worst) >= 0)
        assert np.all(np.diff(scan.sequence) >= 0)
        assert np.all(scan.control >= 1)
        assert np.all(scan.predicted > 0.0)
        # Exponents below alpha escape 0 faster than the constant beta = alpha sequence
        assert scan.sequence[-1] <= scan.worst[-1]
        assert scan.c_cov == pytest.approx(float(np.max(scan.worst * scan.eps ** 0.5)))
        assert len(scan.rows()) == 4
        assert len(scan.rows()[0]) == 3

    def test_worst_case_ignores_policy(self):
        eps = [2.0 ** -k for k in range(4, 8)]
        uniform = covering_time_scan(0.5, 0, "uniform", eps, ladder_length=200)
        other = covering_time_scan(0.5, 5, "power-decay", eps, ladder_length=200, theta=1.0)
        np.testing.assert_array_equal(uniform.worst, other.worst)

    def test_linear_branch_covers_logarithmically(self):
        eps = [2.0 ** -k for k in range(4, 11)]
        scan = covering_time_scan(0.5, 0, "constant", eps, ladder_length=200, beta=0.0)
        for e, steps in zip(eps, scan.sequence.tolist()):
            assert steps <= math.ceil(math.log(1.0 / (2.0 * e)) / math.log(1.5)) + 2

    @pytest.mark.slow
    def test_worst_exponent(self):
        scan = covering_time_scan(0.5, 0, "uniform", [2.0 ** -k for k in range(4, 11)])
        assert scan.fit is not None
        assert 0.35 <= scan.fit.slope <= 0.65

    def test_eps_range(self):
        with pytest.raises(DomainError):
            covering_time_scan(0.5, 0, "uniform", [0.2])


class TestDistortion:
    """Tests for distortion_scan."""

    def test_degenerate_arc(self):
        scan = distortion_scan(MapSequence.constant(0.5, 10), 0.3, 0.3, 10)
        assert np.all(scan.values == 0.0)
        assert scan.regimes == [None] * 10

    def test_linear_branch_has_no_distortion(self):
        scan = distortion_scan(MapSequence.constant(0.0, 2), 0.01, 0.02, 1)
        assert scan.final == pytest.approx(0.0, abs=1e-12)

    def test_branch_straddle(self):
        # Slopes 3/2 and 3 on the two sides of 2/3
        scan = distortion_scan(MapSequence.constant(0.0, 2), 0.6, 0.7, 1)
        assert scan.spans_branch[0]
        assert scan.final == pytest.approx(math.log(2.0), rel=1e-12)

    def test_invalid_arc(self):
        with pytest.raises(DomainError):
            distortion_scan(MapSequence.constant(0.5, 2), 0.7, 0.6, 1)


class TestAveraging:
    """Tests for averaging_scan."""

    def test_exponent(self, fine_mesh):
        scan = averaging_scan(ConeDensity.power(fine_mesh, 0.5), [2.0 ** -k for k in range(4, 11)])
        assert scan.fit.slope >= 1.0 - 0.5 - 0.1
        assert scan.ratio > 0.0
        assert len(scan.rows()) == 7


class TestConeSuite:
    """Tests for the cone invariance suite and the lower bound scan."""

    def test_invariance(self, mesh, cone):
        result = cone_invariance_suite(0.5, 0, 20, mesh=mesh, cone=cone)
        assert result.samples == 20
        assert result.violations == 0

    @pytest.mark.slow
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
    def test_invariance_across_alpha(self, alpha):
        result = cone_invariance_suite(alpha, 0, 200, mesh=GradedMesh(alpha, 1024), cone=ConeParams(alpha))
        assert result.samples == 200
        assert result.violations == 0

    def test_lower_bound(self, mesh, cone):
        scan = lower_bound_scan(0.5, [0, 1], 30, mesh=mesh, cone=cone)
        assert scan.gap >= -1e-6
        assert len(scan.per_seed) == 2


class TestObservables:
    """Tests for observable and density specs."""

    def test_density_specs(self, mesh, cone):
        assert mass(parse_density("one", mesh, cone)) == pytest.approx(1.0, abs=1e-12)
        assert mass(parse_density("power:0.25", mesh, cone)) == pytest.approx(1.0, abs=1e-4)
        a = parse_density("sample:3", mesh, cone)
        b = parse_density("sample:3", mesh, cone)
        np.testing.assert_array_equal(a.hvals, b.hvals)

    def test_unknown_specs(self, mesh, cone):
        with pytest.raises(ConfigError):
            parse_density("gaussian", mesh, cone)
        with pytest.raises(ConfigError):
            parse_c1("tan")
        with pytest.raises(ConfigError):
            parse_c1("sin:abc")

    def test_mixed_pair(self, mesh, cone):
        with pytest.raises(ConfigError):
            parse_pair("sin", "one", mesh, cone)

    def test_c1_pair(self, mesh, cone):
        phi, psi = parse_pair("sin", "cos", mesh, cone)
        assert is_in_C2(phi, cone) and is_in_C2(psi, cone)

    def test_initial_shift(self, mesh, cone):
        f = parse_initial("sin:0.1", mesh, cone)
        assert is_in_C2(f, cone)

    def test_other_alpha(self):
        mesh = GradedMesh(0.3, 256)
        cone = ConeParams(0.3)
        assert is_in_C2(parse_density("sample:1", mesh, cone), cone)
