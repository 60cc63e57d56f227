import math

import numpy as np
import pytest

from nsklab.calibration import DRIFT_FACTOR, calibrated
from nsklab.estimates import (
    HOLDER_EXPONENT,
    LOG_FLOOR,
    EnergyBreakdown,
    bd_identity_audit,
    dissipation_rate,
    energy,
    equivalence_constants,
    gamma_q_admissible,
    jungel_audit,
    jungel_terms,
    log_law_audit,
    log_law_constant,
    pi_equivalence_audit,
    potential_energy_density,
    psi,
    region_split,
    reverse_holder_audit,
    sobolev_diagnostics,
    v_energy,
    weighted_velocity_norm,
)
from nsklab.fields import (
    FieldError,
    ScalarField,
    VectorField,
    constant_field,
    make_grid,
    random_band_limited,
)
from nsklab.solver import FlowState, SolverConfig, TrajectoryRecord, make_preset, run, to_effective


def _traj(states, scalars=None):
    rec = TrajectoryRecord(states[0].grid, states[0].formulation)
    rec.states = list(states)
    if scalars:
        rec.scalars = {k: np.asarray(v) for k, v in scalars.items()}
    return rec


def _state(grid, rho_vals, vel_vals=None, formulation="primitive", t=0.0):
    vel = np.zeros((grid.dim,) + grid.shape) if vel_vals is None else vel_vals
    return FlowState(t, ScalarField(grid, rho_vals), VectorField(grid, vel), formulation)


class TestPotentialEnergyDensity:
    def test_far_field_value_is_minimum(self, grid64):
        pi = potential_energy_density(constant_field(grid64, 1.0), 1.0, 2.0)
        assert np.all(pi.values == 0.0)

    def test_closed_form_gamma_two(self, grid64):
        pi = potential_energy_density(constant_field(grid64, 3.0), 1.0, 2.0)
        assert pi.values.flat[0] == pytest.approx(2.0, rel=1e-14)
        # (rho - 1)^2 / 2 in closed form for gamma = 2
        rng = np.random.default_rng(5)
        vals = 1.0 + 0.8 * random_band_limited(grid64, rng).values
        pi2 = potential_energy_density(ScalarField(grid64, vals), 1.0, 2.0)
        assert np.max(np.abs(pi2.values - 0.5 * (vals - 1.0) ** 2)) <= 1e-12

    def test_gamma_one_substitution(self, grid64):
        pi = potential_energy_density(constant_field(grid64, math.e), 1.0, 1.0)
        assert pi.values.flat[0] == pytest.approx(1.0, rel=1e-14)

    def test_nonnegative_on_corpus(self, grid64, corpus64):
        for f in corpus64[:6]:
            rho = ScalarField(grid64, 1.0 + 0.9 * f.values)
            for gamma in (1.0, 1.5, 2.0, 2.7):
                pi = potential_energy_density(rho, 1.0, gamma)
                assert np.min(pi.values) >= 0.0

    def test_gamma_one_needs_positive_density(self, grid64):
        vals = np.ones(grid64.shape)
        vals[0, 0] = 0.0
        with pytest.raises(Exception):
            potential_energy_density(ScalarField(grid64, vals), 1.0, 1.0)

    def test_strictly_positive_away_from_far_field(self, grid64):
        for gamma in (1.0, 1.5, 2.0):
            for shift in (-0.5, -1e-3, 1e-3, 0.5, 3.0):
                rho = constant_field(grid64, 1.0 + shift)
                pi = potential_energy_density(rho, 1.0, gamma)
                assert np.min(pi.values) > 0.0, (gamma, shift)


class TestEquivalence:
    def test_explicit_constants_gamma_two(self):
        c1, c2 = equivalence_constants(2.0)
        assert c1 == pytest.approx(0.25)
        assert c2 == pytest.approx(8.0 / 9.0)

    def test_lower_constant_positive_on_gamma_grid(self):
        for gamma in np.linspace(1.0, 3.0, 101)[1:]:
            c1, _ = equivalence_constants(float(gamma))
            assert c1 > 0.0

    def test_point_example(self, grid64):
        # rho = 5, rho_bar = 1, gamma = 2: pi = 8 between 4 and 128/9
        pi = potential_energy_density(constant_field(grid64, 5.0), 1.0, 2.0).values.flat[0]
        c1, c2 = equivalence_constants(2.0)
        assert pi == pytest.approx(8.0)
        assert c1 * 16.0 <= pi <= c2 * 16.0

    def test_pointwise_high_branch_zero_violations(self, grid64):
        rng = np.random.default_rng(9)
        base = np.abs(random_band_limited(grid64, rng).values)
        for gamma in (1.1, 1.5, 2.0, 2.5):
            rho = ScalarField(grid64, 4.0 + 96.0 * base)  # all >= 4 rho_bar
            reps = pi_equivalence_audit(rho, 1.0, gamma)
            assert all(r.passed for r in reps), (gamma, reps)

    def test_constant_far_field_vacuous(self, grid64):
        reps = pi_equivalence_audit(constant_field(grid64, 1.0), 1.0, 2.0)
        assert all(r.passed for r in reps)

    def test_mixed_field_passes(self, grid64):
        rng = np.random.default_rng(10)
        vals = 1.0 + 0.9 * random_band_limited(grid64, rng).values
        vals[0:4, 0:4] = 7.5  # force a populated high branch
        for gamma in (1.1, 1.5, 2.0, 2.5):
            reps = pi_equivalence_audit(ScalarField(grid64, vals), 1.0, gamma)
            assert all(r.passed for r in reps)


class TestEnergy:
    def test_constant_state_zero(self, grid64_wide):
        eb = energy(make_preset("constant", grid64_wide), 2.0)
        assert eb.kinetic == eb.potential == eb.fisher == 0.0
        assert eb.total == 0.0

    def test_kinetic_closed_form(self, grid64):
        x, _ = grid64.meshgrid()
        vel = np.zeros((2,) + grid64.shape)
        vel[0] = np.sin(x)
        eb = energy(_state(grid64, np.ones(grid64.shape), vel), 2.0)
        assert eb.kinetic == pytest.approx(0.25 * grid64.volume, rel=1e-12)
        assert eb.potential == 0.0
        assert eb.fisher == 0.0

    def test_total_is_sum(self):
        eb = EnergyBreakdown(1.0, 2.0, 3.5)
        assert eb.total == 6.5

    def test_resolution_robustness_of_initial_energy(self):
        values = []
        for n in (64, 128):
            g = make_grid(2, n, 4 * np.pi, 1.0)
            values.append(energy(make_preset("gaussian-bump", g), 2.0).total)
        assert abs(values[0] - values[1]) <= 1e-6 * values[1]

    def test_dissipation_balances_energy_rate(self, grid64_wide):
        # (E(t+dt) - E(t))/dt must converge to -(dissipation) as dt -> 0
        gamma = 2.0
        s = make_preset("random-large", grid64_wide, seed=6)
        errs = []
        for dt in (2e-4, 1e-4):
            cfg = SolverConfig(gamma=gamma, dt=dt, t_end=dt)
            rec = run(s, cfg, probes={"E": lambda st: energy(st, gamma).total})
            rate = (rec.scalars["E"][1] - rec.scalars["E"][0]) / dt
            errs.append(abs(rate + dissipation_rate(s)) / dissipation_rate(s))
        assert errs[1] <= 0.6 * errs[0]
        assert errs[1] <= 0.05


class TestVEnergy:
    def test_zero_velocity(self, grid64_wide):
        s = to_effective(make_preset("constant", grid64_wide))
        assert v_energy(s) == 0.0

    def test_closed_form(self, grid64):
        x, _ = grid64.meshgrid()
        vel = np.zeros((2,) + grid64.shape)
        vel[0] = np.sin(x)
        s = _state(grid64, np.ones(grid64.shape), vel, formulation="effective")
        assert v_energy(s) == pytest.approx(0.5 * grid64.volume, rel=1e-12)

    def test_trajectory_bound_with_frozen_constant(self, grid64_wide):
        cfg = SolverConfig(gamma=2.0, dt=1e-3, t_end=0.1)
        s = to_effective(make_preset("gaussian-bump", grid64_wide))
        rec = run(s, cfg, state_stride=10)
        e0 = energy(rec.states[0], 2.0).total
        sup_v = max(v_energy(st) for st in rec.states)
        c_allowed = DRIFT_FACTOR * calibrated("venergy.C.gaussian-bump")
        assert sup_v <= c_allowed * (1.0 + e0)


class TestBdIdentity:
    def test_constant_state(self, grid64_wide):
        rep = bd_identity_audit(_traj([make_preset("constant", grid64_wide)]))
        assert rep.passed
        assert rep.lhs == rep.rhs == 0.0

    def test_static_density_reduces_to_hessian_term(self, grid64):
        x, y = grid64.meshgrid()
        rho = 1.0 + 0.25 * np.cos(x) + 0.1 * np.sin(y)
        rep = bd_identity_audit(_traj([_state(grid64, rho)]), tolerance=1e-10)
        assert rep.passed

    def test_moving_state_residual_small(self, grid64_wide):
        s = make_preset("random-large", grid64_wide, seed=8)
        rep = bd_identity_audit(_traj([s]))
        assert rep.passed, rep

    def test_along_run(self, grid64_wide):
        cfg = SolverConfig(gamma=2.0, dt=1e-3, t_end=0.05)
        for preset in ("gaussian-bump", "random-large"):
            rec = run(make_preset(preset, grid64_wide, seed=12), cfg, state_stride=10)
            rep = bd_identity_audit(rec, tolerance=1e-6)
            assert rep.passed, (preset, rep)


def _analytic_jungel(grid, amp=0.5):
    """Independent oracle: closed-form derivatives of rho = 1 + amp * exp(-r^2)."""
    coords = grid.meshgrid()
    c = 0.5 * grid.box_length
    d = grid.dim
    diffs = [x - c for x in coords]
    r2 = sum(t**2 for t in diffs)
    g = amp * np.exp(-r2)
    rho = 1.0 + g
    dg = [-2.0 * t * g for t in diffs]
    hess_g = np.empty((d, d) + grid.shape)
    for i in range(d):
        for j in range(d):
            hess_g[i, j] = (4.0 * diffs[i] * diffs[j] - (2.0 if i == j else 0.0)) * g
    cell = grid.cell_volume

    hess_log = np.empty_like(hess_g)
    hess_sqrt = np.empty_like(hess_g)
    for i in range(d):
        for j in range(d):
            hess_log[i, j] = hess_g[i, j] / rho - dg[i] * dg[j] / rho**2
            hess_sqrt[i, j] = hess_g[i, j] / (2.0 * np.sqrt(rho)) - dg[i] * dg[j] / (
                4.0 * rho**1.5
            )
    d_val = float(np.sum(rho * np.sum(hess_log**2, axis=(0, 1))) * cell)
    a_val = float(np.sum(hess_sqrt**2) * cell)
    grad_q = np.stack([t / (4.0 * rho**0.75) for t in dg])
    b_val = float(np.sum(np.sum(grad_q**2, axis=0) ** 2) * cell)
    return d_val, a_val, b_val


class TestJungel:
    def test_constant_density_all_zero(self, grid3d):
        d_val, a_val, b_val = jungel_terms(constant_field(grid3d, 2.0))
        assert d_val == a_val == b_val == 0.0

    def test_analytic_oracle_3d(self, grid3d):
        c = 0.5 * grid3d.box_length
        coords = grid3d.meshgrid()
        rho = ScalarField(
            grid3d, 1.0 + 0.5 * np.exp(-sum((x - c) ** 2 for x in coords))
        )
        d_val, a_val, b_val = jungel_terms(rho)
        d_ref, a_ref, b_ref = _analytic_jungel(grid3d)
        assert d_val == pytest.approx(d_ref, rel=1e-6)
        assert a_val == pytest.approx(a_ref, rel=1e-6)
        # quartic gradients of fractional powers resolve more slowly at 32^3
        assert b_val == pytest.approx(b_ref, rel=1e-4)
        assert d_val >= a_val / 7.0
        assert d_val >= b_val / 8.0

    def test_random_positive_densities_3d(self, grid3d):
        rng = np.random.default_rng(77)
        for _ in range(10):
            f = random_band_limited(grid3d, rng, max_mode=5, amplitude=0.5)
            reps = jungel_audit(ScalarField(grid3d, 1.0 + f.values))
            assert all(r.passed for r in reps)

    def test_2d_reports_without_assertion(self, grid64):
        rng = np.random.default_rng(78)
        f = random_band_limited(grid64, rng, amplitude=0.5)
        reps = jungel_audit(ScalarField(grid64, 1.0 + f.values))
        assert all(r.passed for r in reps)
        assert all("measured" in r.inequality_id for r in reps)


class TestWeightedNorm:
    def test_constant_profile(self):
        g = make_grid(2, 16, 2.0, 1.0)  # volume 4
        vel = np.full((2,) + g.shape, 0.0)
        vel[0] = 3.0
        s = _state(g, np.ones(g.shape), vel, formulation="effective")
        for p in (0.0, 2.0, 6.0):
            assert weighted_velocity_norm(s, p) == pytest.approx(
                3.0 * 4.0 ** (1.0 / (p + 2.0)), rel=1e-12
            )

    def test_zero_velocity(self, grid64_wide):
        s = to_effective(make_preset("constant", grid64_wide))
        assert weighted_velocity_norm(s, 4.0) == 0.0

    def test_rejects_negative_exponent(self, grid64_wide):
        s = to_effective(make_preset("constant", grid64_wide))
        with pytest.raises(FieldError):
            weighted_velocity_norm(s, -1.0)


class TestAdmissibleExponent:
    def test_brute_force_oracle(self):
        # oracle: plain scan over the same candidate grid
        def oracle(gamma):
            if not 1.0 < gamma < 8.0 / 3.0:
                return None
            if gamma > 2.0:
                qs = [1.0 + k * 1e-3 for k in range(1, 1000)]
                cond = lambda q: (2 * q + 6) / (q + 2) >= gamma - 1e-12
            else:
                qs = [2.0 + k * 1e-3 for k in range(0, 2000)]
                cond = lambda q: (q + 6) / (q + 2) >= gamma - 1e-12
            for q in qs:
                if cond(q):
                    return q
            return None

        for gamma in (1.2, 1.5, 1.9, 2.0, 2.2, 2.5, 2.6):
            assert gamma_q_admissible(gamma) == pytest.approx(oracle(gamma), abs=1e-9)

    def test_case_ranges(self):
        q = gamma_q_admissible(2.5)
        assert 1.0 < q < 2.0
        assert (2 * q + 6) / (q + 2) >= 2.5 - 1e-9
        assert gamma_q_admissible(1.5) == pytest.approx(2.0)

    def test_boundaries_excluded(self):
        assert gamma_q_admissible(8.0 / 3.0) is None
        assert gamma_q_admissible(1.0) is None
        assert gamma_q_admissible(3.0) is None


class TestRegionSplit:
    def test_no_high_region(self, grid64_wide):
        s = make_preset("gaussian-bump", grid64_wide)
        rs = region_split(s, 2.0)
        assert rs.measure_high == 0.0
        assert rs.chebyshev.passed

    def test_single_cell_spike(self, grid64_wide):
        g = grid64_wide
        vals = np.ones(g.shape)
        vals[5, 7] = 10.0
        rs = region_split(_state(g, vals), 2.0)
        assert rs.measure_high == pytest.approx(g.cell_volume, rel=1e-12)
        assert rs.chebyshev.passed

    def test_constant_far_field(self, grid64_wide):
        rs = region_split(make_preset("constant", grid64_wide), 2.0)
        assert rs.pi_low == rs.pi_high == 0.0
        assert rs.measure_low == pytest.approx(grid64_wide.volume)


class TestPsiAndLogLaw:
    def test_constant_profile_time_scaling(self):
        g = make_grid(2, 16, 2.0, 1.0)
        vel = np.zeros((2,) + g.shape)
        vel[0] = 2.0
        states = [
            _state(g, np.ones(g.shape), vel, formulation="effective", t=t)
            for t in (0.0, 0.5, 1.0)
        ]
        for p in (1.0, 3.0):
            assert psi(_traj(states), p) == pytest.approx(1.0 * g.volume * 2.0**p, rel=1e-12)

    def test_zero_velocity(self, grid64_wide):
        states = [to_effective(make_preset("constant", grid64_wide))]
        assert psi(_traj(states), 2.0) == 0.0

    def test_log_floor_value(self):
        assert LOG_FLOOR == pytest.approx(math.exp(25.0 / 9.0), rel=1e-15)
        assert HOLDER_EXPONENT == pytest.approx(5.0 / 3.0)

    def test_constant_state_log_law(self, grid64_wide):
        cfg = SolverConfig(gamma=2.0, dt=1e-3, t_end=0.01)
        rec = run(to_effective(make_preset("constant", grid64_wide)), cfg)
        assert log_law_constant(rec) == 0.0
        assert log_law_audit(rec, preset="gaussian-bump").passed

    def test_preset_run_audits(self, grid64_wide):
        cfg = SolverConfig(gamma=2.0, dt=1e-3, t_end=0.1)
        rec = run(to_effective(make_preset("gaussian-bump", grid64_wide)), cfg, state_stride=10)
        assert log_law_audit(rec, preset="gaussian-bump").passed
        for p in (1, 2, 3):
            assert reverse_holder_audit(rec, p, preset="gaussian-bump").passed


class TestSobolevDiagnostics:
    def test_constant_state_all_zero(self, grid64_wide):
        states = [to_effective(make_preset("constant", grid64_wide))]
        series = sobolev_diagnostics(_traj(states), 2.0)
        for key, vals in series.items():
            if key != "t":
                assert np.max(np.abs(vals)) <= 1e-12, key

    def test_single_mode_closed_form(self, grid64):
        eps = 0.05
        x, _ = grid64.meshgrid()
        rho = 1.0 + eps * np.sin(x)
        states = [_state(grid64, rho, formulation="effective")]
        series = sobolev_diagnostics(_traj(states), 2.0)
        expected = eps * math.sqrt(grid64.volume / 2.0) * math.sqrt(3.0)
        assert series["rho.H2"][0] == pytest.approx(expected, rel=1e-12)

    def test_run_series_finite_and_shaped(self, grid64_wide):
        cfg = SolverConfig(gamma=2.0, dt=1e-3, t_end=0.02)
        rec = run(to_effective(make_preset("gaussian-bump", grid64_wide)), cfg, state_stride=5)
        series = sobolev_diagnostics(rec, 2.0)
        n = len(rec.states)
        for key, vals in series.items():
            assert len(vals) == n
            assert np.all(np.isfinite(vals)), key
