"""Energy and entropy functionals of the flow, and the inequality audits built on them.

Covers the potential energy density and its two-sided equivalence with powers
of the density deviation, the kinetic/potential/gradient energy balance, the
effective-velocity energy, the dissipation identity linking the two velocity
fields, the convexity inequalities controlling second derivatives of the
density square root, weighted velocity norms and their growth in the
integrability exponent, the domain splitting at four times the far-field
density, the space-time velocity functional and its self-improvement bound,
the logarithmic control of the velocity maximum, and spectral Sobolev
diagnostics of stored trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audits import AuditReport, bound_report, identity_report
from .calibration import DRIFT_FACTOR, CONSTANTS
from .fields import (
    FieldError,
    PositivityError,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    hessian,
    integral,
    jacobian,
    laplacian,
    log_field,
    lp_norm,
    power_field,
    sobolev_norm,
    sqrt_field,
    sup_norm,
    vector_sobolev_norm,
)
from .solver import FlowState, from_effective, to_effective

__all__ = [
    "EnergyBreakdown",
    "potential_energy_density",
    "equivalence_constants",
    "pi_equivalence_audit",
    "energy",
    "dissipation_rate",
    "v_energy",
    "v_energy_dissipations",
    "bd_identity_audit",
    "jungel_terms",
    "jungel_audit",
    "weighted_velocity_norm",
    "gamma_q_admissible",
    "RegionSplit",
    "region_split",
    "psi",
    "reverse_holder_audit",
    "log_law_constant",
    "log_law_audit",
    "sobolev_diagnostics",
    "HOLDER_EXPONENT",
    "LOG_FLOOR",
]

HOLDER_EXPONENT = 5.0 / 3.0
LOG_FLOOR = math.exp(HOLDER_EXPONENT**2)  # e^(25/9), additive floor of V_T


def _as_primitive(s: FlowState) -> FlowState:
    return s if s.formulation == "primitive" else from_effective(s)


def _as_effective(s: FlowState) -> FlowState:
    return s if s.formulation == "effective" else to_effective(s)


# ----------------------------------------------------------------------
# potential energy density and its equivalence constants


def potential_energy_density(rho: ScalarField, rho_bar: float, gamma: float) -> ScalarField:
    """Convex relative entropy of the density against the far-field value.

    gamma > 1: rho^g/g - rho_bar^g/g - rho_bar^(g-1) (rho - rho_bar);
    gamma = 1: rho log(rho/rho_bar) + rho_bar - rho.  Nonnegative, zero only
    at rho = rho_bar; tiny negative round-off near the minimum is clipped.
    """
    if rho_bar <= 0:
        raise FieldError("far-field density must be positive")
    r = rho.values
    if gamma == 1.0:
        if np.min(r) <= 0:
            raise PositivityError("logarithmic potential needs strictly positive density")
        pi = r * np.log(r / rho_bar) + rho_bar - r
    else:
        if np.min(r) < 0:
            raise FieldError("density must be nonnegative")
        g = float(gamma)
        pi = r**g / g - rho_bar**g / g - rho_bar ** (g - 1.0) * (r - rho_bar)
    return ScalarField(rho.grid, np.maximum(pi, 0.0))


def equivalence_constants(gamma: float) -> tuple[float, float]:
    """Explicit two-sided constants on the high-density region rho >= 4 rho_bar."""
    if gamma <= 1.0:
        raise FieldError("explicit high-density constants need gamma > 1")
    c1 = 1.0 / gamma - 0.25 ** (gamma - 1.0)
    c2 = (1.0 / gamma) * (4.0 / 3.0) ** gamma
    return c1, c2


def _low_branch_span(gamma: float, rho_bar: float, samples: int = 20001) -> tuple[float, float]:
    """Range of pi / (rho - rho_bar)^2 over [0, 4 rho_bar], by dense sampling."""
    r = np.linspace(0.0, 4.0 * rho_bar, samples)
    g = float(gamma)
    pi = r**g / g - rho_bar**g / g - rho_bar ** (g - 1.0) * (r - rho_bar)
    dev2 = (r - rho_bar) ** 2
    keep = dev2 > (1e-4 * rho_bar) ** 2
    ratio = pi[keep] / dev2[keep]
    return float(np.min(ratio)), float(np.max(ratio))


def pi_equivalence_audit(rho: ScalarField, rho_bar: float, gamma: float):
    """Pointwise equivalence of the potential energy density, one report per
    density range.

    High branch {rho >= 4 rho_bar}: exact explicit constants, tolerance 1e-12.
    Low branch [0, 4 rho_bar]: the field's ratios must fall inside the densely
    sampled range of the same quotient, whose positivity is the calibrated fact.
    """
    if gamma <= 1.0:
        raise FieldError("equivalence audit needs gamma > 1")
    pi = potential_energy_density(rho, rho_bar, gamma).values
    r = rho.values
    dev = r - rho_bar
    cite_high = "high-density equivalence with explicit constants"
    cite_low = "bounded-density equivalence via extreme values"

    c1, c2 = equivalence_constants(gamma)
    high = r >= 4.0 * rho_bar
    if np.any(high):
        powg = np.abs(dev[high]) ** gamma
        worst_high = max(
            float(np.max(c1 * powg / pi[high])), float(np.max(pi[high] / (c2 * powg)))
        )
        high_rep = bound_report("pi.high.two_sided", worst_high, 1.0, 1e-12, cite_high)
    else:
        high_rep = bound_report("pi.high.two_sided", 0.0, 1.0, 1e-12, cite_high)

    lo_min, lo_max = _low_branch_span(gamma, rho_bar)
    # pad for the attainment error of extremes sampled on a finite rho-grid
    pad = 1e-6
    lo_min, lo_max = lo_min * (1.0 - pad), lo_max * (1.0 + pad)
    low = (r <= 4.0 * rho_bar) & (np.abs(dev) > 1e-4 * rho_bar)
    if np.any(low) and lo_min > 0.0:
        ratio = pi[low] / dev[low] ** 2
        worst = max(float(np.max(ratio)) / lo_max, lo_min / float(np.min(ratio)))
        low_rep = bound_report("pi.low.two_sided", worst, 1.0, 1e-9, cite_low)
    else:
        low_rep = bound_report("pi.low.two_sided", 0.0 if lo_min > 0 else math.inf, 1.0, 1e-9, cite_low)
    return [high_rep, low_rep]


# ----------------------------------------------------------------------
# energy balances


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    potential: float
    fisher: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential + self.fisher


def energy(s: FlowState, gamma: float) -> EnergyBreakdown:
    """Kinetic + pressure-potential + density-gradient energy of a state."""
    s = _as_primitive(s)
    rho = s.rho
    kinetic = 0.5 * float(np.sum(rho.values * np.sum(s.vel.components**2, axis=0)) * rho.grid.cell_volume)
    pi = potential_energy_density(rho, rho.grid.far_field_density, gamma)
    factor = 1.0 if gamma == 1.0 else gamma / (gamma - 1.0)
    potential = factor * integral(pi)
    grad_sqrt = gradient(sqrt_field(rho))
    fisher = 2.0 * float(np.sum(grad_sqrt.components**2) * rho.grid.cell_volume)
    return EnergyBreakdown(kinetic, potential, fisher)


def dissipation_rate(s: FlowState) -> float:
    """2 * integral of rho |D(u)|^2, the decay rate of the total energy."""
    s = _as_primitive(s)
    jac = jacobian(s.vel)
    d = 0.5 * (jac + np.swapaxes(jac, 0, 1))
    dens = np.sum(d**2, axis=(0, 1)) * s.rho.values
    return 2.0 * float(np.sum(dens) * s.grid.cell_volume)


def v_energy(s: FlowState) -> float:
    """integral of rho |v|^2 in effective form."""
    s = _as_effective(s)
    return float(np.sum(s.rho.values * np.sum(s.vel.components**2, axis=0)) * s.grid.cell_volume)


def v_energy_dissipations(s: FlowState, gamma: float) -> tuple[float, float]:
    """The two dissipation integrands paired with the v-energy:
    |grad rho^(gamma/2)|^2 and rho |grad v|^2."""
    s = _as_effective(s)
    gp = gradient(power_field(s.rho, gamma / 2.0))
    a = float(np.sum(gp.components**2) * s.grid.cell_volume)
    jv = jacobian(s.vel)
    b = float(np.sum(s.rho.values * np.sum(jv**2, axis=(0, 1))) * s.grid.cell_volume)
    return a, b


def _bd_terms(s: FlowState) -> tuple[float, float, float, float]:
    prim = _as_primitive(s)
    rho, u = prim.rho, prim.vel
    grid = prim.grid
    cell = grid.cell_volume

    eff = _as_effective(prim)
    jv = jacobian(eff.vel)
    lhs = float(np.sum(rho.values * np.sum(jv**2, axis=(0, 1))) * cell)

    ju = jacobian(u)
    term_u = float(np.sum(rho.values * np.sum(ju**2, axis=(0, 1))) * cell)
    hess_log = hessian(log_field(rho))
    term_hess = float(np.sum(rho.values * np.sum(hess_log**2, axis=(0, 1))) * cell)

    # 4 d/dt of the gradient-of-sqrt energy, with the time derivative expressed
    # through the mass equation: 4 * integral of div(rho u) * lap(sqrt rho)/sqrt rho
    m = VectorField(grid, rho.values * u.components)
    div_m = divergence(m)
    srho = sqrt_field(rho)
    lap_s = laplacian(srho)
    term_dt = 4.0 * float(np.sum(div_m.values * lap_s.values / srho.values) * cell)
    return lhs, term_u, term_hess, term_dt


def bd_identity_audit(trajectory, tolerance: float = 1e-8) -> AuditReport:
    """Pointwise-in-time identity: rho|grad v|^2 integrates to the rho|grad u|^2
    and rho|hess log rho|^2 pieces plus the exact rate of the gradient energy."""
    states = trajectory.states
    if not states:
        raise FieldError("trajectory holds no states")
    worst = (0.0, 0.0, 0.0)  # (relative residual, lhs, rhs)
    for s in states:
        lhs, a, b, c = _bd_terms(s)
        rhs = a + b + c
        scale = max(abs(lhs), abs(a), abs(b), abs(c), 1e-300)
        rel = abs(lhs - rhs) / scale
        if rel >= worst[0]:
            worst = (rel, lhs, rhs)
    return identity_report(
        "bd.identity",
        worst[1],
        worst[2],
        tolerance,
        "effective-velocity dissipation identity",
        floor=1e-12,
    )


# ----------------------------------------------------------------------
# convexity control of second derivatives of sqrt(rho)


def jungel_terms(rho: ScalarField) -> tuple[float, float, float]:
    """D = int rho |hess log rho|^2, A = int |hess sqrt rho|^2, B' = int |grad rho^(1/4)|^4."""
    cell = rho.grid.cell_volume
    hess_log = hessian(log_field(rho))
    d_val = float(np.sum(rho.values * np.sum(hess_log**2, axis=(0, 1))) * cell)
    hess_sqrt = hessian(sqrt_field(rho))
    a_val = float(np.sum(hess_sqrt**2) * cell)
    gq = gradient(power_field(rho, 0.25))
    b_val = float(np.sum(np.sum(gq.components**2, axis=0) ** 2) * cell)
    return d_val, a_val, b_val


def jungel_audit(rho: ScalarField, slack: float = 1e-10):
    """D >= A/7 and D >= B'/8; asserted in 3d, reported without assertion in 2d."""
    d_val, a_val, b_val = jungel_terms(rho)
    cite = "convexity bounds on second derivatives of the density square root"
    if rho.grid.dim == 3:
        scale = max(d_val, 1.0)
        r1 = bound_report("jungel.hessian_sqrt", a_val / 7.0, d_val + slack * scale, 0.0, cite)
        r2 = bound_report("jungel.quartic_gradient", b_val / 8.0, d_val + slack * scale, 0.0, cite)
        return [r1, r2]
    r1 = bound_report("jungel.hessian_sqrt.measured", a_val / 7.0, math.inf, 0.0, cite + " (2d: measured only)")
    r2 = bound_report("jungel.quartic_gradient.measured", b_val / 8.0, math.inf, 0.0, cite + " (2d: measured only)")
    return [r1, r2]


# ----------------------------------------------------------------------
# weighted velocity norms, admissible exponents, domain splitting


def weighted_velocity_norm(s: FlowState, p: float) -> float:
    """(integral of rho |v|^(p+2))^(1/(p+2)) in effective form."""
    if p < 0:
        raise FieldError("exponent offset p must be >= 0")
    s = _as_effective(s)
    mag = s.vel.magnitude()
    q = p + 2.0
    return float((np.sum(s.rho.values * mag**q) * s.grid.cell_volume) ** (1.0 / q))


def gamma_q_admissible(gamma: float, step: float = 1e-3):
    """Smallest admissible integrability exponent q on a candidate grid.

    For gamma in (2, 8/3) scan q in (1, 2) against gamma <= (2q+6)/(q+2);
    for gamma in (1, 2] scan q in [2, 4) against gamma <= (q+6)/(q+2);
    outside (1, 8/3) there is none.
    """
    if not 1.0 < gamma < 8.0 / 3.0:
        return None
    if gamma > 2.0:
        candidates = np.arange(1.0 + step, 2.0, step)
        bound = (2.0 * candidates + 6.0) / (candidates + 2.0)
    else:
        candidates = np.arange(2.0, 4.0, step)
        bound = (candidates + 6.0) / (candidates + 2.0)
    ok = bound >= gamma - 1e-12
    if not np.any(ok):
        return None
    return float(candidates[np.argmax(ok)])


@dataclass(frozen=True)
class RegionSplit:
    measure_low: float
    measure_high: float
    pi_low: float
    pi_high: float
    mass_low: float
    mass_high: float
    chebyshev: AuditReport


def region_split(s: FlowState, gamma: float) -> RegionSplit:
    """Split at rho = 4 rho_bar: cell-counted measures, partial integrals, and the
    measure bound for the high region implied by the potential energy."""
    if gamma <= 1.0:
        raise FieldError("region split audit needs gamma > 1")
    grid = s.grid
    rho_bar = grid.far_field_density
    r = s.rho.values
    pi = potential_energy_density(s.rho, rho_bar, gamma).values
    cell = grid.cell_volume
    high = r > 4.0 * rho_bar
    low = ~high
    measure_high = float(np.count_nonzero(high) * cell)
    measure_low = float(np.count_nonzero(low) * cell)
    pi_low = float(np.sum(pi[low]) * cell)
    pi_high = float(np.sum(pi[high]) * cell)
    mass_low = float(np.sum(r[low]) * cell)
    mass_high = float(np.sum(r[high]) * cell)
    floor = rho_bar**gamma * ((4.0**gamma - 1.0) / gamma - 3.0)
    cheb = bound_report(
        "region.chebyshev",
        measure_high,
        (pi_low + pi_high) / floor,
        1e-9,
        "high-density measure bound from the potential energy",
    )
    return RegionSplit(measure_low, measure_high, pi_low, pi_high, mass_low, mass_high, cheb)


# ----------------------------------------------------------------------
# space-time functionals of trajectories


def _states_and_times(trajectory):
    states = trajectory.states
    if not states:
        raise FieldError("trajectory holds no states")
    return states, np.array([s.t for s in states])


def psi(trajectory, p: float) -> float:
    """Time-trapezoid of the spatial integral of rho |v|^p over stored states."""
    states, times = _states_and_times(trajectory)
    vals = []
    for s in states:
        e = _as_effective(s)
        vals.append(float(np.sum(e.rho.values * e.vel.magnitude() ** p) * e.grid.cell_volume))
    if len(vals) == 1:
        return 0.0
    return float(np.trapezoid(np.array(vals), times))


def _v_sup_series(trajectory) -> np.ndarray:
    if "veff.max" in trajectory.scalars:
        return trajectory.scalars["veff.max"]
    states, _ = _states_and_times(trajectory)
    return np.array([float(np.max(_as_effective(s).vel.magnitude())) for s in states])


def _vt_value(trajectory) -> float:
    if "density.min" in trajectory.scalars:
        min_rho = float(np.min(trajectory.scalars["density.min"]))
    else:
        states, _ = _states_and_times(trajectory)
        min_rho = min(float(np.min(s.rho.values)) for s in states)
    if min_rho <= 0:
        raise PositivityError("trajectory loses density positivity")
    return 1.0 / min_rho + LOG_FLOOR


def reverse_holder_audit(trajectory, p: float, preset: str | None = None) -> AuditReport:
    """Self-improvement of the space-time velocity functional from exponent
    p+2 to (5/3)(p+2), with the calibrated constant as the alarm."""
    states, _ = _states_and_times(trajectory)
    r = HOLDER_EXPONENT
    q = p + 2.0
    lhs = psi(trajectory, r * q)
    vt = _vt_value(trajectory)
    first = _as_effective(states[0])
    c4 = (
        float(np.sqrt(np.sum(first.rho.values * np.sum(first.vel.components**2, axis=0)) * first.grid.cell_volume))
        + float(np.max(first.vel.magnitude()))
        + 1.0
    )
    body = q ** (2.0 * r) * psi(trajectory, q) ** r + q ** (2.0 * r) + c4 ** (r * q)
    key = f"psi.C3.{preset}" if preset else None
    c3 = CONSTANTS.get(key, 1.0) if key else 1.0
    return bound_report(
        "psi.reverse_holder",
        lhs,
        DRIFT_FACTOR * c3 * vt * body,
        0.0,
        "space-time velocity functional self-improvement",
    )


def log_law_constant(trajectory) -> float:
    """Empirical ratio sup_t |v|_inf / sqrt(log V_T)."""
    v_sup = float(np.max(_v_sup_series(trajectory)))
    return v_sup / math.sqrt(math.log(_vt_value(trajectory)))


def log_law_audit(trajectory, preset: str | None = None) -> AuditReport:
    """Velocity maximum against the square root of the logarithm of V_T."""
    v_sup = float(np.max(_v_sup_series(trajectory)))
    vt = _vt_value(trajectory)
    key = f"loglaw.cv.{preset}" if preset else None
    cv = CONSTANTS.get(key, math.inf) if key else math.inf
    rhs = DRIFT_FACTOR * cv * math.sqrt(math.log(vt)) if math.isfinite(cv) else math.inf
    return bound_report(
        "loglaw.v_sup",
        v_sup,
        rhs,
        0.0,
        "logarithmic control of the velocity maximum",
    )


# ----------------------------------------------------------------------
# spectral Sobolev diagnostics


def sobolev_diagnostics(trajectory, gamma: float, rho_orders=(1, 2, 3), v_orders=(1, 2)) -> dict:
    """Time series of H^k norms of the density deviation and the effective
    velocity, plus exact time-derivative norms read off the dynamics."""
    states, times = _states_and_times(trajectory)
    out: dict[str, np.ndarray] = {"t": times}
    rho_series: dict[int, list] = {k: [] for k in rho_orders}
    v_series: dict[int, list] = {k: [] for k in v_orders}
    dt_rho, dt_v = [], []
    for s in states:
        e = _as_effective(s)
        grid = e.grid
        dev = ScalarField(grid, e.rho.values - grid.far_field_density)
        for k in rho_orders:
            rho_series[k].append(sobolev_norm(dev, k))
        for k in v_orders:
            v_series[k].append(vector_sobolev_norm(e.vel, k))

        # time derivatives from the dynamics, not finite differences
        m = VectorField(grid, e.rho.values * e.vel.components)
        rho_t = laplacian(e.rho).values - divergence(m).values
        dt_rho.append(float(np.sqrt(np.sum(rho_t**2) * grid.cell_volume)))

        dlog = gradient(log_field(e.rho))
        jv = jacobian(e.vel)
        if gamma == 1.0:
            pg = dlog.components
        else:
            pg = (gamma / (gamma - 1.0)) * gradient(power_field(e.rho, gamma - 1.0)).components
        w = e.vel.components - 2.0 * dlog.components
        v_t = np.empty_like(e.vel.components)
        for i in range(grid.dim):
            conv = sum(w[j] * jv[i, j] for j in range(grid.dim))
            v_t[i] = -conv + laplacian(e.vel.component(i)).values - pg[i]
        dt_v.append(float(np.sqrt(np.sum(v_t**2) * grid.cell_volume)))

    for k in rho_orders:
        out[f"rho.H{k}"] = np.array(rho_series[k])
    for k in v_orders:
        out[f"v.H{k}"] = np.array(v_series[k])
    out["dt_rho.L2"] = np.array(dt_rho)
    out["dt_v.L2"] = np.array(dt_v)
    return out
