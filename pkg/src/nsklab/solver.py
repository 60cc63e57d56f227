"""Time integration of the capillary compressible system.

Two equivalent formulations are integrated side by side:

* primitive (density rho, velocity u): continuity plus momentum with the
  density-weighted viscous stress and the capillary stress written as the
  divergence of rho times the Hessian of log rho;
* effective (rho, v = u + grad log rho): the same dynamics rearranged into a
  coupled parabolic system where the mass equation gains unit diffusion and
  the velocity equation a plain Laplacian.

Both steppers are first-order IMEX: constant-coefficient diffusion is
implicit per Fourier mode, transport and pressure are explicit and dealiased
by the 2/3 rule.  Divergence-form right-hand sides keep the mean modes
exactly fixed, so mass (and momentum, in primitive form) are conserved to
round-off per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .fields import (
    FieldError,
    Grid,
    PositivityError,
    ScalarField,
    VectorField,
    gradient,
    hessian,
    log_field,
    power_field,
    random_band_limited,
)

__all__ = [
    "SolverError",
    "CflError",
    "FlowState",
    "SolverConfig",
    "TrajectoryRecord",
    "to_effective",
    "from_effective",
    "pressure_gradient",
    "step_effective",
    "step_primitive",
    "step",
    "run",
    "make_preset",
    "PRESET_NAMES",
    "far_field_defect",
    "theorem_range_warnings",
]

FAR_FIELD_TOL = 1e-8
_RIM_CELLS = 2


class SolverError(RuntimeError):
    pass


class CflError(SolverError):
    pass


@dataclass(frozen=True, eq=False)
class FlowState:
    """A (rho, velocity) snapshot; vel is u in primitive form, v in effective form."""

    t: float
    rho: ScalarField
    vel: VectorField
    formulation: str = "primitive"

    def __post_init__(self):
        if self.formulation not in ("primitive", "effective"):
            raise FieldError(f"unknown formulation {self.formulation!r}")
        if self.rho.grid != self.vel.grid:
            raise FieldError("density and velocity live on different grids")
        m = float(np.min(self.rho.values))
        if m <= 0.0:
            raise PositivityError(f"density not strictly positive (min {m:.6e})")

    @property
    def grid(self) -> Grid:
        return self.rho.grid


@dataclass(frozen=True)
class SolverConfig:
    gamma: float
    dt: float
    t_end: float
    scheme: str = "semi-implicit-spectral"
    dealias: bool = True
    cfl_safety: float = 0.5

    def __post_init__(self):
        if self.gamma < 1.0:
            raise FieldError(f"adiabatic exponent must be >= 1, got {self.gamma}")
        if self.dt <= 0.0:
            raise FieldError("time step must be positive")
        if self.t_end < 0.0:
            raise FieldError("horizon must be >= 0")
        if self.scheme != "semi-implicit-spectral":
            raise FieldError(f"unknown scheme {self.scheme!r}")


def theorem_range_warnings(gamma: float, dim: int) -> list[str]:
    """Pressure exponents outside the strict global-existence range."""
    if dim == 3:
        if gamma >= 8.0 / 3.0:
            return [f"gamma={gamma:g} outside the supported range [1, 8/3) in 3d"]
        if gamma == 1.0:
            return ["gamma=1 sits on the boundary of the strict 3d range (1, 8/3)"]
    return []


# ----------------------------------------------------------------------
# formulation changes


def to_effective(s: FlowState) -> FlowState:
    if s.formulation != "primitive":
        raise FieldError("state is already in effective form")
    shift = gradient(log_field(s.rho))
    return FlowState(s.t, s.rho, VectorField(s.grid, s.vel.components + shift.components), "effective")


def from_effective(s: FlowState) -> FlowState:
    if s.formulation != "effective":
        raise FieldError("state is not in effective form")
    shift = gradient(log_field(s.rho))
    return FlowState(s.t, s.rho, VectorField(s.grid, s.vel.components - shift.components), "primitive")


def pressure_gradient(rho: ScalarField, gamma: float) -> VectorField:
    """Specific pressure force grad(P)/rho for the power pressure law.

    For gamma > 1 this is gamma/(gamma-1) * grad(rho^(gamma-1)); the
    gamma = 1 limit is grad(log rho).
    """
    if gamma == 1.0:
        return gradient(log_field(rho))
    g = float(gamma)
    pg = gradient(power_field(rho, g - 1.0))
    return VectorField(rho.grid, (g / (g - 1.0)) * pg.components)


# ----------------------------------------------------------------------
# stepping


def _masked_fft(values: np.ndarray, mask) -> np.ndarray:
    hat = np.fft.fftn(values)
    return hat * mask if mask is not None else hat


def _grad_real(grid: Grid, hat: np.ndarray) -> list[np.ndarray]:
    return [np.fft.ifftn(1j * k * hat).real for k in grid.wavevectors]


def _check_cfl(state: FlowState, cfg: SolverConfig, transport_speed: float) -> None:
    grid = state.grid
    rmax = float(np.max(state.rho.values))
    stiffness = max(1.0, cfg.gamma * rmax ** (cfg.gamma - 1.0))
    limit = cfg.cfl_safety * grid.dx**2 / stiffness
    if transport_speed > 0.0:
        limit = min(limit, cfg.cfl_safety * grid.dx / transport_speed)
    if cfg.dt > limit:
        raise CflError(
            f"dt={cfg.dt:g} exceeds the stability guard {limit:g} "
            f"(dx={grid.dx:g}, speed={transport_speed:g}, stiffness={stiffness:g})"
        )


def _require_new_density_positive(values: np.ndarray, t_new: float) -> None:
    m = float(np.min(values))
    if m <= 0.0:
        raise PositivityError(
            f"density lost positivity at t={t_new:.6g} (min {m:.6e}); "
            "try halving the time step"
        )


def step_effective(s: FlowState, cfg: SolverConfig) -> FlowState:
    if s.formulation != "effective":
        raise FieldError("step_effective needs an effective-form state")
    grid = s.grid
    mask = grid.dealias_mask if cfg.dealias else None
    r = s.rho.values
    v = s.vel.components
    dt = cfg.dt

    log_r_hat = np.fft.fftn(np.log(r))
    dlog = _grad_real(grid, log_r_hat)
    speed = float(np.max(np.sqrt(sum(c * c for c in v)))) + 2.0 * float(
        np.max(np.sqrt(sum(c * c for c in dlog)))
    )
    _check_cfl(s, cfg, speed)

    # mass: implicit diffusion, explicit divergence-form transport
    nr_hat = np.zeros(grid.shape, dtype=complex)
    for i, k in enumerate(grid.wavevectors):
        nr_hat -= 1j * k * _masked_fft(r * v[i], mask)
    denom = 1.0 + dt * grid.k2
    new_r_hat = (np.fft.fftn(r) + dt * nr_hat) / denom
    new_r = np.fft.ifftn(new_r_hat).real
    _require_new_density_positive(new_r, s.t + dt)

    # velocity: implicit Laplacian, explicit transport + pressure
    if cfg.gamma == 1.0:
        pg = _grad_real(grid, log_r_hat)
    else:
        g = cfg.gamma
        pg_hat = _masked_fft(r ** (g - 1.0), mask)
        pg = [(g / (g - 1.0)) * c for c in _grad_real(grid, pg_hat)]
    w = [v[j] - 2.0 * dlog[j] for j in range(grid.dim)]
    new_v = np.empty_like(v)
    for i in range(grid.dim):
        dvi = _grad_real(grid, np.fft.fftn(v[i]))
        conv = sum(w[j] * dvi[j] for j in range(grid.dim))
        nv_hat = -_masked_fft(conv, mask) - np.fft.fftn(pg[i])
        new_v[i] = np.fft.ifftn((np.fft.fftn(v[i]) + dt * nv_hat) / denom).real

    return FlowState(
        s.t + dt, ScalarField(grid, new_r), VectorField(grid, new_v), "effective"
    )


def step_primitive(s: FlowState, cfg: SolverConfig) -> FlowState:
    if s.formulation != "primitive":
        raise FieldError("step_primitive needs a primitive-form state")
    grid = s.grid
    mask = grid.dealias_mask if cfg.dealias else None
    d = grid.dim
    r = s.rho.values
    u = s.vel.components
    dt = cfg.dt

    speed = float(np.max(np.sqrt(sum(c * c for c in u))))
    _check_cfl(s, cfg, speed)

    ks = grid.wavevectors
    m_hat = np.stack([_masked_fft(r * u[i], mask) for i in range(d)])
    m_real = np.stack([np.fft.ifftn(h).real for h in m_hat])

    # explicit momentum right-hand side, every term in divergence form
    rhs_hat = np.zeros((d,) + grid.shape, dtype=complex)

    p_hat = _masked_fft(r**cfg.gamma, mask)
    for i in range(d):
        rhs_hat[i] -= 1j * ks[i] * p_hat

    du = [_grad_real(grid, np.fft.fftn(u[i])) for i in range(d)]
    log_hess = hessian(log_field(s.rho))
    for i in range(d):
        for j in range(d):
            flux = _masked_fft(m_real[i] * u[j], mask)  # rho u_i u_j
            visc = _masked_fft(r * (du[i][j] + du[j][i]), mask)  # 2 rho D(u)_ij
            capil = _masked_fft(r * log_hess[i, j], mask)
            rhs_hat[i] += 1j * ks[j] * (-flux + visc + capil)

    # subtract the linearized stress that the implicit solve adds back
    k_dot_m = sum(ks[j] * m_hat[j] for j in range(d))
    for i in range(d):
        rhs_hat[i] += grid.k2 * m_hat[i] + ks[i] * k_dot_m

    a = 1.0 + dt * grid.k2
    a_full = a + dt * grid.k2
    y = m_hat + dt * rhs_hat
    k_dot_y = sum(ks[j] * y[j] for j in range(d))
    new_m = np.empty_like(m_real)
    for i in range(d):
        new_m[i] = np.fft.ifftn((y[i] - dt * ks[i] * k_dot_y / a_full) / a).real

    div_m = sum(1j * ks[j] * m_hat[j] for j in range(d))
    new_r = np.fft.ifftn(np.fft.fftn(r) - dt * div_m).real
    _require_new_density_positive(new_r, s.t + dt)

    new_u = new_m / new_r
    return FlowState(
        s.t + dt, ScalarField(grid, new_r), VectorField(grid, new_u), "primitive"
    )


def step(s: FlowState, cfg: SolverConfig) -> FlowState:
    return step_effective(s, cfg) if s.formulation == "effective" else step_primitive(s, cfg)


# ----------------------------------------------------------------------
# trajectories


@dataclass
class TrajectoryRecord:
    """Sampled states plus per-step scalar diagnostics of one run."""

    grid: Grid
    formulation: str
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    scalars: dict = field(default_factory=dict)
    states: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""
    abort_time: float | None = None

    @property
    def state_times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def scalar(self, name: str) -> np.ndarray:
        return self.scalars[name]


def _veff_max(state: FlowState) -> float:
    if state.formulation == "effective":
        return float(np.max(state.vel.magnitude()))
    shift = gradient(log_field(state.rho))
    return float(np.max(np.sqrt(np.sum((state.vel.components + shift.components) ** 2, axis=0))))


def far_field_defect(state: FlowState) -> float:
    """Largest deviation of (rho, u) from (rho_bar, 0) in the boundary rim.

    Formulation-independent: effective states are converted back to the
    primitive velocity first, since the far-field condition constrains
    (rho, u) and the shift grad(log rho) is derived from rho.
    """
    if state.formulation == "effective":
        state = from_effective(state)
    grid = state.grid
    n = grid.n
    rim = np.zeros(grid.shape, dtype=bool)
    for axis in range(grid.dim):
        sl_lo = [slice(None)] * grid.dim
        sl_hi = [slice(None)] * grid.dim
        sl_lo[axis] = slice(0, _RIM_CELLS)
        sl_hi[axis] = slice(n - _RIM_CELLS, n)
        rim[tuple(sl_lo)] = True
        rim[tuple(sl_hi)] = True
    dev_rho = float(np.max(np.abs(state.rho.values[rim] - grid.far_field_density)))
    dev_vel = float(np.max(state.vel.magnitude()[rim]))
    return max(dev_rho, dev_vel)


def run(
    initial: FlowState,
    cfg: SolverConfig,
    probes: dict | None = None,
    state_stride: int = 1,
    check_far_field: bool = True,
) -> TrajectoryRecord:
    """Integrate to the horizon, sampling probes every step and states at a stride.

    Positivity loss aborts cleanly and is recorded on the trajectory; other
    stepper failures propagate.  The minimum density is always monitored.
    """
    if state_stride < 1:
        raise FieldError("state stride must be >= 1")
    if check_far_field and initial.t == 0.0:
        defect = far_field_defect(initial)
        if defect > FAR_FIELD_TOL:
            raise SolverError(
                f"initial state violates the far-field proxy: boundary deviation "
                f"{defect:.3e} > {FAR_FIELD_TOL:g}"
            )
    probes = dict(probes or {})
    record = TrajectoryRecord(initial.grid, initial.formulation)
    names = ["density.min", "density.max", "veff.max", *probes.keys()]
    series: dict[str, list] = {name: [] for name in names}
    times: list[float] = []

    def sample(state: FlowState) -> None:
        times.append(state.t)
        series["density.min"].append(float(np.min(state.rho.values)))
        series["density.max"].append(float(np.max(state.rho.values)))
        series["veff.max"].append(_veff_max(state))
        for name, fn in probes.items():
            series[name].append(float(fn(state)))

    n_steps = int(round(cfg.t_end / cfg.dt)) if cfg.t_end > 0 else 0
    state = initial
    sample(state)
    record.states.append(state)
    for k in range(n_steps):
        try:
            state = step(state, cfg)
        except PositivityError as err:
            record.aborted = True
            record.abort_reason = str(err)
            record.abort_time = (k + 1) * cfg.dt
            break
        state = replace(state, t=(k + 1) * cfg.dt)
        sample(state)
        if (k + 1) % state_stride == 0 or k + 1 == n_steps:
            record.states.append(state)
    record.times = np.array(times)
    record.scalars = {name: np.array(vals) for name, vals in series.items()}
    return record


# ----------------------------------------------------------------------
# presets

PRESET_NAMES = ("constant", "gaussian-bump", "random-large")


def _bump(grid: Grid, amplitude: float, width: float) -> np.ndarray:
    coords = grid.meshgrid()
    c = 0.5 * grid.box_length
    r2 = sum((x - c) ** 2 for x in coords)
    return amplitude * np.exp(-r2 / width**2)


def make_preset(name: str, grid: Grid, params: dict | None = None, seed: int = 0) -> FlowState:
    """Named initial states, all primitive, all satisfying the far-field proxy."""
    params = dict(params or {})
    rho_bar = grid.far_field_density
    zero_vel = np.zeros((grid.dim,) + grid.shape)

    def take(key, default):
        return float(params.pop(key, default))

    if name == "constant":
        state = FlowState(
            0.0,
            ScalarField(grid, np.full(grid.shape, rho_bar)),
            VectorField(grid, zero_vel),
        )
    elif name == "gaussian-bump":
        amplitude = take("amplitude", 0.5)
        width = take("width", 0.1 * grid.box_length)
        if amplitude <= -rho_bar:
            raise FieldError("bump amplitude would destroy density positivity")
        rho = rho_bar + _bump(grid, amplitude, width)
        state = FlowState(0.0, ScalarField(grid, rho), VectorField(grid, zero_vel))
    elif name == "random-large":
        amplitude = take("amplitude", 0.4 * rho_bar)
        vel_amplitude = take("velocity_amplitude", 0.3)
        max_mode = int(take("max_mode", 4))
        if not amplitude < rho_bar:
            raise FieldError("perturbation amplitude must stay below the far-field density")
        rng = np.random.default_rng(seed)
        envelope = _bump(grid, 1.0, 0.1 * grid.box_length)

        def enveloped(target):
            raw = envelope * random_band_limited(grid, rng, max_mode=max_mode).values
            peak = np.max(np.abs(raw))
            return raw * (target / peak) if peak > 0 else raw

        rho = rho_bar + enveloped(amplitude)
        comps = np.empty((grid.dim,) + grid.shape)
        for i in range(grid.dim):
            comps[i] = enveloped(vel_amplitude)
        state = FlowState(0.0, ScalarField(grid, rho), VectorField(grid, comps))
    else:
        raise FieldError(f"unknown preset {name!r}; choose one of {', '.join(PRESET_NAMES)}")
    if params:
        raise FieldError(f"unknown preset parameter(s) for {name!r}: {', '.join(sorted(params))}")
    return state
