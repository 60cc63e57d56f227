"""Recompute the frozen calibration constants on fixed seeded corpora.

Run as ``python -m nsklab.calibrate``; paste the printed table into
``nsklab.calibration.CONSTANTS`` when cutting a release.  Every corpus is
seeded, so the table is reproducible.
"""

from __future__ import annotations

import math

import numpy as np

from .degiorgi import truncate
from .dyadic import (
    BesovIndex,
    TimeSeriesField,
    besov_norm,
    build_dyadic_family,
    dyadic_block,
    select_frequency_cut,
)
from .estimates import (
    HOLDER_EXPONENT,
    LOG_FLOOR,
    energy,
    log_law_constant,
    psi,
    v_energy,
)
from .fields import (
    ScalarField,
    hs_norm,
    lp_norm,
    make_grid,
    random_band_limited,
    sup_norm,
)
from .solver import SolverConfig, make_preset, run, to_effective


def _field_corpus(grid, count, seed):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        max_mode = int(rng.integers(2, grid.n // 3))
        out.append(random_band_limited(grid, rng, max_mode=max_mode))
    return out


def calibrate_hs_equivalence(out):
    grid = make_grid(2, 64, 2 * np.pi, 1.0)
    fam = build_dyadic_family(grid)
    corpus = _field_corpus(grid, 100, seed=101)
    for s in (-1, 0, 1, 2):
        worst = 1.0
        for f in corpus:
            b = besov_norm(fam, f, BesovIndex(s, 2, 2))
            h = hs_norm(f, s)
            ratio = b / h
            worst = max(worst, ratio, 1.0 / ratio)
        out[f"besov.hs_equiv.s{s}"] = worst


def _block_corpus(fam, count, seed):
    grid = fam.grid
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        j = int(rng.integers(1, fam.j_max + 1))
        f = random_band_limited(grid, rng, max_mode=grid.n // 2 - 1)
        w = dyadic_block(fam, f, j)
        mask = fam.multiplier(j) > 0
        hat = w.spectrum()
        hat[~mask] = 0.0
        out.append((j, ScalarField(grid, np.fft.ifftn(hat).real)))
    return out


def calibrate_bernstein(out):
    from .dyadic import _derivative_lp, _multi_indices

    grid = make_grid(2, 64, 2 * np.pi, 1.0)
    fam = build_dyadic_family(grid)
    corpus = _block_corpus(fam, 40, seed=202)
    combos = ((2.0, 2.0), (2.0, math.inf), (1.0, 2.0))
    for k in (1, 2, 3):
        ball = ann = mult = 1.0
        for j, w in corpus:
            hat = w.spectrum()
            total = float(np.sum(np.abs(hat) ** 2))
            lam = float(np.sqrt(np.sum(grid.k2 * np.abs(hat) ** 2) / total))
            deriv = {
                p: max(_derivative_lp(grid, hat, alpha, p) for alpha in _multi_indices(2, k))
                for p in (1.0, 2.0, math.inf)
            }
            sig = ScalarField(grid, np.fft.ifftn(grid.k2 ** (k / 2) * hat).real)
            for a, b in combos:
                na = sup_norm(w) if a == math.inf else lp_norm(w, a)
                gain = lam ** (k + 2 * (1.0 / a - 1.0 / b))
                ball = max(ball, deriv[b] / (gain * na))
                r2 = deriv[a] / (lam**k * na)
                ann = max(ann, r2, 1.0 / r2)
                nb_sig = sup_norm(sig) if b == math.inf else lp_norm(sig, b)
                mult = max(mult, nb_sig / (gain * na))
        out[f"bernstein.ball.k{k}"] = ball
        out[f"bernstein.annulus.k{k}"] = ann
        out[f"bernstein.multiplier.k{k}"] = mult


def calibrate_interpolation(out):
    grid = make_grid(2, 64, 2 * np.pi, 1.0)
    fam = build_dyadic_family(grid)
    corpus = _field_corpus(grid, 30, seed=303)
    worst = 0.0
    for f in corpus:
        for s1, s2 in ((0.0, 2.0), (-1.0, 1.0), (0.5, 1.5)):
            for theta in (0.25, 0.5, 0.75):
                for p in (2.0, math.inf):
                    s_mid = theta * s1 + (1 - theta) * s2
                    lhs = besov_norm(fam, f, BesovIndex(s_mid, p, 1))
                    m1 = besov_norm(fam, f, BesovIndex(s1, p, math.inf))
                    m2 = besov_norm(fam, f, BesovIndex(s2, p, math.inf))
                    shape = (1.0 / (s2 - s1)) * (1.0 / theta + 1.0 / (1.0 - theta))
                    need = lhs / (shape * m1**theta * m2 ** (1 - theta))
                    worst = max(worst, need)
                    select_frequency_cut(m1, m2, s2 - s1)
    out["interpolation.C"] = worst


def calibrate_heat(out):
    from .dyadic import heat_regularity_audit

    grid = make_grid(2, 64, 2 * np.pi, 1.0)
    fam = build_dyadic_family(grid)
    rng = np.random.default_rng(404)
    times = np.linspace(0.0, 0.5, 11)
    worst = 0.0
    for trial in range(12):
        u0 = random_band_limited(grid, rng, max_mode=int(rng.integers(2, 20)))
        base = random_band_limited(grid, rng, max_mode=int(rng.integers(2, 20)))
        mod = rng.uniform(0.5, 2.0)
        snaps = [ScalarField(grid, base.values * math.cos(mod * t)) for t in times]
        forcing = TimeSeriesField(times, snaps)
        for mu in (0.5, 1.0, 2.0):
            for q1, q2 in ((math.inf, math.inf), (math.inf, 2.0), (2.0, 2.0), (4.0, 2.0)):
                for idx in (BesovIndex(0, 2, 2), BesovIndex(1, 2, 1), BesovIndex(0, math.inf, math.inf)):
                    rep = heat_regularity_audit(fam, u0, forcing, mu, q1, q2, idx)
                    # rep.rhs includes the allowed constant; recover the raw ratio
                    from .calibration import DRIFT_FACTOR, calibrated

                    raw_rhs = rep.rhs / (DRIFT_FACTOR * calibrated("heat.C"))
                    if raw_rhs > 0:
                        worst = max(worst, rep.lhs / raw_rhs)
    out["heat.C"] = worst


def _preset_runs():
    # canonical mild runs plus the near-vacuum bump variant, so the frozen
    # trajectory constants envelope both regimes
    runs = {}
    grid = make_grid(2, 64, 4 * np.pi, 1.0)
    cfg = SolverConfig(gamma=2.0, dt=1e-3, t_end=0.5)
    for preset in ("gaussian-bump", "random-large"):
        state = to_effective(make_preset(preset, grid, seed=12))
        runs[preset] = run(state, cfg, state_stride=25)
    dip = to_effective(
        make_preset(
            "gaussian-bump", grid, {"amplitude": -0.99, "width": 0.08 * grid.box_length}
        )
    )
    runs[("gaussian-bump", "dip")] = run(dip, cfg, state_stride=25)
    return runs


def calibrate_trajectories(out):
    runs = _preset_runs()
    for key, record in runs.items():
        preset = key[0] if isinstance(key, tuple) else key
        e0 = energy(record.states[0], 2.0).total
        sup_v = max(v_energy(s) for s in record.states)
        name_v = f"venergy.C.{preset}"
        name_cv = f"loglaw.cv.{preset}"
        out[name_v] = max(out.get(name_v, 0.0), sup_v / (1.0 + e0))
        out[name_cv] = max(out.get(name_cv, 0.0), log_law_constant(record))

        vt = 1.0 / float(np.min(record.scalars["density.min"])) + LOG_FLOOR
        first = record.states[0]
        c4 = (
            math.sqrt(v_energy(first))
            + float(np.max(first.vel.magnitude()))
            + 1.0
        )
        r = HOLDER_EXPONENT
        worst = 0.0
        for p in (1, 2, 3):
            q = p + 2.0
            lhs = psi(record, r * q)
            body = q ** (2 * r) * psi(record, q) ** r + q ** (2 * r) + c4 ** (r * q)
            worst = max(worst, lhs / (vt * body))
        name_c3 = f"psi.C3.{preset}"
        out[name_c3] = max(out.get(name_c3, 0.0), worst)


def calibrate_certificate(out):
    # chain the measured space-time interpolation constant through the
    # iteration algebra: C_cert = 2^(25/2) * C_gn^(3/2)
    runs = _preset_runs()
    c_gn = 0.0
    for record in runs.values():
        inv = [1.0 / s.rho.values for s in record.states]
        lo = min(float(np.min(w)) for w in inv)
        hi = max(float(np.max(w)) for w in inv)
        levels = [lo + frac * (hi - lo) for frac in (0.2, 0.5, 0.8)]
        for level in levels:
            sup_l2_sq = 0.0
            grad_sq, w_sq, times = [], [], []
            for s in record.states:
                w = truncate(ScalarField(s.grid, 1.0 / s.rho.values), level)
                cell = s.grid.cell_volume
                sup_l2_sq = max(sup_l2_sq, float(np.sum(w.values**2) * cell))
                from .degiorgi import flat_aware_gradient

                grad_sq.append(float(np.sum(flat_aware_gradient(w) ** 2) * cell))
                w_sq.append(float(np.sum(np.abs(w.values) ** (10.0 / 3.0)) * cell))
                times.append(s.t)
            denom = sup_l2_sq ** (2.0 / 3.0) * (
                np.trapezoid(np.array(grad_sq), np.array(times))
                + np.trapezoid(np.array([x ** (3.0 / 5.0) for x in w_sq]), np.array(times))
            )
            if denom > 0:
                c_gn = max(c_gn, float(np.trapezoid(np.array(w_sq), np.array(times))) / denom)
    c_gn = max(c_gn, 1e-2)
    out["certificate.C"] = 2.0 ** (25.0 / 2.0) * c_gn**1.5


def main() -> None:
    out: dict[str, float] = {}
    calibrate_hs_equivalence(out)
    calibrate_bernstein(out)
    calibrate_interpolation(out)
    calibrate_heat(out)
    calibrate_trajectories(out)
    calibrate_certificate(out)
    for key in sorted(out):
        print(f'    "{key}": {out[key]:.6g},')


if __name__ == "__main__":
    main()
