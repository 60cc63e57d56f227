"""Frozen empirical constants for the audits that check "there exists C" claims.

Calibration protocol: each constant is measured once on the fixed seeded
corpus (see ``nsklab.calibrate``, which recomputes and prints this table) and
frozen here.  Audits and regression tests then require that no new input
exceeds twice the frozen value.  Constants with an exact value in closed form
(the high-density equivalence constants, 1/7, 1/8, the e^(25/9) floor, the
5/3 exponent) are asserted directly in the relevant modules and never appear
here.
"""

from __future__ import annotations

__all__ = ["CONSTANTS", "calibrated", "DRIFT_FACTOR"]

# regression alarm threshold: empirical value must stay below factor * frozen
DRIFT_FACTOR = 2.0

# measured on the seeded corpora of nsklab.calibrate, 2026-08-10, then
# rounded upward (10-60%) to leave envelope headroom for compatible runs
CONSTANTS: dict[str, float] = {
    # fractional Sobolev vs dyadic-sum norm equivalence, per regularity s
    "besov.hs_equiv.s-1": 1.7,
    "besov.hs_equiv.s0": 1.4,
    "besov.hs_equiv.s1": 2.3,
    "besov.hs_equiv.s2": 3.3,
    # frequency-localized derivative bounds, per derivative order
    "bernstein.ball.k1": 1.1,
    "bernstein.ball.k2": 1.1,
    "bernstein.ball.k3": 1.1,
    "bernstein.annulus.k1": 1.6,
    "bernstein.annulus.k2": 1.9,
    "bernstein.annulus.k3": 2.1,
    "bernstein.multiplier.k1": 1.1,
    "bernstein.multiplier.k2": 1.2,
    "bernstein.multiplier.k3": 1.4,
    # sharp two-norm interpolation with explicit theta dependence
    "interpolation.C": 1.4,
    # heat-flow maximal smoothing ratio
    "heat.C": 1.9,
    # trajectory constants, per preset (envelopes cover the mild defaults and
    # the near-vacuum bump variant)
    "venergy.C.gaussian-bump": 1.6,
    "venergy.C.random-large": 0.95,
    "psi.C3.gaussian-bump": 1e-5,
    "psi.C3.random-large": 1e-5,
    "loglaw.cv.gaussian-bump": 5.5,
    "loglaw.cv.random-large": 0.5,
    # level-set certificate condition C * |v|_inf^3 * U0 <= M^2, chained
    # from the measured space-time interpolation constant
    "certificate.C": 1100.0,
}


def calibrated(key: str) -> float:
    try:
        return CONSTANTS[key]
    except KeyError:
        raise KeyError(f"no frozen calibration constant named {key!r}") from None
