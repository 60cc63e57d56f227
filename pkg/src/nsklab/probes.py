"""Named per-step diagnostics and named trajectory audits for the runner.

Probe names are stable strings; parametrized families encode their parameter
in the name ("norm.weighted.p6", "besov.rho.1.2.2", "sobolev.rho.H2",
"psi.p4").  Unknown names raise with the nearest valid candidates, so config
typos fail loudly before a run starts.
"""

from __future__ import annotations

import difflib
import math

import numpy as np

from . import degiorgi, estimates
from .audits import AuditReport, bound_report
from .dyadic import BesovIndex, besov_norm, build_dyadic_family
from .fields import FieldError, ScalarField, sobolev_norm, vector_sobolev_norm

__all__ = ["ProbeError", "resolve_probes", "resolve_audits", "known_probe_names", "known_audit_names"]

ALWAYS_RECORDED = ("density.min", "density.max", "veff.max")


class ProbeError(ValueError):
    pass


def _simple_probes(gamma: float) -> dict:
    return {
        "energy.total": lambda s: estimates.energy(s, gamma).total,
        "energy.kinetic": lambda s: estimates.energy(s, gamma).kinetic,
        "energy.potential": lambda s: estimates.energy(s, gamma).potential,
        "energy.fisher": lambda s: estimates.energy(s, gamma).fisher,
        "energy.dissipation": estimates.dissipation_rate,
        "venergy": estimates.v_energy,
        "venergy.pressure_dissipation": lambda s: estimates.v_energy_dissipations(s, gamma)[0],
        "venergy.velocity_dissipation": lambda s: estimates.v_energy_dissipations(s, gamma)[1],
        "jungel.D": lambda s: estimates.jungel_terms(s.rho)[0],
        "jungel.A": lambda s: estimates.jungel_terms(s.rho)[1],
        "jungel.Bp": lambda s: estimates.jungel_terms(s.rho)[2],
    }


_TEMPLATES = (
    "norm.weighted.p<P>",
    "psi.p<P>",
    "sobolev.rho.H<k>",
    "sobolev.v.H<k>",
    "besov.rho.<s>.<p>.<r>",
)


def known_probe_names(gamma: float = 2.0) -> list[str]:
    return sorted(_simple_probes(gamma)) + list(ALWAYS_RECORDED) + list(_TEMPLATES)


def _parse_exponent(token: str) -> float:
    if token == "inf":
        return math.inf
    try:
        return float(token)
    except ValueError:
        raise ProbeError(f"cannot parse exponent {token!r}") from None


def _besov_probe(spec: str):
    tokens = spec.split(".")
    if len(tokens) != 3:
        raise ProbeError(f"besov probe needs three tokens s.p.r, got {spec!r}")
    s = _parse_exponent(tokens[0])
    idx = BesovIndex(s, _parse_exponent(tokens[1]), _parse_exponent(tokens[2]))
    cache: dict = {}

    def probe(state):
        fam = cache.get(state.grid)
        if fam is None:
            fam = cache[state.grid] = build_dyadic_family(state.grid)
        dev = ScalarField(state.grid, state.rho.values - state.grid.far_field_density)
        return besov_norm(fam, dev, idx)

    return probe


def _psi_probe(p: float):
    def probe(state):
        e = estimates._as_effective(state)
        return float(np.sum(e.rho.values * e.vel.magnitude() ** p) * e.grid.cell_volume)

    return probe


def resolve_probe(name: str, gamma: float):
    simple = _simple_probes(gamma)
    if name in simple:
        return simple[name]
    if name in ALWAYS_RECORDED:
        return None  # recorded by the runner regardless
    if name.startswith("norm.weighted.p"):
        p = _parse_exponent(name[len("norm.weighted.p") :])
        return lambda s: estimates.weighted_velocity_norm(s, p)
    if name.startswith("psi.p"):
        return _psi_probe(_parse_exponent(name[len("psi.p") :]))
    if name.startswith("sobolev.rho.H"):
        k = int(name[len("sobolev.rho.H") :])
        return lambda s: sobolev_norm(
            ScalarField(s.grid, s.rho.values - s.grid.far_field_density), k
        )
    if name.startswith("sobolev.v.H"):
        k = int(name[len("sobolev.v.H") :])
        return lambda s: vector_sobolev_norm(estimates._as_effective(s).vel, k)
    if name.startswith("besov.rho."):
        return _besov_probe(name[len("besov.rho.") :])
    near = difflib.get_close_matches(name, known_probe_names(gamma), n=3)
    hint = f"; nearest valid names: {', '.join(near)}" if near else ""
    raise ProbeError(f"unknown probe {name!r}{hint}")


def resolve_probes(names, gamma: float) -> dict:
    out = {}
    for name in names:
        fn = resolve_probe(name, gamma)
        if fn is not None:
            out[name] = fn
    return out


# ----------------------------------------------------------------------
# trajectory-level audits


def _merge_worst(reports: list[AuditReport]) -> list[AuditReport]:
    worst: dict[str, AuditReport] = {}
    for r in reports:
        prev = worst.get(r.inequality_id)
        if prev is None or (not r.passed and prev.passed) or (
            r.passed == prev.passed and r.ratio > prev.ratio
        ):
            worst[r.inequality_id] = r
    return [worst[k] for k in sorted(worst)]


GROWTH_EXPONENTS = (2, 6, 14, 30)
GROWTH_SPREAD_LIMIT = 0.20


def _growth_constants(record) -> dict[int, float]:
    out = {}
    for p in GROWTH_EXPONENTS:
        key = f"norm.weighted.p{p}"
        if key in record.scalars:
            sup = float(np.max(record.scalars[key]))
        else:
            sup = max(estimates.weighted_velocity_norm(s, p) for s in record.states)
        out[p] = sup / math.sqrt(p + 2.0)
    return out


def growth_law_audit(record) -> AuditReport:
    """Spread of sup_t (weighted norm) / sqrt(p+2) across the exponent ladder."""
    consts = _growth_constants(record)
    values = list(consts.values())
    top, bottom = max(values), min(values)
    spread = top / bottom - 1.0 if bottom > 0 else (0.0 if top == 0.0 else math.inf)
    return bound_report(
        "growth.sqrt_p",
        spread,
        GROWTH_SPREAD_LIMIT,
        0.0,
        "square-root growth of weighted velocity norms in the exponent",
    )


def _audit_pi(record, ctx):
    reports = []
    for s in record.states:
        reports.extend(
            estimates.pi_equivalence_audit(s.rho, s.grid.far_field_density, ctx["gamma"])
        )
    return _merge_worst(reports)


def _audit_jungel(record, ctx):
    reports = []
    for s in record.states:
        reports.extend(estimates.jungel_audit(s.rho))
    return _merge_worst(reports)


def _audit_region(record, ctx):
    return _merge_worst([estimates.region_split(s, ctx["gamma"]).chebyshev for s in record.states])


def _audit_bd(record, ctx):
    return [estimates.bd_identity_audit(record)]


def _audit_loglaw(record, ctx):
    return [estimates.log_law_audit(record, preset=ctx.get("preset"))]


def _audit_reverse_holder(record, ctx):
    return _merge_worst(
        [estimates.reverse_holder_audit(record, p, preset=ctx.get("preset")) for p in (1, 2, 3)]
    )


def _audit_growth(record, ctx):
    return [growth_law_audit(record)]


def _audit_certificate(record, ctx):
    cert = degiorgi.lower_bound_certificate(record, ctx["c_v"])
    ctx["certificate"] = cert
    if not cert.certified:
        return [
            bound_report("certificate.soundness", math.inf, 1.0, 0.0, "density-lower-bound certificate: " + cert.reason)
        ]
    return [
        bound_report(
            "certificate.soundness",
            cert.observed,
            cert.bound,
            1e-9,
            "density-lower-bound certificate soundness",
        )
    ]


AUDITS = {
    "pi-equivalence": _audit_pi,
    "jungel": _audit_jungel,
    "region-split": _audit_region,
    "bd-identity": _audit_bd,
    "log-law": _audit_loglaw,
    "reverse-holder": _audit_reverse_holder,
    "growth-law": _audit_growth,
    "certificate": _audit_certificate,
}


def known_audit_names() -> list[str]:
    return sorted(AUDITS)


def resolve_audits(names) -> dict:
    out = {}
    for name in names:
        if name not in AUDITS:
            near = difflib.get_close_matches(name, known_audit_names(), n=3)
            hint = f"; nearest valid names: {', '.join(near)}" if near else ""
            raise ProbeError(f"unknown audit {name!r}{hint}")
        out[name] = AUDITS[name]
    return out
