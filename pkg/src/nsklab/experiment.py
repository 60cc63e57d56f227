"""Experiment execution: run, sweep, report.

A run is deterministic given (config, seed): probe series and audit tables
are written as CSV with 17 significant digits, snapshots in the binary field
format, and a JSON manifest inventorying everything.  Sweeps execute runs
independently with isolated output directories.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .audits import audit_csv_lines
from .config import ConfigError, ExperimentConfig, parse_config
from .estimates import gamma_q_admissible, log_law_constant
from .fields import ScalarField, sobolev_norm, write_snapshot
from .probes import resolve_audits, resolve_probes
from .solver import SolverError, make_preset, run, to_effective

__all__ = ["RunManifest", "run_experiment", "sweep", "report", "SweepResult"]


@dataclass
class RunManifest:
    directory: str
    config_hash: str
    code_version: str
    wall_time_s: float
    files: list
    warnings: list
    preset: str
    gamma: float
    q_admissible: float | None
    aborted: bool
    abort_time: float | None
    abort_reason: str
    audit_total: int
    audit_failures: int
    exit_code: int
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = dict(self.__dict__)
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        return cls(**data)


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_series_csv(path: Path, record) -> None:
    names = list(record.scalars)
    lines = ["time," + ",".join(names)]
    for i, t in enumerate(record.times):
        lines.append(",".join([_fmt(t)] + [_fmt(record.scalars[n][i]) for n in names]))
    path.write_text("\n".join(lines) + "\n")


def run_experiment(config: ExperimentConfig, output_root: Path | str | None = None) -> RunManifest:
    """Execute one configured run and write its outputs; never raises on a
    clean solver abort (recorded in the manifest instead)."""
    t_wall = time.perf_counter()
    outdir = Path(config.directory)
    if output_root is not None and not outdir.is_absolute():
        outdir = Path(output_root) / outdir
    outdir.mkdir(parents=True, exist_ok=True)

    grid = config.make_grid()
    state = make_preset(config.preset_name, grid, config.preset_params, seed=config.seed)
    if config.formulation == "effective":
        state = to_effective(state)
    probes = resolve_probes(config.probe_names, config.solver.gamma)
    audits = resolve_audits(config.audit_names)

    files: list[str] = []
    record = run(state, config.solver, probes=probes, state_stride=config.state_stride)

    series_path = outdir / "series.csv"
    _write_series_csv(series_path, record)
    files.append(series_path.name)

    if config.snapshots and record.states:
        for tag, st in (("initial", record.states[0]), ("final", record.states[-1])):
            rho_path = outdir / f"{tag}.rho.nskf"
            write_snapshot(st.rho, st.t, rho_path)
            files.append(rho_path.name)
            for i in range(grid.dim):
                vel_path = outdir / f"{tag}.vel{i}.nskf"
                write_snapshot(st.vel.component(i), st.t, vel_path)
                files.append(vel_path.name)

    ctx = {
        "gamma": config.solver.gamma,
        "preset": config.preset_name,
        "c_v": 0.0,
    }
    reports = []
    extra: dict = {}
    if record.states:
        # observed headroom of the density maximum over twice the far-field
        # value, relative to the initial deviation size: reported, not asserted
        dev0 = ScalarField(
            grid, record.states[0].rho.values - grid.far_field_density
        )
        h3 = sobolev_norm(dev0, 3)
        if h3 > 0:
            sup_rho = float(np.max(record.scalars["density.max"]))
            extra["density_bound_ratio"] = (
                sup_rho - 2.0 * grid.far_field_density
            ) / h3
    if audits and not record.aborted:
        ctx["c_v"] = log_law_constant(record)
        for name, fn in audits.items():
            reports.extend(fn(record, ctx))
        audit_path = outdir / "audits.csv"
        audit_path.write_text("\n".join(audit_csv_lines(reports)) + "\n")
        files.append(audit_path.name)
        cert = ctx.get("certificate")
        if cert is not None:
            cert_path = outdir / "certificate.csv"
            cert_path.write_text("\n".join(cert.csv_lines()) + "\n")
            (outdir / "certificate.txt").write_text(cert.text_summary() + "\n")
            files.extend([cert_path.name, "certificate.txt"])
            if cert.certified and cert.observed > 0:
                extra["certificate_tightness"] = cert.bound / cert.observed

    failures = sum(0 if r.passed else 1 for r in reports)
    if record.aborted:
        exit_code = 3
    elif failures:
        exit_code = 1
    else:
        exit_code = 0

    manifest = RunManifest(
        directory=str(outdir),
        config_hash=config.config_hash(),
        code_version=__version__,
        wall_time_s=time.perf_counter() - t_wall,
        files=files,
        warnings=list(config.warnings),
        preset=config.preset_name,
        gamma=config.solver.gamma,
        q_admissible=gamma_q_admissible(config.solver.gamma),
        aborted=record.aborted,
        abort_time=record.abort_time,
        abort_reason=record.abort_reason,
        audit_total=len(reports),
        audit_failures=failures,
        exit_code=exit_code,
        extra=extra,
    )
    manifest_path = outdir / "manifest.json"
    manifest_path.write_text(manifest.to_json() + "\n")
    for name in manifest.files:
        if not (outdir / name).exists():
            raise SolverError(f"manifest lists missing file {name}")
    return manifest


@dataclass
class SweepResult:
    config_path: str
    manifest: RunManifest | None
    error: str


def sweep(config_paths, output_root: Path | str | None = None) -> list[SweepResult]:
    """Independent runs; duplicate output directories are rejected before launch."""
    parsed = []
    for path in config_paths:
        text = Path(path).read_text()
        parsed.append((str(path), parse_config(text)))
    seen: dict[str, str] = {}
    for path, cfg in parsed:
        key = cfg.directory
        if key in seen:
            raise ConfigError(
                f"duplicate output directory {key!r} in {path} and {seen[key]}"
            )
        seen[key] = path
    results = []
    for path, cfg in parsed:
        try:
            results.append(SweepResult(path, run_experiment(cfg, output_root), ""))
        except Exception as err:  # child failures must not sink the sweep
            results.append(SweepResult(path, None, f"{type(err).__name__}: {err}"))
    return results


_GROWTH_PS = (2, 6, 14, 30)


def _series_columns(series_path: Path) -> dict[str, np.ndarray]:
    lines = series_path.read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    return {name: data[:, i] for i, name in enumerate(header)}


def report(manifest_paths, out_path: Path | str) -> Path:
    """Aggregate manifests into one plot-ready summary CSV (one row per run)."""
    growth_cols = [f"growth.p{p}" for p in _GROWTH_PS]
    header = [
        "run",
        "preset",
        "gamma",
        "q_admissible",
        "aborted",
        "audit_total",
        "audit_failures",
        "audit_pass_rate",
        "c_v",
        "min_density",
        "certified_bound",
        "certificate_tightness",
        "density_bound_ratio",
        *growth_cols,
    ]
    rows = []
    for path in manifest_paths:
        m = RunManifest.from_json(Path(path).read_text())
        outdir = Path(m.directory)
        row = {
            "run": outdir.name,
            "preset": m.preset,
            "gamma": _fmt(m.gamma),
            "q_admissible": _fmt(m.q_admissible) if m.q_admissible is not None else "",
            "aborted": "true" if m.aborted else "false",
            "audit_total": str(m.audit_total),
            "audit_failures": str(m.audit_failures),
            "audit_pass_rate": _fmt(
                1.0 if m.audit_total == 0 else 1.0 - m.audit_failures / m.audit_total
            ),
        }
        for key in ("certificate_tightness", "density_bound_ratio"):
            if key in m.extra:
                row[key] = _fmt(m.extra[key])
        series_path = outdir / "series.csv"
        if series_path.exists():
            cols = _series_columns(series_path)
            if "veff.max" in cols and "density.min" in cols and np.min(cols["density.min"]) > 0:
                vt = 1.0 / float(np.min(cols["density.min"])) + math.exp(25.0 / 9.0)
                row["c_v"] = _fmt(float(np.max(cols["veff.max"])) / math.sqrt(math.log(vt)))
            if "density.min" in cols:
                row["min_density"] = _fmt(float(np.min(cols["density.min"])))
            for p, col in zip(_GROWTH_PS, growth_cols):
                key = f"norm.weighted.p{p}"
                if key in cols:
                    row[col] = _fmt(float(np.max(cols[key])) / math.sqrt(p + 2.0))
        cert_path = outdir / "certificate.txt"
        if cert_path.exists():
            text = cert_path.read_text()
            if "certified sup 1/rho <=" in text:
                row["certified_bound"] = text.split("<=")[1].split()[0]
        rows.append(row)

    out_path = Path(out_path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row.get(col, "") for col in header))
    out_path.write_text("\n".join(lines) + "\n")
    return out_path
