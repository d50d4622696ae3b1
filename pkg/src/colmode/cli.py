"""Batch front end: sweeps, simulation, analysis, and threshold calculators.

Subcommands: phase-diagram, simulate, analyze, converge, thresholds.  All
physics parameters come from JSON config files; the only flag overrides are
--seed, --out-dir, and --threads.  Every run writes a manifest JSON naming
its config hash, seed, and the SHA-256 digest of each output file, and every
output file references its manifest.  Data files carry no timestamps, so a
rerun with the same config and seed is byte-identical; parallel execution
changes scheduling but never sample streams, which are fixed entirely by
derived per-task seeds.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import hashlib
import json
import os
import sys
from dataclasses import replace as dc_replace
from pathlib import Path

import numpy as np

from . import __version__
from .entanglement import analytic_nu_minus, witness_report_from_covariance
from .errors import NumericalError, ValidationError
from .gaussian_core import (
    ModelParams,
    Preset,
    build_drift,
    build_diffusion,
    closed_form_covariance,
    solve_steady_lyapunov,
    steady_dynamics,
    steady_state_covariance,
)
from .null_models import (
    NullKind,
    gen_classical_paramp,
    gen_optimized_mixture,
    gen_shared_noise,
    matched_null_specs,
)
from .pipeline import (
    PipelineConfig,
    analyze_record,
    convergence_sweep,
    crossing_scan,
    witness_from_estimate,
    witness_with_uncertainty,
)
from .thresholds import (
    NoiseInputSpec,
    VminForm,
    collective_occupation,
    cooperativity,
    n_eff_from_noise,
    phase_diffusion,
    v_min,
)
from .trajectory import (
    Scheme,
    SourceTag,
    TrajectoryConfig,
    TrajectoryRecord,
    derive_stream_seed,
    load_record_csv,
    sample_exact_ou,
    sample_euler_maruyama,
    save_record_csv,
)

RNG_NAME = "pcg64"


# ---------------------------------------------------------------------------
# small IO helpers

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def config_digest(config: dict) -> str:
    return sha256_bytes(canonical_json(config).encode())[:12]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows, manifest_name: str) -> None:
    lines = [f"# manifest={manifest_name}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def save_record(record: TrajectoryRecord, base: Path, fmt: str, manifest_name: str) -> list[Path]:
    """Persist one record; returns the written paths."""
    meta = dict(record.meta)
    meta["manifest"] = manifest_name
    if fmt == "csv":
        path = base.with_suffix(".csv")
        rec = TrajectoryRecord(
            samples=record.samples, dt=record.dt, source=record.source,
            seed=record.seed, meta=meta,
        )
        save_record_csv(rec, path)
        return [path]
    npy = base.with_suffix(".npy")
    np.save(npy, record.samples, allow_pickle=False)
    side = base.with_suffix(".meta.json")
    write_json(
        side,
        {"dt": record.dt, "source": record.source.value, "seed": record.seed, "meta": meta},
    )
    return [npy, side]


def load_record(path) -> TrajectoryRecord:
    path = Path(path)
    if path.suffix == ".csv":
        return load_record_csv(path)
    if path.suffix == ".npy":
        side = path.with_suffix("").with_suffix(".meta.json")
        info = json.loads(side.read_text())
        return TrajectoryRecord(
            samples=np.load(path, allow_pickle=False),
            dt=info["dt"],
            source=SourceTag(info["source"]),
            seed=info["seed"],
            meta=info.get("meta", {}),
        )
    raise ValidationError(f"unsupported record file {path}")


def make_manifest(command: str, config: dict, seed, threads: int, inputs: dict | None = None):
    name = f"manifest_{command.replace('-', '_')}_{config_digest(config)}.json"
    body = {
        "schema": "colmode.manifest/1",
        "tool": "colmode",
        "version": __version__,
        "command": command,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": seed,
        "threads": threads,
        "rng": RNG_NAME,
        "config": config,
        "config_sha256": sha256_bytes(canonical_json(config).encode()),
        "inputs": inputs or {},
        "outputs": [],
    }
    return name, body


def finish_manifest(out_dir: Path, name: str, body: dict, outputs: list[Path]) -> None:
    body["outputs"] = sorted(
        ({"path": p.name, "sha256": sha256_file(p)} for p in outputs),
        key=lambda e: e["path"],
    )
    write_json(out_dir / name, body)


def _pmap(fn, items, threads: int):
    """Order-preserving map, optionally across processes; results never
    depend on scheduling because each item owns its derived seed."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# phase-diagram

def _axis_values(axis: dict) -> np.ndarray:
    for key in ("min", "max", "steps"):
        if key not in axis:
            raise ValidationError(f"axis needs '{key}'")
    steps = int(axis["steps"])
    if steps < 2:
        raise ValidationError("axis needs at least 2 steps")
    return np.linspace(float(axis["min"]), float(axis["max"]), steps)


def phase_diagram_rows(config: dict) -> list[dict]:
    preset = Preset(config.get("preset", "CLOSED_FORM"))
    kappa = float(config.get("kappa", 1.0))
    g_values = _axis_values(config["g_over_kappa"])
    n_values = _axis_values(config["n_eff"])
    rows = []
    for g in g_values:
        for n in n_values:
            row = {"g_over_kappa": float(g), "n_eff": float(n)}
            G = g * kappa
            if 2.0 * G >= kappa:
                row.update(
                    nu_minus=None, duan_sum=None, entangled_ppt=None,
                    analytic_nu_minus=None, boundary_flag="UNSTABLE",
                )
            else:
                if preset is Preset.CLOSED_FORM:
                    V = closed_form_covariance(G, kappa, n)
                else:
                    params = ModelParams(G=G, kappa_a=kappa, kappa_b=kappa, n_a=n, n_b=n)
                    V = solve_steady_lyapunov(build_drift(params), build_diffusion(params))
                rep = witness_report_from_covariance(V)
                row.update(
                    nu_minus=rep.nu_minus,
                    duan_sum=rep.duan_sum,
                    entangled_ppt=rep.entangled_ppt,
                    analytic_nu_minus=analytic_nu_minus(G, kappa, n),
                    boundary_flag="STABLE",
                )
            rows.append(row)
    rows.sort(key=lambda r: (r["g_over_kappa"], r["n_eff"]))
    return rows


PHASE_COLUMNS = [
    "g_over_kappa", "n_eff", "nu_minus", "duan_sum",
    "entangled_ppt", "analytic_nu_minus", "boundary_flag",
]


def cmd_phase_diagram(config: dict, out_dir: Path, seed, threads: int) -> int:
    name, manifest = make_manifest("phase-diagram", config, seed, threads)
    rows = phase_diagram_rows(config)
    out = out_dir / "phase_diagram.csv"
    write_csv(out, PHASE_COLUMNS, rows, name)
    finish_manifest(out_dir, name, manifest, [out])
    print(f"wrote {out} ({len(rows)} cells) and {name}")
    return 0


# ---------------------------------------------------------------------------
# simulate

def _member_args(config: dict, out_dir: Path, manifest_name: str):
    params = ModelParams.from_dict(config["params"])
    traj = TrajectoryConfig.from_dict(config["trajectory"])
    fmt = config.get("format", "npy")
    n_members = int(config.get("ensemble", 1))
    return [
        (params.to_dict(), traj.to_dict(), k, str(out_dir / f"quantum_{k:04d}"), fmt, manifest_name)
        for k in range(n_members)
    ]


def _simulate_member(args) -> list[str]:
    params_d, traj_d, k, base, fmt, manifest_name = args
    params = ModelParams.from_dict(params_d)
    traj = TrajectoryConfig.from_dict(traj_d)
    A, D = steady_dynamics(params)
    member_cfg = dc_replace(traj, master_seed=derive_stream_seed(traj.master_seed, k))
    meta = {"kappa": params.kappa_a, "params_hash": params.digest(), "member": k}
    if traj.scheme is Scheme.EULER_MARUYAMA:
        record = sample_euler_maruyama(A, D, member_cfg, meta=meta)
    else:
        record = sample_exact_ou(A, D, member_cfg, meta=meta)
    return [str(p) for p in save_record(record, Path(base), fmt, manifest_name)]


def cmd_simulate(config: dict, out_dir: Path, seed, threads: int) -> int:
    if seed is not None:
        config = dict(config)
        config["trajectory"] = dict(config["trajectory"], master_seed=int(seed))
    name, manifest = make_manifest("simulate", config, config["trajectory"].get("master_seed"), threads)
    written: list[Path] = []
    for paths in _pmap(_simulate_member, _member_args(config, out_dir, name), threads):
        written.extend(Path(p) for p in paths)

    trio = config.get("null_trio", {})
    if trio.get("enabled", False):
        params = ModelParams.from_dict(config["params"])
        traj = TrajectoryConfig.from_dict(config["trajectory"])
        V_q = steady_state_covariance(params)
        specs = matched_null_specs(
            V_q,
            kappa=params.kappa_a,
            seed=traj.master_seed,
            correlation=float(trio.get("correlation", 0.7)),
            gain=trio.get("gain"),
        )
        fmt = config.get("format", "npy")
        rec_a = gen_shared_noise(specs[NullKind.SHARED_NOISE], traj, kappa=params.kappa_a)
        rec_b = gen_classical_paramp(specs[NullKind.CLASSICAL_PARAMP], traj, kappa=params.kappa_a)
        rec_c, _ = gen_optimized_mixture(
            specs[NullKind.OPTIMIZED_MIXTURE],
            config=traj,
            kappa=params.kappa_a,
            restarts=int(trio.get("restarts", 8)),
            max_evals=int(trio.get("max_evals", 2000)),
        )
        for tag, rec in (("null_a", rec_a), ("null_b", rec_b), ("null_c", rec_c)):
            written.extend(save_record(rec, out_dir / tag, fmt, name))

    finish_manifest(out_dir, name, manifest, written)
    print(f"wrote {len(written)} record files and {name}")
    return 0


# ---------------------------------------------------------------------------
# analyze

ANALYZE_COLUMNS = [
    "file", "source", "nu_minus", "duan_sum", "entangled_ppt", "entangled_duan",
    "stderr_nu", "stderr_duan", "n_segments", "n_eff",
]


def cmd_analyze(record_paths, config: dict, out_dir: Path, seed, threads: int) -> int:
    pconf = PipelineConfig.from_dict(config["pipeline"])
    inputs = {Path(p).name: sha256_file(p) for p in record_paths}
    name, manifest = make_manifest("analyze", config, seed, threads, inputs=inputs)

    rows = []
    groups: dict[str, list] = {}
    for path in record_paths:
        record = load_record(path)
        est = analyze_record(record, pconf)
        rep = witness_from_estimate(est)
        rows.append(
            {
                "file": Path(path).name,
                "source": est.source,
                "nu_minus": rep.nu_minus,
                "duan_sum": rep.duan_sum,
                "entangled_ppt": rep.entangled_ppt,
                "entangled_duan": rep.entangled_duan,
                "stderr_nu": rep.stderr_nu,
                "stderr_duan": rep.stderr_duan,
                "n_segments": est.n_segments,
                "n_eff": est.n_eff,
            }
        )
        groups.setdefault(est.source, []).append(est)

    summary = {"config_hash": pconf.digest(), "manifest": name, "groups": {}}
    for source, ests in sorted(groups.items()):
        if len(ests) >= 2:
            rep = witness_with_uncertainty(ests)
        else:
            rep = witness_from_estimate(ests[0])
        summary["groups"][source] = dict(rep.to_dict(), n_records=len(ests))

    rows.sort(key=lambda r: r["file"])
    csv_path = out_dir / "witness_distribution.csv"
    json_path = out_dir / "witness_report.json"
    write_csv(csv_path, ANALYZE_COLUMNS, rows, name)
    write_json(json_path, summary)
    finish_manifest(out_dir, name, manifest, [csv_path, json_path])
    print(f"analyzed {len(rows)} records into {csv_path} / {json_path}")
    return 0


# ---------------------------------------------------------------------------
# converge

CONVERGE_COLUMNS = ["T", "B", "n_eff", "nu_mean", "nu_stderr", "duan_mean", "duan_stderr", "n_runs"]


def cmd_converge(config: dict, out_dir: Path, seed, threads: int) -> int:
    master_seed = int(seed if seed is not None else config.get("master_seed", 0))
    name, manifest = make_manifest("converge", config, master_seed, threads)
    params = ModelParams.from_dict(config["params"])
    A, D = steady_dynamics(params)
    cells = [(float(c["T"]), float(c["B"])) for c in config["cells"]]
    result = convergence_sweep(
        A,
        D,
        cells,
        runs_per_cell=int(config.get("runs_per_cell", 16)),
        segments_per_record=int(config.get("segments_per_record", 24)),
        master_seed=master_seed,
        segment_statistic=config.get("segment_statistic", "second_moment"),
    )
    csv_path = out_dir / "converge.csv"
    write_csv(csv_path, CONVERGE_COLUMNS, result["rows"], name)
    summary = {
        "manifest": name,
        "slope_nu": result["slope_nu"],
        "slope_duan": result["slope_duan"],
        "cells": len(cells),
    }
    outputs = [csv_path]

    crossing = config.get("crossing")
    if crossing:
        rows = crossing_scan(
            kappa=params.kappa_a,
            n=float(crossing["n"]),
            g_values=[float(g) for g in crossing["g_values"]],
            cells=[(float(c["T"]), float(c["B"])) for c in crossing["cells"]],
            runs_per_cell=int(crossing.get("runs_per_cell", 12)),
            segments_per_record=int(crossing.get("segments_per_record", 24)),
            master_seed=master_seed,
        )
        cross_path = out_dir / "crossing.csv"
        write_csv(cross_path, ["T", "B", "g_cross", "sigma"], rows, name)
        outputs.append(cross_path)
        summary["crossing_cells"] = len(rows)

    json_path = out_dir / "converge_summary.json"
    write_json(json_path, summary)
    outputs.append(json_path)
    finish_manifest(out_dir, name, manifest, outputs)
    print(f"wrote {csv_path} (slopes: nu {result['slope_nu']:.3f}, duan {result['slope_duan']:.3f})")
    return 0


# ---------------------------------------------------------------------------
# thresholds

def _threshold_report(config: dict) -> dict:
    kappa = config.get("kappa")
    if kappa is None and "ringdown_time" in config:
        kappa = 1.0 / float(config["ringdown_time"])
    omega = config.get("omega_col")
    if omega is None and "f_col" in config:
        omega = 2.0 * np.pi * float(config["f_col"])
    spec = NoiseInputSpec(
        B=config["B"],
        C_eff=config["C_eff"],
        omega_col=omega,
        T_amb=config["T_amb"],
        S_V0=config.get("S_V0"),
        R_eff=config.get("R_eff"),
        Re_Y_eff=config.get("Re_Y_eff"),
    )
    report: dict = {"inputs": spec.to_dict()}
    if kappa is not None:
        kappa = float(kappa)
        report["kappa"] = {"value": kappa, "formula": "1/ringdown_time"}

    n_eff, clamped = n_eff_from_noise(spec)
    report["n_eff"] = {
        "value": n_eff,
        "clamped": clamped,
        "formula": "(C_eff*S_V0*B/(hbar*omega_col) - 1)/2",
    }

    c_corr = None
    g_over_kappa = config.get("G_over_kappa")
    if g_over_kappa is not None and kappa is not None and n_eff > 0:
        c_corr = cooperativity(float(g_over_kappa) * kappa, kappa, n_eff)
        report["cooperativity"] = {
            "value": c_corr,
            "formula": "(2G/kappa)*(n_eff+1)/n_eff",
        }
    if c_corr is None:
        c_corr = config.get("C_corr")

    vmin: dict = {}
    if c_corr is not None:
        vmin["GENERAL"] = {
            "value": v_min(VminForm.GENERAL, spec, C_corr=float(c_corr)),
            "formula": "sqrt(S_V0*B/C_corr)",
        }
        if spec.R_eff is not None:
            vmin["THERMAL"] = {
                "value": v_min(VminForm.THERMAL, spec, C_corr=float(c_corr)),
                "formula": "sqrt(4*k_B*T*R_eff*B/C_corr)",
            }
    if kappa is not None:
        val = v_min(VminForm.CONSERVATIVE, spec, kappa=kappa)
        vmin["CONSERVATIVE"] = {
            "value": val,
            "formula": "sqrt(2*k_B*T*B/(C_eff*kappa))",
            "rounded_1sf": f"{val:.0e}",
        }
    if vmin:
        report["v_min"] = vmin

    v_col = config.get("V_col")
    if v_col is not None:
        n_col = collective_occupation(float(v_col), spec.C_eff, spec.omega_col)
        report["N_col"] = {"value": n_col, "formula": "C_eff*V_col^2/(2*hbar*omega_col)"}
        if kappa is not None:
            t_int = float(config.get("T_int", 1.0))
            d_phi, sigma2 = phase_diffusion(kappa, n_eff, n_col, t_int)
            report["phase_diffusion"] = {
                "D_phi": d_phi,
                "sigma2_phi": sigma2,
                "T_int": t_int,
                "formula": "kappa*(2*n_eff+1)/(4*N_col)",
            }
    return report


def cmd_thresholds(config: dict, out_dir: Path, seed, threads: int) -> int:
    name, manifest = make_manifest("thresholds", config, seed, threads)
    report = _threshold_report(config)
    report["manifest"] = name
    out = out_dir / "thresholds.json"
    write_json(out, report)
    finish_manifest(out_dir, name, manifest, [out])
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# entry point

def _load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colmode",
        description="Steady-state entanglement simulator and certification toolkit "
        "for two coupled collective bosonic modes.",
    )
    parser.add_argument("--version", action="version", version=f"colmode {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", "-c", required=True, help="JSON config file")
        p.add_argument("--out-dir", default=None, help="output directory (env COLMODE_OUT_DIR)")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--threads", type=int, default=None, help="worker count (env COLMODE_THREADS)")

    common(sub.add_parser("phase-diagram", help="witness grid over (G/kappa, n_eff)"))
    common(sub.add_parser("simulate", help="generate quantum and null-model records"))
    p_an = sub.add_parser("analyze", help="run the identical pipeline over record files")
    p_an.add_argument("records", nargs="+", help="record files (.npy or .csv)")
    common(p_an)
    common(sub.add_parser("converge", help="estimator convergence versus N_eff = T*B"))
    common(sub.add_parser("thresholds", help="operational threshold calculators"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out_dir = Path(args.out_dir or os.environ.get("COLMODE_OUT_DIR", "out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        threads = args.threads
        if threads is None:
            threads = int(os.environ.get("COLMODE_THREADS", "1"))
        if threads < 1:
            raise ValidationError("--threads must be >= 1")
        config = _load_config(args.config)
        if args.command == "phase-diagram":
            return cmd_phase_diagram(config, out_dir, args.seed, threads)
        if args.command == "simulate":
            return cmd_simulate(config, out_dir, args.seed, threads)
        if args.command == "analyze":
            return cmd_analyze(args.records, config, out_dir, args.seed, threads)
        if args.command == "converge":
            return cmd_converge(config, out_dir, args.seed, threads)
        if args.command == "thresholds":
            return cmd_thresholds(config, out_dir, args.seed, threads)
        raise ValidationError(f"unknown command {args.command}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
