"""Command-line pipeline: generate -> pod -> lengthscale -> run -> stats ->
calibrate, plus the end-to-end `repro` subcommand.

Every subcommand writes its tabular outputs as RFC-4180 CSV with floats
printed to 17 significant digits, and drops exactly one `manifest.json`
into each artifact directory.  Exit codes: 0 success, 1 validation error,
2 numerical failure.  ROM blow-up is recorded as data, not a failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .calibrate import (BracketError, SweepSpec, find_optimal, find_threshold,
                        mean_ke_objective, table_report)
from .data_model import SnapshotIOError, read_snapshots, write_snapshots
from .fom import (BurgersConfig, ConfigurationError, InstabilityError,
                  SyntheticChannelConfig, generate_synthetic_channel, run_burgers)
from .integrators import (DELTA1, DELTA2, EXPLICIT, EFRConfig, FilterFailure,
                          MLConfig, StepFailure, default_u_ml, run)
from .lengthscale import delta1 as compute_delta1
from .lengthscale import LengthscaleInputs, delta2
from .pod import compute_pod, project, read_basis, write_basis
from .rom_ops import assemble, read_operators, write_operators
from .stats import CoefficientKE, compute_stats, kinetic_energy
from .testbed import EFR_CHI, ROM_DT, ROM_STEPS, TESTBED_R_VALUES, ROMProblem, \
    make_testbed, testbed_config

ARTIFACT_VERSION = "romscale-1"
MANIFEST = "manifest.json"

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class CLIError(ValueError):
    """Bad arguments or inputs; maps to exit code 1."""


def _write_manifest(out_dir: str, subcommand: str, config: dict,
                    inputs: list[str], outputs: list[str],
                    seed: int | None, t_start: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "seed": seed,
        "artifact_version": ARTIFACT_VERSION,
        "duration_seconds": time.time() - t_start,
    }
    with open(os.path.join(out_dir, MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, default=str)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _parse_kv_file(path: str) -> dict:
    """Flat `key = value` config file; values parsed as int, float, or string."""
    if not os.path.isfile(path):
        raise CLIError(f"config file not found: {path}")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CLIError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in line.split("=", 1))
            for cast in (int, float):
                try:
                    out[key] = cast(val)
                    break
                except ValueError:
                    continue
            else:
                out[key] = val
    return out


def _coerce_config(cls, overrides: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - names
    if unknown:
        raise CLIError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    tupled = {}
    for key, val in overrides.items():
        if key in ("dims", "lengths") and isinstance(val, str):
            parts = [p for p in val.replace(",", " ").split() if p]
            tupled[key] = tuple(float(p) if key == "lengths" else int(p)
                                for p in parts)
        else:
            tupled[key] = val
    try:
        return cls(**tupled)
    except (ValueError, TypeError) as exc:
        raise CLIError(str(exc)) from exc


def _parse_r_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(p) for p in text.replace(",", " ").split())
    except ValueError as exc:
        raise CLIError(f"bad --r list {text!r}") from exc
    if not values:
        raise CLIError("--r list is empty")
    return values


def _load_snapshots(path: str):
    if not os.path.isdir(path):
        raise CLIError(f"snapshot directory not found: {path}")
    return read_snapshots(path)


def _load_basis(path: str):
    if not os.path.isdir(path):
        raise CLIError(f"basis directory not found: {path}")
    return read_basis(path)


def cmd_generate(args) -> int:
    t0 = time.time()
    overrides = _parse_kv_file(args.config) if args.config else {}
    if args.kind == "burgers":
        cfg = _coerce_config(BurgersConfig, overrides)
        snap_set = run_burgers(cfg)
    else:
        cfg = _coerce_config(SyntheticChannelConfig, overrides)
        snap_set = generate_synthetic_channel(cfg)
    write_snapshots(snap_set, args.out)
    _write_manifest(args.out, f"generate {args.kind}", dataclasses.asdict(cfg),
                    [args.config] if args.config else [], [args.out],
                    cfg.seed, t0)
    return EXIT_OK


def cmd_pod(args) -> int:
    t0 = time.time()
    snap_set = _load_snapshots(args.inp)
    basis = compute_pod(snap_set, r_max=args.rmax, tol=args.tol)
    write_basis(basis, args.out)
    _write_manifest(args.out, "pod", {"rmax": args.rmax, "tol": args.tol},
                    [args.inp], [args.out], None, t0)
    return EXIT_OK


def cmd_lengthscale(args) -> int:
    t0 = time.time()
    basis = _load_basis(args.basis)
    snap_set = _load_snapshots(args.snapshots) if args.snapshots else None
    h = args.h if args.h is not None else basis.grid.meshsize
    L = args.L if args.L is not None else basis.grid.characteristic_length()
    rows = []
    for r in _parse_r_list(args.r):
        if not 1 <= r <= basis.R:
            raise CLIError(f"r = {r} outside [1, {basis.R}]")
        inputs = LengthscaleInputs(h, L, basis.eigenvalues, r)
        d1 = (compute_delta1(basis, snap_set, r)
              if snap_set is not None and r < basis.R else None)
        rows.append({"r": r, "lambda_ratio": inputs.lambda_ratio,
                     "delta1": d1, "delta2": delta2(inputs)})
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "lengthscale.csv")
    _write_text(csv_path, table_report(rows, ["r", "lambda_ratio", "delta1", "delta2"]))
    _write_manifest(args.out, "lengthscale", {"r": args.r, "h": h, "L": L},
                    [args.basis] + ([args.snapshots] if args.snapshots else []),
                    [csv_path], None, t0)
    return EXIT_OK


def _delta_for(args, basis, snap_set, r: int) -> tuple[float, str]:
    if args.delta is not None:
        return args.delta, EXPLICIT
    h = basis.grid.meshsize
    L = basis.grid.characteristic_length()
    if args.delta2:
        return delta2(LengthscaleInputs(h, L, basis.eigenvalues, r)), DELTA2
    if snap_set is None:
        raise CLIError("--delta1 needs --snapshots to evaluate the fluctuation")
    return compute_delta1(basis, snap_set, r), DELTA1


def cmd_run(args) -> int:
    t0 = time.time()
    basis = _load_basis(args.basis)
    snap_set = _load_snapshots(args.snapshots)
    r = args.r
    if not 1 <= r <= basis.R:
        raise CLIError(f"r = {r} outside [1, {basis.R}]")
    if args.ops:
        ops = read_operators(args.ops)
        if ops.r != r:
            raise CLIError(f"operator directory holds r = {ops.r}, requested {r}")
    else:
        if args.nu is None:
            raise CLIError("either --ops or --nu is required to build operators")
        ops = assemble(basis, r, args.nu)
    ke = CoefficientKE(basis, r, Mmat=ops.Mmat)
    a0 = project(basis, snap_set.snapshots[0], r)
    a1 = project(basis, snap_set.snapshots[1], r)
    ke_ref = max(kinetic_energy(s) for s in snap_set.snapshots)

    config = None
    if args.variant == "ml":
        value, tag = _delta_for(args, basis, snap_set, r)
        u_ml = args.u_ml if args.u_ml is not None else default_u_ml(basis.mean_field)
        config = MLConfig(alpha=args.alpha, U_ML=u_ml, delta=value, which_delta=tag)
    elif args.variant == "efr":
        value, tag = _delta_for(args, basis, snap_set, r)
        config = EFRConfig(gamma=args.gamma, delta=value, chi=args.chi,
                           which_delta=tag)

    traj = run(args.variant, ops, ke, config, a0, a1, args.dt, args.steps,
               ke_ref, ke_blowup_factor=args.blowup_factor)

    rows = [dict({"t": t, "KE": e},
                 **{f"a_{j + 1}": traj.coefficients[k, j] for j in range(r)})
            for k, (t, e) in enumerate(zip(traj.times, traj.ke))]
    columns = ["t", "KE"] + [f"a_{j + 1}" for j in range(r)]
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "trajectory.csv")
    _write_text(csv_path, table_report(rows, columns))
    _write_manifest(args.out, f"run {args.variant}",
                    {"r": r, "dt": args.dt, "steps": args.steps,
                     "blew_up": traj.blew_up, "blowup_time": traj.blowup_time,
                     "config": None if config is None else dataclasses.asdict(config)},
                    [args.basis, args.snapshots] + ([args.ops] if args.ops else []),
                    [csv_path], None, t0)
    return EXIT_OK


def _trajectory_snapshots(basis, csv_path: str):
    """Reconstruct a SnapshotSet from a trajectory CSV and a basis."""
    from .data_model import SnapshotSet
    from .pod import reconstruct
    if not os.path.isfile(csv_path):
        raise CLIError(f"trajectory file not found: {csv_path}")
    import csv as _csv
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        data = [[float(v) for v in row[:len(header)]] for row in reader]
    arr = np.asarray(data)
    r = len(header) - 2
    fields = tuple(reconstruct(basis, arr[k, 2:2 + r]) for k in range(arr.shape[0]))
    return SnapshotSet(basis.grid, arr[:, 0], fields)


def cmd_stats(args) -> int:
    t0 = time.time()
    inputs = [args.snapshots]
    snap_set = _load_snapshots(args.snapshots)
    if args.trajectory:
        if not args.basis:
            raise CLIError("--trajectory requires --basis")
        basis = _load_basis(args.basis)
        snap_set = _trajectory_snapshots(basis, args.trajectory)
        inputs += [args.trajectory, args.basis]
    report = compute_stats(snap_set, nu=args.nu)

    row = {"n_snapshots": snap_set.M,
           "ke_mean": float(np.mean(report.ke_series)),
           "ke_min": float(np.min(report.ke_series)),
           "ke_max": float(np.max(report.ke_series)),
           "u_tau": report.u_tau, "U_rms": report.U_rms, "R12": report.R12}
    d = snap_set.d
    for i in range(d):
        for j in range(i, d):
            row[f"R_{i + 1}{j + 1}"] = report.R_tensor[i, j]
    os.makedirs(args.out, exist_ok=True)
    outputs = [os.path.join(args.out, "report.csv")]
    _write_text(outputs[0], table_report([row], list(row)))

    if report.U_mean_profile is not None:
        from .stats import reynolds_stress_profile
        y, Rp = reynolds_stress_profile(snap_set)
        rows = []
        for k in range(y.size):
            urms_y = r12_y = None
            if report.u_tau and d == 3:
                urms_y = float(np.sqrt(abs(Rp[k, 0, 0] - np.trace(Rp[k]) / 3.0))
                               / report.u_tau)
            if report.u_tau and d >= 2:
                r12_y = float(Rp[k, 0, 1] / report.u_tau**2)
            rows.append({"y": y[k], "U_mean": report.U_mean_profile[k],
                         "U_RMS": urms_y, "R12": r12_y})
        prof_path = os.path.join(args.out, "profile.csv")
        _write_text(prof_path, table_report(rows, ["y", "U_mean", "U_RMS", "R12"]))
        outputs.append(prof_path)
    _write_manifest(args.out, "stats", {"nu": args.nu}, inputs, outputs, None, t0)
    return EXIT_OK


def _build_problems(args, r_values):
    basis = _load_basis(args.basis)
    snap_set = _load_snapshots(args.snapshots)
    overrides = _parse_kv_file(args.config) if args.config else {}
    if args.nu is not None:
        overrides["nu"] = args.nu
    cfg = testbed_config(**overrides)
    if cfg.grid != basis.grid:
        raise CLIError("generator config grid does not match the basis grid; "
                       "pass the config used for `generate` via --config")
    problems = {}
    for r in r_values:
        if not 1 <= r <= basis.R:
            raise CLIError(f"r = {r} outside [1, {basis.R}]")
        problems[r] = ROMProblem(cfg, snap_set, basis, r,
                                 dt=args.dt, n_steps=args.steps)
    return problems


def cmd_calibrate(args) -> int:
    t0 = time.time()
    r_values = _parse_r_list(args.r)
    which = DELTA1 if args.which_delta == "1" else DELTA2
    problems = _build_problems(args, r_values)
    fixed = args.chi if args.variant == "efr" else \
        next(iter(problems.values())).u_ml
    spec = SweepSpec(r_values=r_values, param_lo=args.lo, param_hi=args.hi,
                     tol_param=args.tol, variant=args.variant, fixed=fixed,
                     which_delta=which)

    os.makedirs(args.out, exist_ok=True)
    if args.optimal:
        reference = args.reference_ke
        if reference is None:
            snap_set = _load_snapshots(args.snapshots)
            reference = float(np.mean([kinetic_energy(s)
                                       for s in snap_set.snapshots]))
        objectives = {}
        for r, prob in problems.items():
            if args.variant == "ml":
                run_fn = lambda p, _pr=prob: _pr.run_ml(p, which)
            else:
                run_fn = lambda p, _pr=prob: _pr.run_efr(p, args.chi, which)
            objectives[r] = mean_ke_objective(run_fn, reference)
        optima = find_optimal(spec, objectives)
        rows = [{"r": r, "which_delta": which, "optimal": optima[r]}
                for r in r_values]
        columns = ["r", "which_delta", "optimal"]
    else:
        probes = {}
        for r, prob in problems.items():
            probes[r] = (prob.ml_stable(which) if args.variant == "ml"
                         else prob.efr_stable(which, args.chi))
        results = find_threshold(spec, probes)
        rows = [{"r": res.r, "which_delta": which, "threshold": res.threshold,
                 "verified": res.verified} for res in results]
        columns = ["r", "which_delta", "threshold", "verified"]

    csv_path = os.path.join(args.out, "calibrate.csv")
    _write_text(csv_path, table_report(rows, columns))
    _write_manifest(args.out, f"calibrate {args.variant}",
                    {"which_delta": which, "r": list(r_values), "lo": args.lo,
                     "hi": args.hi, "tol": args.tol, "chi": args.chi,
                     "optimal": args.optimal},
                    [args.basis, args.snapshots], [csv_path], None, t0)
    return EXIT_OK


def cmd_repro(args) -> int:
    """End-to-end desk-scale reproduction: lengthscale table, threshold and
    optimal-parameter tables for both closures and both deltas, KE curves,
    and synthetic-channel statistics."""
    t0 = time.time()
    out = args.out
    os.makedirs(out, exist_ok=True)
    outputs = []

    cfg, snap_set, basis = make_testbed(testbed_config(seed=args.seed))
    write_snapshots(snap_set, os.path.join(out, "snapshots"))
    write_basis(basis, os.path.join(out, "basis"))

    h = basis.grid.meshsize
    L = basis.grid.characteristic_length()
    r_values = args.r_values
    problems = {r: ROMProblem(cfg, snap_set, basis, r) for r in r_values}

    # analogue of the lengthscale-vs-r table
    rows = [{"r": r, "lambda_ratio":
             LengthscaleInputs(h, L, basis.eigenvalues, r).lambda_ratio,
             "delta1": problems[r].delta1, "delta2": problems[r].delta2}
            for r in r_values]
    path = os.path.join(out, "table_lengthscale.csv")
    _write_text(path, table_report(rows, ["r", "lambda_ratio", "delta1", "delta2"]))
    outputs.append(path)

    reference = float(np.mean([kinetic_energy(s) for s in snap_set.snapshots]))
    for variant, lo, hi, tol in (("ml", 0.0, 1e4, 1e-3), ("efr", 0.0, 1e4, 1e-4)):
        thr_rows, opt_rows = [], []
        for which in (DELTA1, DELTA2):
            spec = SweepSpec(r_values=r_values, param_lo=lo, param_hi=hi,
                             tol_param=tol, variant=variant,
                             fixed=EFR_CHI if variant == "efr" else
                             problems[r_values[0]].u_ml,
                             which_delta=which)
            probes = {r: (p.ml_stable(which) if variant == "ml"
                          else p.efr_stable(which)) for r, p in problems.items()}
            objectives = {r: mean_ke_objective(
                (lambda pr, w: lambda v: pr.run_ml(v, w))(p, which)
                if variant == "ml" else
                (lambda pr, w: lambda v: pr.run_efr(v, which_delta=w))(p, which),
                reference) for r, p in problems.items()}
            # a missing bracket (e.g. a ROM stable without any closure)
            # is reported as n/a, not a failure
            for r in r_values:
                single = dataclasses.replace(spec, r_values=(r,))
                try:
                    res = find_threshold(single, probes)[0]
                    thr_rows.append({"r": r, "which_delta": which,
                                     "threshold": res.threshold,
                                     "verified": res.verified})
                except BracketError:
                    thr_rows.append({"r": r, "which_delta": which,
                                     "threshold": None, "verified": None})
                try:
                    opt = find_optimal(single, objectives)[r]
                except BracketError:
                    opt = None
                opt_rows.append({"r": r, "which_delta": which, "optimal": opt})
        path = os.path.join(out, f"table_threshold_{variant}.csv")
        _write_text(path, table_report(
            thr_rows, ["r", "which_delta", "threshold", "verified"]))
        outputs.append(path)
        path = os.path.join(out, f"table_optimal_{variant}.csv")
        _write_text(path, table_report(opt_rows, ["r", "which_delta", "optimal"]))
        outputs.append(path)

    # KE curves at the middle truncation level: G, stabilized ML, stabilized EFR
    r_mid = r_values[len(r_values) // 2]
    prob = problems[r_mid]
    curves = {
        "g": prob.run_g(),
        "ml_delta1": prob.run_ml(2.0, DELTA1),
        "ml_delta2": prob.run_ml(2.0, DELTA2),
        "efr_delta1": prob.run_efr(1.0, which_delta=DELTA1),
        "efr_delta2": prob.run_efr(1.0, which_delta=DELTA2),
    }
    for name, traj in curves.items():
        rows = [{"t": t, "KE": e} for t, e in zip(traj.times, traj.ke)]
        path = os.path.join(out, f"ke_{name}.csv")
        _write_text(path, table_report(rows, ["t", "KE"]))
        outputs.append(path)

    # synthetic-channel statistics exercise the 3D branch
    chan = generate_synthetic_channel(SyntheticChannelConfig(seed=args.seed))
    report = compute_stats(chan, nu=1e-3)
    row = {"ke_mean": float(np.mean(report.ke_series)),
           "u_tau": report.u_tau, "U_rms": report.U_rms, "R12": report.R12}
    path = os.path.join(out, "channel_stats.csv")
    _write_text(path, table_report([row], list(row)))
    outputs.append(path)

    _write_manifest(out, "repro",
                    {"seed": args.seed, "r_values": list(r_values),
                     "dt": ROM_DT, "steps": ROM_STEPS, "chi": EFR_CHI},
                    [], outputs, args.seed, t0)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="romscale",
        description="POD/Galerkin reduced-order models with ROM lengthscales")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("generate", help="run a FOM or field generator")
    p.add_argument("kind", choices=("burgers", "channel"))
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("pod", help="build a POD basis from snapshots")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rmax", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_pod)

    p = sub.add_parser("lengthscale", help="delta1/delta2 table over r")
    p.add_argument("--basis", required=True)
    p.add_argument("--snapshots")
    p.add_argument("--r", required=True, help="comma-separated r values")
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lengthscale)

    p = sub.add_parser("run", help="integrate a ROM variant")
    p.add_argument("--variant", choices=("g", "ml", "efr"), required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--snapshots", required=True)
    p.add_argument("--ops", help="precomputed operator directory")
    p.add_argument("--nu", type=float, help="viscosity when assembling operators")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--u-ml", dest="u_ml", type=float, default=None)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--chi", type=float, default=6e-3)
    p.add_argument("--blowup-factor", dest="blowup_factor", type=float, default=10.0)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--delta1", action="store_true")
    group.add_argument("--delta2", action="store_true")
    group.add_argument("--delta", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("stats", help="flow statistics report")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--trajectory", help="trajectory CSV to reconstruct and analyze")
    p.add_argument("--basis")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("calibrate", help="threshold / optimal parameter search")
    p.add_argument("--variant", choices=("ml", "efr"), required=True)
    p.add_argument("--which-delta", dest="which_delta", choices=("1", "2"),
                   required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--snapshots", required=True)
    p.add_argument("--r", required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--tol", type=float, required=True)
    p.add_argument("--config", help="generator config file used for the snapshots")
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--dt", type=float, default=ROM_DT)
    p.add_argument("--steps", type=int, default=ROM_STEPS)
    p.add_argument("--chi", type=float, default=EFR_CHI)
    p.add_argument("--optimal", action="store_true",
                   help="search the optimal parameter instead of the threshold")
    p.add_argument("--reference-ke", dest="reference_ke", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("repro", help="end-to-end desk-scale reproduction")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--r-values", dest="r_values", type=_parse_r_list,
                   default=TESTBED_R_VALUES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_repro)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the contract reserves 1 for them
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (CLIError, ConfigurationError, SnapshotIOError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InstabilityError, StepFailure, FilterFailure, BracketError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
