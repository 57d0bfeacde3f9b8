"""Command-line front end.

Exit codes: 0 success, 1 invariant or inequality violation, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constructors as cons
from .coordinate_oracle import build_chart_form, integrate_return, roundtrip_audit, trajectory_csv
from .measures import (
    CertificateError,
    TheoremViolation,
    certificate_check,
    contact_volume,
    contractible_check,
    theorem_check,
)
from .orbits import action_spectrum, classify, contractible_systole, enumerate_closed_orbits, orbits_to_csv, systole
from .profile_core import ProfileError, dumps, load, validate
from .revolution import (
    MetricError,
    RevolutionMetric,
    SineSeries,
    clairaut_data,
    closed_geodesics,
    finsler_corollary_check,
    geodesic_period_map,
    integrate_geodesic,
    load_metric,
    round_sphere,
    shoot_closed_geodesic,
)

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2
SWEEP_CSV_COLUMNS = ("e", "eta", "a", "systole", "volume", "ratio")


@dataclass
class RunConfig:
    command: str
    out: Path | None = None
    fmt: str = "json"
    q_max: int = 12
    grid: int = 4096
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.q_max < 1 or self.grid < 2 or not self.tol > 0 or self.seed < 0:
            raise ValueError("numeric options must be positive")


class InputError(Exception):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SYSTOLICA_THREADS", "1")))
    except ValueError as exc:
        raise InputError("SYSTOLICA_THREADS must be an integer") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _emit(cfg: RunConfig, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)


def _dump(data) -> str:
    return json.dumps(_jsonable(data), indent=2, sort_keys=True)


def _load_profile(path):
    try:
        return load(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(str(exc)) from exc


# --- commands ---------------------------------------------------------------

def cmd_construct(args, cfg: RunConfig) -> int:
    fam = args.family
    if fam == "zoll":
        prof = cons.zoll_profile(args.e, args.T)
    elif fam == "besse":
        prof = cons.besse_quotient_profile(args.e, args.scale)
    elif fam == "eta":
        prof = cons.eta_family_profile(cons.EtaFamilyParams(args.e, args.eta))
    elif fam == "ellipsoid":
        prof = cons.ellipsoid_profile(args.a1, args.a2)
    else:
        prof = cons.random_admissible_profile(cons.RandomProfileParams(args.e, seed=cfg.seed))
    _emit(cfg, dumps(prof))
    return EXIT_OK


def cmd_validate(args, cfg: RunConfig) -> int:
    prof = _load_profile(args.path)
    report = validate(prof, cfg.grid)
    _emit(cfg, _dump(report.to_dict()) if cfg.fmt == "json" else str(report))
    return EXIT_OK if report.ok else EXIT_VIOLATION


def analyze_profile(prof, cfg: RunConfig) -> tuple[dict, int]:
    report = validate(prof, cfg.grid)
    if not report.ok:
        return {"validation": report.to_dict()}, EXIT_VIOLATION
    sres = systole(prof, cfg.grid)
    cres = contractible_systole(prof, cfg.grid)
    out = {
        "e": prof.e,
        "systole": sres.to_dict(),
        "contractible_systole": cres.to_dict(),
        "volume": contact_volume(prof),
        "classification": classify(prof).value,
        "action_spectrum": [[period, info] for period, info in action_spectrum(prof, cfg.q_max, cfg.grid)],
        "orbits": [o.__dict__ for o in enumerate_closed_orbits(prof, cfg.q_max, cfg.grid)],
    }
    code = EXIT_OK
    if prof.e > 0:
        try:
            out["theorem"] = theorem_check(prof, cfg.tol).to_dict()
            out["certificate"] = certificate_check(prof, cfg.grid, cfg.tol).to_dict()
        except (TheoremViolation, CertificateError) as exc:
            out["violation"] = str(exc)
            code = EXIT_VIOLATION
    out["ratio"] = out["systole"]["value"] ** 2 / out["volume"]
    out["contractible"] = contractible_check(prof).to_dict()
    return out, code


def cmd_analyze(args, cfg: RunConfig) -> int:
    prof = _load_profile(args.path)
    out, code = analyze_profile(prof, cfg)
    if cfg.fmt == "csv":
        if "orbits" not in out:
            _emit(cfg, _dump(out))
        else:
            _emit(cfg, orbits_to_csv(enumerate_closed_orbits(prof, cfg.q_max, cfg.grid)))
    else:
        _emit(cfg, _dump(out))
    return code


def sweep_eta(e: int, etas) -> list[dict]:
    rows = []
    for eta in etas:
        prof = cons.eta_family_profile(cons.EtaFamilyParams(e, eta))
        s = systole(prof).value
        vol = contact_volume(prof)
        rows.append({"e": e, "eta": eta, "a": 0.5 - e * eta / 2, "systole": s, "volume": vol, "ratio": s * s / vol})
    return rows


def cmd_sweep_eta(args, cfg: RunConfig) -> int:
    e = args.e
    if e <= 2:
        raise InputError("the eta family needs e > 2")
    etas = args.eta or [0.1 / e, 0.05 / e, 0.01 / e]
    rows = sweep_eta(e, etas)
    if cfg.fmt == "csv":
        lines = [",".join(SWEEP_CSV_COLUMNS)]
        lines += [",".join(repr(float(r[c])) if c != "e" else str(r[c]) for c in SWEEP_CSV_COLUMNS) for r in rows]
        _emit(cfg, "\n".join(lines))
    else:
        _emit(cfg, _dump(rows))
    return EXIT_OK if all(r["ratio"] < 0.5 for r in rows) else EXIT_VIOLATION


def _audit_one(job):
    e, seed, roundtrip_samples, grid, tol = job
    rec = {"e": e, "seed": seed}
    try:
        prof = cons.random_admissible_profile(cons.RandomProfileParams(e, seed=seed))
    except cons.GenerationError as exc:
        rec["generation_error"] = str(exc)
        return rec
    try:
        rec["margin"] = theorem_check(prof, tol).margin
        rec["certificate_margin"] = certificate_check(prof, grid, tol).worst_pointwise_margin
    except (TheoremViolation, CertificateError) as exc:
        rec["violation"] = str(exc)
    if roundtrip_samples:
        rt = roundtrip_audit(prof, roundtrip_samples)
        rec["roundtrip_ok"] = rt.passed()
        rec["roundtrip_max_rel_error"] = max(rt.max_rel_return_time_error, rt.max_rel_rotation_error)
    return rec


def run_audit(e_list, count: int, seed0: int, roundtrip_every: int = 50, roundtrip_samples: int = 10,
              grid: int = 1024, tol: float = 1e-9) -> tuple[dict, int]:
    jobs = [(e, seed0 + i, roundtrip_samples if roundtrip_every and i % roundtrip_every == 0 else 0, grid, tol)
            for e in sorted(e_list) for i in range(count)]
    workers = _threads()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            recs = list(pool.map(_audit_one, jobs, chunksize=8))
    else:
        recs = [_audit_one(j) for j in jobs]
    summary, failed = {}, False
    for e in sorted(e_list):
        mine = [r for r in recs if r["e"] == e]
        if not mine:
            continue
        margins = [r["margin"] for r in mine if "margin" in r]
        certs = [r["certificate_margin"] for r in mine if "certificate_margin" in r]
        bad = [r for r in mine if "violation" in r or "generation_error" in r or r.get("roundtrip_ok") is False]
        if e > 2 and any(m <= 0 for m in margins):
            bad.append({"seed": None, "violation": "non-strict margin"})
        failed = failed or bool(bad)
        summary[str(e)] = {
            "count": len(mine),
            "min_margin": min(margins) if margins else None,
            "min_certificate_margin": min(certs) if certs else None,
            "roundtrip_checked": sum(1 for r in mine if "roundtrip_ok" in r),
            "failures": [{k: r[k] for k in r if k in ("seed", "violation", "generation_error")} for r in bad],
        }
    return summary, EXIT_VIOLATION if failed else EXIT_OK


def cmd_audit(args, cfg: RunConfig) -> int:
    e_list = [int(x) for x in args.e_list.split(",") if x.strip()]
    if any(e == 0 for e in e_list) or args.count < 0:
        raise InputError("e values must be nonzero and count nonnegative")
    if any(e < 0 for e in e_list):
        raise InputError("the random audit covers positive Euler numbers")
    summary, code = run_audit(e_list, args.count, cfg.seed, args.roundtrip_every, grid=cfg.grid, tol=cfg.tol)
    _emit(cfg, _dump(summary))
    return code


def _preset_metric(name: str) -> RevolutionMetric:
    if name == "round":
        return round_sphere()
    # rho = sin x (1 + 0.1 sin^2 x), written as a sine series
    return RevolutionMetric(math.pi, SineSeries(math.pi, (1.075, 0.0, -0.025)))


def revolution_report(metric: RevolutionMetric, cfg: RunConfig) -> tuple[dict, int]:
    try:
        rep = finsler_corollary_check(metric, cfg.q_max, tol=cfg.tol)
        code = EXIT_OK
    except TheoremViolation as exc:
        return {"violation": str(exc)}, EXIT_VIOLATION
    geo = closed_geodesics(metric, cfg.q_max)
    checks = []
    for g in geo:
        if g.kind == "level":
            sh = shoot_closed_geodesic(metric, g.p, g.q, g.c)
            checks.append({"p": g.p, "q": g.q, "quadrature_length": g.length, "ode_length": sh.length,
                           "rel_diff": abs(sh.length / g.length - 1)})
    _, rm = metric.equator()
    for c in (0.25 * rm, 0.5 * rm, 0.75 * rm):
        d = clairaut_data(metric, c)
        s_len, th = geodesic_period_map(metric, c)
        checks.append({"c": c, "quadrature_length": d.arc_length, "ode_length": s_len,
                       "rel_diff": abs(s_len / d.arc_length - 1), "theta_rel_diff": abs(th / d.delta_theta - 1)})
    return {"report": rep.to_dict(), "closed_geodesics": [g.to_dict() for g in geo], "ode_cross_check": checks}, code


def cmd_revolution(args, cfg: RunConfig) -> int:
    if args.path is None and args.preset is None:
        raise InputError("give a metric file or --preset")
    metric = load_metric(args.path) if args.path else _preset_metric(args.preset)
    out, code = revolution_report(metric, cfg)
    _emit(cfg, _dump(out))
    return code


def cmd_trajectory(args, cfg: RunConfig) -> int:
    prof = _load_profile(args.path)
    form = build_chart_form(prof)
    smp = integrate_return(form, args.k, record=True)
    _emit(cfg, trajectory_csv(smp) if cfg.fmt == "csv" else _dump(smp.to_dict()))
    return EXIT_OK


def cmd_geodesic(args, cfg: RunConfig) -> int:
    metric = load_metric(args.path) if args.path else _preset_metric(args.preset or "round")
    tr = integrate_geodesic(metric, (args.x, 0.0, args.phi), args.length, samples=args.samples)
    if cfg.fmt == "csv":
        _emit(cfg, tr.to_csv())
    else:
        drift = float(np.max(np.abs(tr.clairaut - tr.clairaut[0])))
        _emit(cfg, _dump({"length": args.length, "clairaut": float(tr.clairaut[0]), "clairaut_drift": drift}))
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--q-max", type=int, default=12, help="largest denominator searched")
    common.add_argument("--grid", type=int, default=4096, help="grid density for scans")
    common.add_argument("--tol", type=float, default=1e-9, help="violation tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", type=Path, default=None, help="write here instead of stdout")

    ap = argparse.ArgumentParser(prog="systolica", description="Systolic analysis of circle-invariant contact forms.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", parents=[common], help="write a profile file")
    p.add_argument("family", choices=("zoll", "besse", "eta", "ellipsoid", "random"))
    p.add_argument("--e", type=int, default=2)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--a1", type=float, default=1.0)
    p.add_argument("--a2", type=float, default=2.0)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("validate", parents=[common], help="check profile invariants")
    p.add_argument("path", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", parents=[common], help="systoles, volume, inequality and orbits")
    p.add_argument("path", type=Path)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep-eta", parents=[common], help="ratios along the near-maximising family")
    p.add_argument("--e", type=int, default=3)
    p.add_argument("--eta", type=float, nargs="*", default=None)
    p.set_defaults(func=cmd_sweep_eta)

    p = sub.add_parser("audit", parents=[common], help="inequality audit on random profiles")
    p.add_argument("--e-list", default="1,2,3,5")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--roundtrip-every", type=int, default=50, help="0 disables the ODE round trip")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("revolution", parents=[common], help="closed geodesics of a metric of revolution")
    p.add_argument("path", type=Path, nargs="?")
    p.add_argument("--preset", choices=("round", "perturbed"))
    p.set_defaults(func=cmd_revolution, q_max=4)

    p = sub.add_parser("trajectory", parents=[common], help="Reeb trajectory at one level")
    p.add_argument("path", type=Path)
    p.add_argument("--k", type=float, required=True)
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("geodesic", parents=[common], help="geodesic trajectory export")
    p.add_argument("path", type=Path, nargs="?")
    p.add_argument("--preset", choices=("round", "perturbed"))
    p.add_argument("--x", type=float, default=math.pi / 2)
    p.add_argument("--phi", type=float, default=0.3)
    p.add_argument("--length", type=float, default=100.0)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_geodesic)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = RunConfig(args.command, args.out, args.format, args.q_max, args.grid, args.tol, args.seed)
        return args.func(args, cfg)
    except (InputError, ProfileError, MetricError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
