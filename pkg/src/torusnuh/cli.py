"""Command line entry point: torusnuh <command> [options]."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .certificate import Certificate, Verdict, _plain, exit_code, merge
from .combinatorics import (certify_J_positive, certify_p_bounds, coefficient_table,
                            family_thresholds, table_rows)
from .config import ConfigError, RunConfig, load_config
from .cones import c_chi_lower, check_cone_estimates, count_vertical, normalize
from .curves import crossing_experiment, family_cone_check
from .lattice import (SingularMatrixError, admissible_alpha, classify_matrix, cone_norm_constants,
                      preimage_lattice)
from .lyapunov import domination_detector, forward_exponent, nuh_verdict
from .profile import slope_bounds_report
from .torus_map import MapSpec, family_map, preimage_distribution_check, triple_critical_check


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows, cfg: RunConfig) -> None:
    """CSV with a provenance comment block; no timestamps so reruns are byte-identical."""
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.hash()}\n# seed={cfg.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue())


def write_json(path: Path, obj, cfg: RunConfig) -> None:
    payload = {"provenance": cfg.provenance(), "report": _plain(obj)}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------

def cmd_divisors(cfg: RunConfig, out: Path) -> int:
    E = cfg.E
    if E.det == 0:
        raise SingularMatrixError("matrix is singular")
    kind, spectrum = classify_matrix(E)
    lat = preimage_lattice(E)
    status = "rejected: homothety" if kind == "homothety" else "ok"
    row = [E.tau1, E.tau2, E.degree, kind, spectrum, lat.x_spacing_regular, status]
    header = ["tau1", "tau2", "d", "kind", "spectrum", "regular_lattice", "status"]
    write_csv(out / "divisors.csv", header, [row], cfg)
    print(", ".join(f"{h}={_fmt(v)}" for h, v in zip(header, row)))
    return 2 if kind == "homothety" else 0


TRIPLE_STAGE = 5


def certify(cfg: RunConfig, t: float) -> Certificate:
    """Run every certification stage at one t and aggregate."""
    E = cfg.E
    stages = [admissible_alpha(E, cfg.alpha)]
    try:
        cc = cone_norm_constants(E, cfg.alpha)
        stages.append(Certificate(Verdict.PROVEN, "cone norm constants",
                                  margins={"e_v": cc.e_v, "e_h": cc.e_h}))
    except ValueError as exc:
        stages.append(Certificate.refuted("cone norm constants", {"error": str(exc)}))
    spec = cfg.spec(t)
    stages.append(slope_bounds_report(spec.profile).certificate)
    rng = np.random.default_rng(cfg.seed)
    stages.append(preimage_distribution_check(spec, rng.random((cfg.n_samples, 2))))
    try:
        stages.append(check_cone_estimates(spec, cfg.alpha, cfg.n_samples, cfg.seed, cfg.n_dirs))
    except ValueError as exc:
        stages.append(Certificate.unknown("backward cone estimates", str(exc)))
    stages.append(triple_critical_check(spec, cfg.max_depth, cfg.time_budget))
    counts = []
    for cls in ("vertical", "horizontal"):
        for _ in range(100):
            p = rng.random(2)
            ang = rng.uniform(-1, 1)
            u = (ang / cfg.alpha, 1.0) if cls == "vertical" else (1.0, ang * cfg.alpha)
            counts.append(count_vertical(spec, p, normalize(u), cfg.alpha).certificate)
    stages.append(merge(counts, "vertical pullback counting floors"))
    return merge(stages, f"certification pipeline at t={t}", cfg.provenance())


def cmd_certify(cfg: RunConfig, out: Path) -> int:
    cert = certify(cfg, cfg.t)
    (out / "certificate.json").write_text(cert.to_json() + "\n")
    for c in cert.children:
        print(f"{str(c.verdict):8s} {c.claim}")
    print(f"aggregate: {cert.verdict}")
    return exit_code(cert)


def cmd_scan_t(cfg: RunConfig, out: Path) -> int:
    J = coefficient_table(cfg.E.tau1, cfg.E.tau2).J
    rows, certs = [], []
    for t in cfg.t_grid:
        cert = certify(cfg, t)
        certs.append(cert)
        triple = cert.children[TRIPLE_STAGE]
        chi = c_chi_lower(cfg.spec(t), cfg.chi_depth, cfg.chi_points, cfg.n_dirs, cfg.alpha,
                          cfg.budget)
        lt = math.log(t)
        rows.append([t, lt, str(cert.verdict), str(triple.verdict),
                     chi.value, J, float(J) * lt])
        print(f"t={t:g}: {cert.verdict}, C_chi lower = {chi.value:.6g}")
    header = ["t", "log_t", "verdict", "triple_critical", "c_chi_lower", "J", "J_log_t"]
    write_csv(out / "scan_t.csv", header, rows, cfg)
    agg = merge(certs, "t scan", cfg.provenance())
    (out / "scan_t.json").write_text(agg.to_json() + "\n")
    return exit_code(agg)


def cmd_exponents(cfg: RunConfig, out: Path, family: bool = False) -> int:
    spec = family_map(cfg.family_m, cfg.family_k, cfg.family_t) if family else cfg.spec()
    rng = np.random.default_rng(cfg.seed)
    pts = rng.random((cfg.n_points, 2))
    est = forward_exponent(spec, pts, cfg.n_steps)
    rows = [[i, x, y, cp, cm, cp + cm, se] for i, ((x, y), cp, cm, se)
            in enumerate(zip(pts, est.chi_plus, est.chi_minus, est.stderr))]
    write_csv(out / "exponents.csv",
              ["index", "x", "y", "chi_plus", "chi_minus", "sum", "stderr"], rows, cfg)
    eps = 3 * est.stderr
    summary = {"t": spec.t, "N": cfg.n_steps, "log_d": math.log(spec.d),
               "nuh_fraction": float(((est.chi_minus < -eps) & (est.chi_plus > eps)).mean()),
               "max_sum_residual": est.log_d_residual}
    counts, edges = np.histogram(est.chi_plus, bins=20)
    summary["chi_plus_histogram"] = {"counts": counts, "edges": edges}
    if family:
        summary["family"] = nuh_verdict(spec, cfg.n_points, min(cfg.n_steps, 10_000), cfg.seed,
                                        cfg.delta0)
    write_json(out / "exponents.json", summary, cfg)
    print(f"NUH fraction {summary['nuh_fraction']:.3f}, max |sum - log d| {est.log_d_residual:.2e}")
    return 0


def cmd_combinatorics(cfg: RunConfig, out: Path) -> int:
    rows = list(table_rows(cfg.tau2_max, cfg.E.tau1))
    header = list(rows[0].keys()) if rows else []
    write_csv(out / "combinatorics.csv", header, [list(r.values()) for r in rows], cfg)
    certs = [certify_p_bounds(cfg.tau2_max), certify_J_positive(cfg.tau2_max)]
    agg = merge(certs, f"exact coefficient bounds up to tau2={cfg.tau2_max}", cfg.provenance())
    th = family_thresholds(cfg.family_m, cfg.delta0)
    report = {"certificate": agg.to_dict(), "family_thresholds": th.__dict__}
    write_json(out / "combinatorics.json", report, cfg)
    print(f"{len(rows)} rows, certificates: {agg.verdict}")
    return exit_code(agg)


def cmd_curves(cfg: RunConfig, out: Path) -> int:
    spec = family_map(cfg.family_m, cfg.family_k, cfg.family_t)
    cone = family_cone_check(spec, min(cfg.n_samples, 1000), cfg.n_curves, cfg.seed)
    exp = crossing_experiment(spec, cfg.n_seeds, cfg.seed)
    report = {"cone_check": cone.to_dict(),
              "crossing": {k: v for k, v in exp.items() if k != "trials"},
              "trials": exp["trials"]}
    write_json(out / "curves.json", report, cfg)
    print(f"cone check: {cone.verdict}; crossing success fraction {exp['success_fraction']:.2f}")
    return exit_code(cone)


def cmd_domination(cfg: RunConfig, out: Path) -> int:
    rep = domination_detector(cfg.spec(), seed=cfg.seed)
    write_json(out / "domination.json", rep, cfg)
    print(f"invariant cone family found: {rep['detected']}")
    return 0


COMMANDS = {"divisors": cmd_divisors, "certify": cmd_certify, "scan-t": cmd_scan_t,
            "exponents": cmd_exponents, "combinatorics": cmd_combinatorics, "curves": cmd_curves,
            "domination": cmd_domination}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="torusnuh", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat key = value config file")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--budget", type=int)
    ap.add_argument("--t-grid", help="comma separated t values")
    ap.add_argument("--tau2-max", type=int)
    ap.add_argument("--family", action="store_true",
                    help="exponents: use the [[m, k(m-1)], [0, 1]] family map")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        grid = tuple(float(v) for v in args.t_grid.split(",")) if args.t_grid else None
        cfg = cfg.with_overrides(seed=args.seed, budget=args.budget, t_grid=grid,
                                 tau2_max=args.tau2_max)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "exponents":
            return cmd_exponents(cfg, out, args.family)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, SingularMatrixError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
