"""Command-line front end: ``blcirk <command> ...``.

Exit codes: 0 success, 1 invalid input, 2 a numerical certificate failed.
Prolate bases are cached as JSON under $BLCIRK_CACHE when it is set.
"""

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import basis, gravity, orbit, prolate, quadrature, stability, tableau
from .solver import DivergenceError, ScheduleStep

EXIT_OK, EXIT_INPUT, EXIT_CERT = 0, 1, 2

ROUTES = {
    "collocation": "collocation_split",
    "exact-pswf": "exact_pswf",
    "approx-pswf": "approx_pswf",
    "gauss-legendre": "gauss_legendre",
}


class InputError(Exception):
    pass


class CertificateError(Exception):
    pass


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _positive(name, x):
    if not (math.isfinite(x) and x > 0):
        raise InputError(f"{name} must be a positive number, got {x}")
    return x


def cached_prolate(c, J, precision="extended"):
    root = os.environ.get("BLCIRK_CACHE")
    if not root:
        return prolate.build_prolate_basis(c, J, precision)
    path = Path(root) / f"prolate_c{c!r}_J{J}_{precision}.json"
    if path.exists():
        return prolate.basis_from_json(path.read_text())
    pb = prolate.build_prolate_basis(c, J, precision)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(prolate.basis_to_json(pb))
    return pb


# -- quad -----------------------------------------------------------------------

def _ratio_rows(eps_list, Ms):
    rows = []
    for M in Ms:
        x, _ = quadrature.gauss_legendre(M)
        row = {"M": M, "gauss_legendre_ratio": quadrature.node_ratio(x)}
        for eps in eps_list:
            cq = quadrature.bandlimit_for_nodes(M, eps, "quadrature")
            rule = quadrature.rule_from_nodes_count(cq, M)
            row[f"ratio_eps{eps:.3g}"] = quadrature.node_ratio(rule)
            row[f"alpha_eps{eps:.3g}"] = quadrature.oversampling_factor(rule)
        rows.append(row)
    return rows


def cmd_quad(args):
    c = _positive("--c", args.c)
    eps = _positive("--eps", args.eps)
    rule = quadrature.build_quadrature(c, eps, M=args.M)
    _write(args.out, quadrature.rule_to_json(rule))
    print(f"M = {rule.M}, verified error {rule.verified_error:.3e}, "
          f"sum w = {rule.weights.sum():.15f}, ratio {quadrature.node_ratio(rule):.4f}, "
          f"alpha {quadrature.oversampling_factor(rule):.4f}", file=sys.stderr)
    if rule.verified_error > max(eps, quadrature.EPS_FLOOR):
        raise CertificateError(f"quadrature residual {rule.verified_error:.3e} exceeds {eps:g}")
    if args.sweep:
        eps_list = [_positive("--sweep", float(e)) for e in args.sweep.split(",")]
        Ms = [int(m) for m in args.sweep_m.split(",")]
        rows = _ratio_rows(eps_list, Ms)
        with open(args.csv, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
            wr.writeheader()
            wr.writerows(rows)
    return EXIT_OK


# -- tableau --------------------------------------------------------------------

def build_tableau(c, eps, method, M=None):
    """Build one route's tableau; the rule is the 2c rule for ε²."""
    if method == "gauss-legendre":
        if M is None:
            raise InputError("--M is required for gauss-legendre")
        return tableau.build_tableau_gauss_legendre(M)
    rule = quadrature.build_quadrature(2 * c, eps * eps, M=M)
    if method == "collocation":
        return tableau.build_tableau_collocation(rule, c, eps, check=False)
    if method == "exact-pswf":
        pb = cached_prolate(c, rule.M + 1, "extended")
        return tableau.build_tableau_exact_pswf(pb, basis.build_basis_exact(pb, rule), eps)
    if method == "approx-pswf":
        return tableau.build_tableau_approx_pswf(
            basis.build_basis_approx(rule, c, eigen_route=False), eps)
    raise InputError(f"unknown method {method!r}")


def certificate_failures(tab, eps):
    cert = tab.certificates
    bad = []
    if cert["symplectic_residual"] > tableau.SYMPLECTIC_TOL * cert["symplectic_scale"]:
        bad.append(f"symplectic residual {cert['symplectic_residual']:.3e}")
    if tab.method != "gauss_legendre" and cert["collocation_residual"] > eps:
        bad.append(f"collocation residual {cert['collocation_residual']:.3e} > {eps:g}")
    if not cert["min_eig_real_part"] > 0:
        bad.append(f"eigenvalue with real part {cert['min_eig_real_part']:.3e}")
    return bad


def cmd_tableau(args):
    c = _positive("--c", args.c)
    eps = _positive("--eps", args.eps)
    tab = build_tableau(c, eps, args.method, args.M)
    if tab.method == "gauss_legendre":
        tab.certificates.update(tableau.certify(tab))
    for k, v in sorted(tab.certificates.items()):
        print(f"{k}: {v:.3e}", file=sys.stderr)
    bad = certificate_failures(tab, eps)
    if bad:
        raise CertificateError("not written: " + "; ".join(bad))
    _write(args.out, tableau.tableau_to_json(tab))
    print(f"{tab.method}: {tab.M} stages", file=sys.stderr)
    return EXIT_OK


def cmd_diff_tableau(args):
    a = tableau.tableau_from_json(_read(args.a))
    b = tableau.tableau_from_json(_read(args.b))
    if a.M != b.M:
        raise InputError(f"stage counts differ ({a.M} vs {b.M})")
    if a.interval != b.interval:
        a, b = tableau.rescale_to_unit(a), tableau.rescale_to_unit(b)
    d = tableau.max_difference(a, b)
    tol = args.tol if args.tol is not None else 10 * max(a.eps, b.eps)
    print(json.dumps({"max_difference": d, "tolerance": tol, "agree": d <= tol}))
    return EXIT_OK if d <= tol else EXIT_CERT


# -- stability ------------------------------------------------------------------

def cmd_stability(args):
    tab = tableau.tableau_from_json(_read(args.tableau))
    c = tab.c if args.c is None else _positive("--c", args.c)
    if math.isnan(c):
        raise InputError("tableau carries no bandlimit; pass --c")
    rep = stability.check_a_stability(tab, grid=args.grid, c=c)
    out = json.loads(stability.report_to_json(rep))
    if args.compare_gl:
        gl = stability.check_a_stability(tableau.build_tableau_gauss_legendre(tab.M),
                                         grid=args.grid, c=c)
        out["gauss_legendre"] = json.loads(stability.report_to_json(gl))
    _write(args.out, json.dumps(out, indent=1))
    if args.csv:
        _write(args.csv, stability.sweep_to_csv(rep))
    print(f"min Re(eig) {rep.min_real_part:.4e}, sweep max ||r|-1| {rep.max_sweep_defect:.3e}, "
          f"max zero residual {rep.max_zero_residual:.3e}", file=sys.stderr)
    if not rep.a_stable_evidence:
        raise CertificateError("A-stability evidence not established")
    return EXIT_OK


# -- propagate ------------------------------------------------------------------

_BUILTIN = {
    "builtin:egm96-degree2": lambda: gravity.load_coeffs(gravity.EGM96_DEGREE2),
    "builtin:synthetic-degree8": lambda: gravity.synthetic_model(8),
}


def load_model(spec, base):
    if spec in _BUILTIN:
        return _BUILTIN[spec]()
    path = Path(spec)
    if not path.is_absolute():
        path = base / path
    try:
        return gravity.load_coeffs(_read(path))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def _schedule(spec):
    if spec in (None, "two-fidelity"):
        return orbit.two_fidelity_schedule()
    if spec == "full":
        return [ScheduleStep("full", None)]
    try:
        return [ScheduleStep(**s) for s in spec]
    except TypeError as exc:
        raise InputError(f"bad schedule entry: {exc}") from None


def parse_run_config(text, base=Path(".")):
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from None
    for key in ("state0", "t_span", "n_intervals", "model_file", "N_full"):
        if key not in cfg:
            raise InputError(f"config lacks {key!r}")
    st = cfg["state0"]
    run = {
        "r0": list(map(float, st["r"])), "v0": list(map(float, st["v"])),
        "t_span": [float(t) for t in cfg["t_span"]],
        "n_intervals": int(cfg["n_intervals"]),
        "N_full": int(cfg["N_full"]), "N_low": int(cfg.get("N_low", 2)),
        "interior": bool(cfg.get("interior", False)),
    }
    for key in ("M", "eps", "tol", "reference_step"):
        if key in cfg:
            run[key] = cfg[key]
    tab = None
    if cfg.get("tableau_file"):
        p = Path(cfg["tableau_file"])
        tab = tableau.tableau_from_json(_read(p if p.is_absolute() else base / p))
    model = load_model(cfg["model_file"], base)
    return run, model, tab, _schedule(cfg.get("schedule"))


def cmd_propagate(args):
    run, model, tab, sched = parse_run_config(_read(args.config), Path(args.config).parent)
    try:
        rep = orbit.run_paper_experiment(model, run, tab=tab, schedule=sched,
                                         reference=not args.no_reference)
    except DivergenceError as exc:
        raise CertificateError(str(exc)) from None
    manifest = {
        "final_r": rep.final.r.tolist(), "final_v": rep.final.v.tolist(), "t": rep.final.t,
        "counters": rep.counters, "n_nodes": rep.n_nodes, "sweeps": rep.sweeps,
        "max_deviation_km": rep.max_deviation, "relative_deviation": rep.relative_deviation,
        "reference_error_km": rep.reference_error, "wall_time_s": rep.wall_time,
    }
    # skipped measurements are null rather than the non-standard NaN token
    manifest = {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in manifest.items()}
    if run["N_full"] == 0:
        cfg = {**orbit.ORBIT_CONFIG, **run}
        k = orbit.kepler_oracle(model.mu, orbit.OrbitState(run["r0"], run["v0"], cfg["t_span"][0]),
                                cfg["t_span"][1])
        manifest["kepler_error_km"] = float(np.linalg.norm(rep.final.r - k.r))
        print(f"Kepler oracle error {manifest['kepler_error_km']:.3e} km", file=sys.stderr)
    _write(args.out, json.dumps(manifest, indent=1))
    if args.csv:
        tr = rep.trajectory
        buf = ["t,x,y,z,vx,vy,vz"]
        for t, u in zip(tr.interval_times, tr.interval_states):
            buf.append(",".join(repr(float(a)) for a in (t, *u)))
        _write(args.csv, "\n".join(buf))
    print(f"counts {rep.counters}; deviation {rep.max_deviation:.3e} km "
          f"({rep.relative_deviation:.3e} relative)", file=sys.stderr)
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="blcirk", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quad", help="quadrature for exponentials up to bandlimit c")
    q.add_argument("--c", type=float, required=True)
    q.add_argument("--eps", type=float, required=True)
    q.add_argument("--M", type=int)
    q.add_argument("--out", default="-")
    q.add_argument("--sweep", help="comma-separated accuracies for the ratio table")
    q.add_argument("--sweep-m", default="16,24,32,48,64,96,128")
    q.add_argument("--csv", default="quad_sweep.csv")
    q.set_defaults(func=cmd_quad)

    t = sub.add_parser("tableau", help="build a certified BLC-IRK tableau")
    t.add_argument("--c", type=float, required=True, help="interpolation bandlimit")
    t.add_argument("--eps", type=float, required=True)
    t.add_argument("--method", choices=sorted(ROUTES), default="collocation")
    t.add_argument("--M", type=int, help="node count (default: smallest meeting eps)")
    t.add_argument("--precision", choices=("standard", "extended"), default="extended",
                   help="ignored: tableau construction always uses extended precision")
    t.add_argument("--out", default="-")
    t.set_defaults(func=cmd_tableau)

    d = sub.add_parser("diff-tableau", help="max entrywise difference of two tableaus")
    d.add_argument("a")
    d.add_argument("b")
    d.add_argument("--tol", type=float)
    d.set_defaults(func=cmd_diff_tableau)

    s = sub.add_parser("stability", help="A-stability evidence for a tableau file")
    s.add_argument("tableau")
    s.add_argument("--out", default="-")
    s.add_argument("--csv")
    s.add_argument("--grid", type=int, default=4096)
    s.add_argument("--c", type=float, help="sweep bandlimit (default: the tableau's)")
    s.add_argument("--compare-gl", action="store_true")
    s.set_defaults(func=cmd_stability)

    p = sub.add_parser("propagate", help="run an orbit configuration")
    p.add_argument("config")
    p.add_argument("--out", default="-")
    p.add_argument("--csv")
    p.add_argument("--no-reference", action="store_true")
    p.set_defaults(func=cmd_propagate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CertificateError, ArithmeticError) as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERT


if __name__ == "__main__":
    sys.exit(main())
