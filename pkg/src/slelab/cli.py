"""Batch command-line front end.

Subcommands: `simulate` (driving/trace CSVs), `verify` (invariant batteries
with machine-readable JSON reports), `ising` (lattice experiments from a
domain file).  Every run writes a manifest naming its outputs; every CSV
carries the manifest path and a versioned schema tag in its header.

Exit codes: 0 pass, 1 statistical failure, 2 usage error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .rngutil import default_seed

SCHEMA_VERSION = 1


# ------------------------------------------------------------------ artifacts

def write_csv(path: Path, schema: str, header: list[str], rows, manifest_name: str):
    with open(path, "w", newline="") as fh:
        fh.write(f"# manifest: {manifest_name}\n")
        fh.write(f"# schema: {schema} v{SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_manifest(out_dir: Path, command: str, params: dict, seed: int,
                   outputs: list[str], started: float) -> Path:
    manifest = {
        "command": command,
        "params": params,
        "seed": seed,
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "outputs": outputs,
        "wall_clock_s": round(time.time() - started, 3),
    }
    path = out_dir / f"manifest-{command}.json"
    path.write_text(json.dumps(manifest, indent=2, default=float) + "\n")
    return path


# ------------------------------------------------------------------ simulate

def cmd_simulate(args) -> int:
    from .loewner import (BrownianDriver, HsleDriver, SleRhoDriver,
                          sample_path, trace_from_path)

    points = [float(x) for x in args.points.split(",")] if args.points else []
    try:
        if args.driver == "bm":
            spec = BrownianDriver(kappa=args.kappa)
        elif args.driver == "sle_rho":
            rhos = [float(x) for x in args.rho.split(",")] if args.rho else []
            if len(rhos) != len(points):
                raise ValueError("need one --rho weight per force point")
            spec = SleRhoDriver(kappa=args.kappa,
                                force=tuple(zip(points, rhos)))
        else:
            if len(points) != 2 or not 0.0 < points[0] < points[1]:
                raise ValueError(
                    "hsle needs --points x,y with 0 < x < y (seed at 0)")
            spec = HsleDriver(kappa=args.kappa, nu=args.nu,
                              x=points[0], y=points[1])
    except ValueError as exc:
        print(f"invalid driver parameters: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    manifest_name = f"manifest-simulate.json"
    outputs = []
    for i in range(args.n):
        path, _ = sample_path(spec, horizon=args.T, dt=args.dt,
                              seed=args.seed, path_index=i)
        name = f"driving-{i:04d}.csv"
        write_csv(out_dir / name, "driving",
                  ["t", "w"],
                  zip(path.times.tolist(), path.samples.tolist()),
                  manifest_name)
        outputs.append(name)
        if args.trace:
            tr = trace_from_path(path, stride=args.trace_stride)
            tname = f"trace-{i:04d}.csv"
            write_csv(out_dir / tname, "trace",
                      ["t", "re", "im"],
                      ((k * tr.dt, z.real, z.imag)
                       for k, z in enumerate(tr.points)),
                      manifest_name)
            outputs.append(tname)
    params = {k: v for k, v in vars(args).items() if k != "fn"}
    manifest = write_manifest(out_dir, "simulate", params | {"out": str(out_dir)},
                              args.seed, outputs, started)
    print(manifest)
    return 0


# ------------------------------------------------------------------ verify

def _suite_specialfn(args) -> tuple[bool, dict]:
    from .special import HypParams, Params, f_hsle, hyp2f1, hyp2f1_at_one

    rows = []
    ok = True
    worst = 0.0
    for z in np.linspace(0.0, 0.9, 91):
        got = hyp2f1(HypParams(1, 1, 2), float(z))
        want = 1.0 if z == 0 else -math.log1p(-z) / z
        rel = abs(got - want) / abs(want)
        worst = max(worst, rel)
    ok &= worst < 1e-10
    rows.append({"check": "log-identity", "worst_rel": worst, "tol": 1e-10})
    for k in (2.0, 3.0, 4.0, 6.0):
        lo = max(-4.0, k / 2 - 6)
        for nu in np.linspace(lo + 0.25, 4.0, 4):
            par = Params(kappa=k, nu=float(nu))
            zs = np.linspace(0, 0.999, 1000)
            vals = np.array([f_hsle(par, float(z)) for z in zs])
            d = np.diff(vals)
            mono = bool((d >= -1e-12).all() or (d <= 1e-12).all())
            f1 = hyp2f1_at_one(par.hyp_high())
            pinched = bool(vals.min() >= min(1.0, f1) - 1e-9
                           and vals.max() <= max(1.0, f1) + 1e-9)
            ok &= mono and pinched
            rows.append({"check": "monotone", "kappa": k, "nu": float(nu),
                         "monotone": mono, "bounded": pinched})
    return ok, {"rows": rows}


def _suite_pde(args) -> tuple[bool, dict]:
    from .linkpatterns import LinkPattern
    from .partition import pde_residual, pure_z_n1, pure_z_n2, z_kappa_nu
    from .special import Params, euler_ode_residual

    nested = LinkPattern([(1, 4), (2, 3)])
    side = LinkPattern([(1, 2), (3, 4)])
    pts = (0.0, 1.0, 2.0, 3.0)
    rows = []
    ok = True
    for k in (2.0, 3.0, 4.0, 6.0):
        par = Params(kappa=k, nu=0.0)
        r1 = euler_ode_residual(par, 0.4, 2e-3)
        r2 = euler_ode_residual(par, 0.4, 1e-3)
        if abs(r1) < 1e-10 and abs(r2) < 1e-10:
            rows.append({"check": "euler-ode", "kappa": k, "exact": True,
                         "pass": True})
        else:
            ratio = abs(r1 / r2)
            good = 3.5 <= ratio <= 4.5
            ok &= good
            rows.append({"check": "euler-ode", "kappa": k, "ratio": ratio,
                         "pass": good})
        fns = {
            "pure-n1": (lambda p, par=par: pure_z_n1(par, p[0], p[1]),
                        (0.0, 1.0), None),
            "pure-n2-nested": (lambda p, par=par: pure_z_n2(par, nested, *p),
                               pts, None),
            "pure-n2-side": (lambda p, par=par: pure_z_n2(par, side, *p),
                             pts, None),
            "quad": (lambda p, par=par: z_kappa_nu(par, *p), pts,
                     (par.h, par.b, par.b, par.h)),
        }
        for name, (fn, p0, weights) in fns.items():
            for i in range(len(p0)):
                if name == "quad" and i in (1, 2):
                    continue
                r1 = pde_residual(fn, k, i, p0, 2e-2, weights=weights)
                r2 = pde_residual(fn, k, i, p0, 1e-2, weights=weights)
                if abs(r1) < 1e-10 and abs(r2) < 1e-10:
                    rows.append({"check": name, "kappa": k, "i": i,
                                 "exact": True, "pass": True})
                    continue
                ratio = abs(r1 / r2)
                good = 3.5 <= ratio <= 4.5
                ok &= good
                rows.append({"check": name, "kappa": k, "i": i,
                             "ratio": ratio, "pass": good})
    return ok, {"rows": rows}


def _suite_cov(args) -> tuple[bool, dict]:
    from .geometry import MobiusMap
    from .linkpatterns import LinkPattern
    from .partition import bound_b_alpha, pure_z_n1, pure_z_n2, z_kappa_nu
    from .special import Params

    nested = LinkPattern([(1, 4), (2, 3)])
    side = LinkPattern([(1, 2), (3, 4)])
    pts = (0.0, 1.0, 2.5, 4.0)
    rng = np.random.default_rng(args.seed)
    maps = []
    while len(maps) < 200:
        phi = MobiusMap.random(rng)
        imgs = [phi(x) for x in pts]
        if all(b > a for a, b in zip(imgs, imgs[1:])):
            maps.append((phi, imgs))
    rows = []
    ok = True
    for k, nu in [(2.0, 1.0), (3.0, 0.0), (4.0, -1.0), (6.0, 0.0)]:
        par = Params(kappa=k, nu=nu)
        checks = {
            "quad": (lambda: z_kappa_nu(par, *pts),
                     lambda phi, imgs: math.prod(
                         phi.deriv(x) ** w for x, w in
                         zip(pts, (par.h, par.b, par.b, par.h)))
                     * z_kappa_nu(par, *imgs)),
            "pure-n2-nested": (lambda: pure_z_n2(par, nested, *pts),
                               lambda phi, imgs: math.prod(
                                   phi.deriv(x) ** par.h for x in pts)
                               * pure_z_n2(par, nested, *imgs)),
            "pure-n2-side": (lambda: pure_z_n2(par, side, *pts),
                             lambda phi, imgs: math.prod(
                                 phi.deriv(x) ** par.h for x in pts)
                             * pure_z_n2(par, side, *imgs)),
            "bound": (lambda: bound_b_alpha(par, nested, pts),
                      lambda phi, imgs: math.prod(
                          phi.deriv(x) ** par.h for x in pts)
                      * bound_b_alpha(par, nested, imgs)),
        }
        for name, (base_fn, mapped_fn) in checks.items():
            base = base_fn()
            worst = max(abs(mapped_fn(phi, imgs) - base) / base
                        for phi, imgs in maps)
            good = worst < 1e-8
            ok &= good
            rows.append({"check": name, "kappa": k, "nu": nu,
                         "worst_rel": worst, "pass": good})
    return ok, {"rows": rows}


def _suite_asy(args) -> tuple[bool, dict]:
    from .linkpatterns import LinkPattern
    from .partition import asy_ratio, pure_z_n1, pure_z_n2
    from .special import Params

    nested = LinkPattern([(1, 4), (2, 3)])
    side = LinkPattern([(1, 2), (3, 4)])
    pts = (0.0, 1.0, 2.0, 3.0)
    rows = []
    ok = True
    for k in (2.0, 3.0, 4.0, 6.0):
        par = Params(kappa=k, nu=0.0)
        s = 8.0 / k - 1.0
        exps = (s, 1.0) if abs(s - 1.0) > 1e-9 else (1.0, 2.0)
        gaps = np.array([1e-2, 1e-3, 1e-4])

        def extrapolate(fn, j):
            vals = np.array([asy_ratio(par, fn, j, pts, float(g))
                             for g in gaps])
            m = np.column_stack([np.ones(3), gaps ** exps[0], gaps ** exps[1]])
            return float(np.linalg.solve(m, vals)[0])

        fn_side = lambda p, par=par: pure_z_n2(par, side, *p)
        target = pure_z_n1(par, pts[2], pts[3])
        got = extrapolate(fn_side, 0)
        good = abs(got - target) / target < 1e-3
        ok &= good
        rows.append({"check": "linked-collapse", "kappa": k, "got": got,
                     "target": target, "pass": good})
        fn_nested = lambda p, par=par: pure_z_n2(par, nested, *p)
        ratios = np.array([asy_ratio(par, fn_nested, 0, pts, float(g))
                           for g in gaps])
        slope = float(np.polyfit(np.log(gaps), np.log(ratios), 1)[0])
        expect = (8.0 - k) / k
        good = abs(slope - expect) / expect < 0.10
        ok &= good
        rows.append({"check": "unlinked-decay", "kappa": k, "slope": slope,
                     "expect": expect, "pass": good})
    return ok, {"rows": rows}


def _suite_cascade(args) -> tuple[bool, dict]:
    from .cascade import MCConfig, estimate_pure_z, symmetry_report
    from .linkpatterns import LinkPattern
    from .partition import bound_b_alpha, pure_z_n2
    from .special import Params

    n = args.n or (800 if args.quick else 5000)
    par = Params(kappa=3.0, nu=0.0)
    rows = []
    ok = True
    if args.N <= 2:
        for pat_links, name in [(((1, 4), (2, 3)), "nested"),
                                (((1, 2), (3, 4)), "side")]:
            pat = LinkPattern(pat_links)
            target = pure_z_n2(par, pat, 0, 1, 2, 3)
            est = estimate_pure_z(par, pat, (0, 1, 2, 3), 0,
                                  MCConfig(n_paths=n, seed=args.seed,
                                           workers=args.workers))
            z = (est.mean - target) / est.stderr
            good = abs(z) <= 3.0
            bound = bound_b_alpha(par, pat, (0, 1, 2, 3))
            within = est.mean <= bound * (1 + 3 * est.stderr / est.mean)
            ok &= good and within
            rows.append({"alpha": pat.format(), "k": 0, "mean": est.mean,
                         "stderr": est.stderr, "n": est.n, "target": target,
                         "z": z, "bound_ok": within, "pass": good})
    else:
        alpha = LinkPattern([(1, 6), (2, 3), (4, 5)])
        rep = symmetry_report(par, alpha, (0, 1, 2, 3, 4, 5),
                              MCConfig(n_paths=n, seed=args.seed,
                                       workers=args.workers))
        for row in rep:
            good = all(abs(z) < 3.0 for z in row["z_vs_others"])
            ok &= good
            rows.append({"alpha": alpha.format(), "k": row["k"],
                         "mean": row["estimate"].mean,
                         "stderr": row["estimate"].stderr,
                         "z_vs_others": row["z_vs_others"], "pass": good})
    return ok, {"rows": rows}


def _suite_crossing(args) -> tuple[bool, dict]:
    from .martingales import terminal_endpoint_kappa4

    n = args.n or (2000 if args.quick else 10000)
    r = terminal_endpoint_kappa4(nu=-4.0, points=(0, 1, 2, 3), n_paths=n,
                                 dt=1e-4, seed=args.seed, workers=args.workers)
    good = r.passed(allowance=0.01)
    return good, {"rows": [r.row()]}


def _suite_ising_smoke(args) -> tuple[bool, dict]:
    from .ising import (alternating_domain, crossing_events_dual,
                        dobrushin_kappa_experiment, sample_critical)

    started = time.time()
    n = args.n or 60
    dom = alternating_domain(32, 32)
    xor_ok = 0
    c_v = 0
    for k in range(n):
        spins = sample_critical(dom, seed=args.seed + k)
        cv, ch = crossing_events_dual(spins, dom)
        xor_ok += cv != ch
        c_v += cv
    kap = dobrushin_kappa_experiment(32, max(n, 60), seed=args.seed + 50_000)
    elapsed = time.time() - started
    ok = xor_ok == n and elapsed < 60.0 and 1.5 < kap["slope"] < 4.5
    report = {
        "duality_xor": xor_ok / n,
        "c_v_frequency": c_v / n,
        "c_h_frequency": 1.0 - c_v / n,
        "kappa_slope_32": kap["slope"],
        "kappa_stderr": kap["stderr"],
        "elapsed_s": elapsed,
    }
    return ok, report


SUITES = {
    "specialfn": _suite_specialfn,
    "pde": _suite_pde,
    "cov": _suite_cov,
    "asy": _suite_asy,
    "cascade": _suite_cascade,
    "crossing": _suite_crossing,
    "ising-smoke": _suite_ising_smoke,
}


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}",
              file=sys.stderr)
        return 2
    started = time.time()
    try:
        ok, report = SUITES[args.suite](args)
    except Exception as exc:  # internal invariant violation
        print(f"suite {args.suite} crashed: {exc}", file=sys.stderr)
        return 3
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "suite": args.suite,
        "passed": bool(ok),
        "seed": args.seed,
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "wall_clock_s": round(time.time() - started, 3),
        "report": report,
    }
    path = out_dir / f"verify-{args.suite}.json"
    path.write_text(json.dumps(payload, indent=2, default=float) + "\n")
    print(f"{args.suite}: {'PASS' if ok else 'FAIL'} ({path})")
    return 0 if ok else 1


# ------------------------------------------------------------------ ising

def parse_domain_file(path: Path):
    from .ising import alternating_domain, dobrushin_domain, rsw_domain

    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    try:
        width = int(values.get("width", "32"))
        height = int(values.get("height", "32"))
        arcs = values.get("arcs", "dobrushin")
        samples = int(values.get("samples", "100"))
    except ValueError as exc:
        raise ValueError(f"{path}: bad field value: {exc}") from exc
    if arcs == "dobrushin":
        dom = dobrushin_domain(width, height)
    elif arcs == "alternating":
        dom = alternating_domain(width, height)
    elif arcs == "alternating-free":
        from .ising import FREE
        dom = alternating_domain(width, height, top=FREE)
    elif arcs == "rsw":
        dom = rsw_domain(height)
    else:
        raise ValueError(
            f"{path}: field 'arcs': unknown value {arcs!r} "
            "(want dobrushin, alternating, alternating-free or rsw)")
    return dom, samples, values


def cmd_ising(args) -> int:
    from .ising import (crossing_events, crossing_events_dual,
                        dobrushin_kappa_experiment, sample_critical,
                        trace_interface)

    try:
        dom, samples, values = parse_domain_file(Path(args.domain))
    except (OSError, ValueError) as exc:
        print(f"bad domain file: {exc}", file=sys.stderr)
        return 2
    samples = args.n or samples
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    manifest_name = "manifest-ising.json"
    rows = []
    interface_rows = []
    for k in range(samples):
        spins = sample_critical(dom, seed=args.seed + k)
        c_v, c_h = crossing_events(spins, dom)
        c_v_d, c_h_d = crossing_events_dual(spins, dom)
        rows.append((k, int(c_v), int(c_h), int(c_v_d), int(c_h_d)))
        if args.interfaces and k < args.interfaces:
            try:
                path = trace_interface(spins, dom, dom.marks[0])
                interface_rows += [(k, i, x, y) for i, (x, y) in enumerate(path)]
            except Exception:
                pass
    outputs = ["events.csv"]
    write_csv(out_dir / "events.csv", "ising-events",
              ["sample", "c_v_minus", "c_h_plus", "c_v_dual", "c_h_dual"],
              rows, manifest_name)
    if interface_rows:
        write_csv(out_dir / "interfaces.csv", "ising-interface",
                  ["sample", "step", "x", "y"], interface_rows, manifest_name)
        outputs.append("interfaces.csv")
    report = {
        "c_v_frequency": sum(r[1] for r in rows) / samples,
        "c_h_frequency": sum(r[2] for r in rows) / samples,
        "dual_sum": (sum(r[3] for r in rows) + sum(r[4] for r in rows)) / samples,
    }
    if args.kappa_slope:
        kap = dobrushin_kappa_experiment(dom.width, samples, seed=args.seed)
        report["kappa_slope"] = kap["slope"]
        report["kappa_stderr"] = kap["stderr"]
        write_csv(out_dir / "kappa.csv", "ising-kappa",
                  ["size", "n", "slope", "stderr", "t_fit"],
                  [(kap["size"], kap["n"], kap["slope"], kap["stderr"],
                    kap["t_fit"])], manifest_name)
        outputs.append("kappa.csv")
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2, default=float) + "\n")
    outputs.append("report.json")
    manifest = write_manifest(out_dir, "ising",
                              {"domain": values, "samples": samples},
                              args.seed, outputs, started)
    print(manifest)
    return 0


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slelab",
                                description="SLE simulation laboratory")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="sample driving functions / traces")
    sim.add_argument("--driver", choices=("bm", "sle_rho", "hsle"),
                     default="bm")
    sim.add_argument("--kappa", type=float, required=True)
    sim.add_argument("--nu", type=float, default=0.0)
    sim.add_argument("--points", default="",
                     help="comma list: force points (sle_rho) or x,y (hsle)")
    sim.add_argument("--rho", default="", help="comma list of force weights")
    sim.add_argument("--dt", type=float, default=1e-4)
    sim.add_argument("--T", type=float, default=1.0)
    sim.add_argument("--n", type=int, default=1)
    sim.add_argument("--seed", type=int, default=default_seed())
    sim.add_argument("--trace", action="store_true")
    sim.add_argument("--trace-stride", type=int, default=1)
    sim.add_argument("--out", default="out")
    sim.set_defaults(fn=cmd_simulate)

    ver = sub.add_parser("verify", help="run an invariant battery")
    ver.add_argument("suite")
    ver.add_argument("--quick", action="store_true")
    ver.add_argument("--n", type=int, default=0)
    ver.add_argument("--N", type=int, default=2, help="cascade pattern size")
    ver.add_argument("--seed", type=int, default=default_seed())
    ver.add_argument("--workers", type=int, default=0)
    ver.add_argument("--out", default="out")
    ver.set_defaults(fn=cmd_verify)

    isg = sub.add_parser("ising", help="lattice experiments from a domain file")
    isg.add_argument("domain")
    isg.add_argument("--n", type=int, default=0,
                     help="override the file's sample count")
    isg.add_argument("--seed", type=int, default=default_seed())
    isg.add_argument("--interfaces", type=int, default=0,
                     help="write the first K interface paths")
    isg.add_argument("--kappa-slope", action="store_true")
    isg.add_argument("--out", default="out")
    isg.set_defaults(fn=cmd_ising)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
